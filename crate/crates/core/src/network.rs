//! Random `t`-layer convolutional networks with a linear readout,
//! `H_b(f) = <u, sigma(L_t ... sigma(L_1 f))>`.
//!
//! Gradients use the backward products
//!
//! ```text
//! Phi_{t+1} = u,   Phi_i = L_i^T (sigma'(z_i) .* Phi_{i+1}),   grad H_b(f) = Phi_1
//! ```
//!
//! and Jacobian-vector products use `J = D_t L_t ... D_1 L_1` with
//! `D_l = diag(sigma'(z_l))`.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, SQRT_2};

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::convop::{ConvLayer, LayerBundle, OffsetPolicy};
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::rng::{self, tag};
use crate::signal::{Signal, SignalKind};
use crate::spectral;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    /// `log(1 + e^x) - log 2`
    ShiftedSoftplus,
    /// `x * Phi(x)` with `Phi` the standard normal CDF.
    GeluLike,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "shifted-softplus" => Ok(Activation::ShiftedSoftplus),
            "gelu-like" => Ok(Activation::GeluLike),
            other => Err(Error::invalid("activation", format!("unknown activation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::ShiftedSoftplus => "shifted-softplus",
            Activation::GeluLike => "gelu-like",
        })
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of scanning an activation on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub grid_sup_d1: f64,
    pub grid_sup_d2: f64,
    /// min over the grid of `sigma'(r)^2 + sigma'(-r)^2`
    pub grid_min_pair: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
    pub c: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.grid_sup_d1 <= self.sup_d1
            && self.grid_sup_d2 <= self.sup_d2
            && self.grid_min_pair >= 2.0 * self.c * self.c
    }
}

impl Activation {
    pub const ALL: [Activation; 3] = [
        Activation::Identity,
        Activation::ShiftedSoftplus,
        Activation::GeluLike,
    ];

    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::ShiftedSoftplus => {
                if x > 30.0 {
                    x - LN_2 + (-x).exp().ln_1p()
                } else {
                    // exact zero at the origin
                    (0.5 * x.exp_m1()).ln_1p()
                }
            }
            Activation::GeluLike => x * normal_cdf(x),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::ShiftedSoftplus => logistic(x),
            Activation::GeluLike => normal_cdf(x) + x * normal_pdf(x),
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 0.0,
            Activation::ShiftedSoftplus => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::GeluLike => normal_pdf(x) * (2.0 - x * x),
        }
    }

    /// `sup |sigma'|`. For the gelu-like activation the supremum sits at `sqrt 2`.
    pub fn sup_d1(self) -> f64 {
        match self {
            Activation::Identity | Activation::ShiftedSoftplus => 1.0,
            Activation::GeluLike => normal_cdf(SQRT_2) + SQRT_2 * normal_pdf(SQRT_2),
        }
    }

    /// `sup |sigma''|`.
    pub fn sup_d2(self) -> f64 {
        match self {
            Activation::Identity => 0.0,
            Activation::ShiftedSoftplus => 0.25,
            Activation::GeluLike => 2.0 * INV_SQRT_2PI,
        }
    }

    /// `c` with `sigma'(r)^2 + sigma'(-r)^2 >= 2c^2`. Both smooth activations
    /// satisfy `sigma'(r) + sigma'(-r) = 1`, hence `c = 1/2`.
    pub fn c(self) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::ShiftedSoftplus | Activation::GeluLike => 0.5,
        }
    }

    /// Scan `[-50, 50]` with step `1e-3` and compare with the stored constants.
    pub fn certify(self) -> Certificate {
        let mut cert = Certificate {
            grid_sup_d1: 0.0,
            grid_sup_d2: 0.0,
            grid_min_pair: f64::INFINITY,
            sup_d1: self.sup_d1(),
            sup_d2: self.sup_d2(),
            c: self.c(),
        };
        for k in -50_000i32..=50_000 {
            let r = k as f64 * 1e-3;
            cert.grid_sup_d1 = cert.grid_sup_d1.max(self.d1(r).abs());
            cert.grid_sup_d2 = cert.grid_sup_d2.max(self.d2(r).abs());
            cert.grid_min_pair = cert
                .grid_min_pair
                .min(self.d1(r).powi(2) + self.d1(-r).powi(2));
        }
        cert
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkBundle", into = "NetworkBundle")]
pub struct Network {
    spec: GroupSpec,
    layers: Vec<ConvLayer>,
    activation: Activation,
    readout: Vec<f64>,
    seed: Option<u64>,
}

/// Serialized network: layers, readout, activation name and the seed it was
/// drawn from (if any).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkBundle {
    pub group: Vec<usize>,
    pub activation: Activation,
    pub seed: Option<u64>,
    pub layers: Vec<LayerBundle>,
    pub readout: Vec<f64>,
}

impl From<Network> for NetworkBundle {
    fn from(net: Network) -> Self {
        NetworkBundle {
            group: net.spec.moduli().to_vec(),
            activation: net.activation,
            seed: net.seed,
            layers: net.layers.into_iter().map(LayerBundle::from).collect(),
            readout: net.readout,
        }
    }
}

impl TryFrom<NetworkBundle> for Network {
    type Error = Error;

    fn try_from(b: NetworkBundle) -> Result<Self> {
        let spec = GroupSpec::new(b.group)?;
        let layers = b
            .layers
            .into_iter()
            .map(ConvLayer::try_from)
            .collect::<Result<Vec<_>>>()?;
        let mut net = Network::new(&spec, layers, b.activation, b.readout)?;
        net.seed = b.seed;
        Ok(net)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub input: Signal,
    /// `z^(l)`, l = 1..t
    pub pre: Vec<Signal>,
    /// `h^(l) = sigma(z^(l))`, l = 1..t
    pub post: Vec<Signal>,
    pub output: f64,
}

/// Backward products `Phi_1, .., Phi_{t+1}` (index 0 holds `Phi_1`, the gradient).
#[derive(Clone, Debug, PartialEq)]
pub struct Backward {
    pub phis: Vec<Signal>,
}

impl Backward {
    pub fn gradient(&self) -> &Signal {
        &self.phis[0]
    }

    /// `max_{1<=i<=t} ||Phi_i||_inf` (the readout `Phi_{t+1}` excluded).
    pub fn m_infty(&self) -> f64 {
        self.phis[..self.phis.len() - 1]
            .iter()
            .map(Signal::linf_norm)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusEstimate {
    pub mean: f64,
    /// Sample standard deviation over probes divided by `sqrt(probes)`;
    /// zero when a single probe is used.
    pub std_err: f64,
    pub probes: usize,
}

/// Which width/size hypotheses of the asymptotic analysis a configuration meets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub c_w: f64,
    pub c_g: f64,
    /// `d_{l-1} >= c_w d_l` for every layer
    pub width_ratio: bool,
    /// `d_max <= |G|`
    pub d_max_le_order: bool,
    /// `d_min >= c_G log |G|`
    pub d_min_log: bool,
    /// `|G| >= t`
    pub order_ge_depth: bool,
}

impl HypothesisReport {
    pub fn all(&self) -> bool {
        self.width_ratio && self.d_max_le_order && self.d_min_log && self.order_ge_depth
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub delta: f64,
    /// Max spectral norm over layers.
    pub m_s: f64,
    pub m_infty: f64,
    /// Analytic upper bound on `M(f, delta)`.
    pub m_analytic: f64,
    /// Largest sampled `max_l ||s_l(f') - s_l(f'')||` over antipodal pairs
    /// `f +- delta w`: a lower estimate of `M(f, delta)`.
    pub m_hat: f64,
    /// `M_s M_inf M(f,delta) (sup|sigma'| M_s + 2)^{t+1}` with the analytic `M`.
    pub robustness_bound: f64,
    /// Largest sampled `||grad H_b(f') - grad H_b(f)||`, `||f' - f|| = delta`.
    pub max_grad_deviation: f64,
    pub probes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MInftyCheck {
    pub m_infty: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Network {
    pub fn new(
        spec: &GroupSpec,
        layers: Vec<ConvLayer>,
        activation: Activation,
        readout: Vec<f64>,
    ) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("widths", "a network needs at least one layer"));
        };
        for (l, layer) in layers.iter().enumerate() {
            if layer.spec() != spec {
                return Err(Error::structural(format!("layer {l} is over a different group")));
            }
            if l > 0 && layers[l - 1].d_out() != layer.d_in() {
                return Err(Error::structural(format!(
                    "layer {l} expects {} channels, previous layer emits {}",
                    layer.d_in(),
                    layers[l - 1].d_out()
                )));
            }
        }
        let n_t = spec.order() * last.d_out();
        if readout.len() != n_t {
            return Err(Error::structural(format!(
                "readout has length {}, expected N_t = {n_t}",
                readout.len()
            )));
        }
        Ok(Network {
            spec: spec.clone(),
            layers,
            activation,
            readout,
            seed: None,
        })
    }

    /// Random network with widths `d_0..d_t`. `ns` gives the offset count per
    /// layer; a single entry applies to every layer.
    pub fn random(
        spec: &GroupSpec,
        widths: &[usize],
        ns: &[usize],
        policy: OffsetPolicy,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("widths", "need d_0..d_t with t >= 1"));
        }
        if widths.contains(&0) {
            return Err(Error::invalid("widths", "widths must be positive"));
        }
        let t = widths.len() - 1;
        if ns.len() != 1 && ns.len() != t {
            return Err(Error::invalid(
                "n",
                format!("expected 1 or {t} offset counts, got {}", ns.len()),
            ));
        }
        let layers = (0..t)
            .map(|l| {
                let n = if ns.len() == 1 { ns[0] } else { ns[l] };
                ConvLayer::random(
                    spec,
                    widths[l],
                    widths[l + 1],
                    n,
                    policy,
                    rng::derive_seed(seed, &[tag::LAYER, l as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let n_t = spec.order() * widths[t];
        let normal = Normal::new(0.0, (1.0 / n_t as f64).sqrt()).expect("positive variance");
        let mut g = rng::derived_generator(seed, &[tag::READOUT]);
        let readout = (0..n_t).map(|_| normal.sample(&mut g)).collect();
        let mut net = Network::new(spec, layers, activation, readout)?;
        net.seed = Some(seed);
        Ok(net)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn readout(&self) -> &[f64] {
        &self.readout
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `t`
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `d_0..d_t`
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].d_in())
            .chain(self.layers.iter().map(ConvLayer::d_out))
            .collect()
    }

    /// `N_0`
    pub fn input_len(&self) -> usize {
        self.spec.order() * self.layers[0].d_in()
    }

    /// `N_t`
    pub fn output_len(&self) -> usize {
        self.readout.len()
    }

    pub fn forward(&self, f: &Signal) -> Result<ForwardTrace> {
        f.check_shape(&self.spec, self.layers[0].d_in(), "forward")?;
        let mut pre = Vec::with_capacity(self.depth());
        let mut post: Vec<Signal> = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            let h_prev = post.last().unwrap_or(f);
            let z = layer.apply(h_prev)?;
            let mut h = z.clone();
            h.as_flat_mut()
                .iter_mut()
                .for_each(|v| *v = self.activation.value(*v));
            pre.push(z);
            post.push(h);
        }
        let output = dot(&self.readout, post.last().expect("t >= 1").as_flat());
        Ok(ForwardTrace {
            input: f.clone(),
            pre,
            post,
            output,
        })
    }

    pub fn output(&self, f: &Signal) -> Result<f64> {
        Ok(self.forward(f)?.output)
    }

    fn derivative(&self, z: &Signal) -> Vec<f64> {
        z.as_flat().iter().map(|&v| self.activation.d1(v)).collect()
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        if trace.pre.len() != self.depth() {
            return Err(Error::structural("trace depth does not match network"));
        }
        trace
            .input
            .check_shape(&self.spec, self.layers[0].d_in(), "trace")
    }

    pub fn backward(&self, trace: &ForwardTrace) -> Result<Backward> {
        self.check_trace(trace)?;
        let t = self.depth();
        let mut phis = vec![Signal::from_flat(
            &self.spec,
            self.layers[t - 1].d_out(),
            self.readout.clone(),
        )?];
        for l in (0..t).rev() {
            let layer = &self.layers[l];
            let s = self.derivative(&trace.pre[l]);
            let next = phis.last().expect("non-empty");
            let weighted: Vec<f64> = next.as_flat().iter().zip(&s).map(|(p, d)| p * d).collect();
            let mut phi = Signal::zeros(&self.spec, layer.d_in())?;
            layer.apply_adjoint_into(&weighted, phi.as_flat_mut());
            phis.push(phi);
        }
        phis.reverse();
        Ok(Backward { phis })
    }

    /// `grad H_b(f) = Phi_1`.
    pub fn gradient(&self, trace: &ForwardTrace) -> Result<Signal> {
        Ok(self.backward(trace)?.phis.swap_remove(0))
    }

    /// `J v` with `J` the Jacobian of the convolutional part at the traced input.
    pub fn jacobian_vector_product(&self, trace: &ForwardTrace, v: &Signal) -> Result<Signal> {
        self.check_trace(trace)?;
        v.check_shape(&self.spec, self.layers[0].d_in(), "jacobian_vector_product")?;
        let mut w = v.clone();
        for (layer, z) in self.layers.iter().zip(&trace.pre) {
            let mut next = layer.apply(&w)?;
            for (x, &zv) in next.as_flat_mut().iter_mut().zip(z.as_flat()) {
                *x *= self.activation.d1(zv);
            }
            w = next;
        }
        Ok(w)
    }

    /// `||D_l L_l v||^2` for the layer with zero-based index `layer`.
    pub fn layer_direction_gain(&self, trace: &ForwardTrace, layer: usize, v: &Signal) -> Result<f64> {
        self.check_trace(trace)?;
        let lay = self
            .layers
            .get(layer)
            .ok_or_else(|| Error::structural(format!("no layer {layer}")))?;
        let lv = lay.apply(v)?;
        Ok(lv
            .as_flat()
            .iter()
            .zip(trace.pre[layer].as_flat())
            .map(|(x, &z)| (self.activation.d1(z) * x).powi(2))
            .sum())
    }

    /// Dense `N_t x N_0` Jacobian, built column by column.
    pub fn jacobian_dense(&self, trace: &ForwardTrace) -> Result<DMatrix<f64>> {
        let n0 = self.input_len();
        let mut jac = DMatrix::zeros(self.output_len(), n0);
        let mut e = Signal::zeros(&self.spec, self.layers[0].d_in())?;
        for j in 0..n0 {
            e.as_flat_mut()[j] = 1.0;
            let col = self.jacobian_vector_product(trace, &e)?;
            jac.column_mut(j).copy_from_slice(col.as_flat());
            e.as_flat_mut()[j] = 0.0;
        }
        Ok(jac)
    }

    /// Exact `||J||_F^2` as the sum of squared column norms.
    pub fn frobenius_exact(&self, trace: &ForwardTrace) -> Result<f64> {
        let mut e = Signal::zeros(&self.spec, self.layers[0].d_in())?;
        let mut total = 0.0;
        for j in 0..self.input_len() {
            e.as_flat_mut()[j] = 1.0;
            total += self.jacobian_vector_product(trace, &e)?.norm_sqr();
            e.as_flat_mut()[j] = 0.0;
        }
        Ok(total)
    }

    /// Hutchinson estimate `||J||_F^2 = E_r ||J r||^2`, `r` Rademacher.
    pub fn frobenius_estimate(
        &self,
        trace: &ForwardTrace,
        probes: usize,
        seed: u64,
    ) -> Result<FrobeniusEstimate> {
        if probes == 0 {
            return Err(Error::invalid("probes", "need at least one probe"));
        }
        let d0 = self.layers[0].d_in();
        let samples = (0..probes)
            .map(|k| {
                let r = Signal::random(
                    &self.spec,
                    d0,
                    SignalKind::Rademacher,
                    rng::derive_seed(seed, &[tag::PROBES, k as u64]),
                )?;
                Ok(self.jacobian_vector_product(trace, &r)?.norm_sqr())
            })
            .collect::<Result<Vec<f64>>>()?;
        let p = probes as f64;
        let mean = samples.iter().sum::<f64>() / p;
        let std_err = if probes > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p - 1.0);
            (var / p).sqrt()
        } else {
            0.0
        };
        Ok(FrobeniusEstimate {
            mean,
            std_err,
            probes,
        })
    }

    /// Spectral norm of every layer, via character blocks.
    pub fn layer_norms(&self) -> Result<Vec<f64>> {
        self.layers.iter().map(spectral::spectral_norm).collect()
    }

    /// `M_s = max_l ||L_l||`.
    pub fn max_layer_norm(&self) -> Result<f64> {
        Ok(self.layer_norms()?.into_iter().fold(0.0, f64::max))
    }

    /// Analytic bound `sup|sigma''| (sup|sigma'| M_s)^t (2 delta)` on `M(f, delta)`.
    /// The base is floored at 1, which is the regime the bound is stated for.
    pub fn activation_change_bound(&self, m_s: f64, delta: f64) -> f64 {
        let act = self.activation;
        act.sup_d2() * (act.sup_d1() * m_s).max(1.0).powi(self.depth() as i32) * 2.0 * delta
    }

    /// `M_s M_inf M (sup|sigma'| M_s + 2)^{t+1}`.
    pub fn robustness_bound(&self, m_s: f64, m_infty: f64, m: f64) -> f64 {
        m_s * m_infty * m * (self.activation.sup_d1() * m_s + 2.0).powi(self.depth() as i32 + 1)
    }

    /// Brackets the gradient's variation over `B(f, delta)`.
    pub fn diagnostics(
        &self,
        trace: &ForwardTrace,
        delta: f64,
        probes: usize,
        seed: u64,
    ) -> Result<Diagnostics> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "radius must be positive"));
        }
        let m_s = self.max_layer_norm()?;
        let back = self.backward(trace)?;
        let m_infty = back.m_infty();
        let grad = back.gradient();
        let m_analytic = self.activation_change_bound(m_s, delta);
        let robustness_bound = self.robustness_bound(m_s, m_infty, m_analytic);

        let d0 = self.layers[0].d_in();
        let mut m_hat: f64 = 0.0;
        let mut max_dev: f64 = 0.0;
        for k in 0..probes {
            let mut g = rng::derived_generator(seed, &[tag::BALL, k as u64]);
            let mut w = Signal::zeros(&self.spec, d0)?;
            for x in w.as_flat_mut() {
                *x = StandardNormal.sample(&mut g);
            }
            let w = w.scaled(delta / w.l2_norm());
            let plus = self.forward(&trace.input.add_scaled(1.0, &w)?)?;
            let minus = self.forward(&trace.input.add_scaled(-1.0, &w)?)?;
            for (zp, zm) in plus.pre.iter().zip(&minus.pre) {
                let diff: f64 = zp
                    .as_flat()
                    .iter()
                    .zip(zm.as_flat())
                    .map(|(&a, &b)| (self.activation.d1(a) - self.activation.d1(b)).powi(2))
                    .sum();
                m_hat = m_hat.max(diff.sqrt());
            }
            let g_plus = self.gradient(&plus)?;
            max_dev = max_dev.max(g_plus.add_scaled(-1.0, grad)?.l2_norm());
        }
        Ok(Diagnostics {
            delta,
            m_s,
            m_infty,
            m_analytic,
            m_hat,
            robustness_bound,
            max_grad_deviation: max_dev,
            probes,
        })
    }

    /// `sqrt(2 log(2 t d_max |G| / 0.01)) (M_s sup|sigma'|)^t / sqrt(N_t)`.
    pub fn m_infty_bound(&self, m_s: f64) -> f64 {
        let t = self.depth() as f64;
        let d_max = *self.widths().iter().max().expect("non-empty") as f64;
        let order = self.spec.order() as f64;
        (2.0 * (2.0 * t * d_max * order / 0.01).ln()).sqrt()
            * (m_s * self.activation.sup_d1()).powi(self.depth() as i32)
            / (self.output_len() as f64).sqrt()
    }

    pub fn m_infty_bound_check(&self, trace: &ForwardTrace) -> Result<MInftyCheck> {
        let m_s = self.max_layer_norm()?;
        let m_infty = self.backward(trace)?.m_infty();
        let bound = self.m_infty_bound(m_s);
        Ok(MInftyCheck {
            m_infty,
            bound,
            pass: m_infty <= bound,
        })
    }

    /// Checks the size hypotheses with `c_G = c_w^2`.
    pub fn hypotheses(&self, c_w: f64) -> HypothesisReport {
        let widths = self.widths();
        let order = self.spec.order();
        let d_min = *widths.iter().min().expect("non-empty") as f64;
        let d_max = *widths.iter().max().expect("non-empty");
        let c_g = c_w * c_w;
        HypothesisReport {
            c_w,
            c_g,
            width_ratio: widths.windows(2).all(|w| w[0] as f64 >= c_w * w[1] as f64),
            d_max_le_order: d_max <= order,
            d_min_log: d_min >= c_g * (order as f64).ln(),
            order_ge_depth: order >= self.depth(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
