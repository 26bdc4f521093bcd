//! Single-step gradient attack `f1 = f - s eta grad H_b(f)` with
//! `eta = 2a / ||grad H_b(f)||^2` and `s = sign(H_b(f))` (`s = +1` at zero),
//! so the output moves by about `2a` towards and across the decision boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convop::OffsetPolicy;
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::network::{Activation, Network};
use crate::rng::{self, tag};
use crate::signal::{Signal, SignalKind};
use crate::stats;

/// How the constant `a` in `eta = 2a / ||g||^2` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum StepSize {
    /// `a = 10 sup|sigma'|^t`, the high-probability envelope on `|H_b|`.
    #[default]
    Envelope,
    Fixed(f64),
    /// `a = |H_b(f)|`: just enough to reach the boundary to first order.
    Oracle,
}

impl StepSize {
    pub fn resolve(self, net: &Network, output: f64) -> f64 {
        match self {
            StepSize::Envelope => envelope(net),
            StepSize::Fixed(a) => a,
            StepSize::Oracle => output.abs(),
        }
    }
}

/// `10 sup|sigma'|^t`.
pub fn envelope(net: &Network) -> f64 {
    10.0 * net.activation().sup_d1().powi(net.depth() as i32)
}

/// The radius `2a / c_1` inside which the gradient must stay stable for the
/// step to succeed, with `c_1 = sqrt(0.0001 (0.1 c^2)^t / (2e))` the
/// high-probability lower bound on `||grad H_b||`.
pub fn robustness_radius(net: &Network, a: f64) -> f64 {
    let c = net.activation().c();
    let c1 = (0.0001 * (0.1 * c * c).powi(net.depth() as i32) / (2.0 * std::f64::consts::E)).sqrt();
    2.0 * a / c1
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub hb_before: f64,
    pub sign_before: i8,
    /// The constant `a` used.
    pub a: f64,
    pub eta: f64,
    pub perturbed: Signal,
    pub hb_after: f64,
    pub sign_after: i8,
    /// `sign_after != sign_before`; reaching exactly zero counts as a flip.
    pub flipped: bool,
    /// `H_b(f) == 0`: the input already lies on the decision boundary.
    pub on_boundary: bool,
    /// `||f - f1|| = eta ||g||`
    pub step_len: f64,
    /// `||f - f1|| sqrt(N_0) / ||f||`; absent for `f = 0`.
    pub rho: Option<f64>,
    pub grad_norm: f64,
    /// `||f||_inf > 1`: the input violates the bounded-input hypothesis.
    pub input_out_of_range: bool,
}

pub fn single_step_attack(net: &Network, f: &Signal, step: StepSize) -> Result<AttackReport> {
    let trace = net.forward(f)?;
    let hb_before = trace.output;
    let grad = net.gradient(&trace)?;
    let grad_norm = grad.l2_norm();
    if !(grad_norm > 0.0) {
        return Err(Error::DegenerateAttack {
            output: hb_before,
            grad_norm,
        });
    }
    let input_out_of_range = f.linf_norm() > 1.0;
    if input_out_of_range {
        log::warn!("attack input has ||f||_inf = {} > 1", f.linf_norm());
    }
    let a = step.resolve(net, hb_before);
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid("a", format!("step constant must be finite and >= 0, got {a}")));
    }
    let eta = 2.0 * a / (grad_norm * grad_norm);
    let direction = if hb_before >= 0.0 { 1.0 } else { -1.0 };
    let perturbed = f.add_scaled(-direction * eta, &grad)?;
    let hb_after = net.output(&perturbed)?;
    let sign_before = sign(hb_before);
    let sign_after = sign(hb_after);
    let step_len = eta * grad_norm;
    let f_norm = f.l2_norm();
    let rho = (f_norm > 0.0).then(|| step_len * (f.len() as f64).sqrt() / f_norm);
    Ok(AttackReport {
        hb_before,
        sign_before,
        a,
        eta,
        perturbed,
        hb_after,
        sign_after,
        flipped: sign_after != sign_before,
        on_boundary: hb_before == 0.0,
        step_len,
        rho,
        grad_norm,
        input_out_of_range,
    })
}

/// One network architecture in a sweep; the group varies per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub groups: Vec<GroupSpec>,
    /// `d_0..d_t`
    pub widths: Vec<usize>,
    /// Offset count per layer (one entry broadcasts); clamped to `|G|`.
    pub n: Vec<usize>,
    pub policy: OffsetPolicy,
    pub activation: Activation,
    pub step: StepSize,
    pub input: SignalKind,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N_0")]
    pub n0: usize,
    #[serde(rename = "|G|")]
    pub order: usize,
    pub d_0: usize,
    pub seed: u64,
    pub flip: bool,
    pub rho: Option<f64>,
    pub step_len: f64,
    pub grad_norm: f64,
    #[serde(rename = "Hb_before")]
    pub hb_before: f64,
    #[serde(rename = "Hb_after")]
    pub hb_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub group: GroupSpec,
    pub n0: usize,
    pub trials: usize,
    pub flip_rate: f64,
    pub median_rho: Option<f64>,
    pub median_step_len: Option<f64>,
    pub median_grad_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

impl SweepTable {
    /// Largest over smallest median `rho` across the grid.
    pub fn rho_spread(&self) -> Option<f64> {
        spread(self.summaries.iter().map(|s| s.median_rho))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            out.write_record([
                "N_0", "|G|", "d_0", "seed", "flip", "rho", "step_len", "grad_norm", "Hb_before", "Hb_after",
            ])?;
        }
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn spread(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<_>>()?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (min > 0.0).then(|| max / min)
}

/// Network and input seeds of a trial. The same trial index reuses its seeds
/// across grid points.
pub fn network_and_input_seeds(trial_seed: u64) -> (u64, u64) {
    (
        rng::derive_seed(trial_seed, &[tag::NETWORK]),
        rng::derive_seed(trial_seed, &[tag::INPUT]),
    )
}

pub fn distance_scaling_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.groups.is_empty() {
        return Err(Error::invalid("groups", "sweep grid is empty"));
    }
    let mut rows = Vec::with_capacity(cfg.groups.len() * cfg.trials);
    let mut summaries = Vec::with_capacity(cfg.groups.len());
    for spec in &cfg.groups {
        let n: Vec<usize> = cfg.n.iter().map(|&n| n.min(spec.order())).collect();
        let block = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|k| {
                let seed = rng::trial_seed(cfg.master_seed, k);
                let (net_seed, input_seed) = network_and_input_seeds(seed);
                let net = Network::random(spec, &cfg.widths, &n, cfg.policy, cfg.activation, net_seed)?;
                let f = Signal::random(spec, cfg.widths[0], cfg.input, input_seed)?;
                let r = single_step_attack(&net, &f, cfg.step)?;
                Ok(SweepRow {
                    n0: f.len(),
                    order: spec.order(),
                    d_0: cfg.widths[0],
                    seed,
                    flip: r.flipped,
                    rho: r.rho,
                    step_len: r.step_len,
                    grad_norm: r.grad_norm,
                    hb_before: r.hb_before,
                    hb_after: r.hb_after,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&SweepRow) -> Option<f64>| -> Vec<f64> { block.iter().filter_map(f).collect() };
        summaries.push(SweepSummary {
            group: spec.clone(),
            n0: spec.order() * cfg.widths[0],
            trials: block.len(),
            flip_rate: if block.is_empty() {
                0.0
            } else {
                block.iter().filter(|r| r.flip).count() as f64 / block.len() as f64
            },
            median_rho: stats::median(&col(|r| r.rho)),
            median_step_len: stats::median(&col(|r| Some(r.step_len))),
            median_grad_norm: stats::median(&col(|r| Some(r.grad_norm))),
        });
        rows.extend(block);
    }
    Ok(SweepTable { rows, summaries })
}
