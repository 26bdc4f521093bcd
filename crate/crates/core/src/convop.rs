//! Linear convolutional operators `L^2(G, R^d_in) -> L^2(G, R^d_out)`,
//! `(Lf)(g) = n^{-1/2} sum_i W_i f(g_i g)`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::rng::{self, tag};
use crate::signal::Signal;

/// Default cap on the number of entries of a dense materialization (2^31).
pub const DEFAULT_DENSE_CAP: u128 = 1 << 31;

/// How the `n` distinct offsets of a random layer are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetPolicy {
    /// `n` elements drawn uniformly without replacement.
    #[default]
    Uniform,
    /// The first `n` elements of the enumeration. On a cyclic group this is
    /// the window `{0, .., n-1}`; on a product group it is a lexicographic run.
    ContiguousWindow,
}

impl std::str::FromStr for OffsetPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform-without-replacement" => Ok(OffsetPolicy::Uniform),
            "contiguous" | "contiguous-window" => Ok(OffsetPolicy::ContiguousWindow),
            other => Err(Error::invalid(
                "offset_policy",
                format!("unknown policy `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerBundle", into = "LayerBundle")]
pub struct ConvLayer {
    spec: GroupSpec,
    d_in: usize,
    d_out: usize,
    offsets: Vec<GroupElement>,
    weights: Vec<DMatrix<f64>>,
    // shifts[i][index(g)] = index(g_i g)
    shifts: Vec<Vec<usize>>,
}

/// Portable form of a layer: offsets as residue tuples, weights row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerBundle {
    pub group: Vec<usize>,
    pub d_in: usize,
    pub d_out: usize,
    pub offsets: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl From<ConvLayer> for LayerBundle {
    fn from(layer: ConvLayer) -> Self {
        LayerBundle {
            group: layer.spec.moduli().to_vec(),
            d_in: layer.d_in,
            d_out: layer.d_out,
            offsets: layer.offsets.iter().map(|g| g.residues().to_vec()).collect(),
            weights: layer
                .weights
                .iter()
                .map(|w| w.transpose().as_slice().to_vec())
                .collect(),
        }
    }
}

impl TryFrom<LayerBundle> for ConvLayer {
    type Error = Error;

    fn try_from(b: LayerBundle) -> Result<Self> {
        let spec = GroupSpec::new(b.group)?;
        let offsets = b
            .offsets
            .iter()
            .map(|r| {
                let r: Vec<i64> = r.iter().map(|&x| x as i64).collect();
                let g = spec.element(&r)?;
                if g.residues().iter().zip(&r).any(|(&a, &b)| a as i64 != b) {
                    return Err(Error::structural(format!("offset {r:?} not reduced")));
                }
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = b
            .weights
            .into_iter()
            .map(|w| {
                if w.len() != b.d_in * b.d_out {
                    return Err(Error::structural(format!(
                        "weight has {} entries, expected {}x{}",
                        w.len(),
                        b.d_out,
                        b.d_in
                    )));
                }
                Ok(DMatrix::from_row_slice(b.d_out, b.d_in, &w))
            })
            .collect::<Result<Vec<_>>>()?;
        ConvLayer::new(&spec, b.d_in, b.d_out, offsets, weights)
    }
}

impl ConvLayer {
    pub fn new(
        spec: &GroupSpec,
        d_in: usize,
        d_out: usize,
        offsets: Vec<GroupElement>,
        weights: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("widths", "channel counts must be >= 1"));
        }
        let n = offsets.len();
        if n == 0 || n > spec.order() {
            return Err(Error::invalid(
                "n",
                format!("offset count {n} must be in 1..={}", spec.order()),
            ));
        }
        if weights.len() != n {
            return Err(Error::structural(format!(
                "{} weight matrices for {n} offsets",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.shape() != (d_out, d_in)) {
            return Err(Error::structural(format!(
                "weight shape {:?}, expected ({d_out}, {d_in})",
                w.shape()
            )));
        }
        let mut seen = vec![false; spec.order()];
        let mut shifts = Vec::with_capacity(n);
        for g in &offsets {
            let idx = spec.index_of(g)?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::invalid("offsets", format!("offset {g} repeated")));
            }
            shifts.push(spec.translation_table(g)?);
        }
        Ok(ConvLayer {
            spec: spec.clone(),
            d_in,
            d_out,
            offsets,
            weights,
            shifts,
        })
    }

    /// The layer with a single identity offset and `W_1 = I`.
    pub fn identity(spec: &GroupSpec, d: usize) -> Result<Self> {
        Self::new(spec, d, d, vec![spec.identity()], vec![DMatrix::identity(d, d)])
    }

    /// Random layer: offsets per `policy`, weight entries iid `N(0, 1/d_in)`.
    pub fn random(
        spec: &GroupSpec,
        d_in: usize,
        d_out: usize,
        n: usize,
        policy: OffsetPolicy,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || n > spec.order() {
            return Err(Error::invalid(
                "n",
                format!("offset count {n} must be in 1..={}", spec.order()),
            ));
        }
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("widths", "channel counts must be >= 1"));
        }
        let offsets: Vec<GroupElement> = match policy {
            OffsetPolicy::Uniform => {
                let mut g = rng::derived_generator(seed, &[tag::OFFSETS]);
                index::sample(&mut g, spec.order(), n)
                    .into_iter()
                    .map(|i| spec.element_at(i))
                    .collect()
            }
            OffsetPolicy::ContiguousWindow => (0..n).map(|i| spec.element_at(i)).collect(),
        };
        let normal = Normal::new(0.0, (1.0 / d_in as f64).sqrt()).expect("positive variance");
        let weights = (0..n)
            .map(|i| {
                let mut g = rng::derived_generator(seed, &[tag::WEIGHTS, i as u64]);
                // filled row-major so the stream order matches the bundle layout
                let entries: Vec<f64> = (0..d_out * d_in).map(|_| normal.sample(&mut g)).collect();
                DMatrix::from_row_slice(d_out, d_in, &entries)
            })
            .collect();
        Self::new(spec, d_in, d_out, offsets, weights)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// Number of offsets.
    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[GroupElement] {
        &self.offsets
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.n() as f64).sqrt()
    }

    pub fn apply(&self, f: &Signal) -> Result<Signal> {
        f.check_shape(&self.spec, self.d_in, "apply")?;
        let mut out = Signal::zeros(&self.spec, self.d_out)?;
        self.apply_into(f.as_flat(), out.as_flat_mut());
        Ok(out)
    }

    /// Flat-slice form of [`apply`](Self::apply); `out` is overwritten.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let (di, dq) = (self.d_in, self.d_out);
        let scale = self.scale();
        out.fill(0.0);
        for (w, shift) in self.weights.iter().zip(&self.shifts) {
            for (g, &src) in shift.iter().enumerate() {
                let x = &f[src * di..(src + 1) * di];
                let y = &mut out[g * dq..(g + 1) * dq];
                for (c, &xc) in x.iter().enumerate() {
                    if xc == 0.0 {
                        continue;
                    }
                    let col = w.column(c);
                    for (yr, wr) in y.iter_mut().zip(col.iter()) {
                        *yr += wr * xc;
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    }

    /// `(L^T v)(h) = n^{-1/2} sum_i W_i^T v(g_i^{-1} h)`.
    pub fn apply_adjoint(&self, v: &Signal) -> Result<Signal> {
        v.check_shape(&self.spec, self.d_out, "apply_adjoint")?;
        let mut out = Signal::zeros(&self.spec, self.d_in)?;
        self.apply_adjoint_into(v.as_flat(), out.as_flat_mut());
        Ok(out)
    }

    pub fn apply_adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        let (di, dq) = (self.d_in, self.d_out);
        let scale = self.scale();
        out.fill(0.0);
        for (w, shift) in self.weights.iter().zip(&self.shifts) {
            for (g, &dst) in shift.iter().enumerate() {
                let y = &v[g * dq..(g + 1) * dq];
                let x = &mut out[dst * di..(dst + 1) * di];
                for (c, xc) in x.iter_mut().enumerate() {
                    *xc += w.column(c).dot(&nalgebra::DVectorView::from_slice(y, dq));
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    }

    /// Number of entries of the dense matrix, `(|G| d_out) (|G| d_in)`.
    pub fn dense_entries(&self) -> u128 {
        let g = self.spec.order() as u128;
        g * self.d_out as u128 * g * self.d_in as u128
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    /// The `(|G| d_out) x (|G| d_in)` matrix acting on flattened signals.
    pub fn to_dense_capped(&self, cap: u128) -> Result<DMatrix<f64>> {
        let entries = self.dense_entries();
        if entries > cap {
            return Err(Error::Capacity { entries, cap });
        }
        let (di, dq) = (self.d_in, self.d_out);
        let size = self.spec.order();
        let scale = self.scale();
        let mut m = DMatrix::zeros(size * dq, size * di);
        for (w, shift) in self.weights.iter().zip(&self.shifts) {
            for (g, &src) in shift.iter().enumerate() {
                for r in 0..dq {
                    for c in 0..di {
                        m[(g * dq + r, src * di + c)] += scale * w[(r, c)];
                    }
                }
            }
        }
        Ok(m)
    }
}
