//! Exact singular spectrum of a [`ConvLayer`] by character-block diagonalization.
//!
//! A convolutional operator commutes with translations, so it maps each
//! isotypic component `R^d (x) V_chi` into `R^q (x) V_chi`. On the complex line
//! spanned by `g -> chi(g) x` it acts as the small matrix
//!
//! ```text
//! M(chi) = n^{-1/2} sum_i chi(g_i) W_i        (d_out x d_in, complex)
//! ```
//!
//! and the singular values of the full `|G| d_out x |G| d_in` matrix are the
//! union over all characters of the singular values of `M(chi)`. Since
//! `M(conj chi) = conj M(chi)` only one member of each conjugate pair is
//! factorized; its values are counted twice.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convop::{ConvLayer, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::group::Character;

/// Singular values below this are treated as zero in rank decisions.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierMultiplier {
    pub character: Character,
    pub matrix: DMatrix<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpectrum {
    /// Position of the factorized character in canonical order.
    pub position: usize,
    /// Position of its conjugate (equal to `position` for real characters).
    pub conjugate_position: usize,
    pub character: Character,
    /// 1 for real characters, 2 for a conjugate pair.
    pub multiplicity: usize,
    /// Descending.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub group: Vec<usize>,
    pub d_in: usize,
    pub d_out: usize,
    pub blocks: Vec<BlockSpectrum>,
    pub s_min: f64,
    pub s_max: f64,
    /// Number of zero singular values (below [`ZERO_TOL`]), with multiplicity.
    pub zero_count: usize,
    pub block_seconds: f64,
    pub dense_seconds: Option<f64>,
}

impl SpectralReport {
    /// Total number of singular values, with multiplicity.
    pub fn count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.multiplicity * b.values.len())
            .sum()
    }

    /// The full multiset of singular values, descending.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| {
                std::iter::repeat_n(&b.values, b.multiplicity).flat_map(|v| v.iter().copied())
            })
            .collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all
    }

    /// `(character position, values)` for every character, conjugates
    /// included, in canonical character order.
    pub fn per_character(&self) -> Vec<(usize, &[f64])> {
        let mut out: Vec<(usize, &[f64])> = Vec::new();
        for b in &self.blocks {
            out.push((b.position, &b.values));
            if b.multiplicity == 2 {
                out.push((b.conjugate_position, &b.values));
            }
        }
        out.sort_by_key(|(p, _)| *p);
        out
    }

    /// Rows `(character_index, block_sv_rank, value)` for the `spectra` CSV.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["character_index", "block_sv_rank", "value"])?;
        for (pos, values) in self.per_character() {
            for (rank, v) in values.iter().enumerate() {
                out.write_record([pos.to_string(), rank.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `M(chi)` for every character, in canonical character order.
pub fn multipliers(layer: &ConvLayer) -> Vec<FourierMultiplier> {
    let spec = layer.spec();
    spec.characters()
        .into_iter()
        .map(|chi| {
            let matrix = multiplier_matrix(layer, &chi);
            FourierMultiplier {
                character: chi,
                matrix,
            }
        })
        .collect()
}

pub fn multiplier_matrix(layer: &ConvLayer, chi: &Character) -> DMatrix<Complex64> {
    let moduli = layer.spec().moduli();
    let mut m = DMatrix::<Complex64>::zeros(layer.d_out(), layer.d_in());
    for (g, w) in layer.offsets().iter().zip(layer.weights()) {
        let c = chi.eval_unchecked(g.residues(), moduli) * layer.scale();
        m.zip_apply(w, |acc, x| *acc += c * x);
    }
    m
}

fn block_values(m: DMatrix<Complex64>) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = m.singular_values().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("block SVD produced non-finite values".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Singular spectrum of `layer` via character blocks.
pub fn block_singular_values(layer: &ConvLayer) -> Result<SpectralReport> {
    let spec = layer.spec();
    let start = Instant::now();
    let chars = spec.characters();
    let reps: Vec<(usize, usize)> = chars
        .iter()
        .enumerate()
        .filter_map(|(p, chi)| {
            let q = spec
                .character_position(&chi.conjugate(spec))
                .expect("conjugate is reduced");
            (q >= p).then_some((p, q))
        })
        .collect();
    let blocks = reps
        .par_iter()
        .map(|&(p, q)| {
            let chi = &chars[p];
            let values = block_values(multiplier_matrix(layer, chi))?;
            Ok(BlockSpectrum {
                position: p,
                conjugate_position: q,
                character: chi.clone(),
                multiplicity: if p == q { 1 } else { 2 },
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let block_seconds = start.elapsed().as_secs_f64();

    let s_max = blocks
        .iter()
        .flat_map(|b| b.values.first().copied())
        .fold(0.0, f64::max);
    let s_min = blocks
        .iter()
        .flat_map(|b| b.values.last().copied())
        .fold(f64::INFINITY, f64::min);
    let zero_count = blocks
        .iter()
        .map(|b| b.multiplicity * b.values.iter().filter(|&&v| v < ZERO_TOL).count())
        .sum();
    Ok(SpectralReport {
        group: spec.moduli().to_vec(),
        d_in: layer.d_in(),
        d_out: layer.d_out(),
        blocks,
        s_min,
        s_max,
        zero_count,
        block_seconds,
        dense_seconds: None,
    })
}

/// Largest singular value (operator norm) of the layer.
pub fn spectral_norm(layer: &ConvLayer) -> Result<f64> {
    Ok(block_singular_values(layer)?.s_max)
}

/// Singular values of the materialized matrix, descending. Oracle for the
/// block path.
pub fn dense_singular_values(layer: &ConvLayer) -> Result<Vec<f64>> {
    dense_singular_values_capped(layer, DEFAULT_DENSE_CAP)
}

pub fn dense_singular_values_capped(layer: &ConvLayer, cap: u128) -> Result<Vec<f64>> {
    let dense = layer.to_dense_capped(cap)?;
    let mat = faer::Mat::<f64>::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)]);
    let mut values = mat
        .singular_values()
        .map_err(|e| Error::Numerical(format!("dense SVD failed: {e:?}")))?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Run both paths and attach the dense timing to the report.
pub fn with_dense_timing(layer: &ConvLayer) -> Result<(SpectralReport, Vec<f64>)> {
    let mut report = block_singular_values(layer)?;
    let start = Instant::now();
    let dense = dense_singular_values(layer)?;
    report.dense_seconds = Some(start.elapsed().as_secs_f64());
    Ok((report, dense))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub pass: bool,
    /// `s_min - a`
    pub lower_margin: f64,
    /// `b - s_max`
    pub upper_margin: f64,
}

/// Whether all singular values lie in `[a, b]`.
pub fn band_check(report: &SpectralReport, a: f64, b: f64) -> Result<BandCheck> {
    if !(a < b) {
        return Err(Error::invalid("band", format!("need a < b, got [{a}, {b}]")));
    }
    let lower_margin = report.s_min - a;
    let upper_margin = b - report.s_max;
    Ok(BandCheck {
        pass: lower_margin >= 0.0 && upper_margin >= 0.0,
        lower_margin,
        upper_margin,
    })
}

/// Max absolute deviation between two descending spectra of equal length.
pub fn max_deviation(a: &[f64], b: &[f64]) -> Option<f64> {
    (a.len() == b.len()).then(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    })
}
