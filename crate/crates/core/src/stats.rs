//! Small summary-statistics helpers shared by the attack sweep and the
//! experiment harness.

use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile (type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile_sorted(&sorted(values), 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

/// Quantile summary ignoring NaNs; `None` when nothing remains.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    let v = sorted(values);
    let q = |p| quantile_sorted(&v, p);
    Some(Quantiles {
        min: *v.first()?,
        q05: q(0.05)?,
        q25: q(0.25)?,
        median: q(0.5)?,
        q75: q(0.75)?,
        q95: q(0.95)?,
        max: *v.last()?,
    })
}

/// `p - 3 sqrt(p(1-p)/n)`: a pass-rate threshold three binomial standard
/// deviations below a stated success probability `p` over `n` trials.
pub fn binomial_floor(p: f64, n: usize) -> f64 {
    p - 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}
