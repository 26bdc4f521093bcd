//! Signals in `L^2(G, R^d)`.
//!
//! A signal is stored flattened: the `d` channels of the element with index
//! `i` occupy `values[i*d .. (i+1)*d]`. Norms use counting measure, so the
//! L2 norm of a signal is the Euclidean norm of its flattened vector.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    Gaussian,
    Rademacher,
    BoundedUniform,
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SignalKind::Gaussian),
            "rademacher" => Ok(SignalKind::Rademacher),
            "bounded-uniform" => Ok(SignalKind::BoundedUniform),
            other => Err(Error::invalid("signal_kind", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    spec: GroupSpec,
    channels: usize,
    values: Vec<f64>,
}

impl Signal {
    pub fn zeros(spec: &GroupSpec, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("channels", "must be >= 1"));
        }
        Ok(Signal {
            spec: spec.clone(),
            channels,
            values: vec![0.0; spec.order() * channels],
        })
    }

    pub fn from_flat(spec: &GroupSpec, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("channels", "must be >= 1"));
        }
        let expect = spec.order() * channels;
        if values.len() != expect {
            return Err(Error::structural(format!(
                "flat vector has length {}, expected |G|*d = {expect}",
                values.len()
            )));
        }
        Ok(Signal {
            spec: spec.clone(),
            channels,
            values,
        })
    }

    /// Draw a signal with iid entries.
    pub fn random(spec: &GroupSpec, channels: usize, kind: SignalKind, seed: u64) -> Result<Self> {
        let mut g = rng::generator(seed);
        Self::random_with(spec, channels, kind, &mut g)
    }

    pub fn random_with<R: Rng + ?Sized>(
        spec: &GroupSpec,
        channels: usize,
        kind: SignalKind,
        rng: &mut R,
    ) -> Result<Self> {
        let mut s = Self::zeros(spec, channels)?;
        match kind {
            SignalKind::Gaussian => {
                for v in &mut s.values {
                    *v = StandardNormal.sample(rng);
                }
            }
            SignalKind::Rademacher => {
                for v in &mut s.values {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            SignalKind::BoundedUniform => {
                let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
                for v in &mut s.values {
                    *v = u.sample(rng);
                }
            }
        }
        Ok(s)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `N = |G| d`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    /// Channels at the element with enumeration index `i`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Signal) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Signal) -> Result<Signal> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Signal {
            values,
            ..self.clone()
        })
    }

    pub fn scaled(&self, alpha: f64) -> Signal {
        Signal {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// `(A_g s)(h) = s(g^{-1} h)`.
    pub fn translate(&self, g: &GroupElement) -> Result<Signal> {
        let table = self.spec.translation_table(g)?;
        let mut out = Signal::zeros(&self.spec, self.channels)?;
        // s(g^{-1}h) lands at h = g(g^{-1}h): out[table[k]] = s[k]
        for (k, &dst) in table.iter().enumerate() {
            out.at_mut(dst).copy_from_slice(self.at(k));
        }
        Ok(out)
    }

    pub fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.spec != other.spec || self.channels != other.channels {
            return Err(Error::structural(format!(
                "signal shapes differ: {:?}x{} vs {:?}x{}",
                self.spec.moduli(),
                self.channels,
                other.spec.moduli(),
                other.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, spec: &GroupSpec, channels: usize, what: &str) -> Result<()> {
        if &self.spec != spec || self.channels != channels {
            return Err(Error::structural(format!(
                "{what}: signal is {:?}x{}, expected {:?}x{channels}",
                self.spec.moduli(),
                self.channels,
                spec.moduli()
            )));
        }
        Ok(())
    }

    /// CSV with an `element` column (residues joined by `:`) followed by one
    /// column per channel, one row per group element in enumeration order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["element".to_string()];
        header.extend((0..self.channels).map(|c| format!("c{c}")));
        out.write_record(&header)?;
        for (i, g) in self.spec.elements().enumerate() {
            let mut row = vec![join_residues(g.residues())];
            row.extend(self.at(i).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(spec: &GroupSpec, r: R) -> Result<Signal> {
        let mut rdr = csv::Reader::from_reader(r);
        let channels = rdr.headers()?.len().saturating_sub(1);
        let mut s = Signal::zeros(spec, channels)?;
        let mut seen = vec![false; spec.order()];
        for rec in rdr.records() {
            let rec = rec?;
            let residues = rec
                .get(0)
                .unwrap_or_default()
                .split(':')
                .map(|x| x.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::structural(format!("bad element label: {e}")))?;
            let idx = spec.index_of(&spec.element(&residues)?)?;
            for (c, field) in rec.iter().skip(1).enumerate() {
                s.at_mut(idx)[c] = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::structural(format!("bad value `{field}`: {e}")))?;
            }
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|&x| !x) {
            return Err(Error::structural(format!(
                "csv has no row for element {}",
                spec.element_at(missing)
            )));
        }
        Ok(s)
    }
}

fn join_residues(r: &[usize]) -> String {
    r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z(m: usize) -> GroupSpec {
        GroupSpec::cyclic(m).unwrap()
    }

    #[test]
    fn norms() {
        let spec = z(4);
        let zero = Signal::zeros(&spec, 3).unwrap();
        assert_eq!(zero.l2_norm(), 0.0);
        assert_eq!(zero.linf_norm(), 0.0);
        let ones = Signal::from_flat(&spec, 1, vec![1.0; 4]).unwrap();
        assert_eq!(ones.l2_norm(), 2.0);
        let s = Signal::from_flat(&z(2), 1, vec![-3.0, 2.0]).unwrap();
        assert_eq!(s.linf_norm(), 3.0);
    }

    #[test]
    fn random_norms_match_scan_oracles() {
        let spec = GroupSpec::new(vec![3, 5]).unwrap();
        let s = Signal::random(&spec, 4, SignalKind::Gaussian, 11).unwrap();
        let mut sumsq = 0.0;
        let mut max: f64 = 0.0;
        for i in 0..spec.order() {
            for c in 0..4 {
                let v = s.as_flat()[i * 4 + c];
                sumsq += v * v;
                max = max.max(v.abs());
            }
        }
        assert!((s.norm_sqr() - sumsq).abs() <= 1e-12 * sumsq);
        assert_eq!(s.linf_norm(), max);
    }

    #[test]
    fn translate_cyclic_shift() {
        let spec = z(4);
        let s = Signal::from_flat(&spec, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = s.translate(&spec.element(&[1]).unwrap()).unwrap();
        assert_eq!(t.as_flat(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.translate(&spec.identity()).unwrap(), s);
    }

    #[test]
    fn translation_is_isometric_group_action() {
        for moduli in [vec![16], vec![2, 8], vec![4, 4], vec![2, 2, 3], vec![5, 3]] {
            let spec = GroupSpec::new(moduli).unwrap();
            let s = Signal::random(&spec, 2, SignalKind::Gaussian, 3).unwrap();
            for a in spec.elements() {
                let sa = s.translate(&a).unwrap();
                assert!((sa.l2_norm() - s.l2_norm()).abs() < 1e-12);
                for b in spec.elements() {
                    let lhs = sa.translate(&b).unwrap();
                    let rhs = s.translate(&spec.multiply(&b, &a).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn generators() {
        let spec = GroupSpec::new(vec![4, 8]).unwrap();
        let a = Signal::random(&spec, 3, SignalKind::Rademacher, 5).unwrap();
        assert_eq!(a, Signal::random(&spec, 3, SignalKind::Rademacher, 5).unwrap());
        assert!(a.as_flat().iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(a.norm_sqr(), a.len() as f64);
        let u = Signal::random(&spec, 3, SignalKind::BoundedUniform, 5).unwrap();
        assert!(u.linf_norm() <= 1.0);
    }

    #[test]
    fn gaussian_moments() {
        // 10^5 draws; the mean has sd 1/sqrt(n), the sample variance sd ~ sqrt(2/n).
        let spec = z(1000);
        let s = Signal::random(&spec, 100, SignalKind::Gaussian, 99).unwrap();
        let n = s.len() as f64;
        let mean = s.as_flat().iter().sum::<f64>() / n;
        let var = s.as_flat().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 5.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn csv_round_trip() {
        let spec = GroupSpec::new(vec![2, 3]).unwrap();
        let s = Signal::random(&spec, 2, SignalKind::Gaussian, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("element,c0,c1\n0:0,"));
        assert_eq!(text.lines().count(), 7);
        assert_eq!(Signal::read_csv(&spec, buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn shape_errors() {
        let a = Signal::zeros(&z(4), 1).unwrap();
        let b = Signal::zeros(&z(4), 2).unwrap();
        assert!(a.dot(&b).is_err());
        assert!(Signal::from_flat(&z(4), 1, vec![0.0; 3]).is_err());
        assert!(Signal::zeros(&z(4), 0).is_err());
    }

    proptest! {
        #[test]
        fn flatten_round_trip(moduli in prop::collection::vec(1usize..5, 1..3), d in 1usize..4, seed in any::<u64>()) {
            let spec = GroupSpec::new(moduli).unwrap();
            let s = Signal::random(&spec, d, SignalKind::Gaussian, seed).unwrap();
            let back = Signal::from_flat(&spec, d, s.clone().into_flat()).unwrap();
            prop_assert_eq!(&back, &s);
            for i in 0..spec.order() {
                prop_assert_eq!(s.at(i), &s.as_flat()[i * d..(i + 1) * d]);
            }
        }
    }
}
