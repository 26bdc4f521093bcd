//! Finite abelian groups `Z_{m_1} x ... x Z_{m_k}` and their characters.
//!
//! Elements and characters are residue tuples. Both are enumerated in
//! lexicographic order (last coordinate varies fastest); the position of an
//! element in that enumeration is its *index*, which is also the row-block of
//! the element in a flattened signal.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupSpec {
    moduli: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
}

impl TryFrom<Vec<usize>> for GroupSpec {
    type Error = Error;

    fn try_from(moduli: Vec<usize>) -> Result<Self> {
        GroupSpec::new(moduli)
    }
}

impl From<GroupSpec> for Vec<usize> {
    fn from(spec: GroupSpec) -> Self {
        spec.moduli
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(Vec<usize>);

impl GroupElement {
    pub fn residues(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&r| r == 0)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tuple(f, &self.0)
    }
}

/// A character `g -> exp(2 pi i sum_j k_j g_j / m_j)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Character {
    index: Vec<usize>,
    is_real: bool,
}

impl Character {
    pub fn index(&self) -> &[usize] {
        &self.index
    }

    /// True iff the character is real valued (`2k_j = 0 mod m_j` for all j),
    /// i.e. it is its own conjugate.
    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn is_trivial(&self) -> bool {
        self.index.iter().all(|&k| k == 0)
    }

    /// Phase of `chi(g)` as a fraction of a full turn, in `[0, 1)`.
    pub fn phase(&self, g: &GroupElement, spec: &GroupSpec) -> Result<f64> {
        spec.check_arity(self.index.len(), "character")?;
        spec.check_element(g)?;
        Ok(self.phase_unchecked(g.residues(), spec.moduli()))
    }

    pub(crate) fn phase_unchecked(&self, g: &[usize], moduli: &[usize]) -> f64 {
        let mut turn = 0.0;
        for ((&k, &r), &m) in self.index.iter().zip(g).zip(moduli) {
            // k*r < m^2 for valid tuples, so this stays exact in integers.
            turn += ((k * r) % m) as f64 / m as f64;
        }
        turn - turn.floor()
    }

    pub fn eval(&self, g: &GroupElement, spec: &GroupSpec) -> Result<Complex64> {
        let turn = self.phase(g, spec)?;
        Ok(unit(turn))
    }

    pub(crate) fn eval_unchecked(&self, g: &[usize], moduli: &[usize]) -> Complex64 {
        unit(self.phase_unchecked(g, moduli))
    }

    pub fn conjugate(&self, spec: &GroupSpec) -> Character {
        let index = self
            .index
            .iter()
            .zip(spec.moduli())
            .map(|(&k, &m)| (m - k) % m)
            .collect();
        Character {
            index,
            is_real: self.is_real,
        }
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tuple(f, &self.index)
    }
}

fn unit(turn: f64) -> Complex64 {
    let (s, c) = (TAU * turn).sin_cos();
    Complex64::new(c, s)
}

fn write_tuple(f: &mut fmt::Formatter<'_>, xs: &[usize]) -> fmt::Result {
    write!(f, "(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

impl GroupSpec {
    pub fn new(moduli: Vec<usize>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::invalid("group", "at least one modulus is required"));
        }
        if let Some(pos) = moduli.iter().position(|&m| m == 0) {
            return Err(Error::invalid(
                "group",
                format!("modulus at position {pos} must be >= 1"),
            ));
        }
        let order = moduli
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| Error::invalid("group", "group order overflows"))?;
        let mut strides = vec![1usize; moduli.len()];
        for j in (0..moduli.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * moduli[j + 1];
        }
        Ok(GroupSpec {
            moduli,
            strides,
            order,
        })
    }

    pub fn cyclic(m: usize) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn moduli(&self) -> &[usize] {
        &self.moduli
    }

    /// `|G|`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of cyclic factors.
    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0; self.rank()])
    }

    /// Build an element from arbitrary integers, reducing each modulo its factor.
    pub fn element(&self, residues: &[i64]) -> Result<GroupElement> {
        self.check_arity(residues.len(), "element")?;
        Ok(GroupElement(
            residues
                .iter()
                .zip(&self.moduli)
                .map(|(&r, &m)| r.rem_euclid(m as i64) as usize)
                .collect(),
        ))
    }

    pub fn element_at(&self, index: usize) -> GroupElement {
        assert!(index < self.order, "element index {index} out of range");
        GroupElement(
            self.strides
                .iter()
                .zip(&self.moduli)
                .map(|(&s, &m)| (index / s) % m)
                .collect(),
        )
    }

    pub fn index_of(&self, g: &GroupElement) -> Result<usize> {
        self.check_element(g)?;
        Ok(self.index_unchecked(g.residues()))
    }

    fn index_unchecked(&self, residues: &[usize]) -> usize {
        residues.iter().zip(&self.strides).map(|(r, s)| r * s).sum()
    }

    /// All elements in lexicographic order.
    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.order).map(move |i| self.element_at(i))
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(GroupElement(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.moduli)
                .map(|((x, y), m)| (x + y) % m)
                .collect(),
        ))
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        self.check_element(a)?;
        Ok(GroupElement(
            a.0.iter()
                .zip(&self.moduli)
                .map(|(x, m)| (m - x) % m)
                .collect(),
        ))
    }

    /// `table[index(h)] = index(g h)` for every `h`.
    pub fn translation_table(&self, g: &GroupElement) -> Result<Vec<usize>> {
        self.check_element(g)?;
        let mut sum = vec![0usize; self.rank()];
        Ok((0..self.order)
            .map(|i| {
                for (j, s) in sum.iter_mut().enumerate() {
                    let h = (i / self.strides[j]) % self.moduli[j];
                    *s = (g.0[j] + h) % self.moduli[j];
                }
                self.index_unchecked(&sum)
            })
            .collect())
    }

    /// The `|G|` characters, lexicographic in their index tuple.
    pub fn characters(&self) -> Vec<Character> {
        (0..self.order).map(|i| self.character_at(i)).collect()
    }

    pub fn character_at(&self, index: usize) -> Character {
        let GroupElement(index) = self.element_at(index);
        let is_real = index
            .iter()
            .zip(&self.moduli)
            .all(|(&k, &m)| (2 * k) % m == 0);
        Character { index, is_real }
    }

    /// Position of a character in the canonical order.
    pub fn character_position(&self, chi: &Character) -> Result<usize> {
        self.check_arity(chi.index.len(), "character")?;
        if chi.index.iter().zip(&self.moduli).any(|(&k, &m)| k >= m) {
            return Err(Error::structural(format!(
                "character {chi} not reduced for group {:?}",
                self.moduli
            )));
        }
        Ok(self.index_unchecked(&chi.index))
    }

    /// Number of real (self-conjugate) characters: `prod_j gcd(2, m_j)`.
    pub fn real_character_count(&self) -> usize {
        self.moduli
            .iter()
            .map(|&m| if m % 2 == 0 { 2 } else { 1 })
            .product()
    }

    pub(crate) fn check_arity(&self, len: usize, what: &str) -> Result<()> {
        if len != self.rank() {
            return Err(Error::structural(format!(
                "{what} has arity {len}, group {:?} has rank {}",
                self.moduli,
                self.rank()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_element(&self, g: &GroupElement) -> Result<()> {
        self.check_arity(g.0.len(), "element")?;
        if g.0.iter().zip(&self.moduli).any(|(&r, &m)| r >= m) {
            return Err(Error::structural(format!(
                "element {g} not reduced for group {:?}",
                self.moduli
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(spec: &GroupSpec, r: &[i64]) -> GroupElement {
        spec.element(r).unwrap()
    }

    /// Every factorization with order at most `max_order`, up to 3 factors.
    fn small_groups(max_order: usize) -> Vec<GroupSpec> {
        let mut out = Vec::new();
        for a in 1..=max_order {
            out.push(GroupSpec::new(vec![a]).unwrap());
            for b in 2..=max_order / a {
                out.push(GroupSpec::new(vec![a, b]).unwrap());
                for c in 2..=max_order / (a * b) {
                    out.push(GroupSpec::new(vec![a, b, c]).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(GroupSpec::new(vec![]).is_err());
        assert!(GroupSpec::new(vec![3, 0]).is_err());
        assert_eq!(GroupSpec::new(vec![2, 4, 8]).unwrap().order(), 64);
    }

    #[test]
    fn multiply_examples() {
        let z6 = GroupSpec::cyclic(6).unwrap();
        assert_eq!(z6.multiply(&el(&z6, &[4]), &el(&z6, &[5])).unwrap(), el(&z6, &[3]));
        let z23 = GroupSpec::new(vec![2, 3]).unwrap();
        assert_eq!(
            z23.multiply(&el(&z23, &[1, 2]), &el(&z23, &[1, 2])).unwrap(),
            el(&z23, &[0, 1])
        );
        for a in z23.elements() {
            assert_eq!(z23.multiply(&a, &z23.identity()).unwrap(), a);
        }
        let bad = GroupElement(vec![1]);
        assert!(matches!(
            z23.multiply(&bad, &z23.identity()),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        let z6 = GroupSpec::cyclic(6).unwrap();
        assert_eq!(z6.inverse(&el(&z6, &[4])).unwrap(), el(&z6, &[2]));
        let z23 = GroupSpec::new(vec![2, 3]).unwrap();
        assert_eq!(z23.inverse(&el(&z23, &[1, 2])).unwrap(), el(&z23, &[1, 1]));
        assert_eq!(z23.inverse(&z23.identity()).unwrap(), z23.identity());
    }

    #[test]
    fn group_axioms_exhaustive() {
        for spec in small_groups(24) {
            let els: Vec<_> = spec.elements().collect();
            assert_eq!(els.len(), spec.order());
            for a in &els {
                let inv = spec.inverse(a).unwrap();
                assert!(spec.multiply(a, &inv).unwrap().is_identity());
                for b in &els {
                    let ab = spec.multiply(a, b).unwrap();
                    assert_eq!(ab, spec.multiply(b, a).unwrap());
                    for c in els.iter().step_by(3) {
                        assert_eq!(
                            spec.multiply(&ab, c).unwrap(),
                            spec.multiply(a, &spec.multiply(b, c).unwrap()).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_indexed() {
        let spec = GroupSpec::new(vec![2, 3]).unwrap();
        let els: Vec<Vec<usize>> = spec.elements().map(|g| g.0).collect();
        assert_eq!(
            els,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![1, 2]
            ]
        );
        for (i, g) in spec.elements().enumerate() {
            assert_eq!(spec.index_of(&g).unwrap(), i);
        }
        let a: Vec<_> = spec.elements().collect();
        let b: Vec<_> = spec.elements().collect();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn translation_table_matches_multiply() {
        for spec in small_groups(16) {
            for g in spec.elements() {
                let table = spec.translation_table(&g).unwrap();
                for (i, h) in spec.elements().enumerate() {
                    let gh = spec.multiply(&g, &h).unwrap();
                    assert_eq!(table[i], spec.index_of(&gh).unwrap());
                }
            }
        }
    }

    #[test]
    fn character_values() {
        let z2 = GroupSpec::cyclic(2).unwrap();
        let chars = z2.characters();
        assert_eq!(chars.len(), 2);
        assert_eq!(chars[0].index(), &[0]);
        let sign: Vec<_> = z2.elements().map(|g| chars[1].eval(&g, &z2).unwrap()).collect();
        assert!((sign[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((sign[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let z4 = GroupSpec::cyclic(4).unwrap();
        let chi = &z4.characters()[1];
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (g, e) in z4.elements().zip(expect) {
            assert!((chi.eval(&g, &z4).unwrap() - e).norm() < 1e-12);
        }

        let z8 = GroupSpec::cyclic(8).unwrap();
        let v = z8.characters()[1].eval(&el(&z8, &[2]), &z8).unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-12);

        let z22 = GroupSpec::new(vec![2, 2]).unwrap();
        let chi = z22.characters().into_iter().find(|c| c.index() == [1, 1]).unwrap();
        let v = chi.eval(&el(&z22, &[1, 0]), &z22).unwrap();
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        for g in z22.elements() {
            let v = z22.characters()[0].eval(&g, &z22).unwrap();
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn z6_orthogonality_by_direct_sum() {
        let z6 = GroupSpec::cyclic(6).unwrap();
        let chars = z6.characters();
        // sum_g exp(2 pi i g/6) exp(-4 pi i g/6), summed term by term
        let mut acc = Complex64::new(0.0, 0.0);
        for g in 0..6 {
            let a = Complex64::from_polar(1.0, TAU * g as f64 / 6.0);
            let b = Complex64::from_polar(1.0, TAU * 2.0 * g as f64 / 6.0);
            acc += a * b.conj();
        }
        assert!(acc.norm() < 1e-12);
        let mut via_chars = Complex64::new(0.0, 0.0);
        for g in z6.elements() {
            via_chars += chars[1].eval(&g, &z6).unwrap() * chars[2].eval(&g, &z6).unwrap().conj();
        }
        assert!((via_chars - acc).norm() < 1e-12);
    }

    #[test]
    fn orthogonality_and_conjugation_exhaustive() {
        for spec in small_groups(64) {
            let chars = spec.characters();
            assert_eq!(chars.len(), spec.order());
            let values: Vec<Vec<Complex64>> = chars
                .iter()
                .map(|c| spec.elements().map(|g| c.eval(&g, &spec).unwrap()).collect())
                .collect();
            for (a, va) in values.iter().enumerate() {
                for (b, vb) in values.iter().enumerate() {
                    let ip: Complex64 = va.iter().zip(vb).map(|(x, y)| x * y.conj()).sum();
                    let expect = if a == b { spec.order() as f64 } else { 0.0 };
                    assert!((ip - expect).norm() < 1e-10, "{:?} {a} {b}", spec.moduli());
                }
            }
            let mut real = 0;
            for (c, vals) in chars.iter().zip(&values) {
                let conj = c.conjugate(&spec);
                assert_eq!(conj.conjugate(&spec), *c);
                assert_eq!(conj == *c, c.is_real());
                let pos = spec.character_position(&conj).unwrap();
                for (x, y) in vals.iter().zip(&values[pos]) {
                    assert!((x.conj() - y).norm() < 1e-12);
                }
                if c.is_real() {
                    real += 1;
                }
            }
            assert_eq!(real, spec.real_character_count());
        }
    }

    proptest! {
        #[test]
        fn characters_are_unit_homomorphisms(
            moduli in prop::collection::vec(1usize..9, 1..4),
            seed in any::<u64>(),
        ) {
            let spec = GroupSpec::new(moduli).unwrap();
            let n = spec.order();
            let pick = |k: u64| spec.element_at((crate::rng::splitmix64(seed ^ k) as usize) % n);
            let (g, h) = (pick(1), pick(2));
            let gh = spec.multiply(&g, &h).unwrap();
            for chi in spec.characters() {
                let a = chi.eval(&g, &spec).unwrap();
                let b = chi.eval(&h, &spec).unwrap();
                let ab = chi.eval(&gh, &spec).unwrap();
                prop_assert!((a.norm() - 1.0).abs() < 1e-12);
                prop_assert!((ab - a * b).norm() < 1e-12);
            }
        }
    }
}
