use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values closer than this are treated as the same atom.
pub const MERGE_TOL: f64 = 1e-12;

/// Allowed deviation of a probability vector's total from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A finitely supported law on the real line.
///
/// Atoms are kept sorted by value, values within [`MERGE_TOL`] are merged and atoms with
/// zero probability are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRepr", into = "LawRepr")]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct LawRepr {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<LawRepr> for DiscreteLaw {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        DiscreteLaw::new(repr.atoms)
    }
}

impl From<DiscreteLaw> for LawRepr {
    fn from(law: DiscreteLaw) -> Self {
        LawRepr { atoms: law.atoms }
    }
}

impl DiscreteLaw {
    /// Builds a law from `(value, probability)` pairs.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::validation("a law needs at least one atom"));
        }
        let mut total = 0.0;
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::validation(format!("atom value {v} is not finite")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::validation(format!(
                    "atom probability {p} is negative or not finite"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self::collect(atoms))
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Self::new(vec![(0.0, 1.0 - p), (1.0, p)])
    }

    pub fn rademacher() -> Self {
        Self {
            atoms: vec![(-1.0, 0.5), (1.0, 0.5)],
        }
    }

    /// Sorts and merges weighted atoms without checking normalization.
    pub(crate) fn collect(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|&(_, p)| p > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        let mut anchor = f64::NEG_INFINITY;
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if v - anchor <= MERGE_TOL => last.1 += p,
                _ => {
                    anchor = v;
                    merged.push((v, p));
                }
            }
        }
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v * v).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|&(v, p)| p * (v - m) * (v - m)).sum()
    }

    /// Probability of the set `{v : pred(v)}`.
    pub fn prob_where(&self, mut pred: impl FnMut(f64) -> bool) -> f64 {
        self.atoms.iter().filter(|a| pred(a.0)).map(|a| a.1).sum()
    }

    /// Probability mass at `value` (within [`MERGE_TOL`]).
    pub fn pmf(&self, value: f64) -> f64 {
        self.prob_where(|v| (v - value).abs() <= MERGE_TOL)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.0 >= 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.atoms.first().map_or(f64::NAN, |a| a.0)
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.last().map_or(f64::NAN, |a| a.0)
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &DiscreteLaw, cap: usize) -> Result<Self> {
        let needed = self.atoms.len() as u128 * other.atoms.len() as u128;
        if needed > cap as u128 {
            return Err(Error::CapExceeded { needed, cap });
        }
        let mut atoms = Vec::with_capacity(needed as usize);
        for &(a, p) in &self.atoms {
            for &(b, q) in &other.atoms {
                atoms.push((a + b, p * q));
            }
        }
        Ok(Self::collect(atoms))
    }
}

/// Largest absolute difference between two (sub-)probability vectors, matching values
/// within [`MERGE_TOL`].
pub(crate) fn law_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut signed: Vec<(f64, f64)> = a
        .iter()
        .copied()
        .chain(b.iter().map(|&(v, p)| (v, -p)))
        .collect();
    signed.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut worst = 0.0_f64;
    let mut anchor = f64::NEG_INFINITY;
    let mut acc = 0.0_f64;
    for (v, p) in signed {
        if v - anchor > MERGE_TOL {
            worst = worst.max(acc.abs());
            anchor = v;
            acc = 0.0;
        }
        acc += p;
    }
    worst.max(acc.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_close_values_and_drops_zero_mass() {
        let law = DiscreteLaw::new(vec![
            (1.0, 0.25),
            (0.0, 0.0),
            (1.0 + 1e-14, 0.25),
            (2.0, 0.5),
        ])
        .unwrap();
        assert_eq!(law.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        assert!(DiscreteLaw::new(vec![(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(DiscreteLaw::new(vec![(0.0, -0.1), (1.0, 1.1)]).is_err());
        assert!(DiscreteLaw::new(vec![(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteLaw::new(vec![]).is_err());
    }

    #[test]
    fn moments_of_rademacher() {
        let law = DiscreteLaw::rademacher();
        assert_eq!(law.mean(), 0.0);
        assert_eq!(law.second_moment(), 1.0);
        assert_eq!(law.variance(), 1.0);
    }

    #[test]
    fn convolution_of_rademachers() {
        let r = DiscreteLaw::rademacher();
        let s = r.convolve(&r, 100).unwrap();
        assert_eq!(s.atoms(), &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        assert!(matches!(
            r.convolve(&r, 3),
            Err(Error::CapExceeded { needed: 4, cap: 3 })
        ));
    }

    #[test]
    fn distance_between_laws() {
        let a = [(0.0, 0.5), (1.0, 0.5)];
        let b = [(0.0, 0.4), (1.0, 0.6)];
        assert!((law_distance(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(law_distance(&a, &a), 0.0);
        assert_eq!(law_distance(&[(0.0, 1.0)], &[(1.0, 1.0)]), 1.0);
    }

    #[test]
    fn serde_validates() {
        let law: DiscreteLaw = serde_json::from_str(r#"{"atoms": [[0, 0.5], [1, 0.5]]}"#).unwrap();
        assert_eq!(law, DiscreteLaw::bernoulli(0.5).unwrap());
        assert!(serde_json::from_str::<DiscreteLaw>(r#"{"atoms": [[0, 0.5]]}"#).is_err());
    }
}
