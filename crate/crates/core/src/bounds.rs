//! Evaluation of the decoupling inequalities and the tail bounds derived from them.
//!
//! Every evaluation yields a [`BoundReport`]. Upper bounds read `lhs ≤ rhs` and have
//! `slack = rhs − lhs`; the Paley–Zygmund bound is a lower bound on a probability, reads
//! `lhs ≥ rhs` and has `slack = lhs − rhs`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decoupling::{complete_decouple, JointDecoupledSpace};
use crate::error::{Error, Result};
use crate::moments::{d_sum_moments, e_sum_moments};
use crate::outcome::OutcomeTree;

/// Default absolute tolerance on every report.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `½ E(Σz)² ≤ E(Σd)²` for nonnegative `d`.
    CompleteLower,
    /// `E(Σd)² ≤ 2 E(Σe)²`.
    SecondMomentUpper,
    /// `Var(Σd) ≤ 2 Var(Σe)`.
    VarianceUpper,
    /// `E(Σd)² ≤ 2 E(Σe)² − (E Σe)²`.
    RefinedUpper,
    /// `P(|S − ES| > t) ≤ 2 Var(S') / t²`.
    Chebyshev,
    /// `P(S > θ ES) ≥ (1 − θ)² (ES)² / (2 E S'² − (ES)²)`.
    PaleyZygmund,
    /// `E S_τ² ≤ 2 E S_τ'² − (E S_τ')²`.
    StoppedSumUpper,
}

impl InequalityId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CompleteLower => "complete_lower",
            Self::SecondMomentUpper => "second_moment_upper",
            Self::VarianceUpper => "variance_upper",
            Self::RefinedUpper => "refined_upper",
            Self::Chebyshev => "chebyshev",
            Self::PaleyZygmund => "paley_zygmund",
            Self::StoppedSumUpper => "stopped_sum_upper",
        }
    }

    /// Whether the inequality reads `lhs ≥ rhs`.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Self::PaleyZygmund)
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluated inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality_id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub tol: f64,
    /// The `t` or `θ` of a tail bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
}

impl BoundReport {
    pub fn new(inequality_id: InequalityId, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = if inequality_id.is_lower_bound() {
            lhs - rhs
        } else {
            rhs - lhs
        };
        Self {
            inequality_id,
            lhs,
            rhs,
            slack,
            holds: slack >= -tol,
            tol,
            parameter: None,
        }
    }

    pub fn with_parameter(mut self, parameter: f64) -> Self {
        self.parameter = Some(parameter);
        self
    }
}

/// `½ E(Σz)² ≤ E(Σd)²`; requires every value of the tree to be nonnegative.
pub fn complete_lower_bound(tree: &OutcomeTree, tol: f64) -> Result<BoundReport> {
    if !tree.is_nonnegative() {
        return Err(Error::precondition(
            "the complete decoupling lower bound requires nonnegative summands",
        ));
    }
    let product = complete_decouple(tree)?;
    let lhs = 0.5 * product.sum_second_moment();
    let rhs = tree.sum_law()?.second_moment();
    Ok(BoundReport::new(InequalityId::CompleteLower, lhs, rhs, tol))
}

pub fn second_moment_upper(space: &JointDecoupledSpace, tol: f64) -> BoundReport {
    let lhs = d_sum_moments(space).second_moment;
    let rhs = 2.0 * e_sum_moments(space).second_moment;
    BoundReport::new(InequalityId::SecondMomentUpper, lhs, rhs, tol)
}

pub fn variance_upper(space: &JointDecoupledSpace, tol: f64) -> BoundReport {
    // Centered sums: Σ(d_i − E d_i) and Σ(e_i − E e_i).
    let lhs = d_sum_moments(space).variance;
    let rhs = 2.0 * e_sum_moments(space).variance;
    BoundReport::new(InequalityId::VarianceUpper, lhs, rhs, tol)
}

pub fn refined_upper(space: &JointDecoupledSpace, tol: f64) -> BoundReport {
    let lhs = d_sum_moments(space).second_moment;
    let e = e_sum_moments(space);
    let rhs = 2.0 * e.second_moment - e.mean * e.mean;
    BoundReport::new(InequalityId::RefinedUpper, lhs, rhs, tol)
}

/// The three tangent decoupling bounds.
pub fn tangent_reports(space: &JointDecoupledSpace, tol: f64) -> [BoundReport; 3] {
    [
        second_moment_upper(space, tol),
        variance_upper(space, tol),
        refined_upper(space, tol),
    ]
}

/// `min(1, 2 · var_decoupled / t²)`.
pub fn chebyshev_bound(var_decoupled: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::precondition(format!(
            "Chebyshev bound needs t > 0, got {t}"
        )));
    }
    if var_decoupled.is_nan() || var_decoupled < 0.0 {
        return Err(Error::precondition(format!(
            "Chebyshev bound needs a nonnegative variance, got {var_decoupled}"
        )));
    }
    Ok((2.0 * var_decoupled / (t * t)).min(1.0))
}

/// `(1 − θ)² (ES)² / (2 E S'² − (ES)²)`, clamped to `[0, 1]`.
pub fn paley_zygmund_bound(mean_s: f64, second_moment_decoupled: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::precondition(format!(
            "Paley-Zygmund bound needs 0 < θ < 1, got {theta}"
        )));
    }
    if mean_s.is_nan() || mean_s <= 0.0 {
        return Err(Error::precondition(format!(
            "Paley-Zygmund bound needs a positive mean, got {mean_s}"
        )));
    }
    let denom = 2.0 * second_moment_decoupled - mean_s * mean_s;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::precondition(format!(
            "2 E S'² − (E S)² = {denom} is not positive; the moments are inconsistent"
        )));
    }
    let q = 1.0 - theta;
    Ok((q * q * mean_s * mean_s / denom).clamp(0.0, 1.0))
}

/// Chebyshev-type bound against the exact `P(|Σd − EΣd| > t)`.
pub fn chebyshev_report(space: &JointDecoupledSpace, t: f64, tol: f64) -> Result<BoundReport> {
    let rhs = chebyshev_bound(e_sum_moments(space).variance, t)?;
    let mean = d_sum_moments(space).mean;
    let lhs = space
        .paths()
        .iter()
        .filter(|p| (p.sum() - mean).abs() > t)
        .fold(0.0, |acc, p| acc + p.prob);
    Ok(BoundReport::new(InequalityId::Chebyshev, lhs, rhs, tol).with_parameter(t))
}

/// Paley–Zygmund-type bound against the exact `P(Σd > θ EΣd)`; requires `Σd ≥ 0`.
pub fn paley_zygmund_report(
    space: &JointDecoupledSpace,
    theta: f64,
    tol: f64,
) -> Result<BoundReport> {
    if space.paths().iter().any(|p| p.sum() < 0.0) {
        return Err(Error::precondition(
            "the Paley-Zygmund bound requires a nonnegative sum",
        ));
    }
    let mean = d_sum_moments(space).mean;
    let rhs = paley_zygmund_bound(mean, e_sum_moments(space).second_moment, theta)?;
    let lhs = space
        .paths()
        .iter()
        .filter(|p| p.sum() > theta * mean)
        .fold(0.0, |acc, p| acc + p.prob);
    Ok(BoundReport::new(InequalityId::PaleyZygmund, lhs, rhs, tol).with_parameter(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupling::tangent_decouple;
    use crate::outcome::{gallery, DiscreteLaw, GalleryParams};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn unit_vector_lower_bound_slack() {
        for n in 2..=10 {
            let tree = gallery(
                "unit_vector",
                &GalleryParams {
                    n: Some(n),
                    ..Default::default()
                },
            )
            .unwrap();
            let r = complete_lower_bound(&tree, DEFAULT_TOL).unwrap();
            let nf = n as f64;
            assert!(close(r.lhs, (2.0 - 1.0 / nf) / 2.0));
            assert!(close(r.rhs, 1.0));
            assert!(close(r.slack, 1.0 / (2.0 * nf)));
            assert!(r.holds);
        }
    }

    #[test]
    fn complete_lower_rejects_negative_values() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 2).unwrap();
        assert!(matches!(
            complete_lower_bound(&tree, DEFAULT_TOL),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn independent_nonnegative_steps() {
        let law = DiscreteLaw::new(vec![(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let tree = OutcomeTree::iid(&law, 3).unwrap();
        let r = complete_lower_bound(&tree, DEFAULT_TOL).unwrap();
        assert!(close(r.lhs, 0.5 * r.rhs));
        assert!(close(r.slack, 0.5 * r.rhs));

        let space = tangent_decouple(&tree).unwrap();
        let s = second_moment_upper(&space, DEFAULT_TOL);
        assert!(close(s.rhs, 2.0 * s.lhs));
    }

    #[test]
    fn remark_equality_is_sharp() {
        let space =
            tangent_decouple(&gallery("remark_equality", &GalleryParams::default()).unwrap())
                .unwrap();
        for r in tangent_reports(&space, DEFAULT_TOL) {
            assert!(close(r.lhs, 4.0), "{r:?}");
            assert!(close(r.rhs, 4.0), "{r:?}");
            assert!(r.slack.abs() <= 1e-12);
            assert!(r.holds);
        }
    }

    #[test]
    fn deterministic_refined_is_tight() {
        let c = 1.5;
        let space =
            tangent_decouple(&OutcomeTree::iid(&DiscreteLaw::point(c), 3).unwrap()).unwrap();
        let r = refined_upper(&space, DEFAULT_TOL);
        assert!(close(r.lhs, 20.25));
        assert!(close(r.rhs, 20.25));
        let v = variance_upper(&space, DEFAULT_TOL);
        assert_eq!((v.lhs, v.rhs), (0.0, 0.0));
    }

    #[test]
    fn chebyshev_calculator() {
        assert_eq!(chebyshev_bound(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(chebyshev_bound(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(chebyshev_bound(0.5, 2.0).unwrap(), 0.25);
        let mut last = 1.0;
        for t in [1.0, 2.0, 4.0, 8.0, 16.0, 1e3] {
            let b = chebyshev_bound(0.7, t).unwrap();
            assert!(b <= last);
            last = b;
        }
        assert!(last < 1e-5);
        assert!(chebyshev_bound(1.0, 0.0).is_err());
        assert!(chebyshev_bound(1.0, -1.0).is_err());
    }

    #[test]
    fn paley_zygmund_calculator() {
        assert!(close(paley_zygmund_bound(1.0, 1.5, 0.5).unwrap(), 0.125));
        // Deterministic positive sum: E S'² = (E S)².
        assert!(close(paley_zygmund_bound(2.0, 4.0, 0.3).unwrap(), 0.49));
        assert!(paley_zygmund_bound(1.0, 1.5, 1.0 - 1e-9).unwrap() < 1e-15);
        assert!(paley_zygmund_bound(1.0, 1.5, 0.0).is_err());
        assert!(paley_zygmund_bound(1.0, 1.5, 1.0).is_err());
        assert!(paley_zygmund_bound(1.0, 0.4, 0.5).is_err());
        assert!(paley_zygmund_bound(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn comonotone_tail_reports() {
        let tree = gallery(
            "comonotone_bernoulli",
            &GalleryParams {
                n: Some(2),
                p: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        let space = tangent_decouple(&tree).unwrap();
        let c = chebyshev_report(&space, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(close(c.rhs, 1.0));
        let pz = paley_zygmund_report(&space, 0.5, DEFAULT_TOL).unwrap();
        assert!(close(pz.lhs, 0.5));
        assert!(close(pz.rhs, 0.125));
        assert!(close(pz.slack, 0.375));
        assert!(pz.holds);
    }

    #[test]
    fn report_holds_flag_respects_tolerance() {
        let r = BoundReport::new(InequalityId::SecondMomentUpper, 1.0 + 5e-10, 1.0, 1e-9);
        assert!(r.holds);
        let r = BoundReport::new(InequalityId::SecondMomentUpper, 1.0 + 5e-9, 1.0, 1e-9);
        assert!(!r.holds);
        let r = BoundReport::new(InequalityId::PaleyZygmund, 0.1, 0.2, 1e-9);
        assert!(!r.holds);
        assert!(close(r.slack, -0.1));
    }
}
