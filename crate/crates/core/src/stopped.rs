//! Second moments of randomly stopped sums `S_τ = Σ_i X_i 1{τ ≥ i}` of i.i.d. increments.
//!
//! Since `{τ ≥ i}` is known before `X_i` is drawn, replacing every `X_i` by an independent
//! copy gives a tangent decoupled sequence whose sum has the law of `S_τ'` for an
//! independent copy `τ'` of `τ`. Its moments depend only on `μ`, `σ²` and the tail
//! `q_j = P(τ ≥ j)`:
//!
//! ```text
//! E S_τ'  = μ Eτ
//! E S_τ'² = (μ² + σ²) Eτ + 2μ² Σ_{j≥2} (j − 1) q_j
//! ```
//!
//! and the refined decoupling inequality bounds `E S_τ² ≤ 2 E S_τ'² − (E S_τ')²`.
//!
//! The tail vector has a finite horizon `J = tail.len()`; `τ ≤ J` always. `q_1 < 1` means
//! `τ = 0` (and `S_τ = 0`) with probability `1 − q_1`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundReport, InequalityId};
use crate::error::{Error, Result};
use crate::moments::MomentSummary;
use crate::montecarlo::{draw_from_law, run_streams, Accumulator, EstimatorConfig, TailEstimate};
use crate::outcome::{Branch, DiscreteLaw, Node, OutcomeTree, DEFAULT_CAP};

/// Allowed disagreement between declared `μ`, `σ²` and those of the increment support.
pub const SPEC_CONSISTENCY_TOL: f64 = 1e-9;

const TAIL_MONOTONE_TOL: f64 = 1e-12;

type StopPredicate = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A predicate on increment prefixes, `true` meaning stop now.
#[derive(Clone)]
pub struct CustomRule(Arc<StopPredicate>);

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomRule(..)")
    }
}

/// How `τ` is decided. Every deterministic rule sees only `X_1..X_i` when deciding
/// whether `τ = i`, which makes `τ` a stopping time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    /// `τ = m`.
    Fixed { m: usize },
    /// Stop right after the first increment `≥ threshold`.
    FirstAtLeast { threshold: f64 },
    /// Stop once the partial sum is `≥ threshold`.
    SumAtLeast { threshold: f64 },
    /// Stop once the partial sum leaves the open interval `(lower, upper)`.
    SumOutside { lower: f64, upper: f64 },
    /// `τ` drawn from the declared tail independently of the increments.
    Independent,
    #[serde(skip)]
    Custom(CustomRule),
}

impl StoppingRule {
    pub fn custom(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Self::Custom(CustomRule(Arc::new(f)))
    }

    /// Whether to stop after observing `prefix`; `None` for [`StoppingRule::Independent`].
    pub fn should_stop(&self, prefix: &[f64]) -> Option<bool> {
        let sum = || prefix.iter().sum::<f64>();
        Some(match self {
            Self::Fixed { m } => prefix.len() >= *m,
            Self::FirstAtLeast { threshold } => prefix.last().is_some_and(|&x| x >= *threshold),
            Self::SumAtLeast { threshold } => sum() >= *threshold,
            Self::SumOutside { lower, upper } => {
                let s = sum();
                s <= *lower || s >= *upper
            }
            Self::Independent => return None,
            Self::Custom(rule) => (rule.0)(prefix),
        })
    }

    pub fn is_independent(&self) -> bool {
        matches!(self, Self::Independent)
    }
}

/// Increment law and stopping time of a randomly stopped sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "StoppedSumConfig")]
pub struct StoppedSumSpec {
    mu: f64,
    sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    increment_support: Option<DiscreteLaw>,
    tail: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopping_rule: Option<StoppingRule>,
}

/// File form of a [`StoppedSumSpec`]; `mu` and `sigma2` default to the moments of the
/// increment support.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppedSumConfig {
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub increment_support: Option<DiscreteLaw>,
    pub tail: Vec<f64>,
    #[serde(default)]
    pub stopping_rule: Option<StoppingRule>,
}

impl TryFrom<StoppedSumConfig> for StoppedSumSpec {
    type Error = Error;

    fn try_from(c: StoppedSumConfig) -> Result<Self> {
        let support = c.increment_support.as_ref();
        let mu =
            c.mu.or_else(|| support.map(DiscreteLaw::mean))
                .ok_or_else(|| Error::validation("spec needs mu or an increment support"))?;
        let sigma2 = c
            .sigma2
            .or_else(|| support.map(DiscreteLaw::variance))
            .ok_or_else(|| Error::validation("spec needs sigma2 or an increment support"))?;
        let mut spec = StoppedSumSpec::new(mu, sigma2, c.tail)?;
        if let Some(law) = c.increment_support {
            spec = spec.with_support(law)?;
        }
        if let Some(rule) = c.stopping_rule {
            spec = spec.with_rule(rule);
        }
        Ok(spec)
    }
}

/// Checks that `tail` is a valid vector `P(τ ≥ j)`, `j = 1..J`.
pub fn validate_tail(tail: &[f64]) -> Result<()> {
    let mut prev = 1.0;
    for (j, &q) in tail.iter().enumerate() {
        if !(q.is_finite() && (0.0..=1.0).contains(&q)) {
            return Err(Error::validation(format!(
                "tail entry q_{} = {q} outside [0, 1]",
                j + 1
            )));
        }
        if q > prev + TAIL_MONOTONE_TOL {
            return Err(Error::validation(format!(
                "tail is not monotone: q_{} = {q} exceeds q_{} = {prev}",
                j + 1,
                j
            )));
        }
        prev = q;
    }
    Ok(())
}

impl StoppedSumSpec {
    pub fn new(mu: f64, sigma2: f64, tail: Vec<f64>) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::validation(format!("mu = {mu} is not finite")));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::validation(format!(
                "sigma2 = {sigma2} must be finite and nonnegative"
            )));
        }
        validate_tail(&tail)?;
        Ok(Self {
            mu,
            sigma2,
            increment_support: None,
            tail,
            stopping_rule: None,
        })
    }

    /// Spec whose `μ`, `σ²` are those of `support`.
    pub fn from_support(support: DiscreteLaw, tail: Vec<f64>) -> Result<Self> {
        Self::new(support.mean(), support.variance(), tail)?.with_support(support)
    }

    pub fn with_support(mut self, support: DiscreteLaw) -> Result<Self> {
        if (support.mean() - self.mu).abs() > SPEC_CONSISTENCY_TOL
            || (support.variance() - self.sigma2).abs() > SPEC_CONSISTENCY_TOL
        {
            return Err(Error::validation(format!(
                "increment support has mean {} and variance {}, spec declares {} and {}",
                support.mean(),
                support.variance(),
                self.mu,
                self.sigma2
            )));
        }
        self.increment_support = Some(support);
        Ok(self)
    }

    pub fn with_rule(mut self, rule: StoppingRule) -> Self {
        self.stopping_rule = Some(rule);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn horizon(&self) -> usize {
        self.tail.len()
    }

    pub fn increment_support(&self) -> Option<&DiscreteLaw> {
        self.increment_support.as_ref()
    }

    pub fn stopping_rule(&self) -> Option<&StoppingRule> {
        self.stopping_rule.as_ref()
    }

    /// `P(τ = k)` for `k = 0..=J`.
    pub fn tau_law(&self) -> Vec<f64> {
        let j = self.tail.len();
        (0..=j)
            .map(|k| {
                let here = if k == 0 { 1.0 } else { self.tail[k - 1] };
                let next = self.tail.get(k).copied().unwrap_or(0.0);
                (here - next).max(0.0)
            })
            .collect()
    }

    fn sampling_parts(&self) -> Result<(&DiscreteLaw, &StoppingRule)> {
        let support = self
            .increment_support
            .as_ref()
            .ok_or_else(|| Error::precondition("this operation needs an increment support"))?;
        let rule = self
            .stopping_rule
            .as_ref()
            .ok_or_else(|| Error::precondition("this operation needs a stopping rule"))?;
        Ok((support, rule))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauMoments {
    pub mean: f64,
    pub second_moment: f64,
}

/// `Eτ = Σ q_j` and `Eτ² = Σ (2j − 1) q_j`.
pub fn tau_moments_from_tail(tail: &[f64]) -> Result<TauMoments> {
    validate_tail(tail)?;
    let mean = tail.iter().sum();
    let second_moment = tail
        .iter()
        .enumerate()
        .map(|(k, q)| (2 * k + 1) as f64 * q)
        .sum();
    Ok(TauMoments {
        mean,
        second_moment,
    })
}

pub fn tau_moments(spec: &StoppedSumSpec) -> TauMoments {
    tau_moments_from_tail(&spec.tail).expect("tail validated at construction")
}

/// `E S_τ'` and `E S_τ'²` for `τ'` an independent copy of `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoupledStoppedMoments {
    pub mean: f64,
    pub second_moment: f64,
}

fn weighted_tail_series(tail: &[f64]) -> f64 {
    // Σ_{j≥2} (j − 1) q_j with q_j = tail[j − 1].
    tail.iter().enumerate().map(|(k, q)| k as f64 * q).sum()
}

pub fn decoupled_stopped_moments(spec: &StoppedSumSpec) -> DecoupledStoppedMoments {
    let e_tau = tau_moments(spec).mean;
    let mu2 = spec.mu * spec.mu;
    DecoupledStoppedMoments {
        mean: spec.mu * e_tau,
        second_moment: (mu2 + spec.sigma2) * e_tau + 2.0 * mu2 * weighted_tail_series(&spec.tail),
    }
}

/// The upper bound on `E S_τ²` and the moments it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedSumBound {
    pub decoupled: DecoupledStoppedMoments,
    /// `2 E S_τ'² − (E S_τ')²`.
    pub rhs: f64,
    /// `2μ² Σ_{j≥2}(j − 1) q_j + (2μ² + 2σ² − μ) Eτ`, an alternative closed form that agrees
    /// with `rhs` only in special cases. Reported for comparison, never used as the bound.
    pub alternate_closed_form: f64,
}

impl StoppedSumBound {
    /// Report against a known `E S_τ²`; `tol` is the admissible shortfall.
    pub fn report(&self, lhs: f64, tol: f64) -> BoundReport {
        BoundReport::new(InequalityId::StoppedSumUpper, lhs, self.rhs, tol)
    }
}

pub fn stopped_sum_upper_bound(spec: &StoppedSumSpec) -> StoppedSumBound {
    let decoupled = decoupled_stopped_moments(spec);
    let e_tau = tau_moments(spec).mean;
    let (mu, sigma2) = (spec.mu, spec.sigma2);
    StoppedSumBound {
        decoupled,
        rhs: 2.0 * decoupled.second_moment - decoupled.mean * decoupled.mean,
        alternate_closed_form: 2.0 * mu * mu * weighted_tail_series(&spec.tail)
            + (2.0 * mu * mu + 2.0 * sigma2 - mu) * e_tau,
    }
}

/// `σ² Eτ`, the second moment of `S_τ` when the increments are centered.
pub fn wald_second_moment(sigma2: f64, e_tau: f64) -> f64 {
    sigma2 * e_tau
}

/// Exact law summaries of `(τ, S_τ)` obtained by enumerating increment paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactStopped {
    pub mean: f64,
    pub second_moment: f64,
    /// `P(τ ≥ j)`, `j = 1..J`.
    pub tail: Vec<f64>,
    /// Probability that the rule had not stopped by the horizon.
    pub capped_mass: f64,
}

impl ExactStopped {
    /// Largest gap between the enumerated tail and the declared one.
    pub fn tail_discrepancy(&self, declared: &[f64]) -> f64 {
        self.tail
            .iter()
            .zip(declared)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Enumerates every increment path up to the horizon and applies the stopping rule.
pub fn exact_stopped(spec: &StoppedSumSpec) -> Result<ExactStopped> {
    exact_stopped_capped(spec, DEFAULT_CAP)
}

pub fn exact_stopped_capped(spec: &StoppedSumSpec, cap: usize) -> Result<ExactStopped> {
    let (support, rule) = spec.sampling_parts()?;
    let horizon = spec.horizon();
    let mut tau_mass = vec![0.0; horizon + 1];
    let (mut mean, mut second) = (0.0, 0.0);
    let mut capped_mass = 0.0;

    if rule.is_independent() {
        let tau_law = spec.tau_law();
        let mut sum_law = DiscreteLaw::point(0.0);
        for (k, &pk) in tau_law.iter().enumerate() {
            if k > 0 {
                sum_law = sum_law.convolve(support, cap)?;
            }
            tau_mass[k] = pk;
            mean += pk * sum_law.mean();
            second += pk * sum_law.second_moment();
        }
    } else {
        struct Walk<'a> {
            support: &'a DiscreteLaw,
            rule: &'a StoppingRule,
            horizon: usize,
            cap: usize,
            leaves: usize,
            tau_mass: Vec<f64>,
            mean: f64,
            second: f64,
            capped: f64,
        }
        impl Walk<'_> {
            fn go(&mut self, prefix: &mut Vec<f64>, prob: f64) -> Result<()> {
                let k = prefix.len();
                let stop = self.rule.should_stop(prefix).unwrap_or(false);
                if stop || k == self.horizon {
                    self.leaves += 1;
                    if self.leaves > self.cap {
                        return Err(Error::CapExceeded {
                            needed: self.leaves as u128,
                            cap: self.cap,
                        });
                    }
                    let s: f64 = prefix.iter().sum();
                    self.tau_mass[k] += prob;
                    self.mean += prob * s;
                    self.second += prob * s * s;
                    if !stop {
                        self.capped += prob;
                    }
                    return Ok(());
                }
                for &(x, p) in self.support.atoms() {
                    prefix.push(x);
                    self.go(prefix, prob * p)?;
                    prefix.pop();
                }
                Ok(())
            }
        }
        let mut walk = Walk {
            support,
            rule,
            horizon,
            cap,
            leaves: 0,
            tau_mass,
            mean: 0.0,
            second: 0.0,
            capped: 0.0,
        };
        walk.go(&mut Vec::with_capacity(horizon), 1.0)?;
        tau_mass = walk.tau_mass;
        mean = walk.mean;
        second = walk.second;
        capped_mass = walk.capped;
    }

    let tail = (1..=horizon).map(|j| tau_mass[j..].iter().sum()).collect();
    Ok(ExactStopped {
        mean,
        second_moment: second,
        tail,
        capped_mass,
    })
}

/// The sequence `d_i = X_i 1{τ ≥ i}`, `i = 1..J`, as an outcome tree on the filtration of
/// the increments. Needs a deterministic rule.
pub fn stopped_tree(spec: &StoppedSumSpec) -> Result<OutcomeTree> {
    let (support, rule) = spec.sampling_parts()?;
    if rule.is_independent() {
        return Err(Error::precondition(
            "an independent stopping time is not adapted to the increment filtration",
        ));
    }
    let horizon = spec.horizon();
    if horizon == 0 {
        return Err(Error::precondition(
            "stopped trees need a horizon of at least one step",
        ));
    }
    let leaves = (support.len() as u128).saturating_pow(horizon as u32);
    if leaves > DEFAULT_CAP as u128 {
        return Err(Error::CapExceeded {
            needed: leaves,
            cap: DEFAULT_CAP,
        });
    }

    // After stopping, every remaining step is 0.
    let mut zero_chains = vec![Arc::new(Node::leaf())];
    for _ in 0..horizon {
        let last = zero_chains.last().unwrap().clone();
        zero_chains.push(Arc::new(Node::new(vec![Branch::new(0.0, 1.0, last)])));
    }

    fn node(
        prefix: &mut Vec<f64>,
        horizon: usize,
        support: &DiscreteLaw,
        rule: &StoppingRule,
        zero_chains: &[Arc<Node>],
    ) -> Arc<Node> {
        let k = prefix.len();
        if k == horizon {
            return zero_chains[0].clone();
        }
        if rule.should_stop(prefix).unwrap_or(false) {
            return zero_chains[horizon - k].clone();
        }
        let branches = support
            .atoms()
            .iter()
            .map(|&(x, p)| {
                prefix.push(x);
                let child = node(prefix, horizon, support, rule, zero_chains);
                prefix.pop();
                Branch::new(x, p, child)
            })
            .collect();
        Arc::new(Node::new(branches))
    }

    let root = node(
        &mut Vec::with_capacity(horizon),
        horizon,
        support,
        rule,
        &zero_chains,
    );
    OutcomeTree::new(horizon, root)
}

/// One draw of a stopped sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedDraw {
    pub tau: usize,
    pub sum: f64,
    /// The rule had not stopped by the horizon.
    pub capped: bool,
}

/// Draws increments one at a time, consulting the rule after each.
pub fn sample_stopped_sum<R: Rng + ?Sized>(
    spec: &StoppedSumSpec,
    rng: &mut R,
) -> Result<StoppedDraw> {
    let (support, rule) = spec.sampling_parts()?;
    let horizon = spec.horizon();
    if rule.is_independent() {
        let u: f64 = rng.random();
        let tau = spec.tail.iter().take_while(|&&q| u < q).count();
        let sum = (0..tau).map(|_| draw_from_law(support, rng)).sum();
        return Ok(StoppedDraw {
            tau,
            sum,
            capped: false,
        });
    }
    let mut prefix = Vec::with_capacity(horizon);
    loop {
        if rule.should_stop(&prefix).unwrap_or(false) {
            return Ok(StoppedDraw {
                tau: prefix.len(),
                sum: prefix.iter().sum(),
                capped: false,
            });
        }
        if prefix.len() == horizon {
            return Ok(StoppedDraw {
                tau: horizon,
                sum: prefix.iter().sum(),
                capped: true,
            });
        }
        prefix.push(draw_from_law(support, rng));
    }
}

/// Monte Carlo moments of `S_τ` and the empirical tail of `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedEstimate {
    pub moments: MomentSummary,
    pub tail: Vec<TailEstimate>,
}

impl StoppedEstimate {
    /// Largest `|q̂_j − q_j| / SE_j`; entries with zero standard error must match exactly.
    pub fn tail_zscore(&self, declared: &[f64]) -> f64 {
        self.tail
            .iter()
            .zip(declared)
            .map(|(est, &q)| {
                let diff = (est.p_hat - q).abs();
                if est.std_error > 0.0 {
                    diff / est.std_error
                } else if diff <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn estimate_stopped(spec: &StoppedSumSpec, cfg: &EstimatorConfig) -> Result<StoppedEstimate> {
    spec.sampling_parts()?;
    let horizon = spec.horizon();
    let parts = run_streams(cfg, |rng, count| -> Result<(Accumulator, Vec<u64>)> {
        let mut acc = Accumulator::default();
        let mut reached = vec![0u64; horizon];
        for _ in 0..count {
            let draw = sample_stopped_sum(spec, rng)?;
            acc.push(draw.sum);
            reached[..draw.tau].iter_mut().for_each(|c| *c += 1);
        }
        Ok((acc, reached))
    })?;
    let mut total = Accumulator::default();
    let mut reached = vec![0u64; horizon];
    for part in parts {
        let (acc, r) = part?;
        total.merge(&acc);
        reached.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    Ok(StoppedEstimate {
        moments: total.summary(cfg),
        tail: reached
            .into_iter()
            .map(|h| TailEstimate::from_count(h, cfg.n_samples))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{refined_upper, DEFAULT_TOL};
    use crate::decoupling::tangent_decouple;
    use crate::montecarlo::stream_rng;

    fn first_success() -> StoppedSumSpec {
        StoppedSumSpec::from_support(DiscreteLaw::bernoulli(0.5).unwrap(), vec![1.0, 0.5])
            .unwrap()
            .with_rule(StoppingRule::FirstAtLeast { threshold: 1.0 })
    }

    #[test]
    fn tau_moment_examples() {
        assert_eq!(
            tau_moments_from_tail(&[1.0, 1.0, 1.0]).unwrap(),
            TauMoments {
                mean: 3.0,
                second_moment: 9.0
            }
        );
        assert_eq!(
            tau_moments_from_tail(&[1.0, 0.5]).unwrap(),
            TauMoments {
                mean: 1.5,
                second_moment: 2.5
            }
        );
        assert_eq!(
            tau_moments_from_tail(&[1.0]).unwrap(),
            TauMoments {
                mean: 1.0,
                second_moment: 1.0
            }
        );
        assert!(tau_moments_from_tail(&[0.5, 0.7]).is_err());
        assert!(tau_moments_from_tail(&[1.2]).is_err());
    }

    #[test]
    fn decoupled_moments_first_success() {
        let d = decoupled_stopped_moments(&first_success());
        assert!((d.mean - 0.75).abs() < 1e-15);
        assert!((d.second_moment - 1.0).abs() < 1e-15);
        let b = stopped_sum_upper_bound(&first_success());
        assert!((b.rhs - 1.4375).abs() < 1e-15);
    }

    #[test]
    fn centered_increments_reduce_to_wald() {
        let spec = StoppedSumSpec::new(0.0, 2.0, vec![1.0, 0.8, 0.3]).unwrap();
        let d = decoupled_stopped_moments(&spec);
        assert_eq!(d.mean, 0.0);
        assert!((d.second_moment - wald_second_moment(2.0, 2.1)).abs() < 1e-12);
    }

    #[test]
    fn fixed_tau_matches_iid_sum() {
        let (mu, s2, m) = (0.7, 1.3, 4usize);
        let spec = StoppedSumSpec::new(mu, s2, vec![1.0; m]).unwrap();
        let d = decoupled_stopped_moments(&spec);
        let mf = m as f64;
        assert!((d.mean - mu * mf).abs() < 1e-12);
        assert!((d.second_moment - (mf * s2 + mf * mf * mu * mu)).abs() < 1e-12);
    }

    #[test]
    fn exact_first_success() {
        let exact = exact_stopped(&first_success()).unwrap();
        assert!((exact.second_moment - 0.75).abs() < 1e-15);
        assert!((exact.mean - 0.75).abs() < 1e-15);
        assert!(exact.tail_discrepancy(&[1.0, 0.5]) < 1e-15);
        assert!((exact.capped_mass - 0.25).abs() < 1e-15);
        let r = stopped_sum_upper_bound(&first_success()).report(exact.second_moment, DEFAULT_TOL);
        assert!(r.holds);
        assert!((r.slack - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn tree_route_agrees_with_closed_form() {
        let spec = first_success();
        let tree = stopped_tree(&spec).unwrap();
        let space = tangent_decouple(&tree).unwrap();
        let refined = refined_upper(&space, DEFAULT_TOL);
        assert!((refined.lhs - 0.75).abs() < 1e-12);
        assert!((refined.rhs - stopped_sum_upper_bound(&spec).rhs).abs() < 1e-12);
    }

    #[test]
    fn degenerate_increments_are_tight() {
        let (mu, m) = (1.5, 3);
        let spec = StoppedSumSpec::from_support(DiscreteLaw::point(mu), vec![1.0; m])
            .unwrap()
            .with_rule(StoppingRule::Fixed { m });
        let b = stopped_sum_upper_bound(&spec);
        let target = mu * mu * (m * m) as f64;
        assert!((b.rhs - target).abs() < 1e-12);
        assert!((exact_stopped(&spec).unwrap().second_moment - target).abs() < 1e-12);
        let mut rng = stream_rng(1, 0);
        for _ in 0..10 {
            let d = sample_stopped_sum(&spec, &mut rng).unwrap();
            assert_eq!((d.tau, d.sum), (m, mu * m as f64));
        }
    }

    #[test]
    fn independent_rule_matches_decoupled_moments() {
        let spec = StoppedSumSpec::from_support(
            DiscreteLaw::new(vec![(-1.0, 0.3), (2.0, 0.7)]).unwrap(),
            vec![0.9, 0.6, 0.2],
        )
        .unwrap()
        .with_rule(StoppingRule::Independent);
        let exact = exact_stopped(&spec).unwrap();
        let d = decoupled_stopped_moments(&spec);
        assert!((exact.mean - d.mean).abs() < 1e-12);
        assert!((exact.second_moment - d.second_moment).abs() < 1e-12);
        assert!(exact.tail_discrepancy(spec.tail()) < 1e-12);
        assert!(stopped_tree(&spec).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = first_success();
        let draws = |seed| {
            let mut rng = stream_rng(seed, 0);
            (0..50)
                .map(|_| sample_stopped_sum(&spec, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draws(4), draws(4));
    }

    #[test]
    fn sampling_needs_support_and_rule() {
        let spec = StoppedSumSpec::new(0.0, 1.0, vec![1.0]).unwrap();
        assert!(sample_stopped_sum(&spec, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn config_parsing() {
        let spec = StoppedSumSpec::from_json(
            r#"{"increment_support": {"atoms": [[0, 0.5], [1, 0.5]]}, "tail": [1, 0.5],
                "stopping_rule": {"rule": "first_at_least", "threshold": 1}}"#,
        )
        .unwrap();
        assert_eq!(spec.mu(), 0.5);
        assert_eq!(spec.sigma2(), 0.25);
        assert!(
            StoppedSumSpec::from_json(r#"{"mu": 0, "sigma2": 1, "tail": [0.5, 0.9]}"#).is_err()
        );
        assert!(StoppedSumSpec::from_json(
            r#"{"mu": 0.3, "increment_support": {"atoms": [[0, 0.5], [1, 0.5]]}, "tail": [1]}"#
        )
        .is_err());
    }

    #[test]
    fn tau_law_with_mass_at_zero() {
        let spec = StoppedSumSpec::new(1.0, 0.0, vec![0.75, 0.25]).unwrap();
        assert_eq!(spec.tau_law(), vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn custom_rule_sum_outside() {
        let spec = StoppedSumSpec::from_support(DiscreteLaw::rademacher(), vec![1.0, 0.0])
            .unwrap()
            .with_rule(StoppingRule::custom(|p: &[f64]| {
                p.iter().sum::<f64>().abs() >= 1.0
            }));
        let exact = exact_stopped(&spec).unwrap();
        assert_eq!(exact.tail, vec![1.0, 0.0]);
        assert_eq!(exact.second_moment, 1.0);
    }
}
