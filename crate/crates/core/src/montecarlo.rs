//! Seeded Monte Carlo estimation over independent ChaCha streams.
//!
//! Stream `i` is `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, and the samples
//! are split over streams by a fixed rule. Streams run in parallel but their partial
//! results are merged in stream order, so an estimate depends only on
//! `(n_samples, seed, n_streams)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoupling::MarginalProduct;
use crate::error::{Error, Result};
use crate::moments::{MomentKind, MomentSummary};
use crate::outcome::{Branch, DiscreteLaw, Node, OutcomeTree};

pub type StreamRng = ChaCha8Rng;

pub const MIN_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_streams: u64,
    /// Draws buffered per stream before they are folded in. Does not affect results.
    pub batch: usize,
}

impl EstimatorConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            n_streams: 16,
            batch: 4096,
        }
    }

    pub fn with_streams(mut self, n_streams: u64) -> Self {
        self.n_streams = n_streams;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::validation(format!(
                "n_samples = {} is below the minimum of {MIN_SAMPLES}",
                self.n_samples
            )));
        }
        if self.n_streams == 0 {
            return Err(Error::validation("n_streams must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::validation("batch must be at least 1"));
        }
        Ok(())
    }

    /// Samples assigned to each stream; the first `n_samples % n_streams` streams take one
    /// extra.
    pub fn stream_sizes(&self) -> Vec<u64> {
        let base = self.n_samples / self.n_streams;
        let extra = self.n_samples % self.n_streams;
        (0..self.n_streams)
            .map(|i| base + u64::from(i < extra))
            .collect()
    }
}

/// The generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `work(rng, count)` once per stream in parallel and returns the results in stream
/// order.
pub fn run_streams<A, F>(cfg: &EstimatorConfig, work: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(&mut StreamRng, u64) -> A + Sync,
{
    cfg.validate()?;
    let sizes = cfg.stream_sizes();
    Ok(sizes
        .into_par_iter()
        .enumerate()
        .map(|(i, count)| work(&mut stream_rng(cfg.seed, i as u64), count))
        .collect())
}

/// A source of one real statistic per draw.
pub trait Sampler: Sync {
    fn draw(&self, rng: &mut StreamRng) -> f64;
}

impl<F> Sampler for F
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        self(rng)
    }
}

/// Streaming mean and variance of `x` and of `x²` (Welford, merged with Chan's rule).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
    mean_sq: f64,
    m2_sq: f64,
}

impl Accumulator {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let n = self.n as f64;
        let d = x - self.mean;
        self.mean += d / n;
        self.m2 += d * (x - self.mean);
        let y = x * x;
        let dy = y - self.mean_sq;
        self.mean_sq += dy / n;
        self.m2_sq += dy * (y - self.mean_sq);
    }

    pub(crate) fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.mean += d * nb / n;
        let dy = other.mean_sq - self.mean_sq;
        self.m2_sq += other.m2_sq + dy * dy * na * nb / n;
        self.mean_sq += dy * nb / n;
        self.n += other.n;
    }

    pub(crate) fn summary(&self, cfg: &EstimatorConfig) -> MomentSummary {
        let n = self.n as f64;
        let var = if self.n > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        let var_sq = if self.n > 1 {
            self.m2_sq / (n - 1.0)
        } else {
            0.0
        };
        MomentSummary {
            mean: self.mean,
            second_moment: self.mean_sq,
            variance: var,
            kind: MomentKind::Estimated {
                std_error: (var / n).sqrt(),
                second_moment_std_error: (var_sq / n).sqrt(),
                n_samples: self.n,
                seed: cfg.seed,
                n_streams: cfg.n_streams,
            },
        }
    }
}

fn accumulate<S: Sampler + ?Sized>(sampler: &S, cfg: &EstimatorConfig) -> Result<Accumulator> {
    let batch = cfg.batch;
    let parts = run_streams(cfg, |rng, count| {
        let mut acc = Accumulator::default();
        let mut buf = Vec::with_capacity(batch.min(count as usize));
        let mut left = count;
        while left > 0 {
            let take = left.min(batch as u64);
            buf.clear();
            buf.extend((0..take).map(|_| sampler.draw(rng)));
            buf.iter().for_each(|&x| acc.push(x));
            left -= take;
        }
        acc
    })?;
    let mut total = Accumulator::default();
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

/// Sample mean and second moment of the sampler's statistic, with standard errors.
pub fn estimate_moments<S: Sampler + ?Sized>(
    sampler: &S,
    cfg: &EstimatorConfig,
) -> Result<MomentSummary> {
    Ok(accumulate(sampler, cfg)?.summary(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum TailSide {
    /// `X > threshold`.
    Above,
    /// `|X − center| > threshold`.
    TwoSidedCentered { center: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

impl TailEstimate {
    pub(crate) fn from_count(hits: u64, n: u64) -> Self {
        let p_hat = hits as f64 / n as f64;
        Self {
            p_hat,
            std_error: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
            n_samples: n,
        }
    }
}

/// Binomial proportion estimate of a tail probability.
pub fn estimate_tail<S: Sampler + ?Sized>(
    sampler: &S,
    threshold: f64,
    side: TailSide,
    cfg: &EstimatorConfig,
) -> Result<TailEstimate> {
    let hits: u64 = run_streams(cfg, |rng, count| {
        (0..count)
            .filter(|_| {
                let x = sampler.draw(rng);
                match side {
                    TailSide::Above => x > threshold,
                    TailSide::TwoSidedCentered { center } => (x - center).abs() > threshold,
                }
            })
            .count() as u64
    })?
    .into_iter()
    .sum();
    Ok(TailEstimate::from_count(hits, cfg.n_samples))
}

/// Standardized discrepancies of an estimate from exact moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub mean: f64,
    pub second_moment: f64,
}

impl ZScores {
    pub fn max_abs(&self) -> f64 {
        self.mean.abs().max(self.second_moment.abs())
    }
}

/// Discrepancies smaller than this (relative to the exact value) count as zero when the
/// standard error vanishes.
const ZERO_SE_TOL: f64 = 1e-12;

fn standardize(estimate: f64, exact: f64, se: f64) -> Result<f64> {
    let diff = estimate - exact;
    if se > 0.0 {
        return Ok(diff / se);
    }
    if diff.abs() <= ZERO_SE_TOL * exact.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Inconsistent(format!(
            "zero standard error but estimate {estimate} differs from exact {exact}"
        )))
    }
}

pub fn zscore(estimate: &MomentSummary, exact: &MomentSummary) -> Result<ZScores> {
    let MomentKind::Estimated {
        std_error,
        second_moment_std_error,
        ..
    } = estimate.kind
    else {
        return Err(Error::precondition(
            "zscore needs an estimated summary as its first argument",
        ));
    };
    if !exact.is_exact() {
        return Err(Error::precondition(
            "zscore needs an exact summary as its second argument",
        ));
    }
    Ok(ZScores {
        mean: standardize(estimate.mean, exact.mean, std_error)?,
        second_moment: standardize(
            estimate.second_moment,
            exact.second_moment,
            second_moment_std_error,
        )?,
    })
}

/// Draws a value from a law by inversion.
pub fn draw_from_law<R: Rng + ?Sized>(law: &DiscreteLaw, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(v, p) in law.atoms() {
        acc += p;
        if u < acc {
            return v;
        }
    }
    law.max_value()
}

fn draw_branch<'a, R: Rng + ?Sized>(node: &'a Node, rng: &mut R) -> &'a Branch {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (_, b) in node.live_branches() {
        acc += b.prob();
        if u < acc {
            return b;
        }
        last = Some(b);
    }
    last.expect("validated internal nodes have a live branch")
}

/// Samples `Σd` by walking the tree.
#[derive(Debug, Clone, Copy)]
pub struct PathSampler<'a>(pub &'a OutcomeTree);

impl Sampler for PathSampler<'_> {
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        let mut node = self.0.root();
        let mut sum = 0.0;
        while !node.is_leaf() {
            let b = draw_branch(node, rng);
            sum += b.value();
            node = b.child();
        }
        sum
    }
}

/// Samples `Σe`: walks a `d` path and draws each `e_i` independently from the same node.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledSampler<'a>(pub &'a OutcomeTree);

impl Sampler for DecoupledSampler<'_> {
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        let mut node = self.0.root();
        let mut sum = 0.0;
        while !node.is_leaf() {
            let d = draw_branch(node, rng);
            sum += draw_branch(node, rng).value();
            node = d.child();
        }
        sum
    }
}

/// Samples `Σz` from independent marginals.
#[derive(Debug, Clone, Copy)]
pub struct ProductSampler<'a>(pub &'a MarginalProduct);

impl Sampler for ProductSampler<'_> {
    fn draw(&self, rng: &mut StreamRng) -> f64 {
        self.0
            .laws()
            .iter()
            .map(|law| draw_from_law(law, rng))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_has_zero_error() {
        let cfg = EstimatorConfig::new(1000, 3);
        let m = estimate_moments(&|_: &mut StreamRng| 2.5, &cfg).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.second_moment, 6.25);
        let MomentKind::Estimated {
            std_error,
            n_samples,
            ..
        } = m.kind
        else {
            panic!()
        };
        assert_eq!(std_error, 0.0);
        assert_eq!(n_samples, 1000);
    }

    #[test]
    fn too_few_samples() {
        let cfg = EstimatorConfig::new(99, 0);
        assert!(estimate_moments(&|_: &mut StreamRng| 0.0, &cfg).is_err());
        assert!(estimate_moments(
            &|_: &mut StreamRng| 0.0,
            &EstimatorConfig::new(100, 0).with_streams(0)
        )
        .is_err());
    }

    #[test]
    fn stream_sizes_cover_all_samples() {
        let cfg = EstimatorConfig::new(1003, 0).with_streams(10);
        let sizes = cfg.stream_sizes();
        assert_eq!(sizes.iter().sum::<u64>(), 1003);
        assert_eq!(&sizes[..4], &[101, 101, 101, 100]);
    }

    #[test]
    fn batch_size_does_not_change_results() {
        let sampler = |rng: &mut StreamRng| rng.random::<f64>();
        let a = EstimatorConfig {
            batch: 7,
            ..EstimatorConfig::new(5000, 9)
        };
        let b = EstimatorConfig {
            batch: 4096,
            ..EstimatorConfig::new(5000, 9)
        };
        assert_eq!(
            estimate_moments(&sampler, &a).unwrap(),
            estimate_moments(&sampler, &b).unwrap()
        );
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..200)
            .map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0)
            .collect();
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        xs[..77].iter().for_each(|&x| a.push(x));
        xs[77..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.n, whole.n);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9);
        assert!((a.mean_sq - whole.mean_sq).abs() < 1e-12);
        assert!((a.m2_sq - whole.m2_sq).abs() < 1e-9);
    }

    #[test]
    fn deterministic_tail() {
        let cfg = EstimatorConfig::new(500, 1);
        let t = estimate_tail(&|_: &mut StreamRng| 1.0, 1.5, TailSide::Above, &cfg).unwrap();
        assert_eq!(t.p_hat, 0.0);
        assert_eq!(t.std_error, 0.0);
    }

    #[test]
    fn zscore_arithmetic() {
        let exact = MomentSummary {
            mean: 0.75,
            second_moment: 1.0,
            variance: 0.4375,
            kind: MomentKind::Exact,
        };
        let est = MomentSummary {
            mean: 0.752,
            second_moment: 1.0,
            variance: 0.4375,
            kind: MomentKind::Estimated {
                std_error: 0.001,
                second_moment_std_error: 0.01,
                n_samples: 100,
                seed: 0,
                n_streams: 1,
            },
        };
        let z = zscore(&est, &exact).unwrap();
        assert!((z.mean - 2.0).abs() < 1e-9);
        assert_eq!(z.second_moment, 0.0);
        let same = zscore(&MomentSummary { mean: 0.75, ..est }, &exact).unwrap();
        assert_eq!(same.mean, 0.0);

        let degenerate = MomentSummary {
            kind: MomentKind::Estimated {
                std_error: 0.0,
                second_moment_std_error: 0.0,
                n_samples: 100,
                seed: 0,
                n_streams: 1,
            },
            ..est
        };
        assert!(matches!(
            zscore(&degenerate, &exact),
            Err(Error::Inconsistent(_))
        ));
        assert!(zscore(&exact, &exact).is_err());
    }

    #[test]
    fn law_inversion_frequencies() {
        let law = DiscreteLaw::new(vec![(0.0, 0.2), (1.0, 0.8)]).unwrap();
        let cfg = EstimatorConfig::new(100_000, 5);
        let m = estimate_moments(&|rng: &mut StreamRng| draw_from_law(&law, rng), &cfg).unwrap();
        let MomentKind::Estimated { std_error, .. } = m.kind else {
            panic!()
        };
        assert!(((m.mean - 0.8) / std_error).abs() < 4.0);
    }
}
