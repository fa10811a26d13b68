use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Branch, Node, OutcomeTree};
use crate::error::{Error, Result};

/// Largest supported depth and branching for generated trees.
pub const MAX_RANDOM_STEPS: usize = 6;
pub const MAX_RANDOM_BRANCHING: usize = 4;

/// Shape and value range of a randomly generated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeSpec {
    pub steps: usize,
    pub max_branching: usize,
    pub lo: f64,
    pub hi: f64,
    /// Clamp the value range to `[0, hi]`.
    #[serde(default)]
    pub nonnegative: bool,
}

impl RandomTreeSpec {
    pub fn new(steps: usize, max_branching: usize, lo: f64, hi: f64) -> Self {
        Self {
            steps,
            max_branching,
            lo,
            hi,
            nonnegative: false,
        }
    }

    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = true;
        self
    }
}

/// Generates a tree whose every node has between 1 and `max_branching` branches with
/// strictly positive probabilities and values uniform on the value range.
///
/// The result is a pure function of `spec` and `seed`.
pub fn random_tree(spec: &RandomTreeSpec, seed: u64) -> Result<OutcomeTree> {
    if spec.steps == 0 || spec.steps > MAX_RANDOM_STEPS {
        return Err(Error::validation(format!(
            "random trees need 1 ≤ n ≤ {MAX_RANDOM_STEPS}, got {}",
            spec.steps
        )));
    }
    if spec.max_branching == 0 || spec.max_branching > MAX_RANDOM_BRANCHING {
        return Err(Error::validation(format!(
            "random trees need 1 ≤ branching ≤ {MAX_RANDOM_BRANCHING}, got {}",
            spec.max_branching
        )));
    }
    let lo = if spec.nonnegative {
        spec.lo.max(0.0)
    } else {
        spec.lo
    };
    let hi = spec.hi;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::validation(format!("empty value range [{lo}, {hi}]")));
    }

    fn node(rng: &mut ChaCha8Rng, depth: usize, spec: &RandomTreeSpec, lo: f64, hi: f64) -> Node {
        if depth == spec.steps {
            return Node::leaf();
        }
        let k = rng.random_range(1..=spec.max_branching);
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let branches = weights
            .into_iter()
            .map(|w| {
                let value = rng.random_range(lo..=hi);
                let child = node(rng, depth + 1, spec, lo, hi);
                Branch::new(value, w / total, child)
            })
            .collect();
        Node::new(branches)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = node(&mut rng, 0, spec, lo, hi);
    OutcomeTree::new(spec.steps, root)
}
