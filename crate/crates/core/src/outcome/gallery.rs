//! Named reference models.
//!
//! * `comonotone_bernoulli(n, p)`: `d_1 = ... = d_n ~ Ber(p)`. Complete decoupling admits no
//!   upper bound here: `E(Σd)² = n²p` while `E(Σz)² = np(np + 1 − p)`.
//! * `unit_vector(n)`: `(d_1, ..., d_n) = u_k` with probability `1/n`. The sum is identically
//!   1, the independent copies sum to `Bin(n, 1/n)`; this attains the constant ½ of the
//!   complete-decoupling lower bound as `n → ∞`.
//! * `remark_equality()`: `d_1` Rademacher, `d_2 = d_1`. The tangent copy has `e_2 = d_1`
//!   forced, and all three tangent second-moment bounds hold with equality.
//! * `quadratic_form(a, X)`: `d_j = Σ_{i<j} a_ij X_i X_j` on the natural filtration of
//!   i.i.d. `X_i`, so `Σ d_j` is the quadratic form `Q_n`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::law::DiscreteLaw;
use super::tree::{Branch, Node, OutcomeTree, DEFAULT_CAP};
use crate::error::{Error, Result};

/// Optional parameters shared by all gallery models; each model reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GalleryParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Square coefficient matrix; only entries above the diagonal are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<DiscreteLaw>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GalleryModel {
    ComonotoneBernoulli {
        n: usize,
        p: f64,
    },
    UnitVector {
        n: usize,
    },
    RemarkEquality,
    QuadraticForm {
        coeffs: Vec<Vec<f64>>,
        step: DiscreteLaw,
    },
}

pub const GALLERY_NAMES: [&str; 4] = [
    "comonotone_bernoulli",
    "unit_vector",
    "remark_equality",
    "quadratic_form",
];

impl GalleryModel {
    pub fn from_name(name: &str, params: &GalleryParams) -> Result<Self> {
        let need_n = || {
            params
                .n
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::validation(format!("{name} needs a step count n ≥ 1")))
        };
        match name {
            "comonotone_bernoulli" => {
                let n = need_n()?;
                let p = params
                    .p
                    .ok_or_else(|| Error::validation("comonotone_bernoulli needs p"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::validation(format!("p = {p} outside [0, 1]")));
                }
                Ok(Self::ComonotoneBernoulli { n, p })
            }
            "unit_vector" => Ok(Self::UnitVector { n: need_n()? }),
            "remark_equality" => Ok(Self::RemarkEquality),
            "quadratic_form" => {
                let coeffs = params
                    .coeffs
                    .clone()
                    .ok_or_else(|| Error::validation("quadratic_form needs coeffs"))?;
                let step = params.step.clone().unwrap_or_else(DiscreteLaw::rademacher);
                Ok(Self::QuadraticForm { coeffs, step })
            }
            other => Err(Error::UnknownGallery(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ComonotoneBernoulli { .. } => "comonotone_bernoulli",
            Self::UnitVector { .. } => "unit_vector",
            Self::RemarkEquality => "remark_equality",
            Self::QuadraticForm { .. } => "quadratic_form",
        }
    }

    pub fn build(&self) -> Result<OutcomeTree> {
        match self {
            Self::ComonotoneBernoulli { n, p } => {
                let root = Node::new(vec![
                    Branch::new(1.0, *p, constant_chain(1.0, n - 1)),
                    Branch::new(0.0, 1.0 - p, constant_chain(0.0, n - 1)),
                ]);
                OutcomeTree::new(*n, root)
            }
            Self::UnitVector { n } => OutcomeTree::new(*n, unit_vector_node(0, *n)),
            Self::RemarkEquality => {
                let root = Node::new(vec![
                    Branch::new(1.0, 0.5, constant_chain(1.0, 1)),
                    Branch::new(-1.0, 0.5, constant_chain(-1.0, 1)),
                ]);
                OutcomeTree::new(2, root)
            }
            Self::QuadraticForm { coeffs, step } => quadratic_form(coeffs, step),
        }
    }
}

/// Builds the named gallery model.
pub fn gallery(name: &str, params: &GalleryParams) -> Result<OutcomeTree> {
    GalleryModel::from_name(name, params)?.build()
}

/// `len` further steps that all equal `value`.
fn constant_chain(value: f64, len: usize) -> Arc<Node> {
    let mut node = Arc::new(Node::leaf());
    for _ in 0..len {
        node = Arc::new(Node::new(vec![Branch::new(value, 1.0, node)]));
    }
    node
}

// All steps before `depth` were 0; the 1 sits uniformly among the remaining positions.
fn unit_vector_node(depth: usize, n: usize) -> Arc<Node> {
    let remaining = n - depth;
    if remaining == 1 {
        return Arc::new(Node::new(vec![Branch::terminal(1.0, 1.0)]));
    }
    let hit = 1.0 / remaining as f64;
    Arc::new(Node::new(vec![
        Branch::new(1.0, hit, constant_chain(0.0, remaining - 1)),
        Branch::new(0.0, 1.0 - hit, unit_vector_node(depth + 1, n)),
    ]))
}

fn quadratic_form(coeffs: &[Vec<f64>], step: &DiscreteLaw) -> Result<OutcomeTree> {
    let n = coeffs.len();
    if n == 0 {
        return Err(Error::validation(
            "quadratic_form needs a non-empty coefficient matrix",
        ));
    }
    if let Some(row) = coeffs.iter().position(|r| r.len() != n) {
        return Err(Error::validation(format!(
            "coefficient matrix must be {n}x{n}; row {row} has {} entries",
            coeffs[row].len()
        )));
    }
    if coeffs.iter().flatten().any(|a| !a.is_finite()) {
        return Err(Error::validation("coefficients must be finite"));
    }
    if step.is_empty() {
        return Err(Error::validation(
            "quadratic_form needs a finitely supported step law",
        ));
    }
    let leaves = (step.len() as u128).saturating_pow(n as u32);
    if leaves > DEFAULT_CAP as u128 {
        return Err(Error::CapExceeded {
            needed: leaves,
            cap: DEFAULT_CAP,
        });
    }

    fn node(coeffs: &[Vec<f64>], step: &DiscreteLaw, xs: &mut Vec<f64>) -> Node {
        let j = xs.len();
        if j == coeffs.len() {
            return Node::leaf();
        }
        let branches = step
            .atoms()
            .iter()
            .map(|&(x, p)| {
                let d: f64 = xs
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| coeffs[i][j] * xi * x)
                    .sum();
                xs.push(x);
                let child = node(coeffs, step, xs);
                xs.pop();
                Branch::new(d, p, child)
            })
            .collect();
        Node::new(branches)
    }

    OutcomeTree::new(n, node(coeffs, step, &mut Vec::with_capacity(n)))
}
