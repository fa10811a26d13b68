//! Exact moments and the L² projection of the decoupled sum onto the `d` path.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decoupling::JointDecoupledSpace;
use crate::error::{Error, Result};
use crate::outcome::DiscreteLaw;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentKind {
    Exact,
    Estimated {
        /// Standard error of the mean.
        std_error: f64,
        /// Standard error of the second-moment estimate.
        second_moment_std_error: f64,
        n_samples: u64,
        seed: u64,
        n_streams: u64,
    },
}

/// Mean, second moment and variance of a real statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    #[serde(flatten)]
    pub kind: MomentKind,
}

impl MomentSummary {
    pub fn is_exact(&self) -> bool {
        matches!(self.kind, MomentKind::Exact)
    }
}

pub fn exact_moments(law: &DiscreteLaw) -> MomentSummary {
    MomentSummary {
        mean: law.mean(),
        second_moment: law.second_moment(),
        variance: law.variance(),
        kind: MomentKind::Exact,
    }
}

/// Moments of a statistic given as `(value, probability)` atoms.
pub fn exact_moments_weighted<I>(atoms: I) -> Result<MomentSummary>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
    if atoms.is_empty() {
        return Err(Error::validation("moments of an empty atom list"));
    }
    let mean: f64 = atoms.iter().map(|&(v, p)| p * v).sum();
    let second_moment = atoms.iter().map(|&(v, p)| p * v * v).sum();
    let variance = atoms
        .iter()
        .map(|&(v, p)| p * (v - mean) * (v - mean))
        .sum();
    Ok(MomentSummary {
        mean,
        second_moment,
        variance,
        kind: MomentKind::Exact,
    })
}

/// Moments of `Σd` over the paths of the space.
pub fn d_sum_moments(space: &JointDecoupledSpace) -> MomentSummary {
    exact_moments_weighted(space.paths().iter().map(|p| (p.sum(), p.prob)))
        .expect("a validated tree has at least one path")
}

/// Moments of `Σe` over the joint atoms.
pub fn e_sum_moments(space: &JointDecoupledSpace) -> MomentSummary {
    exact_moments_weighted(
        space
            .atoms()
            .iter()
            .map(|a| (a.e_values.iter().sum(), a.prob)),
    )
    .expect("a validated space has at least one atom")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub path: usize,
    pub prob: f64,
    /// `E(Σe | d path)`.
    pub projection: f64,
}

/// `E(Σe | G)` for every `d` path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionTable {
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionTable {
    /// `E[E(Σe | G)]`.
    pub fn expectation(&self) -> f64 {
        self.rows.iter().map(|r| r.prob * r.projection).sum()
    }

    /// `E[E(Σe | G)²]`.
    pub fn second_moment(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.prob * r.projection * r.projection)
            .sum()
    }

    /// `d_1..d_n, prob, projection` per row.
    pub fn to_csv(&self, space: &JointDecoupledSpace) -> String {
        let n = space.steps();
        let mut out: String = (1..=n).map(|i| format!("d_{i},")).collect();
        out.push_str("prob,projection\n");
        for row in &self.rows {
            for v in &space.paths()[row.path].values {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{},{}", row.prob, row.projection);
        }
        out
    }
}

/// Projection of `Σe` onto the `d` path: the sum of the conditional step means read from
/// the source node laws.
pub fn project_on_g(space: &JointDecoupledSpace) -> ProjectionTable {
    let rows = space
        .paths()
        .iter()
        .enumerate()
        .map(|(k, p)| ProjectionRow {
            path: k,
            prob: p.prob,
            projection: space.step_means(k).iter().sum(),
        })
        .collect();
    ProjectionTable { rows }
}

fn projection_of(space: &JointDecoupledSpace) -> Vec<f64> {
    (0..space.paths().len())
        .map(|k| space.step_means(k).iter().sum())
        .collect()
}

/// Residual of the Pythagorean split
/// `E(Σe)² = E[Σe − E(Σe|G)]² + E[E(Σe|G)]²`.
pub fn check_decomposition(space: &JointDecoupledSpace) -> f64 {
    let proj = projection_of(space);
    let total = e_sum_moments(space).second_moment;
    let orthogonal: f64 = space
        .atoms()
        .iter()
        .map(|a| {
            let r = a.e_values.iter().sum::<f64>() - proj[a.path];
            a.prob * r * r
        })
        .sum();
    let projected = project_on_g(space).second_moment();
    (total - orthogonal - projected).abs()
}

/// Both sides of `E[Σd − E(Σe|G)]² = E[Σe − E(Σe|G)]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEquality {
    pub lhs: f64,
    pub rhs: f64,
}

impl DistanceEquality {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn check_distance_equality(space: &JointDecoupledSpace) -> DistanceEquality {
    let proj = projection_of(space);
    let lhs = space
        .paths()
        .iter()
        .zip(&proj)
        .map(|(p, g)| {
            let r = p.sum() - g;
            p.prob * r * r
        })
        .sum();
    let rhs = space
        .atoms()
        .iter()
        .map(|a| {
            let r = a.e_values.iter().sum::<f64>() - proj[a.path];
            a.prob * r * r
        })
        .sum();
    DistanceEquality { lhs, rhs }
}

/// Largest `|E[(x_i − E(e_i|G))(x_j − E(e_j|G))]|` over `i < j` and `x ∈ {d, e}`.
pub fn max_cross_term(space: &JointDecoupledSpace) -> f64 {
    let n = space.steps();
    let mut d_cross = vec![vec![0.0; n]; n];
    for (k, path) in space.paths().iter().enumerate() {
        let m = space.step_means(k);
        let centered: Vec<f64> = path.values.iter().zip(m).map(|(d, m)| d - m).collect();
        accumulate_cross(&mut d_cross, &centered, path.prob);
    }
    let mut e_cross = vec![vec![0.0; n]; n];
    for atom in space.atoms() {
        let m = space.step_means(atom.path);
        let centered: Vec<f64> = atom.e_values.iter().zip(m).map(|(e, m)| e - m).collect();
        accumulate_cross(&mut e_cross, &centered, atom.prob);
    }
    d_cross
        .iter()
        .chain(&e_cross)
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
}

fn accumulate_cross(acc: &mut [Vec<f64>], centered: &[f64], prob: f64) {
    for i in 0..centered.len() {
        for j in i + 1..centered.len() {
            acc[i][j] += prob * centered[i] * centered[j];
        }
    }
}
