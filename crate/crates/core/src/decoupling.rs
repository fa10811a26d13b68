//! Complete and tangent decoupling of an [`OutcomeTree`].
//!
//! The tangent copy is built on the canonical product enlargement: along every `d` path,
//! `e_i` is drawn independently from the node law that produced `d_i`. The master
//! σ-algebra is the full `d` path, so the `e_i` are conditionally independent given it and
//! each `e_i` has the conditional law of `d_i` given the first `i − 1` steps.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::moments::{MomentKind, MomentSummary};
use crate::outcome::{
    law_distance, DiscreteLaw, Node, OutcomeTree, PathAtom, DEFAULT_CAP, MERGE_TOL,
};

/// Mass tolerance for joint spaces assembled from explicit atoms.
pub const SPACE_MASS_TOL: f64 = 1e-9;

/// Independent `z_1, ..., z_n` with `z_i` distributed as `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProduct {
    laws: Vec<DiscreteLaw>,
}

impl MarginalProduct {
    pub fn new(laws: Vec<DiscreteLaw>) -> Self {
        Self { laws }
    }

    pub fn laws(&self) -> &[DiscreteLaw] {
        &self.laws
    }

    pub fn sum_mean(&self) -> f64 {
        self.laws.iter().map(DiscreteLaw::mean).sum()
    }

    pub fn sum_variance(&self) -> f64 {
        self.laws.iter().map(DiscreteLaw::variance).sum()
    }

    /// `E(Σz)²`, from the marginals alone.
    pub fn sum_second_moment(&self) -> f64 {
        let m = self.sum_mean();
        self.sum_variance() + m * m
    }

    /// Exact moments of `Σz`.
    pub fn sum_moments(&self) -> MomentSummary {
        MomentSummary {
            mean: self.sum_mean(),
            second_moment: self.sum_second_moment(),
            variance: self.sum_variance(),
            kind: MomentKind::Exact,
        }
    }

    /// Law of `Σz` by repeated convolution.
    pub fn sum_law_capped(&self, cap: usize) -> Result<DiscreteLaw> {
        let mut acc = DiscreteLaw::point(0.0);
        for law in &self.laws {
            acc = acc.convolve(law, cap)?;
        }
        Ok(acc)
    }

    pub fn sum_law(&self) -> Result<DiscreteLaw> {
        self.sum_law_capped(DEFAULT_CAP)
    }

    /// The product law as a tree of independent steps.
    pub fn to_tree(&self) -> Result<OutcomeTree> {
        OutcomeTree::product(&self.laws)
    }
}

/// Marginals of every step, interpreted as an independent sequence.
pub fn complete_decouple(tree: &OutcomeTree) -> Result<MarginalProduct> {
    complete_decouple_capped(tree, DEFAULT_CAP)
}

pub fn complete_decouple_capped(tree: &OutcomeTree, cap: usize) -> Result<MarginalProduct> {
    Ok(MarginalProduct::new(tree.marginal_laws_capped(cap)?))
}

/// One atom of the joint law of `(d, e)`; the `d` values are those of `path`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAtom {
    pub path: usize,
    pub e_values: Vec<f64>,
    pub prob: f64,
}

/// Enumerated joint law of a sequence and its tangent decoupled copy.
#[derive(Debug, Clone)]
pub struct JointDecoupledSpace {
    source: OutcomeTree,
    paths: Vec<PathAtom>,
    step_means: Vec<Vec<f64>>,
    atoms: Vec<JointAtom>,
}

impl JointDecoupledSpace {
    /// Assembles a space from explicit atoms over the paths of `source`.
    ///
    /// The atoms must have total mass 1 and reproduce the path probabilities of `source`;
    /// nothing else is checked, so the result may violate tangency or conditional
    /// independence.
    pub fn from_atoms(source: &OutcomeTree, atoms: Vec<JointAtom>) -> Result<Self> {
        let (paths, step_means) = paths_and_means(source, DEFAULT_CAP)?;
        let n = source.steps();
        let mut path_mass = vec![0.0; paths.len()];
        for atom in &atoms {
            if atom.path >= paths.len() {
                return Err(Error::validation(format!(
                    "atom refers to unknown path {}",
                    atom.path
                )));
            }
            if atom.e_values.len() != n {
                return Err(Error::validation(format!(
                    "atom has {} e-values, expected {n}",
                    atom.e_values.len()
                )));
            }
            if !(atom.prob.is_finite() && atom.prob >= 0.0) {
                return Err(Error::validation(format!(
                    "atom probability {} is invalid",
                    atom.prob
                )));
            }
            path_mass[atom.path] += atom.prob;
        }
        let total: f64 = path_mass.iter().sum();
        if (total - 1.0).abs() > SPACE_MASS_TOL {
            return Err(Error::validation(format!(
                "joint atoms carry mass {total}, not 1"
            )));
        }
        for (k, (mass, path)) in path_mass.iter().zip(&paths).enumerate() {
            if (mass - path.prob).abs() > SPACE_MASS_TOL {
                return Err(Error::validation(format!(
                    "atoms give path {k} mass {mass}, the source gives {}",
                    path.prob
                )));
            }
        }
        Ok(Self {
            source: source.clone(),
            paths,
            step_means,
            atoms,
        })
    }

    pub fn steps(&self) -> usize {
        self.source.steps()
    }

    pub fn source(&self) -> &OutcomeTree {
        &self.source
    }

    /// The `d` paths of the source tree.
    pub fn paths(&self) -> &[PathAtom] {
        &self.paths
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn d_values(&self, atom: &JointAtom) -> &[f64] {
        &self.paths[atom.path].values
    }

    /// `E(d_i | F_{i−1})` along path `path`, read from the source node laws.
    pub fn step_means(&self, path: usize) -> &[f64] {
        &self.step_means[path]
    }

    /// One row per atom: `d_1..d_n, e_1..e_n, prob`.
    pub fn to_csv(&self) -> String {
        let n = self.steps();
        let mut out = String::new();
        let header: Vec<String> = (1..=n)
            .map(|i| format!("d_{i}"))
            .chain((1..=n).map(|i| format!("e_{i}")))
            .chain(std::iter::once("prob".to_string()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for atom in &self.atoms {
            for v in self.d_values(atom).iter().chain(&atom.e_values) {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", atom.prob);
        }
        out
    }
}

fn paths_and_means(tree: &OutcomeTree, cap: usize) -> Result<(Vec<PathAtom>, Vec<Vec<f64>>)> {
    tree.check_paths(cap)?;
    let mut paths = Vec::new();
    let mut means = Vec::new();
    tree.visit_paths(|values, branches, nodes, prob| {
        paths.push(PathAtom {
            values: values.to_vec(),
            prob,
            branches: branches.to_vec(),
        });
        means.push(nodes.iter().map(|n| n.conditional_mean()).collect());
    });
    Ok((paths, means))
}

/// Number of joint atoms `tangent_decouple` would produce.
pub fn joint_atom_count(tree: &OutcomeTree) -> u128 {
    fn count(node: &Node, memo: &mut HashMap<*const Node, u128>) -> u128 {
        if node.is_leaf() {
            return 1;
        }
        let key = node as *const Node;
        if let Some(&c) = memo.get(&key) {
            return c;
        }
        let width = node.live_count() as u128;
        let c = node.live_branches().fold(0u128, |acc, (_, b)| {
            acc.saturating_add(width.saturating_mul(count(b.child(), memo)))
        });
        memo.insert(key, c);
        c
    }
    count(tree.root(), &mut HashMap::new())
}

/// Tangent decoupled copy of `tree`, subject to [`DEFAULT_CAP`] joint atoms.
pub fn tangent_decouple(tree: &OutcomeTree) -> Result<JointDecoupledSpace> {
    tangent_decouple_capped(tree, DEFAULT_CAP)
}

pub fn tangent_decouple_capped(tree: &OutcomeTree, cap: usize) -> Result<JointDecoupledSpace> {
    let needed = joint_atom_count(tree);
    if needed > cap as u128 {
        return Err(Error::CapExceeded { needed, cap });
    }
    let n = tree.steps();
    let mut paths = Vec::new();
    let mut step_means = Vec::new();
    let mut atoms = Vec::with_capacity(needed as usize);
    tree.visit_paths(|values, branches, nodes, prob| {
        let path = paths.len();
        paths.push(PathAtom {
            values: values.to_vec(),
            prob,
            branches: branches.to_vec(),
        });
        step_means.push(nodes.iter().map(|node| node.conditional_mean()).collect());

        // Odometer over the live branches of each node on the path.
        let choices: Vec<Vec<(f64, f64)>> = nodes
            .iter()
            .map(|node| {
                node.live_branches()
                    .map(|(_, b)| (b.value(), b.prob()))
                    .collect()
            })
            .collect();
        let mut digits = vec![0usize; n];
        loop {
            let mut p = prob;
            let e_values = digits
                .iter()
                .zip(&choices)
                .map(|(&k, c)| {
                    p *= c[k].1;
                    c[k].0
                })
                .collect();
            atoms.push(JointAtom {
                path,
                e_values,
                prob: p,
            });
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < choices[i].len() {
                    break;
                }
                digits[i] = 0;
            }
        }
    });
    Ok(JointDecoupledSpace {
        source: tree.clone(),
        paths,
        step_means,
        atoms,
    })
}

/// Largest discrepancy between the conditional laws of `d_i` and `e_i` given the first
/// `i − 1` steps, over all steps and all prefixes of positive probability.
///
/// Conditional laws are obtained by dividing joint sums, independently of the source
/// node laws.
pub fn verify_tangency(space: &JointDecoupledSpace) -> f64 {
    struct Acc {
        mass: f64,
        d: Vec<(f64, f64)>,
        e: Vec<(f64, f64)>,
    }
    let n = space.steps();
    let mut groups: HashMap<(usize, &[usize]), Acc> = HashMap::new();
    for atom in space.atoms() {
        let path = &space.paths()[atom.path];
        for i in 0..n {
            let acc = groups
                .entry((i, &path.branches[..i]))
                .or_insert_with(|| Acc {
                    mass: 0.0,
                    d: Vec::new(),
                    e: Vec::new(),
                });
            acc.mass += atom.prob;
            acc.d.push((path.values[i], atom.prob));
            acc.e.push((atom.e_values[i], atom.prob));
        }
    }
    groups
        .into_values()
        .filter(|acc| acc.mass > 0.0)
        .map(|acc| {
            let scale = |v: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
                v.into_iter().map(|(x, p)| (x, p / acc.mass)).collect()
            };
            law_distance(&scale(acc.d), &scale(acc.e))
        })
        .fold(0.0, f64::max)
}

/// Largest discrepancy between the conditional joint law of `(e_1, ..., e_n)` given the
/// `d` path and the product of its conditional marginals.
pub fn verify_conditional_independence(space: &JointDecoupledSpace) -> f64 {
    let n = space.steps();
    let mut by_path: Vec<Vec<&JointAtom>> = vec![Vec::new(); space.paths().len()];
    for atom in space.atoms() {
        by_path[atom.path].push(atom);
    }
    let mut worst = 0.0_f64;
    for atoms in by_path {
        let mass: f64 = atoms.iter().map(|a| a.prob).sum();
        if mass <= 0.0 {
            continue;
        }
        // Canonical value grid per coordinate.
        let grids: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                DiscreteLaw::collect(atoms.iter().map(|a| (a.e_values[i], 1.0)).collect())
                    .atoms()
                    .iter()
                    .map(|a| a.0)
                    .collect()
            })
            .collect();
        let index = |i: usize, v: f64| -> usize {
            let grid = &grids[i];
            let k = grid.partition_point(|&g| g < v - MERGE_TOL);
            k.min(grid.len() - 1)
        };
        let mut joint: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut marginals: Vec<Vec<f64>> = grids.iter().map(|g| vec![0.0; g.len()]).collect();
        for atom in &atoms {
            let key: Vec<usize> = (0..n).map(|i| index(i, atom.e_values[i])).collect();
            let p = atom.prob / mass;
            for (i, &k) in key.iter().enumerate() {
                marginals[i][k] += p;
            }
            *joint.entry(key).or_insert(0.0) += p;
        }
        // Walk the full product grid so that missing combinations count too.
        let mut digits = vec![0usize; n];
        'outer: loop {
            let product: f64 = digits
                .iter()
                .enumerate()
                .map(|(i, &k)| marginals[i][k])
                .product();
            let observed = joint.get(&digits).copied().unwrap_or(0.0);
            worst = worst.max((observed - product).abs());
            let mut i = n;
            loop {
                if i == 0 {
                    break 'outer;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < grids[i].len() {
                    break;
                }
                digits[i] = 0;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::{gallery, Branch, GalleryParams};

    fn remark() -> OutcomeTree {
        gallery("remark_equality", &GalleryParams::default()).unwrap()
    }

    #[test]
    fn remark_equality_forces_second_copy() {
        let space = tangent_decouple(&remark()).unwrap();
        assert_eq!(space.atoms().len(), 4);
        for atom in space.atoms() {
            let d = space.d_values(atom);
            assert_eq!(atom.e_values[1], d[0]);
            assert_eq!(atom.prob, 0.25);
        }
        let e1_law = DiscreteLaw::collect(
            space
                .atoms()
                .iter()
                .map(|a| (a.e_values[0], a.prob))
                .collect(),
        );
        assert_eq!(e1_law, DiscreteLaw::rademacher());
        assert!(verify_tangency(&space) <= 1e-12);
        assert!(verify_conditional_independence(&space) <= 1e-12);
    }

    #[test]
    fn one_step_copies_are_independent() {
        let law = DiscreteLaw::new(vec![(0.0, 0.2), (1.0, 0.3), (3.0, 0.5)]).unwrap();
        let tree = OutcomeTree::iid(&law, 1).unwrap();
        let space = tangent_decouple(&tree).unwrap();
        assert_eq!(space.atoms().len(), 9);
        for atom in space.atoms() {
            let d = space.d_values(atom)[0];
            let e = atom.e_values[0];
            assert!((atom.prob - law.pmf(d) * law.pmf(e)).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbed_second_step_breaks_tangency() {
        // Independent Rademacher pair; move 0.1 of mass from e_2 = -1 to e_2 = +1 on the
        // path (+1, +1), whose prefix d_1 = +1 carries mass 1/2.
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 2).unwrap();
        let base = tangent_decouple(&tree).unwrap();
        let mut atoms = base.atoms().to_vec();
        let target = base
            .paths()
            .iter()
            .position(|p| p.values == [1.0, 1.0])
            .unwrap();
        let from = atoms
            .iter()
            .position(|a| a.path == target && a.e_values == [1.0, -1.0])
            .unwrap();
        let to = atoms
            .iter()
            .position(|a| a.path == target && a.e_values == [1.0, 1.0])
            .unwrap();
        atoms[from].prob -= 0.05;
        atoms[to].prob += 0.05;
        let space = JointDecoupledSpace::from_atoms(&tree, atoms).unwrap();
        // Conditional on the prefix (+1): e_2 moves 0.05 / 0.5 = 0.1.
        let t = verify_tangency(&space);
        assert!(t >= 0.1 - 1e-9, "tangency discrepancy {t}");
        assert!((t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn copied_coordinates_break_conditional_independence() {
        // e_2 = e_1 given each d path, both Rademacher: joint mass 1/2 on the diagonal
        // against a product mass of 1/4.
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 2).unwrap();
        let paths = tree.enumerate_paths().unwrap();
        let atoms = (0..paths.len())
            .flat_map(|k| {
                [-1.0, 1.0].map(|e| JointAtom {
                    path: k,
                    e_values: vec![e, e],
                    prob: paths[k].prob / 2.0,
                })
            })
            .collect();
        let space = JointDecoupledSpace::from_atoms(&tree, atoms).unwrap();
        assert!((verify_conditional_independence(&space) - 0.25).abs() < 1e-12);
        // Marginally each e_i is still Rademacher given its prefix.
        assert!(verify_tangency(&space) < 1e-12);
    }

    #[test]
    fn deterministic_tree_has_zero_discrepancies() {
        let root = Node::new(vec![Branch::new(
            2.0,
            1.0,
            Node::new(vec![Branch::terminal(-1.0, 1.0)]),
        )]);
        let tree = OutcomeTree::new(2, root).unwrap();
        let space = tangent_decouple(&tree).unwrap();
        assert_eq!(verify_conditional_independence(&space), 0.0);
        assert_eq!(verify_tangency(&space), 0.0);
    }

    #[test]
    fn complete_decoupling_of_unit_vector() {
        for n in 2..=6 {
            let tree = gallery(
                "unit_vector",
                &GalleryParams {
                    n: Some(n),
                    ..Default::default()
                },
            )
            .unwrap();
            let product = complete_decouple(&tree).unwrap();
            for law in product.laws() {
                assert!((law.pmf(1.0) - 1.0 / n as f64).abs() < 1e-12);
                assert!((law.pmf(0.0) - (1.0 - 1.0 / n as f64)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complete_decoupling_is_idempotent() {
        let tree = gallery(
            "comonotone_bernoulli",
            &GalleryParams {
                n: Some(3),
                p: Some(0.4),
                ..Default::default()
            },
        )
        .unwrap();
        let once = complete_decouple(&tree).unwrap();
        let twice = complete_decouple(&once.to_tree().unwrap()).unwrap();
        for (a, b) in once.laws().iter().zip(twice.laws()) {
            assert!(crate::outcome::law_distance(a.atoms(), b.atoms()) < 1e-12);
        }
    }

    #[test]
    fn from_atoms_rejects_wrong_marginals() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 1).unwrap();
        let atoms = vec![
            JointAtom {
                path: 0,
                e_values: vec![1.0],
                prob: 0.9,
            },
            JointAtom {
                path: 1,
                e_values: vec![1.0],
                prob: 0.1,
            },
        ];
        assert!(JointDecoupledSpace::from_atoms(&tree, atoms).is_err());
    }

    #[test]
    fn cap_exceeded() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 4).unwrap();
        assert_eq!(joint_atom_count(&tree), 256);
        assert!(matches!(
            tangent_decouple_capped(&tree, 255),
            Err(Error::CapExceeded { needed: 256, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let space = tangent_decouple(&remark()).unwrap();
        let csv = space.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("d_1,d_2,e_1,e_2,prob"));
        assert_eq!(lines.count(), 4);
    }
}
