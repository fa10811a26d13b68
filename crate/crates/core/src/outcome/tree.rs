use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::law::{DiscreteLaw, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// Default ceiling on the number of enumerated atoms.
pub const DEFAULT_CAP: usize = 10_000_000;

/// One outgoing edge of a node: the next step takes `value` with probability `prob`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    value: f64,
    prob: f64,
    #[serde(default)]
    child: Arc<Node>,
}

impl Branch {
    pub fn new(value: f64, prob: f64, child: impl Into<Arc<Node>>) -> Self {
        Self {
            value,
            prob,
            child: child.into(),
        }
    }

    /// A branch that ends the path.
    pub fn terminal(value: f64, prob: f64) -> Self {
        Self::new(value, prob, Node::leaf())
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn child(&self) -> &Node {
        &self.child
    }
}

/// A node at depth `i` holds the conditional law of step `i + 1` given the path so far.
/// Leaves have no branches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Node {
    #[serde(default)]
    branches: Vec<Branch>,
}

impl Node {
    pub fn new(branches: Vec<Branch>) -> Self {
        Self { branches }
    }

    pub fn leaf() -> Self {
        Self::default()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_leaf(&self) -> bool {
        self.branches.is_empty()
    }

    /// Branches carrying positive probability.
    pub fn live_branches(&self) -> impl Iterator<Item = (usize, &Branch)> {
        self.branches
            .iter()
            .enumerate()
            .filter(|(_, b)| b.prob > 0.0)
    }

    pub fn live_count(&self) -> usize {
        self.live_branches().count()
    }

    /// Conditional mean of the next step.
    pub fn conditional_mean(&self) -> f64 {
        self.branches.iter().map(|b| b.prob * b.value).sum()
    }

    /// Conditional law of the next step, branches with equal values merged.
    pub fn conditional_law(&self) -> DiscreteLaw {
        DiscreteLaw::collect(self.branches.iter().map(|b| (b.value, b.prob)).collect())
    }
}

/// One realization `d_1, ..., d_n` together with its probability and the branch indices
/// that identify its root-to-leaf path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAtom {
    pub values: Vec<f64>,
    pub prob: f64,
    pub branches: Vec<usize>,
}

impl PathAtom {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// A validated finite adapted sequence of `steps` random variables.
///
/// Cloning is cheap: nodes are shared behind `Arc`s and never mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTree {
    steps: usize,
    root: Arc<Node>,
}

impl OutcomeTree {
    pub fn new(steps: usize, root: impl Into<Arc<Node>>) -> Result<Self> {
        let tree = Self {
            steps,
            root: root.into(),
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Tree of independent steps with the given laws. Subtrees are shared, so the tree
    /// occupies `O(Σ |law_i|)` memory.
    pub fn product(laws: &[DiscreteLaw]) -> Result<Self> {
        let mut node = Arc::new(Node::leaf());
        for law in laws.iter().rev() {
            let branches = law
                .atoms()
                .iter()
                .map(|&(v, p)| Branch {
                    value: v,
                    prob: p,
                    child: node.clone(),
                })
                .collect();
            node = Arc::new(Node::new(branches));
        }
        Self::new(laws.len(), node)
    }

    /// Independent and identically distributed steps.
    pub fn iid(law: &DiscreteLaw, steps: usize) -> Result<Self> {
        Self::product(&vec![law.clone(); steps])
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::validation("a tree needs at least one step"));
        }
        let mut seen = HashSet::new();
        validate_node(&self.root, 0, self.steps, &mut seen)
    }

    /// Whether every value on every branch is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        fn walk(node: &Node, seen: &mut HashSet<*const Node>) -> bool {
            if !seen.insert(node as *const Node) {
                return true;
            }
            node.branches
                .iter()
                .all(|b| b.value >= 0.0 && walk(&b.child, seen))
        }
        walk(&self.root, &mut HashSet::new())
    }

    /// Number of positive-probability root-to-leaf paths.
    pub fn path_count(&self) -> u128 {
        fn count(node: &Node, memo: &mut HashMap<*const Node, u128>) -> u128 {
            if node.is_leaf() {
                return 1;
            }
            let key = node as *const Node;
            if let Some(&c) = memo.get(&key) {
                return c;
            }
            let c = node.live_branches().fold(0u128, |acc, (_, b)| {
                acc.saturating_add(count(&b.child, memo))
            });
            memo.insert(key, c);
            c
        }
        count(&self.root, &mut HashMap::new())
    }

    pub(crate) fn check_paths(&self, cap: usize) -> Result<()> {
        let needed = self.path_count();
        if needed > cap as u128 {
            return Err(Error::CapExceeded { needed, cap });
        }
        Ok(())
    }

    /// Calls `visit(values, branches, nodes, prob)` for every positive-probability path,
    /// where `nodes[i]` is the node from which step `i + 1` was drawn.
    pub(crate) fn visit_paths<F>(&self, mut visit: F)
    where
        F: FnMut(&[f64], &[usize], &[&Node], f64),
    {
        fn walk<'a, F>(
            node: &'a Node,
            prob: f64,
            values: &mut Vec<f64>,
            branches: &mut Vec<usize>,
            nodes: &mut Vec<&'a Node>,
            visit: &mut F,
        ) where
            F: FnMut(&[f64], &[usize], &[&Node], f64),
        {
            if node.is_leaf() {
                visit(values, branches, nodes, prob);
                return;
            }
            nodes.push(node);
            for (k, b) in node.live_branches() {
                values.push(b.value);
                branches.push(k);
                walk(&b.child, prob * b.prob, values, branches, nodes, visit);
                values.pop();
                branches.pop();
            }
            nodes.pop();
        }
        let n = self.steps;
        walk(
            &self.root,
            1.0,
            &mut Vec::with_capacity(n),
            &mut Vec::with_capacity(n),
            &mut Vec::with_capacity(n),
            &mut visit,
        );
    }

    /// All positive-probability paths, subject to [`DEFAULT_CAP`].
    pub fn enumerate_paths(&self) -> Result<Vec<PathAtom>> {
        self.enumerate_paths_capped(DEFAULT_CAP)
    }

    pub fn enumerate_paths_capped(&self, cap: usize) -> Result<Vec<PathAtom>> {
        self.check_paths(cap)?;
        let mut out = Vec::new();
        self.visit_paths(|values, branches, _, prob| {
            out.push(PathAtom {
                values: values.to_vec(),
                prob,
                branches: branches.to_vec(),
            })
        });
        Ok(out)
    }

    /// Law of `d_1 + ... + d_n`.
    pub fn sum_law(&self) -> Result<DiscreteLaw> {
        self.sum_law_capped(DEFAULT_CAP)
    }

    pub fn sum_law_capped(&self, cap: usize) -> Result<DiscreteLaw> {
        self.check_paths(cap)?;
        let mut atoms = Vec::new();
        self.visit_paths(|values, _, _, prob| atoms.push((values.iter().sum(), prob)));
        Ok(DiscreteLaw::collect(atoms))
    }

    /// Marginal law of each step.
    pub fn marginal_laws_capped(&self, cap: usize) -> Result<Vec<DiscreteLaw>> {
        self.check_paths(cap)?;
        let mut atoms = vec![Vec::new(); self.steps];
        self.visit_paths(|values, _, _, prob| {
            for (bucket, &v) in atoms.iter_mut().zip(values) {
                bucket.push((v, prob));
            }
        });
        Ok(atoms.into_iter().map(DiscreteLaw::collect).collect())
    }
}

fn validate_node(
    node: &Node,
    depth: usize,
    steps: usize,
    seen: &mut HashSet<(*const Node, usize)>,
) -> Result<()> {
    if !seen.insert((node as *const Node, depth)) {
        return Ok(());
    }
    if depth == steps {
        if !node.is_leaf() {
            return Err(Error::validation(format!(
                "path continues past depth {steps}"
            )));
        }
        return Ok(());
    }
    if node.is_leaf() {
        return Err(Error::validation(format!(
            "path ends at depth {depth}, expected {steps}"
        )));
    }
    let mut total = 0.0;
    for b in &node.branches {
        if !b.value.is_finite() {
            return Err(Error::validation(format!(
                "branch value {} is not finite",
                b.value
            )));
        }
        if !(b.prob.is_finite() && b.prob >= 0.0) {
            return Err(Error::validation(format!(
                "branch probability {} at depth {depth} is negative or not finite",
                b.prob
            )));
        }
        total += b.prob;
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::validation(format!(
            "branch probabilities at depth {depth} sum to {total}, not 1"
        )));
    }
    for b in &node.branches {
        validate_node(&b.child, depth + 1, steps, seen)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli_half() -> OutcomeTree {
        OutcomeTree::new(
            1,
            Node::new(vec![Branch::terminal(1.0, 0.5), Branch::terminal(0.0, 0.5)]),
        )
        .unwrap()
    }

    #[test]
    fn one_step_bernoulli() {
        let tree = bernoulli_half();
        let paths = tree.enumerate_paths().unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].values, vec![1.0]);
        assert_eq!(paths[0].prob, 0.5);
        assert_eq!(paths[1].values, vec![0.0]);
        assert_eq!(paths[1].prob, 0.5);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let bad = Node::new(vec![Branch::terminal(1.0, 0.5), Branch::terminal(0.0, 0.6)]);
        assert!(matches!(
            OutcomeTree::new(1, bad),
            Err(Error::Validation(_))
        ));
        let neg = Node::new(vec![
            Branch::terminal(1.0, 1.1),
            Branch::terminal(0.0, -0.1),
        ]);
        assert!(matches!(
            OutcomeTree::new(1, neg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_depth_mismatch() {
        let short = Node::new(vec![Branch::terminal(1.0, 1.0)]);
        assert!(matches!(
            OutcomeTree::new(2, short.clone()),
            Err(Error::Validation(_))
        ));
        let long = Node::new(vec![Branch::new(1.0, 1.0, short)]);
        assert!(matches!(
            OutcomeTree::new(1, long),
            Err(Error::Validation(_))
        ));
        assert!(OutcomeTree::new(0, Node::leaf()).is_err());
    }

    #[test]
    fn zero_probability_branches_are_skipped() {
        let root = Node::new(vec![Branch::terminal(1.0, 1.0), Branch::terminal(5.0, 0.0)]);
        let tree = OutcomeTree::new(1, root).unwrap();
        assert_eq!(tree.path_count(), 1);
        assert_eq!(tree.enumerate_paths().unwrap().len(), 1);
    }

    #[test]
    fn cap_is_enforced() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 20).unwrap();
        assert_eq!(tree.path_count(), 1 << 20);
        assert!(matches!(
            tree.enumerate_paths_capped(1000),
            Err(Error::CapExceeded { needed, cap: 1000 }) if needed == 1 << 20
        ));
    }

    #[test]
    fn independent_rademacher_sum_law() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 2).unwrap();
        let law = tree.sum_law().unwrap();
        assert_eq!(law.atoms(), &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
    }

    #[test]
    fn product_tree_shares_nodes() {
        let tree = OutcomeTree::iid(&DiscreteLaw::rademacher(), 40).unwrap();
        assert!(!tree.is_nonnegative());
        let marginals = tree.marginal_laws_capped(DEFAULT_CAP);
        assert!(marginals.is_err());
    }

    #[test]
    fn tree_serde_round_trip() {
        let tree = bernoulli_half();
        let json = serde_json::to_string(tree.root()).unwrap();
        let node: Node = serde_json::from_str(&json).unwrap();
        assert_eq!(OutcomeTree::new(1, node).unwrap(), tree);
    }
}
