//! Decoupling of finite dependent random sequences.
//!
//! A dependent sequence `d_1, ..., d_n` adapted to a filtration is represented as an
//! [`OutcomeTree`]: depth `i` of the tree is the information available after `i` steps,
//! and every internal node carries the conditional law of the next step. From a tree the
//! crate builds
//!
//! * the completely decoupled counterpart (independent `z_i` with the marginals of `d_i`),
//!   see [`complete_decouple`];
//! * the tangent decoupled counterpart (`e_i` drawn as a conditionally independent copy of
//!   `d_i` given the past, conditionally independent given the whole `d` path), see
//!   [`tangent_decouple`].
//!
//! Both are enumerated exactly, so second moments, variances and the L² projection onto
//! the `d` path can be computed without sampling error. The [`bounds`] module evaluates
//! the second-moment decoupling inequalities on these objects:
//!
//! ```text
//! ½ E(Σz)² ≤ E(Σd)²                       (nonnegative d)
//! E(Σd)² ≤ 2 E(Σe)²
//! Var(Σd) ≤ 2 Var(Σe)
//! E(Σd)² ≤ 2 E(Σe)² − (E Σe)²
//! ```
//!
//! together with the Chebyshev and Paley–Zygmund tail bounds that follow from them, and
//! [`stopped`] applies the last inequality to randomly stopped sums of i.i.d. increments.
//! [`montecarlo`] provides seeded, stream-parallel estimators for models too large to
//! enumerate.
//!
//! ```
//! use decouple::{gallery, tangent_decouple, bounds, GalleryParams};
//!
//! let tree = gallery("remark_equality", &GalleryParams::default()).unwrap();
//! let space = tangent_decouple(&tree).unwrap();
//! let report = bounds::second_moment_upper(&space, bounds::DEFAULT_TOL);
//! assert!((report.lhs - 4.0).abs() < 1e-12);
//! assert!((report.rhs - 4.0).abs() < 1e-12);
//! ```

pub mod bounds;
pub mod cli;
pub mod decoupling;
mod error;
pub mod moments;
pub mod montecarlo;
pub mod outcome;
pub mod report;
pub mod stopped;

pub use decoupling::{
    complete_decouple, tangent_decouple, verify_conditional_independence, verify_tangency,
    JointAtom, JointDecoupledSpace, MarginalProduct,
};
pub use error::{Error, Result};
pub use moments::{exact_moments, MomentKind, MomentSummary};
pub use outcome::{
    gallery, random_tree, Branch, DiscreteLaw, GalleryModel, GalleryParams, ModelDescription, Node,
    OutcomeTree, PathAtom, RandomTreeSpec, DEFAULT_CAP,
};
