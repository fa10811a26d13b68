//! Finite adapted sequences as probability trees.

mod gallery;
mod law;
mod model;
mod random;
mod tree;

pub use gallery::{gallery, GalleryModel, GalleryParams, GALLERY_NAMES};
pub(crate) use law::law_distance;
pub use law::{DiscreteLaw, MERGE_TOL, NORMALIZATION_TOL};
pub use model::ModelDescription;
pub use random::{random_tree, RandomTreeSpec, MAX_RANDOM_BRANCHING, MAX_RANDOM_STEPS};
pub use tree::{Branch, Node, OutcomeTree, PathAtom, DEFAULT_CAP};
