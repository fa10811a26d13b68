use serde::{Deserialize, Serialize};

use super::gallery::{gallery, GalleryParams};
use super::law::DiscreteLaw;
use super::tree::{Node, OutcomeTree};
use crate::error::{Error, Result};

/// A model description file.
///
/// ```json
/// {"kind": "explicit_tree", "n": 1, "root": {"branches": [{"value": 1, "prob": 0.5}, {"value": 0, "prob": 0.5}]}}
/// {"kind": "product", "n": 3, "steps": [{"atoms": [[-1, 0.5], [1, 0.5]]}]}
/// {"kind": "gallery", "name": "unit_vector", "n": 4}
/// ```
///
/// A `product` model with a single step law repeats it `n` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescription {
    ExplicitTree {
        n: usize,
        root: Node,
    },
    Product {
        n: usize,
        steps: Vec<DiscreteLaw>,
    },
    Gallery {
        name: String,
        #[serde(flatten)]
        params: GalleryParams,
    },
}

impl ModelDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<OutcomeTree> {
        match self {
            Self::ExplicitTree { n, root } => OutcomeTree::new(*n, root.clone()),
            Self::Product { n, steps } => match steps.len() {
                1 => OutcomeTree::iid(&steps[0], *n),
                len if len == *n => OutcomeTree::product(steps),
                len => Err(Error::validation(format!(
                    "product model with n = {n} lists {len} step laws (expected 1 or {n})"
                ))),
            },
            Self::Gallery { name, params } => gallery(name, params),
        }
    }
}
