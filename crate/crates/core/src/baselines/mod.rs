//! Reference learners: ordinary least squares and a random forest.

mod forest;
mod linear;

pub use forest::{
    best_split, fit_forest, fit_tree, predict_forest, ForestConfig, ForestModel, RegressionTree, Split,
    TreeNode,
};
pub use linear::{fit_linear, predict_linear, LinearModel};
