//! Squared-error gradient boosting over [`TreeNode`] regressors.

use super::tree::{fit_tree, Presorted, TreeNode, TreeParams};
use super::{ImputeError, Matrix};
use crate::numeric;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Share of known-capacity rows held out for evaluation.
    pub test_fraction: f64,
    pub seed: u64,
    /// Predictions are clamped to at least this many MW.
    pub capacity_floor_mw: f64,
}

impl Default for GbrtParams {
    fn default() -> Self {
        GbrtParams {
            n_trees: 200,
            learning_rate: 0.05,
            max_depth: 3,
            min_samples_leaf: 5,
            test_fraction: 0.2,
            seed: 42,
            capacity_floor_mw: 0.04,
        }
    }
}

impl GbrtParams {
    pub fn validate(&self) -> Result<(), ImputeError> {
        let bad = |msg: &str| Err(ImputeError::InvalidParams(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1)");
        }
        if !(self.capacity_floor_mw > 0.0) || !self.capacity_floor_mw.is_finite() {
            return bad("capacity_floor_mw must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    /// Source feature; one-hot columns share their categorical's name.
    pub feature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub params: GbrtParams,
    pub columns: Vec<ColumnInfo>,
    pub trees: Vec<TreeNode>,
    /// Normalized gain per source feature.
    pub gain_importance: BTreeMap<String, f64>,
    /// Training MSE after the base prediction and after each round.
    pub train_mse: Vec<f64>,
    pub n_train: usize,
}

/// Fit a boosted ensemble: start from the target mean, then fit each tree to
/// the residuals of the ensemble so far and add it scaled by the learning rate.
pub fn fit_gbrt(x: &Matrix, y: &[f64], params: &GbrtParams) -> Result<GbrtModel, ImputeError> {
    params.validate()?;
    if y.is_empty() {
        return Err(ImputeError::EmptyData);
    }
    if x.n_rows() != y.len() {
        return Err(ImputeError::LengthMismatch { rows: x.n_rows(), targets: y.len() });
    }
    let base = numeric::mean(y).expect("non-empty");
    let mut fitted = vec![base; y.len()];
    let mut residuals = vec![0.0; y.len()];
    let mse = |fitted: &[f64]| numeric::sum(y.iter().zip(fitted).map(|(t, f)| (t - f) * (t - f))) / y.len() as f64;
    let mut train_mse = vec![mse(&fitted)];

    let presorted = Presorted::new(x);
    let tree_params = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf };
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut gains = vec![0.0; x.n_cols()];
    for _ in 0..params.n_trees {
        for ((r, t), f) in residuals.iter_mut().zip(y).zip(&fitted) {
            *r = t - f;
        }
        let tree = fit_tree(x, &residuals, &presorted, tree_params);
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += params.learning_rate * tree.predict(x.row(i));
        }
        tree.accumulate_gains(&mut gains);
        trees.push(tree);
        train_mse.push(mse(&fitted));
    }

    let columns = x.columns().to_vec();
    let gain_importance = fold_importances(&columns, &gains);
    Ok(GbrtModel {
        base_prediction: base,
        learning_rate: params.learning_rate,
        params: *params,
        columns,
        trees,
        gain_importance,
        train_mse,
        n_train: y.len(),
    })
}

/// Sum column gains per source feature and normalize to 1. With no gain at
/// all the shares are uniform.
fn fold_importances(columns: &[ColumnInfo], gains: &[f64]) -> BTreeMap<String, f64> {
    let mut folded: BTreeMap<String, f64> = BTreeMap::new();
    for (col, g) in columns.iter().zip(gains) {
        *folded.entry(col.feature.clone()).or_default() += g;
    }
    let total = numeric::sum(folded.values().copied());
    if total > 0.0 {
        for v in folded.values_mut() {
            *v /= total;
        }
    } else if !folded.is_empty() {
        log::warn!("model has no split gain; importances are uniform");
        let share = 1.0 / folded.len() as f64;
        for v in folded.values_mut() {
            *v = share;
        }
    }
    folded
}

impl GbrtModel {
    /// Unclamped ensemble output. Accumulates in the same order as training.
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        let mut f = self.base_prediction;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict(row);
        }
        f
    }

    /// Ensemble output clamped to the capacity floor.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_raw(row).max(self.params.capacity_floor_mw)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

/// Normalized gain importances per source feature.
pub fn gain_importances(model: &GbrtModel) -> &BTreeMap<String, f64> {
    &model.gain_importance
}
