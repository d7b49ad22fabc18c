//! Power-capacity imputation with gradient-boosted regression trees.
//!
//! Facilities that lack a reported capacity get one predicted from square
//! footage, climate type, balancing authority and data-center type.

mod density;
mod eval;
mod gbrt;
mod preprocess;
mod tree;

pub use density::{power_density_stat, PowerDensityStat, Z_SCORE_CUTOFF};
pub use eval::{evaluate, EvalReport};
pub use gbrt::{fit_gbrt, gain_importances, ColumnInfo, GbrtModel, GbrtParams};
pub use preprocess::{NumericStats, Preprocessor, Vocabulary, BA_ID, CLIMATE_TYPE, DC_TYPE, SQUARE_FOOTAGE};
pub use tree::{fit_tree, Presorted, TreeNode, TreeParams};

use crate::record::{CapacityProvenance, DataCenterRecord, DcType};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("no training data")]
    EmptyData,
    #[error("feature matrix has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("no facility has a known power capacity")]
    NoKnownCapacities,
    #[error("need at least {need} records, got {got}")]
    TooFewRecords { need: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("every record was dropped as an outlier")]
    AllOutliers,
    #[error("model document: {0}")]
    ModelFormat(String),
}

/// Dense row-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    columns: Vec<ColumnInfo>,
}

impl Matrix {
    pub fn with_columns(data: Vec<f64>, columns: Vec<(String, String)>) -> Self {
        let columns: Vec<ColumnInfo> =
            columns.into_iter().map(|(name, feature)| ColumnInfo { name, feature }).collect();
        assert!(columns.is_empty() || data.len().is_multiple_of(columns.len()), "ragged matrix");
        Matrix { data, columns }
    }

    /// Columns named `x0, x1, ...`, each its own feature.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let names = (0..n_cols).map(|c| (format!("x{c}"), format!("x{c}"))).collect();
        Matrix::with_columns(rows.iter().flatten().copied().collect(), names)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let data = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Matrix { data, columns: self.columns.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Square feet; `None` when no footage estimate exists.
    pub square_footage: Option<f64>,
    pub climate_type: String,
    pub ba_id: String,
    pub dc_type: DcType,
}

impl FeatureVector {
    pub fn from_record(rec: &DataCenterRecord) -> Self {
        FeatureVector {
            square_footage: rec.square_footage,
            climate_type: rec.climate_type.clone(),
            ba_id: rec.ba_id.clone().unwrap_or_else(|| "unassigned".to_string()),
            dc_type: rec.dc_type,
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Preprocessor plus fitted ensemble; the unit that is saved, reloaded and
/// used for predictions from raw facility features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityModel {
    pub format_version: u32,
    pub preprocessor: Preprocessor,
    pub gbrt: GbrtModel,
}

impl CapacityModel {
    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.gbrt.predict(&self.preprocessor.transform_row(features))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ImputeError> {
        let model: CapacityModel = serde_json::from_str(text).map_err(|e| ImputeError::ModelFormat(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ImputeError::ModelFormat(format!("unsupported format_version {}", model.format_version)));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct ImputeOutcome {
    pub records: Vec<DataCenterRecord>,
    /// `None` when nothing needed imputing.
    pub model: Option<CapacityModel>,
    /// `None` when no model was fitted or the test split was empty.
    pub eval: Option<EvalReport>,
    pub n_imputed: usize,
}

/// Train on facilities with a known capacity, evaluate on a seeded held-out
/// split, then fill every missing capacity and mark it imputed. Record
/// order is preserved.
pub fn impute_missing(records: Vec<DataCenterRecord>, params: &GbrtParams) -> Result<ImputeOutcome, ImputeError> {
    params.validate()?;
    let missing = records.iter().filter(|r| r.power_capacity_mw.is_none()).count();
    if missing == 0 {
        return Ok(ImputeOutcome { records, model: None, eval: None, n_imputed: 0 });
    }
    let known: Vec<usize> = (0..records.len()).filter(|&i| records[i].power_capacity_mw.is_some()).collect();
    if known.is_empty() {
        return Err(ImputeError::NoKnownCapacities);
    }

    let mut order = known.clone();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let n_test = ((order.len() as f64 * params.test_fraction).round() as usize).min(order.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);

    let features = |idx: &[usize]| -> Vec<FeatureVector> {
        idx.iter().map(|&i| FeatureVector::from_record(&records[i])).collect()
    };
    let targets =
        |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| records[i].power_capacity_mw.expect("known")).collect() };
    let train_features = features(train_idx);
    let preprocessor = Preprocessor::fit(&train_features)?;
    let x_train = preprocessor.transform(&train_features);
    let gbrt = fit_gbrt(&x_train, &targets(train_idx), params)?;
    let eval = if test_idx.is_empty() {
        None
    } else {
        let x_test = preprocessor.transform(&features(test_idx));
        Some(evaluate(&gbrt, &x_test, &targets(test_idx))?)
    };
    let model = CapacityModel { format_version: MODEL_FORMAT_VERSION, preprocessor, gbrt };

    let mut records = records;
    for rec in records.iter_mut().filter(|r| r.power_capacity_mw.is_none()) {
        rec.power_capacity_mw = Some(model.predict(&FeatureVector::from_record(rec)));
        rec.capacity_provenance = Some(CapacityProvenance::Imputed);
    }
    Ok(ImputeOutcome { records, model: Some(model), eval, n_imputed: missing })
}
