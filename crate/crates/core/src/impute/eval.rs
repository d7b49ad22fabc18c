use super::{GbrtModel, ImputeError, Matrix};
use crate::numeric;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when the test targets have zero variance.
    pub r_squared: Option<f64>,
    /// Mean of actual minus predicted, MW. Positive means under-prediction.
    pub mean_error: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// R² about the test-set mean and mean signed error of clamped predictions.
pub fn evaluate(model: &GbrtModel, x_test: &Matrix, y_test: &[f64]) -> Result<EvalReport, ImputeError> {
    if y_test.is_empty() {
        return Err(ImputeError::EmptyData);
    }
    if x_test.n_rows() != y_test.len() {
        return Err(ImputeError::LengthMismatch { rows: x_test.n_rows(), targets: y_test.len() });
    }
    let predicted = model.predict_matrix(x_test);
    Ok(score(y_test, &predicted, model.n_train))
}

pub(crate) fn score(actual: &[f64], predicted: &[f64], n_train: usize) -> EvalReport {
    let mean = numeric::mean(actual).expect("non-empty");
    let ss_tot = numeric::sum(actual.iter().map(|y| (y - mean) * (y - mean)));
    let ss_res = numeric::sum(actual.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)));
    let r_squared = if ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None };
    let mean_error = numeric::sum(actual.iter().zip(predicted).map(|(y, p)| y - p)) / actual.len() as f64;
    EvalReport { r_squared, mean_error, n_train, n_test: actual.len() }
}
