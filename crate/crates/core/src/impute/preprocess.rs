use super::{FeatureVector, ImputeError, Matrix};
use crate::numeric;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const SQUARE_FOOTAGE: &str = "square_footage";
pub const CLIMATE_TYPE: &str = "climate_type";
pub const BA_ID: &str = "ba_id";
pub const DC_TYPE: &str = "dc_type";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation; 1.0 when the column is constant.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub name: String,
    /// Sorted, unique.
    pub values: Vec<String>,
}

impl Vocabulary {
    fn encode(&self, value: &str, out: &mut Vec<f64>) {
        let hit = self.values.binary_search_by(|v| v.as_str().cmp(value)).ok();
        out.extend((0..self.values.len()).map(|i| if Some(i) == hit { 1.0 } else { 0.0 }));
    }
}

/// Standardizes the numeric feature and one-hot encodes the categoricals.
///
/// Column layout: `square_footage`, then one column per climate type, per
/// balancing authority and per data-center type, each block sorted by value.
/// Categories unseen at fit time encode as an all-zero block; a missing
/// square footage encodes as the training mean (0 after standardization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub numeric: NumericStats,
    pub categorical: Vec<Vocabulary>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Preprocessor {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self, ImputeError> {
        if rows.is_empty() {
            return Err(ImputeError::EmptyData);
        }
        let mut warnings = Vec::new();
        let sqft: Vec<f64> = rows.iter().filter_map(|r| r.square_footage).collect();
        let (mean, sd) = match (numeric::mean(&sqft), numeric::population_sd(&sqft)) {
            (Some(m), Some(sd)) if sd > 0.0 => (m, sd),
            (Some(m), _) => {
                warnings.push("square_footage has zero variance; sd treated as 1".to_string());
                (m, 1.0)
            }
            _ => {
                warnings.push("no square_footage values in training rows".to_string());
                (0.0, 1.0)
            }
        };
        for w in &warnings {
            log::warn!("{w}");
        }

        let vocab = |name: &str, get: fn(&FeatureVector) -> &str| Vocabulary {
            name: name.to_string(),
            values: rows.iter().map(|r| get(r).to_string()).collect::<BTreeSet<_>>().into_iter().collect(),
        };
        Ok(Preprocessor {
            numeric: NumericStats { name: SQUARE_FOOTAGE.to_string(), mean, sd },
            categorical: vec![
                vocab(CLIMATE_TYPE, |r| &r.climate_type),
                vocab(BA_ID, |r| &r.ba_id),
                vocab(DC_TYPE, |r| r.dc_type.as_str()),
            ],
            warnings,
        })
    }

    pub fn width(&self) -> usize {
        1 + self.categorical.iter().map(|v| v.values.len()).sum::<usize>()
    }

    /// Column names and, for each column, the feature it belongs to.
    pub fn columns(&self) -> Vec<(String, String)> {
        let mut cols = vec![(self.numeric.name.clone(), self.numeric.name.clone())];
        for v in &self.categorical {
            cols.extend(v.values.iter().map(|val| (format!("{}={val}", v.name), v.name.clone())));
        }
        cols
    }

    pub fn transform_row(&self, row: &FeatureVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        out.push(match row.square_footage {
            Some(v) => (v - self.numeric.mean) / self.numeric.sd,
            None => 0.0,
        });
        let cats = [row.climate_type.as_str(), row.ba_id.as_str(), row.dc_type.as_str()];
        for (vocab, value) in self.categorical.iter().zip(cats) {
            vocab.encode(value, &mut out);
        }
        out
    }

    pub fn transform(&self, rows: &[FeatureVector]) -> Matrix {
        let data = rows.iter().flat_map(|r| self.transform_row(r)).collect();
        Matrix::with_columns(data, self.columns())
    }
}
