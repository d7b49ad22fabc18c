use super::{PipelineError, BA_DETAILS, DATASET_IMPUTED, MARGINAL_RATES, MODEL, REGIONS, ROLLUPS};
use crate::attribution::{parse_marginal_rates, Grid, MarginalRate};
use crate::geo::{parse_regions_geojson, RegionSet};
use crate::impute::CapacityModel;
use crate::record::{DataCenterRecord, PowerPlantRecord};
use crate::report::{BaDetail, RollupLevel, RollupReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Facilities and plants after ingestion (and, later, imputation).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub data_centers: Vec<DataCenterRecord>,
    pub plants: Vec<PowerPlantRecord>,
}

/// Full-precision roll-ups at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollups {
    pub national: RollupReport,
    pub ba: RollupReport,
    pub state: RollupReport,
}

impl Rollups {
    pub fn get(&self, level: RollupLevel) -> &RollupReport {
        match level {
            RollupLevel::National => &self.national,
            RollupLevel::Ba => &self.ba,
            RollupLevel::State => &self.state,
        }
    }
}

pub(crate) fn read_bytes(dir: &Path, name: &str) -> Result<Vec<u8>, PipelineError> {
    let path = dir.join(name);
    std::fs::read(&path).map_err(|e| PipelineError::Artifact { path, message: e.to_string() })
}

pub(crate) fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, PipelineError> {
    let bytes = read_bytes(dir, name)?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Artifact { path: dir.join(name), message: e.to_string() })
}

pub(crate) fn read_regions(dir: &Path) -> Result<RegionSet, PipelineError> {
    let bytes = read_bytes(dir, REGIONS)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| PipelineError::Artifact { path: dir.join(REGIONS), message: e.to_string() })?;
    Ok(RegionSet::new(parse_regions_geojson(&text)?)?)
}

/// Everything the HTTP service needs, loaded once from an output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub rollups: Rollups,
    pub ba_details: BTreeMap<String, BaDetail>,
    pub regions: RegionSet,
    pub grid: Grid,
    pub model: Option<CapacityModel>,
    pub marginal_rates: Option<BTreeMap<String, MarginalRate>>,
    /// SHA-256 over the loaded files, in a fixed order.
    pub content_hash: String,
}

impl Artifacts {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let mut hasher = Sha256::new();
        for name in [ROLLUPS, BA_DETAILS, REGIONS, DATASET_IMPUTED] {
            hasher.update(name.as_bytes());
            hasher.update(read_bytes(dir, name)?);
        }
        let optional = |name: &str| -> Result<Option<Vec<u8>>, PipelineError> {
            let path = dir.join(name);
            if path.is_file() {
                read_bytes(dir, name).map(Some)
            } else {
                Ok(None)
            }
        };
        let model_bytes = optional(MODEL)?;
        let rates_bytes = optional(MARGINAL_RATES)?;
        for (name, bytes) in [(MODEL, &model_bytes), (MARGINAL_RATES, &rates_bytes)] {
            if let Some(b) = bytes {
                hasher.update(name.as_bytes());
                hasher.update(b);
            }
        }

        let rollups: Rollups = read_json(dir, ROLLUPS)?;
        let ba_details = read_json(dir, BA_DETAILS)?;
        let regions = read_regions(dir)?;
        let dataset: Dataset = read_json(dir, DATASET_IMPUTED)?;
        let grid = Grid::new(&dataset.plants, regions.regions().iter().map(|r| r.ba_id.clone()));
        let model = model_bytes
            .map(|b| {
                let text = String::from_utf8_lossy(&b).into_owned();
                CapacityModel::from_json(&text)
            })
            .transpose()?;
        let marginal_rates = rates_bytes.map(|b| parse_marginal_rates(b.as_slice())).transpose()?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            rollups,
            ba_details,
            regions,
            grid,
            model,
            marginal_rates,
            content_hash: hex::encode(hasher.finalize()),
        })
    }
}
