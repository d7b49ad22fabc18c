use super::ImputeError;
use crate::numeric;
use serde::{Deserialize, Serialize};

/// Records whose density Z-score exceeds this (in absolute value) are dropped.
pub const Z_SCORE_CUTOFF: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDensityStat {
    /// Mean density of the surviving records, watts per square foot.
    pub mean_w_per_sqft: f64,
    pub n_used: usize,
    pub n_dropped: usize,
}

/// Mean power density (W/sqft) over `(square_footage, capacity_mw)` pairs
/// after a single pass of Z-score outlier removal. Z uses the population
/// standard deviation of the densities.
///
/// With `n` records no |Z| can exceed `sqrt(n - 1)`, so at least six records
/// are needed before anything can be dropped at the 2.0 cutoff.
pub fn power_density_stat(records: &[(f64, f64)]) -> Result<PowerDensityStat, ImputeError> {
    if records.len() < 3 {
        return Err(ImputeError::TooFewRecords { need: 3, got: records.len() });
    }
    let densities: Vec<f64> = records.iter().map(|&(sqft, mw)| mw * 1e6 / sqft).collect();
    let mean = numeric::mean(&densities).expect("non-empty");
    let sd = numeric::population_sd(&densities).expect("non-empty");
    let kept: Vec<f64> = if sd > 0.0 {
        densities.iter().copied().filter(|d| ((d - mean) / sd).abs() <= Z_SCORE_CUTOFF).collect()
    } else {
        densities.clone()
    };
    if kept.is_empty() {
        return Err(ImputeError::AllOutliers);
    }
    Ok(PowerDensityStat {
        mean_w_per_sqft: numeric::mean(&kept).expect("non-empty"),
        n_used: kept.len(),
        n_dropped: densities.len() - kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// (sqft, MW) pairs with exactly the given W/sqft densities.
    fn with_densities(d: &[f64]) -> Vec<(f64, f64)> {
        d.iter().map(|&w| (1e6, w)).collect()
    }

    #[test]
    fn symmetric_triplet_keeps_everything() {
        let s = power_density_stat(&with_densities(&[90.0, 92.0, 94.0])).unwrap();
        assert_eq!(s.mean_w_per_sqft, 92.0);
        assert_eq!(s.n_dropped, 0);
    }

    #[test]
    fn four_points_cannot_exceed_the_cutoff() {
        // with n = 4 the largest possible |Z| is sqrt(3) ~ 1.73, so 10000 survives
        let s = power_density_stat(&with_densities(&[90.0, 92.0, 94.0, 10000.0])).unwrap();
        assert_eq!(s.n_dropped, 0);
        assert_eq!(s.mean_w_per_sqft, (90.0 + 92.0 + 94.0 + 10000.0) / 4.0);
    }

    #[test]
    fn outlier_dropped_in_larger_fixture() {
        // nine values around 92 and one at 10000:
        // mean = (828 + 10000) / 10 = 1082.8, deviations of the nine ~ -990.8,
        // of the outlier 8917.2; population sd ~ 2972.4, so Z(10000) ~ 3.0
        let d = [90.0, 91.0, 92.0, 93.0, 94.0, 90.0, 92.0, 94.0, 92.0, 10000.0];
        let s = power_density_stat(&with_densities(&d)).unwrap();
        assert_eq!(s.n_dropped, 1);
        assert!((s.mean_w_per_sqft - 92.0).abs() < 1e-12);
    }

    #[test]
    fn density_units() {
        // 9.175 MW over 100,000 sqft is 91.75 W/sqft
        let s = power_density_stat(&[(100_000.0, 9.175); 3]).unwrap();
        assert!((s.mean_w_per_sqft - 91.75).abs() < 1e-9);
    }

    #[test]
    fn too_few_records() {
        assert!(power_density_stat(&[(1.0, 1.0)]).is_err());
    }
}
