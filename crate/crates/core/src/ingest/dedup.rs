use super::{IngestError, IngestReport};
use crate::geo::{haversine_m, METERS_PER_DEGREE_LAT};
use crate::record::{CapacityProvenance, DataCenterRecord, SqftSource};
use std::cmp::Ordering;
use std::collections::HashMap;

/// Choose one footage value among several estimates for the same facility.
///
/// Source priority is baxtel > scraped > osm; within the winning source the
/// largest value is kept. Returns `None` when there are no candidates.
pub fn merge_square_footage(candidates: &[(f64, SqftSource)]) -> Option<(f64, SqftSource)> {
    candidates.iter().copied().min_by(|a, b| a.1.priority().cmp(&b.1.priority()).then_with(|| b.0.total_cmp(&a.0)))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins so roots do not depend on call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Identity preference inside a duplicate cluster: Baxtel rows first, then by id.
fn identity_order(a: &DataCenterRecord, b: &DataCenterRecord) -> Ordering {
    a.origin
        .priority()
        .cmp(&b.origin.priority())
        .then_with(|| a.id.cmp(&b.id))
        .then_with(|| a.latitude.total_cmp(&b.latitude))
        .then_with(|| a.longitude.total_cmp(&b.longitude))
}

/// Merge facilities lying within `radius_m` of each other (haversine), or
/// sharing an id, into single records. Closeness is transitive: a chain of
/// near neighbours collapses into one cluster.
///
/// The merged record keeps the identity fields of its Baxtel member when one
/// exists, and its footage is chosen by [`merge_square_footage`]. The output
/// is sorted by id and does not depend on input order.
pub fn dedup_facilities(
    records: Vec<DataCenterRecord>,
    radius_m: f64,
) -> Result<(Vec<DataCenterRecord>, IngestReport), IngestError> {
    if !(radius_m > 0.0) || !radius_m.is_finite() {
        return Err(IngestError::InvalidRadius(radius_m));
    }
    let n = records.len();
    let mut uf = UnionFind::new(n);

    // sweep in latitude order; only pairs within the latitude band can be close
    let mut by_lat: Vec<usize> = (0..n).collect();
    by_lat.sort_by(|&a, &b| records[a].latitude.total_cmp(&records[b].latitude));
    let band_deg = radius_m / METERS_PER_DEGREE_LAT * 1.01 + 1e-9;
    for (pos, &i) in by_lat.iter().enumerate() {
        for &j in &by_lat[pos + 1..] {
            if records[j].latitude - records[i].latitude > band_deg {
                break;
            }
            let d = haversine_m(records[i].latitude, records[i].longitude, records[j].latitude, records[j].longitude);
            if d <= radius_m {
                uf.union(i, j);
            }
        }
    }
    let mut first_with_id: HashMap<&str, usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        if let Some(&j) = first_with_id.get(rec.id.as_str()) {
            uf.union(i, j);
        } else {
            first_with_id.insert(rec.id.as_str(), i);
        }
    }

    let mut clusters: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let root = uf.find(i);
        clusters.entry(root).or_default().push(i);
    }

    let mut slots: Vec<Option<DataCenterRecord>> = records.into_iter().map(Some).collect();
    let mut merged = Vec::with_capacity(clusters.len());
    for (_, members) in clusters {
        let mut group: Vec<DataCenterRecord> =
            members.iter().map(|&i| slots[i].take().expect("member taken twice")).collect();
        group.sort_by(identity_order);
        merged.push(merge_cluster(group));
    }
    merged.sort_by(identity_order);

    let report = IngestReport {
        records_read: n as u64,
        records_accepted: merged.len() as u64,
        duplicates_merged: (n - merged.len()) as u64,
        ..IngestReport::default()
    };
    Ok((merged, report))
}

/// `group` must already be in identity order.
fn merge_cluster(group: Vec<DataCenterRecord>) -> DataCenterRecord {
    let footage: Vec<(f64, SqftSource)> =
        group.iter().filter_map(|r| r.square_footage.map(|v| (v, r.sqft_source.unwrap_or(r.origin)))).collect();
    let capacity = group
        .iter()
        .find_map(|r| r.power_capacity_mw.map(|c| (c, r.capacity_provenance.unwrap_or(CapacityProvenance::Reported))));
    let uptime = group.iter().find_map(|r| r.uptime);
    let fill = |get: fn(&DataCenterRecord) -> &str| -> String {
        group.iter().map(get).find(|s| !s.is_empty() && *s != "unknown").unwrap_or_else(|| get(&group[0])).to_string()
    };
    let provider = fill(|r| &r.provider);
    let address = fill(|r| &r.address);
    let climate_type = fill(|r| &r.climate_type);

    let mut iter = group.into_iter();
    let mut rep = iter.next().expect("non-empty cluster");
    rep.provider = provider;
    rep.address = address;
    rep.climate_type = climate_type;
    match merge_square_footage(&footage) {
        Some((v, src)) => {
            rep.square_footage = Some(v);
            rep.sqft_source = Some(src);
        }
        None => {
            rep.square_footage = None;
            rep.sqft_source = None;
        }
    }
    rep.power_capacity_mw = capacity.map(|c| c.0);
    rep.capacity_provenance = capacity.map(|c| c.1);
    rep.uptime = uptime;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::DcType;

    pub(crate) fn dc(id: &str, lat: f64, lon: f64, origin: SqftSource) -> DataCenterRecord {
        DataCenterRecord {
            id: id.to_string(),
            provider: String::new(),
            address: String::new(),
            state: "VA".to_string(),
            latitude: lat,
            longitude: lon,
            square_footage: None,
            sqft_source: None,
            dc_type: DcType::Other,
            climate_type: "unknown".to_string(),
            power_capacity_mw: None,
            capacity_provenance: None,
            uptime: None,
            origin,
            ba_id: None,
            ba_flag: None,
        }
    }

    // ~1 m of latitude in degrees
    const M: f64 = 1.0 / METERS_PER_DEGREE_LAT;

    #[test]
    fn baxtel_beats_larger_osm() {
        let got = merge_square_footage(&[(50000.0, SqftSource::Osm), (48000.0, SqftSource::Baxtel)]);
        assert_eq!(got, Some((48000.0, SqftSource::Baxtel)));
    }

    #[test]
    fn single_candidate_and_empty() {
        assert_eq!(merge_square_footage(&[(30000.0, SqftSource::Osm)]), Some((30000.0, SqftSource::Osm)));
        assert_eq!(merge_square_footage(&[]), None);
    }

    #[test]
    fn tie_within_source_takes_largest() {
        let got = merge_square_footage(&[(10000.0, SqftSource::Scraped), (12000.0, SqftSource::Scraped)]);
        assert_eq!(got, Some((12000.0, SqftSource::Scraped)));
    }

    #[test]
    fn near_pair_merges_far_pair_does_not() {
        let near = vec![dc("a", 38.0, -77.0, SqftSource::Baxtel), dc("b", 38.0 + 5.0 * M, -77.0, SqftSource::Scraped)];
        let (out, report) = dedup_facilities(near, 50.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(report.duplicates_merged, 1);
        assert!(report.is_consistent());

        let far =
            vec![dc("a", 38.0, -77.0, SqftSource::Baxtel), dc("b", 38.0 + 5000.0 * M, -77.0, SqftSource::Scraped)];
        let (out, _) = dedup_facilities(far, 50.0).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn chain_collapses_transitively() {
        let chain = vec![
            dc("a", 38.0, -77.0, SqftSource::Osm),
            dc("b", 38.0 + 40.0 * M, -77.0, SqftSource::Osm),
            dc("c", 38.0 + 80.0 * M, -77.0, SqftSource::Osm),
        ];
        let d_ac = haversine_m(38.0, -77.0, 38.0 + 80.0 * M, -77.0);
        assert!(d_ac > 50.0);
        let (out, report) = dedup_facilities(chain, 50.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(report.duplicates_merged, 2);
    }

    #[test]
    fn merged_record_prefers_baxtel_identity_and_footage() {
        let mut a = dc("scr-1", 38.0, -77.0, SqftSource::Scraped);
        a.square_footage = Some(60000.0);
        a.sqft_source = Some(SqftSource::Scraped);
        a.provider = "Scraped Name".into();
        let mut b = dc("bx-1", 38.0 + 3.0 * M, -77.0, SqftSource::Baxtel);
        b.square_footage = Some(52000.0);
        b.sqft_source = Some(SqftSource::Baxtel);
        b.power_capacity_mw = Some(12.0);
        b.capacity_provenance = Some(CapacityProvenance::Reported);
        let (out, _) = dedup_facilities(vec![a, b], 50.0).unwrap();
        assert_eq!(out[0].id, "bx-1");
        assert_eq!(out[0].square_footage, Some(52000.0));
        assert_eq!(out[0].provider, "Scraped Name");
        assert_eq!(out[0].power_capacity_mw, Some(12.0));
    }

    #[test]
    fn same_id_merges() {
        let recs = vec![dc("x", 38.0, -77.0, SqftSource::Baxtel), dc("x", 40.0, -77.0, SqftSource::Baxtel)];
        let (out, _) = dedup_facilities(recs, 50.0).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn rejects_non_positive_radius() {
        assert!(dedup_facilities(vec![], 0.0).is_err());
    }
}
