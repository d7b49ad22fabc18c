use dcfootprint::attribution::{attribute_all, egw_coefficients, energy_load, split_load, Grid, LoadParams};
use dcfootprint::geo::{BaRegion, LonLat, MultiPolygon, Polygon, RegionSet};
use dcfootprint::ingest::{dedup_facilities, parse_data_centers};
use dcfootprint::numeric::CompensatedSum;
use dcfootprint::record::{
    CapacityProvenance, DataCenterRecord, DcType, EmissionRateUnit, FuelCategory, PowerPlantRecord, SqftSource,
};
use dcfootprint::report::{rollup, RollupLevel};
use dcfootprint::synth::data_centers_csv;
use proptest::prelude::*;

fn dc(id: usize, lat: f64, lon: f64, sqft: Option<f64>, origin: SqftSource, mw: Option<f64>) -> DataCenterRecord {
    DataCenterRecord {
        id: format!("dc{id:03}"),
        provider: format!("p{}", id % 3),
        address: String::new(),
        state: ["VA", "TX", "OR"][id % 3].to_string(),
        latitude: lat,
        longitude: lon,
        square_footage: sqft,
        sqft_source: sqft.map(|_| origin),
        dc_type: DcType::Other,
        climate_type: "unknown".into(),
        power_capacity_mw: mw,
        capacity_provenance: mw.map(|_| CapacityProvenance::Reported),
        uptime: None,
        origin,
        ba_id: None,
        ba_flag: None,
    }
}

fn plant(id: usize, ba: &str, gen: f64, rate: f64) -> PowerPlantRecord {
    PowerPlantRecord {
        plant_id: format!("{ba}-p{id:02}"),
        latitude: 40.0,
        longitude: -80.0,
        ba_id: Some(ba.to_string()),
        fuel_category: FuelCategory::ALL[id % FuelCategory::ALL.len()],
        annual_net_generation_mwh: gen,
        emission_rate_g_per_kwh: rate,
        nameplate_capacity_mw: 100.0,
    }
}

fn source() -> impl Strategy<Value = SqftSource> {
    prop_oneof![Just(SqftSource::Baxtel), Just(SqftSource::Scraped), Just(SqftSource::Osm)]
}

/// Clustered points so that merges actually happen.
fn facilities() -> impl Strategy<Value = Vec<DataCenterRecord>> {
    prop::collection::vec(
        (0usize..6, -0.0008f64..0.0008, -0.0008f64..0.0008, prop::option::of(1000.0f64..1e6), source()),
        1..30,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (c, dlat, dlon, sqft, src))| {
                let (lat, lon) = (38.0 + c as f64 * 0.5 + dlat, -77.0 + dlon);
                dc(i, lat, lon, sqft.map(f64::round), src, Some(1.0 + i as f64))
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dedup_is_order_independent(recs in facilities(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let (a, ra) = dedup_facilities(recs.clone(), 50.0).unwrap();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (b, rb) = dedup_facilities(shuffled, 50.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ra.duplicates_merged, rb.duplicates_merged);
        prop_assert!(ra.is_consistent());
        prop_assert_eq!(a.len() as u64 + ra.duplicates_merged, recs.len() as u64);
    }

    #[test]
    fn dedup_output_has_no_close_pairs(recs in facilities()) {
        let (out, _) = dedup_facilities(recs, 50.0).unwrap();
        for (i, x) in out.iter().enumerate() {
            for y in &out[i + 1..] {
                let d = dcfootprint::geo::haversine_m(x.latitude, x.longitude, y.latitude, y.longitude);
                prop_assert!(d > 50.0, "{} and {} are {d} m apart", x.id, y.id);
            }
        }
    }

    #[test]
    fn ingestion_is_deterministic(recs in facilities()) {
        let bytes = data_centers_csv(&recs);
        let (a, ra) = parse_data_centers(bytes.as_slice(), SqftSource::Baxtel).unwrap();
        let (b, rb) = parse_data_centers(bytes.as_slice(), SqftSource::Baxtel).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ra, rb);
        prop_assert_eq!(a.len(), recs.len());
    }

    #[test]
    fn unit_round_trip(v in 0.0f64..1e5) {
        for unit in [EmissionRateUnit::GPerKwh, EmissionRateUnit::LbPerMwh] {
            let back = unit.from_g_per_kwh(unit.to_g_per_kwh(v));
            prop_assert!((back - v).abs() <= 1e-12 * v.max(1.0));
        }
    }

    #[test]
    fn coefficients_lie_on_simplex(gens in prop::collection::vec(1.0f64..1e7, 1..15)) {
        let plants: Vec<_> = gens.iter().enumerate().map(|(i, g)| plant(i, "B", *g, 400.0)).collect();
        let c = egw_coefficients("B", plants.iter()).unwrap();
        let mut s = CompensatedSum::new();
        for share in &c.shares {
            prop_assert!(share.coefficient >= 0.0 && share.coefficient <= 1.0);
            s.add(share.coefficient);
        }
        prop_assert!((s.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plant_loads_conserve_facility_load(
        gens in prop::collection::vec(1.0f64..1e7, 1..12),
        rates in prop::collection::vec(0.0f64..1200.0, 12),
        mw in 0.01f64..500.0,
        uptime in 0.01f64..=1.0,
    ) {
        let plants: Vec<_> = gens.iter().enumerate().map(|(i, g)| plant(i, "B", *g, rates[i])).collect();
        let grid = Grid::new(&plants, std::iter::empty());
        let params = LoadParams::new(uptime, 2022).unwrap();
        let load = energy_load(mw, &params).unwrap();
        let rows = split_load("d", load, grid.coefficients("B").unwrap(), &grid).unwrap();
        let total: f64 = rows.iter().map(|r| r.load_mwh).collect::<CompensatedSum>().value();
        prop_assert!((total - load).abs() <= 1e-9 * load);
    }

    #[test]
    fn doubling_capacity_doubles_everything(
        mws in prop::collection::vec(0.1f64..100.0, 1..20),
        gens in prop::collection::vec(1.0f64..1e7, 1..8),
    ) {
        let plants: Vec<_> = gens.iter().enumerate().map(|(i, g)| plant(i, "B", *g, 100.0 + i as f64 * 97.0)).collect();
        let grid = Grid::new(&plants, std::iter::empty());
        let params = LoadParams::new(0.75, 2022).unwrap();
        let make = |k: f64| -> Vec<DataCenterRecord> {
            mws.iter().enumerate().map(|(i, m)| {
                let mut d = dc(i, 38.0, -77.0, None, SqftSource::Baxtel, Some(m * k));
                d.ba_id = Some("B".into());
                d
            }).collect()
        };
        let one = attribute_all(&make(1.0), &grid, &params).unwrap();
        let two = attribute_all(&make(2.0), &grid, &params).unwrap();
        for (a, b) in one.results.iter().zip(&two.results) {
            prop_assert_eq!(2.0 * a.load_mwh, b.load_mwh);
            prop_assert_eq!(2.0 * a.emissions_g, b.emissions_g);
        }
        let (r1, r2) = (rollup(&one, RollupLevel::National), rollup(&two, RollupLevel::National));
        prop_assert_eq!(r1.rows[0].intensity_g_per_kwh, r2.rows[0].intensity_g_per_kwh);
    }

    #[test]
    fn assignment_is_total_and_order_independent(
        px in -10.0f64..20.0,
        py in -10.0f64..20.0,
        rot in 0usize..4,
    ) {
        let square = |id: &str, x0: f64, y0: f64, s: f64| BaRegion {
            ba_id: id.into(),
            name: id.into(),
            geometry: MultiPolygon(vec![Polygon {
                exterior: vec![
                    LonLat::new(x0, y0), LonLat::new(x0 + s, y0), LonLat::new(x0 + s, y0 + s),
                    LonLat::new(x0, y0 + s), LonLat::new(x0, y0),
                ],
                holes: vec![],
            }]),
            member_plant_ids: vec![],
        };
        let mut regions = vec![
            square("A", 0.0, 0.0, 5.0),
            square("B", 5.0, 0.0, 5.0),
            square("C", 2.0, 2.0, 2.0),
            square("D", 0.0, 6.0, 4.0),
        ];
        let a = RegionSet::new(regions.clone()).unwrap().assign(LonLat::new(px, py));
        regions.rotate_left(rot);
        let b = RegionSet::new(regions).unwrap().assign(LonLat::new(px, py));
        prop_assert_eq!(a, b);
    }
}
