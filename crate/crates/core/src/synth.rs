//! Seeded synthetic corpora shaped like the real inputs: rectangular
//! balancing-authority regions, plants and facilities scattered inside them.

use crate::attribution::MarginalRate;
use crate::geo::{BaRegion, LonLat, MultiPolygon, Polygon};
use crate::ingest::CONTIGUOUS_STATES;
use crate::record::{
    CapacityProvenance, DataCenterRecord, DcType, EmissionRateUnit, FuelCategory, PowerPlantRecord, SqftSource,
};
use crate::report::CountryBenchmark;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

const LON_RANGE: (f64, f64) = (-124.5, -67.0);
const LAT_RANGE: (f64, f64) = (25.0, 49.0);
const CLIMATES: &[&str] = &["hot-humid", "mixed-humid", "hot-dry", "mixed-dry", "cold", "marine"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_facilities: usize,
    pub n_plants: usize,
    pub n_bas: usize,
    /// Known capacities are rescaled to this mean exactly.
    pub mean_capacity_mw: f64,
    /// Share of facilities written without a capacity.
    pub missing_capacity_fraction: f64,
    /// Share of plants whose CSV row names their balancing authority.
    pub plant_ba_in_input: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_facilities: 2132,
            n_plants: 3318,
            n_bas: 52,
            mean_capacity_mw: 13.75,
            missing_capacity_fraction: 337.0 / 2132.0,
            plant_ba_in_input: 0.5,
            seed: 2022,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub data_centers: Vec<DataCenterRecord>,
    pub plants: Vec<PowerPlantRecord>,
    pub regions: Vec<BaRegion>,
    pub marginal_rates: Vec<MarginalRate>,
    pub benchmarks: Vec<CountryBenchmark>,
}

/// Grid of `n` rectangular cells over the contiguous-US bounding box, row
/// major. Trailing cells of the last row stay empty when `n` is not a product.
fn cells(n: usize) -> Vec<(f64, f64, f64, f64)> {
    let cols = ((2.0 * n as f64).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    let w = (LON_RANGE.1 - LON_RANGE.0) / cols as f64;
    let h = (LAT_RANGE.1 - LAT_RANGE.0) / rows as f64;
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let lon0 = LON_RANGE.0 + c as f64 * w;
            let lat0 = LAT_RANGE.0 + r as f64 * h;
            (lon0, lat0, lon0 + w, lat0 + h)
        })
        .collect()
}

fn rect_region(ba_id: String, (x0, y0, x1, y1): (f64, f64, f64, f64)) -> BaRegion {
    let exterior =
        vec![LonLat::new(x0, y0), LonLat::new(x1, y0), LonLat::new(x1, y1), LonLat::new(x0, y1), LonLat::new(x0, y0)];
    BaRegion {
        name: format!("Synthetic authority {ba_id}"),
        ba_id,
        geometry: MultiPolygon(vec![Polygon { exterior, holes: vec![] }]),
        member_plant_ids: vec![],
    }
}

fn point_in(rng: &mut ChaCha8Rng, (x0, y0, x1, y1): (f64, f64, f64, f64)) -> (f64, f64) {
    let m = 0.02;
    (rng.gen_range(y0 + m..y1 - m), rng.gen_range(x0 + m..x1 - m))
}

/// (fuel, weight, rate range g/kWh, generation range MWh)
type FuelProfile = (FuelCategory, f64, (f64, f64), (f64, f64));

const FUELS: &[FuelProfile] = &[
    (FuelCategory::Coal, 0.14, (850.0, 1150.0), (5e5, 8e6)),
    (FuelCategory::NaturalGas, 0.40, (330.0, 600.0), (1e5, 5e6)),
    (FuelCategory::Oil, 0.04, (650.0, 950.0), (1e4, 2e5)),
    (FuelCategory::Nuclear, 0.03, (0.0, 0.0), (5e6, 1.5e7)),
    (FuelCategory::Hydro, 0.10, (0.0, 0.0), (5e4, 3e6)),
    (FuelCategory::Wind, 0.13, (0.0, 0.0), (5e4, 1e6)),
    (FuelCategory::Solar, 0.10, (0.0, 0.0), (3e4, 5e5)),
    (FuelCategory::Geothermal, 0.01, (20.0, 60.0), (1e5, 1e6)),
    (FuelCategory::Biomass, 0.03, (20.0, 120.0), (3e4, 4e5)),
    (FuelCategory::Other, 0.02, (300.0, 900.0), (1e4, 3e5)),
];

fn pick_fuel(rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = FUELS.iter().map(|f| f.1).sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, f) in FUELS.iter().enumerate() {
        if x < f.1 {
            return i;
        }
        x -= f.1;
    }
    FUELS.len() - 1
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

pub fn generate(spec: &SynthSpec) -> Corpus {
    assert!(spec.n_bas > 0, "need at least one balancing authority");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let boxes = cells(spec.n_bas);
    let ids: Vec<String> = (0..spec.n_bas).map(|i| format!("BA{:02}", i + 1)).collect();
    let regions: Vec<BaRegion> = ids.iter().zip(&boxes).map(|(id, b)| rect_region(id.clone(), *b)).collect();

    let plants: Vec<PowerPlantRecord> = (0..spec.n_plants)
        .map(|i| {
            // the first plants seed every authority so no pool is empty
            let ba = if i < spec.n_bas { i } else { rng.gen_range(0..spec.n_bas) };
            let (lat, lon) = point_in(&mut rng, boxes[ba]);
            let f = &FUELS[pick_fuel(&mut rng)];
            PowerPlantRecord {
                plant_id: format!("P{:05}", i + 1),
                latitude: lat,
                longitude: lon,
                ba_id: Some(ids[ba].clone()),
                fuel_category: f.0,
                annual_net_generation_mwh: range(&mut rng, f.3).round(),
                emission_rate_g_per_kwh: (range(&mut rng, f.2) * 100.0).round() / 100.0,
                nameplate_capacity_mw: rng.gen_range(25.0..2000.0_f64).round(),
            }
        })
        .collect();

    let mut occupied: HashSet<(i64, i64)> = HashSet::new();
    let mut data_centers: Vec<DataCenterRecord> = Vec::with_capacity(spec.n_facilities);
    while data_centers.len() < spec.n_facilities {
        let ba = rng.gen_range(0..spec.n_bas);
        let (lat, lon) = point_in(&mut rng, boxes[ba]);
        // keep facilities more than a cell apart so none merge during dedup
        let key = ((lat * 100.0).floor() as i64, (lon * 100.0).floor() as i64);
        let crowded = (-1..=1).any(|a| (-1..=1).any(|b| occupied.contains(&(key.0 + a, key.1 + b))));
        if crowded {
            continue;
        }
        occupied.insert(key);
        let sqft = rng.gen_range(20_000.0..300_000.0_f64).round();
        let density = rng.gen_range(70.0..115.0);
        let hyperscale = rng.gen_bool(0.2);
        let i = data_centers.len();
        data_centers.push(DataCenterRecord {
            id: format!("dc-{:05}", i + 1),
            provider: format!("provider-{}", rng.gen_range(1..=40)),
            address: format!("{} Synthetic Way", i + 1),
            state: CONTIGUOUS_STATES.choose(&mut rng).expect("non-empty").to_string(),
            latitude: lat,
            longitude: lon,
            square_footage: Some(sqft),
            sqft_source: Some(SqftSource::Baxtel),
            dc_type: if hyperscale { DcType::Hyperscale } else { DcType::Other },
            climate_type: CLIMATES.choose(&mut rng).expect("non-empty").to_string(),
            power_capacity_mw: Some(sqft * density * if hyperscale { 1.3 } else { 1.0 } / 1e6),
            capacity_provenance: Some(CapacityProvenance::Reported),
            uptime: None,
            origin: SqftSource::Baxtel,
            ba_id: None,
            ba_flag: None,
        });
    }
    let n_missing = (spec.missing_capacity_fraction * spec.n_facilities as f64).round() as usize;
    let mut order: Vec<usize> = (0..data_centers.len()).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(n_missing) {
        data_centers[i].power_capacity_mw = None;
        data_centers[i].capacity_provenance = None;
    }
    let known: Vec<f64> = data_centers.iter().filter_map(|d| d.power_capacity_mw).collect();
    if !known.is_empty() {
        let scale = spec.mean_capacity_mw / (known.iter().sum::<f64>() / known.len() as f64);
        for d in &mut data_centers {
            if let Some(c) = d.power_capacity_mw.as_mut() {
                *c *= scale;
            }
        }
    }

    let marginal_rates = ids
        .iter()
        .map(|id| MarginalRate { ba_id: id.clone(), rate_g_per_kwh: rng.gen_range(300.0..800.0_f64).round() })
        .collect();

    Corpus { data_centers, plants, regions, marginal_rates, benchmarks: published_benchmarks() }
}

/// Country intensities published for comparison. Total consumption is not
/// quoted there and is left at zero.
pub fn published_benchmarks() -> Vec<CountryBenchmark> {
    [
        ("US average", 369.0),
        ("China", 582.0),
        ("Australia", 549.0),
        ("Mexico", 507.0),
        ("Bolivia", 532.0),
        ("France", 58.0),
        ("Spain", 174.0),
        ("Italy", 331.0),
        ("United Kingdom", 238.0),
        ("Germany", 381.0),
        ("Russia", 441.0),
        ("Argentina", 354.0),
        ("Brazil", 98.0),
    ]
    .into_iter()
    .map(|(c, i)| CountryBenchmark { country: c.to_string(), total_twh: 0.0, intensity_g_per_kwh: i })
    .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn data_centers_csv(records: &[DataCenterRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "provider",
        "address",
        "state",
        "latitude",
        "longitude",
        "square_footage",
        "sqft_source",
        "dc_type",
        "climate_type",
        "power_capacity_mw",
    ])
    .expect("in-memory csv write");
    for d in records {
        w.write_record([
            d.id.clone(),
            d.provider.clone(),
            d.address.clone(),
            d.state.clone(),
            d.latitude.to_string(),
            d.longitude.to_string(),
            opt(d.square_footage),
            d.sqft_source.map(|s| s.as_str().to_string()).unwrap_or_default(),
            d.dc_type.as_str().to_string(),
            d.climate_type.clone(),
            opt(d.power_capacity_mw),
        ])
        .expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Plants CSV. Every fifth plant is written in lb/MWh; rows past
/// `keep_ba` share of the list leave `ba_id` empty.
pub fn plants_csv(plants: &[PowerPlantRecord], keep_ba: f64) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "plant_id",
        "latitude",
        "longitude",
        "ba_id",
        "fuel_category",
        "annual_net_generation_mwh",
        "emission_rate",
        "emission_rate_unit",
        "nameplate_capacity_mw",
    ])
    .expect("in-memory csv write");
    let cutoff = (keep_ba * plants.len() as f64).round() as usize;
    for (i, p) in plants.iter().enumerate() {
        let unit = if i % 5 == 4 { EmissionRateUnit::LbPerMwh } else { EmissionRateUnit::GPerKwh };
        let unit_label = match unit {
            EmissionRateUnit::GPerKwh => "g_per_kwh",
            EmissionRateUnit::LbPerMwh => "lb_per_mwh",
        };
        let ba = if i < cutoff { p.ba_id.clone().unwrap_or_default() } else { String::new() };
        w.write_record([
            p.plant_id.clone(),
            p.latitude.to_string(),
            p.longitude.to_string(),
            ba,
            p.fuel_category.as_str().to_string(),
            p.annual_net_generation_mwh.to_string(),
            unit.from_g_per_kwh(p.emission_rate_g_per_kwh).to_string(),
            unit_label.to_string(),
            p.nameplate_capacity_mw.to_string(),
        ])
        .expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn regions_geojson(regions: &[BaRegion]) -> Vec<u8> {
    let doc = crate::geo::regions_to_geojson(regions, |_| serde_json::Map::new());
    serde_json::to_vec_pretty(&doc).expect("geojson serializes")
}

fn csv_of<T: serde::Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Write the corpus and a matching `config.toml` into `dir`; returns the config path.
pub fn write_corpus(corpus: &Corpus, spec: &SynthSpec, dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("data_centers.csv"), data_centers_csv(&corpus.data_centers))?;
    fs::write(dir.join("plants.csv"), plants_csv(&corpus.plants, spec.plant_ba_in_input))?;
    fs::write(dir.join("regions.geojson"), regions_geojson(&corpus.regions))?;
    fs::write(dir.join("marginal_rates.csv"), csv_of(&corpus.marginal_rates))?;
    fs::write(dir.join("benchmarks.csv"), csv_of(&corpus.benchmarks))?;
    let config = format!(
        r#"# synthetic corpus, seed {seed}
uptime = 0.75
year = 2022
dedup_radius_m = 50.0
plant_min_capacity_mw = 25.0
seed = 42
out_dir = "out"

[inputs]
data_centers = [{{ path = "data_centers.csv", source = "baxtel" }}]
plants = "plants.csv"
regions = "regions.geojson"
benchmarks = "benchmarks.csv"
marginal_rates = "marginal_rates.csv"

[gbrt]
n_trees = 200
learning_rate = 0.05
max_depth = 3
min_samples_leaf = 5
test_fraction = 0.2
"#,
        seed = spec.seed
    );
    let path = dir.join("config.toml");
    fs::write(&path, config)?;
    Ok(path)
}
