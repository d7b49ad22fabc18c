use super::{BaRegion, GeoError, LonLat, MultiPolygon, Polygon, Ring};
use serde_json::{json, Map, Value};

fn err(msg: impl Into<String>) -> GeoError {
    GeoError::GeoJson(msg.into())
}

fn parse_ring(value: &Value) -> Result<Ring, GeoError> {
    let positions = value.as_array().ok_or_else(|| err("ring is not an array"))?;
    positions
        .iter()
        .map(|pos| {
            let xy = pos.as_array().ok_or_else(|| err("position is not an array"))?;
            match (xy.first().and_then(Value::as_f64), xy.get(1).and_then(Value::as_f64)) {
                (Some(lon), Some(lat)) => Ok(LonLat::new(lon, lat)),
                _ => Err(err("position needs numeric longitude and latitude")),
            }
        })
        .collect()
}

fn parse_polygon(value: &Value) -> Result<Polygon, GeoError> {
    let rings = value.as_array().ok_or_else(|| err("polygon is not an array of rings"))?;
    let mut rings = rings.iter().map(parse_ring);
    let exterior = rings.next().ok_or_else(|| err("polygon without exterior ring"))??;
    let holes = rings.collect::<Result<Vec<_>, _>>()?;
    Ok(Polygon { exterior, holes })
}

fn parse_geometry(geometry: &Value) -> Result<MultiPolygon, GeoError> {
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or_default();
    let coords = geometry.get("coordinates").ok_or_else(|| err("geometry without coordinates"))?;
    match kind {
        "Polygon" => Ok(MultiPolygon(vec![parse_polygon(coords)?])),
        "MultiPolygon" => {
            let polys = coords.as_array().ok_or_else(|| err("MultiPolygon coordinates not an array"))?;
            Ok(MultiPolygon(polys.iter().map(parse_polygon).collect::<Result<_, _>>()?))
        }
        other => Err(err(format!("unsupported geometry type {other:?}"))),
    }
}

/// Read a GeoJSON FeatureCollection of balancing-authority polygons. Each
/// feature needs a `ba_id` property; `name` defaults to the id.
pub fn parse_regions_geojson(text: &str) -> Result<Vec<BaRegion>, GeoError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(err("top-level object must be a FeatureCollection"));
    }
    let features =
        doc.get("features").and_then(Value::as_array).ok_or_else(|| err("FeatureCollection without features"))?;
    features
        .iter()
        .enumerate()
        .map(|(i, feature)| {
            let props = feature.get("properties").unwrap_or(&Value::Null);
            let ba_id = props
                .get("ba_id")
                .and_then(Value::as_str)
                .ok_or_else(|| err(format!("feature {i} has no ba_id property")))?
                .to_string();
            let name = props.get("name").and_then(Value::as_str).unwrap_or(&ba_id).to_string();
            let geometry = feature.get("geometry").ok_or_else(|| err(format!("feature {i} has no geometry")))?;
            Ok(BaRegion { ba_id, name, geometry: parse_geometry(geometry)?, member_plant_ids: Vec::new() })
        })
        .collect()
}

fn ring_json(ring: &Ring) -> Value {
    Value::Array(ring.iter().map(|p| json!([p.lon, p.lat])).collect())
}

fn polygon_json(poly: &Polygon) -> Value {
    Value::Array(std::iter::once(&poly.exterior).chain(poly.holes.iter()).map(ring_json).collect())
}

/// Write regions as a FeatureCollection. `extra` supplies additional
/// properties per region; `ba_id` and `name` are always present.
pub fn regions_to_geojson<'a>(
    regions: impl IntoIterator<Item = &'a BaRegion>,
    mut extra: impl FnMut(&BaRegion) -> Map<String, Value>,
) -> Value {
    let features: Vec<Value> = regions
        .into_iter()
        .map(|r| {
            let mut props = Map::new();
            props.insert("ba_id".into(), Value::String(r.ba_id.clone()));
            props.insert("name".into(), Value::String(r.name.clone()));
            props.extend(extra(r));
            let geometry = if r.geometry.0.len() == 1 {
                json!({ "type": "Polygon", "coordinates": polygon_json(&r.geometry.0[0]) })
            } else {
                json!({
                    "type": "MultiPolygon",
                    "coordinates": r.geometry.0.iter().map(polygon_json).collect::<Vec<_>>(),
                })
            };
            json!({ "type": "Feature", "properties": props, "geometry": geometry })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
