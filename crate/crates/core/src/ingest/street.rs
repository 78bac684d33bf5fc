use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{read_to_string, Loaded, Warning};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct StreetNode {
    pub id: String,
    pub location: GeoPoint,
    pub signalized: bool,
    pub traffic_calming: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreetEdge {
    pub id: String,
    /// Indices into [`StreetGraph::nodes`].
    pub endpoints: (usize, usize),
    /// OSM `highway` value, kept verbatim. Unknown classes score 0 downstream.
    pub highway: String,
    pub surface: Option<String>,
    pub width: Option<f64>,
    pub onstreet_parking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOfInterest {
    pub id: String,
    pub location: GeoPoint,
}

/// Undirected street network with point layers for POIs and transit stops.
#[derive(Debug, Clone, Default)]
pub struct StreetGraph {
    nodes: Vec<StreetNode>,
    edges: Vec<StreetEdge>,
    adjacency: Vec<Vec<usize>>,
    pois: Vec<PointOfInterest>,
    transit: Vec<PointOfInterest>,
    lookup: HashMap<String, usize>,
}

/// Edge description keyed by node ids, used to assemble a graph.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub highway: String,
    pub surface: Option<String>,
    pub width: Option<f64>,
    pub onstreet_parking: bool,
}

impl StreetGraph {
    /// Assembles a graph, checking that every edge endpoint names a node.
    pub fn from_parts(
        nodes: Vec<StreetNode>,
        edges: Vec<EdgeSpec>,
        pois: Vec<PointOfInterest>,
        transit: Vec<PointOfInterest>,
    ) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if lookup.insert(n.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node id {}", n.id)));
            }
        }
        let mut dangling = Vec::new();
        let mut built = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in edges {
            let (a, b) = match (lookup.get(&e.from), lookup.get(&e.to)) {
                (Some(&a), Some(&b)) => (a, b),
                (a, b) => {
                    if a.is_none() {
                        dangling.push(format!("{}->{}", e.id, e.from));
                    }
                    if b.is_none() {
                        dangling.push(format!("{}->{}", e.id, e.to));
                    }
                    continue;
                }
            };
            if let Some(w) = e.width {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Validation(format!("edge {} has invalid width {w}", e.id)));
                }
            }
            let idx = built.len();
            adjacency[a].push(idx);
            adjacency[b].push(idx);
            built.push(StreetEdge {
                id: e.id,
                endpoints: (a, b),
                highway: e.highway,
                surface: e.surface,
                width: e.width,
                onstreet_parking: e.onstreet_parking,
            });
        }
        if !dangling.is_empty() {
            return Err(Error::Integrity {
                message: "edge endpoints reference missing nodes".into(),
                ids: dangling,
            });
        }
        Ok(StreetGraph {
            nodes,
            edges: built,
            adjacency,
            pois,
            transit,
            lookup,
        })
    }

    pub fn nodes(&self) -> &[StreetNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    pub fn pois(&self) -> &[PointOfInterest] {
        &self.pois
    }

    pub fn transit_stops(&self) -> &[PointOfInterest] {
        &self.transit
    }

    /// Incident edge indices of node `i`. Self-loops appear twice.
    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    /// Serializes the graph in the same GeoJSON dialect the loader reads.
    pub fn to_geojson(&self) -> String {
        let mut features = Vec::with_capacity(self.nodes.len() + self.edges.len());
        for n in &self.nodes {
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [n.location.lon(), n.location.lat()]},
                "properties": {
                    "kind": "node",
                    "id": n.id,
                    "signalized": n.signalized,
                    "traffic_calming": n.traffic_calming,
                },
            }));
        }
        for e in &self.edges {
            let (a, b) = (&self.nodes[e.endpoints.0], &self.nodes[e.endpoints.1]);
            let mut props = Map::new();
            props.insert("kind".into(), json!("edge"));
            props.insert("id".into(), json!(e.id));
            props.insert("from".into(), json!(a.id));
            props.insert("to".into(), json!(b.id));
            props.insert("highway".into(), json!(e.highway));
            if let Some(s) = &e.surface {
                props.insert("surface".into(), json!(s));
            }
            if let Some(w) = e.width {
                props.insert("width".into(), json!(w));
            }
            props.insert("parking".into(), json!(e.onstreet_parking));
            features.push(json!({
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [
                        [a.location.lon(), a.location.lat()],
                        [b.location.lon(), b.location.lat()],
                    ],
                },
                "properties": Value::Object(props),
            }));
        }
        for (kind, layer) in [("poi", &self.pois), ("transit", &self.transit)] {
            for p in layer.iter() {
                features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [p.location.lon(), p.location.lat()]},
                    "properties": {"kind": kind, "id": p.id},
                }));
            }
        }
        json!({"type": "FeatureCollection", "features": features}).to_string()
    }
}

pub fn load_street_graph(path: impl AsRef<Path>) -> Result<Loaded<StreetGraph>> {
    let path = path.as_ref();
    parse_street_graph(&read_to_string(path)?, &path.display().to_string())
}

/// Parses a street-network FeatureCollection.
///
/// Features carry `properties.kind` of `node`, `edge`, `poi` or `transit`;
/// without it, Points are nodes and LineStrings are edges. Edges name their
/// endpoints with `from`/`to` node ids, or else are joined to nodes by exact
/// coordinate match on the first and last vertex.
pub fn parse_street_graph(text: &str, source_name: &str) -> Result<Loaded<StreetGraph>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::parse(source_name, e.line(), e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::parse(source_name, 1, "top-level object is not a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(source_name, 1, "missing `features` array"))?;

    let mut warnings = Vec::new();
    let mut nodes: Vec<StreetNode> = Vec::new();
    let mut pois = Vec::new();
    let mut transit = Vec::new();
    let mut edge_features = Vec::new();

    let empty = Map::new();
    for (i, f) in features.iter().enumerate() {
        let props = f.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        let geometry = f
            .get("geometry")
            .ok_or_else(|| Error::Validation(format!("feature {i} has no geometry")))?;
        let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        let kind = match props.get("kind").and_then(Value::as_str) {
            Some(k) => k,
            None if gtype == "Point" => "node",
            None if gtype == "LineString" => "edge",
            None => return Err(Error::Validation(format!("feature {i}: cannot infer kind from {gtype:?}"))),
        };
        match kind {
            "node" | "poi" | "transit" => {
                if gtype != "Point" {
                    return Err(Error::Validation(format!("feature {i}: {kind} must be a Point")));
                }
                let location = coordinate(geometry.get("coordinates"), i)?;
                let id = feature_id(f, props).unwrap_or_else(|| coord_id(location));
                match kind {
                    "node" => nodes.push(StreetNode {
                        id,
                        location,
                        signalized: is_signalized(props),
                        traffic_calming: has_calming(props),
                    }),
                    "poi" => pois.push(PointOfInterest { id, location }),
                    _ => transit.push(PointOfInterest { id, location }),
                }
            }
            "edge" => {
                if gtype != "LineString" {
                    return Err(Error::Validation(format!("feature {i}: edge must be a LineString")));
                }
                edge_features.push((i, f, props));
            }
            other => return Err(Error::Validation(format!("feature {i}: unknown kind {other:?}"))),
        }
    }

    let mut by_coord: HashMap<(u64, u64), usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (coord_key(n.location), i))
        .collect();
    let mut edges = Vec::with_capacity(edge_features.len());
    for (i, f, props) in edge_features {
        let coords = geometry_coords(f, i)?;
        let id = feature_id(f, props).unwrap_or_else(|| format!("e{i}"));
        let mut endpoint = |key: &str, at: GeoPoint| -> String {
            if let Some(v) = props.get(key) {
                return value_to_id(v);
            }
            let idx = *by_coord.entry(coord_key(at)).or_insert_with(|| {
                nodes.push(StreetNode {
                    id: coord_id(at),
                    location: at,
                    signalized: false,
                    traffic_calming: false,
                });
                nodes.len() - 1
            });
            nodes[idx].id.clone()
        };
        let from = endpoint("from", coords[0]);
        let to = endpoint("to", *coords.last().unwrap());
        let width = match props.get("width") {
            None | Some(Value::Null) => None,
            Some(v) => match parse_width(v) {
                Some(w) => Some(w),
                None => {
                    warnings.push(Warning(format!("edge {id}: unparseable width {v}, treated as absent")));
                    None
                }
            },
        };
        edges.push(EdgeSpec {
            id,
            from,
            to,
            highway: props.get("highway").and_then(Value::as_str).unwrap_or("").to_string(),
            surface: props.get("surface").and_then(Value::as_str).map(str::to_string),
            width,
            onstreet_parking: has_parking(props),
        });
    }

    let graph = StreetGraph::from_parts(nodes, edges, pois, transit)?;
    Ok(Loaded::new(graph, warnings))
}

fn feature_id(f: &Value, props: &Map<String, Value>) -> Option<String> {
    props.get("id").or_else(|| f.get("id")).filter(|v| !v.is_null()).map(value_to_id)
}

fn value_to_id(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn coord_key(p: GeoPoint) -> (u64, u64) {
    (p.lon().to_bits(), p.lat().to_bits())
}

fn coord_id(p: GeoPoint) -> String {
    format!("{},{}", p.lon(), p.lat())
}

fn coordinate(v: Option<&Value>, feature: usize) -> Result<GeoPoint> {
    let arr = v
        .and_then(Value::as_array)
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Validation(format!("feature {feature}: malformed coordinate")))?;
    let lon = arr[0].as_f64();
    let lat = arr[1].as_f64();
    match (lon, lat) {
        (Some(lon), Some(lat)) => GeoPoint::new(lon, lat)
            .map_err(|e| Error::Validation(format!("feature {feature}: {e}"))),
        _ => Err(Error::Validation(format!("feature {feature}: non-numeric coordinate"))),
    }
}

fn geometry_coords(f: &Value, feature: usize) -> Result<Vec<GeoPoint>> {
    let arr = f
        .pointer("/geometry/coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Validation(format!("feature {feature}: missing coordinates")))?;
    if arr.len() < 2 {
        return Err(Error::Validation(format!("feature {feature}: LineString needs 2+ vertices")));
    }
    arr.iter().map(|c| coordinate(Some(c), feature)).collect()
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Bool(b) => *b,
        Value::String(s) => !matches!(s.as_str(), "" | "no" | "false" | "none" | "0"),
        Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        _ => false,
    }
}

fn is_signalized(props: &Map<String, Value>) -> bool {
    props.get("signalized").is_some_and(truthy)
        || props.get("highway").and_then(Value::as_str) == Some("traffic_signals")
        || props.get("crossing").and_then(Value::as_str) == Some("traffic_signals")
}

fn has_calming(props: &Map<String, Value>) -> bool {
    props.get("traffic_calming").is_some_and(truthy)
}

fn has_parking(props: &Map<String, Value>) -> bool {
    if props.get("parking").is_some_and(truthy) {
        return true;
    }
    props.iter().any(|(k, v)| {
        k.starts_with("parking:lane")
            && !matches!(
                v.as_str(),
                Some("no" | "none" | "separate" | "no_parking" | "no_stopping" | "fire_lane")
            )
    })
}

fn parse_width(v: &Value) -> Option<f64> {
    let w = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().trim_end_matches('m').trim().parse().ok()?,
        _ => return None,
    };
    (w.is_finite() && w >= 0.0).then_some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<StreetGraph> {
        parse_street_graph(text, "test").map(Loaded::into_value)
    }

    #[test]
    fn shared_endpoint_joins_two_lines() {
        let g = parse(
            r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[0.001,0]]},"properties":{"highway":"residential"}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0.001,0],[0.002,0]]},"properties":{"highway":"cycleway"}}
            ]}"#,
        )
        .unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges().len(), 2);
        let shared = g.node_index("0.001,0").unwrap();
        assert_eq!(g.degree(shared), 2);
    }

    #[test]
    fn missing_endpoint_is_integrity_error() {
        let err = parse(
            r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0,0]},"properties":{"kind":"node","id":"a"}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[1,0]]},"properties":{"kind":"edge","id":"e1","from":"a","to":"zz"}}
            ]}"#,
        )
        .unwrap_err();
        match err {
            Error::Integrity { ids, .. } => assert_eq!(ids, vec!["e1->zz".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse("{\n\"type\": \"FeatureCollection\",\n\"features\": [ oops ]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tags_map_to_flags() {
        let g = parse(
            r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0,0]},"properties":{"kind":"node","id":"s","highway":"traffic_signals"}},
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0,1]},"properties":{"kind":"node","id":"c","traffic_calming":"bump"}},
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0,2]},"properties":{"kind":"node","id":"n","traffic_calming":"no"}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[0,1]]},"properties":{"kind":"edge","from":"s","to":"c","parking:lane:both":"parallel","width":"7.5 m","highway":"motorway"}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,1],[0,2]]},"properties":{"kind":"edge","from":"c","to":"n","parking:lane:both":"no","width":"wide"}}
            ]}"#,
        );
        let loaded = parse_street_graph(
            r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,1],[0,2]]},"properties":{"width":"wide"}}]}"#,
            "w",
        )
        .unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        let g = g.unwrap();
        assert!(g.nodes()[0].signalized);
        assert!(g.nodes()[1].traffic_calming);
        assert!(!g.nodes()[2].traffic_calming);
        assert!(g.edges()[0].onstreet_parking);
        assert!(!g.edges()[1].onstreet_parking);
        assert_eq!(g.edges()[0].width, Some(7.5));
        assert_eq!(g.edges()[1].width, None);
        assert_eq!(g.edges()[0].highway, "motorway");
    }

    #[test]
    fn export_reload_is_isomorphic() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[0.001,0]]},"properties":{"highway":"primary","surface":"asphalt","width":6}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0.001,0],[0.001,0.001]]},"properties":{"highway":"cycleway","parking":true}},
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0.0005,0.0005]},"properties":{"kind":"poi","id":"shop"}},
            {"type":"Feature","geometry":{"type":"Point","coordinates":[0.0002,0.0005]},"properties":{"kind":"transit","id":"bus"}}
        ]}"#;
        let g = parse(text).unwrap();
        let h = parse(&g.to_geojson()).unwrap();
        assert_eq!(g.nodes(), h.nodes());
        assert_eq!(g.edges(), h.edges());
        assert_eq!(g.pois(), h.pois());
        assert_eq!(g.transit_stops(), h.transit_stops());
    }
}
