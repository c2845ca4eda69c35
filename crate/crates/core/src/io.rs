//! JSON model and route-system formats, and tabular CSV/JSON output.
//!
//! Model file:
//!
//! ```json
//! { "points": [{"id": 0, "coords": [0, 0]}, {"id": 1, "coords": [0, 1]}],
//!   "traces": [[0, 1], [0, 0, 1], [1, 0]],
//!   "rule": {"weights": ["1/2", "1/2", 1]} }
//! ```
//!
//! Points are objects with optional `id` (must equal the position), `name`
//! and `coords`, or bare name strings; `"num_points": n` may replace
//! `points`. Trace entries are ids or names. `rule` is `"uniform"` (the
//! default) or `{"weights": ..}` with a list aligned with `traces` or a map
//! from trace index to weight; weights are numbers or `"p/q"` strings.
//!
//! Route-system file: `points` as above, `bundles` as a list of either
//! `{"segments": [[..], {"cells": [..], "multiplicity": 2}]}` or
//! `{"shadow": [..], "slowness": [..]}`, and `routes` as a list of
//! `{"paths": [[0, 1], {"bundles": [2], "multiplicity": 3}], "multiplicity": 1}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Number, Value};

use crate::error::{MtmError, Result};
use crate::modular::{bundle_from_slowness, Bundle, BundlePath, Route, RouteSystem, DEFAULT_SLOWNESS_DENOMINATOR_CAP};
use crate::scalar::{parse_rational, Exact, Scalar};
use crate::trace::{MTModel, Point, PointId, SelectionRule, TraceSet};

/// Largest accepted point or trace count in input files.
pub const MAX_INPUT_ITEMS: usize = 10_000_000;

#[derive(Deserialize)]
#[serde(untagged)]
enum PointSpec {
    Name(String),
    Full {
        #[serde(default)]
        id: Option<usize>,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        coords: Option<(i64, i64)>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointRef {
    Id(usize),
    Name(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Weight {
    Num(Number),
    Text(String),
}

impl Weight {
    fn value(&self) -> Result<Exact> {
        let text = match self {
            Weight::Num(n) => n.to_string(),
            Weight::Text(s) => s.clone(),
        };
        parse_rational(&text).ok_or_else(|| MtmError::Parse(format!("bad number '{text}'")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightsSpec {
    List(Vec<Weight>),
    ByTrace(BTreeMap<String, Weight>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RuleSpec {
    Named(String),
    Weights { weights: WeightsSpec },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default)]
    points: Option<Vec<PointSpec>>,
    #[serde(default)]
    num_points: Option<usize>,
    traces: Vec<Vec<PointRef>>,
    #[serde(default)]
    rule: Option<RuleSpec>,
}

fn rule_weights(spec: &WeightsSpec, traces: usize) -> Result<Vec<Exact>> {
    match spec {
        WeightsSpec::List(w) => {
            if w.len() != traces {
                return Err(MtmError::InvalidRule(format!("{} weights for {traces} traces", w.len())));
            }
            w.iter().map(Weight::value).collect()
        }
        WeightsSpec::ByTrace(map) => {
            let mut out = vec![None; traces];
            for (k, w) in map {
                let t: usize = k.parse().map_err(|_| MtmError::Parse(format!("bad trace index '{k}'")))?;
                let slot = out.get_mut(t).ok_or_else(|| MtmError::InvalidRule(format!("no trace {t}")))?;
                *slot = Some(w.value()?);
            }
            out.into_iter()
                .enumerate()
                .map(|(t, w)| w.ok_or_else(|| MtmError::InvalidRule(format!("no weight for trace {t}"))))
                .collect()
        }
    }
}

struct Names {
    points: Vec<Point>,
    by_name: HashMap<String, PointId>,
}

impl Names {
    fn new(points: Option<Vec<PointSpec>>, num_points: Option<usize>) -> Result<Self> {
        let specs = match (points, num_points) {
            (Some(p), None) => p,
            (None, Some(n)) if n <= MAX_INPUT_ITEMS => {
                (0..n).map(|_| PointSpec::Full { id: None, name: None, coords: None }).collect()
            }
            (None, Some(_)) => return Err(MtmError::Parse("too many points".into())),
            _ => return Err(MtmError::Parse("give exactly one of 'points' and 'num_points'".into())),
        };
        let mut by_name = HashMap::new();
        let mut points = Vec::with_capacity(specs.len());
        for (id, spec) in specs.into_iter().enumerate() {
            let (name, coords) = match spec {
                PointSpec::Name(n) => (Some(n), None),
                PointSpec::Full { id: Some(given), .. } if given != id => {
                    return Err(MtmError::Parse(format!("point at position {id} has id {given}")));
                }
                PointSpec::Full { name, coords, .. } => (name, coords),
            };
            if let Some(n) = &name {
                if by_name.insert(n.clone(), id).is_some() {
                    return Err(MtmError::Parse(format!("duplicate point name '{n}'")));
                }
            }
            points.push(Point { id, coords, name });
        }
        Ok(Names { points, by_name })
    }

    fn resolve(&self, r: &PointRef) -> Result<PointId> {
        match r {
            PointRef::Id(id) => Ok(*id),
            PointRef::Name(n) => {
                self.by_name.get(n).copied().ok_or_else(|| MtmError::Parse(format!("unknown point '{n}'")))
            }
        }
    }

    fn resolve_all(&self, refs: &[PointRef]) -> Result<Vec<PointId>> {
        refs.iter().map(|r| self.resolve(r)).collect()
    }
}

fn json_error(e: serde_json::Error) -> MtmError {
    MtmError::Parse(e.to_string())
}

/// Parses a model file. Weights are read exactly, then converted to `S`.
pub fn parse_model_json<S: Scalar>(text: &str) -> Result<MTModel<S>> {
    let file: ModelFile = serde_json::from_str(text).map_err(json_error)?;
    let names = Names::new(file.points, file.num_points)?;
    let traces: Vec<Vec<PointId>> = file.traces.iter().map(|t| names.resolve_all(t)).collect::<Result<_>>()?;
    let ts = TraceSet::build_with_points(names.points, traces)?;
    match file.rule {
        None => Ok(MTModel::uniform(ts)),
        Some(RuleSpec::Named(name)) if name == "uniform" => Ok(MTModel::uniform(ts)),
        Some(RuleSpec::Named(name)) => Err(MtmError::InvalidRule(format!("unknown rule '{name}'"))),
        Some(RuleSpec::Weights { weights }) => {
            let w = rule_weights(&weights, ts.len())?;
            let rule = SelectionRule::new(&ts, w.iter().map(S::from_exact).collect())?;
            MTModel::new(ts, rule)
        }
    }
}

pub fn load_model<S: Scalar>(path: &Path) -> Result<MTModel<S>> {
    parse_model_json(&std::fs::read_to_string(path)?)
}

/// Serialises a model in the format read by [`parse_model_json`].
pub fn model_to_json<S: Scalar>(mtm: &MTModel<S>) -> String {
    let ts = mtm.trace_set();
    let points: Vec<Value> = ts
        .points()
        .iter()
        .map(|p| {
            let mut o = Map::new();
            o.insert("id".into(), Value::from(p.id));
            if let Some(n) = &p.name {
                o.insert("name".into(), Value::String(n.clone()));
            }
            if let Some((x, y)) = p.coords {
                o.insert("coords".into(), serde_json::json!([x, y]));
            }
            Value::Object(o)
        })
        .collect();
    let traces: Vec<Value> = ts.traces().iter().map(|t| serde_json::json!(t.0)).collect();
    let psi: Vec<Value> = mtm.rule().weights().iter().map(|w| Value::String(w.to_exact().to_string())).collect();
    serde_json::to_string_pretty(&serde_json::json!({ "points": points, "traces": traces, "rule": { "weights": psi } }))
        .expect("serialisable")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SegmentSpec {
    Cells(Vec<PointRef>),
    Counted { cells: Vec<PointRef>, multiplicity: u64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BundleSpec {
    Segments { segments: Vec<SegmentSpec> },
    Slowness { shadow: Vec<PointRef>, slowness: Vec<Weight> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PathSpec {
    Plain(Vec<usize>),
    Counted { bundles: Vec<usize>, multiplicity: u64 },
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteSpec {
    paths: Vec<PathSpec>,
    #[serde(default = "one")]
    multiplicity: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteSystemFile {
    #[serde(default)]
    points: Option<Vec<PointSpec>>,
    #[serde(default)]
    num_points: Option<usize>,
    bundles: Vec<BundleSpec>,
    routes: Vec<RouteSpec>,
}

pub fn parse_route_system_json(text: &str) -> Result<RouteSystem> {
    let file: RouteSystemFile = serde_json::from_str(text).map_err(json_error)?;
    let names = Names::new(file.points, file.num_points)?;
    let n = names.points.len();
    let check = |ids: Vec<PointId>| -> Result<Vec<PointId>> {
        match ids.iter().find(|&&p| p >= n) {
            Some(p) => Err(MtmError::InvalidBundle(format!("unknown point {p}"))),
            None => Ok(ids),
        }
    };
    let mut bundles = Vec::with_capacity(file.bundles.len());
    for spec in &file.bundles {
        let b = match spec {
            BundleSpec::Segments { segments } => {
                let segs = segments
                    .iter()
                    .map(|s| match s {
                        SegmentSpec::Cells(c) => Ok((check(names.resolve_all(c)?)?, 1)),
                        SegmentSpec::Counted { cells, multiplicity } => {
                            Ok((check(names.resolve_all(cells)?)?, *multiplicity))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Bundle::new(segs)?
            }
            BundleSpec::Slowness { shadow, slowness } => {
                let sh = check(names.resolve_all(shadow)?)?;
                let slow: Vec<Exact> = slowness.iter().map(Weight::value).collect::<Result<_>>()?;
                bundle_from_slowness(&sh, &slow, DEFAULT_SLOWNESS_DENOMINATOR_CAP)?
            }
        };
        bundles.push(b);
    }
    let routes = file
        .routes
        .into_iter()
        .map(|r| {
            let paths = r
                .paths
                .into_iter()
                .map(|p| match p {
                    PathSpec::Plain(b) => (BundlePath { bundles: b }, 1),
                    PathSpec::Counted { bundles, multiplicity } => (BundlePath { bundles }, multiplicity),
                })
                .collect();
            (Route { paths }, r.multiplicity)
        })
        .collect();
    RouteSystem::new(names.points, bundles, routes)
}

pub fn load_route_system(path: &Path) -> Result<RouteSystem> {
    parse_route_system_json(&std::fs::read_to_string(path)?)
}

/// A table of strings rendered as CSV or as a JSON array of objects with
/// the same keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.headers.iter().cloned().zip(r.iter().cloned().map(Value::String)).collect()))
            .collect();
        serde_json::to_string_pretty(&rows).expect("serialisable") + "\n"
    }
}

/// `point,name,probability` for any per-point vector.
pub fn point_table<S: Scalar>(points: &[Point], values: &[S]) -> Table {
    let mut t = Table::new(&["point", "name", "probability"]);
    for (p, v) in points.iter().zip(values) {
        t.push(vec![p.id.to_string(), p.label(), v.render()]);
    }
    t
}
