//! Route systems: bundles of same-shadow segments, bundle-paths, routes,
//! the model they induce, and closed-form stationary distributions that
//! never expand the traces.
//!
//! Counting follows the chain: on an assembled trace the start is not
//! counted and the end is. For a bundle this means the first cell of each
//! segment is skipped only when the bundle leads its bundle-path.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{KernelChain, KernelStationary};
use crate::distributions::{DestinationDistribution, SpatialDistribution};
use crate::error::{MtmError, Result};
use crate::scalar::{parse_rational, Exact, Scalar};
use crate::trace::{MTModel, Point, PointId, SelectionRule, TraceSet};

pub type Segment = Vec<PointId>;

/// Default cap on the number of distinct traces produced by expansion.
pub const DEFAULT_EXPANSION_CAP: usize = 1_000_000;
/// Default cap on the common denominator of a slowness profile.
pub const DEFAULT_SLOWNESS_DENOMINATOR_CAP: u64 = 1024;

/// Collapses maximal runs of a repeated point.
pub fn shadow(seg: &[PointId]) -> Vec<PointId> {
    let mut out: Vec<PointId> = Vec::with_capacity(seg.len());
    for &p in seg {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// A non-empty multiset of segments sharing one shadow, stored as sorted
/// (segment, multiplicity) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    segments: Vec<(Segment, u64)>,
    shadow: Vec<PointId>,
}

impl Bundle {
    pub fn new(segments: Vec<(Segment, u64)>) -> Result<Self> {
        let mut merged: BTreeMap<Segment, u64> = BTreeMap::new();
        for (seg, mult) in segments {
            if seg.is_empty() {
                return Err(MtmError::InvalidBundle("empty segment".into()));
            }
            if mult == 0 {
                continue;
            }
            *merged.entry(seg).or_default() += mult;
        }
        let Some(first) = merged.keys().next() else {
            return Err(MtmError::InvalidBundle("bundle has no segments".into()));
        };
        let sh = shadow(first);
        if merged.keys().any(|s| shadow(s) != sh) {
            return Err(MtmError::InvalidBundle("segments have different shadows".into()));
        }
        Ok(Bundle { segments: merged.into_iter().collect(), shadow: sh })
    }

    pub fn single(seg: Segment) -> Result<Self> {
        Self::new(vec![(seg, 1)])
    }

    pub fn segments(&self) -> &[(Segment, u64)] {
        &self.segments
    }

    pub fn shadow(&self) -> &[PointId] {
        &self.shadow
    }

    /// |B| with multiplicity.
    pub fn cardinality(&self) -> u64 {
        self.segments.iter().map(|(_, m)| m).sum()
    }

    /// #_{B,u} summed over segments with multiplicity. A leading bundle
    /// skips the first cell of every segment.
    pub fn counts(&self, leading: bool) -> BTreeMap<PointId, u64> {
        let mut out = BTreeMap::new();
        for (seg, mult) in &self.segments {
            let skip = usize::from(leading);
            for &p in &seg[skip..] {
                *out.entry(p).or_insert(0) += mult;
            }
        }
        out
    }

    /// #B = Σ_u #_{B,u}.
    pub fn total_count(&self, leading: bool) -> u64 {
        self.segments.iter().map(|(s, m)| (s.len() - usize::from(leading)) as u64 * m).sum()
    }

    fn overlaps(&self, other: &Bundle) -> bool {
        self.shadow.iter().any(|p| other.shadow.contains(p))
    }
}

/// B·B′: all concatenations, |B·B′| = |B||B′|.
pub fn combine(b1: &Bundle, b2: &Bundle) -> Result<Bundle> {
    if b1.overlaps(b2) {
        return Err(MtmError::OverlappingBundles);
    }
    let mut segs = Vec::with_capacity(b1.segments.len() * b2.segments.len());
    for (s1, m1) in &b1.segments {
        for (s2, m2) in &b2.segments {
            let mut s = s1.clone();
            s.extend_from_slice(s2);
            segs.push((s, m1 * m2));
        }
    }
    Bundle::new(segs)
}

/// A bundle-path as indices into the route system's bundles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundlePath {
    pub bundles: Vec<usize>,
}

/// A multiset of bundle-paths with common endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub paths: Vec<(BundlePath, u64)>,
}

impl Route {
    pub fn single(path: Vec<usize>) -> Self {
        Route { paths: vec![(BundlePath { bundles: path }, 1)] }
    }

    /// |R| with multiplicity.
    pub fn cardinality(&self) -> u64 {
        self.paths.iter().map(|(_, m)| m).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RouteSystem {
    points: Vec<Point>,
    bundles: Vec<Bundle>,
    routes: Vec<(Route, u64)>,
    ends: Vec<(PointId, PointId)>,
}

impl RouteSystem {
    pub fn new(points: Vec<Point>, bundles: Vec<Bundle>, routes: Vec<(Route, u64)>) -> Result<Self> {
        let n = points.len();
        if let Some(p) = bundles.iter().flat_map(|b| b.shadow.iter()).find(|&&p| p >= n) {
            return Err(MtmError::InvalidBundle(format!("unknown point {p}")));
        }
        if routes.is_empty() {
            return Err(MtmError::EmptySet);
        }
        let mut ends = Vec::with_capacity(routes.len());
        for (ri, (route, mult)) in routes.iter().enumerate() {
            if *mult == 0 || route.paths.is_empty() || route.cardinality() == 0 {
                return Err(MtmError::EmptyRoute { route: ri });
            }
            let mut endpoints = None;
            for (path, _) in &route.paths {
                if path.bundles.is_empty() {
                    return Err(MtmError::EmptyRoute { route: ri });
                }
                if let Some(&b) = path.bundles.iter().find(|&&b| b >= bundles.len()) {
                    return Err(MtmError::InvalidBundle(format!("route {ri} refers to bundle {b}")));
                }
                for w in path.bundles.windows(2) {
                    if bundles[w[0]].overlaps(&bundles[w[1]]) {
                        return Err(MtmError::OverlappingBundles);
                    }
                }
                let first = &bundles[path.bundles[0]];
                let last = &bundles[*path.bundles.last().unwrap()];
                let e = (first.shadow[0], *last.shadow.last().unwrap());
                if first.shadow.len() == 1 && path.bundles.len() == 1 {
                    // A single one-cell bundle would give traces of length < 2
                    // unless every segment repeats the cell.
                    if first.segments.iter().any(|(s, _)| s.len() < 2) {
                        return Err(MtmError::InvalidBundle(format!("route {ri} yields a trace shorter than 2")));
                    }
                }
                match endpoints {
                    None => endpoints = Some(e),
                    Some(prev) if prev != e => return Err(MtmError::EndpointMismatch { route: ri }),
                    _ => {}
                }
            }
            ends.push(endpoints.unwrap());
        }
        let mut has_out = vec![false; n];
        for (s, _) in &ends {
            has_out[*s] = true;
        }
        if let Some((_, e)) = ends.iter().find(|(_, e)| !has_out[*e]) {
            return Err(MtmError::NotEndless { point: points[*e].label() });
        }
        Ok(RouteSystem { points, bundles, routes, ends })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn routes(&self) -> &[(Route, u64)] {
        &self.routes
    }

    pub fn route_start(&self, r: usize) -> PointId {
        self.ends[r].0
    }

    pub fn route_end(&self, r: usize) -> PointId {
        self.ends[r].1
    }

    /// |ℛ_u| per point, with multiplicity.
    pub fn out_counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.num_points()];
        for (r, (_, m)) in self.routes.iter().enumerate() {
            c[self.ends[r].0] += m;
        }
        c
    }

    pub fn in_counts(&self) -> Vec<u64> {
        let mut c = vec![0; self.num_points()];
        for (r, (_, m)) in self.routes.iter().enumerate() {
            c[self.ends[r].1] += m;
        }
        c
    }

    /// |ℛ| with multiplicity.
    pub fn route_count(&self) -> u64 {
        self.routes.iter().map(|(_, m)| m).sum()
    }

    /// Number of distinct traces expansion would produce before
    /// de-duplication, saturating.
    pub fn expansion_size(&self) -> u128 {
        let mut total: u128 = 0;
        for (route, _) in &self.routes {
            for (path, _) in &route.paths {
                let mut prod: u128 = 1;
                for &b in &path.bundles {
                    prod = prod.saturating_mul(self.bundles[b].segments.len() as u128);
                }
                total = total.saturating_add(prod);
            }
        }
        total
    }

    /// Whether every point starting a route reaches every other one.
    pub fn is_strongly_connected(&self) -> bool {
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..self.num_points()).map(|_| g.add_node(())).collect();
        for &(s, e) in &self.ends {
            g.add_edge(nodes[s], nodes[e], ());
        }
        let out = self.out_counts();
        let starts: Vec<usize> = (0..self.num_points()).filter(|&u| out[u] > 0).collect();
        tarjan_scc(&g).into_iter().any(|c| c.len() == starts.len() && c.iter().all(|n| out[n.index()] > 0))
    }

    /// The kernel of the induced model, computed at route level:
    /// K(u,v) = Σ_{R: u→v} m_R / |ℛ_u|.
    pub fn route_kernel<S: Scalar>(&self) -> KernelChain<S> {
        let out = self.out_counts();
        let states: Vec<PointId> = (0..self.num_points()).filter(|&u| out[u] > 0).collect();
        let mut rows: Vec<BTreeMap<PointId, S>> = vec![BTreeMap::new(); states.len()];
        let mut pos = vec![usize::MAX; self.num_points()];
        for (a, &u) in states.iter().enumerate() {
            pos[u] = a;
        }
        for (r, (_, m)) in self.routes.iter().enumerate() {
            let (s, e) = self.ends[r];
            let p = S::from_ratio(*m as i64, out[s] as i64);
            let entry = rows[pos[s]].entry(pos[e]).or_insert_with(S::zero);
            *entry = entry.clone() + p;
        }
        KernelChain::from_parts(self.num_points(), states, rows.into_iter().map(|r| r.into_iter().collect()).collect())
    }
}

pub fn is_balanced_rs(rs: &RouteSystem) -> bool {
    rs.out_counts() == rs.in_counts()
}

/// Distinct traces of ⟦P⟧ with their multiplicities.
fn path_traces(rs: &RouteSystem, path: &BundlePath) -> Vec<(Segment, u64)> {
    let mut acc: Vec<(Segment, u64)> = vec![(Vec::new(), 1)];
    for &b in &path.bundles {
        let mut next = Vec::with_capacity(acc.len() * rs.bundles[b].segments.len());
        for (prefix, m) in &acc {
            for (seg, sm) in &rs.bundles[b].segments {
                let mut t = prefix.clone();
                t.extend_from_slice(seg);
                next.push((t, m * sm));
            }
        }
        acc = next;
    }
    acc
}

/// |⟦P⟧| = Π |B_i|.
pub fn path_cardinality(rs: &RouteSystem, path: &BundlePath) -> u64 {
    path.bundles.iter().map(|&b| rs.bundles[b].cardinality()).product()
}

/// The induced model 𝒯[ℜ] with ψ[ℜ]: routes from u are equally likely,
/// paths of a route are equally likely, traces of ⟦P⟧ are equally likely.
/// Identical traces from different provenances merge and their
/// probabilities add.
pub fn expand_route_system<S: Scalar>(rs: &RouteSystem, cap: usize) -> Result<MTModel<S>> {
    if rs.expansion_size() > cap as u128 {
        return Err(MtmError::ExpansionTooLarge { cap });
    }
    let out = rs.out_counts();
    let parts: Vec<Vec<(Segment, Exact)>> = rs
        .routes
        .par_iter()
        .enumerate()
        .map(|(r, (route, m_r))| {
            let base = Exact::new((*m_r).into(), (out[rs.ends[r].0] * route.cardinality()).into());
            let mut v = Vec::new();
            for (path, m_p) in &route.paths {
                let card = path_cardinality(rs, path);
                let w = base.clone() * Exact::new((*m_p).into(), card.into());
                for (t, mt) in path_traces(rs, path) {
                    v.push((t, w.clone() * Exact::from_integer(mt.into())));
                }
            }
            v
        })
        .collect();
    let mut psi: BTreeMap<Segment, Exact> = BTreeMap::new();
    for part in parts {
        for (t, w) in part {
            let e = psi.entry(t).or_insert_with(Exact::zero);
            *e += w;
        }
    }
    if psi.len() > cap {
        return Err(MtmError::ExpansionTooLarge { cap });
    }
    let (traces, weights): (Vec<_>, Vec<_>) = psi.into_iter().unzip();
    let ts = TraceSet::build_with_points(rs.points.clone(), traces)?;
    let rule = SelectionRule::new(&ts, weights.iter().map(S::from_exact).collect())?;
    MTModel::new(ts, rule)
}

/// Occupancy coefficients: for every (bundle, leading) pair the summed
/// weight of the paths using it.
fn bundle_coefficients<S: Scalar>(
    rs: &RouteSystem,
    route_weight: &[S],
    keep: impl Fn(usize) -> bool,
) -> BTreeMap<(usize, bool), S> {
    let mut coeff: BTreeMap<(usize, bool), S> = BTreeMap::new();
    for (r, (route, _)) in rs.routes.iter().enumerate() {
        if !keep(r) || route_weight[r].is_zero() {
            continue;
        }
        let card = route.cardinality() as i64;
        for (path, m_p) in &route.paths {
            let w = route_weight[r].clone() * S::from_ratio(*m_p as i64, card);
            for (idx, &b) in path.bundles.iter().enumerate() {
                let e = coeff.entry((b, idx == 0)).or_insert_with(S::zero);
                *e = e.clone() + w.clone();
            }
        }
    }
    coeff
}

fn occupancy<S: Scalar>(rs: &RouteSystem, coeff: &BTreeMap<(usize, bool), S>) -> Vec<S> {
    let mut values = vec![S::zero(); rs.num_points()];
    for (&(b, leading), c) in coeff {
        let bundle = &rs.bundles[b];
        let card = S::from_u64(bundle.cardinality());
        for (u, k) in bundle.counts(leading) {
            values[u] = values[u].clone() + c.clone() * S::from_u64(k) / card.clone();
        }
    }
    values
}

fn normalized<S: Scalar>(values: Vec<S>) -> SpatialDistribution<S> {
    let total = values.iter().fold(S::zero(), |a, b| a + b.clone());
    SpatialDistribution { values: values.into_iter().map(|v| v / total.clone()).collect() }
}

/// Route weights m_R (σ-free form valid for balanced systems).
fn balanced_weights<S: Scalar>(rs: &RouteSystem) -> Vec<S> {
    rs.routes.iter().map(|(_, m)| S::from_u64(*m)).collect()
}

/// Route weights σ(R_start) m_R / |ℛ_{R_start}|.
fn general_weights<S: Scalar>(rs: &RouteSystem, sigma: &KernelStationary<S>) -> Result<Vec<S>> {
    let k = rs.route_kernel::<S>();
    if sigma.values.len() != rs.num_points() {
        return Err(MtmError::NotStationaryInput);
    }
    let r = k.residual(&sigma.values);
    let total = sigma.values.iter().fold(S::zero(), |a, b| a + b.clone());
    let ok = if S::is_exact() { r.is_zero() } else { r.to_f64() <= 1e-9 };
    if !ok || !total.approx_eq(&S::one()) {
        return Err(MtmError::NotStationaryInput);
    }
    let out = rs.out_counts();
    Ok(rs
        .routes
        .iter()
        .enumerate()
        .map(|(r, (_, m))| {
            let s = rs.ends[r].0;
            sigma.values[s].clone() * S::from_ratio(*m as i64, out[s] as i64)
        })
        .collect())
}

fn check_balanced(rs: &RouteSystem) -> Result<()> {
    if !is_balanced_rs(rs) {
        return Err(MtmError::NotBalanced);
    }
    if !rs.is_strongly_connected() {
        return Err(MtmError::NotStronglyConnected);
    }
    Ok(())
}

/// Λ_b = Σ_B (#B/|B|) Σ_R #_{R,B}/|R| (route multiplicities included).
pub fn lambda_b<S: Scalar>(rs: &RouteSystem) -> S {
    let coeff = bundle_coefficients(rs, &balanced_weights::<S>(rs), |_| true);
    coeff.iter().fold(S::zero(), |acc, (&(b, leading), c)| {
        let bundle = &rs.bundles[b];
        acc + c.clone() * S::from_u64(bundle.total_count(leading)) / S::from_u64(bundle.cardinality())
    })
}

/// Per-bundle weight Σ_R #_{R,B}/|R|, split by whether the bundle leads
/// its path.
pub fn bundle_weights<S: Scalar>(rs: &RouteSystem) -> BTreeMap<(usize, bool), S> {
    bundle_coefficients(rs, &balanced_weights::<S>(rs), |_| true)
}

/// Closed-form spatial distribution of a balanced route system.
pub fn spatial_balanced<S: Scalar>(rs: &RouteSystem) -> Result<SpatialDistribution<S>> {
    check_balanced(rs)?;
    let coeff = bundle_coefficients(rs, &balanced_weights::<S>(rs), |_| true);
    Ok(normalized(occupancy(rs, &coeff)))
}

/// Closed-form destination distribution of a balanced route system.
pub fn dest_balanced<S: Scalar>(rs: &RouteSystem, at: PointId) -> Result<DestinationDistribution<S>> {
    check_balanced(rs)?;
    dest_from_weights(rs, &balanced_weights::<S>(rs), at)
}

/// Spatial distribution for any route system, given the kernel's σ.
pub fn spatial_general<S: Scalar>(rs: &RouteSystem, sigma: &KernelStationary<S>) -> Result<SpatialDistribution<S>> {
    let w = general_weights(rs, sigma)?;
    let coeff = bundle_coefficients(rs, &w, |_| true);
    Ok(normalized(occupancy(rs, &coeff)))
}

pub fn dest_general<S: Scalar>(
    rs: &RouteSystem,
    sigma: &KernelStationary<S>,
    at: PointId,
) -> Result<DestinationDistribution<S>> {
    let w = general_weights(rs, sigma)?;
    dest_from_weights(rs, &w, at)
}

fn dest_from_weights<S: Scalar>(rs: &RouteSystem, w: &[S], at: PointId) -> Result<DestinationDistribution<S>> {
    if at >= rs.num_points() {
        return Err(MtmError::InvalidParameter(format!("unknown point {at}")));
    }
    let mut values = vec![S::zero(); rs.num_points()];
    let mut mass = S::zero();
    for (r, (route, _)) in rs.routes.iter().enumerate() {
        if w[r].is_zero() {
            continue;
        }
        let card = route.cardinality() as i64;
        let mut contrib = S::zero();
        for (path, m_p) in &route.paths {
            let pw = w[r].clone() * S::from_ratio(*m_p as i64, card);
            for (idx, &b) in path.bundles.iter().enumerate() {
                let bundle = &rs.bundles[b];
                if let Some(k) = bundle.counts(idx == 0).get(&at) {
                    contrib = contrib + pw.clone() * S::from_u64(*k) / S::from_u64(bundle.cardinality());
                }
            }
        }
        let e = rs.ends[r].1;
        values[e] = values[e].clone() + contrib.clone();
        mass = mass + contrib;
    }
    if mass.is_negligible() {
        return Err(MtmError::ZeroSpatialMass { point: at });
    }
    Ok(DestinationDistribution { at, values: values.into_iter().map(|v| v / mass.clone()).collect() })
}

/// Per-cell slowness profile of a transit stripe, indexed by k = 1..m.
#[derive(Debug, Clone, PartialEq)]
pub enum SlownessSpec {
    Const(Exact),
    /// slk(k) = a + b·k
    Linear(Exact, Exact),
    Table(Vec<Exact>),
}

impl SlownessSpec {
    /// Parses `const:<v>`, `linear:<a>,<b>` or `table:<file>`; the file
    /// contents are obtained through `load`.
    pub fn parse_with(text: &str, load: impl FnOnce(&str) -> Result<String>) -> Result<Self> {
        let (kind, arg) =
            text.split_once(':').ok_or_else(|| MtmError::Parse(format!("slowness '{text}' lacks a kind prefix")))?;
        let num = |s: &str| parse_rational(s).ok_or_else(|| MtmError::Parse(format!("bad number '{s}'")));
        match kind.trim() {
            "const" => Ok(SlownessSpec::Const(num(arg)?)),
            "linear" => {
                let (a, b) =
                    arg.split_once(',').ok_or_else(|| MtmError::Parse("linear slowness needs '<a>,<b>'".into()))?;
                Ok(SlownessSpec::Linear(num(a)?, num(b)?))
            }
            "table" => Ok(SlownessSpec::Table(parse_slowness_table(&load(arg.trim())?)?)),
            other => Err(MtmError::Parse(format!("unknown slowness kind '{other}'"))),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, |path| Ok(std::fs::read_to_string(path)?))
    }

    pub fn at(&self, k: usize) -> Result<Exact> {
        match self {
            SlownessSpec::Const(v) => Ok(v.clone()),
            SlownessSpec::Linear(a, b) => Ok(a.clone() + b.clone() * Exact::from_integer(k.into())),
            SlownessSpec::Table(t) => t
                .get(k.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| MtmError::InvalidParameter(format!("slowness table has no entry for k = {k}"))),
        }
    }
}

/// Whitespace or comma separated rationals.
pub fn parse_slowness_table(contents: &str) -> Result<Vec<Exact>> {
    let values: Result<Vec<Exact>> = contents
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_rational(s).ok_or_else(|| MtmError::Parse(format!("bad number '{s}'"))))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err(MtmError::Parse("empty slowness table".into()));
    }
    Ok(values)
}

/// A bundle over `shadow` whose average number of steps on each cell equals
/// the requested slowness. With common denominator q the bundle has q
/// segments (merged by equality); segment s stays ⌈ς⌉ steps on a cell when
/// s < frac(ς)·q and ⌊ς⌋ otherwise.
pub fn bundle_from_slowness(shadow_seq: &[PointId], slowness: &[Exact], denominator_cap: u64) -> Result<Bundle> {
    if shadow_seq.is_empty() || shadow_seq.len() != slowness.len() {
        return Err(MtmError::InvalidParameter("shadow and slowness lengths differ".into()));
    }
    if shadow(shadow_seq).len() != shadow_seq.len() {
        return Err(MtmError::InvalidParameter("shadow repeats a point consecutively".into()));
    }
    let one = Exact::one();
    if let Some(s) = slowness.iter().find(|s| **s < one) {
        return Err(MtmError::UnrepresentableSlowness(format!("slowness {s} is below 1")));
    }
    let mut q = num_bigint::BigInt::one();
    for s in slowness {
        q = q.lcm(s.denom());
        if q > denominator_cap.into() {
            return Err(MtmError::UnrepresentableSlowness(format!("common denominator exceeds {denominator_cap}")));
        }
    }
    let q = q.to_u64().expect("bounded by cap");
    let parts: Vec<(u64, u64)> = slowness
        .iter()
        .map(|s| {
            let floor = s.floor().to_integer().to_u64().unwrap_or(u64::MAX);
            let frac = (s - s.floor()) * Exact::from_integer(q.into());
            (floor, frac.to_integer().to_u64().unwrap_or(0))
        })
        .collect();
    if parts.iter().any(|(f, _)| *f > 1_000_000) {
        return Err(MtmError::UnrepresentableSlowness("slowness too large".into()));
    }
    let mut segments = Vec::with_capacity(q as usize);
    for s in 0..q {
        let mut seg = Vec::new();
        for (&p, &(floor, hi)) in shadow_seq.iter().zip(&parts) {
            let reps = if s < hi { floor + 1 } else { floor };
            seg.extend(std::iter::repeat_n(p, reps as usize));
        }
        segments.push((seg, 1));
    }
    Bundle::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_kernel, stationary_full, stationary_kernel};
    use crate::distributions::{destination, spatial};

    fn r(a: i64, b: i64) -> Exact {
        Exact::from_ratio(a, b)
    }

    /// B1 = {(a,b),(a,a,b)}, B2 = {(b,a)}; R1 = (B1), R2 = (B2).
    pub(crate) fn tiny() -> RouteSystem {
        let b1 = Bundle::new(vec![(vec![0, 1], 1), (vec![0, 0, 1], 1)]).unwrap();
        let b2 = Bundle::single(vec![1, 0]).unwrap();
        RouteSystem::new(
            vec![Point::plain(0), Point::plain(1)],
            vec![b1, b2],
            vec![(Route::single(vec![0]), 1), (Route::single(vec![1]), 1)],
        )
        .unwrap()
    }

    #[test]
    fn shadows() {
        assert_eq!(shadow(&[0, 0, 1, 2, 2, 2, 0]), vec![0, 1, 2, 0]);
        assert_eq!(shadow(&[3]), vec![3]);
        assert_eq!(shadow(&shadow(&[1, 1, 2])), shadow(&[1, 1, 2]));
    }

    #[test]
    fn combination() {
        let a = Bundle::new(vec![(vec![0, 1], 1), (vec![0, 0, 1], 1)]).unwrap();
        let b = Bundle::new(vec![(vec![2, 3], 1), (vec![2, 2, 3], 1), (vec![2, 3, 3], 1)]).unwrap();
        let c = combine(&a, &b).unwrap();
        assert_eq!(c.cardinality(), 6);
        assert_eq!(c.shadow(), &[0, 1, 2, 3]);
        assert_eq!(combine(&a, &a).unwrap_err(), MtmError::OverlappingBundles);
    }

    #[test]
    fn tiny_expansion_and_closed_forms() {
        let rs = tiny();
        let m = expand_route_system::<Exact>(&rs, 100).unwrap();
        let ts = m.trace_set();
        assert_eq!(ts.len(), 3);
        for (id, t) in ts.traces().iter().enumerate() {
            let expect = if t.start() == 0 { r(1, 2) } else { r(1, 1) };
            assert_eq!(m.rule().psi(id), &expect);
        }
        assert!(is_balanced_rs(&rs));
        let s = spatial_balanced::<Exact>(&rs).unwrap();
        assert_eq!(s.values, vec![r(3, 5), r(2, 5)]);
        assert_eq!(lambda_b::<Exact>(&rs), r(5, 2));
        let pi = stationary_full(&m).unwrap();
        assert_eq!(spatial(&m, &pi).unwrap(), s);
        for u in 0..2 {
            assert_eq!(dest_balanced::<Exact>(&rs, u).unwrap(), destination(&m, &pi, u).unwrap());
        }
        let sigma = stationary_kernel(&build_kernel(&m)).unwrap().vectors.remove(0);
        assert_eq!(spatial_general(&rs, &sigma).unwrap(), s);
    }

    #[test]
    fn repeated_trace_doubles_probability() {
        // Path B1·B1' produces (a,b) twice through different bundles is not
        // possible with disjoint shadows; a repeated segment in one bundle is.
        let b1 = Bundle::new(vec![(vec![0, 1], 2), (vec![0, 0, 1], 1)]).unwrap();
        let b2 = Bundle::single(vec![1, 0]).unwrap();
        let rs = RouteSystem::new(
            vec![Point::plain(0), Point::plain(1)],
            vec![b1, b2],
            vec![(Route::single(vec![0]), 1), (Route::single(vec![1]), 1)],
        )
        .unwrap();
        let m = expand_route_system::<Exact>(&rs, 100).unwrap();
        let id = m.trace_set().traces().iter().position(|t| t.0 == vec![0, 1]).unwrap();
        assert_eq!(m.rule().psi(id), &r(2, 3));
    }

    #[test]
    fn unbalanced_detection() {
        let b1 = Bundle::single(vec![0, 1]).unwrap();
        let b2 = Bundle::single(vec![1, 0]).unwrap();
        let rs = RouteSystem::new(
            vec![Point::plain(0), Point::plain(1)],
            vec![b1, b2],
            vec![(Route::single(vec![0]), 2), (Route::single(vec![1]), 1)],
        )
        .unwrap();
        assert!(!is_balanced_rs(&rs));
        assert_eq!(spatial_balanced::<Exact>(&rs).unwrap_err(), MtmError::NotBalanced);
    }

    #[test]
    fn route_validation() {
        let b1 = Bundle::single(vec![0, 1]).unwrap();
        let b2 = Bundle::single(vec![2, 0]).unwrap();
        let pts = || (0..3).map(Point::plain).collect::<Vec<_>>();
        let mixed = Route { paths: vec![(BundlePath { bundles: vec![0] }, 1), (BundlePath { bundles: vec![1] }, 1)] };
        assert_eq!(
            RouteSystem::new(pts(), vec![b1.clone(), b2.clone()], vec![(mixed, 1)]).unwrap_err(),
            MtmError::EndpointMismatch { route: 0 }
        );
        let empty = Route { paths: vec![] };
        assert_eq!(
            RouteSystem::new(pts(), vec![b1.clone()], vec![(empty, 1)]).unwrap_err(),
            MtmError::EmptyRoute { route: 0 }
        );
        assert!(matches!(
            RouteSystem::new(pts(), vec![b1], vec![(Route::single(vec![0]), 1)]).unwrap_err(),
            MtmError::NotEndless { .. }
        ));
    }

    #[test]
    fn slowness_bundles() {
        let b = bundle_from_slowness(&[0, 1], &[r(1, 1), r(1, 1)], 64).unwrap();
        assert_eq!(b.segments(), &[(vec![0, 1], 1)]);
        let b = bundle_from_slowness(&[0, 1], &[r(2, 1), r(1, 1)], 64).unwrap();
        assert_eq!(b.segments(), &[(vec![0, 0, 1], 1)]);
        let b = bundle_from_slowness(&[0, 1], &[r(3, 2), r(1, 1)], 64).unwrap();
        assert_eq!(b.segments(), &[(vec![0, 0, 1], 1), (vec![0, 1], 1)]);
        let c = b.counts(false);
        assert_eq!(r(c[&0] as i64, b.cardinality() as i64), r(3, 2));
        assert!(matches!(
            bundle_from_slowness(&[0], &[r(1, 1000) + r(1, 1)], 64),
            Err(MtmError::UnrepresentableSlowness(_))
        ));
    }

    #[test]
    fn slowness_specs() {
        assert_eq!(SlownessSpec::parse("const:2").unwrap().at(3).unwrap(), r(2, 1));
        assert_eq!(SlownessSpec::parse("linear:1,1/2").unwrap().at(2).unwrap(), r(2, 1));
        let t = SlownessSpec::parse_with("table:x", |_| Ok("1 3/2\n2".into())).unwrap();
        assert_eq!(t.at(2).unwrap(), r(3, 2));
        assert!(t.at(4).is_err());
        assert!(SlownessSpec::parse("fast:1").is_err());
    }
}
