//! Independent oracles, random model generators and the verification
//! suites behind `mtm verify`.

use std::collections::HashSet;
use std::fmt;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{
    build_kernel, full_residual, lift_sigma_to_pi, project_pi_to_sigma, stationary_full, stationary_kernel,
    uniformity_test,
};
use crate::distributions::{destination, spatial, SpatialDistribution};
use crate::downtown::{build_downtown, errata_report, DownTownParams};
use crate::error::{MtmError, Result};
use crate::manhattan::{self, Cell};
use crate::modular::{
    dest_balanced, expand_route_system, is_balanced_rs, spatial_balanced, spatial_general, Bundle, BundlePath, Route,
    RouteSystem,
};
use crate::scalar::{Exact, Scalar};
use crate::trace::{mtm_from_chain, MTModel, Point, SelectionRule, TraceSet};

/// Convention-A visit counts by enumeration: `[dest][at]` counts the paths
/// ending at `dest` that contain `at` anywhere (start and end included),
/// plus one single-cell trace per cell.
pub fn eta_bruteforce(n: usize) -> Vec<Vec<i64>> {
    let cells = n * n;
    let mut eta = vec![vec![0i64; cells]; cells];
    for s in 0..cells {
        for t in 0..cells {
            if s == t {
                continue;
            }
            for path in manhattan::paths((s / n, s % n), (t / n, t % n)) {
                for c in path {
                    eta[t][manhattan::cell_id(n, c)] += 1;
                }
            }
        }
        eta[s][s] += 1;
    }
    eta
}

/// |S(𝒯)| = Σ_T (|T|−1) by enumerating every path.
pub fn state_count_enumerated(n: usize) -> u128 {
    let mut total = 0u128;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if (a, b) != (c, d) {
                        total += manhattan::paths((a, b), (c, d)).iter().map(|p| p.len() as u128 - 1).sum::<u128>();
                    }
                }
            }
        }
    }
    total
}

/// Solve, lift and take the spatial distribution: the generic pipeline.
pub fn pipeline_spatial<S: Scalar>(mtm: &MTModel<S>) -> Result<SpatialDistribution<S>> {
    let pi = stationary_full(mtm)?;
    spatial(mtm, &pi)
}

/// A row-stochastic rational matrix with some structural zeros.
pub fn random_stochastic_matrix<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<Exact>> {
    (0..n)
        .map(|_| {
            let mut w: Vec<i64> =
                (0..n).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..10) }).collect();
            if w.iter().all(|&x| x == 0) {
                w[rng.random_range(0..n)] = 1;
            }
            let total: i64 = w.iter().sum();
            w.into_iter().map(|x| Exact::from_ratio(x, total)).collect()
        })
        .collect()
}

fn random_weights<R: Rng>(rng: &mut R, ts: &TraceSet, skewed: bool) -> Vec<Exact> {
    if !skewed {
        return crate::trace::uniform_rule::<Exact>(ts).weights().to_vec();
    }
    let mut raw: Vec<i64> = (0..ts.len()).map(|_| rng.random_range(1..10)).collect();
    // Make sure at least one point really is skewed.
    if let Some(u) = ts.start_points().into_iter().find(|&u| ts.out_traces(u).len() > 1) {
        let out = ts.out_traces(u);
        if out.iter().all(|&t| raw[t] == raw[out[0]]) {
            raw[out[0]] += 1;
        }
    }
    let mut sums = vec![0i64; ts.num_points()];
    for (t, tr) in ts.traces().iter().enumerate() {
        sums[tr.start()] += raw[t];
    }
    ts.traces().iter().enumerate().map(|(t, tr)| Exact::from_ratio(raw[t], sums[tr.start()])).collect()
}

fn with_mids<R: Rng>(rng: &mut R, points: usize, u: usize, v: usize, max_mids: usize) -> Vec<usize> {
    let mut t = vec![u];
    for _ in 0..rng.random_range(0..=max_mids) {
        t.push(rng.random_range(0..points));
    }
    t.push(v);
    t
}

/// A strongly connected model on 2..=6 points: a Hamiltonian cycle of
/// traces plus random extra traces.
pub fn random_strongly_connected_mtm<R: Rng>(rng: &mut R, skewed: bool) -> MTModel<Exact> {
    let p = rng.random_range(2..=6);
    let mut seen = HashSet::new();
    let mut traces = Vec::new();
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    for k in 0..p {
        let t = with_mids(rng, p, order[k], order[(k + 1) % p], 2);
        if seen.insert(t.clone()) {
            traces.push(t);
        }
    }
    for _ in 0..rng.random_range(0..=2 * p) {
        let (a, b) = (rng.random_range(0..p), rng.random_range(0..p));
        let t = with_mids(rng, p, a, b, 3);
        if seen.insert(t.clone()) {
            traces.push(t);
        }
    }
    let ts = TraceSet::build(p, traces).expect("generated set is valid");
    let w = random_weights(rng, &ts, skewed);
    let rule = SelectionRule::new(&ts, w).expect("normalised");
    MTModel::new(ts, rule).expect("consistent")
}

/// A strongly connected model that is balanced (a union of cycles of
/// traces) or not (one extra trace between distinct points).
pub fn random_uniformity_model<R: Rng>(rng: &mut R, balanced: bool, skewed: bool) -> MTModel<Exact> {
    loop {
        let p = rng.random_range(2..=5);
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(rng);
        cycles.push(order);
        for _ in 0..rng.random_range(1..=3) {
            let len = rng.random_range(1..=p);
            cycles.push((0..len).map(|_| rng.random_range(0..p)).collect());
        }
        let mut traces = Vec::new();
        for c in &cycles {
            for k in 0..c.len() {
                let (u, v) = (c[k], c[(k + 1) % c.len()]);
                let mut t = with_mids(rng, p, u, v, 2);
                if u == v && t.len() < 2 {
                    t.push(v);
                }
                traces.push(t);
            }
        }
        if !balanced {
            let a = rng.random_range(0..p);
            let b = (a + rng.random_range(1..p)) % p;
            traces.push(with_mids(rng, p, a, b, 2));
        }
        let unique: HashSet<_> = traces.iter().cloned().collect();
        if unique.len() != traces.len() {
            continue;
        }
        let ts = TraceSet::build(p, traces).expect("generated set is valid");
        if ts.is_balanced() != balanced {
            continue;
        }
        let w = random_weights(rng, &ts, skewed);
        let rule = SelectionRule::new(&ts, w).expect("normalised");
        return MTModel::new(ts, rule).expect("consistent");
    }
}

/// The family used for the uniformity equivalence: `count` models cycling
/// through {balanced, unbalanced} × {uniform, skewed}.
pub fn uniformity_family<R: Rng>(rng: &mut R, count: usize) -> Vec<(bool, bool, MTModel<Exact>)> {
    (0..count)
        .map(|k| {
            let (balanced, skewed) = (k % 2 == 0, (k / 2) % 2 == 1);
            (balanced, skewed, random_uniformity_model(rng, balanced, skewed))
        })
        .collect()
}

fn random_bundle<R: Rng>(rng: &mut R, shadow: &[usize]) -> Bundle {
    let segs = (0..rng.random_range(1..=3))
        .map(|_| {
            let seg: Vec<usize> =
                shadow.iter().flat_map(|&c| std::iter::repeat_n(c, rng.random_range(1..=3))).collect();
            (seg, rng.random_range(1..=2))
        })
        .collect();
    Bundle::new(segs).expect("common shadow")
}

fn random_bundle_path<R: Rng>(rng: &mut R, p: usize, u: usize, v: usize, bundles: &mut Vec<Bundle>) -> BundlePath {
    let mut w = vec![u];
    let mids = rng.random_range(usize::from(u == v)..=3);
    for _ in 0..mids {
        let mut x = rng.random_range(0..p);
        while x == *w.last().unwrap() {
            x = rng.random_range(0..p);
        }
        w.push(x);
    }
    if *w.last().unwrap() == v {
        // v repeats the last cell; drop it from the interior.
        w.pop();
        if w.is_empty() || (u == v && w.len() < 2) {
            let x = (v + 1) % p;
            w = vec![u, x];
        }
    }
    w.push(v);
    // Split into parts with pairwise-disjoint neighbours.
    let k = rng.random_range(1..=3).min(w.len());
    let mut cuts: Vec<usize> = (1..w.len()).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).collect();
    cuts.sort_unstable();
    let mut parts = Vec::new();
    let mut last = 0;
    for c in cuts.into_iter().chain(std::iter::once(w.len())) {
        parts.push(w[last..c].to_vec());
        last = c;
    }
    let disjoint = parts.windows(2).all(|x| x[0].iter().all(|a| !x[1].contains(a)));
    if !disjoint {
        parts = vec![w];
    }
    let ids = parts
        .iter()
        .map(|sh| {
            bundles.push(random_bundle(rng, sh));
            bundles.len() - 1
        })
        .collect();
    BundlePath { bundles: ids }
}

/// A route system on 2..=5 points whose route graph contains a Hamiltonian
/// cycle. Balanced systems are unions of route cycles (one multiplicity per
/// cycle); unbalanced ones add a route between two distinct points.
pub fn random_route_system<R: Rng>(rng: &mut R, balanced: bool) -> RouteSystem {
    loop {
        let p = rng.random_range(2..=5);
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(rng);
        let mut cycles = vec![order];
        for _ in 0..rng.random_range(0..=2) {
            let len = rng.random_range(1..=p);
            cycles.push((0..len).map(|_| rng.random_range(0..p)).collect());
        }
        let mut pairs = Vec::new();
        for c in &cycles {
            let mult = rng.random_range(1..=2);
            for k in 0..c.len() {
                pairs.push((c[k], c[(k + 1) % c.len()], mult));
            }
        }
        if !balanced {
            let a = rng.random_range(0..p);
            pairs.push((a, (a + rng.random_range(1..p)) % p, 1));
        }
        let mut bundles = Vec::new();
        let routes = pairs
            .iter()
            .map(|&(u, v, mult)| {
                let paths = (0..rng.random_range(1..=2))
                    .map(|_| (random_bundle_path(rng, p, u, v, &mut bundles), rng.random_range(1..=2)))
                    .collect();
                (Route { paths }, mult)
            })
            .collect();
        let rs = RouteSystem::new((0..p).map(Point::plain).collect(), bundles, routes).expect("valid system");
        if is_balanced_rs(&rs) == balanced && rs.expansion_size() <= 10_000 {
            return rs;
        }
    }
}

/// B1 = {(a,b),(a,a,b)}, B2 = {(b,a)}; one route each way.
pub fn tiny_route_system() -> RouteSystem {
    let b1 = Bundle::new(vec![(vec![0, 1], 1), (vec![0, 0, 1], 1)]).expect("valid");
    let b2 = Bundle::single(vec![1, 0]).expect("valid");
    let points = vec![
        Point { id: 0, coords: None, name: Some("a".into()) },
        Point { id: 1, coords: None, name: Some("b".into()) },
    ];
    RouteSystem::new(points, vec![b1, b2], vec![(Route::single(vec![0]), 1), (Route::single(vec![1]), 1)])
        .expect("valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub mismatches: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.into(), checks: Vec::new(), mismatches: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, mismatches: Vec<String>, detail: impl Into<String>) {
        let name = name.into();
        let passed = mismatches.is_empty();
        self.mismatches.extend(mismatches.into_iter().map(|m| format!("{name}: {m}")));
        self.checks.push(Check { name, passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Core,
    Manhattan,
    Modular,
    Downtown,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "core" => Ok(Suite::Core),
            "manhattan" => Ok(Suite::Manhattan),
            "modular" => Ok(Suite::Modular),
            "downtown" => Ok(Suite::Downtown),
            other => Err(format!("unknown suite '{other}'")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Core => "core",
            Suite::Manhattan => "manhattan",
            Suite::Modular => "modular",
            Suite::Downtown => "downtown",
        })
    }
}

pub fn run_suite(suite: Suite, max_n: usize, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Core => core_suite(seed),
        Suite::Manhattan => manhattan_suite(max_n),
        Suite::Modular => modular_suite(seed),
        Suite::Downtown => downtown_suite(max_n),
    }
}

fn err_text(e: MtmError) -> Vec<String> {
    vec![e.to_string()]
}

/// Kernel of mtm_from_chain(M) equals M.
pub fn kernel_round_trip_mismatches(matrix: &[Vec<Exact>]) -> Vec<String> {
    let m = match mtm_from_chain(matrix) {
        Ok(m) => m,
        Err(e) => return err_text(e),
    };
    let k = build_kernel(&m);
    let mut out = Vec::new();
    for (u, row) in matrix.iter().enumerate() {
        for (v, p) in row.iter().enumerate() {
            let got = k.prob(u, v);
            if &got != p {
                out.push(format!("K({u},{v}) = {got}, expected {p}"));
            }
        }
    }
    out
}

/// σ → π → σ and π → σ → π are identities, and both are stationary with
/// zero residual in exact arithmetic.
pub fn lift_project_mismatches(mtm: &MTModel<Exact>) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = || -> Result<()> {
        let k = build_kernel(mtm);
        let sol = stationary_kernel(&k)?;
        let sigma = sol.unique_vector()?.clone();
        if !k.residual(&sigma.values).is_zero() {
            out.push("σK ≠ σ".into());
        }
        let pi = lift_sigma_to_pi(mtm, &sigma)?;
        if !full_residual(mtm, &pi).is_zero() {
            out.push("πP ≠ π".into());
        }
        if project_pi_to_sigma(mtm, &pi)? != sigma {
            out.push("project(lift(σ)) ≠ σ".into());
        }
        if lift_sigma_to_pi(mtm, &project_pi_to_sigma(mtm, &pi)?)? != pi {
            out.push("lift(project(π)) ≠ π".into());
        }
        Ok(())
    };
    if let Err(e) = run() {
        return err_text(e);
    }
    out
}

/// Largest stationarity residual of the float pipeline.
pub fn float_residuals(mtm: &MTModel<Exact>) -> Result<(f64, f64)> {
    let f = mtm.convert::<f64>();
    let k = build_kernel(&f);
    let sigma = stationary_kernel(&k)?.unique_vector()?.clone();
    let pi = lift_sigma_to_pi(&f, &sigma)?;
    Ok((k.residual(&sigma.values), full_residual(&f, &pi)))
}

fn core_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteReport::new("core");
    let mut mm = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(1..=20);
        mm.extend(kernel_round_trip_mismatches(&random_stochastic_matrix(&mut rng, n)));
    }
    r.check("kernel round trip", mm, "50 random stochastic matrices up to 20 states");
    let mut mm = Vec::new();
    let mut worst = 0f64;
    for k in 0..20 {
        let m = random_strongly_connected_mtm(&mut rng, k % 2 == 1);
        mm.extend(lift_project_mismatches(&m));
        match float_residuals(&m) {
            Ok((a, b)) => worst = worst.max(a).max(b),
            Err(e) => mm.push(e.to_string()),
        }
    }
    if worst >= 1e-12 {
        mm.push(format!("float residual {worst:e}"));
    }
    r.check("lift/project inverse", mm, format!("20 random models, worst float residual {worst:e}"));
    let mut mm = Vec::new();
    for (i, (b, s, m)) in uniformity_family(&mut rng, 30).into_iter().enumerate() {
        let u = uniformity_test(&m);
        if u.solved_constant != Some(u.uniform_stationary) {
            mm.push(format!("model {i} (balanced {b}, skewed {s}): {u:?}"));
        }
    }
    r.check("uniformity equivalence", mm, "30 models, balanced/unbalanced × uniform/skewed");
    Ok(r)
}

fn cell(n: usize, id: usize) -> Cell {
    (id / n, id % n)
}

fn manhattan_suite(max_n: usize) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("manhattan");
    for n in 2..=max_n.max(2) {
        let brute = eta_bruteforce(n);
        let mut mm = Vec::new();
        for d in 0..n * n {
            for a in 0..n * n {
                let f = manhattan::eta(n, cell(n, d), cell(n, a));
                if f != brute[d][a] {
                    mm.push(format!("N={n} η({:?},{:?}) = {f}, enumeration {}", cell(n, d), cell(n, a), brute[d][a]));
                }
            }
        }
        r.check(format!("eta N={n}"), mm, format!("{} cell pairs", n.pow(4)));
        let mm = (0..n * n)
            .filter_map(|a| {
                let g: i64 = (0..n * n).map(|d| brute[d][a]).sum();
                let f = manhattan::gamma(n, cell(n, a));
                (g != f).then(|| format!("N={n} Γ{:?} = {f}, enumeration {g}", cell(n, a)))
            })
            .collect();
        r.check(format!("gamma N={n}"), mm, "");
        let (e, f) = (state_count_enumerated(n), manhattan::state_count(n));
        let mm = if e == f { vec![] } else { vec![format!("|S| = {f}, enumeration {e}")] };
        r.check(format!("state count N={n}"), mm, format!("|S| = {f}"));
        if n <= 6 {
            let ts = manhattan::build_manhattan::<Exact>(n)?;
            let mut mm = Vec::new();
            if ts.trace_set().len() as u128 != manhattan::trace_count(n) {
                mm.push(format!("|T| = {}, expected {}", ts.trace_set().len(), manhattan::trace_count(n)));
            }
            if crate::distributions::visiting_counts(ts.trace_set()) != manhattan::visiting_counts(n) {
                mm.push("fast visiting counts differ from the trace set".into());
            }
            if n <= 4 {
                let s = pipeline_spatial(&ts)?;
                if s.values != manhattan::spatial_exact(n)? {
                    mm.push("chain spatial differs from |T_u|/|S|".into());
                }
            }
            r.check(format!("trace set N={n}"), mm, "");
        }
    }
    Ok(r)
}

fn modular_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SuiteReport::new("modular");
    let mut mm = Vec::new();
    let tiny = tiny_route_system();
    let s = spatial_balanced::<Exact>(&tiny)?;
    if s.values != vec![Exact::from_ratio(3, 5), Exact::from_ratio(2, 5)] {
        mm.push(format!("tiny system gives {:?}", s.values));
    }
    mm.extend(balanced_mismatches(&tiny));
    r.check("tiny system", mm, "s(a) = 3/5");
    let mut mm = Vec::new();
    for _ in 0..20 {
        mm.extend(balanced_mismatches(&random_route_system(&mut rng, true)));
    }
    r.check("balanced closed forms", mm, "20 random balanced systems, exact");
    let mut mm = Vec::new();
    let mut worst = 0f64;
    for _ in 0..10 {
        match general_deviation(&random_route_system(&mut rng, false)) {
            Ok(d) => worst = worst.max(d),
            Err(e) => mm.push(e.to_string()),
        }
    }
    if worst > 1e-12 {
        mm.push(format!("largest deviation {worst:e}"));
    }
    r.check("general closed forms", mm, format!("10 random unbalanced systems, worst {worst:e}"));
    Ok(r)
}

/// Balanced closed forms against the expanded-model pipeline, exactly.
pub fn balanced_mismatches(rs: &RouteSystem) -> Vec<String> {
    let run = || -> Result<Vec<String>> {
        let mut out = Vec::new();
        let m = expand_route_system::<Exact>(rs, 10_000)?;
        let pi = stationary_full(&m)?;
        let reference = spatial(&m, &pi)?;
        if spatial_balanced::<Exact>(rs)? != reference {
            out.push("spatial differs from pipeline".into());
        }
        for u in 0..rs.num_points() {
            if reference.values[u].is_zero() {
                continue;
            }
            if dest_balanced::<Exact>(rs, u)? != destination(&m, &pi, u)? {
                out.push(format!("destination at {u} differs from pipeline"));
            }
        }
        Ok(out)
    };
    run().unwrap_or_else(err_text)
}

/// Max deviation of the general closed form (float σ) from the exact pipeline.
pub fn general_deviation(rs: &RouteSystem) -> Result<f64> {
    let m = expand_route_system::<Exact>(rs, 10_000)?;
    let reference = pipeline_spatial(&m)?;
    let f = m.convert::<f64>();
    let sigma = stationary_kernel(&build_kernel(&f))?.unique_vector()?.clone();
    let s = spatial_general(rs, &sigma)?;
    Ok(s.values.iter().zip(&reference.values).map(|(a, b)| (a - b.to_f64()).abs()).fold(0.0, f64::max))
}

/// Balance, unit mass of the balanced closed form and its agreement with
/// the chain pipeline, for a built DownTown system.
pub fn downtown_mismatches(p: &DownTownParams) -> Result<Vec<String>> {
    let dt = build_downtown(p)?;
    let mut out = Vec::new();
    if !is_balanced_rs(&dt.system) {
        out.push("route system is not balanced".into());
    }
    let s = dt.spatial::<Exact>()?;
    if s.total() != Exact::from_integer(1.into()) {
        out.push(format!("spatial sums to {}", s.total()));
    }
    let m = expand_route_system::<Exact>(&dt.system, 1_000_000)?;
    if !crate::chain::is_strongly_connected(&m) {
        out.push("expanded model is not strongly connected".into());
    }
    if pipeline_spatial(&m)? != s {
        out.push("closed form differs from pipeline".into());
    }
    Ok(out)
}

fn downtown_suite(max_n: usize) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("downtown");
    for n in (2..=max_n.max(2)).step_by(2) {
        for m in 1..=2 {
            if n * m > 8 {
                continue;
            }
            let p = DownTownParams::unit(n, m);
            let mm = downtown_mismatches(&p).unwrap_or_else(err_text);
            let dt = build_downtown(&p)?;
            let e = errata_report(&dt)?;
            r.check(
                format!("n={n} m={m}"),
                mm,
                format!(
                    "errata: {}/{} counts and {}/{} cells differ from the published formulas",
                    e.bundle_mismatches, e.bundle_checks, e.cell_mismatches, e.cell_checks
                ),
            );
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small() {
        for s in [Suite::Core, Suite::Manhattan, Suite::Modular] {
            let r = run_suite(s, 4, 7).unwrap();
            assert!(r.passed(), "{s}: {:?}", r.mismatches);
        }
    }

    #[test]
    fn eta_oracle_small() {
        let e = eta_bruteforce(2);
        assert_eq!(e[0][0], 5);
        assert_eq!(state_count_enumerated(2), 24);
        assert_eq!(state_count_enumerated(3), 240);
    }

    #[test]
    fn generators_produce_requested_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (b, _, m) in uniformity_family(&mut rng, 8) {
            assert_eq!(m.trace_set().is_balanced(), b);
            assert!(crate::chain::is_strongly_connected(&m));
        }
        for b in [true, false] {
            let rs = random_route_system(&mut rng, b);
            assert_eq!(is_balanced_rs(&rs), b);
            assert!(rs.is_strongly_connected());
        }
    }
}
