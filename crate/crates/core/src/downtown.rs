//! The DownTown route system: a square grid of two-way streets with
//! parking stripes, routed by fixed driving directions, plus the published
//! closed-form bundle counts and cell probabilities, checked against the
//! route system itself.
//!
//! Layout. Grid coordinates (i, j) run over 0..=n; cross-ways have both
//! even, blocks exactly one odd. A horizontal block (i even) has four rows,
//! top to bottom: negative parking, negative transit, positive transit,
//! positive parking. A vertical block (j even) has four columns, left to
//! right: positive parking, positive transit (downwards), negative transit
//! (upwards), negative parking. Stripe indices 1..=m follow the travel
//! direction of the stripe; parking cells share the index of the adjacent
//! transit cell. A cross-way is the 4×4 square at the intersection with
//! its corners removed; its 12 cells are numbered row-major from 1.

use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::SpatialDistribution;
use crate::error::{MtmError, Result};
use crate::modular::{
    bundle_from_slowness, lambda_b, spatial_balanced, Bundle, Route, RouteSystem, SlownessSpec,
    DEFAULT_SLOWNESS_DENOMINATOR_CAP,
};
use crate::scalar::{Exact, Scalar};
use crate::trace::{Point, PointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    fn of(d: i64) -> Sign {
        if d > 0 {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn value(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Pos => '+',
            Sign::Neg => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Orient {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Transit,
    Parking,
    Cross,
}

/// A cell: block cells carry a stripe sign and index k in 1..=m, cross-way
/// cells carry their position 1..=12 in `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DtCell {
    pub role: Role,
    pub i: usize,
    pub j: usize,
    pub stripe: Option<Sign>,
    pub k: usize,
}

impl fmt::Display for DtCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            Role::Transit => write!(f, "T{}({},{})k{}", self.stripe.unwrap().symbol(), self.i, self.j, self.k),
            Role::Parking => write!(f, "P{}({},{})k{}", self.stripe.unwrap().symbol(), self.i, self.j, self.k),
            Role::Cross => write!(f, "C({},{})p{}", self.i, self.j, self.k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DtBundleKind {
    Transit(Sign),
    /// Parking side, then departure direction.
    Start {
        k: usize,
        park: Sign,
        dir: Sign,
    },
    /// Parking side, then arrival direction.
    End {
        k: usize,
        park: Sign,
        dir: Sign,
    },
    Straight(Orient, Sign),
    /// In-orientation, in-sign, out-sign.
    Turn(Orient, Sign, Sign),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DtBundle {
    pub kind: DtBundleKind,
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for DtBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = (self.i, self.j);
        match self.kind {
            DtBundleKind::Transit(s) => write!(f, "T{}({i},{j})", s.symbol()),
            DtBundleKind::Start { k, park, dir } => write!(f, "S{}{}({i},{j})k{k}", park.symbol(), dir.symbol()),
            DtBundleKind::End { k, park, dir } => write!(f, "E{}{}({i},{j})k{k}", park.symbol(), dir.symbol()),
            DtBundleKind::Straight(o, s) => write!(f, "C{o:?}{}({i},{j})", s.symbol()),
            DtBundleKind::Turn(o, a, b) => write!(f, "C{o:?}{}{}({i},{j})", a.symbol(), b.symbol()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DownTownParams {
    pub n: usize,
    pub m: usize,
    pub slowness: SlownessSpec,
    pub wait: Exact,
    pub crc: Exact,
}

impl DownTownParams {
    pub fn unit(n: usize, m: usize) -> Self {
        DownTownParams {
            n,
            m,
            slowness: SlownessSpec::Const(Exact::from_integer(1.into())),
            wait: Exact::from_integer(1.into()),
            crc: Exact::from_integer(1.into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(MtmError::InvalidParameter(format!("n must be even and at least 2, got {}", self.n)));
        }
        if self.m == 0 {
            return Err(MtmError::InvalidParameter("m must be at least 1".into()));
        }
        let one = Exact::from_integer(1.into());
        for k in 1..=self.m {
            if self.slowness.at(k)? < one {
                return Err(MtmError::InvalidParameter(format!("slowness at k = {k} is below 1")));
            }
        }
        if self.wait < one || self.crc < one {
            return Err(MtmError::InvalidParameter("wait and crc must be at least 1".into()));
        }
        Ok(())
    }
}

/// Local cross-way cells (row, column), row-major without corners.
const CROSS_CELLS: [(usize, usize); 12] =
    [(0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2)];

fn cross_position(rc: (usize, usize)) -> usize {
    CROSS_CELLS.iter().position(|&c| c == rc).expect("not a cross-way cell") + 1
}

fn cross_shadow(kind: DtBundleKind) -> Vec<(usize, usize)> {
    use Orient::*;
    use Sign::*;
    match kind {
        DtBundleKind::Straight(H, Pos) => vec![(2, 0), (2, 1), (2, 2), (2, 3)],
        DtBundleKind::Straight(H, Neg) => vec![(1, 3), (1, 2), (1, 1), (1, 0)],
        DtBundleKind::Straight(V, Pos) => vec![(0, 1), (1, 1), (2, 1), (3, 1)],
        DtBundleKind::Straight(V, Neg) => vec![(3, 2), (2, 2), (1, 2), (0, 2)],
        DtBundleKind::Turn(H, Pos, Pos) => vec![(2, 0), (2, 1), (3, 1)],
        DtBundleKind::Turn(H, Pos, Neg) => vec![(2, 0), (2, 1), (2, 2), (1, 2), (0, 2)],
        DtBundleKind::Turn(H, Neg, Pos) => vec![(1, 3), (1, 2), (1, 1), (2, 1), (3, 1)],
        DtBundleKind::Turn(H, Neg, Neg) => vec![(1, 3), (1, 2), (0, 2)],
        DtBundleKind::Turn(V, Pos, Pos) => vec![(0, 1), (1, 1), (2, 1), (2, 2), (2, 3)],
        DtBundleKind::Turn(V, Pos, Neg) => vec![(0, 1), (1, 1), (1, 0)],
        DtBundleKind::Turn(V, Neg, Pos) => vec![(3, 2), (2, 2), (2, 3)],
        DtBundleKind::Turn(V, Neg, Neg) => vec![(3, 2), (2, 2), (1, 2), (1, 1), (1, 0)],
        _ => unreachable!("not a cross-way bundle"),
    }
}

const SIGNS: [Sign; 2] = [Sign::Pos, Sign::Neg];

fn is_block(i: usize, j: usize) -> bool {
    (i + j) % 2 == 1
}

fn is_cross(i: usize, j: usize) -> bool {
    i % 2 == 0 && j % 2 == 0
}

#[derive(Debug, Clone)]
pub struct DownTown {
    pub params: DownTownParams,
    pub system: RouteSystem,
    /// Cell of every point id.
    pub cells: Vec<DtCell>,
    /// Identity of every bundle, aligned with `system.bundles()`.
    pub bundles: Vec<DtBundle>,
    /// Start and end parking point of every route.
    pub route_ends: Vec<(PointId, PointId)>,
}

struct Layout {
    m: usize,
    base: Vec<Vec<usize>>,
}

impl Layout {
    fn new(n: usize, m: usize) -> (Self, Vec<DtCell>) {
        let mut base = vec![vec![usize::MAX; n + 1]; n + 1];
        let mut cells = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                if is_block(i, j) {
                    base[i][j] = cells.len();
                    for (role, sign) in [
                        (Role::Transit, Sign::Pos),
                        (Role::Transit, Sign::Neg),
                        (Role::Parking, Sign::Pos),
                        (Role::Parking, Sign::Neg),
                    ] {
                        for k in 1..=m {
                            cells.push(DtCell { role, i, j, stripe: Some(sign), k });
                        }
                    }
                }
            }
        }
        for i in (0..=n).step_by(2) {
            for j in (0..=n).step_by(2) {
                base[i][j] = cells.len();
                for k in 1..=12 {
                    cells.push(DtCell { role: Role::Cross, i, j, stripe: None, k });
                }
            }
        }
        (Layout { m, base }, cells)
    }

    fn block(&self, i: usize, j: usize, role: Role, sign: Sign, k: usize) -> PointId {
        let stripe = match (role, sign) {
            (Role::Transit, Sign::Pos) => 0,
            (Role::Transit, Sign::Neg) => 1,
            (Role::Parking, Sign::Pos) => 2,
            (Role::Parking, Sign::Neg) => 3,
            _ => unreachable!(),
        };
        self.base[i][j] + stripe * self.m + k - 1
    }

    fn cross(&self, i: usize, j: usize, rc: (usize, usize)) -> PointId {
        self.base[i][j] + cross_position(rc) - 1
    }

    /// Offset of grid index t along one axis in global cell units.
    fn offset(&self, t: usize) -> usize {
        (t / 2) * (4 + self.m) + if t % 2 == 1 { 4 } else { 0 }
    }

    /// Global (row, column) of a cell.
    fn global(&self, c: &DtCell) -> (i64, i64) {
        let (r0, c0) = (self.offset(c.i), self.offset(c.j));
        let (r, col) = match c.role {
            Role::Cross => CROSS_CELLS[c.k - 1],
            _ => {
                let sign = c.stripe.unwrap();
                let lane = match (c.role, sign) {
                    (Role::Parking, Sign::Neg) => 0,
                    (Role::Transit, Sign::Neg) => 1,
                    (Role::Transit, Sign::Pos) => 2,
                    _ => 3,
                };
                let along = if sign == Sign::Pos { c.k - 1 } else { self.m - c.k };
                if c.i % 2 == 0 {
                    (lane, along)
                } else {
                    // Vertical blocks mirror the lane order: positive parking on the left.
                    (along, 3 - lane)
                }
            }
        };
        ((r0 + r) as i64, (c0 + col) as i64)
    }

    fn shadow(&self, b: &DtBundle) -> Vec<PointId> {
        let (i, j, m) = (b.i, b.j, self.m);
        let t = |s: Sign, k: usize| self.block(i, j, Role::Transit, s, k);
        let p = |s: Sign, k: usize| self.block(i, j, Role::Parking, s, k);
        match b.kind {
            DtBundleKind::Transit(s) => (1..=m).map(|k| t(s, k)).collect(),
            DtBundleKind::Start { k, park, dir } => {
                let mut v = vec![p(park, k), t(park, k)];
                if dir == park {
                    v.extend((k + 1..=m).map(|h| t(park, h)));
                } else {
                    v.extend((m + 1 - k..=m).map(|h| t(dir, h)));
                }
                v
            }
            DtBundleKind::End { k, park, dir } => {
                let mut v: Vec<PointId>;
                if dir == park {
                    v = (1..=k).map(|h| t(dir, h)).collect();
                } else {
                    v = (1..=m + 1 - k).map(|h| t(dir, h)).collect();
                    v.push(t(park, k));
                }
                v.push(p(park, k));
                v
            }
            kind => cross_shadow(kind).into_iter().map(|rc| self.cross(i, j, rc)).collect(),
        }
    }
}

fn cell_slowness(p: &DownTownParams, c: &DtCell) -> Result<Exact> {
    match c.role {
        Role::Transit => p.slowness.at(c.k),
        Role::Parking => Ok(p.wait.clone()),
        Role::Cross => Ok(p.crc.clone()),
    }
}

/// Every bundle of the system, in a fixed order.
fn all_bundles(n: usize, m: usize) -> Vec<DtBundle> {
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            if is_block(i, j) {
                for s in SIGNS {
                    out.push(DtBundle { kind: DtBundleKind::Transit(s), i, j });
                }
                for k in 1..=m {
                    for park in SIGNS {
                        for dir in SIGNS {
                            out.push(DtBundle { kind: DtBundleKind::Start { k, park, dir }, i, j });
                            out.push(DtBundle { kind: DtBundleKind::End { k, park, dir }, i, j });
                        }
                    }
                }
            } else if is_cross(i, j) {
                for o in [Orient::H, Orient::V] {
                    for s in SIGNS {
                        out.push(DtBundle { kind: DtBundleKind::Straight(o, s), i, j });
                        for s2 in SIGNS {
                            out.push(DtBundle { kind: DtBundleKind::Turn(o, s, s2), i, j });
                        }
                    }
                }
            }
        }
    }
    out
}

type Unit = (i64, i64);

fn line_to(way: &mut Vec<Unit>, to: Unit) {
    let from = *way.last().unwrap();
    let (di, dj) = ((to.0 - from.0).signum(), (to.1 - from.1).signum());
    debug_assert!(di == 0 || dj == 0);
    let mut cur = from;
    while cur != to {
        cur = (cur.0 + di, cur.1 + dj);
        way.push(cur);
    }
}

/// Units visited from a horizontal start block to the end block, following
/// the driving directions. Callers transpose for vertical starts.
fn walk_from_horizontal(start: Unit, park: Sign, end: Unit) -> Vec<Unit> {
    let (i, j) = start;
    let (k, z) = end;
    let mut way = vec![start];
    if k % 2 == 1 {
        line_to(&mut way, (i, z));
        line_to(&mut way, end);
    } else if z != j && k == i {
        line_to(&mut way, end);
    } else {
        let a = if z != j {
            if i < k {
                1
            } else {
                -1
            }
        } else {
            park.value()
        };
        line_to(&mut way, (i, j + a));
        line_to(&mut way, (k, j + a));
        line_to(&mut way, end);
    }
    way
}

fn walk(start: Unit, park: Sign, end: Unit) -> Vec<Unit> {
    if start.0 % 2 == 0 {
        walk_from_horizontal(start, park, end)
    } else {
        let t = |u: Unit| (u.1, u.0);
        walk_from_horizontal(t(start), park, t(end)).into_iter().map(t).collect()
    }
}

fn heading(a: Unit, b: Unit) -> (Orient, Sign) {
    if a.0 == b.0 {
        (Orient::H, Sign::of(b.1 - a.1))
    } else {
        (Orient::V, Sign::of(b.0 - a.0))
    }
}

/// Bundle sequence of the route between two parking cells.
fn route_bundles(start: &DtCell, end: &DtCell) -> Vec<DtBundle> {
    let su = (start.i as i64, start.j as i64);
    let eu = (end.i as i64, end.j as i64);
    let way = walk(su, start.stripe.unwrap(), eu);
    let mut out = Vec::with_capacity(way.len());
    let at = |u: Unit, kind| DtBundle { kind, i: u.0 as usize, j: u.1 as usize };
    let (_, dir) = heading(way[0], way[1]);
    out.push(at(way[0], DtBundleKind::Start { k: start.k, park: start.stripe.unwrap(), dir }));
    for w in way.windows(3) {
        let (o_in, s_in) = heading(w[0], w[1]);
        let (o_out, s_out) = heading(w[1], w[2]);
        let kind = if is_cross(w[1].0 as usize, w[1].1 as usize) {
            if o_in == o_out {
                DtBundleKind::Straight(o_in, s_in)
            } else {
                DtBundleKind::Turn(o_in, s_in, s_out)
            }
        } else {
            debug_assert_eq!((o_in, s_in), (o_out, s_out));
            DtBundleKind::Transit(s_in)
        };
        out.push(at(w[1], kind));
    }
    let l = way.len();
    let (_, dir) = heading(way[l - 2], way[l - 1]);
    out.push(at(way[l - 1], DtBundleKind::End { k: end.k, park: end.stripe.unwrap(), dir }));
    out
}

/// Builds the route system: one single-path route per ordered pair of
/// parking cells in different blocks, ordered by (start id, end id).
pub fn build_downtown(p: &DownTownParams) -> Result<DownTown> {
    p.validate()?;
    let (layout, cells) = Layout::new(p.n, p.m);
    let points: Vec<Point> = cells
        .iter()
        .enumerate()
        .map(|(id, c)| Point { id, coords: Some(layout.global(c)), name: Some(c.to_string()) })
        .collect();
    let dt_bundles = all_bundles(p.n, p.m);
    let index: HashMap<DtBundle, usize> = dt_bundles.iter().enumerate().map(|(x, b)| (*b, x)).collect();
    let bundles: Vec<Bundle> = dt_bundles
        .par_iter()
        .map(|b| {
            let sh = layout.shadow(b);
            let slow: Result<Vec<Exact>> = sh.iter().map(|&u| cell_slowness(p, &cells[u])).collect();
            bundle_from_slowness(&sh, &slow?, DEFAULT_SLOWNESS_DENOMINATOR_CAP)
        })
        .collect::<Result<_>>()?;
    let parking: Vec<PointId> = (0..cells.len()).filter(|&u| cells[u].role == Role::Parking).collect();
    let per_start: Vec<Vec<((PointId, PointId), Route)>> = parking
        .par_iter()
        .map(|&a| {
            let ca = &cells[a];
            parking
                .iter()
                .filter(|&&b| (cells[b].i, cells[b].j) != (ca.i, ca.j))
                .map(|&b| {
                    let path = route_bundles(ca, &cells[b]).iter().map(|x| index[x]).collect();
                    ((a, b), Route::single(path))
                })
                .collect()
        })
        .collect();
    let mut route_ends = Vec::new();
    let mut routes = Vec::new();
    for (e, r) in per_start.into_iter().flatten() {
        route_ends.push(e);
        routes.push((r, 1));
    }
    let system = RouteSystem::new(points, bundles, routes)?;
    Ok(DownTown { params: p.clone(), system, cells, bundles: dt_bundles, route_ends })
}

impl DownTown {
    pub fn parking_count(&self) -> usize {
        self.cells.iter().filter(|c| c.role == Role::Parking).count()
    }

    /// σ-B of every bundle: the number of routes whose bundle-path contains it.
    pub fn sigma_b_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.bundles.len()];
        for (route, mult) in self.system.routes() {
            for (path, pm) in &route.paths {
                for &b in &path.bundles {
                    counts[b] += mult * pm;
                }
            }
        }
        counts
    }

    pub fn lambda_b<S: Scalar>(&self) -> S {
        lambda_b(&self.system)
    }

    /// Normalisation Λ = Λ_b / m².
    pub fn lambda<S: Scalar>(&self) -> S {
        let m = self.params.m as u64;
        self.lambda_b::<S>() / S::from_u64(m * m)
    }

    pub fn spatial<S: Scalar>(&self) -> Result<SpatialDistribution<S>> {
        spatial_balanced(&self.system)
    }

    pub fn point_of(&self, cell: &DtCell) -> Option<PointId> {
        self.cells.iter().position(|c| c == cell)
    }

    /// Summed probability of the transit cells of the vertical blocks in
    /// street column `j`.
    pub fn column_transit_mass<S: Scalar>(&self, dist: &SpatialDistribution<S>, j: usize) -> S {
        self.cells
            .iter()
            .zip(&dist.values)
            .filter(|(c, _)| c.role == Role::Transit && c.j == j && c.i % 2 == 1)
            .fold(S::zero(), |a, (_, v)| a + v.clone())
    }
}

fn ex(v: i64) -> Exact {
    Exact::from_integer(v.into())
}

fn unsupported(what: &str, i: i64, j: i64) -> MtmError {
    MtmError::UnsupportedCoordinates(format!("{what} at ({i},{j})"))
}

fn transit_eta(n: i64, m: i64, i: i64, j: i64) -> Result<Exact> {
    if i % 2 != 0 || j % 2 == 0 || !(0..=n).contains(&i) || !(0..=n).contains(&j) {
        return Err(unsupported("transit count", i, j));
    }
    let m2 = ex(m * m);
    let half = Exact::new(1.into(), 2.into());
    let v = if i == 0 {
        ex((n - j + 1) * (n * j)) - ex(n - j + 1) * ex(3) * half * ex(j + 1) + ex((n - j - 1) * (n * j + 2 * j + n))
    } else if i == n {
        ex((n - j + 1) * (n * j)) - ex(n - j + 1) * ex(n + 1) * half * ex(j + 1) + ex((n - j - 1) * (n * j + 2 * j))
    } else {
        ex((n - j + 1) * (n * j - (j + 1)) + (n - j - 1) * (n * j + 2 * j + n - i))
    };
    Ok(m2 * v)
}

fn transit_pos(n: i64, m: i64, i: i64, j: i64) -> Result<Exact> {
    if i % 2 == 0 && j % 2 != 0 {
        transit_eta(n, m, i, j)
    } else if i % 2 != 0 && j % 2 == 0 {
        transit_eta(n, m, j, i)
    } else {
        Err(unsupported("transit count", i, j))
    }
}

fn cross_hpp(n: i64, m: i64, i: i64, j: i64) -> Result<Exact> {
    if i % 2 != 0 || j % 2 != 0 || i == n || j == 0 || !(0..=n).contains(&i) || !(0..=n).contains(&j) {
        return Err(unsupported("cross H++ count", i, j));
    }
    Ok(ex(m * m * (n * n - n + (2 * n - 1) * j - (n - 1) * i - 2 * i * j)))
}

fn cross_hp(n: i64, m: i64, i: i64, j: i64) -> Result<Exact> {
    if i % 2 != 0 || j % 2 != 0 || j == 0 || j == n || !(0..=n).contains(&i) || !(0..=n).contains(&j) {
        return Err(unsupported("cross H+ count", i, j));
    }
    let m2 = ex(m * m);
    let v = if i == 0 {
        ex(n - j) * (ex(2 * n * j) + Exact::new(j.into(), 2.into()))
    } else if i == n {
        ex(n - j) * (Exact::new((3 * j * (n + 1)).into(), 2.into()) - ex(n))
    } else {
        ex((n - j) * (2 * n * j - i + j))
    };
    Ok(m2 * v)
}

fn cross_hpm(n: i64, m: i64, i: i64, j: i64) -> Result<Exact> {
    if i % 2 != 0 || j % 2 != 0 || j == 0 || i == 0 || !(0..=n).contains(&i) || !(0..=n).contains(&j) {
        return Err(unsupported("cross H+- count", i, j));
    }
    let v = if i == n { n * j + n + j } else { 2 * i * j + i + j };
    Ok(ex(m * m * v))
}

/// Published σ-B count for a bundle. Border and parity cases without a
/// printed formula give `UnsupportedCoordinates`.
pub fn sigma_b_formula(n: usize, m: usize, b: &DtBundle) -> Result<Exact> {
    let (n, m, i, j) = (n as i64, m as i64, b.i as i64, b.j as i64);
    use Orient::*;
    use Sign::*;
    // Start and end formulas are written for horizontal blocks; vertical
    // blocks use i in place of j.
    let along = if i % 2 == 0 { j } else { i };
    match b.kind {
        DtBundleKind::Transit(Pos) => transit_pos(n, m, i, j),
        DtBundleKind::Transit(Neg) => transit_pos(n, m, n - j, i),
        DtBundleKind::Start { park, dir, .. } => Ok(ex(match (park, dir) {
            (Pos, Pos) => m * ((n + 1) * (n - along + 1) - 2),
            (Neg, Neg) => m * ((n + 1) * (along + 1) - 2),
            (Pos, Neg) => m * ((n + 1) * along - 1),
            (Neg, Pos) => m * ((n + 1) * (n - along) - 1),
        })),
        DtBundleKind::End { park, dir, .. } => Ok(ex(match (park, dir) {
            (Pos, Pos) | (Neg, Pos) => m * ((n + 1) * along + n / 2 - 1),
            (Neg, Neg) | (Pos, Neg) => m * ((n + 1) * (n - along) + n / 2 - 1),
        })),
        DtBundleKind::Turn(H, Pos, Pos) => cross_hpp(n, m, i, j),
        DtBundleKind::Turn(V, Pos, Neg) => cross_hpp(n, m, n - j, i),
        DtBundleKind::Turn(H, Neg, Neg) => cross_hpp(n, m, n - i, n - j),
        DtBundleKind::Turn(V, Neg, Pos) => cross_hpp(n, m, j, n - i),
        DtBundleKind::Straight(H, Pos) => cross_hp(n, m, i, j),
        DtBundleKind::Straight(V, Pos) => cross_hp(n, m, n - j, i),
        DtBundleKind::Straight(H, Neg) => cross_hp(n, m, n - i, n - j),
        DtBundleKind::Straight(V, Neg) => cross_hp(n, m, j, n - i),
        DtBundleKind::Turn(H, Pos, Neg) => cross_hpm(n, m, i, j),
        DtBundleKind::Turn(V, Pos, Pos) => cross_hpm(n, m, n - j, i),
        DtBundleKind::Turn(H, Neg, Pos) => cross_hpm(n, m, n - i, n - j),
        DtBundleKind::Turn(V, Neg, Neg) => cross_hpm(n, m, j, n - i),
    }
}

/// Published closed-form probability of a cell, given Λ_b of the system.
/// Covered: positive transit cells of interior horizontal blocks, every
/// parking cell, and the cross-way cell where the positive horizontal lane
/// meets the negative vertical lane (position 9) at interior cross-ways.
pub fn closed_spatial(p: &DownTownParams, cell: &DtCell, lambda_b: &Exact) -> Result<Exact> {
    let (n, m) = (p.n as i64, p.m as i64);
    let (i, j) = (cell.i as i64, cell.j as i64);
    let lambda = lambda_b / ex(m * m);
    match cell.role {
        Role::Transit if cell.stripe == Some(Sign::Pos) && i % 2 == 0 && i != 0 && i != n => {
            let k = cell.k as i64;
            let a = ex((n - j) * (2 * n * j + j + n - i - 1) + (n - 2) * j - n / 2 + i - 2);
            let b = ex(n * (n + 1) + n / 2 - 2 * (n + 1) * j);
            let c = ex((n + 1) * (n + j) + n - 3);
            let inner = a + Exact::new(k.into(), m.into()) * b + c / ex(m);
            Ok(p.slowness.at(cell.k)? / lambda * inner)
        }
        Role::Parking => Ok(p.wait.clone() / lambda * Exact::new((2 * n * n + 4 * n - 4).into(), m.into())),
        Role::Cross if cell.k == 9 && i != 0 && i != n && j != 0 && j != n => {
            let v = n * n * (2 * j + 2 * i + 3) - 2 * n * (j * j + i * i + j + i + 1) - (i - j) * (i - j)
                + 2 * (i * j + j + i);
            Ok(p.crc.clone() / lambda * ex(v))
        }
        _ => Err(MtmError::BoundaryCellNotCovered(cell.to_string())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrataEntry {
    pub formula: String,
    pub target: String,
    pub coords: (usize, usize),
    pub formula_value: String,
    pub reference_value: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrataReport {
    pub n: usize,
    pub m: usize,
    pub bundle_checks: usize,
    pub bundle_mismatches: usize,
    pub bundles_not_covered: usize,
    pub cell_checks: usize,
    pub cell_mismatches: usize,
    pub cells_not_covered: usize,
    pub entries: Vec<ErrataEntry>,
}

fn formula_name(b: &DtBundle) -> String {
    let s = |x: Sign| x.symbol();
    match b.kind {
        DtBundleKind::Transit(x) => format!("transit{}", s(x)),
        DtBundleKind::Start { park, dir, .. } => format!("start{}{}", s(park), s(dir)),
        DtBundleKind::End { park, dir, .. } => format!("end{}{}", s(park), s(dir)),
        DtBundleKind::Straight(o, x) => format!("cross {o:?}{}", s(x)),
        DtBundleKind::Turn(o, a, c) => format!("cross {o:?}{}{}", s(a), s(c)),
    }
}

/// Checks every published count and cell formula against the route
/// system: σ-B by route traversal, cell probabilities by the balanced
/// closed form on the built system.
pub fn errata_report(dt: &DownTown) -> Result<ErrataReport> {
    let p = &dt.params;
    let counts = dt.sigma_b_counts();
    let mut report = ErrataReport {
        n: p.n,
        m: p.m,
        bundle_checks: 0,
        bundle_mismatches: 0,
        bundles_not_covered: 0,
        cell_checks: 0,
        cell_mismatches: 0,
        cells_not_covered: 0,
        entries: Vec::new(),
    };
    for (b, &count) in dt.bundles.iter().zip(&counts) {
        match sigma_b_formula(p.n, p.m, b) {
            Ok(v) => {
                report.bundle_checks += 1;
                let actual = ex(count as i64);
                if v != actual {
                    report.bundle_mismatches += 1;
                    report.entries.push(ErrataEntry {
                        formula: formula_name(b),
                        target: b.to_string(),
                        coords: (b.i, b.j),
                        formula_value: v.render(),
                        reference_value: actual.render(),
                    });
                }
            }
            Err(_) => report.bundles_not_covered += 1,
        }
    }
    let spatial = dt.spatial::<Exact>()?;
    let lb = dt.lambda_b::<Exact>();
    for (cell, actual) in dt.cells.iter().zip(&spatial.values) {
        match closed_spatial(p, cell, &lb) {
            Ok(v) => {
                report.cell_checks += 1;
                if &v != actual {
                    report.cell_mismatches += 1;
                    let formula = match cell.role {
                        Role::Transit => "cell transit+",
                        Role::Parking => "cell parking",
                        Role::Cross => "cell cross(+,-)",
                    };
                    report.entries.push(ErrataEntry {
                        formula: formula.into(),
                        target: cell.to_string(),
                        coords: (cell.i, cell.j),
                        formula_value: v.render(),
                        reference_value: actual.render(),
                    });
                }
            }
            Err(_) => report.cells_not_covered += 1,
        }
    }
    Ok(report)
}

/// Relative deviation |formula − reference| / reference, for reports.
pub fn relative_deviation(formula: &Exact, reference: &Exact) -> f64 {
    if reference.is_zero() {
        return if formula.is_zero() { 0.0 } else { f64::INFINITY };
    }
    Scalar::to_f64(&((formula - reference) / reference)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::is_balanced_rs;

    #[test]
    fn route_count_and_balance() {
        for (n, m) in [(2, 1), (2, 2)] {
            let dt = build_downtown(&DownTownParams::unit(n, m)).unwrap();
            let p = dt.parking_count() as u64;
            assert_eq!(p, (n * (n + 2) / 2 * 2 * m) as u64);
            assert_eq!(dt.system.route_count(), p * (p - 2 * m as u64));
            assert!(is_balanced_rs(&dt.system));
            assert!(dt.system.is_strongly_connected());
        }
    }

    #[test]
    fn paths_are_contiguous_and_distinct() {
        let dt = build_downtown(&DownTownParams::unit(4, 2)).unwrap();
        let (layout, _) = Layout::new(4, 2);
        for (route, _) in dt.system.routes() {
            let path = &route.paths[0].0.bundles;
            let mut seen = path.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), path.len());
            let cells: Vec<PointId> = path.iter().flat_map(|&b| dt.system.bundles()[b].shadow().to_vec()).collect();
            for w in cells.windows(2) {
                let (a, b) = (layout.global(&dt.cells[w[0]]), layout.global(&dt.cells[w[1]]));
                assert_eq!((a.0 - b.0).abs() + (a.1 - b.1).abs(), 1, "{} -> {}", dt.cells[w[0]], dt.cells[w[1]]);
            }
        }
    }

    #[test]
    fn global_coordinates_are_distinct() {
        let (layout, cells) = Layout::new(4, 3);
        let mut g: Vec<_> = cells.iter().map(|c| layout.global(c)).collect();
        g.sort_unstable();
        g.dedup();
        assert_eq!(g.len(), cells.len());
    }

    #[test]
    fn published_start_and_end_examples() {
        let b = |kind| DtBundle { kind, i: 0, j: 1 };
        let s = sigma_b_formula(2, 2, &b(DtBundleKind::Start { k: 1, park: Sign::Pos, dir: Sign::Pos })).unwrap();
        assert_eq!(s, ex(8));
        let e = sigma_b_formula(2, 2, &b(DtBundleKind::End { k: 1, park: Sign::Pos, dir: Sign::Pos })).unwrap();
        assert_eq!(e, ex(6));
    }

    #[test]
    fn parking_formula_is_uniform() {
        let p = DownTownParams::unit(4, 2);
        let lb = ex(1000);
        let cells = Layout::new(4, 2).1;
        let vals: Vec<Exact> =
            cells.iter().filter(|c| c.role == Role::Parking).map(|c| closed_spatial(&p, c, &lb).unwrap()).collect();
        assert!(vals.iter().all(|v| *v == vals[0]));
        let border = DtCell { role: Role::Transit, i: 0, j: 1, stripe: Some(Sign::Pos), k: 1 };
        assert!(matches!(closed_spatial(&p, &border, &lb), Err(MtmError::BoundaryCellNotCovered(_))));
    }

    #[test]
    fn invalid_params() {
        assert!(build_downtown(&DownTownParams::unit(3, 1)).is_err());
        assert!(build_downtown(&DownTownParams::unit(2, 0)).is_err());
    }
}
