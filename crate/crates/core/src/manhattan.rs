//! Manhattan random way-point on an N×N grid: one-corner paths between
//! distinct cells, uniform selection.
//!
//! Cell (i, j) has point id `i * N + j`. The continuum formulas map i to x
//! and j to y.
//!
//! Two counting conventions coexist. Convention A is the one behind the
//! closed forms [`eta`], [`gamma`] and [`spatial_closed`]: a path from u
//! counts a visit at every index including its start, and each cell also
//! owns one degenerate single-cell path. Convention B counts chain states
//! only (start excluded, end included, no degenerate path); it is the one
//! under which the spatial distribution sums to one.

use serde::{Deserialize, Serialize};

use crate::error::{MtmError, Result};
use crate::scalar::{Exact, Scalar};
use crate::trace::{MTModel, Point, TraceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CountingConvention {
    A,
    #[default]
    B,
}

impl std::str::FromStr for CountingConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(CountingConvention::A),
            "B" | "b" => Ok(CountingConvention::B),
            other => Err(format!("unknown counting convention '{other}'")),
        }
    }
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManhattanParams {
    pub n: usize,
    pub side: f64,
    pub cell: f64,
}

impl ManhattanParams {
    /// N = ⌈L/ε⌉.
    pub fn from_lengths(side: f64, cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !(side > 0.0) {
            return Err(MtmError::InvalidParameter("lengths must be positive".into()));
        }
        let n = (side / cell).ceil() as usize;
        if n < 2 {
            return Err(MtmError::InvalidParameter(format!("grid side {n} is below 2")));
        }
        Ok(ManhattanParams { n, side, cell })
    }
}

pub fn cell_id(n: usize, c: Cell) -> usize {
    c.0 * n + c.1
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(MtmError::InvalidParameter(format!("N must be at least 2, got {n}")));
    }
    Ok(())
}

fn line(from: usize, to: usize) -> Box<dyn Iterator<Item = usize>> {
    if to >= from {
        Box::new(from..=to)
    } else {
        Box::new((to..=from).rev())
    }
}

/// The one-corner paths from `s` to `t` (s ≠ t): one if the cells share a
/// row or column, otherwise the j-first and the i-first path.
pub fn paths(s: Cell, t: Cell) -> Vec<Vec<Cell>> {
    let (a, b) = s;
    let (c, d) = t;
    if a == c {
        return vec![line(b, d).map(|j| (a, j)).collect()];
    }
    if b == d {
        return vec![line(a, c).map(|i| (i, b)).collect()];
    }
    let j_first = line(b, d).map(|j| (a, j)).chain(line(a, c).skip(1).map(|i| (i, d))).collect();
    let i_first = line(a, c).map(|i| (i, b)).chain(line(b, d).skip(1).map(|j| (c, j))).collect();
    vec![j_first, i_first]
}

/// The Manhattan model with the uniform rule. Simple, balanced, uniformly
/// selective and strongly connected.
pub fn build_manhattan<S: Scalar>(n: usize) -> Result<MTModel<S>> {
    check_n(n)?;
    let points =
        (0..n * n).map(|id| Point { id, coords: Some(((id / n) as i64, (id % n) as i64)), name: None }).collect();
    let mut traces = Vec::with_capacity(2 * n * n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if (a, b) == (c, d) {
                        continue;
                    }
                    for p in paths((a, b), (c, d)) {
                        traces.push(p.into_iter().map(|x| cell_id(n, x)).collect());
                    }
                }
            }
        }
    }
    Ok(MTModel::uniform(TraceSet::build_with_points(points, traces)?))
}

/// η(from, at): convention-A number of paths from `from` visiting `at`.
pub fn eta(n: usize, from: Cell, at: Cell) -> i64 {
    let n = n as i64;
    let (ip, jp) = (from.0 as i64, from.1 as i64);
    let (i, j) = (at.0 as i64, at.1 as i64);
    use std::cmp::Ordering::*;
    match (ip.cmp(&i), jp.cmp(&j)) {
        (Less, Less) => 2 * n - i - j,
        (Greater, Greater) => i + j + 2,
        (Less, Greater) => n + 1 - i + j,
        (Greater, Less) => n + 1 + i - j,
        (Equal, Less) => n * n - n * j,
        (Less, Equal) => n * n - n * i,
        (Equal, Greater) => n + n * j,
        (Greater, Equal) => n + n * i,
        (Equal, Equal) => 2 * n * n - 2 * n + 1,
    }
}

/// Γ(i,j) = Σ_{from} η(from, (i,j)).
pub fn gamma(n: usize, at: Cell) -> i64 {
    let n = n as i64;
    let (i, j) = (at.0 as i64, at.1 as i64);
    (4 * n * n - 6 * n + 2) * (i + j) - (4 * n - 2) * (i * i + j * j) + 6 * n * n - 8 * n + 3
}

/// |S(𝒯)| = (N⁴−N²)(4N−2)/3.
pub fn state_count(n: usize) -> u128 {
    let n = n as u128;
    (n * n * n * n - n * n) * (4 * n - 2) / 3
}

/// |𝒯| = N²(2N²−2N): every cell starts 2N²−2N paths.
pub fn trace_count(n: usize) -> u128 {
    let n = n as u128;
    n * n * (2 * n * n - 2 * n)
}

/// Closed-form spatial value 3Γ(i,j)/((N⁴−N²)(4N−2)). Uses convention A,
/// so it does not sum to one at finite N.
pub fn spatial_closed(n: usize, at: Cell) -> Exact {
    let nn = n as i64;
    let den = (nn * nn * nn * nn - nn * nn) * (4 * nn - 2);
    Exact::from_ratio(3 * gamma(n, at), den)
}

/// Closed-form destination probability η(dest, at)/Γ(at), convention A.
pub fn dest_closed(n: usize, at: Cell, dest: Cell) -> Exact {
    Exact::from_ratio(eta(n, dest, at), gamma(n, at))
}

/// Convention-B |𝒯_u| for every cell, by difference arrays over all paths.
/// O(N⁴) time, O(N²) memory; independent of the model builder.
pub fn visiting_counts(n: usize) -> Vec<u64> {
    let mut rows = vec![vec![0i64; n + 1]; n];
    let mut cols = vec![vec![0i64; n + 1]; n];
    // Counted cells of the run from `from` (excluded) to `to` (included).
    let run = |grid: &mut Vec<Vec<i64>>, fixed: usize, from: usize, to: usize| {
        let (lo, hi) = if to > from { (from + 1, to) } else { (to, from - 1) };
        grid[fixed][lo] += 1;
        grid[fixed][hi + 1] -= 1;
    };
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if (a, b) == (c, d) {
                        continue;
                    }
                    if a == c {
                        run(&mut rows, a, b, d);
                    } else if b == d {
                        run(&mut cols, b, a, c);
                    } else {
                        run(&mut rows, a, b, d);
                        run(&mut cols, d, a, c);
                        run(&mut cols, b, a, c);
                        run(&mut rows, c, b, d);
                    }
                }
            }
        }
    }
    let mut counts = vec![0u64; n * n];
    for i in 0..n {
        let mut acc = 0i64;
        for j in 0..n {
            acc += rows[i][j];
            counts[i * n + j] += acc as u64;
        }
    }
    for j in 0..n {
        let mut acc = 0i64;
        for i in 0..n {
            acc += cols[j][i];
            counts[i * n + j] += acc as u64;
        }
    }
    counts
}

/// Convention-B spatial distribution |𝒯_u|/|S(𝒯)| without building traces.
pub fn spatial_exact(n: usize) -> Result<Vec<Exact>> {
    check_n(n)?;
    let s = Exact::from_integer(state_count(n).into());
    Ok(visiting_counts(n).into_iter().map(|c| Exact::from_integer(c.into()) / s.clone()).collect())
}

/// Continuum spatial density s(x,y) = 3/L³(x+y) − 3/L⁴(x²+y²).
pub fn density_spatial(side: f64, x: f64, y: f64) -> f64 {
    3.0 / side.powi(3) * (x + y) - 3.0 / side.powi(4) * (x * x + y * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossSide {
    Origin,
    South,
    West,
    North,
    East,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DestDensity {
    Quadrant(f64),
    /// The density is infinite on the cross through the conditioning point;
    /// its mass is given by [`cross_probabilities`].
    Cross(CrossSide),
}

fn conditioning_denominator(side: f64, x0: f64, y0: f64) -> Result<f64> {
    let d = side * (x0 + y0) - (x0 * x0 + y0 * y0);
    if d <= 0.0 {
        return Err(MtmError::DegenerateConditioning);
    }
    Ok(d)
}

/// Continuum destination density at `dest` for an agent at `at`.
pub fn density_dest(side: f64, at: (f64, f64), dest: (f64, f64)) -> Result<DestDensity> {
    let (x0, y0) = at;
    let (x, y) = dest;
    let d = 4.0 * side * conditioning_denominator(side, x0, y0)?;
    use std::cmp::Ordering::*;
    let ord = |a: f64, b: f64| a.partial_cmp(&b).unwrap_or(Equal);
    Ok(match (ord(x, x0), ord(y, y0)) {
        (Less, Less) => DestDensity::Quadrant((2.0 * side - x0 - y0) / d),
        (Greater, Greater) => DestDensity::Quadrant((x0 + y0) / d),
        (Less, Greater) => DestDensity::Quadrant((side - x0 + y0) / d),
        (Greater, Less) => DestDensity::Quadrant((side + x0 - y0) / d),
        (Equal, Equal) => DestDensity::Cross(CrossSide::Origin),
        (Equal, Less) => DestDensity::Cross(CrossSide::South),
        (Less, Equal) => DestDensity::Cross(CrossSide::West),
        (Equal, Greater) => DestDensity::Cross(CrossSide::North),
        (Greater, Equal) => DestDensity::Cross(CrossSide::East),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossProbabilities {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
    /// Uniform conditional densities along each segment.
    pub south_density: f64,
    pub west_density: f64,
    pub north_density: f64,
    pub east_density: f64,
}

impl CrossProbabilities {
    pub fn total(&self) -> f64 {
        self.south + self.west + self.north + self.east
    }
}

pub fn cross_probabilities(side: f64, x0: f64, y0: f64) -> Result<CrossProbabilities> {
    let d = 4.0 * conditioning_denominator(side, x0, y0)?;
    let ns = y0 * (side - y0) / d;
    let we = x0 * (side - x0) / d;
    Ok(CrossProbabilities {
        south: ns,
        west: we,
        north: ns,
        east: we,
        south_density: 1.0 / y0,
        west_density: 1.0 / x0,
        north_density: 1.0 / (side - y0),
        east_density: 1.0 / (side - x0),
    })
}

/// Exact version of the cross masses, used to check Σφ = 1/2 without
/// rounding.
pub fn cross_probabilities_exact(side: &Exact, x0: &Exact, y0: &Exact) -> Result<[Exact; 4]> {
    let d = side.clone() * (x0.clone() + y0.clone()) - (x0.clone() * x0.clone() + y0.clone() * y0.clone());
    if d <= Exact::from_ratio(0, 1) {
        return Err(MtmError::DegenerateConditioning);
    }
    let four = Exact::from_ratio(4, 1);
    let ns = y0.clone() * (side.clone() - y0.clone()) / (four.clone() * d.clone());
    let we = x0.clone() * (side.clone() - x0.clone()) / (four * d);
    Ok([ns.clone(), we.clone(), ns, we])
}

/// Physical centre of cell index `k` on a side of length L split in N cells.
pub fn cell_centre(side: f64, n: usize, k: usize) -> f64 {
    (k as f64 + 0.5) * side / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_kernel, lambda_psi};

    fn r(a: i64, b: i64) -> Exact {
        Exact::from_ratio(a, b)
    }

    #[test]
    fn two_by_two() {
        let m = build_manhattan::<Exact>(2).unwrap();
        assert_eq!(m.trace_set().len(), 16);
        assert_eq!(m.state_count(), 24);
        assert_eq!(m.trace_set().out_traces(0).len(), 4);
        let k = build_kernel(&m);
        assert_eq!(k.prob(0, 3), r(1, 2));
        assert_eq!(lambda_psi(&m)[0], r(3, 2));
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(eta(2, (1, 1), (0, 0)), 2);
        assert_eq!(eta(2, (0, 1), (0, 0)), 2);
        assert_eq!(eta(2, (0, 0), (0, 0)), 5);
        assert_eq!(gamma(2, (0, 0)), 11);
        assert_eq!(state_count(2), 24);
        assert_eq!(state_count(3), 240);
        assert_eq!(spatial_closed(2, (0, 0)), r(11, 24));
        assert_eq!(dest_closed(2, (0, 0), (1, 1)), r(2, 11));
    }

    #[test]
    fn state_count_is_integral() {
        for n in 2u128..=100 {
            assert_eq!((n.pow(4) - n * n) * (4 * n - 2) % 3, 0);
        }
    }

    #[test]
    fn gamma_is_sum_of_eta() {
        for n in 2..7 {
            for i in 0..n {
                for j in 0..n {
                    let s: i64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|f| eta(n, f, (i, j))).sum();
                    assert_eq!(s, gamma(n, (i, j)));
                }
            }
        }
    }

    #[test]
    fn fast_counts_match_trace_set() {
        for n in 2..6 {
            let m = build_manhattan::<f64>(n).unwrap();
            assert_eq!(visiting_counts(n), crate::distributions::visiting_counts(m.trace_set()));
            assert_eq!(m.state_count() as u128, state_count(n));
            assert_eq!(m.trace_set().len() as u128, trace_count(n));
        }
    }

    #[test]
    fn densities() {
        let l = 2.0;
        assert!((density_spatial(l, 1.0, 1.0) - 3.0 / (2.0 * l * l)).abs() < 1e-15);
        match density_dest(l, (1.0, 1.0), (0.5, 0.5)).unwrap() {
            DestDensity::Quadrant(v) => assert!((v - 1.0 / (2.0 * l * l)).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(density_dest(l, (1.0, 1.0), (1.0, 0.2)).unwrap(), DestDensity::Cross(CrossSide::South));
        assert_eq!(density_dest(l, (0.0, 0.0), (1.0, 1.0)).unwrap_err(), MtmError::DegenerateConditioning);
        let c = cross_probabilities(l, 1.0, 1.0).unwrap();
        assert!((c.south - 0.125).abs() < 1e-15 && (c.total() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrant_masses_sum_to_half() {
        let (l, x0, y0) = (1.0, 0.3, 0.7);
        let q = |x: f64, y: f64| match density_dest(l, (x0, y0), (x, y)).unwrap() {
            DestDensity::Quadrant(v) => v,
            _ => unreachable!(),
        };
        let mass = q(0.1, 0.1) * x0 * y0
            + q(0.9, 0.9) * (l - x0) * (l - y0)
            + q(0.1, 0.9) * x0 * (l - y0)
            + q(0.9, 0.1) * (l - x0) * y0;
        assert!((mass - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exact_cross_sum() {
        let s = cross_probabilities_exact(&r(1, 1), &r(1, 3), &r(3, 4)).unwrap();
        let total = s.iter().fold(r(0, 1), |a, b| a + b.clone());
        assert_eq!(total, r(1, 2));
    }
}
