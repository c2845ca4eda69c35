//! Dense elimination and lazy power iteration for stationary vectors.

use crate::scalar::Scalar;

/// Solves `a x = b` by Gaussian elimination. Floats use partial pivoting on
/// magnitude; rationals take the first non-zero pivot. Returns `None` when
/// the matrix is singular.
pub fn solve_dense<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = if S::is_exact() {
            (col..n).find(|&r| !a[r][col].is_zero())?
        } else {
            let (r, mag) = (col..n).map(|r| (r, a[r][col].to_f64().abs())).max_by(|x, y| x.1.total_cmp(&y.1))?;
            if mag == 0.0 {
                return None;
            }
            r
        };
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = S::one() / a[col][col].clone();
        let (head, tail) = a.split_at_mut(col + 1);
        let prow = &head[col];
        let bp = b[col].clone();
        for (off, row) in tail.iter_mut().enumerate() {
            if row[col].is_zero() {
                continue;
            }
            let f = row[col].clone() * inv.clone();
            for c in col..n {
                if !prow[c].is_zero() {
                    row[c] = row[c].clone() - f.clone() * prow[c].clone();
                }
            }
            let r = col + 1 + off;
            b[r] = b[r].clone() - f * bp.clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            if !a[r][c].is_zero() {
                acc = acc - a[r][c].clone() * x[c].clone();
            }
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}

/// Stationary vector of the row-stochastic sparse matrix `rows` (one closed
/// class) by dense solve of σ(K − I) = 0 with Σσ = 1.
pub fn stationary_direct<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Option<Vec<S>> {
    let n = rows.len();
    // Transposed system: column u of (K - I) becomes row u.
    let mut a = vec![vec![S::zero(); n]; n];
    for (u, row) in rows.iter().enumerate() {
        for (v, p) in row {
            a[*v][u] = a[*v][u].clone() + p.clone();
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = row[i].clone() - S::one();
    }
    a[n - 1] = vec![S::one(); n];
    let mut b = vec![S::zero(); n];
    b[n - 1] = S::one();
    solve_dense(a, b)
}

/// Power iteration on the lazy chain (K + I)/2, which has the same
/// stationary vector as K and is aperiodic.
pub fn stationary_power(rows: &[Vec<(usize, f64)>], tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        for (v, nx) in next.iter_mut().enumerate() {
            *nx = 0.5 * x[v];
        }
        for (u, row) in rows.iter().enumerate() {
            let half = 0.5 * x[u];
            for &(v, p) in row {
                next[v] += half * p;
            }
        }
        let total: f64 = next.iter().sum();
        let mut delta = 0.0;
        for (a, b) in next.iter_mut().zip(x.iter()) {
            *a /= total;
            delta += (*a - *b).abs();
        }
        std::mem::swap(&mut x, &mut next);
        if delta < tol {
            return Some(x);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn solves_small_system_exactly() {
        let r = |a, b| Exact::from_ratio(a, b);
        let a = vec![vec![r(0, 1), r(2, 1)], vec![r(1, 1), r(1, 1)]];
        let x = solve_dense(a, vec![r(4, 1), r(3, 1)]).unwrap();
        assert_eq!(x, vec![r(1, 1), r(2, 1)]);
    }

    #[test]
    fn singular_is_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn periodic_chain_power_iteration() {
        let rows = vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]];
        let x = stationary_power(&rows, 1e-13, 100_000).unwrap();
        for v in x {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_matches_power() {
        let rows = vec![vec![(0, 0.2), (1, 0.8)], vec![(0, 0.5), (2, 0.5)], vec![(0, 1.0)]];
        let d = stationary_direct(&rows).unwrap();
        let p = stationary_power(&rows, 1e-14, 1_000_000).unwrap();
        for (a, b) in d.iter().zip(p.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
