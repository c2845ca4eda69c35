//! Kernel chain, stationary solves, lift/project between kernel and full
//! chain, and the connectivity and uniformity tests.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{MtmError, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::trace::{MTModel, PointId};

/// Above this many states a float solve switches from dense elimination to
/// lazy power iteration.
pub const DENSE_FLOAT_LIMIT: usize = 2_000;
pub const POWER_TOLERANCE: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 1_000_000;

/// The way-point chain over P(𝒯). Rows are sparse and indexed by position
/// in `states`.
#[derive(Debug, Clone)]
pub struct KernelChain<S> {
    states: Vec<PointId>,
    position: Vec<Option<usize>>,
    rows: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> KernelChain<S> {
    /// Rows indexed by position in `states`.
    pub(crate) fn from_parts(num_points: usize, states: Vec<PointId>, rows: Vec<Vec<(usize, S)>>) -> Self {
        let mut position = vec![None; num_points];
        for (a, &u) in states.iter().enumerate() {
            position[u] = Some(a);
        }
        KernelChain { states, position, rows }
    }

    pub fn states(&self) -> &[PointId] {
        &self.states
    }

    pub fn rows(&self) -> &[Vec<(usize, S)>] {
        &self.rows
    }

    pub fn num_points(&self) -> usize {
        self.position.len()
    }

    /// K(u, v) by point id.
    pub fn prob(&self, u: PointId, v: PointId) -> S {
        let (Some(a), Some(b)) = (self.position[u], self.position[v]) else {
            return S::zero();
        };
        self.rows[a].iter().find(|(c, _)| *c == b).map(|(_, p)| p.clone()).unwrap_or_else(S::zero)
    }

    /// Dense matrix over `states`.
    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let n = self.states.len();
        let mut m = vec![vec![S::zero(); n]; n];
        for (a, row) in self.rows.iter().enumerate() {
            for (b, p) in row {
                m[a][*b] = p.clone();
            }
        }
        m
    }

    /// σK, both indexed by point id.
    pub fn apply(&self, sigma: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.num_points()];
        for (a, row) in self.rows.iter().enumerate() {
            let s = &sigma[self.states[a]];
            if s.is_zero() {
                continue;
            }
            for (b, p) in row {
                let v = self.states[*b];
                out[v] = out[v].clone() + s.clone() * p.clone();
            }
        }
        out
    }

    /// max |σK − σ|.
    pub fn residual(&self, sigma: &[S]) -> S {
        let next = self.apply(sigma);
        next.iter().zip(sigma).map(|(a, b)| (a.clone() - b.clone()).abs_value()).fold(S::zero(), |m, x| {
            if x > m {
                x
            } else {
                m
            }
        })
    }

    fn graph(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::with_capacity(self.states.len(), 0);
        let nodes: Vec<_> = (0..self.states.len()).map(|_| g.add_node(())).collect();
        for (a, row) in self.rows.iter().enumerate() {
            for (b, p) in row {
                if !p.is_zero() {
                    g.add_edge(nodes[a], nodes[*b], ());
                }
            }
        }
        g
    }

    /// Strongly connected components as sorted lists of state positions,
    /// with a flag telling whether each one is closed (terminal).
    pub fn components(&self) -> Vec<(Vec<usize>, bool)> {
        let g = self.graph();
        let mut comp_of = vec![0usize; self.states.len()];
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        for (ci, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = ci;
            }
        }
        comps
            .into_iter()
            .enumerate()
            .map(|(ci, c)| {
                let closed = c.iter().all(|&a| self.rows[a].iter().all(|(b, p)| p.is_zero() || comp_of[*b] == ci));
                (c, closed)
            })
            .collect()
    }
}

/// K(u,v) = Σ_{T ∈ Trips(u,v)} ψ_u(T).
pub fn build_kernel<S: Scalar>(mtm: &MTModel<S>) -> KernelChain<S> {
    let ts = mtm.trace_set();
    let states = ts.start_points();
    let mut position = vec![None; ts.num_points()];
    for (a, &u) in states.iter().enumerate() {
        position[u] = Some(a);
    }
    let rows = states
        .iter()
        .map(|&u| {
            let mut row: Vec<(usize, S)> = Vec::new();
            for &t in ts.out_traces(u) {
                let b = position[ts.trace(t).end()].expect("trace set is endless");
                let p = mtm.rule().psi(t).clone();
                match row.iter_mut().find(|(c, _)| *c == b) {
                    Some(entry) => entry.1 = entry.1.clone() + p,
                    None => row.push((b, p)),
                }
            }
            row.sort_by_key(|(c, _)| *c);
            row
        })
        .collect();
    KernelChain { states, position, rows }
}

/// Λ_Ψ(u) = Σ_{T ∈ Out(u)} (|T|−1) ψ_u(T), by point id (zero off P(𝒯)).
pub fn lambda_psi<S: Scalar>(mtm: &MTModel<S>) -> Vec<S> {
    let ts = mtm.trace_set();
    (0..ts.num_points())
        .map(|u| {
            ts.out_traces(u).iter().fold(S::zero(), |acc, &t| {
                acc + S::from_u64((ts.trace(t).len() - 1) as u64) * mtm.rule().psi(t).clone()
            })
        })
        .collect()
}

/// A kernel stationary vector σ, indexed by point id (zero off P(𝒯)).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelStationary<S> {
    pub values: Vec<S>,
}

/// A full-chain stationary vector. Since π(⟨T,i⟩) = π(⟨T,1⟩) it is stored
/// once per trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullStationary<S> {
    pub per_trace: Vec<S>,
}

impl<S: Scalar> FullStationary<S> {
    /// Expands to one value per chain state in state-index order.
    pub fn state_values(&self, mtm: &MTModel<S>) -> Vec<S> {
        let ts = mtm.trace_set();
        let mut out = Vec::with_capacity(ts.state_count());
        for (id, t) in ts.traces().iter().enumerate() {
            for _ in 1..t.len() {
                out.push(self.per_trace[id].clone());
            }
        }
        out
    }

    /// Collapses a state-level vector that is constant along each trace.
    pub fn from_state_values(mtm: &MTModel<S>, values: &[S]) -> Result<Self> {
        let ts = mtm.trace_set();
        if values.len() != ts.state_count() {
            return Err(MtmError::NotStationaryInput);
        }
        let mut per_trace = Vec::with_capacity(ts.len());
        for (id, t) in ts.traces().iter().enumerate() {
            let first = ts.state_index(crate::trace::ChainState { trace: id, index: 1 });
            let v = values[first].clone();
            if (first..first + t.len() - 1).any(|i| !values[i].approx_eq(&v)) {
                return Err(MtmError::NotStationaryInput);
            }
            per_trace.push(v);
        }
        Ok(FullStationary { per_trace })
    }
}

#[derive(Debug, Clone)]
pub struct StationarySolution<S> {
    /// One vector per closed communicating class.
    pub vectors: Vec<KernelStationary<S>>,
    pub unique: bool,
}

impl<S: Scalar> StationarySolution<S> {
    pub fn unique_vector(&self) -> Result<&KernelStationary<S>> {
        if self.unique {
            Ok(&self.vectors[0])
        } else {
            Err(MtmError::NotStronglyConnected)
        }
    }
}

/// Solves σK = σ, Σσ = 1 on every closed class of the kernel.
pub fn stationary_kernel<S: Scalar>(k: &KernelChain<S>) -> Result<StationarySolution<S>> {
    let comps = k.components();
    let closed: Vec<Vec<usize>> = comps.into_iter().filter(|(_, c)| *c).map(|(c, _)| c).collect();
    let mut vectors = Vec::with_capacity(closed.len());
    for class in &closed {
        let mut local = vec![usize::MAX; k.states.len()];
        for (i, &a) in class.iter().enumerate() {
            local[a] = i;
        }
        let sub: Vec<Vec<(usize, S)>> =
            class.iter().map(|&a| k.rows[a].iter().map(|(b, p)| (local[*b], p.clone())).collect()).collect();
        let solved = solve_class(&sub)?;
        let mut values = vec![S::zero(); k.num_points()];
        for (i, &a) in class.iter().enumerate() {
            values[k.states[a]] = solved[i].clone();
        }
        let residual = k.residual(&values);
        let ok = if S::is_exact() { residual.is_zero() } else { residual.to_f64() <= 1e-9 };
        if !ok {
            return Err(MtmError::SolveFailed { residual: residual.to_f64() });
        }
        vectors.push(KernelStationary { values });
    }
    Ok(StationarySolution { unique: vectors.len() == 1, vectors })
}

fn solve_class<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<Vec<S>> {
    if !S::is_exact() && rows.len() > DENSE_FLOAT_LIMIT {
        let f: Vec<Vec<(usize, f64)>> =
            rows.iter().map(|r| r.iter().map(|(c, p)| (*c, p.to_f64())).collect()).collect();
        let x = linalg::stationary_power(&f, POWER_TOLERANCE, POWER_MAX_ITER)
            .ok_or(MtmError::SolveFailed { residual: f64::NAN })?;
        return Ok(x.into_iter().map(|v| S::from_exact(&v.to_exact())).collect());
    }
    linalg::stationary_direct(rows).ok_or(MtmError::SolveFailed { residual: f64::NAN })
}

fn is_kernel_stationary<S: Scalar>(k: &KernelChain<S>, sigma: &[S]) -> bool {
    if sigma.len() != k.num_points() || sigma.iter().any(|s| *s < S::zero()) {
        return false;
    }
    let total = sigma.iter().fold(S::zero(), |a, b| a + b.clone());
    if !total.approx_eq(&S::one()) {
        return false;
    }
    let r = k.residual(sigma);
    if S::is_exact() {
        r.is_zero()
    } else {
        r.to_f64() <= 1e-9
    }
}

/// Full-chain stationarity of a per-trace vector: π(⟨T',1⟩) equals the mass
/// leaving T'_start times ψ(T'), and the state total is 1.
pub fn full_residual<S: Scalar>(mtm: &MTModel<S>, pi: &FullStationary<S>) -> S {
    let ts = mtm.trace_set();
    let mut end_mass = vec![S::zero(); ts.num_points()];
    let mut total = S::zero();
    for (id, t) in ts.traces().iter().enumerate() {
        end_mass[t.end()] = end_mass[t.end()].clone() + pi.per_trace[id].clone();
        total = total + S::from_u64((t.len() - 1) as u64) * pi.per_trace[id].clone();
    }
    let mut worst = (total - S::one()).abs_value();
    for (id, t) in ts.traces().iter().enumerate() {
        let expect = end_mass[t.start()].clone() * mtm.rule().psi(id).clone();
        let d = (expect - pi.per_trace[id].clone()).abs_value();
        if d > worst {
            worst = d;
        }
    }
    worst
}

pub fn is_full_stationary<S: Scalar>(mtm: &MTModel<S>, pi: &FullStationary<S>) -> bool {
    if pi.per_trace.len() != mtm.trace_set().len() || pi.per_trace.iter().any(|p| *p < S::zero()) {
        return false;
    }
    let r = full_residual(mtm, pi);
    if S::is_exact() {
        r.is_zero()
    } else {
        r.to_f64() <= 1e-9
    }
}

/// π(⟨T,i⟩) = σ(T_start) ψ(T) / Σ_u σ(u) Λ_Ψ(u).
pub fn lift_sigma_to_pi<S: Scalar>(mtm: &MTModel<S>, sigma: &KernelStationary<S>) -> Result<FullStationary<S>> {
    let k = build_kernel(mtm);
    if !is_kernel_stationary(&k, &sigma.values) {
        return Err(MtmError::NotStationaryInput);
    }
    Ok(lift_unchecked(mtm, sigma))
}

pub(crate) fn lift_unchecked<S: Scalar>(mtm: &MTModel<S>, sigma: &KernelStationary<S>) -> FullStationary<S> {
    let ts = mtm.trace_set();
    let lam = lambda_psi(mtm);
    let z = sigma.values.iter().zip(&lam).fold(S::zero(), |acc, (s, l)| acc + s.clone() * l.clone());
    let per_trace = ts
        .traces()
        .iter()
        .enumerate()
        .map(|(id, t)| sigma.values[t.start()].clone() * mtm.rule().psi(id).clone() / z.clone())
        .collect();
    FullStationary { per_trace }
}

/// σ(u) = Σ_{T ∈ Out(u)} π(⟨T,1⟩) / Σ_T π(⟨T,1⟩).
pub fn project_pi_to_sigma<S: Scalar>(mtm: &MTModel<S>, pi: &FullStationary<S>) -> Result<KernelStationary<S>> {
    if !is_full_stationary(mtm, pi) {
        return Err(MtmError::NotStationaryInput);
    }
    let ts = mtm.trace_set();
    let total = pi.per_trace.iter().fold(S::zero(), |a, b| a + b.clone());
    let mut values = vec![S::zero(); ts.num_points()];
    for (id, t) in ts.traces().iter().enumerate() {
        values[t.start()] = values[t.start()].clone() + pi.per_trace[id].clone();
    }
    for v in &mut values {
        *v = v.clone() / total.clone();
    }
    Ok(KernelStationary { values })
}

/// Solve, lift, and return the unique full-chain stationary vector.
pub fn stationary_full<S: Scalar>(mtm: &MTModel<S>) -> Result<FullStationary<S>> {
    let k = build_kernel(mtm);
    let sol = stationary_kernel(&k)?;
    let sigma = sol.unique_vector()?;
    Ok(lift_unchecked(mtm, sigma))
}

pub fn is_strongly_connected<S: Scalar>(mtm: &MTModel<S>) -> bool {
    build_kernel(mtm).components().len() == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UniformityReport {
    pub uniformly_selective: bool,
    pub balanced: bool,
    /// Prediction: uniformly selective and balanced.
    pub uniform_stationary: bool,
    /// Whether the solved π is constant, when the solution is unique.
    pub solved_constant: Option<bool>,
}

pub fn uniformity_test<S: Scalar>(mtm: &MTModel<S>) -> UniformityReport {
    let ts = mtm.trace_set();
    let uniformly_selective = ts.start_points().into_iter().all(|u| {
        let out = ts.out_traces(u);
        let expect = S::from_ratio(1, out.len() as i64);
        out.iter().all(|&t| mtm.rule().psi(t).approx_eq(&expect))
    });
    let balanced = ts.is_balanced();
    let solved_constant = stationary_full(mtm).ok().map(|pi| {
        let first = &pi.per_trace[0];
        pi.per_trace.iter().all(|p| p.approx_eq(first))
    });
    UniformityReport {
        uniformly_selective,
        balanced,
        uniform_stationary: uniformly_selective && balanced,
        solved_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use crate::trace::{SelectionRule, TraceSet};

    fn r(a: i64, b: i64) -> Exact {
        Exact::from_ratio(a, b)
    }

    fn cycle() -> MTModel<Exact> {
        MTModel::uniform(TraceSet::build(2, vec![vec![0, 1], vec![1, 0]]).unwrap())
    }

    #[test]
    fn cycle_kernel_and_stationary() {
        let m = cycle();
        let k = build_kernel(&m);
        assert_eq!(k.to_dense(), vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]]);
        assert_eq!(lambda_psi(&m), vec![r(1, 1), r(1, 1)]);
        let sol = stationary_kernel(&k).unwrap();
        assert!(sol.unique);
        assert_eq!(sol.vectors[0].values, vec![r(1, 2), r(1, 2)]);
        let pi = lift_sigma_to_pi(&m, &sol.vectors[0]).unwrap();
        assert_eq!(pi.per_trace, vec![r(1, 2), r(1, 2)]);
        assert_eq!(project_pi_to_sigma(&m, &pi).unwrap(), sol.vectors[0]);
    }

    #[test]
    fn disjoint_cycles_are_not_unique() {
        let ts = TraceSet::build(4, vec![vec![0, 1], vec![1, 0], vec![2, 3], vec![3, 2]]).unwrap();
        let m = MTModel::<Exact>::uniform(ts);
        assert!(!is_strongly_connected(&m));
        let sol = stationary_kernel(&build_kernel(&m)).unwrap();
        assert!(!sol.unique);
        assert_eq!(sol.vectors.len(), 2);
    }

    #[test]
    fn transient_points_get_zero_mass() {
        // 2 leads into the cycle {0, 1} but is never re-entered.
        let ts = TraceSet::build(3, vec![vec![0, 1], vec![1, 0], vec![2, 0]]).unwrap();
        let m = MTModel::<Exact>::uniform(ts);
        let sol = stationary_kernel(&build_kernel(&m)).unwrap();
        assert!(sol.unique);
        assert_eq!(sol.vectors[0].values, vec![r(1, 2), r(1, 2), r(0, 1)]);
    }

    #[test]
    fn lift_rejects_non_stationary() {
        let m = cycle();
        let bad = KernelStationary { values: vec![r(1, 3), r(2, 3)] };
        assert_eq!(lift_sigma_to_pi(&m, &bad).unwrap_err(), MtmError::NotStationaryInput);
    }

    #[test]
    fn skewed_balanced_model_is_not_uniform() {
        // Balanced: each point has in = out = 2.
        let ts =
            TraceSet::build(3, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![1, 0], vec![2, 0], vec![2, 1]]).unwrap();
        let w = vec![r(1, 3), r(2, 3), r(1, 2), r(1, 2), r(1, 2), r(1, 2)];
        let rule = SelectionRule::new(&ts, w).unwrap();
        let m = MTModel::new(ts, rule).unwrap();
        let rep = uniformity_test(&m);
        assert_eq!(
            (rep.uniformly_selective, rep.balanced, rep.uniform_stationary, rep.solved_constant),
            (false, true, false, Some(false))
        );
    }

    #[test]
    fn unbalanced_uniform_model() {
        let ts = TraceSet::build(2, vec![vec![0, 1], vec![0, 0, 1], vec![1, 0]]).unwrap();
        let m = MTModel::<Exact>::uniform(ts);
        let rep = uniformity_test(&m);
        assert_eq!((rep.uniformly_selective, rep.balanced, rep.solved_constant), (true, false, Some(false)));
    }

    #[test]
    fn float_power_path_matches_direct() {
        // A well-mixing graph large enough to take the power-iteration branch.
        let n = DENSE_FLOAT_LIMIT + 5;
        let mut traces = Vec::new();
        for u in 0..n {
            for v in [(u + 1) % n, (u * 7 + 3) % n, (u * 13 + 5) % n] {
                if !traces.contains(&vec![u, v]) {
                    traces.push(vec![u, v]);
                }
            }
        }
        let m = MTModel::<f64>::uniform(TraceSet::build(n, traces).unwrap());
        let sol = stationary_kernel(&build_kernel(&m)).unwrap();
        let s = &sol.vectors[0].values;
        let total: f64 = s.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(build_kernel(&m).residual(s) < 1e-9);
    }
}
