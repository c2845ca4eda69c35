//! Points, traces, trace sets, selection rules and the full chain step.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MtmError, Result};
use crate::scalar::Scalar;

pub type PointId = usize;
pub type TraceId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub id: PointId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Point {
    pub fn plain(id: PointId) -> Self {
        Point { id, coords: None, name: None }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.id.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trace(pub Vec<PointId>);

impl Trace {
    /// Number of points |T|.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn start(&self) -> PointId {
        self.0[0]
    }

    pub fn end(&self) -> PointId {
        self.0[self.0.len() - 1]
    }

    pub fn at(&self, i: usize) -> PointId {
        self.0[i]
    }

    /// Points at the counted indices 1..|T|-1 (start excluded, end included).
    pub fn counted(&self) -> &[PointId] {
        &self.0[1..]
    }

    /// #_{T,u}: occurrences of `u` at counted indices.
    pub fn occurrences(&self, u: PointId) -> usize {
        self.counted().iter().filter(|&&p| p == u).count()
    }
}

/// An endless set of distinct traces with start/end/trip indices.
#[derive(Debug, Clone)]
pub struct TraceSet {
    points: Vec<Point>,
    traces: Vec<Trace>,
    out_index: Vec<Vec<TraceId>>,
    in_index: Vec<Vec<TraceId>>,
    trip_index: BTreeMap<(PointId, PointId), Vec<TraceId>>,
    state_offsets: Vec<usize>,
}

impl TraceSet {
    /// Builds a trace set over anonymous points `0..num_points`.
    pub fn build(num_points: usize, traces: Vec<Vec<PointId>>) -> Result<Self> {
        Self::build_with_points((0..num_points).map(Point::plain).collect(), traces)
    }

    pub fn build_with_points(points: Vec<Point>, traces: Vec<Vec<PointId>>) -> Result<Self> {
        for (idx, p) in points.iter().enumerate() {
            if p.id != idx {
                return Err(MtmError::InvalidParameter(format!(
                    "point ids must be contiguous from 0, found {} at position {idx}",
                    p.id
                )));
            }
        }
        let with_coords = points.iter().filter(|p| p.coords.is_some()).count();
        if with_coords != 0 && with_coords != points.len() {
            return Err(MtmError::InvalidParameter("either all points or none carry coordinates".into()));
        }
        if traces.is_empty() {
            return Err(MtmError::EmptySet);
        }
        let n = points.len();
        let mut seen = HashSet::with_capacity(traces.len());
        let mut out_index = vec![Vec::new(); n];
        let mut in_index = vec![Vec::new(); n];
        let mut trip_index: BTreeMap<(PointId, PointId), Vec<TraceId>> = BTreeMap::new();
        let mut state_offsets = Vec::with_capacity(traces.len() + 1);
        let mut offset = 0usize;
        let mut built = Vec::with_capacity(traces.len());
        for (id, seq) in traces.into_iter().enumerate() {
            if seq.len() < 2 {
                return Err(MtmError::TraceTooShort { trace: id });
            }
            if let Some(&bad) = seq.iter().find(|&&p| p >= n) {
                return Err(MtmError::UnknownPoint { trace: id, point: bad });
            }
            if !seen.insert(seq.clone()) {
                return Err(MtmError::DuplicateTrace { trace: id });
            }
            let t = Trace(seq);
            out_index[t.start()].push(id);
            in_index[t.end()].push(id);
            trip_index.entry((t.start(), t.end())).or_default().push(id);
            state_offsets.push(offset);
            offset += t.len() - 1;
            built.push(t);
        }
        state_offsets.push(offset);
        for t in &built {
            if out_index[t.end()].is_empty() {
                return Err(MtmError::NotEndless { point: points[t.end()].label() });
            }
        }
        Ok(TraceSet { points, traces: built, out_index, in_index, trip_index, state_offsets })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn trace(&self, id: TraceId) -> &Trace {
        &self.traces[id]
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn out_traces(&self, u: PointId) -> &[TraceId] {
        &self.out_index[u]
    }

    pub fn in_traces(&self, u: PointId) -> &[TraceId] {
        &self.in_index[u]
    }

    pub fn trips(&self, u: PointId, v: PointId) -> &[TraceId] {
        self.trip_index.get(&(u, v)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// P(𝒯): points that start at least one trace, ascending.
    pub fn start_points(&self) -> Vec<PointId> {
        (0..self.num_points()).filter(|&u| !self.out_index[u].is_empty()).collect()
    }

    /// |S(𝒯)| = Σ_T (|T|-1).
    pub fn state_count(&self) -> usize {
        *self.state_offsets.last().unwrap_or(&0)
    }

    /// Dense index of ⟨T, i⟩ in 0..|S(𝒯)|, traces in id order.
    pub fn state_index(&self, s: ChainState) -> usize {
        self.state_offsets[s.trace] + s.index - 1
    }

    pub fn state_at(&self, idx: usize) -> ChainState {
        let trace = self.state_offsets.partition_point(|&o| o <= idx) - 1;
        ChainState { trace, index: idx - self.state_offsets[trace] + 1 }
    }

    /// Point occupied in state ⟨T, i⟩.
    pub fn position(&self, s: ChainState) -> PointId {
        self.traces[s.trace].at(s.index)
    }

    /// No trace revisits a point at its counted indices.
    pub fn is_simple(&self) -> bool {
        self.traces.iter().all(|t| {
            let mut seen = HashSet::with_capacity(t.len());
            t.counted().iter().all(|p| seen.insert(*p))
        })
    }

    pub fn is_balanced(&self) -> bool {
        (0..self.num_points()).all(|u| self.in_index[u].len() == self.out_index[u].len())
    }
}

/// ψ_u(T) for every trace, stored by trace id (the owning point is T_start).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRule<S> {
    weights: Vec<S>,
}

impl<S: Scalar> SelectionRule<S> {
    pub fn new(ts: &TraceSet, weights: Vec<S>) -> Result<Self> {
        if weights.len() != ts.len() {
            return Err(MtmError::InvalidRule(format!("{} weights for {} traces", weights.len(), ts.len())));
        }
        if let Some(id) = weights.iter().position(|w| *w < S::zero()) {
            return Err(MtmError::InvalidRule(format!("negative weight on trace {id}")));
        }
        for u in ts.start_points() {
            let sum = ts.out_traces(u).iter().fold(S::zero(), |acc, &t| acc + weights[t].clone());
            if !sum.approx_eq(&S::one()) {
                return Err(MtmError::InvalidRule(format!(
                    "weights of point {} sum to {}",
                    ts.points()[u].label(),
                    sum.render()
                )));
            }
        }
        Ok(SelectionRule { weights })
    }

    pub fn psi(&self, t: TraceId) -> &S {
        &self.weights[t]
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }
}

/// ψ_u(T) = 1/|Out(u)|.
pub fn uniform_rule<S: Scalar>(ts: &TraceSet) -> SelectionRule<S> {
    let weights = ts.traces().iter().map(|t| S::from_ratio(1, ts.out_traces(t.start()).len() as i64)).collect();
    SelectionRule { weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub trace: TraceId,
    /// 1 ≤ index ≤ |T|-1
    pub index: usize,
}

/// A Markov trace model 𝒟 = (𝒯, Ψ).
#[derive(Debug, Clone)]
pub struct MTModel<S> {
    trace_set: TraceSet,
    rule: SelectionRule<S>,
}

impl<S: Scalar> MTModel<S> {
    pub fn new(trace_set: TraceSet, rule: SelectionRule<S>) -> Result<Self> {
        if rule.weights.len() != trace_set.len() {
            return Err(MtmError::InvalidRule("rule does not match trace set".into()));
        }
        Ok(MTModel { trace_set, rule })
    }

    pub fn uniform(trace_set: TraceSet) -> Self {
        let rule = uniform_rule(&trace_set);
        MTModel { trace_set, rule }
    }

    pub fn trace_set(&self) -> &TraceSet {
        &self.trace_set
    }

    pub fn rule(&self) -> &SelectionRule<S> {
        &self.rule
    }

    pub fn state_count(&self) -> usize {
        self.trace_set.state_count()
    }

    /// Converts the rule to another numeric mode.
    pub fn convert<T: Scalar>(&self) -> MTModel<T> {
        let weights = self.rule.weights.iter().map(|w| T::from_exact(&w.to_exact())).collect();
        MTModel { trace_set: self.trace_set.clone(), rule: SelectionRule { weights } }
    }

    /// Deterministic-move rule inside a trace, next-trace rule at its end.
    pub fn step<R: Rng + ?Sized>(&self, s: ChainState, rng: &mut R) -> ChainState {
        let t = self.trace_set.trace(s.trace);
        if s.index < t.len() - 1 {
            return ChainState { trace: s.trace, index: s.index + 1 };
        }
        let out = self.trace_set.out_traces(t.end());
        let total: f64 = out.iter().map(|&o| self.rule.psi(o).to_f64()).sum();
        let mut x = rng.random::<f64>() * total;
        for &o in out {
            x -= self.rule.psi(o).to_f64();
            if x < 0.0 {
                return ChainState { trace: o, index: 1 };
            }
        }
        let last = out.iter().rev().find(|&&o| self.rule.psi(o).to_f64() > 0.0).unwrap_or(&out[0]);
        ChainState { trace: *last, index: 1 }
    }

    /// One application of the full-chain transition to a state vector: v ↦ vP.
    pub fn apply_full_chain(&self, v: &[S]) -> Vec<S> {
        let ts = &self.trace_set;
        let mut out = vec![S::zero(); ts.state_count()];
        let mut end_mass = vec![S::zero(); ts.num_points()];
        for (id, t) in ts.traces().iter().enumerate() {
            for i in 1..t.len() {
                let idx = ts.state_index(ChainState { trace: id, index: i });
                if i < t.len() - 1 {
                    out[idx + 1] = out[idx + 1].clone() + v[idx].clone();
                } else {
                    end_mass[t.end()] = end_mass[t.end()].clone() + v[idx].clone();
                }
            }
        }
        for (id, t) in ts.traces().iter().enumerate() {
            let first = ts.state_index(ChainState { trace: id, index: 1 });
            out[first] = out[first].clone() + end_mass[t.start()].clone() * self.rule.psi(id).clone();
        }
        out
    }
}

/// The MTM whose kernel is the given stochastic matrix: one trace (u,v)
/// per positive entry with ψ_u((u,v)) = p_uv.
pub fn mtm_from_chain<S: Scalar>(transition: &[Vec<S>]) -> Result<MTModel<S>> {
    let n = transition.len();
    if n == 0 {
        return Err(MtmError::InvalidStochasticMatrix("empty matrix".into()));
    }
    let mut traces = Vec::new();
    let mut weights = Vec::new();
    for (u, row) in transition.iter().enumerate() {
        if row.len() != n {
            return Err(MtmError::InvalidStochasticMatrix(format!("row {u} has length {}", row.len())));
        }
        let mut sum = S::zero();
        for (v, p) in row.iter().enumerate() {
            if *p < S::zero() {
                return Err(MtmError::InvalidStochasticMatrix(format!("negative entry at ({u},{v})")));
            }
            sum = sum + p.clone();
            if !p.is_zero() {
                traces.push(vec![u, v]);
                weights.push(p.clone());
            }
        }
        if !sum.approx_eq(&S::one()) {
            return Err(MtmError::InvalidStochasticMatrix(format!("row {u} sums to {}", sum.render())));
        }
    }
    let ts = TraceSet::build(n, traces)?;
    let rule = SelectionRule::new(&ts, weights)?;
    MTModel::new(ts, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle() -> TraceSet {
        TraceSet::build(2, vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn rejects_non_endless() {
        let pts = vec![
            Point { id: 0, coords: None, name: Some("a".into()) },
            Point { id: 1, coords: None, name: Some("b".into()) },
        ];
        let err = TraceSet::build_with_points(pts, vec![vec![0, 1]]).unwrap_err();
        assert_eq!(err.to_string(), "NotEndless: point b");
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert_eq!(
            TraceSet::build(2, vec![vec![0, 1], vec![1, 0], vec![0, 1]]).unwrap_err(),
            MtmError::DuplicateTrace { trace: 2 }
        );
        assert_eq!(TraceSet::build(2, vec![]).unwrap_err(), MtmError::EmptySet);
        assert!(matches!(TraceSet::build(2, vec![vec![0]]).unwrap_err(), MtmError::TraceTooShort { .. }));
    }

    #[test]
    fn cycle_indices() {
        let ts = cycle();
        assert_eq!(ts.start_points(), vec![0, 1]);
        assert_eq!(ts.trips(0, 1), &[0]);
        assert_eq!(ts.state_count(), 2);
        assert!(ts.is_simple());
        let rule = uniform_rule::<Exact>(&ts);
        assert_eq!(rule.psi(0), &Exact::from_ratio(1, 1));
    }

    #[test]
    fn simplicity_uses_counted_indices() {
        let ts = TraceSet::build(2, vec![vec![0, 1, 0, 1], vec![1, 0]]).unwrap();
        assert!(!ts.is_simple());
        // the start point may reappear at the end
        let ts = TraceSet::build(2, vec![vec![0, 1, 0], vec![0, 1], vec![1, 0]]).unwrap();
        assert!(ts.is_simple());
    }

    #[test]
    fn state_index_round_trip() {
        let ts = TraceSet::build(3, vec![vec![0, 1, 2], vec![2, 0], vec![1, 2, 0, 1]]).unwrap();
        assert_eq!(ts.state_count(), 2 + 1 + 3);
        for idx in 0..ts.state_count() {
            assert_eq!(ts.state_index(ts.state_at(idx)), idx);
        }
    }

    #[test]
    fn step_rules() {
        let ts = TraceSet::build(2, vec![vec![0, 1, 0, 1], vec![1, 0]]).unwrap();
        let m = MTModel::<f64>::uniform(ts);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = m.step(ChainState { trace: 0, index: 1 }, &mut rng);
        assert_eq!(s, ChainState { trace: 0, index: 2 });
        let s = m.step(ChainState { trace: 0, index: 3 }, &mut rng);
        assert_eq!(s, ChainState { trace: 1, index: 1 });
    }

    #[test]
    fn from_chain_with_self_loop() {
        let h = Exact::from_ratio(1, 2);
        let z = Exact::from_ratio(0, 1);
        let one = Exact::from_ratio(1, 1);
        let m = mtm_from_chain(&[vec![h.clone(), h], vec![one, z]]).unwrap();
        assert_eq!(m.trace_set().len(), 3);
        assert_eq!(m.trace_set().trace(0), &Trace(vec![0, 0]));
    }

    #[test]
    fn from_chain_rejects_zero_row() {
        let z = Exact::from_ratio(0, 1);
        let one = Exact::from_ratio(1, 1);
        assert!(matches!(
            mtm_from_chain(&[vec![z.clone(), one], vec![z.clone(), z]]),
            Err(MtmError::InvalidStochasticMatrix(_))
        ));
    }

    #[test]
    fn conversion_between_modes() {
        let m = MTModel::<Exact>::uniform(
            TraceSet::build(3, vec![vec![0, 1], vec![0, 2], vec![0, 1, 2], vec![1, 0], vec![2, 0]]).unwrap(),
        );
        let f = m.convert::<f64>();
        assert!((f.rule().psi(0) - 1.0 / 3.0).abs() < 1e-16);
        let back = f.convert::<Exact>();
        assert!((back.rule().psi(0).to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }
}
