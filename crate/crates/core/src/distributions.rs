//! Stationary spatial and destination distributions.
//!
//! Occurrences #_{T,u} count indices 1..|T|-1: the start of a trace is not
//! counted, its end is. These are exactly the positions the full chain
//! visits, so the spatial distribution always sums to one.

use serde::Serialize;

use crate::chain::{is_full_stationary, FullStationary};
use crate::error::{MtmError, Result};
use crate::scalar::Scalar;
use crate::trace::{MTModel, PointId, TraceSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialDistribution<S> {
    pub values: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DestinationDistribution<S> {
    pub at: PointId,
    pub values: Vec<S>,
}

impl<S: Scalar> SpatialDistribution<S> {
    pub fn total(&self) -> S {
        self.values.iter().fold(S::zero(), |a, b| a + b.clone())
    }
}

impl<S: Scalar> DestinationDistribution<S> {
    pub fn total(&self) -> S {
        self.values.iter().fold(S::zero(), |a, b| a + b.clone())
    }
}

/// 𝔰(u) = Σ_T #_{T,u} π(⟨T,1⟩).
pub fn spatial<S: Scalar>(mtm: &MTModel<S>, pi: &FullStationary<S>) -> Result<SpatialDistribution<S>> {
    if !is_full_stationary(mtm, pi) {
        return Err(MtmError::NotStationaryInput);
    }
    Ok(spatial_unchecked(mtm, pi))
}

pub(crate) fn spatial_unchecked<S: Scalar>(mtm: &MTModel<S>, pi: &FullStationary<S>) -> SpatialDistribution<S> {
    let ts = mtm.trace_set();
    let mut values = vec![S::zero(); ts.num_points()];
    for (id, t) in ts.traces().iter().enumerate() {
        let p = &pi.per_trace[id];
        if p.is_zero() {
            continue;
        }
        for &u in t.counted() {
            values[u] = values[u].clone() + p.clone();
        }
    }
    SpatialDistribution { values }
}

/// d_u(v) = Σ_{T_end = v} #_{T,u} π(⟨T,1⟩) / 𝔰(u). An agent standing on its
/// own destination counts toward d_u(u).
pub fn destination<S: Scalar>(
    mtm: &MTModel<S>,
    pi: &FullStationary<S>,
    at: PointId,
) -> Result<DestinationDistribution<S>> {
    if !is_full_stationary(mtm, pi) {
        return Err(MtmError::NotStationaryInput);
    }
    let ts = mtm.trace_set();
    if at >= ts.num_points() {
        return Err(MtmError::InvalidParameter(format!("unknown point {at}")));
    }
    let mut values = vec![S::zero(); ts.num_points()];
    let mut mass = S::zero();
    for (id, t) in ts.traces().iter().enumerate() {
        let c = t.occurrences(at);
        if c == 0 {
            continue;
        }
        let w = S::from_u64(c as u64) * pi.per_trace[id].clone();
        values[t.end()] = values[t.end()].clone() + w.clone();
        mass = mass + w;
    }
    if mass.is_negligible() {
        return Err(MtmError::ZeroSpatialMass { point: at });
    }
    for v in &mut values {
        *v = v.clone() / mass.clone();
    }
    Ok(DestinationDistribution { at, values })
}

/// |𝒯_u| for every point: traces that visit u at a counted index.
pub fn visiting_counts(ts: &TraceSet) -> Vec<u64> {
    let mut counts = vec![0u64; ts.num_points()];
    let mut last_seen = vec![usize::MAX; ts.num_points()];
    for (id, t) in ts.traces().iter().enumerate() {
        for &u in t.counted() {
            if last_seen[u] != id {
                last_seen[u] = id;
                counts[u] += 1;
            }
        }
    }
    counts
}

/// 𝔰(u) = |𝒯_u| / |S(𝒯)|, valid for simple models with uniform π.
pub fn spatial_simple_uniform<S: Scalar>(ts: &TraceSet) -> SpatialDistribution<S> {
    let total = ts.state_count() as i64;
    SpatialDistribution { values: visiting_counts(ts).into_iter().map(|c| S::from_ratio(c as i64, total)).collect() }
}

/// d_u(v) = Γ_u(v) / Γ_u, valid for simple models with uniform π.
pub fn destination_simple_uniform<S: Scalar>(ts: &TraceSet, at: PointId) -> Result<DestinationDistribution<S>> {
    let mut gamma_v = vec![0i64; ts.num_points()];
    let mut gamma = 0i64;
    for t in ts.traces() {
        if t.occurrences(at) > 0 {
            gamma_v[t.end()] += 1;
            gamma += 1;
        }
    }
    if gamma == 0 {
        return Err(MtmError::ZeroSpatialMass { point: at });
    }
    Ok(DestinationDistribution { at, values: gamma_v.into_iter().map(|g| S::from_ratio(g, gamma)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary_full;
    use crate::scalar::Exact;

    fn r(a: i64, b: i64) -> Exact {
        Exact::from_ratio(a, b)
    }

    #[test]
    fn tiny_chain_gives_three_fifths() {
        // Traces (a,b), (a,a,b), (b,a) with ψ_a = 1/2 each.
        let m = MTModel::<Exact>::uniform(TraceSet::build(2, vec![vec![0, 1], vec![0, 0, 1], vec![1, 0]]).unwrap());
        let pi = stationary_full(&m).unwrap();
        assert_eq!(pi.state_values(&m), vec![r(1, 5), r(1, 5), r(1, 5), r(2, 5)]);
        let s = spatial(&m, &pi).unwrap();
        assert_eq!(s.values, vec![r(3, 5), r(2, 5)]);
        let d = destination(&m, &pi, 0).unwrap();
        // mass at a: ⟨(a,a,b),1⟩ heads to b, ⟨(b,a),1⟩ ends at a
        assert_eq!(d.values, vec![r(2, 3), r(1, 3)]);
    }

    #[test]
    fn shortcut_agrees_on_cycle() {
        let ts = TraceSet::build(3, vec![vec![0, 1, 2], vec![2, 0], vec![0, 2], vec![2, 1, 0]]).unwrap();
        assert!(ts.is_simple());
        let m = MTModel::<Exact>::uniform(ts.clone());
        let pi = stationary_full(&m).unwrap();
        if pi.per_trace.iter().all(|p| *p == pi.per_trace[0]) {
            assert_eq!(spatial(&m, &pi).unwrap(), spatial_simple_uniform(&ts));
        }
        assert_eq!(spatial(&m, &pi).unwrap().total(), r(1, 1));
    }

    #[test]
    fn zero_mass_destination() {
        let ts = TraceSet::build(3, vec![vec![0, 1], vec![1, 0], vec![2, 0]]).unwrap();
        let m = MTModel::<Exact>::uniform(ts);
        let pi = stationary_full(&m).unwrap();
        assert_eq!(destination(&m, &pi, 2).unwrap_err(), MtmError::ZeroSpatialMass { point: 2 });
    }
}
