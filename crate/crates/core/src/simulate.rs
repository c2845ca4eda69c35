//! Monte Carlo agents on the full chain, used as an independent check of
//! the analytic distributions.
//!
//! Every agent draws from its own ChaCha8 stream (seed, stream = agent id),
//! so results depend only on the seed, never on scheduling or thread count.

use std::collections::BTreeMap;

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::FullStationary;
use crate::distributions::SpatialDistribution;
use crate::error::{MtmError, Result};
use crate::scalar::Scalar;
use crate::trace::{ChainState, MTModel, PointId, TraceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Sample the exact stationary distribution over states.
    Stationary,
    Fixed(ChainState),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub agents: usize,
    pub steps: usize,
    pub warmup: usize,
    pub seed: u64,
    pub start: StartMode,
    pub record_destinations: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(MtmError::InvalidParameter("agents must be at least 1".into()));
        }
        if self.warmup >= self.steps {
            return Err(MtmError::InvalidParameter("warmup must be smaller than steps".into()));
        }
        Ok(())
    }
}

/// Positions after steps warmup+1..=steps of every agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmpiricalHistogram {
    pub occupancy: Vec<u64>,
    /// (position, destination of the current trace) → count.
    pub destinations: BTreeMap<(PointId, PointId), u64>,
    pub samples: u64,
}

impl EmpiricalHistogram {
    fn empty(points: usize) -> Self {
        EmpiricalHistogram { occupancy: vec![0; points], destinations: BTreeMap::new(), samples: 0 }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.occupancy.iter_mut().zip(other.occupancy) {
            *a += b;
        }
        for (k, v) in other.destinations {
            *self.destinations.entry(k).or_insert(0) += v;
        }
        self.samples += other.samples;
        self
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.occupancy.iter().map(|&c| c as f64 / self.samples as f64).collect()
    }
}

struct Sampler<'a, S> {
    mtm: &'a MTModel<S>,
    next: Vec<Option<(WeightedAliasIndex<f64>, Vec<TraceId>)>>,
}

impl<'a, S: Scalar> Sampler<'a, S> {
    fn new(mtm: &'a MTModel<S>) -> Result<Self> {
        let ts = mtm.trace_set();
        let next = (0..ts.num_points())
            .map(|u| {
                let out = ts.out_traces(u);
                if out.is_empty() {
                    return Ok(None);
                }
                let w: Vec<f64> = out.iter().map(|&t| mtm.rule().psi(t).to_f64()).collect();
                let alias = WeightedAliasIndex::new(w)
                    .map_err(|e| MtmError::InvalidRule(format!("selection weights at point {u}: {e}")))?;
                Ok(Some((alias, out.to_vec())))
            })
            .collect::<Result<_>>()?;
        Ok(Sampler { mtm, next })
    }

    fn step(&self, s: ChainState, rng: &mut ChaCha8Rng) -> ChainState {
        let t = self.mtm.trace_set().trace(s.trace);
        if s.index < t.len() - 1 {
            return ChainState { trace: s.trace, index: s.index + 1 };
        }
        let (alias, out) = self.next[t.end()].as_ref().expect("trace set is endless");
        ChainState { trace: out[alias.sample(rng)], index: 1 }
    }
}

/// Runs `cfg.agents` independent agents. A stationary start needs π.
pub fn simulate<S: Scalar>(
    mtm: &MTModel<S>,
    pi: Option<&FullStationary<S>>,
    cfg: &SimConfig,
) -> Result<EmpiricalHistogram> {
    cfg.validate()?;
    let ts = mtm.trace_set();
    let sampler = Sampler::new(mtm)?;
    let initial = match cfg.start {
        StartMode::Stationary => {
            let pi = pi.ok_or_else(|| MtmError::InvalidParameter("stationary start needs π".into()))?;
            let w: Vec<f64> = pi.state_values(mtm).iter().map(Scalar::to_f64).collect();
            Some(WeightedAliasIndex::new(w).map_err(|e| MtmError::InvalidParameter(format!("π: {e}")))?)
        }
        StartMode::Fixed(s) => {
            if s.trace >= ts.len() || s.index == 0 || s.index >= ts.trace(s.trace).len() {
                return Err(MtmError::InvalidParameter(format!("invalid start state {s:?}")));
            }
            None
        }
    };
    const CHUNK: usize = 4096;
    let chunks = cfg.agents.div_ceil(CHUNK);
    let parts: Vec<EmpiricalHistogram> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut h = EmpiricalHistogram::empty(ts.num_points());
            for agent in c * CHUNK..((c + 1) * CHUNK).min(cfg.agents) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(agent as u64);
                let mut s = match (&initial, cfg.start) {
                    (Some(alias), _) => ts.state_at(alias.sample(&mut rng)),
                    (None, StartMode::Fixed(s)) => s,
                    (None, StartMode::Stationary) => unreachable!(),
                };
                for t in 1..=cfg.steps {
                    s = sampler.step(s, &mut rng);
                    if t > cfg.warmup {
                        let u = ts.position(s);
                        h.occupancy[u] += 1;
                        h.samples += 1;
                        if cfg.record_destinations {
                            *h.destinations.entry((u, ts.trace(s.trace).end())).or_insert(0) += 1;
                        }
                    }
                }
            }
            h
        })
        .collect();
    Ok(parts.into_iter().fold(EmpiricalHistogram::empty(ts.num_points()), EmpiricalHistogram::merge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub tv: f64,
    pub l1: f64,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_pvalue: f64,
}

/// Total variation, L1 and a chi-square goodness-of-fit test of the
/// empirical occupancy against an analytic distribution. Cells with zero
/// analytic mass must be empty and are left out of the test.
pub fn compare<S: Scalar>(h: &EmpiricalHistogram, analytic: &SpatialDistribution<S>) -> Result<Comparison> {
    if h.occupancy.len() != analytic.values.len() || h.samples == 0 {
        return Err(MtmError::MismatchedSupport);
    }
    let total = h.samples as f64;
    let mut l1 = 0.0;
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    for (&c, p) in h.occupancy.iter().zip(&analytic.values) {
        let p = p.to_f64();
        l1 += (c as f64 / total - p).abs();
        if p > 0.0 {
            let e = p * total;
            chi2 += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            return Err(MtmError::MismatchedSupport);
        }
    }
    let dof = cells.saturating_sub(1);
    let chi2_pvalue = if dof == 0 { 1.0 } else { ChiSquared::new(dof as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN) };
    Ok(Comparison { tv: l1 / 2.0, l1, chi2, dof, chi2_pvalue })
}
