use std::collections::BTreeMap;

use mtm_core::chain::{stationary_full, uniformity_test};
use mtm_core::distributions::{destination, spatial};
use mtm_core::io::{model_to_json, parse_model_json, parse_route_system_json};
use mtm_core::manhattan;
use mtm_core::modular::{combine, parse_slowness_table, Bundle, SlownessSpec};
use mtm_core::scalar::{parse_rational, Exact, Scalar};
use mtm_core::simulate::{simulate, SimConfig, StartMode};
use mtm_core::verify::{balanced_mismatches, random_route_system, random_strongly_connected_mtm};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, skewed: bool) -> mtm_core::trace::MTModel<Exact> {
    random_strongly_connected_mtm(&mut ChaCha8Rng::seed_from_u64(seed), skewed)
}

/// A bundle on the given shadow: each segment repeats every cell 1..=3 times.
fn bundle_on(shadow: Vec<usize>) -> impl Strategy<Value = Bundle> {
    let n = shadow.len();
    prop::collection::vec((prop::collection::vec(1usize..=3, n), 1u64..=3), 1..=3).prop_map(move |segs| {
        let segs = segs
            .into_iter()
            .map(|(reps, m)| (shadow.iter().zip(reps).flat_map(|(&c, r)| std::iter::repeat_n(c, r)).collect(), m))
            .collect();
        Bundle::new(segs).unwrap()
    })
}

fn add(a: &mut BTreeMap<usize, u64>, b: BTreeMap<usize, u64>, times: u64) {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v * times;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // The stationary law is constant along every trace and sums to one.
    #[test]
    fn stationary_is_flat_along_traces(seed in any::<u64>(), skewed in any::<bool>()) {
        let m = model(seed, skewed);
        let pi = stationary_full(&m).unwrap();
        let ts = m.trace_set();
        let vals = pi.state_values(&m);
        let mut k = 0;
        let mut total = Exact::zero();
        for t in ts.traces() {
            let first = vals[k].clone();
            for _ in 1..t.len() {
                prop_assert_eq!(&vals[k], &first);
                total += vals[k].clone();
                k += 1;
            }
        }
        prop_assert_eq!(total, Exact::one());
    }

    #[test]
    fn distributions_are_probabilities(seed in any::<u64>()) {
        let m = model(seed, true);
        let pi = stationary_full(&m).unwrap();
        let s = spatial(&m, &pi).unwrap();
        prop_assert_eq!(s.total(), Exact::one());
        for u in 0..m.trace_set().num_points() {
            if !s.values[u].is_zero() {
                prop_assert_eq!(destination(&m, &pi, u).unwrap().total(), Exact::one());
            }
        }
    }

    #[test]
    fn uniformity_predicate_matches_solution(seed in any::<u64>(), skewed in any::<bool>()) {
        let r = uniformity_test(&model(seed, skewed));
        prop_assert_eq!(r.solved_constant, Some(r.uniform_stationary));
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>(), skewed in any::<bool>()) {
        let m = model(seed, skewed);
        let back = parse_model_json::<Exact>(&model_to_json(&m)).unwrap();
        prop_assert_eq!(back.trace_set().traces(), m.trace_set().traces());
        prop_assert_eq!(back.rule().weights(), m.rule().weights());
    }

    #[test]
    fn balanced_closed_forms_match_pipeline(seed in any::<u64>()) {
        let rs = random_route_system(&mut ChaCha8Rng::seed_from_u64(seed), true);
        prop_assert!(balanced_mismatches(&rs).is_empty());
    }

    #[test]
    fn combine_laws(
        a in bundle_on(vec![0, 1]),
        b in bundle_on(vec![2]),
        c in bundle_on(vec![3, 4, 5]),
        leading in any::<bool>(),
    ) {
        let ab = combine(&a, &b).unwrap();
        prop_assert_eq!(ab.cardinality(), a.cardinality() * b.cardinality());
        prop_assert_eq!(ab.shadow(), &[0, 1, 2][..]);
        // Counts split: the leading flag only affects the first factor.
        let mut expect = BTreeMap::new();
        add(&mut expect, a.counts(leading), b.cardinality());
        add(&mut expect, b.counts(false), a.cardinality());
        prop_assert_eq!(ab.counts(leading), expect);
        prop_assert_eq!(
            combine(&ab, &c).unwrap(),
            combine(&a, &combine(&b, &c).unwrap()).unwrap()
        );
        prop_assert!(combine(&a, &a).is_err());
    }

    #[test]
    fn rationals_round_trip(p in -1_000_000i64..1_000_000, q in 1i64..1_000_000) {
        let r = Exact::from_ratio(p, q);
        prop_assert_eq!(parse_rational(&r.render()), Some(r));
    }

    #[test]
    fn simulation_ignores_thread_count(seed in any::<u64>()) {
        let m = model(seed % 64, false);
        let pi = stationary_full(&m).unwrap();
        let cfg = SimConfig { agents: 9000, steps: 3, warmup: 1, seed, start: StartMode::Stationary, record_destinations: true };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| simulate(&m, Some(&pi), &cfg).unwrap())
        };
        prop_assert_eq!(run(1), run(3));
    }
}

const SEEDS: &[&str] = &[
    r#"{"points": ["a", "b"], "traces": [["a","b"], ["a","a","b"], ["b","a"]]}"#,
    r#"{"num_points": 3, "traces": [[0,1,2],[2,1,0]], "rule": {"weights": {"0": "1/2", "1": 1}}}"#,
    r#"{"points": ["a","b"], "bundles": [{"segments": [["a","b"], {"cells": ["a","a","b"], "multiplicity": 1}]}, {"segments": [["b","a"]]}], "routes": [{"paths": [[0]]}, {"paths": [[1]]}]}"#,
    "const:1",
    "linear:1,1/2",
    "table:1 2 3/2",
    "-7/12",
];

fn mutate(seed: &str, edits: &[(usize, u8, u8)]) -> String {
    let mut bytes = seed.as_bytes().to_vec();
    for &(pos, op, byte) in edits {
        let at = if bytes.is_empty() { 0 } else { pos % (bytes.len() + 1) };
        match op % 3 {
            0 => bytes.insert(at, byte),
            1 if at < bytes.len() => {
                bytes.remove(at);
            }
            _ if at < bytes.len() => bytes[at] = byte,
            _ => {}
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    // Damaged inputs give errors, never panics.
    #[test]
    fn parsers_survive_mutated_seeds(
        which in 0..SEEDS.len(),
        edits in prop::collection::vec((any::<usize>(), any::<u8>(), prop::sample::select(b"{}[]\",:0123456789/-.abe ".to_vec())), 0..8),
    ) {
        let text = mutate(SEEDS[which], &edits);
        let _ = parse_model_json::<Exact>(&text);
        let _ = parse_model_json::<f64>(&text);
        let _ = parse_route_system_json(&text);
        if let Ok(s) = SlownessSpec::parse_with(&text, |_| Ok(text.clone())) {
            let _ = s.at(1);
        }
        let _ = parse_slowness_table(&text);
        let _ = parse_rational(&text);
    }
}

#[test]
fn manhattan_exact_spatial_has_square_symmetry() {
    for n in 2..=7 {
        let s = manhattan::spatial_exact(n).unwrap();
        let at = |i: usize, j: usize| &s[i * n + j];
        for i in 0..n {
            for j in 0..n {
                let v = at(i, j);
                for w in [at(j, i), at(n - 1 - i, j), at(i, n - 1 - j), at(n - 1 - j, n - 1 - i)] {
                    assert_eq!(v, w);
                }
            }
        }
        assert_eq!(s.iter().cloned().sum::<Exact>(), Exact::one());
    }
}
