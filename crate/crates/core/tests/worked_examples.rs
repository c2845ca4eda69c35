use mtm_core::chain::{build_kernel, stationary_full, stationary_kernel, uniformity_test};
use mtm_core::distributions::{destination, destination_simple_uniform, spatial};
use mtm_core::downtown::{build_downtown, DownTownParams};
use mtm_core::manhattan::{self, build_manhattan};
use mtm_core::modular::SlownessSpec;
use mtm_core::scalar::{Exact, Scalar};
use mtm_core::trace::ChainState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn r(a: i64, b: i64) -> Exact {
    Exact::from_ratio(a, b)
}

#[test]
fn manhattan_two_stationary_values() {
    let m = build_manhattan::<Exact>(2).unwrap();
    let k = build_kernel(&m);
    let sigma = stationary_kernel(&k).unwrap().unique_vector().unwrap().clone();
    assert_eq!(sigma.values, vec![r(1, 4); 4]);
    let pi = stationary_full(&m).unwrap();
    assert!(pi.state_values(&m).iter().all(|v| *v == r(1, 24)));
    assert_eq!(spatial(&m, &pi).unwrap().values, vec![r(1, 4); 4]);
    // Cells are numbered row-major: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3.
    let d = destination(&m, &pi, 0).unwrap();
    assert_eq!(d.values, vec![r(4, 6), r(1, 6), r(1, 6), r(0, 1)]);
}

#[test]
fn manhattan_kernel_weights_follow_out_degree() {
    for n in 2..=4 {
        let m = build_manhattan::<Exact>(n).unwrap();
        let ts = m.trace_set();
        let sigma = stationary_kernel(&build_kernel(&m)).unwrap().unique_vector().unwrap().clone();
        for u in 0..n * n {
            assert_eq!(sigma.values[u], r(ts.out_traces(u).len() as i64, ts.len() as i64));
        }
    }
}

#[test]
fn manhattan_is_uniform_balanced_and_connected() {
    for n in 2..=6 {
        let u = uniformity_test(&build_manhattan::<Exact>(n).unwrap());
        assert!(u.uniformly_selective && u.balanced && u.uniform_stationary, "N={n}: {u:?}");
        assert_eq!(u.solved_constant, Some(true));
    }
}

#[test]
fn destination_shortcut_matches_general_form() {
    for n in 2..=5 {
        let m = build_manhattan::<Exact>(n).unwrap();
        let pi = stationary_full(&m).unwrap();
        for u in 0..n * n {
            let general = destination(&m, &pi, u).unwrap();
            assert_eq!(destination_simple_uniform::<Exact>(m.trace_set(), u).unwrap(), general);
        }
    }
}

#[test]
fn next_trace_frequencies_follow_the_rule() {
    // At the end of a trace into (0,0) on N=3, the next trace is drawn by ψ.
    let m = build_manhattan::<Exact>(3).unwrap();
    let ts = m.trace_set();
    let into = ts.in_traces(0)[0];
    let end = ChainState { trace: into, index: ts.trace(into).len() - 1 };
    let out = ts.out_traces(0);
    let mut counts = vec![0u64; ts.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = 100_000u64;
    for _ in 0..samples {
        counts[m.step(end, &mut rng).trace] += 1;
    }
    let chi2: f64 = out
        .iter()
        .map(|&t| {
            let e = m.rule().psi(t).to_f64() * samples as f64;
            (counts[t] as f64 - e).powi(2) / e
        })
        .sum();
    assert_eq!(out.iter().map(|&t| counts[t]).sum::<u64>(), samples);
    let p = ChiSquared::new((out.len() - 1) as f64).unwrap().sf(chi2);
    assert!(p > 0.001, "χ² = {chi2}, p = {p}");
}

#[test]
fn slowness_scaling_is_affine_in_lambda() {
    // Only transit cells stretch with slowness; parking and cross-way cells
    // keep their wait and crossing weights, so Λ_b(t) = A + tB rather
    // than t·Λ_b(1).
    let build = |t: i64| {
        let mut p = DownTownParams::unit(2, 1);
        p.slowness = SlownessSpec::Const(r(t, 1));
        build_downtown(&p).unwrap()
    };
    let (d1, d2, d3) = (build(1), build(2), build(3));
    let (l1, l2, l3): (Exact, Exact, Exact) = (d1.lambda_b(), d2.lambda_b(), d3.lambda_b());
    assert!(l1 > r(0, 1));
    assert_eq!(l3.clone() - l2.clone(), l2.clone() - l1.clone());
    assert_ne!(l2, r(2, 1) * l1);
    let (s1, s2) = (d1.spatial::<Exact>().unwrap(), d2.spatial::<Exact>().unwrap());
    assert_eq!(s2.total(), r(1, 1));
    assert_ne!(s1, s2);
}

#[test]
fn downtown_two_one_reference_value() {
    let dt = build_downtown(&DownTownParams::unit(2, 1)).unwrap();
    let s = dt.spatial::<Exact>().unwrap();
    let parking: Vec<&Exact> = dt
        .cells
        .iter()
        .zip(&s.values)
        .filter(|(c, _)| c.role == mtm_core::downtown::Role::Parking)
        .map(|(_, v)| v)
        .collect();
    assert!(parking.iter().all(|v| **v == r(1, 76)));
    assert_eq!(s.total(), r(1, 1));
    assert_eq!(manhattan::state_count(2), 24);
}

#[test]
fn centre_column_gains_on_border_as_grid_grows() {
    let ratios: Vec<f64> = [4, 8, 16]
        .into_iter()
        .map(|n| {
            let dt = build_downtown(&DownTownParams::unit(n, 1)).unwrap();
            let s = dt.spatial::<f64>().unwrap();
            dt.column_transit_mass(&s, n / 2) / dt.column_transit_mass(&s, 0)
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
}

#[test]
fn readme_inputs_parse() {
    let rs = mtm_core::io::parse_route_system_json(
        r#"{ "points": ["a", "b"],
  "bundles": [ {"segments": [["a", "b"], {"cells": ["a", "a", "b"], "multiplicity": 1}]},
               {"shadow": ["b", "a"], "slowness": [1, 1]} ],
  "routes": [ {"paths": [[0]]},
              {"paths": [{"bundles": [1], "multiplicity": 1}], "multiplicity": 1} ] }"#,
    )
    .unwrap();
    assert_eq!(mtm_core::modular::spatial_balanced::<Exact>(&rs).unwrap().values, vec![r(3, 5), r(2, 5)]);
    let m = mtm_core::io::parse_model_json::<Exact>(
        r#"{ "points": ["a", "b"], "traces": [["a", "b"], ["a", "a", "b"], ["b", "a"]], "rule": "uniform" }"#,
    )
    .unwrap();
    assert_eq!(spatial(&m, &stationary_full(&m).unwrap()).unwrap().values, vec![r(3, 5), r(2, 5)]);
}
