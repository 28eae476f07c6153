//! Closed-form bias against brute-force GLS on expected data, and the
//! marginal covariance against simulation.

mod common;

use common::{dense_sigma, identifiable_instances, max_gls_gap, random_instance, simulated_covariance_worst_z};
use hdid::numerics::{sample_normal, RngStream};
use hdid::oracle::{build_problem, theorem1_bias, InclusionMasks, OracleVariances, TrueEffects};
use nalgebra::DMatrix;

#[test]
fn closed_form_matches_brute_force_gls() {
    for p in identifiable_instances(100, 20) {
        let gap = max_gls_gap(&p);
        assert!(gap < 1e-8, "gap {gap}");
        let fast = theorem1_bias(&p).unwrap();
        assert_eq!(fast.delta_bias, fast.bias[p.delta_index]);
    }
}

#[test]
fn covariance_accessor_matches_the_hierarchy() {
    let mut rng = RngStream::new(101, 0);
    for _ in 0..5 {
        let p = random_instance(&mut rng);
        let mine = dense_sigma(&p.n_pre, &p.n_post, &p.variances);
        assert!((p.covariance() - mine).abs().max() < 1e-15);
    }
}

#[test]
fn covariance_matches_simulated_outcomes() {
    let z = simulated_covariance_worst_z(1_000_000, 102);
    assert!(z < 4.0, "worst entry {z} standard errors out");
}

/// An omitted covariate that duplicates an included one is absorbed by it:
/// the treatment effect stays unbiased and the included coefficient picks
/// up the omitted one.
#[test]
fn omitted_duplicate_column_is_absorbed() {
    let mut rng = RngStream::new(103, 0);
    let j = 6;
    let mut x = DMatrix::from_fn(j, 3, |_, _| sample_normal(0.0, 1.0, &mut rng).unwrap());
    for r in 0..j {
        x[(r, 2)] = x[(r, 0)];
    }
    let t: Vec<f64> = (0..j).map(|r| x[(r, 0)] + sample_normal(0.0, 1.0, &mut rng).unwrap()).collect();
    let truth = TrueEffects {
        beta_base: vec![0.5, 1.0, 0.0],
        beta_change: vec![0.3, -1.0, 0.8],
        delta_base: 0.2,
        delta: 1.0,
    };
    let masks = InclusionMasks {
        baseline: vec![true, true, false],
        change: vec![true, true, false],
        treatment_in_baseline: true,
    };
    let v = OracleVariances::uniform(j, 1.0, 1.0, 1.0, 1.0);
    let p = build_problem(&x, &t, &masks, &truth, &v, &vec![3; j], &vec![3; j]).unwrap();
    let r = theorem1_bias(&p).unwrap();
    assert!(r.delta_bias.abs() < 1e-10, "{}", r.delta_bias);
    let i = p.theta1_labels.iter().position(|l| l == "X1 (change)").unwrap();
    assert!((r.bias[i] - 0.8).abs() < 1e-10, "{}", r.bias[i]);
}
