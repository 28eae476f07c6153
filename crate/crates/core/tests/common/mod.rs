//! Fixtures and independent references shared by the integration tests.
#![allow(dead_code)]

use hdid::datagen::{generate, GenerativeConfig};
use hdid::gibbs::geweke::Statistic;
use hdid::gibbs::ConditionalParams;
use hdid::model::{HdidDataset, InverseGammaPrior, PriorConfig, SharedGammaRule};
use hdid::numerics::{sample_normal, RngStream};
use hdid::oracle::{build_problem, BiasProblem, InclusionMasks, OracleVariances, TrueEffects};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const DRAWS: usize = 100_000;

pub fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Empirical mean and variance of `DRAWS` draws within 4 standard errors.
/// The variance SE uses the fourth central moment of the draws.
pub fn check_moments(c: &ConditionalParams, seed: u64) -> Result<(), String> {
    let mut rng = RngStream::new(seed, 0);
    let xs: Vec<f64> = (0..DRAWS).map(|_| c.sample(&mut rng).unwrap()).collect();
    let (m, v) = moments(&xs);
    let n = DRAWS as f64;
    let se_m = (c.variance() / n).sqrt();
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_v = ((m4 - v * v) / n).sqrt();
    if (m - c.mean()).abs() >= 4.0 * se_m {
        return Err(format!("{c:?}: mean {m} vs {}", c.mean()));
    }
    if (v - c.variance()).abs() >= 4.0 * se_v {
        return Err(format!("{c:?}: var {v} vs {}", c.variance()));
    }
    Ok(())
}

/// Three groups, two observations per period, two covariates.
pub fn geweke_toy() -> (HdidDataset, PriorConfig) {
    let mut gen = GenerativeConfig::study(3);
    gen.individuals = 2;
    gen.alpha = vec![1.0, 0.0];
    gen.beta_base = vec![0.0, 0.0];
    gen.beta_change = vec![0.0, 0.0];
    let (d, _) = generate(&gen, &mut RngStream::new(2024, 0)).unwrap();
    let mut p = PriorConfig::with_spike(2, 0.15);
    p.slab_scale = vec![1.0; 2];
    p.intercept_var_base = 1.0;
    p.intercept_var_change = 1.0;
    p.treatment_var = 1.0;
    p.variance_prior = Some(InverseGammaPrior { shape: 5.0, rate: 4.0 });
    p.shared_gamma = SharedGammaRule::Conjugate;
    (d, p)
}

pub fn geweke_stats() -> Vec<(&'static str, Statistic)> {
    vec![
        ("tau2_change", |s| s.tau2_change),
        ("delta", |s| s.change.treatment),
        ("w1", |s| s.change.included[0] as u8 as f64),
    ]
}

/// Outcomes on a 1/1024 grid so that adding 1024 is exact.
pub fn dyadic_data() -> HdidDataset {
    let mut gen = GenerativeConfig::study(4);
    gen.individuals = 2;
    let (mut d, _) = generate(&gen, &mut RngStream::new(77, 0)).unwrap();
    let round = |y: &mut f64| *y = (*y * 1024.0).round() / 1024.0;
    for g in &mut d.groups {
        g.y_pre.iter_mut().for_each(round);
        g.y_post.iter_mut().for_each(round);
    }
    d
}

/// Individuals' covariance written out from the hierarchy: within a group,
/// every pair shares the baseline variance, post-period pairs also share the
/// change variance, and the diagonal adds the within-group variance.
pub fn dense_sigma(n_pre: &[usize], n_post: &[usize], v: &OracleVariances) -> DMatrix<f64> {
    let mut who = Vec::new();
    for g in 0..n_pre.len() {
        who.extend(std::iter::repeat_n((g, false), n_pre[g]));
    }
    for g in 0..n_post.len() {
        who.extend(std::iter::repeat_n((g, true), n_post[g]));
    }
    let n = who.len();
    let mut s = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let ((gr, post_r), (gc, post_c)) = (who[r], who[c]);
            if gr != gc {
                continue;
            }
            s[(r, c)] = v.tau2_base + if post_r && post_c { v.tau2_change } else { 0.0 };
            if r == c {
                s[(r, c)] += if post_r { v.sigma2_post[gr] } else { v.sigma2_pre[gr] };
            }
        }
    }
    s
}

/// Individual-level design: each individual gets its group's pre or post row.
fn expand(rows: &DMatrix<f64>, n_pre: &[usize], n_post: &[usize]) -> DMatrix<f64> {
    let j = n_pre.len();
    let mut idx = Vec::new();
    for g in 0..j {
        idx.extend(std::iter::repeat_n(g, n_pre[g]));
    }
    for g in 0..j {
        idx.extend(std::iter::repeat_n(j + g, n_post[g]));
    }
    rows.select_rows(&idx)
}

/// GLS coefficients of the included columns fitted to `E[Y] = A B0 Theta0`
/// (the included coefficients set to zero, so the fit is the bias).
pub fn gls_bias(p: &BiasProblem) -> Option<DVector<f64>> {
    let z = expand(&p.b1, &p.n_pre, &p.n_post);
    let ey = expand(&p.b0, &p.n_pre, &p.n_post) * &p.theta0;
    let si = dense_sigma(&p.n_pre, &p.n_post, &p.variances).try_inverse()?;
    let lhs = z.transpose() * &si * &z;
    let rhs = z.transpose() * &si * ey;
    lhs.lu().solve(&rhs)
}

pub fn random_instance(rng: &mut RngStream) -> BiasProblem {
    let j = rng.random_range(2..=4);
    let k = rng.random_range(1..=3);
    let x = DMatrix::from_fn(j, k, |_, _| sample_normal(0.0, 1.0, rng).unwrap());
    let t: Vec<f64> = (0..j).map(|_| sample_normal(0.0, 2.0, rng).unwrap()).collect();
    let coin = |rng: &mut RngStream| rng.random::<f64>() < 0.5;
    let masks = InclusionMasks {
        baseline: (0..k).map(|_| coin(rng)).collect(),
        change: (0..k).map(|_| coin(rng)).collect(),
        treatment_in_baseline: coin(rng),
    };
    let truth = TrueEffects {
        beta_base: (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
        beta_change: (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
        delta_base: rng.random_range(-1.0..1.0),
        delta: 1.0,
    };
    let vars = OracleVariances {
        tau2_base: rng.random_range(0.2..3.0),
        tau2_change: rng.random_range(0.2..3.0),
        sigma2_pre: (0..j).map(|_| rng.random_range(0.2..3.0)).collect(),
        sigma2_post: (0..j).map(|_| rng.random_range(0.2..3.0)).collect(),
    };
    let n_pre: Vec<usize> = (0..j).map(|_| rng.random_range(1..=3)).collect();
    let n_post: Vec<usize> = (0..j).map(|_| rng.random_range(1..=3)).collect();
    build_problem(&x, &t, &masks, &truth, &vars, &n_pre, &n_post).unwrap()
}

/// Identifiable instances: at least one included column and no more
/// included columns than independent rows.
pub fn identifiable_instances(seed: u64, count: usize) -> Vec<BiasProblem> {
    let mut rng = RngStream::new(seed, 0);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(attempts < 500, "too few identifiable instances");
        let p = random_instance(&mut rng);
        if p.b1.ncols() > p.b1.rank(1e-9) || p.theta0.is_empty() {
            continue;
        }
        out.push(p);
    }
    out
}

/// Largest scaled gap between the closed form and brute-force GLS.
pub fn max_gls_gap(p: &BiasProblem) -> f64 {
    let fast = hdid::oracle::theorem1_bias(p).unwrap();
    let brute = gls_bias(p).unwrap();
    (0..brute.len())
        .map(|i| (fast.bias[i] - brute[i]).abs() / (1.0 + brute[i].abs()))
        .fold(0.0, f64::max)
}

/// Monte Carlo covariance of two groups with two individuals per period,
/// returned as the largest entrywise gap in units of its standard error.
pub fn simulated_covariance_worst_z(samples: usize, seed: u64) -> f64 {
    let v = OracleVariances {
        tau2_base: 0.7,
        tau2_change: 1.6,
        sigma2_pre: vec![0.5, 1.2],
        sigma2_post: vec![2.0, 0.3],
    };
    let (n_pre, n_post) = (vec![2, 2], vec![2, 2]);
    let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    let truth = TrueEffects {
        beta_base: vec![0.0],
        beta_change: vec![0.0],
        delta_base: 0.0,
        delta: 0.0,
    };
    let p = build_problem(&x, &[0.5, 1.5], &InclusionMasks::nested(1, &[], true), &truth, &v, &n_pre, &n_post)
        .unwrap();
    let sigma = p.covariance();
    let n = 8;
    let mut rng = RngStream::new(seed, 0);
    let mut sum = DVector::<f64>::zeros(n);
    let mut cross = DMatrix::<f64>::zeros(n, n);
    let mut y = DVector::<f64>::zeros(n);
    for _ in 0..samples {
        let mu: Vec<f64> = (0..2).map(|_| sample_normal(0.0, v.tau2_base, &mut rng).unwrap()).collect();
        let md: Vec<f64> = (0..2).map(|_| sample_normal(0.0, v.tau2_change, &mut rng).unwrap()).collect();
        // Row order: group 1 pre, group 2 pre, group 1 post, group 2 post.
        for g in 0..2 {
            for i in 0..2 {
                y[2 * g + i] = mu[g] + sample_normal(0.0, v.sigma2_pre[g], &mut rng).unwrap();
                y[4 + 2 * g + i] = mu[g] + md[g] + sample_normal(0.0, v.sigma2_post[g], &mut rng).unwrap();
            }
        }
        sum += &y;
        cross.ger(1.0, &y, &y, 1.0);
    }
    let s = samples as f64;
    let mean = sum / s;
    let emp = cross / s - &mean * mean.transpose();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let se = ((sigma[(r, r)] * sigma[(c, c)] + sigma[(r, c)].powi(2)) / s).sqrt();
            worst = worst.max((emp[(r, c)] - sigma[(r, c)]).abs() / se);
        }
    }
    worst
}
