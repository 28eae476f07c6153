//! Closed-form omitted-variable bias of the treatment effect.
//!
//! Write the marginal model as `Y = A (B1 Theta1 + B0 Theta0) + e`,
//! `e ~ N(0, Sigma)`, where `A` maps group-level pre/post means to
//! individuals, `B1` holds the columns the fitted model includes and `B0`
//! the omitted ones. Fitting only `B1` by generalized least squares gives
//!
//! ```text
//! bias(Theta1) = (B1' A' S^-1 A B1)^-1 B1' A' S^-1 A B0 Theta0.
//! ```
//!
//! `Sigma` is block diagonal by group, so `A' Sigma^-1 A` reduces to one
//! 2x2 matrix per group and nothing of size `N x N` is ever formed except by
//! the explicit [`BiasProblem::covariance`] accessor.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_design, GenerativeConfig};
use crate::error::{Error, Result};
use crate::numerics::{mean_and_variance, RngStream};

/// Variance components. Within-group variances may differ by group.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleVariances {
    pub tau2_base: f64,
    pub tau2_change: f64,
    pub sigma2_pre: Vec<f64>,
    pub sigma2_post: Vec<f64>,
}

impl OracleVariances {
    pub fn uniform(j: usize, tau2_base: f64, tau2_change: f64, sigma2_pre: f64, sigma2_post: f64) -> Self {
        Self {
            tau2_base,
            tau2_change,
            sigma2_pre: vec![sigma2_pre; j],
            sigma2_post: vec![sigma2_post; j],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            tau2_base: c * self.tau2_base,
            tau2_change: c * self.tau2_change,
            sigma2_pre: self.sigma2_pre.iter().map(|v| c * v).collect(),
            sigma2_post: self.sigma2_post.iter().map(|v| c * v).collect(),
        }
    }
}

/// Covariates included in the fitted model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionMasks {
    pub baseline: Vec<bool>,
    pub change: Vec<bool>,
    pub treatment_in_baseline: bool,
}

impl InclusionMasks {
    pub fn nested(k: usize, included: &[usize], treatment_in_baseline: bool) -> Self {
        let mut m = vec![false; k];
        for &i in included {
            m[i] = true;
        }
        Self {
            baseline: m.clone(),
            change: m,
            treatment_in_baseline,
        }
    }
}

/// True coefficients of the generating model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueEffects {
    pub beta_base: Vec<f64>,
    pub beta_change: Vec<f64>,
    pub delta_base: f64,
    pub delta: f64,
}

impl From<&GenerativeConfig> for TrueEffects {
    fn from(c: &GenerativeConfig) -> Self {
        Self {
            beta_base: c.beta_base.clone(),
            beta_change: c.beta_change.clone(),
            delta_base: c.delta_base,
            delta: c.delta,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BiasProblem {
    /// Included group-level columns: rows `0..J` are pre-period means, rows
    /// `J..2J` post-period means.
    pub b1: DMatrix<f64>,
    /// Omitted group-level columns, same row layout.
    pub b0: DMatrix<f64>,
    pub theta0: DVector<f64>,
    pub theta1_labels: Vec<String>,
    pub theta0_labels: Vec<String>,
    /// Position of the treatment effect within `Theta1`.
    pub delta_index: usize,
    pub n_pre: Vec<usize>,
    pub n_post: Vec<usize>,
    pub variances: OracleVariances,
}

#[derive(Clone, Debug)]
pub struct BiasResult {
    pub bias: DVector<f64>,
    pub delta_bias: f64,
}

/// Column of the canonical layout `[baseline X, baseline T, change X, change T]`.
fn canonical_label(k: usize, c: usize) -> String {
    match c {
        c if c < k => format!("X{} (baseline)", c + 1),
        c if c == k => "T (baseline)".into(),
        c if c < 2 * k + 1 => format!("X{} (change)", c - k),
        _ => "T (change)".into(),
    }
}

/// Canonical group-level design `[X, T, 0, 0; X, T, X, T]`.
fn canonical_design(x: &DMatrix<f64>, t: &[f64]) -> DMatrix<f64> {
    let j = x.nrows();
    let k = x.ncols();
    let mut b = DMatrix::zeros(2 * j, 2 * k + 2);
    for r in 0..j {
        for c in 0..k {
            b[(r, c)] = x[(r, c)];
            b[(j + r, c)] = x[(r, c)];
            b[(j + r, k + 1 + c)] = x[(r, c)];
        }
        b[(r, k)] = t[r];
        b[(j + r, k)] = t[r];
        b[(j + r, 2 * k + 1)] = t[r];
    }
    b
}

fn canonical_theta(e: &TrueEffects) -> Vec<f64> {
    let mut th = e.beta_base.clone();
    th.push(e.delta_base);
    th.extend_from_slice(&e.beta_change);
    th.push(e.delta);
    th
}

/// Canonical column indices `(included, omitted)`.
fn split_columns(k: usize, m: &InclusionMasks) -> (Vec<usize>, Vec<usize>) {
    let mut inc = Vec::new();
    let mut exc = Vec::new();
    for c in 0..2 * k + 2 {
        let keep = match c {
            c if c < k => m.baseline[c],
            c if c == k => m.treatment_in_baseline,
            c if c < 2 * k + 1 => m.change[c - k - 1],
            _ => true,
        };
        if keep {
            inc.push(c);
        } else {
            exc.push(c);
        }
    }
    (inc, exc)
}

pub fn build_problem(
    x: &DMatrix<f64>,
    t: &[f64],
    masks: &InclusionMasks,
    truth: &TrueEffects,
    variances: &OracleVariances,
    n_pre: &[usize],
    n_post: &[usize],
) -> Result<BiasProblem> {
    let j = x.nrows();
    let k = x.ncols();
    let lens = [
        t.len(),
        n_pre.len(),
        n_post.len(),
        variances.sigma2_pre.len(),
        variances.sigma2_post.len(),
    ];
    if lens.iter().any(|l| *l != j) {
        return Err(Error::Structural(format!(
            "{j} groups but lengths (T, n_pre, n_post, sigma2_pre, sigma2_post) = {lens:?}"
        )));
    }
    let klens = [
        masks.baseline.len(),
        masks.change.len(),
        truth.beta_base.len(),
        truth.beta_change.len(),
    ];
    if klens.iter().any(|l| *l != k) {
        return Err(Error::Structural(format!(
            "{k} covariates but lengths (baseline mask, change mask, beta_base, beta_change) = {klens:?}"
        )));
    }
    let all_vars = variances
        .sigma2_pre
        .iter()
        .chain(&variances.sigma2_post)
        .chain([&variances.tau2_base, &variances.tau2_change]);
    for v in all_vars {
        if !(*v > 0.0) {
            return Err(Error::InvalidParameter(format!("variance {v} must be > 0")));
        }
    }
    let full = canonical_design(x, t);
    let theta = canonical_theta(truth);
    let (inc, exc) = split_columns(k, masks);
    Ok(BiasProblem {
        b1: full.select_columns(&inc),
        b0: full.select_columns(&exc),
        theta0: DVector::from_iterator(exc.len(), exc.iter().map(|c| theta[*c])),
        theta1_labels: inc.iter().map(|c| canonical_label(k, *c)).collect(),
        theta0_labels: exc.iter().map(|c| canonical_label(k, *c)).collect(),
        delta_index: inc.len() - 1,
        n_pre: n_pre.to_vec(),
        n_post: n_post.to_vec(),
        variances: variances.clone(),
    })
}

impl BiasProblem {
    pub fn num_groups(&self) -> usize {
        self.n_pre.len()
    }

    pub fn num_individuals(&self) -> usize {
        self.n_pre.iter().sum::<usize>() + self.n_post.iter().sum::<usize>()
    }

    /// Individual-to-group-mean map: all pre-period rows (group by group)
    /// first, then all post-period rows.
    pub fn assignment_matrix(&self) -> DMatrix<f64> {
        let j = self.num_groups();
        let mut a = DMatrix::zeros(self.num_individuals(), 2 * j);
        let mut row = 0;
        for (period, sizes) in [&self.n_pre, &self.n_post].into_iter().enumerate() {
            for (g, n) in sizes.iter().enumerate() {
                for _ in 0..*n {
                    a[(row, period * j + g)] = 1.0;
                    row += 1;
                }
            }
        }
        a
    }

    /// Marginal covariance of the outcomes in the row order of
    /// [`BiasProblem::assignment_matrix`].
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.num_individuals();
        let v = &self.variances;
        let mut group_of = Vec::with_capacity(n);
        for (period, sizes) in [&self.n_pre, &self.n_post].into_iter().enumerate() {
            for (g, k) in sizes.iter().enumerate() {
                group_of.extend(std::iter::repeat_n((period, g), *k));
            }
        }
        DMatrix::from_fn(n, n, |r, c| {
            let (pr, gr) = group_of[r];
            let (pc, gc) = group_of[c];
            if gr != gc {
                return 0.0;
            }
            let mut s = v.tau2_base;
            if pr == 1 && pc == 1 {
                s += v.tau2_change;
            }
            if r == c {
                s += if pr == 0 { v.sigma2_pre[gr] } else { v.sigma2_post[gr] };
            }
            s
        })
    }

    /// `A' Sigma^-1 A` contribution of each group as a 2x2 (pre, post) matrix.
    fn group_weights(&self) -> Result<Vec<Matrix2<f64>>> {
        group_weights(&self.n_pre, &self.n_post, &self.variances)
    }
}

fn group_weights(n_pre: &[usize], n_post: &[usize], v: &OracleVariances) -> Result<Vec<Matrix2<f64>>> {
    let mut cache: HashMap<(usize, usize, u64, u64), Matrix2<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(n_pre.len());
    for g in 0..n_pre.len() {
        let key = (n_pre[g], n_post[g], v.sigma2_pre[g].to_bits(), v.sigma2_post[g].to_bits());
        if let Some(m) = cache.get(&key) {
            out.push(*m);
            continue;
        }
        let m = single_group_weight(n_pre[g], n_post[g], v.sigma2_pre[g], v.sigma2_post[g], v)?;
        cache.insert(key, m);
        out.push(m);
    }
    Ok(out)
}

fn single_group_weight(n0: usize, n1: usize, s0: f64, s1: f64, v: &OracleVariances) -> Result<Matrix2<f64>> {
    let n = n0 + n1;
    if n == 0 {
        return Ok(Matrix2::zeros());
    }
    let sigma = DMatrix::from_fn(n, n, |r, c| {
        let (pr, pc) = ((r >= n0) as usize, (c >= n0) as usize);
        let mut s = v.tau2_base;
        if pr == 1 && pc == 1 {
            s += v.tau2_change;
        }
        if r == c {
            s += if pr == 0 { s0 } else { s1 };
        }
        s
    });
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::Numerical("group covariance is not positive definite".into()))?;
    let c = DMatrix::from_fn(n, 2, |r, col| if (r >= n0) as usize == col { 1.0 } else { 0.0 });
    let z = chol.solve(&c);
    let m = c.transpose() * z;
    Ok(Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
}

/// `B' A' Sigma^-1 A B` accumulated group by group.
fn normal_matrix(b: &DMatrix<f64>, weights: &[Matrix2<f64>]) -> DMatrix<f64> {
    let j = weights.len();
    let p = b.ncols();
    let mut g = DMatrix::zeros(p, p);
    for (r, w) in weights.iter().enumerate() {
        for a in 0..p {
            let (u0, u1) = (b[(r, a)], b[(j + r, a)]);
            let wa0 = w[(0, 0)] * u0 + w[(1, 0)] * u1;
            let wa1 = w[(0, 1)] * u0 + w[(1, 1)] * u1;
            if wa0 == 0.0 && wa1 == 0.0 {
                continue;
            }
            for c in a..p {
                let v = wa0 * b[(r, c)] + wa1 * b[(j + r, c)];
                g[(a, c)] += v;
            }
        }
    }
    for a in 0..p {
        for c in 0..a {
            g[(a, c)] = g[(c, a)];
        }
    }
    g
}

/// Solves `G11 x = rhs`, naming the first column that makes `G11` singular.
fn solve_normal(g11: DMatrix<f64>, rhs: &DVector<f64>, labels: &[String]) -> Result<DVector<f64>> {
    let p = g11.nrows();
    let singular = |i: usize| {
        Error::Numerical(format!(
            "normal matrix is singular: column '{}' is collinear with the columns before it",
            labels.get(i).map_or("?", String::as_str)
        ))
    };
    for i in 0..p {
        if !(g11[(i, i)] > 0.0) {
            return Err(singular(i));
        }
    }
    match Cholesky::new(g11.clone()) {
        Some(ch) => {
            let l = ch.l_dirty();
            for i in 0..p {
                if l[(i, i)] * l[(i, i)] <= 1e-12 * g11[(i, i)] {
                    return Err(singular(i));
                }
            }
            Ok(ch.solve(rhs))
        }
        None => {
            let bad = (1..=p)
                .find(|m| {
                    let sub = g11.view((0, 0), (*m, *m)).into_owned();
                    Cholesky::new(sub).is_none()
                })
                .unwrap_or(p);
            Err(singular(bad - 1))
        }
    }
}

/// Bias of every included coefficient, and of the treatment effect.
pub fn theorem1_bias(problem: &BiasProblem) -> Result<BiasResult> {
    let p1 = problem.b1.ncols();
    if problem.theta0.is_empty() {
        return Ok(BiasResult {
            bias: DVector::zeros(p1),
            delta_bias: 0.0,
        });
    }
    let weights = problem.group_weights()?;
    let mut b = DMatrix::zeros(problem.b1.nrows(), p1 + problem.b0.ncols());
    b.columns_mut(0, p1).copy_from(&problem.b1);
    b.columns_mut(p1, problem.b0.ncols()).copy_from(&problem.b0);
    let g = normal_matrix(&b, &weights);
    let g11 = g.view((0, 0), (p1, p1)).into_owned();
    let g10 = g.view((0, p1), (p1, problem.b0.ncols())).into_owned();
    let rhs = g10 * &problem.theta0;
    let bias = solve_normal(g11, &rhs, &problem.theta1_labels)?;
    Ok(BiasResult {
        delta_bias: bias[problem.delta_index],
        bias,
    })
}

/// Treatment-effect bias for several inclusion sets on one `(X, T)`, sharing
/// a single normal matrix over the canonical columns.
fn delta_biases(
    x: &DMatrix<f64>,
    t: &[f64],
    truth: &TrueEffects,
    weights: &[Matrix2<f64>],
    sets: &[InclusionMasks],
) -> Result<Vec<f64>> {
    let k = x.ncols();
    let g = normal_matrix(&canonical_design(x, t), weights);
    let theta = canonical_theta(truth);
    sets.iter()
        .map(|m| {
            let (inc, exc) = split_columns(k, m);
            if exc.is_empty() {
                return Ok(0.0);
            }
            let g11 = g.select_rows(&inc).select_columns(&inc);
            let g10 = g.select_rows(&inc).select_columns(&exc);
            let th0 = DVector::from_iterator(exc.len(), exc.iter().map(|c| theta[*c]));
            let labels: Vec<String> = inc.iter().map(|c| canonical_label(k, *c)).collect();
            let bias = solve_normal(g11, &(g10 * th0), &labels)?;
            Ok(bias[inc.len() - 1])
        })
        .collect()
}

/// Mean treatment-effect bias of one inclusion set over replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub mean: f64,
    /// Monte-Carlo standard error of `mean`.
    pub se: f64,
}

/// One row of the sequential-adjustment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub label: String,
    pub no_adjust: SweepPoint,
    pub adjust: SweepPoint,
}

/// Adjustment order of the standard sweep (0-based covariate indices):
/// X1, X3, X2, X5, X7, X6, X4, then everything.
pub const TABLE_A1_ORDER: [usize; 7] = [0, 2, 1, 4, 6, 5, 3];

/// Mean treatment-effect bias for the nested sets `{}`, `{order[0]}`,
/// `{order[0], order[1]}`, ..., and finally every covariate, averaged over
/// `replications` draws of `(X, T)`. Replication `r` uses stream `r` of
/// `seed`, so the result does not depend on the thread count.
pub fn sequential_sweep(
    config: &GenerativeConfig,
    order: &[usize],
    adjust_t: bool,
    replications: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    Ok(sweep_both(config, order, replications, seed)?
        .into_iter()
        .map(|r| if adjust_t { r.adjust } else { r.no_adjust })
        .collect())
}

/// Both columns (baseline adjusted and not adjusted for `T`) of the sweep,
/// computed on the same designs.
pub fn sweep_both(
    config: &GenerativeConfig,
    order: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<BiasRow>> {
    config.validate()?;
    let k = config.num_covariates();
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be >= 1".into()));
    }
    if let Some(bad) = order.iter().find(|i| **i >= k) {
        return Err(Error::InvalidParameter(format!("covariate index {bad} out of range")));
    }
    let mut labels = vec!["Null".to_string()];
    let mut prefixes: Vec<Vec<usize>> = vec![vec![]];
    for (i, c) in order.iter().enumerate() {
        labels.push(format!("+X{}", c + 1));
        prefixes.push(order[..=i].to_vec());
    }
    labels.push("Full".into());
    prefixes.push((0..k).collect());
    let sets: Vec<InclusionMasks> = [false, true]
        .iter()
        .flat_map(|adj| prefixes.iter().map(move |p| InclusionMasks::nested(k, p, *adj)))
        .collect();

    let j = config.groups;
    let v = config.variances;
    let vars = OracleVariances::uniform(j, v.tau2_base, v.tau2_change, v.sigma2_pre, v.sigma2_post);
    let n = vec![config.individuals; j];
    let weights = group_weights(&n, &n, &vars)?;
    let truth = TrueEffects::from(config);

    let per_rep: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r as u64);
            let (x, t) = generate_design(config, &mut rng)?;
            delta_biases(&x, &t, &truth, &weights, &sets)
        })
        .collect::<Result<_>>()?;

    let np = prefixes.len();
    let point = |s: usize| {
        let col: Vec<f64> = per_rep.iter().map(|b| b[s]).collect();
        let (mean, var) = mean_and_variance(&col);
        SweepPoint {
            label: labels[s % np].clone(),
            mean,
            se: (var / replications as f64).sqrt(),
        }
    };
    Ok((0..np)
        .map(|s| BiasRow {
            label: labels[s].clone(),
            no_adjust: point(s),
            adjust: point(np + s),
        })
        .collect())
}

/// The standard sweep on the eight-covariate study design.
pub fn table_a1_sweep(config: &GenerativeConfig, replications: usize, seed: u64) -> Result<Vec<BiasRow>> {
    sweep_both(config, &TABLE_A1_ORDER, replications, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::GenerativeConfig;

    fn small_problem(masks: &InclusionMasks) -> BiasProblem {
        let x = DMatrix::from_row_slice(4, 2, &[0.3, -1.0, 1.2, 0.4, -0.7, 0.9, 0.1, -0.2]);
        let t = [0.5, 1.5, -0.3, 0.8];
        let truth = TrueEffects {
            beta_base: vec![1.0, 0.5],
            beta_change: vec![1.0, -0.5],
            delta_base: 0.0,
            delta: 1.0,
        };
        let v = OracleVariances::uniform(4, 1.0, 1.0, 1.0, 1.0);
        build_problem(&x, &t, masks, &truth, &v, &[2, 1, 3, 2], &[2, 2, 1, 2]).unwrap()
    }

    #[test]
    fn single_individual_covariance() {
        let p = build_problem(
            &DMatrix::zeros(1, 0),
            &[1.0],
            &InclusionMasks::nested(0, &[], true),
            &TrueEffects {
                beta_base: vec![],
                beta_change: vec![],
                delta_base: 0.0,
                delta: 1.0,
            },
            &OracleVariances::uniform(1, 2.0, 3.0, 1.0, 1.0),
            &[1],
            &[1],
        )
        .unwrap();
        assert_eq!(p.covariance(), DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 6.0]));
    }

    #[test]
    fn assignment_structure() {
        let p = small_problem(&InclusionMasks::nested(2, &[0], true));
        let a = p.assignment_matrix();
        assert_eq!(a.nrows(), 15);
        assert_eq!(a.ncols(), 8);
        assert_eq!(a.row(0).iter().copied().collect::<Vec<_>>(), vec![1., 0., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(a.row(2)[1], 1.0);
        assert_eq!(a.row(8)[4], 1.0);
    }

    #[test]
    fn full_model_has_no_bias() {
        let p = small_problem(&InclusionMasks::nested(2, &[0, 1], true));
        assert_eq!(p.b0.ncols(), 0);
        assert!(p.theta0.is_empty());
        let r = theorem1_bias(&p).unwrap();
        assert_eq!(r.delta_bias, 0.0);
    }

    #[test]
    fn efficient_matches_dense_formula() {
        let p = small_problem(&InclusionMasks::nested(2, &[1], false));
        let a = p.assignment_matrix();
        let s_inv = p.covariance().try_inverse().unwrap();
        let ab1 = &a * &p.b1;
        let ab0 = &a * &p.b0;
        let g11 = ab1.transpose() * &s_inv * &ab1;
        let g10 = ab1.transpose() * &s_inv * &ab0;
        let dense = g11.try_inverse().unwrap() * g10 * &p.theta0;
        let fast = theorem1_bias(&p).unwrap();
        assert!((dense - &fast.bias).amax() < 1e-10);
        assert_eq!(p.theta1_labels[p.delta_index], "T (change)");
    }

    #[test]
    fn covariance_scale_cancels() {
        let mut p = small_problem(&InclusionMasks::nested(2, &[], true));
        let a = theorem1_bias(&p).unwrap().delta_bias;
        p.variances = p.variances.scaled(7.5);
        let b = theorem1_bias(&p).unwrap().delta_bias;
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn collinear_column_is_named() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let p = build_problem(
            &x,
            &[0.1, 0.7, 0.2],
            &InclusionMasks::nested(2, &[0, 1], true),
            &TrueEffects {
                beta_base: vec![0.0, 0.0],
                beta_change: vec![0.0, 0.0],
                delta_base: 0.0,
                delta: 0.0,
            },
            &OracleVariances::uniform(3, 1.0, 1.0, 1.0, 1.0),
            &[2, 2, 2],
            &[2, 2, 2],
        )
        .unwrap();
        let mut p = p;
        // force a nonempty omitted set so the solve runs
        p.b0 = DMatrix::from_element(6, 1, 1.0);
        p.theta0 = DVector::from_element(1, 1.0);
        p.theta0_labels = vec!["extra".into()];
        let err = theorem1_bias(&p).unwrap_err().to_string();
        assert!(err.contains("X2 (baseline)"), "{err}");
    }

    #[test]
    fn sweep_is_deterministic_and_full_row_is_zero() {
        let c = GenerativeConfig::study(50);
        let a = table_a1_sweep(&c, 20, 3).unwrap();
        let b = table_a1_sweep(&c, 20, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        assert_eq!(a[0].label, "Null");
        assert_eq!(a[2].label, "+X3");
        assert_eq!(a[8].label, "Full");
        assert_eq!(a[8].adjust.mean, 0.0);
    }
}
