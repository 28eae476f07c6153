use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::conditionals::{
    coefficient_block_draw_gram, gamma_conditional, inclusion_prob, mu_conditional,
    mudiff_conditional, shared_inclusion_prob, sigma_conditionals, tau_conditionals,
    ConditionalParams, RATE_FLOOR,
};
use crate::error::{Error, Result};
use crate::model::{
    initial_state, validate, ChainState, ExposureBlock, HdidDataset, Method, ModelSpec,
    PriorConfig, RegressionBlock, SharedGammaRule,
};

#[derive(Clone, Debug)]
pub struct SamplerOutput {
    /// Retained states, in the original outcome scale.
    pub draws: Vec<ChainState>,
    pub draw_count: usize,
    pub seconds: f64,
}

/// Fixed design of one regression: intercept, optional treatment column and
/// the covariate columns `cols`.
#[derive(Clone, Debug)]
struct Design {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    cols: Vec<usize>,
    has_treatment: bool,
}

impl Design {
    fn new(data: &HdidDataset, has_treatment: bool, cols: Vec<usize>) -> Self {
        let j = data.num_groups();
        let off = 1 + has_treatment as usize;
        let mut x = DMatrix::zeros(j, off + cols.len());
        for r in 0..j {
            x[(r, 0)] = 1.0;
            if has_treatment {
                x[(r, 1)] = data.treatment[r];
            }
            for (c, k) in cols.iter().enumerate() {
                x[(r, off + c)] = data.x[(r, *k)];
            }
        }
        let gram = x.transpose() * &x;
        Self {
            x,
            gram,
            cols,
            has_treatment,
        }
    }

    fn offset(&self) -> usize {
        1 + self.has_treatment as usize
    }

    fn coef_vector(&self, intercept: f64, treatment: f64, coefs: &[f64]) -> DVector<f64> {
        let off = self.offset();
        let mut b = DVector::zeros(off + self.cols.len());
        b[0] = intercept;
        if self.has_treatment {
            b[1] = treatment;
        }
        for (c, k) in self.cols.iter().enumerate() {
            b[off + c] = coefs[*k];
        }
        b
    }

    fn predict(&self, b: &DVector<f64>) -> Vec<f64> {
        (&self.x * b).iter().copied().collect()
    }

    /// Prior precisions: diffuse intercept and treatment, then slab or spike
    /// per covariate according to its indicator.
    fn prior_precision(
        &self,
        intercept_var: f64,
        treatment_var: f64,
        included: &[bool],
        slab_precision: &[f64],
        spike_sd: &[f64],
    ) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.offset() + self.cols.len());
        p.push(1.0 / intercept_var);
        if self.has_treatment {
            p.push(1.0 / treatment_var);
        }
        for &k in &self.cols {
            p.push(if included[k] {
                slab_precision[k]
            } else {
                1.0 / (spike_sd[k] * spike_sd[k])
            });
        }
        p
    }

    fn draw<R: Rng + ?Sized>(
        &self,
        targets: &[f64],
        resvar: f64,
        prior_precision: &[f64],
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let xty = self.x.transpose() * DVector::from_column_slice(targets);
        coefficient_block_draw_gram(&self.gram, &xty, resvar, prior_precision, rng)
    }

    fn write_back(&self, b: &DVector<f64>, intercept: &mut f64, treatment: &mut f64, coefs: &mut [f64]) {
        let off = self.offset();
        *intercept = b[0];
        if self.has_treatment {
            *treatment = b[1];
        }
        for (c, k) in self.cols.iter().enumerate() {
            coefs[*k] = b[off + c];
        }
    }
}

/// Gibbs sampler for one method on one dataset.
///
/// With `ModelSpec::center_outcomes` the chain runs on outcomes centred at
/// their grand mean; [`Sampler::state`] reports the original scale.
#[derive(Clone, Debug)]
pub struct Sampler {
    data: HdidDataset,
    center: f64,
    spec: ModelSpec,
    priors: PriorConfig,
    base: Design,
    change: Design,
    exposure: Option<Design>,
    state: ChainState,
    iteration: usize,
}

impl Sampler {
    pub fn new(dataset: &HdidDataset, spec: &ModelSpec, priors: &PriorConfig) -> Result<Self> {
        validate(dataset, spec, priors).into_result()?;
        let state = initial_state(dataset, spec, priors);
        Self::build(dataset, spec, priors, state)
    }

    /// Starts from a given state (original scale) instead of the default
    /// starting point.
    pub fn with_state(
        dataset: &HdidDataset,
        spec: &ModelSpec,
        priors: &PriorConfig,
        state: ChainState,
    ) -> Result<Self> {
        validate(dataset, spec, priors).into_result()?;
        check_state_shape(dataset, spec, &state)?;
        Self::build(dataset, spec, priors, state)
    }

    fn build(
        dataset: &HdidDataset,
        spec: &ModelSpec,
        priors: &PriorConfig,
        mut state: ChainState,
    ) -> Result<Self> {
        let mut data = dataset.clone();
        let center = if spec.center_outcomes {
            grand_mean(dataset)
        } else {
            0.0
        };
        if center != 0.0 {
            for g in &mut data.groups {
                g.y_pre.iter_mut().for_each(|y| *y -= center);
                g.y_post.iter_mut().for_each(|y| *y -= center);
            }
            state.mu.iter_mut().for_each(|m| *m -= center);
            state.base.intercept -= center;
        }
        let k = dataset.num_covariates();
        let all: Vec<usize> = (0..k).collect();
        let (base_cols, change_cols) = match spec.method.fixed_masks(k) {
            Some((b, c)) => (mask_cols(&b), mask_cols(&c)),
            None => (all.clone(), all.clone()),
        };
        let base = Design::new(&data, spec.adjust_baseline_for_t, base_cols);
        let change = Design::new(&data, true, change_cols);
        let exposure = (spec.method == Method::Sufficient).then(|| Design::new(&data, false, all));
        if spec.method == Method::Sufficient && state.exposure.is_none() {
            return Err(Error::Structural("exposure block missing from the state".into()));
        }
        if !spec.adjust_baseline_for_t {
            state.base.treatment = 0.0;
        }
        Ok(Self {
            data,
            center,
            spec: spec.clone(),
            priors: priors.clone(),
            base,
            change,
            exposure,
            state,
            iteration: 0,
        })
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Current state in the original outcome scale.
    pub fn state(&self) -> ChainState {
        let mut s = self.state.clone();
        if self.center != 0.0 {
            s.mu.iter_mut().for_each(|m| *m += self.center);
            s.base.intercept += self.center;
        }
        s
    }

    /// One full sweep of the update cycle.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let iteration = self.iteration;
        self.sweep(rng).map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::NonFinite {
                iteration,
                what: format!("conditional ({msg})"),
            },
            other => other,
        })?;
        if let Some(what) = first_non_finite(&self.state) {
            return Err(Error::NonFinite {
                iteration: self.iteration,
                what: what.into(),
            });
        }
        self.iteration += 1;
        Ok(())
    }

    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let vprior = self.priors.variance_prior;
        let base_b = self
            .base
            .coef_vector(self.state.base.intercept, self.state.base.treatment, &self.state.base.coefs);
        let change_b = self.change.coef_vector(
            self.state.change.intercept,
            self.state.change.treatment,
            &self.state.change.coefs,
        );
        let base_pred = self.base.predict(&base_b);
        let change_pred = self.change.predict(&change_b);

        for (j, g) in self.data.groups.iter().enumerate() {
            self.state.mu[j] = mu_conditional(g, j, &self.state, base_pred[j]).sample(rng)?;
            self.state.mu_diff[j] = mudiff_conditional(g, j, &self.state, change_pred[j]).sample(rng)?;
            let (pre, post) = sigma_conditionals(g, j, &self.state, vprior);
            if let Some(c) = pre {
                self.state.sigma2_pre[j] = c.sample(rng)?;
            }
            if let Some(c) = post {
                self.state.sigma2_post[j] = c.sample(rng)?;
            }
        }

        let (tb, tc) = tau_conditionals(&self.state, &base_pred, &change_pred, vprior);
        self.state.tau2_base = tb.sample(rng)?;
        self.state.tau2_change = tc.sample(rng)?;

        let p = &self.priors;
        let s = &mut self.state;
        let prec = self.base.prior_precision(
            p.intercept_var_base,
            p.treatment_var,
            &s.base.included,
            &s.base.slab_precision,
            &p.spike_sd,
        );
        let b = self.base.draw(&s.mu, s.tau2_base, &prec, rng)?;
        let blk = &mut s.base;
        self.base.write_back(&b, &mut blk.intercept, &mut blk.treatment, &mut blk.coefs);

        let prec = self.change.prior_precision(
            p.intercept_var_change,
            p.treatment_var,
            &s.change.included,
            &s.change.slab_precision,
            &p.spike_sd,
        );
        let b = self.change.draw(&s.mu_diff, s.tau2_change, &prec, rng)?;
        let blk = &mut s.change;
        self.change.write_back(&b, &mut blk.intercept, &mut blk.treatment, &mut blk.coefs);

        if let (Some(design), Some(ex)) = (&self.exposure, s.exposure.as_mut()) {
            exposure_block_draw(design, &self.data.treatment, ex, p, rng)?;
        }

        match self.spec.method {
            Method::Full | Method::Null | Method::FixedSet { .. } => {
                update_fixed_gammas(&mut s.base, p, rng)?;
                update_fixed_gammas(&mut s.change, p, rng)?;
            }
            Method::Separate => {
                for k in 0..p.num_covariates() {
                    s.base.included[k] = draw_indicator(&s.base, k, p.p_base, p, rng);
                    s.change.included[k] = draw_indicator(&s.change, k, p.p_change, p, rng);
                }
                update_gammas(s, p, rng)?;
            }
            Method::Shared => {
                for k in 0..p.num_covariates() {
                    let z2 = p.spike_sd[k].powi(2);
                    let prob = shared_inclusion_prob(
                        (s.base.coefs[k], s.change.coefs[k]),
                        z2,
                        1.0 / s.change.slab_precision[k],
                        p.p_change,
                    );
                    let w = rng.random::<f64>() < prob;
                    s.base.included[k] = w;
                    s.change.included[k] = w;
                }
                for k in 0..p.num_covariates() {
                    let g = gamma_conditional(
                        s.change.included[k],
                        &[s.base.coefs[k], s.change.coefs[k]],
                        p.slab_df,
                        p.slab_scale[k],
                        p.shared_gamma,
                    )
                    .sample(rng)?;
                    s.base.slab_precision[k] = g;
                    s.change.slab_precision[k] = g;
                }
            }
            Method::Sufficient | Method::Efficient => {
                for k in 0..p.num_covariates() {
                    let allowed = s.exposure.as_ref().is_none_or(|e| e.included[k]);
                    let w = allowed && draw_indicator(&s.change, k, p.p_change, p, rng);
                    s.change.included[k] = w;
                    s.base.included[k] = w && draw_indicator(&s.base, k, p.p_base, p, rng);
                }
                update_gammas(s, p, rng)?;
            }
        }
        Ok(())
    }

    /// Runs the configured number of iterations, calling `observe` with every
    /// retained state (original scale).
    pub fn run_with<R, F>(&mut self, rng: &mut R, mut observe: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(&ChainState),
    {
        let chain = self.spec.chain;
        for i in 0..chain.iterations {
            self.step(rng)?;
            if chain.keeps(i) {
                observe(&self.state());
            }
        }
        Ok(())
    }
}

/// Runs one chain from the default starting point and keeps every retained
/// draw.
pub fn run_sampler<R: Rng + ?Sized>(
    dataset: &HdidDataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    rng: &mut R,
) -> Result<SamplerOutput> {
    let start = Instant::now();
    let mut sampler = Sampler::new(dataset, spec, priors)?;
    let mut draws = Vec::with_capacity(spec.chain.retained());
    sampler.run_with(rng, |s| draws.push(s.clone()))?;
    Ok(SamplerOutput {
        draw_count: draws.len(),
        draws,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exposure regression `T = a0 + X a + e`: residual variance, coefficients,
/// indicators and slab precisions, in that order. Depends only on `T` and
/// `X`, never on the outcome model.
fn exposure_block_draw<R: Rng + ?Sized>(
    design: &Design,
    treatment: &[f64],
    ex: &mut ExposureBlock,
    p: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    let b = design.coef_vector(ex.intercept, 0.0, &ex.coefs);
    let fitted = design.predict(&b);
    let rss: f64 = treatment.iter().zip(&fitted).map(|(t, f)| (t - f).powi(2)).sum();
    let (a0, b0) = p.variance_prior.map_or((0.0, 0.0), |v| (v.shape, v.rate));
    ex.variance = ConditionalParams::InverseGamma {
        shape: a0 + 0.5 * treatment.len() as f64,
        rate: (b0 + 0.5 * rss).max(RATE_FLOOR),
    }
    .sample(rng)?;

    let prec = design.prior_precision(
        p.intercept_var_exposure,
        1.0,
        &ex.included,
        &ex.slab_precision,
        &p.spike_sd,
    );
    let b = design.draw(treatment, ex.variance, &prec, rng)?;
    let mut unused = 0.0;
    design.write_back(&b, &mut ex.intercept, &mut unused, &mut ex.coefs);

    for k in 0..ex.coefs.len() {
        let prob = inclusion_prob(
            ex.coefs[k],
            p.spike_sd[k].powi(2),
            1.0 / ex.slab_precision[k],
            p.p_exposure,
        );
        ex.included[k] = rng.random::<f64>() < prob;
        ex.slab_precision[k] = gamma_conditional(
            ex.included[k],
            &[ex.coefs[k]],
            p.slab_df,
            p.slab_scale[k],
            SharedGammaRule::HalfIncrement,
        )
        .sample(rng)?;
    }
    Ok(())
}

fn draw_indicator<R: Rng + ?Sized>(
    block: &RegressionBlock,
    k: usize,
    prior_p: f64,
    p: &PriorConfig,
    rng: &mut R,
) -> bool {
    let prob = inclusion_prob(
        block.coefs[k],
        p.spike_sd[k].powi(2),
        1.0 / block.slab_precision[k],
        prior_p,
    );
    rng.random::<f64>() < prob
}

fn update_gammas<R: Rng + ?Sized>(s: &mut ChainState, p: &PriorConfig, rng: &mut R) -> Result<()> {
    for blk in [&mut s.base, &mut s.change] {
        for k in 0..blk.coefs.len() {
            blk.slab_precision[k] = gamma_conditional(
                blk.included[k],
                &[blk.coefs[k]],
                p.slab_df,
                p.slab_scale[k],
                SharedGammaRule::HalfIncrement,
            )
            .sample(rng)?;
        }
    }
    Ok(())
}

/// Non-selecting methods: included covariates keep a slab whose precision is
/// updated; excluded ones are out of the design entirely.
fn update_fixed_gammas<R: Rng + ?Sized>(
    blk: &mut RegressionBlock,
    p: &PriorConfig,
    rng: &mut R,
) -> Result<()> {
    for k in 0..blk.coefs.len() {
        if blk.included[k] {
            blk.slab_precision[k] = gamma_conditional(
                true,
                &[blk.coefs[k]],
                p.slab_df,
                p.slab_scale[k],
                SharedGammaRule::HalfIncrement,
            )
            .sample(rng)?;
        }
    }
    Ok(())
}

fn mask_cols(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(k, m)| m.then_some(k))
        .collect()
}

fn grand_mean(d: &HdidDataset) -> f64 {
    let (sum, n) = d
        .groups
        .iter()
        .flat_map(|g| g.y_pre.iter().chain(&g.y_post))
        .fold((0.0, 0usize), |(s, n), y| (s + y, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_state_shape(d: &HdidDataset, spec: &ModelSpec, s: &ChainState) -> Result<()> {
    let j = d.num_groups();
    let k = d.num_covariates();
    let vec_ok = [&s.mu, &s.mu_diff, &s.sigma2_pre, &s.sigma2_post]
        .iter()
        .all(|v| v.len() == j);
    let blk_ok = |b: &RegressionBlock| {
        b.coefs.len() == k && b.included.len() == k && b.slab_precision.len() == k
    };
    let ex_ok = s.exposure.as_ref().is_none_or(|e| {
        e.coefs.len() == k && e.included.len() == k && e.slab_precision.len() == k
    });
    if !(vec_ok && blk_ok(&s.base) && blk_ok(&s.change) && ex_ok) {
        return Err(Error::Structural(format!(
            "state does not match a dataset with {j} groups and {k} covariates"
        )));
    }
    if let Some((b, c)) = spec.method.fixed_masks(k) {
        if s.base.included != b || s.change.included != c {
            return Err(Error::Structural(
                "state indicators disagree with the fixed covariate sets".into(),
            ));
        }
    }
    Ok(())
}

fn first_non_finite(s: &ChainState) -> Option<&'static str> {
    let bad = |xs: &[f64]| xs.iter().any(|x| !x.is_finite());
    if bad(&s.mu) {
        return Some("mu");
    }
    if bad(&s.mu_diff) {
        return Some("mu_diff");
    }
    if bad(&s.sigma2_pre) || bad(&s.sigma2_post) {
        return Some("within-group variance");
    }
    if !s.tau2_base.is_finite() || !s.tau2_change.is_finite() {
        return Some("between-group variance");
    }
    for (name, b) in [("baseline coefficients", &s.base), ("change coefficients", &s.change)] {
        if !b.intercept.is_finite() || !b.treatment.is_finite() || bad(&b.coefs) {
            return Some(name);
        }
        if bad(&b.slab_precision) {
            return Some("slab precision");
        }
    }
    if let Some(e) = &s.exposure {
        if !e.intercept.is_finite() || !e.variance.is_finite() || bad(&e.coefs) || bad(&e.slab_precision)
        {
            return Some("exposure block");
        }
    }
    None
}
