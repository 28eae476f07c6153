//! Random-variate generation and the small dense linear-algebra kernel used
//! by the samplers and the bias oracle.
//!
//! Every stochastic routine takes an explicit generator. [`RngStream`] is a
//! counter-based ChaCha8 stream keyed by `(seed, stream)`, so replication `r`
//! of a study always sees the same variates no matter which worker runs it.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Smallest and largest Bayes factor carried through inclusion updates.
pub const BAYES_FACTOR_MIN: f64 = 1e-300;
pub const BAYES_FACTOR_MAX: f64 = 1e300;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator identified by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream for a sub-task (data generation, one fit, ...) of the
    /// same replication. Independent of how far `self` has advanced.
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(tag)), self.stream)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Dense symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, checking squareness and symmetry to 1e-12 relative to the
    /// largest entry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::Structural(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Structural(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Row-major construction.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Structural(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "normal requires finite mean and variance >= 0, got N({mean}, {variance})"
        )));
    }
    if variance == 0.0 {
        return Ok(mean);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + variance.sqrt() * z)
}

/// Gamma draw under the shape/rate parameterization (mean `shape / rate`).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma requires shape > 0 and rate > 0, got ({shape}, {rate})"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Inverse-gamma draw: `1 / Gamma(shape, rate)`, so the result has density
/// proportional to `x^{-shape-1} exp(-rate / x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / sample_gamma(shape, rate, rng)?)
}

pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    covariance: &SymMatrix,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = covariance.dim();
    if mean.len() != d {
        return Err(Error::Structural(format!(
            "mean has length {}, covariance is {d}x{d}",
            mean.len()
        )));
    }
    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    if let Some(chol) = Cholesky::new(covariance.as_matrix().clone()) {
        return Ok(mean + chol.l() * z);
    }
    // PSD-but-singular (or slightly indefinite from rounding).
    let eig = SymmetricEigen::new(covariance.as_matrix().clone());
    let tol = 1e-8 * covariance.trace().abs().max(f64::MIN_POSITIVE);
    let min_eig = eig.eigenvalues.min();
    if min_eig < -tol {
        return Err(Error::Numerical(format!(
            "covariance is not positive semidefinite (smallest eigenvalue {min_eig:e})"
        )));
    }
    let scaled = DVector::from_fn(d, |i, _| eig.eigenvalues[i].max(0.0).sqrt() * z[i]);
    Ok(mean + &eig.eigenvectors * scaled)
}

pub fn log_normal_density(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "normal density requires variance > 0, got {variance}"
        )));
    }
    let r = x - mean;
    Ok(-0.5 * (2.0 * PI * variance).ln() - r * r / (2.0 * variance))
}

/// One draw from `N(Q^{-1} b, Q^{-1})` given a precision matrix `Q` and the
/// linear term `b`, using a single Cholesky factorization of `Q`.
pub fn sample_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = precision.nrows();
    let chol = Cholesky::new(precision).ok_or_else(|| {
        Error::Numerical(format!("posterior precision ({d}x{d}) is not positive definite"))
    })?;
    let mean = chol.solve(linear);
    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let noise = chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(mean + noise)
}

/// Sample mean and unbiased sample variance.
pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Linear-interpolation quantile of already sorted data (R's type 7).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
