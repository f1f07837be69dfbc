//! Seeded random streams and the variate generators used by the sampler.
//!
//! Inverse-gamma variates are parameterized by `(shape, rate)` everywhere in
//! this crate: the density is proportional to `x^(-shape-1) exp(-rate / x)`,
//! so the mean is `rate / (shape - 1)`. This matches the `IG(a, b)` notation of
//! the Gibbs conditionals; it is *not* the `(shape, scale)` convention of
//! some libraries.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids give non-overlapping sequences from one seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
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

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| standard_normal(rng))
}

/// `IG(shape, rate)` draw, i.e. the reciprocal of a `Gamma(shape, rate)` draw.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::numerical(format!(
            "inverse-gamma needs positive finite shape and rate, got ({shape}, {rate})"
        )));
    }
    let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::numerical(format!("gamma({shape}, 1): {e}")))?;
    let g: f64 = gamma.sample(rng);
    let x = rate / g;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::numerical(format!(
            "inverse-gamma({shape}, {rate}) draw left (0, inf): {x}"
        )))
    }
}

/// Square of a half-t(`nu`, `scale`) variate via its inverse-gamma mixture:
/// `a ~ IG(1/2, 1/scale^2)`, then `x | a ~ IG(nu/2, nu/a)`.
pub fn draw_half_t_sq<R: Rng + ?Sized>(nu: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(nu > 0.0 && scale > 0.0) {
        return Err(Error::numerical(format!(
            "half-t needs positive nu and scale, got ({nu}, {scale})"
        )));
    }
    let a = draw_inverse_gamma(0.5, 1.0 / (scale * scale), rng)?;
    draw_inverse_gamma(0.5 * nu, nu / a, rng)
}

/// `mean + factor * e` with `e` standard normal, so the covariance is
/// `factor * factor'`.
pub fn draw_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov_factor: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let d = mean.len();
    if cov_factor.nrows() != d || cov_factor.ncols() != d {
        return Err(Error::numerical(format!(
            "covariance factor is {}x{}, mean has length {d}",
            cov_factor.nrows(),
            cov_factor.ncols()
        )));
    }
    let e = standard_normal_vec(d, rng);
    Ok(mean + cov_factor * e)
}

/// Gaussian draw given the lower Cholesky factor `L` of a precision matrix:
/// returns `mean + scale * L^{-T} e`, whose covariance is `scale^2 (L L')^{-1}`.
pub fn draw_mvn_precision<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision_chol: &DMatrix<f64>,
    scale: f64,
    rng: &mut R,
) -> DVector<f64> {
    let e = standard_normal_vec(mean.len(), rng);
    let x = precision_chol
        .tr_solve_lower_triangular(&e)
        .expect("Cholesky factor has a positive diagonal");
    mean + x * scale
}

const PG_TRUNC: f64 = 0.64;

/// Exact draw from the Pólya-Gamma `PG(1, c)` distribution.
///
/// Uses Devroye's alternating-series rejection sampler: a proposal that is
/// exponential to the right of `0.64` and a truncated inverse Gaussian to the
/// left, with acceptance decided by partial sums of the series density.
pub fn draw_polya_gamma<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::numerical(format!("Polya-Gamma tilt must be finite, got {c}")));
    }
    let z = 0.5 * c.abs();
    let k = PI * PI / 8.0 + 0.5 * z * z;
    let p_exp = left_mass_ratio(z, k);
    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            PG_TRUNC + e / k
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0usize;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return Ok(0.25 * x);
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability of proposing from the exponential (right) piece.
fn left_mass_ratio(z: f64, k: f64) -> f64 {
    let t = PG_TRUNC;
    let rt = (1.0 / t).sqrt();
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let x0 = k.ln() + k * t;
    let xb = x0 - z + log_norm_cdf(b);
    let xa = x0 + z + log_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

fn log_norm_cdf(x: f64) -> f64 {
    (0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)).ln()
}

fn series_coef(n: usize, x: f64) -> f64 {
    let kk = (n as f64 + 0.5) * PI;
    if x > PG_TRUNC {
        kk * (-0.5 * kk * kk * x).exp()
    } else if x > 0.0 {
        let half = n as f64 + 0.5;
        let expnt = -1.5 * ((0.5 * PI).ln() + x.ln()) + kk.ln() - 2.0 * half * half / x;
        expnt.exp()
    } else {
        0.0
    }
}

/// Inverse Gaussian(mean 1/z, shape 1) truncated to `(0, 0.64)`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = PG_TRUNC;
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        loop {
            let x = loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / t {
                    let d = 1.0 + t * e1;
                    break t / (d * d);
                }
            };
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        loop {
            let n = standard_normal(rng);
            let y = n * n;
            let muy = mu * y;
            let mut x = mu + 0.5 * mu * muy - 0.5 * mu * (4.0 * muy + muy * muy).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// Mean of `PG(1, c)`: `tanh(c/2) / (2c)`, with limit `1/4` at zero.
pub fn polya_gamma_mean(c: f64) -> f64 {
    if c.abs() < 1e-6 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}
