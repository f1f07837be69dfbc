//! Full-conditional updates.
//!
//! One sweep runs, in order: spline coefficients, error variances and
//! smoothing variances for every (component, entry); Pólya-Gamma variables
//! and logistic coefficients with random intercepts for every non-reference
//! component; random-intercept variances; mixing weights; allocations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::init;
use super::InitMethod;
use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::model::{
    log_sum_exp, normalize_log_joint, subject_component_loglik, weight_matrix, ComponentParams, Dataset, EntryParams,
    Hyperparams, LatentState,
};
use crate::rng::{draw_inverse_gamma, draw_mvn_precision, draw_polya_gamma, standard_normal, standard_normal_vec};

/// Linear predictors are clipped to this magnitude before Pólya-Gamma draws.
pub const ETA_CLIP: f64 = 700.0;

/// Complete parameter state of a chain after some number of sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub components: Vec<ComponentParams>,
    pub latent: LatentState,
    /// `N x G` mixing weights implied by the current logistic parameters.
    pub weights: DMatrix<f64>,
}

/// Data-dependent quantities fixed for the life of a chain.
pub struct Sampler<'a> {
    data: &'a Dataset,
    basis: &'a BasisSet,
    hyper: Hyperparams,
    n_components: usize,
    design: DMatrix<f64>,
    sts: DMatrix<f64>,
    /// `S' y_ik`, indexed `i * K + k`.
    sty: Vec<DVector<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, basis: &'a BasisSet, hyper: Hyperparams, n_components: usize) -> Result<Self> {
        hyper.validate()?;
        if n_components == 0 {
            return Err(Error::config("number of components must be at least 1"));
        }
        if basis.grid() != data.grid() {
            return Err(Error::data("basis grid differs from the dataset grid"));
        }
        let design = basis.design();
        let sts = design.transpose() * &design;
        let mut sty = Vec::with_capacity(data.n_subjects() * data.n_entries());
        for i in 0..data.n_subjects() {
            for k in 0..data.n_entries() {
                let y = DVector::from_column_slice(data.series(i, k));
                sty.push(design.tr_mul(&y));
            }
        }
        Ok(Sampler {
            data,
            basis,
            hyper,
            n_components,
            design,
            sts,
            sty,
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn basis(&self) -> &BasisSet {
        self.basis
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    fn reference(&self) -> usize {
        self.n_components - 1
    }

    /// Allocations from `method`, then one draw from the prior for every
    /// other parameter.
    pub fn init_state<R: Rng + ?Sized>(&self, method: InitMethod, rng: &mut R) -> Result<ChainState> {
        let z = match method {
            InitMethod::KMeans => init::kmeans_labels(self.data, self.n_components, rng),
            InitMethod::Random => init::random_labels(self.data.n_subjects(), self.n_components, rng),
        };
        self.prior_state(z, rng)
    }

    /// Draws every non-allocation parameter from its prior, keeping `z`.
    pub fn prior_state<R: Rng + ?Sized>(&self, z: Vec<usize>, rng: &mut R) -> Result<ChainState> {
        let h = &self.hyper;
        let (g_count, k_count) = (self.n_components, self.data.n_entries());
        let n_sub = self.data.n_subjects();
        let p1 = self.data.n_covariates();
        let m = self.basis.m;
        if z.len() != n_sub || z.iter().any(|&g| g >= g_count) {
            return Err(Error::config(
                "initial allocation has the wrong length or an invalid label",
            ));
        }
        let mut a_sigma = DMatrix::zeros(g_count, k_count);
        let mut a_tau = DMatrix::zeros(g_count, k_count);
        let mut a_kappa = DVector::zeros(g_count);
        let mut components = Vec::with_capacity(g_count);
        for g in 0..g_count {
            let mut entries = Vec::with_capacity(k_count);
            for k in 0..k_count {
                a_sigma[(g, k)] = draw_inverse_gamma(0.5, 1.0 / (h.a_sigma * h.a_sigma), rng)?;
                let sigma_sq = draw_inverse_gamma(0.5 * h.nu_sigma, h.nu_sigma / a_sigma[(g, k)], rng)?;
                a_tau[(g, k)] = draw_inverse_gamma(0.5, 1.0 / (h.a_tau * h.a_tau), rng)?;
                let tau_sq = draw_inverse_gamma(0.5 * h.nu_tau, h.nu_tau / a_tau[(g, k)], rng)?;
                let mut theta = standard_normal_vec(2 + m, rng);
                for (q, v) in theta.iter_mut().enumerate() {
                    *v *= if q < 2 { h.sigma_alpha_sq.sqrt() } else { tau_sq.sqrt() };
                }
                entries.push(EntryParams {
                    theta,
                    tau_sq,
                    sigma_sq,
                });
            }
            a_kappa[g] = draw_inverse_gamma(0.5, 1.0 / (h.a_kappa * h.a_kappa), rng)?;
            let kappa_sq = draw_inverse_gamma(0.5 * h.nu_kappa, h.nu_kappa / a_kappa[g], rng)?;
            let (delta, zeta) = if g == self.reference() {
                (DVector::zeros(p1), DVector::zeros(n_sub))
            } else {
                (
                    standard_normal_vec(p1, rng) * h.sigma_delta_sq.sqrt(),
                    standard_normal_vec(n_sub, rng) * kappa_sq.sqrt(),
                )
            };
            components.push(ComponentParams {
                entries,
                delta,
                zeta,
                kappa_sq,
            });
        }
        let weights = weight_matrix(&components, self.data.covariates())?;
        Ok(ChainState {
            components,
            latent: LatentState {
                z,
                omega: DMatrix::from_element(n_sub, g_count, 0.25),
                a_sigma,
                a_tau,
                a_kappa,
            },
            weights,
        })
    }

    /// One full sweep. Returns the observed-data log likelihood evaluated at
    /// the end-of-sweep parameters.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<f64> {
        for g in 0..self.n_components {
            for k in 0..self.data.n_entries() {
                self.step_theta(state, g, k, rng)?;
                self.step_sigma(state, g, k, rng)?;
                self.step_tau(state, g, k, rng)?;
            }
        }
        for g in 0..self.reference() {
            self.step_delta(state, g, rng)?;
        }
        for g in 0..self.n_components {
            self.step_kappa(state, g, rng)?;
        }
        self.update_weights(state)?;
        self.step_allocate(state, rng)
    }

    /// `(u, L)` of the spline-coefficient conditional: the conditional is
    /// `N(u, sigma^2 (L L')^{-1})` where `L L' = N_g S'S + sigma^2 D^{-1}`.
    pub fn theta_conditional(
        &self,
        sum_sty: &DVector<f64>,
        n_g: usize,
        sigma_sq: f64,
        tau_sq: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let p = self.sts.nrows();
        let mut precision = &self.sts * n_g as f64;
        for q in 0..p {
            let prior_var = if q < 2 { self.hyper.sigma_alpha_sq } else { tau_sq };
            precision[(q, q)] += sigma_sq / prior_var;
        }
        let chol = precision.clone().cholesky().ok_or_else(|| {
            Error::numerical(format!(
                "spline coefficient precision is not positive definite (condition number {:e}, \
                 N_g = {n_g}, sigma^2 = {sigma_sq:e}, tau^2 = {tau_sq:e})",
                condition_number(&precision)
            ))
        })?;
        let u = chol.solve(sum_sty);
        Ok((u, chol.l()))
    }

    /// Step 1 for one (component, entry).
    pub fn step_theta<R: Rng + ?Sized>(&self, state: &mut ChainState, g: usize, k: usize, rng: &mut R) -> Result<()> {
        let k_count = self.data.n_entries();
        let mut sum_sty = DVector::zeros(self.sts.nrows());
        let mut n_g = 0usize;
        for (i, &zi) in state.latent.z.iter().enumerate() {
            if zi == g {
                sum_sty += &self.sty[i * k_count + k];
                n_g += 1;
            }
        }
        let entry = &state.components[g].entries[k];
        let (u, l) = self.theta_conditional(&sum_sty, n_g, entry.sigma_sq, entry.tau_sq)?;
        let theta = draw_mvn_precision(&u, &l, entry.sigma_sq.sqrt(), rng);
        state.components[g].entries[k].theta = theta;
        Ok(())
    }

    /// Sum of squared residuals of component `g`, entry `k` over its members.
    pub fn residual_ss(&self, state: &ChainState, g: usize, k: usize) -> (f64, usize) {
        let mu = &self.design * &state.components[g].entries[k].theta;
        let mut ss = 0.0;
        let mut n_g = 0;
        for (i, &zi) in state.latent.z.iter().enumerate() {
            if zi == g {
                n_g += 1;
                ss += self
                    .data
                    .series(i, k)
                    .iter()
                    .zip(mu.iter())
                    .map(|(y, m)| (y - m) * (y - m))
                    .sum::<f64>();
            }
        }
        (ss, n_g)
    }

    /// Step 2: half-t mixing variable, then the error variance.
    pub fn step_sigma<R: Rng + ?Sized>(&self, state: &mut ChainState, g: usize, k: usize, rng: &mut R) -> Result<()> {
        let h = &self.hyper;
        let (ss, n_g) = self.residual_ss(state, g, k);
        let old = state.components[g].entries[k].sigma_sq;
        let (shape, rate) = mixing_conditional(h.nu_sigma, old, h.a_sigma);
        let a = draw_inverse_gamma(shape, rate, rng)?;
        let (shape, rate) = sigma_sq_conditional(h.nu_sigma, ss, self.data.n_times() * n_g, a);
        state.latent.a_sigma[(g, k)] = a;
        state.components[g].entries[k].sigma_sq = draw_inverse_gamma(shape, rate, rng)?;
        Ok(())
    }

    /// Step 3: half-t mixing variable, then the smoothing variance.
    pub fn step_tau<R: Rng + ?Sized>(&self, state: &mut ChainState, g: usize, k: usize, rng: &mut R) -> Result<()> {
        let h = &self.hyper;
        let entry = &state.components[g].entries[k];
        let bb: f64 = entry.beta().iter().map(|b| b * b).sum();
        let (shape, rate) = mixing_conditional(h.nu_tau, entry.tau_sq, h.a_tau);
        let a = draw_inverse_gamma(shape, rate, rng)?;
        let (shape, rate) = tau_sq_conditional(h.nu_tau, bb, entry.beta().len(), a);
        state.latent.a_tau[(g, k)] = a;
        state.components[g].entries[k].tau_sq = draw_inverse_gamma(shape, rate, rng)?;
        Ok(())
    }

    /// Step 4 for a non-reference component: Pólya-Gamma variables for every
    /// subject, then the joint Gaussian draw of `(delta_g, zeta_g)`.
    pub fn step_delta<R: Rng + ?Sized>(&self, state: &mut ChainState, g: usize, rng: &mut R) -> Result<()> {
        if g >= self.reference() {
            return Err(Error::config(format!(
                "component {g} is the reference and has no logistic update"
            )));
        }
        let v = self.data.covariates();
        let n_sub = self.data.n_subjects();
        let eta = crate::model::linear_predictors(&state.components, v);
        let mut offset = DVector::zeros(n_sub);
        let mut omega = DVector::zeros(n_sub);
        let mut others = Vec::with_capacity(self.n_components - 1);
        for i in 0..n_sub {
            others.clear();
            others.extend((0..self.n_components).filter(|&h| h != g).map(|h| eta[(i, h)]));
            let c = log_sum_exp(&others);
            let lin = (eta[(i, g)] - c).clamp(-ETA_CLIP, ETA_CLIP);
            offset[i] = c;
            omega[i] = draw_polya_gamma(lin, rng).map_err(|e| e.context(format!("subject {i}")))?;
            state.latent.omega[(i, g)] = omega[i];
        }
        let xi = DVector::from_fn(n_sub, |i, _| if state.latent.z[i] == g { 0.5 } else { -0.5 });
        let kappa_sq = state.components[g].kappa_sq;
        let draw = LogisticConditional::new(v, &omega, &offset, &xi, self.hyper.sigma_delta_sq, kappa_sq)?.draw(rng);
        state.components[g].delta = draw.0;
        state.components[g].zeta = draw.1;
        Ok(())
    }

    /// Step 5: half-t mixing variable, then the random-intercept variance.
    /// The reference component carries no random intercepts, so its variance
    /// is drawn from the prior chain alone.
    pub fn step_kappa<R: Rng + ?Sized>(&self, state: &mut ChainState, g: usize, rng: &mut R) -> Result<()> {
        let h = &self.hyper;
        let (shape, rate) = mixing_conditional(h.nu_kappa, state.components[g].kappa_sq, h.a_kappa);
        let a = draw_inverse_gamma(shape, rate, rng)?;
        let (shape, rate) = if g == self.reference() {
            kappa_sq_conditional(h.nu_kappa, 0.0, 0, a)
        } else {
            let zeta = &state.components[g].zeta;
            kappa_sq_conditional(h.nu_kappa, zeta.norm_squared(), zeta.len(), a)
        };
        state.latent.a_kappa[g] = a;
        state.components[g].kappa_sq = draw_inverse_gamma(shape, rate, rng)?;
        Ok(())
    }

    /// Step 6.
    pub fn update_weights(&self, state: &mut ChainState) -> Result<()> {
        state.weights = weight_matrix(&state.components, self.data.covariates())?;
        Ok(())
    }

    /// Step 7: redraws every allocation from its conditional. Returns the
    /// observed-data log likelihood, which shares all the work.
    pub fn step_allocate<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<f64> {
        let means = crate::model::all_means(&state.components, &self.design);
        let mut total = 0.0;
        let mut log_joint = vec![0.0; self.n_components];
        for i in 0..self.data.n_subjects() {
            let comp = subject_component_loglik(self.data, i, &means, &state.components);
            for (g, lj) in log_joint.iter_mut().enumerate() {
                *lj = state.weights[(i, g)].ln() + comp[g];
            }
            total += log_sum_exp(&log_joint);
            if self.n_components > 1 {
                let probs = normalize_log_joint(&log_joint).map_err(|e| e.context(format!("subject {i}")))?;
                state.latent.z[i] = draw_categorical(&probs, rng);
            }
        }
        if !total.is_finite() {
            return Err(Error::numerical(format!("observed log likelihood is {total}")));
        }
        Ok(total)
    }
}

/// `(shape, rate)` of the half-t mixing variable given the current variance:
/// `IG((nu + 1)/2, nu/x + 1/A^2)`.
pub fn mixing_conditional(nu: f64, current: f64, scale: f64) -> (f64, f64) {
    (0.5 * (nu + 1.0), nu / current + 1.0 / (scale * scale))
}

/// `(shape, rate)` of an error variance given the residual sum of squares
/// over `n_obs` observations.
pub fn sigma_sq_conditional(nu: f64, ss: f64, n_obs: usize, a: f64) -> (f64, f64) {
    (0.5 * (n_obs as f64 + nu), 0.5 * ss + nu / a)
}

/// `(shape, rate)` of a smoothing variance given `beta' beta` over `m`
/// coefficients.
pub fn tau_sq_conditional(nu: f64, beta_sq: f64, m: usize, a: f64) -> (f64, f64) {
    (0.5 * (nu + m as f64), 0.5 * beta_sq + nu / a)
}

/// `(shape, rate)` of a random-intercept variance given `zeta' zeta` over
/// `n` subjects.
pub fn kappa_sq_conditional(nu: f64, zeta_sq: f64, n: usize, a: f64) -> (f64, f64) {
    (0.5 * (nu + n as f64), 0.5 * zeta_sq + nu / a)
}

pub fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for (g, &p) in probs.iter().enumerate() {
        if u < p {
            return g;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    max / min
}

/// Gaussian conditional of `(delta_g, zeta_g)` given Pólya-Gamma variables.
///
/// With augmented rows `(V_i', e_i')`, precision
/// `Q = V*' Omega V* + B^{-1}` and canonical mean `b = V*' (Omega C + xi)`.
/// `Q` has an arrowhead shape: a dense `(P+1)` block, a diagonal `N` block
/// `d_i = omega_i + 1/kappa^2`, and coupling `V' Omega`. The draw goes through
/// the Schur complement: `delta` from its marginal, then each `zeta_i` from
/// its scalar conditional, which is exact and costs `O(N P^2)`.
pub struct LogisticConditional {
    v: DMatrix<f64>,
    omega: DVector<f64>,
    r: DVector<f64>,
    d: DVector<f64>,
    delta_mean: DVector<f64>,
    delta_chol: DMatrix<f64>,
}

impl LogisticConditional {
    pub fn new(
        v: &DMatrix<f64>,
        omega: &DVector<f64>,
        offset: &DVector<f64>,
        xi: &DVector<f64>,
        sigma_delta_sq: f64,
        kappa_sq: f64,
    ) -> Result<Self> {
        let (n_sub, p1) = v.shape();
        let s = 1.0 / kappa_sq;
        let r = omega.component_mul(offset) + xi;
        let d = omega.map(|w| w + s);
        let mut q = DMatrix::from_diagonal_element(p1, p1, 1.0 / sigma_delta_sq);
        let mut h = DVector::zeros(p1);
        for i in 0..n_sub {
            let vi = v.row(i).transpose();
            let weight = omega[i] * s / d[i];
            q.ger(weight, &vi, &vi, 1.0);
            h.axpy(r[i] * s / d[i], &vi, 1.0);
        }
        let chol = q.clone().cholesky().ok_or_else(|| {
            Error::numerical(format!(
                "logistic precision is not positive definite (condition number {:e}, kappa^2 = {kappa_sq:e})",
                condition_number(&q)
            ))
        })?;
        let delta_mean = chol.solve(&h);
        Ok(LogisticConditional {
            v: v.clone(),
            omega: omega.clone(),
            r,
            d,
            delta_mean,
            delta_chol: chol.l(),
        })
    }

    /// Conditional mean and covariance of the stacked `(delta, zeta)`.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let (n_sub, p1) = self.v.shape();
        let id = DMatrix::identity(p1, p1);
        let cov_delta = self
            .delta_chol
            .solve_lower_triangular(&id)
            .map(|linv| linv.transpose() * linv)
            .expect("positive diagonal");
        let mut mean = DVector::zeros(p1 + n_sub);
        mean.rows_mut(0, p1).copy_from(&self.delta_mean);
        // zeta_i = (r_i - omega_i V_i' delta + e) / d_i
        let mut a = DMatrix::zeros(n_sub, p1);
        for i in 0..n_sub {
            let coef = -self.omega[i] / self.d[i];
            a.row_mut(i).copy_from(&(self.v.row(i) * coef));
            mean[p1 + i] = (self.r[i] - self.omega[i] * self.v.row(i).dot(&self.delta_mean.transpose())) / self.d[i];
        }
        let mut cov = DMatrix::zeros(p1 + n_sub, p1 + n_sub);
        cov.view_mut((0, 0), (p1, p1)).copy_from(&cov_delta);
        let cross = &a * &cov_delta;
        cov.view_mut((p1, 0), (n_sub, p1)).copy_from(&cross);
        cov.view_mut((0, p1), (p1, n_sub)).copy_from(&cross.transpose());
        let mut zz = &cross * a.transpose();
        for i in 0..n_sub {
            zz[(i, i)] += 1.0 / self.d[i];
        }
        cov.view_mut((p1, p1), (n_sub, n_sub)).copy_from(&zz);
        (mean, cov)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let delta = draw_mvn_precision(&self.delta_mean, &self.delta_chol, 1.0, rng);
        let n_sub = self.v.nrows();
        let zeta = DVector::from_fn(n_sub, |i, _| {
            let mean = (self.r[i] - self.omega[i] * self.v.row(i).dot(&delta.transpose())) / self.d[i];
            mean + standard_normal(rng) / self.d[i].sqrt()
        });
        (delta, zeta)
    }
}
