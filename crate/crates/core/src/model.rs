//! Data and parameter types, component densities, covariate-driven mixing
//! weights and allocation probabilities.
//!
//! All density arithmetic is done on the log scale: with `n * K` observations
//! per subject the summed log densities routinely reach `1e3..1e4` in
//! magnitude, far outside what `exp` can represent.

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisSet, TimeGrid};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior hyperparameters. Scale priors are half-t(`nu`, `a`) on the standard
/// deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Prior variance of every intercept and slope.
    pub sigma_alpha_sq: f64,
    pub nu_sigma: f64,
    pub a_sigma: f64,
    pub nu_tau: f64,
    pub a_tau: f64,
    pub nu_kappa: f64,
    pub a_kappa: f64,
    /// Prior variance of every logistic coefficient.
    pub sigma_delta_sq: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            sigma_alpha_sq: 100.0,
            nu_sigma: 3.0,
            a_sigma: 10.0,
            nu_tau: 3.0,
            a_tau: 10.0,
            nu_kappa: 3.0,
            a_kappa: 10.0,
            sigma_delta_sq: 10.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_alpha_sq", self.sigma_alpha_sq),
            ("nu_sigma", self.nu_sigma),
            ("a_sigma", self.a_sigma),
            ("nu_tau", self.nu_tau),
            ("a_tau", self.a_tau),
            ("nu_kappa", self.nu_kappa),
            ("a_kappa", self.a_kappa),
            ("sigma_delta_sq", self.sigma_delta_sq),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Centering/scaling applied to continuous covariate columns at ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    /// Indices into the covariate matrix (never 0, the intercept).
    pub columns: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// `N` subjects, each with `K` series on a common grid, plus an
/// `N x (P + 1)` covariate matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    n_subjects: usize,
    n_entries: usize,
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
    grid: TimeGrid,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// `y` is laid out subject-major, then entry, then time:
    /// index `(i * K + k) * n + j`.
    pub fn new(
        y: Vec<f64>,
        n_subjects: usize,
        n_entries: usize,
        grid: TimeGrid,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = grid.len();
        if n_subjects == 0 || n_entries == 0 {
            return Err(Error::data("dataset needs at least one subject and one entry"));
        }
        if y.len() != n_subjects * n_entries * n {
            return Err(Error::data(format!(
                "response length {} does not match N*K*n = {}*{}*{}",
                y.len(),
                n_subjects,
                n_entries,
                n
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            let (i, rest) = (pos / (n_entries * n), pos % (n_entries * n));
            return Err(Error::data(format!(
                "non-finite response for subject {}, entry {}, time index {}",
                i,
                rest / n,
                rest % n
            )));
        }
        if covariates.nrows() != n_subjects || covariates.ncols() == 0 {
            return Err(Error::data(format!(
                "covariate matrix is {}x{}, expected {} rows with an intercept column",
                covariates.nrows(),
                covariates.ncols(),
                n_subjects
            )));
        }
        if covariate_names.len() + 1 != covariates.ncols() {
            return Err(Error::data(format!(
                "{} covariate names for {} non-intercept columns",
                covariate_names.len(),
                covariates.ncols() - 1
            )));
        }
        for i in 0..n_subjects {
            if covariates[(i, 0)] != 1.0 {
                return Err(Error::data(format!("intercept column is not 1 for subject {i}")));
            }
            for p in 0..covariates.ncols() {
                if !covariates[(i, p)].is_finite() {
                    return Err(Error::data(format!("non-finite covariate {p} for subject {i}")));
                }
            }
        }
        Ok(Dataset {
            y,
            n_subjects,
            n_entries,
            covariates,
            covariate_names,
            grid,
            standardization: None,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_entries(&self) -> usize {
        self.n_entries
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    /// Number of covariate columns including the intercept (`P + 1`).
    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// The trajectory of subject `i`, entry `k`.
    pub fn series(&self, i: usize, k: usize) -> &[f64] {
        let n = self.grid.len();
        let start = (i * self.n_entries + k) * n;
        &self.y[start..start + n]
    }

    /// Centers and scales every continuous covariate (more than two distinct
    /// values) to mean 0 and sample sd 1. Binary and constant columns are left
    /// alone. The applied transform is recorded.
    pub fn standardize(&mut self) {
        let n = self.n_subjects;
        let mut st = Standardization {
            columns: Vec::new(),
            means: Vec::new(),
            sds: Vec::new(),
        };
        for p in 1..self.covariates.ncols() {
            let col: Vec<f64> = self.covariates.column(p).iter().copied().collect();
            let mut distinct = col.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() <= 2 || n < 2 {
                continue;
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if sd == 0.0 {
                continue;
            }
            for i in 0..n {
                self.covariates[(i, p)] = (col[i] - mean) / sd;
            }
            st.columns.push(p);
            st.means.push(mean);
            st.sds.push(sd);
        }
        self.standardization = Some(st);
    }
}

/// Parameters for one (component, entry) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryParams {
    /// `(alpha_0, alpha_1, beta_1, ..., beta_m)`.
    pub theta: DVector<f64>,
    /// Smoothing variance of `beta`.
    pub tau_sq: f64,
    /// Error variance.
    pub sigma_sq: f64,
}

impl EntryParams {
    pub fn alpha(&self) -> &[f64] {
        &self.theta.as_slice()[..2]
    }

    pub fn beta(&self) -> &[f64] {
        &self.theta.as_slice()[2..]
    }
}

/// Everything indexed by a single mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    /// One per entry `k`.
    pub entries: Vec<EntryParams>,
    /// Logistic coefficients, length `P + 1`. Zero for the reference component.
    pub delta: DVector<f64>,
    /// Subject random intercepts in the logits, length `N`. Zero for the
    /// reference component.
    pub zeta: DVector<f64>,
    /// Variance of `zeta`.
    pub kappa_sq: f64,
}

/// Allocations and augmentation variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// Component label of each subject (the one-hot `z` in label form).
    pub z: Vec<usize>,
    /// Pólya-Gamma variables, `N x G` (reference column unused).
    pub omega: DMatrix<f64>,
    /// Half-t mixing variables for `sigma^2`, `G x K`.
    pub a_sigma: DMatrix<f64>,
    /// Half-t mixing variables for `tau^2`, `G x K`.
    pub a_tau: DMatrix<f64>,
    /// Half-t mixing variables for `kappa^2`, length `G`.
    pub a_kappa: DVector<f64>,
}

impl LatentState {
    pub fn one_hot(&self, n_components: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.z.len(), n_components);
        for (i, &g) in self.z.iter().enumerate() {
            m[(i, g)] = 1.0;
        }
        m
    }

    pub fn counts(&self, n_components: usize) -> Vec<usize> {
        let mut c = vec![0; n_components];
        for &g in &self.z {
            c[g] += 1;
        }
        c
    }
}

/// `X alpha_gk + W beta_gk`.
pub fn component_mean(components: &[ComponentParams], basis: &BasisSet, g: usize, k: usize) -> Result<DVector<f64>> {
    let entry = components
        .get(g)
        .and_then(|c| c.entries.get(k))
        .ok_or_else(|| Error::config(format!("no parameters for component {g}, entry {k}")))?;
    if entry.theta.len() != 2 + basis.m {
        return Err(Error::config(format!(
            "theta has length {}, basis expects {}",
            entry.theta.len(),
            2 + basis.m
        )));
    }
    Ok(&basis.x * entry.theta.rows(0, 2) + &basis.w * entry.theta.rows(2, basis.m))
}

/// Means `mu[g][k] = S theta_gk` for every component and entry.
pub fn all_means(components: &[ComponentParams], design: &DMatrix<f64>) -> Vec<Vec<DVector<f64>>> {
    components
        .iter()
        .map(|c| c.entries.iter().map(|e| design * &e.theta).collect())
        .collect()
}

/// Log density of `N(mean, sigma_sq I_n)` at `y`.
pub fn log_component_density(y: &[f64], mean: &[f64], sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::numerical(format!(
            "component variance must be positive, got {sigma_sq}"
        )));
    }
    if y.len() != mean.len() {
        return Err(Error::numerical(format!(
            "series length {} does not match mean length {}",
            y.len(),
            mean.len()
        )));
    }
    Ok(log_density_unchecked(y, mean, sigma_sq))
}

#[inline]
pub(crate) fn log_density_unchecked(y: &[f64], mean: &[f64], sigma_sq: f64) -> f64 {
    let ss: f64 = y.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = y.len() as f64;
    -0.5 * n * (LN_2PI + sigma_sq.ln()) - 0.5 * ss / sigma_sq
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities with max subtraction.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Multinomial-logit weights `pi_g ∝ exp(v' delta_g + zeta_g)`.
///
/// `deltas` is `G x (P + 1)`; the last row (the reference component) and the
/// last entry of `zetas` must be zero.
pub fn mixing_weights(v: &[f64], deltas: &DMatrix<f64>, zetas: &[f64]) -> Result<Vec<f64>> {
    let g = deltas.nrows();
    if g == 0 || zetas.len() != g || deltas.ncols() != v.len() {
        return Err(Error::config(format!(
            "mixing weights: deltas {}x{}, covariates {}, zetas {}",
            deltas.nrows(),
            deltas.ncols(),
            v.len(),
            zetas.len()
        )));
    }
    if deltas.row(g - 1).iter().any(|&d| d != 0.0) || zetas[g - 1] != 0.0 {
        return Err(Error::config("reference component must have zero delta and zeta"));
    }
    let logits: Vec<f64> = (0..g)
        .map(|h| deltas.row(h).iter().zip(v).map(|(d, x)| d * x).sum::<f64>() + zetas[h])
        .collect();
    if let Some(h) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::numerical(format!(
            "non-finite linear predictor {} for component {h}",
            logits[h]
        )));
    }
    Ok(softmax(&logits))
}

/// Linear predictors `eta[i, g] = V_i' delta_g + zeta_ig`.
pub fn linear_predictors(components: &[ComponentParams], covariates: &DMatrix<f64>) -> DMatrix<f64> {
    let n = covariates.nrows();
    let mut eta = DMatrix::zeros(n, components.len());
    for (g, c) in components.iter().enumerate() {
        let col = covariates * &c.delta + &c.zeta;
        eta.set_column(g, &col);
    }
    eta
}

/// Row-wise softmax of the linear predictors: the `N x G` weight matrix.
pub fn weight_matrix(components: &[ComponentParams], covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(r) = components.last() {
        if r.delta.iter().chain(r.zeta.iter()).any(|&x| x != 0.0) {
            return Err(Error::config("reference component must have zero delta and zeta"));
        }
    }
    let eta = linear_predictors(components, covariates);
    let (n, g) = eta.shape();
    let mut w = DMatrix::zeros(n, g);
    for i in 0..n {
        let row: Vec<f64> = eta.row(i).iter().copied().collect();
        if let Some(h) = row.iter().position(|l| !l.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite linear predictor for subject {i}, component {h}"
            )));
        }
        for (h, p) in softmax(&row).into_iter().enumerate() {
            w[(i, h)] = p;
        }
    }
    Ok(w)
}

/// `sum_k log f_gk(y_ik)` for every component `g`.
pub(crate) fn subject_component_loglik(
    data: &Dataset,
    i: usize,
    means: &[Vec<DVector<f64>>],
    components: &[ComponentParams],
) -> Vec<f64> {
    components
        .iter()
        .enumerate()
        .map(|(g, c)| {
            (0..data.n_entries())
                .map(|k| log_density_unchecked(data.series(i, k), means[g][k].as_slice(), c.entries[k].sigma_sq))
                .sum()
        })
        .collect()
}

/// Posterior allocation probabilities of one subject,
/// `∝ pi_g prod_k f_gk(y_ik)`.
pub fn allocation_probs(
    y_i: &[&[f64]],
    components: &[ComponentParams],
    basis: &BasisSet,
    weights: &[f64],
) -> Result<Vec<f64>> {
    if weights.len() != components.len() {
        return Err(Error::config(format!(
            "{} weights for {} components",
            weights.len(),
            components.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::config("weights must be a probability vector"));
    }
    let mut log_joint = Vec::with_capacity(components.len());
    for (g, c) in components.iter().enumerate() {
        if c.entries.len() != y_i.len() {
            return Err(Error::config(format!(
                "component {g} has {} entries, subject has {}",
                c.entries.len(),
                y_i.len()
            )));
        }
        let mut s = weights[g].ln();
        for (k, y) in y_i.iter().enumerate() {
            let mu = component_mean(components, basis, g, k)?;
            s += log_component_density(y, mu.as_slice(), c.entries[k].sigma_sq)?;
        }
        log_joint.push(s);
    }
    normalize_log_joint(&log_joint)
}

pub(crate) fn normalize_log_joint(log_joint: &[f64]) -> Result<Vec<f64>> {
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numerical(format!(
            "allocation probabilities undefined; log joint densities {log_joint:?}"
        )));
    }
    Ok(softmax(log_joint))
}

/// Observed-data (allocation-marginalized) log likelihood
/// `sum_i log sum_g pi_ig prod_k f_gk(y_ik)`.
pub fn log_observed_likelihood(
    data: &Dataset,
    components: &[ComponentParams],
    basis: &BasisSet,
    weights: &DMatrix<f64>,
) -> Result<f64> {
    if weights.nrows() != data.n_subjects() || weights.ncols() != components.len() {
        return Err(Error::config(format!(
            "weight matrix is {}x{}, expected {}x{}",
            weights.nrows(),
            weights.ncols(),
            data.n_subjects(),
            components.len()
        )));
    }
    let means = all_means(components, &basis.design());
    let mut total = 0.0;
    for i in 0..data.n_subjects() {
        let comp = subject_component_loglik(data, i, &means, components);
        let terms: Vec<f64> = comp.iter().enumerate().map(|(g, l)| weights[(i, g)].ln() + l).collect();
        let l = log_sum_exp(&terms);
        if !l.is_finite() {
            return Err(Error::numerical(format!("log likelihood of subject {i} is {l}")));
        }
        total += l;
    }
    Ok(total)
}
