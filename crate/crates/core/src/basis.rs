//! Cubic smoothing-spline kernel on `[0, 1]` and its low-rank eigenbasis.
//!
//! The kernel `phi(r, h) = t_r^2 (t_h - t_r / 3) / 2` (for `t_r <= t_h`) is the
//! covariance of integrated Brownian motion. Its spectral decomposition
//! `Phi = Q Gamma Q'` gives the design `W = Q Gamma^{1/2}`, truncated to the
//! leading `m` directions, so that `W beta` with `beta ~ N(0, tau^2 I)` is a
//! rank-`m` approximation of a Gaussian process with covariance `tau^2 Phi`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as exact zeros.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Common observation times, strictly increasing inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 3 {
            return Err(Error::data(format!(
                "time grid needs at least 3 points, got {}",
                times.len()
            )));
        }
        for (j, &t) in times.iter().enumerate() {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::data(format!("time {t} at index {j} lies outside [0, 1]")));
            }
        }
        if let Some(j) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::data(format!(
                "times must be strictly increasing (index {} -> {})",
                j,
                j + 1
            )));
        }
        Ok(TimeGrid { times })
    }

    /// `n` equally spaced points from 0 to 1 inclusive.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::config(format!("uniform grid needs n >= 3, got {n}")));
        }
        let step = 1.0 / (n - 1) as f64;
        let mut times: Vec<f64> = (0..n).map(|j| j as f64 * step).collect();
        times[n - 1] = 1.0;
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Affine map of raw observation times onto `[0, 1]`, first point to 0 and
/// last point to 1.
pub fn rescale_times(raw: &[f64]) -> Result<TimeGrid> {
    if raw.len() < 3 {
        return Err(Error::data(format!("need at least 3 time points, got {}", raw.len())));
    }
    if let Some(j) = raw.iter().position(|t| !t.is_finite()) {
        return Err(Error::data(format!("non-finite time at index {j}")));
    }
    if let Some(j) = raw.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::data(format!(
            "raw times must be strictly increasing; duplicate or decrease at index {}",
            j + 1
        )));
    }
    let lo = raw[0];
    let span = raw[raw.len() - 1] - lo;
    let mut times: Vec<f64> = raw.iter().map(|&t| (t - lo) / span).collect();
    times[0] = 0.0;
    let last = times.len() - 1;
    times[last] = 1.0;
    TimeGrid::new(times)
}

#[inline]
fn kernel(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    0.5 * lo * lo * (hi - lo / 3.0)
}

/// The `n x n` kernel matrix `Phi`, symmetric by construction.
pub fn build_phi(grid: &TimeGrid) -> DMatrix<f64> {
    let t = grid.times();
    let n = t.len();
    DMatrix::from_fn(n, n, |r, h| kernel(t[r], t[h]))
}

/// Fixed-effect design `X` and truncated spline design `W` shared by all
/// subjects and entries.
#[derive(Debug, Clone)]
pub struct BasisSet {
    /// `n x 2`: ones, then the time grid.
    pub x: DMatrix<f64>,
    /// `n x m`: leading eigenvectors scaled by the root of their eigenvalue.
    pub w: DMatrix<f64>,
    /// All `n` eigenvalues of `Phi`, descending, clamped at zero.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors of `Phi`, columns ordered like `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Number of retained spline directions (columns of `w`).
    pub m: usize,
    grid: TimeGrid,
}

impl BasisSet {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// `S = [X W]`, the per-entry design with `2 + m` columns.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut s = DMatrix::zeros(n, 2 + self.m);
        s.columns_mut(0, 2).copy_from(&self.x);
        s.columns_mut(2, self.m).copy_from(&self.w);
        s
    }

    /// Fraction of the trace of `Phi` captured by the retained directions.
    pub fn explained_fraction(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        let kept: f64 = self.eigenvalues.iter().take(self.m).sum();
        kept / total
    }
}

/// Eigendecomposes `Phi` and keeps the leading `m` scaled eigenvectors.
///
/// Eigenvalues are sorted in descending order. Each eigenvector is signed so
/// that its largest-magnitude entry is positive. Directions whose eigenvalue
/// falls below [`EIGEN_FLOOR`] are never retained, so the returned `m` can be
/// smaller than requested on very coarse grids.
pub fn build_basis(grid: &TimeGrid, m: usize) -> Result<BasisSet> {
    let n = grid.len();
    if m == 0 || m >= n {
        return Err(Error::config(format!(
            "basis count m must satisfy 1 <= m < n = {n}, got {m}"
        )));
    }
    let phi = build_phi(grid);
    let eig = SymmetricEigen::try_new(phi.clone(), 1e-14, 10_000).ok_or_else(|| {
        let diag_max = phi.diagonal().max();
        let diag_min = phi.diagonal().min();
        Error::numerical(format!(
            "symmetric eigendecomposition of the {n}x{n} spline kernel did not converge \
             (diagonal range [{diag_min:e}, {diag_max:e}])"
        ))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let min_raw = eig.eigenvalues.min();
    if min_raw < -1e-8 * eig.eigenvalues.max().abs().max(1.0) {
        return Err(Error::numerical(format!(
            "spline kernel is not positive semi-definite: smallest eigenvalue {min_raw:e}"
        )));
    }

    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        eigenvalues[dst] = if lambda < EIGEN_FLOOR { 0.0 } else { lambda };
        let mut v = eig.eigenvectors.column(src).into_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold(
                (0usize, 0.0f64),
                |best, (i, &x)| {
                    if x.abs() > best.1 {
                        (i, x.abs())
                    } else {
                        best
                    }
                },
            )
            .0;
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(dst, &v);
    }

    let usable = eigenvalues.iter().take_while(|&&l| l > 0.0).count();
    let m = m.min(usable);
    if m == 0 {
        return Err(Error::numerical(
            "spline kernel has no eigenvalue above the numerical floor".to_string(),
        ));
    }

    let mut w = DMatrix::zeros(n, m);
    for q in 0..m {
        let scale = eigenvalues[q].sqrt();
        w.set_column(q, &(eigenvectors.column(q) * scale));
    }
    let t = grid.times();
    let x = DMatrix::from_fn(n, 2, |j, c| if c == 0 { 1.0 } else { t[j] });

    Ok(BasisSet {
        x,
        w,
        eigenvalues,
        eigenvectors,
        m,
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_closed_form_values() {
        assert_abs_diff_eq!(kernel(1.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(kernel(0.0, 0.7), 0.0);
        assert_eq!(kernel(0.7, 0.0), 0.0);
        assert_abs_diff_eq!(kernel(0.5, 1.0), 0.104_166_666_666_666_67, epsilon = 1e-15);
        assert_eq!(kernel(0.5, 1.0), kernel(1.0, 0.5));
    }

    #[test]
    fn phi_is_exactly_symmetric() {
        let grid = TimeGrid::new(vec![0.0, 0.13, 0.4, 0.41, 0.9, 1.0]).unwrap();
        let phi = build_phi(&grid);
        assert_eq!(phi, phi.transpose());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_times(&[10.0, 20.0, 30.0]).unwrap().times(), &[0.0, 0.5, 1.0]);
        assert_eq!(rescale_times(&[0.0, 0.25, 1.0]).unwrap().times(), &[0.0, 0.25, 1.0]);
        assert_eq!(
            rescale_times(&[5.0, 6.0, 8.0, 9.0]).unwrap().times(),
            &[0.0, 0.25, 0.75, 1.0]
        );
    }

    #[test]
    fn rescale_rejects_bad_input() {
        assert!(matches!(rescale_times(&[1.0, 1.0, 2.0]), Err(Error::Data(_))));
        assert!(matches!(rescale_times(&[3.0, 2.0, 5.0]), Err(Error::Data(_))));
        assert!(matches!(rescale_times(&[1.0, 2.0]), Err(Error::Data(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 1.2]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn basis_count_out_of_range() {
        let grid = TimeGrid::uniform(5).unwrap();
        assert!(matches!(build_basis(&grid, 0), Err(Error::Config(_))));
        assert!(matches!(build_basis(&grid, 5), Err(Error::Config(_))));
    }

    #[test]
    fn design_layout() {
        let grid = TimeGrid::uniform(7).unwrap();
        let basis = build_basis(&grid, 3).unwrap();
        for j in 0..7 {
            assert_eq!(basis.x[(j, 0)], 1.0);
            assert_eq!(basis.x[(j, 1)], grid.times()[j]);
        }
        let s = basis.design();
        assert_eq!(s.ncols(), 5);
        assert_eq!(s.column(3), basis.w.column(1));
    }

    #[test]
    fn eigen_sign_convention() {
        let grid = TimeGrid::uniform(20).unwrap();
        let basis = build_basis(&grid, 5).unwrap();
        for q in 0..20 {
            let col = basis.eigenvectors.column(q);
            let (imax, _) = col.iamax_full();
            assert!(col[(imax, 0)] >= 0.0);
        }
    }
}
