//! Sampler-correctness checks shared by the integration tests and the
//! acceptance suite. Each check returns its statistics; callers decide how to
//! report them.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use splinemix::basis::{build_basis, BasisSet, TimeGrid};
use splinemix::gibbs::{draw_categorical, ChainState, Draw, PosteriorSamples, Sampler};
use splinemix::model::{ComponentParams, Dataset, Hyperparams};
use splinemix::perm::next_permutation;
use splinemix::postproc::{ecr_permutation, relabel_ecr};
use splinemix::rng::{draw_polya_gamma, standard_normal, RngStream};

/// An estimate compared with a reference value through a standard error.
#[derive(Debug, Clone)]
pub struct MomentCheck {
    pub label: String,
    pub estimate: f64,
    pub expected: f64,
    pub se: f64,
}

impl MomentCheck {
    pub fn z(&self) -> f64 {
        (self.estimate - self.expected) / self.se
    }

    pub fn within(&self, k: f64) -> bool {
        self.z().abs() <= k
    }
}

// ---------------------------------------------------------------------------
// Pólya-Gamma moments

/// Closed-form mean and variance of PG(1, c).
pub fn pg_moments(c: f64) -> (f64, f64) {
    let c = c.abs();
    if c < 1e-4 {
        return (0.25, 1.0 / 24.0);
    }
    let mean = (0.5 * c).tanh() / (2.0 * c);
    let ch = (0.5 * c).cosh();
    let var = (c.sinh() - c) / (4.0 * c.powi(3) * ch * ch);
    (mean, var)
}

/// Sample mean of `draws` PG(1, c) variates against the closed form.
pub fn pg_mean_check(c: f64, draws: usize, seed: u64) -> MomentCheck {
    let mut rng = RngStream::new(seed, 0);
    let sum: f64 = (0..draws).map(|_| draw_polya_gamma(c, &mut rng).unwrap()).sum();
    let (mean, var) = pg_moments(c);
    MomentCheck {
        label: format!("PG(1, {c}) mean"),
        estimate: sum / draws as f64,
        expected: mean,
        se: (var / draws as f64).sqrt(),
    }
}

// ---------------------------------------------------------------------------
// Conjugate oracle

pub struct ConjugateOracle {
    /// Standardized deviation of every grid point.
    pub pointwise: Vec<MomentCheck>,
    /// Deviation of the grid-averaged trajectory.
    pub average: MomentCheck,
}

/// One component, one entry, error and smoothing variances held fixed: the
/// spline-coefficient conditional is then the exact posterior, whose mean is
/// the penalized least-squares fit `S (N S'S + sigma^2 D^{-1})^{-1} sum S'y`.
/// Draws from the sampler's coefficient step are compared with that mean.
pub fn conjugate_oracle(draws: usize, seed: u64) -> ConjugateOracle {
    let (n_sub, n, m) = (20, 30, 8);
    let (sigma_sq, tau_sq): (f64, f64) = (1.5, 3.0);
    let grid = TimeGrid::uniform(n).unwrap();
    let basis = build_basis(&grid, m).unwrap();
    let mut rng = RngStream::new(seed, 0);
    let y: Vec<f64> = (0..n_sub)
        .flat_map(|_| grid.times().to_vec())
        .map(|t| 2.0 - 3.0 * t + (5.0 * t).sin() + sigma_sq.sqrt() * standard_normal(&mut rng))
        .collect();
    let data = Dataset::new(y, n_sub, 1, grid, DMatrix::from_element(n_sub, 1, 1.0), vec![]).unwrap();
    let hyper = Hyperparams::default();
    let sampler = Sampler::new(&data, &basis, hyper.clone(), 1).unwrap();
    let mut state = sampler.prior_state(vec![0; n_sub], &mut rng).unwrap();
    state.components[0].entries[0].sigma_sq = sigma_sq;
    state.components[0].entries[0].tau_sq = tau_sq;

    // exact posterior mean through an explicit inverse
    let s = basis.design();
    let p = s.ncols();
    let mut prec = s.transpose() * &s * n_sub as f64;
    for q in 0..p {
        prec[(q, q)] += sigma_sq / if q < 2 { hyper.sigma_alpha_sq } else { tau_sq };
    }
    let mut rhs = DVector::zeros(p);
    for i in 0..n_sub {
        rhs += s.transpose() * DVector::from_column_slice(data.series(i, 0));
    }
    let exact = &s * (prec.try_inverse().unwrap() * rhs);

    let mut sum = DVector::zeros(n);
    let mut sum_sq = DVector::zeros(n);
    let (mut avg_sum, mut avg_sq) = (0.0, 0.0);
    for _ in 0..draws {
        sampler.step_theta(&mut state, 0, 0, &mut rng).unwrap();
        let mu = &s * &state.components[0].entries[0].theta;
        let avg = mu.mean();
        avg_sum += avg;
        avg_sq += avg * avg;
        sum += &mu;
        sum_sq += mu.component_mul(&mu);
    }
    let d = draws as f64;
    let se = |s: f64, ss: f64| ((ss / d - (s / d).powi(2)) / d).sqrt();
    let pointwise = (0..n)
        .map(|j| MomentCheck {
            label: format!("t[{j}]"),
            estimate: sum[j] / d,
            expected: exact[j],
            se: se(sum[j], sum_sq[j]),
        })
        .collect();
    ConjugateOracle {
        pointwise,
        average: MomentCheck {
            label: "grid average".into(),
            estimate: avg_sum / d,
            expected: exact.mean(),
            se: se(avg_sum, avg_sq),
        },
    }
}

// ---------------------------------------------------------------------------
// Geweke joint-distribution test

/// Tiny model: N = 6, K = 1, n = 8, m = 3, G = 2, P = 1.
pub struct TinyModel {
    pub covariates: DMatrix<f64>,
    pub grid: TimeGrid,
    pub basis: BasisSet,
    pub hyper: Hyperparams,
}

impl TinyModel {
    pub const N: usize = 6;
    pub const G: usize = 2;

    pub fn new() -> Self {
        let grid = TimeGrid::uniform(8).unwrap();
        let basis = build_basis(&grid, 3).unwrap();
        let x = [-1.2, -0.4, 0.1, 0.5, 0.9, 1.6];
        let covariates = DMatrix::from_fn(Self::N, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        // Lighter tails than the defaults keep every tracked moment finite
        // and the chain quick to mix.
        let hyper = Hyperparams {
            sigma_alpha_sq: 1.0,
            nu_sigma: 10.0,
            a_sigma: 1.0,
            nu_tau: 10.0,
            a_tau: 1.0,
            nu_kappa: 10.0,
            a_kappa: 1.0,
            sigma_delta_sq: 1.0,
        };
        TinyModel {
            covariates,
            grid,
            basis,
            hyper,
        }
    }

    fn dataset(&self, y: Vec<f64>) -> Dataset {
        Dataset::new(
            y,
            Self::N,
            1,
            self.grid.clone(),
            self.covariates.clone(),
            vec!["x".into()],
        )
        .unwrap()
    }

    /// Parameters and allocations from the prior.
    pub fn prior_draw(&self, rng: &mut RngStream) -> ChainState {
        let dummy = self.dataset(vec![0.0; Self::N * self.grid.len()]);
        let sampler = Sampler::new(&dummy, &self.basis, self.hyper.clone(), Self::G).unwrap();
        let mut state = sampler.prior_state(vec![0; Self::N], rng).unwrap();
        for i in 0..Self::N {
            let w: Vec<f64> = state.weights.row(i).iter().copied().collect();
            state.latent.z[i] = draw_categorical(&w, rng);
        }
        state
    }

    /// Responses given parameters and allocations.
    pub fn simulate_y(&self, state: &ChainState, rng: &mut RngStream) -> Vec<f64> {
        let s = self.basis.design();
        let mut y = Vec::with_capacity(Self::N * self.grid.len());
        for &g in &state.latent.z {
            let e = &state.components[g].entries[0];
            let mu = &s * &e.theta;
            let sd = e.sigma_sq.sqrt();
            y.extend(mu.iter().map(|m| m + sd * standard_normal(rng)));
        }
        y
    }

    pub fn statistics(state: &ChainState) -> Vec<f64> {
        let c = &state.components;
        vec![
            c[0].entries[0].theta[0],
            c[1].entries[0].theta[1],
            c[1].entries[0].theta[2],
            c[0].entries[0].sigma_sq.ln(),
            c[1].entries[0].sigma_sq.ln(),
            c[0].entries[0].tau_sq.ln(),
            c[0].delta[0],
            c[0].delta[1],
            c[0].zeta[0],
            c[0].kappa_sq.ln(),
            c[1].kappa_sq.ln(),
            state.latent.z.iter().filter(|&&z| z == 0).count() as f64,
        ]
    }

    pub const NAMES: [&'static str; 12] = [
        "alpha0[1]",
        "alpha1[2]",
        "beta1[2]",
        "log sigma^2[1]",
        "log sigma^2[2]",
        "log tau^2[1]",
        "delta0[1]",
        "delta1[1]",
        "zeta[1,1]",
        "log kappa^2[1]",
        "log kappa^2[2]",
        "N_1",
    ];
}

impl Default for TinyModel {
    fn default() -> Self {
        Self::new()
    }
}

/// Marginal-conditional versus successive-conditional simulation. The
/// successive-conditional chain's standard errors use batch means.
pub fn geweke(marginal_draws: usize, successive_draws: usize, seed: u64) -> Vec<MomentCheck> {
    let model = TinyModel::new();
    let k = TinyModel::NAMES.len();

    let mut rng = RngStream::new(seed, 0);
    let mut mc_sum = vec![0.0; k];
    let mut mc_sq = vec![0.0; k];
    for _ in 0..marginal_draws {
        let st = model.prior_draw(&mut rng);
        for (j, v) in TinyModel::statistics(&st).into_iter().enumerate() {
            mc_sum[j] += v;
            mc_sq[j] += v * v;
        }
    }

    let mut rng = RngStream::new(seed, 1);
    let mut state = model.prior_draw(&mut rng);
    let mut y = model.simulate_y(&state, &mut rng);
    let mut trace: Vec<Vec<f64>> = vec![Vec::with_capacity(successive_draws); k];
    for _ in 0..successive_draws {
        let data = model.dataset(y);
        let sampler = Sampler::new(&data, &model.basis, model.hyper.clone(), TinyModel::G).unwrap();
        sampler.sweep(&mut state, &mut rng).unwrap();
        y = model.simulate_y(&state, &mut rng);
        for (j, v) in TinyModel::statistics(&state).into_iter().enumerate() {
            trace[j].push(v);
        }
    }

    let md = marginal_draws as f64;
    (0..k)
        .map(|j| {
            let mc_mean = mc_sum[j] / md;
            let mc_var = mc_sq[j] / md - mc_mean * mc_mean;
            let (sc_mean, sc_se) = batch_means(&trace[j], 50);
            MomentCheck {
                label: TinyModel::NAMES[j].to_string(),
                estimate: sc_mean,
                expected: mc_mean,
                se: (mc_var / md + sc_se * sc_se).sqrt(),
            }
        })
        .collect()
}

/// Mean and batch-means standard error.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

// ---------------------------------------------------------------------------
// ECR against brute force

pub struct EcrCheck {
    pub sweeps: usize,
    pub mismatches: usize,
}

/// For each `G` in 2..=4, relabels 100 random allocation sweeps against a
/// random pivot and compares every chosen permutation's agreement with the
/// best over all `G!` permutations.
pub fn ecr_brute_force(seed: u64) -> EcrCheck {
    let mut rng = RngStream::new(seed, 0);
    let n_sub = 25;
    let mut sweeps = 0;
    let mut mismatches = 0;
    for g in 2..=4usize {
        let pivot: Vec<usize> = (0..n_sub).map(|_| rng.random_range(0..g)).collect();
        let draws: Vec<Draw> = (0..100)
            .map(|s| {
                // perturb a random relabeling of the pivot
                let mut p: Vec<usize> = (0..g).collect();
                for _ in 0..rng.random_range(0..24) {
                    if !next_permutation(&mut p) {
                        p = (0..g).collect();
                    }
                }
                let z = pivot
                    .iter()
                    .map(|&a| {
                        if rng.random::<f64>() < 0.3 {
                            rng.random_range(0..g)
                        } else {
                            p[a]
                        }
                    })
                    .collect();
                Draw {
                    sweep: s + 1,
                    components: (0..g)
                        .map(|h| ComponentParams {
                            entries: Vec::new(),
                            delta: DVector::zeros(0),
                            zeta: DVector::zeros(0),
                            kappa_sq: 1.0 + h as f64,
                        })
                        .collect(),
                    z,
                    log_likelihood: 0.0,
                }
            })
            .collect();
        let samples = PosteriorSamples {
            n_components: g,
            draws,
            sweep_log_likelihood: vec![0.0; 100],
        };
        let (relabeled, perms) = relabel_ecr_allocations(&samples, &pivot);
        for ((d, r), p) in samples.draws.iter().zip(&relabeled).zip(&perms) {
            sweeps += 1;
            let agree = |q: &[usize]| d.z.iter().zip(&pivot).filter(|(a, b)| q[**a] == **b).count();
            let mut q: Vec<usize> = (0..g).collect();
            let mut best = 0;
            loop {
                best = best.max(agree(&q));
                if !next_permutation(&mut q) {
                    break;
                }
            }
            let consistent = r.iter().zip(&d.z).all(|(new, old)| *new == p[*old]);
            if agree(p) != best || !consistent || *p != ecr_permutation(&d.z, &pivot, g) {
                mismatches += 1;
            }
        }
    }
    EcrCheck { sweeps, mismatches }
}

/// Relabels allocation-only samples (no parameters attached).
fn relabel_ecr_allocations(samples: &PosteriorSamples, pivot: &[usize]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (out, perms) = relabel_ecr(samples, pivot);
    (out.draws.into_iter().map(|d| d.z).collect(), perms)
}
