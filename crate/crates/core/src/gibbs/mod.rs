//! Gibbs sampler for the mixture of spline experts.

mod init;
mod sampler;

pub use init::{kmeans_labels, random_labels};
pub use sampler::{
    draw_categorical, kappa_sq_conditional, mixing_conditional, sigma_sq_conditional, tau_sq_conditional, ChainState,
    LogisticConditional, Sampler, ETA_CLIP,
};

use crate::basis::{build_basis, BasisSet};
use crate::error::{Error, Result};
use crate::model::{ComponentParams, Dataset, Hyperparams};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    Random,
    KMeans,
}

impl std::str::FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitMethod::Random),
            "kmeans" | "kmeans-on-curves" => Ok(InitMethod::KMeans),
            other => Err(Error::config(format!(
                "unknown init method `{other}` (random | kmeans)"
            ))),
        }
    }
}

impl std::fmt::Display for InitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitMethod::Random => "random",
            InitMethod::KMeans => "kmeans",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of mixture components `G`.
    pub components: usize,
    /// Number of spline basis functions `m`.
    pub basis: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: InitMethod,
    pub hyper: Hyperparams,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            components: 2,
            basis: 10,
            iterations: 20_000,
            burn_in: 4_000,
            thin: 1,
            seed: 0,
            init: InitMethod::KMeans,
            hyper: Hyperparams::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::config("components must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.basis == 0 {
            return Err(Error::config("basis must be at least 1"));
        }
        self.hyper.validate()
    }

    pub fn kept_sweeps(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    /// 1-based sweep number.
    pub sweep: usize,
    pub components: Vec<ComponentParams>,
    pub z: Vec<usize>,
    pub log_likelihood: f64,
}

/// Retained post-burn-in draws of a single chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub n_components: usize,
    pub draws: Vec<Draw>,
    /// Observed-data log likelihood after every sweep, burn-in included.
    pub sweep_log_likelihood: Vec<f64>,
}

impl PosteriorSamples {
    pub fn kept(&self) -> usize {
        self.draws.len()
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.log_likelihood).collect()
    }
}

/// Builds the basis from the dataset grid and runs one chain on stream 0.
pub fn run_chain(data: &Dataset, config: &FitConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let m = config.basis.min(data.n_times().saturating_sub(1));
    let basis = build_basis(data.grid(), m)?;
    run_chain_with_basis(data, &basis, config, 0)
}

/// Runs one chain with an explicit basis and random stream id.
pub fn run_chain_with_basis(
    data: &Dataset,
    basis: &BasisSet,
    config: &FitConfig,
    stream_id: u64,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let sampler = Sampler::new(data, basis, config.hyper.clone(), config.components)?;
    let mut rng = RngStream::new(config.seed, stream_id);
    let mut state = sampler.init_state(config.init, &mut rng)?;
    let mut draws = Vec::with_capacity(config.kept_sweeps());
    let mut sweep_ll = Vec::with_capacity(config.iterations);
    for sweep in 1..=config.iterations {
        let ll = sampler
            .sweep(&mut state, &mut rng)
            .map_err(|e| e.context(format!("sweep {sweep}")))?;
        sweep_ll.push(ll);
        if sweep > config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            draws.push(Draw {
                sweep,
                components: state.components.clone(),
                z: state.latent.z.clone(),
                log_likelihood: ll,
            });
        }
    }
    Ok(PosteriorSamples {
        n_components: config.components,
        draws,
        sweep_log_likelihood: sweep_ll,
    })
}
