use std::path::{Path, PathBuf};
use std::time::Instant;

use splinemix::gibbs::run_chain_with_basis;
use splinemix::io::{
    coefficient_names, numbered, parse_logistic_means, parse_trajectory_means, read_dataset, read_truth,
    write_allocations_csv, write_covariates_csv, write_data_csv, write_dic_csv, write_logistic_csv, write_metrics_csv,
    write_replicate_metrics_csv, write_trace_csv, write_trajectories_csv, write_truth_csv, FitSettings, LoadedData,
    SimulationConfig,
};
use splinemix::postproc::{default_pivot, summarize_with_level, DicEntry};
use splinemix::sim::{aggregate_metrics, evaluate_replicate, generate_scenario, ReplicateMetrics};
use splinemix::{build_basis, compute_dic, relabel_ecr, BasisSet, Dataset, DicReport, Error, PosteriorSamples, Result};

use crate::jobs::{
    create_dir, discover, par_map, pool, replicate_dirs, replicate_name, Job, COVARIATES_FILE, DATA_FILE, TRUTH_FILE,
};
use crate::{EvaluateArgs, FitArgs, RunManifest, SelectArgs, SimulateArgs};

const TRAJECTORIES_FILE: &str = "trajectories.csv";
const LOGISTIC_FILE: &str = "logistic.csv";
const ALLOCATIONS_FILE: &str = "allocations.csv";
const TRACE_FILE: &str = "trace.csv";
const DIC_FILE: &str = "dic.csv";
const METRICS_FILE: &str = "metrics.csv";
const REPLICATE_METRICS_FILE: &str = "replicate_metrics.csv";

fn finish(
    command: &str,
    config: String,
    seed: Option<u64>,
    start: Instant,
    out: &Path,
    outputs: Vec<PathBuf>,
) -> Result<RunManifest> {
    let m = RunManifest {
        command: command.into(),
        config,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        duration: start.elapsed(),
        outputs,
    };
    m.write(out)?;
    Ok(m)
}

pub fn simulate(args: &SimulateArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfg = SimulationConfig::read(&args.config)?;
    if let Some(s) = args.seed {
        cfg.spec.seed = s;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    create_dir(&args.out)?;
    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let written = pool(args.workers)?.install(|| {
        par_map(&reps, |&r| {
            let (data, truth) = generate_scenario(&cfg.spec, r as u64)?;
            let name = replicate_name(r);
            let dir = args.out.join(&name);
            create_dir(&dir)?;
            let subjects = numbered(data.n_subjects());
            write_data_csv(&dir.join(DATA_FILE), &data, &subjects, &numbered(data.n_entries()))?;
            write_covariates_csv(&dir.join(COVARIATES_FILE), &data, &subjects)?;
            write_truth_csv(&dir.join(TRUTH_FILE), &truth)?;
            Ok([DATA_FILE, COVARIATES_FILE, TRUTH_FILE].map(|f| Path::new(&name).join(f)))
        })
    })?;
    let outputs = written.into_iter().flatten().collect();
    finish("simulate", cfg.render(), Some(cfg.spec.seed), start, &args.out, outputs)
}

/// Relabeled chains of one fit, plus their pooled draws.
#[derive(Debug, Clone)]
pub struct ChainFit {
    pub basis: BasisSet,
    /// Relabeled samples and the permutation applied to each sweep.
    pub chains: Vec<(PosteriorSamples, Vec<Vec<usize>>)>,
    pub pooled: PosteriorSamples,
}

/// Runs `chains` chains on streams `0..chains` (in parallel within the
/// current pool), relabels all of them by ECR against the allocation of the
/// highest-likelihood retained sweep across chains, and pools the draws.
pub fn fit_chains(data: &Dataset, settings: &FitSettings, chains: usize) -> Result<ChainFit> {
    if chains == 0 {
        return Err(Error::config("--chains must be at least 1"));
    }
    let cfg = &settings.fit;
    cfg.validate()?;
    let basis = build_basis(data.grid(), cfg.basis.min(data.n_times().saturating_sub(1)))?;
    let streams: Vec<u64> = (0..chains as u64).collect();
    let raw = par_map(&streams, |&c| {
        run_chain_with_basis(data, &basis, cfg, c).map_err(|e| e.context(format!("chain {}", c + 1)))
    })?;
    let pivot = raw
        .iter()
        .filter_map(|s| {
            s.draws
                .iter()
                .map(|d| d.log_likelihood)
                .reduce(f64::max)
                .zip(default_pivot(s))
        })
        .fold(None::<(f64, Vec<usize>)>, |best, (ll, z)| match best {
            Some((b, _)) if b >= ll => best,
            _ => Some((ll, z)),
        })
        .map(|(_, z)| z)
        .ok_or_else(|| Error::config("no retained sweeps"))?;
    let relabeled: Vec<_> = raw.iter().map(|s| relabel_ecr(s, &pivot)).collect();
    let pooled = PosteriorSamples {
        n_components: cfg.components,
        draws: relabeled.iter().flat_map(|(s, _)| s.draws.iter().cloned()).collect(),
        sweep_log_likelihood: relabeled
            .iter()
            .flat_map(|(s, _)| s.sweep_log_likelihood.iter().copied())
            .collect(),
    };
    Ok(ChainFit {
        basis,
        chains: relabeled,
        pooled,
    })
}

fn settings(config: Option<&Path>, seed: Option<u64>) -> Result<FitSettings> {
    let mut s = match config {
        Some(p) => FitSettings::read(p)?,
        None => FitSettings::default(),
    };
    if let Some(seed) = seed {
        s.fit.seed = seed;
    }
    Ok(s)
}

fn load(job: &Job, settings: &FitSettings) -> Result<LoadedData> {
    let mut loaded = read_dataset(&job.data, job.covariates.as_deref())?;
    if settings.standardize {
        loaded.dataset.standardize();
    }
    Ok(loaded)
}

fn in_job<T>(job: &Job, r: Result<T>) -> Result<T> {
    match &job.name {
        Some(n) => r.map_err(|e| e.context(n)),
        None => r,
    }
}

pub fn fit(args: &FitArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let settings = settings(args.config.as_deref(), args.seed)?;
    let jobs = discover(&args.data, args.covariates.as_deref())?;
    create_dir(&args.out)?;
    let written = pool(args.workers)?.install(|| {
        par_map(&jobs, |job| {
            in_job(job, fit_job(job, &settings, args.chains, &args.out, !args.no_trace))
        })
    })?;
    let outputs = written.into_iter().flatten().collect();
    finish(
        "fit",
        settings.render(),
        Some(settings.fit.seed),
        start,
        &args.out,
        outputs,
    )
}

fn fit_job(job: &Job, settings: &FitSettings, chains: usize, out: &Path, trace: bool) -> Result<Vec<PathBuf>> {
    let loaded = load(job, settings)?;
    let fit = fit_chains(&loaded.dataset, settings, chains)?;
    let summary = summarize_with_level(&fit.pooled, &fit.basis, settings.level)?;
    if let Some(n) = &job.name {
        create_dir(&out.join(n))?;
    }
    let mut outputs = vec![
        job.relative(TRAJECTORIES_FILE),
        job.relative(LOGISTIC_FILE),
        job.relative(ALLOCATIONS_FILE),
    ];
    write_trajectories_csv(&out.join(&outputs[0]), &summary, &loaded.raw_times)?;
    write_logistic_csv(&out.join(&outputs[1]), &summary, &coefficient_names(&loaded.dataset))?;
    write_allocations_csv(&out.join(&outputs[2]), &summary, &loaded.subjects)?;
    if trace {
        let p = job.relative(TRACE_FILE);
        write_trace_csv(&out.join(&p), &fit.chains)?;
        outputs.push(p);
    }
    Ok(outputs)
}

pub fn select(args: &SelectArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let base = settings(args.config.as_deref(), args.seed)?;
    let jobs = discover(&args.data, args.covariates.as_deref())?;
    create_dir(&args.out)?;
    let written = pool(args.workers)?.install(|| {
        par_map(&jobs, |job| {
            in_job(job, select_job(job, &base, &args.g_range.0, args.chains, &args.out))
        })
    })?;
    let mut config = base.render();
    config.push_str(&format!(
        "g_range = {}\n",
        args.g_range
            .0
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    ));
    finish("select", config, Some(base.fit.seed), start, &args.out, written)
}

fn select_job(job: &Job, base: &FitSettings, range: &[usize], chains: usize, out: &Path) -> Result<PathBuf> {
    let loaded = load(job, base)?;
    let entries = par_map(range, |&g| {
        let mut s = base.clone();
        s.fit.components = g;
        let fit = fit_chains(&loaded.dataset, &s, chains).map_err(|e| e.context(format!("G = {g}")))?;
        Ok(DicEntry {
            components: g,
            dic: compute_dic(&fit.pooled)?,
        })
    })?;
    let report = DicReport::new(entries)?;
    if let Some(n) = &job.name {
        create_dir(&out.join(n))?;
    }
    let rel = job.relative(DIC_FILE);
    write_dic_csv(&out.join(&rel), &report)?;
    Ok(rel)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// `(replicate name, truth file, fit directory)` triples.
fn evaluation_pairs(truth: &Path, fits: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if !truth.is_dir() {
        return Ok(vec![(String::new(), truth.to_path_buf(), fits.to_path_buf())]);
    }
    if truth.join(TRUTH_FILE).is_file() {
        return Ok(vec![(String::new(), truth.join(TRUTH_FILE), fits.to_path_buf())]);
    }
    let t = replicate_dirs(truth)?;
    let f = replicate_dirs(fits)?;
    if t.is_empty() {
        return Err(Error::data(format!(
            "{}: no {TRUTH_FILE} or rep-* directories",
            truth.display()
        )));
    }
    if t != f {
        let only = |a: &[String], b: &[String]| {
            a.iter()
                .filter(|x| !b.contains(x))
                .cloned()
                .collect::<Vec<_>>()
                .join(" ")
        };
        return Err(Error::data(format!(
            "replicate mismatch: truth-only [{}], fit-only [{}]",
            only(&t, &f),
            only(&f, &t)
        )));
    }
    Ok(t.into_iter()
        .map(|n| {
            let tp = truth.join(&n).join(TRUTH_FILE);
            let fp = fits.join(&n);
            (n, tp, fp)
        })
        .collect())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let pairs = evaluation_pairs(&args.truth, &args.fits)?;
    let mut names = Vec::new();
    let mut coefficient_names: Vec<String> = Vec::new();
    let mut truth_delta: Option<Vec<Vec<f64>>> = None;
    let mut reps: Vec<ReplicateMetrics> = Vec::new();
    for (name, truth_path, fit_dir) in &pairs {
        let ctx = |e: Error| {
            e.context(if name.is_empty() {
                fit_dir.display().to_string()
            } else {
                name.clone()
            })
        };
        let truth = read_truth(truth_path).map_err(ctx)?;
        let traj_path = fit_dir.join(TRAJECTORIES_FILE);
        let log_path = fit_dir.join(LOGISTIC_FILE);
        let est = parse_trajectory_means(open(&traj_path)?).map_err(|e| ctx(e.context(traj_path.display())))?;
        let logistic = parse_logistic_means(open(&log_path)?).map_err(|e| ctx(e.context(log_path.display())))?;
        match &truth_delta {
            None => truth_delta = Some(truth.delta.clone()),
            Some(d) if *d != truth.delta => {
                return Err(ctx(Error::data(
                    "replicate mismatch: logistic truth differs between replicates",
                )))
            }
            Some(_) => {}
        }
        if coefficient_names.is_empty() {
            coefficient_names = logistic.names.clone();
        }
        reps.push(evaluate_replicate(&truth.means, &est, &logistic.means).map_err(ctx)?);
        names.push(if name.is_empty() { "1".to_string() } else { name.clone() });
    }
    let report = aggregate_metrics(truth_delta.as_deref().unwrap_or_default(), &reps)?;
    create_dir(&args.out)?;
    write_metrics_csv(&args.out.join(METRICS_FILE), &report, &coefficient_names)?;
    write_replicate_metrics_csv(&args.out.join(REPLICATE_METRICS_FILE), &names, &reps)?;
    let config = format!("truth = {}\nfits = {}\n", args.truth.display(), args.fits.display());
    finish(
        "evaluate",
        config,
        None,
        start,
        &args.out,
        vec![METRICS_FILE.into(), REPLICATE_METRICS_FILE.into()],
    )
}
