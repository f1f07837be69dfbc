use std::path::{Path, PathBuf};

use rayon::prelude::*;
use splinemix::{Error, Result};

pub const DATA_FILE: &str = "data.csv";
pub const COVARIATES_FILE: &str = "covariates.csv";
pub const TRUTH_FILE: &str = "truth.csv";

/// One dataset to process. `name` is the replicate directory, if any; its
/// outputs go to the same-named subdirectory of `--out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub name: Option<String>,
    pub data: PathBuf,
    pub covariates: Option<PathBuf>,
}

impl Job {
    /// Output path relative to `--out`.
    pub fn relative(&self, file: &str) -> PathBuf {
        match &self.name {
            Some(n) => Path::new(n).join(file),
            None => PathBuf::from(file),
        }
    }
}

pub fn replicate_name(r: usize) -> String {
    format!("rep-{r:03}")
}

/// `rep-*` subdirectories of `dir`, sorted by name.
pub fn replicate_dirs(dir: &Path) -> Result<Vec<String>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("rep-") && entry.path().is_dir() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.is_file().then_some(path)
}

/// Resolves `--data`/`--covariates` into jobs.
pub fn discover(data: &Path, covariates: Option<&Path>) -> Result<Vec<Job>> {
    if !data.is_dir() {
        return Ok(vec![Job {
            name: None,
            data: data.to_path_buf(),
            covariates: covariates.map(Path::to_path_buf),
        }]);
    }
    if covariates.is_some() {
        return Err(Error::config("--covariates only applies when --data is a file"));
    }
    if data.join(DATA_FILE).is_file() {
        return Ok(vec![Job {
            name: None,
            data: data.join(DATA_FILE),
            covariates: optional(data.join(COVARIATES_FILE)),
        }]);
    }
    let reps = replicate_dirs(data)?;
    if reps.is_empty() {
        return Err(Error::data(format!(
            "{}: neither {DATA_FILE} nor rep-* directories found",
            data.display()
        )));
    }
    Ok(reps
        .into_iter()
        .map(|n| {
            let dir = data.join(&n);
            Job {
                name: Some(n),
                data: dir.join(DATA_FILE),
                covariates: optional(dir.join(COVARIATES_FILE)),
            }
        })
        .collect())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    if workers == Some(0) {
        return Err(Error::config("--workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Maps `f` over `items` in parallel (inside the current pool), keeping input
/// order. The first failure in input order wins.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    items.par_iter().map(&f).collect::<Vec<_>>().into_iter().collect()
}
