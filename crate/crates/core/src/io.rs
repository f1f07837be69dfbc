//! Text formats: key-value configs, long-format data, and report tables.
//!
//! Floats are always written with 17 significant digits so that every file
//! round-trips bit-exactly. Component and entry labels in report files are
//! 1-based; `index` columns are 0-based positions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::basis::rescale_times;
use crate::error::{Error, Result};
use crate::gibbs::{FitConfig, InitMethod, PosteriorSamples};
use crate::model::{Dataset, Hyperparams};
use crate::postproc::{DicReport, SummaryReport};
use crate::sim::{MetricsReport, ReplicateMetrics, ScenarioSpec, Trajectories, Truth};

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// key = value configs

/// Parsed `key = value` lines. Blank lines and `#` comments are skipped.
/// Every key must be consumed before [`KeyValues::finish`], otherwise it is
/// reported as unknown.
#[derive(Debug)]
pub struct KeyValues {
    entries: Vec<(String, String, usize)>,
    used: Vec<bool>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(format!("line {line_no}: empty key")));
            }
            if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| *k == key) {
                return Err(Error::config(format!(
                    "line {line_no}: duplicate key `{key}` (first set on line {first})"
                )));
            }
            entries.push((key, value.trim().to_string(), line_no));
        }
        let used = vec![false; entries.len()];
        Ok(KeyValues { entries, used })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let pos = self.entries.iter().position(|(k, _, _)| k == key)?;
        self.used[pos] = true;
        let (_, v, line) = &self.entries[pos];
        Some((v.clone(), *line))
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(format!("line {line}: invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn get_matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_matrix(&v)
                .map(Some)
                .map_err(|e| e.context(format!("line {line}: `{key}`"))),
        }
    }

    /// Fails on the first key that was never consumed.
    pub fn finish(self) -> Result<()> {
        match self.used.iter().position(|u| !u) {
            None => Ok(()),
            Some(pos) => {
                let (k, _, line) = &self.entries[pos];
                Err(Error::config(format!("line {line}: unknown key `{k}`")))
            }
        }
    }
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    let x = x.trim();
                    x.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::config(format!("invalid number `{x}`")))
                })
                .collect()
        })
        .collect()
}

pub fn format_matrix(m: &[Vec<f64>]) -> String {
    m.iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Everything `fit` and `select` read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub fit: FitConfig,
    /// Center and scale continuous covariates before fitting.
    pub standardize: bool,
    /// Credible level of reported bands and intervals.
    pub level: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            fit: FitConfig::default(),
            standardize: false,
            level: 0.95,
        }
    }
}

impl FitSettings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut s = FitSettings::default();
        let f = &mut s.fit;
        macro_rules! set {
            ($kv:ident, $($key:literal => $field:expr),+ $(,)?) => {
                $( if let Some(v) = $kv.get($key)? { $field = v; } )+
            };
        }
        set!(kv,
            "components" => f.components,
            "basis" => f.basis,
            "iterations" => f.iterations,
            "burn_in" => f.burn_in,
            "thin" => f.thin,
            "seed" => f.seed,
            "sigma_alpha_sq" => f.hyper.sigma_alpha_sq,
            "nu_sigma" => f.hyper.nu_sigma,
            "a_sigma" => f.hyper.a_sigma,
            "nu_tau" => f.hyper.nu_tau,
            "a_tau" => f.hyper.a_tau,
            "nu_kappa" => f.hyper.nu_kappa,
            "a_kappa" => f.hyper.a_kappa,
            "sigma_delta_sq" => f.hyper.sigma_delta_sq,
            "standardize" => s.standardize,
            "level" => s.level,
        );
        if let Some(v) = kv.get::<String>("init")? {
            s.fit.init = v.parse::<InitMethod>()?;
        }
        kv.finish()?;
        s.fit.validate()?;
        if !(s.level > 0.0 && s.level < 1.0) {
            return Err(Error::config(format!("level must lie in (0, 1), got {}", s.level)));
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).map_err(|e| e.context(path.display()))
    }

    /// Canonical text form, parseable by [`FitSettings::parse`].
    pub fn render(&self) -> String {
        let f = &self.fit;
        let h: &Hyperparams = &f.hyper;
        let mut out = String::new();
        let pairs: [(&str, String); 17] = [
            ("components", f.components.to_string()),
            ("basis", f.basis.to_string()),
            ("iterations", f.iterations.to_string()),
            ("burn_in", f.burn_in.to_string()),
            ("thin", f.thin.to_string()),
            ("seed", f.seed.to_string()),
            ("init", f.init.to_string()),
            ("sigma_alpha_sq", h.sigma_alpha_sq.to_string()),
            ("nu_sigma", h.nu_sigma.to_string()),
            ("a_sigma", h.a_sigma.to_string()),
            ("nu_tau", h.nu_tau.to_string()),
            ("a_tau", h.a_tau.to_string()),
            ("nu_kappa", h.nu_kappa.to_string()),
            ("a_kappa", h.a_kappa.to_string()),
            ("sigma_delta_sq", h.sigma_delta_sq.to_string()),
            ("standardize", self.standardize.to_string()),
            ("level", self.level.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Scenario plus replicate count, as read by `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub spec: ScenarioSpec,
    pub replicates: usize,
}

impl SimulationConfig {
    /// `scenario = a | b` picks the preset (default `a`); any other key
    /// overrides the preset.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut spec = match kv.get::<String>("scenario")?.as_deref() {
            None | Some("a") | Some("A") => ScenarioSpec::scenario_a(),
            Some("b") | Some("B") => ScenarioSpec::scenario_b(),
            Some(other) => return Err(Error::config(format!("unknown scenario `{other}` (a | b)"))),
        };
        let mut replicates = 1usize;
        if let Some(v) = kv.get("components")? {
            spec.components = v;
        }
        if let Some(v) = kv.get("entries")? {
            spec.entries = v;
        }
        if let Some(v) = kv.get("subjects")? {
            spec.subjects = v;
        }
        if let Some(v) = kv.get("time_points")? {
            spec.time_points = v;
        }
        if let Some(v) = kv.get("basis")? {
            spec.basis = v;
        }
        if let Some(v) = kv.get("covariates")? {
            spec.covariates = v;
        }
        if let Some(v) = kv.get("seed")? {
            spec.seed = v;
        }
        if let Some(v) = kv.get("replicates")? {
            replicates = v;
        }
        for (key, field) in [
            ("alpha0", &mut spec.alpha0),
            ("alpha1", &mut spec.alpha1),
            ("sigma_sq", &mut spec.sigma_sq),
            ("tau_sq", &mut spec.tau_sq),
            ("delta", &mut spec.delta),
        ] {
            if let Some(m) = kv.get_matrix(key)? {
                *field = m;
            }
        }
        kv.finish()?;
        spec.validate()?;
        Ok(SimulationConfig { spec, replicates })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).map_err(|e| e.context(path.display()))
    }

    pub fn render(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        for (k, v) in [
            ("components", s.components.to_string()),
            ("entries", s.entries.to_string()),
            ("subjects", s.subjects.to_string()),
            ("time_points", s.time_points.to_string()),
            ("basis", s.basis.to_string()),
            ("covariates", s.covariates.to_string()),
            ("seed", s.seed.to_string()),
            ("replicates", self.replicates.to_string()),
            ("alpha0", format_matrix(&s.alpha0)),
            ("alpha1", format_matrix(&s.alpha1)),
            ("sigma_sq", format_matrix(&s.sigma_sq)),
            ("tau_sq", format_matrix(&s.tau_sq)),
            ("delta", format_matrix(&s.delta)),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

// ---------------------------------------------------------------------------
// file helpers

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `text` in one go, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::data(format!("line {}: malformed row: {e}", p.line())),
        None => Error::data(format!("malformed table: {e}")),
    }
}

fn header(r: &mut csv::Reader<impl Read>) -> Result<Vec<String>> {
    Ok(r.headers().map_err(csv_error)?.iter().map(str::to_string).collect())
}

fn expect_header(r: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let h = header(r)?;
    if h != expected {
        return Err(Error::data(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            h.join(",")
        )));
    }
    Ok(())
}

fn parse_num(field: &str, what: &str, line: u64) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::data(format!("row {line}: non-finite {what} `{field}`"))),
        Err(_) => Err(Error::data(format!("row {line}: cannot parse {what} `{field}`"))),
    }
}

fn parse_index(field: &str, what: &str, line: u64) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::data(format!("row {line}: invalid {what} `{field}`")))
}

fn parse_label(field: &str, what: &str, line: u64) -> Result<usize> {
    match parse_index(field, what, line)? {
        0 => Err(Error::data(format!("row {line}: {what} labels start at 1"))),
        v => Ok(v - 1),
    }
}

fn records<R: Read>(r: &mut csv::Reader<R>) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
    r.records().map(|rec| {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        Ok((line, rec))
    })
}

// ---------------------------------------------------------------------------
// datasets

/// A dataset read from disk, with the original subject/entry labels and the
/// raw (unrescaled) time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub subjects: Vec<String>,
    pub entries: Vec<String>,
    pub raw_times: Vec<f64>,
}

/// Parses a long-format data table (`subject,entry,time,value`) and an
/// optional covariate table (`subject,<name>,...`).
///
/// Subjects and entries keep their order of first appearance. Every
/// (subject, entry) series must be observed on the same set of times; those
/// times are rescaled onto `[0, 1]`.
pub fn parse_dataset<R1: Read, R2: Read>(data: R1, covariates: Option<R2>) -> Result<LoadedData> {
    let mut rd = csv_reader(data);
    expect_header(&mut rd, &["subject", "entry", "time", "value"])?;

    let mut subjects: Vec<String> = Vec::new();
    let mut subject_idx: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<String> = Vec::new();
    let mut entry_idx: HashMap<String, usize> = HashMap::new();
    // cells[(s, e)] = (time, value, line)
    let mut cells: HashMap<(usize, usize), Vec<(f64, f64, u64)>> = HashMap::new();
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        let s = intern(&rec[0], &mut subjects, &mut subject_idx);
        let e = intern(&rec[1], &mut entries, &mut entry_idx);
        let t = parse_num(&rec[2], "time", line)?;
        let v = parse_num(&rec[3], "value", line)?;
        cells.entry((s, e)).or_default().push((t, v, line));
    }
    if subjects.is_empty() {
        return Err(Error::data("data table has no rows"));
    }

    let mut reference: Option<(Vec<f64>, usize, usize)> = None;
    let n_sub = subjects.len();
    let n_ent = entries.len();
    let mut y = Vec::new();
    for s in 0..n_sub {
        for e in 0..n_ent {
            let cell = cells.get_mut(&(s, e)).ok_or_else(|| {
                Error::data(format!(
                    "subject {} has no observations for entry {}",
                    subjects[s], entries[e]
                ))
            })?;
            cell.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = cell.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::data(format!(
                    "subject {} entry {}: duplicate time {} (row {})",
                    subjects[s], entries[e], w[1].0, w[1].2
                )));
            }
            let times: Vec<f64> = cell.iter().map(|c| c.0).collect();
            match &reference {
                None => reference = Some((times, s, e)),
                Some((rt, rs, re)) => {
                    if *rt != times {
                        return Err(Error::data(format!(
                            "subject {} entry {}: time grid differs from subject {} entry {} \
                             ({} vs {} points)",
                            subjects[s],
                            entries[e],
                            subjects[*rs],
                            entries[*re],
                            times.len(),
                            rt.len()
                        )));
                    }
                }
            }
            y.extend(cell.iter().map(|c| c.1));
        }
    }
    let raw_times = reference.map(|r| r.0).unwrap_or_default();
    let grid = rescale_times(&raw_times)?;

    let (cov, names) = match covariates {
        None => (DMatrix::from_element(n_sub, 1, 1.0), Vec::new()),
        Some(r) => parse_covariates(r, &subjects)?,
    };
    let dataset = Dataset::new(y, n_sub, n_ent, grid, cov, names)?;
    Ok(LoadedData {
        dataset,
        subjects,
        entries,
        raw_times,
    })
}

fn intern(label: &str, list: &mut Vec<String>, index: &mut HashMap<String, usize>) -> usize {
    if let Some(&i) = index.get(label) {
        return i;
    }
    list.push(label.to_string());
    index.insert(label.to_string(), list.len() - 1);
    list.len() - 1
}

fn parse_covariates<R: Read>(r: R, subjects: &[String]) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut rd = csv_reader(r);
    let h = header(&mut rd)?;
    if h.first().map(String::as_str) != Some("subject") {
        return Err(Error::data("covariate header must start with `subject`"));
    }
    let names: Vec<String> = h[1..].to_vec();
    let index: HashMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut cov = DMatrix::from_element(subjects.len(), names.len() + 1, 1.0);
    let mut seen = vec![false; subjects.len()];
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        let i = *index
            .get(&rec[0])
            .ok_or_else(|| Error::data(format!("row {line}: covariates for unknown subject {}", &rec[0])))?;
        if seen[i] {
            return Err(Error::data(format!(
                "row {line}: duplicate covariates for subject {}",
                &rec[0]
            )));
        }
        seen[i] = true;
        for (p, name) in names.iter().enumerate() {
            cov[(i, p + 1)] = parse_num(&rec[p + 1], name, line)?;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::data(format!("no covariates for subject {}", subjects[i])));
    }
    Ok((cov, names))
}

pub fn read_dataset(data_path: &Path, covariates_path: Option<&Path>) -> Result<LoadedData> {
    let data = File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let cov = match covariates_path {
        Some(p) => Some(File::open(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    parse_dataset(std::io::BufReader::new(data), cov.map(std::io::BufReader::new))
        .map_err(|e| e.context(data_path.display()))
}

/// Default labels `1..=count`.
pub fn numbered(count: usize) -> Vec<String> {
    (1..=count).map(|i| i.to_string()).collect()
}

/// Writes the data table using the dataset's (rescaled) grid as times.
pub fn write_data_csv(path: &Path, data: &Dataset, subjects: &[String], entries: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "subject,entry,time,value").map_err(io)?;
    let times = data.grid().times();
    for (i, s) in subjects.iter().enumerate() {
        for (k, e) in entries.iter().enumerate() {
            for (t, v) in times.iter().zip(data.series(i, k)) {
                writeln!(w, "{s},{e},{},{}", fmt_f64(*t), fmt_f64(*v)).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn write_covariates_csv(path: &Path, data: &Dataset, subjects: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut head = String::from("subject");
    for n in data.covariate_names() {
        head.push(',');
        head.push_str(n);
    }
    writeln!(w, "{head}").map_err(io)?;
    let cov = data.covariates();
    for (i, s) in subjects.iter().enumerate() {
        let mut line = s.clone();
        for p in 1..cov.ncols() {
            line.push(',');
            line.push_str(&fmt_f64(cov[(i, p)]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

// ---------------------------------------------------------------------------
// truth records

/// Writes `quantity,component,entry,index,value` rows for the mean curves,
/// spline coefficients, logistic coefficients and subject labels. Fields that
/// do not apply are left empty.
pub fn write_truth_csv(path: &Path, truth: &Truth) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "quantity,component,entry,index,value").map_err(io)?;
    for (g, comp) in truth.means.iter().enumerate() {
        for (k, curve) in comp.iter().enumerate() {
            for (j, v) in curve.iter().enumerate() {
                writeln!(w, "mean,{},{},{j},{}", g + 1, k + 1, fmt_f64(*v)).map_err(io)?;
            }
        }
    }
    for (g, comp) in truth.beta.iter().enumerate() {
        for (k, b) in comp.iter().enumerate() {
            for (q, v) in b.iter().enumerate() {
                writeln!(w, "beta,{},{},{q},{}", g + 1, k + 1, fmt_f64(*v)).map_err(io)?;
            }
        }
    }
    for (g, d) in truth.delta.iter().enumerate() {
        for (p, v) in d.iter().enumerate() {
            writeln!(w, "delta,{},,{p},{}", g + 1, fmt_f64(*v)).map_err(io)?;
        }
    }
    for (i, g) in truth.labels.iter().enumerate() {
        writeln!(w, "label,{},,{i},", g + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn place<T: Clone + Default>(v: &mut Vec<T>, idx: usize) -> &mut T {
    if v.len() <= idx {
        v.resize(idx + 1, T::default());
    }
    &mut v[idx]
}

pub fn parse_truth<R: Read>(r: R) -> Result<Truth> {
    let mut rd = csv_reader(r);
    expect_header(&mut rd, &["quantity", "component", "entry", "index", "value"])?;
    let mut truth = Truth {
        means: Vec::new(),
        beta: Vec::new(),
        delta: Vec::new(),
        labels: Vec::new(),
    };
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        let g = parse_label(&rec[1], "component", line)?;
        let idx = parse_index(&rec[3], "index", line)?;
        match &rec[0] {
            "mean" | "beta" => {
                let k = parse_label(&rec[2], "entry", line)?;
                let v = parse_num(&rec[4], "value", line)?;
                let target = if &rec[0] == "mean" {
                    &mut truth.means
                } else {
                    &mut truth.beta
                };
                *place(place(place(target, g), k), idx) = v;
            }
            "delta" => *place(place(&mut truth.delta, g), idx) = parse_num(&rec[4], "value", line)?,
            "label" => *place(&mut truth.labels, idx) = g,
            other => return Err(Error::data(format!("row {line}: unknown quantity `{other}`"))),
        }
    }
    if truth.means.is_empty() {
        return Err(Error::data("truth table has no mean curves"));
    }
    Ok(truth)
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_truth(std::io::BufReader::new(f)).map_err(|e| e.context(path.display()))
}

// ---------------------------------------------------------------------------
// fit reports

/// `component,entry,time,mean,lower,upper`, times on the original scale.
pub fn write_trajectories_csv(path: &Path, summary: &SummaryReport, times: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "component,entry,time,mean,lower,upper").map_err(io)?;
    for band in &summary.trajectories {
        for (j, t) in times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                band.component + 1,
                band.entry + 1,
                fmt_f64(*t),
                fmt_f64(band.mean[j]),
                fmt_f64(band.lower[j]),
                fmt_f64(band.upper[j])
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Posterior-mean curves from a trajectories table, `[component][entry][time]`.
pub fn parse_trajectory_means<R: Read>(r: R) -> Result<Trajectories> {
    let mut rd = csv_reader(r);
    expect_header(&mut rd, &["component", "entry", "time", "mean", "lower", "upper"])?;
    let mut out: Trajectories = Vec::new();
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        let g = parse_label(&rec[0], "component", line)?;
        let k = parse_label(&rec[1], "entry", line)?;
        let v = parse_num(&rec[3], "mean", line)?;
        place(place(&mut out, g), k).push(v);
    }
    Ok(out)
}

/// `component,coefficient,mean,lower,upper` for contrasts against the last
/// component.
pub fn write_logistic_csv(path: &Path, summary: &SummaryReport, coefficient_names: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "component,coefficient,mean,lower,upper").map_err(io)?;
    for c in &summary.logistic {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.component + 1,
            coefficient_names[c.coefficient],
            fmt_f64(c.mean),
            fmt_f64(c.lower),
            fmt_f64(c.upper)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Posterior-mean contrasts from a logistic table.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticMeans {
    /// Coefficient names in file order of the first component.
    pub names: Vec<String>,
    /// `(G - 1) x (P + 1)`.
    pub means: Vec<Vec<f64>>,
}

pub fn parse_logistic_means<R: Read>(r: R) -> Result<LogisticMeans> {
    let mut rd = csv_reader(r);
    expect_header(&mut rd, &["component", "coefficient", "mean", "lower", "upper"])?;
    let mut names = Vec::new();
    let mut means: Vec<Vec<f64>> = Vec::new();
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        let g = parse_label(&rec[0], "component", line)?;
        let v = parse_num(&rec[2], "mean", line)?;
        if g == 0 {
            names.push(rec[1].to_string());
        }
        place(&mut means, g).push(v);
    }
    Ok(LogisticMeans { names, means })
}

/// Coefficient names with the intercept first.
pub fn coefficient_names(data: &Dataset) -> Vec<String> {
    std::iter::once("intercept".to_string())
        .chain(data.covariate_names().iter().cloned())
        .collect()
}

/// `subject,p_1,...,p_G,map`: posterior allocation frequencies and the most
/// frequent component (ties to the lower label).
pub fn write_allocations_csv(path: &Path, summary: &SummaryReport, subjects: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let a = &summary.allocation;
    let mut head = String::from("subject");
    for g in 0..a.ncols() {
        let _ = write!(head, ",p_{}", g + 1);
    }
    head.push_str(",map");
    writeln!(w, "{head}").map_err(io)?;
    for (i, s) in subjects.iter().enumerate() {
        let mut line = s.clone();
        let mut best = 0;
        for g in 0..a.ncols() {
            let _ = write!(line, ",{}", fmt_f64(a[(i, g)]));
            if a[(i, g)] > a[(i, best)] {
                best = g;
            }
        }
        let _ = write!(line, ",{}", best + 1);
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per retained sweep and chain: chain number, sweep number,
/// observed-data log likelihood, the relabeling permutation, then every
/// component's `theta`, `sigma_sq`, `tau_sq`, `delta` and `kappa_sq`.
/// Subject-level random intercepts and allocations are summarized elsewhere
/// and not archived.
pub fn write_trace_csv(path: &Path, chains: &[(PosteriorSamples, Vec<Vec<usize>>)]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut head = String::from("chain,sweep,log_likelihood,permutation");
    if let Some(first) = chains.iter().find_map(|(s, _)| s.draws.first()) {
        for (g, c) in first.components.iter().enumerate() {
            for (k, e) in c.entries.iter().enumerate() {
                for q in 0..e.theta.len() {
                    let _ = write!(head, ",theta_{}_{}_{q}", g + 1, k + 1);
                }
                let _ = write!(head, ",sigma_sq_{}_{},tau_sq_{}_{}", g + 1, k + 1, g + 1, k + 1);
            }
            for p in 0..c.delta.len() {
                let _ = write!(head, ",delta_{}_{p}", g + 1);
            }
            let _ = write!(head, ",kappa_sq_{}", g + 1);
        }
    }
    writeln!(w, "{head}").map_err(io)?;
    let mut line = String::new();
    for (chain, (samples, permutations)) in chains.iter().enumerate() {
        for (s, d) in samples.draws.iter().enumerate() {
            line.clear();
            let perm = permutations
                .get(s)
                .map(|p| p.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            let _ = write!(line, "{},{},{},{perm}", chain + 1, d.sweep, fmt_f64(d.log_likelihood));
            for c in &d.components {
                for e in &c.entries {
                    for v in e.theta.iter() {
                        let _ = write!(line, ",{}", fmt_f64(*v));
                    }
                    let _ = write!(line, ",{},{}", fmt_f64(e.sigma_sq), fmt_f64(e.tau_sq));
                }
                for v in c.delta.iter() {
                    let _ = write!(line, ",{}", fmt_f64(*v));
                }
                let _ = write!(line, ",{}", fmt_f64(c.kappa_sq));
            }
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// `components,mean_deviance,p_v,dic,selected`.
pub fn write_dic_csv(path: &Path, report: &DicReport) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "components,mean_deviance,p_v,dic,selected").map_err(io)?;
    for e in &report.entries {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.components,
            fmt_f64(e.dic.mean_deviance),
            fmt_f64(e.dic.p_v),
            fmt_f64(e.dic.dic),
            u8::from(e.components == report.selected)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Selected component count from a DIC table.
pub fn parse_dic_selected<R: Read>(r: R) -> Result<usize> {
    let mut rd = csv_reader(r);
    expect_header(&mut rd, &["components", "mean_deviance", "p_v", "dic", "selected"])?;
    for rec in records(&mut rd) {
        let (line, rec) = rec?;
        if &rec[4] == "1" {
            return parse_index(&rec[0], "components", line);
        }
    }
    Err(Error::data("DIC table has no selected row"))
}

/// Aggregated metrics, `metric,component,coefficient,mean,sd`. Trajectory
/// metrics leave `coefficient` empty; RMSE rows leave `sd` empty.
pub fn write_metrics_csv(path: &Path, report: &MetricsReport, coefficient_names: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "metric,component,coefficient,mean,sd").map_err(io)?;
    for (name, col) in [
        ("arse", &report.arse),
        ("abias", &report.abias),
        ("vbias", &report.vbias),
    ] {
        for (g, m) in col.iter().enumerate() {
            writeln!(w, "{name},{},,{},{}", g + 1, fmt_f64(m.mean), fmt_f64(m.sd)).map_err(io)?;
        }
    }
    for (g, row) in report.rmse.iter().enumerate() {
        for (p, v) in row.iter().enumerate() {
            let coef = coefficient_names.get(p).cloned().unwrap_or_else(|| p.to_string());
            writeln!(w, "rmse,{},{coef},{},", g + 1, fmt_f64(*v)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Per-replicate metrics, `replicate,component,matched,arse,abias,vbias`
/// where `matched` is the estimated label assigned to the true component.
pub fn write_replicate_metrics_csv(path: &Path, names: &[String], reps: &[ReplicateMetrics]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "replicate,component,matched,arse,abias,vbias").map_err(io)?;
    for (name, r) in names.iter().zip(reps) {
        for (g, m) in r.components.iter().enumerate() {
            writeln!(
                w,
                "{name},{},{},{},{},{}",
                g + 1,
                r.permutation[g] + 1,
                fmt_f64(m.arse),
                fmt_f64(m.abias),
                fmt_f64(m.vbias)
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
