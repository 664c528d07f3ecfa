//! Parameter sweeps over noise level, sampling rate, device count and input
//! magnitude, emitted as deterministic CSV or JSON tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::{np_threshold, pairwise_success_probability, DiscretePrior, MapClassifier, NpRule};
use crate::devices::{self, DEFAULT_ONSET_S, DEFAULT_RATE_HZ, DEFAULT_WINDOW_S};
use crate::error::{Error, Result};
use crate::estimators::{Baseline, BaselineRule};
use crate::linear::{largest_singular_value, linear_system_upper_bound, LinearSystemBoundInput};
use crate::montecarlo::{
    collection_success_probability, evaluate_estimator, nway_success_probability, McConfig,
    McEstimate,
};
use crate::noise::NoiseModel;
use crate::scenario::{ScenarioMean, ScenarioSet, ScenarioSpec};
use crate::signal::{phase_variants, DeviceSignal};

/// `n` points spaced evenly in log10 between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

fn default_sigma2() -> Vec<f64> {
    log_grid(1e-2, 1e6, 17)
}

fn default_decimation() -> Vec<usize> {
    vec![1, 2, 4, 12, 60]
}

fn default_magnitudes() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

fn default_mc() -> McConfig {
    McConfig {
        samples: 100_000,
        seed: 0,
        confidence_level: 0.95,
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub path: Option<String>,
    #[serde(default = "csv_format")]
    pub format: OutputFormat,
}

fn csv_format() -> OutputFormat {
    OutputFormat::Csv
}

/// Experiment description as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario length in samples; required with inline scenarios.
    #[serde(rename = "T", default)]
    pub len: Option<usize>,
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    /// Scenario set files, relative to the config file.
    #[serde(default)]
    pub scenario_files: Vec<String>,
    /// Noise-variance grid for the noise and N-way sweeps.
    #[serde(default = "default_sigma2")]
    pub sigma2: Vec<f64>,
    /// Noise variance for single-point commands and the rate and magnitude
    /// sweeps.
    #[serde(default = "one")]
    pub fixed_sigma2: f64,
    /// Base covariance `C`; the noise at variance `σ²` is then `σ² C`.
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// CSV file of covariance rows, relative to the config file.
    #[serde(default)]
    pub covariance_file: Option<String>,
    #[serde(default = "default_decimation")]
    pub decimation: Vec<usize>,
    #[serde(default = "default_magnitudes")]
    pub magnitudes: Vec<f64>,
    /// Linear system matrix for the magnitude sweep; defaults to the
    /// scenario means as columns.
    #[serde(default)]
    pub system_matrix: Option<Vec<Vec<f64>>>,
    /// `p(u = 0)` for the magnitude sweep.
    #[serde(default = "half")]
    pub null_prior: f64,
    /// Overrides the per-scenario prior weights (normalized).
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    #[serde(default = "default_mc")]
    pub mc: McConfig,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            len: None,
            sample_rate_hz: None,
            scenarios: Vec::new(),
            scenario_files: Vec::new(),
            sigma2: default_sigma2(),
            fixed_sigma2: 1.0,
            covariance: None,
            covariance_file: None,
            decimation: default_decimation(),
            magnitudes: default_magnitudes(),
            system_matrix: None,
            null_prior: 0.5,
            prior: None,
            mc: default_mc(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Toaster against kettle stand-ins, 100 s at 12 Hz.
    pub fn toaster_vs_kettle() -> Self {
        Self::with_standins(&[devices::TOASTER.scenario(DEFAULT_ONSET_S, DEFAULT_RATE_HZ),
            devices::KETTLE.scenario(DEFAULT_ONSET_S, DEFAULT_RATE_HZ)])
    }

    /// Toaster stand-in against nothing switched on.
    pub fn toaster_vs_nothing() -> Self {
        Self::with_standins(&[devices::nothing(),
            devices::TOASTER.scenario(DEFAULT_ONSET_S, DEFAULT_RATE_HZ)])
    }

    /// All six appliance stand-ins, switched on at the same time.
    pub fn six_devices() -> Self {
        Self::with_standins(
            &devices::SIX_DEVICES
                .iter()
                .map(|d| d.scenario(DEFAULT_ONSET_S, DEFAULT_RATE_HZ))
                .collect::<Vec<_>>(),
        )
    }

    fn with_standins(scenarios: &[ScenarioSpec]) -> Self {
        Self {
            len: Some(devices::samples_for(DEFAULT_WINDOW_S, DEFAULT_RATE_HZ)),
            sample_rate_hz: Some(DEFAULT_RATE_HZ),
            scenarios: scenarios.to_vec(),
            ..Self::default()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sigma2.is_empty() {
            return bad("sigma2 grid is empty".into());
        }
        if let Some(v) = self.sigma2.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad(format!("sigma2 values must be positive, got {v}"));
        }
        if !(self.fixed_sigma2.is_finite() && self.fixed_sigma2 > 0.0) {
            return bad(format!("fixed_sigma2 must be positive, got {}", self.fixed_sigma2));
        }
        if self.decimation.is_empty() {
            return bad("decimation grid is empty".into());
        }
        if self.decimation.contains(&0) {
            return bad("decimation factors must be >= 1".into());
        }
        if self.magnitudes.is_empty() {
            return bad("magnitude grid is empty".into());
        }
        if let Some(v) = self.magnitudes.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return bad(format!("magnitudes must be nonnegative, got {v}"));
        }
        if !(0.0..=1.0).contains(&self.null_prior) {
            return bad(format!("null_prior must lie in [0, 1], got {}", self.null_prior));
        }
        if self.covariance.is_some() && self.covariance_file.is_some() {
            return bad("give either covariance or covariance_file, not both".into());
        }
        self.mc.validate()
    }
}

/// A config resolved against its files: composed means, prior and noise.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub means: Vec<ScenarioMean>,
    pub prior: DiscretePrior,
    pub sample_rate_hz: f64,
    covariance: Option<DMatrix<f64>>,
    config_hash: String,
}

impl Experiment {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_text(path)?;
        let config = ExperimentConfig::from_json(&text)?;
        Self::from_config(config, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_config(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        config.validate()?;
        let mut sets = Vec::new();
        if !config.scenarios.is_empty() {
            let (len, rate) = match (config.len, config.sample_rate_hz) {
                (Some(len), Some(rate)) => (len, rate),
                _ => {
                    return Err(Error::Config(
                        "inline scenarios need top-level `T` and `sample_rate_hz`".into(),
                    ))
                }
            };
            let set = ScenarioSet {
                len,
                sample_rate_hz: rate,
                scenarios: config.scenarios.clone(),
            };
            set.validate()?;
            sets.push((set, base_dir.to_path_buf()));
        }
        for file in &config.scenario_files {
            let path = base_dir.join(file);
            let set = ScenarioSet::load(&path)?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            sets.push((set, dir));
        }
        let (first, _) = sets
            .first()
            .ok_or_else(|| Error::Config("no scenarios given".into()))?;
        let (len, rate) = (first.len, first.sample_rate_hz);
        let mut means = Vec::new();
        let mut weights = Vec::new();
        for (set, dir) in &sets {
            if set.len != len || set.sample_rate_hz != rate {
                return Err(Error::Config(format!(
                    "scenario sets disagree on T / sample rate: ({len}, {rate}) vs ({}, {})",
                    set.len, set.sample_rate_hz
                )));
            }
            means.extend(set.compose(dir)?);
            weights.extend(set.scenarios.iter().map(|s| s.prior));
        }
        let prior = match &config.prior {
            Some(w) if w.len() != means.len() => {
                return Err(Error::Config(format!(
                    "prior has {} weights for {} scenarios",
                    w.len(),
                    means.len()
                )))
            }
            Some(w) => DiscretePrior::normalized(w.clone())?,
            None => DiscretePrior::normalized(weights)?,
        };

        let covariance = match (&config.covariance, &config.covariance_file) {
            (Some(rows), _) => Some(rows_to_matrix(rows)?),
            (None, Some(file)) => Some(read_matrix_csv(&base_dir.join(file))?),
            (None, None) => None,
        };
        if let Some(c) = &covariance {
            if c.nrows() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: c.nrows(),
                });
            }
            // Validate once up front.
            NoiseModel::full(c.clone())?;
        }
        let config_hash = config.hash();
        Ok(Self {
            config,
            means,
            prior,
            sample_rate_hz: rate,
            covariance,
            config_hash,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// `σ² I`, or `σ² C` when a base covariance is configured.
    pub fn noise(&self, sigma2: f64) -> Result<NoiseModel> {
        match &self.covariance {
            None => NoiseModel::isotropic(sigma2),
            Some(c) => NoiseModel::full(c * sigma2),
        }
    }

    fn metadata(&self, sweep: &str, monte_carlo: bool) -> SweepMetadata {
        SweepMetadata {
            sweep: sweep.into(),
            seed: self.config.mc.seed,
            samples: if monte_carlo { self.config.mc.samples } else { 0 },
            config_hash: self.config_hash.clone(),
        }
    }

    fn two_scenarios(&self) -> Result<(&ScenarioMean, &ScenarioMean, DiscretePrior)> {
        match self.means.as_slice() {
            [a, b] => Ok((a, b, self.prior.clone())),
            other => Err(Error::Config(format!(
                "this command needs exactly two scenarios, got {}",
                other.len()
            ))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config("matrix rows must be nonempty and equally long".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Reads a headerless CSV of numeric rows.
fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("bad matrix entry `{f}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    rows_to_matrix(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub probability: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
    /// Curve label when a table carries several curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
}

impl SweepRow {
    pub fn exact(x: f64, probability: f64) -> Self {
        Self {
            x,
            probability,
            std_error: 0.0,
            ci_low: probability,
            ci_high: probability,
            method: Method::ClosedForm,
            series: None,
        }
    }

    pub fn estimated(x: f64, est: &McEstimate) -> Self {
        Self {
            x,
            probability: est.value,
            std_error: est.std_error,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            method: Method::MonteCarlo,
            series: None,
        }
    }

    pub fn with_series(mut self, series: impl Into<String>) -> Self {
        self.series = Some(series.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub sweep: String,
    pub seed: u64,
    /// Monte-Carlo sample count; 0 for purely closed-form tables.
    pub samples: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub metadata: SweepMetadata,
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: [&str; 6] = ["x", "probability", "std_error", "ci_low", "ci_high", "method"];

impl SweepTable {
    fn has_series(&self) -> bool {
        self.rows.iter().any(|r| r.series.is_some())
    }

    /// CSV with header `x,probability,std_error,ci_low,ci_high,method`; a
    /// trailing `series` column is added only for multi-curve tables.
    pub fn to_csv(&self) -> String {
        let with_series = self.has_series();
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = CSV_HEADER.to_vec();
        if with_series {
            header.push("series");
        }
        wtr.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut record = vec![
                r.x.to_string(),
                r.probability.to_string(),
                r.std_error.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.method.to_string(),
            ];
            if with_series {
                record.push(r.series.clone().unwrap_or_default());
            }
            wtr.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render(format)).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn sorted_f64(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Closed-form two-scenario MAP success at the fixed noise variance.
pub fn run_pairwise(exp: &Experiment) -> Result<SweepTable> {
    let (m0, m1, prior) = exp.two_scenarios()?;
    let sigma2 = exp.config.fixed_sigma2;
    let p = pairwise_success_probability(m0, m1, &exp.noise(sigma2)?, &prior)?;
    Ok(SweepTable {
        metadata: exp.metadata("pairwise", false),
        rows: vec![SweepRow::exact(sigma2, p)],
    })
}

/// Two-scenario MAP success as a function of the noise variance; closed form.
pub fn run_noise_sweep(exp: &Experiment) -> Result<SweepTable> {
    let (m0, m1, prior) = exp.two_scenarios()?;
    let rows = sorted_f64(&exp.config.sigma2)
        .into_iter()
        .map(|s2| {
            let p = pairwise_success_probability(m0, m1, &exp.noise(s2)?, &prior)?;
            Ok(SweepRow::exact(s2, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        metadata: exp.metadata("noise-sweep", false),
        rows,
    })
}

/// Two-scenario success after decimating by each factor `K` with the start
/// phase unknown. Each scenario becomes a collection of its `K` phase
/// variants, each weighted `p / K`; `K = 1` is the closed form.
pub fn run_rate_sweep(exp: &Experiment) -> Result<SweepTable> {
    let (m0, m1, prior) = exp.two_scenarios()?;
    if exp.covariance.is_some() {
        return Err(Error::Config(
            "rate sweep supports isotropic noise only; decimated covariances differ by phase".into(),
        ));
    }
    let mut factors = exp.config.decimation.clone();
    factors.sort_unstable();
    factors.dedup();
    let len = m0.len();
    if let Some(&max) = factors.last() {
        if max > len {
            return Err(Error::TooShort { len, factor: max });
        }
    }
    let noise = exp.noise(exp.config.fixed_sigma2)?;
    let rate = exp.sample_rate_hz;
    let signal0 = DeviceSignal::new(m0.mean.clone(), rate)?;
    let signal1 = DeviceSignal::new(m1.mean.clone(), rate)?;
    let (p0, p1) = (prior.weights()[0], prior.weights()[1]);

    let rows = factors
        .par_iter()
        .map(|&k| {
            if k == 1 {
                let p = pairwise_success_probability(m0, m1, &noise, &prior)?;
                return Ok(SweepRow::exact(1.0, p));
            }
            let to_means = |sig: &DeviceSignal, label: &str| -> Result<Vec<ScenarioMean>> {
                Ok(phase_variants(sig, k)?
                    .into_iter()
                    .enumerate()
                    .map(|(phase, v)| ScenarioMean::new(format!("{label}@{phase}"), v.into_samples()))
                    .collect())
            };
            let first = to_means(&signal0, &m0.label)?;
            let second = to_means(&signal1, &m1.label)?;
            let weights: Vec<f64> = std::iter::repeat(p0 / k as f64)
                .take(k)
                .chain(std::iter::repeat(p1 / k as f64).take(k))
                .collect();
            let variant_prior = DiscretePrior::normalized(weights)?;
            let est = collection_success_probability(&first, &second, &variant_prior, &noise, &exp.config.mc)?;
            Ok(SweepRow::estimated(k as f64, &est))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        metadata: exp.metadata("rate-sweep", true),
        rows,
    })
}

fn series_label(m: &ScenarioMean, i: usize) -> String {
    if m.label.is_empty() {
        format!("scenario-{i}")
    } else {
        m.label.clone()
    }
}

fn nway_rows(exp: &Experiment, sigma2: f64) -> Result<Vec<SweepRow>> {
    let est = nway_success_probability(&exp.means, &exp.prior, &exp.noise(sigma2)?, &exp.config.mc)?;
    let mut rows = vec![SweepRow::estimated(sigma2, &est.overall).with_series("overall")];
    rows.extend(
        est.conditional
            .iter()
            .zip(&exp.means)
            .enumerate()
            .map(|(i, (c, m))| SweepRow::estimated(sigma2, c).with_series(series_label(m, i))),
    );
    Ok(rows)
}

/// N-way MAP success at the fixed noise variance: overall plus one
/// conditional row per scenario.
pub fn run_nway(exp: &Experiment) -> Result<SweepTable> {
    Ok(SweepTable {
        metadata: exp.metadata("nway", true),
        rows: nway_rows(exp, exp.config.fixed_sigma2)?,
    })
}

/// [`run_nway`] across the noise-variance grid.
pub fn run_nway_sweep(exp: &Experiment) -> Result<SweepTable> {
    let grid = sorted_f64(&exp.config.sigma2);
    let chunks = grid
        .par_iter()
        .map(|&s2| nway_rows(exp, s2))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        metadata: exp.metadata("nway-sweep", true),
        rows: chunks.into_iter().flatten().collect(),
    })
}

/// System matrix for the magnitude sweep: configured, or the scenario means
/// as columns (each device a linear response to a unit input).
pub fn system_matrix(exp: &Experiment) -> Result<DMatrix<f64>> {
    match &exp.config.system_matrix {
        Some(rows) => rows_to_matrix(rows),
        None => {
            if exp.means.is_empty() {
                return Err(Error::Config("magnitude sweep needs a system matrix or scenarios".into()));
            }
            let len = exp.means[0].len();
            Ok(DMatrix::from_fn(len, exp.means.len(), |t, j| exp.means[j].mean[t]))
        }
    }
}

/// Linear-system upper bound on detecting a nonzero input as a function of
/// its magnitude bound `U`.
pub fn run_magnitude_sweep(exp: &Experiment) -> Result<SweepTable> {
    if exp.covariance.is_some() {
        return Err(Error::Config("magnitude sweep assumes isotropic noise".into()));
    }
    let sigma_max = largest_singular_value(&system_matrix(exp)?);
    let rows = sorted_f64(&exp.config.magnitudes)
        .into_iter()
        .map(|u| {
            let input = LinearSystemBoundInput::new(sigma_max, u, exp.config.fixed_sigma2, exp.config.null_prior)?;
            Ok(SweepRow::exact(u, linear_system_upper_bound(&input)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        metadata: exp.metadata("magnitude-sweep", false),
        rows,
    })
}

/// Neyman–Pearson rule between the two scenarios at the fixed variance.
pub fn run_np_threshold(exp: &Experiment, beta: f64) -> Result<NpRule> {
    let (m0, m1, _) = exp.two_scenarios()?;
    np_threshold(m0, m1, &exp.noise(exp.config.fixed_sigma2)?, beta)
}

/// Scores baseline rules against the MAP rule on the same samples.
pub fn run_eval_estimator(exp: &Experiment, rules: &[BaselineRule]) -> Result<SweepTable> {
    let sigma2 = exp.config.fixed_sigma2;
    let noise = exp.noise(sigma2)?;
    let mc = &exp.config.mc;
    let map = MapClassifier::new(&exp.means, &exp.prior, &noise)?;
    let map_est = evaluate_estimator(|y| map.classify(y), &exp.means, &exp.prior, &noise, mc)?;
    let mut rows = vec![SweepRow::estimated(sigma2, &map_est).with_series("map")];
    for rule in rules {
        let baseline = Baseline::new(*rule, &exp.means, &noise)?;
        let est = evaluate_estimator(|y| baseline.decide(y), &exp.means, &exp.prior, &noise, mc)?;
        rows.push(SweepRow::estimated(sigma2, &est).with_series(rule.name()));
    }
    Ok(SweepTable {
        metadata: exp.metadata("eval-estimator", true),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Component, PulseParams, SignalSource};
    use crate::special::normal_cdf;

    fn pulse_spec(name: &str, amplitude: f64, onset: usize, duration: usize) -> ScenarioSpec {
        ScenarioSpec {
            name: name.into(),
            prior: 1.0,
            components: vec![Component {
                source: SignalSource::Pulse(PulseParams {
                    amplitude,
                    onset,
                    duration,
                }),
                shift: 0,
            }],
        }
    }

    fn config(scenarios: Vec<ScenarioSpec>, len: usize) -> ExperimentConfig {
        ExperimentConfig {
            len: Some(len),
            sample_rate_hz: Some(12.0),
            scenarios,
            ..ExperimentConfig::default()
        }
    }

    fn experiment(cfg: ExperimentConfig) -> Experiment {
        Experiment::from_config(cfg, Path::new(".")).unwrap()
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e2, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-2).abs() < 1e-16 && (g[2] - 1.0).abs() < 1e-15 && (g[4] - 100.0).abs() < 1e-12);
        assert_eq!(log_grid(3.0, 5.0, 1), vec![3.0]);
    }

    #[test]
    fn noise_sweep_examples() {
        let scen = vec![devices::nothing(), pulse_spec("p", 2.0, 1, 2)];
        let mut cfg = config(scen, 12);
        cfg.sigma2 = vec![1e-12];
        let t = run_noise_sweep(&experiment(cfg.clone())).unwrap();
        assert!(t.rows[0].probability >= 1.0 - 1e-9);
        cfg.sigma2 = vec![1e12];
        let t = run_noise_sweep(&experiment(cfg.clone())).unwrap();
        assert!((t.rows[0].probability - 0.5).abs() < 1e-3);

        let same = vec![pulse_spec("a", 1.0, 0, 3), pulse_spec("b", 1.0, 0, 3)];
        let mut cfg = config(same, 12);
        cfg.sigma2 = log_grid(1e-3, 1e3, 7);
        let t = run_noise_sweep(&experiment(cfg)).unwrap();
        assert!(t.rows.iter().all(|r| r.probability == 0.5 && r.std_error == 0.0));
    }

    #[test]
    fn noise_sweep_needs_two_scenarios() {
        let cfg = config(vec![devices::nothing()], 4);
        assert!(matches!(run_noise_sweep(&experiment(cfg)), Err(Error::Config(_))));
    }

    #[test]
    fn rate_sweep_anchor_and_identical_case() {
        let scen = vec![pulse_spec("a", 1.0, 2, 10), pulse_spec("b", 1.5, 2, 10)];
        let mut cfg = config(scen, 24);
        cfg.decimation = vec![4, 1, 2];
        cfg.mc.samples = 20_000;
        let exp = experiment(cfg);
        let t = run_rate_sweep(&exp).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.x).collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
        let exact = pairwise_success_probability(&exp.means[0], &exp.means[1], &exp.noise(1.0).unwrap(), &exp.prior)
            .unwrap();
        assert_eq!(t.rows[0].probability, exact);
        assert_eq!(t.rows[0].method, Method::ClosedForm);
        assert_eq!(t.rows[1].method, Method::MonteCarlo);

        let same = vec![pulse_spec("a", 1.0, 2, 10), pulse_spec("b", 1.0, 2, 10)];
        let mut cfg = config(same, 24);
        cfg.decimation = vec![1, 3];
        cfg.mc.samples = 20_000;
        let t = run_rate_sweep(&experiment(cfg)).unwrap();
        assert_eq!(t.rows[0].probability, 0.5);
        assert!((t.rows[1].probability - 0.5).abs() <= 4.0 * 0.5 / (20_000f64).sqrt());

        let mut cfg = config(vec![pulse_spec("a", 1.0, 0, 2), pulse_spec("b", 2.0, 0, 2)], 4);
        cfg.decimation = vec![8];
        assert!(matches!(run_rate_sweep(&experiment(cfg)), Err(Error::TooShort { .. })));
    }

    #[test]
    fn nway_sweep_chance_limit_and_collinear_case() {
        let scen = vec![pulse_spec("a", 0.0, 0, 1), pulse_spec("b", 1.0, 0, 1), pulse_spec("c", 2.0, 0, 1)];
        let mut cfg = config(scen, 1);
        cfg.sigma2 = vec![1.0, 1e12];
        cfg.mc.samples = 100_000;
        let t = run_nway_sweep(&experiment(cfg)).unwrap();
        assert_eq!(t.rows.len(), 8);
        let overall: Vec<_> = t.rows.iter().filter(|r| r.series.as_deref() == Some("overall")).collect();
        let truth = (4.0 * normal_cdf(0.5) - 1.0) / 3.0;
        assert!((overall[0].probability - truth).abs() <= 4.0 * overall[0].std_error);
        assert!((overall[1].probability - 1.0 / 3.0).abs() <= 4.0 * overall[1].std_error);
        assert!(t.to_csv().starts_with("x,probability,std_error,ci_low,ci_high,method,series\n"));
    }

    #[test]
    fn magnitude_sweep_examples() {
        let mut cfg = config(vec![devices::nothing()], 3);
        cfg.system_matrix = Some(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        cfg.magnitudes = vec![2.0, 0.0, 1.0];
        let t = run_magnitude_sweep(&experiment(cfg)).unwrap();
        let p: Vec<f64> = t.rows.iter().map(|r| r.probability).collect();
        assert_eq!(p[0], 0.75);
        assert!((p[1] - 0.845_731_230_637_006_5).abs() < 1e-15);
        assert!(p[0] < p[1] && p[1] < p[2]);
        assert!(t.rows.iter().all(|r| r.method == Method::ClosedForm && r.std_error == 0.0));
    }

    #[test]
    fn default_system_matrix_uses_scenario_columns() {
        let cfg = config(vec![pulse_spec("a", 3.0, 0, 1), pulse_spec("b", 4.0, 1, 1)], 2);
        let exp = experiment(cfg);
        let a = system_matrix(&exp).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]));
    }

    #[test]
    fn covariance_scales_with_sigma2() {
        let mut cfg = config(vec![pulse_spec("a", 1.0, 0, 1), pulse_spec("b", 2.0, 0, 2)], 2);
        cfg.covariance = Some(vec![vec![2.0, 0.5], vec![0.5, 1.0]]);
        let exp = experiment(cfg.clone());
        match exp.noise(3.0).unwrap() {
            NoiseModel::Full(f) => assert_eq!(f.covariance()[(0, 1)], 1.5),
            other => panic!("{other:?}"),
        }
        assert!(run_rate_sweep(&exp).is_err());
        cfg.covariance = Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            Experiment::from_config(cfg, Path::new(".")),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn config_validation() {
        let base = config(vec![devices::nothing(), pulse_spec("p", 1.0, 0, 1)], 2);
        let mut c = base.clone();
        c.sigma2 = vec![];
        assert!(Experiment::from_config(c, Path::new(".")).is_err());
        let mut c = base.clone();
        c.sigma2 = vec![-1.0];
        assert!(Experiment::from_config(c, Path::new(".")).is_err());
        let mut c = base.clone();
        c.prior = Some(vec![1.0]);
        assert!(Experiment::from_config(c, Path::new(".")).is_err());
        let mut c = base.clone();
        c.len = None;
        assert!(Experiment::from_config(c, Path::new(".")).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let parsed = ExperimentConfig::from_json(
            r#"{"T": 2, "sample_rate_hz": 12, "scenarios": [{"name": "x"}], "mc": {"samples": 5, "seed": 1}}"#,
        )
        .unwrap();
        assert_eq!(parsed.mc.confidence_level, 0.95);
        assert_eq!(parsed.decimation, default_decimation());
    }

    #[test]
    fn output_rendering() {
        let table = SweepTable {
            metadata: SweepMetadata {
                sweep: "t".into(),
                seed: 1,
                samples: 0,
                config_hash: "abc".into(),
            },
            rows: vec![SweepRow::exact(0.5, 0.75)],
        };
        assert_eq!(
            table.to_csv(),
            "x,probability,std_error,ci_low,ci_high,method\n0.5,0.75,0,0.75,0.75,closed-form\n"
        );
        let json: serde_json::Value = serde_json::from_str(&table.to_json()).unwrap();
        assert_eq!(json["metadata"]["config_hash"], "abc");
        assert_eq!(json["rows"][0]["method"], "closed-form");
        assert_eq!(json["rows"][0]["probability"], 0.75);
        assert!(json["rows"][0].get("series").is_none());
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }

    #[test]
    fn builtin_configs_resolve() {
        for cfg in [
            ExperimentConfig::toaster_vs_kettle(),
            ExperimentConfig::toaster_vs_nothing(),
            ExperimentConfig::six_devices(),
        ] {
            let exp = experiment(cfg);
            assert!(exp.means.iter().all(|m| m.len() == 1200));
            assert_eq!(exp.config_hash().len(), 64);
        }
    }
}
