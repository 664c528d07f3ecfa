//! `nilm-limits`: success-probability bounds and sweeps from the command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nilm_limits::experiment::log_grid;
use nilm_limits::{
    run_eval_estimator, run_magnitude_sweep, run_noise_sweep, run_np_threshold, run_nway,
    run_nway_sweep, run_pairwise, run_rate_sweep, BaselineRule, Experiment, ExperimentConfig,
    OutputFormat, SweepTable,
};

#[derive(Parser, Debug)]
#[command(name = "nilm-limits", version, about = "Upper bounds on how well any load-disaggregation algorithm can tell scenarios apart")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form MAP success for two scenarios.
    Pairwise(Common),
    /// Monte-Carlo MAP success for N scenarios, overall and per scenario.
    Nway(Common),
    /// Two-scenario success across the noise-variance grid.
    NoiseSweep(Common),
    /// Two-scenario success across decimation factors with unknown phase.
    RateSweep(Common),
    /// N-way success across the noise-variance grid.
    NwaySweep(Common),
    /// Linear-system bound across input magnitudes.
    MagnitudeSweep(Common),
    /// Neyman-Pearson threshold for a target miss probability.
    NpThreshold {
        #[command(flatten)]
        common: Common,
        /// Target miss probability, in (0, 1).
        #[arg(long)]
        beta: f64,
    },
    /// Scores baseline estimators against the MAP rule.
    EvalEstimator {
        #[command(flatten)]
        common: Common,
        /// Rules to score (nearest-mean, constant-<i>, coin-flip, energy); all by default.
        #[arg(long, value_delimiter = ',')]
        rule: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    ToasterKettle,
    ToasterNothing,
    SixDevices,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; relative paths inside resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in stand-in scenarios, used when no config is given.
    #[arg(long, value_enum, default_value = "toaster-kettle", conflicts_with = "config")]
    preset: Preset,
    /// Noise variance: a value, a comma list, or `logspace:LO:HI:N`.
    #[arg(long)]
    sigma2: Option<String>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated prior weights, normalized.
    #[arg(long, value_delimiter = ',')]
    prior: Option<Vec<f64>>,
}

/// Failures the exit code distinguishes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numerical = e
            .chain()
            .any(|c| c.downcast_ref::<nilm_limits::Error>().is_some_and(|e| e.is_numerical()));
        if numerical {
            Failure::Numerical(e)
        } else {
            Failure::Config(e)
        }
    }
}

fn parse_sigma2(text: &str) -> anyhow::Result<Vec<f64>> {
    if let Some(spec) = text.strip_prefix("logspace:") {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            bail!("expected logspace:LO:HI:N, got `{text}`");
        };
        let lo: f64 = lo.parse().with_context(|| format!("bad LO in `{text}`"))?;
        let hi: f64 = hi.parse().with_context(|| format!("bad HI in `{text}`"))?;
        let n: usize = n.parse().with_context(|| format!("bad N in `{text}`"))?;
        if !(lo > 0.0 && hi > 0.0) || n == 0 {
            bail!("logspace bounds must be positive and N >= 1");
        }
        return Ok(log_grid(lo, hi, n));
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad sigma2 value `{v}`")))
        .collect()
}

fn load_config(common: &Common) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let (mut config, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let config = ExperimentConfig::from_json(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (config, base)
        }
        None => {
            let config = match common.preset {
                Preset::ToasterKettle => ExperimentConfig::toaster_vs_kettle(),
                Preset::ToasterNothing => ExperimentConfig::toaster_vs_nothing(),
                Preset::SixDevices => ExperimentConfig::six_devices(),
            };
            (config, PathBuf::from("."))
        }
    };
    if let Some(text) = &common.sigma2 {
        let grid = parse_sigma2(text)?;
        // A single value also fixes the variance of single-point commands.
        if let [v] = grid.as_slice() {
            config.fixed_sigma2 = *v;
        }
        config.sigma2 = grid;
    }
    if let Some(n) = common.samples {
        config.mc.samples = n;
    }
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    if let Some(prior) = &common.prior {
        config.prior = Some(prior.clone());
    }
    Ok((config, base))
}

fn output_format(common: &Common, config: &ExperimentConfig) -> OutputFormat {
    match common.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => config.output.as_ref().map_or(OutputFormat::Csv, |o| o.format),
    }
}

fn output_path(common: &Common, config: &ExperimentConfig, base: &Path) -> Option<PathBuf> {
    common.out.clone().or_else(|| {
        config
            .output
            .as_ref()
            .and_then(|o| o.path.as_ref())
            .map(|p| base.join(p))
    })
}

fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn np_text(exp: &Experiment, beta: f64, format: OutputFormat) -> anyhow::Result<String> {
    let rule = run_np_threshold(exp, beta)?;
    Ok(match format {
        OutputFormat::Json => {
            let value = serde_json::json!({
                "metadata": {
                    "command": "np-threshold",
                    "beta": beta,
                    "config_hash": exp.config_hash(),
                },
                "rule": rule,
            });
            let mut s = serde_json::to_string_pretty(&value)?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::from("field,value\n");
            for (k, v) in [
                ("log_lambda", rule.log_lambda),
                ("lambda", rule.lambda),
                ("threshold", rule.threshold),
                ("miss_probability", rule.miss_probability),
                ("false_alarm_probability", rule.false_alarm_probability),
            ] {
                s.push_str(&format!("{k},{v}\n"));
            }
            if let Some(b) = rule.scalar_boundary() {
                s.push_str(&format!("boundary,{b}\n"));
            }
            s
        }
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Pairwise(c)
        | Command::Nway(c)
        | Command::NoiseSweep(c)
        | Command::RateSweep(c)
        | Command::NwaySweep(c)
        | Command::MagnitudeSweep(c) => c,
        Command::NpThreshold { common, .. } | Command::EvalEstimator { common, .. } => common,
    };
    let (config, base) = load_config(common)?;
    let format = output_format(common, &config);
    let out = output_path(common, &config, &base);
    let exp = Experiment::from_config(config, &base)
        .map_err(anyhow::Error::from)
        .context("resolving experiment")?;

    let table = |r: nilm_limits::Result<SweepTable>| -> Result<String, Failure> {
        Ok(r.map_err(anyhow::Error::from)?.render(format))
    };
    let text = match &cli.command {
        Command::Pairwise(_) => table(run_pairwise(&exp))?,
        Command::Nway(_) => table(run_nway(&exp))?,
        Command::NoiseSweep(_) => table(run_noise_sweep(&exp))?,
        Command::RateSweep(_) => table(run_rate_sweep(&exp))?,
        Command::NwaySweep(_) => table(run_nway_sweep(&exp))?,
        Command::MagnitudeSweep(_) => table(run_magnitude_sweep(&exp))?,
        Command::NpThreshold { beta, .. } => np_text(&exp, *beta, format)?,
        Command::EvalEstimator { rule, .. } => {
            let rules = if rule.is_empty() {
                BaselineRule::ALL.to_vec()
            } else {
                rule.iter()
                    .map(|r| r.parse::<BaselineRule>())
                    .collect::<nilm_limits::Result<Vec<_>>>()
                    .map_err(anyhow::Error::from)?
            };
            table(run_eval_estimator(&exp, &rules))?
        }
    };
    emit(&text, out.as_deref())?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical error: {e:#}");
            ExitCode::from(3)
        }
    }
}
