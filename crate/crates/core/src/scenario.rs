//! Scenario definitions and their deterministic aggregate means.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::DiscretePrior;
use crate::error::{Error, Result};
use crate::signal::{load_signal_csv, DeviceSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub amplitude: f64,
    pub onset: usize,
    pub duration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalSource {
    File(String),
    Pulse(PulseParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub source: SignalSource,
    #[serde(default)]
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "one")]
    pub prior: f64,
    #[serde(default)]
    pub components: Vec<Component>,
}

fn one() -> f64 {
    1.0
}

/// The noiseless aggregate output of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMean {
    pub label: String,
    pub mean: Vec<f64>,
}

impl ScenarioMean {
    pub fn new(label: impl Into<String>, mean: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            mean,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

impl From<Vec<f64>> for ScenarioMean {
    fn from(mean: Vec<f64>) -> Self {
        Self::new("", mean)
    }
}

/// Scenario file: a set of scenarios sharing a length and sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    #[serde(rename = "T")]
    pub len: usize,
    pub sample_rate_hz: f64,
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioDocument {
    Set(ScenarioSet),
    Single {
        #[serde(rename = "T")]
        len: usize,
        sample_rate_hz: f64,
        #[serde(flatten)]
        spec: ScenarioSpec,
    },
}

impl ScenarioSet {
    /// Parses either a `{T, sample_rate_hz, scenarios: [...]}` document or a
    /// single scenario with top-level `T` and `sample_rate_hz`.
    pub fn from_json(text: &str) -> Result<Self> {
        let set = match serde_json::from_str::<ScenarioDocument>(text) {
            Ok(ScenarioDocument::Set(set)) => set,
            Ok(ScenarioDocument::Single {
                len,
                sample_rate_hz,
                spec,
            }) => ScenarioSet {
                len,
                sample_rate_hz,
                scenarios: vec![spec],
            },
            // Re-parse as a set for a precise error message.
            Err(_) => serde_json::from_str::<ScenarioSet>(text)?,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::Config("scenario length T must be positive".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        for s in &self.scenarios {
            if !(s.prior.is_finite() && s.prior >= 0.0) {
                return Err(Error::InvalidPrior(format!(
                    "scenario `{}` has prior {}",
                    s.name, s.prior
                )));
            }
        }
        Ok(())
    }

    /// Prior weights normalized to sum to one.
    pub fn prior(&self) -> Result<DiscretePrior> {
        DiscretePrior::normalized(self.scenarios.iter().map(|s| s.prior).collect())
    }

    /// Composes every scenario mean, loading file sources relative to
    /// `base_dir`.
    pub fn compose(&self, base_dir: &Path) -> Result<Vec<ScenarioMean>> {
        let library = SignalLibrary::load_for(&self.scenarios, base_dir, self.sample_rate_hz)?;
        self.scenarios
            .iter()
            .map(|s| compose_scenario_mean(s, &library, self.len))
            .collect()
    }
}

/// Loaded file-backed signals, keyed by the path string used in the scenario.
#[derive(Debug, Clone, Default)]
pub struct SignalLibrary {
    signals: HashMap<String, DeviceSignal>,
}

impl SignalLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, signal: DeviceSignal) {
        self.signals.insert(key.into(), signal);
    }

    pub fn get(&self, key: &str) -> Option<&DeviceSignal> {
        self.signals.get(key)
    }

    pub fn load_for(specs: &[ScenarioSpec], base_dir: &Path, rate_hz: f64) -> Result<Self> {
        let mut lib = Self::new();
        for spec in specs {
            for c in &spec.components {
                if let SignalSource::File(name) = &c.source {
                    if lib.signals.contains_key(name) {
                        continue;
                    }
                    let path: PathBuf = base_dir.join(name);
                    lib.insert(name.clone(), load_signal_csv(path, rate_hz)?);
                }
            }
        }
        Ok(lib)
    }
}

/// Sums the shifted, zero-padded component signals into a length-`len` mean.
/// Components extending past `len` are an error rather than clipped.
pub fn compose_scenario_mean(
    spec: &ScenarioSpec,
    library: &SignalLibrary,
    len: usize,
) -> Result<ScenarioMean> {
    let mut mean = vec![0.0; len];
    for c in &spec.components {
        match &c.source {
            SignalSource::Pulse(p) => {
                let start = c.shift + p.onset;
                let end = start + p.duration;
                if end > len {
                    return Err(Error::LengthMismatch {
                        component_len: p.onset + p.duration,
                        shift: c.shift,
                        len,
                    });
                }
                if !p.amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "pulse amplitude {} is not finite",
                        p.amplitude
                    )));
                }
                mean[start..end].iter_mut().for_each(|m| *m += p.amplitude);
            }
            SignalSource::File(name) => {
                let signal = library
                    .get(name)
                    .ok_or_else(|| Error::UnknownSource(name.clone()))?;
                if c.shift + signal.len() > len {
                    return Err(Error::LengthMismatch {
                        component_len: signal.len(),
                        shift: c.shift,
                        len,
                    });
                }
                mean[c.shift..c.shift + signal.len()]
                    .iter_mut()
                    .zip(signal.samples())
                    .for_each(|(m, v)| *m += v);
            }
        }
    }
    Ok(ScenarioMean::new(spec.name.clone(), mean))
}
