//! Rectangular-pulse stand-ins for household appliance signatures.
//!
//! Amplitudes (RMS amperes) and on-durations are plausible desk-scale shapes,
//! not measurements; every field is overridable through scenario files.

use crate::scenario::{Component, PulseParams, ScenarioSpec, SignalSource};

/// Default sampling rate of the stand-in traces.
pub const DEFAULT_RATE_HZ: f64 = 12.0;
/// Default trace length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 100.0;
/// Default switch-on time in seconds.
pub const DEFAULT_ONSET_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceStandin {
    pub name: &'static str,
    pub amplitude: f64,
    pub duration_s: f64,
}

pub const TOASTER: DeviceStandin = DeviceStandin {
    name: "toaster",
    amplitude: 6.0,
    duration_s: 60.0,
};

pub const KETTLE: DeviceStandin = DeviceStandin {
    name: "kettle",
    amplitude: 10.0,
    duration_s: 90.0,
};

pub const MICROWAVE: DeviceStandin = DeviceStandin {
    name: "microwave",
    amplitude: 7.5,
    duration_s: 60.0,
};

pub const LCD_MONITOR: DeviceStandin = DeviceStandin {
    name: "lcd-monitor",
    amplitude: 0.3,
    duration_s: 60.0,
};

pub const PROJECTOR: DeviceStandin = DeviceStandin {
    name: "projector",
    amplitude: 1.2,
    duration_s: 60.0,
};

pub const OSCILLOSCOPE: DeviceStandin = DeviceStandin {
    name: "oscilloscope",
    amplitude: 0.4,
    duration_s: 60.0,
};

pub const SIX_DEVICES: [DeviceStandin; 6] =
    [MICROWAVE, TOASTER, KETTLE, LCD_MONITOR, PROJECTOR, OSCILLOSCOPE];

/// Number of samples covering `seconds` at `rate_hz`, rounded to nearest.
pub fn samples_for(seconds: f64, rate_hz: f64) -> usize {
    (seconds * rate_hz).round() as usize
}

impl DeviceStandin {
    /// Pulse parameters for a switch-on at `onset_s`.
    pub fn pulse(&self, onset_s: f64, rate_hz: f64) -> PulseParams {
        PulseParams {
            amplitude: self.amplitude,
            onset: samples_for(onset_s, rate_hz),
            duration: samples_for(self.duration_s, rate_hz),
        }
    }

    /// Single-component scenario with unit prior weight.
    pub fn scenario(&self, onset_s: f64, rate_hz: f64) -> ScenarioSpec {
        ScenarioSpec {
            name: self.name.into(),
            prior: 1.0,
            components: vec![Component {
                source: SignalSource::Pulse(self.pulse(onset_s, rate_hz)),
                shift: 0,
            }],
        }
    }
}

/// The "nothing switched on" scenario.
pub fn nothing() -> ScenarioSpec {
    ScenarioSpec {
        name: "nothing".into(),
        prior: 1.0,
        components: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{compose_scenario_mean, SignalLibrary};

    #[test]
    fn standins_fit_default_window() {
        let len = samples_for(DEFAULT_WINDOW_S, DEFAULT_RATE_HZ);
        assert_eq!(len, 1200);
        for d in SIX_DEVICES {
            let m = compose_scenario_mean(
                &d.scenario(DEFAULT_ONSET_S, DEFAULT_RATE_HZ),
                &SignalLibrary::new(),
                len,
            )
            .unwrap();
            let on = m.mean.iter().filter(|v| **v != 0.0).count();
            assert_eq!(on, samples_for(d.duration_s, DEFAULT_RATE_HZ));
            assert_eq!(m.mean[60], d.amplitude);
            assert_eq!(m.mean[59], 0.0);
        }
    }
}
