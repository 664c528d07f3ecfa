//! Device power signatures: CSV ingestion, synthetic pulses, decimation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A finite, nonempty time series of RMS current samples (amperes).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl DeviceSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("non-finite sample {}", samples[i]),
            });
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Downsampling by point decimation: keep every `factor`-th sample starting
/// at `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    factor: usize,
    phase: usize,
}

impl SamplingPlan {
    pub fn new(factor: usize, phase: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidPlan("decimation factor must be >= 1".into()));
        }
        if phase >= factor {
            return Err(Error::PhaseOutOfRange { phase, factor });
        }
        Ok(Self { factor, phase })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn phase(&self) -> usize {
        self.phase
    }
}

/// Reads a two-column `index_or_time,value` CSV. A single leading header
/// line is skipped when its first field is not numeric.
pub fn load_signal_csv(path: impl AsRef<Path>, rate_hz: f64) -> Result<DeviceSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_signal_csv(file, rate_hz)
}

/// Same as [`load_signal_csv`] for any reader.
pub fn read_signal_csv<R: std::io::Read>(reader: R, rate_hz: f64) -> Result<DeviceSignal> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut samples = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let time_field = record.get(0).unwrap_or("");
        let time: f64 = match time_field.parse() {
            Ok(t) => t,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("bad time field `{time_field}`"),
                })
            }
        };
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("time must be finite and nonnegative, got {time}"),
            });
        }
        if time < last_time {
            return Err(Error::NonMonotoneTime { line });
        }
        last_time = time;

        let value_field = &record[1];
        let value: f64 = value_field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value `{value_field}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value `{value_field}`"),
            });
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    DeviceSignal::new(samples, rate_hz)
}

/// Writes `index,value` rows with shortest round-trip float formatting, so
/// [`load_signal_csv`] reproduces the samples bit for bit.
pub fn write_signal_csv(signal: &DeviceSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "index,value").map_err(io_err)?;
    for (i, v) in signal.samples().iter().enumerate() {
        writeln!(out, "{i},{v:?}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Rectangular pulse: `amplitude` on `[onset, onset + duration)`, zero
/// elsewhere, `len` samples in total.
pub fn synth_pulse(
    amplitude: f64,
    onset: usize,
    duration: usize,
    len: usize,
    sample_rate_hz: f64,
) -> Result<DeviceSignal> {
    let end = onset
        .checked_add(duration)
        .filter(|&end| end <= len)
        .ok_or(Error::OutOfRange {
            onset,
            duration,
            len,
        })?;
    if !amplitude.is_finite() {
        return Err(Error::Config(format!("pulse amplitude {amplitude} is not finite")));
    }
    let mut samples = vec![0.0; len];
    samples[onset..end].fill(amplitude);
    DeviceSignal::new(samples, sample_rate_hz)
}

/// Truncates to a multiple of the factor, then keeps samples
/// `phase, phase + K, ...`. Every phase of the same plan factor yields the
/// same output length `floor(T / K)`.
pub fn decimate(signal: &DeviceSignal, plan: SamplingPlan) -> Result<DeviceSignal> {
    let k = plan.factor();
    let len = signal.len();
    if len < k {
        return Err(Error::TooShort { len, factor: k });
    }
    let out_len = len / k;
    let samples = signal.samples()[..out_len * k]
        .iter()
        .skip(plan.phase())
        .step_by(k)
        .copied()
        .collect();
    DeviceSignal::new(samples, signal.sample_rate_hz() / k as f64)
}

/// All `K` decimation phases of a signal, in phase order.
pub fn phase_variants(signal: &DeviceSignal, factor: usize) -> Result<Vec<DeviceSignal>> {
    if factor == 0 {
        return Err(Error::InvalidPlan("decimation factor must be >= 1".into()));
    }
    (0..factor)
        .map(|phase| decimate(signal, SamplingPlan::new(factor, phase)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(v: &[f64]) -> DeviceSignal {
        DeviceSignal::new(v.to_vec(), 12.0).unwrap()
    }

    #[test]
    fn csv_rows_parse_in_order() {
        let s = read_signal_csv("0,1.5\n1,2.0\n2,0.5\n".as_bytes(), 12.0).unwrap();
        assert_eq!(s.samples(), &[1.5, 2.0, 0.5]);
        assert_eq!(s.sample_rate_hz(), 12.0);
    }

    #[test]
    fn csv_zero_signal() {
        let s = read_signal_csv("0,0.0\n1,0.0\n".as_bytes(), 12.0).unwrap();
        assert_eq!(s.samples(), &[0.0, 0.0]);
    }

    #[test]
    fn csv_header_is_skipped() {
        let s = read_signal_csv("t,current\n0,1\n0.5,2\n".as_bytes(), 2.0).unwrap();
        assert_eq!(s.samples(), &[1.0, 2.0]);
    }

    #[test]
    fn csv_header_only_is_empty() {
        let err = read_signal_csv("t,value\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::EmptySignal));
        let err = read_signal_csv("".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::EmptySignal));
    }

    #[test]
    fn csv_errors() {
        let err = read_signal_csv("0,1\n1,abc\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = read_signal_csv("0,1\n1,NaN\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_signal_csv("0,1\n1,inf\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_signal_csv("0,1\n2,1\n1,1\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTime { line: 3 }));
        let err = read_signal_csv("0,1,2\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_signal_csv("0,1\nx,2\n".as_bytes(), 12.0).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn csv_equal_times_are_allowed() {
        let s = read_signal_csv("0,1\n0,2\n".as_bytes(), 12.0).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn pulse_shapes() {
        assert_eq!(synth_pulse(2.0, 1, 2, 5, 12.0).unwrap().samples(), &[0.0, 2.0, 2.0, 0.0, 0.0]);
        assert_eq!(synth_pulse(0.0, 1, 2, 5, 12.0).unwrap().samples(), &[0.0; 5]);
        assert!(matches!(
            synth_pulse(1.0, 4, 3, 5, 12.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(synth_pulse(1.0, 0, 0, 0, 12.0), Err(Error::EmptySignal)));
    }

    #[test]
    fn decimation_examples() {
        let s = sig(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let even = decimate(&s, SamplingPlan::new(2, 0).unwrap()).unwrap();
        let odd = decimate(&s, SamplingPlan::new(2, 1).unwrap()).unwrap();
        assert_eq!(even.samples(), &[0.0, 2.0, 4.0]);
        assert_eq!(odd.samples(), &[1.0, 3.0, 5.0]);
        assert_eq!(even.sample_rate_hz(), 6.0);
        let same = decimate(&s, SamplingPlan::new(1, 0).unwrap()).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn decimation_errors() {
        assert!(matches!(
            SamplingPlan::new(2, 2),
            Err(Error::PhaseOutOfRange { phase: 2, factor: 2 })
        ));
        assert!(matches!(SamplingPlan::new(0, 0), Err(Error::InvalidPlan(_))));
        let s = sig(&[1.0, 2.0]);
        assert!(matches!(
            decimate(&s, SamplingPlan::new(3, 0).unwrap()),
            Err(Error::TooShort { len: 2, factor: 3 })
        ));
        assert!(matches!(phase_variants(&s, 3), Err(Error::TooShort { .. })));
    }

    #[test]
    fn phase_variant_lengths() {
        let s = sig(&(0..12).map(f64::from).collect::<Vec<_>>());
        let v = phase_variants(&s, 3).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|x| x.len() == 4));

        assert_eq!(phase_variants(&s, 1).unwrap(), vec![s]);

        // length 5, K = 2: truncated to 4 samples before decimating
        let s = sig(&[10.0, 11.0, 12.0, 13.0, 14.0]);
        let v = phase_variants(&s, 2).unwrap();
        assert_eq!(v[0].samples(), &[10.0, 12.0]);
        assert_eq!(v[1].samples(), &[11.0, 13.0]);
    }

    #[test]
    fn csv_round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = sig(&[0.1, 1e-300, -3.25, 1.0 / 3.0, 6.02e23]);
        write_signal_csv(&s, &path).unwrap();
        assert_eq!(load_signal_csv(&path, 12.0).unwrap(), s);
        assert!(matches!(
            load_signal_csv(dir.path().join("missing.csv"), 12.0),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn decimation_matches_index_enumeration(
            values in prop::collection::vec(-100.0f64..100.0, 1..=64),
            factor in 1usize..=8,
            phase_seed in 0usize..8,
        ) {
            prop_assume!(values.len() >= factor);
            let phase = phase_seed % factor;
            let s = sig(&values);
            let out = decimate(&s, SamplingPlan::new(factor, phase).unwrap()).unwrap();
            let len = values.len() / factor;
            prop_assert_eq!(out.len(), len);
            for j in 0..len {
                prop_assert_eq!(out.samples()[j], values[phase + j * factor]);
            }
            let variants = phase_variants(&s, factor).unwrap();
            prop_assert_eq!(variants.len(), factor);
            prop_assert!(variants.iter().all(|v| v.len() == len));
        }

        #[test]
        fn csv_round_trip_is_exact(values in prop::collection::vec(prop::num::f64::NORMAL, 1..50)) {
            let s = sig(&values);
            let mut buf = Vec::new();
            writeln!(buf, "index,value").unwrap();
            for (i, v) in values.iter().enumerate() {
                writeln!(buf, "{i},{v:?}").unwrap();
            }
            let back = read_signal_csv(buf.as_slice(), 12.0).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
