//! Request-rate traces: synthetic generation, CSV loading and serialization.
//!
//! A trace is piecewise constant. Each sample holds its rate from its own
//! timestamp until the next sample (or the end of the trace).

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// Seconds from the start of the trace.
    pub time: u64,
    /// Requests per second.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    samples: Vec<TraceSample>,
    duration: u64,
}

impl RequestTrace {
    /// Builds a trace, enforcing the ordering and sign invariants.
    pub fn new(samples: Vec<TraceSample>, duration: u64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("samples", "trace has no samples"))?;
        if first.time != 0 {
            return Err(Error::invalid(
                "samples",
                format!("first sample must be at time 0, found {}", first.time),
            ));
        }
        for pair in samples.windows(2) {
            if pair[1].time <= pair[0].time {
                return Err(Error::invalid(
                    "samples",
                    format!(
                        "timestamps not strictly increasing ({} then {})",
                        pair[0].time, pair[1].time
                    ),
                ));
            }
        }
        if let Some(bad) = samples.iter().find(|s| !s.rate.is_finite() || s.rate < 0.0) {
            return Err(Error::invalid(
                "rate",
                format!("rate {} at time {} is negative or non-finite", bad.rate, bad.time),
            ));
        }
        let last = samples[samples.len() - 1].time;
        if duration < last {
            return Err(Error::invalid(
                "duration",
                format!("duration {duration} precedes last sample at {last}"),
            ));
        }
        Ok(Self { samples, duration })
    }

    /// A single-rate trace over `duration` seconds.
    pub fn constant(rate: f64, duration: u64) -> Result<Self> {
        Self::new(vec![TraceSample { time: 0, rate }], duration)
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    /// Horizon in seconds.
    pub fn duration(&self) -> u64 {
        self.duration
    }

    /// Rate in effect at `time` seconds.
    pub fn rate_at(&self, time: u64) -> f64 {
        let idx = self.samples.partition_point(|s| s.time <= time);
        self.samples[idx.saturating_sub(1)].rate
    }

    /// Maximum rate in effect anywhere in `[start, end)` seconds.
    pub fn max_rate_in(&self, start: u64, end: u64) -> f64 {
        let end = end.min(self.duration).max(start + 1);
        let first = self.samples.partition_point(|s| s.time <= start).saturating_sub(1);
        self.samples[first..]
            .iter()
            .take_while(|s| s.time < end)
            .map(|s| s.rate)
            .fold(0.0, f64::max)
    }

    /// Same shape with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| TraceSample {
                time: s.time,
                rate: s.rate * factor,
            })
            .collect();
        Self::new(samples, self.duration)
    }

    /// Serializes to the trace CSV format, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,rate_req_per_s\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{}", s.time, s.rate);
        }
        out
    }
}

/// Maximum rate over all samples.
pub fn peak_rate(trace: &RequestTrace) -> f64 {
    trace.samples.iter().map(|s| s.rate).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Constant,
    /// Raised cosine from `base_rate` (at t = 0) up to `peak_rate` at half a period.
    Sinusoid,
    /// Flat `base_rate` with a single Gaussian surge to `peak_rate`, placed by the seed.
    Peaked,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Pattern::Constant),
            "sinusoid" => Ok(Pattern::Sinusoid),
            "peaked" => Ok(Pattern::Peaked),
            other => Err(Error::invalid("pattern", format!("unknown pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub pattern: Pattern,
    pub peak_rate: f64,
    pub base_rate: f64,
    /// Seconds.
    pub duration: u64,
    /// Seconds; sinusoid only. Also sets the surge width of the peaked pattern.
    pub period: f64,
    pub seed: u64,
}

impl TraceSpec {
    pub fn constant(rate: f64, duration: u64) -> Self {
        Self {
            pattern: Pattern::Constant,
            peak_rate: rate,
            base_rate: rate,
            duration,
            period: 0.0,
            seed: 0,
        }
    }

    pub fn sinusoid(base_rate: f64, peak_rate: f64, period: f64, duration: u64) -> Self {
        Self {
            pattern: Pattern::Sinusoid,
            peak_rate,
            base_rate,
            duration,
            period,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.peak_rate.is_finite() || self.peak_rate < 0.0 {
            return Err(Error::invalid("peak_rate", format!("{} must be >= 0", self.peak_rate)));
        }
        if !self.base_rate.is_finite() || self.base_rate < 0.0 {
            return Err(Error::invalid("base_rate", format!("{} must be >= 0", self.base_rate)));
        }
        if self.pattern != Pattern::Constant && self.base_rate > self.peak_rate {
            return Err(Error::invalid(
                "base_rate",
                format!("{} exceeds peak_rate {}", self.base_rate, self.peak_rate),
            ));
        }
        if self.duration == 0 {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if self.pattern == Pattern::Sinusoid && !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::invalid("period", format!("{} must be > 0", self.period)));
        }
        Ok(())
    }
}

/// Generates a 1-second-resolution trace from `spec`.
///
/// For the constant pattern `peak_rate` is the rate; `base_rate` is ignored.
pub fn generate_trace(spec: &TraceSpec) -> Result<RequestTrace> {
    spec.validate()?;
    let amplitude = spec.peak_rate - spec.base_rate;
    let rates: Vec<f64> = match spec.pattern {
        Pattern::Constant => vec![spec.peak_rate; spec.duration as usize],
        Pattern::Sinusoid => (0..spec.duration)
            .map(|t| {
                let phase = 2.0 * PI * t as f64 / spec.period;
                let r = spec.base_rate + amplitude * 0.5 * (1.0 - phase.cos());
                r.clamp(spec.base_rate, spec.peak_rate)
            })
            .collect(),
        Pattern::Peaked => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let quarter = spec.duration / 4;
            let center = quarter + rng.random_range(0..=(spec.duration / 2).max(1) - 1);
            let width = if spec.period > 0.0 {
                spec.period
            } else {
                (spec.duration as f64 / 8.0).max(1.0)
            };
            (0..spec.duration)
                .map(|t| {
                    let z = (t as f64 - center as f64) / width;
                    spec.base_rate + amplitude * (-0.5 * z * z).exp()
                })
                .collect()
        }
    };
    let samples = rates
        .into_iter()
        .enumerate()
        .map(|(t, rate)| TraceSample { time: t as u64, rate })
        .collect();
    RequestTrace::new(samples, spec.duration)
}

/// Parses the trace CSV format.
///
/// The header row is optional. The final sample is taken to cover one second,
/// so the duration is the last timestamp plus one.
pub fn load_trace(source: &str) -> Result<RequestTrace> {
    let mut samples = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (time, rate) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(r), None) => (t.trim(), r.trim()),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 2 comma-separated fields, got {line:?}"),
                })
            }
        };
        if samples.is_empty() && time.parse::<f64>().is_err() && time.starts_with(|c: char| c.is_alphabetic()) {
            continue; // header
        }
        let time: u64 = time.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("time {time:?} is not a non-negative integer"),
        })?;
        let rate: f64 = rate.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("rate {rate:?} is not a number"),
        })?;
        samples.push(TraceSample { time, rate });
    }
    if samples.is_empty() {
        return Err(Error::Empty("trace source"));
    }
    let duration = samples[samples.len() - 1].time + 1;
    RequestTrace::new(samples, duration)
}
