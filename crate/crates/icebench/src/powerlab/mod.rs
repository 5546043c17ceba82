//! Shunt-current power analysis: oscilloscope CSV loading, current and
//! power conversion, quantization and amplifier-validation reports, spike
//! detection with stimulus correlation, additive model fitting, ring
//! frequency estimation, and a synthetic trace generator that serves as
//! the test oracle for the whole pipeline.

mod amp;
mod model;
mod spikes;
mod trace;

pub use amp::{
    quantization_report, validate_amplifier, AmpMeasurement, AmpValidationSetup,
    AmplifierConfig, QuantizationReport, ValidationRow,
};
pub use model::{
    estimate_ring_frequency, fit_additive_model, synthesize_trace, AdditiveFit, SpikeModel,
    SynthesisConfig,
};
pub use spikes::{
    correlate_spikes, detect_spikes, inputs_high, inputs_toggled, CorrelationReport, SpikeEvent,
};
pub use trace::{
    instantaneous_power, load_scope_csv, trace_to_scope_csv, Calibration, PowerTrace,
    TraceChannel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: row has {got} fields, header has {expected}")]
    RaggedRow { line: usize, expected: usize, got: usize },
    #[error("line {line}: sample spacing deviates more than 1% from the capture period")]
    NonUniformSampling { line: usize },
    #[error("capture has {got} samples; need at least 2 to infer the period")]
    TooFewSamples { got: usize },
    #[error("capture has no {role} channel")]
    MissingChannel { role: &'static str },
    #[error("capture declares more than one {role} channel")]
    DuplicateChannel { role: String },
    #[error("trigger channel never rises through half its range")]
    NoTriggerEdge,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("power computation needs the nominal core voltage")]
    MissingVcore,
    #[error("no samples before the trigger to form a baseline")]
    EmptyBaselineWindow,
    #[error("window fraction must be in (0, 0.5], got {0}")]
    InvalidWindowFraction(f64),
    #[error("search window for step {index} extends beyond the trace")]
    WindowBeyondTrace { index: usize },
    #[error("search window for step {index} holds {samples} samples; need at least 4")]
    WindowTooNarrow { index: usize, samples: usize },
    #[error("correlation needs at least 3 events, got {got}")]
    TooFewEvents { got: usize },
    #[error("{what} has no variance; correlation is undefined")]
    DegenerateVariance { what: &'static str },
    #[error("ring with {0} inverters has no odd feedback and cannot oscillate")]
    EvenInverterCount(u32),
    #[error("{what} must be positive")]
    NonPositive { what: &'static str },
    #[error("schedule is unusable here: {0}")]
    BadSchedule(String),
}

/// Which measurement rail a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    Core,
    Io,
    Trigger,
}

impl ChannelRole {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "core" => Some(ChannelRole::Core),
            "io" => Some(ChannelRole::Io),
            "trigger" => Some(ChannelRole::Trigger),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelRole::Core => "core",
            ChannelRole::Io => "io",
            ChannelRole::Trigger => "trigger",
        }
    }
}

/// How the shunt's differential voltage reaches the scope input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Current-sense amplifier with the given gain; used for the core
    /// rail where currents are small.
    Amplified { gain: f64 },
    /// Unity-gain subtraction circuit; used for the IO rails, whose
    /// larger currents would clip an amplifier.
    SubtractionUnity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuntConfig {
    pub resistance_ohm: f64,
    pub channel_role: ChannelRole,
    pub conditioning: Conditioning,
}

impl ShuntConfig {
    pub fn new(
        resistance_ohm: f64,
        channel_role: ChannelRole,
        conditioning: Conditioning,
    ) -> Result<Self, PowerError> {
        if !(resistance_ohm > 0.0) {
            return Err(PowerError::NonPositive { what: "shunt resistance" });
        }
        if channel_role == ChannelRole::Trigger {
            return Err(PowerError::InvalidConfig(
                "trigger channels carry no shunt".into(),
            ));
        }
        if let Conditioning::Amplified { gain } = conditioning {
            if !(gain > 0.0) {
                return Err(PowerError::NonPositive { what: "amplifier gain" });
            }
        }
        Ok(Self { resistance_ohm, channel_role, conditioning })
    }

    /// Scope voltage to shunt current for this conditioning mode.
    pub fn volts_to_amps(&self, volts: f64) -> f64 {
        match self.conditioning {
            Conditioning::Amplified { gain } => volts / (gain * self.resistance_ohm),
            Conditioning::SubtractionUnity => volts / self.resistance_ohm,
        }
    }

    /// Inverse of [`volts_to_amps`](Self::volts_to_amps).
    pub fn amps_to_volts(&self, amps: f64) -> f64 {
        match self.conditioning {
            Conditioning::Amplified { gain } => amps * gain * self.resistance_ohm,
            Conditioning::SubtractionUnity => amps * self.resistance_ohm,
        }
    }
}

/// Free-function form of the conversion, for series.
pub fn channel_to_current(volts: &[f64], cfg: &ShuntConfig) -> Vec<f64> {
    volts.iter().map(|&v| cfg.volts_to_amps(v)).collect()
}

/// Simple linear regression with Pearson correlation; shared by the spike
/// correlator and the additive model fit.
pub(crate) fn linear_stats(
    x: &[f64],
    y: &[f64],
    x_label: &'static str,
    y_label: &'static str,
) -> Result<(f64, f64, f64), PowerError> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(PowerError::DegenerateVariance { what: x_label });
    }
    if syy == 0.0 {
        return Err(PowerError::DegenerateVariance { what: y_label });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok((slope, intercept, r))
}
