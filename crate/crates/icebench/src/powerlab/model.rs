//! Power models: the additive per-cell fit, the ring-oscillator frequency
//! estimate, and a synthetic trace generator used as the end-to-end oracle
//! for the detection pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PowerError, PowerTrace, TraceChannel};
use crate::stimgen::StimulusSchedule;

/// Least-squares fit of P(n) = p0 + n·p_cell over (cell count, mean power)
/// points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub p0_w: f64,
    pub p_cell_w: f64,
    pub residual_rms: f64,
}

/// Flat power across cell counts is a legitimate outcome (p_cell = 0), so
/// this rejects only a degenerate abscissa, never zero power variance.
pub fn fit_additive_model(points: &[(u32, f64)]) -> Result<AdditiveFit, PowerError> {
    let distinct = {
        let mut counts: Vec<u32> = points.iter().map(|&(n, _)| n).collect();
        counts.sort_unstable();
        counts.dedup();
        counts.len()
    };
    if distinct < 2 {
        return Err(PowerError::DegenerateVariance { what: "cell_count" });
    }
    let len = points.len() as f64;
    let mean_n = points.iter().map(|&(n, _)| n as f64).sum::<f64>() / len;
    let mean_p = points.iter().map(|&(_, p)| p).sum::<f64>() / len;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(n, p) in points {
        let dx = n as f64 - mean_n;
        sxx += dx * dx;
        sxy += dx * (p - mean_p);
    }
    let p_cell_w = sxy / sxx;
    let p0_w = mean_p - p_cell_w * mean_n;
    let residual_sq = points
        .iter()
        .map(|&(n, p)| {
            let r = p - (p0_w + n as f64 * p_cell_w);
            r * r
        })
        .sum::<f64>()
        / len;
    Ok(AdditiveFit { p0_w, p_cell_w, residual_rms: residual_sq.sqrt() })
}

/// Per-chain oscillation frequency of a ring of `inverters_per_chain`
/// inverters closed through one enable AND: every cell in the loop counts
/// as a delay stage, so f = 1 / (2·(inverters+1)·tau_gate). Chains run
/// independently and all oscillate at the same frequency; the count is
/// validated but does not enter the estimate.
pub fn estimate_ring_frequency(
    inverters_per_chain: u32,
    tau_gate_s: f64,
    chains: u32,
) -> Result<f64, PowerError> {
    if inverters_per_chain % 2 == 0 {
        return Err(PowerError::EvenInverterCount(inverters_per_chain));
    }
    if !(tau_gate_s > 0.0) {
        return Err(PowerError::NonPositive { what: "tau_gate_s" });
    }
    if chains == 0 {
        return Err(PowerError::NonPositive { what: "chains" });
    }
    let stages = inverters_per_chain as f64 + 1.0;
    Ok(1.0 / (2.0 * stages * tau_gate_s))
}

/// Maps a stimulus step's predictors to the spike amplitude to inject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpikeModel {
    Constant { amplitude_v: f64 },
    PerInputsHigh { volts_per_input: f64 },
    PerInputsToggled { volts_per_toggle: f64 },
}

impl SpikeModel {
    pub fn amplitude(&self, inputs_high: u32, inputs_toggled: u32) -> f64 {
        match *self {
            SpikeModel::Constant { amplitude_v } => amplitude_v,
            SpikeModel::PerInputsHigh { volts_per_input } => {
                volts_per_input * inputs_high as f64
            }
            SpikeModel::PerInputsToggled { volts_per_toggle } => {
                volts_per_toggle * inputs_toggled as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub sample_period_s: f64,
    /// Flat time before the trigger edge; must cover at least one sample so
    /// the edge is detectable after a CSV round trip.
    pub pre_trigger_s: f64,
    /// Flat time appended after the last scheduled step.
    pub tail_s: f64,
    pub baseline_v: f64,
    pub noise_sigma_v: f64,
    pub spike_width_s: f64,
    pub trigger_high_v: f64,
    pub seed: u64,
}

impl SynthesisConfig {
    pub fn new(sample_period_s: f64, noise_sigma_v: f64) -> Self {
        SynthesisConfig {
            sample_period_s,
            pre_trigger_s: 50.0 * sample_period_s,
            tail_s: 50.0 * sample_period_s,
            baseline_v: 0.1,
            noise_sigma_v,
            spike_width_s: 4.0 * sample_period_s,
            trigger_high_v: 3.3,
            seed: 0,
        }
    }
}

/// Builds a core-channel trace with one rectangular pulse per schedule step
/// over a flat baseline, Gaussian noise on top, and a clean trigger edge.
/// Deterministic for a given seed.
pub fn synthesize_trace(
    schedule: &StimulusSchedule,
    model: &SpikeModel,
    config: &SynthesisConfig,
) -> Result<PowerTrace, PowerError> {
    if !(config.sample_period_s > 0.0) {
        return Err(PowerError::NonPositive { what: "sample_period_s" });
    }
    if !(config.spike_width_s > 0.0) {
        return Err(PowerError::NonPositive { what: "spike_width_s" });
    }
    if !(config.trigger_high_v > 0.0) {
        return Err(PowerError::NonPositive { what: "trigger_high_v" });
    }
    if config.noise_sigma_v < 0.0 || !config.noise_sigma_v.is_finite() {
        return Err(PowerError::InvalidConfig(
            "noise_sigma_v must be finite and non-negative".into(),
        ));
    }
    if config.pre_trigger_s < config.sample_period_s {
        return Err(PowerError::InvalidConfig(
            "pre_trigger_s must cover at least one sample period".into(),
        ));
    }
    if schedule.rows.is_empty() {
        return Err(PowerError::BadSchedule("no stimulus steps".into()));
    }
    let dt = config.sample_period_s;
    let trigger_index = (config.pre_trigger_s / dt).ceil() as usize;
    let last_offset_s = schedule.rows.last().expect("non-empty").time_us as f64 * 1e-6;
    let samples = trigger_index + ((last_offset_s + config.tail_s) / dt).ceil() as usize + 1;

    let mut core = vec![config.baseline_v; samples];
    let width = ((config.spike_width_s / dt).round() as usize).max(1);
    let mut previous_vector = 0u64;
    for row in &schedule.rows {
        let high = row.vector.count_ones();
        let toggled = (previous_vector ^ row.vector).count_ones();
        previous_vector = row.vector;
        let amplitude = model.amplitude(high, toggled);
        let start = trigger_index + (row.time_us as f64 * 1e-6 / dt).round() as usize;
        for slot in core.iter_mut().skip(start).take(width) {
            *slot += amplitude;
        }
    }
    if config.noise_sigma_v > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.noise_sigma_v)
            .expect("sigma validated finite and positive");
        for slot in core.iter_mut() {
            *slot += normal.sample(&mut rng);
        }
    }
    let trigger: Vec<f64> = (0..samples)
        .map(|k| if k >= trigger_index { config.trigger_high_v } else { 0.0 })
        .collect();

    Ok(PowerTrace {
        t0_s: 0.0,
        sample_period_s: dt,
        trigger_index,
        vcore_nominal_v: None,
        core: TraceChannel { name: "vcore_shunt".into(), volts: core, amps: None },
        io: None,
        trigger: TraceChannel { name: "mcu_trig".into(), volts: trigger, amps: None },
    })
}
