//! Spike detection around scheduled stimulus steps and correlation of
//! spike amplitudes against the two candidate predictors: how many input
//! bits are high, and how many just toggled.

use serde::{Deserialize, Serialize};

use super::{linear_stats, PowerError, PowerTrace};
use crate::stimgen::StimulusSchedule;

/// One detected spike, annotated with the stimulus step that caused it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub stimulus_index: usize,
    /// Seconds after the trigger edge.
    pub time_s: f64,
    /// Peak minus local baseline, on the core channel, in volts.
    pub amplitude_v: f64,
    /// The stimulus vector at this step, read as the register state.
    pub lfsr_state: u64,
    pub inputs_high: u32,
    pub inputs_toggled: u32,
}

pub fn inputs_high(vector: u64) -> u32 {
    vector.count_ones()
}

pub fn inputs_toggled(previous: u64, vector: u64) -> u32 {
    (previous ^ vector).count_ones()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// For each schedule step, search ±`window_fraction`·interval around the
/// expected time (relative to the trigger edge) on the core channel.
/// Amplitude is the window maximum minus the median of the window's outer
/// temporal quartiles — the quartiles straddle the spike, so the baseline
/// estimate is robust against the spike itself.
pub fn detect_spikes(
    trace: &PowerTrace,
    schedule: &StimulusSchedule,
    window_fraction: f64,
) -> Result<Vec<SpikeEvent>, PowerError> {
    if !(window_fraction > 0.0 && window_fraction <= 0.5) {
        return Err(PowerError::InvalidWindowFraction(window_fraction));
    }
    if schedule.rows.is_empty() {
        return Err(PowerError::BadSchedule("no stimulus steps".into()));
    }
    let dt = trace.sample_period_s;
    let half_window_s = window_fraction * schedule.timing.interval_us as f64 * 1e-6;
    let trigger_time = trace.trigger_time_s();
    let t_last = trace.time_at(trace.len() - 1);

    let mut previous_vector = 0u64;
    let mut events = Vec::with_capacity(schedule.rows.len());
    for (index, row) in schedule.rows.iter().enumerate() {
        let offset_s = row.time_us as f64 * 1e-6;
        let center = trigger_time + offset_s;
        let lo = center - half_window_s;
        let hi = center + half_window_s;
        if lo < trace.t0_s - dt * 1e-9 || hi > t_last + dt * 1e-9 {
            return Err(PowerError::WindowBeyondTrace { index });
        }
        let first = ((lo - trace.t0_s) / dt).ceil().max(0.0) as usize;
        let last = (((hi - trace.t0_s) / dt).floor() as usize).min(trace.len() - 1);
        let samples = &trace.core.volts[first..=last];
        let n = samples.len();
        let quartile = n / 4;
        if quartile == 0 {
            return Err(PowerError::WindowTooNarrow { index, samples: n });
        }
        let peak = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut outer: Vec<f64> = samples[..quartile]
            .iter()
            .chain(&samples[n - quartile..])
            .cloned()
            .collect();
        let baseline = median(&mut outer);
        events.push(SpikeEvent {
            stimulus_index: index,
            time_s: offset_s,
            amplitude_v: peak - baseline,
            lfsr_state: row.vector,
            inputs_high: inputs_high(row.vector),
            inputs_toggled: inputs_toggled(previous_vector, row.vector),
        });
        previous_vector = row.vector;
    }
    Ok(events)
}

/// Pearson correlations and regression slopes of spike amplitude against
/// both predictors, side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r_high: f64,
    pub r_toggle: f64,
    pub slope_high: f64,
    pub slope_toggle: f64,
}

pub fn correlate_spikes(events: &[SpikeEvent]) -> Result<CorrelationReport, PowerError> {
    if events.len() < 3 {
        return Err(PowerError::TooFewEvents { got: events.len() });
    }
    let amplitudes: Vec<f64> = events.iter().map(|e| e.amplitude_v).collect();
    let high: Vec<f64> = events.iter().map(|e| e.inputs_high as f64).collect();
    let toggled: Vec<f64> = events.iter().map(|e| e.inputs_toggled as f64).collect();
    let (slope_high, _, r_high) = linear_stats(&high, &amplitudes, "inputs_high", "amplitude")?;
    let (slope_toggle, _, r_toggle) =
        linear_stats(&toggled, &amplitudes, "inputs_toggled", "amplitude")?;
    Ok(CorrelationReport { r_high, r_toggle, slope_high, slope_toggle })
}
