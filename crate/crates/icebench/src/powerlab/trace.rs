//! Scope-capture loading and the derived current/power series.

use serde::{Deserialize, Serialize};

use super::{channel_to_current, ChannelRole, PowerError, ShuntConfig};

/// One scope channel: raw voltages plus the derived currents where a
/// shunt configuration was available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceChannel {
    pub name: String,
    pub volts: Vec<f64>,
    pub amps: Option<Vec<f64>>,
}

/// Per-role conditioning needed to turn a capture into currents. The core
/// shunt is mandatory; an IO shunt only matters when the capture has an
/// IO channel. The nominal core voltage feeds the power series and is a
/// required input wherever power is computed — there is no default.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub core: ShuntConfig,
    pub io: Option<ShuntConfig>,
    pub vcore_nominal_v: Option<f64>,
}

impl Calibration {
    pub fn new(
        core: ShuntConfig,
        io: Option<ShuntConfig>,
        vcore_nominal_v: Option<f64>,
    ) -> Result<Self, PowerError> {
        if core.channel_role != ChannelRole::Core {
            return Err(PowerError::InvalidConfig(
                "core calibration must use a core-role shunt".into(),
            ));
        }
        if let Some(io) = &io {
            if io.channel_role != ChannelRole::Io {
                return Err(PowerError::InvalidConfig(
                    "io calibration must use an io-role shunt".into(),
                ));
            }
        }
        if let Some(v) = vcore_nominal_v {
            if !(v > 0.0) {
                return Err(PowerError::NonPositive { what: "nominal core voltage" });
            }
        }
        Ok(Self { core, io, vcore_nominal_v })
    }
}

/// A uniformly sampled capture with the trigger located and currents
/// derived. All channels share one sample clock.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub t0_s: f64,
    pub sample_period_s: f64,
    /// First sample at or above the trigger channel's half-range rising
    /// crossing.
    pub trigger_index: usize,
    pub vcore_nominal_v: Option<f64>,
    pub core: TraceChannel,
    pub io: Option<TraceChannel>,
    pub trigger: TraceChannel,
}

impl PowerTrace {
    pub fn len(&self) -> usize {
        self.core.volts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.volts.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0_s + index as f64 * self.sample_period_s
    }

    pub fn trigger_time_s(&self) -> f64 {
        self.time_at(self.trigger_index)
    }
}

fn find_trigger_rise(samples: &[f64]) -> Result<usize, PowerError> {
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(PowerError::NoTriggerEdge);
    }
    let threshold = min + (max - min) / 2.0;
    for k in 1..samples.len() {
        if samples[k - 1] < threshold && samples[k] >= threshold {
            return Ok(k);
        }
    }
    Err(PowerError::NoTriggerEdge)
}

/// Load a scope export. Header: `time_s,<role>:<name>,...` with roles
/// core, io and trigger; core and trigger are required, io optional.
/// Sampling must be uniform within 1% of the inferred period.
pub fn load_scope_csv(text: &str, calibration: &Calibration) -> Result<PowerTrace, PowerError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PowerError::Malformed {
        line: 1,
        msg: "empty capture".into(),
    })?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    if columns.first() != Some(&"time_s") {
        return Err(PowerError::Malformed {
            line: 1,
            msg: format!("first column must be `time_s`, got `{}`", columns.first().unwrap_or(&"")),
        });
    }
    let mut roles: Vec<(ChannelRole, String)> = Vec::new();
    for col in &columns[1..] {
        let (role_str, name) = col.split_once(':').ok_or(PowerError::Malformed {
            line: 1,
            msg: format!("channel column `{col}` is not `<role>:<name>`"),
        })?;
        let role = ChannelRole::parse(role_str).ok_or(PowerError::Malformed {
            line: 1,
            msg: format!("unknown channel role `{role_str}`"),
        })?;
        if roles.iter().any(|(r, _)| *r == role) {
            return Err(PowerError::DuplicateChannel { role: role_str.to_string() });
        }
        roles.push((role, name.to_string()));
    }

    let mut times: Vec<f64> = Vec::new();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); roles.len()];
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != columns.len() {
            return Err(PowerError::RaggedRow {
                line,
                expected: columns.len(),
                got: fields.len(),
            });
        }
        let mut values = fields.iter().map(|f| {
            f.trim().parse::<f64>().map_err(|_| PowerError::Malformed {
                line,
                msg: format!("`{f}` is not a number"),
            })
        });
        times.push(values.next().unwrap()?);
        for channel in series.iter_mut() {
            channel.push(values.next().unwrap()?);
        }
    }

    if times.len() < 2 {
        return Err(PowerError::TooFewSamples { got: times.len() });
    }
    let n = times.len();
    let period = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(period > 0.0) {
        return Err(PowerError::Malformed {
            line: 2,
            msg: "time column does not advance".into(),
        });
    }
    for k in 1..n {
        let dt = times[k] - times[k - 1];
        if (dt - period).abs() > 0.01 * period {
            return Err(PowerError::NonUniformSampling { line: k + 2 });
        }
    }

    let mut core: Option<TraceChannel> = None;
    let mut io: Option<TraceChannel> = None;
    let mut trigger: Option<TraceChannel> = None;
    for ((role, name), volts) in roles.into_iter().zip(series) {
        let slot = match role {
            ChannelRole::Core => &mut core,
            ChannelRole::Io => &mut io,
            ChannelRole::Trigger => &mut trigger,
        };
        *slot = Some(TraceChannel { name, volts, amps: None });
    }
    let mut core = core.ok_or(PowerError::MissingChannel { role: "core" })?;
    let trigger = trigger.ok_or(PowerError::MissingChannel { role: "trigger" })?;

    core.amps = Some(channel_to_current(&core.volts, &calibration.core));
    if let (Some(io), Some(cfg)) = (&mut io, &calibration.io) {
        io.amps = Some(channel_to_current(&io.volts, cfg));
    }
    let trigger_index = find_trigger_rise(&trigger.volts)?;

    Ok(PowerTrace {
        t0_s: times[0],
        sample_period_s: period,
        trigger_index,
        vcore_nominal_v: calibration.vcore_nominal_v,
        core,
        io,
        trigger,
    })
}

/// Render a trace back to the scope CSV format. Voltages only — currents
/// are always re-derived on load.
pub fn trace_to_scope_csv(trace: &PowerTrace) -> String {
    let mut out = String::from("time_s");
    out.push_str(&format!(",core:{}", trace.core.name));
    if let Some(io) = &trace.io {
        out.push_str(&format!(",io:{}", io.name));
    }
    out.push_str(&format!(",trigger:{}\n", trace.trigger.name));
    for k in 0..trace.len() {
        out.push_str(&format!("{},{}", trace.time_at(k), trace.core.volts[k]));
        if let Some(io) = &trace.io {
            out.push_str(&format!(",{}", io.volts[k]));
        }
        out.push_str(&format!(",{}\n", trace.trigger.volts[k]));
    }
    out
}

/// Core power series P[k] = V_core · I_core[k]. With `subtract_baseline`
/// the pre-trigger mean current is removed first, isolating the dynamic
/// part.
pub fn instantaneous_power(
    trace: &PowerTrace,
    subtract_baseline: bool,
) -> Result<Vec<f64>, PowerError> {
    let vcore = trace.vcore_nominal_v.ok_or(PowerError::MissingVcore)?;
    let amps = trace
        .core
        .amps
        .as_ref()
        .ok_or_else(|| PowerError::InvalidConfig("core channel has no current series".into()))?;
    let baseline = if subtract_baseline {
        if trace.trigger_index == 0 {
            return Err(PowerError::EmptyBaselineWindow);
        }
        amps[..trace.trigger_index].iter().sum::<f64>() / trace.trigger_index as f64
    } else {
        0.0
    };
    Ok(amps.iter().map(|&i| vcore * (i - baseline)).collect())
}
