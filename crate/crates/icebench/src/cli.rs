//! File-level drivers behind the command-line interface. Each `cmd_*`
//! function reads its input files, runs the library pipeline, writes the
//! declared outputs into the target directory, and returns a run manifest
//! recording the invocation (input digests, parameters, output list).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::activity::{activation_rates, parse_vcd, report_to_csv, report_to_json};
use crate::benchdef::{builtin_devices, parse_benchdef, parse_geometry_file, validate_spec};
use crate::lfsr::{generate_sequence, taps_csv, LfsrConfig, MAX_TABLE_ORDER};
use crate::netgen::{gen_design, Manifest};
use crate::powerlab::{
    correlate_spikes, detect_spikes, estimate_ring_frequency, fit_additive_model,
    instantaneous_power, load_scope_csv, quantization_report, validate_amplifier, AdditiveFit,
    AmpMeasurement, AmpValidationSetup, AmplifierConfig, Calibration, ChannelRole, Conditioning,
    CorrelationReport, QuantizationReport, ShuntConfig, SpikeEvent, ValidationRow,
};
use crate::stimgen::{
    build_schedule, constant_schedule, gen_mcu_schedule, gen_sim_driver, gen_verilog_testbench,
    parse_mcu_schedule, CellLibraryVariant, StimulusSchedule, StimulusTiming,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything here is a usage or input problem the caller can fix; internal
/// invariant violations surface as panics instead.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

fn input(context: impl AsRef<str>, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {}", context.as_ref(), err))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize().iter() {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

fn digest(path: &Path, text: &str) -> InputDigest {
    InputDigest { path: path.display().to_string(), sha256: sha256_hex(text) }
}

/// Record of one tool invocation. Every path in `outputs` exists once the
/// command returns successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

/// Collects written files so the run manifest can list them.
struct OutputWriter {
    out_dir: PathBuf,
    written: Vec<String>,
}

impl OutputWriter {
    fn new(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)
            .map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
        Ok(Self { out_dir: out_dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.written.push(path.display().to_string());
        Ok(path)
    }
}

#[cfg(unix)]
fn mark_executable(path: &Path) -> Result<(), CliError> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755))
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[cfg(not(unix))]
fn mark_executable(_path: &Path) -> Result<(), CliError> {
    Ok(())
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// Benchmark definition to netlist, pin constraints, and design manifest.
pub fn cmd_gen(
    benchdef_path: &Path,
    device_file: Option<&Path>,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    let text = read_text(benchdef_path)?;
    let mut inputs = vec![digest(benchdef_path, &text)];
    let mut devices = builtin_devices();
    if let Some(geometry_path) = device_file {
        let geometry_text = read_text(geometry_path)?;
        let geometry = parse_geometry_file(&geometry_text)
            .map_err(|e| input(geometry_path.display().to_string(), e))?;
        inputs.push(digest(geometry_path, &geometry_text));
        devices.insert(geometry.name.clone(), geometry);
    }
    let spec = parse_benchdef(&text, &devices)
        .map_err(|e| input(benchdef_path.display().to_string(), e))?;
    let validated =
        validate_spec(spec).map_err(|e| input(benchdef_path.display().to_string(), e))?;
    let bundle = gen_design(&validated)
        .map_err(|e| input(benchdef_path.display().to_string(), e))?;

    let mut writer = OutputWriter::new(out_dir)?;
    let name = bundle.manifest.name.clone();
    let verilog_path = format!("{name}.v");
    let pcf_path = format!("{name}.pcf");
    let manifest_path = format!("{name}.manifest.json");
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "gen".to_string(),
        inputs,
        parameters: json!({
            "benchdef": benchdef_path.display().to_string(),
            "device_file": device_file.map(|p| p.display().to_string()),
        }),
        outputs: vec![
            out_dir.join(&verilog_path).display().to_string(),
            out_dir.join(&pcf_path).display().to_string(),
            out_dir.join(&manifest_path).display().to_string(),
        ],
    };
    let mut manifest = bundle.manifest;
    manifest.run = Some(serde_json::to_value(&run).expect("run manifest serializes"));
    writer.write(&verilog_path, &bundle.verilog)?;
    writer.write(&pcf_path, &bundle.pcf)?;
    writer.write(&manifest_path, &to_pretty_json(&manifest))?;
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct TbOptions {
    pub order: Option<u32>,
    pub taps: Option<Vec<u32>>,
    pub seed: u64,
    pub bits: Option<Vec<u32>>,
    pub steps: Option<u64>,
    pub lead_us: u64,
    pub interval_us: u64,
}

/// Design manifest to testbench, stimulus schedule, and simulator driver.
/// Grids get an LFSR walk over the stimulated inputs; rings get a constant
/// enable-high vector.
pub fn cmd_tb(
    manifest_path: &Path,
    options: &TbOptions,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    let text = read_text(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| input(manifest_path.display().to_string(), e))?;
    let stimulated =
        manifest.io.inputs.iter().filter(|port| port.stimulated).count() as u32;
    if stimulated == 0 {
        return Err(CliError::Input(format!(
            "design `{}` has no stimulated inputs",
            manifest.name
        )));
    }
    let timing = StimulusTiming { lead_us: options.lead_us, interval_us: options.interval_us };
    let context = manifest_path.display().to_string();
    let schedule = match manifest.kind {
        crate::benchdef::BenchKind::RingOscillator => {
            let all_high = if stimulated == 64 { u64::MAX } else { (1u64 << stimulated) - 1 };
            constant_schedule(timing, stimulated, all_high).map_err(|e| input(&context, e))?
        }
        crate::benchdef::BenchKind::LutGrid => {
            let order = match options.order {
                Some(order) => order,
                None if stimulated >= 2 => stimulated,
                None => {
                    return Err(CliError::Input(format!(
                        "design `{}` has {} stimulated input(s); pass --order (and --bits) \
                         to pick the register configuration",
                        manifest.name, stimulated
                    )))
                }
            };
            let cfg = match &options.taps {
                Some(taps) => LfsrConfig::new(order, taps.iter().copied(), options.seed),
                None => LfsrConfig::max_length(order, options.seed),
            }
            .map_err(|e| input("lfsr configuration", e))?;
            let steps = match options.steps {
                Some(steps) => steps,
                None if order <= MAX_TABLE_ORDER => (1u64 << order) - 1,
                None => {
                    return Err(CliError::Input(format!(
                        "order {order} has no default step count; pass --steps"
                    )))
                }
            };
            build_schedule(&cfg, timing, stimulated, options.bits.as_deref(), steps as usize)
                .map_err(|e| input("stimulus schedule", e))?
        }
    };
    let name = manifest.name.clone();
    let vcd_name = format!("{name}_tb.vcd");
    let testbench = gen_verilog_testbench(&manifest, &schedule, &vcd_name)
        .map_err(|e| input("testbench generation", e))?;
    let variant = CellLibraryVariant::from_device_name(&manifest.spec.device.name);
    let driver = gen_sim_driver(&name, variant, &vcd_name);

    let mut writer = OutputWriter::new(out_dir)?;
    writer.write(&format!("{name}_tb.v"), &testbench)?;
    writer.write(&format!("{name}_schedule.csv"), &gen_mcu_schedule(&schedule))?;
    let driver_path = writer.write(&format!("{name}_sim.sh"), &driver)?;
    mark_executable(&driver_path)?;
    Ok(RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "tb".to_string(),
        inputs: vec![digest(manifest_path, &text)],
        parameters: json!({
            "order": options.order,
            "taps": options.taps,
            "seed": options.seed,
            "bits": options.bits,
            "steps": options.steps,
            "lead_us": options.lead_us,
            "interval_us": options.interval_us,
        }),
        outputs: writer.written,
    })
}

#[derive(Debug, Clone)]
pub struct LfsrOptions {
    pub table: bool,
    pub order: Option<u32>,
    pub taps: Option<Vec<u32>>,
    pub seed: u64,
    pub steps: Option<u64>,
}

/// Text for stdout: either the tap table as CSV or one hex state per line.
pub fn cmd_lfsr(options: &LfsrOptions) -> Result<String, CliError> {
    if options.table {
        return Ok(taps_csv());
    }
    let order = options
        .order
        .ok_or_else(|| CliError::Input("pass --order (or --table)".to_string()))?;
    let cfg = match &options.taps {
        Some(taps) => LfsrConfig::new(order, taps.iter().copied(), options.seed),
        None => LfsrConfig::max_length(order, options.seed),
    }
    .map_err(|e| input("lfsr configuration", e))?;
    let steps = match options.steps {
        Some(steps) => steps,
        None if order <= MAX_TABLE_ORDER => (1u64 << order) - 1,
        None => {
            return Err(CliError::Input(format!(
                "order {order} has no default step count; pass --steps"
            )))
        }
    };
    let states = generate_sequence(&cfg, steps as usize)
        .map_err(|e| input("sequence generation", e))?;
    let width = cfg.hex_width();
    let mut out = String::new();
    for state in states {
        out.push_str(&format!("{state:0width$x}\n"));
    }
    Ok(out)
}

/// Parse an MCU-format schedule CSV back into a schedule usable for
/// analysis. The step interval is recovered from the row spacing, which
/// must be uniform; the vector width is the hex column's nibble width.
fn schedule_from_mcu_csv(text: &str) -> Result<StimulusSchedule, CliError> {
    let (rows, digits) =
        parse_mcu_schedule(text).map_err(|e| input("schedule", e))?;
    let interval_us = match rows.len() {
        0 => return Err(CliError::Input("schedule: no rows".to_string())),
        1 => {
            return Err(CliError::Input(
                "schedule: a single row does not define a step interval".to_string(),
            ))
        }
        _ => {
            let first = rows[1].time_us - rows[0].time_us;
            if first == 0 {
                return Err(CliError::Input("schedule: zero step interval".to_string()));
            }
            for pair in rows.windows(2) {
                if pair[1].time_us.saturating_sub(pair[0].time_us) != first {
                    return Err(CliError::Input(
                        "schedule: rows are not uniformly spaced".to_string(),
                    ));
                }
            }
            first
        }
    };
    Ok(StimulusSchedule {
        timing: StimulusTiming { lead_us: rows[0].time_us, interval_us },
        width: (digits as u32 * 4).min(64),
        rows,
    })
}

/// VCD to activation-rate reports (CSV and JSON). The per-step rate needs
/// the stimulus interval, taken from a schedule file or given directly.
pub fn cmd_activity(
    vcd_path: &Path,
    schedule_path: Option<&Path>,
    interval_us: Option<u64>,
    out_dir: &Path,
) -> Result<RunManifest, CliError> {
    let vcd_text = read_text(vcd_path)?;
    let mut inputs = vec![digest(vcd_path, &vcd_text)];
    let interval = match (schedule_path, interval_us) {
        (_, Some(interval)) => interval,
        (Some(schedule_path), None) => {
            let schedule_text = read_text(schedule_path)?;
            let schedule = schedule_from_mcu_csv(&schedule_text)?;
            inputs.push(digest(schedule_path, &schedule_text));
            schedule.timing.interval_us
        }
        (None, None) => {
            return Err(CliError::Input(
                "pass --schedule or --interval-us to define the stimulus step".to_string(),
            ))
        }
    };
    let activity = parse_vcd(&vcd_text)
        .map_err(|e| input(vcd_path.display().to_string(), e))?;
    let report = activation_rates(&activity, interval)
        .map_err(|e| input(vcd_path.display().to_string(), e))?;

    let stem = vcd_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "activity".to_string());
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write(&format!("{stem}_activity.csv"), &report_to_csv(&report))?;
    writer.write(&format!("{stem}_activity.json"), &report_to_json(&report))?;
    Ok(RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "activity".to_string(),
        inputs,
        parameters: json!({ "interval_us": interval }),
        outputs: writer.written,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub shunt_core_ohm: f64,
    pub shunt_io_ohm: Option<f64>,
    pub gain: f64,
    pub vcore_v: f64,
    pub window_fraction: f64,
}

/// Headline numbers of one trace analysis, written as `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub tool_version: String,
    pub samples: usize,
    pub sample_period_s: f64,
    pub trigger_index: usize,
    pub trigger_time_s: f64,
    pub vcore_v: f64,
    /// Mean of baseline-subtracted instantaneous power after the trigger.
    pub mean_power_w: f64,
    pub event_count: usize,
    /// Absent when the events cannot support a correlation (too few, or no
    /// amplitude variance); `correlation_note` then says why.
    pub correlation: Option<CorrelationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_note: Option<String>,
}

fn spikes_to_csv(events: &[SpikeEvent], schedule: &StimulusSchedule) -> String {
    let digits = schedule.hex_digits();
    let mut out =
        String::from("stimulus_index,time_s,amplitude_v,lfsr_state_hex,inputs_high,inputs_toggled\n");
    for event in events {
        out.push_str(&format!(
            "{},{},{},{:0digits$x},{},{}\n",
            event.stimulus_index,
            event.time_s,
            event.amplitude_v,
            event.lfsr_state,
            event.inputs_high,
            event.inputs_toggled,
        ));
    }
    out
}

/// Full trace analysis: locate the trigger, convert channels to current,
/// detect per-step spikes, and correlate their amplitudes against both
/// predictors. Writes `spikes.csv` and `analysis.json`.
pub fn cmd_power_analyze(
    trace_path: &Path,
    schedule_path: &Path,
    options: &AnalyzeOptions,
    out_dir: &Path,
) -> Result<(RunManifest, AnalysisSummary), CliError> {
    let core = ShuntConfig::new(
        options.shunt_core_ohm,
        ChannelRole::Core,
        Conditioning::Amplified { gain: options.gain },
    )
    .map_err(|e| input("core shunt", e))?;
    let io = options
        .shunt_io_ohm
        .map(|resistance| {
            ShuntConfig::new(resistance, ChannelRole::Io, Conditioning::SubtractionUnity)
        })
        .transpose()
        .map_err(|e| input("io shunt", e))?;
    let calibration = Calibration::new(core, io, Some(options.vcore_v))
        .map_err(|e| input("calibration", e))?;

    let trace_text = read_text(trace_path)?;
    let trace = load_scope_csv(&trace_text, &calibration)
        .map_err(|e| input(trace_path.display().to_string(), e))?;
    let schedule_text = read_text(schedule_path)?;
    let schedule = schedule_from_mcu_csv(&schedule_text)?;

    let events = detect_spikes(&trace, &schedule, options.window_fraction)
        .map_err(|e| input("spike detection", e))?;
    let (correlation, correlation_note) = match correlate_spikes(&events) {
        Ok(report) => (Some(report), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let power = instantaneous_power(&trace, true)
        .map_err(|e| input("power computation", e))?;
    let post_trigger = &power[trace.trigger_index..];
    let mean_power_w = post_trigger.iter().sum::<f64>() / post_trigger.len() as f64;

    let summary = AnalysisSummary {
        tool_version: TOOL_VERSION.to_string(),
        samples: trace.len(),
        sample_period_s: trace.sample_period_s,
        trigger_index: trace.trigger_index,
        trigger_time_s: trace.trigger_time_s(),
        vcore_v: options.vcore_v,
        mean_power_w,
        event_count: events.len(),
        correlation,
        correlation_note,
    };
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write("spikes.csv", &spikes_to_csv(&events, &schedule))?;
    writer.write("analysis.json", &to_pretty_json(&summary))?;
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "power analyze".to_string(),
        inputs: vec![digest(trace_path, &trace_text), digest(schedule_path, &schedule_text)],
        parameters: json!({
            "shunt_core_ohm": options.shunt_core_ohm,
            "shunt_io_ohm": options.shunt_io_ohm,
            "gain": options.gain,
            "vcore_v": options.vcore_v,
            "window_fraction": options.window_fraction,
        }),
        outputs: writer.written,
    };
    Ok((run, summary))
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateAmpOptions {
    pub gain: f64,
    pub u_supply_v: f64,
    pub r_load_ohm: f64,
    pub r_shunt_ohm: f64,
}

fn parse_amp_rows(text: &str) -> Result<Vec<AmpMeasurement>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "u_out_v,u_diff_mv" => {}
        _ => {
            return Err(CliError::Input(
                "rows: expected header `u_out_v,u_diff_mv`".to_string(),
            ))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (u_out, u_diff) = line.split_once(',').ok_or_else(|| {
            CliError::Input(format!("rows line {}: expected two columns", idx + 1))
        })?;
        let parse = |field: &str| {
            field.trim().parse::<f64>().map_err(|_| {
                CliError::Input(format!(
                    "rows line {}: `{}` is not a number",
                    idx + 1,
                    field.trim()
                ))
            })
        };
        rows.push(AmpMeasurement { u_out_v: parse(u_out)?, u_diff_mv: parse(u_diff)? });
    }
    if rows.is_empty() {
        return Err(CliError::Input("rows: no measurements".to_string()));
    }
    Ok(rows)
}

fn validation_to_csv(rows: &[ValidationRow]) -> String {
    let mut out = String::from(
        "u_supply_v,r_load_ohm,r_shunt_ohm,u_out_v,u_diff_mv,u_amp_calc_v,e_rel_pct\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.u_supply_v,
            row.r_load_ohm,
            row.r_shunt_ohm,
            row.u_out_v,
            row.u_diff_mv,
            row.u_amp_calc_v,
            row.e_rel_pct,
        ));
    }
    out
}

/// Bench-supply amplifier check: recompute each output from gain times the
/// measured differential input and report the relative error. Writes
/// `validation.csv` and `validation.json`.
pub fn cmd_power_validate_amp(
    rows_path: &Path,
    options: &ValidateAmpOptions,
    out_dir: &Path,
) -> Result<(RunManifest, Vec<ValidationRow>), CliError> {
    let text = read_text(rows_path)?;
    let measurements = parse_amp_rows(&text)?;
    let mut amp = AmplifierConfig::ina293b5();
    amp.gain = options.gain;
    let setup = AmpValidationSetup {
        u_supply_v: options.u_supply_v,
        r_load_ohm: options.r_load_ohm,
        r_shunt_ohm: options.r_shunt_ohm,
    };
    let rows = validate_amplifier(&measurements, &amp, &setup)
        .map_err(|e| input("amplifier validation", e))?;
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write("validation.csv", &validation_to_csv(&rows))?;
    writer.write("validation.json", &to_pretty_json(&rows))?;
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "power validate-amp".to_string(),
        inputs: vec![digest(rows_path, &text)],
        parameters: json!({
            "gain": options.gain,
            "u_supply_v": options.u_supply_v,
            "r_load_ohm": options.r_load_ohm,
            "r_shunt_ohm": options.r_shunt_ohm,
        }),
        outputs: writer.written,
    };
    Ok((run, rows))
}

#[derive(Debug, Clone, Copy)]
pub struct QuantizationOptions {
    pub adc_bits: u32,
    pub vref_v: f64,
    pub shunt_ohm: f64,
    /// Amplified conditioning when set; direct unity sensing otherwise.
    pub gain: Option<f64>,
}

/// ADC resolution limits for a shunt channel. Writes `quantization.json`.
pub fn cmd_power_quantization(
    options: &QuantizationOptions,
    out_dir: &Path,
) -> Result<(RunManifest, QuantizationReport), CliError> {
    let conditioning = match options.gain {
        Some(gain) => Conditioning::Amplified { gain },
        None => Conditioning::SubtractionUnity,
    };
    let shunt = ShuntConfig::new(options.shunt_ohm, ChannelRole::Core, conditioning)
        .map_err(|e| input("shunt", e))?;
    let report = quantization_report(options.adc_bits, options.vref_v, &shunt)
        .map_err(|e| input("quantization", e))?;
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write("quantization.json", &to_pretty_json(&report))?;
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "power quantization".to_string(),
        inputs: Vec::new(),
        parameters: json!({
            "adc_bits": options.adc_bits,
            "vref_v": options.vref_v,
            "shunt_ohm": options.shunt_ohm,
            "gain": options.gain,
        }),
        outputs: writer.written,
    };
    Ok((run, report))
}

fn parse_fit_points(text: &str) -> Result<Vec<(u32, f64)>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "cells,power_w" => {}
        _ => {
            return Err(CliError::Input(
                "points: expected header `cells,power_w`".to_string(),
            ))
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (cells, power) = line.split_once(',').ok_or_else(|| {
            CliError::Input(format!("points line {}: expected two columns", idx + 1))
        })?;
        let cells = cells.trim().parse::<u32>().map_err(|_| {
            CliError::Input(format!(
                "points line {}: `{}` is not a cell count",
                idx + 1,
                cells.trim()
            ))
        })?;
        let power = power.trim().parse::<f64>().map_err(|_| {
            CliError::Input(format!(
                "points line {}: `{}` is not a number",
                idx + 1,
                power.trim()
            ))
        })?;
        points.push((cells, power));
    }
    Ok(points)
}

/// Fit mean power against cell count as P(n) = p0 + n·p_cell. Writes
/// `fit.json`.
pub fn cmd_power_fit(
    points_path: &Path,
    out_dir: &Path,
) -> Result<(RunManifest, AdditiveFit), CliError> {
    let text = read_text(points_path)?;
    let points = parse_fit_points(&text)?;
    let fit = fit_additive_model(&points).map_err(|e| input("fit", e))?;
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write("fit.json", &to_pretty_json(&fit))?;
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "power fit".to_string(),
        inputs: vec![digest(points_path, &text)],
        parameters: json!({}),
        outputs: writer.written,
    };
    Ok((run, fit))
}

#[derive(Debug, Clone, Copy)]
pub struct RingfreqOptions {
    pub inverters: u32,
    pub tau_ns: f64,
    pub chains: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingfreqReport {
    pub inverters_per_chain: u32,
    pub tau_gate_s: f64,
    pub chains: u32,
    pub frequency_hz: f64,
}

/// Per-chain ring-oscillator frequency estimate. Writes `ringfreq.json`.
pub fn cmd_power_ringfreq(
    options: &RingfreqOptions,
    out_dir: &Path,
) -> Result<(RunManifest, RingfreqReport), CliError> {
    let tau_gate_s = options.tau_ns * 1e-9;
    let frequency_hz = estimate_ring_frequency(options.inverters, tau_gate_s, options.chains)
        .map_err(|e| input("ring frequency", e))?;
    let report = RingfreqReport {
        inverters_per_chain: options.inverters,
        tau_gate_s,
        chains: options.chains,
        frequency_hz,
    };
    let mut writer = OutputWriter::new(out_dir)?;
    writer.write("ringfreq.json", &to_pretty_json(&report))?;
    let run = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        subcommand: "power ringfreq".to_string(),
        inputs: Vec::new(),
        parameters: json!({
            "inverters": options.inverters,
            "tau_ns": options.tau_ns,
            "chains": options.chains,
        }),
        outputs: writer.written,
    };
    Ok((run, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_the_reference_vector() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn amp_rows_parse_and_reject() {
        let rows = parse_amp_rows("u_out_v,u_diff_mv\n0.415,0.82\n0.417,0.80\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].u_out_v, 0.415);
        assert_eq!(rows[1].u_diff_mv, 0.80);
        assert!(parse_amp_rows("wrong,header\n1,2\n").is_err());
        assert!(parse_amp_rows("u_out_v,u_diff_mv\nnope,2\n").is_err());
        assert!(parse_amp_rows("u_out_v,u_diff_mv\n").is_err());
    }

    #[test]
    fn fit_points_parse_and_reject() {
        let points = parse_fit_points("cells,power_w\n1000,0.003\n5000,0.011\n").unwrap();
        assert_eq!(points, vec![(1000, 0.003), (5000, 0.011)]);
        assert!(parse_fit_points("cells,power_w\n-3,0.1\n").is_err());
        assert!(parse_fit_points("power_w,cells\n").is_err());
    }

    #[test]
    fn mcu_schedules_recover_interval_and_reject_nonuniform() {
        let schedule =
            schedule_from_mcu_csv("time_us,vector_hex\n100,1\n200,8\n300,4\n").unwrap();
        assert_eq!(schedule.timing.lead_us, 100);
        assert_eq!(schedule.timing.interval_us, 100);
        assert_eq!(schedule.width, 4);
        assert_eq!(schedule.rows.len(), 3);
        assert!(schedule_from_mcu_csv("time_us,vector_hex\n100,1\n").is_err());
        assert!(schedule_from_mcu_csv("time_us,vector_hex\n100,1\n200,8\n350,4\n").is_err());
    }

    #[test]
    fn run_manifest_round_trips_json() {
        let run = RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: "gen".to_string(),
            inputs: vec![InputDigest { path: "a.def".into(), sha256: sha256_hex("x") }],
            parameters: json!({ "k": 1 }),
            outputs: vec!["a.v".into()],
        };
        let text = to_pretty_json(&run);
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn gen_and_tb_produce_their_files() {
        let dir = tempfile::tempdir().unwrap();
        let def_path = dir.path().join("grid.def");
        fs::write(
            &def_path,
            "[benchmark]\nname = grid1k\nkind = lut_grid\ncells = 1000\n\
             [pins]\ninputs = 2,3,4,6\n",
        )
        .unwrap();
        let out_dir = dir.path().join("out");
        let run = cmd_gen(&def_path, None, &out_dir).unwrap();
        assert_eq!(run.outputs.len(), 3);
        for output in &run.outputs {
            assert!(Path::new(output).exists(), "{output} missing");
        }
        let manifest_path = out_dir.join("grid1k.manifest.json");
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
        assert_eq!(manifest.cell_count, 1000);
        assert!(manifest.run.is_some());

        let options = TbOptions {
            order: None,
            taps: None,
            seed: 1,
            bits: None,
            steps: None,
            lead_us: 100,
            interval_us: 100,
        };
        let run = cmd_tb(&manifest_path, &options, &out_dir).unwrap();
        assert_eq!(run.outputs.len(), 3);
        let schedule_text = fs::read_to_string(out_dir.join("grid1k_schedule.csv")).unwrap();
        assert_eq!(schedule_text.lines().count(), 16);
        assert!(schedule_text.starts_with("time_us,vector_hex\n100,1\n200,8\n"));
        let testbench = fs::read_to_string(out_dir.join("grid1k_tb.v")).unwrap();
        assert!(testbench.contains("module tb_grid1k;"));
    }

    #[test]
    fn gen_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let def_path = dir.path().join("ring.def");
        fs::write(
            &def_path,
            "[benchmark]\nname = ring2\nkind = ring_oscillator\ncells = 3000\nchains = 2\n\
             [pins]\ninputs = 2\noutputs = 9\n",
        )
        .unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        cmd_gen(&def_path, None, &out_a).unwrap();
        cmd_gen(&def_path, None, &out_b).unwrap();
        for name in ["ring2.v", "ring2.pcf"] {
            assert_eq!(
                fs::read_to_string(out_a.join(name)).unwrap(),
                fs::read_to_string(out_b.join(name)).unwrap(),
                "{name} differs"
            );
        }
        let manifest_a = fs::read_to_string(out_a.join("ring2.manifest.json")).unwrap();
        let manifest_b = fs::read_to_string(out_b.join("ring2.manifest.json")).unwrap();
        assert_eq!(
            manifest_a.replace(&out_a.display().to_string(), "OUT"),
            manifest_b.replace(&out_b.display().to_string(), "OUT")
        );
    }

    #[test]
    fn ring_testbench_gets_a_constant_enable() {
        let dir = tempfile::tempdir().unwrap();
        let def_path = dir.path().join("ring.def");
        fs::write(
            &def_path,
            "[benchmark]\nname = ringo\nkind = ring_oscillator\ncells = 100\n\
             [pins]\ninputs = 2\noutputs = 9\n",
        )
        .unwrap();
        cmd_gen(&def_path, None, dir.path()).unwrap();
        let options = TbOptions {
            order: None,
            taps: None,
            seed: 1,
            bits: None,
            steps: None,
            lead_us: 10,
            interval_us: 50,
        };
        cmd_tb(&dir.path().join("ringo.manifest.json"), &options, dir.path()).unwrap();
        let schedule = fs::read_to_string(dir.path().join("ringo_schedule.csv")).unwrap();
        assert_eq!(schedule, "time_us,vector_hex\n10,1\n");
    }

    #[test]
    fn bad_definitions_surface_as_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let def_path = dir.path().join("bad.def");
        fs::write(&def_path, "[benchmark]\nkind = nonsense\n").unwrap();
        let err = cmd_gen(&def_path, None, dir.path()).unwrap_err();
        assert!(matches!(err, CliError::Input(_)), "{err}");
        let missing = cmd_gen(&dir.path().join("absent.def"), None, dir.path()).unwrap_err();
        assert!(matches!(missing, CliError::Io { .. }));
    }

    #[test]
    fn activity_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let vcd_path = dir.path().join("run.vcd");
        fs::write(
            &vcd_path,
            "$timescale 1us $end\n$var wire 1 ! in0 $end\n$enddefinitions $end\n\
             #0\n0!\n#100\n1!\n#200\n0!\n#300\n",
        )
        .unwrap();
        let run = cmd_activity(&vcd_path, None, Some(100), dir.path()).unwrap();
        assert_eq!(run.outputs.len(), 2);
        let csv = fs::read_to_string(dir.path().join("run_activity.csv")).unwrap();
        assert!(csv.starts_with("signal,toggles,rate_hz,toggles_per_step\n"));
        assert!(csv.contains("in0,2,"));
        assert!(cmd_activity(&vcd_path, None, None, dir.path()).is_err());
    }

    #[test]
    fn quantization_and_ringfreq_write_reports() {
        let dir = tempfile::tempdir().unwrap();
        let options = QuantizationOptions {
            adc_bits: 12,
            vref_v: 5.0,
            shunt_ohm: 1.5,
            gain: None,
        };
        let (run, report) = cmd_power_quantization(&options, dir.path()).unwrap();
        assert_eq!(run.outputs.len(), 1);
        assert!((report.lsb_v - 5.0 / 4096.0).abs() < 1e-15);
        let parsed: QuantizationReport = serde_json::from_str(
            &fs::read_to_string(dir.path().join("quantization.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(parsed, report);

        let ring = RingfreqOptions { inverters: 3, tau_ns: 1.0, chains: 1 };
        let (_, report) = cmd_power_ringfreq(&ring, dir.path()).unwrap();
        assert!((report.frequency_hz - 125e6).abs() / 125e6 < 1e-12);
        let even = RingfreqOptions { inverters: 4, tau_ns: 1.0, chains: 1 };
        assert!(cmd_power_ringfreq(&even, dir.path()).is_err());
    }

    #[test]
    fn validate_amp_reproduces_the_bench_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let rows_path = dir.path().join("rows.csv");
        fs::write(&rows_path, "u_out_v,u_diff_mv\n0.415,0.82\n0.417,0.80\n0.416,0.78\n")
            .unwrap();
        let options = ValidateAmpOptions {
            gain: 500.0,
            u_supply_v: 3.3,
            r_load_ohm: 33e3,
            r_shunt_ohm: 10.0,
        };
        let (run, rows) = cmd_power_validate_amp(&rows_path, &options, dir.path()).unwrap();
        assert_eq!(run.outputs.len(), 2);
        assert_eq!(rows.len(), 3);
        let expected = [1.20, 4.08, 6.25];
        for (row, expected) in rows.iter().zip(expected) {
            assert!((row.e_rel_pct - expected).abs() < 0.05, "{row:?}");
        }
        let csv = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
        assert!(csv
            .starts_with("u_supply_v,r_load_ohm,r_shunt_ohm,u_out_v,u_diff_mv,u_amp_calc_v,e_rel_pct\n"));
    }

    #[test]
    fn fit_subcommand_recovers_a_line() {
        let dir = tempfile::tempdir().unwrap();
        let points_path = dir.path().join("points.csv");
        fs::write(&points_path, "cells,power_w\n1000,0.003\n5000,0.011\n").unwrap();
        let (_, fit) = cmd_power_fit(&points_path, dir.path()).unwrap();
        assert!((fit.p0_w - 1e-3).abs() < 1e-12);
        assert!((fit.p_cell_w - 2e-6).abs() < 1e-15);
    }
}
