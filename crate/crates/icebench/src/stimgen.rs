//! Stimulus generation: timed input vectors from an LFSR walk, rendered
//! three ways — a Verilog testbench for simulation, a CSV schedule for a
//! microcontroller driver, and a shell script that runs the simulation
//! against the vendor cell models.
//!
//! All three carry the same schedule; the parse-back functions exist so
//! tests (and downstream analysis) can recover it bit-exactly from the
//! emitted text.

use thiserror::Error;

use crate::lfsr::{generate_sequence, LfsrConfig, LfsrError};
use crate::netgen::{sanitize_identifier, Manifest};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StimgenError {
    #[error("update interval must be at least 1 us")]
    ZeroInterval,
    #[error("schedule needs at least one step")]
    ZeroSteps,
    #[error("vector width must be 1..=64, got {0}")]
    WidthOutOfRange(u32),
    #[error("vector width {width} exceeds register order {order}; pass an explicit bit selection")]
    WidthExceedsOrder { width: u32, order: u32 },
    #[error("bit selection has {got} entries for width {expected}")]
    BitSelectLength { expected: u32, got: usize },
    #[error("selected bit {bit} outside register of order {order}")]
    BitOutOfRange { bit: u32, order: u32 },
    #[error("schedule time overflows")]
    TimeOverflow,
    #[error("testbench drives {expected} stimulated port(s) but schedule width is {got}")]
    WidthMismatch { expected: usize, got: u32 },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("schedule times are not uniformly spaced")]
    NonUniform,
    #[error(transparent)]
    Lfsr(#[from] LfsrError),
}

/// When vectors are applied: the first at `lead_us`, each subsequent one
/// `interval_us` later.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StimulusTiming {
    pub lead_us: u64,
    pub interval_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleRow {
    pub time_us: u64,
    pub vector: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusSchedule {
    pub timing: StimulusTiming,
    pub width: u32,
    pub rows: Vec<ScheduleRow>,
}

impl StimulusSchedule {
    pub fn hex_digits(&self) -> usize {
        self.width.div_ceil(4) as usize
    }

    fn vector_literal(&self, vector: u64) -> String {
        format!("{}'h{:0digits$x}", self.width, vector, digits = self.hex_digits())
    }
}

/// Walk the register `steps` times and emit one vector per state. Vectors
/// are assembled most-significant-first from `bit_select` (1-indexed from
/// the register's least significant bit); the default selection takes the
/// top `width` bits, so `width = order` reproduces the state itself.
pub fn build_schedule(
    cfg: &LfsrConfig,
    timing: StimulusTiming,
    width: u32,
    bit_select: Option<&[u32]>,
    steps: usize,
) -> Result<StimulusSchedule, StimgenError> {
    if timing.interval_us == 0 {
        return Err(StimgenError::ZeroInterval);
    }
    if steps == 0 {
        return Err(StimgenError::ZeroSteps);
    }
    if !(1..=64).contains(&width) {
        return Err(StimgenError::WidthOutOfRange(width));
    }
    let order = cfg.order();
    let select: Vec<u32> = match bit_select {
        Some(sel) => {
            if sel.len() != width as usize {
                return Err(StimgenError::BitSelectLength {
                    expected: width,
                    got: sel.len(),
                });
            }
            for &bit in sel {
                if bit == 0 || bit > order {
                    return Err(StimgenError::BitOutOfRange { bit, order });
                }
            }
            sel.to_vec()
        }
        None => {
            if width > order {
                return Err(StimgenError::WidthExceedsOrder { width, order });
            }
            (0..width).map(|j| order - j).collect()
        }
    };

    let states = generate_sequence(cfg, steps)?;
    let mut rows = Vec::with_capacity(steps);
    for (k, state) in states.into_iter().enumerate() {
        let offset = (k as u64)
            .checked_mul(timing.interval_us)
            .and_then(|o| o.checked_add(timing.lead_us))
            .ok_or(StimgenError::TimeOverflow)?;
        let mut vector = 0u64;
        for (j, &bit) in select.iter().enumerate() {
            vector |= (state >> (bit - 1) & 1) << (width - 1 - j as u32);
        }
        rows.push(ScheduleRow { time_us: offset, vector });
    }
    Ok(StimulusSchedule { timing, width, rows })
}

/// Single-row schedule holding one constant vector from `lead_us` on;
/// used for ring enables.
pub fn constant_schedule(
    timing: StimulusTiming,
    width: u32,
    vector: u64,
) -> Result<StimulusSchedule, StimgenError> {
    if timing.interval_us == 0 {
        return Err(StimgenError::ZeroInterval);
    }
    if !(1..=64).contains(&width) {
        return Err(StimgenError::WidthOutOfRange(width));
    }
    Ok(StimulusSchedule {
        timing,
        width,
        rows: vec![ScheduleRow { time_us: timing.lead_us, vector }],
    })
}

/// Self-checking is not the point here: the bench applies vectors and the
/// VCD carries the evidence. Stimulated DUT inputs map onto `stim` MSB
/// first (port k reads `stim[width-1-k]`), matching the schedule's vector
/// assembly; remaining inputs are tied low.
pub fn gen_verilog_testbench(
    manifest: &Manifest,
    schedule: &StimulusSchedule,
    vcd_path: &str,
) -> Result<String, StimgenError> {
    let stimulated: Vec<&str> = manifest
        .io
        .inputs
        .iter()
        .filter(|p| p.stimulated)
        .map(|p| p.port.as_str())
        .collect();
    if stimulated.len() != schedule.width as usize {
        return Err(StimgenError::WidthMismatch {
            expected: stimulated.len(),
            got: schedule.width,
        });
    }
    let rows = &schedule.rows;
    if rows.is_empty() {
        return Err(StimgenError::EmptySchedule);
    }
    for pair in rows.windows(2) {
        if pair[1].time_us <= pair[0].time_us {
            return Err(StimgenError::NonUniform);
        }
    }

    let module = sanitize_identifier(&manifest.name);
    let tb = format!("tb_{module}");
    let w = schedule.width;
    let mut out = String::new();
    out.push_str("`timescale 1ns/1ps\n\n");
    out.push_str(&format!("module {tb};\n\n"));
    out.push_str(&format!(
        "reg [{}:0] stim = {};\n",
        w - 1,
        schedule.vector_literal(0)
    ));
    for output in &manifest.io.outputs {
        out.push_str(&format!("wire {};\n", output.port));
    }
    out.push('\n');

    out.push_str(&format!("{module} dut (\n"));
    let mut bindings = Vec::new();
    let mut stim_idx = 0u32;
    for input in &manifest.io.inputs {
        if input.stimulated {
            bindings.push(format!("    .{}(stim[{}])", input.port, w - 1 - stim_idx));
            stim_idx += 1;
        } else {
            bindings.push(format!("    .{}(1'b0)", input.port));
        }
    }
    for output in &manifest.io.outputs {
        bindings.push(format!("    .{}({})", output.port, output.port));
    }
    out.push_str(&bindings.join(",\n"));
    out.push_str("\n);\n\n");

    out.push_str("initial begin\n");
    out.push_str("`ifdef VCDFILE\n    $dumpfile(`VCDFILE);\n`else\n");
    out.push_str(&format!("    $dumpfile(\"{vcd_path}\");\n`endif\n"));
    out.push_str(&format!("    $dumpvars(0, {tb});\n"));
    let mut prev_us = 0u64;
    for row in rows {
        let delta_ns = (row.time_us - prev_us)
            .checked_mul(1000)
            .ok_or(StimgenError::TimeOverflow)?;
        if delta_ns > 0 {
            out.push_str(&format!("    #{delta_ns};\n"));
        }
        out.push_str(&format!("    stim = {};\n", schedule.vector_literal(row.vector)));
        prev_us = row.time_us;
    }
    let tail_ns = schedule
        .timing
        .interval_us
        .checked_mul(1000)
        .ok_or(StimgenError::TimeOverflow)?;
    out.push_str(&format!("    #{tail_ns};\n"));
    out.push_str("    $finish;\nend\n\nendmodule\n");
    Ok(out)
}

/// Recover the schedule a generated testbench applies, bit-exactly: delay
/// and assignment lines are re-accumulated into absolute times.
pub fn parse_testbench_schedule(text: &str) -> Result<StimulusSchedule, StimgenError> {
    let mut width: Option<u32> = None;
    let mut acc_ns: u64 = 0;
    let mut pending_ns: u64 = 0;
    let mut rows: Vec<ScheduleRow> = Vec::new();
    let mut tail_ns: Option<u64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        let malformed = |msg: String| StimgenError::Malformed { line, msg };
        if let Some(rest) = trimmed.strip_prefix("reg [") {
            let msb: u32 = rest
                .split(':')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("unparseable reg declaration".into()))?;
            width = Some(msb + 1);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let ns: u64 = rest
                .strip_suffix(';')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| malformed("unparseable delay".into()))?;
            pending_ns = pending_ns
                .checked_add(ns)
                .ok_or(StimgenError::TimeOverflow)?;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("stim = ") {
            let w = width.ok_or_else(|| malformed("assignment before reg declaration".into()))?;
            let lit = rest
                .strip_suffix(';')
                .ok_or_else(|| malformed("missing `;`".into()))?;
            let (lit_w, hex) = lit
                .split_once("'h")
                .ok_or_else(|| malformed(format!("`{lit}` is not a sized hex literal")))?;
            if lit_w.parse::<u32>() != Ok(w) {
                return Err(malformed(format!("literal width `{lit_w}` does not match reg")));
            }
            let vector = u64::from_str_radix(hex, 16)
                .map_err(|_| malformed(format!("`{hex}` is not hex")))?;
            acc_ns = acc_ns
                .checked_add(pending_ns)
                .ok_or(StimgenError::TimeOverflow)?;
            pending_ns = 0;
            if acc_ns % 1000 != 0 {
                return Err(malformed(format!("time {acc_ns} ns is not whole microseconds")));
            }
            rows.push(ScheduleRow { time_us: acc_ns / 1000, vector });
            continue;
        }
        if trimmed == "$finish;" {
            tail_ns = Some(pending_ns);
        }
    }

    // The declaration's own `stim = 0` initializer never reaches here: that
    // line matches the `reg [` branch first.
    if rows.is_empty() {
        return Err(StimgenError::EmptySchedule);
    }
    let width = width.ok_or(StimgenError::Malformed {
        line: 0,
        msg: "no reg declaration".into(),
    })?;
    let interval_us = if rows.len() >= 2 {
        let first = rows[1].time_us - rows[0].time_us;
        for pair in rows.windows(2) {
            if pair[1].time_us - pair[0].time_us != first {
                return Err(StimgenError::NonUniform);
            }
        }
        first
    } else {
        let tail = tail_ns.ok_or(StimgenError::Malformed {
            line: 0,
            msg: "no trailing delay before $finish".into(),
        })?;
        if tail == 0 || tail % 1000 != 0 {
            return Err(StimgenError::Malformed {
                line: 0,
                msg: format!("trailing delay {tail} ns is not whole microseconds"),
            });
        }
        tail / 1000
    };
    Ok(StimulusSchedule {
        timing: StimulusTiming { lead_us: rows[0].time_us, interval_us },
        width,
        rows,
    })
}

/// CSV schedule for a microcontroller stimulus driver: `time_us,vector_hex`
/// with vectors zero-padded to the schedule's hex width.
pub fn gen_mcu_schedule(schedule: &StimulusSchedule) -> String {
    let mut out = String::from("time_us,vector_hex\n");
    for row in &schedule.rows {
        out.push_str(&format!(
            "{},{:0digits$x}\n",
            row.time_us,
            row.vector,
            digits = schedule.hex_digits()
        ));
    }
    out
}

/// Parse a microcontroller schedule back into rows. The second value is
/// the hex digit count, which bounds the vector width to `digits * 4`.
pub fn parse_mcu_schedule(text: &str) -> Result<(Vec<ScheduleRow>, usize), StimgenError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(StimgenError::EmptySchedule)?;
    if header.trim() != "time_us,vector_hex" {
        return Err(StimgenError::Malformed {
            line: 1,
            msg: format!("expected header `time_us,vector_hex`, got `{header}`"),
        });
    }
    let mut rows = Vec::new();
    let mut digits = 0usize;
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (time, hex) = trimmed.split_once(',').ok_or(StimgenError::Malformed {
            line,
            msg: format!("expected `time,vector`, got `{trimmed}`"),
        })?;
        let time_us = time.parse().map_err(|_| StimgenError::Malformed {
            line,
            msg: format!("`{time}` is not a time in microseconds"),
        })?;
        let vector = u64::from_str_radix(hex, 16).map_err(|_| StimgenError::Malformed {
            line,
            msg: format!("`{hex}` is not hex"),
        })?;
        digits = digits.max(hex.len());
        rows.push(ScheduleRow { time_us, vector });
    }
    if rows.is_empty() {
        return Err(StimgenError::EmptySchedule);
    }
    Ok((rows, digits))
}

/// Cell-library variant selector for simulation defines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLibraryVariant {
    LowPower,
    HighPerformance,
    UltraPlus,
}

impl CellLibraryVariant {
    pub fn define(self) -> &'static str {
        match self {
            CellLibraryVariant::LowPower => "ICE40_LP=1",
            CellLibraryVariant::HighPerformance => "ICE40_HX=1",
            CellLibraryVariant::UltraPlus => "ICE40_U=1",
        }
    }

    /// Guess the variant from a device name (`ice40up5k` -> UltraPlus);
    /// low power is the fallback.
    pub fn from_device_name(name: &str) -> Self {
        if name.contains("hx") {
            CellLibraryVariant::HighPerformance
        } else if name.contains("up") {
            CellLibraryVariant::UltraPlus
        } else {
            CellLibraryVariant::LowPower
        }
    }
}

/// Shell script that compiles testbench plus netlist against the vendor
/// cell models (with specify-block timing enabled) and runs the simulation.
pub fn gen_sim_driver(
    base_name: &str,
    variant: CellLibraryVariant,
    vcd_path: &str,
) -> String {
    let mut out = String::new();
    out.push_str("#!/bin/sh\n");
    out.push_str(&format!(
        "# Simulate {base_name} against the ice40 cell models.\n"
    ));
    out.push_str("set -e\n\n");
    out.push_str("CELLS_SIM=\"$(yosys-config --datdir)/ice40/cells_sim.v\"\n\n");
    out.push_str(&format!("iverilog -o {base_name}_tb.vvp -gspecify \\\n"));
    out.push_str(&format!("    -DVCDFILE='\"{vcd_path}\"' \\\n"));
    out.push_str("    -DNO_ICE40_DEFAULT_ASSIGNMENTS=1 \\\n");
    out.push_str(&format!("    -D{} \\\n", variant.define()));
    out.push_str(&format!("    {base_name}_tb.v {base_name}.v \"$CELLS_SIM\"\n"));
    out.push_str(&format!("vvp {base_name}_tb.vvp\n"));
    out
}
