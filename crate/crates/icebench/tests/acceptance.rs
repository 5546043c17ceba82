//! Acceptance gate: one test per shipping criterion, each printing a single
//! `acceptance <n>: PASS` / `FAIL` line (visible with `-- --nocapture`).

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use icebench::activity::{activation_rates, parse_vcd};
use icebench::benchdef::{builtin_devices, parse_benchdef, validate_spec, ValidatedSpec};
use icebench::lfsr::{generate_sequence, next_state, period, table_orders, LfsrConfig};
use icebench::netgen::{gen_design, DesignBundle};
use icebench::powerlab::{
    correlate_spikes, detect_spikes, estimate_ring_frequency, fit_additive_model,
    quantization_report, synthesize_trace, validate_amplifier, AmpMeasurement,
    AmpValidationSetup, AmplifierConfig, ChannelRole, Conditioning, ShuntConfig, SpikeModel,
    SynthesisConfig,
};
use icebench::stimgen::{build_schedule, StimulusTiming};

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

fn criterion(number: u32, description: &str, check: impl FnOnce() -> Result<(), String>) {
    match check() {
        Ok(()) => println!("acceptance {number}: PASS - {description}"),
        Err(why) => {
            println!("acceptance {number}: FAIL - {description}: {why}");
            panic!("acceptance criterion {number} failed: {why}");
        }
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn criterion_1_amplifier_validation_rows() {
    criterion(1, "amplifier validation reproduces the recorded gain errors", || {
        let started = Instant::now();
        let amp = AmplifierConfig::ina293b5();
        let setup =
            AmpValidationSetup { u_supply_v: 3.3, r_load_ohm: 33e3, r_shunt_ohm: 10.0 };
        let measurements = [
            AmpMeasurement { u_out_v: 0.415, u_diff_mv: 0.82 },
            AmpMeasurement { u_out_v: 0.417, u_diff_mv: 0.80 },
            AmpMeasurement { u_out_v: 0.416, u_diff_mv: 0.78 },
        ];
        let rows =
            validate_amplifier(&measurements, &amp, &setup).map_err(|e| e.to_string())?;
        let expected = [(0.41, 1.20), (0.40, 4.08), (0.39, 6.25)];
        ensure!(rows.len() == expected.len(), "{} rows", rows.len());
        for (row, (u_amp_calc, e_rel)) in rows.iter().zip(expected) {
            ensure!(
                (row.u_amp_calc_v - u_amp_calc).abs() <= 5e-4,
                "u_amp_calc {} V, expected {u_amp_calc} V",
                row.u_amp_calc_v
            );
            ensure!(
                (row.e_rel_pct - e_rel).abs() <= 0.05,
                "e_rel {}%, expected {e_rel}% within 0.05 points",
                row.e_rel_pct
            );
        }
        ensure!(started.elapsed() < Duration::from_secs(1), "took over a second");
        Ok(())
    });
}

#[test]
fn criterion_2_adc_quantization_floor() {
    criterion(2, "12-bit/5V quantization floor lands on the known current step", || {
        let started = Instant::now();
        let shunt = ShuntConfig::new(1.5, ChannelRole::Core, Conditioning::SubtractionUnity)
            .map_err(|e| e.to_string())?;
        let report = quantization_report(12, 5.0, &shunt).map_err(|e| e.to_string())?;
        ensure!(
            (report.lsb_v / 1.2e-3 - 1.0).abs() <= 0.02,
            "lsb {} V is not within 2% of 1.2 mV",
            report.lsb_v
        );
        ensure!(
            (report.min_current_a / 800e-6 - 1.0).abs() <= 0.02,
            "min current {} A is not within 2% of 800 uA",
            report.min_current_a
        );
        let current = shunt.volts_to_amps(100e-6);
        ensure!(
            (current - 66.7e-6).abs() <= 0.05e-6,
            "100 uV across 1.5 ohm gave {current} A, expected 66.7 uA"
        );
        ensure!(started.elapsed() < Duration::from_secs(1), "took over a second");
        Ok(())
    });
}

#[test]
fn criterion_3_register_periods_exhaustive() {
    criterion(3, "maximal-length periods verified over the full state space", || {
        let started = Instant::now();
        for seed in 1..16u64 {
            let cfg = LfsrConfig::new(4, [4, 3], seed).map_err(|e| e.to_string())?;
            let p = period(&cfg);
            ensure!(p == 15, "order 4 seed {seed:#x}: period {p}, expected 15");
        }
        // One orbit walk per order: visiting all 2^n - 1 nonzero states
        // exactly once before closing pins the period for every seed at once.
        for order in table_orders().filter(|&n| n <= 16) {
            let cfg = LfsrConfig::max_length(order, 1).map_err(|e| e.to_string())?;
            let states = (1u64 << order) - 1;
            let walk =
                generate_sequence(&cfg, states as usize).map_err(|e| e.to_string())?;
            let mut seen = vec![false; 1usize << order];
            for &state in &walk {
                ensure!(state != 0, "order {order}: walk reached the stuck state");
                ensure!(
                    !seen[state as usize],
                    "order {order}: state {state:#x} revisited before the cycle closed"
                );
                seen[state as usize] = true;
            }
            let wrap = next_state(&cfg, *walk.last().unwrap()).map_err(|e| e.to_string())?;
            ensure!(
                wrap == cfg.seed(),
                "order {order}: orbit of length {states} does not close on the seed"
            );
        }
        ensure!(started.elapsed() < Duration::from_secs(60), "took over 60 seconds");
        Ok(())
    });
}

fn generate(definition: &str) -> Result<(ValidatedSpec, DesignBundle), String> {
    let spec =
        parse_benchdef(definition, &builtin_devices()).map_err(|e| e.to_string())?;
    let validated = validate_spec(spec).map_err(|e| e.to_string())?;
    let bundle = gen_design(&validated).map_err(|e| e.to_string())?;
    Ok((validated, bundle))
}

/// The generated header names the tool version; golden comparisons are
/// version-independent.
fn normalize(text: &str) -> String {
    let mut out = String::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if let Some(cut) = line.find("generated by icebench") {
                out.push_str(&line[..cut]);
                out.push_str("generated by icebench VERSION; do not edit.");
            } else {
                out.push_str(line);
            }
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

fn golden(name: &str) -> Result<String, String> {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))
}

struct Lut {
    name: String,
    init: String,
    o: String,
    i0: String,
    i1: String,
}

fn grab<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let rest = &line[line.find(tag)? + tag.len()..];
    Some(&rest[..rest.find(')')?])
}

fn parse_luts(verilog: &str) -> Vec<Lut> {
    verilog
        .lines()
        .filter(|line| line.trim_start().starts_with("SB_LUT4"))
        .map(|line| Lut {
            name: line.split_whitespace().nth(2).unwrap_or_default().to_string(),
            init: grab(line, "16'h").unwrap_or_default().to_string(),
            o: grab(line, ".O(").unwrap_or_default().to_string(),
            i0: grab(line, ".I0(").unwrap_or_default().to_string(),
            i1: grab(line, ".I1(").unwrap_or_default().to_string(),
        })
        .collect()
}

#[test]
fn criterion_4_generated_designs_are_faithful() {
    criterion(4, "grids match their golden netlists and ring loops close", || {
        for (cells, golden_name) in [(5000usize, "grid5000.v"), (1000, "grid1000.v")] {
            let definition = format!(
                "[benchmark]\nname = grid{cells}\nkind = lut_grid\ncells = {cells}\n\
                 [pins]\ninputs = 2,3,4,6\n"
            );
            let (_, bundle) = generate(&definition)?;
            let instances = bundle.verilog.matches("SB_LUT4").count();
            let keeps = bundle.verilog.matches("(* keep *)").count();
            ensure!(instances == cells, "{golden_name}: {instances} instances");
            ensure!(keeps == cells, "{golden_name}: {keeps} keep attributes");
            ensure!(bundle.manifest.cells.len() == cells, "{golden_name}: manifest cells");
            ensure!(
                normalize(&bundle.verilog) == normalize(&golden(golden_name)?),
                "{golden_name} drifted from the golden netlist"
            );
        }
        for (chains, outputs) in [(1u32, "9"), (2, "9,10"), (4, "9,10")] {
            let definition = format!(
                "[benchmark]\nname = o{chains}\nkind = ring_oscillator\ncells = 3000\n\
                 chains = {chains}\n[pins]\ninputs = 2\noutputs = {outputs}\n"
            );
            let (validated, bundle) = generate(&definition)?;
            let inverters = validated
                .inverters_per_chain
                .ok_or_else(|| format!("o{chains}: no inverter count"))?;
            ensure!(inverters % 2 == 1, "o{chains}: {inverters} inverters per chain is even");
            let total = validated.total_cells;
            ensure!(
                total <= 3000 && 3000 - total <= 4,
                "o{chains}: {total} cells is more than 4 below the 3000 budget"
            );
            let luts = parse_luts(&bundle.verilog);
            ensure!(luts.len() == total as usize, "o{chains}: {} instances", luts.len());
            let keeps = bundle.verilog.matches("(* keep *)").count();
            ensure!(keeps == total as usize, "o{chains}: {keeps} keep attributes");
            ensure!(
                bundle.manifest.chains.len() == chains as usize,
                "o{chains}: manifest chains"
            );

            let inverter_by_input: HashMap<&str, &Lut> = luts
                .iter()
                .filter(|lut| lut.init == "5555")
                .map(|lut| (lut.i0.as_str(), lut))
                .collect();
            ensure!(
                inverter_by_input.len() == (total - chains) as usize,
                "o{chains}: inverter input wires are not distinct"
            );
            let ands: Vec<&Lut> = luts.iter().filter(|lut| lut.init == "8888").collect();
            ensure!(ands.len() == chains as usize, "o{chains}: {} enable gates", ands.len());
            for (and, record) in ands.iter().zip(&bundle.manifest.chains) {
                ensure!(and.i0 == "ena", "{}: enable input reads {}", and.name, and.i0);
                ensure!(
                    record.inverters == inverters,
                    "{}: manifest says {} inverters",
                    and.name,
                    record.inverters
                );
                ensure!(
                    record.cells.len() == inverters as usize + 1,
                    "{}: manifest lists {} cells",
                    and.name,
                    record.cells.len()
                );
                let mut wire = and.o.as_str();
                let mut count = 0u32;
                while wire != and.i1 {
                    let inv = inverter_by_input
                        .get(wire)
                        .ok_or_else(|| format!("{}: loop breaks at wire {wire}", and.name))?;
                    count += 1;
                    wire = inv.o.as_str();
                    ensure!(count <= total, "{}: loop does not close", and.name);
                }
                ensure!(
                    count == inverters,
                    "{}: {count} inverters in the loop, expected {inverters}",
                    and.name
                );
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_5_chain_split_doubles_frequency_exactly() {
    criterion(5, "splitting the cell budget into 2x chains doubles the frequency exactly", || {
        for tau in [0.9e-9, 1.3e-9, 2.05e-9] {
            let f1 = estimate_ring_frequency(2999, tau, 1).map_err(|e| e.to_string())?;
            let f2 = estimate_ring_frequency(1499, tau, 2).map_err(|e| e.to_string())?;
            let f4 = estimate_ring_frequency(749, tau, 4).map_err(|e| e.to_string())?;
            ensure!(f2 == 2.0 * f1, "tau {tau}: f2 {f2} != 2*f1 {}", 2.0 * f1);
            ensure!(f4 == 2.0 * f2, "tau {tau}: f4 {f4} != 2*f2 {}", 2.0 * f2);
            ensure!(f4 == 4.0 * f1, "tau {tau}: f4 {f4} != 4*f1 {}", 4.0 * f1);
        }
        Ok(())
    });
}

struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

struct DumpSignal {
    id: char,
    width: u32,
    names: Vec<String>,
}

struct Dump {
    signals: Vec<DumpSignal>,
    initial: Vec<(usize, Vec<char>)>,
    /// (time, signal index, raw value chars), times nondecreasing.
    events: Vec<(u64, usize, Vec<char>)>,
    end_time: u64,
}

fn random_value(rng: &mut Rng, width: u32) -> Vec<char> {
    let len = 1 + rng.below(width as u64) as usize;
    (0..len)
        .map(|_| match rng.below(8) {
            6 => 'x',
            7 => 'z',
            k if k % 2 == 0 => '0',
            _ => '1',
        })
        .collect()
}

fn random_dump(rng: &mut Rng) -> Dump {
    let pool = ['!', '"', '#', '$', '%'];
    let nsignals = 1 + rng.below(pool.len() as u64) as usize;
    let mut signals: Vec<DumpSignal> = (0..nsignals)
        .map(|k| DumpSignal {
            id: pool[k],
            width: 1 + rng.below(8) as u32,
            names: vec![format!("top.s{k}")],
        })
        .collect();
    if rng.below(2) == 0 {
        let k = rng.below(nsignals as u64) as usize;
        let alias = format!("top.s{k}_alias");
        signals[k].names.push(alias);
    }
    let mut initial = Vec::new();
    for k in 0..nsignals {
        if rng.below(4) != 0 {
            let width = signals[k].width;
            initial.push((k, random_value(rng, width)));
        }
    }
    let count = 50 + rng.below(1950) as usize;
    let mut t = 0u64;
    let events = (0..count)
        .map(|_| {
            t += rng.below(4);
            let k = rng.below(nsignals as u64) as usize;
            let width = signals[k].width;
            (t, k, random_value(rng, width))
        })
        .collect();
    let end_time = t + 1 + rng.below(5);
    Dump { signals, initial, events, end_time }
}

fn push_change(out: &mut String, signal: &DumpSignal, value: &[char]) {
    let text: String = value.iter().collect();
    if signal.width == 1 {
        out.push_str(&format!("{text}{}\n", signal.id));
    } else {
        out.push_str(&format!("b{text} {}\n", signal.id));
    }
}

fn render_dump(dump: &Dump, timescale: &str, stamp_scale: u64) -> String {
    let mut out = format!("$timescale {timescale} $end\n$scope module top $end\n");
    for signal in &dump.signals {
        for name in &signal.names {
            let short = name.strip_prefix("top.").unwrap_or(name);
            out.push_str(&format!("$var wire {} {} {short} $end\n", signal.width, signal.id));
        }
    }
    out.push_str("$upscope $end\n$enddefinitions $end\n$dumpvars\n");
    for (k, value) in &dump.initial {
        push_change(&mut out, &dump.signals[*k], value);
    }
    out.push_str("$end\n");
    let mut last = None;
    for (t, k, value) in &dump.events {
        if last != Some(*t) {
            out.push_str(&format!("#{}\n", t * stamp_scale));
            last = Some(*t);
        }
        push_change(&mut out, &dump.signals[*k], value);
    }
    out.push_str(&format!("#{}\n", dump.end_time * stamp_scale));
    out
}

/// Dense replay of the abstract event list: per-bit levels, left-extension
/// (x/z propagate, anything else pads zero), unknowns neither toggle nor
/// clear a known level.
fn apply_reference(levels: &mut [Option<bool>], toggles: &mut u64, value: &[char]) {
    let width = levels.len();
    let pad = match value.first() {
        Some('x') => 'x',
        Some('z') => 'z',
        _ => '0',
    };
    for (slot, stored) in levels.iter_mut().enumerate() {
        let ch = if slot < width - value.len() {
            pad
        } else {
            value[slot - (width - value.len())]
        };
        let new = match ch {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        };
        if let Some(level) = new {
            match *stored {
                Some(old) if old != level => {
                    *toggles += 1;
                    *stored = Some(level);
                }
                Some(_) => {}
                None => *stored = Some(level),
            }
        }
    }
}

fn reference_counts(dump: &Dump) -> BTreeMap<String, u64> {
    let mut levels: Vec<Vec<Option<bool>>> = dump
        .signals
        .iter()
        .map(|signal| vec![None; signal.width as usize])
        .collect();
    let mut toggles = vec![0u64; dump.signals.len()];
    for (k, value) in &dump.initial {
        apply_reference(&mut levels[*k], &mut toggles[*k], value);
    }
    for (_, k, value) in &dump.events {
        apply_reference(&mut levels[*k], &mut toggles[*k], value);
    }
    let mut counts = BTreeMap::new();
    for (k, signal) in dump.signals.iter().enumerate() {
        for name in &signal.names {
            counts.insert(name.clone(), toggles[k]);
        }
    }
    counts
}

#[test]
fn criterion_6_activity_counts_match_dense_replay() {
    criterion(6, "toggle counts equal a dense replay on randomized dumps", || {
        let mut rng = Rng(0x1ce4_0bed_f00d_5eed);
        for round in 0..100 {
            let dump = random_dump(&mut rng);
            let text = render_dump(&dump, "1us", 1);
            let parsed = parse_vcd(&text).map_err(|e| format!("round {round}: {e}"))?;
            let got = parsed.toggle_counts();
            let want = reference_counts(&dump);
            ensure!(got == want, "round {round}: {got:?} differs from replay {want:?}");
        }
        // The same dump expressed at 1 us per tick and at 10 ns per tick
        // with stamps scaled x100 must report the same rates.
        let dump = random_dump(&mut rng);
        let coarse = activation_rates(
            &parse_vcd(&render_dump(&dump, "1us", 1)).map_err(|e| e.to_string())?,
            200,
        )
        .map_err(|e| e.to_string())?;
        let fine = activation_rates(
            &parse_vcd(&render_dump(&dump, "10ns", 100)).map_err(|e| e.to_string())?,
            200,
        )
        .map_err(|e| e.to_string())?;
        ensure!(coarse.signals.len() == fine.signals.len(), "row counts differ");
        for (a, b) in coarse.signals.iter().zip(&fine.signals) {
            ensure!(a.signal == b.signal, "row order differs");
            ensure!(a.toggles == b.toggles, "{}: toggle totals differ", a.signal);
            ensure!(
                rel_diff(a.rate_hz, b.rate_hz) <= 1e-12,
                "{}: rates {} vs {} beyond 1e-12",
                a.signal,
                a.rate_hz,
                b.rate_hz
            );
            ensure!(
                rel_diff(a.toggles_per_step, b.toggles_per_step) <= 1e-12,
                "{}: per-step activity {} vs {} beyond 1e-12",
                a.signal,
                a.toggles_per_step,
                b.toggles_per_step
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_7_synthetic_round_trip_separates_the_two_laws() {
    criterion(7, "detection and correlation recover which amplitude law was synthesized", || {
        let started = Instant::now();
        let cfg = LfsrConfig::max_length(4, 1).map_err(|e| e.to_string())?;
        let timing = StimulusTiming { lead_us: 100, interval_us: 200 };
        let schedule =
            build_schedule(&cfg, timing, 4, None, 15).map_err(|e| e.to_string())?;
        let volts_per_unit = 1e-3;
        let mut synth = SynthesisConfig::new(2e-6, volts_per_unit / 100.0);
        synth.seed = 21;
        for per_high in [true, false] {
            let model = if per_high {
                SpikeModel::PerInputsHigh { volts_per_input: volts_per_unit }
            } else {
                SpikeModel::PerInputsToggled { volts_per_toggle: volts_per_unit }
            };
            let trace =
                synthesize_trace(&schedule, &model, &synth).map_err(|e| e.to_string())?;
            let events = detect_spikes(&trace, &schedule, 0.25).map_err(|e| e.to_string())?;
            ensure!(events.len() == 15, "{} events detected, expected 15", events.len());
            let report = correlate_spikes(&events).map_err(|e| e.to_string())?;
            if per_high {
                ensure!(report.r_high > 0.99, "r_high {} below 0.99", report.r_high);
                ensure!(
                    report.r_toggle.abs() < report.r_high,
                    "per-high synthesis: |r_toggle| {} not below r_high {}",
                    report.r_toggle.abs(),
                    report.r_high
                );
            } else {
                ensure!(report.r_toggle > 0.99, "r_toggle {} below 0.99", report.r_toggle);
                ensure!(
                    report.r_high.abs() < report.r_toggle,
                    "per-toggle synthesis: |r_high| {} not below r_toggle {}",
                    report.r_high.abs(),
                    report.r_toggle
                );
            }
        }
        ensure!(started.elapsed() < Duration::from_secs(10), "took over 10 seconds");
        Ok(())
    });
}

#[test]
fn criterion_8_additive_fit_recovers_noiseless_lines() {
    criterion(8, "the additive fit recovers noiseless lines and reports flat power as zero per cell", || {
        for (p0, p_cell) in [(0.015, 1.1e-6), (0.2, 3.4e-5)] {
            let points: Vec<(u32, f64)> = [100u32, 500, 1000, 2000, 5000]
                .iter()
                .map(|&n| (n, p0 + p_cell * n as f64))
                .collect();
            let fit = fit_additive_model(&points).map_err(|e| e.to_string())?;
            ensure!(
                rel_diff(fit.p0_w, p0) <= 1e-9,
                "p0 {} vs {p0} beyond 1e-9 relative",
                fit.p0_w
            );
            ensure!(
                rel_diff(fit.p_cell_w, p_cell) <= 1e-9,
                "p_cell {} vs {p_cell} beyond 1e-9 relative",
                fit.p_cell_w
            );
        }
        let flat: Vec<(u32, f64)> =
            [100u32, 1000, 2000, 5000].iter().map(|&n| (n, 0.0271)).collect();
        let fit = fit_additive_model(&flat).map_err(|e| e.to_string())?;
        ensure!(
            fit.p_cell_w.abs() < 1e-12,
            "flat measurements fit a per-cell share of {} W",
            fit.p_cell_w
        );
        ensure!(
            rel_diff(fit.p0_w, 0.0271) <= 1e-9,
            "flat baseline {} vs 0.0271",
            fit.p0_w
        );
        Ok(())
    });
}

#[test]
fn criterion_9_synthetic_traces_stand_in_for_bench_capture() {
    criterion(9, "bench-hardware figures are out of desk reach; seeded synthetic ground truth stands in", || {
        // The published trace figures need an iCE40 board, shunt rig and
        // oscilloscope; nothing in this repository can reproduce them.
        // What ships instead: detection, correlation and fitting are
        // accepted against synthesized traces with known ground truth
        // (criteria 6 through 8). That substitution is only sound if the
        // synthesizer is deterministic per seed, so pin that here.
        let cfg = LfsrConfig::max_length(4, 1).map_err(|e| e.to_string())?;
        let timing = StimulusTiming { lead_us: 100, interval_us: 200 };
        let schedule =
            build_schedule(&cfg, timing, 4, None, 15).map_err(|e| e.to_string())?;
        let model = SpikeModel::PerInputsToggled { volts_per_toggle: 2e-3 };
        let mut synth = SynthesisConfig::new(2e-6, 1e-5);
        synth.seed = 5;
        let first = synthesize_trace(&schedule, &model, &synth).map_err(|e| e.to_string())?;
        let second =
            synthesize_trace(&schedule, &model, &synth).map_err(|e| e.to_string())?;
        ensure!(first == second, "same seed produced different traces");
        synth.seed = 6;
        let other = synthesize_trace(&schedule, &model, &synth).map_err(|e| e.to_string())?;
        ensure!(
            first.core.volts != other.core.volts,
            "noise ignores the seed; traces cannot be told apart"
        );
        Ok(())
    });
}
