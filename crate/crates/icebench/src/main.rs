use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icebench::cli::{
    cmd_activity, cmd_gen, cmd_lfsr, cmd_power_analyze, cmd_power_fit, cmd_power_quantization,
    cmd_power_ringfreq, cmd_power_validate_amp, cmd_tb, AnalyzeOptions, CliError, LfsrOptions,
    QuantizationOptions, RingfreqOptions, RunManifest, TbOptions, ValidateAmpOptions,
};

#[derive(Parser)]
#[command(
    name = "icebench",
    version,
    about = "Generate iCE40 power micro-benchmarks and analyze their measurements"
)]
struct Cli {
    /// Directory generated files are written into.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Suppress progress lines on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Initial register state for LFSR-driven subcommands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate netlist, pin constraints, and design manifest from a
    /// benchmark definition file.
    Gen {
        /// Benchmark definition file.
        benchdef: PathBuf,
        /// Extra device geometry file to add to the built-in table.
        #[arg(long)]
        device_file: Option<PathBuf>,
    },
    /// Generate testbench, stimulus schedule, and simulator driver from a
    /// design manifest.
    Tb {
        /// Design manifest written by `gen`.
        manifest: PathBuf,
        /// Register order; defaults to the stimulated input count.
        #[arg(long)]
        order: Option<u32>,
        /// Feedback taps, comma-separated; defaults to the built-in table.
        #[arg(long, value_delimiter = ',')]
        taps: Option<Vec<u32>>,
        /// Register bits (1 = LSB) projected onto the inputs, MSB first;
        /// defaults to the top bits.
        #[arg(long, value_delimiter = ',')]
        bits: Option<Vec<u32>>,
        /// Stimulus step count; defaults to the full period.
        #[arg(long)]
        steps: Option<u64>,
        /// Delay before the first step, in microseconds.
        #[arg(long, default_value_t = 100)]
        lead_us: u64,
        /// Step interval in microseconds.
        #[arg(long, default_value_t = 100)]
        interval_us: u64,
    },
    /// Print LFSR state sequences as hex, or the feedback tap table.
    Lfsr {
        /// Register order (bit width).
        #[arg(long)]
        order: Option<u32>,
        /// Feedback taps, comma-separated; defaults to the built-in table.
        #[arg(long, value_delimiter = ',')]
        taps: Option<Vec<u32>>,
        /// Number of states to print; defaults to the full period.
        #[arg(long)]
        steps: Option<u64>,
        /// Print the tap table as CSV instead of a sequence.
        #[arg(long)]
        table: bool,
    },
    /// Count toggles in a simulation VCD and report activation rates.
    Activity {
        /// VCD file from the simulator run.
        vcd: PathBuf,
        /// Stimulus schedule CSV; defines the per-step interval.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Step interval in microseconds, as an alternative to --schedule.
        #[arg(long)]
        interval_us: Option<u64>,
    },
    /// Analyze measurement data from the shunt-current setup.
    Power {
        #[command(subcommand)]
        command: PowerCommand,
    },
    #[command(hide = true)]
    SelftestPanic,
}

#[derive(Subcommand)]
enum PowerCommand {
    /// Detect per-step current spikes in an oscilloscope trace and
    /// correlate their amplitudes against the stimulus walk.
    Analyze {
        /// Oscilloscope CSV export (time plus role-tagged channels).
        #[arg(long)]
        trace: PathBuf,
        /// Stimulus schedule CSV driving the capture.
        #[arg(long)]
        schedule: PathBuf,
        /// Core-rail shunt resistance in ohms.
        #[arg(long)]
        shunt_core: f64,
        /// IO-rail shunt resistance in ohms (unity-gain subtraction).
        #[arg(long)]
        shunt_io: Option<f64>,
        /// Core-channel amplifier gain.
        #[arg(long, default_value_t = 500.0)]
        gain: f64,
        /// Nominal core voltage in volts.
        #[arg(long)]
        vcore: f64,
        /// Search window around each expected spike, as a fraction of the
        /// step interval (at most 0.5).
        #[arg(long, default_value_t = 0.4)]
        window_fraction: f64,
    },
    /// Check bench amplifier measurements against gain times the measured
    /// differential input.
    ValidateAmp {
        /// CSV of measurements with header `u_out_v,u_diff_mv`.
        #[arg(long)]
        rows: PathBuf,
        /// Amplifier gain.
        #[arg(long, default_value_t = 500.0)]
        gain: f64,
        /// Bench supply voltage in volts.
        #[arg(long, default_value_t = 3.3)]
        supply: f64,
        /// Load resistance in ohms.
        #[arg(long, default_value_t = 33000.0)]
        r_load: f64,
        /// Shunt resistance in ohms.
        #[arg(long, default_value_t = 10.0)]
        r_shunt: f64,
    },
    /// Report ADC resolution limits for a shunt channel.
    Quantization {
        /// ADC resolution in bits.
        #[arg(long)]
        bits: u32,
        /// ADC reference voltage in volts.
        #[arg(long)]
        vref: f64,
        /// Shunt resistance in ohms.
        #[arg(long)]
        shunt: f64,
        /// Amplifier gain ahead of the ADC; direct sensing when omitted.
        #[arg(long)]
        gain: Option<f64>,
    },
    /// Fit mean power against cell count as P(n) = p0 + n*p_cell.
    Fit {
        /// CSV of points with header `cells,power_w`.
        #[arg(long)]
        points: PathBuf,
    },
    /// Estimate the per-chain ring-oscillator frequency.
    Ringfreq {
        /// Inverters per chain (must be odd).
        #[arg(long)]
        inverters: u32,
        /// Per-gate delay in nanoseconds.
        #[arg(long)]
        tau_ns: f64,
        /// Number of parallel chains.
        #[arg(long, default_value_t = 1)]
        chains: u32,
    },
}

fn report_run(quiet: bool, run: &RunManifest) {
    if quiet {
        return;
    }
    for output in &run.outputs {
        println!("wrote {output}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { benchdef, device_file } => {
            let run = cmd_gen(&benchdef, device_file.as_deref(), &cli.out_dir)?;
            report_run(cli.quiet, &run);
        }
        Command::Tb { manifest, order, taps, bits, steps, lead_us, interval_us } => {
            let options =
                TbOptions { order, taps, seed: cli.seed, bits, steps, lead_us, interval_us };
            let run = cmd_tb(&manifest, &options, &cli.out_dir)?;
            report_run(cli.quiet, &run);
        }
        Command::Lfsr { order, taps, steps, table } => {
            let options = LfsrOptions { table, order, taps, seed: cli.seed, steps };
            print!("{}", cmd_lfsr(&options)?);
        }
        Command::Activity { vcd, schedule, interval_us } => {
            let run = cmd_activity(&vcd, schedule.as_deref(), interval_us, &cli.out_dir)?;
            report_run(cli.quiet, &run);
        }
        Command::Power { command } => match command {
            PowerCommand::Analyze {
                trace,
                schedule,
                shunt_core,
                shunt_io,
                gain,
                vcore,
                window_fraction,
            } => {
                let options = AnalyzeOptions {
                    shunt_core_ohm: shunt_core,
                    shunt_io_ohm: shunt_io,
                    gain,
                    vcore_v: vcore,
                    window_fraction,
                };
                let (run, summary) =
                    cmd_power_analyze(&trace, &schedule, &options, &cli.out_dir)?;
                if !cli.quiet {
                    println!(
                        "samples: {}  trigger at {:.6e} s",
                        summary.samples, summary.trigger_time_s
                    );
                    println!("events: {}", summary.event_count);
                    match (&summary.correlation, &summary.correlation_note) {
                        (Some(c), _) => {
                            println!(
                                "r_high = {:.4}  slope_high = {:.4e} V/input",
                                c.r_high, c.slope_high
                            );
                            println!(
                                "r_toggle = {:.4}  slope_toggle = {:.4e} V/toggle",
                                c.r_toggle, c.slope_toggle
                            );
                        }
                        (None, Some(note)) => println!("correlation unavailable: {note}"),
                        (None, None) => {}
                    }
                    println!("mean power = {:.6e} W", summary.mean_power_w);
                }
                report_run(cli.quiet, &run);
            }
            PowerCommand::ValidateAmp { rows, gain, supply, r_load, r_shunt } => {
                let options = ValidateAmpOptions {
                    gain,
                    u_supply_v: supply,
                    r_load_ohm: r_load,
                    r_shunt_ohm: r_shunt,
                };
                let (run, table) = cmd_power_validate_amp(&rows, &options, &cli.out_dir)?;
                if !cli.quiet {
                    for row in &table {
                        println!(
                            "U_out = {:.3} V  U_amp_calc = {:.3} V  e_rel = {:.2}%",
                            row.u_out_v, row.u_amp_calc_v, row.e_rel_pct
                        );
                    }
                }
                report_run(cli.quiet, &run);
            }
            PowerCommand::Quantization { bits, vref, shunt, gain } => {
                let options = QuantizationOptions {
                    adc_bits: bits,
                    vref_v: vref,
                    shunt_ohm: shunt,
                    gain,
                };
                let (run, report) = cmd_power_quantization(&options, &cli.out_dir)?;
                if !cli.quiet {
                    println!(
                        "lsb = {:.6e} V  minimum resolvable current = {:.6e} A",
                        report.lsb_v, report.min_current_a
                    );
                }
                report_run(cli.quiet, &run);
            }
            PowerCommand::Fit { points } => {
                let (run, fit) = cmd_power_fit(&points, &cli.out_dir)?;
                if !cli.quiet {
                    println!(
                        "p0 = {:.6e} W  p_cell = {:.6e} W  residual rms = {:.6e} W",
                        fit.p0_w, fit.p_cell_w, fit.residual_rms
                    );
                }
                report_run(cli.quiet, &run);
            }
            PowerCommand::Ringfreq { inverters, tau_ns, chains } => {
                let options = RingfreqOptions { inverters, tau_ns, chains };
                let (run, report) = cmd_power_ringfreq(&options, &cli.out_dir)?;
                if !cli.quiet {
                    println!(
                        "f = {:.6e} Hz per chain ({} chains)",
                        report.frequency_hz, report.chains
                    );
                }
                report_run(cli.quiet, &run);
            }
        },
        Command::SelftestPanic => panic!("selftest panic requested"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    panic::set_hook(Box::new(|_| {}));
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .copied()
                .or_else(|| payload.downcast_ref::<String>().map(String::as_str))
                .unwrap_or("unknown panic");
            eprintln!("internal error: {message}");
            ExitCode::from(3)
        }
    }
}
