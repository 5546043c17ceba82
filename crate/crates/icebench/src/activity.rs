//! Switching-activity extraction from VCD waveform dumps.
//!
//! The parser covers the subset emitted by event-driven simulators:
//! header commands (`$timescale`, `$scope`, `$var`, `$upscope`,
//! `$enddefinitions`), `#` timestamps, scalar and binary vector changes,
//! and `$dumpvars` blocks. Counts are transitions between defined logic
//! levels per bit; x/z excursions neither count nor reset the level, so
//! the result is the zero-delay lower bound on real switching.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ActivityError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: value change before $enddefinitions")]
    ChangeBeforeEnddefinitions { line: usize },
    #[error("line {line}: value change before any timestamp")]
    ChangeBeforeTimestamp { line: usize },
    #[error("line {line}: change for undeclared signal id `{id}`")]
    UnknownSignal { line: usize, id: String },
    #[error("line {line}: duplicate $timescale")]
    DuplicateTimescale { line: usize },
    #[error("line {line}: $upscope without matching $scope")]
    UnbalancedScope { line: usize },
    #[error("line {line}: timestamp {got} precedes {prev}")]
    NonMonotonicTime { line: usize, prev: u64, got: u64 },
    #[error("line {line}: vector value has {got} bits for {width}-bit signal `{id}`")]
    VectorTooWide { line: usize, id: String, width: u32, got: usize },
    #[error("dump carries no $timescale; cannot convert ticks to seconds")]
    MissingTimescale,
    #[error("dump spans zero time")]
    ZeroDuration,
    #[error("stimulus interval must be at least 1 us")]
    ZeroInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalActivity {
    pub name: String,
    pub width: u32,
    pub toggles: u64,
}

/// Toggle totals and the time span of one dump.
#[derive(Debug, Clone, PartialEq)]
pub struct VcdActivity {
    /// Seconds per VCD time tick, when the header declared a timescale.
    pub seconds_per_tick: Option<f64>,
    pub timescale_text: Option<String>,
    /// Declared signals in declaration order, names scope-qualified.
    /// Aliased declarations (several names, one id) each get a row with
    /// the shared count.
    pub signals: Vec<SignalActivity>,
    /// First and last timestamp seen, in ticks.
    pub span: Option<(u64, u64)>,
}

impl VcdActivity {
    pub fn duration_seconds(&self) -> Result<f64, ActivityError> {
        let scale = self.seconds_per_tick.ok_or(ActivityError::MissingTimescale)?;
        let (t0, t1) = self.span.ok_or(ActivityError::ZeroDuration)?;
        if t1 == t0 {
            return Err(ActivityError::ZeroDuration);
        }
        Ok((t1 - t0) as f64 * scale)
    }

    pub fn toggle_counts(&self) -> BTreeMap<String, u64> {
        self.signals
            .iter()
            .map(|s| (s.name.clone(), s.toggles))
            .collect()
    }
}

struct SignalState {
    width: u32,
    /// Last defined level per bit, MSB first; `None` until first 0/1.
    levels: Vec<Option<bool>>,
    toggles: u64,
}

struct Parser {
    in_header: bool,
    scopes: Vec<String>,
    seconds_per_tick: Option<f64>,
    timescale_text: Option<String>,
    declarations: Vec<(String, String, u32)>,
    states: HashMap<String, SignalState>,
    time: Option<u64>,
    span: Option<(u64, u64)>,
    in_dump_block: bool,
    command: Option<(String, Vec<String>, usize)>,
    /// A `b...` value waiting for its id token (the pair is whitespace
    /// separated, so the parser needs one slot of lookahead).
    pending_vector: Option<(Vec<char>, usize)>,
}

fn timescale_seconds(args: &[String], line: usize) -> Result<(f64, String), ActivityError> {
    let text = args.join("");
    let split = text
        .find(|c: char| !c.is_ascii_digit())
        .ok_or(ActivityError::Malformed {
            line,
            msg: format!("unparseable timescale `{text}`"),
        })?;
    let (mag_str, unit) = text.split_at(split);
    let magnitude: f64 = mag_str.parse().map_err(|_| ActivityError::Malformed {
        line,
        msg: format!("unparseable timescale `{text}`"),
    })?;
    if ![1.0, 10.0, 100.0].contains(&magnitude) {
        return Err(ActivityError::Malformed {
            line,
            msg: format!("timescale magnitude must be 1, 10 or 100, got {mag_str}"),
        });
    }
    let unit_factor = match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" => 1e-6,
        "ns" => 1e-9,
        "ps" => 1e-12,
        "fs" => 1e-15,
        other => {
            return Err(ActivityError::Malformed {
                line,
                msg: format!("unknown timescale unit `{other}`"),
            })
        }
    };
    Ok((magnitude * unit_factor, text))
}

impl Parser {
    fn new() -> Self {
        Self {
            in_header: true,
            scopes: Vec::new(),
            seconds_per_tick: None,
            timescale_text: None,
            declarations: Vec::new(),
            states: HashMap::new(),
            time: None,
            span: None,
            in_dump_block: false,
            command: None,
            pending_vector: None,
        }
    }

    fn touch_time(&mut self, t: u64) {
        self.span = Some(match self.span {
            None => (t, t),
            Some((lo, hi)) => (lo.min(t), hi.max(t)),
        });
    }

    fn finish_command(&mut self) -> Result<(), ActivityError> {
        let (keyword, args, line) = self.command.take().expect("open command");
        match keyword.as_str() {
            "timescale" => {
                if self.seconds_per_tick.is_some() {
                    return Err(ActivityError::DuplicateTimescale { line });
                }
                let (scale, text) = timescale_seconds(&args, line)?;
                self.seconds_per_tick = Some(scale);
                self.timescale_text = Some(text);
            }
            "scope" => {
                let name = args.get(1).ok_or(ActivityError::Malformed {
                    line,
                    msg: "$scope needs a type and a name".into(),
                })?;
                self.scopes.push(name.clone());
            }
            "upscope" => {
                if self.scopes.pop().is_none() {
                    return Err(ActivityError::UnbalancedScope { line });
                }
            }
            "var" => {
                if args.len() < 4 {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: "$var needs type, width, id and name".into(),
                    });
                }
                let width: u32 = args[1].parse().map_err(|_| ActivityError::Malformed {
                    line,
                    msg: format!("`{}` is not a signal width", args[1]),
                })?;
                if width == 0 {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: "zero-width signal".into(),
                    });
                }
                let id = args[2].clone();
                let mut name = self.scopes.join(".");
                if !name.is_empty() {
                    name.push('.');
                }
                name.push_str(&args[3]);
                match self.states.get(&id) {
                    Some(state) if state.width != width => {
                        return Err(ActivityError::Malformed {
                            line,
                            msg: format!(
                                "id `{id}` redeclared with width {width} (was {})",
                                state.width
                            ),
                        });
                    }
                    Some(_) => {}
                    None => {
                        self.states.insert(
                            id.clone(),
                            SignalState {
                                width,
                                levels: vec![None; width as usize],
                                toggles: 0,
                            },
                        );
                    }
                }
                self.declarations.push((name, id, width));
            }
            "enddefinitions" => {
                if !self.in_header {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: "duplicate $enddefinitions".into(),
                    });
                }
                self.in_header = false;
            }
            "comment" | "date" | "version" => {}
            other => {
                return Err(ActivityError::Malformed {
                    line,
                    msg: format!("unsupported command `${other}`"),
                })
            }
        }
        Ok(())
    }

    fn apply_bits(&mut self, id: &str, bits: &[char], line: usize) -> Result<(), ActivityError> {
        if self.in_header {
            return Err(ActivityError::ChangeBeforeEnddefinitions { line });
        }
        if self.time.is_none() {
            if self.in_dump_block {
                // An initial-values block opens the dump at time zero.
                self.time = Some(0);
                self.touch_time(0);
            } else {
                return Err(ActivityError::ChangeBeforeTimestamp { line });
            }
        }
        let state = self
            .states
            .get_mut(id)
            .ok_or_else(|| ActivityError::UnknownSignal { line, id: id.to_string() })?;
        let width = state.width as usize;
        if bits.len() > width {
            return Err(ActivityError::VectorTooWide {
                line,
                id: id.to_string(),
                width: state.width,
                got: bits.len(),
            });
        }
        // Left-extension: x and z propagate, anything else pads with 0.
        let pad = match bits.first() {
            Some('x') => 'x',
            Some('z') => 'z',
            _ => '0',
        };
        for slot in 0..width {
            let ch = if slot < width - bits.len() {
                pad
            } else {
                bits[slot - (width - bits.len())]
            };
            let new = match ch {
                '0' => Some(false),
                '1' => Some(true),
                'x' | 'z' => None,
                other => {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: format!("invalid logic value `{other}`"),
                    })
                }
            };
            if let Some(level) = new {
                match state.levels[slot] {
                    Some(old) if old != level => {
                        state.toggles += 1;
                        state.levels[slot] = Some(level);
                    }
                    Some(_) => {}
                    None => state.levels[slot] = Some(level),
                }
            }
        }
        Ok(())
    }

    fn token(&mut self, tok: &str, line: usize) -> Result<(), ActivityError> {
        if self.command.is_some() {
            if tok == "$end" {
                self.finish_command()?;
            } else if let Some((_, args, _)) = &mut self.command {
                args.push(tok.to_string());
            }
            return Ok(());
        }
        if tok == "$end" && self.in_dump_block {
            self.in_dump_block = false;
            return Ok(());
        }
        if let Some(keyword) = tok.strip_prefix('$') {
            match keyword {
                "dumpvars" | "dumpall" | "dumpon" | "dumpoff" => {
                    if self.in_header {
                        return Err(ActivityError::ChangeBeforeEnddefinitions { line });
                    }
                    self.in_dump_block = true;
                }
                _ => self.command = Some((keyword.to_string(), Vec::new(), line)),
            }
            return Ok(());
        }
        if let Some(stamp) = tok.strip_prefix('#') {
            if self.in_header {
                return Err(ActivityError::ChangeBeforeEnddefinitions { line });
            }
            let t: u64 = stamp.parse().map_err(|_| ActivityError::Malformed {
                line,
                msg: format!("unparseable timestamp `{tok}`"),
            })?;
            if let Some(prev) = self.time {
                if t < prev {
                    return Err(ActivityError::NonMonotonicTime { line, prev, got: t });
                }
            }
            self.time = Some(t);
            self.touch_time(t);
            return Ok(());
        }
        let mut chars = tok.chars();
        let first = chars.next().ok_or(ActivityError::Malformed {
            line,
            msg: "empty token".into(),
        })?;
        match first.to_ascii_lowercase() {
            'b' => {
                let bits: Vec<char> = chars.map(|c| c.to_ascii_lowercase()).collect();
                if bits.is_empty() {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: "vector value with no bits".into(),
                    });
                }
                // Id arrives as the next token; stash the bits until then.
                self.pending_vector = Some((bits, line));
            }
            'r' => {
                return Err(ActivityError::Malformed {
                    line,
                    msg: "real-valued signals are not supported".into(),
                })
            }
            '0' | '1' | 'x' | 'z' => {
                let id: String = chars.collect();
                if id.is_empty() {
                    return Err(ActivityError::Malformed {
                        line,
                        msg: format!("scalar change `{tok}` has no id"),
                    });
                }
                self.apply_bits(&id, &[first.to_ascii_lowercase()], line)?;
            }
            _ => {
                return Err(ActivityError::Malformed {
                    line,
                    msg: format!("unrecognized token `{tok}`"),
                })
            }
        }
        Ok(())
    }
}

/// Parse a VCD dump and count per-bit toggles for every declared signal.
pub fn parse_vcd(text: &str) -> Result<VcdActivity, ActivityError> {
    let mut parser = Parser::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        for tok in raw.split_ascii_whitespace() {
            // The token after `b<value>` is the identifier code, whatever
            // it looks like: id codes may legally start with `#` or `$`.
            if let Some((bits, _)) = parser.pending_vector.take() {
                parser.apply_bits(tok, &bits, line)?;
                continue;
            }
            parser.token(tok, line)?;
        }
    }
    if let Some((_, _, line)) = parser.command {
        return Err(ActivityError::Malformed {
            line,
            msg: "unterminated command".into(),
        });
    }
    if parser.pending_vector.is_some() {
        return Err(ActivityError::Malformed {
            line: text.lines().count(),
            msg: "vector value without a signal id".into(),
        });
    }
    let signals = parser
        .declarations
        .iter()
        .map(|(name, id, width)| SignalActivity {
            name: name.clone(),
            width: *width,
            toggles: parser.states[id].toggles,
        })
        .collect();
    Ok(VcdActivity {
        seconds_per_tick: parser.seconds_per_tick,
        timescale_text: parser.timescale_text,
        signals,
        span: parser.span,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub signal: String,
    pub toggles: u64,
    pub rate_hz: f64,
    pub toggles_per_step: f64,
}

/// Per-signal activity normalized two ways: absolute toggle rate over the
/// dump, and toggles per stimulus step for cross-run comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityReport {
    /// Counting method; always the zero-delay lower bound (no propagation
    /// delays, so glitch activity on real silicon can only be higher).
    pub method: String,
    pub duration_seconds: f64,
    pub interval_us: u64,
    pub signals: Vec<ReportRow>,
}

pub fn activation_rates(
    activity: &VcdActivity,
    interval_us: u64,
) -> Result<ActivityReport, ActivityError> {
    if interval_us == 0 {
        return Err(ActivityError::ZeroInterval);
    }
    let duration = activity.duration_seconds()?;
    let step_seconds = interval_us as f64 * 1e-6;
    let mut rows: Vec<ReportRow> = activity
        .signals
        .iter()
        .map(|s| ReportRow {
            signal: s.name.clone(),
            toggles: s.toggles,
            rate_hz: s.toggles as f64 / duration,
            toggles_per_step: s.toggles as f64 * step_seconds / duration,
        })
        .collect();
    rows.sort_by(|a, b| a.signal.cmp(&b.signal));
    Ok(ActivityReport {
        method: "zero-delay lower bound".to_string(),
        duration_seconds: duration,
        interval_us,
        signals: rows,
    })
}

pub fn report_to_csv(report: &ActivityReport) -> String {
    let mut out = String::from("signal,toggles,rate_hz,toggles_per_step\n");
    for row in &report.signals {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.signal, row.toggles, row.rate_hz, row.toggles_per_step
        ));
    }
    out
}

pub fn report_to_json(report: &ActivityReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
