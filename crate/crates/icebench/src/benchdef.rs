//! Benchmark definition files: parsing, validation and placement expansion.
//!
//! A definition file is line-oriented `key = value` text in three sections
//! (`[benchmark]`, `[placement]`, `[pins]`). Parsing resolves the device
//! name against a geometry table, validation settles the kind-specific
//! arithmetic (capacity, pin arity, odd ring-chain lengths), and placement
//! expansion turns a strategy into concrete per-cell grid locations.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BenchdefError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key: {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key: {key}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value for {key}: {msg}")]
    InvalidValue { line: usize, key: String, msg: String },
    #[error("missing required key: {0}")]
    MissingKey(&'static str),
    #[error("unknown device name: {0}")]
    UnknownDevice(String),
    #[error("duplicate pin: {0}")]
    DuplicatePin(String),
    #[error("invalid device geometry: {0}")]
    InvalidGeometry(String),
    #[error("{kind} requires exactly {expected} input pin(s), got {got}")]
    InputPinArity { kind: BenchKind, expected: usize, got: usize },
    #[error("ring_oscillator allows at most one output pin per chain ({chains}), got {got}")]
    OutputPinArity { chains: u32, got: usize },
    #[error("cell count {needed} exceeds device capacity {available}")]
    CapacityExceeded { needed: u64, available: u64 },
    #[error("cannot form {chains} chains from {cells} cells")]
    ChainsExceedCells { cells: u32, chains: u32 },
    #[error("placement constraints are not supported for ring_oscillator")]
    RingPlacement,
    #[error("cell count must be at least 1")]
    ZeroCells,
    #[error("chain count must be at least 1")]
    ZeroChains,
    #[error("fixed placement list length {got} does not match cell count {expected}")]
    FixedListLength { expected: u32, got: usize },
    #[error("region ({},{})-({},{}) extends outside the device grid", .0.x0, .0.y0, .0.x1, .0.y1)]
    RegionOutsideGrid(Region),
    #[error("region capacity {available} insufficient for {needed} cells")]
    RegionCapacity { needed: u32, available: u64 },
    #[error("duplicate placement location {0}")]
    DuplicateLocation(BelLocation),
    #[error("location {0} outside device geometry")]
    LocationOutOfRange(BelLocation),
    #[error("placement mode is unconstrained; nothing to expand")]
    UnconstrainedPlacement,
}

/// Logic-cell grid of one device. Tile coordinates run `0..grid_width` by
/// `0..grid_height`; tiles listed in `excluded_tiles` hold no logic cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub name: String,
    pub grid_width: u32,
    pub grid_height: u32,
    pub cells_per_tile: u32,
    pub excluded_tiles: BTreeSet<(u32, u32)>,
}

impl DeviceGeometry {
    pub fn new(
        name: impl Into<String>,
        grid_width: u32,
        grid_height: u32,
        cells_per_tile: u32,
        excluded_tiles: BTreeSet<(u32, u32)>,
    ) -> Result<Self, BenchdefError> {
        if grid_width == 0 || grid_height == 0 {
            return Err(BenchdefError::InvalidGeometry(
                "grid dimensions must be positive".into(),
            ));
        }
        if cells_per_tile == 0 {
            return Err(BenchdefError::InvalidGeometry(
                "cells_per_tile must be at least 1".into(),
            ));
        }
        if let Some(&(x, y)) = excluded_tiles
            .iter()
            .find(|&&(x, y)| x >= grid_width || y >= grid_height)
        {
            return Err(BenchdefError::InvalidGeometry(format!(
                "excluded tile ({x},{y}) outside {grid_width}x{grid_height} grid"
            )));
        }
        Ok(Self {
            name: name.into(),
            grid_width,
            grid_height,
            cells_per_tile,
            excluded_tiles,
        })
    }

    pub fn contains(&self, loc: &BelLocation) -> bool {
        loc.x < self.grid_width
            && loc.y < self.grid_height
            && loc.lc < self.cells_per_tile
            && !self.excluded_tiles.contains(&(loc.x, loc.y))
    }

    /// Total logic cells on the device, excluded tiles removed.
    pub fn usable_cells(&self) -> u64 {
        let tiles =
            u64::from(self.grid_width) * u64::from(self.grid_height) - self.excluded_tiles.len() as u64;
        tiles * u64::from(self.cells_per_tile)
    }

    fn usable_tiles_row_major(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.grid_height).flat_map(move |y| {
            (0..self.grid_width)
                .map(move |x| (x, y))
                .filter(move |t| !self.excluded_tiles.contains(t))
        })
    }

    fn usable_tiles_column_major(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.grid_width).flat_map(move |x| {
            (0..self.grid_height)
                .map(move |y| (x, y))
                .filter(move |t| !self.excluded_tiles.contains(t))
        })
    }
}

/// Known devices, looked up by the `device =` key of a definition file.
pub type DeviceTable = std::collections::BTreeMap<String, DeviceGeometry>;

/// Built-in device table. The ice40up5k entry fixes 8 logic cells per tile;
/// the grid dimensions and excluded IO columns are configuration defaults
/// that a geometry override file may replace.
pub fn builtin_devices() -> DeviceTable {
    let mut excluded = BTreeSet::new();
    for y in 0..30 {
        excluded.insert((0u32, y));
        excluded.insert((24u32, y));
    }
    let up5k = DeviceGeometry::new("ice40up5k", 25, 30, 8, excluded).expect("builtin geometry");
    let mut table = DeviceTable::new();
    table.insert(up5k.name.clone(), up5k);
    table
}

/// Parse a geometry override file: one `name width height cells_per_tile`
/// line followed by any number of `exclude x,y` lines.
pub fn parse_geometry_file(text: &str) -> Result<DeviceGeometry, BenchdefError> {
    let mut header: Option<(String, u32, u32, u32)> = None;
    let mut excluded = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = strip_comment(raw).trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("exclude") {
            if header.is_none() {
                return Err(BenchdefError::Syntax {
                    line,
                    col: 1,
                    msg: "exclude line before geometry header".into(),
                });
            }
            let (x, y) = parse_pair(rest.trim()).ok_or_else(|| BenchdefError::Syntax {
                line,
                col: 1,
                msg: format!("expected `exclude x,y`, got `{trimmed}`"),
            })?;
            excluded.insert((x, y));
            continue;
        }
        if header.is_some() {
            return Err(BenchdefError::Syntax {
                line,
                col: 1,
                msg: "multiple geometry header lines".into(),
            });
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(BenchdefError::Syntax {
                line,
                col: 1,
                msg: "expected `name width height cells_per_tile`".into(),
            });
        }
        let parse = |s: &str| -> Result<u32, BenchdefError> {
            s.parse().map_err(|_| BenchdefError::Syntax {
                line,
                col: 1,
                msg: format!("`{s}` is not a non-negative integer"),
            })
        };
        header = Some((
            fields[0].to_string(),
            parse(fields[1])?,
            parse(fields[2])?,
            parse(fields[3])?,
        ));
    }
    let (name, w, h, cpt) = header.ok_or(BenchdefError::Syntax {
        line: 1,
        col: 1,
        msg: "empty geometry file".into(),
    })?;
    DeviceGeometry::new(name, w, h, cpt, excluded)
}

/// A concrete logic-cell site: tile coordinates plus the cell index within
/// the tile, printed as `X4/Y4/lc3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BelLocation {
    pub x: u32,
    pub y: u32,
    pub lc: u32,
}

impl fmt::Display for BelLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}/Y{}/lc{}", self.x, self.y, self.lc)
    }
}

impl std::str::FromStr for BelLocation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("`{s}` is not of the form X<x>/Y<y>/lc<lc>");
        let mut parts = s.trim().split('/');
        let x = parts
            .next()
            .and_then(|p| p.strip_prefix('X'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(err)?;
        let y = parts
            .next()
            .and_then(|p| p.strip_prefix('Y'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(err)?;
        let lc = parts
            .next()
            .and_then(|p| p.strip_prefix("lc"))
            .and_then(|p| p.parse().ok())
            .ok_or_else(err)?;
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(Self { x, y, lc })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchKind {
    LutGrid,
    RingOscillator,
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchKind::LutGrid => write!(f, "lut_grid"),
            BenchKind::RingOscillator => write!(f, "ring_oscillator"),
        }
    }
}

/// Truth-table descriptor for the grid cells. The 16-bit encoding itself
/// lives in [`crate::netgen::lut_init_for`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LutFunction {
    And4,
    NotI0,
    And2I0I1,
    Constant0,
    Constant1,
    Explicit(u16),
}

impl fmt::Display for LutFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LutFunction::And4 => write!(f, "and4"),
            LutFunction::NotI0 => write!(f, "not_i0"),
            LutFunction::And2I0I1 => write!(f, "and2_i0_i1"),
            LutFunction::Constant0 => write!(f, "constant0"),
            LutFunction::Constant1 => write!(f, "constant1"),
            LutFunction::Explicit(init) => write!(f, "0x{init:04x}"),
        }
    }
}

impl std::str::FromStr for LutFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "and4" => Ok(LutFunction::And4),
            "not_i0" => Ok(LutFunction::NotI0),
            "and2_i0_i1" => Ok(LutFunction::And2I0I1),
            "constant0" => Ok(LutFunction::Constant0),
            "constant1" => Ok(LutFunction::Constant1),
            other => {
                if let Some(hex) = other.strip_prefix("0x") {
                    u16::from_str_radix(hex, 16)
                        .map(LutFunction::Explicit)
                        .map_err(|_| format!("`{other}` is not a 16-bit hex init"))
                } else {
                    Err(format!("unknown lut function `{other}`"))
                }
            }
        }
    }
}

/// Inclusive tile rectangle for region placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PlacementStrategy {
    Unconstrained,
    FixedList { fixed: Vec<BelLocation> },
    RegionFill { region: Region },
    RowSweep,
    ColumnSweep,
}

impl PlacementStrategy {
    pub fn is_unconstrained(&self) -> bool {
        matches!(self, PlacementStrategy::Unconstrained)
    }
}

/// Declarative description of one micro-benchmark family, straight out of
/// a definition file with defaults applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    pub kind: BenchKind,
    pub device: DeviceGeometry,
    pub cell_count: u32,
    pub chains: u32,
    pub placement: PlacementStrategy,
    pub input_pins: Vec<String>,
    pub output_pins: Vec<String>,
    pub lut_function: LutFunction,
    /// How many of the four grid input ports fan out to the cells
    /// (`lut_grid` only); the rest are tied low at the cell inputs.
    pub input_arity: u8,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(idx) => &line[..idx],
        None => line,
    }
}

fn parse_pair(s: &str) -> Option<(u32, u32)> {
    let (x, y) = s.split_once(',')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Benchmark,
    Placement,
    Pins,
}

/// Parse a definition file against a device table. Defaults:
/// `name = bench`, `device = ice40up5k`, `chains = 1`,
/// `placement = unconstrained`, `lut_function = and4`, `input_arity = 4`.
pub fn parse_benchdef(text: &str, devices: &DeviceTable) -> Result<BenchmarkSpec, BenchdefError> {
    let mut section = Section::None;
    let mut seen: HashSet<String> = HashSet::new();

    let mut name: Option<String> = None;
    let mut kind: Option<BenchKind> = None;
    let mut device: Option<String> = None;
    let mut cells: Option<u32> = None;
    let mut chains: Option<u32> = None;
    let mut lut_function: Option<LutFunction> = None;
    let mut input_arity: Option<u8> = None;
    let mut mode: Option<String> = None;
    let mut region: Option<Region> = None;
    let mut fixed: Option<Vec<BelLocation>> = None;
    let mut inputs: Vec<String> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = strip_comment(raw);
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let sect = rest.strip_suffix(']').ok_or_else(|| BenchdefError::Syntax {
                line,
                col: stripped.len(),
                msg: "unterminated section header".into(),
            })?;
            section = match sect {
                "benchmark" => Section::Benchmark,
                "placement" => Section::Placement,
                "pins" => Section::Pins,
                other => {
                    return Err(BenchdefError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            };
            continue;
        }
        let eq = trimmed.find('=').ok_or_else(|| BenchdefError::Syntax {
            line,
            col: stripped.len() - stripped.trim_start().len() + 1,
            msg: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        if key.is_empty() {
            return Err(BenchdefError::Syntax {
                line,
                col: 1,
                msg: "empty key before `=`".into(),
            });
        }
        if section == Section::None {
            return Err(BenchdefError::Syntax {
                line,
                col: 1,
                msg: format!("key `{key}` before any section header"),
            });
        }
        let scoped = format!("{section:?}.{key}");
        if !seen.insert(scoped) {
            return Err(BenchdefError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        let invalid = |msg: String| BenchdefError::InvalidValue {
            line,
            key: key.to_string(),
            msg,
        };
        match (section, key) {
            (Section::Benchmark, "name") => name = Some(value.to_string()),
            (Section::Benchmark, "kind") => {
                kind = Some(match value {
                    "lut_grid" => BenchKind::LutGrid,
                    "ring_oscillator" => BenchKind::RingOscillator,
                    other => return Err(invalid(format!("unknown kind `{other}`"))),
                })
            }
            (Section::Benchmark, "device") => device = Some(value.to_string()),
            (Section::Benchmark, "cells") => {
                cells = Some(value.parse().map_err(|_| {
                    invalid(format!("`{value}` is not a non-negative integer"))
                })?)
            }
            (Section::Benchmark, "chains") => {
                chains = Some(value.parse().map_err(|_| {
                    invalid(format!("`{value}` is not a non-negative integer"))
                })?)
            }
            (Section::Benchmark, "lut_function") => {
                lut_function = Some(value.parse().map_err(invalid)?)
            }
            (Section::Benchmark, "input_arity") => {
                let arity: u8 = value
                    .parse()
                    .map_err(|_| invalid(format!("`{value}` is not an integer")))?;
                if !(1..=4).contains(&arity) {
                    return Err(invalid(format!("input_arity must be 1..=4, got {arity}")));
                }
                input_arity = Some(arity);
            }
            (Section::Placement, "mode") => mode = Some(value.to_string()),
            (Section::Placement, "region") => {
                let fields: Vec<&str> = value.split(',').map(str::trim).collect();
                if fields.len() != 4 {
                    return Err(invalid("expected `x0,y0,x1,y1`".into()));
                }
                let mut nums = [0u32; 4];
                for (slot, field) in nums.iter_mut().zip(&fields) {
                    *slot = field
                        .parse()
                        .map_err(|_| invalid(format!("`{field}` is not a non-negative integer")))?;
                }
                if nums[2] < nums[0] || nums[3] < nums[1] {
                    return Err(invalid("region corners reversed".into()));
                }
                region = Some(Region {
                    x0: nums[0],
                    y0: nums[1],
                    x1: nums[2],
                    y1: nums[3],
                });
            }
            (Section::Placement, "fixed") => {
                let mut locs = Vec::new();
                for field in value.split(',') {
                    let field = field.trim();
                    if field.is_empty() {
                        continue;
                    }
                    locs.push(field.parse().map_err(invalid)?);
                }
                fixed = Some(locs);
            }
            (Section::Pins, "inputs") => inputs = split_pins(value),
            (Section::Pins, "outputs") => outputs = split_pins(value),
            (_, key) => {
                return Err(BenchdefError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    let kind = kind.ok_or(BenchdefError::MissingKey("kind"))?;
    let cell_count = cells.ok_or(BenchdefError::MissingKey("cells"))?;
    let device_name = device.unwrap_or_else(|| "ice40up5k".to_string());
    let device = devices
        .get(&device_name)
        .cloned()
        .ok_or(BenchdefError::UnknownDevice(device_name))?;

    let placement = match mode.as_deref() {
        None | Some("unconstrained") => PlacementStrategy::Unconstrained,
        Some("fixed_list") => PlacementStrategy::FixedList {
            fixed: fixed.ok_or(BenchdefError::MissingKey("fixed"))?,
        },
        Some("region_fill") => PlacementStrategy::RegionFill {
            region: region.ok_or(BenchdefError::MissingKey("region"))?,
        },
        Some("row_sweep") => PlacementStrategy::RowSweep,
        Some("column_sweep") => PlacementStrategy::ColumnSweep,
        Some(other) => {
            return Err(BenchdefError::InvalidValue {
                line: 0,
                key: "mode".into(),
                msg: format!("unknown placement mode `{other}`"),
            })
        }
    };

    let mut all_pins = HashSet::new();
    for pin in inputs.iter().chain(&outputs) {
        if !all_pins.insert(pin.clone()) {
            return Err(BenchdefError::DuplicatePin(pin.clone()));
        }
    }

    Ok(BenchmarkSpec {
        name: name.unwrap_or_else(|| "bench".to_string()),
        kind,
        device,
        cell_count,
        chains: chains.unwrap_or(1),
        placement,
        input_pins: inputs,
        output_pins: outputs,
        lut_function: lut_function.unwrap_or(LutFunction::And4),
        input_arity: input_arity.unwrap_or(4),
    })
}

fn split_pins(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

/// Canonical definition-file rendering; `parse_benchdef` of the output
/// reproduces `spec` field for field.
pub fn serialize_benchdef(spec: &BenchmarkSpec) -> String {
    let mut out = String::new();
    out.push_str("[benchmark]\n");
    out.push_str(&format!("name = {}\n", spec.name));
    out.push_str(&format!("kind = {}\n", spec.kind));
    out.push_str(&format!("device = {}\n", spec.device.name));
    out.push_str(&format!("cells = {}\n", spec.cell_count));
    out.push_str(&format!("chains = {}\n", spec.chains));
    out.push_str(&format!("lut_function = {}\n", spec.lut_function));
    out.push_str(&format!("input_arity = {}\n", spec.input_arity));
    out.push_str("\n[placement]\n");
    match &spec.placement {
        PlacementStrategy::Unconstrained => out.push_str("mode = unconstrained\n"),
        PlacementStrategy::FixedList { fixed } => {
            out.push_str("mode = fixed_list\n");
            let locs: Vec<String> = fixed.iter().map(BelLocation::to_string).collect();
            out.push_str(&format!("fixed = {}\n", locs.join(",")));
        }
        PlacementStrategy::RegionFill { region } => {
            out.push_str("mode = region_fill\n");
            out.push_str(&format!(
                "region = {},{},{},{}\n",
                region.x0, region.y0, region.x1, region.y1
            ));
        }
        PlacementStrategy::RowSweep => out.push_str("mode = row_sweep\n"),
        PlacementStrategy::ColumnSweep => out.push_str("mode = column_sweep\n"),
    }
    out.push_str("\n[pins]\n");
    out.push_str(&format!("inputs = {}\n", spec.input_pins.join(",")));
    out.push_str(&format!("outputs = {}\n", spec.output_pins.join(",")));
    out
}

/// A spec that passed validation, with the ring arithmetic resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedSpec {
    pub spec: BenchmarkSpec,
    /// Odd inverter count per chain (`ring_oscillator` only).
    pub inverters_per_chain: Option<u32>,
    /// Cells the generator will instantiate: `cell_count` for grids,
    /// `chains * (inverters + 1)` for rings (the enable AND included).
    pub total_cells: u32,
}

fn largest_odd_at_most(q: u32) -> Option<u32> {
    match q {
        0 => None,
        q if q % 2 == 1 => Some(q),
        q => Some(q - 1),
    }
}

/// Check a parsed spec against its device geometry and resolve the
/// per-chain inverter count for rings (largest odd count that fits the
/// per-chain cell budget).
pub fn validate_spec(spec: BenchmarkSpec) -> Result<ValidatedSpec, BenchdefError> {
    if spec.cell_count == 0 {
        return Err(BenchdefError::ZeroCells);
    }
    if spec.chains == 0 {
        return Err(BenchdefError::ZeroChains);
    }
    let expected_inputs = match spec.kind {
        BenchKind::LutGrid => 4,
        BenchKind::RingOscillator => 1,
    };
    if spec.input_pins.len() != expected_inputs {
        return Err(BenchdefError::InputPinArity {
            kind: spec.kind,
            expected: expected_inputs,
            got: spec.input_pins.len(),
        });
    }
    let (inverters, total_cells) = match spec.kind {
        BenchKind::LutGrid => {
            if !spec.output_pins.is_empty() && spec.kind == BenchKind::LutGrid {
                // Grid outputs are deliberately dangling; pins for them
                // would never be driven.
                return Err(BenchdefError::OutputPinArity {
                    chains: 0,
                    got: spec.output_pins.len(),
                });
            }
            (None, spec.cell_count)
        }
        BenchKind::RingOscillator => {
            if spec.output_pins.len() > spec.chains as usize {
                return Err(BenchdefError::OutputPinArity {
                    chains: spec.chains,
                    got: spec.output_pins.len(),
                });
            }
            if !spec.placement.is_unconstrained() {
                return Err(BenchdefError::RingPlacement);
            }
            let budget = spec.cell_count / spec.chains;
            let inverters = largest_odd_at_most(budget).ok_or(
                BenchdefError::ChainsExceedCells {
                    cells: spec.cell_count,
                    chains: spec.chains,
                },
            )?;
            (Some(inverters), spec.chains * (inverters + 1))
        }
    };
    if u64::from(total_cells) > spec.device.usable_cells() {
        return Err(BenchdefError::CapacityExceeded {
            needed: u64::from(total_cells),
            available: spec.device.usable_cells(),
        });
    }
    if let PlacementStrategy::FixedList { fixed } = &spec.placement {
        if fixed.len() != total_cells as usize {
            return Err(BenchdefError::FixedListLength {
                expected: total_cells,
                got: fixed.len(),
            });
        }
    }
    Ok(ValidatedSpec {
        inverters_per_chain: inverters,
        total_cells,
        spec,
    })
}

/// Expand a constrained placement strategy into exactly `total_cells`
/// unique locations. Region and sweep modes enumerate tiles row-major
/// (x fastest) or column-major, logic-cell index innermost; the output is
/// deterministic for identical inputs.
pub fn expand_placements(spec: &ValidatedSpec) -> Result<Vec<BelLocation>, BenchdefError> {
    let geometry = &spec.spec.device;
    let count = spec.total_cells as usize;
    let cells_of = |tiles: &mut dyn Iterator<Item = (u32, u32)>| -> Vec<BelLocation> {
        tiles
            .flat_map(|(x, y)| (0..geometry.cells_per_tile).map(move |lc| BelLocation { x, y, lc }))
            .take(count)
            .collect()
    };
    match &spec.spec.placement {
        PlacementStrategy::Unconstrained => Err(BenchdefError::UnconstrainedPlacement),
        PlacementStrategy::FixedList { fixed } => {
            let mut seen = HashSet::new();
            for loc in fixed {
                if !geometry.contains(loc) {
                    return Err(BenchdefError::LocationOutOfRange(*loc));
                }
                if !seen.insert(*loc) {
                    return Err(BenchdefError::DuplicateLocation(*loc));
                }
            }
            Ok(fixed.clone())
        }
        PlacementStrategy::RegionFill { region } => {
            if region.x1 >= geometry.grid_width || region.y1 >= geometry.grid_height {
                return Err(BenchdefError::RegionOutsideGrid(*region));
            }
            let usable: Vec<(u32, u32)> = (region.y0..=region.y1)
                .flat_map(|y| (region.x0..=region.x1).map(move |x| (x, y)))
                .filter(|t| !geometry.excluded_tiles.contains(t))
                .collect();
            let capacity = usable.len() as u64 * u64::from(geometry.cells_per_tile);
            if capacity < count as u64 {
                return Err(BenchdefError::RegionCapacity {
                    needed: spec.total_cells,
                    available: capacity,
                });
            }
            Ok(cells_of(&mut usable.into_iter()))
        }
        PlacementStrategy::RowSweep => Ok(cells_of(&mut geometry.usable_tiles_row_major())),
        PlacementStrategy::ColumnSweep => Ok(cells_of(&mut geometry.usable_tiles_column_major())),
    }
}
