//! Netlist generation: structural Verilog, pin constraints and the JSON
//! manifest that records what was emitted.
//!
//! Both benchmark kinds instantiate `SB_LUT4` primitives directly. Every
//! instance carries a `(* keep *)` attribute so synthesis cannot sweep the
//! deliberately dangling grid outputs, and placed cells additionally carry
//! a `(* BEL="..." *)` attribute naming their logic-cell site.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchdef::{
    expand_placements, BelLocation, BenchKind, BenchdefError, BenchmarkSpec, LutFunction,
    ValidatedSpec,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetgenError {
    #[error("generator for {expected} invoked on a {got} spec")]
    KindMismatch { expected: BenchKind, got: BenchKind },
    #[error("placement list has {got} locations for {expected} cells")]
    PlacementCount { expected: u32, got: usize },
    #[error(transparent)]
    Benchdef(#[from] BenchdefError),
}

/// One `SB_LUT4` instance. `inputs` holds net expressions for I0..I3;
/// `output` of `None` renders as a dangling `.O()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutCell {
    pub name: String,
    pub init: u16,
    pub location: Option<BelLocation>,
    pub inputs: [String; 4],
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub pin: String,
    pub is_input: bool,
    /// False for grid input ports beyond the stimulated arity; the
    /// testbench ties those low.
    pub stimulated: bool,
}

/// In-memory netlist, rendered to text by [`render_verilog`] / [`emit_pcf`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub module_name: String,
    pub ports: Vec<Port>,
    pub needs_const0: bool,
    pub cells: Vec<LutCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub name: String,
    pub init: String,
    pub location: Option<String>,
}

/// Ring chain membership in loop order: the enable AND first, then the
/// inverters; each cell's output feeds the next, and the last inverter
/// feeds back into the AND.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub index: u32,
    pub inverters: u32,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub port: String,
    pub pin: String,
    pub stimulated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub port: String,
    pub pin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoRecord {
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
}

/// Machine-readable record of one generated design, written next to the
/// Verilog as `<name>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub name: String,
    pub kind: BenchKind,
    pub spec: BenchmarkSpec,
    pub cell_count: u32,
    pub cells: Vec<CellRecord>,
    pub chains: Vec<ChainRecord>,
    pub io: IoRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignBundle {
    pub verilog: String,
    pub pcf: String,
    pub manifest: Manifest,
}

/// 16-bit LUT truth table for a named function. Bit `i3*8 + i2*4 + i1*2 + i0`
/// of the init word is the output for that input combination.
pub fn lut_init_for(function: LutFunction) -> u16 {
    match function {
        LutFunction::Explicit(init) => init,
        named => {
            let f = |i0: bool, i1: bool, i2: bool, i3: bool| -> bool {
                match named {
                    LutFunction::And4 => i0 && i1 && i2 && i3,
                    LutFunction::NotI0 => !i0,
                    LutFunction::And2I0I1 => i0 && i1,
                    LutFunction::Constant0 => false,
                    LutFunction::Constant1 => true,
                    LutFunction::Explicit(_) => unreachable!(),
                }
            };
            let mut init = 0u16;
            for idx in 0..16u16 {
                let bit = |n: u16| idx >> n & 1 == 1;
                if f(bit(0), bit(1), bit(2), bit(3)) {
                    init |= 1 << idx;
                }
            }
            init
        }
    }
}

pub fn format_bel_attribute(loc: &BelLocation) -> String {
    format!("(* BEL=\"{loc}\" *)")
}

pub(crate) fn sanitize_identifier(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

fn instance_lines(out: &mut String, cell: &LutCell) {
    out.push_str("(* keep *)\n");
    if let Some(loc) = &cell.location {
        out.push_str(&format_bel_attribute(loc));
        out.push('\n');
    }
    let output = cell.output.as_deref().unwrap_or("");
    out.push_str(&format!(
        "SB_LUT4 #(.LUT_INIT(16'h{:04X})) {} (.O({output}), .I0({}), .I1({}), .I2({}), .I3({}));\n",
        cell.init, cell.name, cell.inputs[0], cell.inputs[1], cell.inputs[2], cell.inputs[3],
    ));
}

pub fn render_verilog(design: &Design) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "// {}: generated by icebench {}; do not edit.\n",
        design.module_name,
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str(&format!("module {} (\n", design.module_name));
    for (idx, port) in design.ports.iter().enumerate() {
        let dir = if port.is_input { "input" } else { "output" };
        let comma = if idx + 1 == design.ports.len() { "" } else { "," };
        out.push_str(&format!("    {dir} wire {}{comma}\n", port.name));
    }
    out.push_str(");\n\n");

    if design.needs_const0 {
        out.push_str("wire const0;\nassign const0 = 1'b0;\n\n");
    }

    let port_names: std::collections::HashSet<&str> =
        design.ports.iter().map(|p| p.name.as_str()).collect();
    let mut declared = std::collections::HashSet::new();
    let mut wires = String::new();
    for cell in &design.cells {
        if let Some(net) = &cell.output {
            if !port_names.contains(net.as_str()) && declared.insert(net.clone()) {
                wires.push_str(&format!("wire {net};\n"));
            }
        }
    }
    if !wires.is_empty() {
        out.push_str(&wires);
        out.push('\n');
    }

    for cell in &design.cells {
        instance_lines(&mut out, cell);
    }
    out.push_str("\nendmodule\n");
    out
}

pub fn emit_pcf(design: &Design) -> String {
    let mut out = String::new();
    for port in &design.ports {
        out.push_str(&format!("set_io {} {}\n", port.name, port.pin));
    }
    out
}

fn manifest_for(spec: &ValidatedSpec, design: &Design, chains: Vec<ChainRecord>) -> Manifest {
    Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: spec.spec.name.clone(),
        kind: spec.spec.kind,
        spec: spec.spec.clone(),
        cell_count: spec.total_cells,
        cells: design
            .cells
            .iter()
            .map(|c| CellRecord {
                name: c.name.clone(),
                init: format!("0x{:04X}", c.init),
                location: c.location.as_ref().map(BelLocation::to_string),
            })
            .collect(),
        chains,
        io: IoRecord {
            inputs: design
                .ports
                .iter()
                .filter(|p| p.is_input)
                .map(|p| InputRecord {
                    port: p.name.clone(),
                    pin: p.pin.clone(),
                    stimulated: p.stimulated,
                })
                .collect(),
            outputs: design
                .ports
                .iter()
                .filter(|p| !p.is_input)
                .map(|p| OutputRecord { port: p.name.clone(), pin: p.pin.clone() })
                .collect(),
        },
        run: None,
    }
}

fn grid_design(
    spec: &ValidatedSpec,
    placements: Option<&[BelLocation]>,
) -> Result<Design, NetgenError> {
    let s = &spec.spec;
    if let Some(locs) = placements {
        if locs.len() != spec.total_cells as usize {
            return Err(NetgenError::PlacementCount {
                expected: spec.total_cells,
                got: locs.len(),
            });
        }
    }
    let arity = s.input_arity as usize;
    let ports: Vec<Port> = s
        .input_pins
        .iter()
        .enumerate()
        .map(|(idx, pin)| Port {
            name: format!("in{idx}"),
            pin: pin.clone(),
            is_input: true,
            stimulated: idx < arity,
        })
        .collect();
    let init = lut_init_for(s.lut_function);
    let cells = (0..spec.total_cells)
        .map(|i| {
            let mut inputs: [String; 4] =
                std::array::from_fn(|slot| format!("in{slot}"));
            for slot in inputs.iter_mut().skip(arity) {
                *slot = "const0".to_string();
            }
            LutCell {
                name: format!("lut_{i}"),
                init,
                location: placements.map(|locs| locs[i as usize]),
                inputs,
                output: None,
            }
        })
        .collect();
    Ok(Design {
        module_name: sanitize_identifier(&s.name),
        ports,
        needs_const0: arity < 4,
        cells,
    })
}

fn ring_design(spec: &ValidatedSpec) -> (Design, Vec<ChainRecord>) {
    let s = &spec.spec;
    let inverters = spec
        .inverters_per_chain
        .expect("validated ring carries inverter count");
    let monitored = s.output_pins.len() as u32;

    let mut ports = vec![Port {
        name: "ena".to_string(),
        pin: s.input_pins[0].clone(),
        is_input: true,
        stimulated: true,
    }];
    for (idx, pin) in s.output_pins.iter().enumerate() {
        ports.push(Port {
            name: format!("osc_out{idx}"),
            pin: pin.clone(),
            is_input: false,
            stimulated: false,
        });
    }

    let mut cells = Vec::with_capacity(spec.total_cells as usize);
    let mut chains = Vec::with_capacity(s.chains as usize);
    for k in 0..s.chains {
        let tap_net = if k < monitored {
            format!("osc_out{k}")
        } else {
            format!("chain{k}_n0")
        };
        let feedback = format!("chain{k}_n{inverters}");
        let and_name = format!("chain{k}_and");
        cells.push(LutCell {
            name: and_name.clone(),
            init: lut_init_for(LutFunction::And2I0I1),
            location: None,
            inputs: [
                "ena".to_string(),
                feedback,
                "const0".to_string(),
                "const0".to_string(),
            ],
            output: Some(tap_net.clone()),
        });
        let mut member_names = vec![and_name];
        let mut prev = tap_net;
        for j in 0..inverters {
            let name = format!("chain{k}_inv{j}");
            let output = format!("chain{k}_n{}", j + 1);
            cells.push(LutCell {
                name: name.clone(),
                init: lut_init_for(LutFunction::NotI0),
                location: None,
                inputs: [
                    prev,
                    "const0".to_string(),
                    "const0".to_string(),
                    "const0".to_string(),
                ],
                output: Some(output.clone()),
            });
            member_names.push(name);
            prev = output;
        }
        chains.push(ChainRecord {
            index: k,
            inverters,
            cells: member_names,
        });
    }

    let design = Design {
        module_name: sanitize_identifier(&s.name),
        ports,
        needs_const0: true,
        cells,
    };
    (design, chains)
}

/// Generate the LUT-grid netlist. `placements` of `None` expands the
/// benchmark's own placement strategy; a caller-provided slice must cover
/// every cell.
pub fn gen_lut_grid(
    spec: &ValidatedSpec,
    placements: Option<&[BelLocation]>,
) -> Result<DesignBundle, NetgenError> {
    if spec.spec.kind != BenchKind::LutGrid {
        return Err(NetgenError::KindMismatch {
            expected: BenchKind::LutGrid,
            got: spec.spec.kind,
        });
    }
    let expanded;
    let placements = match placements {
        Some(locs) => Some(locs),
        None if !spec.spec.placement.is_unconstrained() => {
            expanded = expand_placements(spec)?;
            Some(expanded.as_slice())
        }
        None => None,
    };
    let design = grid_design(spec, placements)?;
    let manifest = manifest_for(spec, &design, Vec::new());
    Ok(DesignBundle {
        verilog: render_verilog(&design),
        pcf: emit_pcf(&design),
        manifest,
    })
}

pub fn gen_ring_oscillator(spec: &ValidatedSpec) -> Result<DesignBundle, NetgenError> {
    if spec.spec.kind != BenchKind::RingOscillator {
        return Err(NetgenError::KindMismatch {
            expected: BenchKind::RingOscillator,
            got: spec.spec.kind,
        });
    }
    let (design, chains) = ring_design(spec);
    let manifest = manifest_for(spec, &design, chains);
    Ok(DesignBundle {
        verilog: render_verilog(&design),
        pcf: emit_pcf(&design),
        manifest,
    })
}

/// Kind dispatcher used by the command-line front end.
pub fn gen_design(spec: &ValidatedSpec) -> Result<DesignBundle, NetgenError> {
    match spec.spec.kind {
        BenchKind::LutGrid => gen_lut_grid(spec, None),
        BenchKind::RingOscillator => gen_ring_oscillator(spec),
    }
}
