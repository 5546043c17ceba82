//! Generation and analysis toolkit for iCE40 power micro-benchmarks.
//!
//! The crate covers the full bench workflow: parse a benchmark definition
//! ([`benchdef`]), emit a placement-constrained netlist with its pin
//! constraints ([`netgen`]), generate LFSR-driven stimulus artifacts
//! ([`lfsr`], [`stimgen`]), and analyze the resulting traces — switching
//! activity from simulation VCDs ([`activity`]) and shunt-current power
//! captures from the measurement setup ([`powerlab`]).
//!
//! Synthesis, place-and-route and Verilog simulation are external: the
//! toolkit emits the files those tools consume (netlist, PCF, testbench,
//! simulator driver script) and consumes the files they produce (VCD,
//! oscilloscope CSV exports).

pub mod activity;
pub mod benchdef;
pub mod cli;
pub mod lfsr;
pub mod netgen;
pub mod powerlab;
pub mod stimgen;
