//! Maximal-length LFSR engine: the stimulus core behind every testbench.
//!
//! The register is a Fibonacci (external-XOR) LFSR of order `n`, shifting
//! toward the LSB. Tap positions are numbered `1..=n` with position `n` at
//! the shifted-out end: tap `t` reads bit `n - t` of the state word, and the
//! XOR of all tapped bits becomes the new top bit. With a maximal tap set
//! the register walks through every nonzero `n`-bit state before repeating.

use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LfsrError {
    #[error("order {0} outside supported range {MIN_ORDER}..={MAX_ORDER}")]
    OrderOutOfRange(u32),
    #[error("order {0} outside tap table range {MIN_ORDER}..={MAX_TABLE_ORDER}")]
    OrderOutsideTable(u32),
    #[error("tap set must not be empty")]
    EmptyTaps,
    #[error("tap position {tap} outside 1..={order}")]
    TapOutOfRange { tap: u32, order: u32 },
    #[error("highest tap must equal the order (got max {max}, order {order})")]
    MissingOrderTap { max: u32, order: u32 },
    #[error("zero state is the XOR-LFSR lockup state")]
    ZeroState,
    #[error("seed {seed:#x} does not fit in {order} bits")]
    SeedTooWide { seed: u64, order: u32 },
}

pub const MIN_ORDER: u32 = 2;
/// Orders above this would overflow the `u64` state word.
pub const MAX_ORDER: u32 = 63;
/// Highest order with a shipped maximal-length tap entry.
pub const MAX_TABLE_ORDER: u32 = 24;

/// One canonical maximal-length tap set per order. Entries are taken from
/// the standard primitive-polynomial tables (taps = nonzero polynomial
/// exponents); the test suite verifies period 2^n - 1 for every row rather
/// than trusting the transcription.
const TAP_TABLE: &[(u32, &[u32])] = &[
    (2, &[2, 1]),
    (3, &[3, 2]),
    (4, &[4, 3]),
    (5, &[5, 3]),
    (6, &[6, 5]),
    (7, &[7, 6]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 5]),
    (10, &[10, 7]),
    (11, &[11, 9]),
    (12, &[12, 11, 10, 4]),
    (13, &[13, 12, 11, 8]),
    (14, &[14, 13, 12, 2]),
    (15, &[15, 14]),
    (16, &[16, 15, 13, 4]),
    (17, &[17, 14]),
    (18, &[18, 11]),
    (19, &[19, 18, 17, 14]),
    (20, &[20, 17]),
    (21, &[21, 19]),
    (22, &[22, 21]),
    (23, &[23, 18]),
    (24, &[24, 23, 22, 17]),
];

/// Complete configuration of one LFSR: order, feedback taps and seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrConfig {
    order: u32,
    taps: BTreeSet<u32>,
    seed: u64,
}

impl LfsrConfig {
    pub fn new(
        order: u32,
        taps: impl IntoIterator<Item = u32>,
        seed: u64,
    ) -> Result<Self, LfsrError> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(LfsrError::OrderOutOfRange(order));
        }
        let taps: BTreeSet<u32> = taps.into_iter().collect();
        let max = *taps.iter().next_back().ok_or(LfsrError::EmptyTaps)?;
        if let Some(&tap) = taps.iter().find(|&&t| t == 0 || t > order) {
            return Err(LfsrError::TapOutOfRange { tap, order });
        }
        if max != order {
            return Err(LfsrError::MissingOrderTap { max, order });
        }
        if seed == 0 {
            return Err(LfsrError::ZeroState);
        }
        if seed >> order != 0 {
            return Err(LfsrError::SeedTooWide { seed, order });
        }
        Ok(Self { order, taps, seed })
    }

    /// Config with the shipped maximal-length taps for `order`.
    pub fn max_length(order: u32, seed: u64) -> Result<Self, LfsrError> {
        Self::new(order, max_length_taps(order)?, seed)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn taps(&self) -> &BTreeSet<u32> {
        &self.taps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of hex digits needed to print one state.
    pub fn hex_width(&self) -> usize {
        self.order.div_ceil(4) as usize
    }
}

/// Canonical maximal-length tap set for `order`, from the shipped table.
pub fn max_length_taps(order: u32) -> Result<BTreeSet<u32>, LfsrError> {
    TAP_TABLE
        .iter()
        .find(|(n, _)| *n == order)
        .map(|(_, taps)| taps.iter().copied().collect())
        .ok_or(LfsrError::OrderOutsideTable(order))
}

/// All orders covered by the shipped tap table.
pub fn table_orders() -> impl Iterator<Item = u32> {
    TAP_TABLE.iter().map(|(n, _)| *n)
}

/// Tap table as CSV `order,taps` with space-separated tap positions.
pub fn taps_csv() -> String {
    let mut out = String::from("order,taps\n");
    for (order, taps) in TAP_TABLE {
        let taps: Vec<String> = taps.iter().map(|t| t.to_string()).collect();
        out.push_str(&format!("{},{}\n", order, taps.join(" ")));
    }
    out
}

/// One shift step. The zero state has no predecessor under maximal taps and
/// would lock up, so it is rejected rather than propagated.
pub fn next_state(cfg: &LfsrConfig, state: u64) -> Result<u64, LfsrError> {
    if state == 0 {
        return Err(LfsrError::ZeroState);
    }
    let mut feedback = 0u64;
    for &tap in &cfg.taps {
        feedback ^= (state >> (cfg.order - tap)) & 1;
    }
    Ok((state >> 1) | (feedback << (cfg.order - 1)))
}

/// First `count` states of the sequence, starting at the seed.
pub fn generate_sequence(cfg: &LfsrConfig, count: usize) -> Result<Vec<u64>, LfsrError> {
    let mut states = Vec::with_capacity(count);
    let mut state = cfg.seed;
    for _ in 0..count {
        states.push(state);
        state = next_state(cfg, state)?;
    }
    Ok(states)
}

/// Smallest p > 0 with state_p = seed, found by stepping. Terminates by
/// pigeonhole: the walk stays within the 2^n - 1 nonzero states.
pub fn period(cfg: &LfsrConfig) -> u64 {
    let mut state = next_state(cfg, cfg.seed).expect("seed is nonzero");
    let mut steps = 1u64;
    while state != cfg.seed {
        state = next_state(cfg, state).expect("nonzero orbit");
        steps += 1;
    }
    steps
}
