//! Current-sense amplifier characteristics, ADC quantization arithmetic
//! and the bench-validation computation for amplifier boards.

use serde::{Deserialize, Serialize};

use super::{PowerError, ShuntConfig};

/// Datasheet characteristics of the current-sense amplifier in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierConfig {
    pub gain: f64,
    pub bandwidth_hz: f64,
    pub noise_density_v_per_rt_hz: f64,
    pub cmrr_db: f64,
    pub psrr_uv_per_v: f64,
}

impl AmplifierConfig {
    pub fn new(gain: f64) -> Result<Self, PowerError> {
        if !(gain > 0.0) {
            return Err(PowerError::NonPositive { what: "amplifier gain" });
        }
        Ok(Self {
            gain,
            bandwidth_hz: 0.0,
            noise_density_v_per_rt_hz: 0.0,
            cmrr_db: 0.0,
            psrr_uv_per_v: 0.0,
        })
    }

    /// The INA293B5 used on the measurement board.
    pub fn ina293b5() -> Self {
        Self {
            gain: 500.0,
            bandwidth_hz: 900e3,
            noise_density_v_per_rt_hz: 50e-9,
            cmrr_db: 140.0,
            psrr_uv_per_v: 0.1,
        }
    }
}

/// ADC resolution translated to the smallest measurable shunt current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationReport {
    pub adc_bits: u32,
    pub vref_v: f64,
    pub lsb_v: f64,
    pub min_current_a: f64,
}

/// One ADC step in volts and the current it corresponds to through the
/// given shunt and conditioning.
pub fn quantization_report(
    adc_bits: u32,
    vref_v: f64,
    shunt: &ShuntConfig,
) -> Result<QuantizationReport, PowerError> {
    if adc_bits == 0 {
        return Err(PowerError::NonPositive { what: "adc bit count" });
    }
    if !(vref_v > 0.0) {
        return Err(PowerError::NonPositive { what: "adc reference voltage" });
    }
    let lsb_v = vref_v / (1u64 << adc_bits) as f64;
    Ok(QuantizationReport {
        adc_bits,
        vref_v,
        lsb_v,
        min_current_a: shunt.volts_to_amps(lsb_v),
    })
}

/// Fixed parts of the amplifier validation rig: supply, load resistor,
/// shunt resistor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpValidationSetup {
    pub u_supply_v: f64,
    pub r_load_ohm: f64,
    pub r_shunt_ohm: f64,
}

/// One measured amplifier: output voltage and the directly measured
/// shunt differential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpMeasurement {
    pub u_out_v: f64,
    pub u_diff_mv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub u_supply_v: f64,
    pub r_load_ohm: f64,
    pub r_shunt_ohm: f64,
    pub u_out_v: f64,
    pub u_diff_mv: f64,
    pub u_amp_calc_v: f64,
    pub e_rel_pct: f64,
}

/// Compare measured amplifier outputs against gain times the measured
/// differential. The relative error is signed and normalized to the
/// amplifier output: e_rel = (u_out − gain·u_diff)/u_out.
pub fn validate_amplifier(
    measurements: &[AmpMeasurement],
    amp: &AmplifierConfig,
    setup: &AmpValidationSetup,
) -> Result<Vec<ValidationRow>, PowerError> {
    if !(amp.gain > 0.0) {
        return Err(PowerError::NonPositive { what: "amplifier gain" });
    }
    for (what, value) in [
        ("supply voltage", setup.u_supply_v),
        ("load resistance", setup.r_load_ohm),
        ("shunt resistance", setup.r_shunt_ohm),
    ] {
        if !(value > 0.0) {
            return Err(PowerError::NonPositive { what });
        }
    }
    measurements
        .iter()
        .map(|m| {
            if !(m.u_out_v > 0.0) {
                return Err(PowerError::NonPositive { what: "amplifier output voltage" });
            }
            if !(m.u_diff_mv > 0.0) {
                return Err(PowerError::NonPositive { what: "shunt differential voltage" });
            }
            let u_amp_calc_v = amp.gain * m.u_diff_mv * 1e-3;
            Ok(ValidationRow {
                u_supply_v: setup.u_supply_v,
                r_load_ohm: setup.r_load_ohm,
                r_shunt_ohm: setup.r_shunt_ohm,
                u_out_v: m.u_out_v,
                u_diff_mv: m.u_diff_mv,
                u_amp_calc_v,
                e_rel_pct: (m.u_out_v - u_amp_calc_v) / m.u_out_v * 100.0,
            })
        })
        .collect()
}
