//! DWDM crosstalk budgeting and four-wave-mixing checks for channel plans.

use serde::{Deserialize, Serialize};

use crate::config::{ChannelPlan, ClassicalChannel, Direction, LinkConfig};
use crate::error::{Error, Result};
use crate::units;

/// γP₀L above which spontaneous four-wave mixing becomes a concern.
pub const SPONTANEOUS_FWM_THRESHOLD: f64 = 0.1;

pub fn photon_rate_per_ns(power_dbm: f64, wavelength_nm: f64) -> f64 {
    units::dbm_to_watts(power_dbm) / units::photon_energy_j(wavelength_nm) * 1e-9
}

/// Smallest isolation keeping the leaked detection probability per gate at
/// or below `target_prob_per_gate`. Never negative.
pub fn required_isolation_db(
    receiver_power_dbm: f64,
    wavelength_nm: f64,
    target_prob_per_gate: f64,
    efficiency: f64,
    internal_loss_db: f64,
    gate_ns: f64,
) -> f64 {
    let detected = photon_rate_per_ns(receiver_power_dbm, wavelength_nm)
        * efficiency
        * units::loss_db_to_transmission(internal_loss_db)
        * gate_ns;
    units::linear_to_db(detected / target_prob_per_gate).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCrosstalk {
    pub offset_ghz: f64,
    pub direction: Direction,
    pub adjacent: bool,
    pub isolation_db: f64,
    /// Detection probability per gate; zero for channels that do not
    /// terminate at Bob.
    pub prob_per_gate: f64,
}

/// Crosstalk of one channel into the quantum detectors. Only channels
/// received at Bob pass through his demultiplexer with the quantum signal.
pub fn channel_crosstalk(config: &LinkConfig, ch: &ClassicalChannel) -> ChannelCrosstalk {
    let plan = &config.plan;
    let isolation_db = plan.isolation_db(ch);
    let prob_per_gate = match ch.direction {
        Direction::TowardAlice => 0.0,
        Direction::TowardBob => {
            let rate = photon_rate_per_ns(ch.fibre_output_power_dbm(plan), plan.channel_wavelength_nm(ch));
            let filter_db = config
                .filter
                .as_ref()
                .map_or(0.0, |f| f.extinction_db + f.insertion_loss_db);
            let loss_db = isolation_db + config.protocol.bob_internal_loss_db + filter_db;
            rate * units::loss_db_to_transmission(loss_db) * config.detector.efficiency * config.detector.gate_width_ns
        }
    };
    ChannelCrosstalk {
        offset_ghz: ch.offset_ghz,
        direction: ch.direction,
        adjacent: plan.is_adjacent(ch),
        isolation_db,
        prob_per_gate,
    }
}

/// Total crosstalk detection probability per gate.
pub fn crosstalk_probability(config: &LinkConfig) -> f64 {
    config
        .plan
        .channels
        .iter()
        .map(|ch| channel_crosstalk(config, ch).prob_per_gate)
        .sum()
}

/// Degenerate products `(2f₁ − f₂, 2f₂ − f₁)` in offset coordinates.
pub fn degenerate_fwm_products(f1_offset_ghz: f64, f2_offset_ghz: f64) -> Result<(f64, f64)> {
    if f1_offset_ghz == f2_offset_ghz {
        return Err(Error::Domain(format!(
            "degenerate FWM needs two distinct frequencies, got {f1_offset_ghz} GHz twice"
        )));
    }
    Ok((2.0 * f1_offset_ghz - f2_offset_ghz, 2.0 * f2_offset_ghz - f1_offset_ghz))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwmProduct {
    pub pair_offsets_ghz: (f64, f64),
    pub direction: Direction,
    pub product_offset_ghz: f64,
    /// `|product| − passband/2`; zero or negative inside the passband.
    pub distance_to_passband_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwmReport {
    pub products: Vec<FwmProduct>,
    pub violations: Vec<FwmProduct>,
    /// Total classical launch power.
    pub launch_power_w: f64,
    /// γP₀L_eff.
    pub gamma_p0_l: f64,
    /// γP₀L with the physical length.
    pub gamma_p0_l_plain: f64,
    pub spontaneous_negligible: bool,
}

/// Degenerate products of every co-propagating channel pair, flagging those
/// that land inside the quantum passband.
pub fn fwm_products(plan: &ChannelPlan) -> Vec<FwmProduct> {
    let half = plan.quantum_passband_ghz() / 2.0;
    let mut out = Vec::new();
    for (i, a) in plan.channels.iter().enumerate() {
        for b in &plan.channels[i + 1..] {
            if a.direction != b.direction || a.offset_ghz == b.offset_ghz {
                continue;
            }
            let (p, m) = (
                2.0 * a.offset_ghz - b.offset_ghz,
                2.0 * b.offset_ghz - a.offset_ghz,
            );
            for prod in [p, m] {
                out.push(FwmProduct {
                    pair_offsets_ghz: (a.offset_ghz, b.offset_ghz),
                    direction: a.direction,
                    product_offset_ghz: prod,
                    distance_to_passband_ghz: prod.abs() - half,
                });
            }
        }
    }
    out
}

pub fn check_plan_fwm(config: &LinkConfig, length_km: f64) -> FwmReport {
    let products = fwm_products(&config.plan);
    let violations = products
        .iter()
        .filter(|p| p.distance_to_passband_ghz <= 0.0)
        .cloned()
        .collect();
    let fibre_loss = config.fibre.loss_db(length_km);
    let launch_power_w = config
        .plan
        .channels
        .iter()
        .map(|ch| units::dbm_to_watts(ch.launch_power_dbm(&config.plan, fibre_loss)))
        .sum();
    let gamma = config.nonlinear_gamma_per_w_km;
    let gamma_p0_l = nonlinear_phase_product(gamma, launch_power_w, length_km, config.fibre.alpha_per_km());
    FwmReport {
        products,
        violations,
        launch_power_w,
        gamma_p0_l,
        gamma_p0_l_plain: gamma * launch_power_w * length_km,
        spontaneous_negligible: gamma_p0_l < SPONTANEOUS_FWM_THRESHOLD,
    }
}

/// `(1 − e^{−αL})/α`, tending to `L` as α → 0.
pub fn effective_length_km(length_km: f64, alpha_per_km: f64) -> f64 {
    let x = alpha_per_km * length_km;
    if x.abs() < 1e-8 {
        length_km * (1.0 - x / 2.0)
    } else {
        -(-x).exp_m1() / alpha_per_km
    }
}

/// γ · P₀ · L_eff.
pub fn nonlinear_phase_product(gamma_per_w_km: f64, p0_w: f64, length_km: f64, alpha_per_km: f64) -> f64 {
    gamma_per_w_km * p0_w * effective_length_km(length_km, alpha_per_km)
}
