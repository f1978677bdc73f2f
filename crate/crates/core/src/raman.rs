//! Spontaneous Raman scatter from classical channels into the quantum passband.
//!
//! A channel travelling toward Bob scatters forward along with the quantum
//! signal; a channel travelling toward Alice is launched at Bob's end and its
//! backscatter returns to Bob's detectors. With `P_out` the classical power at
//! the far fibre end and equal attenuation for pump and scatter:
//!
//! ```text
//! forward:  P = P_out · L · ρ · Δλ
//! backward: P = P_out · sinh(αL)/α · ρ · Δλ
//! ```

use serde::{Deserialize, Serialize};

use crate::config::{ClassicalChannel, Direction, LinkConfig};
use crate::error::{Error, Result};
use crate::profile::RamanProfile;
use crate::scenario::band_noise_ratio;
use crate::units;

/// A probability that may have been clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    pub fn new(raw: f64) -> Self {
        if raw > 1.0 {
            Self { value: 1.0, clamped: true }
        } else {
            Self { value: raw, clamped: false }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RamanResult {
    /// Scatter power inside the quantum passband at Bob's fibre end.
    pub power_forward_w: f64,
    pub power_backward_w: f64,
    pub prob_forward_per_gate: f64,
    pub prob_backward_per_gate: f64,
    /// Set when a probability had to be clamped to 1.
    pub clamped: bool,
}

impl RamanResult {
    pub fn total_probability(&self) -> f64 {
        self.prob_forward_per_gate + self.prob_backward_per_gate
    }
}

/// Linear interpolation of the tabulated cross-section.
pub fn cross_section_at(profile: &RamanProfile, wavelength_nm: f64) -> Result<f64> {
    let s = profile.samples();
    let (min_nm, max_nm) = profile.span_nm();
    if !(wavelength_nm >= min_nm && wavelength_nm <= max_nm) {
        return Err(Error::OutOfRange {
            wavelength_nm,
            min_nm,
            max_nm,
        });
    }
    let i = s.partition_point(|&(wl, _)| wl <= wavelength_nm);
    if i == s.len() {
        return Ok(s[s.len() - 1].1);
    }
    let (x0, y0) = s[i - 1];
    let (x1, y1) = s[i];
    if wavelength_nm == x0 {
        return Ok(y0);
    }
    Ok(y0 + (y1 - y0) * (wavelength_nm - x0) / (x1 - x0))
}

/// Wavelength at which to read a profile measured for `pump_nm` when the
/// observed band sits `offset_ghz` above the pump frequency.
pub fn pump_relative_wavelength_nm(pump_nm: f64, offset_ghz: f64) -> f64 {
    units::hz_to_wavelength_nm(units::wavelength_nm_to_hz(pump_nm) + offset_ghz * 1e9)
}

pub fn raman_power_forward(p_out_w: f64, length_km: f64, rho: f64, passband_nm: f64) -> f64 {
    p_out_w * length_km * rho * passband_nm
}

pub fn raman_power_backward(p_out_w: f64, length_km: f64, alpha_per_km: f64, rho: f64, passband_nm: f64) -> f64 {
    p_out_w * length_km * sinhc(alpha_per_km * length_km) * rho * passband_nm
}

/// sinh(x)/x, accurate near zero.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Detection probability per gate for light of `power_w` reaching the
/// receiver path in front of a detector.
pub fn count_probability(power_w: f64, wavelength_nm: f64, efficiency: f64, gate_ns: f64, extra_loss_db: f64) -> Clamped {
    let photons_per_s = power_w / units::photon_energy_j(wavelength_nm);
    Clamped::new(photons_per_s * 1e-9 * gate_ns * efficiency * units::loss_db_to_transmission(extra_loss_db))
}

/// Raman geometry shared by every channel of a configuration.
struct Geometry {
    alpha_per_km: f64,
    passband_nm: f64,
    photon_wavelength_nm: f64,
}

impl Geometry {
    fn of(config: &LinkConfig) -> Self {
        match &config.raman_band_scaling {
            None => Self {
                alpha_per_km: config.fibre.alpha_per_km(),
                passband_nm: config.plan.quantum_passband_nm,
                photon_wavelength_nm: config.plan.quantum_wavelength_nm,
            },
            Some(b) => {
                // same optical bandwidth, expressed at the reference wavelength
                let f_ref = units::wavelength_nm_to_hz(b.reference_quantum_wavelength_nm);
                let half = config.plan.quantum_passband_ghz() * 0.5e9;
                let width = units::hz_to_wavelength_nm(f_ref - half) - units::hz_to_wavelength_nm(f_ref + half);
                Self {
                    alpha_per_km: units::alpha_db_to_per_km(
                        b.pump_attenuation_db_per_km.unwrap_or(config.fibre.attenuation_db_per_km),
                    ),
                    passband_nm: width,
                    photon_wavelength_nm: b.reference_quantum_wavelength_nm,
                }
            }
        }
    }
}

/// Effective cross-section seen by the quantum channel from one classical
/// channel, including the configured scale factor.
pub fn channel_cross_section(config: &LinkConfig, profile: &RamanProfile, ch: &ClassicalChannel) -> Result<f64> {
    let rho = match &config.raman_band_scaling {
        None => cross_section_at(profile, pump_relative_wavelength_nm(profile.pump_wavelength_nm(), ch.offset_ghz))?,
        Some(b) => {
            let f_ch = units::wavelength_nm_to_hz(config.plan.quantum_wavelength_nm) - ch.offset_ghz * 1e9;
            let detuning_ghz = (units::wavelength_nm_to_hz(b.reference_quantum_wavelength_nm) - f_ch) / 1e9;
            if detuning_ghz <= 0.0 {
                return Err(Error::Domain(format!(
                    "band scaling needs channels below the reference frequency; channel at {:.3} nm is {detuning_ghz:.1} GHz away",
                    units::hz_to_wavelength_nm(f_ch)
                )));
            }
            let q = pump_relative_wavelength_nm(profile.pump_wavelength_nm(), detuning_ghz);
            cross_section_at(profile, q)? / band_noise_ratio(detuning_ghz, b.temperature_k)
        }
    };
    Ok(rho * config.raman_scale)
}

/// Forward and backward Raman count probabilities per gate at Bob's
/// detectors, summed over all classical channels.
pub fn total_raman_probability(config: &LinkConfig, profile: &RamanProfile, length_km: f64) -> Result<RamanResult> {
    let geo = Geometry::of(config);
    let mut out = RamanResult::default();
    for ch in &config.plan.channels {
        let rho = channel_cross_section(config, profile, ch)?;
        let p_out = units::dbm_to_watts(ch.fibre_output_power_dbm(&config.plan));
        match ch.direction {
            Direction::TowardBob => {
                out.power_forward_w += raman_power_forward(p_out, length_km, rho, geo.passband_nm);
            }
            Direction::TowardAlice => {
                out.power_backward_w += raman_power_backward(p_out, length_km, geo.alpha_per_km, rho, geo.passband_nm);
            }
        }
    }
    let factor = config.noise_filter_factor();
    let loss = config.receiver_path_loss_db();
    let det = &config.detector;
    let f = count_probability(out.power_forward_w * factor, geo.photon_wavelength_nm, det.efficiency, det.gate_width_ns, loss);
    let b = count_probability(out.power_backward_w * factor, geo.photon_wavelength_nm, det.efficiency, det.gate_width_ns, loss);
    out.prob_forward_per_gate = f.value;
    out.prob_backward_per_gate = b.value;
    out.clamped = f.clamped || b.clamped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_point() -> RamanProfile {
        RamanProfile::new(1550.0, 293.0, vec![(1540.0, 2e-9), (1560.0, 4e-9)]).unwrap()
    }

    /// Composite Simpson rule.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    /// Scatter generated along the fibre and attenuated on its way to Bob.
    fn quadrature(p_out: f64, l: f64, alpha: f64, rho: f64, dl: f64, forward: bool) -> f64 {
        let p_in = p_out * (alpha * l).exp();
        let element = |x: f64| {
            let pump = p_in * (-alpha * x).exp();
            let path = if forward { l - x } else { x };
            pump * rho * dl * (-alpha * path).exp()
        };
        simpson(element, 0.0, l, 4000)
    }

    #[test]
    fn interpolation_midpoint_and_nodes() {
        let p = two_point();
        assert_relative_eq!(cross_section_at(&p, 1550.0).unwrap(), 3e-9, max_relative = 1e-12);
        assert_eq!(cross_section_at(&p, 1540.0).unwrap(), 2e-9);
        assert_eq!(cross_section_at(&p, 1560.0).unwrap(), 4e-9);
    }

    #[test]
    fn interpolation_out_of_range_names_span() {
        let err = cross_section_at(&two_point(), 1539.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1540") && msg.contains("1560"), "{msg}");
    }

    #[test]
    fn interpolation_exact_at_every_node() {
        let p = RamanProfile::synthetic_default();
        for &(wl, rho) in p.samples() {
            assert_eq!(cross_section_at(&p, wl).unwrap(), rho);
        }
    }

    #[test]
    fn forward_reference_value() {
        assert_relative_eq!(raman_power_forward(1e-3, 10.0, 2e-9, 0.045), 9.0e-13, max_relative = 1e-12);
        assert_eq!(raman_power_forward(1e-3, 0.0, 2e-9, 0.045), 0.0);
    }

    #[test]
    fn backward_reference_value() {
        // frozen from the quadrature oracle below
        let p = raman_power_backward(1e-3, 10.0, 0.04835, 2e-9, 0.045);
        let oracle = quadrature(1e-3, 10.0, 0.04835, 2e-9, 0.045, false);
        assert_relative_eq!(p, oracle, max_relative = 1e-9);
        assert_relative_eq!(p, 9.3548e-13, max_relative = 1e-4);
        assert_eq!(raman_power_backward(1e-3, 0.0, 0.04835, 2e-9, 0.045), 0.0);
    }

    #[test]
    fn backward_small_alpha_limit() {
        let f = raman_power_forward(1e-3, 10.0, 2e-9, 0.045);
        assert_relative_eq!(raman_power_backward(1e-3, 10.0, 1e-12, 2e-9, 0.045), f, max_relative = 1e-12);
        assert_relative_eq!(raman_power_backward(1e-3, 10.0, 0.0, 2e-9, 0.045), f, max_relative = 1e-12);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let l = 20.0;
        for i in 0..50 {
            let al = 1e-4 * (3.0f64 / 1e-4).powf(i as f64 / 49.0);
            let alpha = al / l;
            let f = raman_power_forward(1e-3, l, 1e-9, 0.6);
            let b = raman_power_backward(1e-3, l, alpha, 1e-9, 0.6);
            assert_relative_eq!(f, quadrature(1e-3, l, alpha, 1e-9, 0.6, true), max_relative = 1e-6);
            assert_relative_eq!(b, quadrature(1e-3, l, alpha, 1e-9, 0.6, false), max_relative = 1e-6);
        }
    }

    #[test]
    fn count_probability_reference() {
        // 1e-4 photons per ns at 1550 nm
        let power = 1e-4 * 1e9 * units::photon_energy_j(1550.0);
        let p = count_probability(power, 1550.0, 0.07, 1.0, 2.65);
        assert!(!p.clamped);
        assert_relative_eq!(p.value, 3.80275e-6, max_relative = 1e-4);
        assert_eq!(count_probability(0.0, 1550.0, 0.07, 1.0, 2.65).value, 0.0);
    }

    #[test]
    fn count_probability_clamps_with_flag() {
        let power = 1e3 * 1e9 * units::photon_energy_j(1550.0);
        let p = count_probability(power, 1550.0, 1.0, 1.0, 0.0);
        assert_eq!(p.value, 1.0);
        assert!(p.clamped);
    }

    #[test]
    fn pump_relative_query_is_anti_stokes_for_positive_offsets() {
        let q = pump_relative_wavelength_nm(1550.0, 500.0);
        assert!(q < 1550.0);
        assert_relative_eq!(q, 1546.0, epsilon = 0.05);
    }

    #[test]
    fn empty_plan_has_no_raman() {
        let mut cfg = preset("paper-default").unwrap();
        cfg.plan.channels.clear();
        let r = total_raman_probability(&cfg, &RamanProfile::synthetic_default(), 25.0).unwrap();
        assert_eq!(r.total_probability(), 0.0);
    }

    #[test]
    fn default_plan_magnitude_and_filter_scaling() {
        let cfg = preset("paper-default").unwrap();
        let prof = RamanProfile::synthetic_default();
        let r = total_raman_probability(&cfg, &prof, 25.0).unwrap();
        assert!(r.total_probability() > 1e-6 && r.total_probability() < 1e-4, "{r:?}");
        assert!(r.prob_backward_per_gate > r.prob_forward_per_gate);

        let mut cf = cfg.clone();
        cf.filter = Some(crate::FilterSpec {
            insertion_loss_db: 0.0,
            ..Default::default()
        });
        let rf = total_raman_probability(&cf, &prof, 25.0).unwrap();
        assert_relative_eq!(rf.total_probability(), 0.15 * r.total_probability(), max_relative = 1e-12);
    }

    #[test]
    fn scale_factor_is_linear() {
        let cfg = preset("paper-default").unwrap();
        let prof = RamanProfile::synthetic_default();
        let r1 = total_raman_probability(&cfg, &prof, 25.0).unwrap();
        let mut c2 = cfg.clone();
        c2.raman_scale *= 3.0;
        let r3 = total_raman_probability(&c2, &prof, 25.0).unwrap();
        assert_relative_eq!(r3.total_probability(), 3.0 * r1.total_probability(), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn backward_dominates_forward(l in 1e-3f64..200.0, a in 1e-4f64..1.0) {
            let f = raman_power_forward(1.0, l, 1.0, 1.0);
            let b = raman_power_backward(1.0, l, a, 1.0, 1.0);
            prop_assert!(b >= f);
        }

        #[test]
        fn powers_increase_with_length(l in 0.0f64..150.0, dl in 1e-3f64..10.0, a in 1e-4f64..0.2) {
            prop_assert!(raman_power_forward(1e-3, l + dl, 1e-9, 0.6) > raman_power_forward(1e-3, l, 1e-9, 0.6));
            prop_assert!(raman_power_backward(1e-3, l + dl, a, 1e-9, 0.6) > raman_power_backward(1e-3, l, a, 1e-9, 0.6));
        }

        #[test]
        fn interpolation_stays_within_bracket(x in 1540.0f64..=1560.0) {
            let r = cross_section_at(&two_point(), x).unwrap();
            prop_assert!((2e-9..=4e-9).contains(&r));
        }
    }
}
