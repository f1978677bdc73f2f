//! Length sweeps, 1310/1550 nm band comparison, presets and calibration of
//! the Raman cross-section against an observed QBER.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    BandScaling, ChannelPlan, ClassicalChannel, DetectorSpec, Direction, FibreSpec, FilterSpec, LinkConfig, LinkSetup,
    Protocol, ProtocolConfig, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::keyrate::{link_budget, LinkBudget, MIN_KEY_RATE_BPS};
use crate::units;

pub const PRESET_NAMES: [&str; 5] = [
    "paper-default",
    "paper-default-filters",
    "dark-fibre",
    "10gbps-sfp",
    "low-dark-count-1310",
];

pub const CSV_COLUMNS: [&str; 17] = [
    "length_km",
    "protocol",
    "filters",
    "p_mu",
    "p_ram_f",
    "p_ram_b",
    "p_ct",
    "p_dc_gate",
    "p_ap",
    "qber",
    "qber_opt",
    "qber_det",
    "qber_wdm",
    "r_sift_hz",
    "i_ab",
    "i_ae",
    "r_sec_hz",
];

const QUANTUM_1550_NM: f64 = 1551.72;
const QUANTUM_1310_NM: f64 = 1310.0;
const ROOM_TEMPERATURE_K: f64 = 293.0;

/// Evenly spaced lengths from `min` to `max` inclusive.
pub fn length_grid(min_km: f64, max_km: f64, step_km: f64) -> Result<Vec<f64>> {
    if !(min_km.is_finite() && max_km.is_finite() && min_km >= 0.0) {
        return Err(Error::Domain("lengths must be finite and >= 0".into()));
    }
    if min_km > max_km {
        return Err(Error::Domain(format!("min {min_km} km exceeds max {max_km} km")));
    }
    if !(step_km.is_finite() && step_km > 0.0) {
        return Err(Error::Domain("step must be > 0".into()));
    }
    let n = ((max_km - min_km) / step_km + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min_km + i as f64 * step_km).collect())
}

/// One budget per length, in input order.
pub fn sweep_length(setup: &LinkSetup, lengths: &[f64]) -> Result<Vec<LinkBudget>> {
    if lengths.is_empty() {
        return Err(Error::Domain("no lengths to sweep".into()));
    }
    lengths.par_iter().map(|&l| link_budget(setup, l)).collect()
}

/// Longest fibre keeping the secret key rate at or above `min_rate_bps`,
/// assuming the rate falls with length. `None` if even 0 km falls short.
pub fn max_distance_km(setup: &LinkSetup, min_rate_bps: f64) -> Result<Option<f64>> {
    const STEP: f64 = 0.5;
    const LIMIT: f64 = 400.0;
    let ok = |l: f64| -> Result<bool> { Ok(link_budget(setup, l)?.r_sec_hz >= min_rate_bps) };
    if !ok(0.0)? {
        return Ok(None);
    }
    let mut lo = 0.0;
    while lo < LIMIT && ok(lo + STEP)? {
        lo += STEP;
    }
    if lo >= LIMIT {
        return Ok(Some(LIMIT));
    }
    let mut hi = lo + STEP;
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Mean phonon occupation `1/(e^{hν/kT} − 1)`.
pub fn phonon_occupation(shift_thz: f64, temperature_k: f64) -> f64 {
    let x = units::PLANCK * shift_thz * 1e12 / (units::BOLTZMANN * temperature_k);
    1.0 / x.exp_m1()
}

/// Frequency separation between a 1310 nm quantum channel and 1550 nm pumps.
pub fn band_separation_1310_thz() -> f64 {
    (units::wavelength_nm_to_hz(1310.0) - units::wavelength_nm_to_hz(1550.0)) / 1e12
}

/// How much weaker anti-Stokes Raman noise is at 1310 nm than at a quantum
/// channel `detuning_ghz` above the pumps.
pub fn band_noise_ratio(detuning_ghz: f64, temperature_k: f64) -> f64 {
    phonon_occupation(detuning_ghz / 1e3, temperature_k) / phonon_occupation(band_separation_1310_thz(), temperature_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "1550")]
    C1550,
    #[serde(rename = "1310")]
    O1310,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::C1550 => "1550",
            Band::O1310 => "1310",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandComparison {
    pub rows_1550: Vec<LinkBudget>,
    pub rows_1310: Vec<LinkBudget>,
    /// Band with the higher secret key rate per length; 1550 on ties.
    pub better: Vec<Band>,
    pub max_distance_1550_km: Option<f64>,
    pub max_distance_1310_km: Option<f64>,
}

impl BandComparison {
    /// Lengths at which the named band wins.
    pub fn lengths_won_by(&self, band: Band) -> Vec<f64> {
        self.rows_1550
            .iter()
            .zip(&self.better)
            .filter(|(_, b)| **b == band)
            .map(|(r, _)| r.length_km)
            .collect()
    }
}

pub fn compare_bands(setup_1550: &LinkSetup, setup_1310: &LinkSetup, lengths: &[f64]) -> Result<BandComparison> {
    let rows_1550 = sweep_length(setup_1550, lengths)?;
    let rows_1310 = sweep_length(setup_1310, lengths)?;
    let better = rows_1550
        .iter()
        .zip(&rows_1310)
        .map(|(a, b)| if b.r_sec_hz > a.r_sec_hz { Band::O1310 } else { Band::C1550 })
        .collect();
    Ok(BandComparison {
        rows_1550,
        rows_1310,
        better,
        max_distance_1550_km: max_distance_km(setup_1550, MIN_KEY_RATE_BPS)?,
        max_distance_1310_km: max_distance_km(setup_1310, MIN_KEY_RATE_BPS)?,
    })
}

/// Factor `s` such that multiplying the Raman cross-section by `s`
/// reproduces `observed_qber` at `length_km`. Relative to the current
/// `raman_scale`.
pub fn calibrate_rho(setup: &LinkSetup, observed_qber: f64, length_km: f64) -> Result<f64> {
    if !(observed_qber > 0.0 && observed_qber < 0.5) {
        return Err(Error::Unbracketable(format!(
            "target QBER {observed_qber} outside (0, 0.5)"
        )));
    }
    let base = setup.config.raman_scale;
    let q = |s: f64| -> Result<f64> { Ok(link_budget(&setup.with_raman_scale(base * s), length_km)?.qber_total) };
    let floor = q(0.0)?;
    if floor > observed_qber {
        return Err(Error::Unbracketable(format!(
            "target QBER {observed_qber} is below the Raman-free floor {floor:.6} at {length_km} km"
        )));
    }
    let mut hi = 1.0;
    while q(hi)? < observed_qber {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Unbracketable(format!(
                "target QBER {observed_qber} not reached by scaling the Raman cross-section"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = q(mid)?;
        if (v - observed_qber).abs() < 1e-10 {
            return Ok(mid);
        }
        if v < observed_qber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn channel(offset_ghz: f64, direction: Direction, receiver_power_dbm: f64) -> ClassicalChannel {
    ClassicalChannel {
        offset_ghz,
        direction,
        receiver_power_dbm,
        extra_launch_offset_db: 0.0,
    }
}

fn default_channels(receivers: [f64; 4]) -> Vec<ClassicalChannel> {
    [
        (200.0, Direction::TowardBob),
        (300.0, Direction::TowardBob),
        (400.0, Direction::TowardAlice),
        (500.0, Direction::TowardAlice),
    ]
    .into_iter()
    .zip(receivers)
    .map(|((o, d), p)| channel(o, d, p))
    .collect()
}

fn paper_default() -> LinkConfig {
    LinkConfig {
        schema_version: SCHEMA_VERSION,
        fibre: FibreSpec {
            length_km: 25.0,
            attenuation_db_per_km: 0.21,
            zero_dispersion_wavelength_nm: None,
        },
        plan: ChannelPlan {
            quantum_wavelength_nm: QUANTUM_1550_NM,
            quantum_passband_nm: 0.6,
            grid_spacing_ghz: 100.0,
            channels: default_channels([-28.0; 4]),
            isolation_adjacent_db: 59.0,
            isolation_nonadjacent_db: 82.0,
            dwdm_insertion_loss_db: 1.95,
        },
        detector: DetectorSpec {
            efficiency: 0.07,
            dark_count_prob_per_ns: 5e-6,
            gate_width_ns: 1.5,
            dead_time_us: 10.0,
            afterpulse_prob: 0.008,
        },
        protocol: ProtocolConfig {
            protocol: Protocol::Bb84,
            visibility: 0.994,
            pulse_rate_hz: 5e6,
            storage_line_km: 10.0,
            bob_internal_loss_db: 2.65,
            error_correction_inefficiency: 1.2,
            mean_photon_override: None,
        },
        filter: None,
        raman_profile_path: None,
        raman_scale: 1.0,
        nonlinear_gamma_per_w_km: 2.0,
        raman_band_scaling: None,
    }
}

/// The C-band channels of the default plan, re-expressed as offsets from a
/// 1310 nm quantum channel.
fn channels_for_1310() -> Vec<ClassicalChannel> {
    let f_ref = units::wavelength_nm_to_hz(QUANTUM_1550_NM);
    let f_q = units::wavelength_nm_to_hz(QUANTUM_1310_NM);
    default_channels([-28.0; 4])
        .into_iter()
        .map(|mut ch| {
            let f_ch = f_ref - ch.offset_ghz * 1e9;
            ch.offset_ghz = ((f_q - f_ch) / 1e6).round() / 1e3;
            ch
        })
        .collect()
}

pub fn preset(name: &str) -> Result<LinkConfig> {
    let mut cfg = paper_default();
    match name {
        "paper-default" => {}
        "paper-default-filters" => cfg.filter = Some(FilterSpec::default()),
        "dark-fibre" => {
            cfg.plan.channels.clear();
            cfg.plan.dwdm_insertion_loss_db = 0.0;
        }
        "10gbps-sfp" => {
            cfg.filter = Some(FilterSpec::default());
            cfg.plan.channels = default_channels([-28.0, -23.0, -28.0, -23.0]);
        }
        "low-dark-count-1310" => {
            cfg.fibre.attenuation_db_per_km = 0.35;
            cfg.plan.quantum_wavelength_nm = QUANTUM_1310_NM;
            // same optical bandwidth as 0.6 nm at 1551.72 nm
            cfg.plan.quantum_passband_nm = 0.428;
            cfg.plan.channels = channels_for_1310();
            cfg.plan.isolation_adjacent_db = 100.0;
            cfg.plan.isolation_nonadjacent_db = 100.0;
            cfg.detector.dark_count_prob_per_ns = 5e-8;
            cfg.raman_band_scaling = Some(BandScaling {
                reference_quantum_wavelength_nm: QUANTUM_1550_NM,
                temperature_k: ROOM_TEMPERATURE_K,
                pump_attenuation_db_per_km: Some(0.21),
            });
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    }
    Ok(cfg)
}

fn budget_fields(b: &LinkBudget) -> Vec<String> {
    let mut v = vec![
        format!("{:e}", b.length_km),
        b.protocol.name().to_string(),
        b.filters.to_string(),
    ];
    v.extend(
        [
            b.p_mu,
            b.p_ram_f,
            b.p_ram_b,
            b.p_ct,
            b.p_dc_per_gate,
            b.p_ap,
            b.qber_total,
            b.qber_opt,
            b.qber_det,
            b.qber_wdm,
            b.r_sift_hz,
            b.i_ab,
            b.i_ae,
            b.r_sec_hz,
        ]
        .iter()
        .map(|x| format!("{x:e}")),
    );
    v
}

/// Writes one row per budget, numbers in shortest round-trip scientific form.
pub fn write_budget_csv<W: Write>(out: W, rows: &[LinkBudget]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for b in rows {
        w.write_record(budget_fields(b))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Both sweeps in one table, with a leading `band` column.
pub fn write_band_csv<W: Write>(out: W, cmp: &BandComparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("band").chain(CSV_COLUMNS))?;
    for (band, rows) in [(Band::C1550, &cmp.rows_1550), (Band::O1310, &cmp.rows_1310)] {
        for b in rows {
            w.write_record(std::iter::once(band.label().to_string()).chain(budget_fields(b)))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(name: &str) -> LinkSetup {
        LinkSetup::new(preset(name).unwrap(), None).unwrap()
    }

    #[test]
    fn grid_inclusive() {
        assert_eq!(length_grid(0.0, 10.0, 2.5).unwrap(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(length_grid(3.0, 3.0, 1.0).unwrap(), vec![3.0]);
        assert!(length_grid(5.0, 1.0, 1.0).is_err());
        assert!(length_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_length_sweep_matches_budget() {
        let s = setup("paper-default");
        let rows = sweep_length(&s, &[17.0]).unwrap();
        assert_eq!(rows, vec![link_budget(&s, 17.0).unwrap()]);
        assert!(sweep_length(&s, &[]).is_err());
    }

    #[test]
    fn sweep_keeps_input_order() {
        let s = setup("paper-default-filters");
        let lengths = [50.0, 1.0, 35.0, 10.0, 41.0, 5.0, 25.0];
        let rows = sweep_length(&s, &lengths).unwrap();
        for (r, l) in rows.iter().zip(lengths) {
            assert_eq!(*r, link_budget(&s, l).unwrap());
        }
    }

    #[test]
    fn phonon_occupation_values() {
        assert_relative_eq!(phonon_occupation(13.0, 293.0), 0.134963, max_relative = 1e-5);
        assert!(phonon_occupation(1e4, 293.0) < 1e-300);
        let classical = units::BOLTZMANN * 293.0 / (units::PLANCK * 1e9);
        assert_relative_eq!(phonon_occupation(1e-3, 293.0), classical, max_relative = 1e-3);
    }

    #[test]
    fn band_ratio_values() {
        assert_relative_eq!(band_separation_1310_thz(), 35.44, max_relative = 1e-3);
        let r500 = band_noise_ratio(500.0, 293.0);
        assert_relative_eq!(r500, 3874.29, max_relative = 1e-5);
        assert!(band_noise_ratio(200.0, 293.0) > 9e3);
    }

    #[test]
    fn presets() {
        let d = preset("dark-fibre").unwrap();
        assert!(d.plan.channels.is_empty());
        assert_eq!(d.plan.dwdm_insertion_loss_db, 0.0);
        let p = preset("paper-default").unwrap();
        let offs: Vec<f64> = p.plan.channels.iter().map(|c| c.offset_ghz).collect();
        assert_eq!(offs, vec![200.0, 300.0, 400.0, 500.0]);
        assert!(p.plan.channels.iter().all(|c| c.receiver_power_dbm == -28.0));
        let sfp = preset("10gbps-sfp").unwrap();
        assert_eq!(sfp.plan.channels.iter().filter(|c| c.receiver_power_dbm == -23.0).count(), 2);
        let total = |c: &LinkConfig| -> f64 {
            c.plan.channels.iter().map(|ch| units::dbm_to_watts(ch.receiver_power_dbm)).sum()
        };
        assert_relative_eq!(units::linear_to_db(total(&sfp) / total(&p)), 3.2, epsilon = 0.05);
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn band_preset_keeps_physical_channel_positions() {
        let o = preset("low-dark-count-1310").unwrap();
        let p = preset("paper-default").unwrap();
        for (a, b) in o.plan.channels.iter().zip(&p.plan.channels) {
            let wa = o.plan.channel_wavelength_nm(a);
            let wb = p.plan.channel_wavelength_nm(b);
            assert!((wa - wb).abs() < 1e-5, "{wa} vs {wb}");
        }
        assert_relative_eq!(o.plan.quantum_passband_ghz(), p.plan.quantum_passband_ghz(), max_relative = 1e-3);
    }

    #[test]
    fn calibration_fixed_point() {
        let s = setup("paper-default");
        let q = link_budget(&s, 25.0).unwrap().qber_total;
        let k = calibrate_rho(&s, q, 25.0).unwrap();
        assert_relative_eq!(k, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn calibration_reproduces_target() {
        let s = setup("paper-default");
        let k = calibrate_rho(&s, 0.05, 30.0).unwrap();
        let q = link_budget(&s.with_raman_scale(k), 30.0).unwrap().qber_total;
        assert!((q - 0.05).abs() < 1e-6);
    }

    #[test]
    fn calibration_rejects_target_below_floor() {
        let s = setup("paper-default");
        let floor = link_budget(&s.with_raman_scale(0.0), 25.0).unwrap().qber_total;
        assert!(matches!(calibrate_rho(&s, floor * 0.5, 25.0), Err(Error::Unbracketable(_))));
        assert!(calibrate_rho(&s, 0.6, 25.0).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_tables() {
        let s = setup("paper-default");
        let cmp = compare_bands(&s, &s, &[1.0, 10.0, 30.0]).unwrap();
        assert_eq!(cmp.rows_1550, cmp.rows_1310);
        assert_eq!(cmp.max_distance_1550_km, cmp.max_distance_1310_km);
    }

    #[test]
    fn without_channels_1550_is_never_worse() {
        let c = setup("dark-fibre");
        let mut o = preset("low-dark-count-1310").unwrap();
        o.plan.channels.clear();
        o.detector.dark_count_prob_per_ns = 5e-6;
        let o = LinkSetup::new(o, None).unwrap();
        let mut c_cfg = c.config.clone();
        c_cfg.plan.dwdm_insertion_loss_db = 1.95;
        let c = LinkSetup::new(c_cfg, None).unwrap();
        let grid = length_grid(0.0, 80.0, 5.0).unwrap();
        let cmp = compare_bands(&c, &o, &grid).unwrap();
        assert!(cmp.lengths_won_by(Band::O1310).is_empty());
    }

    #[test]
    fn csv_schema_and_stability() {
        let s = setup("paper-default");
        let rows = sweep_length(&s, &[1.0, 25.0]).unwrap();
        let mut a = Vec::new();
        write_budget_csv(&mut a, &rows).unwrap();
        let mut b = Vec::new();
        write_budget_csv(&mut b, &rows).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), CSV_COLUMNS.len());
        assert_eq!(first[1], "bb84");
        assert_eq!(first[0].parse::<f64>().unwrap(), 1.0);
        assert_eq!(first[9].parse::<f64>().unwrap(), rows[0].qber_total);
    }

    #[test]
    fn max_distance_is_monotone_threshold() {
        let s = setup("paper-default-filters");
        let d = max_distance_km(&s, MIN_KEY_RATE_BPS).unwrap().unwrap();
        assert!(link_budget(&s, d).unwrap().r_sec_hz >= MIN_KEY_RATE_BPS);
        assert!(link_budget(&s, d + 0.01).unwrap().r_sec_hz < MIN_KEY_RATE_BPS);
    }

    proptest! {
        #[test]
        fn band_ratio_decreases_with_detuning(d in 10.0f64..20_000.0, k in 1.01f64..3.0) {
            prop_assert!(band_noise_ratio(d * k, 293.0) < band_noise_ratio(d, 293.0));
        }

        #[test]
        fn calibration_round_trip(target in 0.03f64..0.08) {
            let s = setup("paper-default");
            let k = calibrate_rho(&s, target, 25.0).unwrap();
            let q = link_budget(&s.with_raman_scale(k), 25.0).unwrap().qber_total;
            prop_assert!((q - target).abs() < 1e-6);
        }
    }
}
