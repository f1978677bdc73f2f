//! Link configuration: fibre, channel plan, detector, protocol and filter.
//!
//! Configurations are stored as JSON documents carrying a `schema_version`.
//! Serialising a loaded configuration with [`LinkConfig::to_json`] yields a
//! canonical form, so load/save cycles are idempotent.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{load_raman_profile, RamanProfile};
use crate::units;

pub const SCHEMA_VERSION: u32 = 1;

/// Transceiver sanity range for received powers, dBm.
const RECEIVER_POWER_RANGE_DBM: (f64, f64) = (-40.0, 5.0);
const MAX_ATTENUATION_DB_PER_KM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibreSpec {
    pub length_km: f64,
    /// Assumed flat over the span of the channel plan.
    pub attenuation_db_per_km: f64,
    #[serde(default)]
    pub zero_dispersion_wavelength_nm: Option<f64>,
}

impl FibreSpec {
    pub fn alpha_per_km(&self) -> f64 {
        units::alpha_db_to_per_km(self.attenuation_db_per_km)
    }

    pub fn loss_db(&self, length_km: f64) -> f64 {
        self.attenuation_db_per_km * length_km
    }

    pub fn transmission(&self, length_km: f64) -> f64 {
        units::loss_db_to_transmission(self.loss_db(length_km))
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km >= 0.0) {
            return Err(Error::invariant("fibre.length_km", "must be finite and >= 0"));
        }
        let a = self.attenuation_db_per_km;
        if !(a > 0.0 && a <= MAX_ATTENUATION_DB_PER_KM) {
            return Err(Error::invariant(
                "fibre.attenuation_db_per_km",
                format!("{a} outside (0, {MAX_ATTENUATION_DB_PER_KM}]"),
            ));
        }
        Ok(())
    }
}

/// Propagation direction of a classical channel. The quantum signal always
/// travels toward Bob, where the single-photon detectors sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TowardBob,
    TowardAlice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalChannel {
    /// Optical frequency of the quantum channel minus that of this channel.
    /// Positive offsets sit on the long-wavelength side of the quantum channel.
    pub offset_ghz: f64,
    pub direction: Direction,
    pub receiver_power_dbm: f64,
    /// Loss between the fibre end and this channel's receiver on top of the
    /// plan-wide DWDM insertion loss.
    #[serde(default)]
    pub extra_launch_offset_db: f64,
}

impl ClassicalChannel {
    /// Power of this channel at the fibre end facing its receiver.
    pub fn fibre_output_power_dbm(&self, plan: &ChannelPlan) -> f64 {
        self.receiver_power_dbm + plan.dwdm_insertion_loss_db + self.extra_launch_offset_db
    }

    /// Power launched into the fibre for a span of `fibre_loss_db`.
    pub fn launch_power_dbm(&self, plan: &ChannelPlan, fibre_loss_db: f64) -> f64 {
        self.fibre_output_power_dbm(plan) + fibre_loss_db
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelPlan {
    pub quantum_wavelength_nm: f64,
    pub quantum_passband_nm: f64,
    pub grid_spacing_ghz: f64,
    pub channels: Vec<ClassicalChannel>,
    pub isolation_adjacent_db: f64,
    pub isolation_nonadjacent_db: f64,
    /// Insertion loss of one DWDM module. Classical receivers see it once and
    /// the quantum channel sees it once, at Bob's demultiplexer.
    pub dwdm_insertion_loss_db: f64,
}

impl ChannelPlan {
    pub fn quantum_passband_ghz(&self) -> f64 {
        units::passband_nm_to_ghz(self.quantum_wavelength_nm, self.quantum_passband_nm)
    }

    pub fn channel_wavelength_nm(&self, ch: &ClassicalChannel) -> f64 {
        units::offset_to_wavelength_nm(self.quantum_wavelength_nm, ch.offset_ghz)
    }

    pub fn is_adjacent(&self, ch: &ClassicalChannel) -> bool {
        (ch.offset_ghz.abs() / self.grid_spacing_ghz).round() <= 1.0
    }

    pub fn isolation_db(&self, ch: &ClassicalChannel) -> f64 {
        if self.is_adjacent(ch) {
            self.isolation_adjacent_db
        } else {
            self.isolation_nonadjacent_db
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.quantum_wavelength_nm.is_finite() && self.quantum_wavelength_nm > 0.0) {
            return Err(Error::invariant("plan.quantum_wavelength_nm", "must be positive"));
        }
        if !(self.grid_spacing_ghz.is_finite() && self.grid_spacing_ghz > 0.0) {
            return Err(Error::invariant("plan.grid_spacing_ghz", "must be positive"));
        }
        if !(self.quantum_passband_nm.is_finite() && self.quantum_passband_nm > 0.0) {
            return Err(Error::invariant("plan.quantum_passband_nm", "must be positive"));
        }
        if self.quantum_passband_ghz() > self.grid_spacing_ghz {
            return Err(Error::invariant(
                "plan.quantum_passband_nm",
                format!(
                    "{} nm ({:.1} GHz) wider than the {} GHz grid",
                    self.quantum_passband_nm,
                    self.quantum_passband_ghz(),
                    self.grid_spacing_ghz
                ),
            ));
        }
        for (field, v) in [
            ("plan.isolation_adjacent_db", self.isolation_adjacent_db),
            ("plan.isolation_nonadjacent_db", self.isolation_nonadjacent_db),
            ("plan.dwdm_insertion_loss_db", self.dwdm_insertion_loss_db),
        ] {
            // infinite isolation is allowed and means no leakage
            if v.is_nan() || v < 0.0 {
                return Err(Error::invariant(field, "must be >= 0"));
            }
        }
        for (i, ch) in self.channels.iter().enumerate() {
            let field = |f: &str| format!("plan.channels[{i}].{f}");
            if !ch.offset_ghz.is_finite() || ch.offset_ghz.abs() < self.grid_spacing_ghz * (1.0 - 1e-9) {
                return Err(Error::invariant(
                    field("offset_ghz"),
                    format!("|{}| is below the grid spacing {}", ch.offset_ghz, self.grid_spacing_ghz),
                ));
            }
            let (lo, hi) = RECEIVER_POWER_RANGE_DBM;
            if !(ch.receiver_power_dbm >= lo && ch.receiver_power_dbm <= hi) {
                return Err(Error::invariant(
                    field("receiver_power_dbm"),
                    format!("{} outside [{lo}, {hi}] dBm", ch.receiver_power_dbm),
                ));
            }
            if !(ch.extra_launch_offset_db.is_finite() && ch.extra_launch_offset_db >= 0.0) {
                return Err(Error::invariant(field("extra_launch_offset_db"), "must be >= 0"));
            }
            if self.channels[..i]
                .iter()
                .any(|o| o.direction == ch.direction && o.offset_ghz == ch.offset_ghz)
            {
                return Err(Error::invariant(
                    field("offset_ghz"),
                    format!("duplicate offset {} GHz for direction {:?}", ch.offset_ghz, ch.direction),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_count_prob_per_ns: f64,
    pub gate_width_ns: f64,
    pub dead_time_us: f64,
    pub afterpulse_prob: f64,
}

impl DetectorSpec {
    pub fn dark_count_per_gate(&self) -> f64 {
        self.dark_count_prob_per_ns * self.gate_width_ns
    }

    pub fn dead_time_s(&self) -> f64 {
        self.dead_time_us * 1e-6
    }

    fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invariant("detector.efficiency", "must lie in (0, 1]"));
        }
        if !(self.dark_count_prob_per_ns.is_finite() && self.dark_count_prob_per_ns >= 0.0) {
            return Err(Error::invariant("detector.dark_count_prob_per_ns", "must be >= 0"));
        }
        if !(self.gate_width_ns.is_finite() && self.gate_width_ns > 0.0) {
            return Err(Error::invariant("detector.gate_width_ns", "must be > 0"));
        }
        if !(self.dead_time_us.is_finite() && self.dead_time_us >= 0.0) {
            return Err(Error::invariant("detector.dead_time_us", "must be >= 0"));
        }
        if !(self.afterpulse_prob >= 0.0 && self.afterpulse_prob < 1.0) {
            return Err(Error::invariant("detector.afterpulse_prob", "must lie in [0, 1)"));
        }
        if self.dark_count_per_gate() > 1.0 {
            return Err(Error::invariant(
                "detector.dark_count_prob_per_ns",
                "dark count probability per gate exceeds 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    Sarg,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Sarg => "sarg",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "sarg" | "sarg04" => Ok(Protocol::Sarg),
            _ => Err(Error::invariant("protocol", format!("unknown protocol {s:?}"))),
        }
    }
}

fn default_eta_ec() -> f64 {
    1.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub visibility: f64,
    pub pulse_rate_hz: f64,
    pub storage_line_km: f64,
    /// Loss of Bob's own optics, excluding DWDM modules and the optional filter.
    pub bob_internal_loss_db: f64,
    #[serde(default = "default_eta_ec")]
    pub error_correction_inefficiency: f64,
    #[serde(default)]
    pub mean_photon_override: Option<f64>,
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::invariant("protocol.visibility", "must lie in (0, 1]"));
        }
        if !(self.pulse_rate_hz.is_finite() && self.pulse_rate_hz > 0.0) {
            return Err(Error::invariant("protocol.pulse_rate_hz", "must be > 0"));
        }
        if !(self.storage_line_km.is_finite() && self.storage_line_km >= 0.0) {
            return Err(Error::invariant("protocol.storage_line_km", "must be >= 0"));
        }
        if !(self.bob_internal_loss_db.is_finite() && self.bob_internal_loss_db >= 0.0) {
            return Err(Error::invariant("protocol.bob_internal_loss_db", "must be >= 0"));
        }
        if !(self.error_correction_inefficiency.is_finite() && self.error_correction_inefficiency >= 1.0) {
            return Err(Error::invariant("protocol.error_correction_inefficiency", "must be >= 1"));
        }
        if let Some(mu) = self.mean_photon_override {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invariant("protocol.mean_photon_override", "must be > 0"));
            }
        }
        Ok(())
    }
}

fn default_rejection() -> f64 {
    0.85
}

/// Narrowband filter placed in front of each detector.
///
/// Only `noise_rejection_fraction` and `insertion_loss_db` act on Raman noise;
/// `extinction_db` acts on out-of-band crosstalk. `passband_pm` is kept for
/// documentation and is not used to derive the rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub passband_pm: f64,
    pub extinction_db: f64,
    pub insertion_loss_db: f64,
    #[serde(default = "default_rejection")]
    pub noise_rejection_fraction: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            passband_pm: 45.0,
            extinction_db: 14.0,
            insertion_loss_db: 2.0,
            noise_rejection_fraction: 0.85,
        }
    }
}

impl FilterSpec {
    fn validate(&self) -> Result<()> {
        if !(self.passband_pm.is_finite() && self.passband_pm > 0.0) {
            return Err(Error::invariant("filter.passband_pm", "must be > 0"));
        }
        if self.extinction_db.is_nan() || self.extinction_db < 0.0 {
            return Err(Error::invariant("filter.extinction_db", "must be >= 0"));
        }
        if !(self.insertion_loss_db.is_finite() && self.insertion_loss_db >= 0.0) {
            return Err(Error::invariant("filter.insertion_loss_db", "must be >= 0"));
        }
        if !(self.noise_rejection_fraction >= 0.0 && self.noise_rejection_fraction < 1.0) {
            return Err(Error::invariant("filter.noise_rejection_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Raman noise for a quantum channel outside the band covered by the profile
/// (e.g. 1310 nm with C-band classical channels).
///
/// Each channel's cross-section is read from the profile as if the quantum
/// channel sat at `reference_quantum_wavelength_nm`, then divided by the
/// anti-Stokes phonon occupation ratio between that reference detuning and
/// the 1310/1550 band separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandScaling {
    pub reference_quantum_wavelength_nm: f64,
    pub temperature_k: f64,
    /// Attenuation seen by the C-band pumps and the scatter geometry. Falls
    /// back to the fibre attenuation when absent.
    #[serde(default)]
    pub pump_attenuation_db_per_km: Option<f64>,
}

impl BandScaling {
    fn validate(&self) -> Result<()> {
        if !(self.reference_quantum_wavelength_nm > 0.0) {
            return Err(Error::invariant(
                "raman_band_scaling.reference_quantum_wavelength_nm",
                "must be positive",
            ));
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::invariant("raman_band_scaling.temperature_k", "must be positive"));
        }
        if let Some(a) = self.pump_attenuation_db_per_km {
            if !(a > 0.0 && a <= MAX_ATTENUATION_DB_PER_KM) {
                return Err(Error::invariant(
                    "raman_band_scaling.pump_attenuation_db_per_km",
                    "outside (0, 5]",
                ));
            }
        }
        Ok(())
    }
}

fn default_scale() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub schema_version: u32,
    pub fibre: FibreSpec,
    pub plan: ChannelPlan,
    pub detector: DetectorSpec,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub filter: Option<FilterSpec>,
    /// CSV profile, relative to the config file. The bundled synthetic
    /// profile is used when absent.
    #[serde(default)]
    pub raman_profile_path: Option<String>,
    /// Multiplier applied to the profile's cross-section (set by calibration).
    #[serde(default = "default_scale")]
    pub raman_scale: f64,
    /// Fibre nonlinear coefficient γ in 1/(W·km).
    #[serde(default = "default_gamma")]
    pub nonlinear_gamma_per_w_km: f64,
    #[serde(default)]
    pub raman_band_scaling: Option<BandScaling>,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invariant(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.fibre.validate()?;
        self.plan.validate()?;
        self.detector.validate()?;
        self.protocol.validate()?;
        if let Some(f) = &self.filter {
            f.validate()?;
        }
        if let Some(b) = &self.raman_band_scaling {
            b.validate()?;
        }
        if !(self.raman_scale.is_finite() && self.raman_scale >= 0.0) {
            return Err(Error::invariant("raman_scale", "must be finite and >= 0"));
        }
        if !(self.nonlinear_gamma_per_w_km.is_finite() && self.nonlinear_gamma_per_w_km >= 0.0) {
            return Err(Error::invariant("nonlinear_gamma_per_w_km", "must be >= 0"));
        }
        Ok(())
    }

    pub fn filter_insertion_loss_db(&self) -> f64 {
        self.filter.as_ref().map_or(0.0, |f| f.insertion_loss_db)
    }

    /// Loss between the fibre end and Bob's detectors for light inside the
    /// quantum passband: one DWDM demultiplexer, Bob's optics and the filter.
    pub fn receiver_path_loss_db(&self) -> f64 {
        self.plan.dwdm_insertion_loss_db + self.protocol.bob_internal_loss_db + self.filter_insertion_loss_db()
    }

    /// Fraction of in-band Raman photons that survive the filter.
    pub fn noise_filter_factor(&self) -> f64 {
        self.filter.as_ref().map_or(1.0, |f| 1.0 - f.noise_rejection_fraction)
    }

    /// Transmission of the quantum channel from Alice to Bob's DWDM output:
    /// fibre loss plus one DWDM insertion loss. This is the `t` that sets the
    /// optimal mean photon number and enters the eavesdropper's information.
    pub fn link_transmission(&self, length_km: f64) -> f64 {
        self.fibre.transmission(length_km) * units::loss_db_to_transmission(self.plan.dwdm_insertion_loss_db)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: LinkConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// A validated configuration together with its resolved Raman profile.
#[derive(Debug, Clone)]
pub struct LinkSetup {
    pub config: LinkConfig,
    pub profile: Arc<RamanProfile>,
}

impl LinkSetup {
    /// Resolves `raman_profile_path` against `base_dir`.
    pub fn new(config: LinkConfig, base_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let profile = match &config.raman_profile_path {
            Some(p) => {
                let mut path = PathBuf::from(p);
                if path.is_relative() {
                    if let Some(base) = base_dir {
                        path = base.join(path);
                    }
                }
                load_raman_profile(path)?
            }
            None => RamanProfile::synthetic_default(),
        };
        Ok(Self {
            config,
            profile: Arc::new(profile),
        })
    }

    pub fn with_profile(config: LinkConfig, profile: RamanProfile) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            profile: Arc::new(profile),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let config = LinkConfig::load(path)?;
        Self::new(config, path.parent())
    }

    /// Copy with the configuration edited by `f`; the profile is shared.
    pub fn map_config(&self, f: impl FnOnce(&mut LinkConfig)) -> Result<Self> {
        let mut config = self.config.clone();
        f(&mut config);
        config.validate()?;
        Ok(Self {
            config,
            profile: Arc::clone(&self.profile),
        })
    }

    pub fn with_protocol(&self, protocol: Protocol) -> Self {
        let mut s = self.clone();
        s.config.protocol.protocol = protocol;
        s
    }

    /// Enables the configured filter (or the default one) or removes it.
    pub fn with_filters(&self, enabled: bool) -> Self {
        let mut s = self.clone();
        s.config.filter = if enabled {
            Some(s.config.filter.take().unwrap_or_default())
        } else {
            None
        };
        s
    }

    pub fn with_raman_scale(&self, scale: f64) -> Self {
        let mut s = self.clone();
        s.config.raman_scale = scale;
        s
    }
}
