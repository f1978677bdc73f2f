//! Physical constants and unit conversions.

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * (p_w / 1e-3).log10()
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Transmission factor of a loss given in dB.
pub fn loss_db_to_transmission(loss_db: f64) -> f64 {
    db_to_linear(-loss_db)
}

/// Power attenuation coefficient in km⁻¹ from a dB/km figure.
pub fn alpha_db_to_per_km(alpha_db_per_km: f64) -> f64 {
    std::f64::consts::LN_10 / 10.0 * alpha_db_per_km
}

pub fn wavelength_nm_to_hz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

pub fn hz_to_wavelength_nm(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz * 1e9
}

pub fn photon_energy_j(wavelength_nm: f64) -> f64 {
    PLANCK * wavelength_nm_to_hz(wavelength_nm)
}

/// Wavelength of a channel sitting `offset_ghz` below the optical frequency of
/// `reference_nm`. Positive offsets are on the long-wavelength side.
pub fn offset_to_wavelength_nm(reference_nm: f64, offset_ghz: f64) -> f64 {
    hz_to_wavelength_nm(wavelength_nm_to_hz(reference_nm) - offset_ghz * 1e9)
}

/// Width in GHz of a passband `width_nm` wide centred on `center_nm`.
pub fn passband_nm_to_ghz(center_nm: f64, width_nm: f64) -> f64 {
    let lo = wavelength_nm_to_hz(center_nm + width_nm / 2.0);
    let hi = wavelength_nm_to_hz(center_nm - width_nm / 2.0);
    (hi - lo) / 1e9
}
