//! Tabulated effective Raman cross-section ρ(λ) and its CSV format.
//!
//! ```text
//! # pump_nm=1550
//! # temperature_K=293
//! wavelength_nm,rho_per_km_per_nm
//! 1540.0,2.0e-9
//! 1560.0,3.0e-9
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER: &str = "wavelength_nm,rho_per_km_per_nm";
const DEFAULT_TEMPERATURE_K: f64 = 293.0;

static SYNTHETIC_CSV: &str = include_str!("../data/synthetic_raman_1550nm.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanProfile {
    pump_wavelength_nm: f64,
    temperature_k: f64,
    /// `(wavelength_nm, rho per km per nm)`, strictly increasing in wavelength.
    samples: Vec<(f64, f64)>,
}

impl RamanProfile {
    pub fn new(pump_wavelength_nm: f64, temperature_k: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if !(pump_wavelength_nm.is_finite() && pump_wavelength_nm > 0.0) {
            return Err(Error::invariant("pump_nm", "must be a positive wavelength"));
        }
        if !(temperature_k.is_finite() && temperature_k > 0.0) {
            return Err(Error::invariant("temperature_K", "must be positive"));
        }
        if samples.len() < 2 {
            return Err(Error::invariant("samples", "at least 2 samples required"));
        }
        for (i, &(wl, rho)) in samples.iter().enumerate() {
            if !wl.is_finite() {
                return Err(Error::invariant("wavelength_nm", format!("sample {i} is not finite")));
            }
            if !rho.is_finite() {
                return Err(Error::invariant("rho_per_km_per_nm", format!("sample {i} is not finite")));
            }
            if rho < 0.0 {
                return Err(Error::invariant(
                    "rho_per_km_per_nm",
                    format!("negative cross-section {rho} at {wl} nm"),
                ));
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::invariant(
                "wavelength_nm",
                format!("unsorted samples: {} nm follows {} nm", w[1].0, w[0].0),
            ));
        }
        Ok(Self {
            pump_wavelength_nm,
            temperature_k,
            samples,
        })
    }

    /// The bundled synthetic profile for a 1550 nm pump at room temperature.
    pub fn synthetic_default() -> Self {
        parse_csv(SYNTHETIC_CSV, "<synthetic>").expect("bundled profile is valid")
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        self.pump_wavelength_nm
    }

    pub fn temperature_k(&self) -> f64 {
        self.temperature_k
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn span_nm(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Profiles are allowed to be tabulated away from their pump, but callers
    /// usually want to know about it.
    pub fn pump_outside_samples(&self) -> bool {
        let (lo, hi) = self.span_nm();
        self.pump_wavelength_nm < lo || self.pump_wavelength_nm > hi
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# pump_nm={}\n# temperature_K={}\n{HEADER}\n",
            self.pump_wavelength_nm, self.temperature_k
        );
        for &(wl, rho) in &self.samples {
            out.push_str(&format!("{wl},{rho:e}\n"));
        }
        out
    }
}

pub fn load_raman_profile(path: impl AsRef<Path>) -> Result<RamanProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, &path.display().to_string())
}

pub fn parse_csv(text: &str, origin: &str) -> Result<RamanProfile> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut pump = None;
    let mut temperature = None;
    let mut seen_header = false;
    let mut samples = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                let slot = match key.trim() {
                    "pump_nm" => &mut pump,
                    "temperature_K" => &mut temperature,
                    _ => continue,
                };
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value for {}: {value:?}", key.trim())))?;
                *slot = Some(v);
            }
            continue;
        }
        if !seen_header {
            if line.replace(' ', "") != HEADER {
                return Err(parse_err(lineno, format!("expected header `{HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(lineno, "expected two comma-separated values".into()));
        };
        let wl: f64 = a
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad wavelength {a:?}")))?;
        let rho: f64 = b
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad cross-section {b:?}")))?;
        samples.push((wl, rho));
    }
    if !seen_header {
        return Err(parse_err(text.lines().count().max(1), "missing header line".into()));
    }
    let pump = pump.ok_or_else(|| Error::invariant("pump_nm", "missing `# pump_nm=` metadata"))?;
    RamanProfile::new(pump, temperature.unwrap_or(DEFAULT_TEMPERATURE_K), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    const META: &str = "# pump_nm=1550\n# temperature_K=293\nwavelength_nm,rho_per_km_per_nm\n";

    #[test]
    fn two_row_profile() {
        let p = parse_csv(&format!("{META}1540,2e-9\n1560,3e-9\n"), "t").unwrap();
        assert_eq!(p.samples().len(), 2);
        assert_eq!(p.pump_wavelength_nm(), 1550.0);
        assert_eq!(p.temperature_k(), 293.0);
        assert!(!p.pump_outside_samples());
    }

    #[test]
    fn descending_rejected() {
        let err = parse_csv(&format!("{META}1560,2e-9\n1540,3e-9\n"), "t").unwrap_err();
        assert!(err.to_string().contains("unsorted"), "{err}");
    }

    #[test]
    fn negative_rejected() {
        let err = parse_csv(&format!("{META}1540,-1\n1560,3e-9\n"), "t").unwrap_err();
        assert!(err.to_string().contains("negative cross-section"), "{err}");
        assert!(err.to_string().contains("rho_per_km_per_nm"));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse_csv(&format!("{META}1540,2e-9\n1550,abc\n"), "f.csv").unwrap_err();
        assert_eq!(err.to_string(), "f.csv: line 5: bad cross-section \"abc\"");
    }

    #[test]
    fn single_sample_rejected() {
        assert!(parse_csv(&format!("{META}1540,2e-9\n"), "t").is_err());
    }

    #[test]
    fn missing_pump_rejected() {
        let err = parse_csv("wavelength_nm,rho_per_km_per_nm\n1,1\n2,2\n", "t").unwrap_err();
        assert!(err.to_string().contains("pump_nm"));
    }

    #[test]
    fn pump_outside_warns_not_errors() {
        let p = parse_csv("# pump_nm=1300\nwavelength_nm,rho_per_km_per_nm\n1540,1\n1560,1\n", "t").unwrap();
        assert!(p.pump_outside_samples());
    }

    #[test]
    fn csv_round_trip() {
        let p = RamanProfile::synthetic_default();
        let q = parse_csv(&p.to_csv(), "rt").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn synthetic_shape() {
        let p = RamanProfile::synthetic_default();
        let peak = p
            .samples()
            .iter()
            .copied()
            .fold((0.0, 0.0), |acc, s| if s.1 > acc.1 { s } else { acc });
        // broad Stokes maximum roughly 100 nm above the pump
        assert!((peak.0 - 1650.0).abs() < 15.0, "peak at {}", peak.0);
    }
}
