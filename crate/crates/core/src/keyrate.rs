//! QBER, sifted key rate and secret key rate for BB84 and SARG.
//!
//! All detection quantities are probabilities per detector gate.

use serde::{Deserialize, Serialize};

use crate::config::{LinkSetup, Protocol};
use crate::error::{Error, Result};
use crate::interference::crosstalk_probability;
use crate::raman::{total_raman_probability, Clamped};
use crate::units;

/// Highest QBER the distillation stage accepts.
pub const QBER_CEILING: f64 = 0.09;
/// Smallest secret key rate considered useful, in bit/s.
pub const MIN_KEY_RATE_BPS: f64 = 8.6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GateProbabilities {
    pub p_mu: f64,
    pub p_dc_per_gate: f64,
    pub p_ap: f64,
    pub p_ram: f64,
    pub p_ct: f64,
}

impl GateProbabilities {
    /// Noise clicks: both detectors' dark counts, afterpulses, Raman, crosstalk.
    pub fn noise(&self) -> f64 {
        2.0 * self.p_dc_per_gate + self.p_ap + self.p_ram + self.p_ct
    }

    /// Probability of any click in a gate.
    pub fn total(&self) -> f64 {
        self.p_mu + self.noise()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qber {
    pub total: f64,
    pub opt: f64,
    pub det: f64,
    pub wdm: f64,
}

pub fn optimal_mu(protocol: Protocol, transmission: f64) -> f64 {
    match protocol {
        Protocol::Bb84 => transmission,
        Protocol::Sarg => 2.0 * transmission.sqrt(),
    }
}

pub fn sifting_factor(protocol: Protocol, visibility: f64) -> f64 {
    match protocol {
        Protocol::Bb84 => 1.0,
        Protocol::Sarg => (2.0 - visibility) / 2.0,
    }
}

pub fn signal_detection_prob(mu: f64, t: f64, eta: f64, bob_loss_db: f64) -> Clamped {
    Clamped::new(mu * t * eta * units::loss_db_to_transmission(bob_loss_db))
}

/// Afterpulse probability per gate, proportional to all other clicks.
pub fn afterpulse_probability(afterpulse_prob: f64, p_mu: f64, p_dc_per_gate: f64, p_ram: f64, p_ct: f64) -> f64 {
    afterpulse_prob * (p_mu + 2.0 * p_dc_per_gate + p_ram + p_ct)
}

pub fn qber(probs: &GateProbabilities, visibility: f64, beta: f64) -> Result<Qber> {
    let den = beta * probs.p_mu + probs.noise();
    if !(den > 0.0) {
        return Err(Error::NoDetections);
    }
    let opt = 0.5 * probs.p_mu * (1.0 - visibility) / den;
    let det = 0.5 * (2.0 * probs.p_dc_per_gate + probs.p_ap) / den;
    let wdm = 0.5 * (probs.p_ram + probs.p_ct) / den;
    Ok(Qber {
        total: opt + det + wdm,
        opt,
        det,
        wdm,
    })
}

/// Fraction of time the two-way system sends usable pulses.
pub fn duty_cycle(length_km: f64, storage_km: f64) -> Result<f64> {
    let den = length_km + 2.0 * storage_km;
    if !(den > 0.0) {
        return Err(Error::Domain("duty cycle undefined for zero fibre and storage line".into()));
    }
    Ok(storage_km / den)
}

pub fn sifted_rate(
    probs: &GateProbabilities,
    beta: f64,
    f_rep: f64,
    dead_time_s: f64,
    length_km: f64,
    storage_km: f64,
) -> Result<f64> {
    let duty = duty_cycle(length_km, storage_km)?;
    let sifted = 0.5 * (beta * probs.p_mu + probs.noise());
    Ok(sifted * f_rep * duty / (1.0 + dead_time_s * probs.total() * f_rep))
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

pub fn mutual_info_ab(qber: f64, eta_ec: f64) -> f64 {
    (1.0 - eta_ec * binary_entropy(qber)).max(0.0)
}

/// Eavesdropper information for BB84 under an optimal coherent attack on
/// single photons plus photon-number splitting on multi-photon pulses.
pub fn i_ae_bb84(mu: f64, t: f64, visibility: f64, p_dc_per_gate: f64, eta: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("transmission must be positive, got {t}")));
    }
    let m = mu / (2.0 * t);
    if m > 1.0 {
        return Err(Error::Domain(format!(
            "mean photon number {mu} exceeds twice the transmission {t}"
        )));
    }
    let d = (1.0 - visibility) / (2.0 - mu / t);
    let p = 0.5 + (d * (1.0 - d)).max(0.0).sqrt();
    let num = (1.0 - m) * (1.0 - binary_entropy(p)) + m;
    Ok(num / (1.0 + 2.0 * p_dc_per_gate / (mu * t * eta)))
}

pub fn i_pns(k: u32) -> f64 {
    let k = k.max(1);
    1.0 - binary_entropy(0.5 + 0.5 * (1.0 - 0.5f64.powi(k as i32)).sqrt())
}

pub fn i_ae_sarg(mu: f64, t: f64) -> f64 {
    let i1 = i_pns(1);
    i1 + (mu * mu / t) * (-mu).exp() * (1.0 - i1) / 12.0
}

/// `R_sift · (I_AB − I_AE)`, floored at zero.
pub fn secret_rate(r_sift: f64, i_ab: f64, i_ae: f64) -> f64 {
    (r_sift * (i_ab - i_ae)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub length_km: f64,
    pub protocol: Protocol,
    pub filters: bool,
    /// Quantum-channel transmission used for μ and the eavesdropper bound.
    pub transmission: f64,
    pub mu: f64,
    pub p_mu: f64,
    pub p_ram_f: f64,
    pub p_ram_b: f64,
    pub p_ct: f64,
    pub p_dc_per_gate: f64,
    pub p_ap: f64,
    pub qber_total: f64,
    pub qber_opt: f64,
    pub qber_det: f64,
    pub qber_wdm: f64,
    pub r_sift_hz: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub r_sec_hz: f64,
    /// Effective error-correction fraction η_ec·H(QBER).
    pub r_ec: f64,
    /// Effective privacy-amplification fraction.
    pub r_pa: f64,
    /// A probability was clamped to 1 somewhere in the chain.
    pub clamped: bool,
}

impl LinkBudget {
    pub fn probabilities(&self) -> GateProbabilities {
        GateProbabilities {
            p_mu: self.p_mu,
            p_dc_per_gate: self.p_dc_per_gate,
            p_ap: self.p_ap,
            p_ram: self.p_ram_f + self.p_ram_b,
            p_ct: self.p_ct,
        }
    }

    pub fn usable(&self) -> bool {
        self.r_sec_hz >= MIN_KEY_RATE_BPS
    }
}

pub fn link_budget(setup: &LinkSetup, length_km: f64) -> Result<LinkBudget> {
    if !(length_km.is_finite() && length_km >= 0.0) {
        return Err(Error::Domain(format!("fibre length must be >= 0, got {length_km}")));
    }
    let cfg = &setup.config;
    let det = &cfg.detector;
    let proto = &cfg.protocol;

    let t = cfg.link_transmission(length_km);
    let mu = proto.mean_photon_override.unwrap_or_else(|| optimal_mu(proto.protocol, t));
    let signal = signal_detection_prob(
        mu,
        t,
        det.efficiency,
        proto.bob_internal_loss_db + cfg.filter_insertion_loss_db(),
    );
    let raman = total_raman_probability(cfg, &setup.profile, length_km)?;
    let p_ct = crosstalk_probability(cfg);
    let p_dc = det.dark_count_per_gate();
    let p_ram = raman.total_probability();
    let p_ap = afterpulse_probability(det.afterpulse_prob, signal.value, p_dc, p_ram, p_ct);
    let probs = GateProbabilities {
        p_mu: signal.value,
        p_dc_per_gate: p_dc,
        p_ap,
        p_ram,
        p_ct,
    };

    let beta = sifting_factor(proto.protocol, proto.visibility);
    let q = qber(&probs, proto.visibility, beta)?;
    let r_sift = sifted_rate(
        &probs,
        beta,
        proto.pulse_rate_hz,
        det.dead_time_s(),
        length_km,
        proto.storage_line_km,
    )?;
    let i_ab = mutual_info_ab(q.total, proto.error_correction_inefficiency);
    let i_ae = match proto.protocol {
        Protocol::Bb84 => i_ae_bb84(mu, t, proto.visibility, p_dc, det.efficiency)?,
        Protocol::Sarg => i_ae_sarg(mu, t),
    };
    let r_sec = if q.total > QBER_CEILING {
        0.0
    } else {
        secret_rate(r_sift, i_ab, i_ae)
    };
    let r_ec = proto.error_correction_inefficiency * binary_entropy(q.total);
    let r_pa = if r_ec < 1.0 {
        1.0 - (i_ab - i_ae) / (1.0 - r_ec)
    } else {
        1.0
    };

    Ok(LinkBudget {
        length_km,
        protocol: proto.protocol,
        filters: cfg.filter.is_some(),
        transmission: t,
        mu,
        p_mu: signal.value,
        p_ram_f: raman.prob_forward_per_gate,
        p_ram_b: raman.prob_backward_per_gate,
        p_ct,
        p_dc_per_gate: p_dc,
        p_ap,
        qber_total: q.total,
        qber_opt: q.opt,
        qber_det: q.det,
        qber_wdm: q.wdm,
        r_sift_hz: r_sift,
        i_ab,
        i_ae,
        r_sec_hz: r_sec,
        r_ec,
        r_pa,
        clamped: signal.clamped || raman.clamped,
    })
}
