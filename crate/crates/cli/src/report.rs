//! Human-readable reports.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use qkdwdm::interference::{ChannelCrosstalk, FwmReport};
use qkdwdm::keyrate::{MIN_KEY_RATE_BPS, QBER_CEILING};
use qkdwdm::montecarlo::{McMode, McResult};
use qkdwdm::scenario::{Band, BandComparison};
use qkdwdm::{LinkBudget, LinkConfig};

pub fn budget(b: &LinkBudget) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "link budget: {:.3} km, {}, filters {}",
        b.length_km,
        b.protocol,
        if b.filters { "on" } else { "off" }
    );
    let _ = writeln!(s, "  transmission t      {:.6e}", b.transmission);
    let _ = writeln!(s, "  mean photon number  {:.6}", b.mu);
    let _ = writeln!(s, "detection probabilities per gate");
    for (name, v) in [
        ("signal p_mu", b.p_mu),
        ("raman forward", b.p_ram_f),
        ("raman backward", b.p_ram_b),
        ("crosstalk", b.p_ct),
        ("dark count", b.p_dc_per_gate),
        ("afterpulse", b.p_ap),
    ] {
        let _ = writeln!(s, "  {name:<19} {v:.6e}");
    }
    let _ = writeln!(s, "qber");
    let _ = writeln!(s, "  total               {:.4} %", b.qber_total * 100.0);
    let _ = writeln!(s, "  optical             {:.4} %", b.qber_opt * 100.0);
    let _ = writeln!(s, "  detector            {:.4} %", b.qber_det * 100.0);
    let _ = writeln!(s, "  wdm noise           {:.4} %", b.qber_wdm * 100.0);
    let _ = writeln!(s, "rates");
    let _ = writeln!(s, "  sifted              {:.4} bps", b.r_sift_hz);
    let _ = writeln!(s, "  I_AB                {:.6}", b.i_ab);
    let _ = writeln!(s, "  I_AE                {:.6}", b.i_ae);
    let _ = writeln!(s, "  r_ec (effective)    {:.6}", b.r_ec);
    let _ = writeln!(s, "  r_pa (effective)    {:.6}", b.r_pa);
    let _ = writeln!(s, "  secret              {:.4} bps", b.r_sec_hz);
    if b.qber_total > QBER_CEILING {
        let _ = writeln!(s, "note: QBER above the {:.0} % distillation limit", QBER_CEILING * 100.0);
    } else if !b.usable() {
        let _ = writeln!(s, "note: secret rate below {MIN_KEY_RATE_BPS} bps");
    }
    if b.clamped {
        let _ = writeln!(s, "warning: a detection probability was clamped to 1");
    }
    s
}

pub fn plan(
    cfg: &LinkConfig,
    length_km: f64,
    fwm: &FwmReport,
    crosstalk: &[ChannelCrosstalk],
    required_isolation_db: Option<f64>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "channel plan: quantum {:.3} nm, passband {} nm ({:.1} GHz), {} classical channels",
        cfg.plan.quantum_wavelength_nm,
        cfg.plan.quantum_passband_nm,
        cfg.plan.quantum_passband_ghz(),
        cfg.plan.channels.len()
    );
    let _ = writeln!(s, "degenerate FWM products");
    if fwm.products.is_empty() {
        let _ = writeln!(s, "  none (no co-propagating pairs)");
    }
    for p in &fwm.products {
        let _ = writeln!(
            s,
            "  {:?} {:+} / {:+} GHz -> {:+} GHz, margin {:.1} GHz{}",
            p.direction,
            p.pair_offsets_ghz.0,
            p.pair_offsets_ghz.1,
            p.product_offset_ghz,
            p.distance_to_passband_ghz,
            if p.distance_to_passband_ghz <= 0.0 { "  VIOLATION" } else { "" }
        );
    }
    let _ = writeln!(
        s,
        "spontaneous FWM at {length_km} km: gamma*P0*L_eff {:.3e} (gamma*P0*L {:.3e}), launch {:.3e} W, {}",
        fwm.gamma_p0_l,
        fwm.gamma_p0_l_plain,
        fwm.launch_power_w,
        if fwm.spontaneous_negligible { "negligible" } else { "NOT negligible" }
    );
    let _ = writeln!(s, "crosstalk per gate");
    for c in crosstalk {
        let _ = writeln!(
            s,
            "  {:+} GHz {:?}: {} isolation {} dB -> {:.3e}",
            c.offset_ghz,
            c.direction,
            if c.adjacent { "adjacent" } else { "non-adjacent" },
            c.isolation_db,
            c.prob_per_gate
        );
    }
    if let Some(req) = required_isolation_db {
        let _ = writeln!(s, "isolation needed to reach the dark count level: {req:.1} dB");
    }
    let _ = writeln!(
        s,
        "result: {}",
        if fwm.violations.is_empty() { "ok" } else { "FWM violation" }
    );
    s
}

pub fn monte_carlo(b: &LinkBudget, mc: &McResult, seed: u64, mode: McMode) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "monte carlo: {:.3} km, {}, {:?} mode, seed {seed}",
        b.length_km, b.protocol, mode
    );
    let _ = writeln!(
        s,
        "  gates {}  detections {}  sifted {}  errors {}",
        mc.gates_simulated, mc.detections, mc.sifted, mc.errors
    );
    let z = |emp: f64, an: f64, se: f64| if se > 0.0 { (emp - an) / se } else { f64::NAN };
    let _ = writeln!(s, "  {:<8} {:>14} {:>14} {:>12} {:>7}", "", "simulated", "closed form", "std err", "z");
    let _ = writeln!(
        s,
        "  {:<8} {:>14.6e} {:>14.6e} {:>12.3e} {:>7.2}",
        "qber",
        mc.empirical_qber,
        b.qber_total,
        mc.qber_se,
        z(mc.empirical_qber, b.qber_total, mc.qber_se)
    );
    let _ = writeln!(
        s,
        "  {:<8} {:>14.6e} {:>14.6e} {:>12.3e} {:>7.2}",
        "r_sift",
        mc.empirical_r_sift_hz,
        b.r_sift_hz,
        mc.r_sift_se_hz,
        z(mc.empirical_r_sift_hz, b.r_sift_hz, mc.r_sift_se_hz)
    );
    s
}

pub fn append_mc_csv(path: &Path, b: &LinkBudget, mc: &McResult, seed: u64) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(
            f,
            "length_km,protocol,seed,gates,detections,sifted,errors,qber_mc,qber_se,qber_analytic,r_sift_mc_hz,r_sift_se_hz,r_sift_analytic_hz"
        )?;
    }
    writeln!(
        f,
        "{:e},{},{seed},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
        b.length_km,
        b.protocol,
        mc.gates_simulated,
        mc.detections,
        mc.sifted,
        mc.errors,
        mc.empirical_qber,
        mc.qber_se,
        b.qber_total,
        mc.empirical_r_sift_hz,
        mc.r_sift_se_hz,
        b.r_sift_hz
    )?;
    Ok(())
}

pub fn bands(cmp: &BandComparison) -> String {
    let mut s = String::new();
    let reach = |d: Option<f64>| d.map_or("none".to_string(), |d| format!("{d:.2} km"));
    let _ = writeln!(s, "reach at {MIN_KEY_RATE_BPS} bps: 1550 nm {}, 1310 nm {}", reach(cmp.max_distance_1550_km), reach(cmp.max_distance_1310_km));
    let won = cmp.lengths_won_by(Band::O1310);
    if won.is_empty() {
        let _ = writeln!(s, "1550 nm rate >= 1310 nm rate at every length");
    } else {
        let _ = writeln!(
            s,
            "1310 nm ahead at {} of {} lengths ({:.1} to {:.1} km)",
            won.len(),
            cmp.better.len(),
            won[0],
            won[won.len() - 1]
        );
    }
    s
}
