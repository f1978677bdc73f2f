//! Gate-by-gate detection simulator used to check the closed-form QBER and
//! sifted-rate expressions.
//!
//! Gates are processed in fixed blocks of [`BLOCK_GATES`]. Each block draws
//! from its own generator seeded by [`split_seed`], so results depend only on
//! the seed and the gate count, never on how blocks are spread over threads.
//! Detector dead time restarts at block boundaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::LinkSetup;
use crate::error::{Error, Result};
use crate::keyrate::{duty_cycle, link_budget, sifting_factor, GateProbabilities};

pub const BLOCK_GATES: u64 = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum McMode {
    /// One Bernoulli click per gate with the closed-form probabilities; no
    /// double detections.
    #[default]
    Matched,
    /// Independent Poisson sources per gate; any noise click in a gate
    /// randomises the bit. Exploration only.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub mode: McMode,
    /// Worker threads; 0 picks rayon's default.
    pub chunks: usize,
    pub dead_time: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            mode: McMode::Matched,
            chunks: 1,
            dead_time: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockStats {
    pub gates: u64,
    pub detections: u64,
    pub sifted: u64,
    pub errors: u64,
}

impl BlockStats {
    pub fn merge(self, o: BlockStats) -> BlockStats {
        BlockStats {
            gates: self.gates + o.gates,
            detections: self.detections + o.detections,
            sifted: self.sifted + o.sifted,
            errors: self.errors + o.errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub gates_simulated: u64,
    pub detections: u64,
    pub sifted: u64,
    pub errors: u64,
    pub empirical_qber: f64,
    pub empirical_r_sift_hz: f64,
    pub qber_se: f64,
    pub r_sift_se_hz: f64,
}

/// SplitMix64 finaliser over the seed and block index.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-gate parameters shared by all blocks.
#[derive(Debug, Clone, Copy)]
pub struct GateModel {
    pub probs: GateProbabilities,
    /// Sifting acceptance of a signal click.
    pub beta: f64,
    pub visibility: f64,
    /// Gates skipped after each detection.
    pub dead_gates: u64,
}

impl GateModel {
    pub fn from_setup(setup: &LinkSetup, length_km: f64, dead_time: bool) -> Result<Self> {
        let b = link_budget(setup, length_km)?;
        let cfg = &setup.config;
        let dead_gates = if dead_time {
            (cfg.detector.dead_time_s() * cfg.protocol.pulse_rate_hz).round() as u64
        } else {
            0
        };
        Ok(Self {
            probs: b.probabilities(),
            beta: sifting_factor(cfg.protocol.protocol, cfg.protocol.visibility),
            visibility: cfg.protocol.visibility,
            dead_gates,
        })
    }

    /// Error probability of a sifted signal click.
    fn signal_error(&self) -> f64 {
        (1.0 - self.visibility) / (2.0 * self.beta)
    }
}

pub fn simulate_block(model: &GateModel, mode: McMode, gates: u64, seed: u64) -> BlockStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = &model.probs;
    let p_signal = p.p_mu;
    let p_total = p.total();
    let e_signal = model.signal_error();
    let mut st = BlockStats {
        gates,
        ..Default::default()
    };
    let mut g = 0u64;
    while g < gates {
        let hit = match mode {
            McMode::Matched => {
                let u: f64 = rng.random();
                if u < p_total {
                    Some(u < p_signal)
                } else {
                    None
                }
            }
            McMode::Poisson => {
                let s = rng.random::<f64>() < -(-p.p_mu).exp_m1();
                let n = rng.random::<f64>() < -(-p.noise()).exp_m1();
                if n {
                    Some(false)
                } else if s {
                    Some(true)
                } else {
                    None
                }
            }
        };
        g += 1;
        let Some(signal) = hit else { continue };
        st.detections += 1;
        let (keep, err) = if signal {
            (0.5 * model.beta, e_signal)
        } else {
            (0.5, 0.5)
        };
        if rng.random::<f64>() < keep {
            st.sifted += 1;
            if rng.random::<f64>() < err {
                st.errors += 1;
            }
        }
        g += model.dead_gates;
    }
    st
}

fn block_sizes(n_gates: u64) -> impl Iterator<Item = (u64, u64)> {
    let n_blocks = n_gates.div_ceil(BLOCK_GATES);
    (0..n_blocks).map(move |i| (i, BLOCK_GATES.min(n_gates - i * BLOCK_GATES)))
}

/// Simulates `n_gates` gates and returns per-block statistics in block order.
pub fn simulate_blocks(model: &GateModel, n_gates: u64, seed: u64, options: &McOptions) -> Result<Vec<BlockStats>> {
    if n_gates == 0 {
        return Err(Error::Domain("at least one gate must be simulated".into()));
    }
    if model.probs.total() > 1.0 {
        return Err(Error::Domain(format!(
            "click probability per gate {} exceeds 1",
            model.probs.total()
        )));
    }
    let blocks: Vec<(u64, u64)> = block_sizes(n_gates).collect();
    let run = |&(i, n): &(u64, u64)| simulate_block(model, options.mode, n, split_seed(seed, i));
    if options.chunks == 1 {
        return Ok(blocks.iter().map(run).collect());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if options.chunks > 1 {
        builder = builder.num_threads(options.chunks);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| blocks.par_iter().map(run).collect()))
}

/// Combines block statistics into a result with standard errors. The sifted
/// rate's error comes from the spread of per-block rates.
pub fn summarise(blocks: &[BlockStats], rate_per_gate_hz: f64) -> McResult {
    let tot = blocks.iter().copied().fold(BlockStats::default(), BlockStats::merge);
    let qber = if tot.sifted > 0 {
        tot.errors as f64 / tot.sifted as f64
    } else {
        f64::NAN
    };
    let qber_se = if tot.sifted > 0 {
        (qber * (1.0 - qber) / tot.sifted as f64).sqrt()
    } else {
        f64::NAN
    };
    let rate = tot.sifted as f64 / tot.gates as f64 * rate_per_gate_hz;
    let r_se = if blocks.len() >= 2 {
        let w_sum = tot.gates as f64;
        let var: f64 = blocks
            .iter()
            .map(|b| {
                let r = b.sifted as f64 / b.gates as f64 * rate_per_gate_hz;
                let w = b.gates as f64 / w_sum;
                w * w * (r - rate).powi(2)
            })
            .sum();
        let n = blocks.len() as f64;
        (var * n / (n - 1.0)).sqrt()
    } else {
        (tot.sifted as f64).sqrt() / tot.gates as f64 * rate_per_gate_hz
    };
    McResult {
        gates_simulated: tot.gates,
        detections: tot.detections,
        sifted: tot.sifted,
        errors: tot.errors,
        empirical_qber: qber,
        empirical_r_sift_hz: rate,
        qber_se,
        r_sift_se_hz: r_se,
    }
}

/// Runs the simulator for the link at `length_km`. The duty cycle enters as
/// a deterministic factor on the sifted rate.
pub fn simulate(setup: &LinkSetup, length_km: f64, n_gates: u64, seed: u64, options: &McOptions) -> Result<McResult> {
    let model = GateModel::from_setup(setup, length_km, options.dead_time)?;
    let blocks = simulate_blocks(&model, n_gates, seed, options)?;
    let cfg = &setup.config;
    let duty = duty_cycle(length_km, cfg.protocol.storage_line_km)?;
    Ok(summarise(&blocks, cfg.protocol.pulse_rate_hz * duty))
}
