//! Monte-Carlo estimate of detection / false-alarm probability for the
//! square-law detector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::DetectorConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::weibull_sum::WeibullParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub cfg: DetectorConfig,
    /// `None` simulates noise only.
    pub target: Option<WeibullParams>,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64, cfg: DetectorConfig, target: Option<WeibullParams>) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("at least one trial is required"));
        }
        Ok(Self { trials, seed, cfg, target })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub estimate: f64,
    pub half_width_99: f64,
    pub trials: u64,
}

impl SimResult {
    fn from_count(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            estimate: p,
            half_width_99: 2.576 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        (self.estimate - p).abs() <= self.half_width_99
    }
}

/// Inverse-CDF draw: `ξ^α̃` is exponential with mean `Ω̃`.
pub fn sample_weibull(p: &WeibullParams, u: f64) -> f64 {
    (-p.omega_tilde * u.ln()).powf(1.0 / p.alpha_tilde)
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

// Box–Muller pair, each with unit variance.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = (-2.0 * open_unit(rng).ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * rng.gen::<f64>()).sin_cos();
    (r * c, r * s)
}

fn trial(sim: &SimConfig, t: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    rng.set_stream(t);
    let sd = sim.cfg.sigma2.sqrt();
    let mut stat = 0.0;
    for _ in 0..sim.cfg.n_pulses {
        let (mut re, mut im) = (0.0, 0.0);
        if let Some(p) = &sim.target {
            let amp = sample_weibull(p, open_unit(&mut rng)).sqrt();
            let (s, c) = (std::f64::consts::TAU * rng.gen::<f64>()).sin_cos();
            re = amp * c;
            im = amp * s;
        }
        let (wr, wi) = gaussian_pair(&mut rng);
        re += sd * wr;
        im += sd * wi;
        stat += re * re + im * im;
    }
    stat / (2.0 * sim.cfg.sigma2) > sim.cfg.gamma
}

/// Fraction of trials whose normalized statistic exceeds the threshold.
/// Trial `t` draws from its own ChaCha stream, so the result does not depend
/// on scheduling.
pub fn run(sim: &SimConfig, exec: Exec) -> SimResult {
    if sim.cfg.gamma == 0.0 {
        return SimResult::from_count(sim.trials, sim.trials);
    }
    let hits = exec.count(sim.trials, |t| trial(sim, t));
    SimResult::from_count(hits, sim.trials)
}
