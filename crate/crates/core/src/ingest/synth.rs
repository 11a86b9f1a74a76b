//! Seeded synthetic regime data standing in for plant recordings.
//!
//! Rows are generated in contiguous blocks, one block per regime per episode,
//! so that the output has the run/stop structure of real plant history.
//! Each value is the regime mean plus Gaussian noise; the noise may carry
//! shared latent factors (e.g. a load level moving power, flow and injector
//! opening together) on top of independent per-signal noise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Signal, Timestamp};
use crate::{rng, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    pub mean: Vec<f64>,
    /// Standard deviation of the independent per-signal noise.
    pub noise: Vec<f64>,
    /// Fraction of all rows spent in this regime.
    pub occupancy: f64,
    /// Loading vectors of shared standard-normal latent factors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regimes: Vec<Regime>,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Number of times the regime sequence repeats.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_start")]
    pub start: Timestamp,
    #[serde(default = "default_step")]
    pub step_secs: i64,
    /// Signal names; defaults to `s0..s{d-1}`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signals: Vec<Signal>,
}

fn default_episodes() -> usize {
    1
}

fn default_start() -> Timestamp {
    // 2018-09-01T00:00:00Z
    Timestamp(1_535_760_000)
}

fn default_step() -> i64 {
    600
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::config("synthetic config has zero regimes"));
        }
        if self.d == 0 || self.n == 0 {
            return Err(Error::config("synthetic config needs n >= 1 and d >= 1"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes must be >= 1"));
        }
        if self.step_secs <= 0 {
            return Err(Error::config("step_secs must be positive"));
        }
        if !self.signals.is_empty() && self.signals.len() != self.d {
            return Err(Error::config("signal list length differs from d"));
        }
        let total: f64 = self.regimes.iter().map(|r| r.occupancy).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("occupancy fractions sum to {total}, not 1")));
        }
        for r in &self.regimes {
            if r.mean.len() != self.d || r.noise.len() != self.d {
                return Err(Error::config(format!("regime `{}` vectors must have length d", r.name)));
            }
            if r.noise.iter().any(|s| !(*s >= 0.0)) || r.occupancy < 0.0 {
                return Err(Error::config(format!("regime `{}` has negative noise or occupancy", r.name)));
            }
            if r.factors.iter().any(|f| f.len() != self.d) {
                return Err(Error::config(format!("regime `{}` factor loadings must have length d", r.name)));
            }
        }
        Ok(())
    }

    /// Rows per regime: occupancy times n, rounded by largest remainder.
    pub fn regime_counts(&self) -> Vec<usize> {
        let exact: Vec<f64> = self.regimes.iter().map(|r| r.occupancy * self.n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| crate::math::floor(*e) as usize).collect();
        let mut rest = self.n - counts.iter().sum::<usize>().min(self.n);
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - counts[a] as f64;
            let fb = exact[b] - counts[b] as f64;
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            counts[i] += 1;
            rest -= 1;
        }
        counts
    }
}

/// Generates the matrix and the ground-truth regime index of every row.
pub fn synth_generate(c: &SynthConfig) -> Result<(FeatureMatrix, Vec<usize>)> {
    c.validate()?;
    let counts = c.regime_counts();
    let mut rng = rng::seeded(c.seed);
    let mut data = Vec::with_capacity(c.n * c.d);
    let mut labels = Vec::with_capacity(c.n);
    let mut row = vec![0.0; c.d];
    for e in 0..c.episodes {
        for (r, regime) in c.regimes.iter().enumerate() {
            let block = counts[r] / c.episodes + usize::from(e < counts[r] % c.episodes);
            for _ in 0..block {
                row.copy_from_slice(&regime.mean);
                for loading in &regime.factors {
                    let z: f64 = rng.sample(StandardNormal);
                    for (v, l) in row.iter_mut().zip(loading) {
                        *v += l * z;
                    }
                }
                for (v, s) in row.iter_mut().zip(&regime.noise) {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += s * z;
                }
                data.extend_from_slice(&row);
                labels.push(r);
            }
        }
    }
    let signals = if c.signals.is_empty() {
        (0..c.d).map(|j| Signal::new(format!("s{j}"), None)).collect()
    } else {
        c.signals.clone()
    };
    let timestamps = (0..c.n as i64)
        .map(|i| Timestamp(c.start.0 + i * c.step_secs))
        .collect();
    let m = FeatureMatrix::new(signals, timestamps, Matrix::from_vec(c.n, c.d, data)?)?;
    Ok((m, labels))
}

pub const HPP_FIXTURE_SEED: u64 = 42;

/// The standard two-regime plant fixture: 8000 rows of 12 signals, a
/// low-noise shutdown regime (35 %) and an operating regime (65 %) repeated
/// over five yearly episodes at a 10-minute cadence.
pub fn hpp_fixture() -> SynthConfig {
    // (name, unit, shutdown mean, shutdown noise, operating mean, operating noise)
    const SIGNALS: [(&str, &str, f64, f64, f64, f64); 12] = [
        ("active_power", "MW", 0.0, 0.02, 8.0, 0.05),
        ("reactive_power", "MVA", 0.0, 0.02, 2.0, 0.05),
        ("water_flow", "m3/s", 0.0, 0.01, 2.5, 0.02),
        ("injector_opening", "mm", 0.0, 0.1, 60.0, 0.5),
        ("rotation_speed", "RPM", 0.0, 0.5, 750.0, 1.0),
        ("bearing_temperature", "degC", 22.0, 0.2, 45.0, 0.3),
        ("generator_temperature", "degC", 20.0, 0.2, 60.0, 0.4),
        ("vibration", "mm/s", 0.1, 0.01, 1.5, 0.03),
        ("surge_tank_elevation", "mNGF", 612.0, 0.05, 608.0, 0.1),
        ("reservoir_elevation", "mNGF", 615.0, 0.05, 614.0, 0.05),
        ("penstock_pressure", "Pa", 3.2e6, 5.0e3, 3.0e6, 5.0e3),
        ("control_pressure", "Pa", 6.0e6, 1.0e4, 6.2e6, 1.0e4),
    ];
    // Operating: load level and upstream head. Shutdown: ambient temperature
    // and head.
    let load = vec![1.5, 0.4, 0.45, 12.0, 0.0, 2.0, 4.0, 0.2, -0.6, 0.0, -5.0e4, 2.0e4];
    let op_head = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.8, 6.0e4, 0.0];
    let ambient = vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0];
    let sd_head = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.6, 4.0e4, 0.0];
    SynthConfig {
        regimes: vec![
            Regime {
                name: "shutdown".into(),
                mean: SIGNALS.iter().map(|s| s.2).collect(),
                noise: SIGNALS.iter().map(|s| s.3).collect(),
                occupancy: 0.35,
                factors: vec![ambient, sd_head],
            },
            Regime {
                name: "operating".into(),
                mean: SIGNALS.iter().map(|s| s.4).collect(),
                noise: SIGNALS.iter().map(|s| s.5).collect(),
                occupancy: 0.65,
                factors: vec![load, op_head],
            },
        ],
        n: 8000,
        d: 12,
        seed: HPP_FIXTURE_SEED,
        episodes: 5,
        start: default_start(),
        step_secs: 600,
        signals: SIGNALS.iter().map(|s| Signal::new(s.0, Some(s.1))).collect(),
    }
}

/// Two Gaussian blobs of `n / 2` rows each (blob 0 first) in `d >= 2`
/// dimensions. Each blob spreads along two shared latent directions with
/// unit variance plus isotropic noise of scale 0.05; the centers are 8 apart.
pub fn two_blobs(n: usize, d: usize, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if d < 2 || n < 2 {
        return Err(Error::config("two_blobs needs d >= 2 and n >= 2"));
    }
    let mut rng = rng::seeded(seed);
    let unit = |rng: &mut rng::SeededRng| {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = crate::math::sqrt(v.iter().map(|x| x * x).sum());
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let loadings = [unit(&mut rng), unit(&mut rng)];
    let offset: Vec<f64> = unit(&mut rng).into_iter().map(|x| 8.0 * x).collect();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let blob = usize::from(i >= n / 2);
        let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            let center = if blob == 1 { offset[j] } else { 0.0 };
            data.push(center + z[0] * loadings[0][j] + z[1] * loadings[1][j] + 0.05 * e);
        }
        labels.push(blob);
    }
    Ok((Matrix::from_vec(n, d, data)?, labels))
}
