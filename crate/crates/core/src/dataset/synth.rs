//! Synthetic multi-AP CSI amplitudes with known class structure.
//!
//! Each logical sample is one (activity, orientation, user) realisation seen by
//! every AP. The activity fixes the temporal waveform, the orientation fixes a
//! per-AP gain, delay and subcarrier profile, the user scales the whole
//! amplitude, and every (sample, AP) view gets independent Gaussian noise.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_dataset, CsiSample, Dataset, MultiApSample, DEFAULT_ACTIVITIES, DEFAULT_ORIENTATIONS};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, streams};

const NUM_CLASSES: usize = 4;
const SIGNAL_AMPLITUDE: f64 = 2.0;
const ORIENTATION_GAINS: [f64; NUM_CLASSES] = [0.5, 0.8, 1.3, 2.1];
const ORIENTATION_DELAYS: [f64; NUM_CLASSES] = [0.0, 0.015, 0.03, 0.045];
const MAX_TIME_JITTER: f64 = 0.01;
const MAX_GAIN_JITTER: f64 = 0.05;
const USER_SCALE_RANGE: (f64, f64) = (0.9, 1.1);
const QUANTUM: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub subcarriers: usize,
    pub length: usize,
    pub num_aps: usize,
    pub users: usize,
    /// Repetitions per (activity, orientation, user) combination.
    pub samples_per_cell: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub const DEFAULT_NOISE_STD: f64 = 4.0;

    /// 20 repetitions x 4 activities x 4 orientations x 6 users over 5 APs.
    pub fn full_shape(seed: u64) -> Self {
        Self {
            subcarriers: 52,
            length: 256,
            num_aps: 5,
            users: 6,
            samples_per_cell: 20,
            noise_std: Self::DEFAULT_NOISE_STD,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("subcarriers", self.subcarriers),
            ("num_aps", self.num_aps),
            ("users", self.users),
            ("samples_per_cell", self.samples_per_cell),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.length < 2 {
            return Err(Error::Config("length must be at least 2".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise_std must be finite and non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        NUM_CLASSES * NUM_CLASSES * self.users * self.samples_per_cell
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::full_shape(0)
    }
}

/// Temporal signature of an activity at normalised time `tau`.
fn activity_waveform(activity: usize, tau: f64) -> f64 {
    match activity {
        // steady rotation
        0 => (2.0 * PI * 3.0 * tau).sin(),
        // chirp, sweeping upwards
        1 => (2.0 * PI * (2.0 * tau + 4.0 * tau * tau)).sin(),
        // step-like back and forth
        2 => (4.0 * (2.0 * PI * 2.0 * tau).sin()).tanh(),
        // short bursts
        _ => {
            let envelope: f64 = [0.2, 0.5, 0.8]
                .iter()
                .map(|c| (-((tau - c) / 0.06).powi(2)).exp())
                .sum();
            envelope * (2.0 * PI * 9.0 * tau).sin()
        }
    }
}

/// Index into the gain/delay tables that AP `ap` uses for orientation `o`;
/// every AP sees a different permutation.
fn gain_index(ap: usize, orientation: usize) -> usize {
    (orientation + ap) % NUM_CLASSES
}

fn delay_index(ap: usize, orientation: usize) -> usize {
    (orientation + 2 * ap + 1) % NUM_CLASSES
}

fn baseline(ap: usize, s: usize, subcarriers: usize) -> f64 {
    10.0 + 3.0 * (2.0 * PI * s as f64 / subcarriers as f64 + ap as f64).sin()
}

fn subcarrier_profile(ap: usize, orientation: usize, s: usize, subcarriers: usize) -> f64 {
    let x = s as f64 / subcarriers as f64;
    0.6 + 0.4 * (2.0 * PI * x * (1 + orientation) as f64 + ap as f64).cos()
}

struct Realisation {
    user_scale: f64,
    time_shift: f64,
    gain_jitter: f64,
}

fn render(
    cfg: &SynthConfig,
    ap: usize,
    activity: usize,
    orientation: usize,
    r: &Realisation,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let (s_count, t_count) = (cfg.subcarriers, cfg.length);
    let gain = ORIENTATION_GAINS[gain_index(ap, orientation)] * r.gain_jitter;
    let delay = ORIENTATION_DELAYS[delay_index(ap, orientation)] + r.time_shift;
    let wave: Vec<f64> = (0..t_count)
        .map(|t| activity_waveform(activity, t as f64 / t_count as f64 - delay))
        .collect();
    let mut out = Array2::zeros((s_count, t_count));
    for s in 0..s_count {
        let base = baseline(ap, s, s_count);
        let depth = SIGNAL_AMPLITUDE * gain * subcarrier_profile(ap, orientation, s, s_count);
        for t in 0..t_count {
            let noise: f64 = if cfg.noise_std > 0.0 {
                cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let v = r.user_scale * (base + depth * wave[t]) + noise;
            out[[s, t]] = (v.max(0.0) / QUANTUM).round() * QUANTUM;
        }
    }
    out
}

/// Generates the dataset in memory. AP ids are `1..=num_aps`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let user_scales: Vec<f64> = (0..cfg.users)
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::SYNTH, u as u64));
            rng.random_range(USER_SCALE_RANGE.0..USER_SCALE_RANGE.1)
        })
        .collect();

    let mut cells = Vec::with_capacity(cfg.total_samples());
    for activity in 0..NUM_CLASSES {
        for orientation in 0..NUM_CLASSES {
            for user in 0..cfg.users {
                for _ in 0..cfg.samples_per_cell {
                    cells.push((activity, orientation, user));
                }
            }
        }
    }

    let samples = cells
        .par_iter()
        .enumerate()
        .map(|(id, &(activity, orientation, user))| {
            let sample_id = id as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::SYNTH, 1 << 32 | sample_id));
            let realisation = Realisation {
                user_scale: user_scales[user],
                time_shift: rng.random_range(-MAX_TIME_JITTER..=MAX_TIME_JITTER),
                gain_jitter: 1.0 + rng.random_range(-MAX_GAIN_JITTER..=MAX_GAIN_JITTER),
            };
            let views = (0..cfg.num_aps)
                .map(|ap| {
                    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        cfg.seed,
                        streams::SYNTH,
                        2 << 32 | sample_id << 8 | ap as u64,
                    ));
                    CsiSample {
                        ap_id: ap as u32 + 1,
                        sample_id,
                        amplitudes: render(cfg, ap, activity, orientation, &realisation, &mut noise_rng),
                        activity,
                        orientation,
                        user_id: Some(user as u32),
                    }
                })
                .collect();
            MultiApSample {
                sample_id,
                activity,
                orientation,
                user_id: Some(user as u32),
                views,
            }
        })
        .collect();

    Ok(Dataset {
        subcarriers: cfg.subcarriers,
        length: cfg.length,
        ap_ids: (1..=cfg.num_aps as u32).collect(),
        activity_names: DEFAULT_ACTIVITIES.iter().map(|s| s.to_string()).collect(),
        orientation_names: DEFAULT_ORIENTATIONS.iter().map(|s| s.to_string()).collect(),
        samples,
    })
}

/// Generates and writes a complete dataset directory; returns the manifest path.
pub fn synth_write(cfg: &SynthConfig, dir: &Path) -> Result<(Dataset, std::path::PathBuf)> {
    let dataset = synth_generate(cfg)?;
    let manifest = write_dataset(&dataset, dir)?;
    Ok((dataset, manifest))
}
