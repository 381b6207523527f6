//! The toy data distribution: a balanced mixture of small isotropic
//! Gaussians centered on equally spaced unit-circle points, with the mode
//! index as the conditioning label.

use rand::Rng;

use dgpo_core::rewards::circle_modes;
use dgpo_core::rng::{derived_rng, normal_vec, SeededRng};

use crate::config::TaskConfig;

/// Stream tag separating the held-out draw from every training stream.
const TAG_HOLDOUT: u64 = 0x4844;

#[derive(Debug, Clone)]
pub struct ModeTask {
    pub centers: Vec<[f64; 2]>,
    pub mode_std: f64,
}

impl ModeTask {
    pub fn new(cfg: &TaskConfig) -> Self {
        ModeTask { centers: circle_modes(cfg.modes), mode_std: cfg.mode_std }
    }

    pub fn modes(&self) -> usize {
        self.centers.len()
    }

    /// One labeled draw: a uniform mode index and a Gaussian point around
    /// its center.
    pub fn sample(&self, rng: &mut SeededRng) -> (Vec<f64>, usize) {
        let k = rng.random_range(0..self.centers.len());
        let eps: Vec<f64> = normal_vec(rng, 2);
        let c = self.centers[k];
        (vec![c[0] + self.mode_std * eps[0], c[1] + self.mode_std * eps[1]], k)
    }

    /// Fixed reference sample of the data distribution, drawn from its own
    /// seed so it is identical for every run over the same task.
    pub fn holdout(&self, n: usize, data_seed: u64) -> Vec<Vec<f64>> {
        let mut rng = derived_rng(data_seed, &[TAG_HOLDOUT]);
        (0..n).map(|_| self.sample(&mut rng).0).collect()
    }
}
