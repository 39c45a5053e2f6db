//! Running mean/variance, either exact (Welford) or exponentially
//! weighted.
//!
//! Variance is the population variance (divide by N): consumers threshold
//! on scale, so unbiasedness does not matter here.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    /// Welford M2 in exact mode; weighted variance in weighted mode.
    accum: f64,
    /// `Some(lambda)` enables exponential weighting with decay `lambda`
    /// (new samples get weight `1 - lambda`).
    weighting: Option<f64>,
}

impl RunningStats {
    pub fn new() -> Self {
        RunningStats {
            count: 0,
            mean: 0.0,
            accum: 0.0,
            weighting: None,
        }
    }

    pub fn exponentially_weighted(lambda: f64) -> Self {
        assert!((0.0..1.0).contains(&lambda), "decay must be in [0, 1)");
        RunningStats {
            weighting: Some(lambda),
            ..Self::new()
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        match self.weighting {
            None => self.accum / self.count as f64,
            Some(_) => self.accum,
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn update(&mut self, x: f64) {
        assert!(x.is_finite(), "running stats require finite samples");
        self.count += 1;
        match self.weighting {
            None => {
                let d = x - self.mean;
                self.mean += d / self.count as f64;
                self.accum += d * (x - self.mean);
            }
            Some(lambda) => {
                if self.count == 1 {
                    self.mean = x;
                    self.accum = 0.0;
                } else {
                    let alpha = 1.0 - lambda;
                    let d = x - self.mean;
                    self.mean += alpha * d;
                    // West's update for exponentially weighted variance.
                    self.accum = (1.0 - alpha) * (self.accum + alpha * d * d);
                }
            }
        }
    }
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new()
    }
}
