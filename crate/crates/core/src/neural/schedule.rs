//! Reduce-on-plateau learning-rate schedule: halve the rate after
//! `patience` consecutive epochs without a significant improvement in
//! validation loss, never dropping below a floor.

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 5,
            min_delta: 1e-4,
            min_lr: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    config: PlateauConfig,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(config: PlateauConfig) -> Result<Self, NeuralError> {
        if !(config.factor > 0.0 && config.factor < 1.0) {
            return Err(NeuralError::BadArgument {
                op: "plateau_scheduler",
                why: "factor must be in (0, 1)",
            });
        }
        if config.patience == 0 {
            return Err(NeuralError::BadArgument {
                op: "plateau_scheduler",
                why: "patience must be >= 1",
            });
        }
        Ok(PlateauScheduler {
            config,
            best: f64::INFINITY,
            stale: 0,
        })
    }

    /// Feed one epoch's validation loss; returns the learning rate to
    /// use next. The stale counter resets after a reduction so the next
    /// cut needs a full `patience` more flat epochs.
    pub fn observe(&mut self, val_loss: f64, current_lr: f64) -> f64 {
        if val_loss < self.best - self.config.min_delta {
            self.best = val_loss;
            self.stale = 0;
            return current_lr;
        }
        self.stale += 1;
        if self.stale >= self.config.patience {
            self.stale = 0;
            return (current_lr * self.config.factor).max(self.config.min_lr);
        }
        current_lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_flat_epochs_halve_the_rate() {
        let mut s = PlateauScheduler::new(PlateauConfig::default()).unwrap();
        let mut lr = 1e-3;
        lr = s.observe(1.0, lr); // establishes the best
        for _ in 0..4 {
            lr = s.observe(1.0, lr);
            assert_eq!(lr, 1e-3);
        }
        lr = s.observe(1.0, lr); // fifth flat epoch
        assert_eq!(lr, 5e-4);
    }

    #[test]
    fn improvement_resets_the_counter() {
        let mut s = PlateauScheduler::new(PlateauConfig::default()).unwrap();
        let mut lr = 1e-3;
        lr = s.observe(1.0, lr);
        for _ in 0..4 {
            lr = s.observe(1.0, lr);
        }
        lr = s.observe(0.5, lr); // big improvement just in time
        assert_eq!(lr, 1e-3);
        for _ in 0..4 {
            lr = s.observe(0.5, lr);
            assert_eq!(lr, 1e-3);
        }
        lr = s.observe(0.5, lr);
        assert_eq!(lr, 5e-4);
    }

    #[test]
    fn tiny_improvements_do_not_count() {
        let mut s = PlateauScheduler::new(PlateauConfig::default()).unwrap();
        let mut lr = 1e-3;
        lr = s.observe(1.0, lr);
        // Each epoch improves by less than min_delta.
        for i in 1..=4 {
            lr = s.observe(1.0 - 1e-5 * i as f64, lr);
            assert_eq!(lr, 1e-3);
        }
        lr = s.observe(1.0 - 5e-5, lr);
        assert_eq!(lr, 5e-4);
    }

    #[test]
    fn rate_never_drops_below_the_floor() {
        let mut s = PlateauScheduler::new(PlateauConfig::default()).unwrap();
        let mut lr = 1e-3;
        for _ in 0..200 {
            lr = s.observe(1.0, lr);
        }
        assert_eq!(lr, 1e-5);
    }

    #[test]
    fn counter_resets_after_a_reduction() {
        let mut s = PlateauScheduler::new(PlateauConfig::default()).unwrap();
        let mut lr = 1e-3;
        lr = s.observe(1.0, lr);
        for _ in 0..5 {
            lr = s.observe(1.0, lr);
        }
        assert_eq!(lr, 5e-4);
        // Only four more flat epochs: no further cut yet.
        for _ in 0..4 {
            lr = s.observe(1.0, lr);
            assert_eq!(lr, 5e-4);
        }
        lr = s.observe(1.0, lr);
        assert_eq!(lr, 2.5e-4);
    }

    #[test]
    fn config_validation() {
        assert!(PlateauScheduler::new(PlateauConfig {
            factor: 1.0,
            ..PlateauConfig::default()
        })
        .is_err());
        assert!(PlateauScheduler::new(PlateauConfig {
            factor: 0.0,
            ..PlateauConfig::default()
        })
        .is_err());
        assert!(PlateauScheduler::new(PlateauConfig {
            patience: 0,
            ..PlateauConfig::default()
        })
        .is_err());
    }
}
