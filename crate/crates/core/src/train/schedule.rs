/// When to stop decaying.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayLimit {
    /// Stop after this many decay events.
    Events(u32),
    /// Stop once `lr0 / lr` reaches this factor.
    Reduction(f64),
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// evaluations without improvement of the best loss, then starts counting
/// again.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    factor: f64,
    patience: u32,
    tolerance: f64,
    lr0: f64,
    lr: f64,
    best: f64,
    stale: u32,
    decays: u32,
}

impl PlateauScheduler {
    /// `tolerance` is relative: a loss improves only if it is below
    /// `best·(1 − tolerance)`.
    pub fn new(lr0: f64, factor: f64, patience: u32, tolerance: f64) -> Self {
        PlateauScheduler {
            factor,
            patience,
            tolerance,
            lr0,
            lr: lr0,
            best: f64::INFINITY,
            stale: 0,
            decays: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn decays(&self) -> u32 {
        self.decays
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records one evaluation. Returns `true` when it triggered a decay.
    pub fn step(&mut self, loss: f64) -> bool {
        if loss < self.best * (1.0 - self.tolerance) || self.best == f64::INFINITY {
            self.best = loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.lr *= self.factor;
            self.decays += 1;
            self.stale = 0;
            true
        } else {
            false
        }
    }

    pub fn exhausted(&self, limit: DecayLimit) -> bool {
        match limit {
            DecayLimit::Events(n) => self.decays >= n,
            DecayLimit::Reduction(r) => self.lr0 / self.lr >= r,
        }
    }
}

/// Free-function form of [`PlateauScheduler::step`].
pub fn scheduler_step(state: &mut PlateauScheduler, loss: f64) -> bool {
    state.step(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_history_never_decays() {
        let mut s = PlateauScheduler::new(1e-3, 0.9, 30, 1e-12);
        for k in 0..500 {
            assert!(!s.step(1.0 / (k + 1) as f64));
        }
        assert_eq!(s.lr(), 1e-3);
    }

    #[test]
    fn flat_history_decays_every_patience_window() {
        let mut s = PlateauScheduler::new(1e-3, 0.9, 30, 1e-12);
        s.step(1.0);
        let mut decays = 0;
        for k in 1..=60 {
            if s.step(1.0) {
                decays += 1;
                assert!(k == 30 || k == 60);
            }
        }
        assert_eq!(decays, 2);
        assert_eq!(s.decays(), 2);
        assert_eq!(s.lr(), 1e-3 * 0.9 * 0.9);
    }

    #[test]
    fn float_noise_is_not_improvement() {
        let mut s = PlateauScheduler::new(1.0, 0.5, 2, 1e-12);
        s.step(1.0);
        s.step(1.0 - 1e-15);
        assert!(s.step(1.0 - 2e-15));
    }

    #[test]
    fn limits() {
        let mut s = PlateauScheduler::new(1e-3, 0.9, 1, 0.0);
        s.step(1.0);
        while !s.exhausted(DecayLimit::Events(40)) {
            s.step(1.0);
        }
        assert_eq!(s.decays(), 40);
        assert_eq!(s.lr(), 1.478_088_294_143_460_7e-5);
        let mut s = PlateauScheduler::new(1e-3, 0.9, 1, 0.0);
        s.step(1.0);
        while !s.exhausted(DecayLimit::Reduction(40.0)) {
            s.step(1.0);
        }
        // 0.9^35 > 1/40 > 0.9^36
        assert_eq!(s.decays(), 36);
    }
}
