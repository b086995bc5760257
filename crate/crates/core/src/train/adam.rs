use crate::{Error, Result};

/// First- and second-moment accumulators of Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        OptimizerState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place. Nothing is modified when a
/// gradient entry is not finite.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::invalid(
            "parameter, gradient and state lengths differ",
        ));
    }
    if let Some(j) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::non_finite("gradient entry", j));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut theta = [1.0];
        let mut st = OptimizerState::new(1);
        adam_step(&mut theta, &[1.0], &mut st, 0.1, &AdamConfig::default()).unwrap();
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
        let expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15);
        let mut theta = [1.0];
        let mut st = OptimizerState::new(1);
        adam_step(&mut theta, &[1e4], &mut st, 0.1, &AdamConfig::default()).unwrap();
        assert!((theta[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut theta = [0.5, -2.0];
        let mut st = OptimizerState::new(2);
        let cfg = AdamConfig::default();
        adam_step(&mut theta, &[1.0, -1.0], &mut st, 0.01, &cfg).unwrap();
        let after_first = theta;
        let m = st.m.clone();
        adam_step(&mut theta, &[0.0, 0.0], &mut st, 0.0, &cfg).unwrap();
        assert_eq!(theta, after_first);
        for (a, b) in st.m.iter().zip(&m) {
            assert_eq!(*a, 0.9 * b);
        }
    }

    #[test]
    fn non_finite_gradient_is_reported_without_update() {
        let mut theta = [1.0, 2.0, 3.0];
        let mut st = OptimizerState::new(3);
        let err = adam_step(
            &mut theta,
            &[0.0, f64::NAN, 1.0],
            &mut st,
            0.1,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
        assert_eq!(theta, [1.0, 2.0, 3.0]);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut theta = vec![0.3, -0.1, 2.0];
            let mut st = OptimizerState::new(3);
            for k in 0..50 {
                let g: Vec<f64> = theta.iter().map(|t| t * (k as f64).sin()).collect();
                adam_step(&mut theta, &g, &mut st, 1e-2, &AdamConfig::default()).unwrap();
            }
            theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
