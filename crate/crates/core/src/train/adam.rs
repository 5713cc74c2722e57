use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    check_dim(params.len(), grads.len())?;
    check_dim(params.len(), state.m.len())?;
    check_dim(params.len(), state.v.len())?;
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(None, format!("non-finite gradient at parameter {i}")));
    }
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState { m: vec![0.5, -0.5], v: vec![0.25, 0.25], t: 3 };
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert!(p[0] < 1.0 && p[1] > -2.0, "stale momentum still moves parameters");
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        let mut s = AdamState { m: vec![0.5, -0.5], v: vec![0.25, 0.25], t: 3 };
        let mut q = vec![0.0, 0.0];
        adam_step(&mut q, &[0.0, 0.0], &mut s, 0.0).unwrap();
        assert_eq!(s.m, vec![0.45, -0.45]);
        assert!((s.v[0] - 0.24975).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let mut s = AdamState::new(3);
        let g = [3.0, -0.02, 1e-3];
        adam_step(&mut p, &g, &mut s, 0.01).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
            let expected = -0.01 * gi / (gi.abs() + ADAM_EPS);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi + 0.01 * gi.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn tensors_update_independently() {
        let mut joint = vec![1.0, 2.0, 3.0, 4.0];
        let mut sj = AdamState::new(4);
        let mut a = vec![1.0, 2.0];
        let mut sa = AdamState::new(2);
        let mut b = vec![3.0, 4.0];
        let mut sb = AdamState::new(2);
        let grads = [[0.1, -0.3, 2.0, 0.0], [0.2, 0.1, -1.0, 5.0]];
        for g in grads {
            adam_step(&mut joint, &g, &mut sj, 0.05).unwrap();
            adam_step(&mut a, &g[..2], &mut sa, 0.05).unwrap();
            adam_step(&mut b, &g[2..], &mut sb, 0.05).unwrap();
        }
        assert_eq!(&joint[..2], &a[..]);
        assert_eq!(&joint[2..], &b[..]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        assert!(matches!(adam_step(&mut p, &[f64::NAN], &mut s, 0.1), Err(Error::Numeric { .. })));
        assert_eq!(s.t, 0);
    }
}
