//! Adam optimizer and Glorot-uniform initialization.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for a group of parameter tensors sharing one step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new<'a>(
        config: AdamConfig,
        params: impl IntoIterator<Item = &'a Tensor>,
    ) -> Result<Self> {
        let m = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect::<Result<Vec<_>>>()?;
        Ok(AdamState {
            config,
            t: 0,
            v: m.clone(),
            m,
        })
    }

    /// One Adam update over every tensor in the group; `t` advances once.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Dimension(format!(
                    "adam shapes disagree: param {:?}, grad {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as f64;
        let bc1 = 1.0 - libm::pow(beta1, t);
        let bc2 = 1.0 - libm::pow(beta2, t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// I.i.d. samples from `U[-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform_init<R: rand::Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Config(format!(
            "glorot init needs positive fans, got in={fan_in} out={fan_out}"
        )));
    }
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let mut t = Tensor::zeros(shape)?;
    for v in t.data_mut() {
        let u: f64 = rng.random();
        *v = -bound + 2.0 * bound * u;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use alloc::vec;

    fn step_once(state: &mut AdamState, p: &mut Tensor, g: &Tensor) {
        state.step(&mut [p], core::slice::from_ref(g)).unwrap();
    }

    #[test]
    fn first_step_unit_gradient() {
        let mut p = Tensor::vector(vec![0.0; 3]);
        let g = Tensor::vector(vec![1.0; 3]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        step_once(&mut st, &mut p, &g);
        let expected = -0.001 / (1.0 + 1e-8);
        for &v in p.data() {
            assert!((v - expected).abs() < 1e-18, "{v}");
        }
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_is_a_noop() {
        let mut p = Tensor::vector(vec![0.25, -3.0]);
        let before = p.clone();
        let g = Tensor::vector(vec![0.0, 0.0]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        step_once(&mut st, &mut p, &g);
        assert_eq!(p, before);
    }

    #[test]
    fn second_step_with_constant_gradient() {
        let mut p = Tensor::vector(vec![0.0]);
        let g = Tensor::vector(vec![1.0]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        step_once(&mut st, &mut p, &g);
        let after_one = p.data()[0];
        step_once(&mut st, &mut p, &g);
        let delta = p.data()[0] - after_one;
        assert!((delta + 0.001).abs() < 1e-10, "{delta}");
    }

    #[test]
    fn descends_on_quadratic() {
        for &lr in &[0.1, 0.01, 0.001] {
            let mut p = Tensor::vector(vec![2.0]);
            let loss = |x: f64| (x - 0.5) * (x - 0.5);
            let before = loss(p.data()[0]);
            let g = Tensor::vector(vec![2.0 * (p.data()[0] - 0.5)]);
            let cfg = AdamConfig {
                lr,
                ..AdamConfig::default()
            };
            let mut st = AdamState::new(cfg, [&p]).unwrap();
            step_once(&mut st, &mut p, &g);
            assert!(loss(p.data()[0]) < before);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::vector(vec![0.0; 2]);
        let g = Tensor::vector(vec![1.0; 3]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        assert!(st.step(&mut [&mut p], &[g]).is_err());
        assert_eq!(st.t, 0);
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut rng = seeded_rng(7);
        let t = glorot_uniform_init(&[3, 3], 3, 3, &mut rng).unwrap();
        assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));

        let a = glorot_uniform_init(&[4, 5], 5, 4, &mut seeded_rng(11)).unwrap();
        let b = glorot_uniform_init(&[4, 5], 5, 4, &mut seeded_rng(11)).unwrap();
        assert_eq!(a, b);

        assert!(glorot_uniform_init(&[2], 0, 2, &mut rng).is_err());
    }

    #[test]
    fn glorot_mean_near_zero() {
        let t = glorot_uniform_init(&[100_000], 3, 3, &mut seeded_rng(3)).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }
}
