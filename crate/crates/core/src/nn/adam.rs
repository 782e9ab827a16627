use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new<'a, I>(config: AdamConfig, params: I) -> Self
    where
        I: IntoIterator<Item = &'a Tensor>,
    {
        let (m, v) = params.into_iter().map(|p| (vec![0.0; p.len()], vec![0.0; p.len()])).unzip();
        Self { config, m, v, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of every parameter.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.len() != m.len() {
                return Err(Error::ShapeMismatch(format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Tensor {
        Tensor::new(vec![1], vec![x]).unwrap()
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = scalar(0.7);
        let mut opt = Adam::new(AdamConfig::default(), [&p]);
        opt.step(&mut [&mut p], &[scalar(0.0)]).unwrap();
        assert_eq!(p.data(), &[0.7]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_by_hand() {
        // m_hat = g, v_hat = g², so the step is lr * g / (|g| + eps)
        let g = 0.3;
        let mut p = scalar(1.0);
        let mut opt = Adam::new(AdamConfig::default(), [&p]);
        opt.step(&mut [&mut p], &[scalar(g)]).unwrap();
        let expected = 1.0 - 1e-4 * g / (g + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn minimizes_square() {
        let mut x = scalar(1.0);
        let mut opt = Adam::new(AdamConfig { lr: 1e-2, ..Default::default() }, [&x]);
        for _ in 0..10_000 {
            let g = scalar(2.0 * x.data()[0]);
            opt.step(&mut [&mut x], &[g]).unwrap();
        }
        assert!(x.data()[0].abs() < 1e-3, "{}", x.data()[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(AdamConfig::default(), [&p]);
        let g = Tensor::zeros(&[2]);
        assert!(matches!(opt.step(&mut [&mut p], &[g]), Err(Error::ShapeMismatch(_))));
    }
}
