use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Adam with decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, shapes: &[Array2<f64>]) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: shapes.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            v: shapes.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps, wd) = (self.beta1, self.beta2, self.lr, self.eps, self.weight_decay);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= lr * wd * *p;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr() {
        // After one step the bias-corrected ratio is g/|g|.
        let mut p = vec![array![[1.0, -2.0]]];
        let mut opt = AdamW::new(0.1, 0.0, &p);
        opt.step(&mut p, &[array![[3.0, -0.5]]]);
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-7);
        assert!((p[0][[0, 1]] + 1.9).abs() < 1e-7);
    }

    #[test]
    fn decay_is_decoupled() {
        let mut p = vec![array![[2.0]]];
        let mut opt = AdamW::new(0.1, 0.5, &p);
        opt.step(&mut p, &[array![[0.0]]]);
        assert!((p[0][[0, 0]] - 1.9).abs() < 1e-12);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = vec![array![[5.0, -3.0]]];
        let mut opt = AdamW::new(0.05, 0.0, &p);
        for _ in 0..2000 {
            let g = p[0].mapv(|x| 2.0 * (x - 1.0));
            opt.step(&mut p, &[g]);
        }
        assert!(p[0].iter().all(|x| (x - 1.0).abs() < 1e-3));
    }
}
