//! Optimizer step: Adam with bias correction (default) or plain gradient
//! descent.

use crate::numerics::Tensor;
use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// First/second moment state, one pair per trainable tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: usize,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, tensors: &[&Tensor]) -> Self {
        OptimizerState {
            kind,
            first: tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
            second: tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Apply one update; `params` and `grads` line up with the tensors the
    /// state was built from.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) {
        debug_assert_eq!(params.len(), self.first.len());
        debug_assert_eq!(grads.len(), self.first.len());
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut().zip(self.second.iter_mut()))
                {
                    let (md, vd) = (m.data_mut(), v.data_mut());
                    for (i, (pv, gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        md[i] = ADAM_BETA1 * md[i] + (1.0 - ADAM_BETA1) * gv;
                        vd[i] = ADAM_BETA2 * vd[i] + (1.0 - ADAM_BETA2) * gv * gv;
                        let mhat = md[i] / bias1;
                        let vhat = vd[i] / bias2;
                        *pv -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::zeros(&[3]);
        let mut state = OptimizerState::new(OptimizerKind::Adam, &[&p]);
        let before = p.clone();
        for _ in 0..10 {
            state.step(&mut [&mut p], &[&g], 0.1);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        // with a constant gradient the Adam step magnitude tends to lr
        let mut p = Tensor::new(vec![1], vec![0.0]).unwrap();
        let g = Tensor::new(vec![1], vec![2.5]).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &[&p]);
        let lr = 0.01;
        let mut prev = p.data()[0];
        let mut last_step = 0.0;
        for _ in 0..500 {
            state.step(&mut [&mut p], &[&g], lr);
            last_step = prev - p.data()[0];
            prev = p.data()[0];
        }
        assert!((last_step - lr).abs() < 1e-6, "step {last_step}");
    }

    #[test]
    fn matches_extended_precision_scalar_trace() {
        // frozen from a 50-digit reference of 20 Adam steps with
        // p0 = 1, lr = 0.1 and gradient schedule g_t = sin(t)
        let mut p = Tensor::new(vec![1], vec![1.0]).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &[&p]);
        let expected = [
            (1, 0.9000000011883951),
            (2, 0.7998731516691016),
            (3, 0.7157378232102339),
            (5, 0.6967408237465069),
            (10, 0.6345427105003065),
            (15, 0.6291692695696524),
            (20, 0.6387512884901039),
        ];
        let mut want = expected.iter();
        let mut next_check = want.next();
        for t in 1..=20 {
            let g = Tensor::new(vec![1], vec![(t as f64).sin()]).unwrap();
            state.step(&mut [&mut p], &[&g], 0.1);
            if let Some(&(at, value)) = next_check {
                if at == t {
                    assert!(
                        (p.data()[0] - value).abs() <= 1e-12,
                        "step {t}: {} vs {value}",
                        p.data()[0]
                    );
                    next_check = want.next();
                }
            }
        }
        assert!(next_check.is_none());
    }

    #[test]
    fn sgd_is_plain_descent() {
        let mut p = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        let g = Tensor::new(vec![2], vec![0.5, -0.5]).unwrap();
        let mut state = OptimizerState::new(OptimizerKind::Sgd, &[&p]);
        state.step(&mut [&mut p], &[&g], 0.2);
        assert_eq!(p.data(), &[0.9, 1.1]);
    }
}
