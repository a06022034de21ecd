//! SGD with momentum, weight decay, and a milestone learning-rate schedule.

use crate::error::{Error, Result};

use super::model::{DenseLayer, MlpModel, ParamGrads};

/// Optimizer state. Velocity buffers mirror the parameter shapes; the
/// schedule is a list of `(epoch milestone, multiplicative factor)` pairs,
/// every factor whose milestone is `<= epoch` applies.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: Vec<(usize, f64)>,
    velocity: Vec<DenseLayer>,
}

impl OptimState {
    pub fn new(
        learning_rate: f64,
        momentum: f64,
        weight_decay: f64,
        schedule: Vec<(usize, f64)>,
        model: &MlpModel,
    ) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        if !momentum.is_finite() || !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid_argument(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        if !weight_decay.is_finite() || weight_decay < 0.0 {
            return Err(Error::invalid_argument(format!(
                "weight decay must be non-negative and finite, got {weight_decay}"
            )));
        }
        for (milestone, factor) in &schedule {
            if !factor.is_finite() || *factor <= 0.0 {
                return Err(Error::invalid_argument(format!(
                    "schedule factor at epoch {milestone} must be positive, got {factor}"
                )));
            }
        }
        Ok(OptimState {
            learning_rate,
            momentum,
            weight_decay,
            schedule,
            velocity: ParamGrads::zeros_like(model).layers,
        })
    }

    /// Effective learning rate at an epoch: the base rate times every
    /// schedule factor whose milestone has been reached.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let mut lr = self.learning_rate;
        for (milestone, factor) in &self.schedule {
            if *milestone <= epoch {
                lr *= factor;
            }
        }
        lr
    }
}

/// One SGD update:
/// `v <- momentum * v + grad + weight_decay * param`,
/// `param <- param - lr(epoch) * v`.
/// Weight decay applies to weights and biases alike.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &ParamGrads,
    opt: &mut OptimState,
    epoch: usize,
) -> Result<()> {
    if grads.layers.len() != model.layers.len() || opt.velocity.len() != model.layers.len() {
        return Err(Error::invalid_argument(
            "gradient/velocity layer count does not match the model",
        ));
    }
    let lr = opt.learning_rate_at(epoch);
    for ((params, grad), vel) in model
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut opt.velocity)
    {
        if params.b.len() != grad.b.len() || params.w[0].len() != grad.w[0].len() {
            return Err(Error::invalid_argument("gradient shape mismatch"));
        }
        for ((prow, grow), vrow) in params.w.iter_mut().zip(&grad.w).zip(&mut vel.w) {
            for ((p, g), v) in prow.iter_mut().zip(grow).zip(vrow.iter_mut()) {
                *v = opt.momentum * *v + g + opt.weight_decay * *p;
                *p -= lr * *v;
            }
        }
        for ((p, g), v) in params.b.iter_mut().zip(&grad.b).zip(vel.b.iter_mut()) {
            *v = opt.momentum * *v + g + opt.weight_decay * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netkit::model::init_mlp;

    #[test]
    fn plain_sgd_update() {
        let mut model = init_mlp(&[2, 2], 3).unwrap();
        let before = model.layers[0].clone();
        let mut grads = ParamGrads::zeros_like(&model);
        grads.layers[0].w[0][0] = 0.5;
        grads.layers[0].b[1] = -0.25;
        let mut opt = OptimState::new(0.1, 0.0, 0.0, vec![], &model).unwrap();
        sgd_step(&mut model, &grads, &mut opt, 0).unwrap();
        assert_eq!(model.layers[0].w[0][0], before.w[0][0] - 0.1 * 0.5);
        assert_eq!(model.layers[0].b[1], before.b[1] + 0.1 * 0.25);
        assert_eq!(model.layers[0].w[1][1], before.w[1][1]);
    }

    #[test]
    fn zero_grad_zero_decay_is_a_noop() {
        let mut model = init_mlp(&[3, 4, 2], 9).unwrap();
        let snapshot = model.clone();
        let grads = ParamGrads::zeros_like(&model);
        let mut opt = OptimState::new(0.5, 0.9, 0.0, vec![], &model).unwrap();
        sgd_step(&mut model, &grads, &mut opt, 0).unwrap();
        assert_eq!(model, snapshot);
    }

    #[test]
    fn schedule_applies_milestones() {
        let model = init_mlp(&[2, 2], 0).unwrap();
        let opt = OptimState::new(1.0, 0.0, 0.0, vec![(30, 0.1), (60, 0.1)], &model).unwrap();
        assert_eq!(opt.learning_rate_at(0), 1.0);
        assert_eq!(opt.learning_rate_at(29), 1.0);
        assert_eq!(opt.learning_rate_at(30), 0.1);
        assert!((opt.learning_rate_at(60) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates() {
        let mut model = init_mlp(&[2, 2], 3).unwrap();
        model.layers[0].w = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        model.layers[0].b = vec![0.0, 0.0];
        let mut grads = ParamGrads::zeros_like(&model);
        grads.layers[0].w[0][0] = 1.0;
        let mut opt = OptimState::new(1.0, 0.5, 0.0, vec![], &model).unwrap();
        sgd_step(&mut model, &grads, &mut opt, 0).unwrap();
        // v = 1, w = -1
        sgd_step(&mut model, &grads, &mut opt, 0).unwrap();
        // v = 1.5, w = -2.5
        assert_eq!(model.layers[0].w[0][0], -2.5);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let model = init_mlp(&[2, 2], 0).unwrap();
        assert!(OptimState::new(0.0, 0.0, 0.0, vec![], &model).is_err());
        assert!(OptimState::new(0.1, 1.0, 0.0, vec![], &model).is_err());
        assert!(OptimState::new(0.1, 0.0, -0.1, vec![], &model).is_err());
        assert!(OptimState::new(0.1, 0.0, 0.0, vec![(5, 0.0)], &model).is_err());
    }
}
