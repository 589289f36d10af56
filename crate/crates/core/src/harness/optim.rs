use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{Device, Tensor};

use super::config::OptimConfig;
use crate::error::{Error, Result};
use crate::nn::{NamedTensor, ParamStore};

/// Moment estimates and step count of [`AdamW`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<NamedTensor>,
    pub second_moment: Vec<NamedTensor>,
}

/// Adam with decoupled weight decay and two learning-rate groups: encoder
/// parameters and everything else.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: OptimConfig,
    total_steps: usize,
    step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

/// Whether a parameter belongs to an encoder.
pub fn is_encoder_parameter(name: &str) -> bool {
    name.split('.').any(|part| part == "encoder")
}

impl AdamW {
    pub fn new(config: &OptimConfig, total_steps: usize) -> Self {
        AdamW {
            config: config.clone(),
            total_steps: total_steps.max(1),
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Learning-rate multiplier for the 0-based step `step`: linear warmup
    /// to 1, then either constant or linear decay towards 0.
    pub fn schedule(&self, step: u64) -> f64 {
        let total = self.total_steps as f64;
        let warmup = (self.config.warmup_fraction * total).ceil();
        let s = step as f64;
        if s < warmup {
            (s + 1.0) / warmup
        } else if self.config.linear_decay {
            ((total - s) / (total - warmup).max(1.0)).max(0.0)
        } else {
            1.0
        }
    }

    /// Applies one update to every trainable parameter with a gradient and
    /// returns the gradient norm before clipping.
    pub fn step(&mut self, store: &ParamStore, grads: &GradStore) -> Result<f64> {
        let params: Vec<(&str, &candle_core::Var, &Tensor)> = store
            .trainable()
            .filter_map(|(name, var)| grads.get(var.as_tensor()).map(|g| (name, var, g)))
            .collect();
        let mut sq = 0.0;
        for (_, _, g) in &params {
            sq += g.sqr()?.sum_all()?.to_scalar::<f64>()?;
        }
        let norm = sq.sqrt();
        if !norm.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite gradient norm {norm}")));
        }
        let clip = if self.config.max_grad_norm > 0.0 && norm > self.config.max_grad_norm {
            self.config.max_grad_norm / norm
        } else {
            1.0
        };

        let factor = self.schedule(self.step);
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        for (name, var, grad) in params {
            let grad = grad.affine(clip, 0.0)?;
            let base = if is_encoder_parameter(name) {
                self.config.encoder_lr
            } else {
                self.config.task_lr
            };
            let lr = base * factor;
            let (m, v) = match self.moments.remove(name) {
                Some(mv) => mv,
                None => (grad.zeros_like()?, grad.zeros_like()?),
            };
            let m = ((m * b1)? + (&grad * (1.0 - b1))?)?;
            let v = ((v * b2)? + (grad.sqr()? * (1.0 - b2))?)?;
            let update =
                (m.affine(1.0 / bias1, 0.0)? / (v.affine(1.0 / bias2, 0.0)?.sqrt()? + self.config.eps)?)?;
            let theta = var.as_tensor();
            let decayed = theta.affine(1.0 - lr * self.config.weight_decay, 0.0)?;
            var.set(&(decayed - update.affine(lr, 0.0)?)?)?;
            self.moments.insert(name.to_string(), (m, v));
        }
        Ok(norm)
    }

    pub fn state(&self) -> Result<OptimizerState> {
        let mut first = Vec::with_capacity(self.moments.len());
        let mut second = Vec::with_capacity(self.moments.len());
        for (name, (m, v)) in &self.moments {
            first.push(NamedTensor::from_tensor(name, m)?);
            second.push(NamedTensor::from_tensor(name, v)?);
        }
        Ok(OptimizerState {
            step: self.step,
            first_moment: first,
            second_moment: second,
        })
    }

    pub fn load_state(&mut self, state: &OptimizerState, device: &Device) -> Result<()> {
        if state.first_moment.len() != state.second_moment.len() {
            return Err(Error::Checkpoint(
                "optimizer moments have different lengths".into(),
            ));
        }
        let mut moments = BTreeMap::new();
        for (m, v) in state.first_moment.iter().zip(&state.second_moment) {
            if m.name != v.name || m.shape != v.shape {
                return Err(Error::Checkpoint(format!(
                    "optimizer moments disagree for {} / {}",
                    m.name, v.name
                )));
            }
            moments.insert(m.name.clone(), (m.to_tensor(device)?, v.to_tensor(device)?));
        }
        self.moments = moments;
        self.step = state.step;
        Ok(())
    }
}
