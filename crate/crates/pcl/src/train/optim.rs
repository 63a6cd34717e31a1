//! Optimizers and the learning-rate schedule.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::Params;

/// Half-cosine decay from lr0 at step 0 to 0 at `total_steps`.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> f64 {
    assert!(total_steps >= 1, "total_steps must be >= 1");
    assert!(step <= total_steps, "step {step} beyond total {total_steps}");
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
}

/// Adam moment constants. Fixed by configuration, not tuned.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

enum State {
    Sgd,
    Adam {
        step: u64,
        // first/second moments per parameter tensor, in Params order
        moments: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

/// Plain SGD or bias-corrected Adam over a parameter set. Gradients are
/// passed in Params order; a `None` gradient is an exact zero (the
/// parameter is left untouched by both rules).
pub struct Optimizer {
    state: State,
}

impl Optimizer {
    pub fn sgd() -> Self {
        Optimizer { state: State::Sgd }
    }

    pub fn adam(params: &Params) -> Self {
        Optimizer {
            state: State::Adam {
                step: 0,
                moments: params
                    .entries()
                    .iter()
                    .map(|(_, t)| (vec![0.0; t.len()], vec![0.0; t.len()]))
                    .collect(),
            },
        }
    }

    /// One update. `step_index` only labels diagnostics.
    pub fn step(
        &mut self,
        params: &mut Params,
        grads: &[Option<Tensor>],
        lr: f64,
        step_index: usize,
    ) -> Result<()> {
        if grads.len() != params.entries().len() {
            return Err(Error::Contract(format!(
                "optimizer got {} gradients for {} parameters",
                grads.len(),
                params.entries().len()
            )));
        }
        for ((name, tensor), grad) in params.entries().iter().zip(grads) {
            if let Some(g) = grad {
                if g.shape() != tensor.shape() {
                    return Err(Error::Contract(format!(
                        "gradient shape {:?} does not match parameter '{name}' {:?}",
                        g.shape(),
                        tensor.shape()
                    )));
                }
                if let Some(idx) = g.data().iter().position(|v| !v.is_finite()) {
                    return Err(Error::NumericAbort {
                        step: step_index,
                        tensor: name.clone(),
                        detail: format!("non-finite gradient at flat index {idx}"),
                    });
                }
            }
        }

        match &mut self.state {
            State::Sgd => {
                for ((_, tensor), grad) in params.entries_mut().iter_mut().zip(grads) {
                    if let Some(g) = grad {
                        let data = tensor.data_mut();
                        for (w, &gv) in data.iter_mut().zip(g.data()) {
                            *w -= lr * gv;
                        }
                    }
                }
            }
            State::Adam { step, moments } => {
                *step += 1;
                let t = *step as f64;
                let bc1 = 1.0 - ADAM_BETA1.powf(t);
                let bc2 = 1.0 - ADAM_BETA2.powf(t);
                for (((_, tensor), grad), (m, v)) in params
                    .entries_mut()
                    .iter_mut()
                    .zip(grads)
                    .zip(moments.iter_mut())
                {
                    let Some(g) = grad else { continue };
                    let data = tensor.data_mut();
                    for i in 0..data.len() {
                        let gv = g.data()[i];
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gv;
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}
