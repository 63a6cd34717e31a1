//! Finite-difference gradient verification.

use super::graph::Graph;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar-valued tensor program
/// against central finite differences, perturbing every entry of every
/// input.
///
/// Returns the maximum over entries of
/// `|analytic - central| / max(1, |central|)` where
/// `central = (f(x + eps e) - f(x - eps e)) / (2 eps)`.
///
/// Inputs should sit at least ~10*eps away from non-differentiable points
/// (relu kinks, max ties) or the two sides will disagree by construction.
pub fn grad_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Tensor]) -> Result<Tensor>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("grad_check eps must be > 0, got {eps}")));
    }

    // Analytic pass.
    let mut graph = Graph::new();
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| graph.leaf(&t.detached().with_grad()))
        .collect();
    let loss = f(&mut graph, &leaves)?;
    if loss.len() != 1 {
        return Err(Error::Contract(format!(
            "grad_check: program must be scalar-valued, got shape {:?}",
            loss.shape()
        )));
    }
    let grads = graph.backward(&loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| grads.grad(l).expect("leaf gradient").data().to_vec())
        .collect();

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ls: Vec<Tensor> = xs.iter().map(|t| g.leaf(t)).collect();
        f(&mut g, &ls)?.item()
    };

    let mut max_rel = 0.0f64;
    for (which, input) in inputs.iter().enumerate() {
        for (i, &analytic_i) in analytic[which].iter().enumerate().take(input.len()) {
            let mut plus: Vec<Tensor> = inputs.iter().map(Tensor::detached).collect();
            plus[which].data_mut()[i] += eps;
            let mut minus: Vec<Tensor> = inputs.iter().map(Tensor::detached).collect();
            minus[which].data_mut()[i] -= eps;
            let central = (eval(&plus)? - eval(&minus)?) / (2.0 * eps);
            let rel = (analytic_i - central).abs() / central.abs().max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
