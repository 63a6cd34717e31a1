//! The multi-positive contrastive objective.
//!
//! For an augmented batch of 2N embeddings and a positive-pair mask, each
//! sample i with positive set Ω_i⁺ contributes
//!
//! ```text
//! L_i = -(1/|Ω_i⁺|) Σ_{j in Ω_i⁺} log( e^{sim(z_i,z_j)/τ} / Σ_{k != i} e^{sim(z_i,z_k)/τ} )
//! ```
//!
//! with cosine similarity and temperature τ; the batch loss is Σ_i L_i.
//! Every positive in the batch appears in the numerator, not just the
//! augmentation twin. The denominator runs over positives and negatives
//! alike, self excluded. Samples with an empty positive set contribute 0
//! and are counted as skipped.
//!
//! The computation is built from graph primitives so gradients flow to the
//! embeddings, and it is stabilized by subtracting the row max before
//! exponentiation, which makes small temperatures safe.

use crate::autodiff::{Axis, Graph, Tensor};
use crate::error::{Error, Result};
use crate::pairing::PairMask;

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    pub temperature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { temperature: 0.1 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Per-batch loss values. `total` is the sum of `per_sample`; skipped
/// samples (empty positive set) hold 0 there.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub per_sample: Vec<f64>,
    pub skipped_count: usize,
}

/// Large negative constant added to the diagonal before the row max / sum,
/// so self-similarity never enters the denominator. Small enough to keep
/// every intermediate finite in f64, large enough that exp underflows to
/// exactly zero after max subtraction.
const DIAG_SUPPRESS: f64 = -1e9;

/// Differentiable cosine-similarity matrix S[i][j] = <z_i, z_j> / (|z_i||z_j|).
///
/// Errors on all-zero rows; a direction-free embedding has no cosine.
pub fn cosine_sim_matrix(g: &mut Graph, z: &Tensor) -> Result<Tensor> {
    if z.rank() != 2 {
        return Err(Error::Contract(format!(
            "cosine_sim_matrix expects rank 2, got shape {:?}",
            z.shape()
        )));
    }
    let m = z.shape()[0];
    let sq = g.mul(z, z)?;
    let rowsum = g.sum(&sq, Axis::Dim(1))?;
    if let Some(i) = rowsum.data().iter().position(|&s| s == 0.0) {
        return Err(Error::Domain {
            op: "cosine_sim_matrix",
            index: i,
            detail: "all-zero embedding row".into(),
        });
    }
    // row norms via exp(log(s)/2); gradients follow the chain automatically
    let rs_col = g.reshape(&rowsum, &[m, 1])?;
    let log_rs = g.log(&rs_col)?;
    let half_log = g.scale(&log_rs, 0.5)?;
    let norms = g.exp(&half_log)?;
    let norms_t = g.transpose(&norms)?;
    let denom = g.matmul(&norms, &norms_t)?;
    let zt = g.transpose(z)?;
    let zzt = g.matmul(z, &zt)?;
    g.div(&zzt, &denom)
}

/// The batch objective. Returns the differentiable scalar total together
/// with a value-level report.
pub fn pcl_loss(
    g: &mut Graph,
    z: &Tensor,
    mask: &PairMask,
    cfg: &LossConfig,
) -> Result<(Tensor, LossReport)> {
    cfg.validate()?;
    if z.rank() != 2 {
        return Err(Error::Contract(format!(
            "pcl_loss expects rank-2 embeddings, got shape {:?}",
            z.shape()
        )));
    }
    let m = z.shape()[0];
    if mask.size() != m {
        return Err(Error::ShapeMismatch {
            op: "pcl_loss",
            lhs: z.shape().to_vec(),
            rhs: vec![mask.size(), mask.size()],
        });
    }
    if m < 2 {
        return Err(Error::Contract(
            "pcl_loss needs a batch of at least 2 samples".into(),
        ));
    }

    let sim = cosine_sim_matrix(g, z)?;
    let logits = g.scale(&sim, 1.0 / cfg.temperature)?;

    // mask the diagonal out of max and denominator
    let mut diag = vec![0.0; m * m];
    for i in 0..m {
        diag[i * m + i] = DIAG_SUPPRESS;
    }
    let diag = g.leaf(&Tensor::new(&[m, m], diag)?);
    let masked = g.add(&logits, &diag)?;

    // log-sum-exp over k != i, stabilized by the row max
    let rowmax = g.max(&masked, Axis::Dim(1))?;
    let rowmax_col = g.reshape(&rowmax, &[m, 1])?;
    let ones_row = g.leaf(&Tensor::ones(&[1, m]));
    let max_mat = g.matmul(&rowmax_col, &ones_row)?;
    let shifted = g.sub(&masked, &max_mat)?;
    let expd = g.exp(&shifted)?;
    let denom = g.sum(&expd, Axis::Dim(1))?;
    let log_denom_partial = g.log(&denom)?;
    let log_denom = g.add(&log_denom_partial, &rowmax)?;

    // numerator: mean positive logit per row
    let positives = g.leaf(&Tensor::new(&[m, m], mask.as_f64())?);
    let pos_logits = g.mul(&positives, &logits)?;
    let pos_sum = g.sum(&pos_logits, Axis::Dim(1))?;

    let mut inv_omega = vec![0.0; m];
    let mut active = vec![0.0; m];
    let mut skipped_count = 0usize;
    for i in 0..m {
        let omega = mask.positives_in_row(i);
        if omega == 0 {
            skipped_count += 1;
        } else {
            inv_omega[i] = 1.0 / omega as f64;
            active[i] = 1.0;
        }
    }
    let inv_omega = g.leaf(&Tensor::new(&[m], inv_omega)?);
    let active = g.leaf(&Tensor::new(&[m], active)?);

    let mean_pos = g.mul(&inv_omega, &pos_sum)?;
    let denom_term = g.mul(&active, &log_denom)?;
    let per_sample = g.sub(&denom_term, &mean_pos)?;
    let total = g.sum(&per_sample, Axis::All)?;

    let report = LossReport {
        total: total.item()?,
        per_sample: per_sample.data().to_vec(),
        skipped_count,
    };
    Ok((total, report))
}
