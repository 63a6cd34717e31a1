//! Supervised fine-tuning of the segmentation network.
//!
//! The encoder comes from a pretraining checkpoint (or stays randomly
//! initialized for the no-pretraining baseline); the decoder is always
//! fresh. Per-pixel cross-entropy, Adam, cosine decay.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Axis, Graph, Tensor};
use crate::error::{Error, Result};
use crate::model::{
    images_tensor, init_params, segment, Checkpoint, EncoderConfig, Provenance,
};
use crate::rng::Rng;
use crate::train::optim::{cosine_lr, Optimizer};
use crate::volume::{resample_pad, sample_batch, PreprocessConfig, Slice2D, Volume};

/// Fine-tuning hyperparameters. Desk defaults; the upstream protocol is
/// 100 epochs, batch 5, learning rate 5e-5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Number of labeled volumes the caller passes in; checked, and echoed
    /// into provenance.
    pub m: usize,
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    /// Geometry for the random-init path; a checkpoint overrides the
    /// encoder part of this.
    pub model: EncoderConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 50,
            batch: 5,
            lr: 1e-3,
            m: 2,
            seed: 0,
            preprocess: PreprocessConfig::default(),
            model: EncoderConfig::default(),
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || self.m == 0 {
            return Err(Error::Config("epochs, batch, and m must be >= 1".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        self.preprocess.validate()?;
        self.model.validate()
    }
}

pub struct FinetuneOutcome {
    pub checkpoint: Checkpoint,
    pub loss_history: Vec<f64>,
    pub epoch_mean_loss: Vec<f64>,
}

/// Mean per-pixel cross-entropy between (batch, classes, H, W) logits and
/// flat labels in (batch, H, W) order, stabilized by the row max.
pub fn cross_entropy(g: &mut Graph, logits: &Tensor, labels: &[u16]) -> Result<Tensor> {
    if logits.rank() != 4 {
        return Err(Error::Contract(format!(
            "cross_entropy expects rank-4 logits, got {:?}",
            logits.shape()
        )));
    }
    let (b, c, h, w) = (
        logits.shape()[0],
        logits.shape()[1],
        logits.shape()[2],
        logits.shape()[3],
    );
    let pixels = b * h * w;
    if labels.len() != pixels {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            lhs: vec![pixels],
            rhs: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= c) {
        return Err(Error::Contract(format!("label {bad} outside [0, {c})")));
    }

    // (b, c, h*w) -> (b, h*w, c) -> (pixels, c)
    let merged = g.reshape(logits, &[b, c, h * w])?;
    let pixel_major = g.swap_axes(&merged, 1, 2)?;
    let rows = g.reshape(&pixel_major, &[pixels, c])?;

    let rowmax = g.max(&rows, Axis::Dim(1))?;
    let rowmax_col = g.reshape(&rowmax, &[pixels, 1])?;
    let ones_row = g.leaf(&Tensor::ones(&[1, c]));
    let shifted = {
        let max_mat = g.matmul(&rowmax_col, &ones_row)?;
        g.sub(&rows, &max_mat)?
    };
    let expd = g.exp(&shifted)?;
    let denom = g.sum(&expd, Axis::Dim(1))?;
    let log_denom = g.log(&denom)?;
    let lse = g.add(&log_denom, &rowmax)?;

    let mut onehot = vec![0.0; pixels * c];
    for (p, &l) in labels.iter().enumerate() {
        onehot[p * c + l as usize] = 1.0;
    }
    let onehot = g.leaf(&Tensor::new(&[pixels, c], onehot)?);
    let picked_terms = g.mul(&onehot, &rows)?;
    let picked = g.sum(&picked_terms, Axis::Dim(1))?;
    let per_pixel = g.sub(&lse, &picked)?;
    g.mean(&per_pixel, Axis::All)
}

/// Flat labels of a slice batch in (batch, H, W) order. Every slice must
/// carry a label grid.
pub fn labels_of(slices: &[Slice2D]) -> Result<Vec<u16>> {
    let mut out = Vec::new();
    for s in slices {
        let lab = s.label.as_ref().ok_or_else(|| {
            Error::Contract(format!(
                "slice {} of {} has no labels; fine-tuning needs labeled volumes",
                s.slice_index, s.volume_id
            ))
        })?;
        out.extend_from_slice(lab);
    }
    Ok(out)
}

/// Trains the segmentation network on `labeled` volumes. `init` seeds the
/// encoder; `None` is the no-pretraining baseline. The decoder (and
/// projection head) start fresh either way.
pub fn finetune(
    init: Option<&Checkpoint>,
    labeled: &[Volume],
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::Contract("finetune: no labeled volumes".into()));
    }
    if labeled.len() != cfg.m {
        return Err(Error::Contract(format!(
            "finetune got {} volumes but cfg.m = {}",
            labeled.len(),
            cfg.m
        )));
    }
    for v in labeled {
        if !v.has_labels() {
            return Err(Error::Contract(format!(
                "volume {} carries no labels",
                v.volume_id()
            )));
        }
    }
    let num_classes = labeled[0].num_classes();
    if labeled.iter().any(|v| v.num_classes() != num_classes) {
        return Err(Error::Contract(
            "labeled volumes disagree on num_classes".into(),
        ));
    }

    // fresh params; encoder geometry follows the checkpoint when present
    let mut model_cfg = match init {
        Some(ckpt) => ckpt.params.config.clone(),
        None => cfg.model.clone(),
    };
    model_cfg.num_classes = num_classes;
    let mut params = init_params(&model_cfg, cfg.seed)?;
    if let Some(ckpt) = init {
        params.adopt_encoder_from(&ckpt.params)?;
    }

    let total_slices: usize = labeled.iter().map(|v| v.n_slices()).sum();
    let steps_per_epoch = total_slices.div_ceil(cfg.batch);
    let total_steps = cfg.epochs * steps_per_epoch;

    let mut sample_rng = Rng::from_seed_stream(cfg.seed, 0xF1);
    let mut optimizer = Optimizer::adam(&params);
    let mut loss_history = Vec::with_capacity(total_steps);

    for step in 0..total_steps {
        let batch = sample_batch(labeled, cfg.batch.min(total_slices), &mut sample_rng)?;
        let prepared: Vec<Slice2D> = batch
            .slices
            .iter()
            .map(|s| resample_pad(s, &cfg.preprocess))
            .collect::<Result<_>>()?;
        let labels = labels_of(&prepared)?;

        let mut graph = Graph::new();
        let bound = params.bind(&mut graph);
        let images = images_tensor(&prepared)?;
        let logits = segment(&mut graph, &bound, &images)?;
        let loss = cross_entropy(&mut graph, &logits, &labels)?;
        let loss_value = loss.item()?;

        let grads = graph.backward(&loss)?;
        let grad_list: Vec<Option<Tensor>> = bound
            .entries()
            .iter()
            .map(|(_, t)| grads.grad(t).map(|g| g.detached()))
            .collect();
        let lr = cosine_lr(step, total_steps, cfg.lr);
        optimizer.step(&mut params, &grad_list, lr, step)?;
        loss_history.push(loss_value);
    }

    let epoch_mean_loss: Vec<f64> = loss_history
        .chunks(steps_per_epoch)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();

    Ok(FinetuneOutcome {
        checkpoint: Checkpoint {
            params,
            provenance: Provenance {
                pairing: init.and_then(|c| c.provenance.pairing),
                temperature: init.and_then(|c| c.provenance.temperature),
                seed: cfg.seed,
                epochs: cfg.epochs,
                stage: "finetune".into(),
            },
        },
        loss_history,
        epoch_mean_loss,
    })
}
