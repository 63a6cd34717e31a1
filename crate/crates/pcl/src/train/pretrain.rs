//! Contrastive pretraining.
//!
//! Per step: sample slices, build the augmented 2N batch, derive the
//! positive-pair mask from the batch positions, embed, evaluate the
//! contrastive objective, backpropagate, SGD with cosine decay. The loop
//! never reads labels; a probe assertion around the whole run proves it.

use serde::{Deserialize, Serialize};

use crate::augment::{make_contrastive_batch, AugConfig};
use crate::error::{Error, Result};
use crate::loss::{pcl_loss, LossConfig};
use crate::model::{encode, images_tensor, init_params, Checkpoint, EncoderConfig, Provenance};
use crate::pairing::{PairingConfig, PairMask};
use crate::rng::Rng;
use crate::train::optim::{cosine_lr, Optimizer};
use crate::volume::{label_reads, resample_pad, sample_batch, PreprocessConfig, Volume};

/// Pretraining hyperparameters. Desk-scale defaults; the upstream protocol
/// runs 200 epochs at batch 32 on clinical volumes, which the same fields
/// express.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    /// Source slices per step (the contrastive batch holds 2x this).
    pub batch: usize,
    /// Initial SGD learning rate.
    pub lr0: f64,
    pub pairing: PairingConfig,
    pub temperature: f64,
    pub seed: u64,
    pub augment: AugConfig,
    pub preprocess: PreprocessConfig,
    pub model: EncoderConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 30,
            batch: 16,
            lr0: 0.1,
            pairing: PairingConfig::Pcl { t: 0.1 },
            temperature: 0.1,
            seed: 0,
            augment: AugConfig::default(),
            preprocess: PreprocessConfig::default(),
            model: EncoderConfig::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be >= 1".into()));
        }
        if self.lr0 <= 0.0 {
            return Err(Error::Config(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        self.pairing.validate()?;
        self.augment.validate()?;
        self.preprocess.validate()?;
        self.model.validate()
    }
}

/// Everything a pretraining run produces.
pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    /// Batch loss per step.
    pub loss_history: Vec<f64>,
    /// Mean batch loss per epoch.
    pub epoch_mean_loss: Vec<f64>,
    /// Samples skipped for an empty positive set, summed over steps.
    pub skipped_samples: usize,
}

/// Step-level observation for tests and instrumentation.
pub struct StepTrace<'a> {
    pub step: usize,
    pub positions: &'a [f64],
    pub mask: &'a PairMask,
    pub loss: f64,
}

pub fn pretrain(pool: &[Volume], cfg: &PretrainConfig) -> Result<PretrainOutcome> {
    pretrain_with_hook(pool, cfg, |_| {})
}

/// [`pretrain`] with a per-step observer.
pub fn pretrain_with_hook(
    pool: &[Volume],
    cfg: &PretrainConfig,
    mut hook: impl FnMut(&StepTrace),
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Contract("pretrain: empty volume pool".into()));
    }

    // the unlabeled view of the pool; the probe below proves the loop
    // stayed label-blind
    let pool: Vec<Volume> = pool.iter().map(Volume::without_labels).collect();
    let probe_before = label_reads();

    let total_slices: usize = pool.iter().map(|v| v.n_slices()).sum();
    let steps_per_epoch = total_slices.div_ceil(cfg.batch);
    let total_steps = cfg.epochs * steps_per_epoch;

    let mut params = init_params(&cfg.model, cfg.seed)?;
    let mut sample_rng = Rng::from_seed_stream(cfg.seed, 0xA1);
    let mut aug_rng = Rng::from_seed_stream(cfg.seed, 0xA2);
    let mut optimizer = Optimizer::sgd();
    let loss_cfg = LossConfig {
        temperature: cfg.temperature,
    };

    let mut loss_history = Vec::with_capacity(total_steps);
    let mut skipped_samples = 0usize;

    for step in 0..total_steps {
        let batch = sample_batch(&pool, cfg.batch, &mut sample_rng)?;
        let prepared: Vec<_> = batch
            .slices
            .iter()
            .map(|s| resample_pad(s, &cfg.preprocess))
            .collect::<Result<_>>()?;
        let aug = make_contrastive_batch(
            &crate::volume::SliceBatch { slices: prepared },
            &cfg.augment,
            &mut aug_rng,
        );
        let positions = aug.positions();
        let mask = cfg.pairing.build_mask(&positions)?;

        let mut graph = crate::autodiff::Graph::new();
        let bound = params.bind(&mut graph);
        let images = images_tensor(&aug.slices)?;
        let (_repr, z) = encode(&mut graph, &bound, &images)?;
        let (total, report) =
            pcl_loss(&mut graph, &z, &mask, &loss_cfg).map_err(|e| numeric_context(e, step))?;
        skipped_samples += report.skipped_count;

        hook(&StepTrace {
            step,
            positions: &positions,
            mask: &mask,
            loss: report.total,
        });

        // optimize the per-sample mean so the step size is independent of
        // the batch size; the objective itself is the batch sum
        let objective = graph
            .scale(&total, 1.0 / (2.0 * cfg.batch as f64))
            .map_err(|e| numeric_context(e, step))?;
        let grads = graph
            .backward(&objective)
            .map_err(|e| numeric_context(e, step))?;
        let grad_list: Vec<Option<crate::autodiff::Tensor>> = bound
            .entries()
            .iter()
            .map(|(_, t)| grads.grad(t).map(|g| g.detached()))
            .collect();
        let lr = cosine_lr(step, total_steps, cfg.lr0);
        optimizer.step(&mut params, &grad_list, lr, step)?;
        loss_history.push(report.total);
    }

    let probe_delta = label_reads() - probe_before;
    if probe_delta != 0 {
        return Err(Error::Contract(format!(
            "pretraining read label grids {probe_delta} times; the pretrain path must be label-blind"
        )));
    }

    let epoch_mean_loss: Vec<f64> = loss_history
        .chunks(steps_per_epoch)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();

    Ok(PretrainOutcome {
        checkpoint: Checkpoint {
            params,
            provenance: Provenance {
                pairing: Some(cfg.pairing),
                temperature: Some(cfg.temperature),
                seed: cfg.seed,
                epochs: cfg.epochs,
                stage: "pretrain".into(),
            },
        },
        loss_history,
        epoch_mean_loss,
        skipped_samples,
    })
}

fn numeric_context(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { index, value } => Error::NumericAbort {
            step,
            tensor: format!("loss graph value (flat index {index})"),
            detail: format!("non-finite value {value}"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{generate_synthetic_volume, FamilySpec};

    fn tiny_cfg(pairing: PairingConfig, seed: u64) -> PretrainConfig {
        PretrainConfig {
            epochs: 2,
            batch: 6,
            pairing,
            seed,
            model: EncoderConfig {
                input_hw: (16, 16),
                hidden_dims: vec![32],
                repr_dim: 16,
                proj_dim: 8,
                num_classes: 3,
            },
            ..Default::default()
        }
    }

    fn pool(k: u64) -> Vec<Volume> {
        let fam = FamilySpec::preset("a").unwrap();
        (0..k)
            .map(|s| generate_synthetic_volume(&fam, s).unwrap())
            .collect()
    }

    #[test]
    fn deterministic_checkpoint_by_seed() {
        let vols = pool(2);
        let cfg = tiny_cfg(PairingConfig::Pcl { t: 0.1 }, 7);
        let a = pretrain(&vols, &cfg).unwrap();
        let b = pretrain(&vols, &cfg).unwrap();
        for ((n1, t1), (n2, t2)) in a
            .checkpoint
            .params
            .entries()
            .iter()
            .zip(b.checkpoint.params.entries())
        {
            assert_eq!(n1, n2);
            assert_eq!(t1.data(), t2.data(), "{n1} differs between runs");
        }
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn strategies_differ_only_in_the_mask() {
        // same seed: identical batches and positions step by step; only the
        // mask handed to the loss changes
        let vols = pool(2);
        let mut pcl_trace: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let cfg_pcl = tiny_cfg(PairingConfig::Pcl { t: 0.1 }, 3);
        pretrain_with_hook(&vols, &cfg_pcl, |t| {
            pcl_trace.push((t.positions.to_vec(), t.mask.as_f64()));
        })
        .unwrap();

        let mut sim_trace: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let cfg_sim = tiny_cfg(PairingConfig::SimClr, 3);
        pretrain_with_hook(&vols, &cfg_sim, |t| {
            sim_trace.push((t.positions.to_vec(), t.mask.as_f64()));
        })
        .unwrap();

        assert_eq!(pcl_trace.len(), sim_trace.len());
        let mut masks_differ = false;
        for ((p1, m1), (p2, m2)) in pcl_trace.iter().zip(&sim_trace) {
            assert_eq!(p1, p2, "batch positions diverged between strategies");
            if m1 != m2 {
                masks_differ = true;
            }
        }
        assert!(masks_differ, "pcl and simclr masks never differed");
    }

    #[test]
    fn label_probe_stays_zero_on_labeled_input() {
        let vols = pool(2);
        assert!(vols.iter().all(|v| v.has_labels()));
        crate::volume::reset_label_reads();
        let cfg = tiny_cfg(PairingConfig::Pcl { t: 0.1 }, 1);
        pretrain(&vols, &cfg).unwrap();
        assert_eq!(crate::volume::label_reads(), 0);
    }

    #[test]
    fn overfits_one_fixed_batch() {
        // 200 optimizer steps on a single fixed augmented batch drive the
        // loss below half its starting value
        use crate::autodiff::Graph;
        use crate::loss::{pcl_loss, LossConfig};
        use crate::model::{encode, images_tensor, init_params};
        use crate::volume::{resample_pad, sample_batch, PreprocessConfig, SliceBatch};

        let vols = pool(1);
        let model = EncoderConfig {
            input_hw: (16, 16),
            hidden_dims: vec![32],
            repr_dim: 16,
            proj_dim: 8,
            num_classes: 3,
        };
        let mut params = init_params(&model, 5).unwrap();
        let mut rng = Rng::from_seed_stream(5, 0xB0);
        let pre = PreprocessConfig::default();
        let batch = sample_batch(&vols, 6, &mut rng).unwrap();
        let prepared: Vec<_> = batch
            .slices
            .iter()
            .map(|s| resample_pad(s, &pre).unwrap())
            .collect();
        let aug = make_contrastive_batch(
            &SliceBatch { slices: prepared },
            &AugConfig::default(),
            &mut rng,
        );
        let mask = PairingConfig::Pcl { t: 0.1 }
            .build_mask(&aug.positions())
            .unwrap();
        let images = images_tensor(&aug.slices).unwrap();
        let loss_cfg = LossConfig::default();

        let mut optimizer = Optimizer::sgd();
        let total_steps = 200;
        let mut first = 0.0;
        let mut last = 0.0;
        for step in 0..total_steps {
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let (_, z) = encode(&mut g, &bound, &images).unwrap();
            let (total, report) = pcl_loss(&mut g, &z, &mask, &loss_cfg).unwrap();
            if step == 0 {
                first = report.total;
            }
            last = report.total;
            let objective = g.scale(&total, 1.0 / 12.0).unwrap();
            let grads = g.backward(&objective).unwrap();
            let grad_list: Vec<_> = bound
                .entries()
                .iter()
                .map(|(_, t)| grads.grad(t).map(|x| x.detached()))
                .collect();
            let lr = cosine_lr(step, total_steps, 0.1);
            optimizer.step(&mut params, &grad_list, lr, step).unwrap();
        }
        assert!(
            last < 0.5 * first,
            "loss did not halve: first {first}, last {last}"
        );
    }
}
