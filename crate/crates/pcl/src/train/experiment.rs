//! Cross-validation comparison and transfer experiments.
//!
//! One experiment sweeps pairing strategies and labeled-set sizes over
//! K folds and several seeds. Pretraining is done once per (strategy,
//! seed) and shared across folds — it never sees labels, so there is no
//! leakage — while fine-tuning and evaluation run per fold. Fine-tuning
//! seeds are strategy-independent so that strategies differ only in the
//! encoder initialization they hand over.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::AugConfig;
use crate::error::{Error, Result};
use crate::model::{Checkpoint, EncoderConfig, Params};
use crate::pairing::{false_negative_stats, FalseNegativeStats, PairingConfig};
use crate::rng::Rng;
use crate::train::finetune::{finetune, FinetuneConfig};
use crate::train::metrics::{dice, predict_labels, DiceScores};
use crate::train::pretrain::{pretrain, PretrainConfig};
use crate::volume::{
    extract_slice, label_reads, resample_pad, DatasetManifest, PreprocessConfig, Slice2D, Split,
    Volume,
};

/// A named column of the comparison: no pretraining, or contrastive
/// pretraining under one pairing strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Pcl { t: f64 },
    Gcl { partitions: usize },
    SimClr,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Pcl { .. } => "pcl",
            Strategy::Gcl { .. } => "gcl",
            Strategy::SimClr => "simclr",
        }
    }

    pub fn pairing(&self) -> Option<PairingConfig> {
        match *self {
            Strategy::Random => None,
            Strategy::Pcl { t } => Some(PairingConfig::Pcl { t }),
            Strategy::Gcl { partitions } => Some(PairingConfig::Gcl { partitions }),
            Strategy::SimClr => Some(PairingConfig::SimClr),
        }
    }

    /// Parses a CLI strategy name, taking threshold / partition count from
    /// the accompanying flags.
    pub fn parse(name: &str, t: f64, partitions: usize) -> Result<Strategy> {
        match name {
            "random" => Ok(Strategy::Random),
            "pcl" => Ok(Strategy::Pcl { t }),
            "gcl" => Ok(Strategy::Gcl { partitions }),
            "simclr" => Ok(Strategy::SimClr),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected random|pcl|gcl|simclr)"
            ))),
        }
    }
}

/// Full experiment description; serializable so runs can be driven from a
/// spec file and echoed into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Manifest providing labeled volumes (and the default pretrain pool).
    pub manifest: PathBuf,
    /// Separate pretraining manifest for the transfer setting; its family
    /// must differ from the fine-tuning family.
    pub pretrain_manifest: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub m_list: Vec<usize>,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr0: f64,
    pub temperature: f64,
    pub finetune_epochs: usize,
    pub finetune_batch: usize,
    pub finetune_lr: f64,
    pub model: EncoderConfig,
    pub augment: AugConfig,
    pub preprocess: PreprocessConfig,
    /// Ground-truth similarity threshold for the false-negative analysis.
    pub t_true: f64,
}

impl ExperimentSpec {
    pub fn desk_defaults(manifest: PathBuf) -> Self {
        ExperimentSpec {
            manifest,
            pretrain_manifest: None,
            strategies: vec![
                Strategy::Random,
                Strategy::SimClr,
                Strategy::Pcl { t: 0.1 },
            ],
            m_list: vec![2],
            folds: 5,
            seeds: vec![0, 1, 2],
            pretrain_epochs: 30,
            pretrain_batch: 16,
            pretrain_lr0: 0.1,
            temperature: 0.1,
            finetune_epochs: 50,
            finetune_batch: 5,
            finetune_lr: 1e-3,
            // benchmark model: a narrow representation keeps the whole
            // sweep fast and makes encoder quality the bottleneck the
            // comparison is meant to expose
            model: EncoderConfig {
                input_hw: (16, 16),
                hidden_dims: vec![128, 64],
                repr_dim: 20,
                proj_dim: 10,
                num_classes: 3,
            },
            augment: AugConfig::default(),
            preprocess: PreprocessConfig::default(),
            t_true: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.m_list.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "strategies, m_list, and seeds must be nonempty".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if !(self.t_true > 0.0 && self.t_true < 1.0) {
            return Err(Error::Config(format!(
                "t_true must lie in (0, 1), got {}",
                self.t_true
            )));
        }
        for s in &self.strategies {
            if let Some(p) = s.pairing() {
                p.validate()?;
            }
        }
        Ok(())
    }
}

/// One (strategy, m, fold, seed) evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub m: usize,
    pub fold: usize,
    pub seed: u64,
    pub per_class: Vec<f64>,
    pub overall: f64,
}

/// Mean(std) over folds x seeds for one (strategy, m) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub strategy: String,
    pub m: usize,
    pub mean: f64,
    pub std: f64,
    pub per_class_mean: Vec<f64>,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainCurve {
    pub strategy: String,
    pub seed: u64,
    pub epoch_mean_loss: Vec<f64>,
    pub skipped_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnStatRecord {
    pub strategy: String,
    pub stats: FalseNegativeStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<SummaryRecord>,
    pub pretrain_curves: Vec<PretrainCurve>,
    pub false_negative_stats: Vec<FnStatRecord>,
    /// Label-grid reads observed around pretraining calls; must be zero.
    pub label_reads_during_pretrain: u64,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    /// Flat CSV of (strategy, m, fold, seed, class, dice); `class` is the
    /// 1-based foreground class or `overall`. Contains no timing, so
    /// identical seeds give byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,m,fold,seed,class,dice\n");
        for r in &self.runs {
            for (ci, d) in r.per_class.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{:.6}\n",
                    r.strategy,
                    r.m,
                    r.fold,
                    r.seed,
                    ci + 1,
                    d
                ));
            }
            out.push_str(&format!(
                "{},{},{},{},overall,{:.6}\n",
                r.strategy, r.m, r.fold, r.seed, r.overall
            ));
        }
        out
    }

    pub fn summary(&self, strategy: &str, m: usize) -> Option<&SummaryRecord> {
        self.summaries
            .iter()
            .find(|s| s.strategy == strategy && s.m == m)
    }

    pub fn runs_for(&self, strategy: &str, m: usize) -> Vec<&RunRecord> {
        self.runs
            .iter()
            .filter(|r| r.strategy == strategy && r.m == m)
            .collect()
    }
}

/// Balanced contiguous K-fold split: test index sets are disjoint and
/// cover 0..count.
pub fn kfold_test_indices(count: usize, folds: usize) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > count {
        return Err(Error::Config(format!(
            "cannot build {folds} folds over {count} volumes"
        )));
    }
    let base = count / folds;
    let extra = count % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push((start..start + size).collect());
        start += size;
    }
    Ok(out)
}

/// Per-volume Dice of a trained model plus the mean over volumes.
pub fn evaluate_on_volumes(
    params: &Params,
    volumes: &[Volume],
    preprocess: &PreprocessConfig,
) -> Result<(Vec<(String, DiceScores)>, DiceScores)> {
    if volumes.is_empty() {
        return Err(Error::Contract("evaluate: no volumes".into()));
    }
    let num_classes = params.config.num_classes;
    let mut per_volume = Vec::with_capacity(volumes.len());
    for v in volumes {
        if !v.has_labels() {
            return Err(Error::Contract(format!(
                "evaluation volume {} has no labels",
                v.volume_id()
            )));
        }
        let slices: Vec<Slice2D> = (0..v.n_slices())
            .map(|m| extract_slice(v, m).and_then(|s| resample_pad(&s, preprocess)))
            .collect::<Result<_>>()?;
        let images = crate::model::images_tensor(&slices)?;
        let mut g = crate::autodiff::Graph::new();
        let bound = params.bind(&mut g);
        let logits = crate::model::segment(&mut g, &bound, &images)?;
        let pred = predict_labels(&logits)?;
        let truth = crate::train::finetune::labels_of(&slices)?;
        per_volume.push((v.volume_id().to_string(), dice(&pred, &truth, num_classes)?));
    }
    let classes = per_volume[0].1.per_class.len();
    let per_class_mean: Vec<f64> = (0..classes)
        .map(|c| {
            per_volume.iter().map(|(_, d)| d.per_class[c]).sum::<f64>() / per_volume.len() as f64
        })
        .collect();
    let mean = per_volume.iter().map(|(_, d)| d.mean).sum::<f64>() / per_volume.len() as f64;
    Ok((
        per_volume,
        DiceScores {
            per_class: per_class_mean,
            mean,
        },
    ))
}

/// Twin-interleaved positions of every slice of every pool volume — the
/// deterministic batch the false-negative analysis runs on. Augmentation
/// twins share their source position exactly, so the analysis needs no
/// pixel data.
fn pool_twin_positions(pool: &[Volume]) -> Vec<f64> {
    let mut positions = Vec::new();
    for v in pool {
        let n = v.n_slices();
        for m in 0..n {
            let p = m as f64 / n as f64;
            positions.push(p);
            positions.push(p);
        }
    }
    positions
}

/// Exact false-negative/false-positive accounting of each strategy's mask
/// over the pool's twin-interleaved positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnAnalysisReport {
    pub t_true: f64,
    pub batch_size: usize,
    pub per_strategy: Vec<FnStatRecord>,
}

pub fn analyze_false_negatives(
    pool: &[Volume],
    t_true: f64,
    strategies: &[Strategy],
) -> Result<FnAnalysisReport> {
    if pool.is_empty() {
        return Err(Error::Contract("analyze: empty volume pool".into()));
    }
    let positions = pool_twin_positions(pool);
    let mut per_strategy = Vec::new();
    for s in strategies {
        let Some(pairing) = s.pairing() else { continue };
        let mask = pairing.build_mask(&positions)?;
        per_strategy.push(FnStatRecord {
            strategy: s.label().to_string(),
            stats: false_negative_stats(&mask, &positions, t_true)?,
        });
    }
    Ok(FnAnalysisReport {
        t_true,
        batch_size: positions.len(),
        per_strategy,
    })
}

fn stream_id(tag: u64, fold: usize, m: usize) -> u64 {
    tag | ((fold as u64) << 16) | ((m as u64) << 32)
}

/// Runs the full comparison described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();

    let manifest = DatasetManifest::load(&spec.manifest)?;
    let labeled = manifest.load_split(Split::LabeledPool, false)?;
    if labeled.len() < spec.folds {
        return Err(Error::Config(format!(
            "{} labeled volumes cannot support {} folds",
            labeled.len(),
            spec.folds
        )));
    }

    let (pretrain_pool, transfer) = match &spec.pretrain_manifest {
        Some(path) => {
            let pm = DatasetManifest::load(path)?;
            (pm.load_pretrain_pool()?, true)
        }
        None => (manifest.load_pretrain_pool()?, false),
    };
    if pretrain_pool.is_empty() {
        return Err(Error::Config("pretraining pool is empty".into()));
    }
    if transfer {
        for pv in &pretrain_pool {
            for lv in &labeled {
                if pv.family_id() == lv.family_id() {
                    return Err(Error::Config(format!(
                        "transfer mode requires distinct families; both pools contain '{}'",
                        pv.family_id()
                    )));
                }
            }
        }
    }

    // shared pretraining per (strategy, seed); label probe measured around it
    let mut label_reads_during_pretrain = 0u64;
    let mut checkpoints: BTreeMap<(String, u64), Checkpoint> = BTreeMap::new();
    let mut pretrain_curves = Vec::new();
    for strategy in &spec.strategies {
        let Some(pairing) = strategy.pairing() else { continue };
        for &seed in &spec.seeds {
            let cfg = PretrainConfig {
                epochs: spec.pretrain_epochs,
                batch: spec.pretrain_batch,
                lr0: spec.pretrain_lr0,
                pairing,
                temperature: spec.temperature,
                seed,
                augment: spec.augment.clone(),
                preprocess: spec.preprocess.clone(),
                model: spec.model.clone(),
            };
            let before = label_reads();
            let outcome = pretrain(&pretrain_pool, &cfg)?;
            label_reads_during_pretrain += label_reads() - before;
            pretrain_curves.push(PretrainCurve {
                strategy: strategy.label().to_string(),
                seed,
                epoch_mean_loss: outcome.epoch_mean_loss,
                skipped_samples: outcome.skipped_samples,
            });
            checkpoints.insert((strategy.label().to_string(), seed), outcome.checkpoint);
        }
    }

    let fold_tests = kfold_test_indices(labeled.len(), spec.folds)?;
    let mut runs = Vec::new();
    for strategy in &spec.strategies {
        for &m in &spec.m_list {
            for &seed in &spec.seeds {
                for (fold, test_idx) in fold_tests.iter().enumerate() {
                    let train_vols: Vec<&Volume> = labeled
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !test_idx.contains(i))
                        .map(|(_, v)| v)
                        .collect();
                    if m > train_vols.len() {
                        return Err(Error::Config(format!(
                            "m = {m} infeasible: fold {fold} has only {} training volumes",
                            train_vols.len()
                        )));
                    }
                    // strategy-independent selection and fine-tune seeds:
                    // columns differ only in encoder initialization
                    let mut select_rng =
                        Rng::from_seed_stream(seed, stream_id(0x5E1, fold, m));
                    let picked = select_rng.choose_indices(train_vols.len(), m);
                    let chosen: Vec<Volume> =
                        picked.iter().map(|&i| train_vols[i].clone()).collect();

                    let ft_cfg = FinetuneConfig {
                        epochs: spec.finetune_epochs,
                        batch: spec.finetune_batch,
                        lr: spec.finetune_lr,
                        m,
                        seed: Rng::from_seed_stream(seed, stream_id(0xF7, fold, m)).next_u64(),
                        preprocess: spec.preprocess.clone(),
                        model: spec.model.clone(),
                    };
                    let init = checkpoints.get(&(strategy.label().to_string(), seed));
                    let outcome = finetune(init, &chosen, &ft_cfg)?;

                    let test_vols: Vec<Volume> =
                        test_idx.iter().map(|&i| labeled[i].clone()).collect();
                    let (_, fold_scores) =
                        evaluate_on_volumes(&outcome.checkpoint.params, &test_vols, &spec.preprocess)?;
                    runs.push(RunRecord {
                        strategy: strategy.label().to_string(),
                        m,
                        fold,
                        seed,
                        per_class: fold_scores.per_class,
                        overall: fold_scores.mean,
                    });
                }
            }
        }
    }

    // mean(std) per (strategy, m) over folds x seeds
    let mut summaries = Vec::new();
    for strategy in &spec.strategies {
        for &m in &spec.m_list {
            let cell: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.strategy == strategy.label() && r.m == m)
                .collect();
            let n = cell.len();
            let mean = cell.iter().map(|r| r.overall).sum::<f64>() / n as f64;
            let var = if n > 1 {
                cell.iter().map(|r| (r.overall - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let classes = cell[0].per_class.len();
            let per_class_mean: Vec<f64> = (0..classes)
                .map(|c| cell.iter().map(|r| r.per_class[c]).sum::<f64>() / n as f64)
                .collect();
            summaries.push(SummaryRecord {
                strategy: strategy.label().to_string(),
                m,
                mean,
                std: var.sqrt(),
                per_class_mean,
                n_runs: n,
            });
        }
    }

    let fn_report = analyze_false_negatives(&pretrain_pool, spec.t_true, &spec.strategies)?;

    Ok(ExperimentReport {
        spec: spec.clone(),
        runs,
        summaries,
        pretrain_curves,
        false_negative_stats: fn_report.per_strategy,
        label_reads_during_pretrain,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
