//! Encoder, projection head, segmentation decoder, and checkpoints.
//!
//! The encoder is a dense relu stack over flattened slices; the projection
//! head is a two-layer MLP whose output rows are L2-normalized; the
//! segmentation head is a single dense layer producing per-pixel class
//! logits. The projection head exists only for contrastive pretraining —
//! the fine-tuning path never touches it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::pairing::PairingConfig;
use crate::rng::Rng;
use crate::volume::Slice2D;

/// Network geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_hw: (usize, usize),
    pub hidden_dims: Vec<usize>,
    pub repr_dim: usize,
    pub proj_dim: usize,
    pub num_classes: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            input_hw: (16, 16),
            hidden_dims: vec![256, 128],
            repr_dim: 64,
            proj_dim: 32,
            num_classes: 3,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_hw;
        if h == 0 || w == 0 || self.repr_dim == 0 || self.proj_dim == 0 || self.num_classes == 0 {
            return Err(Error::Config("all model dimensions must be >= 1".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.input_hw.0 * self.input_hw.1
    }

    /// Layer widths of the encoder path: input, hidden..., repr.
    fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.repr_dim);
        dims
    }
}

/// Ordered named parameter tensors. Order is the serialization order.
#[derive(Debug, Clone)]
pub struct Params {
    pub config: EncoderConfig,
    pub init_seed: u64,
    entries: Vec<(String, Tensor)>,
}

impl Params {
    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Overwrites the encoder-path tensors (enc*.w/b) with those of `other`.
    /// This is how a pretrained encoder initializes fine-tuning while the
    /// decoder stays fresh.
    pub fn adopt_encoder_from(&mut self, other: &Params) -> Result<()> {
        if self.config.encoder_dims() != other.config.encoder_dims() {
            return Err(Error::Contract(format!(
                "encoder geometry mismatch: {:?} vs {:?}",
                self.config.encoder_dims(),
                other.config.encoder_dims()
            )));
        }
        for (name, tensor) in &other.entries {
            if name.starts_with("enc") {
                *self.get_mut(name).expect("matching encoder entry") = tensor.clone();
            }
        }
        Ok(())
    }

    /// Registers every tensor as a gradient-requiring leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        BoundParams {
            config: self.config.clone(),
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), g.leaf(&t.detached().with_grad())))
                .collect(),
        }
    }
}

/// Parameters bound into a specific graph for one step.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub config: EncoderConfig,
    entries: Vec<(String, Tensor)>,
}

impl BoundParams {
    /// Assembles a bound view from already-registered tensors, for callers
    /// that manage graph leaves themselves (e.g. gradient checking).
    pub fn from_entries(config: EncoderConfig, entries: Vec<(String, Tensor)>) -> Self {
        BoundParams { config, entries }
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    fn get(&self, name: &str) -> &Tensor {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }
}

/// Glorot-uniform weights, zero biases, deterministic by seed.
pub fn init_params(cfg: &EncoderConfig, seed: u64) -> Result<Params> {
    cfg.validate()?;
    let mut rng = Rng::from_seed_stream(seed, 0x1217);
    let mut entries = Vec::new();
    let mut dense = |name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.range(-limit, limit))
            .collect();
        entries.push((
            format!("{name}.w"),
            Tensor::new(&[fan_in, fan_out], data).expect("finite init"),
        ));
        entries.push((format!("{name}.b"), Tensor::zeros(&[1, fan_out])));
    };

    let enc_dims = cfg.encoder_dims();
    for (i, pair) in enc_dims.windows(2).enumerate() {
        dense(&format!("enc{i}"), pair[0], pair[1], &mut rng);
    }
    dense("proj0", cfg.repr_dim, cfg.repr_dim, &mut rng);
    dense("proj1", cfg.repr_dim, cfg.proj_dim, &mut rng);
    let dec_out = cfg.input_dim() * cfg.num_classes;
    dense("dec", cfg.repr_dim, dec_out, &mut rng);

    Ok(Params {
        config: cfg.clone(),
        init_seed: seed,
        entries,
    })
}

/// x·W + bias, the bias row broadcast over the batch via a ones column.
fn dense_layer(g: &mut Graph, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let xw = g.matmul(x, w)?;
    let ones = g.leaf(&Tensor::ones(&[x.shape()[0], 1]));
    let bias = g.matmul(&ones, b)?;
    g.add(&xw, &bias)
}

fn check_images(cfg: &EncoderConfig, images: &Tensor) -> Result<usize> {
    if images.rank() != 3
        || images.shape()[1] != cfg.input_hw.0
        || images.shape()[2] != cfg.input_hw.1
    {
        return Err(Error::ShapeMismatch {
            op: "model forward",
            lhs: images.shape().to_vec(),
            rhs: vec![0, cfg.input_hw.0, cfg.input_hw.1],
        });
    }
    Ok(images.shape()[0])
}

/// Shared encoder trunk: flatten, dense+relu stack, representation.
fn encoder_repr(g: &mut Graph, p: &BoundParams, images: &Tensor) -> Result<Tensor> {
    let cfg = &p.config;
    let batch = check_images(cfg, images)?;
    let mut x = g.reshape(images, &[batch, cfg.input_dim()])?;
    let layers = cfg.encoder_dims().len() - 1;
    for i in 0..layers {
        let pre = dense_layer(g, &x, p.get(&format!("enc{i}.w")), p.get(&format!("enc{i}.b")))?;
        x = g.relu(&pre)?;
    }
    Ok(x)
}

/// Encoder plus projection head. Returns the representation H (batch ×
/// repr_dim) and the unit-norm embedding Z (batch × proj_dim).
pub fn encode(g: &mut Graph, p: &BoundParams, images: &Tensor) -> Result<(Tensor, Tensor)> {
    let h = encoder_repr(g, p, images)?;
    let t = dense_layer(g, &h, p.get("proj0.w"), p.get("proj0.b"))?;
    let t = g.relu(&t)?;
    let z_raw = dense_layer(g, &t, p.get("proj1.w"), p.get("proj1.b"))?;
    let (z, _degenerate) = g.l2_normalize_rows(&z_raw)?;
    Ok((h, z))
}

/// Encoder plus segmentation head. Returns per-pixel class logits of shape
/// (batch, num_classes, H, W), differentiable through the encoder.
pub fn segment(g: &mut Graph, p: &BoundParams, images: &Tensor) -> Result<Tensor> {
    let cfg = p.config.clone();
    let batch = images.shape()[0];
    let h = encoder_repr(g, p, images)?;
    // pixel-major logits: (batch, H*W, classes)
    let flat = dense_layer(g, &h, p.get("dec.w"), p.get("dec.b"))?;
    let pixel_major = g.reshape(&flat, &[batch, cfg.input_dim(), cfg.num_classes])?;
    let class_major = g.swap_axes(&pixel_major, 1, 2)?;
    g.reshape(
        &class_major,
        &[batch, cfg.num_classes, cfg.input_hw.0, cfg.input_hw.1],
    )
}

/// Stacks slice pixels into a (batch, H, W) tensor.
pub fn images_tensor(slices: &[Slice2D]) -> Result<Tensor> {
    if slices.is_empty() {
        return Err(Error::Contract("images_tensor: empty slice list".into()));
    }
    let (h, w) = (slices[0].height, slices[0].width);
    let mut data = Vec::with_capacity(slices.len() * h * w);
    for s in slices {
        if s.height != h || s.width != w {
            return Err(Error::ShapeMismatch {
                op: "images_tensor",
                lhs: vec![h, w],
                rhs: vec![s.height, s.width],
            });
        }
        data.extend_from_slice(&s.pixels);
    }
    Tensor::new(&[slices.len(), h, w], data)
}

// ── Checkpoints ─────────────────────────────────────────────────────────

/// What produced a checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    /// Pairing strategy of the pretraining run; None for fine-tuned or
    /// randomly initialized models.
    pub pairing: Option<PairingConfig>,
    pub temperature: Option<f64>,
    pub seed: u64,
    pub epochs: usize,
    pub stage: String,
}

/// Serialized model: parameters plus config and training provenance.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: Params,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TensorDirEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    magic: String,
    version: u32,
    config: EncoderConfig,
    provenance: Provenance,
    init_seed: u64,
    tensors: Vec<TensorDirEntry>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Single-line JSON header followed by raw little-endian f64 values in
/// directory order. Round-trips bit-exactly.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        magic: "PCLCKPT".into(),
        version: 1,
        config: ckpt.params.config.clone(),
        provenance: ckpt.provenance.clone(),
        init_seed: ckpt.params.init_seed,
        tensors: ckpt
            .params
            .entries()
            .iter()
            .map(|(n, t)| TensorDirEntry {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for (_, t) in ckpt.params.entries() {
        for &v in t.data() {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte).map_err(|e| io_err(path, e))?;
        if n == 0 {
            return Err(Error::Format {
                path: path.display().to_string(),
                detail: "missing header line".into(),
            });
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.magic != "PCLCKPT" || header.version != 1 {
        return Err(Error::Format {
            path: path.display().to_string(),
            detail: format!("bad magic/version {}/{}", header.magic, header.version),
        });
    }
    let mut entries = Vec::with_capacity(header.tensors.len());
    for dir in &header.tensors {
        let numel: usize = dir.shape.iter().product();
        let mut raw = vec![0u8; numel * 8];
        r.read_exact(&mut raw).map_err(|e| io_err(path, e))?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push((dir.name.clone(), Tensor::new(&dir.shape, data)?));
    }
    Ok(Checkpoint {
        params: Params {
            config: header.config,
            init_seed: header.init_seed,
            entries,
        },
        provenance: header.provenance,
    })
}
