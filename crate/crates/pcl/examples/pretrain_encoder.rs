//! Contrastive pretraining of the encoder, and what it does to the
//! representation space: slices at the same position in different volumes
//! end up close, far positions end up apart.
//!
//! ```bash
//! cargo run --release --example pretrain_encoder
//! ```

use pcl::autodiff::Graph;
use pcl::model::{encode, images_tensor, save_checkpoint, EncoderConfig};
use pcl::pairing::PairingConfig;
use pcl::train::{pretrain, PretrainConfig};
use pcl::volume::{extract_slice, generate_synthetic_volume, percentile_normalize, FamilySpec, Volume};

fn representations(params: &pcl::model::Params, v: &Volume) -> Vec<Vec<f64>> {
    let slices: Vec<_> = (0..v.n_slices())
        .map(|m| extract_slice(v, m).unwrap())
        .collect();
    let images = images_tensor(&slices).unwrap();
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let (h, _z) = encode(&mut g, &bound, &images).unwrap();
    (0..v.n_slices())
        .map(|i| (0..h.shape()[1]).map(|j| h.at2(i, j)).collect())
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb + 1e-12)
}

fn main() -> pcl::Result<()> {
    let family = FamilySpec::preset("a")?;
    let pool: Vec<Volume> = (0..16)
        .map(|s| {
            percentile_normalize(&generate_synthetic_volume(&family, s).unwrap()).without_labels()
        })
        .collect();

    let cfg = PretrainConfig {
        epochs: 30,
        batch: 16,
        pairing: PairingConfig::Pcl { t: 0.1 },
        seed: 1,
        model: EncoderConfig {
            input_hw: (16, 16),
            hidden_dims: vec![128, 64],
            repr_dim: 20,
            proj_dim: 10,
            num_classes: 3,
        },
        ..Default::default()
    };
    println!(
        "pretraining on {} volumes, strategy {}, {} epochs...",
        pool.len(),
        cfg.pairing.name(),
        cfg.epochs
    );
    let outcome = pretrain(&pool, &cfg)?;
    for (epoch, loss) in outcome.epoch_mean_loss.iter().enumerate() {
        if epoch % 6 == 0 || epoch + 1 == outcome.epoch_mean_loss.len() {
            println!("  epoch {epoch:2}: mean batch loss {loss:.3}");
        }
    }

    // held-out patients: representation geometry follows position
    let probe_a = percentile_normalize(&generate_synthetic_volume(&family, 40)?).without_labels();
    let probe_b = percentile_normalize(&generate_synthetic_volume(&family, 42)?).without_labels();
    let ra = representations(&outcome.checkpoint.params, &probe_a);
    let rb = representations(&outcome.checkpoint.params, &probe_b);
    let n = ra.len();
    let same: f64 = (0..n).map(|m| cosine(&ra[m], &rb[m])).sum::<f64>() / n as f64;
    let far: f64 = (0..n)
        .map(|m| cosine(&ra[m], &rb[(m + n / 2) % n]))
        .sum::<f64>()
        / n as f64;
    println!("cross-volume representation cosine: same position {same:.3}, far position {far:.3}");

    let path = std::env::temp_dir().join("pcl-example-encoder.ckpt");
    save_checkpoint(&outcome.checkpoint, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
