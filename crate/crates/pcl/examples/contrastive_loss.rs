//! The multi-positive contrastive objective on crafted embeddings:
//! closed-form cases, the effect of temperature, and a finite-difference
//! check of its gradients.
//!
//! ```bash
//! cargo run --release --example contrastive_loss
//! ```

use pcl::autodiff::{grad_check, Graph, Tensor};
use pcl::loss::{cosine_sim_matrix, pcl_loss, LossConfig};
use pcl::pairing::build_position_mask;
use pcl::rng::Rng;

fn rows_to_tensor(rows: &[Vec<f64>]) -> Tensor {
    Tensor::new(&[rows.len(), rows[0].len()], rows.concat()).unwrap()
}

fn main() -> pcl::Result<()> {
    // one mutual positive pair: numerator equals denominator, loss is zero
    let pair = rows_to_tensor(&[vec![0.3, -0.7, 0.2], vec![-0.1, 0.4, 0.9]]);
    let mask = build_position_mask(&[0.5, 0.5], 0.1)?;
    let mut g = Graph::new();
    let (_, report) = pcl_loss(&mut g, &pair, &mask, &LossConfig::default())?;
    println!("single mutual pair: total = {:.3e} (exactly zero)", report.total);

    // eight identical rows, everyone positive: each term is ln 7
    let row = vec![0.5, -0.5, 0.5, 0.5];
    let same = rows_to_tensor(&(0..8).map(|_| row.clone()).collect::<Vec<_>>());
    let mask8 = build_position_mask(&[0.4; 8], 0.2)?;
    let mut g = Graph::new();
    let (_, report) = pcl_loss(&mut g, &same, &mask8, &LossConfig::default())?;
    println!(
        "8 identical rows, all positive: total = {:.6} vs 8 ln 7 = {:.6}",
        report.total,
        8.0 * 7.0f64.ln()
    );

    // temperature controls how hard negatives are weighted
    let mut rng = Rng::new(7);
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..16).map(|_| rng.range(-1.0, 1.0)).collect())
        .collect();
    let positions: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
    let mask = build_position_mask(&positions, 0.25)?;
    print!("temperature sweep on random embeddings:");
    for tau in [0.05, 0.1, 0.5, 1.0] {
        let mut g = Graph::new();
        let (_, r) = pcl_loss(&mut g, &rows_to_tensor(&rows), &mask, &LossConfig { temperature: tau })?;
        print!("  tau {tau}: {:.3}", r.total);
    }
    println!();

    // cosine similarity matrix is the loss's substrate
    let z = rows_to_tensor(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![-1.0, 0.0]]);
    let mut g = Graph::new();
    let sim = cosine_sim_matrix(&mut g, &z)?;
    println!(
        "cosine([1,0], [1,1]) = {:.5}, cosine([1,0], [-1,0]) = {:.1}",
        sim.at2(0, 1),
        sim.at2(0, 2)
    );

    // the whole objective differentiates cleanly through normalization
    let mask2 = build_position_mask(&positions[..6], 0.3)?;
    let small: Vec<Vec<f64>> = rows[..6].iter().map(|r| r[..5].to_vec()).collect();
    let err = grad_check(
        |g, xs| {
            let (normed, _) = g.l2_normalize_rows(&xs[0])?;
            let (total, _) = pcl_loss(g, &normed, &mask2, &LossConfig::default())?;
            Ok(total)
        },
        &[rows_to_tensor(&small)],
        1e-6,
    )?;
    println!("finite-difference check of d(loss)/d(embeddings): max relative error {err:.2e}");
    Ok(())
}
