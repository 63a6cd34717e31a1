//! The reverse-mode engine underneath everything: record ops on a tape,
//! run one backward sweep, verify against central finite differences.
//!
//! ```bash
//! cargo run --release --example autodiff_basics
//! ```

use pcl::autodiff::{grad_check, Axis, Graph, Tensor};

fn main() -> pcl::Result<()> {
    // forward: loss = sum(relu(x W) * x W) for a tiny x and W
    let mut g = Graph::new();
    let x = g.leaf(&Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75])?.with_grad());
    let w = g.leaf(&Tensor::new(&[3, 2], vec![1.0, -0.5, 0.25, 1.0, -1.5, 0.5])?.with_grad());
    let h = g.matmul(&x, &w)?;
    let r = g.relu(&h)?;
    let sq = g.mul(&r, &r)?;
    let loss = g.sum(&sq, Axis::All)?;
    println!("loss = {:.4}", loss.item()?);

    let grads = g.backward(&loss)?;
    println!("d loss / d x = {:?}", grads.grad(&x).unwrap().data());
    println!("d loss / d W = {:?}", grads.grad(&w).unwrap().data());

    // reductions carry their own backward rules; ties in max go to the
    // lowest index so gradients stay deterministic
    let mut g = Graph::new();
    let t = g.leaf(&Tensor::new(&[4], vec![3.0, 3.0, 1.0, 2.0])?.with_grad());
    let m = g.max(&t, Axis::All)?;
    let grads = g.backward(&m)?;
    println!(
        "max([3,3,1,2]) = {}, gradient {:?}",
        m.item()?,
        grads.grad(&t).unwrap().data()
    );

    // row normalization reports degenerate (all-zero) rows instead of failing
    let mut g = Graph::new();
    let rows = Tensor::new(&[2, 2], vec![3.0, 4.0, 0.0, 0.0])?;
    let (normed, degenerate) = g.l2_normalize_rows(&rows)?;
    println!(
        "l2_normalize_rows([[3,4],[0,0]]) = {:?}, degenerate rows: {degenerate}",
        normed.data()
    );

    // every gradient in the engine is validated against central differences
    let err = grad_check(
        |g, xs| {
            let e = g.exp(&xs[0])?;
            let s = g.add(&e, &xs[0])?;
            let l = g.mul(&s, &s)?;
            g.mean(&l, Axis::All)
        },
        &[Tensor::new(&[5], vec![0.3, -0.2, 0.9, -1.1, 0.4])?],
        1e-6,
    )?;
    println!("grad_check on exp/add/mul/mean program: max relative error {err:.2e}");
    Ok(())
}
