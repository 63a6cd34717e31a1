//! Uniform slice sampling over a pool of volumes.

use super::{extract_slice, Slice2D, Volume};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A sampled set of slices with their position metadata intact.
#[derive(Debug, Clone)]
pub struct SliceBatch {
    pub slices: Vec<Slice2D>,
}

impl SliceBatch {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.position).collect()
    }
}

/// Draws `n` slices uniformly over all (volume, slice index) pairs without
/// replacement within the batch. Deterministic given the generator state.
pub fn sample_batch(pool: &[Volume], n: usize, rng: &mut Rng) -> Result<SliceBatch> {
    if pool.is_empty() {
        return Err(Error::Contract("sample_batch: empty volume pool".into()));
    }
    if n == 0 {
        return Err(Error::Contract("sample_batch: batch size must be >= 1".into()));
    }
    let total: usize = pool.iter().map(|v| v.n_slices()).sum();
    if n > total {
        return Err(Error::Contract(format!(
            "sample_batch: batch size {n} exceeds {total} available slices"
        )));
    }
    let picks = rng.choose_indices(total, n);
    let mut slices = Vec::with_capacity(n);
    for flat in picks {
        let mut rest = flat;
        let mut vol = 0usize;
        while rest >= pool[vol].n_slices() {
            rest -= pool[vol].n_slices();
            vol += 1;
        }
        slices.push(extract_slice(&pool[vol], rest)?);
    }
    Ok(SliceBatch { slices })
}
