//! Row partitions for data splitting.

use crate::rng::RngStream;

/// Row indices of each fold: contiguous blocks in input order, or contiguous blocks of a
/// seeded shuffle when `shuffle` is given.
pub fn fold_rows(sizes: &[usize], shuffle: Option<&mut RngStream>) -> Vec<Vec<usize>> {
    let n: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(rng) = shuffle {
        rng.shuffle(&mut order);
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(order[start..start + s].to_vec());
        start += s;
    }
    out
}
