use rand::seq::index::sample;
use rand::Rng;

use crate::error::{HdmError, Result};
use crate::gramian::{Hdm, ObservationMask};
use crate::solver::OrdinalConstraint;

use super::trial_rng;

/// Unordered pairs `(i, j)`, `i < j`, in column-major order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect()
}

/// Marks exactly `round((1 - s) * n(n-1)/2)` pairs, uniformly without replacement.
pub fn sample_metric_mask(n: usize, s: f64, seed: u64) -> Result<ObservationMask> {
    let mut rng = trial_rng(seed, 0, 0);
    sample_metric_mask_with(&mut rng, n, s)
}

pub fn sample_metric_mask_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    s: f64,
) -> Result<ObservationMask> {
    if !(0.0..=1.0).contains(&s) {
        return Err(HdmError::InvalidArgument(format!("density {s} outside [0, 1]")));
    }
    let pairs = all_pairs(n);
    let count = ((1.0 - s) * pairs.len() as f64).round() as usize;
    let chosen: Vec<(usize, usize)> = sample(rng, pairs.len(), count.min(pairs.len()))
        .into_iter()
        .map(|k| pairs[k])
        .collect();
    ObservationMask::from_pairs(n, &chosen)
}

/// Decodes `k < P(P-1)/2` into the `k`-th pair `(p, q)`, `p < q`.
fn decode_pair_index(k: usize) -> (usize, usize) {
    let mut q = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0).floor() as usize;
    while q * (q - 1) / 2 > k {
        q -= 1;
    }
    while (q + 1) * q / 2 <= k {
        q += 1;
    }
    (k - q * (q - 1) / 2, q)
}

/// Number of comparisons between distinct pairs of `n` points.
pub fn complete_ordinal_count(n: usize) -> usize {
    let p = n * n.saturating_sub(1) / 2;
    p * p.saturating_sub(1) / 2
}

fn orient(d: &Hdm, a: (usize, usize), b: (usize, usize)) -> Result<OrdinalConstraint> {
    if d.get(a.0, a.1) <= d.get(b.0, b.1) {
        OrdinalConstraint::new(a.0, a.1, b.0, b.1)
    } else {
        OrdinalConstraint::new(b.0, b.1, a.0, a.1)
    }
}

/// `min(2 K C(n,2), |O_c|)` uniformly sampled comparisons, each oriented to
/// agree with `d`.
pub fn sample_ordinal_set(d: &Hdm, k_per_pair: usize, seed: u64) -> Result<Vec<OrdinalConstraint>> {
    let mut rng = trial_rng(seed, 0, 1);
    sample_ordinal_set_with(&mut rng, d, k_per_pair)
}

pub fn sample_ordinal_set_with<R: Rng + ?Sized>(
    rng: &mut R,
    d: &Hdm,
    k_per_pair: usize,
) -> Result<Vec<OrdinalConstraint>> {
    let pairs = all_pairs(d.n());
    let total = complete_ordinal_count(d.n());
    let count = (2 * k_per_pair * pairs.len()).min(total);
    sample(rng, total, count)
        .into_iter()
        .map(|k| {
            let (p, q) = decode_pair_index(k);
            orient(d, pairs[p], pairs[q])
        })
        .collect()
}

/// Every comparison of distinct pairs, oriented to agree with `d`.
pub fn complete_ordinal_set(d: &Hdm) -> Result<Vec<OrdinalConstraint>> {
    let pairs = all_pairs(d.n());
    let mut out = Vec::with_capacity(complete_ordinal_count(d.n()));
    for q in 0..pairs.len() {
        for p in 0..q {
            out.push(orient(d, pairs[p], pairs[q])?);
        }
    }
    Ok(out)
}
