//! Architecture arithmetic for the width-reduced baseline.

use crate::{Error, Result};

/// `Σ_l n_l · n_{l-1}`: weight-matrix entries of a dense architecture.
pub fn count_weights(arch: &[usize]) -> usize {
    arch.windows(2).map(|w| w[0] * w[1]).sum()
}

fn scaled(arch: &[usize], s: f64) -> Vec<usize> {
    let last = arch.len() - 1;
    arch.iter()
        .enumerate()
        .map(|(k, &n)| {
            if k == 0 || k == last {
                n
            } else {
                ((s * n as f64).round() as usize).max(1)
            }
        })
        .collect()
}

/// Hidden widths scaled by one common factor `s ≤ 1` (each rounded, at
/// least 1) so that the weight count is as large as possible without
/// exceeding `round((1 − r)·count_weights(arch))`.
///
/// Every distinct width vector reachable by some `s` is tried: widths only
/// change where `s·n` crosses a half-integer, so evaluating one `s` inside
/// every interval between consecutive breakpoints is exhaustive.
pub fn shrink_architecture(arch: &[usize], ratio: f64) -> Result<Vec<usize>> {
    if arch.len() < 3 {
        return Err(Error::Config(format!("{arch:?} has no hidden layer to shrink")));
    }
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("shrink ratio must lie in [0, 1), got {ratio}")));
    }
    let target = ((1.0 - ratio) * count_weights(arch) as f64).round() as usize;
    let hidden = &arch[1..arch.len() - 1];

    let mut breaks: Vec<f64> = vec![0.0, 1.0];
    for &n in hidden {
        for k in 0..n {
            let b = (k as f64 + 0.5) / n as f64;
            if b < 1.0 {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut candidates: Vec<f64> = breaks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    candidates.extend_from_slice(&breaks);

    let mut best: Option<(usize, Vec<usize>)> = None;
    for s in candidates {
        let a = scaled(arch, s);
        let c = count_weights(&a);
        if c <= target && best.as_ref().map_or(true, |(bc, _)| c > *bc) {
            best = Some((c, a));
        }
    }
    best.map(|(_, a)| a).ok_or_else(|| {
        Error::Config(format!(
            "cannot shrink {arch:?} to {target} weights: unit hidden widths already need {}",
            count_weights(&scaled(arch, 0.0))
        ))
    })
}
