//! Optimal one-dimensional classification (natural breaks).
//!
//! Finds the partition of a value multiset into `k` contiguous classes that
//! minimizes the summed within-class squared deviation. The search compresses
//! the input to distinct values with counts and runs a layered dynamic
//! program; each layer's argmin column is monotone in the split position, so
//! layers resolve by divide and conquer in O(n log n) instead of O(n^2). The
//! result is exactly optimal, not a heuristic.

use crate::error::{Error, Result};

/// Inputs larger than this are thinned to a deterministic uniform subsample
/// of this size before classification.
pub const DEFAULT_SAMPLE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalBreaks {
    /// Ascending upper bounds of the first `k - 1` classes; each bound is
    /// the maximum value inside its class, so classes read as
    /// `(-inf, b1], (b1, b2], ..., (b_{k-1}, +inf)`.
    pub breaks: Vec<f64>,
    /// Summed within-class squared deviation at the optimum.
    pub objective: f64,
}

/// Class index (1-based) of `value` under a break list.
pub fn class_of(breaks: &[f64], value: f64) -> usize {
    breaks.iter().filter(|&&b| b < value).count() + 1
}

/// Optimal `k`-class breaks with the default input cap.
pub fn natural_breaks(values: &[f64], k: usize) -> Result<NaturalBreaks> {
    natural_breaks_capped(values, k, DEFAULT_SAMPLE_CAP)
}

/// Optimal `k`-class breaks, thinning inputs above `cap` values.
pub fn natural_breaks_capped(values: &[f64], k: usize, cap: usize) -> Result<NaturalBreaks> {
    if k < 2 {
        return Err(Error::BadScheme(format!(
            "classification needs at least 2 classes, got {k}"
        )));
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    if sorted.len() > cap {
        sorted = (0..cap).map(|i| sorted[i * sorted.len() / cap]).collect();
    }

    // Distinct values with multiplicities.
    let mut vals: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &v in &sorted {
        if vals.last() == Some(&v) {
            *weights.last_mut().unwrap() += 1.0;
        } else {
            vals.push(v);
            weights.push(1.0);
        }
    }
    let d = vals.len();
    if d < k {
        return Err(Error::TooFewDistinct { need: k, found: d });
    }

    // Prefix moments over the distinct values.
    let mut pw = vec![0.0f64; d + 1];
    let mut ps = vec![0.0f64; d + 1];
    let mut pq = vec![0.0f64; d + 1];
    for i in 0..d {
        pw[i + 1] = pw[i] + weights[i];
        ps[i + 1] = ps[i] + weights[i] * vals[i];
        pq[i + 1] = pq[i] + weights[i] * vals[i] * vals[i];
    }
    // Cost of one class spanning distinct indices a..b inclusive.
    let cost = |a: usize, b: usize| -> f64 {
        let w = pw[b + 1] - pw[a];
        let s = ps[b + 1] - ps[a];
        let q = pq[b + 1] - pq[a];
        (q - s * s / w).max(0.0)
    };

    // dp[j] after layer m: best cost of the first j distinct values in m
    // classes. cuts[m][j] records the split for backtracking.
    let mut dp_prev = vec![f64::INFINITY; d + 1];
    let mut dp_cur = vec![f64::INFINITY; d + 1];
    let mut cuts: Vec<Vec<usize>> = vec![vec![0; d + 1]; k + 1];
    for (j, slot) in dp_prev.iter_mut().enumerate().skip(1) {
        *slot = cost(0, j - 1);
    }
    for (m, cut) in cuts.iter_mut().enumerate().skip(2) {
        struct Layer<'a> {
            dp_prev: &'a [f64],
            cost: &'a dyn Fn(usize, usize) -> f64,
            m: usize,
        }
        // Fills dp_cur[lo..=hi] knowing the argmin lies in [optlo, opthi].
        fn solve(
            ctx: &Layer,
            dp_cur: &mut [f64],
            cut: &mut [usize],
            lo: usize,
            hi: usize,
            optlo: usize,
            opthi: usize,
        ) {
            if lo > hi {
                return;
            }
            let mid = lo + (hi - lo) / 2;
            let mut best = f64::INFINITY;
            let mut best_s = optlo;
            let smax = opthi.min(mid - 1);
            for s in optlo..=smax {
                if s < ctx.m - 1 {
                    continue;
                }
                let c = ctx.dp_prev[s] + (ctx.cost)(s, mid - 1);
                if c < best {
                    best = c;
                    best_s = s;
                }
            }
            dp_cur[mid] = best;
            cut[mid] = best_s;
            if mid > lo {
                solve(ctx, dp_cur, cut, lo, mid - 1, optlo, best_s);
            }
            if mid < hi {
                solve(ctx, dp_cur, cut, mid + 1, hi, best_s, opthi);
            }
        }
        let ctx = Layer {
            dp_prev: &dp_prev,
            cost: &cost,
            m,
        };
        solve(&ctx, &mut dp_cur, cut, m, d, m - 1, d - 1);
        std::mem::swap(&mut dp_prev, &mut dp_cur);
        for v in dp_cur.iter_mut() {
            *v = f64::INFINITY;
        }
    }

    let objective = dp_prev[d];
    let mut breaks = Vec::with_capacity(k - 1);
    let mut j = d;
    for m in (2..=k).rev() {
        let s = cuts[m][j];
        breaks.push(vals[s - 1]);
        j = s;
    }
    breaks.reverse();
    Ok(NaturalBreaks { breaks, objective })
}
