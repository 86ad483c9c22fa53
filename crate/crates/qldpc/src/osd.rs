//! Ordered statistics decoding over BP soft output.
//!
//! Columns are ranked most-suspect first (ascending marginal LLR), a pivot
//! set of independent columns is found by Gaussian elimination in that order,
//! and the syndrome is solved on the pivots with all other bits zero (OSD-0).
//! The combination sweep additionally re-solves after flipping every single
//! non-pivot bit and every pair inside the first `order` non-pivot bits,
//! returning the candidate with the best prior-weighted score.

use crate::bp::DecodingProblem;
use crate::gf2::{BinMatrix, BinVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OsdError {
    #[error("syndrome is not in the column space of the check matrix")]
    Inconsistent,
    #[error("llr length {got} does not match {expected} bits")]
    LlrLength { expected: usize, got: usize },
    #[error("syndrome length {got} does not match {expected} checks")]
    SyndromeLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsdVariant {
    Osd0,
    CombinationSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsdConfig {
    /// Sweep order (the lambda in OSD-CS); ignored by OSD-0.
    pub order: usize,
    pub variant: OsdVariant,
}

impl OsdConfig {
    pub fn osd0() -> Self {
        Self {
            order: 0,
            variant: OsdVariant::Osd0,
        }
    }

    pub fn combination_sweep(order: usize) -> Self {
        Self {
            order,
            variant: OsdVariant::CombinationSweep,
        }
    }
}

/// Solve the syndrome on the most-suspect independent columns.
///
/// `llr_out` is the BP marginal per bit; lower means more likely in error.
/// The returned estimate always satisfies the syndrome.
pub fn osd_decode(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    llr_out: &[f64],
    cfg: &OsdConfig,
) -> Result<BinVector, OsdError> {
    let (m, n) = (problem.num_checks(), problem.num_bits());
    if llr_out.len() != n {
        return Err(OsdError::LlrLength {
            expected: n,
            got: llr_out.len(),
        });
    }
    if syndrome.len() != m {
        return Err(OsdError::SyndromeLength {
            expected: m,
            got: syndrome.len(),
        });
    }

    // Reliability ranking: ascending marginal, ties by bit index.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| llr_out[a].total_cmp(&llr_out[b]).then(a.cmp(&b)));

    // Eliminate [H_perm | s]; a pivot landing in the syndrome column means
    // the system is inconsistent.
    let permuted = problem.h().permute_cols(&order);
    let s_col = BinMatrix::from_fn(m, 1, |i, _| syndrome.get(i));
    let ech = permuted.hstack(&s_col).expect("row counts match").echelon();
    if ech.pivot_cols.last() == Some(&n) {
        return Err(OsdError::Inconsistent);
    }
    let pivot_cols = &ech.pivot_cols;
    let rank = pivot_cols.len();
    let pivot_set: std::collections::HashSet<usize> = pivot_cols.iter().copied().collect();
    // Non-pivot (free) columns in reliability order.
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_set.contains(c)).collect();

    // Pivot assignment for a free pattern f: x_P = rhs + sum of reduced free
    // columns in f.
    let rhs = BinVector::from_bits((0..rank).map(|r| ech.reduced.get(r, n)));
    let reduced_free_col =
        |f: usize| BinVector::from_bits((0..rank).map(|r| ech.reduced.get(r, f)));

    // Score maximized: sum of log(p/(1-p)) over the support, i.e. minus the
    // channel-weighted weight.
    let bit_cost: Vec<f64> = problem
        .priors()
        .iter()
        .map(|&p| -((1.0 - p) / p).ln())
        .collect();
    let score_of = |pivot_bits: &BinVector, free_pattern: &[usize]| -> f64 {
        let mut score = 0.0;
        for r in pivot_bits.ones() {
            score += bit_cost[order[pivot_cols[r]]];
        }
        for &f in free_pattern {
            score += bit_cost[order[f]];
        }
        score
    };

    let mut best_pivots = rhs.clone();
    let mut best_free: Vec<usize> = Vec::new();
    let mut best_score = score_of(&best_pivots, &best_free);

    if cfg.variant == OsdVariant::CombinationSweep {
        let mut consider = |pivot_bits: BinVector, free_pattern: Vec<usize>| {
            let score = score_of(&pivot_bits, &free_pattern);
            // Strict improvement keeps the earliest sweep candidate on ties.
            if score > best_score {
                best_score = score;
                best_pivots = pivot_bits;
                best_free = free_pattern;
            }
        };
        let free_reduced: Vec<BinVector> = free_cols.iter().map(|&f| reduced_free_col(f)).collect();
        for (t, col) in free_reduced.iter().enumerate() {
            consider(rhs.xor(col), vec![free_cols[t]]);
        }
        let window = cfg.order.min(free_cols.len());
        for i in 0..window {
            for j in i + 1..window {
                let pivots = rhs.xor(&free_reduced[i]).xor(&free_reduced[j]);
                consider(pivots, vec![free_cols[i], free_cols[j]]);
            }
        }
    }

    let mut e = BinVector::zeros(n);
    for r in best_pivots.ones() {
        e.set(order[pivot_cols[r]], true);
    }
    for &f in &best_free {
        e.set(order[f], true);
    }
    assert_eq!(
        problem.syndrome_of(&e),
        *syndrome,
        "OSD output must satisfy the syndrome"
    );
    Ok(e)
}
