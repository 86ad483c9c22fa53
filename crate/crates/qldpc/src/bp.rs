//! Normalized min-sum belief propagation over a syndrome.
//!
//! Flooding schedule: every iteration runs one check-to-variable update with
//! the damping factor applied to the surviving minimum magnitude, one
//! variable-to-check update, a hard decision, and a convergence check against
//! the target syndrome. Hard decisions are compared between consecutive
//! iterations to count per-bit oscillations, which downstream candidate
//! selection feeds on.

use crate::gf2::{BinMatrix, BinVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BpError {
    #[error("prior {value} at bit {index} outside (0, 0.5]")]
    InvalidPrior { index: usize, value: f64 },
    #[error("priors length {got} does not match {expected} columns")]
    PriorLength { expected: usize, got: usize },
    #[error("syndrome length {got} does not match {expected} checks")]
    SyndromeLength { expected: usize, got: usize },
}

/// A syndrome-decoding instance: checks-by-bits matrix and per-bit priors.
///
/// Construction precomputes the Tanner-graph adjacency in CSR form so that
/// many concurrent decode calls can share one immutable problem.
#[derive(Debug, Clone)]
pub struct DecodingProblem {
    h: BinMatrix,
    priors: Vec<f64>,
    channel_llr: Vec<f64>,
    // Edge e corresponds to one set entry of h, grouped by check row.
    check_edges: Vec<usize>,
    edge_var: Vec<u32>,
    var_edges_start: Vec<usize>,
    var_edge_list: Vec<u32>,
}

impl DecodingProblem {
    pub fn new(h: BinMatrix, priors: Vec<f64>) -> Result<Self, BpError> {
        if priors.len() != h.cols() {
            return Err(BpError::PriorLength {
                expected: h.cols(),
                got: priors.len(),
            });
        }
        for (index, &value) in priors.iter().enumerate() {
            if !(value > 0.0 && value <= 0.5) {
                return Err(BpError::InvalidPrior { index, value });
            }
        }
        let channel_llr = priors.iter().map(|&p| ((1.0 - p) / p).ln()).collect();

        let mut check_edges = Vec::with_capacity(h.rows() + 1);
        let mut edge_var: Vec<u32> = Vec::new();
        check_edges.push(0);
        for c in 0..h.rows() {
            for v in h.row_ones(c) {
                edge_var.push(v as u32);
            }
            check_edges.push(edge_var.len());
        }
        let mut var_degree = vec![0usize; h.cols()];
        for &v in &edge_var {
            var_degree[v as usize] += 1;
        }
        let mut var_edges_start = Vec::with_capacity(h.cols() + 1);
        var_edges_start.push(0);
        for v in 0..h.cols() {
            var_edges_start.push(var_edges_start[v] + var_degree[v]);
        }
        let mut fill = var_edges_start.clone();
        let mut var_edge_list = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edge_list[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        Ok(Self {
            h,
            priors,
            channel_llr,
            check_edges,
            edge_var,
            var_edges_start,
            var_edge_list,
        })
    }

    pub fn h(&self) -> &BinMatrix {
        &self.h
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn num_checks(&self) -> usize {
        self.h.rows()
    }

    pub fn num_bits(&self) -> usize {
        self.h.cols()
    }

    pub fn syndrome_of(&self, error: &BinVector) -> BinVector {
        self.h.mul_vec(error).expect("error length matches problem")
    }
}

/// How the check-to-variable magnitude is scaled each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    /// Iteration-adaptive factor 1 - 2^-i: starts at 1/2, approaches plain
    /// min-sum as iterations accumulate.
    Adaptive,
    /// Constant normalization factor in (0, 1].
    Fixed(f64),
}

impl Damping {
    pub fn factor(self, iteration: usize) -> f64 {
        match self {
            Damping::Adaptive => damping_factor(iteration),
            Damping::Fixed(alpha) => alpha,
        }
    }
}

/// Adaptive damping factor 1 - 2^-i for iteration i >= 1.
pub fn damping_factor(iteration: usize) -> f64 {
    assert!(iteration >= 1, "iterations are counted from 1");
    1.0 - (-(iteration as f64)).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub max_iters: usize,
    pub damping: Damping,
    pub llr_clamp: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            damping: Damping::Adaptive,
            llr_clamp: 64.0,
        }
    }
}

impl BpConfig {
    fn validate(&self) {
        assert!(self.max_iters >= 1, "max_iters must be at least 1");
        if let Damping::Fixed(alpha) = self.damping {
            assert!(
                alpha > 0.0 && alpha <= 1.0,
                "fixed damping must lie in (0, 1]"
            );
        }
        assert!(self.llr_clamp > 0.0, "llr clamp must be positive");
    }
}

/// Result of one BP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome {
    pub converged: bool,
    pub e_hat: BinVector,
    pub llr_out: Vec<f64>,
    /// Number of hard-decision flips per bit between consecutive iterations.
    /// The first iteration has no predecessor and contributes none.
    pub flip_counts: Vec<u32>,
    pub iterations: usize,
}

/// Decode a syndrome with oscillation tracking.
pub fn decode(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    cfg: &BpConfig,
) -> Result<BpOutcome, BpError> {
    decode_core(problem, syndrome, cfg, true)
}

/// Decode without allocating flip counters; used for the speculative retries,
/// which never feed candidate selection.
pub(crate) fn decode_untracked(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    cfg: &BpConfig,
) -> Result<BpOutcome, BpError> {
    decode_core(problem, syndrome, cfg, false)
}

#[allow(clippy::needless_range_loop)]
fn decode_core(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    cfg: &BpConfig,
    track_flips: bool,
) -> Result<BpOutcome, BpError> {
    cfg.validate();
    let (m, n) = (problem.num_checks(), problem.num_bits());
    if syndrome.len() != m {
        return Err(BpError::SyndromeLength {
            expected: m,
            got: syndrome.len(),
        });
    }
    let clamp = cfg.llr_clamp;
    let num_edges = problem.edge_var.len();

    let syndrome_sign: Vec<f64> = (0..m)
        .map(|c| if syndrome.get(c) { -1.0 } else { 1.0 })
        .collect();

    let mut v2c: Vec<f64> = problem
        .edge_var
        .iter()
        .map(|&v| problem.channel_llr[v as usize])
        .collect();
    let mut c2v = vec![0.0f64; num_edges];
    let mut llr_out = vec![0.0f64; n];
    let mut e_hat = vec![false; n];
    let mut e_prev = vec![false; n];
    let mut flip_counts = vec![0u32; if track_flips { n } else { 0 }];

    let mut converged = false;
    let mut iterations = cfg.max_iters;
    for iter in 1..=cfg.max_iters {
        let alpha = cfg.damping.factor(iter);

        // Check-to-variable: min-sum with the self-excluding two-minimum scan.
        for c in 0..m {
            let lo = problem.check_edges[c];
            let hi = problem.check_edges[c + 1];
            let mut sign_product = 1.0f64;
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            let mut min_edge = usize::MAX;
            for e in lo..hi {
                let msg = v2c[e];
                sign_product *= msg.signum();
                let mag = msg.abs();
                if mag < min1 {
                    min2 = min1;
                    min1 = mag;
                    min_edge = e;
                } else if mag < min2 {
                    min2 = mag;
                }
            }
            let base_sign = syndrome_sign[c] * sign_product;
            for e in lo..hi {
                let excluded = if e == min_edge { min2 } else { min1 };
                let mag = (alpha * excluded).min(clamp);
                c2v[e] = base_sign * v2c[e].signum() * mag;
            }
        }

        // Variable-to-check, marginals, hard decision.
        for v in 0..n {
            let lo = problem.var_edges_start[v];
            let hi = problem.var_edges_start[v + 1];
            let mut total = problem.channel_llr[v];
            for &e in &problem.var_edge_list[lo..hi] {
                total += c2v[e as usize];
            }
            for &e in &problem.var_edge_list[lo..hi] {
                v2c[e as usize] = (total - c2v[e as usize]).clamp(-clamp, clamp);
            }
            llr_out[v] = total.clamp(-clamp, clamp);
            // A zero marginal is perfectly ambivalent; decode it to 0, the
            // value the sub-1/2 prior favors. With uniform priors and the
            // iteration-1 damping of 1/2, degree-2 bits whose checks are all
            // unsatisfied land exactly on zero, and decoding them to 1 can
            // lock in a wrong-coset codeword.
            e_hat[v] = llr_out[v] < 0.0;
        }

        if track_flips && iter >= 2 {
            for v in 0..n {
                flip_counts[v] += (e_hat[v] != e_prev[v]) as u32;
            }
        }
        e_prev.copy_from_slice(&e_hat);

        // Convergence: recomputed syndrome must match the target exactly.
        let mut satisfied = true;
        for c in 0..m {
            let mut parity = false;
            for &v in &problem.edge_var[problem.check_edges[c]..problem.check_edges[c + 1]] {
                parity ^= e_hat[v as usize];
            }
            if parity != syndrome.get(c) {
                satisfied = false;
                break;
            }
        }
        if satisfied {
            converged = true;
            iterations = iter;
            break;
        }
    }

    let e_hat = BinVector::from_bits(e_hat.iter().copied());
    debug_assert!(!converged || problem.syndrome_of(&e_hat) == *syndrome);
    Ok(BpOutcome {
        converged,
        e_hat,
        llr_out,
        flip_counts,
        iterations,
    })
}
