//! Speculative BP decoding with Chase-like post-processing.
//!
//! When plain BP fails, the most frequently oscillating bits form a candidate
//! set. Each test vector t over that set is applied in the syndrome domain
//! (s' = s ^ t H^T), a fresh BP instance decodes the modified syndrome, and a
//! converged estimate is restored by undoing the flips (e ^ t), which by
//! construction satisfies the original syndrome. All retries are independent
//! and may run in parallel; the reported winner is the converged candidate
//! with the lowest ordinal, so results do not depend on the schedule.

use crate::bp::{self, BpConfig, BpError, BpOutcome, DecodingProblem};
use crate::gf2::BinVector;
use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeculativeConfig {
    /// Candidate set size.
    pub phi_size: usize,
    /// Maximum test-vector weight.
    pub w_max: usize,
    /// Test vectors sampled per weight; 0 enumerates all combinations.
    pub n_s: usize,
    pub bp: BpConfig,
    /// Upper bound on concurrently decoded test vectors (1 = serial).
    pub parallelism: usize,
}

impl SpeculativeConfig {
    pub fn exhaustive(phi_size: usize, w_max: usize, bp: BpConfig) -> Self {
        Self {
            phi_size,
            w_max,
            n_s: 0,
            bp,
            parallelism: 1,
        }
    }

    fn validate(&self, num_bits: usize) {
        assert!(self.phi_size >= 1, "phi_size must be at least 1");
        assert!(
            self.phi_size <= num_bits,
            "phi_size cannot exceed the bit count"
        );
        assert!(self.w_max >= 1, "w_max must be at least 1");
        if self.n_s == 0 {
            assert!(
                self.w_max <= self.phi_size,
                "exhaustive enumeration needs w_max <= phi_size"
            );
        }
    }
}

/// Ordered candidate set: most frequently flipped bits first, ties broken by
/// ascending index. `padded` marks sets filled up with never-flipped bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub bits: Vec<usize>,
    pub padded: bool,
}

/// Pick the `phi_size` most frequently flipped bits. Bits that never flipped
/// are used only to pad when fewer than `phi_size` bits oscillated.
pub fn select_candidates(flip_counts: &[u32], phi_size: usize) -> CandidateSet {
    assert!(phi_size <= flip_counts.len(), "phi_size exceeds bit count");
    let mut by_count: Vec<usize> = (0..flip_counts.len()).collect();
    by_count.sort_by(|&a, &b| flip_counts[b].cmp(&flip_counts[a]).then(a.cmp(&b)));
    let bits: Vec<usize> = by_count.into_iter().take(phi_size).collect();
    let padded = bits.iter().any(|&b| flip_counts[b] == 0);
    CandidateSet { bits, padded }
}

/// One syndrome-domain flip pattern, support inside the candidate set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub t: BinVector,
    pub weight: usize,
    pub ordinal: usize,
}

/// Enumerate or sample test vectors over the candidate set.
///
/// Exhaustive mode (`n_s` = 0) yields every subset of weight 1..=w_max in
/// (weight, lexicographic-combination) order. Sampled mode draws `n_s`
/// distinct subsets per weight uniformly without replacement (all of them if
/// fewer exist), ordered by (weight, draw order). Ordinals are sequential.
pub fn gen_test_vectors<R: Rng>(
    num_bits: usize,
    phi: &[usize],
    w_max: usize,
    n_s: usize,
    rng: &mut R,
) -> Vec<TestVector> {
    let mut out = Vec::new();
    let push = |positions: &[usize], out: &mut Vec<TestVector>| {
        let support: Vec<usize> = positions.iter().map(|&p| phi[p]).collect();
        out.push(TestVector {
            t: BinVector::from_support(num_bits, &support),
            weight: support.len(),
            ordinal: out.len(),
        });
    };
    for w in 1..=w_max.min(phi.len()) {
        let total = binomial(phi.len(), w);
        if n_s == 0 || total <= n_s as u128 {
            for combo in (0..phi.len()).combinations(w) {
                push(&combo, &mut out);
            }
        } else {
            let mut seen: Vec<Vec<usize>> = Vec::with_capacity(n_s);
            while seen.len() < n_s {
                let mut draw = rand::seq::index::sample(rng, phi.len(), w).into_vec();
                draw.sort_unstable();
                if !seen.contains(&draw) {
                    push(&draw, &mut out);
                    seen.push(draw);
                }
            }
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeculativeSource {
    /// The initial BP attempt converged on its own.
    InitialBp,
    /// The test vector with this ordinal produced the winning estimate.
    TestVector(usize),
    /// No attempt satisfied the syndrome.
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeculativeResult {
    /// Winning estimate; on failure, the unconverged initial BP output.
    pub e_hat: BinVector,
    pub source: SpeculativeSource,
    /// Cumulative BP iterations until the first success when attempts run one
    /// after another in ordinal order (all of them on failure).
    pub serial_iterations: u64,
    /// Initial-run iterations plus the longest retry the winner had to wait
    /// for: the latency under full parallelism.
    pub wall_iterations: u64,
}

impl SpeculativeResult {
    pub fn succeeded(&self) -> bool {
        !matches!(self.source, SpeculativeSource::Failure)
    }
}

/// Hit statistics of a candidate set against the true error: precision is the
/// fraction of candidates that are really erroneous, recall the fraction of
/// the error support covered. An empty error has recall 1 by convention.
pub fn precision_recall(phi: &[usize], error: &BinVector) -> (f64, f64) {
    let support: std::collections::HashSet<usize> = error.ones().collect();
    let hits = phi.iter().filter(|b| support.contains(b)).count();
    let precision = if phi.is_empty() {
        0.0
    } else {
        hits as f64 / phi.len() as f64
    };
    let recall = if support.is_empty() {
        1.0
    } else {
        hits as f64 / support.len() as f64
    };
    (precision, recall)
}

/// Decode with speculative retries; see the module docs for the contract.
pub fn decode<R: Rng>(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    cfg: &SpeculativeConfig,
    rng: &mut R,
) -> Result<SpeculativeResult, BpError> {
    decode_traced(problem, syndrome, cfg, rng).map(|(result, _)| result)
}

/// Like [`decode`], additionally exposing the initial BP outcome so callers
/// can harvest oscillation statistics.
pub fn decode_traced<R: Rng>(
    problem: &DecodingProblem,
    syndrome: &BinVector,
    cfg: &SpeculativeConfig,
    rng: &mut R,
) -> Result<(SpeculativeResult, BpOutcome), BpError> {
    cfg.validate(problem.num_bits());
    let initial = bp::decode(problem, syndrome, &cfg.bp)?;
    let initial_iters = initial.iterations as u64;
    if initial.converged {
        let result = SpeculativeResult {
            e_hat: initial.e_hat.clone(),
            source: SpeculativeSource::InitialBp,
            serial_iterations: initial_iters,
            wall_iterations: initial_iters,
        };
        return Ok((result, initial));
    }

    let phi = select_candidates(&initial.flip_counts, cfg.phi_size);
    let vectors = gen_test_vectors(problem.num_bits(), &phi.bits, cfg.w_max, cfg.n_s, rng);

    // Retries run in ordinal-ordered chunks. Scanning stops at the first
    // converged candidate, so the outcome (including the iteration accounting
    // over ordinals at or below the winner) is independent of chunk size.
    let chunk_size = cfg.parallelism.max(1);
    let mut serial_iterations = initial_iters;
    let mut wall_tail = 0u64;
    let mut winner: Option<(usize, BinVector)> = None;
    'chunks: for chunk in vectors.chunks(chunk_size) {
        let attempt = |tv: &TestVector| -> Result<(u64, Option<BinVector>), BpError> {
            let mut shifted = syndrome.clone();
            shifted.xor_assign(&problem.syndrome_of(&tv.t));
            let inner = bp::decode_untracked(problem, &shifted, &cfg.bp)?;
            let candidate = inner.converged.then(|| inner.e_hat.xor(&tv.t));
            Ok((inner.iterations as u64, candidate))
        };
        let results: Vec<(u64, Option<BinVector>)> = if chunk_size > 1 {
            chunk.par_iter().map(attempt).collect::<Result<_, _>>()?
        } else {
            chunk.iter().map(attempt).collect::<Result<_, _>>()?
        };
        for (tv, (iters, candidate)) in chunk.iter().zip(results) {
            serial_iterations += iters;
            wall_tail = wall_tail.max(iters);
            if let Some(e_hat) = candidate {
                winner = Some((tv.ordinal, e_hat));
                break 'chunks;
            }
        }
    }

    let result = match winner {
        Some((ordinal, e_hat)) => {
            assert_eq!(
                problem.syndrome_of(&e_hat),
                *syndrome,
                "restored estimate must satisfy the original syndrome"
            );
            SpeculativeResult {
                e_hat,
                source: SpeculativeSource::TestVector(ordinal),
                serial_iterations,
                wall_iterations: initial_iters + wall_tail,
            }
        }
        None => SpeculativeResult {
            e_hat: initial.e_hat.clone(),
            source: SpeculativeSource::Failure,
            serial_iterations,
            wall_iterations: initial_iters + wall_tail,
        },
    };
    Ok((result, initial))
}
