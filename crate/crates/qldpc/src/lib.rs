//! Quantum LDPC decoding toolkit.
//!
//! The pieces fit together as a pipeline: [`codes`] builds CSS codes from
//! polynomial specifications (or [`dem`] ingests a detector error model),
//! [`bp`] runs normalized min-sum belief propagation with oscillation
//! tracking, [`speculative`] retries failed decodes over syndrome-domain test
//! vectors, [`osd`] provides the ordered-statistics baseline, and [`sim`]
//! estimates logical error rates by Monte Carlo.

pub mod bp;
pub mod codes;
pub mod dem;
pub mod gf2;
pub mod osd;
pub mod sim;
pub mod speculative;
