//! Detector-error-model ingestion.
//!
//! Parses the text dialect produced by circuit-level noise tooling into a
//! decoding problem: a detectors-by-mechanisms check matrix, per-mechanism
//! prior probabilities, and an observables-by-mechanisms matrix for judging
//! logical flips. Supported instructions: `error(p) <targets>`, `detector`,
//! `logical_observable`, `shift_detectors`, `repeat N { ... }` and `#`
//! comments. `^`-separated target groups are folded into a single mechanism
//! (symmetric difference of detectors, union of observables); decomposition
//! hints are not preserved.
//!
//! A native JSON form of the same data is also accepted and emitted.

use crate::gf2::BinMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One independent error mechanism: its firing probability and the detectors
/// and logical observables it flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    #[serde(rename = "p")]
    pub probability: f64,
    pub detectors: Vec<usize>,
    pub observables: Vec<usize>,
}

impl Mechanism {
    pub fn new(probability: f64, mut detectors: Vec<usize>, mut observables: Vec<usize>) -> Self {
        detectors.sort_unstable();
        detectors.dedup();
        observables.sort_unstable();
        observables.dedup();
        Self {
            probability,
            detectors,
            observables,
        }
    }

    fn signature(&self) -> (&[usize], &[usize]) {
        (&self.detectors, &self.observables)
    }
}

/// A circuit-level decoding problem: mechanisms indexed by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub mechanisms: Vec<Mechanism>,
    /// Check matrix, detectors x mechanisms.
    pub h: BinMatrix,
    /// Observables matrix, observables x mechanisms.
    pub o: BinMatrix,
    pub priors: Vec<f64>,
}

impl DetectorModel {
    /// Assemble a model, dropping zero-probability mechanisms and rejecting
    /// priors above 0.5 (they would flip the LLR sign convention).
    pub fn from_mechanisms(
        num_detectors: usize,
        num_observables: usize,
        mechanisms: Vec<Mechanism>,
    ) -> Result<Self, DemError> {
        let mut kept = Vec::with_capacity(mechanisms.len());
        for m in mechanisms {
            if !(m.probability >= 0.0 && m.probability <= 0.5) {
                return Err(DemError::Invalid(format!(
                    "mechanism probability {} outside (0, 0.5]",
                    m.probability
                )));
            }
            if let Some(&d) = m.detectors.iter().max() {
                if d >= num_detectors {
                    return Err(DemError::Invalid(format!(
                        "detector D{d} outside declared range {num_detectors}"
                    )));
                }
            }
            if let Some(&o) = m.observables.iter().max() {
                if o >= num_observables {
                    return Err(DemError::Invalid(format!(
                        "observable L{o} outside declared range {num_observables}"
                    )));
                }
            }
            if m.probability > 0.0 {
                kept.push(m);
            }
        }
        let h = BinMatrix::from_fn(num_detectors, kept.len(), |i, j| {
            kept[j].detectors.binary_search(&i).is_ok()
        });
        let o = BinMatrix::from_fn(num_observables, kept.len(), |i, j| {
            kept[j].observables.binary_search(&i).is_ok()
        });
        let priors = kept.iter().map(|m| m.probability).collect();
        Ok(Self {
            num_detectors,
            num_observables,
            mechanisms: kept,
            h,
            o,
            priors,
        })
    }

    pub fn num_mechanisms(&self) -> usize {
        self.mechanisms.len()
    }

    /// Canonical text form; reparsing reproduces the model exactly.
    pub fn to_dem_string(&self) -> String {
        let mut out = String::new();
        let mut max_d_ref: Option<usize> = None;
        let mut max_o_ref: Option<usize> = None;
        for m in &self.mechanisms {
            out.push_str(&format!("error({})", m.probability));
            for &d in &m.detectors {
                out.push_str(&format!(" D{d}"));
                max_d_ref = max_d_ref.max(Some(d));
            }
            for &o in &m.observables {
                out.push_str(&format!(" L{o}"));
                max_o_ref = max_o_ref.max(Some(o));
            }
            out.push('\n');
        }
        // Pad the declared ranges when no error references their top ids.
        if self.num_detectors > 0 && max_d_ref.is_none_or(|d| d + 1 < self.num_detectors) {
            out.push_str(&format!("detector D{}\n", self.num_detectors - 1));
        }
        if self.num_observables > 0 && max_o_ref.is_none_or(|o| o + 1 < self.num_observables) {
            out.push_str(&format!(
                "logical_observable L{}\n",
                self.num_observables - 1
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let json = JsonModel {
            num_detectors: self.num_detectors,
            num_observables: self.num_observables,
            mechanisms: self.mechanisms.clone(),
        };
        serde_json::to_string_pretty(&json).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DemError> {
        let json: JsonModel = serde_json::from_str(text)?;
        Self::from_mechanisms(json.num_detectors, json.num_observables, json.mechanisms)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonModel {
    num_detectors: usize,
    num_observables: usize,
    mechanisms: Vec<Mechanism>,
}

/// Merge mechanisms with identical (detectors, observables) signatures.
///
/// Two independent sources of the same flip pattern act like one firing with
/// the XOR-convolved probability p1(1-p2) + p2(1-p1). Survivor order is first
/// occurrence.
pub fn merge_duplicates(model: &DetectorModel) -> DetectorModel {
    let mut merged: Vec<Mechanism> = Vec::with_capacity(model.mechanisms.len());
    for m in &model.mechanisms {
        match merged.iter_mut().find(|k| k.signature() == m.signature()) {
            Some(existing) => {
                let (p, q) = (existing.probability, m.probability);
                existing.probability = p * (1.0 - q) + q * (1.0 - p);
            }
            None => merged.push(m.clone()),
        }
    }
    DetectorModel::from_mechanisms(model.num_detectors, model.num_observables, merged)
        .expect("merging preserves validity")
}

/// Parse detector-error-model text.
pub fn parse_dem(text: &str) -> Result<DetectorModel, DemError> {
    let tokens = tokenize(text);
    let mut stream = tokens.iter().peekable();
    let instructions = parse_block(&mut stream, 0)?;
    let mut state = ExpandState::default();
    expand(&instructions, &mut state);
    DetectorModel::from_mechanisms(
        state.max_detector.map_or(0, |d| d + 1),
        state.max_observable.map_or(0, |o| o + 1),
        state.mechanisms,
    )
}

fn tokenize(text: &str) -> Vec<(usize, String)> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut current = String::new();
        let mut depth = 0usize;
        for ch in line.chars() {
            match ch {
                '(' => {
                    depth += 1;
                    current.push(ch);
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    current.push(ch);
                }
                // Braces separate even when glued to neighbors; whitespace
                // inside paren arguments does not split the token.
                '{' | '}' if depth == 0 => {
                    if !current.is_empty() {
                        tokens.push((idx + 1, std::mem::take(&mut current)));
                    }
                    tokens.push((idx + 1, ch.to_string()));
                }
                c if c.is_whitespace() && depth == 0 => {
                    if !current.is_empty() {
                        tokens.push((idx + 1, std::mem::take(&mut current)));
                    }
                }
                c => current.push(c),
            }
        }
        if !current.is_empty() {
            tokens.push((idx + 1, current));
        }
    }
    tokens
}

#[derive(Debug)]
enum Instruction {
    Error {
        probability: f64,
        targets: Vec<Target>,
    },
    Detector {
        ids: Vec<usize>,
    },
    Observable {
        ids: Vec<usize>,
    },
    Shift {
        amount: usize,
    },
    Repeat {
        count: usize,
        body: Vec<Instruction>,
    },
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Detector(usize),
    Observable(usize),
    Separator,
}

type TokenStream<'a> = std::iter::Peekable<std::slice::Iter<'a, (usize, String)>>;

fn parse_block(stream: &mut TokenStream, depth: usize) -> Result<Vec<Instruction>, DemError> {
    let mut out = Vec::new();
    loop {
        let Some(&&(line, ref tok)) = stream.peek() else {
            if depth > 0 {
                return Err(DemError::Parse {
                    line: 0,
                    msg: "unterminated repeat block".into(),
                });
            }
            return Ok(out);
        };
        let err = |msg: String| DemError::Parse { line, msg };
        if tok == "}" {
            if depth == 0 {
                return Err(err("unmatched `}`".into()));
            }
            stream.next();
            return Ok(out);
        }
        stream.next();
        let (name, args) = split_paren_args(tok);
        match name.to_ascii_lowercase().as_str() {
            "error" => {
                let args = args.ok_or_else(|| err("error needs a probability".into()))?;
                let probability: f64 = args
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("malformed probability `{args}`")))?;
                if !(0.0..=0.5).contains(&probability) {
                    return Err(err(format!("probability {probability} outside [0, 0.5]")));
                }
                let targets = parse_targets(stream, line);
                out.push(Instruction::Error {
                    probability,
                    targets,
                });
            }
            "detector" => {
                let ids = parse_targets(stream, line)
                    .into_iter()
                    .map(|t| match t {
                        Target::Detector(d) => Ok(d),
                        _ => Err(err("detector takes D targets only".into())),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(Instruction::Detector { ids });
            }
            "logical_observable" => {
                let ids = parse_targets(stream, line)
                    .into_iter()
                    .map(|t| match t {
                        Target::Observable(o) => Ok(o),
                        _ => Err(err("logical_observable takes L targets only".into())),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(Instruction::Observable { ids });
            }
            "shift_detectors" => {
                // Coordinate arguments inside parens are accepted and ignored;
                // the index shift is the bare target.
                let Some((_, amount_tok)) = stream.peek() else {
                    return Err(err("shift_detectors needs a shift amount".into()));
                };
                let amount: i64 = amount_tok
                    .parse()
                    .map_err(|_| err(format!("malformed shift amount `{amount_tok}`")))?;
                stream.next();
                if amount < 0 {
                    return Err(err(format!("negative detector shift {amount}")));
                }
                out.push(Instruction::Shift {
                    amount: amount as usize,
                });
            }
            "repeat" => {
                let Some((_, count_tok)) = stream.peek() else {
                    return Err(err("repeat needs a count".into()));
                };
                let count: usize = count_tok
                    .parse()
                    .map_err(|_| err(format!("malformed repeat count `{count_tok}`")))?;
                stream.next();
                match stream.next() {
                    Some((_, brace)) if brace == "{" => {}
                    _ => return Err(err("repeat count must be followed by `{`".into())),
                }
                let body = parse_block(stream, depth + 1)?;
                out.push(Instruction::Repeat { count, body });
            }
            other => return Err(err(format!("unknown instruction `{other}`"))),
        }
    }
}

/// Split `error(0.1)` into ("error", Some("0.1")).
fn split_paren_args(tok: &str) -> (&str, Option<&str>) {
    match tok.find('(') {
        Some(open) if tok.ends_with(')') => (&tok[..open], Some(&tok[open + 1..tok.len() - 1])),
        _ => (tok, None),
    }
}

fn parse_targets(stream: &mut TokenStream, line: usize) -> Vec<Target> {
    let mut targets = Vec::new();
    while let Some(&&(tok_line, ref tok)) = stream.peek() {
        // Targets only continue on the same line; the next line starts a new
        // instruction.
        if tok_line != line {
            break;
        }
        let target = if tok == "^" {
            Target::Separator
        } else if let Some(rest) = tok.strip_prefix(['D', 'd']) {
            match rest.parse::<usize>() {
                Ok(d) => Target::Detector(d),
                Err(_) => break,
            }
        } else if let Some(rest) = tok.strip_prefix(['L', 'l']) {
            match rest.parse::<usize>() {
                Ok(o) => Target::Observable(o),
                Err(_) => break,
            }
        } else {
            break;
        };
        stream.next();
        targets.push(target);
    }
    targets
}

#[derive(Default)]
struct ExpandState {
    detector_offset: usize,
    max_detector: Option<usize>,
    max_observable: Option<usize>,
    mechanisms: Vec<Mechanism>,
}

fn expand(instructions: &[Instruction], state: &mut ExpandState) {
    for instr in instructions {
        match instr {
            Instruction::Error {
                probability,
                targets,
            } => {
                // Each D occurrence toggles membership, so `^`-separated
                // groups fold by symmetric difference; observables accumulate.
                let mut detectors = BTreeSet::new();
                let mut observables = BTreeSet::new();
                for t in targets {
                    match *t {
                        Target::Detector(d) => {
                            let id = state.detector_offset + d;
                            if !detectors.remove(&id) {
                                detectors.insert(id);
                            }
                            state.max_detector = state.max_detector.max(Some(id));
                        }
                        Target::Observable(o) => {
                            observables.insert(o);
                            state.max_observable = state.max_observable.max(Some(o));
                        }
                        Target::Separator => {}
                    }
                }
                state.mechanisms.push(Mechanism::new(
                    *probability,
                    detectors.into_iter().collect(),
                    observables.into_iter().collect(),
                ));
            }
            Instruction::Detector { ids } => {
                for &d in ids {
                    state.max_detector = state.max_detector.max(Some(state.detector_offset + d));
                }
            }
            Instruction::Observable { ids } => {
                for &o in ids {
                    state.max_observable = state.max_observable.max(Some(o));
                }
            }
            Instruction::Shift { amount } => state.detector_offset += amount,
            Instruction::Repeat { count, body } => {
                for _ in 0..*count {
                    expand(body, state);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BinVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_model() {
        let model = parse_dem("error(0.1) D0 L0").unwrap();
        assert_eq!(model.num_detectors, 1);
        assert_eq!(model.num_observables, 1);
        assert_eq!(model.num_mechanisms(), 1);
        assert!(model.h.get(0, 0));
        assert!(model.o.get(0, 0));
        assert_eq!(model.priors, vec![0.1]);
    }

    #[test]
    fn repeat_with_shift_walks_detectors() {
        let model = parse_dem("repeat 2 { error(0.1) D0 shift_detectors 1 }").unwrap();
        assert_eq!(model.num_detectors, 2);
        assert_eq!(model.mechanisms[0].detectors, vec![0]);
        assert_eq!(model.mechanisms[1].detectors, vec![1]);
    }

    #[test]
    fn multiline_nested_repeat() {
        let text = "repeat 2 {\n  repeat 2 {\n    error(0.05) D0\n    shift_detectors 1\n  }\n}\n";
        let model = parse_dem(text).unwrap();
        assert_eq!(model.num_detectors, 4);
        assert_eq!(model.num_mechanisms(), 4);
        for (j, m) in model.mechanisms.iter().enumerate() {
            assert_eq!(m.detectors, vec![j]);
        }
    }

    #[test]
    fn caret_groups_fold_by_symmetric_difference() {
        let model = parse_dem("error(0.2) D0 ^ D0 D1").unwrap();
        assert_eq!(model.num_mechanisms(), 1);
        assert_eq!(model.mechanisms[0].detectors, vec![1]);
    }

    #[test]
    fn observables_union_across_groups() {
        let model = parse_dem("error(0.2) D0 L0 ^ D1 L0 L1").unwrap();
        assert_eq!(model.mechanisms[0].detectors, vec![0, 1]);
        assert_eq!(model.mechanisms[0].observables, vec![0, 1]);
    }

    #[test]
    fn coordinates_are_ignored() {
        let text =
            "detector(1, 2.5) D3\nlogical_observable L1\nshift_detectors(0, 0, 1) 2\nerror(0.25) D0";
        let model = parse_dem(text).unwrap();
        assert_eq!(model.num_detectors, 4);
        assert_eq!(model.num_observables, 2);
        // The shift applies to errors after it: D0 became detector 2.
        assert_eq!(model.mechanisms[0].detectors, vec![2]);
    }

    #[test]
    fn zero_prior_mechanisms_are_dropped() {
        let model = parse_dem("error(0) D0\nerror(0.1) D1").unwrap();
        assert_eq!(model.num_mechanisms(), 1);
        assert_eq!(
            model.num_detectors, 2,
            "dropped mechanism still counts referenced ids"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dem("error(0.1) D0\nfrobnicate D1").unwrap_err();
        assert!(matches!(err, DemError::Parse { line: 2, .. }), "{err}");
        let err = parse_dem("error(zzz) D0").unwrap_err();
        assert!(matches!(err, DemError::Parse { line: 1, .. }), "{err}");
        let err = parse_dem("\nshift_detectors -3").unwrap_err();
        match err {
            DemError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("negative"));
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse_dem("error(0.7) D0").unwrap_err();
        assert!(matches!(err, DemError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn half_probability_is_accepted() {
        let model = parse_dem("error(0.5) D0").unwrap();
        assert_eq!(model.priors, vec![0.5]);
    }

    #[test]
    fn parse_serialize_parse_is_idempotent() {
        let text = "error(0.1) D0 D2 L0\nerror(0.25) D1\ndetector D5\nlogical_observable L2\n";
        let once = parse_dem(text).unwrap();
        let twice = parse_dem(&once.to_dem_string()).unwrap();
        assert_eq!(once, twice);
        let thrice = parse_dem(&twice.to_dem_string()).unwrap();
        assert_eq!(twice, thrice);
    }

    #[test]
    fn json_form_is_bit_equivalent() {
        let text = "error(0.125) D0 D1 L0\nerror(0.0625) D1\n";
        let from_dem = parse_dem(text).unwrap();
        let from_json = DetectorModel::from_json(&from_dem.to_json()).unwrap();
        assert_eq!(from_dem, from_json);
    }

    #[test]
    fn merge_combines_duplicate_signatures() {
        let model = parse_dem("error(0.1) D0\nerror(0.1) D0").unwrap();
        let merged = merge_duplicates(&model);
        assert_eq!(merged.num_mechanisms(), 1);
        assert!((merged.priors[0] - 0.18).abs() < 1e-15);
    }

    #[test]
    fn merge_noop_without_duplicates() {
        let model = parse_dem("error(0.1) D0\nerror(0.1) D1\nerror(0.1) D0 L0").unwrap();
        assert_eq!(merge_duplicates(&model), model);
    }

    #[test]
    fn merge_half_probabilities_stay_half() {
        let model = parse_dem("error(0.5) D0\nerror(0.5) D0").unwrap();
        let merged = merge_duplicates(&model);
        assert_eq!(merged.priors, vec![0.5]);
    }

    #[test]
    fn merge_preserves_outcome_distribution() {
        // Two duplicate mechanisms plus one distinct; compare empirical
        // (syndrome, observable) distributions before and after merging with
        // a two-sample chi-square test at the 0.001 level (df = 3).
        let model = parse_dem("error(0.3) D0\nerror(0.2) D0\nerror(0.25) D0 L0").unwrap();
        let merged = merge_duplicates(&model);
        assert_eq!(merged.num_mechanisms(), 2);

        let shots = 100_000;
        let sample = |m: &DetectorModel, seed: u64| -> [u64; 4] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = [0u64; 4];
            for _ in 0..shots {
                let e = BinVector::from_bits(m.priors.iter().map(|&p| rng.gen_bool(p)));
                let s = m.h.mul_vec(&e).unwrap();
                let o = m.o.mul_vec(&e).unwrap();
                let bucket = (s.get(0) as usize) << 1 | o.get(0) as usize;
                counts[bucket] += 1;
            }
            counts
        };
        let c1 = sample(&model, 11);
        let c2 = sample(&merged, 22);
        let mut chi2 = 0.0;
        for (a, b) in c1.iter().zip(&c2) {
            let (a, b) = (*a as f64, *b as f64);
            if a + b > 0.0 {
                chi2 += (a - b).powi(2) / (a + b);
            }
        }
        // chi-square critical value for df = 3 at alpha = 0.001.
        assert!(
            chi2 < 16.266,
            "distributions diverge: chi2 = {chi2}, counts {c1:?} vs {c2:?}"
        );
    }

    #[test]
    fn syndromes_are_reproducible() {
        let model = parse_dem("error(0.1) D0 D1\nerror(0.2) D1 L0\nerror(0.3) D2").unwrap();
        let e = BinVector::from_support(3, &[0, 2]);
        let s1 = model.h.mul_vec(&e).unwrap();
        let s2 = model.h.mul_vec(&e).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.support(), vec![0, 1, 2]);
        assert_eq!(model.o.mul_vec(&e).unwrap().weight(), 0);
    }
}
