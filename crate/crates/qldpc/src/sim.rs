//! Monte Carlo estimation of logical error rates.
//!
//! Shots are independent and embarrassingly parallel: each shot derives its
//! own RNG substream from the master seed and the shot index, workers return
//! per-shot records, and aggregation folds the records in shot order. That
//! makes every report bit-identical for any worker thread count. A shot
//! counts as a logical error if any logical observable flips in any sector or
//! if the decoder fails to produce a syndrome-satisfying estimate.

use crate::bp::{self, BpConfig, BpError, DecodingProblem};
use crate::codes::{CssCode, Sector, SectorView};
use crate::dem::DetectorModel;
use crate::gf2::BinVector;
use crate::osd::{osd_decode, OsdConfig, OsdError};
use crate::speculative::{self, SpeculativeConfig, SpeculativeSource};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shots evaluated per parallel batch when stopping on an error count; the
/// run always finishes the batch in which the target was reached so the shot
/// total is schedule-independent.
const ERROR_STOP_BATCH: u64 = 4096;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("noise model does not match the decode target: {0}")]
    TargetMismatch(&'static str),
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Osd(#[from] OsdError),
}

/// What is being decoded: a CSS code under code-capacity noise (both sectors
/// per shot) or a detector error model (one problem per shot).
#[derive(Debug, Clone)]
pub enum SimTarget {
    Css(CssCode),
    Dem(DetectorModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Independent X and Z flips, each at rate p; per-sector priors equal p.
    Independent,
    /// X, Y, Z each with probability p/3; per-sector priors equal 2p/3.
    Depolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    CodeCapacity { p: f64, channel: Channel },
    Dem,
}

impl NoiseSpec {
    pub fn capacity(p: f64) -> Self {
        assert!(
            p > 0.0 && p < 0.5,
            "physical error rate must lie in (0, 0.5)"
        );
        NoiseSpec::CodeCapacity {
            p,
            channel: Channel::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Shots(u64),
    LogicalErrors(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecoderSpec {
    Bp { bp: BpConfig },
    Speculative { spec: SpeculativeConfig },
    BpOsd { bp: BpConfig, osd: OsdConfig },
}

impl DecoderSpec {
    fn bp_config(&self) -> &BpConfig {
        match self {
            DecoderSpec::Bp { bp } => bp,
            DecoderSpec::Speculative { spec } => &spec.bp,
            DecoderSpec::BpOsd { bp, .. } => bp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub seed: u64,
    /// Worker threads; 0 uses the global pool. Reports are identical either way.
    pub threads: usize,
    /// Syndrome-extraction rounds for the per-round rate; None leaves it unset.
    pub d_rounds: Option<u64>,
    /// Candidate-set size used to score oscillation statistics on plain-BP
    /// failures; the speculative decoder always scores with its own phi.
    pub phi_stats: Option<usize>,
}

impl SimOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            threads: 0,
            d_rounds: None,
            phi_stats: None,
        }
    }
}

/// How the winning estimate of one shot was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMethod {
    Bp,
    SpecInitial,
    SpecTestVector(usize),
    Osd,
    Failed,
}

impl DecodeMethod {
    fn severity(self) -> usize {
        match self {
            DecodeMethod::Bp | DecodeMethod::SpecInitial => 0,
            DecodeMethod::Osd => 1,
            DecodeMethod::SpecTestVector(_) => 2,
            DecodeMethod::Failed => 3,
        }
    }
}

/// Outcome of a single shot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub converged: bool,
    pub logical_failure: bool,
    /// Serial-accounting BP iterations spent on this shot (summed over
    /// sectors for CSS targets).
    pub decoder_iterations: u64,
    /// The costliest method among the shot's decode calls.
    pub method: DecodeMethod,
    /// Mean candidate-set precision/recall over this shot's failed initial BP
    /// attempts, when any occurred and a candidate size was configured.
    pub precision_recall: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub shots: u64,
    pub logical_errors: u64,
    pub ler: f64,
    pub ler_per_round: Option<f64>,
    pub d_rounds: Option<u64>,
    /// Shots whose decoder produced no syndrome-satisfying estimate. These
    /// are included in `logical_errors`.
    pub nonconverged_shots: u64,
    pub decode_calls: u64,
    /// Mean serial BP iterations per decode call.
    pub mean_iterations: f64,
    /// Entry i: initial/plain BP attempts that converged at exactly i
    /// iterations (entry 0 unused).
    pub iteration_histogram: Vec<u64>,
    /// Entry i: fraction of initial/plain BP attempts not converged within i
    /// iterations.
    pub nonconvergence_curve: Vec<f64>,
    pub precision_mean: Option<f64>,
    pub recall_mean: Option<f64>,
    pub seed: u64,
}

/// Stable CSV column set emitted next to the JSON report.
pub const CSV_HEADER: &str = "p,shots,errors,ler,ler_per_round,mean_iters";

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV row under [`CSV_HEADER`]; unknown fields stay empty.
    pub fn csv_row(&self, p_label: Option<f64>) -> String {
        let p = p_label.map(|p| p.to_string()).unwrap_or_default();
        let lpr = self
            .ler_per_round
            .map(|v| v.to_string())
            .unwrap_or_default();
        format!(
            "{p},{},{},{},{lpr},{}",
            self.shots, self.logical_errors, self.ler, self.mean_iterations
        )
    }
}

/// Logical error rate per syndrome-extraction round after d rounds.
pub fn ler_per_round(ler: f64, d: u64) -> f64 {
    assert!((0.0..1.0).contains(&ler), "ler must lie in [0, 1)");
    assert!(d >= 1, "round count must be positive");
    1.0 - (1.0 - ler).powf(1.0 / d as f64)
}

/// Independent Bernoulli draw per entry of `probs`.
pub fn bernoulli_vector<R: Rng>(probs: &[f64], rng: &mut R) -> BinVector {
    BinVector::from_bits(probs.iter().map(|&p| rng.gen_bool(p)))
}

/// One sampled error, shaped by the target kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SampledError {
    /// X-sector and Z-sector data errors.
    Css { e_x: BinVector, e_z: BinVector },
    /// Fired mechanisms.
    Dem(BinVector),
}

/// Draw one error. Code capacity samples the X sector then the Z sector
/// (depolarizing draws one variate per qubit); the DEM path fires each
/// mechanism independently with its prior.
pub fn sample_error<R: Rng>(
    noise: &NoiseSpec,
    target: &SimTarget,
    rng: &mut R,
) -> Result<SampledError, SimError> {
    match (noise, target) {
        (NoiseSpec::CodeCapacity { p, channel }, SimTarget::Css(code)) => {
            let n = code.n;
            match channel {
                Channel::Independent => {
                    let e_x = bernoulli_vector(&vec![*p; n], rng);
                    let e_z = bernoulli_vector(&vec![*p; n], rng);
                    Ok(SampledError::Css { e_x, e_z })
                }
                Channel::Depolarizing => {
                    let mut e_x = BinVector::zeros(n);
                    let mut e_z = BinVector::zeros(n);
                    for i in 0..n {
                        let u: f64 = rng.gen();
                        if u < p / 3.0 {
                            e_x.set(i, true);
                        } else if u < 2.0 * p / 3.0 {
                            e_x.set(i, true);
                            e_z.set(i, true);
                        } else if u < *p {
                            e_z.set(i, true);
                        }
                    }
                    Ok(SampledError::Css { e_x, e_z })
                }
            }
        }
        (NoiseSpec::Dem, SimTarget::Dem(model)) => {
            Ok(SampledError::Dem(bernoulli_vector(&model.priors, rng)))
        }
        (NoiseSpec::Dem, SimTarget::Css(_)) => {
            Err(SimError::TargetMismatch("dem noise needs a detector model"))
        }
        (NoiseSpec::CodeCapacity { .. }, SimTarget::Dem(_)) => Err(SimError::TargetMismatch(
            "code-capacity noise needs a CSS code",
        )),
    }
}

/// Failure context for one decode task.
#[derive(Debug, Clone, Copy)]
pub enum FailureContext<'a> {
    CssSector(SectorView<'a>),
    Dem(&'a DetectorModel),
}

/// Whether the residual between the true error and a converged estimate flips
/// any logical observable. Estimates differing from the error by stabilizer
/// rows only are successes.
pub fn is_logical_failure(ctx: &FailureContext, error: &BinVector, e_hat: &BinVector) -> bool {
    match ctx {
        FailureContext::CssSector(view) => {
            assert_eq!(
                view.checks.mul_vec(error).unwrap(),
                view.checks.mul_vec(e_hat).unwrap(),
                "estimate does not reproduce the syndrome: decoder bug"
            );
            let residual = error.xor(e_hat);
            !view.pairing.mul_vec(&residual).unwrap().is_zero()
        }
        FailureContext::Dem(model) => {
            assert_eq!(
                model.h.mul_vec(error).unwrap(),
                model.h.mul_vec(e_hat).unwrap(),
                "estimate does not reproduce the syndrome: decoder bug"
            );
            model.o.mul_vec(error).unwrap() != model.o.mul_vec(e_hat).unwrap()
        }
    }
}

/// One decode call's contribution to the aggregate statistics.
struct CallStat {
    serial_iterations: u64,
    initial_iterations: u32,
    initial_converged: bool,
}

struct ShotRecord {
    outcome: TrialOutcome,
    calls: Vec<CallStat>,
    // Sum and count of precision/recall over failed initial attempts.
    pr_sum: (f64, f64),
    pr_count: u64,
}

/// What one decode task reports back to the shot loop.
struct TaskResult {
    converged: bool,
    failed: bool,
    method: DecodeMethod,
    stat: CallStat,
    precision_recall: Option<(f64, f64)>,
}

impl TaskResult {
    fn new(
        converged: bool,
        failed: bool,
        method: DecodeMethod,
        stat: CallStat,
        precision_recall: Option<(f64, f64)>,
    ) -> Self {
        Self {
            converged,
            failed,
            method,
            stat,
            precision_recall,
        }
    }
}

/// Run one decode task: BP / speculative / BP-OSD against a syndrome, then
/// judge the estimate.
fn decode_task<R: Rng>(
    problem: &DecodingProblem,
    ctx: &FailureContext,
    decoder: &DecoderSpec,
    error: &BinVector,
    phi_stats: Option<usize>,
    rng: &mut R,
) -> Result<TaskResult, SimError> {
    let syndrome = problem.syndrome_of(error);
    let score_phi = |flip_counts: &[u32], phi_size: usize| {
        let phi = speculative::select_candidates(flip_counts, phi_size.min(problem.num_bits()));
        speculative::precision_recall(&phi.bits, error)
    };
    match decoder {
        DecoderSpec::Bp { bp: cfg } => {
            let out = bp::decode(problem, &syndrome, cfg)?;
            let stat = CallStat {
                serial_iterations: out.iterations as u64,
                initial_iterations: out.iterations as u32,
                initial_converged: out.converged,
            };
            let pr = match (out.converged, phi_stats) {
                (false, Some(size)) => Some(score_phi(&out.flip_counts, size)),
                _ => None,
            };
            if out.converged {
                let failed = is_logical_failure(ctx, error, &out.e_hat);
                Ok(TaskResult::new(true, failed, DecodeMethod::Bp, stat, pr))
            } else {
                Ok(TaskResult::new(false, true, DecodeMethod::Failed, stat, pr))
            }
        }
        DecoderSpec::Speculative { spec } => {
            let (result, initial) = speculative::decode_traced(problem, &syndrome, spec, rng)?;
            let stat = CallStat {
                serial_iterations: result.serial_iterations,
                initial_iterations: initial.iterations as u32,
                initial_converged: initial.converged,
            };
            let pr = (!initial.converged)
                .then(|| score_phi(&initial.flip_counts, phi_stats.unwrap_or(spec.phi_size)));
            match result.source {
                SpeculativeSource::InitialBp => {
                    let failed = is_logical_failure(ctx, error, &result.e_hat);
                    Ok(TaskResult::new(
                        true,
                        failed,
                        DecodeMethod::SpecInitial,
                        stat,
                        pr,
                    ))
                }
                SpeculativeSource::TestVector(ordinal) => {
                    let failed = is_logical_failure(ctx, error, &result.e_hat);
                    Ok(TaskResult::new(
                        true,
                        failed,
                        DecodeMethod::SpecTestVector(ordinal),
                        stat,
                        pr,
                    ))
                }
                SpeculativeSource::Failure => {
                    Ok(TaskResult::new(false, true, DecodeMethod::Failed, stat, pr))
                }
            }
        }
        DecoderSpec::BpOsd { bp: cfg, osd } => {
            let out = bp::decode(problem, &syndrome, cfg)?;
            let stat = CallStat {
                serial_iterations: out.iterations as u64,
                initial_iterations: out.iterations as u32,
                initial_converged: out.converged,
            };
            if out.converged {
                let failed = is_logical_failure(ctx, error, &out.e_hat);
                return Ok(TaskResult::new(true, failed, DecodeMethod::Bp, stat, None));
            }
            let pr = phi_stats.map(|size| score_phi(&out.flip_counts, size));
            // Sampled errors always yield consistent syndromes.
            let rescued = osd_decode(problem, &syndrome, &out.llr_out, osd)?;
            let failed = is_logical_failure(ctx, error, &rescued);
            Ok(TaskResult::new(true, failed, DecodeMethod::Osd, stat, pr))
        }
    }
}

struct Runner<'a> {
    target: &'a SimTarget,
    decoder: &'a DecoderSpec,
    noise: &'a NoiseSpec,
    opts: &'a SimOptions,
    // One problem per decode task kind, shared across shots.
    problems: Vec<DecodingProblem>,
}

impl<'a> Runner<'a> {
    fn new(
        target: &'a SimTarget,
        decoder: &'a DecoderSpec,
        noise: &'a NoiseSpec,
        opts: &'a SimOptions,
    ) -> Result<Self, SimError> {
        let problems = match (target, noise) {
            (SimTarget::Css(code), NoiseSpec::CodeCapacity { p, channel }) => {
                let prior = match channel {
                    Channel::Independent => *p,
                    Channel::Depolarizing => 2.0 * p / 3.0,
                };
                let z = DecodingProblem::new(code.hx.clone(), vec![prior; code.n])?;
                let x = DecodingProblem::new(code.hz.clone(), vec![prior; code.n])?;
                vec![z, x]
            }
            (SimTarget::Dem(model), NoiseSpec::Dem) => {
                vec![DecodingProblem::new(model.h.clone(), model.priors.clone())?]
            }
            (SimTarget::Css(_), NoiseSpec::Dem) => {
                return Err(SimError::TargetMismatch("dem noise needs a detector model"))
            }
            (SimTarget::Dem(_), NoiseSpec::CodeCapacity { .. }) => {
                return Err(SimError::TargetMismatch(
                    "code-capacity noise needs a CSS code",
                ))
            }
        };
        Ok(Self {
            target,
            decoder,
            noise,
            opts,
            problems,
        })
    }

    fn shot(&self, index: u64) -> Result<ShotRecord, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(index);
        let sampled = sample_error(self.noise, self.target, &mut rng)?;

        // (problem, judging context, true error) per decode task; the Z
        // sector decodes first.
        let tasks: Vec<(&DecodingProblem, FailureContext, &BinVector)> =
            match (&sampled, self.target) {
                (SampledError::Css { e_x, e_z }, SimTarget::Css(code)) => vec![
                    (
                        &self.problems[0],
                        FailureContext::CssSector(code.sector(Sector::Z)),
                        e_z,
                    ),
                    (
                        &self.problems[1],
                        FailureContext::CssSector(code.sector(Sector::X)),
                        e_x,
                    ),
                ],
                (SampledError::Dem(e), SimTarget::Dem(model)) => {
                    vec![(&self.problems[0], FailureContext::Dem(model), e)]
                }
                _ => unreachable!("sample_error enforces the pairing"),
            };

        let mut calls = Vec::with_capacity(tasks.len());
        let mut converged = true;
        let mut logical_failure = false;
        let mut method = DecodeMethod::Bp;
        let mut pr_sum = (0.0, 0.0);
        let mut pr_count = 0u64;
        let mut iterations = 0u64;
        for (problem, ctx, error) in tasks {
            let task = decode_task(
                problem,
                &ctx,
                self.decoder,
                error,
                self.opts.phi_stats,
                &mut rng,
            )?;
            converged &= task.converged;
            logical_failure |= task.failed;
            if task.method.severity() >= method.severity() {
                method = task.method;
            }
            iterations += task.stat.serial_iterations;
            calls.push(task.stat);
            if let Some((p, r)) = task.precision_recall {
                pr_sum.0 += p;
                pr_sum.1 += r;
                pr_count += 1;
            }
        }
        let precision_recall =
            (pr_count > 0).then(|| (pr_sum.0 / pr_count as f64, pr_sum.1 / pr_count as f64));
        Ok(ShotRecord {
            outcome: TrialOutcome {
                converged,
                logical_failure,
                decoder_iterations: iterations,
                method,
                precision_recall,
            },
            calls,
            pr_sum,
            pr_count,
        })
    }
}

struct Aggregate {
    shots: u64,
    logical_errors: u64,
    nonconverged_shots: u64,
    decode_calls: u64,
    serial_iterations: u64,
    histogram: Vec<u64>,
    attempts: u64,
    attempts_nonconverged: u64,
    pr_sum: (f64, f64),
    pr_count: u64,
}

impl Aggregate {
    fn new() -> Self {
        Self {
            shots: 0,
            logical_errors: 0,
            nonconverged_shots: 0,
            decode_calls: 0,
            serial_iterations: 0,
            histogram: Vec::new(),
            attempts: 0,
            attempts_nonconverged: 0,
            pr_sum: (0.0, 0.0),
            pr_count: 0,
        }
    }

    fn absorb(&mut self, record: &ShotRecord) {
        self.shots += 1;
        self.logical_errors += record.outcome.logical_failure as u64;
        self.nonconverged_shots += !record.outcome.converged as u64;
        for call in &record.calls {
            self.decode_calls += 1;
            self.serial_iterations += call.serial_iterations;
            self.attempts += 1;
            if call.initial_converged {
                let i = call.initial_iterations as usize;
                if self.histogram.len() <= i {
                    self.histogram.resize(i + 1, 0);
                }
                self.histogram[i] += 1;
            } else {
                self.attempts_nonconverged += 1;
            }
        }
        self.pr_sum.0 += record.pr_sum.0;
        self.pr_sum.1 += record.pr_sum.1;
        self.pr_count += record.pr_count;
    }

    fn report(&self, max_iters: usize, opts: &SimOptions) -> SimReport {
        let ler = if self.shots == 0 {
            0.0
        } else {
            self.logical_errors as f64 / self.shots as f64
        };
        let curve = if self.attempts == 0 {
            Vec::new()
        } else {
            // curve[i] = fraction of attempts still unconverged after i
            // iterations.
            let mut remaining = self.attempts;
            let mut curve = Vec::with_capacity(max_iters + 1);
            for i in 0..=max_iters {
                if i > 0 {
                    if let Some(&h) = self.histogram.get(i) {
                        remaining -= h;
                    }
                }
                curve.push(remaining as f64 / self.attempts as f64);
            }
            curve
        };
        SimReport {
            shots: self.shots,
            logical_errors: self.logical_errors,
            ler,
            ler_per_round: opts.d_rounds.map(|d| ler_per_round(ler, d)),
            d_rounds: opts.d_rounds,
            nonconverged_shots: self.nonconverged_shots,
            decode_calls: self.decode_calls,
            mean_iterations: if self.decode_calls == 0 {
                0.0
            } else {
                self.serial_iterations as f64 / self.decode_calls as f64
            },
            iteration_histogram: self.histogram.clone(),
            nonconvergence_curve: curve,
            precision_mean: (self.pr_count > 0).then(|| self.pr_sum.0 / self.pr_count as f64),
            recall_mean: (self.pr_count > 0).then(|| self.pr_sum.1 / self.pr_count as f64),
            seed: opts.seed,
        }
    }
}

/// Decode one indexed shot: exactly the shot an identically-seeded
/// [`run_sim`] with the same configuration would process at that index.
pub fn run_trial(
    target: &SimTarget,
    decoder: &DecoderSpec,
    noise: &NoiseSpec,
    opts: &SimOptions,
    shot_index: u64,
) -> Result<TrialOutcome, SimError> {
    Runner::new(target, decoder, noise, opts)?
        .shot(shot_index)
        .map(|record| record.outcome)
}

/// Sample, decode and judge shots until the stop rule is met.
pub fn run_sim(
    target: &SimTarget,
    decoder: &DecoderSpec,
    noise: &NoiseSpec,
    stop: StopRule,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    let runner = Runner::new(target, decoder, noise, opts)?;
    let run = || -> Result<SimReport, SimError> {
        let mut agg = Aggregate::new();
        match stop {
            StopRule::Shots(n) => {
                let records: Vec<Result<ShotRecord, SimError>> =
                    (0..n).into_par_iter().map(|i| runner.shot(i)).collect();
                for record in records {
                    agg.absorb(&record?);
                }
            }
            StopRule::LogicalErrors(target_errors) => {
                let mut next = 0u64;
                while agg.logical_errors < target_errors {
                    let records: Vec<Result<ShotRecord, SimError>> = (next..next
                        + ERROR_STOP_BATCH)
                        .into_par_iter()
                        .map(|i| runner.shot(i))
                        .collect();
                    for record in records {
                        agg.absorb(&record?);
                    }
                    next += ERROR_STOP_BATCH;
                }
            }
        }
        Ok(agg.report(decoder.bp_config().max_iters, opts))
    };
    if opts.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .expect("worker pool");
        pool.install(run)
    } else {
        run()
    }
}

/// Shot counts for the complexity sweep: rerun the finer plan when the first
/// estimate lands below the threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShotPlan {
    pub initial_shots: u64,
    pub extended_shots: u64,
    pub ler_threshold: f64,
}

impl Default for ShotPlan {
    fn default() -> Self {
        Self {
            initial_shots: 10_000,
            extended_shots: 100_000,
            ler_threshold: 1e-3,
        }
    }
}

/// Mean-serial-iterations versus logical-error-rate point per decoder.
pub fn complexity_curve(
    target: &SimTarget,
    decoders: &[DecoderSpec],
    noise: &NoiseSpec,
    plan: &ShotPlan,
    opts: &SimOptions,
) -> Result<Vec<(f64, f64)>, SimError> {
    let mut points = Vec::with_capacity(decoders.len());
    for decoder in decoders {
        let mut report = run_sim(
            target,
            decoder,
            noise,
            StopRule::Shots(plan.initial_shots),
            opts,
        )?;
        if report.ler < plan.ler_threshold {
            report = run_sim(
                target,
                decoder,
                noise,
                StopRule::Shots(plan.extended_shots),
                opts,
            )?;
        }
        points.push((report.mean_iterations, report.ler));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::build_builtin;
    use crate::dem::parse_dem;

    #[test]
    fn ler_per_round_formula() {
        assert_eq!(ler_per_round(0.0, 5), 0.0);
        assert_eq!(ler_per_round(0.37, 1), 0.37);
        let expected = 1.0 - 0.9f64.powf(1.0 / 12.0);
        assert!((ler_per_round(0.1, 12) - expected).abs() < 1e-15);
        assert!((ler_per_round(0.1, 12) - 0.008742).abs() < 5e-7);
    }

    #[test]
    fn bernoulli_weight_matches_binomial_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let probs = vec![0.01; 100_000];
        let weight = bernoulli_vector(&probs, &mut rng).weight() as f64;
        let mean = 1000.0;
        let sigma = (100_000.0f64 * 0.01 * 0.99).sqrt();
        assert!(
            (weight - mean).abs() < 3.0 * sigma,
            "weight {weight} too far from {mean}"
        );
    }

    #[test]
    fn dem_firing_rates_match_priors() {
        let model = parse_dem("error(0.5) D0\nerror(0.1) D1\nerror(0.02) D0 D1 L0").unwrap();
        let target = SimTarget::Dem(model.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let shots = 100_000u64;
        let mut counts = vec![0u64; model.num_mechanisms()];
        for _ in 0..shots {
            match sample_error(&NoiseSpec::Dem, &target, &mut rng).unwrap() {
                SampledError::Dem(e) => {
                    for j in e.ones() {
                        counts[j] += 1;
                    }
                }
                _ => unreachable!(),
            }
        }
        for (j, &p) in model.priors.iter().enumerate() {
            let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
            let observed = counts[j] as f64;
            let expected = shots as f64 * p;
            assert!(
                (observed - expected).abs() < 3.0 * sigma,
                "mechanism {j}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn stabilizer_offsets_never_change_the_verdict() {
        let code = build_builtin("bb72").unwrap();
        let view = FailureContext::CssSector(code.sector(Sector::Z));
        let stabilizers = &code.hz;
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..50 {
            let e = BinVector::from_bits((0..code.n).map(|_| rng.gen_bool(0.03)));
            // Candidate estimates: the error itself, or the error offset by a
            // logical row (guaranteed failure).
            let mut e_hat = e.clone();
            if rng.gen_bool(0.5) {
                e_hat.xor_assign(&code.lz.row(rng.gen_range(0..code.lz.rows())));
            }
            let baseline = is_logical_failure(&view, &e, &e_hat);
            for _ in 0..20 {
                let mut shifted = e_hat.clone();
                shifted.xor_assign(&stabilizers.row(rng.gen_range(0..stabilizers.rows())));
                assert_eq!(is_logical_failure(&view, &e, &shifted), baseline);
            }
        }
    }

    #[test]
    fn failure_verdict_examples() {
        let code = build_builtin("bb72").unwrap();
        let view = FailureContext::CssSector(code.sector(Sector::Z));
        let e = BinVector::from_support(code.n, &[4, 31]);
        assert!(!is_logical_failure(&view, &e, &e));
        let degenerate = e.xor(&code.hz.row(7));
        assert!(!is_logical_failure(&view, &e, &degenerate));
        let flipped = e.xor(&code.lz.row(0));
        assert!(is_logical_failure(&view, &e, &flipped));
    }

    #[test]
    fn reports_replay_identically_across_thread_counts() {
        let code = build_builtin("bb72").unwrap();
        let target = SimTarget::Css(code);
        let noise = NoiseSpec::capacity(0.02);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig::default(),
        };
        let mut reports = Vec::new();
        for threads in [1, 2, 4] {
            let opts = SimOptions {
                threads,
                ..SimOptions::new(99)
            };
            reports.push(run_sim(&target, &decoder, &noise, StopRule::Shots(400), &opts).unwrap());
        }
        assert_eq!(reports[0], reports[1]);
        assert_eq!(reports[0], reports[2]);
    }

    #[test]
    fn error_stop_reaches_target() {
        let code = build_builtin("bb72").unwrap();
        let target = SimTarget::Css(code);
        let noise = NoiseSpec::capacity(0.05);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig {
                max_iters: 8,
                ..Default::default()
            },
        };
        let opts = SimOptions::new(77);
        let report = run_sim(
            &target,
            &decoder,
            &noise,
            StopRule::LogicalErrors(25),
            &opts,
        )
        .unwrap();
        assert!(report.logical_errors >= 25);
        assert_eq!(report.shots % ERROR_STOP_BATCH, 0);
        assert!((report.ler - report.logical_errors as f64 / report.shots as f64).abs() < 1e-15);
    }

    #[test]
    fn always_converging_decoder_reports_unit_iterations() {
        // Zero syndromes everywhere: a 1-bit repetition problem at tiny p
        // converges in one iteration per call.
        let model = parse_dem("error(0.01) D0").unwrap();
        let target = SimTarget::Dem(model);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig::default(),
        };
        let opts = SimOptions::new(5);
        let report = run_sim(
            &target,
            &decoder,
            &NoiseSpec::Dem,
            StopRule::Shots(200),
            &opts,
        )
        .unwrap();
        assert_eq!(report.mean_iterations, 1.0);
        assert_eq!(report.nonconvergence_curve[0], 1.0);
        assert!(report.nonconvergence_curve[1] < 1e-12);
    }

    #[test]
    fn dem_observable_judging() {
        // One mechanism flips L0 invisibly (no detectors): decoding cannot
        // see it, so half the shots in expectation are logical failures.
        let model = parse_dem("error(0.5) L0\ndetector D0\nerror(0.01) D0").unwrap();
        let target = SimTarget::Dem(model);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig::default(),
        };
        let opts = SimOptions::new(6);
        let report = run_sim(
            &target,
            &decoder,
            &NoiseSpec::Dem,
            StopRule::Shots(2000),
            &opts,
        )
        .unwrap();
        assert!(
            (report.ler - 0.5).abs() < 0.05,
            "invisible observable flip should fail about half the shots, got {}",
            report.ler
        );
    }

    #[test]
    fn bposd_rescues_every_nonconverged_shot() {
        let code = build_builtin("cbb154").unwrap();
        let target = SimTarget::Css(code);
        let noise = NoiseSpec::capacity(0.04);
        let opts = SimOptions::new(41);
        let shots = StopRule::Shots(1500);
        let bp = run_sim(
            &target,
            &DecoderSpec::Bp {
                bp: BpConfig::default(),
            },
            &noise,
            shots,
            &opts,
        )
        .unwrap();
        let bposd = run_sim(
            &target,
            &DecoderSpec::BpOsd {
                bp: BpConfig::default(),
                osd: crate::osd::OsdConfig::combination_sweep(10),
            },
            &noise,
            shots,
            &opts,
        )
        .unwrap();
        assert_eq!(
            bposd.nonconverged_shots, 0,
            "OSD always produces an estimate"
        );
        assert!(
            bposd.ler <= bp.ler,
            "bposd {} must not lose to plain bp {}",
            bposd.ler,
            bp.ler
        );
    }

    #[test]
    fn complexity_curve_points() {
        // A check matrix with one detector per mechanism decodes any syndrome
        // at the first iteration, pinning the left end of the curve.
        let trivial = parse_dem("error(0.2) D0\nerror(0.2) D1\nerror(0.2) D2").unwrap();
        let plan = ShotPlan {
            initial_shots: 300,
            extended_shots: 600,
            ler_threshold: 1e-3,
        };
        let opts = SimOptions::new(8);
        let points = complexity_curve(
            &SimTarget::Dem(trivial),
            &[DecoderSpec::Bp {
                bp: BpConfig::default(),
            }],
            &NoiseSpec::Dem,
            &plan,
            &opts,
        )
        .unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].0, 1.0);

        // Desk-scale direction check: the speculative decoder reaches a lower
        // logical error rate than plain BP at comparable serial cost.
        let code = build_builtin("cbb154").unwrap();
        let target = SimTarget::Css(code);
        let bp = BpConfig::default();
        let decoders = [
            DecoderSpec::Bp { bp },
            DecoderSpec::Speculative {
                spec: crate::speculative::SpeculativeConfig::exhaustive(8, 1, bp),
            },
        ];
        let plan = ShotPlan {
            initial_shots: 4_000,
            extended_shots: 8_000,
            ler_threshold: 1e-4,
        };
        let points =
            complexity_curve(&target, &decoders, &NoiseSpec::capacity(0.03), &plan, &opts).unwrap();
        let (bp_iters, bp_ler) = points[0];
        let (spec_iters, spec_ler) = points[1];
        assert!(
            spec_ler < bp_ler,
            "speculative {spec_ler} must beat bp {bp_ler}"
        );
        assert!(
            spec_iters <= cfg_bound(&decoders[1]),
            "mean iterations {spec_iters} above the hard bound"
        );
        assert!(
            spec_iters < 3.0 * bp_iters.max(1.0),
            "costs should stay comparable"
        );
    }

    fn cfg_bound(decoder: &DecoderSpec) -> f64 {
        match decoder {
            DecoderSpec::Speculative { spec } => (spec.bp.max_iters * (1 + spec.phi_size)) as f64,
            _ => f64::INFINITY,
        }
    }

    #[test]
    fn trials_replay_individual_shots_of_a_run() {
        let code = build_builtin("bb72").unwrap();
        let target = SimTarget::Css(code);
        let noise = NoiseSpec::capacity(0.04);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig::default(),
        };
        let opts = SimOptions::new(123);
        let shots = 300u64;
        let report = run_sim(&target, &decoder, &noise, StopRule::Shots(shots), &opts).unwrap();
        let mut failures = 0u64;
        let mut iterations = 0u64;
        for i in 0..shots {
            let trial = run_trial(&target, &decoder, &noise, &opts, i).unwrap();
            failures += trial.logical_failure as u64;
            iterations += trial.decoder_iterations;
        }
        assert_eq!(failures, report.logical_errors);
        assert_eq!(
            iterations as f64 / report.decode_calls as f64,
            report.mean_iterations
        );
    }

    #[test]
    fn self_dual_code_sectors_behave_identically() {
        // With hx = hz both sector problems coincide, so the same error must
        // decode identically through either sector view.
        let code = crate::codes::hamming_fixture();
        let z = code.sector(Sector::Z);
        let x = code.sector(Sector::X);
        assert_eq!(z.checks, x.checks);
        let problem = DecodingProblem::new(z.checks.clone(), vec![0.05; code.n]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..100 {
            let e = BinVector::from_bits((0..code.n).map(|_| rng.gen_bool(0.1)));
            let s = problem.syndrome_of(&e);
            let out = crate::bp::decode(&problem, &s, &BpConfig::default()).unwrap();
            if out.converged {
                let fz = is_logical_failure(&FailureContext::CssSector(z), &e, &out.e_hat);
                let fx = is_logical_failure(&FailureContext::CssSector(x), &e, &out.e_hat);
                assert_eq!(fz, fx);
            }
        }
    }

    #[test]
    fn target_noise_mismatch_is_an_error() {
        let code = build_builtin("bb72").unwrap();
        let target = SimTarget::Css(code);
        let decoder = DecoderSpec::Bp {
            bp: BpConfig::default(),
        };
        let opts = SimOptions::new(1);
        let err = run_sim(
            &target,
            &decoder,
            &NoiseSpec::Dem,
            StopRule::Shots(1),
            &opts,
        );
        assert!(matches!(err, Err(SimError::TargetMismatch(_))));
    }

    #[test]
    fn depolarizing_channel_correlates_sectors() {
        let code = build_builtin("bb72").unwrap();
        let n = code.n;
        let target = SimTarget::Css(code);
        let noise = NoiseSpec::CodeCapacity {
            p: 0.3,
            channel: Channel::Depolarizing,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let mut both = 0u64;
        let mut x_only = 0u64;
        let shots = 20_000;
        for _ in 0..shots {
            match sample_error(&noise, &target, &mut rng).unwrap() {
                SampledError::Css { e_x, e_z } => {
                    for i in 0..n {
                        match (e_x.get(i), e_z.get(i)) {
                            (true, true) => both += 1,
                            (true, false) => x_only += 1,
                            _ => {}
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        // Y errors hit both sectors at rate p/3, X-only likewise.
        let total = (shots * n as u64) as f64;
        assert!((both as f64 / total - 0.1).abs() < 0.01);
        assert!((x_only as f64 / total - 0.1).abs() < 0.01);
    }
}
