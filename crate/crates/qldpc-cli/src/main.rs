//! `qldpc`: construct codes, decode single syndromes, and run Monte Carlo
//! logical-error-rate simulations with reproducible, replayable outputs.

mod manifest;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use manifest::{sha256_hex, ProblemSource, RunManifest, SimulateConfig};
use qldpc::bp::{self, BpConfig, Damping};
use qldpc::codes::{self, CssCode, Sector};
use qldpc::dem;
use qldpc::gf2::BinVector;
use qldpc::osd::{osd_decode, OsdConfig, OsdVariant};
use qldpc::sim::{
    is_logical_failure, run_sim, DecoderSpec, FailureContext, NoiseSpec, SimOptions, SimTarget,
    StopRule, CSV_HEADER,
};
use qldpc::speculative::{self, SpeculativeConfig, SpeculativeSource};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "qldpc", version, about = "Quantum LDPC decoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a code and report its parameters
    Code(CodeArgs),
    /// Decode a single syndrome and report the outcome
    Decode(Box<DecodeArgs>),
    /// Estimate logical error rates by Monte Carlo simulation
    Simulate(Box<SimulateArgs>),
}

#[derive(Args)]
struct CodeArgs {
    /// Named builtin code: bb72, bb144, bb288, cbb126, cbb154, gb254
    #[arg(long, conflicts_with = "spec")]
    builtin: Option<String>,
    /// Code specification file (`family l m a:<terms> b:<terms>`)
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Export hx/hz/lx/lz as 0/1 text files into this directory
    #[arg(long)]
    export: Option<PathBuf>,
    /// Probe an upper bound on the code distance with this many randomized
    /// trials
    #[arg(long)]
    distance_budget: Option<usize>,
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Named builtin code
    #[arg(long)]
    builtin: Option<String>,
    /// Code specification file
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Detector error model file
    #[arg(long)]
    dem: Option<PathBuf>,
    /// Keep duplicate DEM mechanisms instead of merging them
    #[arg(long)]
    no_merge: bool,
}

#[derive(Args, Clone, Default)]
struct DecoderArgs {
    /// Decoder: bp, spec, or bposd
    #[arg(long)]
    decoder: Option<String>,
    /// Maximum BP iterations per attempt
    #[arg(long)]
    max_iters: Option<usize>,
    /// `adaptive` or a fixed normalization factor in (0, 1]
    #[arg(long)]
    damping: Option<String>,
    #[arg(long)]
    llr_clamp: Option<f64>,
    /// Candidate set size |phi| (spec decoder)
    #[arg(long)]
    phi: Option<usize>,
    /// Maximum test vector weight (spec decoder)
    #[arg(long)]
    wmax: Option<usize>,
    /// Test vectors sampled per weight; 0 enumerates all combinations
    #[arg(long)]
    ns: Option<usize>,
    /// Force exhaustive test-vector enumeration (conflicts with --ns > 0)
    #[arg(long)]
    exhaustive: bool,
    /// Concurrent test-vector decodes (spec decoder)
    #[arg(long)]
    parallelism: Option<usize>,
    /// Combination sweep order (bposd decoder)
    #[arg(long)]
    osd_order: Option<usize>,
    /// OSD variant: cs or 0
    #[arg(long)]
    osd_variant: Option<String>,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Error sector for code-capacity decoding: z or x
    #[arg(long, default_value = "z")]
    sector: String,
    /// Uniform prior for code-capacity decoding
    #[arg(long, default_value_t = 0.01)]
    p: f64,
    /// Synthesize the error with this comma-separated bit support
    #[arg(long, conflicts_with = "syndrome")]
    error: Option<String>,
    /// Syndrome source: `zeros` or a file of 0/1 bits
    #[arg(long)]
    syndrome: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// key=value defaults for the decoder flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Noise model: `capacity:P` or `dem`
    #[arg(long)]
    noise: Option<String>,
    /// Depolarizing code-capacity channel instead of independent X/Z flips
    #[arg(long)]
    depolarizing: bool,
    /// Stop rule: `shots:N` or `errors:N`
    #[arg(long)]
    stop: Option<String>,
    /// Master seed; mandatory (no silent entropy)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); results do not depend on this
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Rounds of syndrome extraction, enabling the per-round rate
    #[arg(long)]
    rounds: Option<u64>,
    /// Value for the CSV `p` column (defaults to the capacity p)
    #[arg(long)]
    p_label: Option<f64>,
    /// Output file prefix; writes PREFIX.json, PREFIX.csv, PREFIX.manifest.json
    #[arg(long, default_value = "qldpc_run")]
    out: String,
    /// key=value defaults for the other flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a previous run from its manifest (other flags are ignored
    /// except --out and --threads)
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Code(args) => cmd_code(args),
        Command::Decode(args) => cmd_decode(*args),
        Command::Simulate(args) => cmd_simulate(*args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// `key = value` lines with `#` comments; CLI flags take precedence.
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn empty() -> Self {
        Self(HashMap::new())
    }

    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", idx + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow!("config key `{key}`: cannot parse `{raw}`")),
        }
    }
}

fn merged<T: FromStr>(cli: Option<T>, cfg: &FileConfig, key: &str) -> Result<Option<T>> {
    match cli {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn resolve_decoder(args: &DecoderArgs, cfg: &FileConfig) -> Result<DecoderSpec> {
    let damping = match merged(args.damping.clone(), cfg, "damping")?.as_deref() {
        None | Some("adaptive") => Damping::Adaptive,
        Some(text) => {
            let alpha: f64 = text
                .parse()
                .map_err(|_| anyhow!("--damping expects `adaptive` or a factor, got `{text}`"))?;
            if !(alpha > 0.0 && alpha <= 1.0) {
                bail!("fixed damping factor must lie in (0, 1], got {alpha}");
            }
            Damping::Fixed(alpha)
        }
    };
    let bp = BpConfig {
        max_iters: merged(args.max_iters, cfg, "max-iters")?.unwrap_or(50),
        damping,
        llr_clamp: merged(args.llr_clamp, cfg, "llr-clamp")?.unwrap_or(64.0),
    };
    if bp.max_iters == 0 {
        bail!("--max-iters must be at least 1");
    }
    let name = merged(args.decoder.clone(), cfg, "decoder")?.unwrap_or_else(|| "bp".into());
    match name.as_str() {
        "bp" => Ok(DecoderSpec::Bp { bp }),
        "spec" | "speculative" => {
            let ns = merged(args.ns, cfg, "ns")?;
            let exhaustive = args.exhaustive || cfg.get::<bool>("exhaustive")?.unwrap_or(false);
            if exhaustive && ns.is_some_and(|n| n > 0) {
                bail!("--exhaustive conflicts with --ns > 0");
            }
            let spec = SpeculativeConfig {
                phi_size: merged(args.phi, cfg, "phi")?.unwrap_or(8),
                w_max: merged(args.wmax, cfg, "wmax")?.unwrap_or(1),
                n_s: if exhaustive { 0 } else { ns.unwrap_or(0) },
                bp,
                parallelism: merged(args.parallelism, cfg, "parallelism")?.unwrap_or(1),
            };
            if spec.phi_size == 0 || spec.w_max == 0 {
                bail!("--phi and --wmax must be at least 1");
            }
            if spec.n_s == 0 && spec.w_max > spec.phi_size {
                bail!("exhaustive enumeration needs --wmax <= --phi");
            }
            Ok(DecoderSpec::Speculative { spec })
        }
        "bposd" => {
            let variant = match merged(args.osd_variant.clone(), cfg, "osd-variant")?.as_deref() {
                None | Some("cs") => OsdVariant::CombinationSweep,
                Some("0") | Some("osd0") => OsdVariant::Osd0,
                Some(other) => bail!("--osd-variant expects `cs` or `0`, got `{other}`"),
            };
            let osd = OsdConfig {
                order: merged(args.osd_order, cfg, "osd-order")?.unwrap_or(10),
                variant,
            };
            Ok(DecoderSpec::BpOsd { bp, osd })
        }
        other => bail!("unknown decoder `{other}` (expected bp, spec, or bposd)"),
    }
}

fn load_code(
    builtin: Option<&str>,
    spec: Option<&Path>,
) -> Result<(CssCode, ProblemSource, String)> {
    match (builtin, spec) {
        (Some(name), None) => {
            let code = codes::build_builtin(name).ok_or_else(|| {
                anyhow!(
                    "unknown builtin `{name}` (known: {})",
                    codes::builtin_names().join(", ")
                )
            })?;
            Ok((
                code,
                ProblemSource::Builtin { name: name.into() },
                name.into(),
            ))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            let spec = codes::parse_spec(&text)
                .with_context(|| format!("parsing spec {}", path.display()))?;
            let label = spec.name.clone();
            let code = codes::build_code(&spec)?;
            Ok((
                code,
                ProblemSource::SpecFile {
                    path: path.display().to_string(),
                },
                label,
            ))
        }
        _ => bail!("specify exactly one of --builtin or --spec"),
    }
}

fn load_target(source: &SourceArgs) -> Result<(SimTarget, ProblemSource)> {
    match (&source.builtin, &source.spec, &source.dem) {
        (_, _, Some(path)) => {
            if source.builtin.is_some() || source.spec.is_some() {
                bail!("--dem conflicts with --builtin/--spec");
            }
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading DEM {}", path.display()))?;
            let mut model =
                dem::parse_dem(&text).with_context(|| format!("parsing {}", path.display()))?;
            if !source.no_merge {
                model = dem::merge_duplicates(&model);
            }
            Ok((
                SimTarget::Dem(model),
                ProblemSource::Dem {
                    path: path.display().to_string(),
                    merge: !source.no_merge,
                },
            ))
        }
        (builtin, spec, None) => {
            let (code, origin, _) = load_code(builtin.as_deref(), spec.as_deref().map(Path::new))?;
            Ok((SimTarget::Css(code), origin))
        }
    }
}

fn problem_hash(target: &SimTarget) -> String {
    match target {
        SimTarget::Css(code) => sha256_hex(&[
            b"css\n",
            format!("{} {}\n", code.n, code.k).as_bytes(),
            code.hx.to_string().as_bytes(),
            b"\n",
            code.hz.to_string().as_bytes(),
        ]),
        SimTarget::Dem(model) => sha256_hex(&[b"dem\n", model.to_dem_string().as_bytes()]),
    }
}

fn cmd_code(args: CodeArgs) -> Result<()> {
    let (code, _, label) = load_code(args.builtin.as_deref(), args.spec.as_deref())?;
    println!("code {label}: n = {}, k = {}", code.n, code.k);
    println!(
        "rank(hx) = {}, rank(hz) = {}",
        code.hx.rank(),
        code.hz.rank()
    );
    let css_ok = code.hx.mul(&code.hz.transpose())?.is_zero();
    println!(
        "css check (hx * hz^T = 0): {}",
        if css_ok { "ok" } else { "VIOLATED" }
    );
    if let Some(budget) = args.distance_budget {
        let bound = codes::min_weight_logical_upper_bound(&code, budget);
        println!("distance upper bound (budget {budget}): {bound}");
    }
    if let Some(dir) = args.export {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, matrix) in [
            ("hx", &code.hx),
            ("hz", &code.hz),
            ("lx", &code.lx),
            ("lz", &code.lz),
        ] {
            let path = dir.join(format!("{name}.txt"));
            std::fs::write(&path, format!("{matrix}\n"))
                .with_context(|| format!("writing {}", path.display()))?;
        }
        println!("exported hx/hz/lx/lz to {}", dir.display());
    }
    Ok(())
}

fn parse_support(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("--error expects comma-separated bit indices, got `{part}`"))
        })
        .collect()
}

fn read_syndrome(spec: &str, len: usize) -> Result<BinVector> {
    if spec == "zeros" {
        return Ok(BinVector::zeros(len));
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading syndrome {spec}"))?;
    let bits: Vec<bool> = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(anyhow!("syndrome file holds `{other}`; expected 0/1")),
        })
        .collect::<Result<_>>()?;
    if bits.len() != len {
        bail!("syndrome has {} bits, problem expects {len}", bits.len());
    }
    Ok(BinVector::from_bits(bits))
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    let decoder = resolve_decoder(&args.decoder, &cfg)?;
    let (target, _) = load_target(&args.source)?;

    let sector = match args.sector.as_str() {
        "z" => Sector::Z,
        "x" => Sector::X,
        other => bail!("--sector expects z or x, got `{other}`"),
    };
    if !(args.p > 0.0 && args.p <= 0.5) {
        bail!("--p must lie in (0, 0.5]");
    }
    let (problem, ctx) = match &target {
        SimTarget::Css(code) => {
            let view = code.sector(sector);
            let problem = bp::DecodingProblem::new(view.checks.clone(), vec![args.p; code.n])?;
            (problem, FailureContext::CssSector(view))
        }
        SimTarget::Dem(model) => {
            let problem = bp::DecodingProblem::new(model.h.clone(), model.priors.clone())?;
            (problem, FailureContext::Dem(model))
        }
    };

    let (syndrome, true_error) = match (&args.error, &args.syndrome) {
        (Some(support), None) => {
            let e = BinVector::from_support(problem.num_bits(), &parse_support(support)?);
            (problem.syndrome_of(&e), Some(e))
        }
        (None, Some(spec)) => (read_syndrome(spec, problem.num_checks())?, None),
        _ => bail!("specify exactly one of --error or --syndrome"),
    };

    let (converged, method, iterations, e_hat) = match &decoder {
        DecoderSpec::Bp { bp: cfg } => {
            let out = bp::decode(&problem, &syndrome, cfg)?;
            (
                out.converged,
                "bp".to_string(),
                out.iterations as u64,
                out.e_hat,
            )
        }
        DecoderSpec::Speculative { spec } => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let result = speculative::decode(&problem, &syndrome, spec, &mut rng)?;
            let method = match result.source {
                SpeculativeSource::InitialBp => "initial_bp".to_string(),
                SpeculativeSource::TestVector(k) => format!("test_vector({k})"),
                SpeculativeSource::Failure => "failure".to_string(),
            };
            (
                result.succeeded(),
                method,
                result.serial_iterations,
                result.e_hat,
            )
        }
        DecoderSpec::BpOsd { bp: cfg, osd } => {
            let out = bp::decode(&problem, &syndrome, cfg)?;
            if out.converged {
                (true, "bp".to_string(), out.iterations as u64, out.e_hat)
            } else {
                match osd_decode(&problem, &syndrome, &out.llr_out, osd) {
                    Ok(e_hat) => (true, "osd".to_string(), out.iterations as u64, e_hat),
                    Err(qldpc::osd::OsdError::Inconsistent) => (
                        false,
                        "failure".to_string(),
                        out.iterations as u64,
                        out.e_hat,
                    ),
                    Err(other) => return Err(other.into()),
                }
            }
        }
    };

    println!("decode: method = {method}, iterations = {iterations}");
    println!("converged: {converged}");
    let satisfied = problem.syndrome_of(&e_hat) == syndrome;
    println!(
        "syndrome check: {}",
        if satisfied { "satisfied" } else { "violated" }
    );
    println!(
        "estimate weight = {}, support = {:?}",
        e_hat.weight(),
        e_hat.support()
    );
    if let Some(e) = true_error {
        if converged {
            let failed = is_logical_failure(&ctx, &e, &e_hat);
            println!("logical failure vs injected error: {failed}");
        } else {
            println!("logical failure vs injected error: true (no converged estimate)");
        }
    }
    Ok(())
}

fn parse_noise(text: &str, depolarizing: bool) -> Result<NoiseSpec> {
    if text == "dem" {
        return Ok(NoiseSpec::Dem);
    }
    let Some(p_text) = text.strip_prefix("capacity:") else {
        bail!("--noise expects `capacity:P` or `dem`, got `{text}`");
    };
    let p: f64 = p_text
        .parse()
        .map_err(|_| anyhow!("malformed capacity probability `{p_text}`"))?;
    if !(p > 0.0 && p < 0.5) {
        bail!("capacity p must lie in (0, 0.5), got {p}");
    }
    let channel = if depolarizing {
        qldpc::sim::Channel::Depolarizing
    } else {
        qldpc::sim::Channel::Independent
    };
    Ok(NoiseSpec::CodeCapacity { p, channel })
}

fn parse_stop(text: &str) -> Result<StopRule> {
    let parse_n =
        |t: &str| -> Result<u64> { t.parse().map_err(|_| anyhow!("malformed stop count `{t}`")) };
    if let Some(n) = text.strip_prefix("shots:") {
        Ok(StopRule::Shots(parse_n(n)?))
    } else if let Some(n) = text.strip_prefix("errors:") {
        Ok(StopRule::LogicalErrors(parse_n(n)?))
    } else {
        bail!("--stop expects `shots:N` or `errors:N`, got `{text}`")
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (config, target) = if let Some(manifest_path) = &args.replay {
        let text = std::fs::read_to_string(manifest_path)
            .with_context(|| format!("reading manifest {}", manifest_path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", manifest_path.display()))?;
        let mut config = manifest.config.clone();
        config.threads = args.threads;
        let source = match &config.source {
            ProblemSource::Builtin { name } => SourceArgs {
                builtin: Some(name.clone()),
                spec: None,
                dem: None,
                no_merge: false,
            },
            ProblemSource::SpecFile { path } => SourceArgs {
                builtin: None,
                spec: Some(PathBuf::from(path)),
                dem: None,
                no_merge: false,
            },
            ProblemSource::Dem { path, merge } => SourceArgs {
                builtin: None,
                spec: None,
                dem: Some(PathBuf::from(path)),
                no_merge: !merge,
            },
        };
        let (target, _) = load_target(&source)?;
        if problem_hash(&target) != manifest.problem_hash {
            bail!("replay problem hash mismatch: the decoding problem changed since the manifest");
        }
        (config, target)
    } else {
        let cfg = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::empty(),
        };
        let (target, source) = load_target(&args.source)?;
        let noise_text = merged(args.noise.clone(), &cfg, "noise")?.unwrap_or_else(|| {
            if matches!(target, SimTarget::Dem(_)) {
                "dem".into()
            } else {
                String::new()
            }
        });
        if noise_text.is_empty() {
            bail!("--noise capacity:P is required for code targets");
        }
        let noise = parse_noise(&noise_text, args.depolarizing)?;
        let stop_text = merged(args.stop.clone(), &cfg, "stop")?
            .ok_or_else(|| anyhow!("--stop shots:N or errors:N is required"))?;
        let stop = parse_stop(&stop_text)?;
        let seed = merged(args.seed, &cfg, "seed")?
            .ok_or_else(|| anyhow!("--seed is required (no silent entropy)"))?;
        let decoder = resolve_decoder(&args.decoder, &cfg)?;
        let p_label = args.p_label.or(match noise {
            NoiseSpec::CodeCapacity { p, .. } => Some(p),
            NoiseSpec::Dem => None,
        });
        let config = SimulateConfig {
            source,
            noise,
            decoder,
            stop,
            seed,
            threads: args.threads,
            rounds: args.rounds,
            p_label,
        };
        (config, target)
    };

    let opts = SimOptions {
        seed: config.seed,
        threads: config.threads,
        d_rounds: config.rounds,
        phi_stats: None,
    };
    let report = run_sim(&target, &config.decoder, &config.noise, config.stop, &opts)?;

    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: std::env::args().collect(),
        seed: config.seed,
        problem_hash: problem_hash(&target),
        config: config.clone(),
    };
    let csv = format!(
        "# qldpc simulate csv v1\n{CSV_HEADER}\n{}\n",
        report.csv_row(config.p_label)
    );
    let json_path = format!("{}.json", args.out);
    let csv_path = format!("{}.csv", args.out);
    let manifest_path = format!("{}.manifest.json", args.out);
    std::fs::write(&json_path, report.to_json()).with_context(|| format!("writing {json_path}"))?;
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {csv_path}"))?;
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {manifest_path}"))?;

    println!(
        "shots = {}, logical_errors = {}, ler = {}, mean_iterations = {}",
        report.shots, report.logical_errors, report.ler, report.mean_iterations
    );
    if let Some(lpr) = report.ler_per_round {
        println!(
            "ler_per_round = {lpr} over {} rounds",
            config.rounds.unwrap_or(1)
        );
    }
    println!("wrote {csv_path}, {json_path}, {manifest_path}");
    Ok(())
}
