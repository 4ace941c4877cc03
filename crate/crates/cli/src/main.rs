//! `quadfield` command-line driver.
//!
//! Every command that writes `--out PATH` also writes `PATH.manifest.json`,
//! which `quadfield replay` uses to rerun the command and compare digests.
//! Without `--out` the CSV goes to stdout, summaries to stderr, and no
//! manifest is written.

mod output;
mod parse;

use std::collections::BTreeMap;
use std::hash::BuildHasher;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use quadfield::census::{self, completeness_cutoff, reduction_cutoff, Theorem};
use quadfield::classnum::{batch_class_numbers_with, ClassNumberTable};
use quadfield::par::map_indexed;
use quadfield::perron::{kernel_closed_form, kernel_contour, PerronKernelParams};
use quadfield::pipeline::{self, Convention, PipelineConfig};
use quadfield::randeuler::{
    EulerMoments, EulerSampler, ModelKind, RandomEulerModel, DEFAULT_PRIME_CUTOFF,
    DEFAULT_SAMPLING_CUTOFF,
};
use quadfield::Execution;

use output::{manifest_path, real, sha256_hex, write_atomic, OutputRecord, RunManifest, Table};
use parse::{parse_grid, parse_s, Grid, SPoint};

const EXIT_HELP: &str = "\
Exit codes: 0 success, 1 internal error, 2 invalid usage or input,
3 memory budget exceeded, 4 numerical non-convergence.

Environment: QUADFIELD_MEMORY_BUDGET caps table allocations in bytes
(default 2 GiB); RAYON_NUM_THREADS sets the worker count. Outputs do not
depend on either the worker count or --lanes.";

#[derive(Parser)]
#[command(
    name = "quadfield",
    version,
    about = "Class numbers of imaginary quadratic fields and the random models behind their averages",
    after_help = EXIT_HELP
)]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(untagged)]
enum Command {
    /// Tabulate h(-d) for every fundamental d ≤ X by sieving reduced forms
    /// ax² + bxy + cy² with 4ac - b² ≤ X.
    Sieve(SieveArgs),
    /// Count F_X(h) = #{fundamental d ≤ X : h(-d) = h} for h ≤ H.
    Census(CensusArgs),
    /// Compare Σ_{h≤H} F_X(h) with 3ζ(2)/ζ(3)·H² (`--theorem 1`), or the
    /// odd-h sum with (15/4)·H²/log H (`--theorem 2`), at X = ⌈H² log log H⌉.
    Verify(VerifyArgs),
    /// Compare Σ_{d≤X} h(-d)^{-s} with 3π^{s-2} E(L(1,𝕏)^{-s}) ∫_1^X x^{-s/2} dx,
    /// or with --prime-variant, Σ_{p≤X, p≡3 (4)} h(-p)^{-s} with
    /// π^s E(L(1,𝕐)^{±s}) Σ p^{-s/2}.
    Moments(MomentsArgs),
    /// Complex moments E(L^s) of a random Euler product, with a bound on the
    /// truncation error.
    ModelMoments(ModelMomentsArgs),
    /// Tabulate the smoothed Perron kernel
    /// (1/2πi) ∫_(c) y^s ((e^{λs} - 1)/(λs))^N ds/s by contour quadrature
    /// against its Irwin–Hall closed form.
    Kernel(KernelArgs),
    /// Monte Carlo tail probabilities P(L ≤ π²/(6e^γ τ)) of a random Euler
    /// product.
    Sample(SampleArgs),
    /// Rebuild Σ_{h≤H} F(h) as (3/π²) E(∫_1^X I(πH/(√x L)) dx) and compare
    /// with the census.
    Reconstruct(ReconstructArgs),
    /// Rerun a command from its manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Bin,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    X,
    Y,
}

impl ModelArg {
    fn model(self, prime_cutoff: u64) -> RandomEulerModel {
        let kind = match self {
            ModelArg::X => ModelKind::X,
            ModelArg::Y => ModelKind::Y,
        };
        RandomEulerModel::new(kind, prime_cutoff)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ConventionArg {
    AsPrinted,
    Conjugate,
    Both,
}

impl ConventionArg {
    fn conventions(self) -> Vec<Convention> {
        match self {
            ConventionArg::AsPrinted => vec![Convention::AsPrinted],
            ConventionArg::Conjugate => vec![Convention::Conjugate],
            ConventionArg::Both => vec![Convention::AsPrinted, Convention::Conjugate],
        }
    }
}

fn s_value(text: &str) -> Result<String, String> {
    parse_s(text).map(|_| text.to_string())
}

fn grid_value(text: &str) -> Result<String, String> {
    parse_grid(text).map(|_| text.to_string())
}

#[derive(Args, Serialize)]
struct SieveArgs {
    /// Largest d to tabulate.
    #[arg(long)]
    x_max: u64,
    /// Number of sieve lanes; the table does not depend on it.
    #[arg(long, default_value_t = 8)]
    lanes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` writes `d,h` rows; `bin` writes the little-endian table dump.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Serialize)]
struct CensusArgs {
    #[arg(long)]
    h_max: u64,
    /// Table cutoff; defaults to ⌈H²·max(log log H, 1)⌉ with natural logs and
    /// H raised to at least 16, below which the census is flagged incomplete.
    #[arg(long)]
    x_max: Option<u64>,
    /// Only report odd class numbers.
    #[arg(long)]
    odd_only: bool,
    #[arg(long, default_value_t = 8)]
    lanes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    theorem: u8,
    /// Comma-separated H values, each at least 16.
    #[arg(long, value_delimiter = ',', required = true)]
    h_grid: Vec<u64>,
    #[arg(long, default_value_t = 8)]
    lanes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MomentsArgs {
    #[arg(long)]
    x_max: u64,
    /// Comma-separated points such as `c`, `c+5i`, `0.1-2i`; `c` is 1/log X.
    #[arg(long, value_delimiter = ',', default_value = "c", value_parser = s_value, allow_hyphen_values = true)]
    s: Vec<String>,
    /// Sum over primes p ≡ 3 (mod 4) instead of all fundamental d.
    #[arg(long)]
    prime_variant: bool,
    /// Exponent sign of the model moment in the prime variant.
    #[arg(long, value_enum, default_value = "both")]
    convention: ConventionArg,
    /// Reject s with |s| > log X/(10⁴ (log log X)²) instead of flagging them.
    #[arg(long)]
    strict_range: bool,
    /// Prime cutoff of the model moment.
    #[arg(long, default_value_t = DEFAULT_PRIME_CUTOFF)]
    p_max: u64,
    #[arg(long, default_value_t = 8)]
    lanes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ModelMomentsArgs {
    #[arg(long, value_enum, default_value = "x")]
    model: ModelArg,
    #[arg(long, default_value_t = DEFAULT_PRIME_CUTOFF)]
    p_max: u64,
    /// Expansion order for primes beyond the cutoff, 0 to 2.
    #[arg(long, default_value_t = 2)]
    tail_order: u8,
    /// Comma-separated complex points such as `-2`, `0.5+3i`.
    #[arg(long, value_delimiter = ',', required = true, value_parser = s_value, allow_hyphen_values = true)]
    s: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct KernelArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    /// Absolute tolerance of the contour quadrature.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Comma-separated y values, or `auto` for 1000 points spanning
    /// [e^{-2λN}, 2].
    #[arg(long, default_value = "auto", value_parser = grid_value)]
    y_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "x")]
    model: ModelArg,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_CUTOFF)]
    p_max: u64,
    #[arg(long, default_value_t = 100_000)]
    n_samples: u64,
    /// Generated and recorded in the manifest when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated τ ≥ 1.
    #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,2.5,3")]
    tail_tau: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ReconstructArgs {
    #[arg(long)]
    h: u64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    n: u32,
    /// Line of integration; defaults to 1/log H. The kernel does not depend on it.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Generated and recorded in the manifest when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_CUTOFF)]
    p_max: u64,
    #[arg(long, default_value_t = 8)]
    lanes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ReplayArgs {
    /// Manifest written next to an earlier output.
    #[arg(long)]
    manifest: PathBuf,
    /// Override the lane count of the original run.
    #[arg(long)]
    lanes: Option<usize>,
}

/// A usage problem detected after flag parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// What a command produced, before it is written anywhere.
struct Outcome {
    bytes: Vec<u8>,
    summary: Vec<String>,
    seed: Option<u64>,
}

impl Outcome {
    fn new(bytes: Vec<u8>) -> Self {
        Outcome {
            bytes,
            summary: Vec::new(),
            seed: None,
        }
    }
}

fn fresh_seed() -> u64 {
    std::collections::hash_map::RandomState::new().hash_one(std::time::SystemTime::now())
}

fn execution(cli_sequential: bool) -> Execution {
    if cli_sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn resolve_s(points: &[String], c: Option<f64>) -> Result<Vec<Complex64>> {
    points
        .iter()
        .map(|text| {
            let p: SPoint = parse_s(text).map_err(usage)?;
            match (p.re, c) {
                (None, None) => Err(usage(format!(
                    "`{text}`: c is not defined for this command"
                ))),
                (_, Some(c)) => Ok(p.resolve(c)),
                (Some(_), None) => Ok(p.resolve(0.0)),
            }
        })
        .collect()
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn sieve(args: &SieveArgs, exec: Execution) -> Result<Outcome> {
    if matches!(args.format, Format::Bin) && args.out.is_none() {
        return Err(usage("--format bin needs --out"));
    }
    let table = batch_class_numbers_with(args.x_max, args.lanes, exec)?;
    let bytes = match args.format {
        Format::Bin => {
            let mut buf = Vec::new();
            table.write_binary(&mut buf)?;
            buf
        }
        Format::Csv => {
            let mut csv = Table::new(&["d", "h"])?;
            for (d, h) in table.iter() {
                csv.row([d.to_string(), h.to_string()])?;
            }
            csv.into_bytes()?
        }
    };
    let mut outcome = Outcome::new(bytes);
    outcome.summary.push(format!(
        "checksum={} fundamental={} x={}",
        table.checksum(),
        table.fundamental_count(),
        table.x()
    ));
    Ok(outcome)
}

fn census_cmd(args: &CensusArgs, exec: Execution) -> Result<Outcome> {
    if args.h_max == 0 {
        return Err(usage("--h-max must be positive"));
    }
    let x = args
        .x_max
        .unwrap_or_else(|| completeness_cutoff(args.h_max));
    let table = batch_class_numbers_with(x, args.lanes, exec)?;
    let fc = census::tabulate(&table, args.h_max)?;
    let mut csv = Table::new(&["h", "count"])?;
    for h in (1..=args.h_max).filter(|h| !args.odd_only || h % 2 == 1) {
        csv.row([h.to_string(), fc.count(h).to_string()])?;
    }
    let mut outcome = Outcome::new(csv.into_bytes()?);
    if args.odd_only {
        outcome.summary.push(format!(
            "sum_F_odd({})={}",
            args.h_max,
            fc.odd_sum_up_to(args.h_max)
        ));
    } else {
        outcome.summary.push(format!(
            "sum_F({})={}",
            args.h_max,
            fc.sum_up_to(args.h_max)
        ));
    }
    if !fc.heuristically_complete() {
        eprintln!(
            "warning: X = {x} is below the completeness cutoff {} for H = {}; F_X(h) may undercount F(h)",
            completeness_cutoff(args.h_max),
            args.h_max
        );
    }
    Ok(outcome)
}

fn verify_cmd(args: &VerifyArgs) -> Result<Outcome> {
    let theorem = if args.theorem == 1 {
        Theorem::AllClassNumbers
    } else {
        Theorem::OddClassNumbers
    };
    let report = census::verify(theorem, &args.h_grid, args.lanes)?;
    let mut csv = Table::new(&["H", "X", "empirical", "main_term", "ratio", "residual"])?;
    let mut outcome_summary = Vec::new();
    for row in &report.rows {
        csv.row([
            row.h.to_string(),
            row.x.to_string(),
            row.empirical.to_string(),
            real(row.main_term),
            real(row.ratio),
            real(row.residual),
        ])?;
        outcome_summary.push(format!("H={} X={} ratio={:.6}", row.h, row.x, row.ratio));
    }
    let mut outcome = Outcome::new(csv.into_bytes()?);
    outcome.summary = outcome_summary;
    Ok(outcome)
}

fn moments_cmd(args: &MomentsArgs, exec: Execution) -> Result<Outcome> {
    let mut config = PipelineConfig::new(args.x_max)?;
    config.s_list = resolve_s(&args.s, Some(config.c))?;
    config.strict_range = args.strict_range;
    config.prime_cutoff = args.p_max;
    let table: ClassNumberTable = batch_class_numbers_with(args.x_max, args.lanes, exec)?;
    let mut header = vec![
        "s_re",
        "s_im",
        "empirical_re",
        "empirical_im",
        "model_re",
        "model_im",
        "rel_error",
        "in_range",
    ];
    let rows: Vec<(pipeline::MomentComparison, Option<Convention>)> = if args.prime_variant {
        header.push("convention");
        pipeline::compare_prime_moments(&config, &table, &args.convention.conventions(), exec)?
            .into_iter()
            .map(|r| (r.comparison, Some(r.convention)))
            .collect()
    } else {
        pipeline::compare_moments(&config, &table, exec)?
            .into_iter()
            .map(|r| (r, None))
            .collect()
    };
    let mut csv = Table::new(&header)?;
    let mut summary = Vec::new();
    for (r, conv) in &rows {
        let mut fields = vec![
            real(r.s.re),
            real(r.s.im),
            real(r.empirical.re),
            real(r.empirical.im),
            real(r.model.re),
            real(r.model.im),
            real(r.rel_error),
            r.in_range.to_string(),
        ];
        let label = match conv {
            Some(c) => {
                fields.push(c.name().to_string());
                format!(" convention={}", c.name())
            }
            None => String::new(),
        };
        csv.row(fields)?;
        summary.push(format!("s={}{label} rel_error={:.3e}", r.s, r.rel_error));
    }
    let mut outcome = Outcome::new(csv.into_bytes()?);
    outcome.summary = summary;
    Ok(outcome)
}

fn model_moments_cmd(args: &ModelMomentsArgs) -> Result<Outcome> {
    let model = args
        .model
        .model(args.p_max)
        .with_tail_order(args.tail_order);
    let moments = EulerMoments::new(model)?;
    let mut csv = Table::new(&["s_re", "s_im", "value_re", "value_im", "tail_bound"])?;
    for s in resolve_s(&args.s, None)? {
        let m = moments.moment(s)?;
        csv.row([
            real(s.re),
            real(s.im),
            real(m.value.re),
            real(m.value.im),
            real(m.truncation_error_bound),
        ])?;
    }
    Ok(Outcome::new(csv.into_bytes()?))
}

fn kernel_cmd(args: &KernelArgs, exec: Execution) -> Result<Outcome> {
    let params = PerronKernelParams::new(args.c, args.lambda, args.n, args.tol)?;
    let ys = match parse_grid(&args.y_grid).map_err(usage)? {
        Grid::Points(p) => p,
        Grid::Auto => {
            let lo = (-2.0 * args.lambda * f64::from(args.n)).exp();
            (0..1000)
                .map(|i| lo + (2.0 - lo) * f64::from(i) / 999.0)
                .collect()
        }
    };
    let values = map_indexed(exec, ys.len(), |i| -> quadfield::Result<(f64, f64)> {
        Ok((
            kernel_closed_form(ys[i], args.lambda, args.n)?,
            kernel_contour(ys[i], &params)?,
        ))
    });
    let mut csv = Table::new(&[
        "y",
        "lambda",
        "N",
        "c",
        "closed_form",
        "contour",
        "abs_diff",
    ])?;
    let mut max_diff = 0.0f64;
    for (&y, v) in ys.iter().zip(values) {
        let (closed, contour) = v?;
        let diff = (closed - contour).abs();
        max_diff = max_diff.max(diff);
        csv.row([
            real(y),
            real(args.lambda),
            args.n.to_string(),
            real(args.c),
            real(closed),
            real(contour),
            real(diff),
        ])?;
    }
    let mut outcome = Outcome::new(csv.into_bytes()?);
    outcome.summary.push(format!("max_abs_diff={max_diff:.3e}"));
    Ok(outcome)
}

fn sample_cmd(args: &SampleArgs, exec: Execution) -> Result<Outcome> {
    let seed = args.seed.unwrap_or_else(fresh_seed);
    let sampler = EulerSampler::new(args.model.model(args.p_max))?;
    let estimates = sampler.tail_probabilities(&args.tail_tau, args.n_samples, seed, exec)?;
    let mut csv = Table::new(&["tau", "prob", "stderr", "n"])?;
    for (&tau, e) in args.tail_tau.iter().zip(&estimates) {
        csv.row([real(tau), real(e.mean), real(e.std_error), e.n.to_string()])?;
    }
    let mut outcome = Outcome::new(csv.into_bytes()?);
    outcome.seed = Some(seed);
    outcome.summary.push(format!("seed={seed}"));
    Ok(outcome)
}

fn reconstruct_cmd(args: &ReconstructArgs, exec: Execution) -> Result<Outcome> {
    if args.h < 3 {
        return Err(usage("--h must be at least 3"));
    }
    let seed = args.seed.unwrap_or_else(fresh_seed);
    let c = args.c.unwrap_or(1.0 / (args.h as f64).ln());
    let params = PerronKernelParams::new(c, args.lambda, args.n, 1e-6)?;
    let table = batch_class_numbers_with(reduction_cutoff(args.h), args.lanes, exec)?;
    let model = RandomEulerModel::x(args.p_max);
    let r = pipeline::main_term_reconstruction(
        args.h,
        &params,
        &model,
        args.samples,
        seed,
        &table,
        exec,
    )?;
    if r.wide_window {
        eprintln!(
            "warning: e^(2λN) - 1 = {:.3} exceeds 1; the smoothing band is wider than the main term",
            (2.0 * args.lambda * f64::from(args.n)).exp_m1()
        );
    }
    let mut csv = Table::new(&["H", "reconstructed", "stderr", "direct", "ratio"])?;
    csv.row([
        r.h.to_string(),
        real(r.reconstructed),
        real(r.std_error),
        r.direct.to_string(),
        real(r.reconstructed / r.direct as f64),
    ])?;
    let mut outcome = Outcome::new(csv.into_bytes()?);
    outcome.seed = Some(seed);
    outcome.summary.push(format!(
        "seed={seed} X={} reconstructed={:.1}±{:.1} direct={} direct_upper={}",
        r.x, r.reconstructed, r.std_error, r.direct, r.direct_upper
    ));
    Ok(outcome)
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Sieve(a) => a.out.as_deref(),
        Command::Census(a) => a.out.as_deref(),
        Command::Verify(a) => a.out.as_deref(),
        Command::Moments(a) => a.out.as_deref(),
        Command::ModelMoments(a) => a.out.as_deref(),
        Command::Kernel(a) => a.out.as_deref(),
        Command::Sample(a) => a.out.as_deref(),
        Command::Reconstruct(a) => a.out.as_deref(),
        Command::Replay(_) => None,
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Sieve(_) => "sieve",
        Command::Census(_) => "census",
        Command::Verify(_) => "verify",
        Command::Moments(_) => "moments",
        Command::ModelMoments(_) => "model-moments",
        Command::Kernel(_) => "kernel",
        Command::Sample(_) => "sample",
        Command::Reconstruct(_) => "reconstruct",
        Command::Replay(_) => "replay",
    }
}

fn parameters(command: &Command) -> Result<BTreeMap<String, serde_json::Value>> {
    match serde_json::to_value(command)? {
        serde_json::Value::Object(map) => Ok(map.into_iter().collect()),
        other => bail!("unexpected parameter encoding {other}"),
    }
}

/// Runs one non-replay command and writes its outputs.
fn execute(cli: &Cli, argv: &[String]) -> Result<Option<RunManifest>> {
    let exec = execution(cli.sequential);
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Sieve(a) => sieve(a, exec)?,
        Command::Census(a) => census_cmd(a, exec)?,
        Command::Verify(a) => verify_cmd(a)?,
        Command::Moments(a) => moments_cmd(a, exec)?,
        Command::ModelMoments(a) => model_moments_cmd(a)?,
        Command::Kernel(a) => kernel_cmd(a, exec)?,
        Command::Sample(a) => sample_cmd(a, exec)?,
        Command::Reconstruct(a) => reconstruct_cmd(a, exec)?,
        Command::Replay(a) => {
            replay(a, cli.sequential)?;
            return Ok(None);
        }
    };
    let elapsed_ms = start.elapsed().as_millis() as u64;
    let Some(out) = out_path(&cli.command) else {
        use std::io::Write;
        std::io::stdout().write_all(&outcome.bytes)?;
        for line in &outcome.summary {
            eprintln!("{line}");
        }
        return Ok(None);
    };
    write_atomic(out, &outcome.bytes)?;
    let mut argv = argv.to_vec();
    let explicit_seed = argv
        .iter()
        .any(|a| a == "--seed" || a.starts_with("--seed="));
    if let (Some(seed), false) = (outcome.seed, explicit_seed) {
        argv.push("--seed".into());
        argv.push(seed.to_string());
    }
    let mut params = parameters(&cli.command)?;
    if let Some(seed) = outcome.seed {
        params.insert("seed".into(), seed.into());
    }
    params.insert("sequential".into(), cli.sequential.into());
    let manifest = RunManifest {
        command: command_name(&cli.command).into(),
        argv,
        parameters: params,
        seed: outcome.seed,
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        elapsed_ms,
        outputs: vec![OutputRecord {
            path: out.to_path_buf(),
            sha256: sha256_hex(&outcome.bytes),
            bytes: outcome.bytes.len() as u64,
        }],
    };
    manifest.write(&manifest_path(out))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    Ok(Some(manifest))
}

const LANE_COMMANDS: [&str; 5] = ["sieve", "census", "verify", "moments", "reconstruct"];

/// Replaces the value of `flag` in `argv`, appending it if absent.
fn set_flag(argv: &mut Vec<String>, flag: &str, value: String) {
    let prefix = format!("{flag}=");
    if let Some(i) = argv.iter().position(|a| a == flag) {
        if i + 1 < argv.len() {
            argv[i + 1] = value;
            return;
        }
        argv.truncate(i);
    } else if let Some(i) = argv.iter().position(|a| a.starts_with(&prefix)) {
        argv[i] = format!("{prefix}{value}");
        return;
    }
    argv.push(flag.into());
    argv.push(value);
}

fn replay(args: &ReplayArgs, sequential: bool) -> Result<()> {
    let manifest = RunManifest::read(&args.manifest)?;
    if manifest.command == "replay" {
        return Err(usage("cannot replay a replay"));
    }
    if manifest.artifact_version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            manifest.artifact_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let original = manifest
        .outputs
        .first()
        .context("manifest lists no outputs")?;
    let dir = tempfile::tempdir()?;
    let name = original
        .path
        .file_name()
        .context("output path has no file name")?;
    let mut argv = manifest.argv.clone();
    set_flag(
        &mut argv,
        "--out",
        dir.path().join(name).to_string_lossy().into_owned(),
    );
    if let Some(lanes) = args.lanes {
        if LANE_COMMANDS.contains(&manifest.command.as_str()) {
            set_flag(&mut argv, "--lanes", lanes.to_string());
        } else {
            eprintln!("note: {} has no lanes; --lanes ignored", manifest.command);
        }
    }
    if sequential && !argv.iter().any(|a| a == "--sequential") {
        argv.push("--sequential".into());
    }
    let cli =
        Cli::try_parse_from(std::iter::once("quadfield".to_string()).chain(argv.iter().cloned()))
            .map_err(|e| usage(format!("manifest arguments do not parse: {}", e.kind())))?;
    let rerun = execute(&cli, &argv)?.context("replayed command wrote no manifest")?;
    let mut mismatches = 0;
    for (old, new) in manifest.outputs.iter().zip(&rerun.outputs) {
        let same = old.sha256 == new.sha256;
        mismatches += usize::from(!same);
        println!(
            "replay: {} sha256 {} {}",
            old.path.display(),
            new.sha256,
            if same { "identical" } else { "DIFFERS" }
        );
    }
    if mismatches > 0 || manifest.outputs.len() != rerun.outputs.len() {
        bail!("replay produced different outputs");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<quadfield::Error>() {
            return match e {
                quadfield::Error::InvalidInput(_) | quadfield::Error::NotFundamental(_) => 2,
                quadfield::Error::Capacity { .. } => 3,
                quadfield::Error::NonConvergence { .. } => 4,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match execute(&cli, &argv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
