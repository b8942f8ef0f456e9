//! `dfe` — command-line front end for the fidelity estimators in
//! `dfe-core`.
//!
//! Subcommands:
//!
//! * `gen-state` — generate a random density matrix with a prescribed
//!   fidelity against a target and write it to a JSON state file;
//! * `estimate`  — run one estimator (tailored `shadow`, importance-sampled
//!   `baseline`, or `vanilla` shadows) on a state file;
//! * `bench`     — sweep a fidelity grid across a qubit range and write CSV
//!   records plus JSON summaries;
//! * `coeffs`    — print the Dicke support-pair coefficient table.
//!
//! Exit codes: 0 on success, 2 for command-line usage errors, 3 for semantic
//! errors (invalid targets, budgets, or states), 4 for file I/O failures.
//! All randomness derives from `--seed`, so outputs are byte-identical
//! across runs and thread counts.

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfe_core::baseline::{baseline_estimate, baseline_plan, vanilla_shadow_estimate};
use dfe_core::bench::{
    aggregate, aggregate_per_fidelity, run_bench, BenchConfig, Method,
    write_per_fidelity_csv, write_records_csv, write_summary_json,
};
use dfe_core::bits::parse_bitstring;
use dfe_core::io::{read_density, write_density, StateIoError};
use dfe_core::measurement::StateHandle;
use dfe_core::rng::sub_seed;
use dfe_core::serialize::f64_repr;
use dfe_core::shadow::{
    dicke_coefficients, estimate, plan_with_rule, ErrorBudget, SampleRule,
};
use dfe_core::states::{fidelity, random_state_with_fidelity, StateGenConfig, TargetState};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dfe",
    version,
    about = "Direct fidelity estimation for GHZ, W, and Dicke targets from local Pauli measurements"
)]
struct Cli {
    /// Worker threads for the sampling loops (default: one per CPU core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random state with a prescribed target fidelity.
    GenState(GenStateArgs),
    /// Estimate the fidelity of a stored state against a target.
    Estimate(EstimateArgs),
    /// Run the MSE benchmark sweep and write records + summaries.
    Bench(BenchArgs),
    /// Print the Dicke support-pair coefficients c_l and the constant S.
    Coeffs(CoeffsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TargetKind {
    Ghz,
    W,
    Dicke,
    Basis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Tailored two-arm protocol.
    Shadow,
    /// Importance-sampled Pauli estimation.
    Baseline,
    /// Vanilla classical shadows.
    Vanilla,
}

impl MethodArg {
    fn to_method(self) -> Method {
        match self {
            MethodArg::Shadow => Method::Shadow,
            MethodArg::Baseline => Method::Baseline,
            MethodArg::Vanilla => Method::Vanilla,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    /// Sample count from the exact estimator range (default).
    Tight,
    /// Sample count from the looser classical range bounds.
    Conservative,
}

impl RuleArg {
    fn to_rule(self) -> SampleRule {
        match self {
            RuleArg::Tight => SampleRule::Tight,
            RuleArg::Conservative => SampleRule::Conservative,
        }
    }

    fn name(self) -> &'static str {
        match self {
            RuleArg::Tight => "tight",
            RuleArg::Conservative => "conservative",
        }
    }
}

#[derive(Args)]
struct TargetArgs {
    /// Target family.
    #[arg(long, value_enum)]
    target: TargetKind,
    /// Qubit count.
    #[arg(long)]
    n: usize,
    /// Excitation count (required for dicke targets).
    #[arg(long)]
    k: Option<usize>,
    /// Basis bitstring such as 0110 (required for basis targets).
    #[arg(long)]
    b: Option<String>,
}

impl TargetArgs {
    fn build(&self) -> Result<TargetState, AppError> {
        build_target(self.target, self.n, self.k, self.b.as_deref())
    }
}

fn build_target(
    kind: TargetKind,
    n: usize,
    k: Option<usize>,
    b: Option<&str>,
) -> Result<TargetState, AppError> {
    let reject_extras = |what: &str| -> Result<(), AppError> {
        if k.is_some() {
            return Err(AppError::usage(format!("--k does not apply to {what} targets")));
        }
        if b.is_some() {
            return Err(AppError::usage(format!("--b does not apply to {what} targets")));
        }
        Ok(())
    };
    match kind {
        TargetKind::Ghz => {
            reject_extras("ghz")?;
            TargetState::ghz(n).map_err(AppError::semantic)
        }
        TargetKind::W => {
            reject_extras("w")?;
            TargetState::w(n).map_err(AppError::semantic)
        }
        TargetKind::Dicke => {
            if b.is_some() {
                return Err(AppError::usage("--b does not apply to dicke targets"));
            }
            let k = k.ok_or_else(|| AppError::usage("dicke targets require --k"))?;
            TargetState::dicke(n, k).map_err(AppError::semantic)
        }
        TargetKind::Basis => {
            if k.is_some() {
                return Err(AppError::usage("--k does not apply to basis targets"));
            }
            let bits = b.ok_or_else(|| AppError::usage("basis targets require --b"))?;
            let (index, len) = parse_bitstring(bits)
                .ok_or_else(|| AppError::semantic(format!("invalid bitstring {bits:?}")))?;
            if len != n {
                return Err(AppError::semantic(format!(
                    "bitstring {bits:?} has {len} bits but --n is {n}"
                )));
            }
            TargetState::basis(n, index).map_err(AppError::semantic)
        }
    }
}

#[derive(Args)]
struct GenStateArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// True fidelity of the generated state with the target, in [0, 1].
    #[arg(long)]
    fidelity: f64,
    /// Seed for the state generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the state file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Path to a state file produced by gen-state.
    #[arg(long)]
    state: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Additive error tolerance.
    #[arg(long)]
    epsilon: f64,
    /// Failure probability.
    #[arg(long)]
    delta: f64,
    /// Estimator to run.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Sample-count rule for the tailored estimator.
    #[arg(long, value_enum, default_value_t = RuleArg::Tight)]
    rule: RuleArg,
    /// Seed for the estimator's sampling streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the sample count (shadow and vanilla methods only).
    #[arg(long)]
    n_samples: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Target family.
    #[arg(long, value_enum)]
    target: TargetKind,
    /// Inclusive qubit range, e.g. 2..5 (runs n = 2, 3, 4, 5) or a single
    /// number.
    #[arg(long)]
    n_range: String,
    /// Excitation count for dicke targets (fixed across the range).
    #[arg(long)]
    k: Option<usize>,
    /// Basis bitstring for basis targets (single-n ranges only).
    #[arg(long)]
    b: Option<String>,
    /// Additive error tolerance handed to every estimator.
    #[arg(long)]
    epsilon: f64,
    /// Failure probability handed to every estimator.
    #[arg(long)]
    delta: f64,
    /// Trials per fidelity grid point.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Number of evenly spaced fidelity grid points in [0, 1]
    /// (default: the standard 101-point grid).
    #[arg(long)]
    grid_points: Option<usize>,
    /// Master seed for the whole sweep.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Methods to benchmark.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = [MethodArg::Shadow, MethodArg::Baseline, MethodArg::Vanilla]
    )]
    methods: Vec<MethodArg>,
    /// Output directory (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CoeffsArgs {
    /// Qubit count.
    #[arg(long)]
    n: usize,
    /// Excitation count.
    #[arg(long)]
    k: usize,
    /// Optional error tolerance; with --delta, also reports the tight
    /// sample count for this target.
    #[arg(long, requires = "delta")]
    epsilon: Option<f64>,
    /// Optional failure probability; with --epsilon, also reports the tight
    /// sample count for this target.
    #[arg(long, requires = "epsilon")]
    delta: Option<f64>,
}

enum AppError {
    /// Invalid flag combination (exit 2, like a parse error).
    Usage(String),
    /// Inputs parsed but are mutually inconsistent or out of range (exit 3).
    Semantic(String),
    /// Filesystem or serialization failure (exit 4).
    Io(String),
}

impl AppError {
    fn usage(e: impl std::fmt::Display) -> Self {
        AppError::Usage(e.to_string())
    }

    fn semantic(e: impl std::fmt::Display) -> Self {
        AppError::Semantic(e.to_string())
    }

    fn io(e: impl std::fmt::Display) -> Self {
        AppError::Io(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Semantic(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Semantic(m) | AppError::Io(m) => m,
        }
    }
}

fn from_state_io(e: StateIoError) -> AppError {
    match e {
        StateIoError::Io(_) | StateIoError::Parse(_) => AppError::io(e),
        StateIoError::EntryCount { .. } | StateIoError::Density(_) => AppError::semantic(e),
    }
}

/// JSON string literal (quoted + escaped).
fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) -> Result<(), AppError> {
    if threads == 0 {
        return Err(AppError::semantic("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(AppError::semantic)
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: usize) -> Result<(), AppError> {
    // The sequential build accepts the flag for interface compatibility;
    // results are identical regardless.
    if threads == 0 {
        return Err(AppError::semantic("--threads must be at least 1"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(t) = cli.threads {
        configure_threads(t)?;
    }
    match cli.command {
        Command::GenState(args) => gen_state(args),
        Command::Estimate(args) => estimate_cmd(args),
        Command::Bench(args) => bench_cmd(args),
        Command::Coeffs(args) => coeffs_cmd(args),
    }
}

fn gen_state(args: GenStateArgs) -> Result<(), AppError> {
    let target = args.target.build()?;
    let rho = random_state_with_fidelity(&StateGenConfig {
        target: target.clone(),
        fidelity: args.fidelity,
        seed: args.seed,
    })
    .map_err(AppError::semantic)?;
    let achieved = fidelity(&rho, &target).map_err(AppError::semantic)?;
    let file = File::create(&args.out)
        .map_err(|e| AppError::io(format!("{}: {e}", args.out.display())))?;
    let mut writer = BufWriter::new(file);
    write_density(&mut writer, &rho).map_err(AppError::io)?;
    writer.flush().map_err(AppError::io)?;
    println!(
        "{{\"written\": {}, \"target\": {}, \"n\": {}, \"requested_fidelity\": {}, \"achieved_fidelity\": {}, \"seed\": {}}}",
        json_str(&args.out.display().to_string()),
        json_str(&target.to_string()),
        target.n(),
        f64_repr(args.fidelity),
        f64_repr(achieved),
        args.seed
    );
    Ok(())
}

fn estimate_cmd(args: EstimateArgs) -> Result<(), AppError> {
    let target = args.target.build()?;
    let file = File::open(&args.state)
        .map_err(|e| AppError::io(format!("{}: {e}", args.state.display())))?;
    let rho = read_density(&mut BufReader::new(file)).map_err(from_state_io)?;
    let handle = StateHandle::new(rho);
    let budget = ErrorBudget::new(args.epsilon, args.delta).map_err(AppError::semantic)?;

    let (estimate_raw, clamped, measurements, plan_n) = match args.method {
        MethodArg::Shadow => {
            let mut plan =
                plan_with_rule(&target, budget, args.rule.to_rule()).map_err(AppError::semantic)?;
            if let Some(m) = args.n_samples {
                plan = plan.with_samples(m);
            }
            let r = estimate(&handle, &plan, args.seed).map_err(AppError::semantic)?;
            (r.estimate, r.clamped, r.samples_used as u64, plan.n_samples())
        }
        MethodArg::Baseline => {
            if args.n_samples.is_some() {
                return Err(AppError::usage(
                    "--n-samples applies to the shadow and vanilla methods only; \
                     the baseline sets its own per-label shot counts",
                ));
            }
            let plan = baseline_plan(&target, budget).map_err(AppError::semantic)?;
            let r = baseline_estimate(&handle, &plan, args.seed).map_err(AppError::semantic)?;
            (r.estimate, r.clamped, r.measurements_used, plan.labels())
        }
        MethodArg::Vanilla => {
            let count = match args.n_samples {
                Some(m) => m,
                // Without an explicit count, match the tailored tight plan.
                None => plan_with_rule(&target, budget, SampleRule::Tight)
                    .map_err(AppError::semantic)?
                    .n_samples(),
            };
            let r = vanilla_shadow_estimate(&handle, &target, count, args.seed)
                .map_err(AppError::semantic)?;
            (r.estimate, r.clamped, r.samples_used as u64, count)
        }
    };

    let method_name = match args.method {
        MethodArg::Shadow => "shadow",
        MethodArg::Baseline => "baseline",
        MethodArg::Vanilla => "vanilla",
    };
    println!(
        "{{\"target\": {}, \"n\": {}, \"method\": {}, \"rule\": {}, \"epsilon\": {}, \"delta\": {}, \"estimate\": {}, \"estimate_clamped\": {}, \"measurements\": {}, \"plan_n\": {}, \"seed\": {}}}",
        json_str(&target.to_string()),
        target.n(),
        json_str(method_name),
        json_str(args.rule.name()),
        f64_repr(args.epsilon),
        f64_repr(args.delta),
        f64_repr(estimate_raw),
        f64_repr(clamped),
        measurements,
        plan_n,
        args.seed
    );
    Ok(())
}

/// Parses an inclusive range "A..B" (or "A..=B", or a single "N").
fn parse_n_range(s: &str) -> Result<std::ops::RangeInclusive<usize>, AppError> {
    let bad = || AppError::semantic(format!("invalid qubit range {s:?}; expected N or A..B"));
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok(lo..=hi)
    } else {
        let n: usize = s.trim().parse().map_err(|_| bad())?;
        Ok(n..=n)
    }
}

fn bench_grid(points: Option<usize>) -> Result<Option<Vec<f64>>, AppError> {
    match points {
        None => Ok(None),
        Some(p) if p >= 2 => {
            Ok(Some((0..p).map(|i| i as f64 / (p - 1) as f64).collect()))
        }
        Some(_) => Err(AppError::semantic("--grid-points must be at least 2")),
    }
}

fn create_output(dir: &Path, name: &str) -> Result<BufWriter<File>, AppError> {
    let path = dir.join(name);
    let file =
        File::create(&path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn bench_cmd(args: BenchArgs) -> Result<(), AppError> {
    if args.trials == 0 {
        return Err(AppError::usage("--trials must be at least 1"));
    }
    let range = parse_n_range(&args.n_range)?;
    let budget = ErrorBudget::new(args.epsilon, args.delta).map_err(AppError::semantic)?;
    let grid = bench_grid(args.grid_points)?;
    let methods: Vec<Method> = {
        let mut seen = Vec::new();
        for m in args.methods.iter().map(|m| m.to_method()) {
            if !seen.contains(&m) {
                seen.push(m);
            }
        }
        seen
    };

    let mut records = Vec::new();
    for n in range {
        let target = build_target(args.target, n, args.k, args.b.as_deref())?;
        eprintln!(
            "bench: target={} n={} trials={} grid_points={} methods={} ...",
            target,
            n,
            args.trials,
            grid.as_ref().map_or(101, Vec::len),
            methods.len()
        );
        let mut config = BenchConfig::new(target, budget, args.trials, sub_seed(args.seed, &[n as u64]));
        if let Some(g) = &grid {
            config.fidelity_grid = g.clone();
        }
        config.methods = methods.clone();
        let mut batch = run_bench(&config).map_err(AppError::semantic)?;
        eprintln!("bench: n={n} done ({} records)", batch.len());
        records.append(&mut batch);
    }

    std::fs::create_dir_all(&args.out_dir).map_err(AppError::io)?;
    let mut records_out = create_output(&args.out_dir, "results.csv")?;
    write_records_csv(&mut records_out, &records).map_err(AppError::io)?;
    records_out.flush().map_err(AppError::io)?;

    let groups = aggregate(&records);
    let mut summary_out = create_output(&args.out_dir, "summary.json")?;
    write_summary_json(&mut summary_out, &groups).map_err(AppError::io)?;
    summary_out.flush().map_err(AppError::io)?;

    let per_fidelity = aggregate_per_fidelity(&records);
    let mut pf_out = create_output(&args.out_dir, "per_fidelity.csv")?;
    write_per_fidelity_csv(&mut pf_out, &per_fidelity).map_err(AppError::io)?;
    pf_out.flush().map_err(AppError::io)?;

    println!(
        "{{\"out_dir\": {}, \"records\": {}, \"groups\": {}}}",
        json_str(&args.out_dir.display().to_string()),
        records.len(),
        groups.len()
    );
    Ok(())
}

fn coeffs_cmd(args: CoeffsArgs) -> Result<(), AppError> {
    if args.k > args.n {
        return Err(AppError::semantic(format!(
            "excitation count {} exceeds qubit count {}",
            args.k, args.n
        )));
    }
    let coeffs = dicke_coefficients(args.n, args.k);
    let c_map = coeffs
        .iter()
        .map(|(l, c)| format!("\"{l}\": {c}"))
        .collect::<Vec<_>>()
        .join(", ");
    let plan_n_for = match (args.epsilon, args.delta) {
        (Some(epsilon), Some(delta)) => {
            let budget = ErrorBudget::new(epsilon, delta).map_err(AppError::semantic)?;
            let target = TargetState::dicke(args.n, args.k).map_err(AppError::semantic)?;
            let plan =
                plan_with_rule(&target, budget, SampleRule::Tight).map_err(AppError::semantic)?;
            format!(
                ", \"plan_n_for\": {{\"epsilon\": {}, \"delta\": {}, \"plan_n\": {}}}",
                f64_repr(epsilon),
                f64_repr(delta),
                plan.n_samples()
            )
        }
        _ => String::new(),
    };
    println!(
        "{{\"n\": {}, \"k\": {}, \"support_size\": {}, \"S\": {}, \"c\": {{{}}}{}}}",
        coeffs.n(),
        coeffs.k(),
        coeffs.support_size(),
        f64_repr(coeffs.s()),
        c_map,
        plan_n_for
    );
    Ok(())
}
