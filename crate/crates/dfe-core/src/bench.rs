//! Head-to-head benchmark harness: mean-squared error of the three
//! estimators at matched measurement budgets.
//!
//! For every point on a true-fidelity grid and every trial, the harness
//! generates a fresh random state of that exact fidelity (shared by all
//! methods via a method-independent derived seed), runs the
//! importance-sampled reference estimator first to learn how many
//! measurements it consumed, and then gives the tailored and vanilla
//! estimators exactly that many measurements. Per-record squared errors are
//! aggregated into per-(n, method) MSE figures with normal-approximation
//! 95% confidence intervals, plus a per-fidelity breakdown.
//!
//! Everything is deterministic in the master seed. Output records serialize
//! to CSV with round-trip-exact floats; summaries serialize to JSON.

use crate::baseline::{self, BaselineError, BaselinePlan};
use crate::measurement::StateHandle;
use crate::rng::{domain, sub_seed};
use crate::serialize::f64_repr;
use crate::shadow::{self, ErrorBudget, EstimateError, PlanError, ProtocolPlan};
use crate::states::{random_state_with_fidelity, StateError, StateGenConfig, TargetState};
use std::io::{self, Write};
use thiserror::Error;

/// Estimation method under benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Tailored two-arm protocol ([`crate::shadow`]).
    Shadow,
    /// Importance-sampled Pauli estimation ([`crate::baseline`]).
    Baseline,
    /// Vanilla classical shadows.
    Vanilla,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Shadow, Method::Baseline, Method::Vanilla];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Shadow => "shadow",
            Method::Baseline => "baseline",
            Method::Vanilla => "vanilla",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("fidelity grid must be non-empty with every value in [0, 1]")]
    BadGrid,
    #[error("trial count must be positive")]
    NoTrials,
    #[error("method list must be non-empty")]
    NoMethods,
}

/// One benchmark run: a target, an accuracy budget (which fixes the
/// reference estimator's measurement consumption), a grid of true
/// fidelities, and a number of independent trials per grid point.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub target: TargetState,
    pub budget: ErrorBudget,
    pub fidelity_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl BenchConfig {
    /// All three methods on the default 0.00..1.00 grid.
    pub fn new(target: TargetState, budget: ErrorBudget, trials: usize, seed: u64) -> Self {
        BenchConfig {
            target,
            budget,
            fidelity_grid: default_fidelity_grid(),
            trials,
            seed,
            methods: Method::ALL.to_vec(),
        }
    }
}

/// The standard benchmark grid: 0.00, 0.01, …, 1.00 (101 points).
pub fn default_fidelity_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// One estimator evaluation on one generated state.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub target: TargetState,
    pub true_fidelity: f64,
    pub method: Method,
    /// Single-shot measurements this evaluation consumed.
    pub measurements: u64,
    /// Raw (unclamped) fidelity estimate.
    pub estimate: f64,
    /// (estimate − true_fidelity)².
    pub sq_error: f64,
    /// Seed of the generated state (shared across methods of one trial).
    pub seed: u64,
}

fn validated(config: &BenchConfig) -> Result<(), BenchError> {
    if config.fidelity_grid.is_empty()
        || config.fidelity_grid.iter().any(|f| !(0.0..=1.0).contains(f))
    {
        return Err(BenchError::BadGrid);
    }
    if config.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    if config.methods.is_empty() {
        return Err(BenchError::NoMethods);
    }
    Ok(())
}

/// The plans a run needs, built once up front.
struct Plans {
    shadow: Option<ProtocolPlan>,
    baseline: Option<BaselinePlan>,
}

fn build_plans(config: &BenchConfig) -> Result<Plans, BenchError> {
    // The tailored plan also provides the fallback budget for the vanilla
    // method when the reference estimator is not in the method list.
    let needs_shadow = config.methods.contains(&Method::Shadow)
        || (config.methods.contains(&Method::Vanilla)
            && !config.methods.contains(&Method::Baseline));
    let shadow = if needs_shadow {
        Some(shadow::plan(&config.target, config.budget)?)
    } else {
        None
    };
    let baseline = if config.methods.contains(&Method::Baseline) {
        Some(baseline::baseline_plan(&config.target, config.budget)?)
    } else {
        None
    };
    Ok(Plans { shadow, baseline })
}

/// Runs the full grid × trials × methods sweep. Deterministic in
/// `config.seed`; the per-trial state is identical for every method.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    validated(config)?;
    let plans = build_plans(config)?;
    let mut records =
        Vec::with_capacity(config.fidelity_grid.len() * config.trials * config.methods.len());
    for (g, &true_fidelity) in config.fidelity_grid.iter().enumerate() {
        for t in 0..config.trials {
            let state_seed = sub_seed(config.seed, &[domain::BENCH, 0, g as u64, t as u64]);
            let rho = random_state_with_fidelity(&StateGenConfig {
                target: config.target.clone(),
                fidelity: true_fidelity,
                seed: state_seed,
            })?;
            let handle = StateHandle::new(rho);

            // The reference estimator runs first; its consumption sets the
            // matched budget for the other methods.
            let mut matched: Option<u64> = None;
            let mut push = |method: Method, estimate: f64, measurements: u64| {
                let err = estimate - true_fidelity;
                records.push(BenchRecord {
                    target: config.target.clone(),
                    true_fidelity,
                    method,
                    measurements,
                    estimate,
                    sq_error: err * err,
                    seed: state_seed,
                });
            };

            if let Some(bplan) = &plans.baseline {
                let seed = sub_seed(config.seed, &[domain::BENCH, 1, g as u64, t as u64]);
                let r = baseline::baseline_estimate(&handle, bplan, seed)?;
                matched = Some(r.measurements_used);
                if config.methods.contains(&Method::Baseline) {
                    push(Method::Baseline, r.estimate, r.measurements_used);
                }
            }
            let matched_budget = |plans: &Plans| -> usize {
                matched
                    .map(|m| m as usize)
                    .unwrap_or_else(|| plans.shadow.as_ref().map(|p| p.n_samples()).unwrap_or(1))
            };

            if config.methods.contains(&Method::Shadow) {
                let plan = plans
                    .shadow
                    .as_ref()
                    .expect("shadow plan built when the method is requested")
                    .with_samples(matched_budget(&plans));
                let seed = sub_seed(config.seed, &[domain::BENCH, 2, g as u64, t as u64]);
                let r = shadow::estimate(&handle, &plan, seed)?;
                push(Method::Shadow, r.estimate, r.samples_used as u64);
            }

            if config.methods.contains(&Method::Vanilla) {
                let seed = sub_seed(config.seed, &[domain::BENCH, 3, g as u64, t as u64]);
                let r = baseline::vanilla_shadow_estimate(
                    &handle,
                    &config.target,
                    matched_budget(&plans),
                    seed,
                )?;
                push(Method::Vanilla, r.estimate, r.samples_used as u64);
            }
        }
    }
    Ok(records)
}

/// Aggregate statistics for one (qubit count, method) group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStats {
    pub target: String,
    pub n: usize,
    pub method: Method,
    pub records: usize,
    /// Mean squared error over the group.
    pub mse: f64,
    /// 1.96 · (sample std dev of squared errors) / √records.
    pub ci95: f64,
    pub mean_measurements: f64,
}

fn mean_and_ci(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let count = values.clone().count();
    if count == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = values.clone().sum::<f64>() / count as f64;
    if count < 2 {
        return (mean, 0.0, count);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64;
    (mean, 1.96 * (var / count as f64).sqrt(), count)
}

/// Groups records by (target kind, n, method), preserving first-appearance
/// order, and computes MSE with a 95% confidence half-width.
pub fn aggregate(records: &[BenchRecord]) -> Vec<GroupStats> {
    let mut keys: Vec<(String, usize, Method)> = Vec::new();
    for r in records {
        let key = (r.target.to_string(), r.target.n(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(target, n, method)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| {
                    r.target.to_string() == *target && r.target.n() == *n && r.method == *method
                })
                .collect();
            let (mse, ci95, count) = mean_and_ci(group.iter().map(|r| r.sq_error));
            let mean_measurements =
                group.iter().map(|r| r.measurements as f64).sum::<f64>() / count as f64;
            GroupStats {
                target: target.clone(),
                n: *n,
                method: *method,
                records: count,
                mse,
                ci95,
                mean_measurements,
            }
        })
        .collect()
}

/// Per-fidelity-point statistics for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityStats {
    pub target: String,
    pub n: usize,
    /// Excitation count for Dicke targets, `None` otherwise.
    pub k: Option<usize>,
    pub method: Method,
    pub true_fidelity: f64,
    pub trials: usize,
    pub mse: f64,
    pub ci95: f64,
}

/// Groups records by (target kind, n, method, fidelity point) in
/// first-appearance order.
pub fn aggregate_per_fidelity(records: &[BenchRecord]) -> Vec<FidelityStats> {
    let mut keys: Vec<(String, usize, Option<usize>, Method, u64)> = Vec::new();
    for r in records {
        let key = (
            r.target.to_string(),
            r.target.n(),
            r.target.k(),
            r.method,
            r.true_fidelity.to_bits(),
        );
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(target, n, k, method, fbits)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| {
                    r.target.to_string() == *target
                        && r.target.n() == *n
                        && r.target.k() == *k
                        && r.method == *method
                        && r.true_fidelity.to_bits() == *fbits
                })
                .collect();
            let (mse, ci95, count) = mean_and_ci(group.iter().map(|r| r.sq_error));
            FidelityStats {
                target: target.clone(),
                n: *n,
                k: *k,
                method: *method,
                true_fidelity: f64::from_bits(*fbits),
                trials: count,
                mse,
                ci95,
            }
        })
        .collect()
}

/// Header line of the record CSV.
pub const RECORD_CSV_HEADER: &str =
    "target,n,k,true_fidelity,method,measurements,estimate,sq_error,seed";

fn k_column(target: &TargetState) -> String {
    target.k().map(|k| k.to_string()).unwrap_or_default()
}

/// Writes the full record table as CSV with round-trip-exact floats. The
/// `k` column is empty except for Dicke targets.
pub fn write_records_csv(out: &mut impl Write, records: &[BenchRecord]) -> io::Result<()> {
    writeln!(out, "{RECORD_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.target,
            r.target.n(),
            k_column(&r.target),
            f64_repr(r.true_fidelity),
            r.method,
            r.measurements,
            f64_repr(r.estimate),
            f64_repr(r.sq_error),
            r.seed
        )?;
    }
    Ok(())
}

/// Writes the per-(n, method) summary as JSON:
/// `{"groups": [{"target": …, "n": …, "method": …, "records": …, "mse": …,
/// "ci95": …, "mean_measurements": …}]}`.
pub fn write_summary_json(out: &mut impl Write, groups: &[GroupStats]) -> io::Result<()> {
    let value = serde_json::json!({
        "groups": groups
            .iter()
            .map(|g| {
                serde_json::json!({
                    "target": g.target,
                    "n": g.n,
                    "method": g.method.name(),
                    "records": g.records,
                    "mse": g.mse,
                    "ci95": g.ci95,
                    "mean_measurements": g.mean_measurements,
                })
            })
            .collect::<Vec<_>>(),
    });
    serde_json::to_writer_pretty(&mut *out, &value).map_err(io::Error::other)?;
    writeln!(out)
}

/// Header line of the per-fidelity CSV.
pub const FIDELITY_CSV_HEADER: &str = "target,n,k,method,true_fidelity,trials,mse,ci95";

/// Writes the per-fidelity MSE breakdown as CSV.
pub fn write_per_fidelity_csv(out: &mut impl Write, stats: &[FidelityStats]) -> io::Result<()> {
    writeln!(out, "{FIDELITY_CSV_HEADER}")?;
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.target,
            s.n,
            s.k.map(|k| k.to_string()).unwrap_or_default(),
            s.method,
            f64_repr(s.true_fidelity),
            s.trials,
            f64_repr(s.mse),
            f64_repr(s.ci95)
        )?;
    }
    Ok(())
}
