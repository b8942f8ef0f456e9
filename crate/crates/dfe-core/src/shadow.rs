//! Target-tailored fidelity estimators built on local Pauli measurements.
//!
//! The fidelity tr(ρσ) with a pure target σ splits into a diagonal part
//! (estimated from all-Z measurements) and off-diagonal parts (estimated
//! from settings restricted to the target's support pairs). Each supported
//! target comes with a small set of *arms*: an arm is picked at random per
//! sample, one measurement is performed under an arm-specific setting, and
//! a bounded value is recorded whose arm-weighted expectation plus a fixed
//! offset equals the fidelity exactly. Hoeffding's inequality on the value
//! range then dictates how many samples achieve a requested (ε, δ) budget.
//!
//! Supported targets and their estimator ranges:
//!
//! * GHZ: values in ±3/4; off-diagonal settings are uniform over the even
//!   HS†-count strings of {H, HS†}ⁿ.
//! * W: values in ±(n²−n+1)/2n; off-diagonal settings act on one qubit pair
//!   with a shared X/Y basis.
//! * Dicke(n, k): values in ±S/C(n,k) with S = 1/2 + Σ_l c_l, where c_l
//!   counts unordered weight-k support pairs overlapping in l positions;
//!   one arm per overlap l. Dicke(n, 1) reproduces the W protocol draw for
//!   draw, and k = 0 or k = n degenerate to a basis-state estimator.
//! * Computational basis states: plain outcome counting.
//!
//! All sampling goes through explicit ChaCha streams, so estimates are
//! bit-reproducible for a given seed regardless of thread count.

use crate::bits::{binomial, bit, qubit_mask, weight};
use crate::linalg::{local_trace_element, LocalUnitary};
use crate::measurement::{MeasurementError, MeasurementSetting, Outcome, StateHandle};
use crate::parallel;
use crate::rng::domain;
use crate::states::TargetState;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Mutex;
use thiserror::Error;

/// Requested estimation accuracy: additive error `epsilon` with failure
/// probability at most `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget {
    epsilon: f64,
    delta: f64,
}

impl ErrorBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, PlanError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(PlanError::BadEpsilon { value: epsilon });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PlanError::BadDelta { value: delta });
        }
        Ok(ErrorBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("epsilon must be positive and finite, got {value}")]
    BadEpsilon { value: f64 },
    #[error("delta must lie strictly between 0 and 1, got {value}")]
    BadDelta { value: f64 },
    #[error("the {protocol} protocol needs at least 2 qubits; use a basis target for n = 1")]
    TooFewQubits { protocol: &'static str },
}

/// Which sample-count formula a plan uses.
///
/// Both are Hoeffding counts; they differ in the value range plugged in.
/// `Tight` uses the exact estimator range and is the default. `Conservative`
/// uses the looser classical bounds (|F̂| ≤ 1 for GHZ, ≤ n−1 for W) and is
/// kept selectable for comparison; for Dicke and basis targets the two rules
/// coincide.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SampleRule {
    #[default]
    Tight,
    Conservative,
}

/// Which measurement arm produced a sample.
#[derive(Clone, Copy, Debug, Hash, PartialEq, Eq)]
pub enum Arm {
    /// All-Z measurement estimating the diagonal part.
    Diagonal,
    /// Support-pair measurement estimating the off-diagonal part. For Dicke
    /// targets `overlap` is the support-overlap count l of the sampled pair;
    /// GHZ and W have a single undifferentiated off-diagonal arm (`None`).
    OffDiagonal { overlap: Option<usize> },
}

/// One estimator draw: the recorded value plus its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSample {
    pub value: f64,
    pub arm: Arm,
    pub setting: MeasurementSetting,
    pub outcome: Outcome,
}

/// Unordered weight-k support-pair counts for a Dicke target, bucketed by
/// overlap: `c(l)` is the number of unordered pairs {i, j} of weight-k
/// bitstrings whose supports intersect in exactly l positions, for l in
/// [max(0, 2k−n), k−1]. `s() = 1/2 + Σ_l c(l)` normalizes the arm weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeCoefficients {
    n: usize,
    k: usize,
    l_min: usize,
    c: Vec<u64>,
    binom: u64,
    s: f64,
}

/// Counts the support pairs for an (n, k) Dicke target in closed form:
/// c_l = C(n, 2k−l) · C(2k−l, l) · C(2k−2l, k−l)/2 — choose the union,
/// the overlap inside it, then split the symmetric difference evenly (each
/// unordered pair counted once). The range is empty for k = 0 and k = n.
pub fn dicke_coefficients(n: usize, k: usize) -> DickeCoefficients {
    assert!(k <= n, "excitation count {k} exceeds qubit count {n}");
    let l_min = (2 * k).saturating_sub(n);
    let mut c = Vec::new();
    if k >= 1 {
        for l in l_min..k {
            let count = binomial(n, 2 * k - l)
                * binomial(2 * k - l, l)
                * binomial(2 * k - 2 * l - 1, k - l - 1);
            c.push(count);
        }
    }
    let total: u64 = c.iter().sum();
    DickeCoefficients {
        n,
        k,
        l_min,
        c,
        binom: binomial(n, k),
        s: 0.5 + total as f64,
    }
}

impl DickeCoefficients {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Pair count for overlap `l`; zero outside the valid range.
    pub fn c(&self, l: usize) -> u64 {
        if l < self.l_min {
            return 0;
        }
        self.c.get(l - self.l_min).copied().unwrap_or(0)
    }

    /// Valid overlaps in ascending order with their pair counts.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.c.iter().enumerate().map(|(i, &c)| (self.l_min + i, c))
    }

    /// Arm normalization constant 1/2 + Σ_l c_l (exact in f64 at this scale).
    pub fn s(&self) -> f64 {
        self.s
    }

    /// C(n, k), the target's support size.
    pub fn support_size(&self) -> u64 {
        self.binom
    }

    /// True when there are no off-diagonal pairs (k = 0 or k = n): the
    /// protocol reduces to counting the single weight-k ∈ {0, n} outcome.
    pub fn is_degenerate(&self) -> bool {
        self.c.is_empty()
    }

    /// Magnitude of every nonzero estimator value, S/C(n, k). Also the
    /// estimator range bound.
    pub fn value_magnitude(&self) -> f64 {
        self.s / self.binom as f64
    }
}

/// Everything needed to run one protocol: target, sample count, arm
/// probabilities, the offset added to the sample mean, and the bound every
/// estimator value respects.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolPlan {
    target: TargetState,
    budget: ErrorBudget,
    rule: SampleRule,
    n_samples: usize,
    arms: Vec<(f64, Arm)>,
    offset: f64,
    value_bound: f64,
    dicke: Option<DickeCoefficients>,
}

impl ProtocolPlan {
    pub fn target(&self) -> &TargetState {
        &self.target
    }

    pub fn budget(&self) -> &ErrorBudget {
        &self.budget
    }

    pub fn rule(&self) -> SampleRule {
        self.rule
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Arm probabilities with descriptors; probabilities sum to 1.
    pub fn arms(&self) -> &[(f64, Arm)] {
        &self.arms
    }

    /// Constant added to the mean of the sampled values.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Hard bound on |value| for every sample this plan can produce.
    pub fn value_bound(&self) -> f64 {
        self.value_bound
    }

    /// Pair-count table for Dicke targets, `None` otherwise.
    pub fn dicke(&self) -> Option<&DickeCoefficients> {
        self.dicke.as_ref()
    }

    /// Same plan with the sample count overridden (used by the benchmark
    /// harness to match another method's measurement budget).
    pub fn with_samples(&self, n_samples: usize) -> ProtocolPlan {
        ProtocolPlan { n_samples: n_samples.max(1), ..self.clone() }
    }
}

/// Hoeffding sample count for a mean of i.i.d. values spanning a range of
/// `width`: ⌈ln(2/δ) · width² / 2ε²⌉, at least 1.
fn hoeffding_count(width: f64, budget: &ErrorBudget) -> usize {
    let raw = (2.0 / budget.delta).ln() * width * width
        / (2.0 * budget.epsilon * budget.epsilon);
    (raw.ceil() as usize).max(1)
}

/// Builds the sampling plan for `target` under the default `Tight` rule.
pub fn plan(target: &TargetState, budget: ErrorBudget) -> Result<ProtocolPlan, PlanError> {
    plan_with_rule(target, budget, SampleRule::Tight)
}

/// Builds the sampling plan for `target` with an explicit count rule.
pub fn plan_with_rule(
    target: &TargetState,
    budget: ErrorBudget,
    rule: SampleRule,
) -> Result<ProtocolPlan, PlanError> {
    let (width, arms, offset, value_bound, dicke) = match *target {
        TargetState::Ghz { n } => {
            if n < 2 {
                return Err(PlanError::TooFewQubits { protocol: "GHZ" });
            }
            let width = match rule {
                SampleRule::Tight => 1.5,
                SampleRule::Conservative => 2.0,
            };
            let arms = vec![
                (1.0 / 3.0, Arm::Diagonal),
                (2.0 / 3.0, Arm::OffDiagonal { overlap: None }),
            ];
            (width, arms, 0.25, 0.75, None)
        }
        TargetState::W { n } => {
            if n < 2 {
                return Err(PlanError::TooFewQubits { protocol: "W" });
            }
            let c = (n * n - n + 1) as f64;
            let width = match rule {
                SampleRule::Tight => c / n as f64,
                SampleRule::Conservative => 2.0 * (n - 1) as f64,
            };
            let arms = vec![
                (1.0 / c, Arm::Diagonal),
                ((n * (n - 1)) as f64 / c, Arm::OffDiagonal { overlap: None }),
            ];
            (width, arms, 0.5 / n as f64, c / (2.0 * n as f64), None)
        }
        TargetState::Dicke { n, k } => {
            let coeffs = dicke_coefficients(n, k);
            // 2S = 1 + 2Σc_l is an exact integer; dividing it by C(n, k)
            // makes the width (and for k = 1 the whole plan) agree bit for
            // bit with the W expressions.
            let two_s = 1 + 2 * (coeffs.s - 0.5) as u64;
            let width = two_s as f64 / coeffs.binom as f64;
            let bound = coeffs.value_magnitude();
            let mut arms = vec![(1.0 / two_s as f64, Arm::Diagonal)];
            if !coeffs.is_degenerate() {
                for (l, c_l) in coeffs.iter() {
                    arms.push((c_l as f64 / coeffs.s, Arm::OffDiagonal { overlap: Some(l) }));
                }
            } else {
                arms[0].0 = 1.0;
            }
            let offset = 0.5 / coeffs.binom as f64;
            (width, arms, offset, bound, Some(coeffs))
        }
        TargetState::Basis { .. } => {
            let arms = vec![(1.0, Arm::Diagonal)];
            (1.0, arms, 0.0, 1.0, None)
        }
    };
    Ok(ProtocolPlan {
        target: target.clone(),
        budget,
        rule,
        n_samples: hoeffding_count(width, &budget),
        arms,
        offset,
        value_bound,
        dicke,
    })
}

/// Value recorded by the GHZ all-Z arm: +3/4 when the outcome is all zeros
/// or all ones, −3/4 otherwise.
pub fn ghz_diagonal_value(n: usize, outcome: Outcome) -> f64 {
    let all_ones = (1usize << n) - 1;
    if outcome == 0 || outcome == all_ones {
        0.75
    } else {
        -0.75
    }
}

/// Value recorded by the GHZ off-diagonal arm: ±3/4 with sign
/// (−1)^(y/2 + |b̂|), where y is the (even) number of HS† factors in the
/// setting and |b̂| the outcome weight.
pub fn ghz_offdiagonal_value(setting: &MeasurementSetting, outcome: Outcome) -> f64 {
    let y = setting
        .unitaries()
        .iter()
        .filter(|&&u| u == LocalUnitary::HadamardSdg)
        .count();
    debug_assert!(
        y % 2 == 0 && !setting.unitaries().contains(&LocalUnitary::Identity),
        "GHZ off-diagonal settings use X/Y everywhere with an even Y count"
    );
    if (y / 2 + weight(outcome) as usize).is_multiple_of(2) {
        0.75
    } else {
        -0.75
    }
}

/// Value recorded by the W all-Z arm: +(n²−n+1)/2n when the outcome has
/// weight exactly 1, −(n²−n+1)/2n otherwise.
pub fn w_diagonal_value(n: usize, outcome: Outcome) -> f64 {
    let magnitude = (n * n - n + 1) as f64 / (2.0 * n as f64);
    if weight(outcome) == 1 {
        magnitude
    } else {
        -magnitude
    }
}

/// Value recorded by the W off-diagonal arm for the qubit pair (i, j):
/// zero unless every off-pair outcome bit is 0, otherwise ±(n²−n+1)/2n
/// with the sign set by whether the two pair bits agree. Independent of the
/// shared X/Y basis choice.
pub fn w_offdiagonal_value(n: usize, i: usize, j: usize, outcome: Outcome) -> f64 {
    debug_assert!(i != j && i < n && j < n);
    if outcome & !(qubit_mask(i, n) | qubit_mask(j, n)) != 0 {
        return 0.0;
    }
    let magnitude = (n * n - n + 1) as f64 / (2.0 * n as f64);
    if bit(outcome, i, n) == bit(outcome, j, n) {
        magnitude
    } else {
        -magnitude
    }
}

/// Value recorded by the Dicke all-Z arm: +S/C(n,k) when the outcome
/// weight equals k, −S/C(n,k) otherwise.
pub fn dicke_diagonal_value(coeffs: &DickeCoefficients, outcome: Outcome) -> f64 {
    let magnitude = coeffs.value_magnitude();
    if weight(outcome) as usize == coeffs.k() {
        magnitude
    } else {
        -magnitude
    }
}

/// Value recorded by a Dicke off-diagonal arm for the support pair
/// (support_i, support_j), given the drawn setting and outcome.
///
/// Zero unless all shared-support qubits read 1 and all qubits outside the
/// union read 0; otherwise ±S/C(n,k) with sign (−1)^x, where x counts half
/// the HS† factors over the symmetric difference, plus the i-only qubits
/// whose (basis, outcome) is (X, 1) or (Y, 0), plus the j-only qubits that
/// read 1. The sign is invariant under swapping i and j because the HS†
/// count over the symmetric difference is even.
pub fn dicke_offdiagonal_value(
    coeffs: &DickeCoefficients,
    support_i: usize,
    support_j: usize,
    setting: &MeasurementSetting,
    outcome: Outcome,
) -> f64 {
    let n = coeffs.n();
    debug_assert_eq!(setting.n(), n);
    let inter = support_i & support_j;
    let union = support_i | support_j;
    let full = (1usize << n) - 1;
    if outcome & inter != inter || outcome & (full & !union) != 0 {
        return 0.0;
    }
    let mut y_count = 0usize;
    let mut flips = 0usize;
    for q in 0..n {
        let m = qubit_mask(q, n);
        if union & m == 0 || inter & m != 0 {
            debug_assert_eq!(setting.unitary(q), LocalUnitary::Identity);
            continue;
        }
        let u = setting.unitary(q);
        debug_assert_ne!(u, LocalUnitary::Identity);
        let outcome_bit = outcome & m != 0;
        if u == LocalUnitary::HadamardSdg {
            y_count += 1;
        }
        if support_i & m != 0 {
            if (u == LocalUnitary::Hadamard) == outcome_bit {
                flips += 1;
            }
        } else if outcome_bit {
            flips += 1;
        }
    }
    debug_assert!(y_count.is_multiple_of(2), "parity completion guarantees an even HS† count");
    let magnitude = coeffs.value_magnitude();
    if (y_count / 2 + flips).is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

/// Estimator for the fidelity with the basis state of index `b`: 1 when the
/// all-Z outcome equals `b`, else 0.
pub fn basis_dfe_estimator(b: usize, outcome: Outcome) -> f64 {
    if outcome == b {
        1.0
    } else {
        0.0
    }
}

/// Uniform draw from {H, HS†}.
fn draw_xy(rng: &mut ChaCha8Rng) -> LocalUnitary {
    if rng.random_range(0..2u32) == 0 {
        LocalUnitary::Hadamard
    } else {
        LocalUnitary::HadamardSdg
    }
}

/// Draws `count` distinct values from `pool` without replacement, one
/// uniform index draw per value (swap-remove keeps it O(1) per draw). The
/// draw order is part of the reproducibility contract.
fn draw_from_pool(pool: &mut Vec<usize>, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..count)
        .map(|_| {
            let idx = rng.random_range(0..pool.len());
            pool.swap_remove(idx)
        })
        .collect()
}

/// Picks an arm by scanning cumulative probabilities with a single uniform
/// draw already taken (`x`); the last arm absorbs any rounding remainder.
fn select_arm(arms: &[(f64, Arm)], x: f64) -> Arm {
    let mut acc = 0.0;
    for &(p, arm) in arms {
        acc += p;
        if x < acc {
            return arm;
        }
    }
    arms.last().expect("plans always carry at least one arm").1
}

/// Builds a setting that is `u` on the listed qubits and Z elsewhere.
fn setting_on(n: usize, assignments: &[(usize, LocalUnitary)]) -> MeasurementSetting {
    let mut units = vec![LocalUnitary::Identity; n];
    for &(q, u) in assignments {
        units[q] = u;
    }
    MeasurementSetting::new(units)
}

fn ghz_sample(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    rng: &mut ChaCha8Rng,
) -> Result<EstimatorSample, MeasurementError> {
    let n = handle.n();
    let x: f64 = rng.random();
    match select_arm(&plan.arms, x) {
        Arm::Diagonal => {
            let setting = MeasurementSetting::all_z(n);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: ghz_diagonal_value(n, outcome),
                arm: Arm::Diagonal,
                setting,
                outcome,
            })
        }
        arm => {
            // The first n−1 factors are i.i.d. X/Y; the last is fixed so the
            // HS† count comes out even, which induces the uniform
            // distribution over all even-count X/Y strings.
            let mut units = Vec::with_capacity(n);
            let mut y_count = 0usize;
            for _ in 0..n - 1 {
                let u = draw_xy(rng);
                if u == LocalUnitary::HadamardSdg {
                    y_count += 1;
                }
                units.push(u);
            }
            units.push(if y_count % 2 == 1 {
                LocalUnitary::HadamardSdg
            } else {
                LocalUnitary::Hadamard
            });
            let setting = MeasurementSetting::new(units);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: ghz_offdiagonal_value(&setting, outcome),
                arm,
                setting,
                outcome,
            })
        }
    }
}

fn w_sample(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    rng: &mut ChaCha8Rng,
) -> Result<EstimatorSample, MeasurementError> {
    let n = handle.n();
    let x: f64 = rng.random();
    match select_arm(&plan.arms, x) {
        Arm::Diagonal => {
            let setting = MeasurementSetting::all_z(n);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: w_diagonal_value(n, outcome),
                arm: Arm::Diagonal,
                setting,
                outcome,
            })
        }
        arm => {
            let mut pool: Vec<usize> = (0..n).collect();
            let pair = draw_from_pool(&mut pool, 2, rng);
            let (i, j) = (pair[0], pair[1]);
            let u = draw_xy(rng);
            let setting = setting_on(n, &[(i, u), (j, u)]);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: w_offdiagonal_value(n, i, j, outcome),
                arm,
                setting,
                outcome,
            })
        }
    }
}

fn dicke_sample(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    rng: &mut ChaCha8Rng,
) -> Result<EstimatorSample, MeasurementError> {
    let coeffs = plan.dicke.as_ref().expect("Dicke plans carry coefficients");
    let n = handle.n();
    let k = coeffs.k();
    let x: f64 = rng.random();
    match select_arm(&plan.arms, x) {
        Arm::Diagonal => {
            let setting = MeasurementSetting::all_z(n);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: dicke_diagonal_value(coeffs, outcome),
                arm: Arm::Diagonal,
                setting,
                outcome,
            })
        }
        arm @ Arm::OffDiagonal { overlap: Some(l) } => {
            // Draw an unordered support pair with overlap l constructively:
            // the shared l qubits, then the two disjoint (k−l)-qubit
            // remainders. Each unordered pair arises from exactly two draw
            // orders, so the pair distribution is uniform.
            let mut pool: Vec<usize> = (0..n).collect();
            let shared = draw_from_pool(&mut pool, l, rng);
            let only_i = draw_from_pool(&mut pool, k - l, rng);
            let only_j = draw_from_pool(&mut pool, k - l, rng);
            let shared_mask: usize = shared.iter().map(|&q| qubit_mask(q, n)).sum();
            let mask_i: usize =
                shared_mask + only_i.iter().map(|&q| qubit_mask(q, n)).sum::<usize>();
            let mask_j: usize =
                shared_mask + only_j.iter().map(|&q| qubit_mask(q, n)).sum::<usize>();

            // X/Y factors on the symmetric difference: free draws on all its
            // qubits except the largest, which completes the HS† count to
            // even parity.
            let mut diff: Vec<usize> =
                only_i.iter().chain(only_j.iter()).copied().collect();
            diff.sort_unstable();
            let mut units = vec![LocalUnitary::Identity; n];
            let mut y_count = 0usize;
            let (last, free) = diff.split_last().expect("l < k keeps the difference non-empty");
            for &q in free {
                let u = draw_xy(rng);
                if u == LocalUnitary::HadamardSdg {
                    y_count += 1;
                }
                units[q] = u;
            }
            units[*last] = if y_count % 2 == 1 {
                LocalUnitary::HadamardSdg
            } else {
                LocalUnitary::Hadamard
            };
            let setting = MeasurementSetting::new(units);
            let outcome = handle.sample(&setting, rng)?;
            Ok(EstimatorSample {
                value: dicke_offdiagonal_value(coeffs, mask_i, mask_j, &setting, outcome),
                arm,
                setting,
                outcome,
            })
        }
        Arm::OffDiagonal { overlap: None } => {
            unreachable!("Dicke plans label every off-diagonal arm with its overlap")
        }
    }
}

fn basis_sample(
    handle: &StateHandle,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EstimatorSample, MeasurementError> {
    let setting = MeasurementSetting::all_z(handle.n());
    let outcome = handle.sample(&setting, rng)?;
    Ok(EstimatorSample {
        value: basis_dfe_estimator(b, outcome),
        arm: Arm::Diagonal,
        setting,
        outcome,
    })
}

/// Draws one estimator sample for the plan's target. Asserts the plan's
/// value bound on every draw (debug builds).
pub fn draw_sample(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    rng: &mut ChaCha8Rng,
) -> Result<EstimatorSample, MeasurementError> {
    let sample = match *plan.target() {
        TargetState::Ghz { .. } => ghz_sample(handle, plan, rng)?,
        TargetState::W { .. } => w_sample(handle, plan, rng)?,
        TargetState::Dicke { .. } => dicke_sample(handle, plan, rng)?,
        TargetState::Basis { index, .. } => basis_sample(handle, index, rng)?,
    };
    debug_assert!(
        sample.value.abs() <= plan.value_bound,
        "estimator value {} exceeds bound {}",
        sample.value,
        plan.value_bound
    );
    Ok(sample)
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("plan targets {plan_n} qubits but the state has {state_n}")]
    DimensionMismatch { plan_n: usize, state_n: usize },
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Result of running a plan: the raw mean-plus-offset estimate, the same
/// value clamped to [0, 1], and the number of samples consumed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimate: f64,
    pub clamped: f64,
    pub samples_used: usize,
}

fn checked_dims(handle: &StateHandle, plan: &ProtocolPlan) -> Result<(), EstimateError> {
    if handle.n() != plan.target().n() {
        return Err(EstimateError::DimensionMismatch {
            plan_n: plan.target().n(),
            state_n: handle.n(),
        });
    }
    Ok(())
}

fn sample_value(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    rng: &mut ChaCha8Rng,
    failure: &Mutex<Option<MeasurementError>>,
) -> f64 {
    match draw_sample(handle, plan, rng) {
        Ok(sample) => sample.value,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    }
}

/// Runs the plan: draws `plan.n_samples()` estimator values from seeded
/// streams, averages them with compensated summation, and adds the plan
/// offset. Deterministic in `seed` independent of thread count.
pub fn estimate(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    seed: u64,
) -> Result<EstimateResult, EstimateError> {
    checked_dims(handle, plan)?;
    let failure = Mutex::new(None);
    let mean = parallel::seeded_mean(plan.n_samples(), seed, &[domain::SHADOW_SAMPLES], |rng| {
        sample_value(handle, plan, rng, &failure)
    });
    finish_estimate(mean, plan, failure)
}

/// Always-sequential twin of [`estimate`]; bit-identical output, used by the
/// benchmark suite to compare against the parallel path.
pub fn estimate_sequential(
    handle: &StateHandle,
    plan: &ProtocolPlan,
    seed: u64,
) -> Result<EstimateResult, EstimateError> {
    checked_dims(handle, plan)?;
    let failure = Mutex::new(None);
    let mean =
        parallel::seeded_mean_seq(plan.n_samples(), seed, &[domain::SHADOW_SAMPLES], |rng| {
            sample_value(handle, plan, rng, &failure)
        });
    finish_estimate(mean, plan, failure)
}

fn finish_estimate(
    mean: f64,
    plan: &ProtocolPlan,
    failure: Mutex<Option<MeasurementError>>,
) -> Result<EstimateResult, EstimateError> {
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    let estimate = mean + plan.offset();
    Ok(EstimateResult {
        estimate,
        clamped: estimate.clamp(0.0, 1.0),
        samples_used: plan.n_samples(),
    })
}

/// One multiplicative factor of a snapshot matrix element:
/// 3·⟨b₁|U†|o⟩⟨o|U|b₂⟩ − δ(b₁, b₂) for a single qubit.
fn snapshot_factor(u: LocalUnitary, b1: u8, o: u8, b2: u8) -> Complex64 {
    let delta = if b1 == b2 { 1.0 } else { 0.0 };
    local_trace_element(u, b1, o, b2) * 3.0 - delta
}

/// Matrix element ⟨b₁|ρ̂|b₂⟩ of the snapshot reconstructed from one
/// measurement (setting, outcome): the product over qubits of
/// 3·⟨b₁ᵢ|Uᵢ†|ôᵢ⟩⟨ôᵢ|Uᵢ|b₂ᵢ⟩ − δ(b₁ᵢ, b₂ᵢ). Exact in f64 (every factor is
/// a dyadic rational).
pub fn snapshot_matrix_element(
    b1: usize,
    b2: usize,
    setting: &MeasurementSetting,
    outcome: Outcome,
) -> Complex64 {
    let n = setting.n();
    let mut product = Complex64::new(1.0, 0.0);
    for q in 0..n {
        let factor = snapshot_factor(
            setting.unitary(q),
            bit(b1, q, n),
            bit(outcome, q, n),
            bit(b2, q, n),
        );
        if factor == Complex64::ZERO {
            return Complex64::ZERO;
        }
        product *= factor;
    }
    product
}

/// All measurement settings able to estimate the symmetric matrix-element
/// pair ⟨b₁|ρ|b₂⟩ + ⟨b₂|ρ|b₁⟩: Z where the strings agree, X/Y where they
/// differ, with an even number of Y among the differing positions. Returns
/// 2^(t−1) settings for t ≥ 1 differing positions (ascending enumeration
/// order), or the single all-Z setting for b₁ = b₂.
pub fn compatible_settings(b1: usize, b2: usize, n: usize) -> Vec<MeasurementSetting> {
    let diff_positions: Vec<usize> = (0..n).filter(|&q| bit(b1, q, n) != bit(b2, q, n)).collect();
    let t = diff_positions.len();
    if t == 0 {
        return vec![MeasurementSetting::all_z(n)];
    }
    let mut settings = Vec::with_capacity(1 << (t - 1));
    for y_mask in 0..(1usize << t) {
        if !weight(y_mask).is_multiple_of(2) {
            continue;
        }
        let mut units = vec![LocalUnitary::Identity; n];
        for (pos, &q) in diff_positions.iter().enumerate() {
            units[q] = if y_mask >> pos & 1 == 1 {
                LocalUnitary::HadamardSdg
            } else {
                LocalUnitary::Hadamard
            };
        }
        settings.push(MeasurementSetting::new(units));
    }
    settings
}
