//! Reference estimators: importance-sampled Pauli fidelity estimation and
//! vanilla classical shadows.
//!
//! Both serve as comparison points for the tailored protocols in
//! [`crate::shadow`].
//!
//! **Importance-sampled Pauli estimation** expands the fidelity in the Pauli
//! basis, F = (1/d) Σ_W tr(σW) tr(ρW), draws Pauli labels W with probability
//! proportional to tr(σW)², and estimates each drawn tr(ρW) from repeated
//! single-shot eigenvalue measurements. The number of shots per label scales
//! as 1/tr(σW)², so rarely-weighted labels are measured more often; the total
//! measurement count is bounded deterministically by
//! `labels + 1 + 2 ln(2/δ′) α / ε′²`, where α bounds tr(σW)⁻² over the
//! target's Pauli support (1 for GHZ and basis states, n² for W, C(n,k)² for
//! Dicke) and (ε′, δ′) is the half-budget each estimation stage receives.
//!
//! **Vanilla classical shadows** measure in uniformly random local Pauli
//! bases and average tr(ρ̂σ) over the standard inverted-channel snapshots ρ̂.
//!
//! The cost of building the Pauli support table — and of evaluating vanilla
//! snapshot overlaps — grows with the squared target support size, so these
//! estimators are intended for small qubit counts; the tailored protocols
//! have no such term.

use crate::bits::qubit_mask;
use crate::linalg::{tol, CMatrix};
use crate::measurement::{MeasurementError, MeasurementSetting, Outcome, StateHandle};
use crate::parallel::{self, Kahan};
use crate::rng::{domain, stream};
use crate::shadow::{snapshot_matrix_element, ErrorBudget, EstimateError, EstimateResult};
use crate::states::TargetState;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Mutex;
use thiserror::Error;

/// Hard cap on the number of Pauli labels a plan may request.
pub const MAX_LABELS: f64 = 1e8;
/// Hard cap on the number of shots a single label may request.
pub const MAX_SHOTS_PER_LABEL: f64 = 1e7;

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    /// Dense 2×2 matrix of the letter.
    pub fn matrix(self) -> CMatrix {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let entries = match self {
            PauliLetter::I => [[one, Complex64::ZERO], [Complex64::ZERO, one]],
            PauliLetter::X => [[Complex64::ZERO, one], [one, Complex64::ZERO]],
            PauliLetter::Y => [[Complex64::ZERO, -i], [i, Complex64::ZERO]],
            PauliLetter::Z => [[one, Complex64::ZERO], [Complex64::ZERO, -one]],
        };
        CMatrix::from_fn(2, |r, c| entries[r][c])
    }

    /// The measurement basis rotation that diagonalizes this letter: H for X,
    /// HS† for Y, and the identity for Z and I (computational basis).
    pub fn setting_unitary(self) -> crate::linalg::LocalUnitary {
        match self {
            PauliLetter::X => crate::linalg::LocalUnitary::Hadamard,
            PauliLetter::Y => crate::linalg::LocalUnitary::HadamardSdg,
            PauliLetter::I | PauliLetter::Z => crate::linalg::LocalUnitary::Identity,
        }
    }

    fn symbol(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli observable, qubit 0 first (leftmost letter, matching the
/// most-significant-bit convention used for basis indices).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<PauliLetter>,
}

impl PauliString {
    pub fn new(letters: Vec<PauliLetter>) -> Self {
        assert!(!letters.is_empty(), "a Pauli string needs at least one letter");
        PauliString { letters }
    }

    /// Builds the string from position masks: X where only `xmask` is set,
    /// Y where both `xmask` and `ymask` are set, Z where only `zmask` is set,
    /// I elsewhere. `ymask` must lie inside `xmask` and `zmask` outside it.
    pub fn from_masks(n: usize, xmask: usize, ymask: usize, zmask: usize) -> Self {
        assert!(ymask & !xmask == 0, "Y positions must carry an X flip");
        assert!(zmask & xmask == 0, "Z positions cannot carry an X flip");
        let letters = (0..n)
            .map(|q| {
                let m = qubit_mask(q, n);
                if xmask & m != 0 {
                    if ymask & m != 0 {
                        PauliLetter::Y
                    } else {
                        PauliLetter::X
                    }
                } else if zmask & m != 0 {
                    PauliLetter::Z
                } else {
                    PauliLetter::I
                }
            })
            .collect();
        PauliString { letters }
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[PauliLetter] {
        &self.letters
    }

    pub fn letter(&self, qubit: usize) -> PauliLetter {
        self.letters[qubit]
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&l| l == PauliLetter::I)
    }

    /// The local-basis measurement setting that makes every non-identity
    /// letter diagonal with eigenvalues (−1)^bit.
    pub fn setting(&self) -> MeasurementSetting {
        MeasurementSetting::new(self.letters.iter().map(|l| l.setting_unitary()).collect())
    }

    /// Eigenvalue of the observable on a measured bitstring: the product of
    /// (−1)^bit over non-identity letters (identity letters contribute 1, so
    /// the all-identity string always reads +1).
    pub fn eigenvalue(&self, outcome: Outcome) -> f64 {
        let n = self.n();
        let mask: usize = (0..n)
            .filter(|&q| self.letters[q] != PauliLetter::I)
            .map(|q| qubit_mask(q, n))
            .sum();
        if (outcome & mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Dense 2^n × 2^n matrix (tensor product of the letters).
    pub fn dense(&self) -> CMatrix {
        let mut m = self.letters[0].matrix();
        for l in &self.letters[1..] {
            m = crate::linalg::kron(&m, &l.matrix());
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

/// The target's Pauli support: every Pauli string W with tr(σW) ≠ 0,
/// together with the trace, plus the induced sampling distribution
/// q(W) = tr(σW)²/d (which sums to 1 for a pure target).
#[derive(Clone, Debug)]
pub struct CharacteristicTable {
    n: usize,
    entries: Vec<(PauliString, f64)>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl CharacteristicTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (observable, tr(σW)) pairs in deterministic construction order.
    pub fn entries(&self) -> &[(PauliString, f64)] {
        &self.entries
    }

    /// Normalized sampling weight of entry `i` (proportional to tr(σW)²).
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Smallest |tr(σW)| over the support; its inverse square is the worst
    /// per-label shot multiplier.
    pub fn min_abs_trace(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, t)| t.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Draws an entry index with probability proportional to tr(σW)².
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let x: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= x).min(self.entries.len() - 1)
    }
}

/// Scatters the low bits of `index` onto the listed positions' masks.
fn scatter(index: usize, position_masks: &[usize]) -> usize {
    position_masks
        .iter()
        .enumerate()
        .filter(|(i, _)| index >> i & 1 == 1)
        .map(|(_, &m)| m)
        .sum()
}

/// Builds the Pauli support table of a target state.
///
/// Only X-patterns that connect two support bitstrings can yield a nonzero
/// trace, so the scan enumerates (pairwise XOR of the support) × (Y/Z sign
/// patterns) rather than all 4^n strings. Pauli strings with an odd number
/// of Y letters are skipped outright: their trace against a real symmetric
/// state is purely imaginary, hence zero. Construction order (and therefore
/// sampling behavior) is deterministic.
pub fn characteristic_table(target: &TargetState) -> CharacteristicTable {
    let n = target.n();
    let dim = 1usize << n;
    let support = target.support();

    // Ordered support pairs grouped by their XOR pattern.
    let mut by_xmask: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for &(a, va) in &support {
        for &(b, vb) in &support {
            // Coefficient σ[a][b] = v_a v_b on the pair a → b = a ⊕ xmask.
            by_xmask.entry(a ^ b).or_default().push((a, va * vb));
        }
    }

    let mut entries = Vec::new();
    let mut raw_weights = Vec::new();
    for (&xmask, pairs) in &by_xmask {
        let x_positions: Vec<usize> =
            (0..n).filter(|&q| xmask & qubit_mask(q, n) != 0).collect();
        let z_positions: Vec<usize> =
            (0..n).filter(|&q| xmask & qubit_mask(q, n) == 0).collect();
        let x_masks: Vec<usize> = x_positions.iter().map(|&q| qubit_mask(q, n)).collect();
        let z_masks: Vec<usize> = z_positions.iter().map(|&q| qubit_mask(q, n)).collect();
        for y_index in 0..(1usize << x_masks.len()) {
            let y_count = y_index.count_ones();
            if y_count % 2 == 1 {
                continue;
            }
            let ymask = scatter(y_index, &x_masks);
            // i^y for even y is (−1)^(y/2).
            let y_sign = if y_count % 4 == 0 { 1.0 } else { -1.0 };
            for z_index in 0..(1usize << z_masks.len()) {
                let zmask = scatter(z_index, &z_masks);
                let sign_mask = ymask | zmask;
                let mut trace = 0.0;
                for &(a, coeff) in pairs {
                    if (a & sign_mask).count_ones().is_multiple_of(2) {
                        trace += coeff;
                    } else {
                        trace -= coeff;
                    }
                }
                trace *= y_sign;
                if trace.abs() > tol::CHAR_ZERO {
                    entries.push((PauliString::from_masks(n, xmask, ymask, zmask), trace));
                    raw_weights.push(trace * trace / dim as f64);
                }
            }
        }
    }

    let total: f64 = raw_weights.iter().sum();
    assert!(
        (total - 1.0).abs() < 1e-10,
        "squared Pauli weights of a pure target must sum to 1, got {total}"
    );
    let weights: Vec<f64> = raw_weights.iter().map(|w| w / total).collect();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in &weights {
        acc += w;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    CharacteristicTable { n, entries, weights, cdf }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("label budget {required:.3e} exceeds the supported maximum {max:.1e}")]
    LabelBudgetOverflow { required: f64, max: f64 },
    #[error("shot budget {required:.3e} for label {label} exceeds the supported maximum {max:.1e}")]
    ShotBudgetOverflow { label: String, required: f64, max: f64 },
    #[error("plan targets {plan_n} qubits but the state has {state_n}")]
    DimensionMismatch { plan_n: usize, state_n: usize },
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Concentration regime that sets the label count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LabelRule {
    /// Per-label estimates are bounded by 1 in magnitude (targets whose
    /// support traces are all ±1): Hoeffding count.
    Bounded,
    /// Per-label estimates have variance at most 1: Chebyshev count.
    BoundedVariance,
}

/// Importance-sampling plan: how many Pauli labels to draw, the per-label
/// shot rule, and the precomputed support table.
#[derive(Clone, Debug)]
pub struct BaselinePlan {
    target: TargetState,
    budget: ErrorBudget,
    labels: usize,
    alpha: f64,
    table: CharacteristicTable,
}

impl BaselinePlan {
    pub fn target(&self) -> &TargetState {
        &self.target
    }

    pub fn budget(&self) -> &ErrorBudget {
        &self.budget
    }

    /// Number of Pauli labels drawn per run.
    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Deterministic bound on tr(σW)⁻² over the support.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn table(&self) -> &CharacteristicTable {
        &self.table
    }

    /// Accuracy allotted to the label-sampling stage (half the total).
    pub fn half_epsilon(&self) -> f64 {
        self.budget.epsilon() / 2.0
    }

    /// Failure probability allotted to each stage (half the total).
    pub fn half_delta(&self) -> f64 {
        self.budget.delta() / 2.0
    }

    /// Number of eigenvalue measurements for a label with the given target
    /// trace: ⌈2 ln(2/δ′) / (tr² · labels · ε′²)⌉, at least 1.
    pub fn shots_for(&self, trace: f64) -> Result<u64, BaselineError> {
        let eps = self.half_epsilon();
        let delta = self.half_delta();
        let raw = 2.0 * (2.0 / delta).ln() / (trace * trace * self.labels as f64 * eps * eps);
        if raw.is_nan() || raw > MAX_SHOTS_PER_LABEL {
            return Err(BaselineError::ShotBudgetOverflow {
                label: format!("trace {trace:.3e}"),
                required: raw,
                max: MAX_SHOTS_PER_LABEL,
            });
        }
        Ok((raw.ceil() as u64).max(1))
    }

    /// Deterministic upper bound on the total measurements one run consumes:
    /// labels + 1 + 2 ln(2/δ′) α / ε′².
    pub fn measurement_bound(&self) -> f64 {
        let eps = self.half_epsilon();
        let delta = self.half_delta();
        self.labels as f64 + 1.0 + 2.0 * (2.0 / delta).ln() * self.alpha / (eps * eps)
    }
}

/// Builds the importance-sampling plan for a target.
///
/// GHZ and basis targets have all support traces equal to ±1, so the
/// per-label estimates are bounded and a Hoeffding label count suffices;
/// W and Dicke targets only have bounded variance, so the label count is the
/// Chebyshev one, 1/(ε′² δ′).
pub fn baseline_plan(
    target: &TargetState,
    budget: ErrorBudget,
) -> Result<BaselinePlan, BaselineError> {
    let (rule, alpha) = match *target {
        TargetState::Ghz { .. } | TargetState::Basis { .. } => (LabelRule::Bounded, 1.0),
        TargetState::W { n } => (LabelRule::BoundedVariance, (n * n) as f64),
        TargetState::Dicke { n, k } => {
            let c = crate::bits::binomial(n, k) as f64;
            (LabelRule::BoundedVariance, c * c)
        }
    };
    let eps = budget.epsilon() / 2.0;
    let delta = budget.delta() / 2.0;
    let raw = match rule {
        LabelRule::Bounded => 2.0 * (2.0 / delta).ln() / (eps * eps),
        LabelRule::BoundedVariance => 1.0 / (eps * eps * delta),
    };
    if raw.is_nan() || raw > MAX_LABELS {
        return Err(BaselineError::LabelBudgetOverflow { required: raw, max: MAX_LABELS });
    }
    let labels = (raw.ceil() as usize).max(1);
    Ok(BaselinePlan {
        target: target.clone(),
        budget,
        labels,
        alpha,
        table: characteristic_table(target),
    })
}

/// Outcome of one importance-sampled run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineResult {
    /// Raw fidelity estimate (mean of per-label ratio estimates).
    pub estimate: f64,
    /// Estimate clamped to [0, 1].
    pub clamped: f64,
    /// Number of Pauli labels drawn (= the plan's label count).
    pub labels_used: usize,
    /// Total single-shot measurements consumed across all labels.
    pub measurements_used: u64,
}

/// Runs one label: draws the Pauli observable, measures it the prescribed
/// number of times, and returns (Ā / tr(σW), shots).
fn run_label(
    handle: &StateHandle,
    plan: &BaselinePlan,
    seed: u64,
    index: usize,
) -> Result<(f64, u64), BaselineError> {
    let mut rng = stream(seed, &[domain::BASELINE, index as u64]);
    let label_index = plan.table.sample(&mut rng);
    let (pauli, trace) = &plan.table.entries()[label_index];
    let shots = plan.shots_for(*trace)?;
    let setting = pauli.setting();
    let mut acc = Kahan::new();
    for _ in 0..shots {
        let outcome = handle.sample(&setting, &mut rng)?;
        acc.add(pauli.eigenvalue(outcome));
    }
    let mean = acc.value() / shots as f64;
    Ok((mean / trace, shots))
}

fn check_baseline_dims(handle: &StateHandle, plan: &BaselinePlan) -> Result<(), BaselineError> {
    if handle.n() != plan.target.n() {
        return Err(BaselineError::DimensionMismatch {
            plan_n: plan.target.n(),
            state_n: handle.n(),
        });
    }
    Ok(())
}

fn reduce_labels(
    plan: &BaselinePlan,
    per_label: Vec<Result<(f64, u64), BaselineError>>,
) -> Result<BaselineResult, BaselineError> {
    let mut acc = Kahan::new();
    let mut measurements = 0u64;
    for r in per_label {
        let (value, shots) = r?;
        acc.add(value);
        measurements += shots;
    }
    let estimate = acc.value() / plan.labels as f64;
    Ok(BaselineResult {
        estimate,
        clamped: estimate.clamp(0.0, 1.0),
        labels_used: plan.labels,
        measurements_used: measurements,
    })
}

/// Runs the importance-sampled estimator. Each label owns a derived RNG
/// stream, so the result is deterministic in `seed` and independent of
/// thread count.
pub fn baseline_estimate(
    handle: &StateHandle,
    plan: &BaselinePlan,
    seed: u64,
) -> Result<BaselineResult, BaselineError> {
    check_baseline_dims(handle, plan)?;
    let per_label =
        parallel::map_indexed(plan.labels, |i| run_label(handle, plan, seed, i));
    reduce_labels(plan, per_label)
}

/// Always-sequential twin of [`baseline_estimate`]; bit-identical output.
pub fn baseline_estimate_sequential(
    handle: &StateHandle,
    plan: &BaselinePlan,
    seed: u64,
) -> Result<BaselineResult, BaselineError> {
    check_baseline_dims(handle, plan)?;
    let per_label =
        parallel::map_indexed_seq(plan.labels, |i| run_label(handle, plan, seed, i));
    reduce_labels(plan, per_label)
}

/// Per-sample vanilla-shadow work: a uniformly random local Pauli basis, one
/// outcome, and the snapshot overlap with the target restricted to the
/// target's support.
fn vanilla_sample_value(
    handle: &StateHandle,
    support: &[(usize, f64)],
    failure: &Mutex<Option<MeasurementError>>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = handle.n();
    let units: Vec<crate::linalg::LocalUnitary> = (0..n)
        .map(|_| match rng.random_range(0..3u32) {
            0 => crate::linalg::LocalUnitary::Hadamard,
            1 => crate::linalg::LocalUnitary::HadamardSdg,
            _ => crate::linalg::LocalUnitary::Identity,
        })
        .collect();
    let setting = MeasurementSetting::new(units);
    let outcome = match handle.sample(&setting, rng) {
        Ok(o) => o,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            return 0.0;
        }
    };
    let mut overlap = Complex64::ZERO;
    for &(a, va) in support {
        for &(b, vb) in support {
            overlap += snapshot_matrix_element(a, b, &setting, outcome) * (va * vb);
        }
    }
    overlap.re
}

/// Vanilla classical-shadow fidelity estimate: `n_samples` uniformly random
/// local Pauli measurements, snapshot overlaps averaged with compensated
/// summation. Deterministic in `seed` independent of thread count.
pub fn vanilla_shadow_estimate(
    handle: &StateHandle,
    target: &TargetState,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateResult, EstimateError> {
    vanilla_impl(handle, target, n_samples, seed, false)
}

/// Always-sequential twin of [`vanilla_shadow_estimate`]; bit-identical.
pub fn vanilla_shadow_estimate_sequential(
    handle: &StateHandle,
    target: &TargetState,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateResult, EstimateError> {
    vanilla_impl(handle, target, n_samples, seed, true)
}

fn vanilla_impl(
    handle: &StateHandle,
    target: &TargetState,
    n_samples: usize,
    seed: u64,
    sequential: bool,
) -> Result<EstimateResult, EstimateError> {
    if handle.n() != target.n() {
        return Err(EstimateError::DimensionMismatch {
            plan_n: target.n(),
            state_n: handle.n(),
        });
    }
    let n_samples = n_samples.max(1);
    let support = target.support();
    let failure = Mutex::new(None);
    let path = [domain::VANILLA_SAMPLES];
    let mean = if sequential {
        parallel::seeded_mean_seq(n_samples, seed, &path, |rng| {
            vanilla_sample_value(handle, &support, &failure, rng)
        })
    } else {
        parallel::seeded_mean(n_samples, seed, &path, |rng| {
            vanilla_sample_value(handle, &support, &failure, rng)
        })
    };
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    Ok(EstimateResult {
        estimate: mean,
        clamped: mean.clamp(0.0, 1.0),
        samples_used: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LocalUnitary;
    use crate::states::{fidelity, random_state_with_fidelity, StateGenConfig};
    use std::collections::HashMap;

    fn budget(epsilon: f64, delta: f64) -> ErrorBudget {
        ErrorBudget::new(epsilon, delta).unwrap()
    }

    fn seeded(tag: u64) -> ChaCha8Rng {
        stream(0xB45E11E, &[tag])
    }

    fn handle_for(target: &TargetState) -> StateHandle {
        StateHandle::new(target.density().unwrap())
    }

    // ---- Pauli strings ----------------------------------------------------

    #[test]
    fn pauli_string_construction_and_display() {
        use PauliLetter::{I, X, Y, Z};
        let p = PauliString::new(vec![X, Y, I, Z]);
        assert_eq!(p.to_string(), "XYIZ");
        assert_eq!(p.n(), 4);
        assert_eq!(p.letter(1), Y);
        assert!(!p.is_identity());
        assert!(PauliString::new(vec![I, I]).is_identity());

        // qubit 0 is the leftmost letter and the most significant bit:
        // X on qubit 0 of 4 corresponds to xmask 0b1000.
        let q = PauliString::from_masks(4, 0b1100, 0b0100, 0b0001);
        assert_eq!(q.to_string(), "XYIZ");
        assert_eq!(p, q);
    }

    #[test]
    fn pauli_settings_diagonalize_each_letter() {
        // Conjugating each letter by its measurement rotation must give Z
        // (so eigenvalue (−1)^bit) — or leave I as I.
        for letter in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z] {
            let u = match letter.setting_unitary() {
                LocalUnitary::Identity => CMatrix::identity(2),
                other => {
                    let m = other.matrix();
                    CMatrix::from_fn(2, |r, c| m[r][c])
                }
            };
            let rotated = u.mul(&letter.matrix()).mul(&u.adjoint());
            assert!(
                rotated.max_abs_diff(&PauliLetter::Z.matrix()) < 1e-14,
                "{letter:?} should diagonalize to Z"
            );
        }
        let identity_rotated = PauliLetter::I.matrix();
        assert!(identity_rotated.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn eigenvalues_follow_outcome_parity_on_the_support() {
        use PauliLetter::{I, X, Y, Z};
        let p = PauliString::new(vec![X, I, Z]);
        // Non-identity letters sit on qubits 0 and 2 → mask 0b101.
        assert_eq!(p.eigenvalue(0b000), 1.0);
        assert_eq!(p.eigenvalue(0b100), -1.0);
        assert_eq!(p.eigenvalue(0b010), 1.0);
        assert_eq!(p.eigenvalue(0b101), 1.0);
        assert_eq!(p.eigenvalue(0b001), -1.0);
        // The all-identity string always reads +1.
        let id = PauliString::new(vec![I, I, I]);
        for o in 0..8 {
            assert_eq!(id.eigenvalue(o), 1.0);
        }
        // Dense oracle: eigenvalue = ⟨o|U W U†|o⟩ for the rotated observable.
        let py = PauliString::new(vec![Y, Z]);
        let dense = py.dense();
        let setting = py.setting();
        let mut u = CMatrix::identity(1);
        for q in 0..2 {
            let m = setting.unitary(q).matrix();
            u = crate::linalg::kron(&u, &CMatrix::from_fn(2, |r, c| m[r][c]));
        }
        let rotated = u.mul(&dense).mul(&u.adjoint());
        for o in 0..4usize {
            assert!((rotated[(o, o)].re - py.eigenvalue(o)).abs() < 1e-12);
            assert!(rotated[(o, o)].im.abs() < 1e-14);
        }
    }

    // ---- characteristic table --------------------------------------------

    /// Brute-force table: tr(σW) for every one of the 4^n Pauli strings via
    /// dense matrix products.
    fn brute_force_table(target: &TargetState) -> HashMap<String, f64> {
        let n = target.n();
        let sigma = target.density().unwrap();
        let mut out = HashMap::new();
        let letters = [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z];
        for code in 0..4usize.pow(n as u32) {
            let mut c = code;
            let mut ls = Vec::with_capacity(n);
            for _ in 0..n {
                ls.push(letters[c % 4]);
                c /= 4;
            }
            let p = PauliString::new(ls);
            let tr = sigma.mat().mul(&p.dense()).trace();
            assert!(tr.im.abs() < 1e-12, "trace of Hermitian product must be real");
            if tr.re.abs() > tol::CHAR_ZERO {
                out.insert(p.to_string(), tr.re);
            }
        }
        out
    }

    #[test]
    fn characteristic_table_matches_dense_brute_force() {
        for target in [
            TargetState::ghz(2).unwrap(),
            TargetState::ghz(3).unwrap(),
            TargetState::w(2).unwrap(),
            TargetState::w(3).unwrap(),
            TargetState::dicke(4, 2).unwrap(),
            TargetState::basis(2, 1).unwrap(),
        ] {
            let table = characteristic_table(&target);
            let oracle = brute_force_table(&target);
            let got: HashMap<String, f64> = table
                .entries()
                .iter()
                .map(|(p, t)| (p.to_string(), *t))
                .collect();
            assert_eq!(got.len(), table.len(), "{target}: duplicate labels");
            assert_eq!(got.len(), oracle.len(), "{target}: support size");
            for (label, tr) in &oracle {
                let found = got
                    .get(label)
                    .unwrap_or_else(|| panic!("{target}: label {label} missing"));
                assert!((found - tr).abs() < 1e-12, "{target} {label}: {found} vs {tr}");
            }
            let total: f64 = table.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "{target}: weights sum {total}");
        }
    }

    #[test]
    fn ghz_support_is_the_stabilizer_group() {
        // GHZ(2) support: II, XX, ZZ with trace +1 and YY with trace −1.
        let table = characteristic_table(&TargetState::ghz(2).unwrap());
        let got: HashMap<String, f64> =
            table.entries().iter().map(|(p, t)| (p.to_string(), *t)).collect();
        let want: HashMap<String, f64> = [
            ("II".to_string(), 1.0),
            ("XX".to_string(), 1.0),
            ("ZZ".to_string(), 1.0),
            ("YY".to_string(), -1.0),
        ]
        .into();
        assert_eq!(got.len(), want.len());
        for (label, tr) in &want {
            // ±1 up to the rounding of (1/√2)² + (1/√2)².
            assert!((got[label] - tr).abs() < 1e-14, "{label}: {}", got[label]);
        }
        // All stabilizer traces are ±1, so sampling is uniform.
        for i in 0..table.len() {
            assert!((table.weight(i) - 0.25).abs() < 1e-14);
        }
        assert!((table.min_abs_trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn w_state_min_trace_obeys_the_alpha_bound() {
        for n in 2..=6usize {
            let table = characteristic_table(&TargetState::w(n).unwrap());
            let min = table.min_abs_trace();
            assert!(
                min >= 1.0 / n as f64 - 1e-12,
                "n={n}: min |trace| {min} below 1/n"
            );
        }
        for (n, k) in [(4usize, 2usize), (5, 2)] {
            let table = characteristic_table(&TargetState::dicke(n, k).unwrap());
            let c = crate::bits::binomial(n, k) as f64;
            assert!(table.min_abs_trace() >= 1.0 / c - 1e-12, "({n},{k})");
        }
    }

    #[test]
    fn table_sampling_follows_squared_weights() {
        let table = characteristic_table(&TargetState::w(3).unwrap());
        let mut rng = seeded(1);
        let draws = 200_000usize;
        let mut counts = vec![0usize; table.len()];
        for _ in 0..draws {
            counts[table.sample(&mut rng)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = table.weight(i);
            let got = c as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (got - p).abs() <= 4.0 * sigma + 1e-9,
                "entry {i} ({}): got {got}, want {p}",
                table.entries()[i].0
            );
        }
    }

    // ---- plans ------------------------------------------------------------

    #[test]
    fn label_counts_follow_the_concentration_regime() {
        let b = budget(0.1, 0.1);
        // Half-budget: ε′ = 0.05, δ′ = 0.05.
        let ghz = baseline_plan(&TargetState::ghz(3).unwrap(), b).unwrap();
        assert_eq!(ghz.labels(), (2.0 * (40.0f64).ln() / 0.0025).ceil() as usize);
        assert_eq!(ghz.alpha(), 1.0);

        let basis = baseline_plan(&TargetState::basis(3, 2).unwrap(), b).unwrap();
        assert_eq!(basis.labels(), ghz.labels());

        let w = baseline_plan(&TargetState::w(4).unwrap(), b).unwrap();
        assert_eq!(w.labels(), (1.0f64 / (0.0025 * 0.05)).ceil() as usize);
        assert_eq!(w.labels(), 8000);
        assert_eq!(w.alpha(), 16.0);

        let dicke = baseline_plan(&TargetState::dicke(4, 2).unwrap(), b).unwrap();
        assert_eq!(dicke.labels(), 8000);
        assert_eq!(dicke.alpha(), 36.0);
    }

    #[test]
    fn shot_counts_follow_the_inverse_square_rule() {
        let plan = baseline_plan(&TargetState::w(3).unwrap(), budget(0.2, 0.2)).unwrap();
        let eps = plan.half_epsilon();
        let delta = plan.half_delta();
        for &(_, trace) in plan.table().entries() {
            let m = plan.shots_for(trace).unwrap();
            let raw = 2.0 * (2.0 / delta).ln()
                / (trace * trace * plan.labels() as f64 * eps * eps);
            assert_eq!(m, (raw.ceil() as u64).max(1));
        }
        // Smaller traces require more shots.
        let m_small = plan.shots_for(1.0 / 3.0).unwrap();
        let m_large = plan.shots_for(1.0).unwrap();
        assert!(m_small >= m_large);
    }

    #[test]
    fn overflowing_budgets_are_rejected() {
        let tiny = budget(1e-6, 0.5);
        assert!(matches!(
            baseline_plan(&TargetState::w(3).unwrap(), tiny),
            Err(BaselineError::LabelBudgetOverflow { .. })
        ));
        let plan = baseline_plan(&TargetState::w(3).unwrap(), budget(0.2, 0.2)).unwrap();
        assert!(matches!(
            plan.shots_for(1e-9),
            Err(BaselineError::ShotBudgetOverflow { .. })
        ));
    }

    // ---- estimator behavior ----------------------------------------------

    #[test]
    fn baseline_expectation_enumerates_to_the_true_fidelity() {
        // E[estimate] = Σ_k q(k) tr(ρW_k)/tr(σW_k) must equal tr(ρσ) exactly
        // (importance-sampling identity); verified by full enumeration.
        let target = TargetState::ghz(2).unwrap();
        let cfg = StateGenConfig { target: target.clone(), fidelity: 0.7, seed: 5 };
        let rho = random_state_with_fidelity(&cfg).unwrap();
        let f = fidelity(&rho, &target).unwrap();
        let table = characteristic_table(&target);
        let mut expectation = 0.0;
        for (i, (pauli, trace)) in table.entries().iter().enumerate() {
            let tr_rho = rho.mat().mul(&pauli.dense()).trace();
            assert!(tr_rho.im.abs() < 1e-12);
            expectation += table.weight(i) * tr_rho.re / trace;
        }
        assert!((expectation - f).abs() < 1e-10, "{expectation} vs {f}");
    }

    #[test]
    fn baseline_estimate_hits_the_target_within_budget() {
        for target in [
            TargetState::ghz(3).unwrap(),
            TargetState::w(3).unwrap(),
            TargetState::basis(2, 1).unwrap(),
        ] {
            let handle = handle_for(&target);
            let plan = baseline_plan(&target, budget(0.1, 0.1)).unwrap();
            let r = baseline_estimate(&handle, &plan, 17).unwrap();
            assert!((r.estimate - 1.0).abs() <= 0.1, "{target}: {}", r.estimate);
            assert_eq!(r.labels_used, plan.labels());
            assert!(r.measurements_used >= plan.labels() as u64);
            assert!(
                (r.measurements_used as f64) <= plan.measurement_bound(),
                "{target}: used {} > bound {}",
                r.measurements_used,
                plan.measurement_bound()
            );
        }
    }

    #[test]
    fn measurement_bound_holds_across_many_seeds() {
        let target = TargetState::w(3).unwrap();
        let handle = handle_for(&target);
        let plan = baseline_plan(&target, budget(0.25, 0.2)).unwrap();
        let bound = plan.measurement_bound();
        for seed in 0..25u64 {
            let r = baseline_estimate(&handle, &plan, seed).unwrap();
            assert!((r.measurements_used as f64) <= bound, "seed {seed}");
        }
    }

    #[test]
    fn baseline_sequential_twin_is_bit_identical() {
        let target = TargetState::dicke(3, 1).unwrap();
        let handle = handle_for(&target);
        let plan = baseline_plan(&target, budget(0.3, 0.3)).unwrap();
        let a = baseline_estimate(&handle, &plan, 23).unwrap();
        let b = baseline_estimate_sequential(&handle, &plan, 23).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.measurements_used, b.measurements_used);
    }

    #[test]
    fn baseline_detects_dimension_mismatch() {
        let plan = baseline_plan(&TargetState::ghz(2).unwrap(), budget(0.2, 0.2)).unwrap();
        let handle = handle_for(&TargetState::ghz(3).unwrap());
        assert!(matches!(
            baseline_estimate(&handle, &plan, 0),
            Err(BaselineError::DimensionMismatch { plan_n: 2, state_n: 3 })
        ));
    }

    #[test]
    fn baseline_tracks_an_intermediate_fidelity() {
        let target = TargetState::ghz(3).unwrap();
        let cfg = StateGenConfig { target: target.clone(), fidelity: 0.5, seed: 31 };
        let rho = random_state_with_fidelity(&cfg).unwrap();
        let handle = StateHandle::new(rho);
        let plan = baseline_plan(&target, budget(0.1, 0.05)).unwrap();
        let r = baseline_estimate(&handle, &plan, 41).unwrap();
        assert!((r.estimate - 0.5).abs() <= 0.1, "estimate {}", r.estimate);
    }

    // ---- vanilla shadows --------------------------------------------------

    #[test]
    fn vanilla_expectation_enumerates_to_the_true_fidelity() {
        // Averaging the snapshot overlap over all 3^n settings (uniform) and
        // exact outcome probabilities recovers tr(ρσ).
        let target = TargetState::w(2).unwrap();
        let cfg = StateGenConfig { target: target.clone(), fidelity: 0.6, seed: 9 };
        let rho = random_state_with_fidelity(&cfg).unwrap();
        let f = fidelity(&rho, &target).unwrap();
        let handle = StateHandle::new(rho);
        let support = target.support();
        let mut expectation = 0.0;
        for a in LocalUnitary::ALL {
            for b in LocalUnitary::ALL {
                let setting = MeasurementSetting::new(vec![a, b]);
                let dist = handle.distribution(&setting).unwrap();
                for outcome in 0..4usize {
                    let mut overlap = Complex64::ZERO;
                    for &(x, vx) in &support {
                        for &(y, vy) in &support {
                            overlap +=
                                snapshot_matrix_element(x, y, &setting, outcome) * (vx * vy);
                        }
                    }
                    expectation += dist.p(outcome) * overlap.re / 9.0;
                }
            }
        }
        assert!((expectation - f).abs() < 1e-10, "{expectation} vs {f}");
    }

    #[test]
    fn vanilla_estimate_tracks_the_fidelity() {
        let target = TargetState::ghz(2).unwrap();
        let handle = handle_for(&target);
        let r = vanilla_shadow_estimate(&handle, &target, 60_000, 3).unwrap();
        assert!((r.estimate - 1.0).abs() < 0.05, "estimate {}", r.estimate);
        assert_eq!(r.samples_used, 60_000);
        assert!(r.clamped >= 0.0 && r.clamped <= 1.0);
    }

    #[test]
    fn vanilla_sequential_twin_is_bit_identical() {
        let target = TargetState::w(3).unwrap();
        let handle = handle_for(&target);
        let a = vanilla_shadow_estimate(&handle, &target, 4097, 7).unwrap();
        let b = vanilla_shadow_estimate_sequential(&handle, &target, 4097, 7).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }

    #[test]
    fn vanilla_detects_dimension_mismatch() {
        let target = TargetState::ghz(2).unwrap();
        let handle = handle_for(&TargetState::ghz(3).unwrap());
        assert!(matches!(
            vanilla_shadow_estimate(&handle, &target, 10, 0),
            Err(EstimateError::DimensionMismatch { plan_n: 2, state_n: 3 })
        ));
    }

    #[test]
    fn vanilla_is_deterministic_in_the_seed() {
        let target = TargetState::dicke(3, 1).unwrap();
        let handle = handle_for(&target);
        let a = vanilla_shadow_estimate(&handle, &target, 2000, 11).unwrap();
        let b = vanilla_shadow_estimate(&handle, &target, 2000, 11).unwrap();
        let c = vanilla_shadow_estimate(&handle, &target, 2000, 12).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_ne!(a.estimate.to_bits(), c.estimate.to_bits());
    }
}
