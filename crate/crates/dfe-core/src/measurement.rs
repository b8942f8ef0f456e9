//! Simulated single-shot local Pauli measurements.
//!
//! A [`MeasurementSetting`] assigns one of the three basis rotations to each
//! qubit. [`outcome_distribution`] conjugates the state by the product of
//! single-qubit rotations — one qubit at a time, O(n·4ⁿ) — and reads the
//! diagonal; [`StateHandle`] adds a bounded LRU cache over settings so
//! repeated draws from the same setting cost one hash lookup.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits;
use crate::linalg::{tol, CMatrix, DensityMatrix, LocalUnitary};

/// A measured bitstring, encoded as a basis index (qubit 0 = most
/// significant bit, see [`crate::bits`]).
pub type Outcome = usize;

/// One basis rotation per qubit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeasurementSetting {
    us: Vec<LocalUnitary>,
}

impl MeasurementSetting {
    pub fn new(us: Vec<LocalUnitary>) -> Self {
        assert!(!us.is_empty(), "empty measurement setting");
        MeasurementSetting { us }
    }

    /// All qubits in the computational (Z) basis.
    pub fn all_z(n: usize) -> Self {
        MeasurementSetting::new(vec![LocalUnitary::Identity; n])
    }

    pub fn n(&self) -> usize {
        self.us.len()
    }

    pub fn unitary(&self, qubit: usize) -> LocalUnitary {
        self.us[qubit]
    }

    pub fn unitaries(&self) -> &[LocalUnitary] {
        &self.us
    }
}

impl fmt::Debug for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasurementSetting({self})")
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for u in &self.us {
            write!(f, "{}", u.basis_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("setting covers {setting_n} qubits but the state has {state_n}")]
    SettingMismatch { setting_n: usize, state_n: usize },
    #[error("negative probability {p:.3e} at outcome {outcome} (beyond clamp {clamp:.1e})", clamp = tol::PROB_CLAMP)]
    NegativeProbability { outcome: usize, p: f64 },
    #[error("outcome probabilities sum to {sum:.17}, off by more than {limit:.1e}", limit = tol::DISTRIBUTION_SUM)]
    BadNormalization { sum: f64 },
}

/// Probabilities of all 2ⁿ outcomes under one setting, with a precomputed
/// CDF so sampling is a single uniform draw plus a binary search.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates raw probabilities: tiny negatives (≥ −[`tol::PROB_CLAMP`])
    /// are clamped to zero, the sum must be 1 within
    /// [`tol::DISTRIBUTION_SUM`], then the result is renormalized exactly.
    pub fn new(mut probs: Vec<f64>) -> Result<Self, MeasurementError> {
        for (o, p) in probs.iter_mut().enumerate() {
            if *p < 0.0 {
                if *p < -tol::PROB_CLAMP {
                    return Err(MeasurementError::NegativeProbability { outcome: o, p: *p });
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::DISTRIBUTION_SUM {
            return Err(MeasurementError::BadNormalization { sum });
        }
        for p in &mut probs {
            *p /= sum;
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(OutcomeDistribution { probs, cdf })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, outcome: Outcome) -> f64 {
        self.probs[outcome]
    }

    /// Draws one outcome using a single uniform variate.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Outcome {
        let x: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= x)
    }
}

/// Distribution of outcomes when `rho` is measured under `setting`.
///
/// Works on a scratch copy of the state: for each non-identity qubit the
/// matrix is conjugated by that qubit's 2×2 rotation (rows, then columns
/// with the adjoint); the final diagonal is the distribution.
pub fn outcome_distribution(
    rho: &DensityMatrix,
    setting: &MeasurementSetting,
) -> Result<OutcomeDistribution, MeasurementError> {
    if setting.n() != rho.n() {
        return Err(MeasurementError::SettingMismatch {
            setting_n: setting.n(),
            state_n: rho.n(),
        });
    }
    let n = rho.n();
    let active: Vec<usize> =
        (0..n).filter(|&q| setting.unitary(q) != LocalUnitary::Identity).collect();
    if active.is_empty() {
        return OutcomeDistribution::new(rho.diagonal_real());
    }
    let mut work = rho.mat().clone();
    for &q in &active {
        conjugate_one_qubit(&mut work, setting.unitary(q), q, n);
    }
    OutcomeDistribution::new((0..work.dim()).map(|i| work[(i, i)].re).collect())
}

/// In-place work ← (U on `qubit`) work (U on `qubit`)†.
fn conjugate_one_qubit(work: &mut CMatrix, u: LocalUnitary, qubit: usize, n: usize) {
    let m = u.matrix();
    let dim = work.dim();
    let mask = bits::qubit_mask(qubit, n);
    // row pass: rows r (bit clear) and r|mask mix via U
    for r in 0..dim {
        if r & mask != 0 {
            continue;
        }
        let r1 = r | mask;
        for c in 0..dim {
            let a = work[(r, c)];
            let b = work[(r1, c)];
            work[(r, c)] = m[0][0] * a + m[0][1] * b;
            work[(r1, c)] = m[1][0] * a + m[1][1] * b;
        }
    }
    // column pass: columns c and c|mask mix via U†
    for r in 0..dim {
        for c in 0..dim {
            if c & mask != 0 {
                continue;
            }
            let c1 = c | mask;
            let a = work[(r, c)];
            let b = work[(r, c1)];
            work[(r, c)] = a * m[0][0].conj() + b * m[0][1].conj();
            work[(r, c1)] = a * m[1][0].conj() + b * m[1][1].conj();
        }
    }
}

/// Default bound on cached distributions per state. 2ⁿ⁻¹ + 1 settings cover
/// the largest tailored protocol at the 12-qubit cap, with headroom.
pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

/// A state plus a bounded, thread-safe LRU cache of its outcome
/// distributions, keyed by setting. Cache hits return the identical
/// `Arc` object; capacity overflow evicts the least recently used entry.
pub struct StateHandle {
    rho: Arc<DensityMatrix>,
    cache: Mutex<LruMap>,
}

struct LruMap {
    capacity: usize,
    stamp: u64,
    entries: HashMap<MeasurementSetting, (Arc<OutcomeDistribution>, u64)>,
}

impl LruMap {
    fn get(&mut self, key: &MeasurementSetting) -> Option<Arc<OutcomeDistribution>> {
        self.stamp += 1;
        let stamp = self.stamp;
        self.entries.get_mut(key).map(|(dist, used)| {
            *used = stamp;
            Arc::clone(dist)
        })
    }

    fn insert(&mut self, key: MeasurementSetting, dist: Arc<OutcomeDistribution>) {
        if self.entries.len() >= self.capacity && !self.entries.contains_key(&key) {
            if let Some(oldest) =
                self.entries.iter().min_by_key(|(_, (_, used))| *used).map(|(k, _)| k.clone())
            {
                self.entries.remove(&oldest);
            }
        }
        self.stamp += 1;
        self.entries.insert(key, (dist, self.stamp));
    }
}

impl StateHandle {
    pub fn new(rho: DensityMatrix) -> Self {
        StateHandle::with_capacity(rho, DEFAULT_CACHE_CAPACITY)
    }

    pub fn with_capacity(rho: DensityMatrix, capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be positive");
        StateHandle {
            rho: Arc::new(rho),
            cache: Mutex::new(LruMap { capacity, stamp: 0, entries: HashMap::new() }),
        }
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn n(&self) -> usize {
        self.rho.n()
    }

    /// Cached outcome distribution for `setting`. On a miss the distribution
    /// is computed outside the lock, so concurrent misses may compute twice;
    /// the cache keeps one winner and all later hits share it.
    pub fn distribution(
        &self,
        setting: &MeasurementSetting,
    ) -> Result<Arc<OutcomeDistribution>, MeasurementError> {
        if let Some(hit) = self.cache.lock().unwrap().get(setting) {
            return Ok(hit);
        }
        let dist = Arc::new(outcome_distribution(&self.rho, setting)?);
        let mut cache = self.cache.lock().unwrap();
        if let Some(raced) = cache.get(setting) {
            return Ok(raced);
        }
        cache.insert(setting.clone(), Arc::clone(&dist));
        Ok(dist)
    }

    /// Draws one outcome of measuring under `setting`.
    pub fn sample(
        &self,
        setting: &MeasurementSetting,
        rng: &mut ChaCha8Rng,
    ) -> Result<Outcome, MeasurementError> {
        Ok(self.distribution(setting)?.sample(rng))
    }
}
