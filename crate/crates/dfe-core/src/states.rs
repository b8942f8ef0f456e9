//! Target states and seeded random test states.
//!
//! All four supported targets are pure states with real nonnegative
//! amplitudes, so their densities are real symmetric matrices and fidelity
//! against them reduces to a small double sum over the amplitude support.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::bits;
use crate::linalg::{clamp_to_psd, CMatrix, DensityError, DensityMatrix};
use crate::rng::{domain, stream};

/// The pure states the estimators are tailored to.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum TargetState {
    /// (|0…0⟩ + |1…1⟩)/√2.
    Ghz { n: usize },
    /// Uniform superposition of the n single-excitation states.
    W { n: usize },
    /// Uniform superposition of all weight-k basis states.
    Dicke { n: usize, k: usize },
    /// A single computational-basis state.
    Basis { n: usize, index: usize },
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("qubit count must be at least 1")]
    ZeroQubits,
    #[error("Dicke weight k = {k} exceeds qubit count n = {n}")]
    DickeWeight { n: usize, k: usize },
    #[error("basis index {index} out of range for {n} qubits")]
    BasisIndex { index: usize, n: usize },
    #[error("fidelity {f} outside [0, 1]")]
    InvalidFidelity { f: f64 },
    #[error("state has {state_n} qubits but the target has {target_n}")]
    DimensionMismatch { state_n: usize, target_n: usize },
}

impl TargetState {
    pub fn ghz(n: usize) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::ZeroQubits);
        }
        Ok(TargetState::Ghz { n })
    }

    pub fn w(n: usize) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::ZeroQubits);
        }
        Ok(TargetState::W { n })
    }

    pub fn dicke(n: usize, k: usize) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::ZeroQubits);
        }
        if k > n {
            return Err(StateError::DickeWeight { n, k });
        }
        Ok(TargetState::Dicke { n, k })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self, StateError> {
        if n == 0 {
            return Err(StateError::ZeroQubits);
        }
        if index >= 1usize << n {
            return Err(StateError::BasisIndex { index, n });
        }
        Ok(TargetState::Basis { n, index })
    }

    pub fn n(&self) -> usize {
        match *self {
            TargetState::Ghz { n }
            | TargetState::W { n }
            | TargetState::Dicke { n, .. }
            | TargetState::Basis { n, .. } => n,
        }
    }

    /// Dicke excitation number, if this target has one.
    pub fn k(&self) -> Option<usize> {
        match *self {
            TargetState::Dicke { k, .. } => Some(k),
            _ => None,
        }
    }

    /// Nonzero amplitudes as (basis index, amplitude), ascending by index.
    /// Amplitudes are real, positive, and squared-sum to 1.
    pub fn support(&self) -> Vec<(usize, f64)> {
        match *self {
            TargetState::Ghz { n } => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                vec![(0, a), ((1usize << n) - 1, a)]
            }
            TargetState::W { n } => {
                let a = 1.0 / (n as f64).sqrt();
                (0..n).map(|q| (bits::qubit_mask(q, n), a)).rev().collect()
            }
            TargetState::Dicke { n, k } => {
                let masks = bits::masks_of_weight(n, k);
                let a = 1.0 / (masks.len() as f64).sqrt();
                masks.into_iter().map(|m| (m, a)).collect()
            }
            TargetState::Basis { index, .. } => vec![(index, 1.0)],
        }
    }

    /// The density matrix |ψ⟩⟨ψ| (rank one, real entries).
    pub fn density(&self) -> Result<DensityMatrix, StateError> {
        let n = self.n();
        let support = self.support();
        let mut m = CMatrix::zeros(1usize << n);
        for &(a, va) in &support {
            for &(b, vb) in &support {
                m[(a, b)] = Complex64::new(va * vb, 0.0);
            }
        }
        Ok(DensityMatrix::new_psd_by_construction(m)?)
    }
}

impl std::fmt::Display for TargetState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            TargetState::Ghz { .. } => write!(f, "ghz"),
            TargetState::W { .. } => write!(f, "w"),
            TargetState::Dicke { .. } => write!(f, "dicke"),
            TargetState::Basis { n, index } => write!(f, "basis:{}", bits::bitstring(index, n)),
        }
    }
}

/// Fidelity ⟨ψ|ρ|ψ⟩ of `rho` against a pure target.
pub fn fidelity(rho: &DensityMatrix, target: &TargetState) -> Result<f64, StateError> {
    let n = target.n();
    if n != rho.n() {
        return Err(StateError::DimensionMismatch { state_n: rho.n(), target_n: n });
    }
    let support = target.support();
    let mut acc = Complex64::ZERO;
    for &(a, va) in &support {
        for &(b, vb) in &support {
            acc += rho.mat()[(a, b)] * (va * vb);
        }
    }
    Ok(acc.re)
}

/// Recipe for a random state with prescribed fidelity to a target.
#[derive(Clone, Debug)]
pub struct StateGenConfig {
    pub target: TargetState,
    pub fidelity: f64,
    pub seed: u64,
}

/// Deterministic random state with `fidelity(ρ, target) = f` to within
/// validation precision.
///
/// Construction: draw a Ginibre random density, project out the target
/// direction (so the remainder has exactly zero overlap), repair the
/// projection numerically (Hermitian part, eigenvalue clamp), normalize the
/// remainder to weight 1 − f, and add f times the target.
pub fn random_state_with_fidelity(cfg: &StateGenConfig) -> Result<DensityMatrix, StateError> {
    let f = cfg.fidelity;
    if !(0.0..=1.0).contains(&f) || f.is_nan() {
        return Err(StateError::InvalidFidelity { f });
    }
    let sigma = cfg.target.density()?;
    if f == 1.0 {
        return Ok(sigma);
    }

    let d = sigma.dim();
    let mut rng = stream(cfg.seed, &[domain::STATE_GEN]);
    let rho = ginibre_density(d, &mut rng);

    // (I − |ψ⟩⟨ψ|) ρ (I − |ψ⟩⟨ψ|) via rank-one updates:
    // ρ − w ψ† − ψ w† + μ ψ ψ†, with w = ρψ and μ = ψ†ρψ.
    let support = cfg.target.support();
    let mut w = vec![Complex64::ZERO; d];
    for r in 0..d {
        for &(b, vb) in &support {
            w[r] += rho[(r, b)] * vb;
        }
    }
    let mut mu = Complex64::ZERO;
    for &(a, va) in &support {
        mu += w[a] * va;
    }
    let mut proj = rho.clone();
    for &(a, va) in &support {
        for c in 0..d {
            proj[(a, c)] -= Complex64::new(va, 0.0) * w[c].conj();
        }
        for r in 0..d {
            proj[(r, a)] -= w[r] * va;
        }
        for &(b, vb) in &support {
            proj[(a, b)] += mu * (va * vb);
        }
    }

    let repaired = clamp_to_psd(&proj.hermitize());
    let tr = repaired.trace().re;
    let rest = if tr > 1e-12 {
        repaired.scale(Complex64::new((1.0 - f) / tr, 0.0))
    } else {
        // effectively impossible for a Ginibre draw; fall back to the flat
        // state on the orthogonal complement
        let mut flat = CMatrix::identity(d).sub(sigma.mat());
        flat = flat.scale(Complex64::new((1.0 - f) / (d as f64 - 1.0), 0.0));
        flat
    };

    let mut out = rest;
    let sweight = Complex64::new(f, 0.0);
    for r in 0..d {
        for c in 0..d {
            let s = sigma.mat()[(r, c)];
            if s != Complex64::ZERO {
                out[(r, c)] += sweight * s;
            }
        }
    }
    Ok(DensityMatrix::new_psd_by_construction(out)?)
}

/// G G† / tr(G G†) with i.i.d. standard complex Gaussian entries.
fn ginibre_density(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gg = g.mul(&g.adjoint());
    let tr = gg.trace().re;
    gg.scale(Complex64::new(1.0 / tr, 0.0))
}
