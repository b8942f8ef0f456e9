//! Dense complex matrices at desk scale, plus the single-qubit measurement
//! rotations and their exact trace elements.
//!
//! Everything is row-major `Vec<Complex64>`; no sparsity, no cleverness. The
//! intended regime is at most [`max_qubits`] qubits (default 12, i.e.
//! 4096×4096), where dense storage and cubic matmul are perfectly serviceable
//! and far easier to audit than a structured representation.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;


/// Validation tolerances for untrusted density matrices, and the thresholds
/// shared by downstream consumers of distributions. Centralized so every
/// boundary check in the crate agrees on what "close enough" means.
pub mod tol {
    /// Max allowed |m[a][b] − conj(m[b][a])| for a matrix accepted as Hermitian.
    pub const HERMITICITY: f64 = 1e-10;
    /// Max allowed |tr(m) − 1| for a matrix accepted as normalized.
    pub const TRACE: f64 = 1e-10;
    /// Minimum eigenvalue floor: eigenvalues above this count as nonnegative.
    pub const PSD_FLOOR: f64 = -1e-9;
    /// Max allowed |Σp − 1| for an outcome distribution before renormalizing.
    pub const DISTRIBUTION_SUM: f64 = 1e-9;
    /// Probabilities in [−PROB_CLAMP, 0) are rounded up to exactly 0.
    pub const PROB_CLAMP: f64 = 1e-12;
    /// Characteristic weights with |χ| ≤ this are treated as exact zeros.
    pub const CHAR_ZERO: f64 = 1e-12;
}

/// Hard ceiling on the qubit count, regardless of environment overrides.
/// Index arithmetic (4^n entries in a `Vec`) is comfortable well past this,
/// but dense matrices beyond it stop being desk scale.
pub const HARD_MAX_QUBITS: usize = 16;

/// Default qubit cap when `DFE_MAX_QUBITS` is unset or unparseable.
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Global qubit cap: `DFE_MAX_QUBITS` from the environment (clamped to
/// [`HARD_MAX_QUBITS`]), else [`DEFAULT_MAX_QUBITS`]. Read once per process.
pub fn max_qubits() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("DFE_MAX_QUBITS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| n.min(HARD_MAX_QUBITS))
            .unwrap_or(DEFAULT_MAX_QUBITS)
    })
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        CMatrix { dim, data: vec![Complex64::ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Builds from a row-major entry list; `None` if the length is not a square.
    pub fn from_row_major(data: Vec<Complex64>) -> Option<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        (dim >= 1 && dim * dim == data.len()).then_some(CMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    /// Hermitian part (M + M†)/2.
    pub fn hermitize(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&rhs.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&rhs.data) {
            *v -= w;
        }
        out
    }

    /// Plain cubic matmul, i-k-j loop order for contiguous inner access.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in mul");
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == Complex64::ZERO {
                    continue;
                }
                let rrow = &rhs.data[k * d..(k + 1) * d];
                let orow = &mut out.data[i * d..(i + 1) * d];
                for (o, &r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        out
    }

    /// Largest entry-wise |self − rhs|.
    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.dim, self.dim)?;
        for r in 0..self.dim.min(8) {
            write!(f, "  ")?;
            for c in 0..self.dim.min(8) {
                let z = self[(r, c)];
                write!(f, "{:+.3}{:+.3}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        if self.dim > 8 {
            writeln!(f, "  …")?;
        }
        write!(f, "]")
    }
}

/// Kronecker product. Panics if the result would exceed the hard qubit cap —
/// oversized inputs are a programming error, not user input.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let d = a.dim * b.dim;
    assert!(d <= 1 << HARD_MAX_QUBITS, "kron result dimension {d} beyond hard cap");
    let mut out = CMatrix::zeros(d);
    for ar in 0..a.dim {
        for ac in 0..a.dim {
            let av = a[(ar, ac)];
            if av == Complex64::ZERO {
                continue;
            }
            for br in 0..b.dim {
                for bc in 0..b.dim {
                    out[(ar * b.dim + br, ac * b.dim + bc)] = av * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// The three single-qubit measurement rotations: identity (measure Z),
/// Hadamard (measure X), Hadamard·S† (measure Y). Applying the rotation and
/// then reading out in the computational basis realizes the named Pauli
/// measurement.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum LocalUnitary {
    /// Z basis — no rotation.
    Identity,
    /// X basis — H = (1/√2)[[1, 1], [1, −1]].
    Hadamard,
    /// Y basis — H·S† = (1/√2)[[1, −i], [1, i]].
    HadamardSdg,
}

impl LocalUnitary {
    pub const ALL: [LocalUnitary; 3] =
        [LocalUnitary::Identity, LocalUnitary::Hadamard, LocalUnitary::HadamardSdg];

    /// The rotation's 2×2 matrix (floating point; for exact trace elements
    /// use [`local_trace_element`]).
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        use std::f64::consts::FRAC_1_SQRT_2 as R;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            LocalUnitary::Identity => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
            LocalUnitary::Hadamard => [[c(R, 0.0), c(R, 0.0)], [c(R, 0.0), c(-R, 0.0)]],
            LocalUnitary::HadamardSdg => [[c(R, 0.0), c(0.0, -R)], [c(R, 0.0), c(0.0, R)]],
        }
    }

    /// Measurement-basis letter: 'Z', 'X' or 'Y'.
    pub fn basis_char(self) -> char {
        match self {
            LocalUnitary::Identity => 'Z',
            LocalUnitary::Hadamard => 'X',
            LocalUnitary::HadamardSdg => 'Y',
        }
    }

    /// Phase exponent table: entry (r, c) of the rotation is i^p / √2 for the
    /// rotated bases, δ for the identity. Drives the exact arithmetic below.
    fn phase_exp(self, r: u8, c: u8) -> Option<u8> {
        match self {
            LocalUnitary::Identity => None,
            // H: all entries +1 except (1,1) = −1 = i².
            LocalUnitary::Hadamard => Some(if r == 1 && c == 1 { 2 } else { 0 }),
            // H·S†: [[1, −i], [1, i]] → phases [[0, 3], [0, 1]].
            LocalUnitary::HadamardSdg => Some(match (r, c) {
                (0, 1) => 3,
                (1, 1) => 1,
                _ => 0,
            }),
        }
    }
}

/// ⟨bra| U† |outcome⟩⟨outcome| U |ket⟩ for a single qubit, computed exactly.
///
/// For the rotated bases every value is one of 0, ±1/2, ±i/2; for the Z
/// basis it is δ(outcome,bra)·δ(outcome,ket). The phase bookkeeping is
/// integer arithmetic, so results are bit-exact dyadics — downstream snapshot
/// products and sign rules rely on that.
pub fn local_trace_element(u: LocalUnitary, bra: u8, outcome: u8, ket: u8) -> Complex64 {
    debug_assert!(bra <= 1 && outcome <= 1 && ket <= 1);
    match u.phase_exp(0, 0) {
        None => {
            // identity: conj(δ(outcome,bra)) · δ(outcome,ket)
            if outcome == bra && outcome == ket {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        }
        Some(_) => {
            // conj(i^p1 /√2) · i^p2 /√2 = i^(p2 − p1 mod 4) / 2
            let p1 = u.phase_exp(outcome, bra).unwrap();
            let p2 = u.phase_exp(outcome, ket).unwrap();
            let q = (4 + p2 - p1) % 4;
            match q {
                0 => Complex64::new(0.5, 0.0),
                1 => Complex64::new(0.0, 0.5),
                2 => Complex64::new(-0.5, 0.0),
                _ => Complex64::new(0.0, -0.5),
            }
        }
    }
}

/// Why a matrix was rejected as a density matrix.
#[derive(Debug, Error)]
pub enum DensityError {
    #[error("dimension {dim} is not a power of two")]
    BadDimension { dim: usize },
    #[error("{n} qubits exceeds the configured cap of {max}")]
    TooManyQubits { n: usize, max: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("not Hermitian: max |m − m†| deviation {max_dev:.3e} exceeds {limit:.1e}", limit = tol::HERMITICITY)]
    NotHermitian { max_dev: f64 },
    #[error("trace {trace:.17} differs from 1 by more than {limit:.1e}", limit = tol::TRACE)]
    TraceNotOne { trace: f64 },
    #[error("not positive semidefinite: min eigenvalue {min_eig:.3e} below {limit:.1e}", limit = tol::PSD_FLOOR)]
    NotPsd { min_eig: f64 },
}

/// A validated n-qubit density matrix: Hermitian, unit trace, PSD within
/// [`tol`]. The only public routes in are [`validate_density`] /
/// [`DensityMatrix::new`], so holding one is proof of validity.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates and wraps; see [`validate_density`].
    pub fn new(mat: CMatrix) -> Result<Self, DensityError> {
        validate_density(mat)
    }

    /// For matrices built internally by PSD-preserving steps (projection of a
    /// PSD matrix, eigenvalue clamping, convex mixing). Checks everything
    /// except the eigenvalue floor, which holds by construction; full
    /// validation would repeat an O(d³) eigendecomposition for nothing.
    pub(crate) fn new_psd_by_construction(mat: CMatrix) -> Result<Self, DensityError> {
        let n = checked_qubit_count(&mat)?;
        check_finite_hermitian_trace(&mat)?;
        Ok(DensityMatrix { n, mat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    /// Real diagonal (the computational-basis outcome distribution).
    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }
}

fn checked_qubit_count(mat: &CMatrix) -> Result<usize, DensityError> {
    let dim = mat.dim();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(DensityError::BadDimension { dim });
    }
    let n = dim.trailing_zeros() as usize;
    let max = max_qubits();
    if n > max {
        return Err(DensityError::TooManyQubits { n, max });
    }
    Ok(n)
}

fn check_finite_hermitian_trace(mat: &CMatrix) -> Result<(), DensityError> {
    if !mat.is_finite() {
        return Err(DensityError::NonFinite);
    }
    let dim = mat.dim();
    let mut max_dev: f64 = 0.0;
    for r in 0..dim {
        for c in r..dim {
            max_dev = max_dev.max((mat[(r, c)] - mat[(c, r)].conj()).norm());
        }
    }
    if max_dev > tol::HERMITICITY {
        return Err(DensityError::NotHermitian { max_dev });
    }
    let trace = mat.trace().re;
    if (trace - 1.0).abs() > tol::TRACE {
        return Err(DensityError::TraceNotOne { trace });
    }
    Ok(())
}

/// Full validation of an untrusted matrix: power-of-two dimension within the
/// qubit cap, finite entries, Hermitian and unit trace within [`tol`], and
/// minimum eigenvalue at or above the PSD floor.
pub fn validate_density(mat: CMatrix) -> Result<DensityMatrix, DensityError> {
    let n = checked_qubit_count(&mat)?;
    check_finite_hermitian_trace(&mat)?;
    let min_eig = hermitian_eigenvalues(&mat).into_iter().fold(f64::INFINITY, f64::min);
    if min_eig < tol::PSD_FLOOR {
        return Err(DensityError::NotPsd { min_eig });
    }
    Ok(DensityMatrix { n, mat })
}

fn to_nalgebra(m: &CMatrix) -> nalgebra::DMatrix<Complex64> {
    let d = m.dim();
    nalgebra::DMatrix::from_fn(d, d, |r, c| m[(r, c)])
}

/// Eigenvalues of a (numerically) Hermitian matrix, unordered.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    to_nalgebra(m).symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Projects a numerically-Hermitian matrix onto the PSD cone by clamping
/// negative eigenvalues to zero in its eigenbasis. Trace shrinks by the
/// clamped mass; callers renormalize.
pub(crate) fn clamp_to_psd(m: &CMatrix) -> CMatrix {
    let eig = to_nalgebra(m).symmetric_eigen();
    let d = m.dim();
    let mut out = CMatrix::zeros(d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for r in 0..d {
            let vr = v[r] * Complex64::new(lambda, 0.0);
            for c in 0..d {
                out[(r, c)] += vr * v[c].conj();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Hand-derived 4×4 Kronecker oracle, frozen before kron was written:
    // A = [[1, i], [0, 2]], B = [[3, 0], [1, −1]]
    // A⊗B = [[3,0,3i,0],[1,−1,i,−i],[0,0,6,0],[0,0,2,−2]]
    #[test]
    fn kron_matches_hand_oracle() {
        let a = CMatrix::from_row_major(vec![c(1., 0.), c(0., 1.), c(0., 0.), c(2., 0.)]).unwrap();
        let b = CMatrix::from_row_major(vec![c(3., 0.), c(0., 0.), c(1., 0.), c(-1., 0.)]).unwrap();
        let expect = CMatrix::from_row_major(vec![
            c(3., 0.), c(0., 0.), c(0., 3.), c(0., 0.),
            c(1., 0.), c(-1., 0.), c(0., 1.), c(0., -1.),
            c(0., 0.), c(0., 0.), c(6., 0.), c(0., 0.),
            c(0., 0.), c(0., 0.), c(2., 0.), c(-2., 0.),
        ])
        .unwrap();
        assert_eq!(kron(&a, &b), expect);
    }

    #[test]
    fn kron_trace_is_multiplicative() {
        let a = CMatrix::from_fn(3, |r, c_| c((r * 3 + c_) as f64, (r as f64) - 1.0));
        let b = CMatrix::from_fn(2, |r, c_| c(1.0 + r as f64 * 0.5, c_ as f64));
        let lhs = kron(&a, &b).trace();
        let rhs = a.trace() * b.trace();
        assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-12);
        assert_relative_eq!(lhs.im, rhs.im, max_relative = 1e-12);
    }

    #[test]
    fn matmul_against_adjoint_identity() {
        // H is self-inverse; HS† times its adjoint is the identity
        for u in LocalUnitary::ALL {
            let m = CMatrix::from_fn(2, |r, c_| u.matrix()[r][c_]);
            let prod = m.mul(&m.adjoint());
            assert!(prod.max_abs_diff(&CMatrix::identity(2)) < 1e-15, "{u:?}");
        }
    }

    /// The twelve rotated-basis trace elements with bra ≠ ket, frozen by hand
    /// from the 2×2 matrices before the implementation existed. Tuples are
    /// (bra, outcome, ket) → (X value, Y value); Z value is 0 for all four.
    #[test]
    fn off_diagonal_trace_elements_exact() {
        let cases: [(u8, u8, u8, Complex64, Complex64); 4] = [
            (0, 0, 1, c(0.5, 0.0), c(0.0, -0.5)),
            (0, 1, 1, c(-0.5, 0.0), c(0.0, 0.5)),
            (1, 0, 0, c(0.5, 0.0), c(0.0, 0.5)),
            (1, 1, 0, c(-0.5, 0.0), c(0.0, -0.5)),
        ];
        for (bra, o, ket, x, y) in cases {
            assert_eq!(local_trace_element(LocalUnitary::Hadamard, bra, o, ket), x);
            assert_eq!(local_trace_element(LocalUnitary::HadamardSdg, bra, o, ket), y);
            assert_eq!(
                local_trace_element(LocalUnitary::Identity, bra, o, ket),
                Complex64::ZERO
            );
        }
    }

    #[test]
    fn diagonal_trace_elements_exact() {
        for bra in 0..=1u8 {
            for o in 0..=1u8 {
                for u in [LocalUnitary::Hadamard, LocalUnitary::HadamardSdg] {
                    assert_eq!(local_trace_element(u, bra, o, bra), c(0.5, 0.0));
                }
                let z = local_trace_element(LocalUnitary::Identity, bra, o, bra);
                assert_eq!(z, if bra == o { Complex64::ONE } else { Complex64::ZERO });
            }
        }
    }

    #[test]
    fn exact_elements_match_float_matrices() {
        for u in LocalUnitary::ALL {
            let m = u.matrix();
            for bra in 0..=1u8 {
                for o in 0..=1u8 {
                    for ket in 0..=1u8 {
                        let float = m[o as usize][bra as usize].conj() * m[o as usize][ket as usize];
                        let exact = local_trace_element(u, bra, o, ket);
                        assert!((float - exact).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn validate_rejects_bad_inputs() {
        // dimension 3 is not a power of two
        assert!(matches!(
            validate_density(CMatrix::identity(3)),
            Err(DensityError::BadDimension { dim: 3 })
        ));
        // non-Hermitian
        let mut m = CMatrix::zeros(2);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(0.3, 0.0);
        assert!(matches!(validate_density(m.clone()), Err(DensityError::NotHermitian { .. })));
        // fix hermiticity but break the trace
        m[(1, 0)] = c(0.3, 0.0);
        m[(1, 1)] = c(0.6, 0.0);
        assert!(matches!(validate_density(m.clone()), Err(DensityError::TraceNotOne { .. })));
        // valid trace but indefinite: eigenvalues 0.5 ± 0.6
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(0.6, 0.0);
        m[(1, 0)] = c(0.6, 0.0);
        assert!(matches!(validate_density(m.clone()), Err(DensityError::NotPsd { .. })));
        // NaN entries
        let mut bad = CMatrix::identity(2).scale(c(0.5, 0.0));
        bad[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(validate_density(bad), Err(DensityError::NonFinite)));
        // the maximally mixed state passes
        let mixed = CMatrix::identity(4).scale(c(0.25, 0.0));
        let dm = validate_density(mixed).unwrap();
        assert_eq!(dm.n(), 2);
        assert_eq!(dm.diagonal_real(), vec![0.25; 4]);
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        // diag(1, −1)
        let mut z = CMatrix::zeros(2);
        z[(0, 0)] = c(1.0, 0.0);
        z[(1, 1)] = c(-1.0, 0.0);
        let mut eigs = hermitian_eigenvalues(&z);
        eigs.sort_by(f64::total_cmp);
        assert_relative_eq!(eigs[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[1], 1.0, epsilon = 1e-12);

        // [[0, −i], [i, 0]] also has eigenvalues ±1
        let mut y = CMatrix::zeros(2);
        y[(0, 1)] = c(0.0, -1.0);
        y[(1, 0)] = c(0.0, 1.0);
        let mut eigs = hermitian_eigenvalues(&y);
        eigs.sort_by(f64::total_cmp);
        assert_relative_eq!(eigs[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_invariants_on_pseudorandom_hermitian() {
        // deterministic pseudo-random Hermitian via integer mixing
        for d in [2usize, 3, 8, 16, 32] {
            let mut m = CMatrix::zeros(d);
            let f = |r: usize, cc: usize, s: u64| {
                let h = crate::rng::derive_key(s, &[r as u64, cc as u64]);
                (h as f64 / u64::MAX as f64) - 0.5
            };
            for r in 0..d {
                for cc in 0..d {
                    m[(r, cc)] = c(f(r, cc, 1), f(r, cc, 2));
                }
            }
            let h = m.hermitize();
            let eigs = hermitian_eigenvalues(&h);
            let tr: f64 = (0..d).map(|i| h[(i, i)].re).sum();
            let tr2: f64 = h.mul(&h).trace().re;
            assert_relative_eq!(eigs.iter().sum::<f64>(), tr, epsilon = 1e-9 * d as f64);
            assert_relative_eq!(
                eigs.iter().map(|l| l * l).sum::<f64>(),
                tr2,
                epsilon = 1e-9 * d as f64
            );
        }
    }

    #[test]
    fn clamp_zeroes_negative_modes() {
        // diag(0.8, 0.4, −0.2, 0) → clamp → diag(0.8, 0.4, 0, 0)
        let mut m = CMatrix::zeros(4);
        for (i, v) in [0.8, 0.4, -0.2, 0.0].into_iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        let p = clamp_to_psd(&m);
        let eigs = {
            let mut e = hermitian_eigenvalues(&p);
            e.sort_by(f64::total_cmp);
            e
        };
        assert!(eigs[0] > -1e-12);
        assert_relative_eq!(p.trace().re, 1.2, epsilon = 1e-12);
        assert_relative_eq!(p[(0, 0)].re, 0.8, epsilon = 1e-12);
        assert_relative_eq!(p[(2, 2)].re, 0.0, epsilon = 1e-12);
    }
}
