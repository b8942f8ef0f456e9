//! Density-matrix file format: a small JSON object with round-trip-exact
//! floats.
//!
//! ```json
//! {
//!   "n": 2,
//!   "entries": [[re, im], [re, im], …]
//! }
//! ```
//!
//! `entries` lists the 4^n matrix elements in row-major order. The writer
//! prints every float with enough digits to reproduce the exact bit pattern;
//! the reader validates the parsed matrix as a physical density matrix.

use crate::linalg::{validate_density, CMatrix, DensityError, DensityMatrix};
use crate::serialize::f64_repr;
use num_complex::Complex64;
use serde::Deserialize;
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StateIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("failed to parse state file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("state file declares n = {n} ({expected} entries) but contains {got}")]
    EntryCount { n: usize, expected: usize, got: usize },
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Deserialize)]
struct DensityFile {
    n: usize,
    entries: Vec<(f64, f64)>,
}

/// Writes a density matrix in the documented JSON format with exact floats.
pub fn write_density(out: &mut impl Write, rho: &DensityMatrix) -> io::Result<()> {
    let dim = rho.dim();
    writeln!(out, "{{")?;
    writeln!(out, "  \"n\": {},", rho.n())?;
    writeln!(out, "  \"entries\": [")?;
    for r in 0..dim {
        for c in 0..dim {
            let z = rho.mat()[(r, c)];
            let sep = if r == dim - 1 && c == dim - 1 { "" } else { "," };
            writeln!(out, "    [{}, {}]{}", f64_repr(z.re), f64_repr(z.im), sep)?;
        }
    }
    writeln!(out, "  ]")?;
    writeln!(out, "}}")
}

/// Reads and fully validates a density matrix written by [`write_density`]
/// (or any JSON matching the format).
pub fn read_density(input: &mut impl Read) -> Result<DensityMatrix, StateIoError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let file: DensityFile = serde_json::from_str(&text)?;
    let dim = 1usize
        .checked_shl(file.n as u32)
        .filter(|_| file.n <= crate::linalg::HARD_MAX_QUBITS)
        .ok_or(DensityError::TooManyQubits {
            n: file.n,
            max: crate::linalg::HARD_MAX_QUBITS,
        })?;
    let expected = dim * dim;
    if file.entries.len() != expected {
        return Err(StateIoError::EntryCount {
            n: file.n,
            expected,
            got: file.entries.len(),
        });
    }
    let data: Vec<Complex64> =
        file.entries.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    let mat = CMatrix::from_row_major(data).expect("entry count checked square");
    Ok(validate_density(mat)?)
}
