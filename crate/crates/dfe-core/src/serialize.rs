//! Stable text encoding for numbers the crate writes to files.
//!
//! Every float written to CSV or JSON output uses scientific notation with
//! 17 significant digits — the smallest count that round-trips any `f64`
//! exactly — so emitted files are byte-stable across runs and parse back to
//! bit-identical values. Readers use the ordinary standard-library / serde
//! parsers.

/// 17-significant-digit representation of a finite `f64`.
///
/// The output is valid JSON (e.g. `2.5000000000000000e-1`).
pub fn f64_repr(x: f64) -> String {
    debug_assert!(x.is_finite(), "refusing to serialize non-finite value");
    format!("{x:.16e}")
}
