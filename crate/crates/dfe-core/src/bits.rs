//! Bit-level conventions for basis indices.
//!
//! A computational-basis state of `n` qubits is stored as the `usize` whose
//! binary expansion reads the qubit outcomes left to right: **qubit 0 is the
//! most significant bit**. So for n = 3, index 4 = `0b100` is the state
//! |100⟩ (qubit 0 in |1⟩, qubits 1 and 2 in |0⟩).

/// Bit of `index` belonging to `qubit` (0-based from the most significant
/// end) in an `n`-qubit register. Returns 0 or 1.
#[inline]
pub fn bit(index: usize, qubit: usize, n: usize) -> u8 {
    debug_assert!(qubit < n);
    ((index >> (n - 1 - qubit)) & 1) as u8
}

/// Mask with a single 1 at `qubit`'s position.
#[inline]
pub fn qubit_mask(qubit: usize, n: usize) -> usize {
    debug_assert!(qubit < n);
    1 << (n - 1 - qubit)
}

/// Hamming weight (number of 1 bits).
#[inline]
pub fn weight(index: usize) -> u32 {
    index.count_ones()
}

/// All `n`-bit indices of Hamming weight `k`, ascending.
pub fn masks_of_weight(n: usize, k: usize) -> Vec<usize> {
    (0..1usize << n).filter(|&m| weight(m) as usize == k).collect()
}

/// Binomial coefficient C(n, k); fine for the desk-scale n used here.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Renders `index` as an `n`-character bitstring, qubit 0 first.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n).map(|q| if bit(index, q, n) == 1 { '1' } else { '0' }).collect()
}

/// Parses a bitstring (qubit 0 first) back into an index.
pub fn parse_bitstring(s: &str) -> Option<(usize, usize)> {
    let n = s.len();
    if n == 0 || n > usize::BITS as usize - 1 {
        return None;
    }
    let mut index = 0usize;
    for c in s.chars() {
        index <<= 1;
        match c {
            '0' => {}
            '1' => index |= 1,
            _ => return None,
        }
    }
    Some((index, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_convention() {
        // |100⟩ on 3 qubits: qubit 0 is set, the rest are not
        assert_eq!(bit(0b100, 0, 3), 1);
        assert_eq!(bit(0b100, 1, 3), 0);
        assert_eq!(bit(0b100, 2, 3), 0);
        assert_eq!(qubit_mask(0, 3), 0b100);
        assert_eq!(qubit_mask(2, 3), 0b001);
    }

    #[test]
    fn weight_enumeration() {
        assert_eq!(masks_of_weight(4, 0), vec![0]);
        assert_eq!(masks_of_weight(4, 4), vec![0b1111]);
        assert_eq!(masks_of_weight(4, 1), vec![1, 2, 4, 8]);
        assert_eq!(masks_of_weight(5, 2).len(), 10);
    }

    #[test]
    fn binomial_small_table() {
        // Pascal's triangle row checks and the symmetric edge cases
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(4, 5), 0);
        for n in 1..=16usize {
            for k in 1..n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
    }

    #[test]
    fn bitstring_round_trip() {
        for n in 1..=6 {
            for idx in 0..1usize << n {
                let s = bitstring(idx, n);
                assert_eq!(parse_bitstring(&s), Some((idx, n)));
            }
        }
        assert_eq!(parse_bitstring("01x"), None);
        assert_eq!(parse_bitstring(""), None);
        assert_eq!(bitstring(0b100, 3), "100");
    }
}
