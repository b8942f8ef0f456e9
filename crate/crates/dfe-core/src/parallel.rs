//! Thread-count-independent parallel loops and compensated accumulation.
//!
//! The contract: any result produced through this module is bit-identical
//! whether it ran on one thread, sixteen, or the sequential (no-`parallel`)
//! build. That is achieved by splitting work into *fixed* index chunks that
//! depend only on the problem size — never on worker identity — and by
//! combining chunk partials sequentially in chunk order.

/// Samples per chunk in Monte Carlo loops. Part of the reproducibility
/// contract: changing it reshuffles which RNG stream serves which sample.
pub const SAMPLE_CHUNK: usize = 1024;

/// Maps `f` over `0..len`, returning results in index order.
///
/// With the `parallel` feature the map fans out over the ambient rayon pool;
/// without it, it is a plain sequential loop. Output order is identical.
pub fn map_indexed<T: Send>(len: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Always-sequential variant, kept available in every build so benchmarks can
/// compare the two paths within one binary.
pub fn map_indexed_seq<T>(len: usize, f: impl FnMut(usize) -> T) -> Vec<T> {
    (0..len).map(f).collect()
}

/// Number of [`SAMPLE_CHUNK`]-sized chunks covering `len` items.
pub fn chunk_count(len: usize) -> usize {
    len.div_ceil(SAMPLE_CHUNK)
}

/// Index range of chunk `c` within `0..len`.
pub fn chunk_range(c: usize, len: usize) -> std::ops::Range<usize> {
    let start = c * SAMPLE_CHUNK;
    start..((start + SAMPLE_CHUNK).min(len))
}

/// Neumaier-compensated sum. `merge` folds another accumulator in a fixed
/// (sum, then compensation) order, so sequentially merging ordered partials
/// is deterministic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: Kahan) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Chunked compensated mean of `len` random draws.
///
/// Chunk `c` gets its own RNG stream derived from `(master, path ++ [c])` and
/// evaluates `sample` once per covered index, in order; partials are merged
/// in chunk order. The layout and streams depend only on `(len, master,
/// path)`, so the result is bit-identical for every thread count.
pub fn seeded_mean(
    len: usize,
    master: u64,
    path: &[u64],
    sample: impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync + Send,
) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let parts = map_indexed(chunk_count(len), |c| {
        let mut chunk_path = path.to_vec();
        chunk_path.push(c as u64);
        let mut rng = crate::rng::stream(master, &chunk_path);
        let mut acc = Kahan::new();
        for _ in chunk_range(c, len) {
            acc.add(sample(&mut rng));
        }
        acc
    });
    let mut total = Kahan::new();
    for p in parts {
        total.merge(p);
    }
    total.value() / len as f64
}

/// Always-sequential twin of [`seeded_mean`]: same chunk layout, same RNG
/// streams, same merge order, no thread pool. Bit-identical output.
pub fn seeded_mean_seq(
    len: usize,
    master: u64,
    path: &[u64],
    mut sample: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> f64,
) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let mut total = Kahan::new();
    for c in 0..chunk_count(len) {
        let mut chunk_path = path.to_vec();
        chunk_path.push(c as u64);
        let mut rng = crate::rng::stream(master, &chunk_path);
        let mut acc = Kahan::new();
        for _ in chunk_range(c, len) {
            acc.add(sample(&mut rng));
        }
        total.merge(acc);
    }
    total.value() / len as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_adversarial_sum() {
        // 1 + 1e-16 repeated: naive summation loses the small terms entirely
        let mut k = Kahan::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1000.0 * 1e-16)).abs() < 1e-18);
    }

    #[test]
    fn seeded_mean_of_uniforms_is_near_half() {
        let mean = seeded_mean(200_000, 3, &[1], |rng| {
            use rand::Rng;
            rng.random::<f64>()
        });
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn sequential_twin_matches_bit_for_bit() {
        for len in [1usize, 1000, 1024, 3210] {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                use rand::Rng;
                rng.random::<f64>() - rng.random::<f64>()
            };
            let a = seeded_mean(len, 42, &[5, 6], draw);
            let b = seeded_mean_seq(len, 42, &[5, 6], draw);
            assert_eq!(a.to_bits(), b.to_bits(), "len = {len}");
        }
    }

    #[test]
    fn chunk_layout_covers_everything_once() {
        for len in [0usize, 1, 1023, 1024, 1025, 4096, 5000] {
            let mut seen = vec![false; len];
            for c in 0..chunk_count(len) {
                for i in chunk_range(c, len) {
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            assert!(seen.into_iter().all(|b| b));
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn identical_results_across_pool_sizes() {
        let run = || {
            seeded_mean(10_000, 9, &[7], |rng| {
                use rand::Rng;
                rng.random::<f64>()
            })
        };
        let base = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        for threads in [2usize, 8] {
            let v = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(run);
            assert_eq!(v.to_bits(), base.to_bits(), "threads = {threads}");
        }
        assert_eq!(map_indexed_seq(3, |i| i * i), vec![0, 1, 4]);
    }
}
