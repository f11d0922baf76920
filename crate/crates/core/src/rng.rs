//! Deterministic, splittable pseudo-random streams.
//!
//! Every consumer of randomness in the crate obtains an [`RngStream`] through
//! [`RngStream::derive`], keyed by a master seed and a label such as
//! `[replication, learner, purpose]`. Streams never share state, so work can be
//! scheduled on any number of threads without changing a single draw.
//!
//! The generator is xoshiro256** seeded through SplitMix64. Seed and label
//! are absorbed with the SplitMix64 finalizer (a 64-bit avalanche mix), one
//! label word at a time, length first. Gaussian draws use Box-Muller with the
//! transcendental functions taken from `libm`, so the floating-point sequence
//! is also identical across hosts.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const DOMAIN_TAG: u64 = 0x5253_534C_5354_524D;

/// Purpose tags used as the last label word of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Bootstrap = 1,
    Subset = 2,
    Generate = 3,
    Split = 4,
    Tree = 5,
}

impl Purpose {
    pub fn tag(self) -> u64 {
        self as u64
    }
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    state: [u64; 4],
    spare_gaussian: Option<f64>,
}

impl RngStream {
    /// Derives the stream for `(master_seed, label)`.
    ///
    /// Panics if `label` is empty.
    pub fn derive(master_seed: u64, label: &[u64]) -> Self {
        assert!(!label.is_empty(), "stream label must be non-empty");
        let mut h = mix64(master_seed ^ DOMAIN_TAG);
        h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ label.len() as u64);
        for &word in label {
            h = mix64(h.wrapping_add(GOLDEN_GAMMA) ^ mix64(word ^ DOMAIN_TAG));
        }

        let mut sm = h;
        let mut state = [0u64; 4];
        for slot in &mut state {
            sm = sm.wrapping_add(GOLDEN_GAMMA);
            *slot = mix64(sm);
        }
        if state == [0; 4] {
            state[0] = GOLDEN_GAMMA;
        }
        RngStream {
            state,
            spare_gaussian: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform real in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased integer in `[0, k)`, by rejection of the short final block.
    ///
    /// Panics if `k == 0`.
    pub fn next_index(&mut self, k: usize) -> usize {
        assert!(k > 0, "next_index on an empty range");
        let k = k as u64;
        let threshold = k.wrapping_neg() % k;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return (r % k) as usize;
            }
        }
    }

    /// Standard normal draw (Box-Muller, second value cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * libm::log(u1)).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn same_inputs_same_stream() {
        let mut a = RngStream::derive(42, &[3, 1, 2]);
        let mut b = RngStream::derive(42, &[3, 1, 2]);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn label_order_matters() {
        let mut a = RngStream::derive(0, &[1, 2]);
        let mut b = RngStream::derive(0, &[2, 1]);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn label_length_matters() {
        let firsts: HashSet<u64> = [&[0u64][..], &[0, 0], &[0, 0, 0]]
            .iter()
            .map(|l| RngStream::derive(9, l).next_u64())
            .collect();
        assert_eq!(firsts.len(), 3);
    }

    #[test]
    fn no_first_output_collisions_over_million_label_pairs() {
        let mut seen = HashSet::with_capacity(1_000_000);
        for a in 0..1000u64 {
            for b in 0..1000u64 {
                assert!(seen.insert(RngStream::derive(7, &[a, b]).next_u64()));
            }
        }
    }

    #[test]
    fn index_of_one_is_zero() {
        let mut rng = RngStream::derive(1, &[1]);
        for _ in 0..100 {
            assert_eq!(rng.next_index(1), 0);
        }
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut rng = RngStream::derive(2, &[1]);
        let n = 1_000_000;
        let mean = (0..n).map(|_| rng.next_uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() <= 0.002, "mean {mean}");
    }

    #[test]
    fn gaussian_variance_is_one() {
        let mut rng = RngStream::derive(3, &[1]);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "variance {var}");
    }

    #[test]
    fn index_is_roughly_uniform() {
        let mut rng = RngStream::derive(4, &[1]);
        let mut counts = [0usize; 7];
        let n = 70_000;
        for _ in 0..n {
            counts[rng.next_index(7)] += 1;
        }
        // chi-square, 6 dof; 22.46 is the 0.999 quantile
        let expected = n as f64 / 7.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 22.46, "chi2 {chi2}");
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = RngStream::derive(5, &[1]);
        let mut v: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    #[should_panic]
    fn empty_label_panics() {
        RngStream::derive(0, &[]);
    }
}
