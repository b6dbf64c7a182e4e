//! Counter-based random number generation.
//!
//! Edge sampling and trial seeding must be reproducible regardless of thread
//! count and evaluation order, so instead of a stateful generator we use a
//! splitmix64-style keyed construction: `value(seed, rank)` is a pure
//! function of the seed and a 64-bit counter. Any pair (edge, trial, ...)
//! can be assigned a rank and drawn independently on any thread.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a key into a seed. Chaining `combine` hashes a tuple of keys.
#[inline]
pub fn combine(seed: u64, key: u64) -> u64 {
    mix(seed ^ mix(key.wrapping_add(GOLDEN)))
}

/// Stateless generator: the k-th draw is `mix(state + (k+1)·GOLDEN)`,
/// i.e. the splitmix64 stream indexed directly by its counter. The user
/// seed is passed through the finalizer once at construction; callers
/// hand out consecutive seeds (trial 0, 1, 2, …) and the raw stream is
/// visibly biased across such near-identical states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            seed: mix(seed ^ 0xA076_1D64_78BD_642F),
        }
    }

    /// Raw 64-bit draw for the given counter value.
    #[inline]
    pub fn bits(&self, rank: u64) -> u64 {
        mix(self
            .seed
            .wrapping_add(rank.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in [0, 1) for the given counter value.
    #[inline]
    pub fn uniform(&self, rank: u64) -> f64 {
        // 53 high-quality bits into the mantissa.
        (self.bits(rank) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_deterministic() {
        let a = CounterRng::new(42);
        let b = CounterRng::new(42);
        for rank in 0..100 {
            assert_eq!(a.bits(rank), b.bits(rank));
        }
    }

    #[test]
    fn distinct_seeds_differ() {
        let a = CounterRng::new(1);
        let b = CounterRng::new(2);
        assert!((0..64).any(|r| a.bits(r) != b.bits(r)));
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let rng = CounterRng::new(0xDEAD_BEEF);
        let mut sum = 0.0;
        let n = 10_000;
        for rank in 0..n {
            let u = rng.uniform(rank);
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        // mean of 10^4 uniforms: sd ~ 0.0029, allow 5 sigma
        assert!((mean - 0.5).abs() < 0.015, "mean {mean}");
    }

    #[test]
    fn combine_is_order_sensitive() {
        let s1 = combine(combine(7, 1), 2);
        let s2 = combine(combine(7, 2), 1);
        assert_ne!(s1, s2);
    }
}
