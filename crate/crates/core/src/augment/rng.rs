//! Reproducible random streams keyed by (seed, case, replicate, transform).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stable 64-bit seed for one replicate of one case.
pub fn case_seed(global_seed: u64, case_id: &str, replicate: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"neurovolve/case");
    h.update(global_seed.to_le_bytes());
    h.update((case_id.len() as u64).to_le_bytes());
    h.update(case_id.as_bytes());
    h.update(replicate.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// A ChaCha8 stream. Identical inputs produce identical streams on every
/// platform; floats are derived from raw `u64` draws, not from
/// platform-dependent distributions.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn derive(global_seed: u64, case_id: &str, replicate: u64, transform_index: u64) -> Self {
        Self::for_transform(case_seed(global_seed, case_id, replicate), transform_index)
    }

    pub fn for_transform(case_seed: u64, transform_index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"neurovolve/stream");
        h.update(case_seed.to_le_bytes());
        h.update(transform_index.to_le_bytes());
        Self {
            rng: ChaCha8Rng::from_seed(h.finalize().into()),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::for_transform(seed, u64::MAX)
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi); returns `lo` exactly when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Standard normal via Box-Muller on two `unit` draws.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_keyed() {
        let draw = |s: &mut RngStream| (0..4).map(|_| s.next_u64()).collect::<Vec<_>>();
        let a = draw(&mut RngStream::derive(7, "case", 0, 1));
        assert_eq!(a, draw(&mut RngStream::derive(7, "case", 0, 1)));
        assert_ne!(a, draw(&mut RngStream::derive(8, "case", 0, 1)));
        assert_ne!(a, draw(&mut RngStream::derive(7, "case2", 0, 1)));
        assert_ne!(a, draw(&mut RngStream::derive(7, "case", 1, 1)));
        assert_ne!(a, draw(&mut RngStream::derive(7, "case", 0, 2)));
    }

    #[test]
    fn known_case_seed() {
        // pinned against an independent SHA-256 computation so a change to
        // the derivation is caught
        let s = case_seed(42, "BraTS-PHANTOM-00000-000", 0);
        assert_eq!(s, 16809919255499492829);
        assert_ne!(s, case_seed(42, "BraTS-PHANTOM-00000-00", 0));
    }

    #[test]
    fn unit_range_and_degenerate_uniform() {
        let mut s = RngStream::from_seed(3);
        for _ in 0..1000 {
            let u = s.unit();
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(s.uniform(2.5, 2.5), 2.5);
        assert_eq!(s.uniform(0.0, 0.0), 0.0);
    }
}
