//! Seed derivation.
//!
//! Every stochastic consumer gets its own ChaCha stream whose seed is a stable
//! hash of the master seed, a component label and the cell indices. Streams are
//! therefore independent of execution order and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derives a child seed from `(master, label, indices)`.
pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix(master ^ fnv1a(label.as_bytes()));
    for &i in indices {
        h = splitmix(h ^ splitmix(i));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, label: &str, indices: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(master, label, indices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        let a = derive_seed(7, "prior", &[1, 2]);
        assert_eq!(a, derive_seed(7, "prior", &[1, 2]));
        assert_ne!(a, derive_seed(7, "prior", &[2, 1]));
        assert_ne!(a, derive_seed(7, "split", &[1, 2]));
        assert_ne!(a, derive_seed(8, "prior", &[1, 2]));
    }
}
