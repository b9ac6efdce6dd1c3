//! Test-only oracles, independent of the library's implementation paths.
#![allow(dead_code)] // each integration test pulls what it needs

use sha2::{Digest as _, Sha256};

/// Brute-force Merkle tree hash straight from the recurrence: empty input
/// hashes to SHA256(""), a single leaf to SHA256(0x00 || leaf), and an
/// n-leaf tree splits at the largest power of two smaller than n with
/// SHA256(0x01 || left || right).
pub fn oracle_mth(leaves: &[Vec<u8>]) -> [u8; 32] {
    match leaves.len() {
        0 => Sha256::digest([]).into(),
        1 => {
            let mut h = Sha256::new();
            h.update([0x00]);
            h.update(&leaves[0]);
            h.finalize().into()
        }
        n => {
            let mut k = 1usize;
            while k * 2 < n {
                k *= 2;
            }
            let mut h = Sha256::new();
            h.update([0x01]);
            h.update(oracle_mth(&leaves[..k]));
            h.update(oracle_mth(&leaves[k..]));
            h.finalize().into()
        }
    }
}

/// Deterministic pseudorandom leaf material (splitmix-style), independent
/// of any RNG crate.
pub fn pseudorandom_leaves(count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    (0..count)
        .map(|_| {
            let len = (next() % 48) as usize;
            (0..=len).map(|_| next() as u8).collect()
        })
        .collect()
}
