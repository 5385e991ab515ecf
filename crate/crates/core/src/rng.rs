//! Seed plumbing.
//!
//! All randomness in the toolkit flows from a single `u64` master seed. Each
//! consumer derives its own generator from the master seed plus a list of
//! labels (command name, step index, run id, ...). Derivation hashes the
//! labels, so the stream a consumer sees never depends on how many draws
//! other consumers made or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a sub-stream path.
#[derive(Debug, Clone, Copy)]
pub enum Label<'a> {
    Name(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label<'_> {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

impl From<u32> for Label<'_> {
    fn from(i: u32) -> Self {
        Label::Index(u64::from(i))
    }
}

/// Derives a child seed from `master` and a label path.
pub fn derive_seed(master: u64, path: &[Label<'_>]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for label in path {
        match label {
            Label::Name(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
        }
    }
    let out = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    u64::from_le_bytes(bytes)
}

/// Generator for the sub-stream `path` under `master`.
pub fn stream(master: u64, path: &[Label<'_>]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

#[macro_export]
#[doc(hidden)]
macro_rules! labels {
    ($($x:expr),* $(,)?) => {
        &[$($crate::rng::Label::from($x)),*]
    };
}
