//! Reproducible random streams.
//!
//! Every random decision draws from a ChaCha8 stream whose key is the
//! SHA-256 digest of `(seed, case_id, transform_index, modality)`. Streams
//! never share state, so results do not depend on evaluation order or on
//! how cases are distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Which consumer a substream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Modality {
    /// Firing decisions and geometry shared by all volumes of a case.
    Shared = 0,
    Ct = 1,
    Pet = 2,
}

const DOMAIN: &[u8] = b"petct-datakit/substream/v1";

pub fn substream(seed: u64, case_id: &str, transform_index: usize, modality: Modality) -> Stream {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(seed.to_le_bytes());
    h.update((case_id.len() as u64).to_le_bytes());
    h.update(case_id.as_bytes());
    h.update((transform_index as u64).to_le_bytes());
    h.update([modality as u8]);
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Child seed for the `index`-th repetition of a run seeded with `seed`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"petct-datakit/seed/v1");
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
