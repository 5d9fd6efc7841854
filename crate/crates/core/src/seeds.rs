//! Named random substreams derived from one root seed.
//!
//! Each consumer (data generation, splitting, GMM init, CV folds, threshold
//! split) draws from its own stream, so changing how one component uses
//! randomness never reshuffles another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const DATAGEN: &str = "datagen";
pub const SPLIT: &str = "split";
pub const SPLIT_RATIO: &str = "split-ratio";
pub const GMM: &str = "gmm";
pub const SVM_CV: &str = "svm-cv";
pub const THRESHOLD_SPLIT: &str = "threshold-split";

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of substream `name` for repetition `index` under `root`.
pub fn substream(root: u64, name: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
