//! Deterministic random streams.
//!
//! Every random decision in the crate draws from a stream obtained through
//! [`derive_stream`]: the SHA-256 digest of `(global_seed, scope, index,
//! purpose)` seeds a ChaCha8 generator. Streams never share state, so results
//! do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Identifier recorded in manifests for the derivation + generator pair.
pub const RNG_ALGORITHM_ID: &str = "sha256-chacha8-v1";

/// Generator behind every derived stream.
pub type StreamRng = ChaCha8Rng;

/// Derives an independent generator from four identifying inputs.
///
/// The digest input is the concatenation of the seed (8 bytes little-endian),
/// the scope string as a length-prefixed UTF-8 field, the index (8 bytes
/// little-endian), and the purpose tag as a length-prefixed field. Length
/// prefixes are 8-byte little-endian byte counts, which keeps distinct input
/// tuples from colliding on the same byte string.
pub fn derive_stream(global_seed: u64, scope: &str, index: u64, purpose: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update((scope.len() as u64).to_le_bytes());
    hasher.update(scope.as_bytes());
    hasher.update(index.to_le_bytes());
    hasher.update((purpose.len() as u64).to_le_bytes());
    hasher.update(purpose.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
