// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Generator for one document. With a corpus seed the stream depends only on
/// `(seed, doc_id)`, so the order documents are processed in does not matter.
/// Without one it is seeded from the OS.
pub fn document_rng(seed: Option<u64>, doc_id: &str) -> ChaCha20Rng {
    match seed {
        Some(seed) => {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(doc_id.as_bytes());
            ChaCha20Rng::from_seed(h.finalize().into())
        }
        None => ChaCha20Rng::from_entropy(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn seeded_streams() {
        let a: u64 = document_rng(Some(7), "a").gen();
        assert_eq!(a, document_rng(Some(7), "a").gen::<u64>());
        assert_ne!(a, document_rng(Some(7), "b").gen::<u64>());
        assert_ne!(a, document_rng(Some(8), "a").gen::<u64>());
    }
}
