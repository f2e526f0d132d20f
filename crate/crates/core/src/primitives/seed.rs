use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Derives independent child seeds from a master seed.
///
/// child = first 8 bytes (LE) of SHA-256(master ‖ index ‖ tag).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProtocol {
    pub master_seed: u64,
}

impl SeedProtocol {
    pub fn new(master_seed: u64) -> Self {
        SeedProtocol { master_seed }
    }

    pub fn child(&self, index: u64, tag: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.master_seed.to_le_bytes());
        h.update(index.to_le_bytes());
        h.update(tag.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    /// A protocol rooted at a child seed, for nested derivations.
    pub fn derive(&self, index: u64, tag: &str) -> SeedProtocol {
        SeedProtocol::new(self.child(index, tag))
    }
}
