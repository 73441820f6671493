//! Short content fingerprints used as provenance metadata.

use sha2::{Digest, Sha256};

/// First 8 bytes (big-endian) of SHA-256 over `bytes`.
pub fn digest64(bytes: &[u8]) -> u64 {
    let h = Sha256::digest(bytes);
    u64::from_be_bytes(h[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Incremental variant of [`digest64`].
#[derive(Default)]
pub struct Digest64(Sha256);

impl Digest64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.update(bytes);
        self
    }

    pub fn finish(self) -> u64 {
        let h = self.0.finalize();
        u64::from_be_bytes(h[..8].try_into().expect("sha256 is 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        // sha256("abc") = ba7816bf8f01cfea...
        assert_eq!(digest64(b"abc"), 0xba7816bf8f01cfea);
        let mut d = Digest64::new();
        d.update(b"a").update(b"bc");
        assert_eq!(d.finish(), 0xba7816bf8f01cfea);
    }
}
