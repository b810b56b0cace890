use std::sync::OnceLock;

use super::aes::{Aes128, FIXED_KEY};
use super::Block;

/// Tweakable correlation-robust hash `H(x, i) = π(2x ⊕ i) ⊕ 2x` over fixed-key AES.
pub struct AesHash {
    aes: Aes128,
}

impl AesHash {
    pub fn new(key: &[u8; 16]) -> Self {
        Self {
            aes: Aes128::new(key),
        }
    }

    pub fn fixed() -> &'static AesHash {
        static H: OnceLock<AesHash> = OnceLock::new();
        H.get_or_init(|| AesHash::new(&FIXED_KEY))
    }

    pub fn cipher(&self) -> &Aes128 {
        &self.aes
    }

    #[inline]
    pub fn hash(&self, x: Block, tweak: u64) -> Block {
        let sx = x.double();
        self.aes.encrypt(sx ^ Block(tweak as u128)) ^ sx
    }
}

/// [`AesHash::hash`] under the fixed key.
pub fn aes_hash(x: Block, tweak: u64) -> Block {
    AesHash::fixed().hash(x, tweak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn deterministic_and_tweak_separated() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = Block::random(&mut rng);
        assert_eq!(aes_hash(x, 3), aes_hash(x, 3));
        for _ in 0..10_000 {
            let x = Block::random(&mut rng);
            assert_ne!(aes_hash(x, 0), aes_hash(x, 1));
        }
    }
}
