//! AES-128 encryption split into its four round steps.
//!
//! SubBytes and MixColumns are table driven (the substitution and the two
//! GF(2^8) product tables are exactly what the LUT fabric stores), ShiftRows
//! is a byte permutation.

use std::sync::OnceLock;

use super::Block;

/// Key of the fixed-key permutation used for hashing (the FIPS-197 example key).
pub const FIXED_KEY: [u8; 16] = [
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f,
];

/// Multiplication in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1.
pub fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut r = 0u8;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        let hi = a & 0x80;
        a <<= 1;
        if hi != 0 {
            a ^= 0x1b;
        }
        b >>= 1;
    }
    r
}

pub struct AesTables {
    pub sbox: [u8; 256],
    /// `2 * S(x)` in GF(2^8).
    pub sbox_x2: [u8; 256],
    /// `3 * S(x)` in GF(2^8).
    pub sbox_x3: [u8; 256],
}

pub fn tables() -> &'static AesTables {
    static T: OnceLock<AesTables> = OnceLock::new();
    T.get_or_init(|| {
        let mut inv = [0u8; 256];
        for a in 1..=255u8 {
            for b in 1..=255u8 {
                if gf_mul(a, b) == 1 {
                    inv[a as usize] = b;
                    break;
                }
            }
        }
        let mut sbox = [0u8; 256];
        let mut sbox_x2 = [0u8; 256];
        let mut sbox_x3 = [0u8; 256];
        for i in 0..256 {
            let x = inv[i];
            let s = x ^ x.rotate_left(1) ^ x.rotate_left(2) ^ x.rotate_left(3) ^ x.rotate_left(4) ^ 0x63;
            sbox[i] = s;
            sbox_x2[i] = gf_mul(s, 2);
            sbox_x3[i] = gf_mul(s, 3);
        }
        AesTables {
            sbox,
            sbox_x2,
            sbox_x3,
        }
    })
}

pub fn sub_bytes(state: &mut [u8; 16]) {
    let t = tables();
    for b in state.iter_mut() {
        *b = t.sbox[*b as usize];
    }
}

/// Row `r` of the column-major state rotates left by `r`.
pub fn shift_rows(state: &mut [u8; 16]) {
    let old = *state;
    for c in 0..4 {
        for r in 0..4 {
            state[r + 4 * c] = old[r + 4 * ((c + r) % 4)];
        }
    }
}

pub fn inv_shift_rows(state: &mut [u8; 16]) {
    let old = *state;
    for c in 0..4 {
        for r in 0..4 {
            state[r + 4 * ((c + r) % 4)] = old[r + 4 * c];
        }
    }
}

pub fn mix_columns(state: &mut [u8; 16]) {
    for c in 0..4 {
        let col = [state[4 * c], state[4 * c + 1], state[4 * c + 2], state[4 * c + 3]];
        for r in 0..4 {
            state[4 * c + r] = gf_mul(col[r], 2)
                ^ gf_mul(col[(r + 1) % 4], 3)
                ^ col[(r + 2) % 4]
                ^ col[(r + 3) % 4];
        }
    }
}

pub fn add_round_key(state: &mut [u8; 16], key: &[u8; 16]) {
    for (s, k) in state.iter_mut().zip(key) {
        *s ^= k;
    }
}

pub fn expand_key(key: &[u8; 16]) -> [[u8; 16]; 11] {
    let t = tables();
    let mut w = [[0u8; 4]; 44];
    for i in 0..4 {
        w[i].copy_from_slice(&key[4 * i..4 * i + 4]);
    }
    let mut rcon = 1u8;
    for i in 4..44 {
        let mut temp = w[i - 1];
        if i % 4 == 0 {
            temp.rotate_left(1);
            for b in temp.iter_mut() {
                *b = t.sbox[*b as usize];
            }
            temp[0] ^= rcon;
            rcon = gf_mul(rcon, 2);
        }
        for j in 0..4 {
            w[i][j] = w[i - 4][j] ^ temp[j];
        }
    }
    let mut rks = [[0u8; 16]; 11];
    for (r, rk) in rks.iter_mut().enumerate() {
        for c in 0..4 {
            rk[4 * c..4 * c + 4].copy_from_slice(&w[4 * r + c]);
        }
    }
    rks
}

/// AES-128 with a pre-expanded key schedule.
#[derive(Clone)]
pub struct Aes128 {
    round_keys: [[u8; 16]; 11],
}

impl Aes128 {
    pub fn new(key: &[u8; 16]) -> Self {
        Self {
            round_keys: expand_key(key),
        }
    }

    pub fn round_keys(&self) -> &[[u8; 16]; 11] {
        &self.round_keys
    }

    pub fn encrypt_bytes(&self, input: [u8; 16]) -> [u8; 16] {
        let mut s = input;
        add_round_key(&mut s, &self.round_keys[0]);
        for rk in &self.round_keys[1..10] {
            sub_bytes(&mut s);
            shift_rows(&mut s);
            mix_columns(&mut s);
            add_round_key(&mut s, rk);
        }
        sub_bytes(&mut s);
        shift_rows(&mut s);
        add_round_key(&mut s, &self.round_keys[10]);
        s
    }

    pub fn encrypt(&self, block: Block) -> Block {
        Block::from_bytes(self.encrypt_bytes(block.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex16(s: &str) -> [u8; 16] {
        let mut out = [0u8; 16];
        for i in 0..16 {
            out[i] = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).unwrap();
        }
        out
    }

    #[test]
    fn fips197_vector() {
        let aes = Aes128::new(&hex16("000102030405060708090a0b0c0d0e0f"));
        let ct = aes.encrypt_bytes(hex16("00112233445566778899aabbccddeeff"));
        assert_eq!(ct, hex16("69c4e0d86a7b0430d8cdb78070b4c55a"));
    }

    #[test]
    fn sbox_entries() {
        let t = tables();
        assert_eq!(t.sbox[0x00], 0x63);
        assert_eq!(t.sbox[0x01], 0x7c);
        assert_eq!(t.sbox[0x53], 0xed);
        assert_eq!(t.sbox[0xff], 0x16);
    }

    #[test]
    fn shift_rows_inverse() {
        let mut s: [u8; 16] = core::array::from_fn(|i| i as u8);
        shift_rows(&mut s);
        assert_eq!(s, [0, 5, 10, 15, 4, 9, 14, 3, 8, 13, 2, 7, 12, 1, 6, 11]);
        inv_shift_rows(&mut s);
        assert_eq!(s, core::array::from_fn(|i| i as u8));
    }
}
