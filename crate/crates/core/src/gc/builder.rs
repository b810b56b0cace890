//! Generators for the benchmark and protocol circuits.
//!
//! Multi-bit values are little-endian wire vectors. Word-level outputs are
//! truncated to the operand width unless noted.

use super::circuit::{Circuit, Gate, GateKind, WireId};
use super::GcError;

pub type Bits = Vec<WireId>;

/// Incremental circuit builder. Constants are derived from the first input
/// wire (`x XOR x`), so at least one input must be declared before use.
#[derive(Debug, Default)]
pub struct Builder {
    wires: u32,
    inputs: Vec<Bits>,
    outputs: Vec<Bits>,
    gates: Vec<Gate>,
    zero: Option<WireId>,
    one: Option<WireId>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> WireId {
        let w = self.wires;
        self.wires += 1;
        w
    }

    pub fn input(&mut self, bits: usize) -> Bits {
        let g: Bits = (0..bits).map(|_| self.fresh()).collect();
        self.inputs.push(g.clone());
        g
    }

    pub fn output(&mut self, bits: &[WireId]) {
        self.outputs.push(bits.to_vec());
    }

    fn gate(&mut self, kind: GateKind, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate { kind, a, b, out });
        out
    }

    pub fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        self.gate(GateKind::Xor, a, b)
    }

    pub fn and(&mut self, a: WireId, b: WireId) -> WireId {
        self.gate(GateKind::And, a, b)
    }

    pub fn inv(&mut self, a: WireId) -> WireId {
        self.gate(GateKind::Inv, a, a)
    }

    pub fn or(&mut self, a: WireId, b: WireId) -> WireId {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `s ? b : a` with one AND.
    pub fn mux(&mut self, s: WireId, a: WireId, b: WireId) -> WireId {
        let d = self.xor(a, b);
        let m = self.and(s, d);
        self.xor(a, m)
    }

    pub fn zero(&mut self) -> WireId {
        if let Some(z) = self.zero {
            return z;
        }
        let src = *self
            .inputs
            .iter()
            .flatten()
            .next()
            .expect("constants need at least one input wire");
        let z = self.xor(src, src);
        self.zero = Some(z);
        z
    }

    pub fn one(&mut self) -> WireId {
        if let Some(o) = self.one {
            return o;
        }
        let z = self.zero();
        let o = self.inv(z);
        self.one = Some(o);
        o
    }

    pub fn constant(&mut self, value: u128, bits: usize) -> Bits {
        (0..bits)
            .map(|i| {
                if (value >> i) & 1 == 1 {
                    self.one()
                } else {
                    self.zero()
                }
            })
            .collect()
    }

    pub fn xor_bits(&mut self, a: &[WireId], b: &[WireId]) -> Bits {
        a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect()
    }

    pub fn inv_bits(&mut self, a: &[WireId]) -> Bits {
        a.iter().map(|&x| self.inv(x)).collect()
    }

    pub fn mux_bits(&mut self, s: WireId, a: &[WireId], b: &[WireId]) -> Bits {
        a.iter().zip(b).map(|(&x, &y)| self.mux(s, x, y)).collect()
    }

    /// Ripple-carry addition, one AND per bit. Returns the sum (width of `a`)
    /// and, if requested, the carry out.
    pub fn add_carry(
        &mut self,
        a: &[WireId],
        b: &[WireId],
        cin: Option<WireId>,
        want_carry: bool,
    ) -> (Bits, Option<WireId>) {
        assert_eq!(a.len(), b.len());
        let n = a.len();
        let mut sum = Vec::with_capacity(n);
        let mut c = cin;
        for i in 0..n {
            let ab = self.xor(a[i], b[i]);
            let s = match c {
                Some(c) => self.xor(ab, c),
                None => ab,
            };
            sum.push(s);
            if i + 1 == n && !want_carry {
                break;
            }
            c = Some(match c {
                Some(cc) => {
                    let x = self.xor(a[i], cc);
                    let y = self.xor(b[i], cc);
                    let t = self.and(x, y);
                    self.xor(cc, t)
                }
                None => self.and(a[i], b[i]),
            });
        }
        (sum, if want_carry { c } else { None })
    }

    pub fn add(&mut self, a: &[WireId], b: &[WireId]) -> Bits {
        self.add_carry(a, b, None, false).0
    }

    /// `a - b` and the "no borrow" flag (`a >= b`).
    pub fn sub_ge(&mut self, a: &[WireId], b: &[WireId]) -> (Bits, WireId) {
        let nb = self.inv_bits(b);
        let one = self.one();
        let (d, c) = self.add_carry(a, &nb, Some(one), true);
        (d, c.expect("carry requested"))
    }

    pub fn sub(&mut self, a: &[WireId], b: &[WireId]) -> Bits {
        let nb = self.inv_bits(b);
        let one = self.one();
        self.add_carry(a, &nb, Some(one), false).0
    }

    /// Unsigned `a < b`.
    pub fn lt(&mut self, a: &[WireId], b: &[WireId]) -> WireId {
        let (_, ge) = self.sub_ge(a, b);
        self.inv(ge)
    }

    /// Shift-and-add multiply truncated to the operand width.
    pub fn mul(&mut self, a: &[WireId], b: &[WireId]) -> Bits {
        let n = a.len();
        assert_eq!(n, b.len());
        let mut acc: Bits = a.iter().map(|&x| self.and(x, b[0])).collect();
        for i in 1..n {
            let row: Bits = (0..n - i).map(|j| self.and(a[j], b[i])).collect();
            let hi = acc[i..].to_vec();
            let s = self.add(&hi, &row);
            acc.truncate(i);
            acc.extend(s);
        }
        acc
    }

    /// Population count; result has `ceil(log2(n+1))` bits.
    pub fn popcount(&mut self, bits: &[WireId]) -> Bits {
        let mut layer: Vec<Bits> = bits.iter().map(|&b| vec![b]).collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            let mut it = layer.into_iter();
            while let Some(x) = it.next() {
                match it.next() {
                    Some(mut y) => {
                        let mut x = x;
                        let w = x.len().max(y.len());
                        let z = self.zero();
                        x.resize(w, z);
                        y.resize(w, z);
                        let (mut s, c) = self.add_carry(&x, &y, None, true);
                        s.push(c.expect("carry requested"));
                        next.push(s);
                    }
                    None => next.push(x),
                }
            }
            layer = next;
        }
        let mut out = layer.pop().unwrap_or_default();
        let need = usize::BITS as usize - bits.len().leading_zeros() as usize;
        out.truncate(need.max(1));
        out
    }

    /// AES S-box with 32 AND gates. `x[0]` is the least significant bit.
    pub fn sbox(&mut self, x: &[WireId]) -> Bits {
        use std::collections::HashMap;
        let mut env: HashMap<&str, WireId> = HashMap::new();
        let names = ["U0", "U1", "U2", "U3", "U4", "U5", "U6", "U7"];
        for (k, name) in names.iter().enumerate() {
            env.insert(name, x[7 - k]);
        }
        for line in SBOX_PROGRAM.lines() {
            let t: Vec<&str> = line.split_whitespace().collect();
            let (d, a, op, b) = (t[0], env[t[2]], t[3], env[t[4]]);
            let w = match op {
                "+" => self.xor(a, b),
                "x" => self.and(a, b),
                _ => {
                    let v = self.xor(a, b);
                    self.inv(v)
                }
            };
            env.insert(d, w);
        }
        (0..8).map(|i| env[format!("S{}", 7 - i).as_str()]).collect()
    }

    pub fn finish(self) -> Result<Circuit, GcError> {
        Circuit::new(self.wires, self.inputs, self.outputs, self.gates)
    }
}

const SBOX_PROGRAM: &str = include_str!("sbox_circuit.txt");

/// `max(0, x)` for an ℓ-bit two's-complement input.
pub fn relu(bits: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(bits);
    let ns = b.inv(x[bits - 1]);
    let mut y: Bits = x[..bits - 1].iter().map(|&w| b.and(w, ns)).collect();
    let z = b.zero();
    y.push(z);
    b.output(&y);
    b.finish().expect("generated circuit is valid")
}

pub fn adder(bits: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(bits);
    let y = b.input(bits);
    let (mut s, c) = b.add_carry(&x, &y, None, true);
    s.push(c.expect("carry requested"));
    b.output(&s);
    b.finish().expect("generated circuit is valid")
}

/// Product modulo 2^bits.
pub fn multiplier(bits: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(bits);
    let y = b.input(bits);
    let p = b.mul(&x, &y);
    b.output(&p);
    b.finish().expect("generated circuit is valid")
}

/// Hamming distance between two `bits`-wide inputs, `out_bits` wide.
pub fn hamming(bits: usize, out_bits: usize) -> Circuit {
    let mut b = Builder::new();
    let x = b.input(bits);
    let y = b.input(bits);
    let d = b.xor_bits(&x, &y);
    let mut c = b.popcount(&d);
    let z = b.zero();
    c.resize(out_bits, z);
    b.output(&c);
    b.finish().expect("generated circuit is valid")
}

/// n×n matrix product with `bits`-wide elements, wrapping modulo 2^bits.
/// Inputs are the elements of A then B, row-major, one group per element;
/// outputs are the elements of C row-major.
pub fn matmul(n: usize, bits: usize) -> Circuit {
    let mut b = Builder::new();
    let a: Vec<Bits> = (0..n * n).map(|_| b.input(bits)).collect();
    let m: Vec<Bits> = (0..n * n).map(|_| b.input(bits)).collect();
    for i in 0..n {
        for j in 0..n {
            let mut acc = b.mul(&a[i * n], &m[j]);
            for k in 1..n {
                let p = b.mul(&a[i * n + k], &m[k * n + j]);
                acc = b.add(&acc, &p);
            }
            b.output(&acc);
        }
    }
    b.finish().expect("generated circuit is valid")
}

fn xtime(b: &mut Builder, x: &[WireId]) -> Bits {
    // Multiply by 2 in GF(2^8): shift left, fold bit 7 into 0x1b.
    let h = x[7];
    let mut y = vec![h];
    y.extend_from_slice(&x[..7]);
    for i in [1, 3, 4] {
        y[i] = b.xor(y[i], h);
    }
    y
}

/// AES-128 encryption with an in-circuit key schedule.
///
/// Input group 0 is the key, group 1 the plaintext; byte `i` of a block sits
/// at bits `8i..8i+8`, least significant bit first.
pub fn aes128() -> Circuit {
    let mut b = Builder::new();
    let key = b.input(128);
    let pt = b.input(128);
    let bytes = |v: &[WireId]| -> Vec<Bits> { v.chunks(8).map(<[WireId]>::to_vec).collect() };

    let mut rk: Vec<Vec<Bits>> = vec![bytes(&key)];
    let mut rcon = 1u8;
    for _ in 0..10 {
        let prev = rk.last().expect("round key").clone();
        let mut t: Vec<Bits> = [13, 14, 15, 12].iter().map(|&i| b.sbox(&prev[i])).collect();
        let rc = b.constant(rcon as u128, 8);
        for (bit, w) in t[0].iter_mut().enumerate() {
            if (rcon >> bit) & 1 == 1 {
                *w = b.xor(*w, rc[bit]);
            }
        }
        let mut next: Vec<Bits> = Vec::with_capacity(16);
        for i in 0..16 {
            let src = if i < 4 { t[i].clone() } else { next[i - 4].clone() };
            next.push(b.xor_bits(&prev[i], &src));
        }
        t.clear();
        rk.push(next);
        rcon = if rcon & 0x80 != 0 { (rcon << 1) ^ 0x1b } else { rcon << 1 };
    }

    let pt = bytes(&pt);
    let mut s: Vec<Bits> = (0..16).map(|i| b.xor_bits(&pt[i], &rk[0][i])).collect();
    for round in 1..=10 {
        let sub: Vec<Bits> = s.iter().map(|x| b.sbox(x)).collect();
        let shifted: Vec<Bits> = (0..16)
            .map(|i| {
                let (r, c) = (i % 4, i / 4);
                sub[r + 4 * ((c + r) % 4)].clone()
            })
            .collect();
        let mixed = if round < 10 {
            let mut out = Vec::with_capacity(16);
            for c in 0..4 {
                let col: Vec<&Bits> = (0..4).map(|r| &shifted[4 * c + r]).collect();
                let all01 = b.xor_bits(col[0], col[1]);
                let all23 = b.xor_bits(col[2], col[3]);
                let all = b.xor_bits(&all01, &all23);
                for r in 0..4 {
                    // out_r = a_r ^ all ^ xtime(a_r ^ a_{r+1})
                    let pair = b.xor_bits(col[r], col[(r + 1) % 4]);
                    let xt = xtime(&mut b, &pair);
                    let t = b.xor_bits(col[r], &all);
                    out.push(b.xor_bits(&t, &xt));
                }
            }
            out
        } else {
            shifted
        };
        s = (0..16).map(|i| b.xor_bits(&mixed[i], &rk[round][i])).collect();
    }
    let out: Bits = s.into_iter().flatten().collect();
    b.output(&out);
    b.finish().expect("generated circuit is valid")
}

/// The six GC micro-benchmark circuits by name.
pub const BENCHMARKS: [&str; 6] = ["relu32", "mul32", "hamm50", "aes128", "matmul5x5-8", "matmul3x3-16"];

pub fn benchmark(name: &str) -> Option<Circuit> {
    Some(match name {
        "relu32" => relu(32),
        "mul32" => multiplier(32),
        "hamm50" => hamming(50, 8),
        "aes128" => aes128(),
        "matmul5x5-8" => matmul(5, 8),
        "matmul3x3-16" => matmul(3, 16),
        _ => return None,
    })
}

/// `((a + b) mod p` clamped to its non-negative balanced value, minus `c`) mod p.
///
/// All three inputs are ℓ-bit values assumed to lie in `[0, p)`.
pub fn mod_relu(bits: usize, p: u64) -> Result<Circuit, GcError> {
    if bits == 0 || bits > 64 || p < 2 || (bits < 64 && p >= 1u64 << bits) {
        return Err(GcError::ModulusTooWide { bits, p });
    }
    let mut b = Builder::new();
    let x = b.input(bits);
    let r = b.input(bits);
    let c = b.input(bits);
    let z = b.zero();
    let mut xe = x.clone();
    xe.push(z);
    let mut re = r.clone();
    re.push(z);
    let pe = b.constant(p as u128, bits + 1);
    let (mut t, carry) = b.add_carry(&xe[..bits], &re[..bits], None, true);
    t.push(carry.expect("carry requested"));
    let (tm, ge) = b.sub_ge(&t, &pe);
    let t = b.mux_bits(ge, &t, &tm);
    let t = &t[..bits];
    let half = b.constant(p.div_ceil(2) as u128, bits);
    let pos = b.lt(t, &half);
    let u: Bits = t.iter().map(|&w| b.and(w, pos)).collect();
    let (d, no_borrow) = b.sub_ge(&u, &c);
    let pb = b.constant(p as u128, bits);
    let wrapped = b.add(&d, &pb);
    let out = b.mux_bits(no_borrow, &wrapped, &d);
    b.output(&out);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sbox_ref(v: u8) -> u8 {
        crate::gc::aes::tables().sbox[v as usize]
    }

    #[test]
    fn sbox_circuit_matches_table() {
        let mut b = Builder::new();
        let x = b.input(8);
        let y = b.sbox(&x);
        b.output(&y);
        let c = b.finish().unwrap();
        assert_eq!(c.counts().and, 32);
        for v in 0..256u128 {
            assert_eq!(c.eval_words(&[v]).unwrap()[0], sbox_ref(v as u8) as u128);
        }
    }

    #[test]
    fn aes_gate_count_and_vector() {
        let c = aes128();
        assert_eq!(c.counts().and, 6400);
        let key = u128::from_le_bytes(std::array::from_fn(|i| i as u8));
        let pt = u128::from_le_bytes(std::array::from_fn(|i| (i as u8) * 0x11));
        let ct = c.eval_words(&[key, pt]).unwrap()[0];
        assert_eq!(
            ct.to_le_bytes(),
            [
                0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70,
                0xb4, 0xc5, 0x5a
            ]
        );
    }

    #[test]
    fn small_circuits() {
        let c = relu(8);
        for v in 0..256u128 {
            let s = v as u8 as i8;
            assert_eq!(c.eval_words(&[v]).unwrap()[0], s.max(0) as u128);
        }
        let c = adder(4);
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(c.eval_words(&[x, y]).unwrap()[0], x + y);
            }
        }
        let c = multiplier(8);
        for (x, y) in [(3u128, 5u128), (255, 255), (17, 200)] {
            assert_eq!(c.eval_words(&[x, y]).unwrap()[0], (x * y) & 0xff);
        }
        let c = hamming(50, 8);
        let (x, y) = (0x3_1234_5678_9abc_u128, 0x2_fedc_ba98_7654_u128);
        assert_eq!(c.eval_words(&[x, y]).unwrap()[0], (x ^ y).count_ones() as u128);
    }

    #[test]
    fn mod_relu_examples() {
        let p = 257u64;
        let c = mod_relu(9, p).unwrap();
        let run = |x: u64, r: u64, s: u64| {
            let a = (x + p - r) % p;
            c.eval_words(&[a as u128, r as u128, s as u128]).unwrap()[0] as u64
        };
        assert_eq!(run(5, 3, 0), 5);
        assert_eq!(run(p - 7, 100, 0), 0);
        assert_eq!(run(20, 9, 30), (20 + p - 30) % p);
        assert_eq!(run(128, 0, 0), 128);
        assert_eq!(run(129, 0, 0), 0);
        assert!(mod_relu(8, 257).is_err());
    }
}
