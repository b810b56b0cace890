use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::alloc::{check_capacity, tile_of, RowAllocator};
use super::{AddressMap, CompileError, Placement};
use crate::arith::{barrett_reduce, mod_addsub, special_reduce, AddSub, Modulus, ModulusKind};
use crate::ckks::{
    ct_butterfly, galois_element, galois_permutation, gs_butterfly, invm, mulm, Ciphertext, CkksError, Domain, EvaluationKeys,
    NttDirection, Plaintext, RingParams, RnsPolynomial,
};
use crate::dispatch::{execute_ntt_plan, he_broadcast, he_broadcast_exec, ntt_schedule_dir, NttPlan};
use crate::isa::{cost_table, CInstKind, Instr, KernelParams};
use crate::sim::{ArchProfile, CoreState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeInput {
    Cipher { name: String, level: usize },
    Plain { name: String, level: usize },
}

impl HeInput {
    fn name(&self) -> &str {
        match self {
            HeInput::Cipher { name, .. } | HeInput::Plain { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeOp {
    Add { dst: String, a: String, b: String },
    Sub { dst: String, a: String, b: String },
    AddPlain { dst: String, a: String, p: String },
    MulPlain { dst: String, a: String, p: String },
    Mul { dst: String, a: String, b: String },
    Rotate { dst: String, a: String, k: i64 },
    Rescale { dst: String, a: String },
    Ntt { dst: String, a: String },
    Intt { dst: String, a: String },
}

impl HeOp {
    pub fn dst(&self) -> &str {
        match self {
            HeOp::Add { dst, .. }
            | HeOp::Sub { dst, .. }
            | HeOp::AddPlain { dst, .. }
            | HeOp::MulPlain { dst, .. }
            | HeOp::Mul { dst, .. }
            | HeOp::Rotate { dst, .. }
            | HeOp::Rescale { dst, .. }
            | HeOp::Ntt { dst, .. }
            | HeOp::Intt { dst, .. } => dst,
        }
    }

    pub fn reads(&self) -> Vec<&str> {
        match self {
            HeOp::Add { a, b, .. } | HeOp::Sub { a, b, .. } | HeOp::Mul { a, b, .. } => vec![a, b],
            HeOp::AddPlain { a, p, .. } | HeOp::MulPlain { a, p, .. } => vec![a, p],
            HeOp::Rotate { a, .. } | HeOp::Rescale { a, .. } | HeOp::Ntt { a, .. } | HeOp::Intt { a, .. } => vec![a],
        }
    }
}

/// Straight-line HE program over named registers. A register may be
/// redefined; each definition is a new value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeProgram {
    pub inputs: Vec<HeInput>,
    pub ops: Vec<HeOp>,
    pub outputs: Vec<String>,
}

impl HeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cipher(mut self, name: &str, level: usize) -> Self {
        self.inputs.push(HeInput::Cipher { name: name.into(), level });
        self
    }

    pub fn plain(mut self, name: &str, level: usize) -> Self {
        self.inputs.push(HeInput::Plain { name: name.into(), level });
        self
    }

    pub fn op(mut self, op: HeOp) -> Self {
        self.ops.push(op);
        self
    }

    pub fn add(self, dst: &str, a: &str, b: &str) -> Self {
        self.op(HeOp::Add { dst: dst.into(), a: a.into(), b: b.into() })
    }

    pub fn sub(self, dst: &str, a: &str, b: &str) -> Self {
        self.op(HeOp::Sub { dst: dst.into(), a: a.into(), b: b.into() })
    }

    pub fn add_plain(self, dst: &str, a: &str, p: &str) -> Self {
        self.op(HeOp::AddPlain { dst: dst.into(), a: a.into(), p: p.into() })
    }

    pub fn mul_plain(self, dst: &str, a: &str, p: &str) -> Self {
        self.op(HeOp::MulPlain { dst: dst.into(), a: a.into(), p: p.into() })
    }

    pub fn mul(self, dst: &str, a: &str, b: &str) -> Self {
        self.op(HeOp::Mul { dst: dst.into(), a: a.into(), b: b.into() })
    }

    pub fn rotate(self, dst: &str, a: &str, k: i64) -> Self {
        self.op(HeOp::Rotate { dst: dst.into(), a: a.into(), k })
    }

    pub fn rescale(self, dst: &str, a: &str) -> Self {
        self.op(HeOp::Rescale { dst: dst.into(), a: a.into() })
    }

    pub fn ntt(self, dst: &str, a: &str) -> Self {
        self.op(HeOp::Ntt { dst: dst.into(), a: a.into() })
    }

    pub fn intt(self, dst: &str, a: &str) -> Self {
        self.op(HeOp::Intt { dst: dst.into(), a: a.into() })
    }

    pub fn output(mut self, name: &str) -> Self {
        self.outputs.push(name.into());
        self
    }

    /// Rotation amounts that need keys.
    pub fn rotations(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self
            .ops
            .iter()
            .filter_map(|o| match o {
                HeOp::Rotate { k, .. } => Some(*k),
                _ => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Ciphertext-ciphertext multiplications.
    pub fn mul_count(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, HeOp::Mul { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyRef {
    Relin,
    Rotation(i64),
}

/// Host-side source of a row written before use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowInit {
    Splat(u64),
    Input { name: String, comp: usize, limb: usize },
    Key { key: KeyRef, digit: usize, comp: usize, channel: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeStep {
    /// Host writes a row of every coefficient core.
    Load { row: u32, init: RowInit },
    /// One HE C-Inst on every coefficient core, under the kernel for `channel`.
    Broadcast { channel: usize, instr: Instr },
    /// Domain change of one limb through butterfly stages. Inverse
    /// transforms leave the `N⁻¹` scaling to a following POLYMUL.
    Transform { channel: usize, direction: NttDirection, src: u32, dst: u32 },
    /// POLYPERM with the sign mask in `mask`, then routing `dst[k] = src[perm[k]]`
    /// for the evaluation-domain permutation of Galois element `galois`.
    Permute { channel: usize, src: u32, mask: u32, dst: u32, galois: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputBinding {
    pub name: String,
    pub cipher: bool,
    pub domain: Domain,
    /// `rows[comp][limb]`
    pub rows: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeStream {
    pub degree: usize,
    pub steps: Vec<HeStep>,
    pub outputs: Vec<OutputBinding>,
    pub map: AddressMap,
    /// Data rows per core at the allocation high-water mark.
    pub rows_used: usize,
    pub program: HeProgram,
}

#[derive(Debug, Clone)]
struct Val {
    cipher: bool,
    level: usize,
    domain: Domain,
    rows: Vec<Vec<u32>>,
}

struct Lower<'a> {
    params: &'a RingParams,
    profile: &'a ArchProfile,
    passes: u32,
    alloc: RowAllocator,
    steps: Vec<HeStep>,
    consts: HashMap<u64, u32>,
    entries: Vec<Placement>,
    open: HashMap<u32, usize>,
    next_value: u32,
}

impl<'a> Lower<'a> {
    fn q(&self, ch: usize) -> u64 {
        self.params.modulus(ch).value()
    }

    fn modulus(&self, ch: usize) -> Modulus {
        *self.params.modulus(ch)
    }

    fn alloc(&mut self) -> u32 {
        let r = self.alloc.alloc(self.passes);
        self.open.insert(r, self.steps.len());
        r
    }

    fn free(&mut self, r: u32) {
        let def = self.open.remove(&r).expect("row allocated");
        self.entries.push(Placement {
            value: self.next_value,
            core: 0,
            tile: tile_of(r, self.profile),
            row: r,
            rows: self.passes,
            def,
            last_use: self.steps.len().saturating_sub(1).max(def),
        });
        self.next_value += 1;
        self.alloc.release(r, self.passes);
    }

    fn konst(&mut self, v: u64) -> u32 {
        if let Some(&r) = self.consts.get(&v) {
            return r;
        }
        let r = self.alloc.alloc(self.passes);
        self.entries.push(Placement {
            value: self.next_value,
            core: 0,
            tile: tile_of(r, self.profile),
            row: r,
            rows: self.passes,
            def: self.steps.len(),
            last_use: usize::MAX,
        });
        self.next_value += 1;
        self.steps.push(HeStep::Load { row: r, init: RowInit::Splat(v) });
        self.consts.insert(v, r);
        r
    }

    fn load(&mut self, init: RowInit) -> u32 {
        let r = self.alloc();
        self.steps.push(HeStep::Load { row: r, init });
        r
    }

    fn bc(&mut self, kind: CInstKind, channel: usize, rd: u32, rs1: u32, rs2: u32) {
        self.steps.push(HeStep::Broadcast {
            channel,
            instr: Instr::new(kind, rd, rs1, rs2),
        });
    }

    fn ntt(&mut self, ch: usize, src: u32, dst: u32) {
        self.steps.push(HeStep::Transform {
            channel: ch,
            direction: NttDirection::Forward,
            src,
            dst,
        });
    }

    fn intt(&mut self, ch: usize, src: u32, dst: u32) {
        self.steps.push(HeStep::Transform {
            channel: ch,
            direction: NttDirection::Inverse,
            src,
            dst,
        });
        let m = self.modulus(ch);
        let n_inv = self.konst(invm(self.params.degree() as u64 % m.value(), &m));
        self.bc(CInstKind::PolyMul, ch, dst, dst, n_inv);
    }

    /// `x mod q_dst` for a row holding values below `2^31` (POLYMUL by one).
    fn reduce_into(&mut self, src: u32, dst_ch: usize) -> u32 {
        let one = self.konst(1);
        let r = self.alloc();
        self.bc(CInstKind::PolyMul, dst_ch, r, src, one);
        r
    }

    /// Centered lift of coefficient row `x` (channel `src_ch`) into the
    /// coefficient domain of every channel in `dst`: `u = x + h mod q`,
    /// then `u - h` in the target channel, `h = ⌊q/2⌋`.
    fn lift(&mut self, x: u32, src_ch: usize, dst: &[usize]) -> Vec<u32> {
        let q = self.q(src_ch);
        let h = q / 2;
        let hc = self.konst(h);
        let u = self.alloc();
        self.bc(CInstKind::PolyAdd, src_ch, u, x, hc);
        let mut out = Vec::with_capacity(dst.len());
        for &c in dst {
            if c == src_ch {
                let r = self.alloc();
                self.bc(CInstKind::PolySub, c, r, u, hc);
                out.push(r);
            } else {
                let r = self.reduce_into(u, c);
                let hq = self.konst(h % self.q(c));
                self.bc(CInstKind::PolySub, c, r, r, hq);
                out.push(r);
            }
        }
        self.free(u);
        out
    }

    /// `round(acc / ∏ tail)` where `tail` are the last one or two channels of
    /// `chans`; `acc` is in the evaluation domain. Returns rows over the head.
    fn divide_tail(&mut self, acc: &[u32], chans: &[usize], tail: usize) -> Vec<u32> {
        let (head, tail_ch) = chans.split_at(chans.len() - tail);
        let lifted: Vec<u32> = if tail == 1 {
            let s = tail_ch[0];
            let x = self.alloc();
            self.intt(s, acc[head.len()], x);
            let v = self.lift(x, s, head);
            self.free(x);
            v
        } else {
            let (s1, s2) = (tail_ch[0], tail_ch[1]);
            let (p1, p2) = (self.q(s1), self.q(s2));
            let p = p1 as u128 * p2 as u128;
            let h = p / 2;
            let t1 = self.alloc();
            let t2 = self.alloc();
            self.intt(s1, acc[head.len()], t1);
            self.intt(s2, acc[head.len() + 1], t2);
            let h1 = self.konst((h % p1 as u128) as u64);
            let h2 = self.konst((h % p2 as u128) as u64);
            self.bc(CInstKind::PolyAdd, s1, t1, t1, h1);
            self.bc(CInstKind::PolyAdd, s2, t2, t2, h2);
            // Garner digit v = (a2 - a1)·p1⁻¹ mod p2.
            let a1 = self.reduce_into(t1, s2);
            self.bc(CInstKind::PolySub, s2, t2, t2, a1);
            self.free(a1);
            let m2 = self.modulus(s2);
            let p1_inv = self.konst(invm(p1 % p2, &m2));
            self.bc(CInstKind::PolyMul, s2, t2, t2, p1_inv);
            let mut out = Vec::with_capacity(head.len());
            for &c in head {
                let qc = self.q(c);
                let x1 = self.reduce_into(t1, c);
                let x2 = self.reduce_into(t2, c);
                let p1c = self.konst(p1 % qc);
                self.bc(CInstKind::PolyMul, c, x2, x2, p1c);
                self.bc(CInstKind::PolyAdd, c, x1, x1, x2);
                self.free(x2);
                let hc = self.konst((h % qc as u128) as u64);
                self.bc(CInstKind::PolySub, c, x1, x1, hc);
                out.push(x1);
            }
            self.free(t1);
            self.free(t2);
            out
        };
        let mut out = Vec::with_capacity(head.len());
        for (j, (&c, l)) in head.iter().zip(lifted).enumerate() {
            let m = self.modulus(c);
            self.ntt(c, l, l);
            let r = self.alloc();
            self.bc(CInstKind::PolySub, c, r, acc[j], l);
            self.free(l);
            let prod = tail_ch.iter().fold(1u64, |g, &s| mulm(g, self.q(s) % m.value(), &m));
            let inv = self.konst(invm(prod, &m));
            self.bc(CInstKind::PolyMul, c, r, r, inv);
            out.push(r);
        }
        out
    }

    /// Key switch of `d` (evaluation domain, channels `0..level`).
    fn key_switch(&mut self, d: &[u32], key: KeyRef) -> (Vec<u32>, Vec<u32>) {
        let level = d.len();
        let specials: Vec<usize> = self.params.special_channels().collect();
        let mut ext: Vec<usize> = (0..level).collect();
        ext.extend(&specials);
        let mut acc: [Vec<Option<u32>>; 2] = [vec![None; ext.len()], vec![None; ext.len()]];
        for (i, &di) in d.iter().enumerate() {
            let x = self.alloc();
            self.intt(i, di, x);
            let digits = self.lift(x, i, &ext);
            self.free(x);
            for (j, (&c, y)) in ext.iter().zip(digits).enumerate() {
                self.ntt(c, y, y);
                for (comp, acc) in acc.iter_mut().enumerate() {
                    let kr = self.load(RowInit::Key { key, digit: i, comp, channel: c });
                    match acc[j] {
                        None => {
                            self.bc(CInstKind::PolyMul, c, kr, y, kr);
                            acc[j] = Some(kr);
                        }
                        Some(a) => {
                            self.bc(CInstKind::PolyMul, c, kr, y, kr);
                            self.bc(CInstKind::PolyAdd, c, a, a, kr);
                            self.free(kr);
                        }
                    }
                }
                self.free(y);
            }
        }
        let mut outs = Vec::with_capacity(2);
        for a in acc {
            let a: Vec<u32> = a.into_iter().map(|r| r.expect("every digit visits every channel")).collect();
            let o = self.divide_tail(&a, &ext, specials.len());
            for r in a {
                self.free(r);
            }
            outs.push(o);
        }
        let k1 = outs.pop().unwrap();
        let k0 = outs.pop().unwrap();
        (k0, k1)
    }

    fn binary(&mut self, kind: CInstKind, a: &Val, b: &Val) -> Val {
        let rows = a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(ra, rb)| {
                (0..a.level)
                    .map(|ch| {
                        let r = self.alloc();
                        self.bc(kind, ch, r, ra[ch], rb[ch]);
                        r
                    })
                    .collect()
            })
            .collect();
        Val { rows, ..a.clone() }
    }
}

fn kind_err(msg: &str) -> CompileError {
    CompileError::Invalid(msg.into())
}

/// Lowers `program` to broadcast C-Insts, NTT plans and permutations.
///
/// Mul and Rotate expand into limb-wise key switching: digits by inverse
/// transform, centered lift into the extended basis and forward transform,
/// POLYMUL/POLYADD against the key, then division by the special primes.
pub fn compile_he(program: &HeProgram, params: &RingParams, profile: &ArchProfile) -> Result<HeStream, CompileError> {
    let n = params.degree();
    let cores = profile.cores();
    if n / 2 > cores {
        return Err(CompileError::Invalid(format!("N = {n} needs {} cores for its transforms", n / 2)));
    }
    let specials = params.special_channels().len();
    if program.mul_count() + program.rotations().len() > 0 && specials == 0 {
        return Err(CkksError::Params("key switching needs a special modulus".into()).into());
    }

    // Value numbering and last uses.
    let mut cur: HashMap<&str, usize> = HashMap::new();
    let mut last_read: Vec<Option<usize>> = Vec::new();
    for inp in &program.inputs {
        cur.insert(inp.name(), last_read.len());
        last_read.push(None);
    }
    let mut op_reads: Vec<Vec<usize>> = Vec::with_capacity(program.ops.len());
    for (i, op) in program.ops.iter().enumerate() {
        let mut reads = Vec::new();
        for r in op.reads() {
            let v = *cur.get(r).ok_or_else(|| CompileError::Undefined(r.into()))?;
            last_read[v] = Some(i);
            reads.push(v);
        }
        op_reads.push(reads);
        cur.insert(op.dst(), last_read.len());
        last_read.push(None);
    }
    let mut live_out = vec![false; last_read.len()];
    for o in &program.outputs {
        let v = *cur.get(o.as_str()).ok_or_else(|| CompileError::Undefined(o.clone()))?;
        live_out[v] = true;
    }

    let mut lw = Lower {
        params,
        profile,
        passes: n.div_ceil(cores) as u32,
        alloc: RowAllocator::new(),
        steps: Vec::new(),
        consts: HashMap::new(),
        entries: Vec::new(),
        open: HashMap::new(),
        next_value: 0,
    };
    let mut vals: Vec<Option<Val>> = vec![None; last_read.len()];
    for (v, inp) in program.inputs.iter().enumerate() {
        if last_read[v].is_none() && !live_out[v] {
            continue;
        }
        let (cipher, level) = match inp {
            HeInput::Cipher { level, .. } => (true, *level),
            HeInput::Plain { level, .. } => (false, *level),
        };
        if level == 0 || level > params.max_level() {
            return Err(CompileError::Level(format!("input {} at level {level}", inp.name())));
        }
        let rows = (0..if cipher { 2 } else { 1 })
            .map(|comp| {
                (0..level)
                    .map(|limb| lw.load(RowInit::Input { name: inp.name().into(), comp, limb }))
                    .collect()
            })
            .collect();
        vals[v] = Some(Val { cipher, level, domain: Domain::Evaluation, rows });
    }

    let first = program.inputs.len();
    for (i, op) in program.ops.iter().enumerate() {
        let get = |k: usize| vals[op_reads[i][k]].clone().expect("defined before use");
        let out = match op {
            HeOp::Add { .. } | HeOp::Sub { .. } => {
                let (a, b) = (get(0), get(1));
                if a.cipher != b.cipher || a.level != b.level || a.domain != b.domain {
                    return Err(kind_err("add/sub operands differ in kind, level or domain"));
                }
                let kind = if matches!(op, HeOp::Add { .. }) { CInstKind::PolyAdd } else { CInstKind::PolySub };
                lw.binary(kind, &a, &b)
            }
            HeOp::AddPlain { .. } => {
                let (a, p) = (get(0), get(1));
                if !a.cipher || p.cipher || a.level != p.level || a.domain != p.domain {
                    return Err(kind_err("AddPlain takes a ciphertext and a plaintext at one level and domain"));
                }
                let c0 = (0..a.level)
                    .map(|ch| {
                        let r = lw.alloc();
                        lw.bc(CInstKind::PolyAdd, ch, r, a.rows[0][ch], p.rows[0][ch]);
                        r
                    })
                    .collect();
                let src = op_reads[i][0];
                let c1 = if last_read[src] == Some(i) && !live_out[src] {
                    // The operand dies here: hand its second component over.
                    let old = vals[src].take().expect("defined before use");
                    for &r in &old.rows[0] {
                        lw.free(r);
                    }
                    old.rows[1].clone()
                } else {
                    let zero = lw.konst(0);
                    (0..a.level)
                        .map(|ch| {
                            let r = lw.alloc();
                            lw.bc(CInstKind::PolyAdd, ch, r, a.rows[1][ch], zero);
                            r
                        })
                        .collect()
                };
                Val { rows: vec![c0, c1], ..a }
            }
            HeOp::MulPlain { .. } => {
                let (a, p) = (get(0), get(1));
                if !a.cipher || p.cipher {
                    return Err(kind_err("MulPlain takes a ciphertext and a plaintext"));
                }
                if a.level != p.level || a.domain != Domain::Evaluation || p.domain != Domain::Evaluation {
                    return Err(kind_err("MulPlain operands differ in level or are not in the evaluation domain"));
                }
                let pb = Val { rows: vec![p.rows[0].clone(); 2], ..p };
                lw.binary(CInstKind::PolyMul, &a, &pb)
            }
            HeOp::Mul { .. } => {
                let (a, b) = (get(0), get(1));
                if !a.cipher || !b.cipher || a.level != b.level || a.domain != Domain::Evaluation {
                    return Err(kind_err("Mul takes two evaluation-domain ciphertexts at one level"));
                }
                if a.level < 2 {
                    return Err(CompileError::Level("multiplication needs two moduli".into()));
                }
                let mut d = [Vec::new(), Vec::new(), Vec::new()];
                for ch in 0..a.level {
                    let d0 = lw.alloc();
                    lw.bc(CInstKind::PolyMul, ch, d0, a.rows[0][ch], b.rows[0][ch]);
                    let d1 = lw.alloc();
                    lw.bc(CInstKind::PolyMul, ch, d1, a.rows[0][ch], b.rows[1][ch]);
                    let t = lw.alloc();
                    lw.bc(CInstKind::PolyMul, ch, t, a.rows[1][ch], b.rows[0][ch]);
                    lw.bc(CInstKind::PolyAdd, ch, d1, d1, t);
                    lw.free(t);
                    let d2 = lw.alloc();
                    lw.bc(CInstKind::PolyMul, ch, d2, a.rows[1][ch], b.rows[1][ch]);
                    d[0].push(d0);
                    d[1].push(d1);
                    d[2].push(d2);
                }
                let (k0, k1) = lw.key_switch(&d[2], KeyRef::Relin);
                for ch in 0..a.level {
                    lw.bc(CInstKind::PolyAdd, ch, d[0][ch], d[0][ch], k0[ch]);
                    lw.bc(CInstKind::PolyAdd, ch, d[1][ch], d[1][ch], k1[ch]);
                    lw.free(k0[ch]);
                    lw.free(k1[ch]);
                    lw.free(d[2][ch]);
                }
                let [d0, d1, _] = d;
                Val { rows: vec![d0, d1], ..a }
            }
            HeOp::Rotate { k, .. } => {
                let a = get(0);
                if !a.cipher || a.domain != Domain::Evaluation {
                    return Err(kind_err("Rotate takes an evaluation-domain ciphertext"));
                }
                let g = galois_element(params, *k);
                let zero = lw.konst(0);
                let perm: Vec<Vec<u32>> = a
                    .rows
                    .iter()
                    .map(|rs| {
                        (0..a.level)
                            .map(|ch| {
                                let r = lw.alloc();
                                lw.steps.push(HeStep::Permute { channel: ch, src: rs[ch], mask: zero, dst: r, galois: g });
                                r
                            })
                            .collect()
                    })
                    .collect();
                if g == 1 {
                    Val { rows: perm, ..a }
                } else {
                    let (k0, k1) = lw.key_switch(&perm[1], KeyRef::Rotation(*k));
                    for ch in 0..a.level {
                        lw.bc(CInstKind::PolyAdd, ch, perm[0][ch], perm[0][ch], k0[ch]);
                        lw.free(k0[ch]);
                        lw.free(perm[1][ch]);
                    }
                    Val { rows: vec![perm[0].clone(), k1], ..a }
                }
            }
            HeOp::Rescale { .. } => {
                let a = get(0);
                if a.domain != Domain::Evaluation {
                    return Err(kind_err("Rescale takes an evaluation-domain value"));
                }
                if a.level < 2 {
                    return Err(CompileError::Level("rescale at level 1".into()));
                }
                let chans: Vec<usize> = (0..a.level).collect();
                let rows = a.rows.iter().map(|rs| lw.divide_tail(rs, &chans, 1)).collect();
                Val { rows, level: a.level - 1, ..a }
            }
            HeOp::Ntt { .. } | HeOp::Intt { .. } => {
                let a = get(0);
                let fwd = matches!(op, HeOp::Ntt { .. });
                let (from, to) = if fwd {
                    (Domain::Coefficient, Domain::Evaluation)
                } else {
                    (Domain::Evaluation, Domain::Coefficient)
                };
                if a.domain != from {
                    return Err(kind_err("transform applied in the wrong domain"));
                }
                let rows = a
                    .rows
                    .iter()
                    .map(|rs| {
                        (0..a.level)
                            .map(|ch| {
                                let r = lw.alloc();
                                if fwd {
                                    lw.ntt(ch, rs[ch], r);
                                } else {
                                    lw.intt(ch, rs[ch], r);
                                }
                                r
                            })
                            .collect()
                    })
                    .collect();
                Val { rows, domain: to, ..a }
            }
        };
        let v = first + i;
        vals[v] = Some(out);
        let mut dead: Vec<usize> = op_reads[i]
            .iter()
            .copied()
            .filter(|&r| last_read[r] == Some(i) && !live_out[r])
            .collect();
        if last_read[v].is_none() && !live_out[v] {
            dead.push(v);
        }
        dead.sort();
        dead.dedup();
        for d in dead {
            if let Some(val) = vals[d].take() {
                for r in val.rows.into_iter().flatten() {
                    lw.free(r);
                }
            }
        }
    }

    let mut outputs = Vec::with_capacity(program.outputs.len());
    for o in &program.outputs {
        let v = cur[o.as_str()];
        let val = vals[v].as_ref().expect("live output");
        outputs.push(OutputBinding {
            name: o.clone(),
            cipher: val.cipher,
            domain: val.domain,
            rows: val.rows.clone(),
        });
    }
    let end = lw.steps.len();
    let open: Vec<(u32, usize)> = lw.open.drain().collect();
    for (r, def) in open {
        lw.entries.push(Placement {
            value: lw.next_value,
            core: 0,
            tile: tile_of(r, profile),
            row: r,
            rows: lw.passes,
            def,
            last_use: end.max(def),
        });
        lw.next_value += 1;
    }
    let rows_used = lw.alloc.high_water();
    check_capacity(rows_used, profile)?;
    Ok(HeStream {
        degree: n,
        steps: lw.steps,
        outputs,
        map: AddressMap {
            rows_per_core: profile.rows_per_core(),
            entries: lw.entries,
        },
        rows_used,
        program: program.clone(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeCost {
    pub total: u64,
    pub broadcast: u64,
    pub transform: u64,
    pub permute: u64,
    /// Host-to-CEM row writes at the profile bandwidth.
    pub load: u64,
    pub broadcasts: usize,
    pub transforms: usize,
}

impl HeStream {
    /// Cycle cost on `profile`: broadcasts at the kernel lengths for each
    /// limb's modulus, transforms at their plan cost, permutations at one
    /// POLYPERM plus one bus hop per moved word.
    pub fn cost(&self, params: &RingParams, profile: &ArchProfile) -> Result<HeCost, CompileError> {
        let n = self.degree;
        let cores = profile.cores();
        let mut kernel: HashMap<usize, HashMap<CInstKind, u64>> = HashMap::new();
        let mut plans: HashMap<(NttDirection, u64), u64> = HashMap::new();
        let mut cost = HeCost::default();
        let row_bytes = (n * 8) as f64;
        let load = (row_bytes / profile.bytes_per_cycle()).ceil() as u64;
        for step in &self.steps {
            let ch = match step {
                HeStep::Load { .. } => {
                    cost.load += load;
                    continue;
                }
                HeStep::Broadcast { channel, .. } | HeStep::Transform { channel, .. } | HeStep::Permute { channel, .. } => {
                    *channel
                }
            };
            if !kernel.contains_key(&ch) {
                let table = cost_table(&KernelParams::for_modulus(*params.modulus(ch)))?;
                kernel.insert(ch, table.into_iter().map(|e| (e.kind, e.cycles as u64)).collect());
            }
            let k = &kernel[&ch];
            match step {
                HeStep::Broadcast { instr, .. } => {
                    cost.broadcast += he_broadcast(k[&instr.kind], n, cores).cycles;
                    cost.broadcasts += 1;
                }
                HeStep::Transform { direction, .. } => {
                    let bf = k[&if *direction == NttDirection::Forward { CInstKind::Ntt } else { CInstKind::Intt }];
                    let c = match plans.get(&(*direction, bf)) {
                        Some(&c) => c,
                        None => {
                            let plan = ntt_schedule_dir(n, cores, 1, *direction, profile.hop_cycles_per_word, bf)?;
                            plans.insert((*direction, bf), plan.cycles);
                            plan.cycles
                        }
                    };
                    cost.transform += c;
                    cost.transforms += 1;
                }
                HeStep::Permute { galois, .. } => {
                    let perm = galois_permutation(*galois, n);
                    let moved = perm.iter().enumerate().filter(|&(i, &p)| i != p).count() as u64;
                    cost.permute += he_broadcast(k[&CInstKind::PolyPerm], n, cores).cycles + moved * profile.hop_cycles_per_word;
                }
                HeStep::Load { .. } => unreachable!(),
            }
        }
        cost.total = cost.broadcast + cost.transform + cost.permute + cost.load;
        Ok(cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeValue {
    Cipher(Ciphertext),
    Plain(Plaintext),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeBackend {
    /// Every coefficient operation runs its micro-program on a simulated core.
    Microcode,
    /// Kernel semantics through the arithmetic library.
    Reference,
}

/// Functional executor for [`HeStream`]s: one row vector of `N` values per
/// allocated row, one coefficient per core.
pub struct HeMachine {
    params: Arc<RingParams>,
    profile: ArchProfile,
    backend: HeBackend,
    cores: HashMap<usize, CoreState>,
    plans: HashMap<NttDirection, NttPlan>,
    mem: HashMap<u32, Vec<u64>>,
}

fn reference_op(kind: CInstKind, a: u64, b: u64, q: &Modulus) -> Result<u64, CompileError> {
    Ok(match kind {
        CInstKind::PolyAdd => mod_addsub(a, b, q, AddSub::Add).map_err(CkksError::from)?,
        CInstKind::PolySub => mod_addsub(a, b, q, AddSub::Sub).map_err(CkksError::from)?,
        CInstKind::PolyMul => {
            let x = a as u128 * b as u128;
            match q.kind() {
                ModulusKind::General => barrett_reduce(x, q),
                _ => special_reduce(x, q),
            }
            .map_err(CkksError::from)?
        }
        CInstKind::PolyPerm => {
            if b != 0 {
                (q.value() - a) % q.value()
            } else {
                a
            }
        }
        k => return Err(CompileError::Invalid(format!("{k} is not an element-wise kernel"))),
    })
}

impl HeMachine {
    pub fn new(params: &Arc<RingParams>, profile: &ArchProfile, backend: HeBackend) -> Self {
        Self {
            params: params.clone(),
            profile: profile.clone(),
            backend,
            cores: HashMap::new(),
            plans: HashMap::new(),
            mem: HashMap::new(),
        }
    }

    fn core(&mut self, ch: usize) -> Result<&mut CoreState, CompileError> {
        if !self.cores.contains_key(&ch) {
            let kp = KernelParams::for_modulus(*self.params.modulus(ch));
            self.cores.insert(ch, CoreState::for_he(&self.profile, &kp)?);
        }
        Ok(self.cores.get_mut(&ch).unwrap())
    }

    fn row(&self, r: u32) -> Result<&Vec<u64>, CompileError> {
        self.mem.get(&r).ok_or_else(|| CompileError::Invalid(format!("row {r} read before written")))
    }

    fn elementwise(&mut self, kind: CInstKind, ch: usize, a: &[u64], b: &[u64]) -> Result<Vec<u64>, CompileError> {
        match self.backend {
            HeBackend::Microcode => Ok(he_broadcast_exec(self.core(ch)?, kind, a, b, None)?.0),
            HeBackend::Reference => {
                let q = *self.params.modulus(ch);
                a.iter().zip(b).map(|(&x, &y)| reference_op(kind, x, y, &q)).collect()
            }
        }
    }

    fn transform(&mut self, ch: usize, dir: NttDirection, x: Vec<u64>) -> Result<Vec<u64>, CompileError> {
        let n = self.params.degree();
        if !self.plans.contains_key(&dir) {
            let plan = ntt_schedule_dir(n, self.profile.cores(), 1, dir, self.profile.hop_cycles_per_word, 1)?;
            self.plans.insert(dir, plan);
        }
        let params = self.params.clone();
        let tables = params.tables(ch)?;
        match self.backend {
            HeBackend::Microcode => {
                let plan = self.plans[&dir].clone();
                let mut out = execute_ntt_plan(&plan, &[x], tables, self.core(ch)?)?;
                Ok(out.pop().unwrap())
            }
            HeBackend::Reference => {
                let q = tables.modulus();
                let mut v = x;
                for stage in &self.plans[&dir].stages {
                    for bf in &stage.butterflies {
                        let (a, b) = match dir {
                            NttDirection::Forward => ct_butterfly(v[bf.lo], v[bf.hi], tables.forward_twiddle(bf.twiddle), q),
                            NttDirection::Inverse => gs_butterfly(v[bf.lo], v[bf.hi], tables.inverse_twiddle(bf.twiddle), q),
                        };
                        v[bf.lo] = a;
                        v[bf.hi] = b;
                    }
                }
                Ok(v)
            }
        }
    }

    fn load(&self, init: &RowInit, inputs: &BTreeMap<String, HeValue>, keys: Option<&EvaluationKeys>) -> Result<Vec<u64>, CompileError> {
        let n = self.params.degree();
        Ok(match init {
            RowInit::Splat(v) => vec![*v; n],
            RowInit::Input { name, comp, limb } => {
                let poly = match inputs.get(name) {
                    Some(HeValue::Cipher(c)) if *comp == 0 => &c.c0,
                    Some(HeValue::Cipher(c)) => &c.c1,
                    Some(HeValue::Plain(p)) => &p.poly,
                    None => return Err(CompileError::Undefined(name.clone())),
                };
                if poly.domain() != Domain::Evaluation || *limb >= poly.channels().len() {
                    return Err(CompileError::Invalid(format!("input {name} lacks limb {limb} in the evaluation domain")));
                }
                poly.residues(*limb).to_vec()
            }
            RowInit::Key { key, digit, comp, channel } => {
                let keys = keys.ok_or_else(|| CompileError::Invalid("stream needs keys".into()))?;
                let ksk = match key {
                    KeyRef::Relin => &keys.relin,
                    KeyRef::Rotation(k) => keys.rotations.get(k).ok_or(CkksError::MissingKey(*k))?,
                };
                let (b, a) = &ksk.digits[*digit];
                let p = if *comp == 0 { b } else { a };
                let pos = p
                    .channels()
                    .iter()
                    .position(|c| c == channel)
                    .ok_or_else(|| CompileError::Invalid(format!("key lacks channel {channel}")))?;
                p.residues(pos).to_vec()
            }
        })
    }

    /// Executes `stream` on ciphertexts/plaintexts in the evaluation domain.
    /// Keys are the evaluation keys only; the secret is never read.
    pub fn run(
        &mut self,
        stream: &HeStream,
        inputs: &BTreeMap<String, HeValue>,
        keys: Option<&EvaluationKeys>,
    ) -> Result<BTreeMap<String, HeValue>, CompileError> {
        if stream.degree != self.params.degree() {
            return Err(CompileError::Invalid("stream and ring degree differ".into()));
        }
        self.mem.clear();
        for step in &stream.steps {
            match step {
                HeStep::Load { row, init } => {
                    let v = self.load(init, inputs, keys)?;
                    self.mem.insert(*row, v);
                }
                HeStep::Broadcast { channel, instr } => {
                    let a = self.row(instr.rs1)?.clone();
                    let b = self.row(instr.rs2)?.clone();
                    let out = self.elementwise(instr.kind, *channel, &a, &b)?;
                    self.mem.insert(instr.rd, out);
                }
                HeStep::Transform { channel, direction, src, dst } => {
                    let x = self.row(*src)?.clone();
                    let out = self.transform(*channel, *direction, x)?;
                    self.mem.insert(*dst, out);
                }
                HeStep::Permute { channel, src, mask, dst, galois } => {
                    let x = self.row(*src)?.clone();
                    let m = self.row(*mask)?.clone();
                    let signed = self.elementwise(CInstKind::PolyPerm, *channel, &x, &m)?;
                    let perm = galois_permutation(*galois, self.params.degree());
                    self.mem.insert(*dst, perm.iter().map(|&p| signed[p]).collect());
                }
            }
        }
        let meta = propagate_meta(&stream.program, inputs, &self.params)?;
        let mut out = BTreeMap::new();
        for b in &stream.outputs {
            let (scale, slots) = meta[&b.name];
            let level = b.rows[0].len();
            let chans: Vec<usize> = (0..level).collect();
            let poly = |rows: &Vec<u32>| -> Result<RnsPolynomial, CompileError> {
                let data = rows.iter().map(|r| self.row(*r).cloned()).collect::<Result<Vec<_>, _>>()?;
                Ok(RnsPolynomial::from_channels(&self.params, &chans, data, b.domain)?)
            };
            let v = if b.cipher {
                HeValue::Cipher(Ciphertext { c0: poly(&b.rows[0])?, c1: poly(&b.rows[1])?, scale, slots })
            } else {
                HeValue::Plain(Plaintext { poly: poly(&b.rows[0])?, scale, slots })
            };
            out.insert(b.name.clone(), v);
        }
        Ok(out)
    }
}

/// Scale and slot count of every register after the program.
fn propagate_meta(
    program: &HeProgram,
    inputs: &BTreeMap<String, HeValue>,
    params: &RingParams,
) -> Result<HashMap<String, (f64, usize)>, CompileError> {
    let mut m: HashMap<String, (f64, usize, usize)> = HashMap::new();
    for inp in &program.inputs {
        let name = inp.name();
        let meta = match inputs.get(name) {
            Some(HeValue::Cipher(c)) => (c.scale, c.slots, c.level()),
            Some(HeValue::Plain(p)) => (p.scale, p.slots, p.level()),
            None => return Err(CompileError::Undefined(name.into())),
        };
        m.insert(name.into(), meta);
    }
    for op in &program.ops {
        let r = op.reads();
        let a = m[r[0]];
        let out = match op {
            HeOp::MulPlain { .. } | HeOp::Mul { .. } => {
                let b = m[r[1]];
                (a.0 * b.0, a.1.max(b.1), a.2)
            }
            HeOp::Add { .. } | HeOp::Sub { .. } | HeOp::AddPlain { .. } => {
                let b = m[r[1]];
                (a.0, a.1.max(b.1), a.2)
            }
            HeOp::Rescale { .. } => (a.0 / params.modulus(a.2 - 1).value() as f64, a.1, a.2 - 1),
            _ => a,
        };
        m.insert(op.dst().into(), out);
    }
    Ok(m.into_iter().map(|(k, v)| (k, (v.0, v.1))).collect())
}
