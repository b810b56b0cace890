use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::ckks::{NttDirection, NttTables};
use crate::isa::layout::DATA_BASE;
use crate::isa::{CInstKind, Instr};
use crate::sim::CoreState;

const ROW_A: u32 = DATA_BASE as u32;
const ROW_B: u32 = DATA_BASE as u32 + 4;
const ROW_D: u32 = DATA_BASE as u32 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastReport {
    pub passes: u64,
    pub cycles: u64,
}

/// Lockstep cost of one HE C-Inst over `n` coefficients, one per core.
/// More coefficients than cores run as serial passes.
pub fn he_broadcast(program_cycles: u64, n: usize, cores: usize) -> BroadcastReport {
    let passes = n.div_ceil(cores.max(1)).max(1) as u64;
    BroadcastReport {
        passes,
        cycles: passes * program_cycles,
    }
}

/// Functional broadcast: every coefficient runs the kernel at the same
/// addresses of its own core (the cores are simulated one after another).
/// `b_next` is the row after `rs2` (the twiddle for NTT/INTT). Returns the
/// `rd` and `rd+1` rows.
pub fn he_broadcast_exec(
    core: &mut CoreState,
    kind: CInstKind,
    a: &[u64],
    b: &[u64],
    b_next: Option<&[u64]>,
) -> Result<(Vec<u64>, Vec<u64>), DispatchError> {
    if !kind.is_he() {
        return Err(DispatchError::Config(format!("{kind} is not an HE kernel")));
    }
    if a.len() != b.len() || b_next.is_some_and(|t| t.len() != a.len()) {
        return Err(DispatchError::Config("operand lengths differ".into()));
    }
    let instr = Instr::new(kind, ROW_D, ROW_A, ROW_B);
    let mut lo = Vec::with_capacity(a.len());
    let mut hi = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        core.write_row(ROW_A as usize, a[i] as u128)?;
        core.write_row(ROW_B as usize, b[i] as u128)?;
        core.write_row(ROW_B as usize + 1, b_next.map_or(0, |t| t[i]) as u128)?;
        core.run_cinst(&instr)?;
        lo.push(core.read_row(ROW_D as usize)? as u64);
        hi.push(core.read_row(ROW_D as usize + 1)? as u64);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Butterfly {
    pub transform: usize,
    pub core: usize,
    pub lo: usize,
    pub hi: usize,
    /// Index into the forward twiddle table.
    pub twiddle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordMove {
    pub transform: usize,
    /// Coefficient position being moved.
    pub pos: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NttStage {
    pub moves: Vec<WordMove>,
    pub butterflies: Vec<Butterfly>,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NttPlan {
    pub n: usize,
    pub direction: NttDirection,
    pub cores: usize,
    pub transforms: usize,
    pub stages: Vec<NttStage>,
    pub cycles: u64,
    /// Distinct cores running butterflies, per transform.
    pub cores_used: Vec<usize>,
}

/// Forward-NTT plan over `cores` cores holding one coefficient each.
///
/// Transform `k` runs its butterflies on cores `k·N/2 .. (k+1)·N/2`. Each
/// stage first moves words over the shared bus (`hop_cycles` per word,
/// serialized), then every butterfly core runs one NTT C-Inst in lockstep.
pub fn ntt_schedule(
    n: usize,
    cores: usize,
    transforms: usize,
    hop_cycles: u64,
    butterfly_cycles: u64,
) -> Result<NttPlan, DispatchError> {
    ntt_schedule_dir(n, cores, transforms, NttDirection::Forward, hop_cycles, butterfly_cycles)
}

/// Butterfly pairs `(lo, hi, twiddle index)` of each stage.
fn stage_pairs(n: usize, direction: NttDirection) -> Vec<Vec<(usize, usize, usize)>> {
    let mut stages = Vec::new();
    match direction {
        NttDirection::Forward => {
            let (mut t, mut m) = (n, 1);
            while m < n {
                t /= 2;
                let mut v = Vec::with_capacity(n / 2);
                for i in 0..m {
                    let j1 = 2 * i * t;
                    v.extend((j1..j1 + t).map(|lo| (lo, lo + t, m + i)));
                }
                stages.push(v);
                m *= 2;
            }
        }
        NttDirection::Inverse => {
            let (mut t, mut m) = (1, n);
            while m > 1 {
                let h = m / 2;
                let mut v = Vec::with_capacity(n / 2);
                for i in 0..h {
                    let j1 = 2 * i * t;
                    v.extend((j1..j1 + t).map(|lo| (lo, lo + t, h + i)));
                }
                stages.push(v);
                t *= 2;
                m = h;
            }
        }
    }
    stages
}

/// As [`ntt_schedule`] for either direction. Inverse plans run INTT
/// (Gentleman–Sande) butterflies and leave the `N⁻¹` scaling to the caller.
pub fn ntt_schedule_dir(
    n: usize,
    cores: usize,
    transforms: usize,
    direction: NttDirection,
    hop_cycles: u64,
    butterfly_cycles: u64,
) -> Result<NttPlan, DispatchError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(DispatchError::Config(format!("N = {n} is not a power of two")));
    }
    let half = n / 2;
    if !(1..=2).contains(&transforms) || cores < half * transforms {
        return Err(DispatchError::Config(format!(
            "{transforms} transform(s) of N = {n} need {} cores, have {cores}",
            half * transforms
        )));
    }
    let mut loc: Vec<Vec<usize>> = (0..transforms).map(|_| (0..n).map(|i| i % cores).collect()).collect();
    let mut used: Vec<Vec<bool>> = vec![vec![false; cores]; transforms];
    let mut stages = Vec::new();
    for pairs in stage_pairs(n, direction) {
        let mut moves = Vec::new();
        let mut butterflies = Vec::new();
        for (k, loc) in loc.iter_mut().enumerate() {
            let base = k * half;
            let in_half = |c: usize| (base..base + half).contains(&c);
            let mut busy = vec![false; half];
            for &(lo, hi, twiddle) in &pairs {
                let pick = [loc[lo], loc[hi]]
                    .into_iter()
                    .find(|&c| in_half(c) && !busy[c - base])
                    .or_else(|| busy.iter().position(|b| !b).map(|p| p + base))
                    .expect("N/2 butterflies fit N/2 cores");
                busy[pick - base] = true;
                used[k][pick] = true;
                for pos in [lo, hi] {
                    if loc[pos] != pick {
                        moves.push(WordMove {
                            transform: k,
                            pos,
                            from: loc[pos],
                            to: pick,
                        });
                        loc[pos] = pick;
                    }
                }
                butterflies.push(Butterfly {
                    transform: k,
                    core: pick,
                    lo,
                    hi,
                    twiddle,
                });
            }
        }
        let cycles = moves.len() as u64 * hop_cycles + butterfly_cycles;
        stages.push(NttStage {
            moves,
            butterflies,
            cycles,
        });
    }
    Ok(NttPlan {
        n,
        direction,
        cores,
        transforms,
        cycles: stages.iter().map(|s| s.cycles).sum(),
        cores_used: used.iter().map(|u| u.iter().filter(|&&x| x).count()).collect(),
        stages,
    })
}

/// Runs `plan` with every butterfly executed as an NTT C-Inst on `core`.
/// `polys[k]` is the input of transform `k`. Forward outputs are in
/// bit-reversed order; inverse outputs are not yet scaled by `N⁻¹`.
pub fn execute_ntt_plan(
    plan: &NttPlan,
    polys: &[Vec<u64>],
    tables: &NttTables,
    core: &mut CoreState,
) -> Result<Vec<Vec<u64>>, DispatchError> {
    if polys.len() != plan.transforms || polys.iter().any(|p| p.len() != plan.n) || tables.degree() != plan.n {
        return Err(DispatchError::Config("plan and operands disagree".into()));
    }
    let mut vals = polys.to_vec();
    for stage in &plan.stages {
        for k in 0..plan.transforms {
            let bfs: Vec<&Butterfly> = stage.butterflies.iter().filter(|b| b.transform == k).collect();
            let a: Vec<u64> = bfs.iter().map(|b| vals[k][b.lo]).collect();
            let b: Vec<u64> = bfs.iter().map(|b| vals[k][b.hi]).collect();
            let (kind, w): (CInstKind, Vec<u64>) = match plan.direction {
                NttDirection::Forward => (CInstKind::Ntt, bfs.iter().map(|b| tables.forward_twiddle(b.twiddle)).collect()),
                NttDirection::Inverse => (CInstKind::Intt, bfs.iter().map(|b| tables.inverse_twiddle(b.twiddle)).collect()),
            };
            let (lo, hi) = he_broadcast_exec(core, kind, &a, &b, Some(&w))?;
            for (i, bf) in bfs.iter().enumerate() {
                vals[k][bf.lo] = lo[i];
                vals[k][bf.hi] = hi[i];
            }
        }
    }
    Ok(vals)
}
