use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::isa::{
    Addr, AddrMode, CInstKind, CemFunc, Instr, MicroInstruction, MicroProgram, ShiftFunc, UpdateDescriptor,
    LUT_ELEMENTS, UIM_WORDS,
};

use super::profile::{ArchProfile, EnergyModel};
use super::units::{cem_op, shifter_op, LutFabric};
use super::SimError;

/// One unit activation, as written to the JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub core: usize,
    pub unit: String,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addr: Option<u32>,
}

/// Base addresses that relative CEM addresses resolve against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Regs {
    pub rd: u32,
    pub rs1: u32,
    pub rs2: u32,
}

impl From<&Instr> for Regs {
    fn from(i: &Instr) -> Self {
        Regs { rd: i.rd, rs1: i.rs1, rs2: i.rs2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCounters {
    pub cem_ops: u64,
    pub shifter_ops: u64,
    pub lut_ops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Row(usize),
    Latch(usize),
}

/// Architectural state of one IMC core.
#[derive(Debug, Clone)]
pub struct CoreState {
    pub id: usize,
    rows: Vec<u128>,
    latches: [u128; 4],
    lane_bits: u32,
    last_carry: [u8; 4],
    lut: LutFabric,
    programs: BTreeMap<CInstKind, MicroProgram>,
    pc: usize,
    cycle: u64,
    energy_pj: f64,
    energy: EnergyModel,
    counters: UnitCounters,
    trace: Option<Vec<TraceEvent>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CInstOutcome {
    pub cycles: u64,
}

impl CoreState {
    pub fn new(profile: &ArchProfile) -> Self {
        CoreState {
            id: 0,
            rows: vec![0; profile.rows_per_core()],
            latches: [0; 4],
            lane_bits: 32,
            last_carry: [0; 4],
            lut: LutFabric::aes(LUT_ELEMENTS),
            programs: BTreeMap::new(),
            pc: 0,
            cycle: 0,
            energy_pj: 0.0,
            energy: profile.energy,
            counters: UnitCounters::default(),
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn read_row(&self, row: usize) -> Result<u128, SimError> {
        self.rows.get(row).copied().ok_or(SimError::InvalidAddress { row, rows: self.rows.len() })
    }

    pub fn write_row(&mut self, row: usize, v: u128) -> Result<(), SimError> {
        let n = self.rows.len();
        *self.rows.get_mut(row).ok_or(SimError::InvalidAddress { row, rows: n })? = v;
        Ok(())
    }

    pub fn load_rows(&mut self, rows: &[(u16, u128)]) -> Result<(), SimError> {
        for &(r, v) in rows {
            self.write_row(r as usize, v)?;
        }
        Ok(())
    }

    pub fn latch(&self, k: usize) -> u128 {
        self.latches[k]
    }

    pub fn lane_bits(&self) -> u32 {
        self.lane_bits
    }

    pub fn last_carry(&self, port: usize) -> u8 {
        self.last_carry[port]
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub fn energy_pj(&self) -> f64 {
        self.energy_pj
    }

    pub fn counters(&self) -> UnitCounters {
        self.counters
    }

    pub fn lut(&self) -> &LutFabric {
        &self.lut
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Distinct micro-instruction words resident in the μIM.
    pub fn uim_words(&self) -> usize {
        self.programs
            .values()
            .flat_map(|p| p.words.iter().map(MicroInstruction::encode))
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn program(&self, kind: CInstKind) -> Option<&MicroProgram> {
        self.programs.get(&kind)
    }

    /// Applies a broadcast update and returns the cycles it occupies.
    pub fn apply(&mut self, update: &UpdateDescriptor) -> Result<u64, SimError> {
        match update {
            UpdateDescriptor::Uim(p) => {
                let old = self.programs.insert(p.kind, p.clone());
                let words = self.uim_words();
                if words > UIM_WORDS {
                    match old {
                        Some(o) => self.programs.insert(p.kind, o),
                        None => self.programs.remove(&p.kind),
                    };
                    return Err(SimError::UimFull { need: words, have: UIM_WORDS });
                }
                let cycles = p.footprint_words() as u64;
                self.cycle += cycles;
                Ok(cycles)
            }
            UpdateDescriptor::Lut { element, table } => {
                self.lut.load(*element, table)?;
                let cycles = (table.len() / 16) as u64;
                self.cycle += cycles;
                Ok(cycles)
            }
        }
    }

    fn resolve(&self, a: Addr, regs: &Regs) -> Result<Loc, SimError> {
        if let Some(k) = a.latch_index() {
            return Ok(Loc::Latch(k as usize));
        }
        let base = match a.mode() {
            AddrMode::Abs => 0,
            AddrMode::Rs1 => regs.rs1,
            AddrMode::Rs2 => regs.rs2,
            AddrMode::Rd => regs.rd,
        } as usize;
        let row = base + a.offset() as usize;
        if row >= self.rows.len() {
            return Err(SimError::InvalidAddress { row, rows: self.rows.len() });
        }
        Ok(Loc::Row(row))
    }

    fn get(&self, l: Loc) -> u128 {
        match l {
            Loc::Row(r) => self.rows[r],
            Loc::Latch(k) => self.latches[k],
        }
    }

    fn set(&mut self, l: Loc, v: u128) {
        match l {
            Loc::Row(r) => self.rows[r] = v,
            Loc::Latch(k) => self.latches[k] = v,
        }
    }

    /// Executes one micro-instruction and returns its unit events.
    pub fn step(&mut self, word: &MicroInstruction, regs: &Regs) -> Result<Vec<TraceEvent>, SimError> {
        let mut events = Vec::new();
        self.exec(word, regs, Some(&mut events))?;
        Ok(events)
    }

    fn exec(
        &mut self,
        word: &MicroInstruction,
        regs: &Regs,
        mut sink: Option<&mut Vec<TraceEvent>>,
    ) -> Result<(), SimError> {
        let cycle = self.cycle;
        let core = self.id;
        let mut log = |unit: &str, op: &str, addr: Option<Loc>| {
            if let Some(s) = sink.as_deref_mut() {
                s.push(TraceEvent {
                    cycle,
                    core,
                    unit: unit.to_string(),
                    op: op.to_string(),
                    addr: match addr {
                        Some(Loc::Row(r)) => Some(r as u32),
                        _ => None,
                    },
                });
            }
        };
        let e = self.energy;
        let mut energy = e.controller_pj;
        let mut locs = [(Loc::Latch(0), Loc::Latch(0)); 4];
        for (i, c) in word.cem.iter().enumerate() {
            if c.enable {
                locs[i] = (self.resolve(c.a, regs)?, self.resolve(c.b, regs)?);
            }
        }
        const UNITS: [&str; 4] = ["cem0", "cem1", "cem2", "cem3"];
        // Phase 1: reads into latches.
        for (i, c) in word.cem.iter().enumerate() {
            if c.enable && c.func == CemFunc::Read {
                let (a, b) = locs[i];
                if !matches!(b, Loc::Latch(_)) {
                    return Err(SimError::ReadTarget);
                }
                let v = self.get(a);
                self.set(b, v);
                energy += e.cem_rw_pj;
                log(UNITS[i], "read", Some(a));
            }
        }
        // Phase 2: shifter on L0/L1.
        if word.shifter.enable {
            let f = word.shifter.func;
            let amount = if f.takes_amount() {
                word.shift_amount().ok_or(SimError::ShiftAmountUnavailable)? as u32
            } else {
                0
            };
            match f {
                ShiftFunc::Lane32 => self.lane_bits = 32,
                ShiftFunc::Lane64 => self.lane_bits = 64,
                ShiftFunc::Lane128 => self.lane_bits = 128,
                _ => {
                    for k in 0..2 {
                        self.latches[k] = shifter_op(f, self.latches[k], amount, self.lane_bits)?;
                    }
                }
            }
            energy += e.shifter_pj;
            self.counters.shifter_ops += 1;
            log("shifter", f.mnemonic(), None);
        }
        // Phase 3: LUT fabric on L0/L1.
        if word.lut.enable {
            for k in 0..2 {
                self.latches[k] = if word.lut.mix {
                    self.lut.sub_mix(self.latches[k])?
                } else {
                    self.lut.substitute(self.latches[k])?
                };
            }
            energy += e.lut_pj;
            self.counters.lut_ops += 1;
            log("lut", if word.lut.mix { "submix" } else { "sub" }, None);
        }
        // Phase 4: compute and write-back in port order.
        for (i, c) in word.cem.iter().enumerate() {
            if !c.enable {
                continue;
            }
            self.counters.cem_ops += 1;
            if c.func == CemFunc::Read {
                continue;
            }
            let (a, b) = locs[i];
            let r = cem_op(c.func, self.get(a), self.get(b), self.lane_bits);
            self.set(b, r.value);
            self.last_carry[i] = r.carry;
            energy += match c.func {
                CemFunc::Add | CemFunc::AddC => e.cem_add_pj,
                CemFunc::Write => e.cem_rw_pj,
                _ => e.cem_logic_pj,
            };
            log(UNITS[i], c.func.mnemonic(), Some(b));
        }
        self.energy_pj += energy;
        self.cycle += 1;
        Ok(())
    }

    /// Runs the resident micro-program for `instr`; one word per cycle.
    pub fn run_cinst(&mut self, instr: &Instr) -> Result<CInstOutcome, SimError> {
        let prog = self
            .programs
            .get(&instr.kind)
            .ok_or(SimError::ProgramNotLoaded(instr.kind))?
            .words
            .clone();
        let regs = Regs::from(instr);
        let mut trace = self.trace.take();
        let mut result = Ok(());
        for (pc, w) in prog.iter().enumerate() {
            self.pc = pc;
            result = self.exec(w, &regs, trace.as_mut());
            if result.is_err() {
                break;
            }
        }
        self.trace = trace;
        self.pc = 0;
        result?;
        Ok(CInstOutcome { cycles: prog.len() as u64 })
    }
}
