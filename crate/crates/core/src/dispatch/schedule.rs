use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::cam::{CInstBank, OaCam, DEFAULT_CAPACITY_BYTES};
use super::{he_broadcast, DispatchError, GcUnitConfig};
use crate::isa::layout::HG_ROWS;
use crate::isa::{cost_table, CInstKind, Instr, KernelParams, FREEXOR_CYCLES, HALFGATE_CYCLES};
use crate::sim::CoreState;

/// A C-Inst as the scheduler sees it: the instruction plus the rows it reads and writes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchInst {
    pub instr: Instr,
    pub inputs: Vec<u32>,
    pub outputs: Vec<u32>,
    /// Rows the host writes right before execution (the HALFGATE tweak).
    pub staged: Vec<(u32, u128)>,
}

impl DispatchInst {
    /// Read/write sets implied by the instruction kind.
    pub fn new(instr: Instr) -> Self {
        let Instr { kind, rd, rs1, rs2 } = instr;
        let (inputs, outputs) = match kind {
            CInstKind::HalfGate => (vec![rs1, rs2], (rd..rd + HG_ROWS as u32).collect()),
            CInstKind::Ntt | CInstKind::Intt => (vec![rs1, rs2, rs2 + 1], vec![rd, rd + 1]),
            _ => (vec![rs1, rs2], vec![rd]),
        };
        Self {
            instr,
            inputs,
            outputs,
            staged: Vec::new(),
        }
    }

    pub fn with_stage(mut self, row: u32, value: u128) -> Self {
        self.staged.push((row, value));
        self
    }
}

/// Cycles per instruction kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyTable(pub BTreeMap<CInstKind, u64>);

impl Default for LatencyTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert(CInstKind::FreeXor, FREEXOR_CYCLES as u64);
        m.insert(CInstKind::HalfGate, HALFGATE_CYCLES as u64);
        Self(m)
    }
}

impl LatencyTable {
    /// Adds the HE kernel lengths generated for `params`.
    pub fn with_he(mut self, params: &KernelParams) -> Result<Self, DispatchError> {
        for e in cost_table(params)? {
            self.0.entry(e.kind).or_insert(e.cycles as u64);
        }
        Ok(self)
    }

    pub fn get(&self, kind: CInstKind) -> Result<u64, DispatchError> {
        self.0
            .get(&kind)
            .copied()
            .ok_or(DispatchError::NoLatency(kind))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchConfig {
    pub gc: GcUnitConfig,
    pub cam_bytes: usize,
    pub bank_bytes: usize,
    pub latencies: LatencyTable,
    /// Coefficients per HE broadcast.
    pub he_degree: usize,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            gc: GcUnitConfig::default(),
            cam_bytes: DEFAULT_CAPACITY_BYTES,
            bank_bytes: DEFAULT_CAPACITY_BYTES,
            latencies: LatencyTable::default(),
            he_degree: 8192,
        }
    }
}

impl DispatchConfig {
    pub fn with_units(units: usize) -> Self {
        Self {
            gc: GcUnitConfig {
                units,
                ..GcUnitConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Functional side of an issue.
pub trait Executor {
    /// `unit` is `None` for an HE broadcast across all cores.
    fn execute(&mut self, inst: &DispatchInst, unit: Option<usize>) -> Result<(), DispatchError>;
}

/// Timing only.
#[derive(Debug, Default, Clone, Copy)]
pub struct TimingOnly;

impl Executor for TimingOnly {
    fn execute(&mut self, _: &DispatchInst, _: Option<usize>) -> Result<(), DispatchError> {
        Ok(())
    }
}

/// Runs every issued instruction on a set of lock-stepped cores sharing one address space.
///
/// Each lane is one core position inside a computing unit; all units see
/// the same rows, so a label produced on unit 0 is read by unit 1 at the
/// same address. Instructions execute at issue, which is sound because an
/// instruction only issues once its producers retired and no older reader
/// or writer of its outputs is pending.
#[derive(Debug, Clone)]
pub struct LaneExecutor {
    pub lanes: Vec<CoreState>,
}

impl Executor for LaneExecutor {
    fn execute(&mut self, inst: &DispatchInst, _: Option<usize>) -> Result<(), DispatchError> {
        for core in &mut self.lanes {
            for &(row, v) in &inst.staged {
                core.write_row(row as usize, v)?;
            }
            core.run_cinst(&inst.instr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispatchEvent {
    Issued { id: usize, unit: usize, cycle: u64 },
    Banked { id: usize, cycle: u64 },
    /// Reported in the cycle after `cycle`, when the entry is cleared.
    Retired { id: usize, unit: usize, cycle: u64 },
    Broadcast { id: usize, cycle: u64, passes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Issued { id: usize, unit: usize },
    Banked { id: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstRecord {
    pub id: usize,
    pub kind: CInstKind,
    pub submit: u64,
    pub issue: Option<u64>,
    pub complete: Option<u64>,
    /// `None` for broadcasts, which occupy every unit.
    pub unit: Option<usize>,
    pub banked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupancy {
    pub id: usize,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub records: Vec<InstRecord>,
    pub units: Vec<Vec<Occupancy>>,
    pub events: Vec<DispatchEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_cycles: u64,
    pub instructions: usize,
    pub busy_cycles: Vec<u64>,
    pub utilization: Vec<f64>,
    pub bank_peak: usize,
    pub cam_peak: usize,
    pub frontend_stalls: u64,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    id: usize,
    complete: u64,
}

/// Cycle-driven IMC instruction scheduler for the GC computing units.
///
/// An instruction issued in cycle `t` with latency `L` occupies its unit in
/// cycles `t ..= t+L-1`; its unit and OA-CAM entries are released at the
/// start of cycle `t+L`.
pub struct Dispatcher<E: Executor = TimingOnly> {
    config: DispatchConfig,
    cycle: u64,
    units: Vec<Option<Running>>,
    cam: OaCam,
    /// Inputs of issued-or-banked instructions, for write-after-read ordering.
    readers: HashMap<u32, Vec<usize>>,
    bank: CInstBank,
    insts: Vec<DispatchInst>,
    trace: ScheduleTrace,
    bank_peak: usize,
    cam_peak: usize,
    /// Set when an instruction retires; banked readiness and free units
    /// change only then.
    rescan: bool,
    executor: E,
}

impl<E: Executor> Dispatcher<E> {
    pub fn new(config: DispatchConfig, executor: E) -> Result<Self, DispatchError> {
        config.gc.validate()?;
        Ok(Self {
            cycle: 0,
            units: vec![None; config.gc.units],
            cam: OaCam::new(config.cam_bytes),
            readers: HashMap::new(),
            bank: CInstBank::new(config.bank_bytes),
            insts: Vec::new(),
            trace: ScheduleTrace {
                records: Vec::new(),
                units: vec![Vec::new(); config.gc.units],
                events: Vec::new(),
            },
            bank_peak: 0,
            cam_peak: 0,
            rescan: false,
            config,
            executor,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn cam(&self) -> &OaCam {
        &self.cam
    }

    pub fn bank(&self) -> &CInstBank {
        &self.bank
    }

    pub fn executor(&self) -> &E {
        &self.executor
    }

    pub fn into_executor(self) -> E {
        self.executor
    }

    pub fn trace(&self) -> &ScheduleTrace {
        &self.trace
    }

    /// No instruction in flight or banked.
    pub fn idle(&self) -> bool {
        self.bank.is_empty() && self.units.iter().all(Option::is_none)
    }

    fn older_reader(&self, addr: u32, id: usize) -> bool {
        self.readers
            .get(&addr)
            .is_some_and(|r| r.iter().any(|&x| x < id))
    }

    fn ready(&self, id: usize, inst: &DispatchInst) -> bool {
        inst.inputs.iter().all(|&a| !self.cam.hit_before(a, id))
            && inst
                .outputs
                .iter()
                .all(|&a| !self.cam.hit_before(a, id) && !self.older_reader(a, id))
    }

    fn free_unit(&self) -> Option<usize> {
        self.units.iter().position(Option::is_none)
    }

    fn issue(&mut self, id: usize, unit: usize) -> Result<(), DispatchError> {
        let inst = &self.insts[id];
        let lat = self.config.latencies.get(inst.instr.kind)?;
        let complete = self.cycle + lat - 1;
        self.executor.execute(inst, Some(unit))?;
        self.units[unit] = Some(Running { id, complete });
        let rec = &mut self.trace.records[id];
        rec.issue = Some(self.cycle);
        rec.complete = Some(complete);
        rec.unit = Some(unit);
        self.trace.units[unit].push(Occupancy {
            id,
            start: self.cycle,
            end: complete,
        });
        self.trace.events.push(DispatchEvent::Issued {
            id,
            unit,
            cycle: self.cycle,
        });
        Ok(())
    }

    fn release(&mut self, id: usize) {
        self.rescan = true;
        let inst = &self.insts[id];
        for &a in &inst.outputs {
            self.cam.remove(a, id);
        }
        for a in &inst.inputs {
            if let Some(r) = self.readers.get_mut(a) {
                if let Some(p) = r.iter().position(|&x| x == id) {
                    r.swap_remove(p);
                }
                if r.is_empty() {
                    self.readers.remove(a);
                }
            }
        }
    }

    /// Advances one cycle: retire finished instructions, then issue ready banked
    /// ones in FIFO order. Returns the events of this cycle.
    pub fn tick(&mut self) -> Result<Vec<DispatchEvent>, DispatchError> {
        self.cycle += 1;
        let first = self.trace.events.len();
        for u in 0..self.units.len() {
            if let Some(r) = self.units[u] {
                if r.complete < self.cycle {
                    self.units[u] = None;
                    self.release(r.id);
                    self.trace.events.push(DispatchEvent::Retired {
                        id: r.id,
                        unit: u,
                        cycle: r.complete,
                    });
                }
            }
        }
        if !std::mem::take(&mut self.rescan) {
            return Ok(self.trace.events[first..].to_vec());
        }
        let mut pos = 0;
        while pos < self.bank.len() {
            let Some(unit) = self.free_unit() else { break };
            let id = self.bank.get(pos).expect("in range");
            if self.ready(id, &self.insts[id]) {
                self.bank.remove(pos);
                self.issue(id, unit)?;
            } else {
                pos += 1;
            }
        }
        Ok(self.trace.events[first..].to_vec())
    }

    /// Offers one GC instruction in the current cycle.
    pub fn submit(&mut self, inst: DispatchInst) -> Result<SubmitOutcome, DispatchError> {
        if !inst.instr.kind.is_gc() {
            return Err(DispatchError::NotGc(inst.instr.kind));
        }
        self.config.latencies.get(inst.instr.kind)?;
        if self.bank.is_full() || !self.cam.has_room(inst.outputs.len()) {
            return Err(DispatchError::Backpressure);
        }
        let id = self.insts.len();
        self.trace.records.push(InstRecord {
            id,
            kind: inst.instr.kind,
            submit: self.cycle,
            issue: None,
            complete: None,
            unit: None,
            banked: false,
        });
        for &a in &inst.outputs {
            self.cam.insert(a, id);
        }
        for &a in &inst.inputs {
            self.readers.entry(a).or_default().push(id);
        }
        self.cam_peak = self.cam_peak.max(self.cam.len());
        let ready = self.ready(id, &inst);
        self.insts.push(inst);
        match self.free_unit() {
            Some(unit) if ready => {
                self.issue(id, unit)?;
                Ok(SubmitOutcome::Issued { id, unit })
            }
            _ => {
                self.trace.records[id].banked = true;
                self.bank.push(id);
                self.bank_peak = self.bank_peak.max(self.bank.len());
                self.trace.events.push(DispatchEvent::Banked {
                    id,
                    cycle: self.cycle,
                });
                Ok(SubmitOutcome::Banked { id })
            }
        }
    }

    /// Runs an HE instruction on every core in lockstep. Requires an idle dispatcher.
    pub fn broadcast(&mut self, inst: DispatchInst) -> Result<u64, DispatchError> {
        if !self.idle() {
            return Err(DispatchError::Busy);
        }
        let lat = self.config.latencies.get(inst.instr.kind)?;
        let report = he_broadcast(lat, self.config.he_degree, self.config.gc.total_cores());
        let id = self.insts.len();
        let end = self.cycle + report.cycles - 1;
        self.executor.execute(&inst, None)?;
        self.trace.records.push(InstRecord {
            id,
            kind: inst.instr.kind,
            submit: self.cycle,
            issue: Some(self.cycle),
            complete: Some(end),
            unit: None,
            banked: false,
        });
        for u in 0..self.units.len() {
            self.units[u] = Some(Running { id, complete: end });
            self.trace.units[u].push(Occupancy {
                id,
                start: self.cycle,
                end,
            });
        }
        self.trace.events.push(DispatchEvent::Broadcast {
            id,
            cycle: self.cycle,
            passes: report.passes,
        });
        self.insts.push(inst);
        Ok(report.cycles)
    }

    pub fn report(&self) -> CostReport {
        let total = self
            .trace
            .records
            .iter()
            .filter_map(|r| r.complete)
            .max()
            .unwrap_or(0);
        let busy: Vec<u64> = self
            .trace
            .units
            .iter()
            .map(|occ| occ.iter().map(|o| o.end - o.start + 1).sum())
            .collect();
        let utilization = busy
            .iter()
            .map(|&b| if total == 0 { 0.0 } else { b as f64 / total as f64 })
            .collect();
        CostReport {
            total_cycles: total,
            instructions: self.trace.records.len(),
            busy_cycles: busy,
            utilization,
            bank_peak: self.bank_peak,
            cam_peak: self.cam_peak,
            frontend_stalls: 0,
        }
    }
}

/// Feeds `program` one instruction per cycle from cycle 1 and runs to completion.
///
/// HE instructions wait for the GC units to drain and then broadcast.
pub fn run_program<E: Executor>(
    program: &[DispatchInst],
    config: &DispatchConfig,
    executor: E,
) -> Result<(ScheduleTrace, CostReport, E), DispatchError> {
    let mut d = Dispatcher::new(config.clone(), executor)?;
    let mut next = 0;
    let mut stalls = 0;
    while next < program.len() || !d.idle() {
        d.tick()?;
        if let Some(inst) = program.get(next) {
            if inst.instr.kind.is_gc() {
                match d.submit(inst.clone()) {
                    Ok(_) => next += 1,
                    Err(DispatchError::Backpressure) => stalls += 1,
                    Err(e) => return Err(e),
                }
            } else if inst.instr.kind.is_he() {
                if d.idle() {
                    d.broadcast(inst.clone())?;
                    next += 1;
                } else {
                    stalls += 1;
                }
            } else {
                return Err(DispatchError::NotGc(inst.instr.kind));
            }
        }
    }
    let mut report = d.report();
    report.frontend_stalls = stalls;
    let trace = d.trace.clone();
    Ok((trace, report, d.executor))
}
