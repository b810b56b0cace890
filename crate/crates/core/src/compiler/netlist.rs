use serde::{Deserialize, Serialize};

use super::alloc::{check_capacity, tile_of, RowAllocator};
use super::{AddressMap, CompileError, Placement};
use crate::dispatch::{run_program, CostReport, DispatchConfig, DispatchError, DispatchInst, Executor, ScheduleTrace};
use crate::gc::{Block, Circuit, GateCounts, GateKind, GlobalDelta, HalfGateRows};
use crate::isa::layout::{HG_OUT, HG_ROWS, HG_TE, HG_TG, HG_TWEAK};
use crate::isa::{CInstKind, Instr};
use crate::sim::{ArchProfile, CoreState};

/// A garbling C-Inst stream with its row assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledNetlist {
    pub program: Vec<DispatchInst>,
    pub map: AddressMap,
    /// Row of each input wire, in circuit input order.
    pub input_rows: Vec<u32>,
    /// Row of each output wire, in circuit output order.
    pub output_rows: Vec<u32>,
    /// Row holding the constant wire's zero label (INV gates XOR it in).
    pub const_row: Option<u32>,
    /// Data rows per core at the allocation high-water mark.
    pub rows_used: usize,
    pub counts: GateCounts,
}

/// Lowers `circuit` to one HALFGATE per AND and one FREEXOR per XOR/INV,
/// in topological order, with linear-scan reuse of label rows.
///
/// HALFGATE writes four rows from `rd`: the output label, the two table
/// rows and the staged tweak. The last three are released right after the
/// gate; the host collects the table rows when the gate executes.
pub fn compile_netlist(circuit: &Circuit, profile: &ArchProfile) -> Result<CompiledNetlist, CompileError> {
    let gates = circuit.gates();
    let mut last = vec![None::<usize>; circuit.wire_count() as usize];
    for (i, g) in gates.iter().enumerate() {
        let (a, b) = g.input_pair();
        last[a as usize] = Some(i + 1);
        if let Some(b) = b {
            last[b as usize] = Some(i + 1);
        }
    }
    for o in circuit.output_wires() {
        last[o as usize] = Some(usize::MAX);
    }

    let mut alloc = RowAllocator::new();
    let mut row_of = vec![None::<u32>; circuit.wire_count() as usize];
    let mut entries = Vec::new();
    let place = |value: u32, row: u32, def: usize, last_use: usize, entries: &mut Vec<Placement>| {
        entries.push(Placement {
            value,
            core: 0,
            tile: tile_of(row, profile),
            row,
            rows: 1,
            def,
            last_use,
        });
    };

    let mut input_rows = Vec::new();
    for w in circuit.input_wires() {
        let r = alloc.alloc(1);
        row_of[w as usize] = Some(r);
        input_rows.push(r);
        place(w, r, 0, last[w as usize].unwrap_or(0), &mut entries);
    }
    let const_row = gates.iter().any(|g| g.kind == GateKind::Inv).then(|| {
        let r = alloc.alloc(1);
        place(u32::MAX, r, 0, usize::MAX, &mut entries);
        r
    });
    // Inputs nobody reads.
    for w in circuit.input_wires() {
        if last[w as usize].is_none() {
            alloc.release(row_of[w as usize].unwrap(), 1);
        }
    }

    let mut program = Vec::with_capacity(gates.len());
    let mut and_index = 0u64;
    for (i, g) in gates.iter().enumerate() {
        let pos = i + 1;
        let ra = row_of[g.a as usize].expect("topological order");
        let rb = match g.kind {
            GateKind::Inv => const_row.expect("allocated for INV"),
            _ => row_of[g.b as usize].expect("topological order"),
        };
        let inst = if g.kind == GateKind::And {
            let rd = alloc.alloc(HG_ROWS);
            let tweak = 2 * and_index;
            and_index += 1;
            entries.push(Placement {
                value: g.out,
                core: 0,
                tile: tile_of(rd, profile),
                row: rd + 1,
                rows: HG_ROWS - 1,
                def: pos,
                last_use: pos,
            });
            row_of[g.out as usize] = Some(rd);
            DispatchInst::new(Instr::new(CInstKind::HalfGate, rd, ra, rb)).with_stage(rd + HG_TWEAK as u32, tweak as u128)
        } else {
            let rd = alloc.alloc(1);
            row_of[g.out as usize] = Some(rd);
            DispatchInst::new(Instr::new(CInstKind::FreeXor, rd, ra, rb))
        };
        let rd = row_of[g.out as usize].unwrap();
        let out_last = last[g.out as usize].unwrap_or(pos);
        place(g.out, rd, pos, out_last, &mut entries);
        program.push(inst);

        let (a, b) = g.input_pair();
        let mut dying = vec![a];
        if let Some(b) = b.filter(|&b| b != a) {
            dying.push(b);
        }
        for w in dying {
            if last[w as usize] == Some(pos) {
                alloc.release(row_of[w as usize].unwrap(), 1);
            }
        }
        if g.kind == GateKind::And {
            alloc.release(rd + 1, HG_ROWS - 1);
        }
        if last[g.out as usize].is_none() {
            alloc.release(rd, 1);
        }
    }

    let rows_used = alloc.high_water();
    check_capacity(rows_used, profile)?;
    let output_rows = circuit.output_wires().map(|w| row_of[w as usize].expect("output defined")).collect();
    Ok(CompiledNetlist {
        program,
        map: AddressMap {
            rows_per_core: profile.rows_per_core(),
            entries,
        },
        input_rows,
        output_rows,
        const_row,
        rows_used,
        counts: circuit.counts(),
    })
}

/// Garbles on one simulated core, collecting each AND gate's table rows
/// as the gate executes.
pub struct GarbleExecutor {
    pub core: CoreState,
    pub tables: Vec<Option<HalfGateRows>>,
}

impl Executor for GarbleExecutor {
    fn execute(&mut self, inst: &DispatchInst, _: Option<usize>) -> Result<(), DispatchError> {
        for &(row, v) in &inst.staged {
            self.core.write_row(row as usize, v)?;
        }
        self.core.run_cinst(&inst.instr)?;
        if inst.instr.kind == CInstKind::HalfGate {
            let rd = inst.instr.rd as usize;
            let tweak = self.core.read_row(rd + HG_TWEAK as usize)?;
            let k = (tweak / 2) as usize;
            if k >= self.tables.len() {
                self.tables.resize(k + 1, None);
            }
            let tg = Block(self.core.read_row(rd + HG_TG as usize)?);
            let te = Block(self.core.read_row(rd + HG_TE as usize)?);
            self.tables[k] = Some([tg, te]);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ImcGarbling {
    pub tables: Vec<HalfGateRows>,
    /// Zero label of every output wire.
    pub output_zero: Vec<Block>,
    pub trace: ScheduleTrace,
    pub report: CostReport,
}

/// Runs a compiled netlist through the dispatcher with a functional core.
/// `input_zero` are the zero labels of the input wires; `const_zero` the
/// zero label of the constant wire used by INV gates.
pub fn garble_on_imc(
    compiled: &CompiledNetlist,
    delta: GlobalDelta,
    input_zero: &[Block],
    const_zero: Block,
    config: &DispatchConfig,
    profile: &ArchProfile,
) -> Result<ImcGarbling, CompileError> {
    if input_zero.len() != compiled.input_rows.len() {
        return Err(CompileError::Invalid(format!(
            "{} input labels for {} input wires",
            input_zero.len(),
            compiled.input_rows.len()
        )));
    }
    let mut core = CoreState::for_gc(profile, delta)?;
    for (&r, l) in compiled.input_rows.iter().zip(input_zero) {
        core.write_row(r as usize, l.0)?;
    }
    if let Some(r) = compiled.const_row {
        core.write_row(r as usize, const_zero.0)?;
    }
    let exec = GarbleExecutor {
        core,
        tables: vec![None; compiled.counts.and],
    };
    let (trace, report, exec) = run_program(&compiled.program, config, exec)?;
    let tables = exec
        .tables
        .into_iter()
        .enumerate()
        .map(|(k, t)| t.ok_or_else(|| CompileError::Invalid(format!("AND gate {k} never executed"))))
        .collect::<Result<Vec<_>, _>>()?;
    let output_zero = compiled
        .output_rows
        .iter()
        .map(|&r| Ok(Block(exec.core.read_row(r as usize + HG_OUT as usize)?)))
        .collect::<Result<Vec<_>, CompileError>>()?;
    Ok(ImcGarbling {
        tables,
        output_zero,
        trace,
        report,
    })
}
