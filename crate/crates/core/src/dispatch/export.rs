use std::collections::HashMap;
use std::fmt::Write;

use super::{DispatchInst, ScheduleTrace};

/// One JSON object per instruction record.
pub fn trace_jsonl(trace: &ScheduleTrace) -> String {
    let mut out = String::new();
    for r in &trace.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Read-after-write DAG of `program` in Graphviz DOT form.
pub fn trace_dot(program: &[DispatchInst]) -> String {
    let mut out = String::from("digraph cinst {\n");
    let mut last_writer: HashMap<u32, usize> = HashMap::new();
    for (i, inst) in program.iter().enumerate() {
        let shape = match inst.instr.kind {
            crate::isa::CInstKind::HalfGate => "circle",
            _ => "doublecircle",
        };
        writeln!(out, "  i{i} [label=\"{i}: {}\", shape={shape}];", inst.instr.kind).unwrap();
        let mut preds: Vec<usize> = inst.inputs.iter().filter_map(|a| last_writer.get(a).copied()).collect();
        preds.sort_unstable();
        preds.dedup();
        for p in preds {
            writeln!(out, "  i{p} -> i{i};").unwrap();
        }
        for &a in &inst.outputs {
            last_writer.insert(a, i);
        }
    }
    out.push_str("}\n");
    out
}
