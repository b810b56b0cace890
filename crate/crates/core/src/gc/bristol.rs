//! Bristol-Fashion circuit text format.
//!
//! Layout: `ngates nwires`, then `niv n1 .. nk`, then `nov m1 .. mk`, then one
//! gate per line (`2 1 a b out XOR|AND` or `1 1 a out INV`). Input wires are
//! numbered from 0 in group order and output wires are the last wires.

use std::fmt::Write as _;

use super::circuit::{Circuit, Gate, GateKind, WireId};
use super::GcError;

fn perr(line: usize, msg: impl Into<String>) -> GcError {
    GcError::Parse {
        line,
        msg: msg.into(),
    }
}

fn nums(line: usize, toks: &[&str]) -> Result<Vec<u32>, GcError> {
    toks.iter()
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| perr(line, format!("expected integer, found `{t}`")))
        })
        .collect()
}

pub fn parse_bristol(text: &str) -> Result<Circuit, GcError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut header = |what: &str| -> Result<(usize, Vec<u32>), GcError> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(0, format!("missing {what} line")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        Ok((ln, nums(ln, &toks)?))
    };

    let (ln, h) = header("header")?;
    if h.len() != 2 {
        return Err(perr(ln, "header must be `ngates nwires`"));
    }
    let (ngates, nwires) = (h[0] as usize, h[1]);

    let (ln, iv) = header("input")?;
    if iv.is_empty() || iv[0] as usize != iv.len() - 1 {
        return Err(perr(ln, "input line count does not match its sizes"));
    }
    let (ln, ov) = header("output")?;
    if ov.is_empty() || ov[0] as usize != ov.len() - 1 {
        return Err(perr(ln, "output line count does not match its sizes"));
    }

    let in_total: u64 = iv[1..].iter().map(|&x| x as u64).sum();
    let out_total: u64 = ov[1..].iter().map(|&x| x as u64).sum();
    if in_total + out_total > nwires as u64 {
        return Err(perr(ln, "more input/output wires than total wires"));
    }

    let mut next = 0u32;
    let inputs: Vec<Vec<WireId>> = iv[1..]
        .iter()
        .map(|&n| {
            let g = (next..next + n).collect();
            next += n;
            g
        })
        .collect();
    let mut next = nwires - out_total as u32;
    let outputs: Vec<Vec<WireId>> = ov[1..]
        .iter()
        .map(|&n| {
            let g = (next..next + n).collect();
            next += n;
            g
        })
        .collect();

    let mut gates = Vec::with_capacity(ngates);
    for (ln, l) in lines.by_ref() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let Some((&op, rest)) = toks.split_last() else {
            continue;
        };
        let v = nums(ln, rest)?;
        if v.len() < 2 {
            return Err(perr(ln, "gate line too short"));
        }
        let (ni, no) = (v[0] as usize, v[1] as usize);
        if v.len() != 2 + ni + no {
            return Err(perr(
                ln,
                format!("gate arity {ni}/{no} does not match {} wire fields", v.len() - 2),
            ));
        }
        let w = &v[2..];
        let gate = match (op, ni, no) {
            ("XOR", 2, 1) => Gate { kind: GateKind::Xor, a: w[0], b: w[1], out: w[2] },
            ("AND", 2, 1) => Gate { kind: GateKind::And, a: w[0], b: w[1], out: w[2] },
            ("INV" | "NOT", 1, 1) => Gate { kind: GateKind::Inv, a: w[0], b: w[0], out: w[1] },
            ("XOR" | "AND" | "INV" | "NOT", _, _) => {
                return Err(perr(ln, format!("wrong arity for {op}")))
            }
            _ => return Err(perr(ln, format!("unsupported gate `{op}`"))),
        };
        if [gate.a, gate.b, gate.out].iter().any(|&x| x >= nwires) {
            return Err(perr(ln, "wire index out of range"));
        }
        gates.push(gate);
    }
    if gates.len() != ngates {
        return Err(perr(
            0,
            format!("header declares {ngates} gates, found {}", gates.len()),
        ));
    }
    Circuit::new(nwires, inputs, outputs, gates)
}

/// Serializes a circuit. Wires are renumbered so inputs come first and
/// outputs last, as the format requires.
pub fn write_bristol(c: &Circuit) -> String {
    let n = c.wire_count() as usize;
    let mut map: Vec<Option<u32>> = vec![None; n];
    let mut next = 0u32;
    for w in c.input_wires() {
        map[w as usize] = Some(next);
        next += 1;
    }
    let out_total = c.output_bits() as u32;
    let is_out: std::collections::HashSet<WireId> = c.output_wires().collect();
    // Outputs that are also inputs or duplicated need a copy gate.
    let mut extra = Vec::new();
    for g in c.gates() {
        if !is_out.contains(&g.out) {
            map[g.out as usize] = Some(next);
            next += 1;
        }
    }
    // Internal wires used for INV-copy of outputs that are not gate outputs.
    let total = next + out_total + 1;
    let zero_wire = next; // scratch: constant 0 via XOR w,w where needed
    let mut out_pos = total - out_total;
    let mut out_slot = std::collections::HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for w in c.output_wires() {
        let slot = out_pos;
        out_pos += 1;
        let gate_driven = c.gates().iter().any(|g| g.out == w);
        if gate_driven && seen.insert(w) {
            map[w as usize] = Some(slot);
        } else {
            out_slot.insert(slot, w);
        }
    }
    let mut body = String::new();
    let mut count = 0usize;
    for g in c.gates() {
        let a = map[g.a as usize].expect("wire mapped");
        let o = map[g.out as usize].expect("wire mapped");
        match g.kind {
            GateKind::Inv => writeln!(body, "1 1 {a} {o} INV").unwrap(),
            k => {
                let b = map[g.b as usize].expect("wire mapped");
                let name = if k == GateKind::Xor { "XOR" } else { "AND" };
                writeln!(body, "2 1 {a} {b} {o} {name}").unwrap()
            }
        }
        count += 1;
    }
    let mut slots: Vec<_> = out_slot.into_iter().collect();
    slots.sort();
    for (slot, w) in slots {
        let src = map[w as usize].expect("wire mapped");
        extra.push((src, slot));
    }
    if !extra.is_empty() {
        let src0 = 0;
        writeln!(body, "2 1 {src0} {src0} {zero_wire} XOR").unwrap();
        count += 1;
        for (src, slot) in extra {
            writeln!(body, "2 1 {src} {zero_wire} {slot} XOR").unwrap();
            count += 1;
        }
    }
    let mut s = String::new();
    writeln!(s, "{count} {total}").unwrap();
    write!(s, "{}", c.inputs().len()).unwrap();
    for g in c.inputs() {
        write!(s, " {}", g.len()).unwrap();
    }
    writeln!(s).unwrap();
    write!(s, "{}", c.outputs().len()).unwrap();
    for g in c.outputs() {
        write!(s, " {}", g.len()).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s).unwrap();
    s.push_str(&body);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and() {
        let c = parse_bristol("1 3\n2 1 1\n1 1\n2 1 0 1 2 AND\n").unwrap();
        assert_eq!(c.gates().len(), 1);
        assert_eq!(c.counts().and, 1);
        assert_eq!(c.eval(&[true, true]).unwrap(), vec![true]);
        assert_eq!(c.eval(&[true, false]).unwrap(), vec![false]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_bristol("1 3\n2 1 1\n1 1\n2 1 0 2 AND\n").unwrap_err();
        assert!(matches!(e, GcError::Parse { line: 4, .. }), "{e:?}");
        let e = parse_bristol("1 3\n2 1 1\n1 1\n2 1 0 1 2 OR\n").unwrap_err();
        assert!(matches!(e, GcError::Parse { line: 4, .. }));
        let e = parse_bristol("1 3\n2 1 1\n1 1\n\n3 1 0 1 1 2 AND\n").unwrap_err();
        assert!(matches!(e, GcError::Parse { line: 5, .. }));
    }

    #[test]
    fn roundtrip_with_passthrough_output() {
        let c = Circuit::new(
            4,
            vec![vec![0, 1]],
            vec![vec![2, 0, 3]],
            vec![
                Gate { kind: GateKind::And, a: 0, b: 1, out: 2 },
                Gate { kind: GateKind::Inv, a: 2, b: 2, out: 3 },
            ],
        )
        .unwrap();
        let text = write_bristol(&c);
        let back = parse_bristol(&text).unwrap();
        for x in 0..4u128 {
            assert_eq!(c.eval_words(&[x]).unwrap(), back.eval_words(&[x]).unwrap());
        }
    }
}
