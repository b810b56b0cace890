use serde::{Deserialize, Serialize};

use super::GcError;

pub type WireId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Xor,
    And,
    Inv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub a: WireId,
    /// Unused (equal to `a`) for `Inv`.
    pub b: WireId,
    pub out: WireId,
}

impl Gate {
    pub fn input_pair(&self) -> (WireId, Option<WireId>) {
        match self.kind {
            GateKind::Inv => (self.a, None),
            _ => (self.a, Some(self.b)),
        }
    }
}

/// A Boolean circuit over XOR/AND/INV gates, stored in topological order.
///
/// Inputs and outputs are grouped into values (e.g. one 32-bit operand per
/// group); bits inside a group are least significant first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    wire_count: u32,
    inputs: Vec<Vec<WireId>>,
    outputs: Vec<Vec<WireId>>,
    gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub xor: usize,
    pub and: usize,
    pub inv: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.xor + self.and + self.inv
    }
}

impl Circuit {
    /// Validates wiring and puts the gates in topological order.
    pub fn new(
        wire_count: u32,
        inputs: Vec<Vec<WireId>>,
        outputs: Vec<Vec<WireId>>,
        gates: Vec<Gate>,
    ) -> Result<Self, GcError> {
        let n = wire_count as usize;
        let mut driver: Vec<Option<usize>> = vec![None; n];
        let mut is_input = vec![false; n];
        for &w in inputs.iter().flatten() {
            let w = w as usize;
            if w >= n || is_input[w] {
                return Err(GcError::InvalidCircuit(format!("bad input wire {w}")));
            }
            is_input[w] = true;
        }
        for (i, g) in gates.iter().enumerate() {
            for w in [g.a, g.b, g.out] {
                if w as usize >= n {
                    return Err(GcError::InvalidCircuit(format!(
                        "gate {i} references wire {w} beyond {n}"
                    )));
                }
            }
            let o = g.out as usize;
            if is_input[o] || driver[o].is_some() {
                return Err(GcError::InvalidCircuit(format!("wire {o} driven twice")));
            }
            driver[o] = Some(i);
        }
        let defined = |w: WireId| is_input[w as usize] || driver[w as usize].is_some();
        for g in &gates {
            let (a, b) = g.input_pair();
            if !defined(a) || b.is_some_and(|b| !defined(b)) {
                return Err(GcError::InvalidCircuit(format!(
                    "gate driving wire {} reads an undriven wire",
                    g.out
                )));
            }
        }
        for &w in outputs.iter().flatten() {
            if w as usize >= n || !defined(w) {
                return Err(GcError::InvalidCircuit(format!("output wire {w} undriven")));
            }
        }
        let gates = topo_sort(&gates, &driver, n)?;
        Ok(Self {
            wire_count,
            inputs,
            outputs,
            gates,
        })
    }

    pub fn wire_count(&self) -> u32 {
        self.wire_count
    }

    pub fn inputs(&self) -> &[Vec<WireId>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<WireId>] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_wires(&self) -> impl Iterator<Item = WireId> + '_ {
        self.inputs.iter().flatten().copied()
    }

    pub fn output_wires(&self) -> impl Iterator<Item = WireId> + '_ {
        self.outputs.iter().flatten().copied()
    }

    pub fn input_bits(&self) -> usize {
        self.inputs.iter().map(Vec::len).sum()
    }

    pub fn output_bits(&self) -> usize {
        self.outputs.iter().map(Vec::len).sum()
    }

    pub fn counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g.kind {
                GateKind::Xor => c.xor += 1,
                GateKind::And => c.and += 1,
                GateKind::Inv => c.inv += 1,
            }
        }
        c
    }

    /// Plaintext evaluation; `input` holds all input bits in group order.
    pub fn eval(&self, input: &[bool]) -> Result<Vec<bool>, GcError> {
        if input.len() != self.input_bits() {
            return Err(GcError::LengthMismatch {
                expected: self.input_bits(),
                got: input.len(),
            });
        }
        let mut w = vec![false; self.wire_count as usize];
        for (wire, &bit) in self.input_wires().zip(input) {
            w[wire as usize] = bit;
        }
        for g in &self.gates {
            let a = w[g.a as usize];
            w[g.out as usize] = match g.kind {
                GateKind::Xor => a ^ w[g.b as usize],
                GateKind::And => a & w[g.b as usize],
                GateKind::Inv => !a,
            };
        }
        Ok(self.output_wires().map(|o| w[o as usize]).collect())
    }

    /// Evaluates with one unsigned integer per input group, returning one per output group.
    pub fn eval_words(&self, values: &[u128]) -> Result<Vec<u128>, GcError> {
        if values.len() != self.inputs.len() {
            return Err(GcError::LengthMismatch {
                expected: self.inputs.len(),
                got: values.len(),
            });
        }
        let bits: Vec<bool> = self
            .inputs
            .iter()
            .zip(values)
            .flat_map(|(g, &v)| (0..g.len()).map(move |i| (v >> i) & 1 == 1))
            .collect();
        let out = self.eval(&bits)?;
        Ok(split_words(&out, self.outputs.iter().map(Vec::len)))
    }
}

/// Packs a flat bit vector into integers with the given group widths.
pub fn split_words(bits: &[bool], widths: impl Iterator<Item = usize>) -> Vec<u128> {
    let mut res = Vec::new();
    let mut off = 0;
    for w in widths {
        let v = bits[off..off + w]
            .iter()
            .enumerate()
            .fold(0u128, |acc, (i, &b)| acc | ((b as u128) << i));
        res.push(v);
        off += w;
    }
    res
}

fn topo_sort(gates: &[Gate], driver: &[Option<usize>], n: usize) -> Result<Vec<Gate>, GcError> {
    // Fast path: already ordered.
    let mut ready = vec![false; n];
    for (w, d) in driver.iter().enumerate() {
        if d.is_none() {
            ready[w] = true;
        }
    }
    let in_order = {
        let mut r = ready.clone();
        gates.iter().all(|g| {
            let (a, b) = g.input_pair();
            let ok = r[a as usize] && b.is_none_or(|b| r[b as usize]);
            r[g.out as usize] = true;
            ok
        })
    };
    if in_order {
        return Ok(gates.to_vec());
    }
    // Kahn's algorithm over gate dependencies.
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; gates.len()];
    for (i, g) in gates.iter().enumerate() {
        let (a, b) = g.input_pair();
        for w in std::iter::once(a).chain(b) {
            if driver[w as usize].is_some() {
                consumers[w as usize].push(i);
                pending[i] += 1;
            }
        }
    }
    let mut queue: std::collections::VecDeque<usize> =
        (0..gates.len()).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(i) = queue.pop_front() {
        order.push(gates[i]);
        for &c in &consumers[gates[i].out as usize] {
            pending[c] -= 1;
            if pending[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() != gates.len() {
        return Err(GcError::Cyclic);
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(kind: GateKind, a: WireId, b: WireId, out: WireId) -> Gate {
        Gate { kind, a, b, out }
    }

    #[test]
    fn reorders_and_detects_cycles() {
        let c = Circuit::new(
            4,
            vec![vec![0], vec![1]],
            vec![vec![3]],
            vec![g(GateKind::Inv, 2, 2, 3), g(GateKind::And, 0, 1, 2)],
        )
        .unwrap();
        assert_eq!(c.gates()[0].kind, GateKind::And);
        assert_eq!(c.eval(&[true, true]).unwrap(), vec![false]);

        let cyc = Circuit::new(
            4,
            vec![vec![0]],
            vec![vec![3]],
            vec![g(GateKind::Xor, 0, 3, 2), g(GateKind::Xor, 0, 2, 3)],
        );
        assert_eq!(cyc, Err(GcError::Cyclic));
    }

    #[test]
    fn rejects_double_driver() {
        let r = Circuit::new(
            3,
            vec![vec![0, 1]],
            vec![vec![2]],
            vec![g(GateKind::Xor, 0, 1, 2), g(GateKind::And, 0, 1, 2)],
        );
        assert!(matches!(r, Err(GcError::InvalidCircuit(_))));
    }
}
