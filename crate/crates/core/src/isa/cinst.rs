//! Custom RV32 R-type instructions on the custom-0 major opcode.
//!
//! Function instructions use funct7 = 0 with funct3 selecting the kind;
//! the two broadcast-update instructions use funct7 = 1.

use serde::{Deserialize, Serialize};

use super::IsaError;

pub const CUSTOM0_OPCODE: u32 = 0b000_1011;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CInstKind {
    HalfGate,
    FreeXor,
    PolyAdd,
    PolySub,
    PolyPerm,
    /// Coefficient multiply fused with modular reduction.
    PolyMul,
    Ntt,
    Intt,
    UimWrite,
    LutWrite,
}

impl CInstKind {
    pub const ALL: [CInstKind; 10] = [
        CInstKind::HalfGate,
        CInstKind::FreeXor,
        CInstKind::PolyAdd,
        CInstKind::PolySub,
        CInstKind::PolyPerm,
        CInstKind::PolyMul,
        CInstKind::Ntt,
        CInstKind::Intt,
        CInstKind::UimWrite,
        CInstKind::LutWrite,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            CInstKind::HalfGate => "HALFGATE",
            CInstKind::FreeXor => "FREEXOR",
            CInstKind::PolyAdd => "POLYADD",
            CInstKind::PolySub => "POLYSUB",
            CInstKind::PolyPerm => "POLYPERM",
            CInstKind::PolyMul => "POLYMUL",
            CInstKind::Ntt => "NTT",
            CInstKind::Intt => "INTT",
            CInstKind::UimWrite => "UIM_WRITE",
            CInstKind::LutWrite => "LUT_WRITE",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.mnemonic().eq_ignore_ascii_case(s))
    }

    pub fn is_gc(self) -> bool {
        matches!(self, CInstKind::HalfGate | CInstKind::FreeXor)
    }

    pub fn is_he(self) -> bool {
        matches!(
            self,
            CInstKind::PolyAdd
                | CInstKind::PolySub
                | CInstKind::PolyPerm
                | CInstKind::PolyMul
                | CInstKind::Ntt
                | CInstKind::Intt
        )
    }

    pub fn is_update(self) -> bool {
        matches!(self, CInstKind::UimWrite | CInstKind::LutWrite)
    }

    fn funct(self) -> (u32, u32) {
        match self {
            CInstKind::UimWrite => (1, 0),
            CInstKind::LutWrite => (1, 1),
            k => (0, k as u32),
        }
    }
}

impl std::fmt::Display for CInstKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// One encoded instruction; operand fields are 5-bit register numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CInst {
    pub kind: CInstKind,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
}

impl CInst {
    pub fn new(kind: CInstKind, rd: u8, rs1: u8, rs2: u8) -> Result<Self, IsaError> {
        for (field, v) in [("rd", rd), ("rs1", rs1), ("rs2", rs2)] {
            if v >= 32 {
                return Err(IsaError::FieldRange { field, value: v as u64 });
            }
        }
        Ok(CInst { kind, rd, rs1, rs2 })
    }

    pub fn encode(&self) -> u32 {
        let (f7, f3) = self.kind.funct();
        (f7 << 25)
            | ((self.rs2 as u32) << 20)
            | ((self.rs1 as u32) << 15)
            | (f3 << 12)
            | ((self.rd as u32) << 7)
            | CUSTOM0_OPCODE
    }

    pub fn decode(word: u32) -> Result<Self, IsaError> {
        if word & 0x7F != CUSTOM0_OPCODE {
            return Err(IsaError::UnknownInstruction(word));
        }
        let f3 = (word >> 12) & 7;
        let f7 = word >> 25;
        let kind = match (f7, f3) {
            (0, f) => CInstKind::ALL[f as usize],
            (1, 0) => CInstKind::UimWrite,
            (1, 1) => CInstKind::LutWrite,
            _ => return Err(IsaError::UnknownInstruction(word)),
        };
        Ok(CInst {
            kind,
            rd: ((word >> 7) & 0x1F) as u8,
            rs1: ((word >> 15) & 0x1F) as u8,
            rs2: ((word >> 20) & 0x1F) as u8,
        })
    }
}

/// An instruction with resolved operand addresses (CEM row indices), as
/// seen by the dispatcher and cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instr {
    pub kind: CInstKind,
    pub rd: u32,
    pub rs1: u32,
    pub rs2: u32,
}

impl Instr {
    pub fn new(kind: CInstKind, rd: u32, rs1: u32, rs2: u32) -> Self {
        Instr { kind, rd, rs1, rs2 }
    }
}

impl std::fmt::Display for Instr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:#x}, {:#x}, {:#x}", self.kind, self.rd, self.rs1, self.rs2)
    }
}

fn parse_num(s: &str) -> Option<u32> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

/// Parses one `OP rd, rs1, rs2` instruction per line. `#` starts a comment.
pub fn assemble(text: &str) -> Result<Vec<Instr>, IsaError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| IsaError::Asm { line: i + 1, msg: msg.to_string() };
        let (op, rest) = line.split_once(char::is_whitespace).ok_or_else(|| err("missing operands"))?;
        let kind = CInstKind::from_mnemonic(op).ok_or_else(|| err("unknown mnemonic"))?;
        let ops: Vec<u32> = rest
            .split(',')
            .map(|t| parse_num(t).ok_or_else(|| err("bad operand")))
            .collect::<Result<_, _>>()?;
        if ops.len() != 3 {
            return Err(err("expected three operands"));
        }
        out.push(Instr::new(kind, ops[0], ops[1], ops[2]));
    }
    Ok(out)
}

pub fn disassemble(prog: &[Instr]) -> String {
    prog.iter().map(|i| format!("{i}\n")).collect()
}
