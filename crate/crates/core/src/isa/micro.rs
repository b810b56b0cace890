//! 128-bit micro-instruction word.
//!
//! Bit layout (MSB first): LUT enable (127), LUT mode (126), shifter enable
//! (125), shifter function (124..120), then four CEM port fields of 30 bits
//! each; port `i` occupies bits `119-30i ..= 90-30i` as enable (1), function
//! (3), address A (13) and address B (13).

use serde::{Deserialize, Serialize};

use super::IsaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CemFunc {
    And = 0,
    Or = 1,
    Xor = 2,
    Not = 3,
    Add = 4,
    /// ADD with carry-in 1 in every lane.
    AddC = 5,
    Read = 6,
    Write = 7,
}

impl CemFunc {
    pub const ALL: [CemFunc; 8] = [
        CemFunc::And,
        CemFunc::Or,
        CemFunc::Xor,
        CemFunc::Not,
        CemFunc::Add,
        CemFunc::AddC,
        CemFunc::Read,
        CemFunc::Write,
    ];

    pub fn from_code(c: u8) -> Result<Self, IsaError> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or(IsaError::InvalidCode { field: "cem", code: c })
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            CemFunc::And => "and",
            CemFunc::Or => "or",
            CemFunc::Xor => "xor",
            CemFunc::Not => "not",
            CemFunc::Add => "add",
            CemFunc::AddC => "addc",
            CemFunc::Read => "read",
            CemFunc::Write => "write",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftFunc {
    Pass = 0,
    ShiftRows = 1,
    InvShiftRows = 2,
    /// Doubling in GF(2^128).
    Double = 3,
    /// Whole latch becomes all-ones if bit 0 is set, else zero.
    LsbExtend = 4,
    /// Per lane: all-ones if the lane's top bit is set.
    MsbExtend = 5,
    /// Per lane: keep only bit 0.
    LsbExtract = 6,
    Shl = 7,
    Shr = 8,
    ByteRotL = 9,
    ByteRotR = 10,
    Sar = 11,
    Lane32 = 12,
    Lane64 = 13,
    Lane128 = 14,
}

impl ShiftFunc {
    pub const ALL: [ShiftFunc; 15] = [
        ShiftFunc::Pass,
        ShiftFunc::ShiftRows,
        ShiftFunc::InvShiftRows,
        ShiftFunc::Double,
        ShiftFunc::LsbExtend,
        ShiftFunc::MsbExtend,
        ShiftFunc::LsbExtract,
        ShiftFunc::Shl,
        ShiftFunc::Shr,
        ShiftFunc::ByteRotL,
        ShiftFunc::ByteRotR,
        ShiftFunc::Sar,
        ShiftFunc::Lane32,
        ShiftFunc::Lane64,
        ShiftFunc::Lane128,
    ];

    pub fn from_code(c: u8) -> Result<Self, IsaError> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or(IsaError::InvalidCode { field: "shifter", code: c })
    }

    /// Functions that read a shift amount from the CEM[3] A field.
    pub fn takes_amount(self) -> bool {
        matches!(
            self,
            ShiftFunc::Shl | ShiftFunc::Shr | ShiftFunc::Sar | ShiftFunc::ByteRotL | ShiftFunc::ByteRotR
        )
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            ShiftFunc::Pass => "pass",
            ShiftFunc::ShiftRows => "shiftrows",
            ShiftFunc::InvShiftRows => "invshiftrows",
            ShiftFunc::Double => "double",
            ShiftFunc::LsbExtend => "lsbext",
            ShiftFunc::MsbExtend => "msbext",
            ShiftFunc::LsbExtract => "lsb",
            ShiftFunc::Shl => "shl",
            ShiftFunc::Shr => "shr",
            ShiftFunc::ByteRotL => "brotl",
            ShiftFunc::ByteRotR => "brotr",
            ShiftFunc::Sar => "sar",
            ShiftFunc::Lane32 => "lane32",
            ShiftFunc::Lane64 => "lane64",
            ShiftFunc::Lane128 => "lane128",
        }
    }
}

/// Addressing mode in bits 12..11 of a CEM address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AddrMode {
    Abs = 0,
    Rs1 = 1,
    Rs2 = 2,
    Rd = 3,
}

/// 13-bit CEM address: 2-bit mode plus 11-bit offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Addr(u16);

impl Addr {
    pub const BITS: u32 = 13;
    pub const OFFSET_MAX: u16 = 0x7FF;
    /// First absolute offset that names a latch rather than a row.
    pub const LATCH_BASE: u16 = 0x7FC;

    pub fn new(mode: AddrMode, offset: u16) -> Result<Self, IsaError> {
        if offset > Self::OFFSET_MAX {
            return Err(IsaError::FieldRange { field: "address offset", value: offset as u64 });
        }
        Ok(Addr(((mode as u16) << 11) | offset))
    }

    pub const fn abs(row: u16) -> Self {
        assert!(row < Self::LATCH_BASE);
        Addr(row)
    }

    pub const fn latch(k: u8) -> Self {
        assert!(k < 4);
        Addr(Self::LATCH_BASE + k as u16)
    }

    pub const fn rs1(off: u16) -> Self {
        assert!(off <= Self::OFFSET_MAX);
        Addr((1 << 11) | off)
    }

    pub const fn rs2(off: u16) -> Self {
        assert!(off <= Self::OFFSET_MAX);
        Addr((2 << 11) | off)
    }

    pub const fn rd(off: u16) -> Self {
        assert!(off <= Self::OFFSET_MAX);
        Addr((3 << 11) | off)
    }

    pub fn from_bits(bits: u16) -> Self {
        Addr(bits & 0x1FFF)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn mode(self) -> AddrMode {
        match self.0 >> 11 {
            0 => AddrMode::Abs,
            1 => AddrMode::Rs1,
            2 => AddrMode::Rs2,
            _ => AddrMode::Rd,
        }
    }

    pub fn offset(self) -> u16 {
        self.0 & Self::OFFSET_MAX
    }

    pub fn latch_index(self) -> Option<u8> {
        (self.mode() == AddrMode::Abs && self.offset() >= Self::LATCH_BASE)
            .then(|| (self.offset() - Self::LATCH_BASE) as u8)
    }
}

impl std::fmt::Display for Addr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(k) = self.latch_index() {
            return write!(f, "L{k}");
        }
        match self.mode() {
            AddrMode::Abs => write!(f, "{}", self.offset()),
            AddrMode::Rs1 => write!(f, "rs1+{}", self.offset()),
            AddrMode::Rs2 => write!(f, "rs2+{}", self.offset()),
            AddrMode::Rd => write!(f, "rd+{}", self.offset()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CemField {
    pub enable: bool,
    pub func: CemFunc,
    pub a: Addr,
    pub b: Addr,
}

impl CemField {
    pub const DISABLED: CemField = CemField {
        enable: false,
        func: CemFunc::And,
        a: Addr(0),
        b: Addr(0),
    };

    pub fn op(func: CemFunc, a: Addr, b: Addr) -> Self {
        CemField { enable: true, func, a, b }
    }

    /// A disabled port whose A field carries a shifter amount.
    pub fn amount(k: u8) -> Self {
        CemField {
            a: Addr((k & 0x7F) as u16),
            ..Self::DISABLED
        }
    }

    fn encode(self) -> u32 {
        ((self.enable as u32) << 29)
            | ((self.func as u32) << 26)
            | ((self.a.0 as u32) << 13)
            | self.b.0 as u32
    }

    fn decode(v: u32) -> Result<Self, IsaError> {
        Ok(CemField {
            enable: (v >> 29) & 1 == 1,
            func: CemFunc::from_code(((v >> 26) & 7) as u8)?,
            a: Addr(((v >> 13) & 0x1FFF) as u16),
            b: Addr((v & 0x1FFF) as u16),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShifterField {
    pub enable: bool,
    pub func: ShiftFunc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LutField {
    pub enable: bool,
    /// false: byte substitution through element 0; true: SubBytes fused with MixColumns.
    pub mix: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MicroInstruction {
    pub lut: LutField,
    pub shifter: ShifterField,
    pub cem: [CemField; 4],
}

pub const LUT_FIELD_BITS: u32 = 2;
pub const SHIFTER_FIELD_BITS: u32 = 6;
pub const CEM_FIELD_BITS: u32 = 30;
pub const WORD_BITS: u32 = LUT_FIELD_BITS + SHIFTER_FIELD_BITS + 4 * CEM_FIELD_BITS;

impl MicroInstruction {
    pub const NOP: MicroInstruction = MicroInstruction {
        lut: LutField { enable: false, mix: false },
        shifter: ShifterField { enable: false, func: ShiftFunc::Pass },
        cem: [CemField::DISABLED; 4],
    };

    pub fn encode(&self) -> u128 {
        let mut w = ((self.lut.enable as u128) << 127)
            | ((self.lut.mix as u128) << 126)
            | ((self.shifter.enable as u128) << 125)
            | ((self.shifter.func as u128) << 120);
        for (i, c) in self.cem.iter().enumerate() {
            w |= (c.encode() as u128) << (90 - 30 * i);
        }
        w
    }

    pub fn decode(w: u128) -> Result<Self, IsaError> {
        let mut cem = [CemField::DISABLED; 4];
        for (i, c) in cem.iter_mut().enumerate() {
            *c = CemField::decode(((w >> (90 - 30 * i)) & 0x3FFF_FFFF) as u32)?;
        }
        Ok(MicroInstruction {
            lut: LutField {
                enable: (w >> 127) & 1 == 1,
                mix: (w >> 126) & 1 == 1,
            },
            shifter: ShifterField {
                enable: (w >> 125) & 1 == 1,
                func: ShiftFunc::from_code(((w >> 120) & 0x1F) as u8)?,
            },
            cem,
        })
    }

    /// Shift amount carried by a disabled CEM[3], if any.
    pub fn shift_amount(&self) -> Option<u8> {
        let c = self.cem[3];
        (!c.enable).then_some((c.a.0 & 0x7F) as u8)
    }

    /// Number of enabled units (LUT, shifter, CEM ports).
    pub fn active_units(&self) -> usize {
        self.lut.enable as usize
            + self.shifter.enable as usize
            + self.cem.iter().filter(|c| c.enable).count()
    }
}

impl std::fmt::Display for MicroInstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if self.lut.enable {
            parts.push(if self.lut.mix { "lut.mix".to_string() } else { "lut.sub".to_string() });
        }
        if self.shifter.enable {
            let s = self.shifter.func;
            match self.shift_amount().filter(|_| s.takes_amount()) {
                Some(k) => parts.push(format!("sh.{} {k}", s.mnemonic())),
                None => parts.push(format!("sh.{}", s.mnemonic())),
            }
        }
        for (i, c) in self.cem.iter().enumerate() {
            if c.enable {
                parts.push(format!("c{i}.{} {}, {}", c.func.mnemonic(), c.a, c.b));
            }
        }
        if parts.is_empty() {
            write!(f, "nop")
        } else {
            write!(f, "{}", parts.join(" | "))
        }
    }
}
