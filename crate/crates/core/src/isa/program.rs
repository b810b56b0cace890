use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::cinst::CInstKind;
use super::micro::MicroInstruction;
use super::IsaError;

pub const UIM_BYTES: usize = 16 * 1024;
pub const UIM_WORDS: usize = UIM_BYTES / 16;
pub const LUT_ELEMENTS: usize = 12;
pub const LUT_ENTRIES: usize = 256;

/// The controller's address sequence for one C-Inst. Identical words share
/// one μIM slot, so the stored footprint is the number of distinct words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroProgram {
    pub kind: CInstKind,
    pub words: Vec<MicroInstruction>,
}

impl MicroProgram {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn footprint_words(&self) -> usize {
        self.words.iter().map(MicroInstruction::encode).collect::<HashSet<_>>().len()
    }

    pub fn footprint_bytes(&self) -> usize {
        self.footprint_words() * 16
    }

    /// Sum of enabled unit operations over the sequence.
    pub fn unit_ops(&self) -> usize {
        self.words.iter().map(MicroInstruction::active_units).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.encode().to_le_bytes()).collect()
    }

    pub fn from_bytes(kind: CInstKind, bytes: &[u8]) -> Result<Self, IsaError> {
        if bytes.len() % 16 != 0 {
            return Err(IsaError::Container("length is not a multiple of 16".into()));
        }
        let words = bytes
            .chunks_exact(16)
            .map(|c| MicroInstruction::decode(u128::from_le_bytes(c.try_into().expect("16 bytes"))))
            .collect::<Result<_, _>>()?;
        Ok(MicroProgram { kind, words })
    }

    pub fn listing(&self) -> String {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| format!("{i:4}: {w}\n"))
            .collect()
    }
}

/// Broadcast update applied to every core before the next C-Inst issues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateDescriptor {
    Uim(MicroProgram),
    Lut { element: usize, table: Box<[u8; LUT_ENTRIES]> },
}

/// Builds a μIM update, checking it fits alongside `resident_words` already loaded.
pub fn uim_write(program: MicroProgram, resident_words: usize) -> Result<UpdateDescriptor, IsaError> {
    let need = resident_words + program.footprint_words();
    if need > UIM_WORDS {
        return Err(IsaError::Capacity {
            what: "micro-instruction memory",
            need: need * 16,
            have: UIM_BYTES,
        });
    }
    Ok(UpdateDescriptor::Uim(program))
}

pub fn lut_write(element: usize, table: &[u8]) -> Result<UpdateDescriptor, IsaError> {
    if element >= LUT_ELEMENTS {
        return Err(IsaError::Capacity { what: "LUT elements", need: element + 1, have: LUT_ELEMENTS });
    }
    let table: [u8; LUT_ENTRIES] = table.try_into().map_err(|_| IsaError::Capacity {
        what: "LUT element bytes",
        need: table.len(),
        have: LUT_ENTRIES,
    })?;
    Ok(UpdateDescriptor::Lut { element, table: Box::new(table) })
}
