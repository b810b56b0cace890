use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{known_profiles, CompileError};
use crate::isa::layout::DATA_BASE;
use crate::sim::ArchProfile;

/// Where one value lives and over which program positions it is live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    /// Wire id, or the value number for HE programs.
    pub value: u32,
    pub core: usize,
    pub tile: usize,
    pub row: u32,
    /// Number of rows from `row` onward.
    pub rows: u32,
    /// Program position that writes the value (inputs: 0).
    pub def: usize,
    /// Last position that reads it; `usize::MAX` for values live to the end.
    pub last_use: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressMap {
    pub rows_per_core: usize,
    pub entries: Vec<Placement>,
}

impl AddressMap {
    /// Checks that no two overlapping live ranges share a row and that every
    /// row lies in the data region of the core.
    pub fn check(&self) -> Result<(), String> {
        let mut by_row: BTreeMap<u32, Vec<(usize, usize, u32)>> = BTreeMap::new();
        for p in &self.entries {
            for r in p.row..p.row + p.rows {
                if (r as usize) < DATA_BASE as usize || r as usize >= self.rows_per_core {
                    return Err(format!("value {} at row {r} outside the data region", p.value));
                }
                by_row.entry(r).or_default().push((p.def, p.last_use, p.value));
            }
        }
        for (row, mut v) in by_row {
            v.sort();
            for w in v.windows(2) {
                if w[1].0 <= w[0].1 {
                    return Err(format!("values {} and {} overlap at row {row}", w[0].2, w[1].2));
                }
            }
        }
        Ok(())
    }
}

/// Lowest-address-first row allocator over the data region.
#[derive(Debug, Clone)]
pub(crate) struct RowAllocator {
    free: BTreeSet<u32>,
    next: u32,
}

impl RowAllocator {
    pub fn new() -> Self {
        Self {
            free: BTreeSet::new(),
            next: DATA_BASE as u32,
        }
    }

    /// `n` consecutive rows.
    pub fn alloc(&mut self, n: u32) -> u32 {
        if n == 1 {
            if let Some(r) = self.free.pop_first() {
                return r;
            }
        } else {
            let mut run_start = None;
            let mut prev = None;
            let mut found = None;
            for &r in &self.free {
                if prev.map_or(true, |p| p + 1 != r) {
                    run_start = Some(r);
                }
                prev = Some(r);
                let s = run_start.unwrap();
                if r + 1 - s == n {
                    found = Some(s);
                    break;
                }
            }
            if let Some(s) = found {
                for r in s..s + n {
                    self.free.remove(&r);
                }
                return s;
            }
        }
        let r = self.next;
        self.next += n;
        r
    }

    pub fn release(&mut self, row: u32, n: u32) {
        self.free.extend(row..row + n);
    }

    /// Data rows touched so far.
    pub fn high_water(&self) -> usize {
        (self.next - DATA_BASE as u32) as usize
    }
}

/// Errors when `need` data rows exceed `profile`, naming the smallest
/// built-in profile that would hold them.
pub(crate) fn check_capacity(need: usize, profile: &ArchProfile) -> Result<(), CompileError> {
    let have = profile.rows_per_core().saturating_sub(DATA_BASE as usize);
    if need <= have {
        return Ok(());
    }
    let fits = known_profiles()
        .into_iter()
        .find(|p| p.rows_per_core().saturating_sub(DATA_BASE as usize) >= need)
        .map(|p| p.name);
    Err(CompileError::Capacity {
        need,
        have,
        profile: profile.name.clone(),
        fits,
    })
}

pub(crate) fn tile_of(row: u32, profile: &ArchProfile) -> usize {
    let per_tile = (profile.rows_per_core() / profile.cem_tiles.max(1)).max(1);
    row as usize / per_tile
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reuses_lowest_and_finds_runs() {
        let mut a = RowAllocator::new();
        let base = DATA_BASE as u32;
        assert_eq!(a.alloc(1), base);
        assert_eq!(a.alloc(4), base + 1);
        a.release(base + 2, 3);
        assert_eq!(a.alloc(1), base + 2);
        assert_eq!(a.alloc(4), base + 5);
        a.release(base + 1, 1);
        a.release(base + 2, 3);
        a.release(base, 1);
        assert_eq!(a.alloc(4), base);
        assert_eq!(a.high_water(), 9);
    }
}
