use std::collections::{HashMap, VecDeque};

/// Bytes per OA-CAM entry (one row address).
pub const CAM_ENTRY_BYTES: usize = 4;
/// Bytes per banked C-Inst (one 32-bit instruction word).
pub const BANK_ENTRY_BYTES: usize = 4;
pub const DEFAULT_CAPACITY_BYTES: usize = 16 * 1024;

/// Output addresses of every issued-or-banked instruction, tagged with the writer's
/// program-order id so a later instruction only waits on older writers.
#[derive(Debug, Clone)]
pub struct OaCam {
    writers: HashMap<u32, Vec<usize>>,
    len: usize,
    capacity: usize,
}

impl OaCam {
    pub fn new(capacity_bytes: usize) -> Self {
        Self {
            writers: HashMap::new(),
            len: 0,
            capacity: capacity_bytes / CAM_ENTRY_BYTES,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn has_room(&self, entries: usize) -> bool {
        self.len + entries <= self.capacity
    }

    pub fn contains(&self, addr: u32) -> bool {
        self.writers.contains_key(&addr)
    }

    /// True when an instruction older than `id` will write `addr`.
    pub fn hit_before(&self, addr: u32, id: usize) -> bool {
        self.writers
            .get(&addr)
            .is_some_and(|w| w.iter().any(|&x| x < id))
    }

    pub fn insert(&mut self, addr: u32, id: usize) {
        self.writers.entry(addr).or_default().push(id);
        self.len += 1;
    }

    pub fn remove(&mut self, addr: u32, id: usize) {
        if let Some(w) = self.writers.get_mut(&addr) {
            if let Some(pos) = w.iter().position(|&x| x == id) {
                w.swap_remove(pos);
                self.len -= 1;
            }
            if w.is_empty() {
                self.writers.remove(&addr);
            }
        }
    }
}

/// FIFO of stalled C-Insts, by program-order id.
#[derive(Debug, Clone)]
pub struct CInstBank {
    queue: VecDeque<usize>,
    capacity: usize,
}

impl CInstBank {
    pub fn new(capacity_bytes: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            capacity: capacity_bytes / BANK_ENTRY_BYTES,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.queue.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, id: usize) {
        self.queue.push_back(id);
    }

    pub fn get(&self, pos: usize) -> Option<usize> {
        self.queue.get(pos).copied()
    }

    pub fn remove(&mut self, pos: usize) -> Option<usize> {
        self.queue.remove(pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn older_writers_only() {
        let mut cam = OaCam::new(DEFAULT_CAPACITY_BYTES);
        assert_eq!(cam.capacity(), 4096);
        cam.insert(7, 3);
        assert!(cam.hit_before(7, 4));
        assert!(!cam.hit_before(7, 3));
        assert!(!cam.hit_before(8, 9));
        cam.remove(7, 3);
        assert!(cam.is_empty() && !cam.contains(7));
    }
}
