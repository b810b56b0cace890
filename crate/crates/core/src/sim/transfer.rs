use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    ToDevice,
    ToHost,
}

/// A single DMA queue against main memory. Transfers serialize; compute may
/// overlap with them.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryTransferModel {
    bytes_per_cycle: f64,
    free_at: u64,
    moved: [u64; 2],
}

impl MemoryTransferModel {
    pub fn new(bytes_per_cycle: f64) -> Self {
        assert!(bytes_per_cycle > 0.0, "bandwidth must be positive");
        MemoryTransferModel { bytes_per_cycle, free_at: 0, moved: [0; 2] }
    }

    pub fn bytes_per_cycle(&self) -> f64 {
        self.bytes_per_cycle
    }

    /// Queues a transfer issued at `now` and returns its completion cycle.
    pub fn transfer(&mut self, bytes: u64, dir: Direction, now: u64) -> u64 {
        let start = now.max(self.free_at);
        let cycles = (bytes as f64 / self.bytes_per_cycle).ceil() as u64;
        self.free_at = start + cycles;
        self.moved[dir as usize] += bytes;
        self.free_at
    }

    pub fn bytes_moved(&self, dir: Direction) -> u64 {
        self.moved[dir as usize]
    }

    pub fn idle_at(&self) -> u64 {
        self.free_at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queueing() {
        let mut m = MemoryTransferModel::new(512.0);
        assert_eq!(m.transfer(512, Direction::ToDevice, 0), 1);
        assert_eq!(m.transfer(513, Direction::ToDevice, 0), 3);
        assert_eq!(m.transfer(16 << 20, Direction::ToHost, 100), 100 + 32768);
        assert_eq!(m.bytes_moved(Direction::ToDevice), 1025);
    }
}
