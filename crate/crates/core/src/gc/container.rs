//! Binary container for garbled circuits.
//!
//! Layout, all little-endian: a 16-byte header `{magic: [u8;4], version: u32,
//! gates: u32, ands: u32}`, then 32 bytes per AND gate (`TG || TE`), then a
//! trailer holding the constant-true label (16 bytes), the output count
//! (`u32`) and the packed decode bits.

use super::block::Block;
use super::garble::GarbledCircuit;
use super::GcError;

pub const MAGIC: [u8; 4] = *b"PGC\0";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;

pub fn write_container(gc: &GarbledCircuit, gate_count: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + gc.table_bytes() + 20 + gc.decode.len() / 8 + 1);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(gate_count as u32).to_le_bytes());
    out.extend_from_slice(&(gc.tables.len() as u32).to_le_bytes());
    for [tg, te] in &gc.tables {
        out.extend_from_slice(&tg.to_bytes());
        out.extend_from_slice(&te.to_bytes());
    }
    out.extend_from_slice(&gc.const_true.to_bytes());
    out.extend_from_slice(&(gc.decode.len() as u32).to_le_bytes());
    let mut packed = vec![0u8; gc.decode.len().div_ceil(8)];
    for (i, &b) in gc.decode.iter().enumerate() {
        packed[i / 8] |= (b as u8) << (i % 8);
    }
    out.extend_from_slice(&packed);
    out
}

/// Returns the garbled circuit and the gate count stored in the header.
pub fn read_container(bytes: &[u8]) -> Result<(GarbledCircuit, usize), GcError> {
    let bad = |m: &str| GcError::Container(m.to_string());
    if bytes.len() < HEADER_BYTES {
        return Err(bad("truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    if bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    if u32_at(4) != VERSION {
        return Err(bad("unsupported version"));
    }
    let gates = u32_at(8) as usize;
    let ands = u32_at(12) as usize;
    let rows_end = HEADER_BYTES + 32 * ands;
    if bytes.len() < rows_end + 20 {
        return Err(bad("truncated table"));
    }
    let block_at = |o: usize| Block::from_bytes(bytes[o..o + 16].try_into().expect("16 bytes"));
    let tables = (0..ands)
        .map(|i| {
            let o = HEADER_BYTES + 32 * i;
            [block_at(o), block_at(o + 16)]
        })
        .collect();
    let const_true = block_at(rows_end);
    let nout = u32_at(rows_end + 16) as usize;
    let packed = &bytes[rows_end + 20..];
    if packed.len() != nout.div_ceil(8) {
        return Err(bad("decode map length mismatch"));
    }
    let decode = (0..nout).map(|i| (packed[i / 8] >> (i % 8)) & 1 == 1).collect();
    Ok((
        GarbledCircuit {
            tables,
            const_true,
            decode,
        },
        gates,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let gc = GarbledCircuit {
            tables: vec![[Block(1), Block(2)], [Block(u128::MAX), Block(7 << 100)]],
            const_true: Block(0xabcdef),
            decode: vec![true, false, true, true, false, false, false, true, true],
        };
        let bytes = write_container(&gc, 9);
        assert_eq!(&bytes[..4], &MAGIC);
        assert_eq!(bytes.len(), 16 + 64 + 16 + 4 + 2);
        assert_eq!(read_container(&bytes).unwrap(), (gc, 9));
        assert!(read_container(&bytes[..30]).is_err());
    }
}
