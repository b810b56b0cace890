use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Bytes in front of every payload: u32 length, u8 kind.
pub const FRAME_HEADER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    /// Relinearization and rotation keys, client to server.
    EvalKeys,
    CtUpload,
    CtResult,
    GarbledTables,
    InputLabels,
    /// Receiver's request to the OT functionality (wire count only).
    OtLabelRequest,
    /// OT functionality to receiver.
    OtLabelResponse,
    /// Evaluator's output colour bits, server to client.
    EvalShare,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::EvalKeys,
        MessageKind::CtUpload,
        MessageKind::CtResult,
        MessageKind::GarbledTables,
        MessageKind::InputLabels,
        MessageKind::OtLabelRequest,
        MessageKind::OtLabelResponse,
        MessageKind::EvalShare,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Result<Self, ProtocolError> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| ProtocolError::Malformed(format!("message kind {c}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Client,
    Server,
    /// The ideal OT functionality.
    Ot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: Party,
    pub to: Party,
    pub kind: MessageKind,
    pub payload: Vec<u8>,
}

impl Message {
    /// Framed size on the wire.
    pub fn wire_len(&self) -> usize {
        FRAME_HEADER + self.payload.len()
    }

    pub fn frame(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Writes `{u32 length, u8 kind, payload}` records.
pub fn write_transcript<W: Write>(w: &mut W, messages: &[Message]) -> std::io::Result<()> {
    for m in messages {
        w.write_all(&m.frame())?;
    }
    Ok(())
}

/// File-pair form: messages the client sent go to `client`, messages sent
/// by the server or the OT functionality go to `server`.
pub fn write_transcript_pair<A: Write, B: Write>(client: &mut A, server: &mut B, messages: &[Message]) -> std::io::Result<()> {
    for m in messages {
        match m.from {
            Party::Client => client.write_all(&m.frame())?,
            Party::Server | Party::Ot => server.write_all(&m.frame())?,
        }
    }
    Ok(())
}

/// Reads framed records back as `(kind, payload)`.
pub fn read_transcript<R: Read>(r: &mut R) -> Result<Vec<(MessageKind, Vec<u8>)>, ProtocolError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < buf.len() {
        if buf.len() - pos < FRAME_HEADER {
            return Err(ProtocolError::Malformed(format!("truncated header at byte {pos}")));
        }
        let len = u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        let kind = MessageKind::from_code(buf[pos + 4])?;
        pos += FRAME_HEADER;
        let payload = buf
            .get(pos..pos + len)
            .ok_or_else(|| ProtocolError::Malformed(format!("truncated payload at byte {pos}")))?;
        out.push((kind, payload.to_vec()));
        pos += len;
    }
    Ok(out)
}

pub(crate) fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b as u8) << (i % 8);
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>, ProtocolError> {
    if bytes.len() != n.div_ceil(8) {
        return Err(ProtocolError::Malformed(format!("{} bytes for {n} bits", bytes.len())));
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}
