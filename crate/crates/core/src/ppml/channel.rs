use std::collections::VecDeque;

use super::ledger::CommLedger;
use super::message::{Message, MessageKind, Party};
use super::ProtocolError;
use crate::gc::Block;

/// Receiver gets `pairs[i].choice[i]`.
pub fn ideal_ot(pairs: &[(Block, Block)], choices: &[bool]) -> Result<Vec<Block>, ProtocolError> {
    if pairs.len() != choices.len() {
        return Err(ProtocolError::Length {
            what: "OT choices",
            expected: pairs.len(),
            got: choices.len(),
        });
    }
    Ok(pairs.iter().zip(choices).map(|(&(l0, l1), &c)| if c { l1 } else { l0 }).collect())
}

/// Ordered in-process duplex link between client and server, hosting the
/// ideal OT functionality. Every message passes through the ledger.
#[derive(Debug)]
pub struct Channel {
    queue: VecDeque<Message>,
    transcript: Vec<Message>,
    ledger: CommLedger,
    seq: u64,
    ot_offer: Option<Vec<(Block, Block)>>,
    ot_bytes_per_wire: usize,
}

impl Channel {
    pub fn new(ot_bytes_per_wire: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            transcript: Vec::new(),
            ledger: CommLedger::default(),
            seq: 0,
            ot_offer: None,
            ot_bytes_per_wire: ot_bytes_per_wire.max(16),
        }
    }

    fn log(&mut self, from: Party, to: Party, kind: MessageKind, payload: Vec<u8>) -> Message {
        let m = Message {
            seq: self.seq,
            from,
            to,
            kind,
            payload,
        };
        self.seq += 1;
        self.ledger.record(&m);
        self.transcript.push(m.clone());
        m
    }

    pub fn send(&mut self, from: Party, to: Party, kind: MessageKind, payload: Vec<u8>) {
        let m = self.log(from, to, kind, payload);
        self.queue.push_back(m);
    }

    pub fn pop(&mut self) -> Option<Message> {
        self.queue.pop_front()
    }

    /// Sender's input to the OT functionality.
    pub fn ot_offer(&mut self, pairs: Vec<(Block, Block)>) {
        self.ot_offer = Some(pairs);
    }

    /// Receiver's side: the choice bits go to the functionality only; the
    /// request on the wire carries the wire count. The response carries
    /// `ot_bytes_per_wire` bytes per wire, the chosen label first.
    pub fn ot_receive(&mut self, choices: &[bool]) -> Result<Vec<Block>, ProtocolError> {
        let pairs = self.ot_offer.take().ok_or(ProtocolError::Order("OT request without an offer".into()))?;
        let labels = ideal_ot(&pairs, choices)?;
        self.log(Party::Server, Party::Ot, MessageKind::OtLabelRequest, (choices.len() as u32).to_le_bytes().to_vec());
        let mut payload = Vec::with_capacity(self.ot_bytes_per_wire * labels.len());
        for l in &labels {
            payload.extend_from_slice(&l.to_bytes());
            payload.resize(payload.len() + self.ot_bytes_per_wire - 16, 0);
        }
        let m = self.log(Party::Ot, Party::Server, MessageKind::OtLabelResponse, payload);
        Ok(m.payload
            .chunks_exact(self.ot_bytes_per_wire)
            .map(|c| Block::from_bytes(c[..16].try_into().unwrap()))
            .collect())
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    pub fn into_parts(self) -> (CommLedger, Vec<Message>) {
        (self.ledger, self.transcript)
    }
}
