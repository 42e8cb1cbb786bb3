//! Eavesdropper tap: a transport wrapper that records every frame it carries
//! and, in active mode, flips chosen bits in transit.

use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use super::codec::{decode_msg, to_hex, Message};
use super::transport::{Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Frame leaving the tapped endpoint.
    Tx,
    /// Frame arriving at the tapped endpoint.
    Rx,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Tx => "tx",
            Direction::Rx => "rx",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapEntry {
    pub direction: Direction,
    /// Frame as observed on the wire, before any tampering.
    pub frame: Vec<u8>,
    /// `None` when the observed frame does not decode.
    pub message: Option<Message>,
    pub tampered: bool,
}

/// XOR `mask` into byte `byte` of the `frame`-th frame through the tap
/// (counting both directions from zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tamper {
    pub frame: usize,
    pub byte: usize,
    pub mask: u8,
}

impl Tamper {
    /// Flip bit `bit` of the frame, most significant bit of byte 0 first.
    pub fn bit(frame: usize, bit: usize) -> Self {
        Self {
            frame,
            byte: bit / 8,
            mask: 0x80 >> (bit % 8),
        }
    }

    pub fn byte(frame: usize, byte: usize) -> Self {
        Self { frame, byte, mask: 0xff }
    }
}

/// Shared, append-only record of tapped frames.
#[derive(Debug, Clone, Default)]
pub struct TapLog {
    entries: Arc<Mutex<Vec<TapEntry>>>,
}

impl TapLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Vec<TapEntry>> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push(&self, entry: TapEntry) {
        self.lock().push(entry);
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<TapEntry> {
        self.lock().clone()
    }

    /// One line per frame: direction tag, space, lowercase hex.
    pub fn export(&self) -> String {
        export_entries(&self.entries())
    }
}

pub fn export_entries(entries: &[TapEntry]) -> String {
    entries
        .iter()
        .map(|e| format!("{} {}\n", e.direction, to_hex(&e.frame)))
        .collect()
}

pub struct Tapped<T> {
    inner: T,
    log: TapLog,
    tampers: Vec<Tamper>,
    seen: usize,
}

impl<T: Transport> Tapped<T> {
    fn observe(&mut self, direction: Direction, frame: &[u8]) -> Vec<u8> {
        let index = self.seen;
        self.seen += 1;
        let mut delivered = frame.to_vec();
        let mut tampered = false;
        for t in self.tampers.iter().filter(|t| t.frame == index) {
            if let Some(b) = delivered.get_mut(t.byte) {
                *b ^= t.mask;
                tampered = true;
            }
        }
        self.log.push(TapEntry {
            direction,
            frame: frame.to_vec(),
            message: decode_msg(frame).ok(),
            tampered,
        });
        delivered
    }
}

impl<T: Transport> Transport for Tapped<T> {
    fn send(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        let delivered = self.observe(Direction::Tx, frame);
        self.inner.send(&delivered)
    }

    fn recv(&mut self) -> Result<Vec<u8>, TransportError> {
        let frame = self.inner.recv()?;
        Ok(self.observe(Direction::Rx, &frame))
    }
}

/// Passive tap: frames pass through unchanged.
pub fn tap_attach<T: Transport>(transport: T) -> (Tapped<T>, TapLog) {
    tap_attach_active(transport, Vec::new())
}

/// Active tap applying `tampers` to the frames it forwards.
pub fn tap_attach_active<T: Transport>(transport: T, tampers: Vec<Tamper>) -> (Tapped<T>, TapLog) {
    let log = TapLog::new();
    (
        Tapped {
            inner: transport,
            log: log.clone(),
            tampers,
            seen: 0,
        },
        log,
    )
}
