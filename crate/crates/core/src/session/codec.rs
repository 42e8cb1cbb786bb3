//! Wire format.
//!
//! ```text
//! "PBNK" | 0x01 | protocol u8 | kind u8 | field count u16 BE
//!   | per field: length u32 BE | magnitude bytes (big-endian, minimal)
//!   | blob length u32 BE | blob bytes
//! ```

use num_traits::Zero;
use thiserror::Error;

use crate::numcore::{from_be_bytes, to_canonical_bytes, Natural};

pub const MAGIC: [u8; 4] = *b"PBNK";
pub const VERSION: u8 = 0x01;
/// Magic, version, protocol, kind, field count.
pub const HEADER_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ProtocolId {
    P1 = 1,
    P2 = 2,
    Trope = 3,
    Qkd = 4,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 4] = [ProtocolId::P1, ProtocolId::P2, ProtocolId::Trope, ProtocolId::Qkd];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|p| *p as u8 == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Challenge = 1,
    Deposit = 2,
    Letter = 3,
    DigestAnnounce = 4,
    RetransmitRequest = 5,
    Ack = 6,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Challenge,
        MessageKind::Deposit,
        MessageKind::Letter,
        MessageKind::DigestAnnounce,
        MessageKind::RetransmitRequest,
        MessageKind::Ack,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == b)
    }
}

/// Whether `kind` may appear under `protocol`.
pub fn kind_admissible(protocol: ProtocolId, kind: MessageKind) -> bool {
    use MessageKind::*;
    use ProtocolId::*;
    match kind {
        Ack => true,
        Challenge | Deposit | Letter => matches!(protocol, P1 | P2 | Trope),
        DigestAnnounce => matches!(protocol, Trope | Qkd),
        RetransmitRequest => protocol == Qkd,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub protocol: ProtocolId,
    pub kind: MessageKind,
    pub fields: Vec<Natural>,
    pub blob: Vec<u8>,
}

impl Message {
    pub fn new(protocol: ProtocolId, kind: MessageKind, fields: Vec<Natural>) -> Self {
        Self {
            protocol,
            kind,
            fields,
            blob: Vec::new(),
        }
    }

    pub fn with_blob(mut self, blob: Vec<u8>) -> Self {
        self.blob = blob;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated frame: needed {needed} more bytes at offset {offset}")]
    Truncation { offset: usize, needed: usize },
    #[error("non-canonical magnitude in field {field}")]
    Canonicality { field: usize },
    #[error("encode error: {0}")]
    Encode(String),
}

pub fn encode_msg(m: &Message) -> Result<Vec<u8>, CodecError> {
    if !kind_admissible(m.protocol, m.kind) {
        return Err(CodecError::Encode(format!("{:?} not admissible under {:?}", m.kind, m.protocol)));
    }
    let count = u16::try_from(m.fields.len())
        .map_err(|_| CodecError::Encode(format!("{} fields exceed the 65535 limit", m.fields.len())))?;
    let blob_len = u32::try_from(m.blob.len()).map_err(|_| CodecError::Encode("blob too large".into()))?;

    let mut out = Vec::with_capacity(HEADER_LEN + 4 + m.blob.len() + 8 * m.fields.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(m.protocol as u8);
    out.push(m.kind as u8);
    out.extend_from_slice(&count.to_be_bytes());
    for f in &m.fields {
        let bytes = to_canonical_bytes(f);
        let len = u32::try_from(bytes.len()).map_err(|_| CodecError::Encode("field too large".into()))?;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out.extend_from_slice(&blob_len.to_be_bytes());
    out.extend_from_slice(&m.blob);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(CodecError::Truncation {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_msg(b: &[u8]) -> Result<Message, CodecError> {
    let mut r = Reader { buf: b, pos: 0 };
    let magic = r.take(4.min(b.len()))?;
    if magic != &MAGIC[..magic.len()] {
        return Err(CodecError::Format("bad magic".into()));
    }
    if magic.len() < 4 {
        return Err(CodecError::Truncation {
            offset: magic.len(),
            needed: 4 - magic.len(),
        });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CodecError::Format(format!("unsupported version {version:#04x}")));
    }
    let protocol = r.u8()?;
    let protocol = ProtocolId::from_byte(protocol).ok_or_else(|| CodecError::Format(format!("unknown protocol id {protocol}")))?;
    let kind = r.u8()?;
    let kind = MessageKind::from_byte(kind).ok_or_else(|| CodecError::Format(format!("unknown message kind {kind}")))?;
    if !kind_admissible(protocol, kind) {
        return Err(CodecError::Format(format!("{kind:?} not admissible under {protocol:?}")));
    }
    let count = r.u16()? as usize;
    let mut fields = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let len = r.u32()? as usize;
        let bytes = r.take(len)?;
        if bytes.first() == Some(&0) {
            return Err(CodecError::Canonicality { field: i });
        }
        fields.push(from_be_bytes(bytes));
    }
    let blob_len = r.u32()? as usize;
    let blob = r.take(blob_len)?.to_vec();
    if r.pos != b.len() {
        return Err(CodecError::Format(format!("{} trailing bytes", b.len() - r.pos)));
    }
    debug_assert!(fields.iter().all(|f| !f.is_zero() || to_canonical_bytes(f).is_empty()));
    Ok(Message { protocol, kind, fields, blob })
}

/// Total frame length implied by a prefix of the stream, or how many more
/// bytes are needed before it can be known. Used by stream transports.
pub(crate) fn frame_len_hint(prefix: &[u8]) -> FrameScan {
    let need = |n: usize| FrameScan::NeedAtLeast(n);
    if prefix.len() < HEADER_LEN {
        return need(HEADER_LEN);
    }
    let count = u16::from_be_bytes([prefix[7], prefix[8]]) as usize;
    let mut pos = HEADER_LEN;
    for _ in 0..count {
        if prefix.len() < pos + 4 {
            return need(pos + 4);
        }
        let len = u32::from_be_bytes(prefix[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4 + len;
    }
    if prefix.len() < pos + 4 {
        return need(pos + 4);
    }
    let blob = u32::from_be_bytes(prefix[pos..pos + 4].try_into().unwrap()) as usize;
    FrameScan::Complete(pos + 4 + blob)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FrameScan {
    NeedAtLeast(usize),
    Complete(usize),
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
