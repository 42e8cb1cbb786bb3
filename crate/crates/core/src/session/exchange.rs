//! Two-party drivers for Protocol 1 and Protocol 2.
//!
//! Message flow (both protocols):
//!
//! ```text
//! Bob   -> Alice   Challenge [challenge]      blob = [variant code]
//! Alice -> Bob     Deposit   [deposit]
//! Alice -> Bob     Letter    [letter]
//! Bob   -> Alice   Ack       [status]         (when acks are enabled)
//! ```
//!
//! A variant or protocol mismatch makes Alice answer the challenge with
//! `Ack [1]` instead of a deposit; both ends then fail with a handshake error.

use thiserror::Error;

use super::codec::{decode_msg, encode_msg, CodecError, Message, MessageKind, ProtocolId};
use super::tap::{tap_attach, TapEntry, Tapped};
use super::transport::{MemoryTransport, Transport, TransportError};
use crate::error::ProtocolError;
use crate::numcore::{nat, DhParams, Natural, RsaParams, RsaSecret, Rng};
use crate::p1::{p1_deposit, p1_init, p1_init_with_r, p1_recover, AliceSecrets1, Recovered1, Response1, Variant1};
use crate::p2::{p2_alice_shared, p2_deposit, p2_init, p2_init_with_r, p2_recover, AliceSecrets2, Outcome2, Response2, Variant2};

pub const ACK_OK: u32 = 0;
pub const ACK_HANDSHAKE_REJECTED: u32 = 1;
pub const ACK_RECOVERY_FAILED: u32 = 2;
pub const ACK_MANIFEST_REJECTED: u32 = 3;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("handshake error: {0}")]
    Handshake(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("peer reported failure (ack status {0})")]
    PeerFailed(u32),
}

impl SessionError {
    pub fn is_integrity(&self) -> bool {
        matches!(self, SessionError::Protocol(ProtocolError::Integrity(_)))
    }
}

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recovered {
    P1(Recovered1),
    P2(Outcome2),
}

/// What one endpoint knows at the end of a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    /// Bob's recovered secrets; `None` on Alice's side.
    pub recovered: Option<Recovered>,
    /// Alice's copy of `g^(SR) mod p` (Protocol 2 only).
    pub alice_shared: Option<Natural>,
    /// Coded-letter verdict; `None` outside trope sessions.
    pub manifest_ok: Option<bool>,
    pub manifest: Option<super::trope::Manifest>,
    /// Frames as seen by this endpoint, in order.
    pub transcript: Vec<TapEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    BobP1 {
        variant: Variant1,
        params: RsaParams,
        secret: RsaSecret,
        /// Forced `R`; sampled from the session rng when absent.
        r: Option<Natural>,
    },
    BobP2 {
        variant: Variant2,
        params: DhParams,
        r: Option<Natural>,
    },
    AliceP1 {
        variant: Variant1,
        params: RsaParams,
        secrets: AliceSecrets1,
    },
    AliceP2 {
        variant: Variant2,
        params: DhParams,
        secrets: AliceSecrets2,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeConfig {
    /// Bob acknowledges after recovery.
    pub ack: bool,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self { ack: true }
    }
}

/// Message-level view of a transport that keeps a local transcript.
pub(crate) struct Link<T: Transport> {
    inner: Tapped<T>,
    log: super::tap::TapLog,
    protocol: ProtocolId,
}

impl<T: Transport> Link<T> {
    pub(crate) fn new(transport: T, protocol: ProtocolId) -> Self {
        let (inner, log) = tap_attach(transport);
        Self { inner, log, protocol }
    }

    pub(crate) fn send(&mut self, kind: MessageKind, fields: Vec<Natural>, blob: Vec<u8>) -> Result<()> {
        let frame = encode_msg(&Message::new(self.protocol, kind, fields).with_blob(blob))?;
        self.inner.send(&frame)?;
        Ok(())
    }

    pub(crate) fn recv_any(&mut self) -> Result<Message> {
        let frame = self.inner.recv()?;
        Ok(decode_msg(&frame)?)
    }

    /// Receives the next message; a rejecting ack becomes an error.
    pub(crate) fn recv(&mut self, kind: MessageKind) -> Result<Message> {
        let m = self.recv_any()?;
        if m.kind == MessageKind::Ack && kind != MessageKind::Ack {
            return Err(match ack_status(&m) {
                ACK_HANDSHAKE_REJECTED => SessionError::Handshake("peer rejected the challenge".into()),
                s => SessionError::PeerFailed(s),
            });
        }
        if m.protocol != self.protocol {
            return Err(SessionError::Handshake(format!("expected {:?} message, got {:?}", self.protocol, m.protocol)));
        }
        if m.kind != kind {
            return Err(SessionError::Unexpected(format!("expected {kind:?}, got {:?}", m.kind)));
        }
        Ok(m)
    }

    pub(crate) fn transcript(&self) -> Vec<TapEntry> {
        self.log.entries()
    }
}

pub(crate) fn ack_status(m: &Message) -> u32 {
    m.fields
        .first()
        .map(|f| u32::try_from(f).unwrap_or(u32::MAX))
        .unwrap_or(ACK_OK)
}

pub(crate) fn single_field(m: &Message) -> Result<Natural> {
    match m.fields.as_slice() {
        [x] => Ok(x.clone()),
        other => Err(SessionError::Unexpected(format!("{:?} carries {} fields, expected 1", m.kind, other.len()))),
    }
}

/// Reads Bob's challenge and checks it against Alice's configuration. On a
/// mismatch the challenge is rejected with an ack before failing.
pub(crate) fn accept_challenge<T: Transport>(link: &mut Link<T>, variant_code: u8) -> Result<Natural> {
    let m = link.recv_any()?;
    let reason = if m.protocol != link.protocol {
        Some(format!("peer speaks {:?}, expected {:?}", m.protocol, link.protocol))
    } else if m.kind != MessageKind::Challenge {
        Some(format!("expected Challenge, got {:?}", m.kind))
    } else if m.blob != [variant_code] {
        Some(format!("variant mismatch: peer {:?}, local {variant_code}", m.blob))
    } else {
        None
    };
    if let Some(reason) = reason {
        link.send(MessageKind::Ack, vec![nat(ACK_HANDSHAKE_REJECTED as u64)], Vec::new())?;
        return Err(SessionError::Handshake(reason));
    }
    single_field(&m)
}

fn finish_bob<T: Transport, R>(link: &mut Link<T>, cfg: &ExchangeConfig, result: std::result::Result<R, ProtocolError>) -> Result<R> {
    let status = if result.is_ok() { ACK_OK } else { ACK_RECOVERY_FAILED };
    if cfg.ack {
        link.send(MessageKind::Ack, vec![nat(status as u64)], Vec::new())?;
    }
    Ok(result?)
}

fn finish_alice<T: Transport>(link: &mut Link<T>, cfg: &ExchangeConfig) -> Result<()> {
    if cfg.ack {
        let ack = link.recv(MessageKind::Ack)?;
        match ack_status(&ack) {
            ACK_OK => {}
            s => return Err(SessionError::PeerFailed(s)),
        }
    }
    Ok(())
}

/// Drives one endpoint of a Protocol 1 or Protocol 2 exchange to completion.
pub fn run_exchange<T: Transport>(role: &Role, transport: T, rng: &mut Rng, cfg: &ExchangeConfig) -> Result<SessionOutcome> {
    let mut outcome = SessionOutcome {
        recovered: None,
        alice_shared: None,
        manifest_ok: None,
        manifest: None,
        transcript: Vec::new(),
    };
    match role {
        Role::BobP1 { variant, params, secret, r } => {
            let mut link = Link::new(transport, ProtocolId::P1);
            let state = match r {
                Some(r) => p1_init_with_r(params, secret, *variant, r.clone())?,
                None => p1_init(params, secret, *variant, rng)?,
            };
            link.send(MessageKind::Challenge, vec![state.challenge_sent.clone()], vec![variant.code()])?;
            let deposit = single_field(&link.recv(MessageKind::Deposit)?)?;
            let letter = single_field(&link.recv(MessageKind::Letter)?)?;
            let result = p1_recover(&state, &Response1 { deposit, letter });
            outcome.recovered = Some(Recovered::P1(finish_bob(&mut link, cfg, result)?));
            outcome.transcript = link.transcript();
        }
        Role::BobP2 { variant, params, r } => {
            let mut link = Link::new(transport, ProtocolId::P2);
            let state = match r {
                Some(r) => p2_init_with_r(params, r.clone())?,
                None => p2_init(params, rng)?,
            };
            link.send(MessageKind::Challenge, vec![state.challenge_sent.clone()], vec![variant.code()])?;
            let deposit = single_field(&link.recv(MessageKind::Deposit)?)?;
            let letter = single_field(&link.recv(MessageKind::Letter)?)?;
            let result = p2_recover(&state, *variant, &Response2 { deposit, letter });
            outcome.recovered = Some(Recovered::P2(finish_bob(&mut link, cfg, result)?));
            outcome.transcript = link.transcript();
        }
        Role::AliceP1 { variant, params, secrets } => {
            let mut link = Link::new(transport, ProtocolId::P1);
            let challenge = accept_challenge(&mut link, variant.code())?;
            let resp = p1_deposit(params, *variant, &challenge, secrets)?;
            link.send(MessageKind::Deposit, vec![resp.deposit], Vec::new())?;
            link.send(MessageKind::Letter, vec![resp.letter], Vec::new())?;
            finish_alice(&mut link, cfg)?;
            outcome.transcript = link.transcript();
        }
        Role::AliceP2 { variant, params, secrets } => {
            let mut link = Link::new(transport, ProtocolId::P2);
            let challenge = accept_challenge(&mut link, variant.code())?;
            let resp = p2_deposit(params, *variant, &challenge, secrets)?;
            link.send(MessageKind::Deposit, vec![resp.deposit], Vec::new())?;
            link.send(MessageKind::Letter, vec![resp.letter], Vec::new())?;
            finish_alice(&mut link, cfg)?;
            outcome.alice_shared = Some(p2_alice_shared(params, &challenge, secrets)?);
            outcome.transcript = link.transcript();
        }
    }
    Ok(outcome)
}

/// Runs both endpoints concurrently over an in-memory pair. Bob's side of the
/// pair is wrapped in `bob_wrap`, which is where a tap goes.
pub fn run_pair_with<W, F>(
    bob: &Role,
    alice: &Role,
    bob_seed: u64,
    alice_seed: u64,
    cfg: &ExchangeConfig,
    bob_wrap: F,
) -> (Result<SessionOutcome>, Result<SessionOutcome>)
where
    W: Transport,
    F: FnOnce(MemoryTransport) -> W,
{
    let (bob_end, alice_end) = MemoryTransport::pair();
    let bob_end = bob_wrap(bob_end);
    std::thread::scope(|s| {
        let alice_task = s.spawn(move || run_exchange(alice, alice_end, &mut Rng::from_seed(alice_seed), cfg));
        let bob_result = run_exchange(bob, bob_end, &mut Rng::from_seed(bob_seed), cfg);
        let alice_result = alice_task.join().expect("alice endpoint panicked");
        (bob_result, alice_result)
    })
}

pub fn run_pair(bob: &Role, alice: &Role, seed: u64, cfg: &ExchangeConfig) -> (Result<SessionOutcome>, Result<SessionOutcome>) {
    run_pair_with(bob, alice, seed, seed.wrapping_add(1), cfg, |t| t)
}
