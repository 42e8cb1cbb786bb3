//! Box-plus-letter session.
//!
//! Alice deposits her secret `S` together with a fresh letter key `K` using
//! Protocol 1 (Base). Separately she sends a coded letter: a manifest that
//! names the contents and carries a digest of `S`, encrypted under a
//! keystream derived from `K`. Bob opens the box, uses `K` to read the letter
//! and checks the manifest against what he found.
//!
//! Sealed letter plaintext:
//!
//! ```text
//! description length u32 BE | description (UTF-8) | digest length u8 | digest | seal
//! ```
//!
//! where `seal = H(K || everything before it)`. Ciphertext is the plaintext
//! XOR the keystream `H(K || 0u64) || H(K || 1u64) || ...`.

use super::codec::{MessageKind, ProtocolId};
use super::exchange::{accept_challenge, single_field, Link, Recovered, Result, SessionError, SessionOutcome, ACK_MANIFEST_REJECTED, ACK_OK};
use super::tap::{tap_attach_active, TapLog, Tamper};
use super::transport::{MemoryTransport, Transport};
use crate::hashing::DigestConfig;
use crate::numcore::{nat, rand_residue, to_canonical_bytes, Natural, RsaParams, RsaSecret, Rng};
use crate::p1::{p1_deposit, p1_init, p1_init_with_r, p1_recover, AliceSecrets1, Response1, Variant1};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub content_description: String,
    pub secret_digest: Vec<u8>,
}

impl Manifest {
    pub fn for_secret(description: impl Into<String>, s: &Natural, cfg: &DigestConfig) -> Self {
        Self {
            content_description: description.into(),
            secret_digest: cfg.digest(&to_canonical_bytes(s)),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let desc = self.content_description.as_bytes();
        let mut out = Vec::with_capacity(5 + desc.len() + self.secret_digest.len());
        out.extend_from_slice(&(desc.len() as u32).to_be_bytes());
        out.extend_from_slice(desc);
        out.push(self.secret_digest.len() as u8);
        out.extend_from_slice(&self.secret_digest);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        let desc_len = u32::from_be_bytes(b.get(..4)?.try_into().ok()?) as usize;
        let desc = b.get(4..4usize.checked_add(desc_len)?)?;
        let rest = &b[4 + desc_len..];
        let (&digest_len, digest) = rest.split_first()?;
        if digest.len() != digest_len as usize {
            return None;
        }
        Some(Self {
            content_description: String::from_utf8(desc.to_vec()).ok()?,
            secret_digest: digest.to_vec(),
        })
    }
}

/// `H(K || counter)` blocks, concatenated and cut to `len` bytes.
pub fn keystream(k: &Natural, len: usize, cfg: &DigestConfig) -> Vec<u8> {
    let key = to_canonical_bytes(k);
    let mut out = Vec::with_capacity(len);
    let mut counter = 0u64;
    while out.len() < len {
        out.extend(cfg.hash.hash_parts(&[&key, &counter.to_be_bytes()]));
        counter += 1;
    }
    out.truncate(len);
    out
}

fn xor_in_place(data: &mut [u8], stream: &[u8]) {
    data.iter_mut().zip(stream).for_each(|(d, s)| *d ^= s);
}

/// Encrypts and seals the manifest under `k`.
pub fn seal_letter(manifest: &Manifest, k: &Natural, cfg: &DigestConfig) -> Vec<u8> {
    let mut plain = manifest.to_bytes();
    let seal = cfg.hash.hash_parts(&[&to_canonical_bytes(k), &plain]);
    plain.extend(seal);
    let stream = keystream(k, plain.len(), cfg);
    xor_in_place(&mut plain, &stream);
    plain
}

/// Decrypts the letter and checks its seal. `None` if the seal is broken or
/// the body does not parse.
pub fn open_letter(ciphertext: &[u8], k: &Natural, cfg: &DigestConfig) -> Option<Manifest> {
    let seal_len = cfg.hash.output_bits() as usize / 8;
    let mut plain = ciphertext.to_vec();
    let stream = keystream(k, plain.len(), cfg);
    xor_in_place(&mut plain, &stream);
    if plain.len() < seal_len {
        return None;
    }
    let (body, seal) = plain.split_at(plain.len() - seal_len);
    if cfg.hash.hash_parts(&[&to_canonical_bytes(k), body]) != seal {
        return None;
    }
    Manifest::from_bytes(body)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TropeBob {
    pub params: RsaParams,
    pub secret: RsaSecret,
    pub r: Option<Natural>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TropeAlice {
    pub params: RsaParams,
    pub s: Natural,
    pub description: String,
    /// Forced letter key; drawn from `[1, n-1]` when absent.
    pub k: Option<Natural>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TropeConfig {
    pub digest: DigestConfig,
    pub ack: bool,
}

impl Default for TropeConfig {
    fn default() -> Self {
        Self {
            digest: DigestConfig::default(),
            ack: true,
        }
    }
}

/// Bob's end. The coded letter is read from `letter_channel` when given,
/// otherwise from the main transport.
pub fn trope_bob<T: Transport, L: Transport>(
    bob: &TropeBob,
    transport: T,
    letter_channel: Option<L>,
    rng: &mut Rng,
    cfg: &TropeConfig,
) -> Result<SessionOutcome> {
    let mut link = Link::new(transport, ProtocolId::Trope);
    let mut letter_link = letter_channel.map(|t| Link::new(t, ProtocolId::Trope));

    let state = match &bob.r {
        Some(r) => p1_init_with_r(&bob.params, &bob.secret, Variant1::Base, r.clone())?,
        None => p1_init(&bob.params, &bob.secret, Variant1::Base, rng)?,
    };
    link.send(MessageKind::Challenge, vec![state.challenge_sent.clone()], vec![Variant1::Base.code()])?;
    let deposit = single_field(&link.recv(MessageKind::Deposit)?)?;
    let letter = single_field(&link.recv(MessageKind::Letter)?)?;
    let coded = match letter_link.as_mut() {
        Some(l) => l.recv(MessageKind::Letter)?,
        None => link.recv(MessageKind::Letter)?,
    };
    if !coded.fields.is_empty() {
        return Err(SessionError::Unexpected("coded letter carries numeric fields".into()));
    }

    let recovered = match p1_recover(&state, &Response1 { deposit, letter }) {
        Ok(r) => r,
        Err(e) => {
            if cfg.ack {
                link.send(MessageKind::Ack, vec![nat(super::exchange::ACK_RECOVERY_FAILED as u64)], Vec::new())?;
            }
            return Err(e.into());
        }
    };
    let s = recovered.s.clone().expect("base variant recovers S");
    let k = recovered.k.clone().expect("base variant recovers K");
    let manifest = open_letter(&coded.blob, &k, &cfg.digest);
    let manifest_ok = manifest
        .as_ref()
        .is_some_and(|m| m.secret_digest == cfg.digest.digest(&to_canonical_bytes(&s)));

    if cfg.ack {
        let status = if manifest_ok { ACK_OK } else { ACK_MANIFEST_REJECTED };
        link.send(MessageKind::Ack, vec![nat(status as u64)], Vec::new())?;
    }
    let mut transcript = link.transcript();
    if let Some(l) = &letter_link {
        transcript.extend(l.transcript());
    }
    Ok(SessionOutcome {
        recovered: Some(Recovered::P1(recovered)),
        alice_shared: None,
        manifest_ok: Some(manifest_ok),
        manifest,
        transcript,
    })
}

/// Alice's end. `manifest_ok` on her side reflects Bob's acknowledgement
/// (`None` when acks are off).
pub fn trope_alice<T: Transport, L: Transport>(
    alice: &TropeAlice,
    transport: T,
    letter_channel: Option<L>,
    rng: &mut Rng,
    cfg: &TropeConfig,
) -> Result<SessionOutcome> {
    let mut link = Link::new(transport, ProtocolId::Trope);
    let mut letter_link = letter_channel.map(|t| Link::new(t, ProtocolId::Trope));

    let k = match &alice.k {
        Some(k) => k.clone(),
        None => rand_residue(&alice.params.n, false, rng).map_err(crate::error::ProtocolError::from)?,
    };
    let challenge = accept_challenge(&mut link, Variant1::Base.code())?;
    let secrets = AliceSecrets1::new(alice.s.clone(), k.clone());
    let resp = p1_deposit(&alice.params, Variant1::Base, &challenge, &secrets)?;
    let manifest = Manifest::for_secret(alice.description.clone(), &alice.s, &cfg.digest);
    let coded = seal_letter(&manifest, &k, &cfg.digest);

    link.send(MessageKind::Deposit, vec![resp.deposit], Vec::new())?;
    link.send(MessageKind::Letter, vec![resp.letter], Vec::new())?;
    match letter_link.as_mut() {
        Some(l) => l.send(MessageKind::Letter, Vec::new(), coded)?,
        None => link.send(MessageKind::Letter, Vec::new(), coded)?,
    }

    let manifest_ok = if cfg.ack {
        let ack = link.recv(MessageKind::Ack)?;
        match super::exchange::ack_status(&ack) {
            ACK_OK => Some(true),
            ACK_MANIFEST_REJECTED => Some(false),
            s => return Err(SessionError::PeerFailed(s)),
        }
    } else {
        None
    };
    let mut transcript = link.transcript();
    if let Some(l) = &letter_link {
        transcript.extend(l.transcript());
    }
    Ok(SessionOutcome {
        recovered: None,
        alice_shared: None,
        manifest_ok,
        manifest: Some(manifest),
        transcript,
    })
}

/// Bob's and Alice's results plus the log of a tap on Bob's endpoint.
pub type TropeRun = (Result<SessionOutcome>, Result<SessionOutcome>, TapLog);

/// Runs a full in-memory trope session with a tap (active when `tampers` is
/// nonempty) in front of Bob. Frames through the tap are numbered
/// 0 Challenge, 1 Deposit, 2 Letter, 3 coded letter, 4 Ack.
pub fn run_trope_session(bob: &TropeBob, alice: &TropeAlice, seed: u64, cfg: &TropeConfig, tampers: Vec<Tamper>) -> TropeRun {
    let (bob_end, alice_end) = MemoryTransport::pair();
    let (bob_end, log) = tap_attach_active(bob_end, tampers);
    let none = None::<MemoryTransport>;
    let (b, a) = std::thread::scope(|s| {
        let alice_task = s.spawn(move || trope_alice(alice, alice_end, none, &mut Rng::from_seed(seed.wrapping_add(1)), cfg));
        let b = trope_bob(bob, bob_end, None::<MemoryTransport>, &mut Rng::from_seed(seed), cfg);
        (b, alice_task.join().expect("alice endpoint panicked"))
    });
    (b, a, log)
}
