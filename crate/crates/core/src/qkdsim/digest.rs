//! Digest check with wholesale retransmission.
//!
//! Alice announces a hash of her key over the public channel; Bob hashes his
//! own copy. A mismatch means noise or an eavesdropper touched the key, and a
//! fresh quantum round is requested.

use super::{channel_transmit, estimate_qber, generate_round, sift, Bits, ChannelModel, QkdError};
use crate::hashing::DigestConfig;
use crate::numcore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DigestVerdict {
    Match,
    Mismatch,
}

/// Canonical byte form of a bit string: bit length as u64 BE, then the bits
/// packed most significant first with zero padding.
pub fn key_bytes(key: &[bool]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + key.len().div_ceil(8));
    out.extend_from_slice(&(key.len() as u64).to_be_bytes());
    for chunk in key.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)));
        out.push(byte);
    }
    out
}

pub fn digest_verify(alice_key: &[bool], bob_key: &[bool], cfg: &DigestConfig) -> DigestVerdict {
    if cfg.digest(&key_bytes(alice_key)) == cfg.digest(&key_bytes(bob_key)) {
        DigestVerdict::Match
    } else {
        DigestVerdict::Mismatch
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestRun {
    pub accepted_key: Bits,
    /// Bob's copy at acceptance; equal to `accepted_key` unless the digest
    /// collided.
    pub bob_key: Bits,
    pub rounds: u32,
    pub pulses_consumed: u64,
}

/// Repeats full quantum rounds until the digests agree. When `sample_frac` is
/// positive that fraction of each sifted key is spent on a public QBER sample
/// first and the digest covers what remains.
pub fn run_digest_protocol(
    n_pulses: usize,
    model: &ChannelModel,
    cfg: &DigestConfig,
    sample_frac: f64,
    max_rounds: u32,
    rng: &mut Rng,
) -> Result<DigestRun, QkdError> {
    if max_rounds == 0 {
        return Err(QkdError::Domain("max_rounds must be at least 1".into()));
    }
    if n_pulses == 0 {
        return Err(QkdError::Domain("n_pulses must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&sample_frac) {
        return Err(QkdError::Domain(format!("sample_frac = {sample_frac} outside [0, 1)")));
    }
    let mut pulses = 0u64;
    for round in 1..=max_rounds {
        let (alice, bob_bases) = generate_round(n_pulses, rng);
        let bob_bits = channel_transmit(&alice, &bob_bases, model, rng)?;
        pulses += n_pulses as u64;
        let mut pair = sift(&alice, &bob_bases, &bob_bits)?;
        if sample_frac > 0.0 && !pair.is_empty() {
            pair = estimate_qber(&pair, sample_frac, rng)?.1;
        }
        if digest_verify(&pair.alice_key, &pair.bob_key, cfg) == DigestVerdict::Match {
            return Ok(DigestRun {
                accepted_key: pair.alice_key,
                bob_key: pair.bob_key,
                rounds: round,
                pulses_consumed: pulses,
            });
        }
    }
    Err(QkdError::NoKey { rounds: max_rounds, pulses })
}
