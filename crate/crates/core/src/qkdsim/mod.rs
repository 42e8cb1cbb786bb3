//! Desk-scale BB84 simulator.
//!
//! Pulses are abstract (bit, basis) pairs. The channel supports independent
//! bit-flip noise and an intercept-resend eavesdropper acting on a fraction
//! of pulses. Sifted keys can then be reconciled with cascade or checked with
//! a hash digest and retransmitted wholesale on mismatch.

pub mod cascade;
pub mod digest;
pub mod report;

use rand::seq::index::sample;
use rand::Rng as _;
use thiserror::Error;

use crate::numcore::Rng;

pub use cascade::{cascade_reconcile, cascade_reconcile_with, AliceParity, CascadeConfig, CascadeResult, ParityOracle};
pub use digest::{digest_verify, key_bytes, run_digest_protocol, DigestRun, DigestVerdict};
pub use report::{compare_strategies, Scenario, Strategy, StrategyReport, StrategyStats, TrialRow};

pub type Bits = Vec<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    fn random(rng: &mut Rng) -> Self {
        if rng.random::<bool>() {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrain {
    pub bits: Bits,
    pub bases: Vec<Basis>,
}

impl PulseTrain {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no key accepted after {rounds} rounds ({pulses} pulses)")]
    NoKey { rounds: u32, pulses: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub p_noise: f64,
    /// Fraction of pulses intercepted and resent.
    pub eve_fraction: f64,
}

impl ChannelModel {
    pub fn new(p_noise: f64, eve_fraction: f64) -> Result<Self, QkdError> {
        for (name, v) in [("p_noise", p_noise), ("eve_fraction", eve_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QkdError::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { p_noise, eve_fraction })
    }

    pub fn ideal() -> Self {
        Self { p_noise: 0.0, eve_fraction: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiftedPair {
    pub alice_key: Bits,
    pub bob_key: Bits,
    pub kept_indices: Vec<usize>,
}

impl SiftedPair {
    pub fn len(&self) -> usize {
        self.alice_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_key.is_empty()
    }

    pub fn error_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.alice_key[i] != self.bob_key[i]).collect()
    }

    pub fn error_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.error_positions().len() as f64 / self.len() as f64
        }
    }
}

/// Alice's pulse train and Bob's independently chosen measurement bases.
pub fn generate_round(n_pulses: usize, rng: &mut Rng) -> (PulseTrain, Vec<Basis>) {
    let mut bits = Vec::with_capacity(n_pulses);
    let mut bases = Vec::with_capacity(n_pulses);
    let mut bob_bases = Vec::with_capacity(n_pulses);
    for _ in 0..n_pulses {
        bits.push(rng.random::<bool>());
        bases.push(Basis::random(rng));
        bob_bases.push(Basis::random(rng));
    }
    (PulseTrain { bits, bases }, bob_bases)
}

/// Bob's measured bits after intercept-resend and noise.
pub fn channel_transmit(alice: &PulseTrain, bob_bases: &[Basis], model: &ChannelModel, rng: &mut Rng) -> Result<Bits, QkdError> {
    if alice.bases.len() != alice.bits.len() || bob_bases.len() != alice.len() {
        return Err(QkdError::Domain("pulse train and basis lengths differ".into()));
    }
    let measure = |bit: bool, prepared: Basis, measured: Basis, rng: &mut Rng| {
        if prepared == measured {
            bit
        } else {
            rng.random::<bool>()
        }
    };
    let mut out = Vec::with_capacity(alice.len());
    for ((&sent, &prepared), &bob_basis) in alice.bits.iter().zip(&alice.bases).zip(bob_bases) {
        let (mut bit, mut basis) = (sent, prepared);
        if model.eve_fraction > 0.0 && rng.random_bool(model.eve_fraction) {
            let eve_basis = Basis::random(rng);
            bit = measure(bit, basis, eve_basis, rng);
            basis = eve_basis;
        }
        let mut received = measure(bit, basis, bob_basis, rng);
        if model.p_noise > 0.0 && rng.random_bool(model.p_noise) {
            received = !received;
        }
        out.push(received);
    }
    Ok(out)
}

/// Keeps exactly the basis-matched positions.
pub fn sift(alice: &PulseTrain, bob_bases: &[Basis], bob_bits: &[bool]) -> Result<SiftedPair, QkdError> {
    if bob_bases.len() != alice.len() || bob_bits.len() != alice.len() {
        return Err(QkdError::Domain("pulse train and measurement lengths differ".into()));
    }
    let kept_indices: Vec<usize> = (0..alice.len()).filter(|&i| alice.bases[i] == bob_bases[i]).collect();
    Ok(SiftedPair {
        alice_key: kept_indices.iter().map(|&i| alice.bits[i]).collect(),
        bob_key: kept_indices.iter().map(|&i| bob_bits[i]).collect(),
        kept_indices,
    })
}

/// Publicly compares a random sample of positions and drops them.
pub fn estimate_qber(pair: &SiftedPair, sample_frac: f64, rng: &mut Rng) -> Result<(f64, SiftedPair), QkdError> {
    if pair.is_empty() {
        return Err(QkdError::Domain("cannot estimate QBER of an empty key".into()));
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(QkdError::Domain(format!("sample_frac = {sample_frac} outside (0, 1]")));
    }
    let len = pair.len();
    let amount = ((sample_frac * len as f64).ceil() as usize).clamp(1, len);
    let mut sampled = vec![false; len];
    for i in sample(rng, len, amount) {
        sampled[i] = true;
    }
    let mismatches = (0..len).filter(|&i| sampled[i] && pair.alice_key[i] != pair.bob_key[i]).count();
    let keep: Vec<usize> = (0..len).filter(|&i| !sampled[i]).collect();
    let remaining = SiftedPair {
        alice_key: keep.iter().map(|&i| pair.alice_key[i]).collect(),
        bob_key: keep.iter().map(|&i| pair.bob_key[i]).collect(),
        kept_indices: keep.iter().map(|&i| pair.kept_indices[i]).collect(),
    };
    Ok((mismatches as f64 / amount as f64, remaining))
}
