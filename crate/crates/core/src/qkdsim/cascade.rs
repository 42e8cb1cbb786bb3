//! Cascade reconciliation.
//!
//! Pass 1 splits Bob's key into blocks of `k1` bits; later passes shuffle the
//! positions with a seeded permutation and double the block size. Every block
//! whose parity disagrees with Alice's is bisected (BINARY) down to a single
//! position, which is flipped. A flip changes the parity of the block holding
//! that position in every earlier pass, so any of those that turn odd are
//! bisected too.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{Bits, SiftedPair};

/// Alice's side of the public discussion.
pub trait ParityOracle {
    /// Parity of Alice's key over `positions` (true = odd).
    fn parity(&mut self, positions: &[usize]) -> bool;
}

/// Answers parity queries from Alice's key and counts them.
#[derive(Debug)]
pub struct AliceParity<'a> {
    key: &'a [bool],
    pub announced: usize,
}

impl<'a> AliceParity<'a> {
    pub fn new(key: &'a [bool]) -> Self {
        Self { key, announced: 0 }
    }
}

impl ParityOracle for AliceParity<'_> {
    fn parity(&mut self, positions: &[usize]) -> bool {
        self.announced += 1;
        parity_of(self.key, positions)
    }
}

fn parity_of(key: &[bool], positions: &[usize]) -> bool {
    positions.iter().fold(false, |acc, &i| acc ^ key[i])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub passes: u32,
    pub qber_hint: f64,
    pub shuffle_seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            passes: 4,
            qber_hint: 0.0,
            shuffle_seed: 0,
        }
    }
}

impl CascadeConfig {
    /// `max(1, round(0.73 / max(qber_hint, 1/len)))`.
    pub fn initial_block_size(&self, len: usize) -> usize {
        let q = self.qber_hint.max(1.0 / len.max(1) as f64);
        ((0.73 / q).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeResult {
    pub corrected_bob_key: Bits,
    pub parities_disclosed: usize,
    pub success: bool,
    /// Positions flipped, in order.
    pub flips: Vec<usize>,
    /// Number of top-level blocks announced in pass 1.
    pub first_pass_blocks: usize,
}

pub fn cascade_reconcile(pair: &SiftedPair, cfg: &CascadeConfig) -> CascadeResult {
    let mut alice = AliceParity::new(&pair.alice_key);
    let mut result = cascade_reconcile_with(&pair.bob_key, &mut alice, cfg, |_, _| {});
    debug_assert_eq!(result.parities_disclosed, alice.announced);
    result.success = result.corrected_bob_key == pair.alice_key;
    result
}

struct Pass {
    blocks: Vec<Vec<usize>>,
    /// block index for each key position
    block_of: Vec<usize>,
    alice_parity: Vec<bool>,
}

/// Cascade against an arbitrary parity oracle. `on_flip(position, key)` is
/// called just before each flip with Bob's key as it stands. `success` is
/// left false; only the caller knows Alice's key.
pub fn cascade_reconcile_with<O, F>(bob_key: &[bool], oracle: &mut O, cfg: &CascadeConfig, mut on_flip: F) -> CascadeResult
where
    O: ParityOracle + ?Sized,
    F: FnMut(usize, &[bool]),
{
    let len = bob_key.len();
    let mut key = bob_key.to_vec();
    let mut disclosed = 0usize;
    let mut flips = Vec::new();
    let mut passes: Vec<Pass> = Vec::new();
    let mut first_pass_blocks = 0;
    if len == 0 {
        return CascadeResult {
            corrected_bob_key: key,
            parities_disclosed: 0,
            success: false,
            flips,
            first_pass_blocks,
        };
    }

    let mut block_size = cfg.initial_block_size(len);
    for pass_index in 0..cfg.passes.max(1) {
        let mut order: Vec<usize> = (0..len).collect();
        if pass_index > 0 {
            let mut shuffler = ChaCha20Rng::seed_from_u64(cfg.shuffle_seed ^ u64::from(pass_index));
            order.shuffle(&mut shuffler);
        }
        let blocks: Vec<Vec<usize>> = order.chunks(block_size).map(<[usize]>::to_vec).collect();
        let mut block_of = vec![0; len];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        let alice_parity: Vec<bool> = blocks
            .iter()
            .map(|block| {
                disclosed += 1;
                oracle.parity(block)
            })
            .collect();
        if pass_index == 0 {
            first_pass_blocks = blocks.len();
        }
        passes.push(Pass { blocks, block_of, alice_parity });

        let current = passes.len() - 1;
        let mut pending: Vec<(usize, usize)> = (0..passes[current].blocks.len())
            .filter(|&b| parity_of(&key, &passes[current].blocks[b]) != passes[current].alice_parity[b])
            .map(|b| (current, b))
            .collect();

        while let Some((p, b)) = pending.pop() {
            let pass = &passes[p];
            if parity_of(&key, &pass.blocks[b]) == pass.alice_parity[b] {
                continue;
            }
            let pos = binary(&key, &pass.blocks[b], oracle, &mut disclosed);
            on_flip(pos, &key);
            key[pos] = !key[pos];
            flips.push(pos);
            for (q, other) in passes.iter().enumerate() {
                let ob = other.block_of[pos];
                if parity_of(&key, &other.blocks[ob]) != other.alice_parity[ob] {
                    pending.push((q, ob));
                }
            }
        }
        block_size = block_size.saturating_mul(2);
    }

    CascadeResult {
        corrected_bob_key: key,
        parities_disclosed: disclosed,
        success: false,
        flips,
        first_pass_blocks,
    }
}

/// Bisects an odd-parity block down to one position. Alice announces the
/// parity of each left half.
fn binary<O: ParityOracle + ?Sized>(key: &[bool], block: &[usize], oracle: &mut O, disclosed: &mut usize) -> usize {
    let mut span = block;
    while span.len() > 1 {
        let (left, right) = span.split_at(span.len() / 2);
        *disclosed += 1;
        span = if oracle.parity(left) != parity_of(key, left) { left } else { right };
    }
    span[0]
}
