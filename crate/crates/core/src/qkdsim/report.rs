//! Cascade vs. digest comparison over seeded trials.
//!
//! CSV columns (fixed):
//!
//! | column            | per-trial row                          | summary row                    |
//! |-------------------|----------------------------------------|--------------------------------|
//! | `strategy`        | `cascade` or `digest`                  | same                           |
//! | `trial`           | trial index                            | `summary`                      |
//! | `rounds`          | quantum rounds used                    | mean                           |
//! | `disclosed_bits`  | parities (cascade) / digest bits sent  | mean                           |
//! | `pulses`          | pulses consumed                        | mean                           |
//! | `key_bits`        | bits in the final key (0 if none)      | mean                           |
//! | `residual_errors` | positions where Bob's key still differs| mean                           |
//! | `accepted`        | 1 if a key was produced, else 0        | acceptance rate                |
//!
//! Summary rows are written after all trial rows, cascade first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;

use super::cascade::{cascade_reconcile, CascadeConfig};
use super::digest::run_digest_protocol;
use super::{channel_transmit, estimate_qber, generate_round, sift, ChannelModel, QkdError, SiftedPair};
use crate::hashing::{DigestConfig, HashAlg};
use crate::numcore::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pulses: usize,
    pub model: ChannelModel,
    pub passes: u32,
    /// Fraction of each sifted key spent on the public QBER sample. Zero
    /// skips sampling.
    pub sample_frac: f64,
    pub trials: usize,
    pub seed: u64,
    pub digest: DigestConfig,
    pub max_rounds: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            pulses: 1024,
            model: ChannelModel::ideal(),
            passes: 4,
            sample_frac: 0.1,
            trials: 100,
            seed: 0,
            digest: DigestConfig::default(),
            max_rounds: 20,
        }
    }
}

impl Scenario {
    pub const KEYS: [&'static str; 10] = [
        "pulses",
        "p_noise",
        "eve_fraction",
        "passes",
        "sample_frac",
        "trials",
        "seed",
        "hash",
        "truncate_bits",
        "max_rounds",
    ];

    /// Parses flat `key=value` text. Blank lines and `#` comments are
    /// ignored; unknown keys are errors. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, QkdError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, QkdError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, QkdError> {
            v.parse().map_err(|_| QkdError::Domain(format!("{key}: cannot parse `{v}`")))
        }
        let mut s = Scenario::default();
        let mut hash = s.digest.hash;
        let mut truncate = None;
        for (k, v) in pairs {
            match k.as_str() {
                "pulses" => s.pulses = num(k, v)?,
                "p_noise" => s.model.p_noise = num(k, v)?,
                "eve_fraction" => s.model.eve_fraction = num(k, v)?,
                "passes" => s.passes = num(k, v)?,
                "sample_frac" => s.sample_frac = num(k, v)?,
                "trials" => s.trials = num(k, v)?,
                "seed" => s.seed = num(k, v)?,
                "hash" => hash = v.parse::<HashAlg>().map_err(|e| QkdError::Domain(e.to_string()))?,
                "truncate_bits" => truncate = Some(num(k, v)?),
                "max_rounds" => s.max_rounds = num(k, v)?,
                other => return Err(QkdError::Domain(format!("unknown scenario key `{other}`"))),
            }
        }
        s.digest = DigestConfig::new(hash, truncate.unwrap_or(hash.output_bits())).map_err(|e| QkdError::Domain(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), QkdError> {
        ChannelModel::new(self.model.p_noise, self.model.eve_fraction)?;
        self.digest.validate().map_err(|e| QkdError::Domain(e.to_string()))?;
        if self.pulses == 0 || self.trials == 0 || self.passes == 0 || self.max_rounds == 0 {
            return Err(QkdError::Domain("pulses, trials, passes and max_rounds must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sample_frac) {
            return Err(QkdError::Domain(format!("sample_frac = {} outside [0, 1)", self.sample_frac)));
        }
        Ok(())
    }
}

/// Splits scenario text into `key -> value`. Later lines override earlier
/// ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, QkdError> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| QkdError::Domain(format!("line {}: expected key=value", lineno + 1)))?;
        pairs.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Cascade,
    Digest,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Cascade => "cascade",
            Strategy::Digest => "digest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRow {
    pub strategy: Strategy,
    pub trial: usize,
    pub rounds: u32,
    pub disclosed_bits: u64,
    pub pulses: u64,
    pub key_bits: u64,
    pub residual_errors: u64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStats {
    pub trials: usize,
    pub mean_rounds: f64,
    pub mean_disclosed_bits: f64,
    /// Total pulses over total accepted key bits; the denominator is clamped
    /// to one when no key bits were accepted.
    pub pulses_per_accepted_bit: f64,
    /// Residual differing bits over accepted key bits.
    pub residual_error_rate: f64,
    pub acceptance_rate: f64,
    pub mean_pulses: f64,
    pub mean_key_bits: f64,
    pub mean_residual_errors: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub cascade: StrategyStats,
    pub digest: StrategyStats,
    pub rows: Vec<TrialRow>,
}

fn cascade_trial(scenario: &Scenario, trial: usize, rng: &mut Rng) -> Result<TrialRow, QkdError> {
    let (alice, bob_bases) = generate_round(scenario.pulses, rng);
    let bob_bits = channel_transmit(&alice, &bob_bases, &scenario.model, rng)?;
    let sifted = sift(&alice, &bob_bases, &bob_bits)?;
    let (hint, pair): (f64, SiftedPair) = if scenario.sample_frac > 0.0 && !sifted.is_empty() {
        estimate_qber(&sifted, scenario.sample_frac, rng)?
    } else {
        (0.0, sifted)
    };
    let cfg = CascadeConfig {
        passes: scenario.passes,
        qber_hint: hint,
        shuffle_seed: rng.next_u64(),
    };
    let result = cascade_reconcile(&pair, &cfg);
    let residual = result
        .corrected_bob_key
        .iter()
        .zip(&pair.alice_key)
        .filter(|(b, a)| b != a)
        .count();
    Ok(TrialRow {
        strategy: Strategy::Cascade,
        trial,
        rounds: 1,
        disclosed_bits: result.parities_disclosed as u64,
        pulses: scenario.pulses as u64,
        key_bits: pair.len() as u64,
        residual_errors: residual as u64,
        accepted: true,
    })
}

fn digest_trial(scenario: &Scenario, trial: usize, rng: &mut Rng) -> Result<TrialRow, QkdError> {
    let per_round = scenario.digest.truncate_bits as u64;
    match run_digest_protocol(scenario.pulses, &scenario.model, &scenario.digest, scenario.sample_frac, scenario.max_rounds, rng) {
        Ok(run) => Ok(TrialRow {
            strategy: Strategy::Digest,
            trial,
            rounds: run.rounds,
            disclosed_bits: per_round * run.rounds as u64,
            pulses: run.pulses_consumed,
            key_bits: run.accepted_key.len() as u64,
            residual_errors: run.accepted_key.iter().zip(&run.bob_key).filter(|(a, b)| a != b).count() as u64,
            accepted: true,
        }),
        Err(QkdError::NoKey { rounds, pulses }) => Ok(TrialRow {
            strategy: Strategy::Digest,
            trial,
            rounds,
            disclosed_bits: per_round * rounds as u64,
            pulses,
            key_bits: 0,
            residual_errors: 0,
            accepted: false,
        }),
        Err(e) => Err(e),
    }
}

fn stats(rows: &[&TrialRow]) -> StrategyStats {
    let n = rows.len().max(1) as f64;
    let sum = |f: &dyn Fn(&TrialRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>();
    let pulses = sum(&|r| r.pulses as f64);
    let key_bits = sum(&|r| r.key_bits as f64);
    let residual = sum(&|r| r.residual_errors as f64);
    StrategyStats {
        trials: rows.len(),
        mean_rounds: sum(&|r| r.rounds as f64) / n,
        mean_disclosed_bits: sum(&|r| r.disclosed_bits as f64) / n,
        pulses_per_accepted_bit: pulses / key_bits.max(1.0),
        residual_error_rate: residual / key_bits.max(1.0),
        acceptance_rate: sum(&|r| r.accepted as u8 as f64) / n,
        mean_pulses: pulses / n,
        mean_key_bits: key_bits / n,
        mean_residual_errors: residual / n,
    }
}

/// Runs both strategies for `scenario.trials` trials. Trial `i` draws its
/// cascade round from stream `seed ^ 2i` and its digest rounds from
/// `seed ^ (2i + 1)`, so results do not depend on scheduling.
pub fn compare_strategies(scenario: &Scenario) -> Result<StrategyReport, QkdError> {
    scenario.validate()?;
    let per_trial: Vec<(TrialRow, TrialRow)> = (0..scenario.trials)
        .into_par_iter()
        .map(|i| {
            let c = cascade_trial(scenario, i, &mut Rng::for_trial(scenario.seed, 2 * i as u64))?;
            let d = digest_trial(scenario, i, &mut Rng::for_trial(scenario.seed, 2 * i as u64 + 1))?;
            Ok((c, d))
        })
        .collect::<Result<_, QkdError>>()?;

    let mut rows: Vec<TrialRow> = per_trial.iter().map(|(c, _)| c.clone()).collect();
    rows.extend(per_trial.into_iter().map(|(_, d)| d));
    let cascade_rows: Vec<&TrialRow> = rows.iter().filter(|r| r.strategy == Strategy::Cascade).collect();
    let digest_rows: Vec<&TrialRow> = rows.iter().filter(|r| r.strategy == Strategy::Digest).collect();
    Ok(StrategyReport {
        cascade: stats(&cascade_rows),
        digest: stats(&digest_rows),
        rows,
    })
}

pub const CSV_HEADER: &str = "strategy,trial,rounds,disclosed_bits,pulses,key_bits,residual_errors,accepted";

impl StrategyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.strategy.name(),
                r.trial,
                r.rounds,
                r.disclosed_bits,
                r.pulses,
                r.key_bits,
                r.residual_errors,
                r.accepted as u8
            );
        }
        for (name, s) in [("cascade", &self.cascade), ("digest", &self.digest)] {
            let _ = writeln!(
                out,
                "{name},summary,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.mean_rounds, s.mean_disclosed_bits, s.mean_pulses, s.mean_key_bits, s.mean_residual_errors, s.acceptance_rate
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = [
            "strategy",
            "trials",
            "mean_rounds",
            "mean_disclosed_bits",
            "pulses_per_bit",
            "residual_error",
            "acceptance",
        ];
        let mut cells = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for (name, s) in [("cascade", &self.cascade), ("digest", &self.digest)] {
            cells.push(vec![
                name.to_string(),
                s.trials.to_string(),
                format!("{:.4}", s.mean_rounds),
                format!("{:.2}", s.mean_disclosed_bits),
                format!("{:.4}", s.pulses_per_accepted_bit),
                format!("{:.6}", s.residual_error_rate),
                format!("{:.4}", s.acceptance_rate),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}
