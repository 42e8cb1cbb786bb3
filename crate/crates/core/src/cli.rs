//! Command-line driver. Everything lives here so tests can call [`run`]
//! without spawning a process.
//!
//! Exit codes: 0 success, 1 protocol or integrity failure, 2 usage error,
//! 3 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngCore;
use thiserror::Error;

use crate::error::ProtocolError;
use crate::hashing::{DigestConfig, HashAlg};
use crate::numcore::{gen_dh, gen_rsa, nat, random_range, rand_residue, DhParams, Natural, Rng, RsaParams, RsaSecret};
use crate::p1::{p1_deposit, p1_init_with_r, AliceSecrets1, Variant1};
use crate::p2::{p2_deposit, p2_init_with_r, AliceSecrets2, Variant2};
use crate::qkdsim::report::parse_pairs;
use crate::qkdsim::{compare_strategies, Scenario};
use crate::session::tap::export_entries;
use crate::session::{
    run_exchange, run_pair, run_trope_session, ExchangeConfig, Recovered, Role, SessionError, SessionOutcome, Tamper, TcpTransport,
    TropeAlice, TropeBob, TropeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    Usage = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Failure(_) => ExitStatus::Failure,
            CliError::Io(_) => ExitStatus::Io,
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Transport(crate::session::TransportError::Io(io)) => CliError::Io(format!("transport: {io}")),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "piggybank", version, about = "Piggy-bank key transport protocols and a QKD reconciliation simulator")]
pub struct Cli {
    /// Seed for every random choice. Drawn from the OS (and reported on
    /// stderr) when neither this flag nor the environment sets it.
    #[arg(long, global = true, env = "PIGGYBANK_SEED")]
    pub seed: Option<u64>,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate RSA or discrete-log group parameters.
    Keygen(KeygenArgs),
    /// Run one Protocol 1 or Protocol 2 exchange.
    Exchange(ExchangeArgs),
    /// Run a Protocol 1 session followed by a sealed coded letter.
    Trope(TropeArgs),
    /// Compare cascade and digest reconciliation over seeded trials.
    Qkd(QkdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KeyKind {
    Rsa,
    Dh,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    pub kind: KeyKind,
    /// Modulus (rsa) or prime (dh) size in bits.
    #[arg(long)]
    pub bits: Option<u32>,
    /// RSA public exponent.
    #[arg(long, default_value_t = 65537)]
    pub e: u64,
    /// File for the private parameters (created with mode 0600 on Unix).
    /// Without it the private half is discarded.
    #[arg(long, value_name = "PATH")]
    pub secret_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Inproc,
    Listen,
    Connect,
}

/// RSA parameter sources shared by `exchange p1` and `trope`.
#[derive(Debug, Args, Clone)]
pub struct RsaSource {
    #[arg(long)]
    pub n: Option<Natural>,
    #[arg(long)]
    pub e: Option<Natural>,
    #[arg(long)]
    pub d: Option<Natural>,
    /// Private key file written by `keygen rsa --secret-out`.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["n", "d"])]
    pub key: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExchangeArgs {
    pub protocol: ProtocolArg,
    /// p1: base, v1, v2, v3, v4. p2: additive, multiplicative.
    #[arg(long)]
    pub variant: Option<String>,
    #[command(flatten)]
    pub rsa: RsaSource,
    #[arg(long)]
    pub p: Option<Natural>,
    #[arg(long)]
    pub g: Option<Natural>,
    /// Generate parameters of this size from the seed instead.
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long = "R")]
    pub r: Option<Natural>,
    #[arg(long = "S")]
    pub s: Option<Natural>,
    #[arg(long = "K")]
    pub k: Option<Natural>,
    #[arg(long, value_enum, default_value_t = Mode::Inproc)]
    pub mode: Mode,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub addr: String,
    /// Skip the closing acknowledgement.
    #[arg(long)]
    pub no_ack: bool,
}

#[derive(Debug, Args)]
pub struct TropeArgs {
    #[command(flatten)]
    pub rsa: RsaSource,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long = "R")]
    pub r: Option<Natural>,
    #[arg(long = "S")]
    pub s: Option<Natural>,
    #[arg(long = "K")]
    pub k: Option<Natural>,
    #[arg(long, default_value = "sealed deposit")]
    pub description: String,
    #[arg(long, default_value = "sha256")]
    pub hash: String,
    #[arg(long)]
    pub truncate_bits: Option<u32>,
    /// Flip one bit on the way to Bob, as FRAME:BIT (bit 0 is the most
    /// significant bit of the first byte). Repeatable.
    #[arg(long, value_name = "FRAME:BIT")]
    pub tamper_bit: Vec<String>,
}

#[derive(Debug, Args)]
pub struct QkdArgs {
    /// Scenario file of `key=value` lines. Flags override its entries.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub pulses: Option<String>,
    #[arg(long)]
    pub p_noise: Option<String>,
    #[arg(long)]
    pub eve_fraction: Option<String>,
    #[arg(long)]
    pub passes: Option<String>,
    #[arg(long)]
    pub sample_frac: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub hash: Option<String>,
    #[arg(long)]
    pub truncate_bits: Option<String>,
    #[arg(long)]
    pub max_rounds: Option<String>,
    /// Write per-trial rows and summaries as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Main output goes
/// to `out` unless `--out` names a file; diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return ExitStatus::Success;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            let _ = writeln!(err, "{first} (see `piggybank --help`)");
            return ExitStatus::Usage;
        }
    };
    let mut text = String::new();
    let mut drawn_seed = None;
    let result = dispatch(&cli, &mut text, &mut drawn_seed, err).and_then(|()| emit(&cli, &text, out));
    // a usage error stays a single line
    if let (Some(s), false) = (drawn_seed, matches!(result, Err(CliError::Usage(_)))) {
        let _ = writeln!(err, "seed={s}");
    }
    match result {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            // print what was produced before the failure, then the diagnostic
            if !text.is_empty() {
                let _ = emit(&cli, &text, out);
            }
            let _ = writeln!(err, "error: {e}");
            e.status()
        }
    }
}

fn emit(cli: &Cli, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn dispatch(cli: &Cli, out: &mut String, drawn_seed: &mut Option<u64>, err: &mut dyn Write) -> Result<(), CliError> {
    let seed = match (&cli.command, cli.seed) {
        (_, Some(s)) => Some(s),
        (Command::Qkd(_), None) => None,
        (_, None) => {
            let s = rand::rng().next_u64();
            *drawn_seed = Some(s);
            Some(s)
        }
    };
    match &cli.command {
        Command::Keygen(a) => cmd_keygen(a, seed.unwrap_or(0), out),
        Command::Exchange(a) => cmd_exchange(a, seed.unwrap_or(0), out, err),
        Command::Trope(a) => cmd_trope(a, seed.unwrap_or(0), out),
        Command::Qkd(a) => cmd_qkd(a, seed, out),
    }
}

// ---------------------------------------------------------------------------
// keygen
// ---------------------------------------------------------------------------

const MAX_BITS: u32 = 8192;

fn check_bits(bits: u32, min: u32, what: &str) -> Result<u32, CliError> {
    if bits < min || bits > MAX_BITS {
        return Err(usage(format!("--bits {bits}: {what} needs between {min} and {MAX_BITS} bits")));
    }
    Ok(bits)
}

fn check_e(e: &Natural) -> Result<(), CliError> {
    if e < &nat(3) || !e.bit(0) {
        return Err(usage(format!("--e {e}: public exponent must be odd and at least 3")));
    }
    Ok(())
}

fn write_secret(path: &Path, body: &str) -> Result<(), CliError> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(|e| io_err(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| io_err(path, e))
}

fn cmd_keygen(a: &KeygenArgs, seed: u64, out: &mut String) -> Result<(), CliError> {
    let mut rng = Rng::from_seed(seed);
    match a.kind {
        KeyKind::Rsa => {
            let bits = check_bits(a.bits.unwrap_or(2048), 8, "an RSA modulus")?;
            let e = nat(a.e);
            check_e(&e)?;
            let (params, secret) = gen_rsa(bits, &e, &mut rng).map_err(|e| CliError::Failure(e.to_string()))?;
            let _ = writeln!(out, "n={}\ne={}", params.n, params.e);
            if let Some(path) = &a.secret_out {
                let body = format!("n={}\ne={}\nd={}\np={}\nq={}\n", params.n, params.e, secret.d, secret.p, secret.q);
                write_secret(path, &body)?;
            }
        }
        KeyKind::Dh => {
            let bits = check_bits(a.bits.unwrap_or(512), 4, "a safe prime")?;
            let params = gen_dh(bits, &mut rng).map_err(|e| CliError::Failure(e.to_string()))?;
            let _ = writeln!(out, "p={}\ng={}", params.p, params.g);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// parameter resolution
// ---------------------------------------------------------------------------

/// Stream for parameter generation; both ends of a TCP run derive the same
/// parameters from the same seed.
fn params_rng(seed: u64) -> Rng {
    Rng::for_trial(seed, 0x7061_7261)
}

/// Stream for Alice's sampled secrets.
fn secrets_rng(seed: u64) -> Rng {
    Rng::for_trial(seed, 0x7365_6372)
}

fn read_key_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_pairs(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn key_field(fields: &BTreeMap<String, String>, name: &str, path: &Path) -> Result<Natural, CliError> {
    fields
        .get(name)
        .ok_or_else(|| usage(format!("{}: missing `{name}`", path.display())))?
        .parse()
        .map_err(|_| usage(format!("{}: `{name}` is not a number", path.display())))
}

/// Full key pair, for Bob. `bits` generates one from the seed.
fn resolve_rsa_secret(src: &RsaSource, bits: Option<u32>, seed: u64) -> Result<(RsaParams, RsaSecret), CliError> {
    if let Some(path) = &src.key {
        let f = read_key_file(path)?;
        let (n, e, d) = (key_field(&f, "n", path)?, key_field(&f, "e", path)?, key_field(&f, "d", path)?);
        return RsaSecret::from_exponents(&n, &e, &d).map_err(|e| usage(format!("{}: {e}", path.display())));
    }
    match (&src.n, &src.e, &src.d, bits) {
        (Some(n), Some(e), Some(d), None) => RsaSecret::from_exponents(n, e, d).map_err(|e| usage(format!("--n/--e/--d: {e}"))),
        (None, e, None, Some(bits)) => {
            let bits = check_bits(bits, 8, "an RSA modulus")?;
            let e = e.clone().unwrap_or_else(|| nat(65537));
            check_e(&e)?;
            gen_rsa(bits, &e, &mut params_rng(seed)).map_err(|e| CliError::Failure(e.to_string()))
        }
        _ => Err(usage("give --n, --e and --d, or --key, or --bits")),
    }
}

/// Public half only, for Alice.
fn resolve_rsa_public(src: &RsaSource, bits: Option<u32>, seed: u64) -> Result<RsaParams, CliError> {
    match (&src.n, &src.e, &src.d, &src.key, bits) {
        (Some(n), Some(e), None, None, None) => {
            check_e(e)?;
            if n < &nat(6) {
                return Err(usage(format!("--n {n}: modulus too small")));
            }
            Ok(RsaParams { n: n.clone(), e: e.clone() })
        }
        _ => resolve_rsa_secret(src, bits, seed).map(|(p, _)| p),
    }
}

fn resolve_dh(a: &ExchangeArgs, seed: u64) -> Result<DhParams, CliError> {
    match (&a.p, &a.g, a.bits) {
        (Some(p), Some(g), None) => DhParams::new(p.clone(), g.clone()).map_err(|e| usage(format!("--p/--g: {e}"))),
        (None, None, Some(bits)) => {
            let bits = check_bits(bits, 4, "a safe prime")?;
            gen_dh(bits, &mut params_rng(seed)).map_err(|e| CliError::Failure(e.to_string()))
        }
        _ => Err(usage("give --p and --g, or --bits")),
    }
}

fn sample_p1_secrets(params: &RsaParams, s: &Option<Natural>, k: &Option<Natural>, seed: u64) -> Result<AliceSecrets1, CliError> {
    let mut rng = secrets_rng(seed);
    let s = match s {
        Some(s) => s.clone(),
        None => rand_residue(&params.n, true, &mut rng).map_err(|e| CliError::Failure(e.to_string()))?,
    };
    let k = match k {
        Some(k) => k.clone(),
        None => random_range(&nat(1), &(&params.n - 1u32), &mut rng),
    };
    Ok(AliceSecrets1::new(s, k))
}

fn sample_p2_secrets(params: &DhParams, s: &Option<Natural>, k: &Option<Natural>, seed: u64) -> AliceSecrets2 {
    let mut rng = secrets_rng(seed);
    let s = s.clone().unwrap_or_else(|| random_range(&nat(1), &(&params.p - 2u32), &mut rng));
    let k = k.clone().unwrap_or_else(|| random_range(&nat(1), &(&params.p - 1u32), &mut rng));
    AliceSecrets2::new(s, k)
}

fn flag_error(e: ProtocolError) -> CliError {
    usage(e.to_string())
}

// ---------------------------------------------------------------------------
// exchange
// ---------------------------------------------------------------------------

fn cmd_exchange(a: &ExchangeArgs, seed: u64, out: &mut String, err: &mut dyn Write) -> Result<(), CliError> {
    let (bob, alice) = build_roles(a, seed)?;
    let cfg = ExchangeConfig { ack: !a.no_ack };
    match a.mode {
        Mode::Inproc => {
            let (b, al) = run_pair(&bob, &alice, seed, &cfg);
            let bob_outcome = b?;
            let alice_outcome = al?;
            report_bob(&bob_outcome, out);
            check_shared(&bob_outcome, &alice_outcome)
        }
        Mode::Listen => {
            let listener = TcpListener::bind(&a.addr).map_err(|e| CliError::Io(format!("{}: {e}", a.addr)))?;
            let local = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
            let _ = writeln!(err, "listening on {local}");
            let _ = err.flush();
            let transport = TcpTransport::accept(&listener).map_err(|e| CliError::Io(e.to_string()))?;
            let outcome = run_exchange(&bob, transport, &mut Rng::from_seed(seed), &cfg)?;
            report_bob(&outcome, out);
            Ok(())
        }
        Mode::Connect => {
            let transport = TcpTransport::connect_with_retry(&a.addr, Duration::from_secs(10)).map_err(|e| CliError::Io(format!("{}: {e}", a.addr)))?;
            let outcome = run_exchange(&alice, transport, &mut Rng::from_seed(seed.wrapping_add(1)), &cfg)?;
            report_alice(&alice, &outcome, out);
            Ok(())
        }
    }
}

fn build_roles(a: &ExchangeArgs, seed: u64) -> Result<(Role, Role), CliError> {
    match a.protocol {
        ProtocolArg::P1 => {
            if a.p.is_some() || a.g.is_some() {
                return Err(usage("--p/--g apply to p2 only"));
            }
            let variant: Variant1 = a.variant.as_deref().unwrap_or("base").parse().map_err(|_| usage(format!("unknown p1 variant `{}`", a.variant.as_deref().unwrap_or(""))))?;
            // Alice only needs the public half; Bob needs the trapdoor.
            let (params, secret) = match a.mode {
                Mode::Connect => (resolve_rsa_public(&a.rsa, a.bits, seed)?, None),
                _ => {
                    let (p, s) = resolve_rsa_secret(&a.rsa, a.bits, seed)?;
                    (p, Some(s))
                }
            };
            let secrets = sample_p1_secrets(&params, &a.s, &a.k, seed)?;
            let probe = match &secret {
                Some(secret) => {
                    let r = a.r.clone().unwrap_or_else(|| nat(1));
                    p1_init_with_r(&params, secret, variant, r).map_err(flag_error)?.challenge_sent
                }
                None => nat(1),
            };
            p1_deposit(&params, variant, &probe, &secrets).map_err(flag_error)?;
            let bob = match secret {
                Some(secret) => Role::BobP1 { variant, params: params.clone(), secret, r: a.r.clone() },
                // placeholder; never run on the connecting side
                None => Role::AliceP1 { variant, params: params.clone(), secrets: secrets.clone() },
            };
            Ok((bob, Role::AliceP1 { variant, params, secrets }))
        }
        ProtocolArg::P2 => {
            if a.rsa.n.is_some() || a.rsa.e.is_some() || a.rsa.d.is_some() || a.rsa.key.is_some() {
                return Err(usage("--n/--e/--d/--key apply to p1 only"));
            }
            let variant: Variant2 = a.variant.as_deref().unwrap_or("additive").parse().map_err(|_| usage(format!("unknown p2 variant `{}`", a.variant.as_deref().unwrap_or(""))))?;
            let params = resolve_dh(a, seed)?;
            let secrets = sample_p2_secrets(&params, &a.s, &a.k, seed);
            if let Some(r) = &a.r {
                p2_init_with_r(&params, r.clone()).map_err(flag_error)?;
            }
            match p2_deposit(&params, variant, &params.g, &secrets) {
                Ok(_) | Err(ProtocolError::Degenerate(_)) => {}
                Err(e) => return Err(flag_error(e)),
            }
            Ok((
                Role::BobP2 { variant, params: params.clone(), r: a.r.clone() },
                Role::AliceP2 { variant, params, secrets },
            ))
        }
    }
}

fn opt(x: &Option<Natural>) -> String {
    x.as_ref().map_or_else(|| "-".to_string(), Natural::to_string)
}

fn report_bob(outcome: &SessionOutcome, out: &mut String) {
    match &outcome.recovered {
        Some(Recovered::P1(r)) => {
            let _ = writeln!(out, "S={} K={}", opt(&r.s), opt(&r.k));
        }
        Some(Recovered::P2(o)) => {
            let _ = writeln!(out, "K={} shared={}", o.k, o.shared);
        }
        None => {}
    }
    out.push_str(&export_entries(&outcome.transcript));
}

fn report_alice(alice: &Role, outcome: &SessionOutcome, out: &mut String) {
    match alice {
        Role::AliceP1 { secrets, .. } => {
            let _ = writeln!(out, "S={} K={}", secrets.s, secrets.k);
        }
        Role::AliceP2 { secrets, .. } => {
            let _ = writeln!(out, "K={} shared={}", secrets.k, opt(&outcome.alice_shared));
        }
        _ => {}
    }
    out.push_str(&export_entries(&outcome.transcript));
}

fn check_shared(bob: &SessionOutcome, alice: &SessionOutcome) -> Result<(), CliError> {
    if let (Some(Recovered::P2(o)), Some(a)) = (&bob.recovered, &alice.alice_shared) {
        if &o.shared != a {
            return Err(CliError::Failure(format!("shared values differ: bob {} alice {a}", o.shared)));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// trope
// ---------------------------------------------------------------------------

fn parse_tamper(arg: &str) -> Result<Tamper, CliError> {
    let (f, b) = arg
        .split_once(':')
        .ok_or_else(|| usage(format!("--tamper-bit {arg}: expected FRAME:BIT")))?;
    let frame = f.parse().map_err(|_| usage(format!("--tamper-bit {arg}: bad frame index")))?;
    let bit = b.parse().map_err(|_| usage(format!("--tamper-bit {arg}: bad bit index")))?;
    Ok(Tamper::bit(frame, bit))
}

fn cmd_trope(a: &TropeArgs, seed: u64, out: &mut String) -> Result<(), CliError> {
    let hash: HashAlg = a.hash.parse().map_err(|e: crate::hashing::DigestConfigError| usage(e.to_string()))?;
    let digest = DigestConfig::new(hash, a.truncate_bits.unwrap_or(hash.output_bits())).map_err(|e| usage(e.to_string()))?;
    let tampers = a.tamper_bit.iter().map(|t| parse_tamper(t)).collect::<Result<Vec<_>, _>>()?;
    let (params, secret) = resolve_rsa_secret(&a.rsa, a.bits, seed)?;
    let secrets = sample_p1_secrets(&params, &a.s, &a.k, seed)?;
    let r = a.r.clone().unwrap_or_else(|| nat(1));
    let probe = p1_init_with_r(&params, &secret, Variant1::Base, r).map_err(flag_error)?.challenge_sent;
    p1_deposit(&params, Variant1::Base, &probe, &secrets).map_err(flag_error)?;

    let bob = TropeBob { params: params.clone(), secret, r: a.r.clone() };
    let alice = TropeAlice {
        params,
        s: secrets.s,
        description: a.description.clone(),
        k: Some(secrets.k),
    };
    let cfg = TropeConfig { digest, ack: true };
    let (b, _alice, log) = run_trope_session(&bob, &alice, seed, &cfg, tampers);
    let transcript = log.export();
    let outcome = match b {
        Ok(o) => o,
        Err(e) => {
            out.push_str(&transcript);
            return Err(e.into());
        }
    };
    if let Some(Recovered::P1(r)) = &outcome.recovered {
        let _ = writeln!(out, "S={} K={}", opt(&r.s), opt(&r.k));
    }
    let ok = outcome.manifest_ok == Some(true);
    let _ = writeln!(out, "manifest_ok={ok}");
    if let Some(m) = &outcome.manifest {
        let _ = writeln!(out, "description={}", m.content_description);
    }
    out.push_str(&transcript);
    if ok {
        Ok(())
    } else {
        Err(CliError::Failure("coded letter failed verification".into()))
    }
}

// ---------------------------------------------------------------------------
// qkd
// ---------------------------------------------------------------------------

fn cmd_qkd(a: &QkdArgs, seed: Option<u64>, out: &mut String) -> Result<(), CliError> {
    let mut pairs = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_pairs(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => BTreeMap::new(),
    };
    let flags = [
        ("pulses", &a.pulses),
        ("p_noise", &a.p_noise),
        ("eve_fraction", &a.eve_fraction),
        ("passes", &a.passes),
        ("sample_frac", &a.sample_frac),
        ("trials", &a.trials),
        ("hash", &a.hash),
        ("truncate_bits", &a.truncate_bits),
        ("max_rounds", &a.max_rounds),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            pairs.insert(key.to_string(), v.clone());
        }
    }
    if let Some(s) = seed {
        pairs.insert("seed".into(), s.to_string());
    }
    let scenario = Scenario::from_pairs(&pairs).map_err(|e| usage(e.to_string()))?;
    let report = compare_strategies(&scenario).map_err(|e| CliError::Failure(e.to_string()))?;
    out.push_str(&report.to_table());
    if let Some(path) = &a.csv {
        fs::write(path, report.to_csv()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
