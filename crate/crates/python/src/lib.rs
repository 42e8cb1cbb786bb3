//! Python bindings for `piggybank-core`.
//!
//! Integers cross the boundary as Python `int`; protocol variants are passed
//! by name (`"base"`, `"v1"` .. `"v4"`, `"additive"`, `"multiplicative"`).

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use piggybank::error::ProtocolError as CoreProtocolError;
use piggybank::numcore::{self, DhParams, Natural, Rng, RsaParams, RsaSecret};
use piggybank::p1::{self, AliceSecrets1, BobState1, Response1, Variant1};
use piggybank::p2::{self, AliceSecrets2, BobState2, Response2, Variant2};
use piggybank::qkdsim::{self, Scenario, StrategyStats};
use piggybank::session::tap::export_entries;
use piggybank::session::{self, ExchangeConfig, Message, MessageKind, ProtocolId, Recovered, Role, Tamper};

create_exception!(piggybank, ProtocolError, PyException, "A protocol run failed an integrity or consistency check.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn protocol_err(e: CoreProtocolError) -> PyErr {
    match e {
        CoreProtocolError::Domain(_) | CoreProtocolError::Num(_) => value_err(e),
        other => ProtocolError::new_err(other.to_string()),
    }
}

fn variant1(name: &str) -> PyResult<Variant1> {
    name.parse().map_err(|_| value_err(format!("unknown protocol 1 variant `{name}`")))
}

fn variant2(name: &str) -> PyResult<Variant2> {
    name.parse().map_err(|_| value_err(format!("unknown protocol 2 variant `{name}`")))
}

fn transcript_lines(entries: &[session::TapEntry]) -> Vec<String> {
    export_entries(entries).lines().map(str::to_string).collect()
}

/// RSA key pair for Protocol 1.
#[pyclass(name = "RsaKey", frozen, module = "piggybank")]
pub struct PyRsaKey {
    params: RsaParams,
    secret: RsaSecret,
}

#[pymethods]
impl PyRsaKey {
    /// Rebuilds the key from `(n, e, d)`, factoring `n` on the way.
    #[staticmethod]
    fn from_exponents(n: Natural, e: Natural, d: Natural) -> PyResult<Self> {
        let (params, secret) = RsaSecret::from_exponents(&n, &e, &d).map_err(value_err)?;
        Ok(Self { params, secret })
    }

    /// n = 51, e = 3, d = 11.
    #[staticmethod]
    fn desk() -> Self {
        let (params, secret) = p1::desk_params();
        Self { params, secret }
    }

    #[getter]
    fn n(&self) -> Natural {
        self.params.n.clone()
    }

    #[getter]
    fn e(&self) -> Natural {
        self.params.e.clone()
    }

    #[getter]
    fn d(&self) -> Natural {
        self.secret.d.clone()
    }

    #[getter]
    fn p(&self) -> Natural {
        self.secret.p.clone()
    }

    #[getter]
    fn q(&self) -> Natural {
        self.secret.q.clone()
    }

    fn __repr__(&self) -> String {
        format!("RsaKey(n={}, e={})", self.params.n, self.params.e)
    }
}

/// Prime-order-subgroup parameters for Protocol 2.
#[pyclass(name = "DhGroup", frozen, module = "piggybank")]
pub struct PyDhGroup {
    params: DhParams,
}

#[pymethods]
impl PyDhGroup {
    #[new]
    fn new(p: Natural, g: Natural) -> PyResult<Self> {
        Ok(Self { params: DhParams::new(p, g).map_err(value_err)? })
    }

    /// p = 37, g = 2.
    #[staticmethod]
    fn desk() -> Self {
        Self { params: p2::desk_params() }
    }

    #[getter]
    fn p(&self) -> Natural {
        self.params.p.clone()
    }

    #[getter]
    fn g(&self) -> Natural {
        self.params.g.clone()
    }

    fn __repr__(&self) -> String {
        format!("DhGroup(p={}, g={})", self.params.p, self.params.g)
    }
}

#[pyfunction]
fn mod_exp(base: Natural, exp: Natural, modulus: Natural) -> PyResult<Natural> {
    numcore::mod_exp(&base, &exp, &modulus).map_err(value_err)
}

#[pyfunction]
fn mod_inv(a: Natural, m: Natural) -> PyResult<Natural> {
    numcore::mod_inv(&a, &m).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (n, rounds = 32))]
fn is_probable_prime(n: Natural, rounds: u32) -> bool {
    numcore::is_probable_prime(&n, rounds)
}

#[pyfunction]
#[pyo3(signature = (bits, e = 65537, seed = 0))]
fn gen_rsa(py: Python<'_>, bits: u32, e: u64, seed: u64) -> PyResult<PyRsaKey> {
    let (params, secret) = py
        .detach(|| numcore::gen_rsa(bits, &Natural::from(e), &mut Rng::from_seed(seed)))
        .map_err(value_err)?;
    Ok(PyRsaKey { params, secret })
}

#[pyfunction]
#[pyo3(signature = (bits, seed = 0))]
fn gen_dh(py: Python<'_>, bits: u32, seed: u64) -> PyResult<PyDhGroup> {
    let params = py.detach(|| numcore::gen_dh(bits, &mut Rng::from_seed(seed))).map_err(value_err)?;
    Ok(PyDhGroup { params })
}

fn bob1(key: &PyRsaKey, variant: &str, r: Natural) -> PyResult<BobState1> {
    p1::p1_init_with_r(&key.params, &key.secret, variant1(variant)?, r).map_err(protocol_err)
}

/// Bob's challenge for a chosen `r`.
#[pyfunction]
fn p1_challenge(key: &PyRsaKey, variant: &str, r: Natural) -> PyResult<Natural> {
    Ok(bob1(key, variant, r)?.challenge_sent)
}

/// Alice's `(deposit, letter)`; needs only the public `(n, e)`.
#[pyfunction]
fn p1_deposit(n: Natural, e: Natural, variant: &str, challenge: Natural, s: Natural, k: Natural) -> PyResult<(Natural, Natural)> {
    let params = RsaParams { n, e };
    let r = p1::p1_deposit(&params, variant1(variant)?, &challenge, &AliceSecrets1::new(s, k)).map_err(protocol_err)?;
    Ok((r.deposit, r.letter))
}

/// Bob's `(S, K)`; `K` is `None` for the multiplicative variant.
#[pyfunction]
fn p1_recover(key: &PyRsaKey, variant: &str, r: Natural, deposit: Natural, letter: Natural) -> PyResult<(Option<Natural>, Option<Natural>)> {
    let state = bob1(key, variant, r)?;
    let rec = p1::p1_recover(&state, &Response1 { deposit, letter }).map_err(protocol_err)?;
    Ok((rec.s, rec.k))
}

fn bob2(group: &PyDhGroup, r: Natural) -> PyResult<BobState2> {
    p2::p2_init_with_r(&group.params, r).map_err(protocol_err)
}

#[pyfunction]
fn p2_challenge(group: &PyDhGroup, r: Natural) -> PyResult<Natural> {
    Ok(bob2(group, r)?.challenge_sent)
}

#[pyfunction]
fn p2_deposit(group: &PyDhGroup, variant: &str, challenge: Natural, s: Natural, k: Natural) -> PyResult<(Natural, Natural)> {
    let r = p2::p2_deposit(&group.params, variant2(variant)?, &challenge, &AliceSecrets2::new(s, k)).map_err(protocol_err)?;
    Ok((r.deposit, r.letter))
}

/// Bob's `(K, shared)`.
#[pyfunction]
fn p2_recover(group: &PyDhGroup, variant: &str, r: Natural, deposit: Natural, letter: Natural) -> PyResult<(Natural, Natural)> {
    let state = bob2(group, r)?;
    let out = p2::p2_recover(&state, variant2(variant)?, &Response2 { deposit, letter }).map_err(protocol_err)?;
    Ok((out.k, out.shared))
}

fn session_err(e: session::SessionError) -> PyErr {
    match e {
        session::SessionError::Protocol(p) => protocol_err(p),
        other => ProtocolError::new_err(other.to_string()),
    }
}

/// Runs a full in-memory Protocol 1 session and returns Bob's view.
#[pyfunction]
#[pyo3(signature = (key, variant, s, k, r = None, seed = 0))]
fn exchange_p1<'py>(
    py: Python<'py>,
    key: &PyRsaKey,
    variant: &str,
    s: Natural,
    k: Natural,
    r: Option<Natural>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = variant1(variant)?;
    let bob = Role::BobP1 { variant, params: key.params.clone(), secret: key.secret.clone(), r };
    let alice = Role::AliceP1 { variant, params: key.params.clone(), secrets: AliceSecrets1::new(s, k) };
    let (b, a) = py.detach(|| session::run_pair(&bob, &alice, seed, &ExchangeConfig::default()));
    let b = b.map_err(session_err)?;
    a.map_err(session_err)?;
    let out = PyDict::new(py);
    if let Some(Recovered::P1(rec)) = &b.recovered {
        out.set_item("s", rec.s.clone())?;
        out.set_item("k", rec.k.clone())?;
    }
    out.set_item("transcript", transcript_lines(&b.transcript))?;
    Ok(out)
}

/// Runs a full in-memory Protocol 2 session.
#[pyfunction]
#[pyo3(signature = (group, variant, s, k, r = None, seed = 0))]
fn exchange_p2<'py>(
    py: Python<'py>,
    group: &PyDhGroup,
    variant: &str,
    s: Natural,
    k: Natural,
    r: Option<Natural>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = variant2(variant)?;
    let bob = Role::BobP2 { variant, params: group.params.clone(), r };
    let alice = Role::AliceP2 { variant, params: group.params.clone(), secrets: AliceSecrets2::new(s, k) };
    let (b, a) = py.detach(|| session::run_pair(&bob, &alice, seed, &ExchangeConfig::default()));
    let (b, a) = (b.map_err(session_err)?, a.map_err(session_err)?);
    let out = PyDict::new(py);
    if let Some(Recovered::P2(o)) = &b.recovered {
        out.set_item("k", o.k.clone())?;
        out.set_item("shared", o.shared.clone())?;
    }
    out.set_item("alice_shared", a.alice_shared)?;
    out.set_item("transcript", transcript_lines(&b.transcript))?;
    Ok(out)
}

/// Protocol 1 plus the sealed coded letter. `tamper_bits` lists
/// `(frame, bit)` flips applied on the way to Bob.
#[pyfunction]
#[pyo3(signature = (key, s, description, k = None, r = None, seed = 0, tamper_bits = Vec::new()))]
#[allow(clippy::too_many_arguments)]
fn trope<'py>(
    py: Python<'py>,
    key: &PyRsaKey,
    s: Natural,
    description: String,
    k: Option<Natural>,
    r: Option<Natural>,
    seed: u64,
    tamper_bits: Vec<(usize, usize)>,
) -> PyResult<Bound<'py, PyDict>> {
    let bob = session::TropeBob { params: key.params.clone(), secret: key.secret.clone(), r };
    let alice = session::TropeAlice { params: key.params.clone(), s, description, k };
    let tampers = tamper_bits.into_iter().map(|(f, b)| Tamper::bit(f, b)).collect();
    let (b, _, log) = py.detach(|| session::run_trope_session(&bob, &alice, seed, &session::TropeConfig::default(), tampers));
    let b = b.map_err(session_err)?;
    let out = PyDict::new(py);
    out.set_item("manifest_ok", b.manifest_ok)?;
    out.set_item("description", b.manifest.map(|m| m.content_description))?;
    out.set_item("transcript", transcript_lines(&log.entries()))?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (protocol, kind, fields, blob = Vec::new()))]
fn encode_message<'py>(py: Python<'py>, protocol: u8, kind: u8, fields: Vec<Natural>, blob: Vec<u8>) -> PyResult<Bound<'py, PyBytes>> {
    let protocol = ProtocolId::from_byte(protocol).ok_or_else(|| value_err(format!("unknown protocol id {protocol}")))?;
    let kind = MessageKind::from_byte(kind).ok_or_else(|| value_err(format!("unknown message kind {kind}")))?;
    let bytes = session::encode_msg(&Message::new(protocol, kind, fields).with_blob(blob)).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Returns `(protocol, kind, fields, blob)`.
#[pyfunction]
fn decode_message<'py>(py: Python<'py>, data: &[u8]) -> PyResult<(u8, u8, Vec<Natural>, Bound<'py, PyBytes>)> {
    let m = session::decode_msg(data).map_err(value_err)?;
    Ok((m.protocol as u8, m.kind as u8, m.fields, PyBytes::new(py, &m.blob)))
}

fn stats_dict<'py>(py: Python<'py>, s: &StrategyStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trials", s.trials)?;
    d.set_item("mean_rounds", s.mean_rounds)?;
    d.set_item("mean_disclosed_bits", s.mean_disclosed_bits)?;
    d.set_item("pulses_per_accepted_bit", s.pulses_per_accepted_bit)?;
    d.set_item("residual_error_rate", s.residual_error_rate)?;
    d.set_item("acceptance_rate", s.acceptance_rate)?;
    Ok(d)
}

/// Runs the cascade/digest comparison for a scenario given as `key=value`
/// text. Returns per-strategy summaries plus the CSV and table renderings.
#[pyfunction]
fn compare_strategies<'py>(py: Python<'py>, scenario: &str) -> PyResult<Bound<'py, PyDict>> {
    let scenario = Scenario::parse(scenario).map_err(value_err)?;
    let report = py.detach(|| qkdsim::compare_strategies(&scenario)).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("cascade", stats_dict(py, &report.cascade)?)?;
    out.set_item("digest", stats_dict(py, &report.digest)?)?;
    out.set_item("csv", report.to_csv())?;
    out.set_item("table", report.to_table())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "piggybank")]
fn piggybank_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ProtocolError", m.py().get_type::<ProtocolError>())?;
    m.add_class::<PyRsaKey>()?;
    m.add_class::<PyDhGroup>()?;
    m.add_function(wrap_pyfunction!(mod_exp, m)?)?;
    m.add_function(wrap_pyfunction!(mod_inv, m)?)?;
    m.add_function(wrap_pyfunction!(is_probable_prime, m)?)?;
    m.add_function(wrap_pyfunction!(gen_rsa, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dh, m)?)?;
    m.add_function(wrap_pyfunction!(p1_challenge, m)?)?;
    m.add_function(wrap_pyfunction!(p1_deposit, m)?)?;
    m.add_function(wrap_pyfunction!(p1_recover, m)?)?;
    m.add_function(wrap_pyfunction!(p2_challenge, m)?)?;
    m.add_function(wrap_pyfunction!(p2_deposit, m)?)?;
    m.add_function(wrap_pyfunction!(p2_recover, m)?)?;
    m.add_function(wrap_pyfunction!(exchange_p1, m)?)?;
    m.add_function(wrap_pyfunction!(exchange_p2, m)?)?;
    m.add_function(wrap_pyfunction!(trope, m)?)?;
    m.add_function(wrap_pyfunction!(encode_message, m)?)?;
    m.add_function(wrap_pyfunction!(decode_message, m)?)?;
    m.add_function(wrap_pyfunction!(compare_strategies, m)?)?;
    Ok(())
}
