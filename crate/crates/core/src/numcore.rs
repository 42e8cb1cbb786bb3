//! Modular arithmetic, primality testing and parameter generation.
//!
//! Every protocol value is a [`Natural`] living in a residue ring. The
//! arithmetic kernels (`mod_exp`, `mod_inv`, Miller–Rabin) are written out
//! here; `num-bigint` only supplies the limb storage and schoolbook
//! multiply/divide underneath.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Arbitrary-precision nonnegative integer.
pub type Natural = BigUint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value is not invertible (gcd = {gcd})")]
    NotInvertible { gcd: Natural },
}

pub type Result<T> = std::result::Result<T, NumError>;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(NumError::Domain(msg.into()))
}

pub fn nat(v: u64) -> Natural {
    Natural::from(v)
}

/// Minimal big-endian magnitude bytes. Zero encodes as the empty string.
pub fn to_canonical_bytes(x: &Natural) -> Vec<u8> {
    if x.is_zero() {
        Vec::new()
    } else {
        x.to_bytes_be()
    }
}

pub fn from_be_bytes(bytes: &[u8]) -> Natural {
    Natural::from_bytes_be(bytes)
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

/// Seedable deterministic generator. Same seed, same stream.
#[derive(Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    /// Independent stream for trial `index`, keyed on `seed ^ index`.
    pub fn for_trial(seed: u64, index: u64) -> Self {
        Self::from_seed(seed ^ index)
    }
}

impl fmt::Debug for Rng {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rng")
            .field("seed", &self.seed)
            .field("algorithm", &Self::ALGORITHM)
            .finish()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Uniform value in `[0, bound)` by rejection sampling on `bits(bound)`-bit
/// candidates.
pub fn random_below(bound: &Natural, rng: &mut Rng) -> Natural {
    assert!(!bound.is_zero(), "random_below: empty range");
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let excess = (nbytes as u64) * 8 - bits;
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = Natural::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Uniform value in `[lo, hi]`.
pub fn random_range(lo: &Natural, hi: &Natural, rng: &mut Rng) -> Natural {
    assert!(lo <= hi, "random_range: empty range");
    let span = hi - lo + 1u32;
    lo + random_below(&span, rng)
}

/// Uniform odd value with exactly `bits` bits (top bit set).
fn random_odd_with_bits(bits: u64, rng: &mut Rng) -> Natural {
    let lo = Natural::one() << (bits - 1);
    let mut x = &lo + random_below(&lo, rng);
    x.set_bit(0, true);
    x
}

// ---------------------------------------------------------------------------
// Modular arithmetic
// ---------------------------------------------------------------------------

/// `base^exp mod modulus` by left-to-right square-and-multiply.
pub fn mod_exp(base: &Natural, exp: &Natural, modulus: &Natural) -> Result<Natural> {
    if modulus < &nat(2) {
        return domain("mod_exp: modulus must be at least 2");
    }
    let base = base % modulus;
    let mut acc = Natural::one();
    for i in (0..exp.bits()).rev() {
        acc = (&acc * &acc) % modulus;
        if exp.bit(i) {
            acc = (&acc * &base) % modulus;
        }
    }
    Ok(acc)
}

/// Inverse of `a` modulo `m` via the extended Euclidean algorithm.
pub fn mod_inv(a: &Natural, m: &Natural) -> Result<Natural> {
    if m < &nat(2) {
        return domain("mod_inv: modulus must be at least 2");
    }
    // Invariant: old_r = old_s * a (mod m), r = s * a (mod m).
    let mut old_r = BigInt::from_biguint(Sign::Plus, a % m);
    let mut r = BigInt::from_biguint(Sign::Plus, m.clone());
    let mut old_s = BigInt::one();
    let mut s = BigInt::zero();
    while !r.is_zero() {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
    }
    let gcd = old_r.to_biguint().unwrap_or_default();
    if !gcd.is_one() {
        return Err(NumError::NotInvertible { gcd });
    }
    let m_signed = BigInt::from_biguint(Sign::Plus, m.clone());
    let x = old_s.mod_floor(&m_signed);
    Ok(x.to_biguint().expect("mod_floor is nonnegative"))
}

/// `(a - b) mod m`, normalized to `[0, m)`.
pub fn mod_sub(a: &Natural, b: &Natural, m: &Natural) -> Natural {
    let a = a % m;
    let b = b % m;
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

pub fn gcd(a: &Natural, b: &Natural) -> Natural {
    a.gcd(b)
}

// ---------------------------------------------------------------------------
// Primality
// ---------------------------------------------------------------------------

const SMALL_PRIME_LIMIT: u32 = 2048;

fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = SMALL_PRIME_LIMIT as usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2;
        while i * i < limit {
            if sieve[i] {
                let mut j = i * i;
                while j < limit {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (0..limit as u32).filter(|&k| sieve[k as usize]).collect()
    })
}

fn is_small_prime(n: u32) -> bool {
    small_primes().binary_search(&n).is_ok()
}

/// Witness generator for Miller–Rabin. Seeded from the candidate itself so the
/// test stays a pure function of `(n, rounds)`.
fn witness_rng(n: &Natural) -> Rng {
    let digest = Sha256::digest(to_canonical_bytes(n));
    let mut seed = [0u8; 8];
    seed.copy_from_slice(&digest[..8]);
    Rng::from_seed(u64::from_be_bytes(seed))
}

/// Miller–Rabin with `rounds` pseudo-random witnesses. Values below 2048 are
/// decided exactly.
pub fn is_probable_prime(n: &Natural, rounds: u32) -> bool {
    if let Some(small) = n.to_u32() {
        if small < SMALL_PRIME_LIMIT {
            return is_small_prime(small);
        }
    }
    for &p in small_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }

    let n_minus_1 = n - 1u32;
    let twos = n_minus_1.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_1 >> twos;
    let two = nat(2);
    let witness_span = n - 3u32; // witnesses in [2, n-2]
    let mut rng = witness_rng(n);

    'witness: for _ in 0..rounds.max(1) {
        let a = &two + random_below(&witness_span, &mut rng);
        let mut x = mod_exp(&a, &odd, n).expect("n >= 2048");
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..twos {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    true
}

/// Rounds used internally when generating parameters.
pub const GEN_ROUNDS: u32 = 32;

fn passes_sieve(n: &Natural) -> bool {
    small_primes()
        .iter()
        .all(|&p| n.to_u32() == Some(p) || !(n % p).is_zero())
}

// ---------------------------------------------------------------------------
// Protocol 1 parameters (RSA-style trapdoor)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaParams {
    pub n: Natural,
    pub e: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaSecret {
    pub p: Natural,
    pub q: Natural,
    pub phi: Natural,
    pub d: Natural,
}

impl RsaSecret {
    /// Builds the secret from the two prime factors, with `d` the smallest
    /// positive inverse of `e` modulo phi.
    pub fn from_primes(p: Natural, q: Natural, e: &Natural) -> Result<(RsaParams, RsaSecret)> {
        if p == q {
            return domain("modulus factors must be distinct");
        }
        if !is_probable_prime(&p, GEN_ROUNDS) || !is_probable_prime(&q, GEN_ROUNDS) {
            return domain("modulus factors must be prime");
        }
        if e < &nat(3) {
            return domain("public exponent must be at least 3");
        }
        let n = &p * &q;
        if n < nat(15) {
            return domain("modulus must be at least 15");
        }
        let phi = (&p - 1u32) * (&q - 1u32);
        let d = mod_inv(e, &phi)?;
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        Ok((RsaParams { n, e: e.clone() }, RsaSecret { p, q, phi, d }))
    }

    /// Recovers the factorization of `n` from a matching exponent pair.
    pub fn from_exponents(n: &Natural, e: &Natural, d: &Natural) -> Result<(RsaParams, RsaSecret)> {
        let (params, secret) = Self::factor_from_exponents(n, e, d)?;
        let lambda = (&secret.p - 1u32).lcm(&(&secret.q - 1u32));
        if !((e * d) % lambda).is_one() {
            return domain("d is not a decryption exponent for (n, e)");
        }
        Ok((params, secret))
    }

    fn factor_from_exponents(n: &Natural, e: &Natural, d: &Natural) -> Result<(RsaParams, RsaSecret)> {
        if n < &nat(15) {
            return domain("modulus must be at least 15");
        }
        let k = e * d - 1u32;
        if k.is_zero() {
            return domain("e*d - 1 must be nonzero");
        }
        let twos = k.trailing_zeros().unwrap_or(0);
        let odd = &k >> twos;
        let n_minus_1 = n - 1u32;

        let mut g = nat(2);
        while g < *n && g < nat(10_000) {
            let common = gcd(&g, n);
            if !common.is_one() {
                return Self::from_primes(common.clone(), n / &common, e);
            }
            let mut x = mod_exp(&g, &odd, n)?;
            for _ in 0..twos {
                let y = (&x * &x) % n;
                if y.is_one() && !x.is_one() && x != n_minus_1 {
                    let p = gcd(&(&x - 1u32), n);
                    return Self::from_primes(p.clone(), n / &p, e);
                }
                x = y;
            }
            g += 1u32;
        }
        domain("could not factor n from (e, d); exponents do not match")
    }
}

impl RsaParams {
    /// Checks the parameter/secret pair against each other.
    pub fn check(&self, secret: &RsaSecret) -> Result<()> {
        if &secret.p * &secret.q != self.n {
            return domain("p * q != n");
        }
        if secret.p == secret.q {
            return domain("p == q");
        }
        if secret.phi != (&secret.p - 1u32) * (&secret.q - 1u32) {
            return domain("phi != (p-1)(q-1)");
        }
        if !((&self.e * &secret.d) % &secret.phi).is_one() {
            return domain("e*d != 1 mod phi");
        }
        Ok(())
    }
}

/// Generates an RSA modulus of exactly `bits` bits with `gcd(e, phi) = 1`.
pub fn gen_rsa(bits: u32, e: &Natural, rng: &mut Rng) -> Result<(RsaParams, RsaSecret)> {
    if bits < 8 {
        return domain(format!("{bits}-bit modulus is too small for two distinct primes"));
    }
    if e < &nat(3) || e.is_even() {
        return domain("public exponent must be odd and at least 3");
    }
    let bits = bits as u64;
    let p_bits = bits / 2;
    let n_lo = Natural::one() << (bits - 1);
    let n_hi = (Natural::one() << bits) - 1u32;

    for _ in 0..100_000 {
        let p = random_prime(p_bits, rng);
        if !gcd(e, &(&p - 1u32)).is_one() {
            continue;
        }
        // q chosen so that p*q lands in [2^(bits-1), 2^bits).
        let q_lo = n_lo.div_ceil(&p);
        let q_hi = &n_hi / &p;
        if q_lo > q_hi {
            continue;
        }
        let q = random_range(&q_lo, &q_hi, rng);
        if q == p || !gcd(e, &(&q - 1u32)).is_one() || !is_probable_prime(&q, GEN_ROUNDS) {
            continue;
        }
        return RsaSecret::from_primes(p, q, e);
    }
    domain("no admissible prime pair found")
}

fn random_prime(bits: u64, rng: &mut Rng) -> Natural {
    loop {
        let c = random_odd_with_bits(bits, rng);
        if is_probable_prime(&c, GEN_ROUNDS) {
            return c;
        }
    }
}

// ---------------------------------------------------------------------------
// Protocol 2 parameters (discrete-log group)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhParams {
    pub p: Natural,
    pub g: Natural,
}

impl DhParams {
    /// Validates that `p` is prime and `g` generates the whole group.
    pub fn new(p: Natural, g: Natural) -> Result<Self> {
        if !is_probable_prime(&p, GEN_ROUNDS) {
            return domain("p must be prime");
        }
        if g < nat(2) || g >= p {
            return domain("generator must lie in [2, p-1]");
        }
        let factors = prime_factors_of_group_order(&p)?;
        if !is_generator(&g, &p, &factors) {
            return domain(format!("{g} does not generate the multiplicative group mod {p}"));
        }
        Ok(Self { p, g })
    }
}

/// Distinct prime factors of `p - 1`, found by trial division with a prime
/// cofactor check.
fn prime_factors_of_group_order(p: &Natural) -> Result<Vec<Natural>> {
    let mut rest = p - 1u32;
    let mut factors = Vec::new();
    let mut d = 2u64;
    while d < 1_000_000 && nat(d) * nat(d) <= rest {
        if (&rest % d).is_zero() {
            factors.push(nat(d));
            while (&rest % d).is_zero() {
                rest /= d;
            }
        }
        d += 1;
    }
    if rest > Natural::one() {
        if !is_probable_prime(&rest, GEN_ROUNDS) {
            return domain("cannot factor p - 1 to verify the generator");
        }
        factors.push(rest);
    }
    Ok(factors)
}

fn is_generator(g: &Natural, p: &Natural, factors: &[Natural]) -> bool {
    let order = p - 1u32;
    factors
        .iter()
        .all(|f| !mod_exp(g, &(&order / f), p).expect("p >= 2").is_one())
}

/// Generates a safe prime `p = 2q + 1` of `bits` bits and the smallest
/// generator of the full group.
pub fn gen_dh(bits: u32, rng: &mut Rng) -> Result<DhParams> {
    if bits < 4 {
        return domain("safe prime needs at least 4 bits");
    }
    let bits = bits as u64;
    let p = loop {
        let q = random_odd_with_bits(bits - 1, rng);
        let mut p = &q << 1u32;
        p += 1u32;
        if p.bits() != bits || !passes_sieve(&q) || !passes_sieve(&p) {
            continue;
        }
        if is_probable_prime(&q, GEN_ROUNDS) && is_probable_prime(&p, GEN_ROUNDS) {
            break p;
        }
    };
    let q = (&p - 1u32) >> 1u32;
    let factors = if q == nat(2) { vec![nat(2)] } else { vec![nat(2), q] };
    let mut g = nat(2);
    while !is_generator(&g, &p, &factors) {
        g += 1u32;
    }
    Ok(DhParams { p, g })
}

/// Uniform residue in `[1, n-1]`, optionally restricted to units.
pub fn rand_residue(n: &Natural, require_unit: bool, rng: &mut Rng) -> Result<Natural> {
    if n < &nat(2) {
        return domain("rand_residue: modulus must be at least 2");
    }
    let hi = n - 1u32;
    loop {
        let x = random_range(&Natural::one(), &hi, rng);
        if !require_unit || gcd(&x, n).is_one() {
            return Ok(x);
        }
    }
}
