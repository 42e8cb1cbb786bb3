//! Protocol 1: RSA-trapdoor piggy bank.
//!
//! Bob issues a challenge derived from a random `R`; Alice answers with a
//! deposit (the secrets folded into the challenge) and a letter (a secret
//! pushed through the public map `x -> x^e mod n`). Only Bob, who knows `d`,
//! can open the letter, and from it the deposit.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{ProtocolError, Result};
use crate::numcore::{mod_exp, mod_inv, mod_sub, nat, rand_residue, gcd, Natural, RsaParams, RsaSecret, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant1 {
    /// deposit = S·R^e + K, letter = S^e
    Base,
    /// R = 1: deposit = S + K, letter = S^e
    V1UnitR,
    /// deposit = R^e·S, letter = S^e; no K is sent
    V2Multiplicative,
    /// R in the clear: deposit = S^e·R + K, letter = S^e
    V3PlainR,
    /// R in the clear: deposit = S·R + K, letter = K^e
    V4PlainR,
}

impl Variant1 {
    pub const ALL: [Variant1; 5] = [
        Variant1::Base,
        Variant1::V1UnitR,
        Variant1::V2Multiplicative,
        Variant1::V3PlainR,
        Variant1::V4PlainR,
    ];

    pub fn code(self) -> u8 {
        match self {
            Variant1::Base => 0,
            Variant1::V1UnitR => 1,
            Variant1::V2Multiplicative => 2,
            Variant1::V3PlainR => 3,
            Variant1::V4PlainR => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant1::Base => "base",
            Variant1::V1UnitR => "v1",
            Variant1::V2Multiplicative => "v2",
            Variant1::V3PlainR => "v3",
            Variant1::V4PlainR => "v4",
        }
    }

    /// Whether Bob's `R` must be a unit mod n (he divides by it later).
    pub fn needs_unit_r(self) -> bool {
        matches!(self, Variant1::V2Multiplicative | Variant1::V4PlainR)
    }

    pub fn transmits_k(self) -> bool {
        self != Variant1::V2Multiplicative
    }
}

impl fmt::Display for Variant1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant1 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown protocol 1 variant `{s}` (base, v1, v2, v3, v4)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobState1 {
    pub params: RsaParams,
    pub secret: RsaSecret,
    pub variant: Variant1,
    pub r: Natural,
    pub challenge_sent: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliceSecrets1 {
    pub s: Natural,
    pub k: Natural,
}

impl AliceSecrets1 {
    pub fn new(s: Natural, k: Natural) -> Self {
        Self { s, k }
    }
}

/// Alice's two communications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response1 {
    pub deposit: Natural,
    pub letter: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovered1 {
    pub s: Option<Natural>,
    pub k: Option<Natural>,
}

/// Samples Bob's `R` for `variant` and computes the challenge.
pub fn p1_init(params: &RsaParams, secret: &RsaSecret, variant: Variant1, rng: &mut Rng) -> Result<BobState1> {
    let r = match variant {
        Variant1::V1UnitR => Natural::one(),
        v => rand_residue(&params.n, v.needs_unit_r(), rng)?,
    };
    p1_init_with_r(params, secret, variant, r)
}

/// Same as [`p1_init`] with a caller-chosen `R`.
pub fn p1_init_with_r(params: &RsaParams, secret: &RsaSecret, variant: Variant1, r: Natural) -> Result<BobState1> {
    params.check(secret)?;
    let n = &params.n;
    if r.is_zero() || &r >= n {
        return Err(ProtocolError::Domain(format!("R must lie in [1, n-1], got {r}")));
    }
    if variant == Variant1::V1UnitR && !r.is_one() {
        return Err(ProtocolError::Domain("variant v1 fixes R = 1".into()));
    }
    if variant.needs_unit_r() && !gcd(&r, n).is_one() {
        return Err(ProtocolError::Domain(format!("variant {variant} needs R coprime to n")));
    }
    let challenge_sent = match variant {
        Variant1::Base | Variant1::V2Multiplicative => mod_exp(&r, &params.e, n)?,
        Variant1::V1UnitR | Variant1::V3PlainR | Variant1::V4PlainR => r.clone(),
    };
    Ok(BobState1 {
        params: params.clone(),
        secret: secret.clone(),
        variant,
        r,
        challenge_sent,
    })
}

/// Alice's side: folds her secrets into the challenge.
pub fn p1_deposit(params: &RsaParams, variant: Variant1, challenge: &Natural, secrets: &AliceSecrets1) -> Result<Response1> {
    let n = &params.n;
    let (s, k) = (&secrets.s, &secrets.k);
    if s.is_zero() || s >= n {
        return Err(ProtocolError::Domain("S must lie in [1, n-1]".into()));
    }
    if k >= n {
        return Err(ProtocolError::Domain("K must lie in [0, n-1]".into()));
    }
    if challenge.is_zero() || challenge >= n {
        return Err(ProtocolError::Domain("challenge must lie in [1, n-1]".into()));
    }
    let s_e = mod_exp(s, &params.e, n)?;
    let response = match variant {
        Variant1::Base | Variant1::V4PlainR => Response1 {
            deposit: (s * challenge + k) % n,
            letter: if variant == Variant1::Base {
                s_e
            } else {
                mod_exp(k, &params.e, n)?
            },
        },
        Variant1::V1UnitR => Response1 {
            deposit: (s + k) % n,
            letter: s_e,
        },
        Variant1::V2Multiplicative => Response1 {
            deposit: (challenge * s) % n,
            letter: s_e,
        },
        Variant1::V3PlainR => Response1 {
            deposit: (&s_e * challenge + k) % n,
            letter: s_e,
        },
    };
    Ok(response)
}

/// Bob's side: opens the letter with `d`, then the deposit.
pub fn p1_recover(state: &BobState1, response: &Response1) -> Result<Recovered1> {
    let n = &state.params.n;
    let d = &state.secret.d;
    let (deposit, letter) = (&response.deposit, &response.letter);
    if deposit >= n || letter >= n {
        return Err(ProtocolError::Domain("response values must lie in [0, n-1]".into()));
    }
    let recovered = match state.variant {
        Variant1::Base => {
            let s = mod_exp(letter, d, n)?;
            let k = mod_sub(deposit, &(&s * &state.challenge_sent), n);
            Recovered1 { s: Some(s), k: Some(k) }
        }
        Variant1::V1UnitR => {
            let s = mod_exp(letter, d, n)?;
            let k = mod_sub(deposit, &s, n);
            Recovered1 { s: Some(s), k: Some(k) }
        }
        Variant1::V2Multiplicative => {
            let blind = mod_exp(&state.r, &state.params.e, n)?;
            let s = (deposit * mod_inv(&blind, n)?) % n;
            let opened = mod_exp(letter, d, n)?;
            if s != opened {
                return Err(ProtocolError::Integrity(format!(
                    "deposit yields S = {s} but letter opens to {opened}"
                )));
            }
            Recovered1 { s: Some(s), k: None }
        }
        Variant1::V3PlainR => {
            let s = mod_exp(letter, d, n)?;
            let k = mod_sub(deposit, &(letter * &state.r), n);
            Recovered1 { s: Some(s), k: Some(k) }
        }
        Variant1::V4PlainR => {
            let k = mod_exp(letter, d, n)?;
            let s = (mod_sub(deposit, &k, n) * mod_inv(&state.r, n)?) % n;
            Recovered1 { s: Some(s), k: Some(k) }
        }
    };
    Ok(recovered)
}

/// The desk-scale parameters: n = 51 = 3·17, e = 3, d = 11.
pub fn desk_params() -> (RsaParams, RsaSecret) {
    RsaSecret::from_primes(nat(3), nat(17), &nat(3)).expect("3 and 17 are distinct primes")
}
