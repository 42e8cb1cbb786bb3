//! Protocol 2: discrete-log piggy bank.
//!
//! Bob sends `g^R`; Alice raises it to her exponent `S`, folds `K` into the
//! result and separately sends `g^S`. Bob computes `(g^S)^R`, strips it from
//! the deposit and recovers `K`. Both ends end up holding `g^(SR) mod p`.
//! Bob never learns `S` itself.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{ProtocolError, Result};
use crate::numcore::{mod_exp, mod_inv, mod_sub, nat, random_range, DhParams, Natural, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant2 {
    /// deposit = t + K
    Additive,
    /// deposit = K·t + K
    Multiplicative,
}

impl Variant2 {
    pub const ALL: [Variant2; 2] = [Variant2::Additive, Variant2::Multiplicative];

    pub fn code(self) -> u8 {
        match self {
            Variant2::Additive => 0,
            Variant2::Multiplicative => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant2::Additive => "additive",
            Variant2::Multiplicative => "multiplicative",
        }
    }
}

impl fmt::Display for Variant2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant2 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown protocol 2 variant `{s}` (additive, multiplicative)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobState2 {
    pub params: DhParams,
    pub r: Natural,
    pub challenge_sent: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliceSecrets2 {
    pub s: Natural,
    pub k: Natural,
}

impl AliceSecrets2 {
    pub fn new(s: Natural, k: Natural) -> Self {
        Self { s, k }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response2 {
    pub deposit: Natural,
    pub letter: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome2 {
    pub k: Natural,
    pub shared: Natural,
}

fn exponent_in_range(x: &Natural, p: &Natural) -> bool {
    !x.is_zero() && *x <= p - 2u32
}

pub fn p2_init(params: &DhParams, rng: &mut Rng) -> Result<BobState2> {
    let r = random_range(&Natural::one(), &(&params.p - 2u32), rng);
    p2_init_with_r(params, r)
}

pub fn p2_init_with_r(params: &DhParams, r: Natural) -> Result<BobState2> {
    if !exponent_in_range(&r, &params.p) {
        return Err(ProtocolError::Domain(format!("R must lie in [1, p-2], got {r}")));
    }
    let challenge_sent = mod_exp(&params.g, &r, &params.p)?;
    Ok(BobState2 {
        params: params.clone(),
        r,
        challenge_sent,
    })
}

pub fn p2_deposit(params: &DhParams, variant: Variant2, challenge: &Natural, secrets: &AliceSecrets2) -> Result<Response2> {
    let p = &params.p;
    let (s, k) = (&secrets.s, &secrets.k);
    if challenge.is_zero() || challenge >= p {
        return Err(ProtocolError::Domain("challenge must lie in [1, p-1]".into()));
    }
    if !exponent_in_range(s, p) {
        return Err(ProtocolError::Domain("S must lie in [1, p-2]".into()));
    }
    if k >= p || (variant == Variant2::Multiplicative && k.is_zero()) {
        return Err(ProtocolError::Domain(format!("K out of range for the {variant} variant")));
    }
    let t = mod_exp(challenge, s, p)?;
    let deposit = match variant {
        Variant2::Additive => (&t + k) % p,
        Variant2::Multiplicative => {
            let factor = (&t + 1u32) % p;
            if factor.is_zero() {
                return Err(ProtocolError::Degenerate("t + 1 = 0 (mod p)".into()));
            }
            (k * factor) % p
        }
    };
    Ok(Response2 {
        deposit,
        letter: mod_exp(&params.g, s, p)?,
    })
}

/// Alice's copy of the shared value, `challenge^S mod p`.
pub fn p2_alice_shared(params: &DhParams, challenge: &Natural, secrets: &AliceSecrets2) -> Result<Natural> {
    Ok(mod_exp(challenge, &secrets.s, &params.p)?)
}

pub fn p2_recover(state: &BobState2, variant: Variant2, response: &Response2) -> Result<Outcome2> {
    let p = &state.params.p;
    if &response.deposit >= p || response.letter.is_zero() || &response.letter >= p {
        return Err(ProtocolError::Domain("response values out of range".into()));
    }
    let t = mod_exp(&response.letter, &state.r, p)?;
    let k = match variant {
        Variant2::Additive => mod_sub(&response.deposit, &t, p),
        Variant2::Multiplicative => {
            let factor = (&t + 1u32) % p;
            if factor.is_zero() {
                return Err(ProtocolError::Degenerate("t + 1 = 0 (mod p)".into()));
            }
            (&response.deposit * mod_inv(&factor, p)?) % p
        }
    };
    Ok(Outcome2 { k, shared: t })
}

/// The desk-scale group: p = 37, g = 2.
pub fn desk_params() -> DhParams {
    DhParams::new(nat(37), nat(2)).expect("2 generates Z_37^*")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_example_values() {
        let params = desk_params();
        let state = p2_init_with_r(&params, nat(11)).unwrap();
        assert_eq!(state.challenge_sent, nat(13));

        let secrets = AliceSecrets2::new(nat(3), nat(10));
        let resp = p2_deposit(&params, Variant2::Additive, &state.challenge_sent, &secrets).unwrap();
        assert_eq!(resp, Response2 { deposit: nat(24), letter: nat(8) });

        let out = p2_recover(&state, Variant2::Additive, &resp).unwrap();
        assert_eq!(out, Outcome2 { k: nat(10), shared: nat(14) });
        assert_eq!(p2_alice_shared(&params, &state.challenge_sent, &secrets).unwrap(), nat(14));
    }

    #[test]
    fn multiplicative_example_values() {
        // 15 * 5 = 75 = 1 (mod 37)
        assert_eq!(15 * 5 % 37, 1);
        let params = desk_params();
        let state = p2_init_with_r(&params, nat(11)).unwrap();
        let resp = p2_deposit(&params, Variant2::Multiplicative, &nat(13), &AliceSecrets2::new(nat(3), nat(10))).unwrap();
        assert_eq!(resp.deposit, nat(150 % 37));
        assert_eq!(resp.deposit, nat(2));
        let out = p2_recover(&state, Variant2::Multiplicative, &resp).unwrap();
        assert_eq!(out, Outcome2 { k: nat(10), shared: nat(14) });
    }

    #[test]
    fn zero_key_and_unit_exponent() {
        let params = desk_params();
        let state = p2_init_with_r(&params, nat(1)).unwrap();
        assert_eq!(state.challenge_sent, params.g);

        let state = p2_init_with_r(&params, nat(11)).unwrap();
        let resp = p2_deposit(&params, Variant2::Additive, &nat(13), &AliceSecrets2::new(nat(3), nat(0))).unwrap();
        assert_eq!(resp.deposit, nat(14));
        assert_eq!(p2_recover(&state, Variant2::Additive, &resp).unwrap().k, nat(0));
    }

    #[test]
    fn init_is_seeded() {
        let params = desk_params();
        let a = p2_init(&params, &mut Rng::from_seed(4)).unwrap();
        let b = p2_init(&params, &mut Rng::from_seed(4)).unwrap();
        assert_eq!(a, b);
        let mut rng = Rng::from_seed(5);
        for _ in 0..200 {
            let st = p2_init(&params, &mut rng).unwrap();
            assert!(st.r >= nat(1) && st.r <= nat(35));
        }
    }

    #[test]
    fn range_errors() {
        let params = desk_params();
        assert!(p2_init_with_r(&params, nat(0)).is_err());
        assert!(p2_init_with_r(&params, nat(36)).is_err());
        let ok = AliceSecrets2::new(nat(3), nat(10));
        assert!(p2_deposit(&params, Variant2::Additive, &nat(0), &ok).is_err());
        assert!(p2_deposit(&params, Variant2::Additive, &nat(37), &ok).is_err());
        assert!(p2_deposit(&params, Variant2::Additive, &nat(13), &AliceSecrets2::new(nat(36), nat(1))).is_err());
        assert!(p2_deposit(&params, Variant2::Additive, &nat(13), &AliceSecrets2::new(nat(3), nat(37))).is_err());
        assert!(p2_deposit(&params, Variant2::Multiplicative, &nat(13), &AliceSecrets2::new(nat(3), nat(0))).is_err());
    }

    #[test]
    fn multiplicative_degenerate_case() {
        // challenge g = 2 with S = 18 gives t = 2^18 = 36 = -1 (mod 37)
        let params = desk_params();
        assert_eq!(mod_exp(&nat(2), &nat(18), &nat(37)).unwrap(), nat(36));
        let err = p2_deposit(&params, Variant2::Multiplicative, &nat(2), &AliceSecrets2::new(nat(18), nat(5))).unwrap_err();
        assert!(matches!(err, ProtocolError::Degenerate(_)));

        let state = p2_init_with_r(&params, nat(18)).unwrap();
        let resp = Response2 { deposit: nat(5), letter: nat(2) };
        assert!(matches!(p2_recover(&state, Variant2::Multiplicative, &resp), Err(ProtocolError::Degenerate(_))));
    }

    #[test]
    fn shared_value_agreement_exhaustive_37() {
        let params = desk_params();
        for r in 1..=35u64 {
            let state = p2_init_with_r(&params, nat(r)).unwrap();
            for s in 1..=35u64 {
                let secrets = AliceSecrets2::new(nat(s), nat(1));
                let alice = p2_alice_shared(&params, &state.challenge_sent, &secrets).unwrap();
                let letter = mod_exp(&params.g, &nat(s), &params.p).unwrap();
                let bob = mod_exp(&letter, &state.r, &params.p).unwrap();
                assert_eq!(alice, bob);
            }
        }
    }
}
