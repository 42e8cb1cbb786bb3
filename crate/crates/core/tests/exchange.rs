use std::net::TcpListener;
use std::thread;

use proptest::prelude::*;

use piggybank::numcore::{gen_dh, gen_rsa, nat, random_range, Natural, Rng};
use piggybank::p1::{self, AliceSecrets1, Variant1};
use piggybank::p2::{self, AliceSecrets2, Variant2};
use piggybank::session::{
    run_exchange, run_pair, run_trope_session, ExchangeConfig, Recovered, Role, SessionOutcome, Tamper, TcpTransport, TropeAlice,
    TropeBob, TropeConfig,
};

fn over_tcp(bob: &Role, alice: &Role, seed: u64) -> (SessionOutcome, SessionOutcome) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = ExchangeConfig::default();
    thread::scope(|s| {
        let bob_task = s.spawn(|| {
            let t = TcpTransport::accept(&listener).unwrap();
            run_exchange(bob, t, &mut Rng::from_seed(seed), &cfg).unwrap()
        });
        let t = TcpTransport::connect(addr).unwrap();
        let a = run_exchange(alice, t, &mut Rng::from_seed(seed + 1), &cfg).unwrap();
        (bob_task.join().unwrap(), a)
    })
}

fn desk_roles() -> Vec<(Role, Role)> {
    let (params, secret) = p1::desk_params();
    let mut roles = vec![];
    for variant in [Variant1::Base, Variant1::V1UnitR, Variant1::V2Multiplicative, Variant1::V3PlainR, Variant1::V4PlainR] {
        let r = if variant == Variant1::V1UnitR { nat(1) } else { nat(13) };
        roles.push((
            Role::BobP1 { variant, params: params.clone(), secret: secret.clone(), r: Some(r) },
            Role::AliceP1 { variant, params: params.clone(), secrets: AliceSecrets1::new(nat(5), nat(29)) },
        ));
    }
    let dh = p2::desk_params();
    for variant in [Variant2::Additive, Variant2::Multiplicative] {
        roles.push((
            Role::BobP2 { variant, params: dh.clone(), r: Some(nat(11)) },
            Role::AliceP2 { variant, params: dh.clone(), secrets: AliceSecrets2::new(nat(3), nat(10)) },
        ));
    }
    roles
}

#[test]
fn tcp_and_memory_transports_agree() {
    for (i, (bob, alice)) in desk_roles().iter().enumerate() {
        let (mb, ma) = run_pair(bob, alice, 40 + i as u64, &ExchangeConfig::default());
        let (tb, ta) = over_tcp(bob, alice, 40 + i as u64);
        assert_eq!(mb.unwrap(), tb, "bob, case {i}");
        assert_eq!(ma.unwrap(), ta, "alice, case {i}");
    }
}

#[test]
fn tcp_with_sampled_values_at_scale() {
    let mut rng = Rng::from_seed(77);
    let (params, secret) = gen_rsa(256, &nat(65537), &mut rng).unwrap();
    let s = random_range(&nat(1), &(&params.n - 1u32), &mut rng);
    let k = random_range(&nat(0), &(&params.n - 1u32), &mut rng);
    let bob = Role::BobP1 { variant: Variant1::Base, params: params.clone(), secret, r: None };
    let alice = Role::AliceP1 { variant: Variant1::Base, params, secrets: AliceSecrets1::new(s.clone(), k.clone()) };
    let (b, _) = over_tcp(&bob, &alice, 5);
    assert_eq!(b.recovered, Some(Recovered::P1(p1::Recovered1 { s: Some(s), k: Some(k) })));
}

fn trope_desk() -> (TropeBob, TropeAlice) {
    let (params, secret) = p1::desk_params();
    (
        TropeBob { params: params.clone(), secret, r: Some(nat(13)) },
        TropeAlice { params, s: nat(5), description: "five gold coins".into(), k: Some(nat(29)) },
    )
}

#[test]
fn every_alice_to_bob_bit_flip_is_caught() {
    let (bob, alice) = trope_desk();
    let cfg = TropeConfig::default();
    let (honest, _, log) = run_trope_session(&bob, &alice, 1, &cfg, vec![]);
    assert_eq!(honest.unwrap().manifest_ok, Some(true));
    let entries = log.entries();
    // frames 1..=3 travel from Alice to Bob
    let mut flips = 0;
    for (frame, entry) in entries.iter().enumerate().take(4).skip(1) {
        for bit in 0..entry.frame.len() * 8 {
            let (b, _, _) = run_trope_session(&bob, &alice, 1, &cfg, vec![Tamper::bit(frame, bit)]);
            match b {
                Err(_) => {}
                Ok(o) => assert_eq!(o.manifest_ok, Some(false), "frame {frame} bit {bit} accepted"),
            }
            flips += 1;
        }
    }
    assert!(flips > 700);
}

#[test]
fn truncated_digest_session() {
    let (bob, alice) = trope_desk();
    let cfg = TropeConfig {
        digest: piggybank::hashing::DigestConfig::new(piggybank::hashing::HashAlg::Sha512, 40).unwrap(),
        ack: false,
    };
    let (b, a, log) = run_trope_session(&bob, &alice, 2, &cfg, vec![]);
    let b = b.unwrap();
    assert_eq!(b.manifest_ok, Some(true));
    assert_eq!(b.manifest.unwrap().secret_digest.len(), 5);
    assert!(a.is_ok());
    assert_eq!(log.len(), 4);
}

fn sessions_at(bits: u32, seed: u64) -> (piggybank::numcore::RsaParams, piggybank::numcore::RsaSecret, piggybank::numcore::DhParams) {
    let mut rng = Rng::from_seed(seed);
    let (p, s) = gen_rsa(bits, &nat(3), &mut rng).unwrap();
    (p, s, gen_dh(bits / 2, &mut rng).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sessions_recover_alice_secrets(seed in any::<u64>(), v1 in 0u8..5, multiplicative in any::<bool>()) {
        let (params, secret, dh) = sessions_at(64, seed % 16);
        let mut rng = Rng::from_seed(seed);
        let variant = Variant1::from_code(v1).unwrap();
        let s: Natural = loop {
            let s = random_range(&nat(1), &(&params.n - 1u32), &mut rng);
            if piggybank::numcore::gcd(&s, &params.n) == nat(1) { break s; }
        };
        let k = random_range(&nat(0), &(&params.n - 1u32), &mut rng);
        let bob = Role::BobP1 { variant, params: params.clone(), secret, r: None };
        let alice = Role::AliceP1 { variant, params, secrets: AliceSecrets1::new(s.clone(), k.clone()) };
        let (b, a) = run_pair(&bob, &alice, seed, &ExchangeConfig::default());
        prop_assert!(a.is_ok());
        let want = p1::Recovered1 { s: Some(s), k: variant.transmits_k().then_some(k) };
        prop_assert_eq!(b.unwrap().recovered, Some(Recovered::P1(want)));

        let variant = if multiplicative { Variant2::Multiplicative } else { Variant2::Additive };
        let s = random_range(&nat(1), &(&dh.p - 2u32), &mut rng);
        let k = random_range(&nat(1), &(&dh.p - 1u32), &mut rng);
        let bob = Role::BobP2 { variant, params: dh.clone(), r: None };
        let alice = Role::AliceP2 { variant, params: dh, secrets: AliceSecrets2::new(s, k.clone()) };
        let (b, a) = run_pair(&bob, &alice, seed, &ExchangeConfig::default());
        match (b, a) {
            (Ok(b), Ok(a)) => match b.recovered {
                Some(Recovered::P2(o)) => {
                    prop_assert_eq!(o.k, k);
                    prop_assert_eq!(Some(o.shared), a.alice_shared);
                }
                other => prop_assert!(false, "unexpected {:?}", other),
            },
            // t + 1 = 0 is declared degenerate for the multiplicative variant
            (Err(e), _) | (_, Err(e)) => prop_assert!(multiplicative, "{}", e),
        }
    }
}
