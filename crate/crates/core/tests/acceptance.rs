//! Acceptance suite. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; the process exits non-zero if any
//! criterion fails.
//!
//!     cargo test -p piggybank-core --test acceptance

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng as _;

use piggybank::hashing::DigestConfig;
use piggybank::numcore::{gen_dh, gen_rsa, nat, random_range, rand_residue, Natural, Rng, RsaSecret};
use piggybank::p1::{self, p1_deposit, p1_init_with_r, p1_recover, AliceSecrets1, Variant1};
use piggybank::p2::{self, p2_alice_shared, p2_deposit, p2_init_with_r, p2_recover, AliceSecrets2, Variant2};
use piggybank::qkdsim::cascade::{cascade_reconcile_with, AliceParity, CascadeConfig};
use piggybank::qkdsim::digest::run_digest_protocol;
use piggybank::qkdsim::{channel_transmit, generate_round, sift, ChannelModel};
use piggybank::session::codec::kind_admissible;
use piggybank::session::{
    decode_msg, encode_msg, run_pair, run_trope_session, CodecError, ExchangeConfig, Message, MessageKind, ProtocolId, Recovered,
    Role, Tamper, TropeAlice, TropeBob, TropeConfig,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Median wall time of `runs` calls.
fn median_time(runs: usize, mut f: impl FnMut()) -> Duration {
    let mut times: Vec<Duration> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .collect();
    times.sort();
    times[runs / 2]
}

fn c1_protocol1_example() -> Result<String, String> {
    let (params, secret) = RsaSecret::from_exponents(&nat(51), &nat(3), &nat(11)).map_err(|e| e.to_string())?;
    let secrets = AliceSecrets1::new(nat(5), nat(29));
    let mut outcome = None;
    let elapsed = median_time(5, || {
        let bob = p1_init_with_r(&params, &secret, Variant1::Base, nat(13)).unwrap();
        let resp = p1_deposit(&params, Variant1::Base, &bob.challenge_sent, &secrets).unwrap();
        let rec = p1_recover(&bob, &resp).unwrap();
        outcome = Some((bob.challenge_sent, resp, rec));
    });
    let (challenge, resp, rec) = outcome.unwrap();
    ensure(challenge == nat(4), || format!("challenge {challenge}, want 4"))?;
    ensure(resp.deposit == nat(49), || format!("deposit {}, want 49", resp.deposit))?;
    ensure(resp.letter == nat(23), || format!("letter {}, want 23", resp.letter))?;
    ensure(rec.s == Some(nat(5)) && rec.k == Some(nat(29)), || format!("recovered {rec:?}"))?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;

    // and over the wire
    let bob = Role::BobP1 { variant: Variant1::Base, params: params.clone(), secret, r: Some(nat(13)) };
    let alice = Role::AliceP1 { variant: Variant1::Base, params, secrets };
    let (b, _) = run_pair(&bob, &alice, 0, &ExchangeConfig::default());
    let b = b.map_err(|e| e.to_string())?;
    ensure(
        b.recovered == Some(Recovered::P1(p1::Recovered1 { s: Some(nat(5)), k: Some(nat(29)) })),
        || format!("session recovered {:?}", b.recovered),
    )?;
    Ok(format!("c=4 d=49 l=23 S=5 K=29 in {elapsed:?}"))
}

fn c2_protocol2_example() -> Result<String, String> {
    let params = p2::desk_params();
    let secrets = AliceSecrets2::new(nat(3), nat(10));
    let mut outcome = None;
    let elapsed = median_time(5, || {
        let bob = p2_init_with_r(&params, nat(11)).unwrap();
        let resp = p2_deposit(&params, Variant2::Additive, &bob.challenge_sent, &secrets).unwrap();
        let out = p2_recover(&bob, Variant2::Additive, &resp).unwrap();
        let alice_shared = p2_alice_shared(&params, &bob.challenge_sent, &secrets).unwrap();
        outcome = Some((bob.challenge_sent, resp, out, alice_shared));
    });
    let (challenge, resp, out, alice_shared) = outcome.unwrap();
    ensure(challenge == nat(13), || format!("challenge {challenge}, want 13"))?;
    ensure(resp.deposit == nat(24), || format!("deposit {}, want 24", resp.deposit))?;
    ensure(resp.letter == nat(8), || format!("letter {}, want 8", resp.letter))?;
    ensure(out.k == nat(10), || format!("K {}, want 10", out.k))?;
    ensure(out.shared == nat(14) && alice_shared == nat(14), || format!("shared {} / {alice_shared}", out.shared))?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;

    let bob = Role::BobP2 { variant: Variant2::Additive, params: params.clone(), r: Some(nat(11)) };
    let alice = Role::AliceP2 { variant: Variant2::Additive, params, secrets };
    let (b, a) = run_pair(&bob, &alice, 0, &ExchangeConfig::default());
    let (b, a) = (b.map_err(|e| e.to_string())?, a.map_err(|e| e.to_string())?);
    ensure(
        b.recovered == Some(Recovered::P2(p2::Outcome2 { k: nat(10), shared: nat(14) })) && a.alice_shared == Some(nat(14)),
        || format!("session {:?} / {:?}", b.recovered, a.alice_shared),
    )?;
    Ok(format!("c=13 d=24 l=8 K=10 shared=14 in {elapsed:?}"))
}

const P1_VARIANTS: [Variant1; 5] = [
    Variant1::Base,
    Variant1::V1UnitR,
    Variant1::V2Multiplicative,
    Variant1::V3PlainR,
    Variant1::V4PlainR,
];

fn c3_exhaustive() -> Result<String, String> {
    let t = Instant::now();
    let (params, secret) = p1::desk_params();
    let mut p1_cases = 0u64;
    for variant in P1_VARIANTS {
        for r in 1..51u64 {
            let Ok(bob) = p1_init_with_r(&params, &secret, variant, nat(r)) else {
                continue;
            };
            for s in 1..51u64 {
                for k in 0..51u64 {
                    let secrets = AliceSecrets1::new(nat(s), nat(k));
                    let resp = p1_deposit(&params, variant, &bob.challenge_sent, &secrets)
                        .map_err(|e| format!("{variant} R={r} S={s} K={k}: {e}"))?;
                    let rec = p1_recover(&bob, &resp).map_err(|e| format!("{variant} R={r} S={s} K={k}: {e}"))?;
                    let want_k = variant.transmits_k().then(|| nat(k));
                    ensure(rec.s == Some(nat(s)) && rec.k == want_k, || format!("{variant} R={r} S={s} K={k}: got {rec:?}"))?;
                    p1_cases += 1;
                    if variant == Variant1::V2Multiplicative {
                        // K is not carried; one pass over S is enough
                        break;
                    }
                }
            }
        }
    }

    let params = p2::desk_params();
    let (mut p2_cases, mut degenerate) = (0u64, 0u64);
    for variant in [Variant2::Additive, Variant2::Multiplicative] {
        for r in 1..=35u64 {
            let bob = p2_init_with_r(&params, nat(r)).map_err(|e| e.to_string())?;
            for s in 1..=35u64 {
                let k_lo = if variant == Variant2::Multiplicative { 1 } else { 0 };
                for k in k_lo..37u64 {
                    let secrets = AliceSecrets2::new(nat(s), nat(k));
                    let resp = match p2_deposit(&params, variant, &bob.challenge_sent, &secrets) {
                        Ok(resp) => resp,
                        Err(piggybank::error::ProtocolError::Degenerate(_)) => {
                            degenerate += 1;
                            continue;
                        }
                        Err(e) => return Err(format!("{variant} R={r} S={s} K={k}: {e}")),
                    };
                    let out = p2_recover(&bob, variant, &resp).map_err(|e| format!("{variant} R={r} S={s} K={k}: {e}"))?;
                    let alice = p2_alice_shared(&params, &bob.challenge_sent, &secrets).map_err(|e| e.to_string())?;
                    ensure(out.k == nat(k) && out.shared == alice, || format!("{variant} R={r} S={s} K={k}: got {out:?}"))?;
                    p2_cases += 1;
                }
            }
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{p1_cases} P1 cases, {p2_cases} P2 cases ({degenerate} degenerate skipped) in {elapsed:.1?}"))
}

fn c4_scale() -> Result<String, String> {
    let t = Instant::now();
    let mut rng = Rng::from_seed(4);
    let cfg = ExchangeConfig::default();
    let mut done = 0;
    for key in 0..4u64 {
        let (params, secret) = gen_rsa(512, &nat(65537), &mut rng).map_err(|e| e.to_string())?;
        for i in 0..25u64 {
            let variant = P1_VARIANTS[(i % 5) as usize];
            let s = rand_residue(&params.n, true, &mut rng).map_err(|e| e.to_string())?;
            let k = random_range(&Natural::from(0u32), &(&params.n - 1u32), &mut rng);
            let secrets = AliceSecrets1::new(s.clone(), k.clone());
            let bob = Role::BobP1 { variant, params: params.clone(), secret: secret.clone(), r: None };
            let alice = Role::AliceP1 { variant, params: params.clone(), secrets };
            let (b, _) = run_pair(&bob, &alice, key * 1000 + i, &cfg);
            let b = b.map_err(|e| format!("p1 {variant} key {key} run {i}: {e}"))?;
            let want = p1::Recovered1 { s: Some(s), k: variant.transmits_k().then_some(k) };
            ensure(b.recovered == Some(Recovered::P1(want)), || format!("p1 {variant} key {key} run {i}: {:?}", b.recovered))?;
            done += 1;
        }
    }
    for group in 0..4u64 {
        let params = gen_dh(256, &mut rng).map_err(|e| e.to_string())?;
        for i in 0..25u64 {
            let variant = if i % 2 == 0 { Variant2::Additive } else { Variant2::Multiplicative };
            let s = random_range(&nat(1), &(&params.p - 2u32), &mut rng);
            let k = random_range(&nat(1), &(&params.p - 1u32), &mut rng);
            let secrets = AliceSecrets2::new(s, k.clone());
            let bob = Role::BobP2 { variant, params: params.clone(), r: None };
            let alice = Role::AliceP2 { variant, params: params.clone(), secrets };
            let (b, a) = run_pair(&bob, &alice, group * 1000 + i, &cfg);
            let b = b.map_err(|e| format!("p2 {variant} group {group} run {i}: {e}"))?;
            let a = a.map_err(|e| format!("p2 {variant} group {group} run {i}: {e}"))?;
            match &b.recovered {
                Some(Recovered::P2(o)) => {
                    ensure(o.k == k && Some(&o.shared) == a.alice_shared.as_ref(), || format!("p2 run {i}: {o:?}"))?;
                }
                other => return Err(format!("p2 run {i}: {other:?}")),
            }
            done += 1;
        }
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{done} exchanges at 512-bit n / 256-bit p in {elapsed:.1?}"))
}

fn random_message(rng: &mut Rng) -> Message {
    let (protocol, kind) = loop {
        let p = ProtocolId::ALL[rng.random_range(0..ProtocolId::ALL.len())];
        let k = MessageKind::ALL[rng.random_range(0..MessageKind::ALL.len())];
        if kind_admissible(p, k) {
            break (p, k);
        }
    };
    let fields = (0..rng.random_range(0..6))
        .map(|_| {
            let len = rng.random_range(0..48);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            Natural::from_bytes_be(&bytes)
        })
        .collect();
    let blob = (0..rng.random_range(0..80)).map(|_| rng.random()).collect();
    Message::new(protocol, kind, fields).with_blob(blob)
}

fn c5_codec_fuzz() -> Result<String, String> {
    let mut rng = Rng::from_seed(5);
    for i in 0..10_000 {
        let m = random_message(&mut rng);
        let bytes = encode_msg(&m).map_err(|e| format!("encode {i}: {e}"))?;
        let back = decode_msg(&bytes).map_err(|e| format!("decode {i}: {e}"))?;
        ensure(back == m, || format!("message {i} changed"))?;
        ensure(encode_msg(&back).as_deref() == Ok(&bytes[..]), || format!("message {i} re-encodes differently"))?;
    }
    let mut accepted = 0;
    for i in 0..10_000 {
        let len = rng.random_range(0..96);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        // half the inputs start with a valid prefix so the decoder gets past the magic
        if i % 2 == 0 && bytes.len() >= 5 {
            bytes[..5].copy_from_slice(b"PBNK\x01");
        }
        let r = catch_unwind(|| decode_msg(&bytes)).map_err(|_| format!("decoder panicked on input {i}"))?;
        match r {
            Ok(m) => {
                ensure(encode_msg(&m).as_deref() == Ok(&bytes[..]), || format!("input {i} decoded but is not canonical"))?;
                accepted += 1;
            }
            Err(CodecError::Format(_) | CodecError::Truncation { .. } | CodecError::Canonicality { .. } | CodecError::Encode(_)) => {}
        }
    }
    Ok(format!("10000 valid round trips, 10000 random inputs ({accepted} happened to be valid)"))
}

fn c6_intercept_resend() -> Result<String, String> {
    let mut rng = Rng::from_seed(6);
    let model = ChannelModel::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let n = 200_000;
    let (alice, bob_bases) = generate_round(n, &mut rng);
    let bits = channel_transmit(&alice, &bob_bases, &model, &mut rng).map_err(|e| e.to_string())?;
    let pair = sift(&alice, &bob_bases, &bits).map_err(|e| e.to_string())?;
    let q = pair.error_rate();
    ensure((q - 0.25).abs() <= 0.01, || format!("QBER {q:.4} over {} sifted bits", pair.len()))?;
    Ok(format!("QBER {q:.4} over {} sifted bits from {n} pulses", pair.len()))
}

fn c7_cascade() -> Result<String, String> {
    let mut ok = 0;
    let mut violations = 0;
    let mut disclosed = 0usize;
    for trial in 0..200u64 {
        let mut rng = Rng::for_trial(7, trial);
        let alice: Vec<bool> = (0..1024).map(|_| rng.random()).collect();
        let bob: Vec<bool> = alice.iter().map(|&b| b ^ rng.random_bool(0.03)).collect();
        let mut oracle = AliceParity::new(&alice);
        let cfg = CascadeConfig { passes: 4, qber_hint: 0.03, shuffle_seed: rng.random() };
        let r = cascade_reconcile_with(&bob, &mut oracle, &cfg, |pos, key| {
            if key[pos] == alice[pos] {
                violations += 1;
            }
        });
        ensure(r.parities_disclosed == oracle.announced, || format!("trial {trial}: disclosure count mismatch"))?;
        disclosed += r.parities_disclosed;
        ok += (r.corrected_bob_key == alice) as usize;
    }
    ensure(ok >= 198, || format!("{ok}/200 reconciled"))?;
    ensure(violations == 0, || format!("{violations} flips on correct positions"))?;
    Ok(format!("{ok}/200 reconciled, 0 audit violations, mean {:.1} parities", disclosed as f64 / 200.0))
}

fn c8_digest() -> Result<String, String> {
    let model = ChannelModel::new(0.01, 0.0).map_err(|e| e.to_string())?;
    let cfg = DigestConfig::default();
    let trials = 10_000u64;
    let (mut rounds, mut bits, mut wrong) = (0u64, 0u64, 0u64);
    for trial in 0..trials {
        let mut rng = Rng::for_trial(8, trial);
        let run = run_digest_protocol(128, &model, &cfg, 0.0, 10_000, &mut rng).map_err(|e| format!("trial {trial}: {e}"))?;
        rounds += run.rounds as u64;
        bits += run.accepted_key.len() as u64;
        wrong += (run.accepted_key != run.bob_key) as u64;
    }
    let mean = rounds as f64 / trials as f64;
    let analytic = 1.0 / 0.99f64.powi(64);
    let rel = (mean - analytic).abs() / analytic;
    ensure(rel <= 0.05, || format!("mean rounds {mean:.4} vs {analytic:.4} ({:.2}%)", rel * 100.0))?;
    ensure(wrong == 0, || format!("{wrong} accepted keys differ"))?;
    Ok(format!(
        "mean rounds {mean:.4} vs analytic {analytic:.4} ({:.2}% off), mean accepted length {:.1}, 0 wrong keys",
        rel * 100.0,
        bits as f64 / trials as f64
    ))
}

fn c9_trope() -> Result<String, String> {
    let (params, secret) = p1::desk_params();
    let bob = TropeBob { params: params.clone(), secret, r: Some(nat(13)) };
    let alice = TropeAlice { params, s: nat(5), description: "five gold coins".into(), k: Some(nat(29)) };
    let cfg = TropeConfig::default();
    let (b, _, log) = run_trope_session(&bob, &alice, 9, &cfg, vec![]);
    let b = b.map_err(|e| e.to_string())?;
    ensure(b.manifest_ok == Some(true), || "honest session rejected".into())?;
    let letter = &log.entries()[3];
    ensure(letter.message.as_ref().is_some_and(|m| m.protocol == ProtocolId::Trope), || "frame 3 is not the coded letter".into())?;
    // blob starts after the 9-byte header and the 4-byte blob length
    let start = 13 * 8;
    let total = letter.frame.len() * 8;
    for bit in start..total {
        let (b, _, _) = run_trope_session(&bob, &alice, 9, &cfg, vec![Tamper::bit(3, bit)]);
        let b = b.map_err(|e| format!("bit {bit}: {e}"))?;
        ensure(b.manifest_ok == Some(false), || format!("flip of ciphertext bit {} accepted", bit - start))?;
    }
    Ok(format!("honest ok, all {} ciphertext bit flips rejected", total - start))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("protocol 1 desk example", c1_protocol1_example),
        ("protocol 2 desk example", c2_protocol2_example),
        ("exhaustive desk-scale round trip", c3_exhaustive),
        ("512-bit / 256-bit round trip", c4_scale),
        ("codec fuzz", c5_codec_fuzz),
        ("intercept-resend QBER", c6_intercept_resend),
        ("cascade reconciliation", c7_cascade),
        ("digest rounds to acceptance", c8_digest),
        ("coded letter tampering", c9_trope),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
