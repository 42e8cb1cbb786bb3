use std::io::{BufRead, BufReader};
use std::process::{Command, Output, Stdio};

use piggybank::numcore::{is_probable_prime, Natural};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_piggybank"));
    c.env_remove("PIGGYBANK_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const P1_EXAMPLE: [&str; 18] = [
    "exchange", "p1", "--variant", "base", "--n", "51", "--e", "3", "--d", "11", "--R", "13", "--S", "5", "--K", "29", "--mode", "inproc",
];
const P2_EXAMPLE: [&str; 14] = ["exchange", "p2", "--p", "37", "--g", "2", "--R", "11", "--S", "3", "--K", "10", "--mode", "inproc"];

#[test]
fn desk_examples_verbatim() {
    let o = run(&P1_EXAMPLE);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("S=5 K=29"));
    // challenge frame carries 4
    assert!(out.lines().nth(1).unwrap().starts_with("tx 50424e4b0101010001000000010400000001"));

    let o = run(&P2_EXAMPLE);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("K=10 shared=14"));
}

#[test]
fn unseeded_run_reports_its_seed() {
    let o = run(&["exchange", "p1", "--bits", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let seed = err.lines().next().unwrap().strip_prefix("seed=").unwrap();
    let again = run(&["exchange", "p1", "--bits", "64", "--seed", seed]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn seed_from_environment() {
    let a = bin().args(["exchange", "p2", "--bits", "32"]).env("PIGGYBANK_SEED", "12").output().unwrap();
    let b = run(&["exchange", "p2", "--bits", "32", "--seed", "12"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(a.stderr.is_empty());
}

#[test]
fn keygen() {
    let a = run(&["keygen", "rsa", "--bits", "16", "--e", "3", "--seed", "7"]);
    let b = run(&["keygen", "rsa", "--bits", "16", "--e", "3", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("d="));

    assert_eq!(run(&["keygen", "rsa", "--bits", "4"]).status.code(), Some(2));

    let o = run(&["keygen", "dh", "--bits", "8", "--seed", "1"]);
    let p: Natural = stdout(&o).lines().next().unwrap().strip_prefix("p=").unwrap().parse().unwrap();
    assert!(is_probable_prime(&p, 64));
    assert!(is_probable_prime(&((&p - 1u32) / 2u32), 64));
}

#[test]
fn keygen_secret_file_feeds_exchange() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("bob.key");
    let o = run(&["keygen", "rsa", "--bits", "128", "--e", "65537", "--seed", "3", "--secret-out", key.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&key).unwrap();
    assert!(text.contains("d=") && text.contains("p=") && text.contains("q="));
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        assert_eq!(std::fs::metadata(&key).unwrap().permissions().mode() & 0o777, 0o600);
    }
    let o = run(&["exchange", "p1", "--key", key.to_str().unwrap(), "--S", "12345", "--K", "678", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("S=12345 K=678"));
}

#[test]
fn usage_and_io_exit_codes() {
    for args in [
        &["exchange"][..],
        &["exchange", "p3"],
        &["exchange", "p1", "--variant", "v7", "--bits", "64"],
        &["exchange", "p1", "--n", "51", "--e", "3"],
        &["exchange", "p1", "--n", "51", "--e", "3", "--d", "11", "--mode", "carrier-pigeon"],
        &["exchange", "p2", "--p", "37", "--g", "2", "--R", "36"],
        &["qkd", "--pulses", "many"],
        &["qkd", "--sample-frac", "1"],
        &["trope", "--bits", "64", "--hash", "md5"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?} produced output");
        assert_eq!(String::from_utf8(o.stderr).unwrap().lines().count(), 1, "{args:?}");
    }
    assert_eq!(run(&["qkd", "--scenario", "/definitely/not/here"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn listen_connect_matches_inproc() {
    let mut listen_args: Vec<&str> = P1_EXAMPLE.to_vec();
    *listen_args.last_mut().unwrap() = "listen";
    listen_args.extend(["--addr", "127.0.0.1:0", "--seed", "9"]);
    let mut server = bin().args(&listen_args).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    let mut lines = BufReader::new(server.stderr.take().unwrap()).lines();
    let addr = lines.next().unwrap().unwrap().strip_prefix("listening on ").unwrap().to_string();

    let mut connect_args: Vec<&str> = P1_EXAMPLE.to_vec();
    *connect_args.last_mut().unwrap() = "connect";
    connect_args.extend(["--addr", &addr, "--seed", "9"]);
    let client = run(&connect_args);
    let server = server.wait_with_output().unwrap();
    assert_eq!(client.status.code(), Some(0));
    assert_eq!(server.status.code(), Some(0));

    let mut inproc_args = P1_EXAMPLE.to_vec();
    inproc_args.extend(["--seed", "9"]);
    let inproc = run(&inproc_args);
    assert_eq!(stdout(&server), stdout(&inproc));
    assert_eq!(stdout(&client).lines().next(), Some("S=5 K=29"));
}

#[test]
fn trope_command() {
    let base = ["trope", "--n", "51", "--e", "3", "--d", "11", "--R", "13", "--S", "5", "--K", "29", "--seed", "1"];
    let o = run(&base);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("S=5 K=29\nmanifest_ok=true\ndescription=sealed deposit\n"), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("tx ") || l.starts_with("rx ")).count(), 5);

    let mut tampered = base.to_vec();
    tampered.extend(["--tamper-bit", "3:200"]);
    let o = run(&tampered);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("manifest_ok=false"));
}

#[test]
fn qkd_csv_reproducible_and_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("ideal.txt");
    std::fs::write(&scenario, "# ideal link\npulses=512\np_noise=0\neve_fraction=0\ntrials=20\nseed=5\n").unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for csv in [&csv_a, &csv_b] {
        let o = run(&["qkd", "--scenario", scenario.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).starts_with("strategy"));
    }
    let a = std::fs::read(&csv_a).unwrap();
    assert_eq!(a, std::fs::read(&csv_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "residual_errors").unwrap();
    for line in text.lines().skip(1) {
        let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{line}");
    }
}

#[test]
fn qkd_digest_rounds_match_geometric_mean() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let o = run(&[
        "qkd", "--pulses", "128", "--p-noise", "0.01", "--eve-fraction", "0", "--sample-frac", "0", "--trials", "10000",
        "--max-rounds", "1000", "--seed", "2", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let summary = text.lines().find(|l| l.starts_with("digest,summary,")).unwrap();
    let mean: f64 = summary.split(',').nth(2).unwrap().parse().unwrap();
    let analytic = 1.0 / 0.99f64.powi(64);
    assert!((mean - analytic).abs() / analytic < 0.05, "{mean} vs {analytic}");
}
