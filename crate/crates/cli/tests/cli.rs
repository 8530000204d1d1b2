use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const VARS: [&str; 8] = [
    "SSEBC_WORKSPACE",
    "SSEBC_SEED",
    "SSEBC_SCHEME",
    "SSEBC_IOTA",
    "SSEBC_P_BITS",
    "SSEBC_MAX_DELAY",
    "SSEBC_FEE",
    "SSEBC_SECURITY_BITS",
];

fn cmd(dir: &Path, env: &[(&str, &str)], args: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ssebc"));
    for v in VARS {
        c.env_remove(v);
    }
    c.current_dir(dir).envs(env.iter().copied()).arg("--workspace").arg("ws").args(args);
    c.output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cmd(dir, &[], args);
    assert!(
        out.status.success(),
        "ssebc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fail(dir: &Path, args: &[&str]) -> String {
    let out = cmd(dir, &[], args);
    assert!(!out.status.success(), "ssebc {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn write_docs(dir: &Path, docs: &[(&str, &str)]) {
    let d = dir.join("docs");
    fs::create_dir_all(&d).unwrap();
    for (name, text) in docs {
        fs::write(d.join(name), text).unwrap();
    }
}

fn three_docs(dir: &Path) {
    write_docs(dir, &[("a.txt", "alpha w one"), ("b.txt", "beta two"), ("c.txt", "w gamma three")]);
}

#[test]
fn end_to_end_scheme_b_decrypts_the_two_matching_documents() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    three_docs(d);
    ok(d, &["keygen", "--seed", "1"]);
    ok(d, &["ingest", "docs"]);
    ok(d, &["index", "--scheme", "B"]);
    assert!(ok(d, &["ask", "w"]).starts_with("offer-1 "));
    ok(d, &["mine"]);
    ok(d, &["fulfill", "offer-1"]);
    ok(d, &["mine"]);
    let out = ok(d, &["decrypt", "offer-1"]);
    assert!(out.starts_with("offer-1: 2 documents"), "{out}");
    assert!(out.contains("alpha w one") && out.contains("w gamma three"));
    assert!(!out.contains("beta"));
}

#[test]
fn end_to_end_scheme_a_with_large_iota() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    three_docs(d);
    ok(d, &["keygen", "--iota", "4096", "--scheme", "A"]);
    ok(d, &["ingest", "docs"]);
    ok(d, &["index"]);
    ok(d, &["ask", "beta", "--deposit", "5"]);
    ok(d, &["mine"]);
    ok(d, &["fulfill", "1"]);
    ok(d, &["mine"]);
    let out = ok(d, &["decrypt", "offer-1"]);
    assert!(out.starts_with("offer-1: 1 documents") && out.contains("beta two"), "{out}");
}

fn session(d: &Path) {
    three_docs(d);
    ok(d, &["keygen", "--seed", "42", "--fee", "1"]);
    ok(d, &["ingest", "docs"]);
    ok(d, &["index"]);
    ok(d, &["ask", "w", "--deadline", "+6"]);
    ok(d, &["ask", "gamma", "--deadline", "+6"]);
    ok(d, &["mine"]);
    ok(d, &["fulfill", "offer-1"]);
    ok(d, &["mine", "3"]);
    fail(d, &["refund", "offer-2"]);
    ok(d, &["mine", "3"]);
    ok(d, &["refund", "offer-2"]);
    ok(d, &["mine"]);
    ok(d, &["decrypt", "offer-1"]);
}

#[test]
fn replaying_a_command_sequence_reproduces_ledger_state_and_transcript() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    session(a.path());
    session(b.path());
    for f in ["ledger.bin", "state.json", "broadcast.txt", "transcripts/transcript.jsonl", "keys.json"] {
        let x = fs::read(a.path().join("ws").join(f)).unwrap();
        let y = fs::read(b.path().join("ws").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let transcript = fs::read_to_string(a.path().join("ws/transcripts/transcript.jsonl")).unwrap();
    let outcomes: Vec<serde_json::Value> = transcript.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(outcomes.len(), 13);
    let early = outcomes.iter().find(|r| r["action"] == "refund offer-2" && r["outcome"] != "ok").unwrap();
    assert!(early["outcome"].as_str().unwrap().contains("locktime"), "{early}");
}

#[test]
fn fuse_refund_waits_for_the_deadline_and_restores_the_deposit() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    three_docs(d);
    ok(d, &["keygen"]);
    ok(d, &["ingest", "docs"]);
    ok(d, &["index"]);
    ok(d, &["ask", "w", "--deadline", "+5", "--deposit", "30"]);
    ok(d, &["mine"]);
    let err = fail(d, &["refund", "offer-1"]);
    assert!(err.contains("locktime"), "{err}");
    ok(d, &["mine", "4"]);
    assert!(ok(d, &["refund", "offer-1"]).contains("fuse"));
    ok(d, &["mine"]);
    let err = fail(d, &["fulfill", "offer-1"]);
    assert!(!err.is_empty());
    let transcript = fs::read_to_string(d.join("ws/transcripts/transcript.jsonl")).unwrap();
    let net: i64 = transcript
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["deltas"]["uprime"].as_i64().unwrap())
        .sum();
    assert_eq!(net, 0);
}

#[test]
fn refused_cosign_posts_nothing() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    three_docs(d);
    ok(d, &["keygen"]);
    ok(d, &["ingest", "docs"]);
    ok(d, &["index"]);
    let before = ok(d, &["inspect"]);
    let err = fail(d, &["ask", "w", "--no-cosign"]);
    assert!(err.contains("cosign"), "{err}");
    ok(d, &["mine"]);
    let after = ok(d, &["inspect"]);
    assert_eq!(before.lines().count(), after.lines().count());
    assert!(!after.contains("type=ask"));
}

#[test]
fn inspect_never_reveals_plaintext_or_keywords() {
    let docs = [
        ("a.txt", "zanzibar quokka marmalade"),
        ("b.txt", "quokka periwinkle"),
        ("c.txt", "xylophone marmalade zanzibar tangerine"),
    ];
    let secrets = ["zanzibar", "quokka", "marmalade", "periwinkle", "xylophone", "tangerine"];
    for (scheme, iota) in [("A", "4096"), ("B", "80"), ("B", "4096")] {
        let t = TempDir::new().unwrap();
        let d = t.path();
        write_docs(d, &docs);
        ok(d, &["keygen", "--iota", iota]);
        ok(d, &["ingest", "docs"]);
        ok(d, &["index", "--scheme", scheme]);
        ok(d, &["ask", "quokka"]);
        ok(d, &["mine"]);
        ok(d, &["fulfill", "offer-1"]);
        ok(d, &["mine"]);
        let mut out = ok(d, &["inspect"]);
        let ids: Vec<String> = out.lines().skip(1).map(|l| l.split(' ').next().unwrap().to_string()).collect();
        for id in &ids {
            out += &ok(d, &["inspect", id]);
        }
        let lower = out.to_lowercase();
        for s in secrets {
            assert!(!lower.contains(s), "scheme {scheme}: inspect leaked {s:?}");
        }
        let kinds = if scheme == "A" { "type=index-a" } else { "type=index-record" };
        assert!(out.contains(kinds), "{out}");
        assert!(out.contains("type=ask") && out.contains("type=return"));
    }
}

#[test]
fn bench_emits_a_tsv_whose_op_counts_fit_a_line() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(d, &["bench", "--out", "bench.tsv"]);
    let tsv = fs::read_to_string(d.join("bench.tsv")).unwrap();
    let mut lines = tsv.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (pairs, ops, pos, hops) = (col("pairs"), col("build_ops"), col("position"), col("hops"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4 * 10);

    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[pairs], r[ops])).collect();
    pts.dedup();
    assert_eq!(pts.len(), 4);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 >= 0.99, "r2 = {r2}");

    for r in &rows {
        assert_eq!(r[hops], 10.0 - r[pos] + 1.0);
    }
}

#[test]
fn config_precedence_is_flag_then_env_then_file() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::create_dir_all(d.join("ws")).unwrap();
    fs::write(d.join("ws/config.toml"), "iota = 4096\nfee = 3\nseed = 11\n").unwrap();
    let out = cmd(d, &[("SSEBC_FEE", "2"), ("SSEBC_SEED", "12")], &["keygen", "--seed", "13"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg: toml::Value = toml::from_str(&fs::read_to_string(d.join("ws/config.toml")).unwrap()).unwrap();
    assert_eq!(cfg["iota"].as_integer(), Some(4096));
    assert_eq!(cfg["fee"].as_integer(), Some(2));
    assert_eq!(cfg["seed"].as_integer(), Some(13));
}

#[cfg(unix)]
#[test]
fn key_file_is_owner_only() {
    use std::os::unix::fs::PermissionsExt;
    let t = TempDir::new().unwrap();
    ok(t.path(), &["keygen"]);
    let mode = fs::metadata(t.path().join("ws/keys.json")).unwrap().permissions().mode();
    assert_eq!(mode & 0o777, 0o600);
    fail(t.path(), &["keygen"]);
}

#[test]
fn a_held_lock_blocks_other_commands() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(d, &["keygen"]);
    fs::write(d.join("ws/.lock"), "").unwrap();
    let err = fail(d, &["mine"]);
    assert!(err.contains("locked"), "{err}");
    fs::remove_file(d.join("ws/.lock")).unwrap();
    ok(d, &["mine"]);
    assert!(!d.join("ws/.lock").exists());
}

#[test]
fn commands_on_an_uninitialized_workspace_fail_clearly() {
    let t = TempDir::new().unwrap();
    let err = fail(t.path(), &["mine"]);
    assert!(err.contains("keygen"), "{err}");
}

#[test]
fn scenario_run_is_deterministic() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::write(
        d.join("honest.txt"),
        "owner doc 1 w alpha w one\nowner doc 2 - beta two\nowner doc 3 w w gamma three\nowner index B\n\
         uprime ask w 10 t=+10\nworld mine\nq fulfill offer-1\nworld mine\nuprime decrypt offer-1\n",
    )
    .unwrap();
    ok(d, &["scenario", "run", "honest.txt", "--out", "one.jsonl"]);
    ok(d, &["scenario", "run", "honest.txt", "--out", "two.jsonl"]);
    let one = fs::read_to_string(d.join("one.jsonl")).unwrap();
    assert_eq!(one, fs::read_to_string(d.join("two.jsonl")).unwrap());
    assert_eq!(one.lines().count(), 9);
    assert!(one.lines().all(|l| l.contains("\"outcome\":\"ok\"")), "{one}");
}
