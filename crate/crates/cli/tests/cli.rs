use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const GENESIS: &str = "0100000000000000000000000000000000000000000000000000000000000000000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa4b1e5e4a29ab5f49ffff001d1dac2b7c";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zkbtc"))
        .env("ZKBTC_DATA_DIR", dir)
        .args(args)
        .output()
        .expect("spawn zkbtc")
}

fn json(dir: &Path, args: &[&str], code: i32) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = run(dir, &full);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stdout).expect("single JSON document")
}

fn gen(dir: &Path, seed: &str) {
    json(dir, &["--seed", seed, "gen-testchain", "--blocks", "10", "--nbits", "20010000", "--out", "chain"], 0);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((entry.strip_prefix(dir).unwrap().display().to_string(), fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    fs::read_dir(dir)
        .unwrap()
        .flat_map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() { walk(&p) } else { vec![p] }
        })
        .collect()
}

#[test]
fn runs_are_byte_identical() {
    let script: &[&[&str]] = &[
        &["gen-testchain", "--blocks", "10", "--nbits", "20010000", "--out", "chain"],
        &["por-prove", "--chain", "chain", "--threshold", "1000", "--tx-block", "0", "--tx-index", "0", "--vout", "0",
            "--key-index", "0", "--backend", "hybrid", "--out", "h.json"],
        &["por-prove", "--chain", "chain", "--threshold", "1000", "--tx-block", "0", "--tx-index", "0", "--vout", "0",
            "--key-index", "0", "--backend", "dv", "--out", "d.json"],
        &["lc-prove", "--chain", "chain", "--epoch-len", "4", "--out", "lc"],
        &["lc-verify", "--proofs", "lc", "--params", "chain/params.json"],
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        let mut stdout = Vec::new();
        for args in script {
            let mut full = vec!["--seed", "c0ffee"];
            full.extend_from_slice(args);
            let out = run(tmp.path(), &full);
            assert!(out.status.success(), "{args:?}");
            // Paths in the output embed the temp dir; compare the rest.
            stdout.push(String::from_utf8(out.stdout).unwrap().replace(tmp.path().to_str().unwrap(), "<dir>"));
        }
        snapshots.push((stdout, tree(tmp.path())));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn seed_changes_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "01");
    gen(b.path(), "02");
    assert_ne!(fs::read(a.path().join("chain/keys.json")).unwrap(), fs::read(b.path().join("chain/keys.json")).unwrap());
}

#[test]
fn parse_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let h = json(tmp.path(), &["parse-header", "--hex", GENESIS], 0);
    assert_eq!(h["hash"], "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f");
    assert_eq!(h["nbits"], "1d00ffff");
    assert_eq!(h["meets_target"], true);
    let coinbase = "01000000010000000000000000000000000000000000000000000000000000000000000000ffffffff4d04ffff001d0104455468652054696d65732030332f4a616e2f32303039204368616e63656c6c6f72206f6e206272696e6b206f66207365636f6e64206261696c6f757420666f722062616e6b73ffffffff0100f2052a01000000434104678afdb0fe5548271967f1a67130b7105cd6a828e03909a67962e0ea1f61deb649f6bc3f4cef38c4f35504e51ec112de5c384df7ba0b8d578a4c702b6bf11d5fac00000000";
    let tx = json(tmp.path(), &["parse-tx", "--hex", coinbase], 0);
    assert_eq!(tx["txid"], "4a5e1e4baab89f3a32518a88c31bc87f618f76673e2cc77ab2127b7afdeda33b");
    assert_eq!(tx["coinbase"], true);
    assert_eq!(tx["outputs"][0]["value"], 5_000_000_000u64);
    assert_eq!(tx["outputs"][0]["p2pkh"], Value::Null);
    let bad = json(tmp.path(), &["parse-header", "--hex", "00"], 1);
    assert!(bad["error"].as_str().unwrap().contains("80"));
}

#[test]
fn merkle_branch_and_verify() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), "aa");
    let branch = run(tmp.path(), &["--json", "merkle-branch", "--block", "chain/blocks/3.bin", "--index", "0"]);
    fs::write(tmp.path().join("b.json"), &branch.stdout).unwrap();
    json(tmp.path(), &["merkle-verify", "--branch", "b.json"], 0);
    let zero = "00".repeat(32);
    json(tmp.path(), &["merkle-verify", "--branch", "b.json", "--root", &zero], 2);
    json(tmp.path(), &["merkle-branch", "--block", "chain/blocks/3.bin", "--index", "5"], 1);
}

#[test]
fn chain_validate_with_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), "bb");
    let full = json(tmp.path(), &["chain-validate", "--headers", "chain/headers.bin"], 0);
    assert_eq!(full["state"]["height"], 10);
    let headers = fs::read(tmp.path().join("chain/headers.bin")).unwrap();
    fs::write(tmp.path().join("chain/head.bin"), &headers[..80 * 6]).unwrap();
    fs::write(tmp.path().join("chain/tail.bin"), &headers[80 * 6..]).unwrap();
    let head = json(tmp.path(), &["chain-validate", "--headers", "chain/head.bin"], 0);
    fs::write(tmp.path().join("cp.json"), head["state"].to_string()).unwrap();
    let tail = json(tmp.path(), &["chain-validate", "--headers", "chain/tail.bin", "--checkpoint", "cp.json"], 0);
    assert_eq!(tail["state"], full["state"]);
    // Without params.json alongside, mainnet rules reject the regtest genesis.
    fs::copy(tmp.path().join("chain/headers.bin"), tmp.path().join("loose.bin")).unwrap();
    let r = json(tmp.path(), &["chain-validate", "--headers", "loose.bin"], 2);
    assert_eq!(r["height"], 0);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["por-verify", "--threshold", "1"]).status.code(), Some(1));
    json(tmp.path(), &["chain-validate", "--headers", "missing.bin"], 1);
    json(tmp.path(), &["--seed", "zz", "stark-demo", "--v", "2", "--x", "1"], 1);
    assert_eq!(run(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn lc_verify_resumes_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), "cc");
    json(tmp.path(), &["lc-prove", "--chain", "chain", "--epoch-len", "4", "--out", "lc"], 0);
    fs::create_dir(tmp.path().join("first")).unwrap();
    fs::rename(tmp.path().join("lc/epoch-000000.json"), tmp.path().join("first/epoch-000000.json")).unwrap();
    let first = json(tmp.path(), &["lc-verify", "--proofs", "first", "--params", "chain/params.json"], 0);
    fs::write(tmp.path().join("client.json"), first["client"].to_string()).unwrap();
    let rest = json(tmp.path(), &["lc-verify", "--proofs", "lc", "--params", "chain/params.json", "--checkpoint", "client.json"], 0);
    assert_eq!(rest["epochs_verified"], 3);
    assert_eq!(rest["client"]["height"], 10);
    let fresh = json(tmp.path(), &["lc-verify", "--proofs", "lc", "--params", "chain/params.json"], 2);
    assert_eq!(fresh["failed_epoch"], 0);
    assert_eq!(fresh["client"]["height"], 0);
}

#[test]
fn stark_demo_reports_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let r = json(tmp.path(), &["stark-demo", "--v", "100", "--x", "7", "--zk", "--fast"], 0);
    assert_eq!(r["queries"], 16);
    assert!(r["proof_bytes"].as_u64().unwrap() < 200 * 1024);
    json(tmp.path(), &["stark-demo", "--v", "7", "--x", "7"], 2);
}
