#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn sample_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

pub fn vulntrack(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulntrack"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("VULNTRACK_STORE")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn vulntrack")
}

/// Runs a subcommand that must succeed and returns its stdout.
pub fn run(store: &Path, args: &[&str]) -> String {
    let out = vulntrack(store, args);
    assert!(
        out.status.success(),
        "vulntrack {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A store holding the bundled sample, randomly initialized vectors fine-tuned
/// for a few epochs, and one topic named `sqli`.
pub fn sample_store(dir: &Path) -> PathBuf {
    let store = dir.join("store");
    let sample = sample_dir();
    let s = |name: &str| sample.join(name).to_str().unwrap().to_owned();
    run(
        &store,
        &[
            "dict-load",
            "--file",
            &s("english.txt"),
            "--kind",
            "english",
            "--corrections",
            &s("corrections.tsv"),
        ],
    );
    run(
        &store,
        &["dict-load", "--file", &s("domain.txt"), "--kind", "domain"],
    );
    run(&store, &["import", "--corpus", &s("corpus.jsonl")]);
    run(&store, &["index"]);
    let empty = dir.join("empty.vec");
    std::fs::write(&empty, "").unwrap();
    run(&store, &["load-vectors", "--file", empty.to_str().unwrap()]);
    run(&store, &["finetune", "--epochs", "3"]);
    run(
        &store,
        &[
            "topic",
            "create",
            "--name",
            "sqli",
            "--keywords",
            "sql,inject,vulnerability,php",
        ],
    );
    store
}
