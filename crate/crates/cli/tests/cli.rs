mod common;

use std::process::Command;

use common::{run, vulntrack};

#[test]
fn import_reports_count() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::sample_dir().join("corpus.jsonl");
    let out = run(
        &dir.path().join("s"),
        &["import", "--corpus", corpus.to_str().unwrap()],
    );
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["imported"], 200);
    let table = run(
        &dir.path().join("t"),
        &[
            "import",
            "--corpus",
            corpus.to_str().unwrap(),
            "--format",
            "table",
        ],
    );
    assert_eq!(table, "imported 200\n");
}

#[test]
fn trend_csv_totals_match_query() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::sample_store(dir.path());
    let csv = run(
        &store,
        &["trend", "--topic", "sqli", "--granularity", "year"],
    );
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("period,count"));
    let total: usize = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    let results: Vec<serde_json::Value> =
        serde_json::from_str(&run(&store, &["query", "--topic", "sqli"])).unwrap();
    assert!(total > 0);
    assert_eq!(total, results.len());
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::sample_store(dir.path());

    let out = vulntrack(&store, &["query", "--topic", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));

    let out = vulntrack(&store, &["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = vulntrack(&store, &["expand", "--topic", "sqli", "--theta", "2"]);
    assert!(!out.status.success());

    let out = vulntrack(&dir.path().join("absent"), &["stats"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("absent").exists());
}

#[test]
fn store_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");
    let bin = env!("CARGO_BIN_EXE_vulntrack");
    let status = Command::new(bin)
        .args(["topic", "create", "--name", "e", "--keywords", "sql"])
        .env("VULNTRACK_STORE", &from_env)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(from_env.join("topics.json").exists());

    let status = Command::new(bin)
        .arg("--store")
        .arg(&from_flag)
        .args(["topic", "create", "--name", "f", "--keywords", "sql"])
        .env("VULNTRACK_STORE", &from_env)
        .status()
        .unwrap();
    assert!(status.success());
    let names = run(&from_env, &["topic", "list"]);
    assert_eq!(names, "[{\"name\":\"e\",\"keywords\":[\"sql\"]}]\n");
    assert!(run(&from_flag, &["topic", "list"]).contains("\"f\""));
}

#[test]
fn finetune_refuses_while_served() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::sample_store(dir.path());
    let before = std::fs::read(store.join("vectors.txt")).unwrap();
    std::fs::write(store.join("serve.lock"), "1\n").unwrap();
    let out = vulntrack(&store, &["finetune", "--epochs", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
    assert_eq!(std::fs::read(store.join("vectors.txt")).unwrap(), before);
}

#[test]
fn topic_export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(
        &a,
        &[
            "topic",
            "create",
            "--name",
            "xss",
            "--keywords",
            "cross-site scripting,XSS",
        ],
    );
    let file = dir.path().join("xss.json");
    run(
        &a,
        &[
            "topic",
            "export",
            "--name",
            "xss",
            "--output",
            file.to_str().unwrap(),
        ],
    );
    run(&b, &["topic", "import", "--file", file.to_str().unwrap()]);
    assert_eq!(
        run(&a, &["topic", "show", "--name", "xss"]),
        run(&b, &["topic", "show", "--name", "xss"])
    );
    assert_eq!(
        run(&a, &["topic", "show", "--name", "xss"]),
        "{\"name\":\"xss\",\"keywords\":[\"cross\",\"site\",\"script\",\"xss\"]}\n"
    );
}

#[test]
fn expand_apply_adds_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::sample_store(dir.path());
    let candidates: Vec<serde_json::Value> = serde_json::from_str(&run(
        &store,
        &[
            "expand", "--topic", "sqli", "--theta", "0.5", "--limit", "3", "--apply",
        ],
    ))
    .unwrap();
    let topic: serde_json::Value =
        serde_json::from_str(&run(&store, &["topic", "show", "--name", "sqli"])).unwrap();
    let keywords = topic["keywords"].as_array().unwrap();
    for c in &candidates {
        assert!(keywords.contains(&c["keyword"]));
    }
    assert_eq!(keywords.len(), 4 + candidates.len());
}

#[test]
fn convert_cve_csv_feeds_import() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cve.csv");
    std::fs::write(
        &csv,
        "Name,Published,Description\n\
         CVE-2010-0001,2010-02-03,\"SQL injection in login.php, allows remote attackers\"\n\
         CVE-2010-0002,not a date,broken row\n\
         CVE-2011-0001,2011-05-06T10:00:00Z,Buffer overflow in parser\n",
    )
    .unwrap();
    let jsonl = dir.path().join("cve.jsonl");
    let out = run(
        &dir.path().join("s"),
        &[
            "convert-cve-csv",
            "--input",
            csv.to_str().unwrap(),
            "--output",
            jsonl.to_str().unwrap(),
        ],
    );
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["written"], 2);
    let out = run(
        &dir.path().join("s"),
        &["import", "--corpus", jsonl.to_str().unwrap()],
    );
    assert!(out.starts_with("{\"imported\":2"));
}

#[test]
fn export_vectors_round_trips_store_file() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::sample_store(dir.path());
    let exported = run(&store, &["export-vectors"]);
    assert_eq!(
        exported.as_bytes(),
        std::fs::read(store.join("vectors.txt")).unwrap()
    );
    let first = exported.lines().next().unwrap();
    assert_eq!(first.split(' ').count(), 1 + 768);
}
