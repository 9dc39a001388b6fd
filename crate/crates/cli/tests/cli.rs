use std::path::Path;
use std::process::{Command, Output};

fn qkge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkge")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_dataset(dir: &Path) {
    std::fs::write(
        dir.join("train.txt"),
        "alga\tpart_of\tplant\nplant\tpart_of\tlife\nbird\tisa\tanimal\nmammal\tisa\tanimal\nanimal\tpart_of\tlife\nalgae\tisa\tplant\n",
    )
    .unwrap();
    std::fs::write(dir.join("valid.txt"), "alga\tisa\tplant\n").unwrap();
    std::fs::write(dir.join("test.txt"), "bird\tpart_of\tlife\nmammal\tpart_of\tlife\n").unwrap();
}

fn train_into(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qkge(&args)
}

#[test]
fn train_writes_checkpoints_log_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let out = tmp.path().join("run");
    let o = train_into(tmp.path(), &out, &["--epochs", "3", "--qubits", "2", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.json", "latest.ckpt", "final.ckpt", "train_log.jsonl"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log = std::fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    // 6 positives, 2 per batch, one execution per batched step.
    assert_eq!(records[0]["circuit_executions"], 3);
    assert!(records[2]["valid_mrr"].is_number());
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["train"]["seed"], 7);
    assert_eq!(config["train"]["learning_rate"], 0.001);
    assert_eq!(
        std::fs::read(out.join("latest.ckpt")).unwrap(),
        std::fs::read(out.join("final.ckpt")).unwrap()
    );
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert!(train_into(tmp.path(), out, &["--epochs", "2", "--qubits", "2"]).status.success());
    }
    assert_eq!(
        std::fs::read(a.join("final.ckpt")).unwrap(),
        std::fs::read(b.join("final.ckpt")).unwrap()
    );
}

#[test]
fn eval_and_score_read_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    let out = tmp.path().join("run");
    assert!(train_into(tmp.path(), &out, &["--epochs", "1", "--qubits", "2"]).status.success());
    let ckpt = out.join("final.ckpt");
    let data = tmp.path().to_str().unwrap();
    let report_dir = tmp.path().join("reports");

    let o = qkge(&[
        "eval",
        "--data",
        data,
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--split",
        "test",
        "--ties",
        "optimistic",
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("MRR"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("metrics_test.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["n_evaluated"], 2);
    assert_eq!(report["ties"], "optimistic");
    assert_eq!(report["triples"][0]["head"], "bird");

    let o = qkge(&["score", "--ckpt", ckpt.to_str().unwrap(), "bird", "isa", "animal"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let delta: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&delta));

    let o = qkge(&["score", "--ckpt", ckpt.to_str().unwrap(), "alge", "isa", "animal"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("alge") && msg.contains("alga"), "{msg}");

    for split in ["train", "bogus"] {
        let o = qkge(&["eval", "--data", data, "--ckpt", ckpt.to_str().unwrap(), "--split", split]);
        assert_eq!(o.status.code(), Some(1), "split {split}");
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let o = train_into(&missing, &tmp.path().join("out"), &["--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));

    write_dataset(tmp.path());
    let o = train_into(tmp.path(), &tmp.path().join("out"), &["--batch-size", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("batch size"));

    std::fs::write(tmp.path().join("bad.json"), r#"{"epoch": 3}"#).unwrap();
    let bad = tmp.path().join("bad.json");
    let o = train_into(tmp.path(), &tmp.path().join("out"), &["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(tmp.path().join("broken.ckpt"), "{}").unwrap();
    let o = qkge(&["score", "--ckpt", tmp.path().join("broken.ckpt").to_str().unwrap(), "a", "b", "c"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(qkge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qkge(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_dataset_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path());
    std::fs::write(tmp.path().join("train.txt"), "a\tr\tb\nonly two\tfields\n").unwrap();
    let o = train_into(tmp.path(), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2"), "{}", stderr(&o));
}

#[test]
fn resources_compare_batched_and_sequential() {
    let o = qkge(&["resources", "--batch", "4", "--json"]);
    assert!(o.status.success());
    let est: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(est["n_address_qubits"], 2);
    assert_eq!(est["executions_batched"], 1);
    assert_eq!(est["executions_sequential"], 4);
    assert_eq!(est["gate_count"], 170);

    let o = qkge(&["resources", "--batch", "8", "--elements", "5216", "--epochs", "20"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("executions / run") && text.contains("13040") && text.contains("104320"), "{text}");

    assert_eq!(qkge(&["resources", "--batch", "6"]).status.code(), Some(1));
}
