use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[trainer]
epochs = 4
batch_size = 8
checkpoint_every = 2
[pretrain]
expert_episodes = 20
epochs = 2
[eval]
n_games = 30
modes = ["greedy"]
"#;

fn vqg(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqg"))
        .arg("--config")
        .arg(cfg)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("VQG_CONFIG")
        .env_remove("VQG_LOG_DIR")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

#[test]
fn train_is_deterministic_and_replayable() {
    let (dir, cfg) = setup();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&vqg(&cfg, out, &["pretrain"]));
        let init = out.join("pretrain.ckpt");
        ok(&vqg(&cfg, out, &["train", "--init", init.to_str().unwrap()]));
    }
    for f in ["pretrain.ckpt", "final.ckpt", "episodes.jsonl", "metrics.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ep = a.join("episodes.jsonl");
    let o = vqg(&cfg, &a, &["replay", "--episode", ep.to_str().unwrap()]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verified"));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let (dir, cfg) = setup();
    let full = dir.path().join("full");
    ok(&vqg(&cfg, &full, &["train"]));

    let part = dir.path().join("part");
    ok(&vqg(&cfg, &part, &["train"]));
    let mid = part.join("checkpoints").join("epoch-0002.ckpt");
    std::fs::remove_file(part.join("final.ckpt")).unwrap();
    ok(&vqg(&cfg, &part, &["train", "--resume", mid.to_str().unwrap()]));
    assert_eq!(
        std::fs::read(full.join("final.ckpt")).unwrap(),
        std::fs::read(part.join("final.ckpt")).unwrap()
    );
}

#[test]
fn eval_writes_report() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    ok(&vqg(&cfg, &out, &["pretrain"]));
    let ck = out.join("pretrain.ckpt");
    ok(&vqg(&cfg, &out, &["eval", "--checkpoint", ck.to_str().unwrap(), "--split", "NewImage"]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval-report.json")).unwrap()).unwrap();
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["n_games"], 30);
    let s = results[0]["success"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s));
}

#[test]
fn missing_checkpoint_is_a_runtime_error() {
    let (dir, cfg) = setup();
    let o = vqg(&cfg, dir.path(), &["eval", "--checkpoint", "/does/not/exist.ckpt"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[rewards]\nlambda = -0.5\n").unwrap();
    let o = vqg(&bad, dir.path(), &["gen-world"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rewards.lambda"));

    std::fs::write(&bad, "[trainer]\nlearning_rate = 0.1\n").unwrap();
    let o = vqg(&bad, dir.path(), &["gen-world"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));

    let o = vqg(&dir.path().join("absent.toml"), dir.path(), &["gen-world"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_vqg")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_vqg")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}
