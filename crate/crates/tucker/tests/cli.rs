use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tucker::cli::{self, EXIT_BUDGET, EXIT_FAILED, EXIT_INPUT, EXIT_OK};
use tucker::io;
use tucker_core::objective;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tucker"))
}

fn run(args: &[&str]) -> i32 {
    let status = bin().args(args).output().expect("spawn tucker").status;
    status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["generate", "--rank", "2", "--dim", "5", "--seed", "4", "--out", path(&out)];
    args.extend_from_slice(extra);
    assert_eq!(run(&args), EXIT_OK);
    out
}

#[test]
fn generate_is_reproducible_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json", &[]);
    let b = generate(dir.path(), "b.json", &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (t, meta) = io::read_tensor(&a).unwrap();
    let meta = meta.unwrap();
    assert_eq!(meta["r"], 2);
    assert_eq!(meta["d"], 5);
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["exact"], true);
    assert!((t.norm_f() - 1.0).abs() < 1e-14);

    let h = tucker_core::tensor::hosvd(&t, 2).unwrap();
    assert!(objective::loss(&h, &t).unwrap() <= 1e-10);
}

#[test]
fn binary_and_json_generate_the_same_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let j = generate(dir.path(), "t.json", &[]);
    let b = generate(dir.path(), "t.bin", &["--binary"]);
    assert_eq!(&std::fs::read(&b).unwrap()[..4], b"TKR1");
    assert_eq!(io::read_tensor(&j).unwrap().0, io::read_tensor(&b).unwrap().0);
}

#[test]
fn decompose_summary_matches_saved_factors() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = generate(dir.path(), "t.bin", &["--binary"]);
    let out = dir.path().join("run");
    let code = run(&["decompose", path(&t_path), "--rank", "2", "--seed", "3", "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);

    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["status"], "converged");
    let (t, _) = io::read_tensor(&t_path).unwrap();
    let p = io::read_factors(&out.join("factors.json")).unwrap();
    let rep = objective::objective(&p, &t, summary["lambda"].as_f64().unwrap()).unwrap();
    let f = summary["f"].as_f64().unwrap();
    assert!((rep.f - f).abs() <= 1e-12, "recomputed {} vs summary {}", rep.f, f);
    assert!(f <= 1e-3);

    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let lines: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), summary["trace_records"].as_u64().unwrap() as usize);
    assert_eq!(lines[0]["step"], "init");
    assert_eq!(lines.last().unwrap()["f"].as_f64().unwrap(), f);
    assert!(lines.windows(2).all(|w| w[1]["f"].as_f64() <= w[0]["f"].as_f64()));
}

#[test]
fn hosvd_init_starts_at_zero_loss() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = generate(dir.path(), "t.json", &[]);
    let out = dir.path().join("run");
    let code = run(&["decompose", path(&t_path), "--rank", "2", "--init", "hosvd", "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let first: Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert!(first["loss"].as_f64().unwrap() <= 1e-10);
    // HOSVD factors are orthonormal, so R > 0 and the run rebalances.
    assert!(first["reg"].as_f64().unwrap() > 0.0);
    assert!(json(&out.join("summary.json"))["f"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn restarts_write_indexed_files() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = generate(dir.path(), "t.json", &[]);
    let out = dir.path().join("run");
    let code = run(&["decompose", path(&t_path), "--rank", "2", "--restarts", "2", "--seed", "7", "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);
    for i in 0..2 {
        let s = json(&out.join(format!("summary.{i}.json")));
        assert_eq!(s["seed"], 7 + i);
        assert_eq!(s["restart"], i);
        assert!(out.join(format!("factors.{i}.json")).exists());
        assert!(out.join(format!("trace.{i}.jsonl")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = generate(dir.path(), "t.json", &[]);
    let out = dir.path().join("run");
    let t = path(&t_path);
    let o = path(&out);
    assert_eq!(run(&["decompose", t, "--rank", "2", "--budget", "20", "--out", o]), EXIT_BUDGET);
    assert_eq!(json(&out.join("summary.json"))["status"], "budget");

    assert_eq!(run(&["decompose", t, "--out", o]), EXIT_INPUT, "missing rank");
    assert_eq!(run(&["decompose", t, "--rank", "6", "--out", o]), EXIT_INPUT, "rank above dim");
    assert_eq!(run(&["decompose", t, "--rank", "2", "--dim", "4", "--out", o]), EXIT_INPUT);
    assert_eq!(run(&["decompose", t, "--rank", "2", "--epsilon", "-1", "--out", o]), EXIT_INPUT);
    assert_eq!(run(&["decompose", "/nonexistent.json", "--rank", "2", "--out", o]), EXIT_INPUT);
    assert_eq!(run(&["decompose", t, "--rank", "2", "--init", "ones", "--out", o]), EXIT_INPUT);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dims":[2,2,2],"data":[1,2]}"#).unwrap();
    assert_eq!(run(&["decompose", path(&bad), "--rank", "1", "--out", o]), EXIT_INPUT);
    std::fs::write(&bad, b"TKR1\x02").unwrap();
    assert_eq!(run(&["decompose", path(&bad), "--rank", "1", "--out", o]), EXIT_INPUT);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = generate(dir.path(), "t.json", &[]);
    let out = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rank": 2, "budget": 20, "seed": 11, "trace_stride": 5}"#).unwrap();
    let code = run(&["decompose", path(&t_path), "--config", path(&cfg), "--seed", "12", "--out", path(&out)]);
    assert_eq!(code, EXIT_BUDGET);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["seed"], 12);
    assert_eq!(s["config"]["budget"], 20);
    assert_eq!(s["config"]["trace_stride"], 5);

    std::fs::write(&cfg, r#"{"rank": 2, "typo": 1}"#).unwrap();
    assert_eq!(run(&["decompose", path(&t_path), "--config", path(&cfg), "--out", path(&out)]), EXIT_INPUT);
}

#[test]
fn verify_single_check_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("v.json");
    assert_eq!(run(&["verify", "--check", "euler", "--seed", "2", "--out", path(&report)]), EXIT_OK);
    let v = json(&report);
    assert_eq!(v["passed"], true);
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["euler"]);

    let code = run(&["verify", "--check", "orthogonality", "--corrupt-gradient", "--out", path(&report)]);
    assert_eq!(code, EXIT_FAILED);
    assert_eq!(json(&report)["passed"], false);

    assert_eq!(run(&["verify", "--check", "nonsense", "--out", path(&report)]), EXIT_INPUT);
}

#[test]
fn library_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let code = cli::run(["tucker", "generate", "--rank", "2", "--dim", "5", "--seed", "4", "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);
    let via_bin = generate(dir.path(), "u.json", &[]);
    assert_eq!(std::fs::read(out).unwrap(), std::fs::read(via_bin).unwrap());
}
