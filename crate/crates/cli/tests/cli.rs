use std::path::Path;
use std::process::{Command, Output};

fn ahd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AHD_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &[&str] = &["--problem.n", "8", "--problem.train_count", "2", "--islands.pop", "4", "--budget.generations", "3"];

fn tiny_run(dir: &Path, name: &str, extra: &[&str]) -> Output {
    let out = dir.join(name);
    let mut args = vec!["run", "--problem", "tsp", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    ahd(&args, dir)
}

#[test]
fn synthetic_run_writes_all_artifacts_and_honours_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tiny_run(tmp.path(), "r", &["--llm", "synthetic", "--islands.n", "3", "islands.pop=16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("r");
    for f in ["manifest.json", "checkpoint.json", "telemetry.jsonl", "best.py", "config.toml"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let ckpt: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("checkpoint.json")).unwrap()).unwrap();
    let islands = ckpt["islands"].as_array().unwrap();
    assert_eq!(islands.len(), 3);
    assert!(islands.iter().all(|i| i["population"].as_array().unwrap().len() == 16));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["generations"], 3);
    assert_eq!(manifest["config"]["islands"]["n"], 3);
    assert!(manifest["best"]["objective"].as_f64().unwrap() > 0.0);
    assert!(manifest["finished_unix_ms"].as_u64().is_some());
    let best = std::fs::read_to_string(run.join("best.py")).unwrap();
    assert_eq!(manifest["best"]["code"].as_str().unwrap(), best);
}

#[test]
fn missing_credential_fails_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tiny_run(tmp.path(), "live", &["--llm", "live"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("AHD_API_KEY"));
    assert!(!tmp.path().join("live").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tiny_run(tmp.path(), "a", &["--islands.tau", "2.0"])), 1);
    assert_eq!(code(&tiny_run(tmp.path(), "b", &["--islands.bogus", "1"])), 1);
    assert_eq!(code(&tiny_run(tmp.path(), "c", &["--llm", "replay"])), 1);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&ahd(&["run", "--config", missing.to_str().unwrap()], tmp.path())), 1);
    std::fs::write(tmp.path().join("bad.toml"), "[problem]\nkind = \"chess\"\n").unwrap();
    assert_eq!(code(&ahd(&["run", "--config", "bad.toml"], tmp.path())), 1);
    assert_eq!(code(&ahd(&["resume", "no-such-run"], tmp.path())), 1);
}

#[test]
fn replay_of_a_recording_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path().join("t.jsonl");
    let t = t.to_str().unwrap();
    assert_eq!(code(&tiny_run(tmp.path(), "rec", &["--llm", "synthetic", "--record", "--transcript", t])), 0);
    for name in ["p1", "p2"] {
        let o = tiny_run(tmp.path(), name, &["--llm", "replay", "--transcript", t]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["checkpoint.json", "telemetry.jsonl", "best.py"] {
        let rec = std::fs::read(tmp.path().join("rec").join(f)).unwrap();
        assert_eq!(rec, std::fs::read(tmp.path().join("p1").join(f)).unwrap(), "{f}");
        assert_eq!(rec, std::fs::read(tmp.path().join("p2").join(f)).unwrap(), "{f}");
    }
    // Replaying past the end of the recording is a transport failure.
    let o = tiny_run(tmp.path(), "long", &["--llm", "replay", "--transcript", t, "--budget.generations", "40"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("long").join("checkpoint.json").exists());
}

#[test]
fn resume_continues_to_a_larger_budget() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tiny_run(tmp.path(), "r", &["--llm", "synthetic"])), 0);
    let run = tmp.path().join("r");
    let o = ahd(&["resume", run.to_str().unwrap(), "--budget.generations", "5"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["generations"], 5);
}

#[test]
fn report_exports_three_families() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tiny_run(tmp.path(), "r", &["--llm", "synthetic", "--islands.s_mig", "1", "--budget.generations", "5"])), 0);
    let run = tmp.path().join("r");
    let out = tmp.path().join("rep");
    let o = ahd(&["report", run.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let conv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(conv.starts_with("generation,evaluations,best,tokens,tuned\n"));
    assert!(conv.lines().count() >= 2);
    let sims: Vec<_> = std::fs::read_dir(&out).unwrap().flatten().filter(|e| e.file_name().to_string_lossy().starts_with("similarity_g")).collect();
    assert!(!sims.is_empty());
    let mut rdr = csv::Reader::from_path(out.join("arms.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let dn: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("dn_")).map(|(i, _)| i).collect();
    assert_eq!(dn.len(), 5);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let total: u64 = dn.iter().map(|&i| rec[i].parse::<u64>().unwrap()).sum();
        assert_eq!(total, 1);
        rows += 1;
    }
    assert_eq!(rows, 5 * 6);

    // A single island never migrates: no similarity files, no error.
    assert_eq!(code(&tiny_run(tmp.path(), "solo", &["--llm", "synthetic", "--islands.n", "1"])), 0);
    let solo_out = tmp.path().join("solo-rep");
    let o = ahd(&["report", tmp.path().join("solo").to_str().unwrap(), "--out", solo_out.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_dir(&solo_out).unwrap().flatten().all(|e| !e.file_name().to_string_lossy().starts_with("similarity")));

    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&ahd(&["report", "empty"], tmp.path())), 1);
}

#[test]
fn tsed_prints_six_decimals_and_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("a.py"), "def f(x):\n    return x\n").unwrap();
    std::fs::write(d.join("b.py"), "# other names\ndef g(y):\n    return y\n").unwrap();
    std::fs::write(d.join("c.py"), "def f(x):\n    return -x\n").unwrap();
    let o = ahd(&["tsed", "a.py", "b.py"], d);
    assert_eq!(stdout(&o), "1.000000\n");
    let o = ahd(&["tsed", "a.py", "c.py"], d);
    assert_eq!(stdout(&o), "0.875000\n");
    let o = ahd(&["tsed", "--matrix", "."], d);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a.py,b.py,c.py");
    assert_eq!(lines[1], "1.000000,1.000000,0.875000");
    assert_eq!(lines.len(), 4);
    std::fs::write(d.join("broken.txt"), "def (").unwrap();
    assert_eq!(code(&ahd(&["tsed", "a.py", "broken.txt"], d)), 1);
}

#[test]
fn gen_and_baselines() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ahd(&["gen", "--problem", "tsp", "--n", "12", "--count", "3", "--seed", "7", "--out", "set.json"], tmp.path());
    assert_eq!(code(&o), 0);
    let set: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("set.json")).unwrap()).unwrap();
    assert_eq!(set["kind"], "tsp");
    assert_eq!(set["seed"], 7);
    assert_eq!(set["instances"].as_array().unwrap().len(), 3);
    let again = ahd(&["gen", "--problem", "tsp", "--n", "12", "--count", "3", "--seed", "7"], tmp.path());
    assert_eq!(stdout(&again).trim(), std::fs::read_to_string(tmp.path().join("set.json")).unwrap().trim());

    let o = ahd(&["baselines", "--problem", "bpp", "--n", "500", "--count", "2"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("first-fit") && text.contains("best-fit") && text.contains('%'));
    let o = ahd(&["baselines", "--problem", "tsp", "--n", "30", "--count", "2", "--exact"], tmp.path());
    assert_eq!(code(&o), 1);
    let o = ahd(&["baselines", "--problem", "kp", "--n", "20", "--count", "5", "--json"], tmp.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rows"][0]["gap_percent"].as_f64().unwrap() >= 0.0);
}
