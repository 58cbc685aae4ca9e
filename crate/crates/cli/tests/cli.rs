use std::path::Path;
use std::process::{Command, Output};

fn pfch(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfch"))
        .args(args)
        .env("PFCH_OUT", root)
        .env_remove("PFCH_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn summary_fft(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("summary.toml")).unwrap();
    let table: toml::Table = text.parse().unwrap();
    table["fft"].as_str().unwrap().to_string()
}

/// Steady initial state with the reference value given, so every protocol
/// run stops at the first tolerance.
const STEADY: &str = r#"
[domain]
n = 16

[initial]
kind = "constant"
value = -0.9

[reference]
value = -0.9
"#;

#[test]
fn simulate_writes_all_artifacts_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let args = [
        "simulate", "--problem", "FCH1", "--n", "32", "--t-final", "1", "--snapshot-times", "0,0.5,1", "--out",
    ];
    let a = root.join("a");
    ok(&pfch(root, &[&args[..], &[a.to_str().unwrap()]].concat()));
    for f in [
        "resolved_config.toml",
        "report.csv",
        "summary.toml",
        "run.log",
        "final.bin",
        "final.csv",
        "snapshot_000.bin",
        "snapshot_002.csv",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    let report = std::fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(report.starts_with("step,t,dt,ERR,accepted,iterations,fft_cumulative,energy,mass\n"));
    let snap = pfch::snapshot::Snapshot::load(a.join("snapshot_001.bin")).unwrap();
    assert_eq!(snap.time, 0.5);
    assert_eq!(snap.field.grid().n(), 32);

    // the resolved config alone reproduces the run
    let b = root.join("b");
    ok(&pfch(
        root,
        &["simulate", "--config", a.join("resolved_config.toml").to_str().unwrap(), "--out", b.to_str().unwrap()],
    ));
    assert_eq!(summary_fft(&a), summary_fft(&b));
}

#[test]
fn invalid_scheme_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pfch(tmp.path(), &["simulate", "--problem", "FCH1", "--scheme", "RK4"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("RK4"));
}

#[test]
fn bad_config_line_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "base = \"FCH2\"\n\n[model\nepsilon = 1\n").unwrap();
    let out = pfch(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn reference_cache_hits_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("steady.toml");
    std::fs::write(&cfg, "base = \"DESK-FCH3\"\n[domain]\nn = 16\n[initial]\nkind = \"constant\"\nvalue = -0.9\n").unwrap();
    let args = ["reference", "--config", cfg.to_str().unwrap(), "--max-level", "3"];
    let first = ok(&pfch(root, &args));
    assert!(first.contains("certified,computed"), "{first}");
    assert!(first.starts_with("DESK-FCH3,-9.0000000000000002e-1,"), "{first}");
    let second = ok(&pfch(root, &args));
    assert!(second.contains("certified,cached"), "{second}");

    let entry = root.join("reference-cache").join("desk-fch3.toml");
    let text = std::fs::read_to_string(&entry).unwrap();
    let mut table: toml::Table = text.parse().unwrap();
    table.insert("spec_hash".into(), toml::Value::String("0".repeat(64)));
    std::fs::write(&entry, toml::to_string(&table).unwrap()).unwrap();
    let third = ok(&pfch(root, &args));
    assert!(third.contains("certified,computed"), "{third}");
}

#[test]
fn benchmark_rows_are_sorted_and_match_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("steady.toml");
    std::fs::write(&cfg, STEADY).unwrap();
    let out = root.join("bench");
    ok(&pfch(
        root,
        &[
            "benchmark", "--config", cfg.to_str().unwrap(), "--problem", "DESK-PFC1", "--problem", "DESK-FCH3",
            "--scheme", "MP,LBDF2", "--jobs", "2", "--out", out.to_str().unwrap(),
        ],
    ));
    let table = std::fs::read_to_string(out.join("table3.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "Prob,Scheme,Step tol.,Point value,Obj. err.,FFT,Clock (sec),CPU (sec)");
    assert_eq!(lines.len(), 5);
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(
        keys,
        [("DESK-FCH3", "MP"), ("DESK-FCH3", "LBDF2"), ("DESK-PFC1", "MP"), ("DESK-PFC1", "LBDF2")]
    );
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 8);
        assert_eq!(f[2].parse::<f64>().unwrap(), 1.0);
    }

    // same run through simulate reports the same transform count
    let sim = root.join("sim");
    ok(&pfch(
        root,
        &[
            "simulate", "--config", cfg.to_str().unwrap(), "--problem", "DESK-FCH3", "--scheme", "MP",
            "--tol", "1", "--t-final", "10", "--out", sim.to_str().unwrap(),
        ],
    ));
    let fft_col = lines[1].split(',').nth(5).unwrap();
    assert_eq!(fft_col, summary_fft(&sim));
}

#[test]
fn compare_solvers_writes_both_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = root.join("steady.toml");
    std::fs::write(&cfg, STEADY).unwrap();
    let out = root.join("cmp");
    ok(&pfch(
        root,
        &[
            "compare-solvers", "--config", cfg.to_str().unwrap(), "--problem", "DESK-FCH3", "--t-final", "1",
            "--out", out.to_str().unwrap(),
        ],
    ));
    let table = std::fs::read_to_string(out.join("table2.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "Prob,Solver,Scheme,Step tol.,T,FFT,Clock (sec),CPU (sec)");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("DESK-FCH3,PGD,BDF2,"));
    assert!(lines[2].starts_with("DESK-FCH3,PAGD,BDF2,"));
    // a steady state needs no solver updates, so the counts agree
    assert_eq!(lines[1].split(',').nth(5), lines[2].split(',').nth(5));
}
