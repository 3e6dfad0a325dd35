use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gcpim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcpim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn gcpim")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = gcpim(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let o = gcpim(dir, args);
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn put(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

const PAIRS: &str = "a,b\n0,0\n0,1\n1,0\n1,1\n";

fn with_variation(dir: &Path, name: &str, sigmas: (f64, f64, f64)) {
    let cfg = serde_json::json!({
        "variation": {
            "sigma_tau": sigmas.0,
            "sigma_sa": sigmas.1,
            "sigma_drive": sigmas.2,
            "seed": 7
        }
    });
    put(dir, name, &cfg.to_string());
}

#[test]
fn compile_xor_is_nor_only() {
    let d = TempDir::new().unwrap();
    put(d.path(), "xor.pim", "input a, b\ny = a ^ b\n");
    let out = ok(d.path(), &["compile", "xor.pim", "--out", "o"]);
    assert!(out.contains("5 gates (NOT 2, NOR 3)"), "{out}");
    let prog: serde_json::Value = serde_json::from_str(&read(d.path(), "o/xor.json")).unwrap();
    let ops = prog["ops"].as_array().unwrap();
    assert!(!ops.is_empty());
    let text = prog["ops"].to_string().to_lowercase();
    for bad in ["\"and\"", "\"or\"", "\"xor\""] {
        assert!(!text.contains(bad), "non-NOR gate {bad} in {text}");
    }
}

#[test]
fn empty_program_exits_3() {
    let d = TempDir::new().unwrap();
    put(d.path(), "e.pim", "# nothing\n");
    let (c, err) = code(d.path(), &["compile", "e.pim"]);
    assert_eq!(c, 3);
    assert!(err.contains("no statements"), "{err}");
}

#[test]
fn syntax_error_names_position() {
    let d = TempDir::new().unwrap();
    put(d.path(), "s.pim", "input a\ny = a |\n");
    let (c, err) = code(d.path(), &["compile", "s.pim"]);
    assert_eq!(c, 3);
    assert!(err.contains('2'), "{err}");
}

#[test]
fn capacity_exits_4() {
    let d = TempDir::new().unwrap();
    let n = 70;
    let ins: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut src = format!("input {}\n", ins.join(", "));
    for i in 0..n - 1 {
        src += &format!("o{i} = ~(x{i} | x{})\n", i + 1);
    }
    put(d.path(), "big.pim", &src);
    let (c, err) = code(d.path(), &["compile", "big.pim"]);
    assert_eq!(c, 4, "{err}");
    assert!(err.contains("70 values live"), "{err}");
}

#[test]
fn nor_run_writes_outputs_and_ledger() {
    let d = TempDir::new().unwrap();
    put(d.path(), "nor.pim", "input a, b\ny = ~(a | b)\n");
    put(d.path(), "in.csv", PAIRS);
    ok(d.path(), &["compile", "nor.pim", "--out", "o"]);
    ok(d.path(), &["run", "o/nor.json", "in.csv", "--out", "o"]);
    assert_eq!(read(d.path(), "o/outputs.csv"), "a,b,y\n0,0,1\n0,1,0\n1,0,0\n1,1,0\n");
    let ledger = read(d.path(), "o/ledger.csv");
    let nors: Vec<&str> = ledger.lines().filter(|l| l.contains(",nor,")).collect();
    assert_eq!(nors.len(), 1, "{ledger}");
    let energy: f64 = nors[0].rsplit(',').next().unwrap().parse().unwrap();
    assert!((energy - 13.5 * 64.0).abs() < 1e-9, "{energy}");
}

#[test]
fn input_columns_are_matched_by_name() {
    let d = TempDir::new().unwrap();
    put(d.path(), "p.pim", "input a, b\ny = a & ~b\n");
    put(d.path(), "in.csv", "b,a\n0,1\n1,1\n");
    ok(d.path(), &["compile", "p.pim", "--out", "o"]);
    ok(d.path(), &["run", "o/p.json", "in.csv", "--mode", "ideal", "--out", "o"]);
    assert_eq!(read(d.path(), "o/outputs.csv"), "a,b,y\n1,0,1\n1,1,0\n");
}

#[test]
fn width_mismatch_exits_7() {
    let d = TempDir::new().unwrap();
    put(d.path(), "nor.pim", "input a, b\ny = ~(a | b)\n");
    put(d.path(), "in.csv", "a\n0\n");
    ok(d.path(), &["compile", "nor.pim", "--out", "o"]);
    let (c, _) = code(d.path(), &["run", "o/nor.json", "in.csv"]);
    assert_eq!(c, 7);
    let rows: String = std::iter::once("a,b\n".to_string())
        .chain((0..65).map(|_| "0,1\n".to_string()))
        .collect();
    put(d.path(), "wide.csv", &rows);
    let (c, err) = code(d.path(), &["run", "o/nor.json", "wide.csv"]);
    assert_eq!(c, 7, "{err}");
}

#[test]
fn trace_writes_waveforms() {
    let d = TempDir::new().unwrap();
    put(d.path(), "nor.pim", "input a, b\ny = ~(a | b)\n");
    put(d.path(), "in.csv", PAIRS);
    ok(d.path(), &["compile", "nor.pim", "--out", "o"]);
    ok(d.path(), &["run", "o/nor.json", "in.csv", "--trace", "--out", "o"]);
    let t = read(d.path(), "o/trace.csv");
    assert!(t.starts_with("time_ns,signal_name,value\n"));
    assert!(t.lines().count() > 10);
    let (c, _) = code(d.path(), &["run", "o/nor.json", "in.csv", "--trace", "--mode", "ideal"]);
    assert_eq!(c, 7);
}

#[test]
fn mc_without_variation_exits_5() {
    let d = TempDir::new().unwrap();
    let (c, err) = code(d.path(), &["mc", "nor", "--trials", "10"]);
    assert_eq!(c, 5);
    assert!(err.contains("variation"), "{err}");
}

#[test]
fn zero_sigma_mc_is_perfect() {
    let d = TempDir::new().unwrap();
    with_variation(d.path(), "cfg.json", (0.0, 0.0, 0.0));
    ok(d.path(), &["--config", "cfg.json", "mc", "nor", "--trials", "50", "--out", "o"]);
    let r: serde_json::Value = serde_json::from_str(&read(d.path(), "o/report.json")).unwrap();
    let combos = r.as_object().unwrap();
    assert_eq!(combos.len(), 4);
    for (k, c) in combos {
        assert_eq!(c["trials"], 50, "{k}");
        assert_eq!(c["success_rate"], 1.0, "{k}");
    }
}

#[test]
fn mc_floor_exits_8() {
    let d = TempDir::new().unwrap();
    with_variation(d.path(), "cfg.json", (0.6, 0.2, 0.2));
    let (c, err) = code(
        d.path(),
        &["--config", "cfg.json", "mc", "nor", "--trials", "200", "--floor", "0.999", "--out", "o"],
    );
    assert_eq!(c, 8, "{err}");
    // the report is still written
    assert!(d.path().join("o/report.csv").exists());
}

#[test]
fn mc_over_a_program() {
    let d = TempDir::new().unwrap();
    with_variation(d.path(), "cfg.json", (0.0, 0.0, 0.0));
    put(d.path(), "xor.pim", "input a, b\ny = a ^ b\n");
    ok(d.path(), &["compile", "xor.pim", "--out", "o"]);
    ok(d.path(), &["--config", "cfg.json", "mc", "o/xor.json", "--trials", "20", "--out", "o"]);
    let r = read(d.path(), "o/report.csv");
    assert_eq!(r.lines().count(), 5, "{r}");
}

#[test]
fn calibrate_writes_usable_config() {
    let d = TempDir::new().unwrap();
    put(
        d.path(),
        "cal.json",
        r#"{"calibration": {"trials": 400}}"#,
    );
    let out = ok(d.path(), &["--config", "cal.json", "calibrate", "--out", "o"]);
    assert!(out.contains("read at 15000 ns: 1, at 15001 ns: 0"), "{out}");
    let cfg: serde_json::Value = serde_json::from_str(&read(d.path(), "o/calibrated.json")).unwrap();
    let tau = cfg["model"]["tau_ns"].as_f64().unwrap();
    assert!((tau - 21640.426).abs() < 0.01, "{tau}");
    assert!(cfg["variation"]["sigma_tau"].as_f64().unwrap() > 0.0);
    ok(d.path(), &["--config", "o/calibrated.json", "mc", "not", "--trials", "50", "--floor", "0.9", "--out", "m"]);
}

#[test]
fn impossible_calibration_exits_5() {
    let d = TempDir::new().unwrap();
    put(
        d.path(),
        "cal.json",
        r#"{"calibration": {"trials": 200, "min_scale": 0.08}}"#,
    );
    let (c, err) = code(d.path(), &["--config", "cal.json", "calibrate", "--target", "1.0"]);
    assert_eq!(c, 5, "{err}");
}

#[test]
fn report_availability() {
    let d = TempDir::new().unwrap();
    let mut l = String::from("start_ns,duration_ns,op,rows,energy_fj\n");
    for r in 0..64 {
        l += &format!("{},4,refresh,{r},100\n", r * 4);
    }
    put(d.path(), "refresh.csv", &l);
    let out = ok(d.path(), &["report", "refresh.csv", "--period", "5000", "--out", "o"]);
    assert!(out.contains("availability 94.88%"), "{out}");
    let s: serde_json::Value = serde_json::from_str(&read(d.path(), "o/summary.json")).unwrap();
    assert_eq!(s["ledgers"][0]["refresh_ns"], 256);
    assert!((s["total_energy_fj"].as_f64().unwrap() - 6400.0).abs() < 1e-9);

    put(d.path(), "plain.csv", "start_ns,duration_ns,op,rows,energy_fj\n0,1,write,0,364.8\n");
    let out = ok(d.path(), &["report", "plain.csv", "--out", "o"]);
    assert!(out.contains("availability 100.00%"), "{out}");
}

#[test]
fn corrupt_ledger_fails() {
    let d = TempDir::new().unwrap();
    put(d.path(), "bad.csv", "start_ns,duration_ns,op,rows,energy_fj\n0,1,teleport,0,1\n");
    let (c, _) = code(d.path(), &["report", "bad.csv"]);
    assert_ne!(c, 0);
    put(d.path(), "bad2.csv", "hello\nworld\n");
    let (c, _) = code(d.path(), &["report", "bad2.csv"]);
    assert_ne!(c, 0);
}

#[test]
fn bad_config_is_rejected() {
    let d = TempDir::new().unwrap();
    put(d.path(), "cfg.json", r#"{"trails": 10}"#);
    let (c, _) = code(d.path(), &["--config", "cfg.json", "report", "x.csv"]);
    assert_eq!(c, 6);
    put(d.path(), "cfg2.json", r#"{"version": 2}"#);
    let (c, _) = code(d.path(), &["--config", "cfg2.json", "report", "x.csv"]);
    assert_eq!(c, 7);
    let (c, _) = code(d.path(), &["run", "p.json", "in.csv", "--mode", "fast"]);
    assert_eq!(c, 2);
}

#[test]
fn every_command_is_deterministic() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    put(p, "xor.pim", "input a, b\ny = a ^ b\n");
    put(p, "hold.pim", &format!("input a, b\nt = {}b\ny = ~(a | t)\n", "~".repeat(2000)));
    put(p, "in.csv", PAIRS);
    put(p, "cal.json", r#"{"calibration": {"trials": 200}}"#);
    let mut runs = Vec::new();
    for k in 0..2 {
        let o = format!("o{k}");
        ok(p, &["compile", "xor.pim", "hold.pim", "--out", &o]);
        ok(p, &["run", &format!("{o}/hold.json"), "in.csv", "--trace", "--out", &o]);
        ok(p, &["--config", "cal.json", "calibrate", "--out", &o]);
        let cfg = format!("{o}/calibrated.json");
        ok(p, &["--config", &cfg, "mc", "nor", "--trials", "300", "--seed", "11", "--out", &o]);
        ok(&p.join(&o), &["report", "ledger.csv", "--out", "."]);
        runs.push(o);
    }
    let files = [
        "xor.json",
        "hold.json",
        "schedule.json",
        "outputs.csv",
        "ledger.csv",
        "trace.csv",
        "calibrated.json",
        "report.json",
        "report.csv",
        "summary.json",
        "summary.csv",
    ];
    for f in files {
        let a = fs::read(p.join(&runs[0]).join(f)).unwrap();
        let b = fs::read(p.join(&runs[1]).join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    // the hold program needed a refresh and the report saw it
    assert!(read(p, "o0/ledger.csv").contains(",refresh,"));
}

#[test]
fn golden_nor_ledger() {
    let d = TempDir::new().unwrap();
    put(d.path(), "nor.pim", "input a, b\ny = ~(a | b)\n");
    put(d.path(), "in.csv", PAIRS);
    ok(d.path(), &["compile", "nor.pim", "--out", "o"]);
    ok(d.path(), &["run", "o/nor.json", "in.csv", "--out", "o"]);
    // 64 columns: W 5.7, NOR 13.5, R 13.3 fJ per column
    assert_eq!(
        read(d.path(), "o/ledger.csv"),
        "start_ns,duration_ns,op,rows,energy_fj\n\
         0,1,write,0,364.8\n\
         1,1,write,1,364.8\n\
         2,3,nor,0 1 2,864\n\
         5,3,read,2,851.2\n"
    );
}
