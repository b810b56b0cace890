use std::path::Path;
use std::process::{Command, Output};

use ppimce::compiler::compile_netlist;
use ppimce::dispatch::{run_program, DispatchConfig, TimingOnly};
use ppimce::gc::builder::relu;
use ppimce::sim::ArchProfile;

fn ppimce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppimce"))
        .args(args)
        .env_remove("PPIMCE_PROFILE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses a two-line CSV into (header, row) pairs.
fn row(csv: &str) -> Vec<(String, String)> {
    let mut lines = csv.lines();
    let h = lines.next().unwrap().split(',');
    let r = lines.next().unwrap().split(',');
    h.zip(r).map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn field<'a>(r: &'a [(String, String)], k: &str) -> &'a str {
    &r.iter().find(|(h, _)| h == k).unwrap().1
}

#[test]
fn gc_bench_relu32_reports_simulated_cycles() {
    let r = row(&stdout(&ppimce(&["gc-bench", "--circuit", "relu32", "--units", "16"])));
    let c = relu(32);
    let compiled = compile_netlist(&c, &ArchProfile::gc_benchmark()).unwrap();
    let (_, rep, _) = run_program(&compiled.program, &DispatchConfig::with_units(16), TimingOnly).unwrap();
    assert_eq!(field(&r, "cycles"), rep.total_cycles.to_string());
    assert_eq!(field(&r, "and"), c.counts().and.to_string());
}

#[test]
fn he_bench_mul_passes_functional_check() {
    let r = row(&stdout(&ppimce(&["he-bench", "--op", "mul", "--n", "4096"])));
    assert_eq!(field(&r, "check"), "pass");
    assert!(field(&r, "cycles").parse::<u64>().unwrap() > 0);
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(ppimce(&["gc-bench", "--circuit", "relu32", "--bogus"]).status.code(), Some(2));
    assert_eq!(ppimce(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ppimce(&["gc-bench", "--circuit", "/nonexistent.txt"]).status.code(), Some(1));
}

#[test]
fn garble_then_eval_decodes_plaintext_result() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let g = row(&stdout(&ppimce(&["--seed", "4", "garble", "--circuit", "mul32", "--input", "123456,789", "--out", d])));
    assert_eq!(field(&g, "table_bytes"), (32 * field(&g, "and_gates").parse::<usize>().unwrap()).to_string());
    let e = stdout(&ppimce(&["eval", "--circuit", "mul32", "--dir", d, "--expect-input", "123456,789"]));
    assert_eq!(e, format!("output,value,check\n0,{:#x},pass\n", 123456u64 * 789));
}

fn write_model(dir: &Path) -> String {
    let p = dir.join("model.json");
    std::fs::write(
        &p,
        r#"{"input": 4, "layers": [
            {"kind": "fully_connected", "inputs": 4, "outputs": 2, "weights": [0.5, -0.25, 0.125, 1.0, -0.5, 0.75, 0.25, 0.0], "bias": [0.0, 0.25]},
            {"kind": "relu"}]}"#,
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ppml_is_deterministic_and_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let art = dir.path().join("run.json");
    let art = art.to_str().unwrap();
    let args = ["--seed", "9", "ppml", "--model", &model, "--artifacts", art];
    let a = stdout(&ppimce(&args));
    let first = std::fs::read(art).unwrap();
    assert_eq!(stdout(&ppimce(&args)), a);
    assert_eq!(std::fs::read(art).unwrap(), first);

    let r1 = stdout(&ppimce(&["report", "--input", art, "--format", "json"]));
    let r2 = stdout(&ppimce(&["report", "--input", art, "--format", "json"]));
    assert_eq!(r1, r2);
    let csv = stdout(&ppimce(&["report", "--input", art]));
    assert!(csv.contains("area_mm2,138.3\n") && csv.contains("power_w,9.4\n") && csv.contains("calibrated,true\n"));
}

#[test]
fn profile_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    let slow = ArchProfile { frequency_hz: 5e8, ..ArchProfile::gc_benchmark() };
    std::fs::write(&p, slow.to_json()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ppimce"))
        .args(["gc-bench", "--circuit", "relu32"])
        .env("PPIMCE_PROFILE", &p)
        .output()
        .unwrap();
    let r = row(&stdout(&o));
    let cycles: f64 = field(&r, "cycles").parse().unwrap();
    assert_eq!(field(&r, "latency_us"), format!("{:.3}", cycles / 500.0));

    std::fs::write(&p, "{}").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_ppimce"))
        .args(["gc-bench", "--circuit", "relu32"])
        .env("PPIMCE_PROFILE", &p)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn simulate_runs_an_assembly_stream() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("prog.s");
    std::fs::write(&p, "FREEXOR 0x80, 0x60, 0x61\nFREEXOR 0x81, 0x80, 0x62  # depends on the first\n").unwrap();
    let trace = dir.path().join("t.jsonl");
    let r = row(&stdout(&ppimce(&[
        "simulate",
        "--program",
        p.to_str().unwrap(),
        "--units",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ])));
    assert_eq!(field(&r, "instructions"), "2");
    // Two dependent 3-cycle FreeXORs back to back.
    assert_eq!(field(&r, "cycles"), "6");
    assert!(!std::fs::read_to_string(trace).unwrap().is_empty());
}
