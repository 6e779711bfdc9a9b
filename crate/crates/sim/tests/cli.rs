use std::process::{Command, Output};

use serde_json::Value;

fn sisa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sisa"))
        .args(args)
        .env_remove("SISA_CONFIG_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).expect("error json on stderr")
}

#[test]
fn simulate_reports_macs() {
    let v = stdout_json(&sisa(&["simulate", "--gemm", "12x8192x3072", "--arch", "sisa"]));
    assert_eq!(v["macs"], 301_989_888u64);
    assert_eq!(v["mode"], "independent×8");
    for key in ["cycles", "dram_read_bytes", "dram_write_bytes", "sram_reads", "sram_writes", "energy_j", "edp"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn zero_dimension_is_a_config_error() {
    let o = sisa(&["simulate", "--gemm", "0x1x1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "config");
}

#[test]
fn redas_reports_its_shape() {
    let v = stdout_json(&sisa(&["simulate", "--arch", "redas", "--gemm", "16x4864x896"]));
    assert_eq!(v["chosen_shape"], "16x448");
}

#[test]
fn sweep_rows_and_labels() {
    let o = sisa(&["sweep", "--model", "qwen2.5-0.5b", "--arch", "sisa,tpu"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,arch,mode,cycles,energy_j,edp_js,dram_rd,dram_wr,active_slab_cycles,gated_slab_cycles,speedup,norm_edp"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 300);
    let find = |m: &str, arch: &str| rows.iter().find(|r| r[0] == m && r[1] == arch).unwrap().clone();
    assert_eq!(find("16", "sisa")[2], "independent×8");
    assert_eq!(find("33", "sisa")[2], "fused64×2");
    assert_eq!(find("16", "sisa")[10], "1.0");
}

#[test]
fn sweep_output_is_byte_stable() {
    let args = ["sweep", "--model", "llama3.2-3b", "--m", "1,16,33,129"];
    let a = sisa(&args);
    let b = sisa(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_row_reproduced_by_simulate() {
    let sweep = sisa(&["sweep", "--gemm-nk", "4864x896", "--m", "16,65", "--arch", "tpu,sisa", "--format", "json"]);
    let rows = stdout_json(&sweep);
    for row in rows.as_array().unwrap() {
        let m = row["m"].as_u64().unwrap();
        let gemm = format!("{m}x4864x896");
        let tpu = stdout_json(&sisa(&["simulate", "--gemm", &gemm, "--arch", "tpu"]));
        let me = stdout_json(&sisa(&["simulate", "--gemm", &gemm, "--arch", row["arch"].as_str().unwrap()]));
        assert_eq!(row["cycles"], me["cycles"]);
        let speedup = tpu["cycles"].as_f64().unwrap() / me["cycles"].as_f64().unwrap();
        assert_eq!(row["speedup"].as_f64().unwrap(), speedup);
        // aggregate EDP is recomputed as energy × delay, so allow rounding
        let norm = me["edp"].as_f64().unwrap() / tpu["edp"].as_f64().unwrap();
        let got = row["norm_edp"].as_f64().unwrap();
        assert!((got - norm).abs() <= 1e-12 * norm, "{got} vs {norm}");
    }
}

#[test]
fn compare_on_a_model_point() {
    let v = stdout_json(&sisa(&["compare", "--model", "qwen2.5-0.5b", "--m", "16"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["arch"], "sisa");
    assert_eq!(rows[2]["mode"], "reshape16x448");
    assert!(rows[1]["speedup"].as_f64().unwrap() < 1.0);
}

#[test]
fn unknown_model_is_a_config_error() {
    let o = sisa(&["sweep", "--model", "no-such-model"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = sisa(&["simulate", "--gemm", "1x1x1", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["macs"], 1);
}

#[test]
fn config_root_env_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let text = sisa_sim::config::DEFAULT_CONFIG.replace("dram_bytes_per_cycle = 2300", "dram_bytes_per_cycle = 23");
    std::fs::write(dir.path().join("default.toml"), text).unwrap();
    let run = |env: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sisa"));
        c.args(["simulate", "--gemm", "16x4864x896"]);
        if env {
            c.env("SISA_CONFIG_ROOT", dir.path());
        } else {
            c.env_remove("SISA_CONFIG_ROOT");
        }
        stdout_json(&c.output().unwrap())["cycles"].as_u64().unwrap()
    };
    assert!(run(true) > run(false));
}

#[test]
fn bad_config_file_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 1\n").unwrap();
    let o = sisa(&["--config", path.to_str().unwrap(), "simulate", "--gemm", "1x1x1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("geometry"));
}

#[test]
fn infeasible_capacity_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    let text = sisa_sim::config::DEFAULT_CONFIG.replace("output_buffer_bytes = 2097152", "output_buffer_bytes = 16");
    std::fs::write(&path, text).unwrap();
    let o = sisa(&["--config", path.to_str().unwrap(), "simulate", "--gemm", "16x4864x896"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "infeasible");
}

#[test]
fn validate_passes_with_many_cases() {
    let o = sisa(&["validate", "--shapes", "50"]);
    let v = stdout_json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["microsim_cases"].as_u64().unwrap() > 1000);
}

#[test]
fn validate_names_the_failing_tile() {
    let o = sisa(&["validate", "--shapes", "5", "--inject-drain-fault"]);
    assert_eq!(o.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = v["counterexample"].as_str().unwrap();
    assert!(c.contains("grid 2x2") && c.contains("tile (r=1, c=1, k=1)"), "{c}");
}
