use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn deweight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deweight"))
        .args(args)
        .env_remove("DEWEIGHT_COUNTER")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const OR_INSTANCE: &str = "p cnf 2 1\nc p weight 1 2/3 0\nc p weight 2 1/2 0\n1 2 0\n";

#[test]
fn count_exact_backend() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "or.cnf", OR_INSTANCE);
    let out = deweight(&["count", &input]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("estimate: 5/6"), "{}", stdout(&out));
}

#[test]
fn count_unsatisfiable_is_zero() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "unsat.cnf", "p cnf 1 2\nc p weight 1 1/3 0\n1 0\n-1 0\n");
    let out = deweight(&["count", &input]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("estimate: 0\n"), "{}", stdout(&out));
}

#[test]
fn count_with_stub_external_counter() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "or.cnf", OR_INSTANCE);
    let out = deweight(&["count", &input, "--backend", "external", "--counter-cmd", "test -f {file} && echo 's mc 5'"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("estimate: 5/6"), "{text}");
    assert!(text.contains("interval: [25/54, 3/2]"), "{text}");
}

#[test]
fn counter_command_from_environment() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "or.cnf", OR_INSTANCE);
    let out = Command::new(env!("CARGO_BIN_EXE_deweight"))
        .args(["count", &input, "--backend", "external", "--counter-pattern", "mult-pow2"])
        .env("DEWEIGHT_COUNTER", "echo 'Number of solutions is: 5 x 2^0' # {file}")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("estimate: 5/6"));
}

#[test]
fn reduce_writes_cnf_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.cnf", "p cnf 1 1\nc p weight 1 2/3 0\n1 0\n");
    let output = dir.path().join("out.cnf");
    let out = deweight(&["reduce", &input, "-o", output.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("C_W: 3"));
    assert_eq!(fs::read_to_string(&output).unwrap(), "p cnf 2 2\nc ind 1 2 0\n1 0\n1 2 0\n");
    let meta = fs::read_to_string(dir.path().join("out.cnf.meta.json")).unwrap();
    assert!(meta.contains("\"c_w\": \"3\""), "{meta}");
}

#[test]
fn reduce_dyadic_records_gamma() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.cnf", "p cnf 1 1\nc p weight 1 2/3 0\n1 0\n");
    let output = dir.path().join("out.cnf");
    let out = deweight(&["reduce", &input, "-o", output.to_str().unwrap(), "--mode", "dyadic", "--bits", "2"]);
    assert!(out.status.success());
    let meta = fs::read_to_string(dir.path().join("out.cnf.meta.json")).unwrap();
    assert!(meta.contains("\"gamma\": \"1/3\""), "{meta}");
}

#[test]
fn unweighted_reduce_keeps_formula() {
    let dir = TempDir::new().unwrap();
    let text = "p cnf 3 2\nc ind 1 2 3 0\n1 -2 0\n2 3 0\n";
    let input = write(&dir, "plain.cnf", text);
    let output = dir.path().join("out.cnf");
    assert!(deweight(&["reduce", &input, "-o", output.to_str().unwrap()]).status.success());
    assert_eq!(fs::read_to_string(&output).unwrap(), text);
    let meta = fs::read_to_string(dir.path().join("out.cnf.meta.json")).unwrap();
    assert!(meta.contains("\"c_w\": \"1\""));
}

#[test]
fn approx_weights_example() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "w.cnf", "p cnf 1 0\nc p weight 1 4/25 0\n");
    let output = dir.path().join("adj.cnf");
    let out = deweight(&["approx-weights", &input, "--budget", "3", "-o", output.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&output).unwrap().contains("c p weight 1 1/6 0"));
    assert!(stdout(&out).contains("gamma: 1/24"));
}

#[test]
fn approx_weights_warns_on_elimination() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "w.cnf", "p cnf 1 0\nc p weight 1 0.01 0\n");
    let out = deweight(&["approx-weights", &input, "--budget", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(stdout(&out).ends_with("-1 0\n"), "{}", stdout(&out));
}

#[test]
fn gamma_figures() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("p cnf 66 0\n");
    for v in 1..=66 {
        text.push_str(&format!("c p weight {v} 2/3 0\n"));
    }
    let input = write(&dir, "many.cnf", &text);
    let out = deweight(&["gamma", &input, "--bits", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("(~1.76180e8)"), "{text}");
    assert!(text.contains("combined:") && text.contains("(~3.17124e8)"), "{text}");

    let input = write(&dir, "half.cnf", "p cnf 1 0\nc p weight 1 1/2 0\n");
    let text = stdout(&deweight(&["gamma", &input, "--bits", "1"]));
    assert!(text.contains("gamma: 0 ") && text.contains("combined: 4/5 "), "{text}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.cnf", "p cnf 1 1\nx 0\n");
    assert_eq!(deweight(&["count", &bad]).status.code(), Some(2));
    let missing = Path::new(dir.path()).join("missing.cnf");
    assert_eq!(deweight(&["count", missing.to_str().unwrap()]).status.code(), Some(3));

    let input = write(&dir, "or.cnf", OR_INSTANCE);
    let failing = deweight(&["count", &input, "--backend", "external", "--counter-cmd", "exit 7 # {file}"]);
    assert_eq!(failing.status.code(), Some(4));
    let capped = deweight(&["count", &input, "--exact-cap", "1"]);
    assert_eq!(capped.status.code(), Some(5));
}

#[test]
fn selftest_passes_and_catches_fault() {
    let ok = deweight(&["selftest", "--instances", "20", "--chain-bits", "5"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    let broken = deweight(&["selftest", "--instances", "5", "--chain-bits", "4", "--inject-fault", "flip-connector"]);
    assert_eq!(broken.status.code(), Some(1));
    let text = stdout(&broken);
    assert!(text.contains("FAIL chain-counts") && text.contains("k="), "{text}");
}
