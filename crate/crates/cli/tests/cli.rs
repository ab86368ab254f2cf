use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], config: &str, dir: &Path) -> (Output, PathBuf) {
    let cfg = dir.join("experiment.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kinkspec"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--out").arg(&out);
    (cmd.output().unwrap(), out)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const PHI4: &str = "[model]\nbuiltin = \"phi4\"\n";

const PERTURBED: &str = r#"
seed = 3
[model]
builtin = "phi4"
[[coefficients.b]]
family = "odd_gaussian"
amplitude = 1e-2
[[coefficients.c]]
family = "gaussian"
amplitude = 1e-2
[spectrum]
n_scan = 200
"#;

const SIM: &str = r#"
seed = 5
[model]
builtin = "sine_gordon"
[[coefficients.b]]
family = "odd_sech2"
amplitude = 1e-2
[simulate]
L = 64.0
N = 2048
t_end = 20.0
sample_dt = 2.0
snapshots = [0.0, 10.0]
[simulate.perturbation]
kind = "random"
eps = 1e-2
radius = 4.0
"#;

#[test]
fn spectrum_of_unperturbed_phi4() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run(&["spectrum", "--quiet"], PHI4, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let r = report(&out);
    let ev: Vec<f64> = r["outputs"]["eigenvalues"].as_array().unwrap().iter().map(|e| e["lambda"].as_f64().unwrap()).collect();
    assert_eq!(ev.len(), 2);
    assert!((ev[0] - 0.0).abs() < 1e-6 && (ev[1] - 1.5).abs() < 1e-6, "{ev:?}");
    assert_eq!(r["outputs"]["threshold_status"], "resonant");
    assert_eq!(r["config"]["grid"]["N"], 4096);
    assert_eq!(r["pass"], true);
    assert!(!out.join(".kinkspec.lock").exists());
}

#[test]
fn negative_half_width_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = run(&["kink"], "[model]\nbuiltin = \"phi4\"\n[grid]\nL = -5.0\nN = 4096\n", tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.L"));
}

#[test]
fn unknown_keys_and_families_name_their_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, _) = run(&["kink"], "[model]\nbuiltin = \"phi4\"\n[[coefficients.c]]\nfamily = \"cubic\"\namplitude = 0.1\n", tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("coefficients.c"));
    let (o, _) = run(&["kink"], "[model]\nbuiltin = \"phi4\"\n[tolerances]\nroot = -1.0\n", tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerances.root"));
}

#[test]
fn missing_config_and_bad_flags_exit_with_config_status() {
    let o = Command::new(env!("CARGO_BIN_EXE_kinkspec")).arg("kink").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_kinkspec")).args(["kink", "--threads", "many"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{PERTURBED}[kink]\nmax_iterations = 1\n");
    let (o, _) = run(&["kink"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: kink:"));
}

#[test]
fn failed_check_exits_with_status_three() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run(&["spectrum"], "[model]\nbuiltin = \"phi4\"\n[tolerances]\nabel = 1e-300\n", tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, out) = run(&["drift", "--quiet"], PERTURBED, tmp.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let first: Vec<Vec<u8>> = ["report.json", "drift.csv"].iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    let (b, _) = run(&["drift", "--quiet", "--threads", "2"], PERTURBED, tmp.path());
    assert!(b.status.success());
    let second: Vec<Vec<u8>> = ["report.json", "drift.csv"].iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    assert_eq!(first, second);
    let timing: Value = serde_json::from_str(&fs::read_to_string(out.join("timing.json")).unwrap()).unwrap();
    assert!(timing["elapsed_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn csv_values_carry_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run(&["kink", "--quiet"], PERTURBED, tmp.path());
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("kink.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "y,x,S,dS,S_b,dS_b,T,dT");
    let row: Vec<&str> = lines.nth(2000).unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    for cell in row {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{cell}");
        cell.parse::<f64>().unwrap();
    }
    let r = report(&out);
    assert!(r["outputs"]["residual_inf"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn simulation_is_deterministic_given_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run(&["simulate", "--quiet"], SIM, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(out.join("timeseries.csv")).unwrap();
    let r = report(&out);
    assert_eq!(r["outputs"]["snapshot_times"].as_array().unwrap().len(), 2);
    assert!(r["outputs"]["max_drift_rel"].as_f64().unwrap() < 1e-4);
    let (_, _) = run(&["simulate", "--quiet"], SIM, tmp.path());
    assert_eq!(a, fs::read(out.join("timeseries.csv")).unwrap());
    let (_, _) = run(&["simulate", "--quiet", "--seed", "6"], SIM, tmp.path());
    assert_ne!(a, fs::read(out.join("timeseries.csv")).unwrap());
    assert_eq!(report(&out)["config"]["seed"], 6);
}

#[test]
fn simulation_horizon_must_fit_the_domain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SIM.replace("t_end = 20.0", "t_end = 70.0");
    let (o, _) = run(&["simulate"], &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulate.t_end"));
}

#[test]
fn resonance_verdict_matches_the_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[model]\nbuiltin = \"sine_gordon\"\n[[coefficients.b]]\nfamily = \"odd_sech2\"\namplitude = -2e-2\n[resonance]\ndelta = 2e-2\n";
    let (o, out) = run(&["resonance", "--quiet"], cfg, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["outputs"]["criterion"]["verdict"], "eigenvalue_emerges");
    assert_eq!(r["outputs"]["oracle_in_window"].as_array().unwrap().len(), 1);
    let text = fs::read_to_string(out.join("resonance.csv")).unwrap();
    assert!(text.starts_with("y,b,d,R\n"));
}

#[test]
fn coefficient_tables_are_read_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (0..=400)
        .map(|i| {
            let y = -10.0 + 0.05 * i as f64;
            format!("{y},{}\n", 1e-2 * (-y * y).exp())
        })
        .collect();
    fs::write(tmp.path().join("c.csv"), format!("y,c\n{rows}")).unwrap();
    let tabled = "[model]\nbuiltin = \"phi4\"\n[coefficients]\nc_table = \"c.csv\"\n";
    let (o, out) = run(&["kink", "--quiet"], tabled, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let from_table = report(&out)["outputs"]["s_b_norms"]["linf"].as_f64().unwrap();
    let bump = "[model]\nbuiltin = \"phi4\"\n[[coefficients.c]]\nfamily = \"gaussian\"\namplitude = 1e-2\n";
    let (_, out) = run(&["kink", "--quiet"], bump, tmp.path());
    let from_bump = report(&out)["outputs"]["s_b_norms"]["linf"].as_f64().unwrap();
    assert!((from_table - from_bump).abs() < 1e-3 * from_bump, "{from_table} vs {from_bump}");
}

#[test]
fn validate_acceptance_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (o, out) = run(&["validate"], "[model]\nbuiltin = \"phi4\"\n[validate]\nsuite = \"acceptance\"\n", tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("check") && !stdout.contains("FAIL"));
    let r = report(&out);
    assert_eq!(r["outputs"]["failed"], 0);
    assert!(r["checks"].as_array().unwrap().len() >= 30);
    let table = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let tmp = tempfile::tempdir().unwrap();
        let (o, out) = run(&["kink", "--quiet"], &fs::read_to_string(&path).unwrap(), tmp.path());
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&out)["command"], "kink");
        seen += 1;
    }
    assert!(seen >= 4);
}
