use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kickedtop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kickedtop")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn empty_tau_grid_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[grid]\ntaus = []\n");
    let o = kickedtop(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("taus"));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_and_oversized_problems_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in ["[top]\nspinn = 3\n", "[top]\nspin = 2500\n", "[chain]\nn = 20\n"] {
        let cfg = write_config(dir.path(), body);
        let kind = if body.contains("chain") { "chain-map" } else { "spectrum" };
        let o = kickedtop(&[kind, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    assert!(!out.exists());
    assert_eq!(kickedtop(&["defaults", "nonsense"]).status.code(), Some(2));
    assert_eq!(kickedtop(&["spectrum", "--bogus"]).status.code(), Some(2));
}

#[test]
fn defaults_dump_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = kickedtop(&["defaults", "spectrum"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[top]") && text.contains("j_x = 0.7"));
    let cfg = write_config(dir.path(), &text.replace("spin = 128.0", "spin = 3.0"));
    let out = dir.path().join("o");
    assert!(kickedtop(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
}

#[test]
fn spectrum_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[top]\nspin = 10\n[grid]\ntaus = [0.5, 3.0]\n");
    let o = kickedtop(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = out.join("spectrum.csv");
    assert_eq!(header(&csv), "tau,variant,dim,pr,pr_cue,pr_coe,spacing_ratio,coincident_phases");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "spectrum");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["top"]["spin"], 10.0);
    assert_eq!(meta["config"]["top"]["h_z"], 0.3);
    assert_eq!(meta["config"]["top"]["variant"], "first");
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(meta["files"][0], "spectrum.csv");
}

#[test]
fn threshold_sweep_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[top]\nspin = 6\n[grid]\ntaus = [0.5, 1.0]\nhorizon = 5.0\n");
    assert!(kickedtop(&["threshold-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = out.join("threshold_sweep.csv");
    assert_eq!(header(&csv), "tau,t,dm_bar,qe_bar,fidelity_bar");
    // 10 steps at tau = 0.5 and 5 at tau = 1
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 16);
}

#[test]
fn poincare_writes_one_cloud_per_tau() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[poincare]\nn_theta = 3\nn_phi = 2\niterations = 10\n");
    let o = kickedtop(&["poincare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for tau in ["0.25", "0.75", "1.5"] {
        let csv = out.join(format!("poincare_tau_{tau}.csv"));
        assert_eq!(header(&csv), "seed_id,step,theta,phi");
        assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 6 * 10);
    }
}

#[test]
fn otoc_and_chain_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "[top]\nspin = 8\n[grid]\ntaus = [1.0, 3.0]\nhorizon = 6.0\n");
    assert!(kickedtop(&["otoc", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(header(&out.join("otoc.csv")), "tau,t,c,f_re,f_im");
    assert_eq!(header(&out.join("otoc_summary.csv")), "tau,lambda,lambda_err,fit_start,fit_end,c_coe,c_infinite_time");
    let cfg = write_config(dir.path(), "[chain]\nn = 4\nalphas = [0.5]\nperiods = 50\n[grid]\ntaus = [0.5, 2.5]\n");
    assert!(kickedtop(&["chain-map", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = out.join("chain_map.csv");
    assert_eq!(header(&csv), "alpha,tau,qe_bar,dm_bar,ipr,lambda_ratio");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn stochastic_runs_need_a_seed_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[top]\nspin = 6\n[grid]\nhorizon = 4.0\n[randomized]\nn_unitaries = 12\neta = 3\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(kickedtop(&["randomized-otoc", "--config", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(2));
    assert!(kickedtop(&["randomized-otoc", "--config", &cfg, "--seed", "5", "--threads", "1", "--out", a.to_str().unwrap()]).status.success());
    assert!(kickedtop(&["randomized-otoc", "--config", &cfg, "--seed", "5", "--threads", "3", "--out", b.to_str().unwrap()]).status.success());
    let fa = fs::read(a.join("randomized_otoc.csv")).unwrap();
    assert_eq!(fa, fs::read(b.join("randomized_otoc.csv")).unwrap());
    let text = String::from_utf8(fa).unwrap();
    assert!(text.starts_with("t,c_exact,c_estimated,n_unitaries,eta,seed\n"));
    assert_eq!(text.lines().count(), 6);

    let cfg = write_config(dir.path(), "seed = 3\n[twodesign]\nspin = 2\nsize = 20\netas = [1, 4]\ncue_repetitions = 3\n");
    assert!(kickedtop(&["twodesign", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(kickedtop(&["twodesign", "--config", &cfg, "--threads", "2", "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(a.join("twodesign.csv")).unwrap(), fs::read(b.join("twodesign.csv")).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("twodesign.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
}
