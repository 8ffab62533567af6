use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cuspforge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuspforge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CUSPFORGE_OUT")
        .output()
        .unwrap()
}

fn config_arg(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn golden_assemble_passes_and_embeds_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["assemble", "--config", &config_arg("golden.toml")], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&tmp.path().join("report.json"));
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["config"]["dimension"], 4);
    assert_eq!(r["config"]["options"]["volume_bound"], 110.0);
    assert_eq!(r["lattices"][0]["basis"][2][1], -0.4);
    assert_eq!(r["entropy"]["mc_samples"], 100000);
    assert_eq!(r["entropy"]["mc_seed"], 42);
    let chain = std::fs::read_to_string(tmp.path().join("entropy_chain.txt")).unwrap();
    assert!(chain.contains("h_v >= "));
    let regions = std::fs::read_to_string(tmp.path().join("regions.csv")).unwrap();
    assert_eq!(regions.lines().count(), 4);
}

#[test]
fn rank_deficient_lattice_is_an_operational_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["assemble", "--config", &config_arg("degenerate.toml")], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));
}

#[test]
fn close_and_double_reports_differ_and_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("close"), tmp.path().join("double"));
    assert_eq!(cuspforge(&["assemble", "--config", &config_arg("golden.toml")], &a).status.code(), Some(0));
    assert_eq!(cuspforge(&["assemble", "--config", &config_arg("golden_double.toml")], &b).status.code(), Some(0));
    let (rc, rd) = (read_json(&a.join("report.json")), read_json(&b.join("report.json")));
    assert_ne!(rc, rd);
    for r in [&rc, &rd] {
        let total = r["assembly"]["total_volume"].as_f64().unwrap();
        let sum: f64 = r["assembly"]["regions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|reg| match reg["region"].as_str().unwrap() {
                "core" | "cusp_remnant" => reg["volume"].as_f64().unwrap(),
                _ => reg["volume"]["value"].as_f64().unwrap(),
            })
            .sum();
        assert!(((sum - total) / total).abs() < 1e-12);
    }
    assert_eq!(rc["assembly"]["copies"], 1);
    assert_eq!(rd["assembly"]["copies"], 2);
}

#[test]
fn literal_swap_fails_the_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["assemble", "--config", &config_arg("golden.toml"), "--paper-generator-swap"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let r = read_json(&tmp.path().join("report.json"));
    assert_eq!(r["config"]["options"]["paper_generator_swap"], true);
    let tube = r["assembly"]["regions"].as_array().unwrap().iter().find(|x| x["region"] == "tube").unwrap();
    assert_eq!(tube["swap_form"], "literal");
    assert_eq!(tube["covering_index"], tube["k"]);
}

#[test]
fn single_eps_sweep_matches_assemble() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, s) = (tmp.path().join("a"), tmp.path().join("s"));
    assert_eq!(cuspforge(&["assemble", "--config", &config_arg("golden.toml")], &a).status.code(), Some(0));
    assert_eq!(cuspforge(&["sweep", "--config", &config_arg("golden.toml"), "--eps", "0.1"], &s).status.code(), Some(0));
    let one = read_json(&a.join("report.json"));
    let sweep = read_json(&s.join("sweep.json"));
    assert_eq!(sweep.as_array().unwrap().len(), 1);
    assert_eq!(sweep[0], one);
    let csv = std::fs::read_to_string(s.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("eps,r_eps,t0,tube_volumes,W_fraction,bound_after,eps_bar,verdict\n"));
}

#[test]
fn sweep_without_eps_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["sweep", "--config", &config_arg("golden.toml")], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cutoff_writes_checked_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["cutoff", "--eps", "0.1", "--dim", "4"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("cutoff.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,s,s',s'',c,c',c'',K_t_phi,K_t_U,K_phi_U,K_U_V");
    for line in csv.lines().skip(1) {
        for cell in line.split(',').skip(7) {
            let k: f64 = cell.parse().unwrap();
            assert!((-1.1 - 1e-6..=1e-6).contains(&k), "{line}");
        }
    }
    let j = read_json(&tmp.path().join("cutoff.json"));
    assert_eq!(j["csv_check"]["verdict"], "pass");
    assert_eq!(j["unbudgeted"]["verdict"], "fail");
    let svg = std::fs::read_to_string(tmp.path().join("cutoff.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == 7);
}

#[test]
fn cutoff_in_dimension_three_leaves_k_uv_empty() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cuspforge(&["cutoff", "--dim", "3"], tmp.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("cutoff.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn infeasible_eps_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["cutoff", "--eps", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("cutoff.csv").exists());
}

#[test]
fn unknown_flag_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cuspforge(&["assemble", "--bogus"], tmp.path()).status.code(), Some(1));
    assert_eq!(cuspforge(&["assemble"], tmp.path()).status.code(), Some(1));
}

#[test]
fn env_var_overrides_out() {
    let tmp = tempfile::tempdir().unwrap();
    let (flag, env) = (tmp.path().join("flag"), tmp.path().join("env"));
    let out = Command::new(env!("CARGO_BIN_EXE_cuspforge"))
        .args(["entropy", "--dim", "4", "--out"])
        .arg(&flag)
        .env("CUSPFORGE_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env.join("model_entropy.json").exists());
    assert!(!flag.exists());
}

#[test]
fn core_only_entropy_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["entropy", "--config", &config_arg("core_only.toml")], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let j = read_json(&tmp.path().join("entropy.json"));
    assert_eq!(j["certificate"]["bw_integral"], 3.0);
    assert_eq!(j["certificate"]["bound_after"], 3.0);
}

#[test]
fn oracle_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cuspforge(&["oracle-check", "--seed", "7"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("oracle_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}
