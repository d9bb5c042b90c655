use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ldm_cli::{
    run_benchmark, run_estimate, run_simulate, run_whyra, BenchmarkArgs, EstimateArgs, Manifest, SimulateArgs,
    WhyraArgs,
};
use ldm_depth::io::{load_panel, read_curves, read_warp_panel, Table};
use ldm_depth::{fit_ldm, EstimationConfig, Sampled};
use tempfile::TempDir;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small_sim_config(dir: &Path) -> PathBuf {
    write(dir, "sim.cfg", "# small panel\nn = 12\np = 4\nsigma_W = 1\n")
}

fn simulate_into(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("sim{seed}"));
    run_simulate(&SimulateArgs {
        config: small_sim_config(dir),
        out: out.clone(),
        seed,
    })
    .unwrap();
    out
}

fn estimate_args(data: PathBuf, out: PathBuf) -> EstimateArgs {
    EstimateArgs {
        data,
        impute: false,
        smooth: None,
        config: None,
        depth: None,
        out,
        seed: 0,
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldm"))
}

#[test]
fn simulated_panel_reloads_bitwise() {
    let tmp = TempDir::new().unwrap();
    let out = simulate_into(tmp.path(), 3);
    let sample = load_panel(&out.join("panel.csv"), false, 1).unwrap();
    let again = ldm_depth::simulation::simulate(&ldm_depth::simulation::SimConfig {
        n: 12,
        sigma_w: 1.0,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
    .0;
    assert_eq!(sample, again);
    let manifest = Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.simulation.unwrap().n, 12);
    let svg = fs::read_to_string(out.join("panel.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn estimate_outputs_match_in_memory_fit() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate_into(tmp.path(), 1);
    let out = tmp.path().join("est");
    let files = run_estimate(&estimate_args(sim.join("panel.csv"), out.clone())).unwrap();
    for name in ["lambda.csv", "gamma.csv", "psi.csv", "h.csv", "h_componentwise.csv", "xhat.csv", "manifest.json"] {
        assert!(files.contains(&out.join(name)), "{name} missing");
    }
    let sample = load_panel(&sim.join("panel.csv"), false, 1).unwrap();
    let fit = fit_ldm(&sample, &EstimationConfig::default()).unwrap();

    let (_, lambda) = read_curves(&out.join("lambda.csv")).unwrap();
    assert_eq!(lambda[0].values(), fit.lambda_hat.values());
    let (names, gamma) = read_curves(&out.join("gamma.csv")).unwrap();
    assert_eq!(names, vec!["c0", "c1", "c2", "c3"]);
    for (a, b) in gamma.iter().zip(&fit.gamma_hat) {
        assert_eq!(a.values(), b.values());
    }
    let (_, psi) = read_curves(&out.join("psi.csv")).unwrap();
    for (a, b) in psi.iter().zip(&fit.psi_hat) {
        assert_eq!(a.values(), b.values());
    }
    let (_, h) = read_curves(&out.join("h.csv")).unwrap();
    for (a, b) in h.iter().zip(&fit.h_hat) {
        assert_eq!(a.values(), b.values());
    }
    let hc = read_warp_panel(&out.join("h_componentwise.csv")).unwrap();
    assert_eq!(hc, fit.h_hat_componentwise);
    let xhat = load_panel(&out.join("xhat.csv"), false, 1).unwrap();
    for i in 0..fit.n() {
        for j in 0..fit.p() {
            assert_eq!(xhat.get(i, j), &fit.x_hat[i][j]);
        }
    }
    let m = Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.lambda_index, Some(fit.lambda_index));
    assert_eq!(m.gamma_indices, Some(fit.gamma_indices.clone()));
}

#[test]
fn manifest_seed_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate_into(tmp.path(), 2);
    let cfg = write(tmp.path(), "est.cfg", "lambda_pool = random\n");
    let first = tmp.path().join("a");
    let mut args = estimate_args(sim.join("panel.csv"), first.clone());
    args.config = Some(cfg.clone());
    args.seed = 17;
    run_estimate(&args).unwrap();
    let seed = Manifest::read(&first.join("manifest.json")).unwrap().seed;

    let second = tmp.path().join("b");
    let mut again = estimate_args(sim.join("panel.csv"), second.clone());
    again.config = Some(cfg);
    again.seed = seed;
    run_estimate(&again).unwrap();
    for name in ["lambda.csv", "gamma.csv", "psi.csv", "h.csv", "h_componentwise.csv", "xhat.csv", "scales.csv"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn identical_curves_give_that_curve() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("time,i0_c0,i1_c0\n");
    let ys = [0.2, 0.5, 0.9, 1.0, 0.7];
    for (k, y) in ys.iter().enumerate() {
        text.push_str(&format!("{},{y},{y}\n", k as f64 / 4.0));
    }
    let data = write(tmp.path(), "toy.csv", &text);
    let out = tmp.path().join("est");
    run_estimate(&estimate_args(data, out.clone())).unwrap();
    let (_, lambda) = read_curves(&out.join("lambda.csv")).unwrap();
    assert_eq!(lambda[0].values(), &ys);
    let (_, h) = read_curves(&out.join("h.csv")).unwrap();
    for c in h {
        assert!(c.values().iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]).all(|(a, b)| (a - b).abs() < 5e-3));
    }
}

#[test]
fn gaps_need_imputation() {
    let tmp = TempDir::new().unwrap();
    let data = write(
        tmp.path(),
        "gap.csv",
        "time,i0_c0,i1_c0,i2_c0\n0,1,2,1.5\n1,NA,3,2.5\n2,3,4,3.5\n3,4,5,4.5\n",
    );
    let out = tmp.path().join("est");
    let err = run_estimate(&estimate_args(data.clone(), out.clone())).unwrap_err();
    assert_eq!(err.code(), 3);
    let mut args = estimate_args(data, out);
    args.impute = true;
    run_estimate(&args).unwrap();
}

#[test]
fn seasonal_panel_is_fast() {
    // 46 seasons of daily values in 3 regions, each season shifted in time
    let tmp = TempDir::new().unwrap();
    let days = 365;
    let (n, p) = (46, 3);
    let mut text = String::from("time");
    for i in 0..n {
        for j in 0..p {
            text.push_str(&format!(",i{i}_c{j}"));
        }
    }
    text.push('\n');
    for d in 0..days {
        let t = d as f64 / (days - 1) as f64;
        text.push_str(&format!("{t}"));
        for i in 0..n {
            let shift = 0.03 * ((i as f64 * 0.7).sin());
            for j in 0..p {
                let s = (t + shift).clamp(0.0, 1.0);
                let v = 10.0 + (j + 1) as f64 * (1.0 + (2.0 * std::f64::consts::PI * (s - 0.2)).cos());
                text.push_str(&format!(",{v}"));
            }
        }
        text.push('\n');
    }
    let data = write(tmp.path(), "ice.csv", &text);
    let start = Instant::now();
    run_estimate(&estimate_args(data, tmp.path().join("est"))).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

fn benchmark_csv(cfg: PathBuf, runs: usize, jobs: usize) -> String {
    run_benchmark(&BenchmarkArgs {
        config: cfg,
        runs,
        jobs,
        seed: 4,
        out: None,
        dry_run: false,
    })
    .unwrap()
    .csv
    .unwrap()
}

fn without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn single_cell_benchmark_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "b.cfg", "n = 10\n");
    let a = benchmark_csv(cfg.clone(), 2, 1);
    let b = benchmark_csv(cfg, 2, 2);
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(a.lines().count(), 1 + 3);
}

#[test]
fn table_one_grid_has_six_settings() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "t1.cfg", "sigma_W = 0.5, 1\nsigma_D = 0, 0.5, 1\n");
    let out = tmp.path().join("t1.csv");
    let report = run_benchmark(&BenchmarkArgs {
        config: cfg.clone(),
        runs: 2,
        jobs: 2,
        seed: 0,
        out: Some(out.clone()),
        dry_run: false,
    })
    .unwrap();
    assert_eq!(report.summary.lines().count(), 1 + 6);
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "psi_setting,h_setting,sigma_or_eps,sigma_D,sigma_E,c,n,p,metric,mean,sd,seconds_mean");
    assert_eq!(lines.len(), 1 + 6 * 3);

    let dry = run_benchmark(&BenchmarkArgs {
        config: cfg,
        runs: 2,
        jobs: 1,
        seed: 0,
        out: None,
        dry_run: true,
    })
    .unwrap();
    assert!(dry.csv.is_none());
    assert_eq!(dry.summary.lines().count(), 6);
    assert!(dry.summary.contains("sigma_W=0.5") && dry.summary.contains("sigma_D=1"));
}

#[test]
fn whyra_from_estimate_directory() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate_into(tmp.path(), 5);
    let est = tmp.path().join("est");
    run_estimate(&estimate_args(sim.join("panel.csv"), est.clone())).unwrap();
    let out = tmp.path().join("w");
    let (files, avg) = run_whyra(&WhyraArgs {
        h_dir: est,
        out: out.clone(),
        spearman: false,
        no_svg: false,
    })
    .unwrap();
    assert!((-1.0..=1.0).contains(&avg));
    assert!(files.contains(&out.join("whyra.svg")));
    let matrix = ldm_depth::whyra::read_mhi_csv(&out.join("whyra_mhi.csv")).unwrap();
    assert_eq!(matrix.len(), 12);
    assert!(matrix.iter().all(|r| r.len() == 4));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let out = dir.join("o");

    let status = bin().arg("estimate").output().unwrap().status;
    assert_eq!(status.code(), Some(2), "missing arguments");

    let bad_cfg = write(dir, "bad.cfg", "n = 10\nunknown_knob = 3\n");
    let st = bin()
        .args(["benchmark", "--config"])
        .arg(&bad_cfg)
        .args(["--runs", "2"])
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(2), "bad config key");

    let bad_data = write(dir, "bad.csv", "time,i0_c0,i1_c0\n0,1,2\n1,oops,3\n2,3,4\n");
    let output = bin().arg("estimate").arg("--data").arg(&bad_data).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(3), "unparseable cell");
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");

    let zeros = write(dir, "zero.csv", "time,i0_c0,i1_c0\n0,0,1\n1,0,2\n2,0,3\n");
    let st = bin().arg("estimate").arg("--data").arg(&zeros).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(4), "zero curve cannot be normalized");

    let cfg = small_sim_config(dir);
    let st = bin().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(dir.join("sim")).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
}

#[test]
fn precision_override_is_honored() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate_into(tmp.path(), 0);
    let out = tmp.path().join("p");
    let st = bin()
        .env("LDM_PRECISION", "4")
        .arg("estimate")
        .arg("--data")
        .arg(sim.join("panel.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(st.success());
    let text = fs::read_to_string(out.join("lambda.csv")).unwrap();
    let row = text.lines().nth(5).unwrap();
    let value = row.split(',').nth(1).unwrap();
    assert!(value.contains('e') && value.split('e').next().unwrap().len() == 5, "{value}");
    let table: Table = ldm_depth::io::read_table(&out.join("lambda.csv")).unwrap();
    assert_eq!(table.names, vec!["lambda"]);
}
