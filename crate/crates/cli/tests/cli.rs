//! End-to-end tests of the subcommand implementations: output shapes, exact
//! column oracles, determinism, and the binary's exit behavior.

use std::path::PathBuf;
use std::process::Command;

use cfsl_cli::commands::{run_convergence, run_latency_sweep, run_mais, run_nbcd, SWEEP_HEADER};
use cfsl_cli::config::{ExperimentConfig, Scheme, SweepAxis};
use cfsl_core::split_profile::vgg16_profile;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cfsl-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small instance that keeps the short-term solver fast.
fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.network.m = 3;
    cfg.network.u = 2;
    cfg.network.n_ant = 2;
    cfg.network.seed = 42;
    cfg.objective.n_draws = 1;
    cfg.nbcd.max_outer = 15;
    cfg.nbcd.patience = 2;
    cfg.ppo.episodes = 8;
    cfg
}

fn read(dir: &PathBuf, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn bl3_sweep_shape_exact_t_ue_and_determinism() {
    let mut cfg = small_config();
    cfg.schemes = vec![Scheme::Bl3];
    cfg.sweep.axis = SweepAxis::FUe;
    cfg.sweep.values = vec![1e9, 2e9, 2.5e9];

    let d1 = tmp_dir("sweep1");
    let d2 = tmp_dir("sweep2");
    run_latency_sweep(&cfg, &d1).unwrap();
    run_latency_sweep(&cfg, &d2).unwrap();

    let csv = read(&d1, "sweep.csv");
    // identical config and seed must reproduce the file byte for byte
    assert_eq!(csv, read(&d2, "sweep.csv"));

    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER.join(","));
    assert_eq!(lines.len(), 1 + cfg.sweep.values.len());

    let profile = vgg16_profile::<f64>();
    let ops = profile.mac_ops(profile.num_points()).unwrap();
    for (line, &f_ue) in lines[1..].iter().zip(&cfg.sweep.values) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], "BL3");
        // no splitting: l_u = L and full association at every sweep point
        assert_eq!(cells[9].parse::<f64>().unwrap(), 6.0);
        assert_eq!(cells[10].parse::<f64>().unwrap(), 6.0);
        assert_eq!(cells[11].parse::<f64>().unwrap(), 3.0);
        assert_eq!(cells[12].parse::<f64>().unwrap(), 3.0);
        // t_ue column is exactly x(L) * c / f_ue
        let expected = ops * cfg.compute.cycles_per_op / f_ue;
        assert_eq!(cells[3].parse::<f64>().unwrap(), expected);
    }
}

#[test]
fn effective_config_is_echoed_and_round_trips() {
    let mut cfg = small_config();
    cfg.schemes = vec![Scheme::Bl3];
    cfg.sweep.values = vec![1e9];
    let dir = tmp_dir("echo");
    run_latency_sweep(&cfg, &dir).unwrap();
    let text = read(&dir, "effective-config.toml");
    let back: ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(back.network.m, 3);
    assert_eq!(back.network.seed, 42);
    assert_eq!(back.schemes, vec![Scheme::Bl3]);
}

#[test]
fn mais_run_writes_trace_and_strategy() {
    let cfg = small_config();
    let dir = tmp_dir("mais");
    run_mais(&cfg, &dir).unwrap();
    let trace = read(&dir, "reward-trace.csv");
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "episode,reward");
    assert_eq!(lines.len(), 1 + cfg.ppo.episodes);
    for line in &lines[1..] {
        let reward: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(reward.is_finite() && reward < 0.0);
    }
    let strat = read(&dir, "best-strategy.csv");
    let rows: Vec<&str> = strat.lines().collect();
    assert_eq!(rows[0], "ue,split,cluster_size,aps");
    assert_eq!(rows.len(), 1 + cfg.network.u);
    for row in &rows[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        let split: usize = cells[1].parse().unwrap();
        let cluster: usize = cells[2].parse().unwrap();
        assert!((1..=6).contains(&split));
        assert!((1..=cfg.network.m).contains(&cluster));
        assert_eq!(cells[3].split(';').count(), cluster);
    }
}

#[test]
fn nbcd_run_writes_trace_and_rates() {
    let cfg = small_config();
    let dir = tmp_dir("nbcd");
    run_nbcd(&cfg, &dir, Some(vec![2, 4])).unwrap();
    let trace = read(&dir, "nbcd-trace.csv");
    assert!(trace.lines().count() > 1);
    let rates = read(&dir, "nbcd-rates.csv");
    let lines: Vec<&str> = rates.lines().collect();
    assert_eq!(lines.len(), 1 + cfg.network.u);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(cells[1].parse::<f64>().unwrap() > 0.0);
        assert!(cells[2].parse::<f64>().unwrap() > 0.0);
    }
    // wrong split count is a descriptive error, not a panic
    assert!(run_nbcd(&cfg, &dir, Some(vec![1])).is_err());
}

#[test]
fn convergence_run_gaps_never_exceed_bound() {
    let mut cfg = small_config();
    cfg.network.m = 10;
    cfg.network.u = 2;
    cfg.convergence.rounds = 20;
    cfg.convergence.num_seeds = 50;
    cfg.convergence.cluster_sizes = vec![1, 4];
    let dir = tmp_dir("conv");
    run_convergence(&cfg, &dir).unwrap();
    let csv = read(&dir, "convergence.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "c_u,round,mean_gap,bound");
    assert_eq!(lines.len(), 1 + 2 * cfg.convergence.rounds);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        let gap: f64 = cells[2].parse().unwrap();
        let bound: f64 = cells[3].parse().unwrap();
        assert!(gap.is_finite() && gap >= 0.0);
        assert!(gap <= bound);
    }
}

#[test]
fn binary_validate_config_and_error_exit() {
    let exe = env!("CARGO_BIN_EXE_cfsl");
    let out = Command::new(exe)
        .args(["validate-config", "--seed", "7", "--aps", "3", "--ues", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[network]"));
    assert!(text.contains("seed = 7"));

    // missing config file must fail with a nonzero exit code
    let out = Command::new(exe)
        .args(["validate-config", "--config", "/nonexistent/cfsl.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // invalid flag value likewise
    let out = Command::new(exe)
        .args(["run-latency-sweep", "--sweep-axis", "bogus"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
