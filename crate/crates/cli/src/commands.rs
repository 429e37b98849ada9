//! The five subcommands: a single short-term solve with its convergence
//! trace, long-term strategy learning, scheme-vs-baseline latency sweeps, the
//! desk-scale convergence study, and configuration validation. Every run
//! echoes its effective configuration into the output directory.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use cfsl_core::channel::draw_channel;
use cfsl_core::convergence::{
    random_assoc_fixed_cu, run_rounds, BoundConstants, QuadraticTask,
};
use cfsl_core::latency::total_latency;
use cfsl_core::mais::{train, MaisEnv, MaisResult};
use cfsl_core::nbcd::solve;
use cfsl_core::objective::{
    baseline, evaluate_strategy, BaselineKind, Scenario, StrategyAssignment,
};
use cfsl_core::phy::AssociationMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Scheme};
use crate::output::{render_csv, render_reward_trace, write_file};
use crate::seeds::substream;

fn echo_config(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    write_file(out, "effective-config.toml", &cfg.to_toml()?)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Validate the configuration and return its effective TOML rendering.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    cfg.to_toml()
}

/// One short-term solve on a fixed strategy with the outer-iteration trace.
pub fn run_nbcd(cfg: &ExperimentConfig, out: &Path, splits: Option<Vec<usize>>) -> Result<()> {
    echo_config(cfg, out)?;
    let sc = cfg.scenario()?;
    let num_layers = sc.profile.num_points();
    let splits = splits.unwrap_or_else(|| vec![num_layers; cfg.network.u]);
    if splits.len() != cfg.network.u {
        bail!("--splits needs one value per UE ({} given)", splits.len());
    }
    let strategy = StrategyAssignment::new(
        splits,
        AssociationMatrix::all_ones(cfg.network.m, cfg.network.u),
    )?;
    let channel = draw_channel(&sc.layout, &sc.fading, sc.seed)?;
    let mut nbcd = sc.nbcd.clone();
    nbcd.trace = true;
    let sol = solve(
        &channel,
        &strategy.assoc,
        &strategy.splits,
        &sc.profile,
        &nbcd,
        None,
    )?;

    let trace_rows: Vec<Vec<String>> = sol
        .trace
        .iter()
        .map(|r| {
            vec![
                r.outer.to_string(),
                fmt(r.t_max_ul),
                fmt(r.t_max_dl),
                fmt(r.violation),
            ]
        })
        .collect();
    write_file(
        out,
        "nbcd-trace.csv",
        &render_csv(&["outer", "t_max_ul", "t_max_dl", "violation"], &trace_rows),
    )?;

    let rate_rows: Vec<Vec<String>> = (0..cfg.network.u)
        .map(|u| {
            vec![
                u.to_string(),
                fmt(sol.uplink_rates[u]),
                fmt(sol.downlink_rates[u]),
            ]
        })
        .collect();
    write_file(
        out,
        "nbcd-rates.csv",
        &render_csv(&["ue", "uplink_rate", "downlink_rate"], &rate_rows),
    )?;
    println!(
        "nbcd: t_max_ul {:.6} s, t_max_dl {:.6} s, {} outer iterations, converged {}",
        sol.t_max_ul, sol.t_max_dl, sol.outer_iterations, sol.converged
    );
    Ok(())
}

fn train_on(cfg: &ExperimentConfig, sc: Scenario<f64>) -> Result<MaisResult<f64>> {
    let mut env = MaisEnv::new(sc, cfg.ppo.rate_scale)?;
    Ok(train(
        &mut env,
        &cfg.ppo_config(),
        substream(cfg.network.seed, "ppo"),
    )?)
}

fn strategy_rows(s: &StrategyAssignment) -> Vec<Vec<String>> {
    (0..s.assoc.num_ues())
        .map(|u| {
            let aps: Vec<String> = s
                .assoc
                .serving_aps(u)
                .iter()
                .map(|m| m.to_string())
                .collect();
            vec![
                u.to_string(),
                s.splits[u].to_string(),
                s.assoc.cluster_size_ue(u).to_string(),
                aps.join(";"),
            ]
        })
        .collect()
}

/// Long-term learning on the configured scenario: reward trace plus the best
/// strategy found.
pub fn run_mais(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    echo_config(cfg, out)?;
    let result = train_on(cfg, cfg.scenario()?)?;
    write_file(out, "reward-trace.csv", &render_reward_trace(&result.trace))?;
    write_file(
        out,
        "best-strategy.csv",
        &render_csv(
            &["ue", "split", "cluster_size", "aps"],
            &strategy_rows(&result.best),
        ),
    )?;
    println!(
        "mais: best max ratio {:.6} after {} episodes",
        -result.best_reward,
        result.trace.len()
    );
    Ok(())
}

fn scheme_strategy(
    scheme: Scheme,
    cfg: &ExperimentConfig,
    learned: Option<&StrategyAssignment>,
    num_layers: usize,
) -> Result<StrategyAssignment> {
    let need = |s: &str| anyhow!("{s} needs UCSFL in the scheme list (it reuses the learned strategy)");
    let (m, u) = (cfg.network.m, cfg.network.u);
    Ok(match scheme {
        Scheme::Ucsfl => learned.ok_or_else(|| need("UCSFL"))?.clone(),
        Scheme::Bl1 => {
            let l = learned.ok_or_else(|| need("BL1"))?;
            baseline(BaselineKind::Bl1, m, u, Some(&l.splits), None, num_layers)?
        }
        Scheme::Bl2 => {
            let l = learned.ok_or_else(|| need("BL2"))?;
            baseline(BaselineKind::Bl2, m, u, None, Some(&l.assoc), num_layers)?
        }
        Scheme::Bl3 => baseline(BaselineKind::Bl3, m, u, None, None, num_layers)?,
    })
}

/// One sweep-point evaluation of one scheme: expected max ratio plus the
/// latency breakdown of the first channel draw.
fn sweep_row(
    cfg: &ExperimentConfig,
    sc: &Scenario<f64>,
    scheme: Scheme,
    value: f64,
    strategy: &StrategyAssignment,
) -> Result<Vec<String>> {
    let report = evaluate_strategy(sc, strategy)?;
    let channel = draw_channel(&sc.layout, &sc.fading, sc.seed)?;
    let sol = solve(
        &channel,
        &strategy.assoc,
        &strategy.splits,
        &sc.profile,
        &sc.nbcd,
        None,
    )?;
    let b = total_latency(
        &sc.profile,
        &strategy.splits,
        &sol.uplink_rates,
        &sol.downlink_rates,
        &sc.compute,
    )?;
    let u = cfg.network.u as f64;
    let min_split = *strategy.splits.iter().min().expect("nonempty") as f64;
    let avg_split = strategy.splits.iter().sum::<usize>() as f64 / u;
    let clusters: Vec<usize> = (0..cfg.network.u)
        .map(|i| strategy.assoc.cluster_size_ue(i))
        .collect();
    let min_cluster = *clusters.iter().min().expect("nonempty") as f64;
    let avg_cluster = clusters.iter().sum::<usize>() as f64 / u;
    let t_dl_max = b.t_dl.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        scheme.to_string(),
        fmt(value),
        fmt(report.max_ratio),
        fmt(b.t_ue),
        fmt(b.t_ul_max),
        fmt(b.t_dpu_max),
        fmt(b.t_back),
        fmt(t_dl_max),
        fmt(b.max_total()),
        fmt(min_split),
        fmt(avg_split),
        fmt(min_cluster),
        fmt(avg_cluster),
    ])
}

/// Header of `sweep.csv`; stable, one row per (sweep value, scheme).
pub const SWEEP_HEADER: [&str; 13] = [
    "scheme",
    "value",
    "max_ratio",
    "t_ue",
    "t_ul_max",
    "t_dpu_max",
    "t_back",
    "t_dl_max",
    "t_total_max",
    "min_split",
    "avg_split",
    "min_cluster",
    "avg_cluster",
];

/// Sweep the configured axis and compare the configured schemes. Sweep
/// points run in a worker pool; the file is written once at the end.
pub fn run_latency_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    echo_config(cfg, out)?;
    let needs_training = cfg
        .schemes
        .iter()
        .any(|s| matches!(s, Scheme::Ucsfl | Scheme::Bl1 | Scheme::Bl2));
    let axis = cfg.sweep.axis;
    let point_rows: Vec<Vec<Vec<String>>> = cfg
        .sweep
        .values
        .par_iter()
        .map(|&value| -> Result<Vec<Vec<String>>> {
            let sc = cfg.scenario_at(axis, value)?;
            let num_layers = sc.profile.num_points();
            let learned = if needs_training {
                Some(train_on(cfg, sc.clone())?.best)
            } else {
                None
            };
            cfg.schemes
                .iter()
                .map(|&scheme| {
                    let strategy = scheme_strategy(scheme, cfg, learned.as_ref(), num_layers)?;
                    sweep_row(cfg, &sc, scheme, value, &strategy)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = point_rows.into_iter().flatten().collect();
    write_file(out, "sweep.csv", &render_csv(&SWEEP_HEADER, &rows))?;
    println!("sweep: {} rows written", rows.len());
    Ok(())
}

/// Desk-scale convergence study: seed-mean loss gaps per round for each
/// cluster size, next to the exactly computed a-priori bound.
pub fn run_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    echo_config(cfg, out)?;
    let cv = &cfg.convergence;
    let task = QuadraticTask::new_random(
        cfg.network.m,
        cfg.network.u,
        cv.dim,
        cv.num_layers,
        cv.mu,
        cv.beta,
        cv.spread,
        cv.eps,
        substream(cfg.network.seed, "noise"),
    )?;
    let w1 = vec![1.0; cv.dim];
    let z = task.z_bound(&w1, cv.rounds, cv.local_steps);
    let mut rows = Vec::new();
    for &c_u in &cv.cluster_sizes {
        let constants = BoundConstants::from_raw(
            cv.mu,
            cv.beta,
            c_u,
            cv.rounds,
            cv.num_layers,
            z,
            cv.eps,
            task.heterogeneity(),
        );
        let mut mean_gaps = vec![0.0; cv.rounds];
        let mut delta1 = 0.0;
        for s in 0..cv.num_seeds {
            let stream = substream(cfg.network.seed, "noise") ^ (s as u64).wrapping_mul(0x9e3779b97f4a7c15);
            let mut rng = ChaCha12Rng::seed_from_u64(stream);
            let assoc = random_assoc_fixed_cu(cfg.network.m, cfg.network.u, c_u, &mut rng)?;
            let trace = run_rounds(&task, &assoc, cv.rounds, cv.local_steps, &w1, stream)?;
            for (acc, g) in mean_gaps.iter_mut().zip(&trace.gaps) {
                *acc += g;
            }
            delta1 = trace.delta1;
        }
        for g in mean_gaps.iter_mut() {
            *g /= cv.num_seeds as f64;
        }
        for (t, &g) in mean_gaps.iter().enumerate() {
            rows.push(vec![
                c_u.to_string(),
                (t + 1).to_string(),
                fmt(g),
                fmt(constants.eval(delta1, t + 1)),
            ]);
        }
    }
    write_file(
        out,
        "convergence.csv",
        &render_csv(&["c_u", "round", "mean_gap", "bound"], &rows),
    )?;
    println!(
        "convergence: {} cluster sizes x {} rounds written",
        cv.cluster_sizes.len(),
        cv.rounds
    );
    Ok(())
}
