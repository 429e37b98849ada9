//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

use cfsl_core::channel::{draw_channel, place_network, FadingParams};
use cfsl_core::convergence::{
    monotonicity_check, random_assoc_fixed_cu, run_rounds, BoundConstants, QuadraticTask,
};
use cfsl_core::latency::{dpu_latency_max, ue_compute_latency, ComputeConfig};
use cfsl_core::mais::{gae, td_errors, train, MaisEnv, PpoConfig};
use cfsl_core::nbcd::{solve, NbcdConfig};
use cfsl_core::nn::Mlp;
use cfsl_core::objective::{
    baseline, evaluate_strategy, BaselineKind, Scenario, StrategyAssignment,
};
use cfsl_core::phy::{
    conjugate_combiner, link_rates, uplink_gains, uplink_sinr_from_gains, AssociationMatrix,
    BeamformerSet, UplinkPowers,
};
use cfsl_core::split_profile::vgg16_profile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn report(id: usize, ok: bool, detail: &str) {
    println!(
        "criterion {id}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

/// Criterion 1: NBCD uplink latency within 3% of a 200x200 power-grid oracle
/// on a fixed small instance; downlink latency no worse than equal-power MRT.
#[test]
fn criterion_1_nbcd_vs_grid_oracle() {
    let start = Instant::now();
    let layout = place_network::<f64>(42, 2, 2, 200.0).unwrap();
    let params = FadingParams {
        n_ant: 2,
        ..FadingParams::default()
    };
    let channel = draw_channel(&layout, &params, 43).unwrap();
    let assoc = AssociationMatrix::all_ones(2, 2);
    let profile = vgg16_profile::<f64>();
    let splits = [1usize, 1];
    let cfg = NbcdConfig::<f64> {
        noise_power: params.noise_power,
        ..NbcdConfig::default()
    };

    // exhaustive oracle over the uplink power box with the same combiners
    let combiners = conjugate_combiner(&channel).unwrap();
    let gains = uplink_gains(&channel, &assoc, &combiners);
    let d: Vec<f64> = splits
        .iter()
        .map(|&l| profile.activation_bits(l).unwrap())
        .collect();
    let n_grid = 200;
    let mut oracle_best = f64::INFINITY;
    for i in 0..n_grid {
        for j in 0..n_grid {
            let p = UplinkPowers(vec![
                cfg.p_ul_max * (i + 1) as f64 / n_grid as f64,
                cfg.p_ul_max * (j + 1) as f64 / n_grid as f64,
            ]);
            let sinr = uplink_sinr_from_gains(&gains, &assoc, &p, cfg.noise_power);
            let t = (0..2)
                .map(|u| d[u] / (cfg.bandwidth * (1.0 + sinr[u]).log2()))
                .fold(0.0f64, f64::max);
            oracle_best = oracle_best.min(t);
        }
    }

    let sol = solve(&channel, &assoc, &splits, &profile, &cfg, None).unwrap();

    // downlink baseline: equal-power MRT with the same association
    let mrt = BeamformerSet::mrt_equal_power(&channel, &assoc, cfg.p_dl_max).unwrap();
    let base = link_rates(
        &channel,
        &assoc,
        &sol.powers,
        &mrt,
        cfg.noise_power,
        cfg.bandwidth,
    )
    .unwrap();
    let mrt_t_dl = (0..2)
        .map(|u| profile.submodel_bits(splits[u]).unwrap() / base.downlink_rate[u])
        .fold(0.0f64, f64::max);

    let elapsed = start.elapsed().as_secs_f64();
    let ul_gap = (sol.t_max_ul - oracle_best) / oracle_best;
    let ok = ul_gap <= 0.03 && sol.t_max_dl <= mrt_t_dl * (1.0 + 1e-9) && elapsed < 10.0;
    report(
        1,
        ok,
        &format!(
            "ul {:.6}s vs oracle {:.6}s (gap {:+.2}%), dl {:.6}s vs MRT {:.6}s, {:.2}s",
            sol.t_max_ul,
            oracle_best,
            100.0 * ul_gap,
            sol.t_max_dl,
            mrt_t_dl,
            elapsed
        ),
    );
}

fn random_association(rng: &mut ChaCha12Rng, m: usize, u: usize) -> AssociationMatrix {
    loop {
        let mut entries = vec![false; m * u];
        for e in entries.iter_mut() {
            *e = rng.gen_bool(0.5);
        }
        // guarantee a nonempty cluster per UE
        for ue in 0..u {
            if !(0..m).any(|ap| entries[ap * u + ue]) {
                let ap = rng.gen_range(0..m);
                entries[ap * u + ue] = true;
            }
        }
        if let Ok(a) = AssociationMatrix::new(m, u, entries) {
            return a;
        }
    }
}

/// Criterion 2: feasibility and early termination over 100 random instances.
#[test]
fn criterion_2_nbcd_feasibility_and_convergence() {
    use rayon::prelude::*;
    let profile = vgg16_profile::<f64>();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    // draw the randomized setups sequentially so the instances stay
    // deterministic, then solve them in parallel
    let setups: Vec<(u64, AssociationMatrix, Vec<usize>)> = (0..100u64)
        .map(|inst| {
            let assoc = random_association(&mut rng, 10, 4);
            let splits = (0..4).map(|_| rng.gen_range(1..=6)).collect();
            (inst, assoc, splits)
        })
        .collect();
    let results: Vec<(bool, bool, bool)> = setups
        .par_iter()
        .map(|(inst, assoc, splits)| {
            let layout = place_network::<f64>(*inst, 10, 4, 200.0).unwrap();
            let params = FadingParams::default();
            let channel = draw_channel(&layout, &params, inst + 10_000).unwrap();
            let cfg = NbcdConfig::<f64> {
                noise_power: params.noise_power,
                ..NbcdConfig::default()
            };
            let sol = solve(&channel, assoc, splits, &profile, &cfg, None).unwrap();
            let feasible = sol.powers.satisfies_c1(cfg.p_ul_max, 1e-6)
                && sol.beams.satisfies_c2(cfg.p_dl_max, 1e-6);
            let small_change = sol.converged || sol.outer_iterations < cfg.max_outer;
            (feasible, small_change, sol.converged)
        })
        .collect();
    let all_feasible = results.iter().all(|r| r.0);
    let all_small_change = results.iter().all(|r| r.1);
    let early = results.iter().filter(|r| r.2).count();
    let ok = all_feasible && all_small_change && early >= 95;
    report(
        2,
        ok,
        &format!("feasible {all_feasible}, tolerance met {all_small_change}, early {early}/100"),
    );
}

/// Criterion 3: the convergence bound holds in the seed-mean at every round
/// for each cluster size, with all task constants computed from construction.
#[test]
fn criterion_3_convergence_bound_holds() {
    let start = Instant::now();
    let task = QuadraticTask::new_random(10, 2, 6, 3, 1.0, 2.0, 0.0, 0.5, 31).unwrap();
    let rounds = 50;
    let seeds = 200;
    let w1 = vec![1.0; 6];
    let z = task.z_bound(&w1, rounds, 1);
    let mut ok = true;
    let mut detail = String::new();
    for &c_u in &[1usize, 2, 5, 10] {
        let consts = BoundConstants::new(task.mu, task.beta, c_u, rounds, &task, z);
        let mut mean = vec![0.0f64; rounds];
        let mut delta1 = 0.0;
        for s in 0..seeds {
            let mut rng = ChaCha12Rng::seed_from_u64(4000 + s);
            let assoc = random_assoc_fixed_cu(10, 2, c_u, &mut rng).unwrap();
            let tr = run_rounds(&task, &assoc, rounds, 1, &w1, 5000 + s).unwrap();
            delta1 = tr.delta1;
            for (acc, g) in mean.iter_mut().zip(&tr.gaps) {
                *acc += g / seeds as f64;
            }
        }
        let worst = (0..rounds)
            .map(|t| mean[t] / consts.eval(delta1, t + 1))
            .fold(0.0f64, f64::max);
        if worst > 1.0 {
            ok = false;
        }
        detail.push_str(&format!("C_u={c_u} max gap/bound {worst:.2e}; "));
    }
    let elapsed = start.elapsed().as_secs_f64();
    detail.push_str(&format!("{elapsed:.2}s"));
    report(3, ok && elapsed < 60.0, &detail);
}

/// Criterion 4: the bound is strictly decreasing in the cluster size and the
/// empirical seed-mean final gap ranks the same way.
#[test]
fn criterion_4_cluster_size_monotonicity() {
    let task = QuadraticTask::new_random(10, 2, 6, 3, 1.0, 2.0, 0.0, 0.5, 31).unwrap();
    let w1 = vec![1.0; 6];
    let rep = monotonicity_check(&task, &[1, 2, 5, 10], 50, 1000, &w1, 6000).unwrap();
    let ok = rep.bound_strictly_decreasing && rep.spearman <= -0.8;
    report(
        4,
        ok,
        &format!(
            "bound decreasing {}, spearman {:.3}, mean final gaps {:?}",
            rep.bound_strictly_decreasing, rep.spearman, rep.mean_final_gaps
        ),
    );
}

fn small_strategy_scenario(bandwidth: f64, m: usize, u: usize, seed: u64) -> Scenario<f64> {
    let layout = place_network::<f64>(seed, m, u, 200.0).unwrap();
    let nbcd = NbcdConfig {
        bandwidth,
        max_outer: 15,
        patience: 2,
        ..NbcdConfig::default()
    };
    Scenario::new(
        layout,
        FadingParams::default(),
        ComputeConfig::default(),
        vgg16_profile(),
        nbcd,
        1.0,
        2,
        seed + 100,
    )
    .unwrap()
}

/// Criterion 5: the learned strategy is near the enumerated optimum on an
/// instance small enough for exhaustive search (42 strategies per UE, 1764
/// joint ones).
#[test]
fn criterion_5_mais_vs_exhaustive() {
    let start = Instant::now();
    let sc = small_strategy_scenario(15e3, 3, 2, 55);
    let mut env = MaisEnv::new(sc, 1e5).unwrap();

    // exhaustive enumeration of every (split, nonempty cluster) pair per UE
    let mut opt_reward = f64::NEG_INFINITY;
    for l0 in 1..=6usize {
        for b0 in 1..8usize {
            for l1 in 1..=6usize {
                for b1 in 1..8usize {
                    let entries: Vec<bool> = (0..3)
                        .flat_map(|m| [b0 >> m & 1 == 1, b1 >> m & 1 == 1])
                        .collect();
                    let assoc = AssociationMatrix::new(3, 2, entries).unwrap();
                    let s = StrategyAssignment::new(vec![l0, l1], assoc).unwrap();
                    let stats = env.evaluate(&s).unwrap();
                    opt_reward = opt_reward.max(-stats.report.max_ratio);
                }
            }
        }
    }
    let enumerated = env.cache_len();

    // median best reward over 5 training seeds (cache shared, evaluations
    // are deterministic per strategy so sharing does not change results)
    // the default step sizes are tuned for long runs; 200 episodes of a
    // 4-step horizon give only 100 updates, so the desk-scale test uses
    // faster rates plus log-compressed rewards and a small exploration
    // mixture (the episode cap is the criterion, the rates are not)
    let ppo = PpoConfig {
        episodes: 200,
        critic_lr: 1e-3,
        actor_lr: 1e-2,
        update_epochs: 2,
        gamma: 0.5,
        explore: 0.1,
        log_rewards: true,
        ..PpoConfig::default()
    };
    let mut best: Vec<f64> = (0..5)
        .map(|s| train(&mut env, &ppo, 70 + s).unwrap().best_reward)
        .collect();
    best.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = best[2];

    // rewards are negative; within 10% means the achieved max ratio is at
    // most 1.1x the optimal one
    let gap = (median - opt_reward) / opt_reward.abs();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = gap.abs() <= 0.10 && median <= opt_reward + 1e-12 && elapsed < 300.0;
    report(
        5,
        ok,
        &format!(
            "enumerated {enumerated} strategies, optimum {opt_reward:.4}, median best {median:.4} \
             (gap {:.1}%), {elapsed:.1}s",
            100.0 * gap.abs()
        ),
    );
}

/// Criterion 6: exact latency arithmetic and the compute-frequency trend.
#[test]
fn criterion_6_latency_arithmetic() {
    let profile = vgg16_profile::<f64>();
    let cfg = ComputeConfig::<f64>::default();
    let t_ue = ue_compute_latency(&profile, &[1, 1], &cfg).unwrap();
    let t_dpu = dpu_latency_max(&profile, &[1], &cfg).unwrap();
    let exact = t_ue == 3.87 && (t_dpu - 5.414).abs() < 1e-12;
    // monotone strict decrease of t_ue over an f_ue sweep
    let mut last = f64::INFINITY;
    let mut monotone = true;
    for step in 0..9 {
        let f_ue = 1e9 + 0.25e9 * step as f64;
        let t = ue_compute_latency(&profile, &[1, 3], &ComputeConfig { f_ue, ..cfg }).unwrap();
        if t >= last {
            monotone = false;
        }
        last = t;
    }
    report(
        6,
        exact && monotone,
        &format!("t_ue(l=1)={t_ue}, t_dpu(l=1)={t_dpu}, monotone {monotone}"),
    );
}

/// Criterion 7: over a bandwidth sweep the learned strategy never does worse
/// than the no-splitting full-association baseline, and the average chosen
/// split layer trends upward with bandwidth.
#[test]
fn criterion_7_bandwidth_sweep_trends() {
    let bandwidths = [5e3, 10e3, 15e3, 20e3, 25e3];
    let (m, u) = (4usize, 2usize);
    let ppo = PpoConfig {
        episodes: 60,
        ..PpoConfig::default()
    };
    let mut learned_max = Vec::new();
    let mut bl3_max = Vec::new();
    let mut avg_splits = Vec::new();
    for &w in &bandwidths {
        let sc = small_strategy_scenario(w, m, u, 77);
        let bl3 = baseline(BaselineKind::Bl3, m, u, None, None, 6).unwrap();
        let bl3_ratio = evaluate_strategy(&sc, &bl3).unwrap().max_ratio;
        let mut env = MaisEnv::new(sc, 1e5).unwrap();
        let out = train(&mut env, &ppo, 13).unwrap();
        learned_max.push(-out.best_reward);
        bl3_max.push(bl3_ratio);
        let avg = out.best.splits.iter().sum::<usize>() as f64 / u as f64;
        avg_splits.push(avg);
    }
    let never_worse = learned_max
        .iter()
        .zip(&bl3_max)
        .all(|(l, b)| l <= &(b * (1.0 + 1e-9)));
    let inversions = avg_splits.windows(2).filter(|p| p[1] < p[0]).count();
    let ok = never_worse && inversions <= 1;
    report(
        7,
        ok,
        &format!(
            "learned {:?} vs BL3 {:?}, avg splits {:?} ({} inversions)",
            learned_max
                .iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>(),
            bl3_max
                .iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>(),
            avg_splits,
            inversions
        ),
    );
}

/// Criterion 8: gradient checks, exact advantage-estimation values, and
/// byte-identical seeded CSV output.
#[test]
fn criterion_8_numerical_hygiene() {
    // central-difference gradient checks over 10 seeds
    let mut grad_ok = true;
    for seed in 0..10u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let net = Mlp::<f64>::new(&[4, 6, 3], &mut rng, 1.0).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let u: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &u).unwrap();
        let mut flat = Vec::new();
        for l in 0..net.num_layers() {
            flat.extend_from_slice(&g.weights[l]);
            flat.extend_from_slice(&g.biases[l]);
        }
        let params = net.params_flat();
        let h = 1e-5;
        let f = |n: &Mlp<f64>| -> f64 {
            let (y, _) = n.forward(&x).unwrap();
            y.iter().zip(&u).map(|(a, b)| a * b).sum()
        };
        for k in 0..params.len() {
            let mut p = params.clone();
            let mut plus = net.clone();
            let mut minus = net.clone();
            p[k] += h;
            plus.set_params(&p).unwrap();
            p[k] -= 2.0 * h;
            minus.set_params(&p).unwrap();
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let denom = fd.abs().max(flat[k].abs()).max(1e-6);
            if (fd - flat[k]).abs() / denom > 1e-4 {
                grad_ok = false;
            }
        }
    }

    // exact advantage-estimation reference values
    let d = td_errors::<f64>(&[1.0], &[1.0], &[2.0], 0.99);
    let td_exact = d[0] == 1.0 + 0.99 * 2.0 - 1.0;
    let a = gae::<f64>(&[1.0, 0.5], 0.99, 0.9);
    let gae_exact = a[0] == 1.0 + (0.99 * 0.9) * 0.5 && a[1] == 0.5;

    // fixed seed: byte-identical CSV output
    let layout = place_network::<f64>(3, 3, 2, 200.0).unwrap();
    let params = FadingParams::default();
    let csv_a = draw_channel(&layout, &params, 99).unwrap().to_csv();
    let csv_b = draw_channel(&layout, &params, 99).unwrap().to_csv();
    let csv_ok = csv_a == csv_b && !csv_a.is_empty();

    let ok = grad_ok && td_exact && gae_exact && csv_ok;
    report(
        8,
        ok,
        &format!("grads {grad_ok}, td {td_exact}, gae {gae_exact}, csv identical {csv_ok}"),
    );
}
