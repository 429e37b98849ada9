//! Long-term strategy learner: per-UE actors and a shared critic trained
//! with clipped-ratio policy updates and generalized advantage estimation.
//!
//! Each episode the actors pick a split layer (categorical) and an AP
//! association vector (independent Bernoulli bits, repaired to a nonempty
//! cluster). The reward is minus the maximum latency-to-accuracy ratio, with
//! the expectation estimated by the short-term solver and cached per strategy.

use crate::channel::large_scale_gain;
use crate::error::{Error, Result};
use crate::latency::total_latency;
use crate::nbcd::solve;
use crate::nn::{opt_step, Gradients, Mlp, OptState};
use crate::num::Real;
use crate::objective::{latency_accuracy_ratio, RatioReport, Scenario, StrategyAssignment};
use crate::phy::AssociationMatrix;
use crate::split_profile::SplitProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

/// Per-UE observation: activation size, sub-model size, UE-side compute,
/// expected uplink rate, expected downlink rate; all normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T> {
    pub features: [T; 5],
}

/// One joint decision: split layer (1-based) and association bits per UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointAction {
    pub splits: Vec<usize>,
    /// `bits[u][m]` is true when AP `m` serves UE `u`.
    pub bits: Vec<Vec<bool>>,
}

impl JointAction {
    pub fn to_strategy(&self) -> Result<StrategyAssignment> {
        let num_ues = self.splits.len();
        let num_aps = self.bits.first().map_or(0, Vec::len);
        let mut entries = vec![false; num_aps * num_ues];
        for (u, row) in self.bits.iter().enumerate() {
            for (m, &b) in row.iter().enumerate() {
                entries[m * num_ues + u] = b;
            }
        }
        StrategyAssignment::new(
            self.splits.clone(),
            AssociationMatrix::new(num_aps, num_ues, entries)?,
        )
    }
}

/// One stored rollout step.
#[derive(Debug, Clone)]
pub struct Transition<T> {
    pub states: Vec<AgentState<T>>,
    pub action: JointAction,
    /// Per UE: probability of each sampled element under the old policy
    /// (split first, then the M bits).
    pub old_probs: Vec<Vec<T>>,
    pub reward: T,
    pub next_states: Vec<AgentState<T>>,
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct PpoConfig<T> {
    pub gamma: T,
    pub lambda: T,
    /// Rollout length between updates.
    pub horizon: usize,
    pub clip: T,
    pub critic_lr: T,
    pub actor_lr: T,
    pub episodes: usize,
    /// Hidden layer widths of both actors and the critic.
    pub hidden: Vec<usize>,
    /// Z-score the rewards with running statistics for critic stability.
    pub normalize_rewards: bool,
    /// Learn on `-ln(max ratio)` instead of `-max ratio` (same argmax, far
    /// smaller dynamic range); incumbent tracking always uses the raw reward.
    pub log_rewards: bool,
    /// Standardize the advantages fed to the actor update (zero mean, unit
    /// variance per batch); the critic targets always use the raw values.
    pub standardize_advantages: bool,
    /// Gradient steps taken on each rollout before the buffer is cleared;
    /// the clipped ratio keeps the extra steps close to the old policy.
    pub update_epochs: usize,
    /// Behavior-policy exploration: each action element is sampled from the
    /// `(1 - explore) * policy + explore * uniform` mixture, with the stored
    /// probabilities taken from the mixture (importance-corrected by the
    /// ratio). Zero recovers on-policy sampling.
    pub explore: T,
}

impl<T: Real> Default for PpoConfig<T> {
    fn default() -> Self {
        PpoConfig {
            gamma: T::lit(0.99),
            lambda: T::lit(0.9),
            horizon: 4,
            clip: T::lit(0.1),
            critic_lr: T::lit(1e-5),
            actor_lr: T::lit(5e-5),
            episodes: 200,
            hidden: vec![64, 64],
            normalize_rewards: true,
            log_rewards: false,
            standardize_advantages: true,
            update_epochs: 1,
            explore: T::zero(),
        }
    }
}

impl<T: Real> PpoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero() && self.gamma <= T::one()) {
            return Err(Error::InvalidArgument("gamma must be in (0, 1]".into()));
        }
        if !(self.lambda >= T::zero() && self.lambda <= T::one()) {
            return Err(Error::InvalidArgument("lambda must be in [0, 1]".into()));
        }
        if !(self.clip > T::zero()) {
            return Err(Error::InvalidArgument("clip must be > 0".into()));
        }
        if self.horizon == 0 || self.episodes == 0 || self.update_epochs == 0 {
            return Err(Error::InvalidArgument(
                "horizon, episodes, and update_epochs must be >= 1".into(),
            ));
        }
        if !(self.explore >= T::zero() && self.explore < T::one()) {
            return Err(Error::InvalidArgument("explore must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Cached per-strategy evaluation: ratio report plus the mean solver rates
/// (the rate features of the follow-up state).
#[derive(Debug, Clone)]
pub struct EvalStats<T> {
    pub report: RatioReport<T>,
    pub ul_rates: Vec<T>,
    pub dl_rates: Vec<T>,
}

/// Environment for the learner: a fixed scenario plus the strategy cache.
#[derive(Debug, Clone)]
pub struct MaisEnv<T> {
    pub scenario: Scenario<T>,
    /// Rate normalization scale (b/s) for the state features.
    pub rate_scale: T,
    /// Mean large-scale gain per (AP, UE), used by the feasibility repair.
    gains: Vec<Vec<T>>,
    cache: HashMap<StrategyAssignment, EvalStats<T>>,
}

impl<T: Real> MaisEnv<T> {
    pub fn new(scenario: Scenario<T>, rate_scale: T) -> Result<Self> {
        if !(rate_scale > T::zero()) {
            return Err(Error::InvalidArgument("rate_scale must be > 0".into()));
        }
        let (m, u) = (scenario.layout.num_aps(), scenario.layout.num_ues());
        let mut gains = vec![vec![T::zero(); u]; m];
        for (mi, row) in gains.iter_mut().enumerate() {
            for (ui, g) in row.iter_mut().enumerate() {
                // shadowing is zero-mean in dB; rank by distance-only gain
                *g = large_scale_gain(scenario.layout.distance(mi, ui), T::zero())?;
            }
        }
        Ok(MaisEnv {
            scenario,
            rate_scale,
            gains,
            cache: HashMap::new(),
        })
    }

    pub fn num_aps(&self) -> usize {
        self.scenario.layout.num_aps()
    }

    pub fn num_ues(&self) -> usize {
        self.scenario.layout.num_ues()
    }

    pub fn num_splits(&self) -> usize {
        self.scenario.profile.num_points()
    }

    /// Index of the AP with the largest mean large-scale gain towards `u`.
    pub fn best_ap(&self, u: usize) -> usize {
        (0..self.num_aps())
            .max_by(|&a, &b| {
                self.gains[a][u]
                    .partial_cmp(&self.gains[b][u])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0)
    }

    /// Evaluate (or fetch from cache) a strategy's ratio report and rates.
    pub fn evaluate(&mut self, strategy: &StrategyAssignment) -> Result<EvalStats<T>> {
        if let Some(hit) = self.cache.get(strategy) {
            return Ok(hit.clone());
        }
        let sc = &self.scenario;
        strategy.validate(&sc.profile)?;
        let num_ues = sc.layout.num_ues();
        let mut lat = vec![T::zero(); num_ues];
        let mut ul = vec![T::zero(); num_ues];
        let mut dl = vec![T::zero(); num_ues];
        for draw in 0..sc.n_draws {
            let channel = crate::channel::draw_channel(
                &sc.layout,
                &sc.fading,
                sc.seed.wrapping_add(draw as u64),
            )?;
            let sol = solve(
                &channel,
                &strategy.assoc,
                &strategy.splits,
                &sc.profile,
                &sc.nbcd,
                None,
            )?;
            let breakdown = total_latency(
                &sc.profile,
                &strategy.splits,
                &sol.uplink_rates,
                &sol.downlink_rates,
                &sc.compute,
            )?;
            for u in 0..num_ues {
                lat[u] += breakdown.t_total[u];
                ul[u] += sol.uplink_rates[u];
                dl[u] += sol.downlink_rates[u];
            }
        }
        let n = T::lit(sc.n_draws as f64);
        for v in lat.iter_mut().chain(ul.iter_mut()).chain(dl.iter_mut()) {
            *v = *v / n;
        }
        let report = latency_accuracy_ratio(&lat, &strategy.assoc, sc.ell)?;
        let stats = EvalStats {
            report,
            ul_rates: ul,
            dl_rates: dl,
        };
        self.cache.insert(strategy.clone(), stats.clone());
        Ok(stats)
    }

    /// Number of distinct strategies evaluated so far.
    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

/// Reward of a joint strategy: minus the worst latency-to-accuracy ratio.
pub fn reward<T: Real>(report: &RatioReport<T>) -> T {
    -report.max_ratio
}

/// Per-UE states induced by an executed strategy: profile features at the
/// split plus the rate estimates, each normalized to `[0, 1]`.
pub fn build_state<T: Real>(
    strategy: &StrategyAssignment,
    profile: &SplitProfile<T>,
    ul_rates: &[T],
    dl_rates: &[T],
    rate_scale: T,
) -> Result<Vec<AgentState<T>>> {
    strategy.validate(profile)?;
    let num_ues = strategy.splits.len();
    if ul_rates.len() != num_ues || dl_rates.len() != num_ues {
        return Err(Error::ShapeMismatch("rates vs strategy".into()));
    }
    let l_max = profile.num_points();
    let act_max = (1..=l_max)
        .map(|l| profile.activation_bits(l).unwrap())
        .fold(T::zero(), T::max);
    let sub_max = profile.submodel_bits(l_max)?;
    let ops_max = profile.total_ops();
    let clamp01 = |x: T| x.min(T::one()).max(T::zero());
    strategy
        .splits
        .iter()
        .enumerate()
        .map(|(u, &l)| {
            Ok(AgentState {
                features: [
                    profile.activation_bits(l)? / act_max,
                    profile.submodel_bits(l)? / sub_max,
                    profile.mac_ops(l)? / ops_max,
                    clamp01(ul_rates[u] / rate_scale),
                    clamp01(dl_rates[u] / rate_scale),
                ],
            })
        })
        .collect()
}

fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn sigmoid<T: Real>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Probability of each element of a sampled per-UE action (split, then the M
/// bits) under the actor's current parameters.
pub fn element_probs<T: Real>(
    actor: &Mlp<T>,
    state: &AgentState<T>,
    split: usize,
    bits: &[bool],
) -> Result<Vec<T>> {
    let (logits, _) = actor.forward(&state.features)?;
    let num_aps = bits.len();
    let num_splits = logits
        .len()
        .checked_sub(num_aps)
        .filter(|&l| l >= 1)
        .ok_or_else(|| Error::ShapeMismatch("actor output vs action".into()))?;
    if split == 0 || split > num_splits {
        return Err(Error::SplitOutOfRange {
            split,
            num_points: num_splits,
        });
    }
    let sm = softmax(&logits[..num_splits]);
    let mut probs = vec![sm[split - 1]];
    for (m, &b) in bits.iter().enumerate() {
        let p = sigmoid(logits[num_splits + m]);
        probs.push(if b { p } else { T::one() - p });
    }
    Ok(probs)
}

/// Sample a per-UE action; returns the (repaired) split/bits and the
/// probability of each sampled element. `best_ap` receives the forced bit
/// when all M bits come out zero.
pub fn sample_action<T: Real, R: Rng>(
    actor: &Mlp<T>,
    state: &AgentState<T>,
    num_splits: usize,
    num_aps: usize,
    best_ap: usize,
    rng: &mut R,
) -> Result<(usize, Vec<bool>, Vec<T>)> {
    sample_action_mixed(actor, state, num_splits, num_aps, best_ap, T::zero(), rng)
}

/// [`sample_action`] with a uniform exploration mixture: every element is
/// drawn from `(1 - explore) * policy + explore * uniform`, and the returned
/// probabilities are those of the mixture (the behavior policy).
pub fn sample_action_mixed<T: Real, R: Rng>(
    actor: &Mlp<T>,
    state: &AgentState<T>,
    num_splits: usize,
    num_aps: usize,
    best_ap: usize,
    explore: T,
    rng: &mut R,
) -> Result<(usize, Vec<bool>, Vec<T>)> {
    let (logits, _) = actor.forward(&state.features)?;
    if logits.len() != num_splits + num_aps {
        return Err(Error::ShapeMismatch("actor output width".into()));
    }
    let keep = T::one() - explore;
    let sm: Vec<T> = softmax(&logits[..num_splits])
        .into_iter()
        .map(|p| keep * p + explore / T::lit(num_splits as f64))
        .collect();
    let draw = T::uniform01(rng);
    let mut split = num_splits;
    let mut cum = T::zero();
    for (i, &p) in sm.iter().enumerate() {
        cum += p;
        if draw < cum {
            split = i + 1;
            break;
        }
    }
    let mut bit_probs = Vec::with_capacity(num_aps);
    let mut bits = Vec::with_capacity(num_aps);
    for m in 0..num_aps {
        let p = keep * sigmoid(logits[num_splits + m]) + explore / T::lit(2.0);
        bit_probs.push(p);
        bits.push(T::uniform01(rng) < p);
    }
    if bits.iter().all(|&b| !b) {
        bits[best_ap] = true;
    }
    let mut probs = vec![sm[split - 1]];
    for (m, &b) in bits.iter().enumerate() {
        probs.push(if b { bit_probs[m] } else { T::one() - bit_probs[m] });
    }
    Ok((split, bits, probs))
}

/// One-step temporal-difference errors `d_t = U_t + g*V_{t+1} - V_t`.
pub fn td_errors<T: Real>(rewards: &[T], values: &[T], next_values: &[T], gamma: T) -> Vec<T> {
    rewards
        .iter()
        .zip(values)
        .zip(next_values)
        .map(|((&r, &v), &vn)| r + gamma * vn - v)
        .collect()
}

/// Generalized advantage estimates over a finite rollout:
/// `A_t = sum_l (g*lam)^l d_{t+l}`.
pub fn gae<T: Real>(deltas: &[T], gamma: T, lambda: T) -> Vec<T> {
    let gl = gamma * lambda;
    let mut adv = vec![T::zero(); deltas.len()];
    let mut acc = T::zero();
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + gl * acc;
        adv[t] = acc;
    }
    adv
}

/// Flatten a joint (states, action) pair into the critic input: per-UE
/// features, one-hot split, and association bits, concatenated across UEs.
pub fn encode_critic_input<T: Real>(
    states: &[AgentState<T>],
    action: &JointAction,
    num_splits: usize,
) -> Vec<T> {
    let mut x = Vec::new();
    for (u, s) in states.iter().enumerate() {
        x.extend_from_slice(&s.features);
        for l in 1..=num_splits {
            x.push(if action.splits[u] == l { T::one() } else { T::zero() });
        }
        for &b in &action.bits[u] {
            x.push(if b { T::one() } else { T::zero() });
        }
    }
    x
}

/// Mean squared error of the scalar critic against fixed targets.
pub fn critic_loss<T: Real>(critic: &Mlp<T>, inputs: &[Vec<T>], targets: &[T]) -> Result<T> {
    let n = T::lit(inputs.len() as f64);
    let mut loss = T::zero();
    for (x, &y) in inputs.iter().zip(targets) {
        let (v, _) = critic.forward(x)?;
        loss += (v[0] - y) * (v[0] - y);
    }
    Ok(loss / n)
}

/// Analytic gradient of [`critic_loss`].
pub fn critic_grad<T: Real>(
    critic: &Mlp<T>,
    inputs: &[Vec<T>],
    targets: &[T],
) -> Result<Gradients<T>> {
    let n = T::lit(inputs.len() as f64);
    let mut total = Gradients::zeros_like(critic);
    for (x, &y) in inputs.iter().zip(targets) {
        let (v, cache) = critic.forward(x)?;
        let upstream = [T::lit(2.0) * (v[0] - y) / n];
        let g = critic.backward(&cache, &upstream)?;
        total.add_scaled(&g, T::one());
    }
    Ok(total)
}

/// One descent step on the critic MSE against `old value + advantage`.
pub fn critic_update<T: Real>(
    critic: &mut Mlp<T>,
    opt: &mut OptState<T>,
    inputs: &[Vec<T>],
    targets: &[T],
) -> Result<T> {
    let loss = critic_loss(critic, inputs, targets)?;
    let g = critic_grad(critic, inputs, targets)?;
    opt_step(critic, opt, &g, false);
    Ok(loss)
}

/// Elementwise new/old probability ratios of a sampled per-UE action:
/// one categorical ratio (the chosen split) followed by M Bernoulli ratios.
pub fn ratio_vector<T: Real>(
    actor: &Mlp<T>,
    old_actor: &Mlp<T>,
    state: &AgentState<T>,
    split: usize,
    bits: &[bool],
) -> Result<Vec<T>> {
    let new_p = element_probs(actor, state, split, bits)?;
    let old_p = element_probs(old_actor, state, split, bits)?;
    new_p
        .iter()
        .zip(&old_p)
        .map(|(&n, &o)| {
            if o > T::zero() {
                Ok(n / o)
            } else {
                Err(Error::InvalidArgument("old probability is zero".into()))
            }
        })
        .collect()
}

/// `min(r*a, clip(r, 1-k, 1+k)*a)` and its derivative with respect to `r`.
pub fn clipped_term<T: Real>(r: T, advantage: T, clip: T) -> (T, T) {
    let clipped = r.min(T::one() + clip).max(T::one() - clip);
    let unclipped = r * advantage;
    let clipped_val = clipped * advantage;
    if unclipped <= clipped_val {
        (unclipped, advantage)
    } else {
        (clipped_val, T::zero())
    }
}

/// One rollout step of a single UE as seen by the actor update.
pub struct ActorSample<'a, T> {
    pub state: &'a AgentState<T>,
    pub split: usize,
    pub bits: &'a [bool],
    pub old_probs: &'a [T],
    pub advantage: T,
}

/// Clipped surrogate: mean over samples and over the M+1 action elements of
/// `min(r*A, clip(r)*A)`.
pub fn actor_surrogate<T: Real>(
    actor: &Mlp<T>,
    samples: &[ActorSample<'_, T>],
    clip: T,
) -> Result<T> {
    let mut total = T::zero();
    let mut count = T::zero();
    for s in samples {
        let new_p = element_probs(actor, s.state, s.split, s.bits)?;
        for (j, &p) in new_p.iter().enumerate() {
            let r = p / s.old_probs[j];
            total += clipped_term(r, s.advantage, clip).0;
            count += T::one();
        }
    }
    Ok(total / count)
}

/// Analytic gradient of [`actor_surrogate`] with respect to actor parameters.
pub fn actor_grad<T: Real>(
    actor: &Mlp<T>,
    samples: &[ActorSample<'_, T>],
    clip: T,
) -> Result<Gradients<T>> {
    let mut total = Gradients::zeros_like(actor);
    let elems = samples
        .iter()
        .map(|s| s.bits.len() + 1)
        .sum::<usize>();
    let scale = T::one() / T::lit(elems as f64);
    for s in samples {
        let (logits, cache) = actor.forward(&s.state.features)?;
        let num_aps = s.bits.len();
        let num_splits = logits.len() - num_aps;
        let sm = softmax(&logits[..num_splits]);
        // d surrogate / d logits, summed over the M+1 elements
        let mut upstream = vec![T::zero(); logits.len()];
        // split element: p = softmax_{l-1}; dp/dz_i = p (delta - softmax_i)
        let p_split = sm[s.split - 1];
        let r = p_split / s.old_probs[0];
        let dval_dr = clipped_term(r, s.advantage, clip).1;
        if dval_dr != T::zero() {
            let c = dval_dr / s.old_probs[0] * scale;
            for i in 0..num_splits {
                let delta = if i == s.split - 1 { T::one() } else { T::zero() };
                upstream[i] += c * p_split * (delta - sm[i]);
            }
        }
        for (m, &b) in s.bits.iter().enumerate() {
            let z = logits[num_splits + m];
            let sig = sigmoid(z);
            let p = if b { sig } else { T::one() - sig };
            let r = p / s.old_probs[m + 1];
            let dval_dr = clipped_term(r, s.advantage, clip).1;
            if dval_dr != T::zero() {
                let sign = if b { T::one() } else { -T::one() };
                upstream[num_splits + m] +=
                    dval_dr / s.old_probs[m + 1] * scale * sign * sig * (T::one() - sig);
            }
        }
        let g = actor.backward(&cache, &upstream)?;
        total.add_scaled(&g, T::one());
    }
    Ok(total)
}

/// One ascent step on the clipped surrogate.
pub fn actor_update<T: Real>(
    actor: &mut Mlp<T>,
    opt: &mut OptState<T>,
    samples: &[ActorSample<'_, T>],
    clip: T,
) -> Result<T> {
    let value = actor_surrogate(actor, samples, clip)?;
    let g = actor_grad(actor, samples, clip)?;
    opt_step(actor, opt, &g, true);
    Ok(value)
}

/// Training output: the best strategy seen, its reward, and the per-episode
/// reward trace.
#[derive(Debug, Clone)]
pub struct MaisResult<T> {
    pub best: StrategyAssignment,
    pub best_reward: T,
    pub trace: Vec<T>,
}

/// Run the full training loop: roll out `horizon` steps with the frozen old
/// policies, evaluate rewards through the short-term solver, update critic
/// and actors once per rollout, clear the buffer, and sync the old networks.
pub fn train<T: Real>(
    env: &mut MaisEnv<T>,
    ppo: &PpoConfig<T>,
    seed: u64,
) -> Result<MaisResult<T>> {
    ppo.validate()?;
    let num_ues = env.num_ues();
    let num_aps = env.num_aps();
    let num_splits = env.num_splits();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut actor_widths = vec![5usize];
    actor_widths.extend_from_slice(&ppo.hidden);
    actor_widths.push(num_splits + num_aps);
    let mut critic_widths = vec![num_ues * (5 + num_splits + num_aps)];
    critic_widths.extend_from_slice(&ppo.hidden);
    critic_widths.push(1);

    let mut actors: Vec<Mlp<T>> = (0..num_ues)
        .map(|_| Mlp::new(&actor_widths, &mut rng, T::lit(0.01)))
        .collect::<Result<_>>()?;
    let mut critic = Mlp::new(&critic_widths, &mut rng, T::one())?;
    let mut old_actors = actors.clone();
    let mut old_critic = critic.clone();
    let mut actor_opts: Vec<OptState<T>> = actors
        .iter()
        .map(|a| OptState::new(a, ppo.actor_lr))
        .collect();
    let mut critic_opt = OptState::new(&critic, ppo.critic_lr);

    // initial strategy: full association, earliest split
    let init = StrategyAssignment::new(
        vec![1; num_ues],
        AssociationMatrix::all_ones(num_aps, num_ues),
    )?;
    let init_stats = env.evaluate(&init)?;
    let mut states = build_state(
        &init,
        &env.scenario.profile,
        &init_stats.ul_rates,
        &init_stats.dl_rates,
        env.rate_scale,
    )?;
    let mut best = init;
    let mut best_reward = reward(&init_stats.report);
    // running reward statistics (Welford) for the z-score normalization
    let mut rw_count = T::zero();
    let mut rw_mean = T::zero();
    let mut rw_m2 = T::zero();

    let mut trace = Vec::with_capacity(ppo.episodes);
    let mut buffer: Vec<Transition<T>> = Vec::with_capacity(ppo.horizon);

    for _episode in 0..ppo.episodes {
        // roll out one step with the frozen old actors
        let mut splits = Vec::with_capacity(num_ues);
        let mut bits = Vec::with_capacity(num_ues);
        let mut old_probs = Vec::with_capacity(num_ues);
        for u in 0..num_ues {
            let (l, b, p) = sample_action_mixed(
                &old_actors[u],
                &states[u],
                num_splits,
                num_aps,
                env.best_ap(u),
                ppo.explore,
                &mut rng,
            )?;
            splits.push(l);
            bits.push(b);
            old_probs.push(p);
        }
        let action = JointAction { splits, bits };
        let strategy = action.to_strategy()?;
        let stats = env.evaluate(&strategy)?;
        let raw = reward(&stats.report);
        trace.push(raw);
        if raw > best_reward {
            best_reward = raw;
            best = strategy.clone();
        }
        let learn = if ppo.log_rewards { -(-raw).ln() } else { raw };
        let normalized = if ppo.normalize_rewards {
            rw_count += T::one();
            let d = learn - rw_mean;
            rw_mean += d / rw_count;
            rw_m2 += d * (learn - rw_mean);
            let std = (rw_m2 / rw_count).sqrt().max(T::lit(1e-8));
            (learn - rw_mean) / std
        } else {
            learn
        };
        let next_states = build_state(
            &strategy,
            &env.scenario.profile,
            &stats.ul_rates,
            &stats.dl_rates,
            env.rate_scale,
        )?;
        buffer.push(Transition {
            states: states.clone(),
            action,
            old_probs,
            reward: normalized,
            next_states: next_states.clone(),
        });
        states = next_states;

        if buffer.len() < ppo.horizon {
            continue;
        }

        // critic values of (S_t, A_t); the value after the last step reuses
        // the final action with the follow-up state
        let inputs: Vec<Vec<T>> = buffer
            .iter()
            .map(|tr| encode_critic_input(&tr.states, &tr.action, num_splits))
            .collect();
        let value_of = |net: &Mlp<T>, x: &Vec<T>| -> Result<T> { Ok(net.forward(x)?.0[0]) };
        let mut values = Vec::with_capacity(buffer.len());
        let mut old_values = Vec::with_capacity(buffer.len());
        for x in &inputs {
            values.push(value_of(&critic, x)?);
            old_values.push(value_of(&old_critic, x)?);
        }
        let mut next_values = values[1..].to_vec();
        let last = buffer.last().unwrap();
        let tail = encode_critic_input(&last.next_states, &last.action, num_splits);
        next_values.push(value_of(&critic, &tail)?);

        let rewards: Vec<T> = buffer.iter().map(|tr| tr.reward).collect();
        let deltas = td_errors(&rewards, &values, &next_values, ppo.gamma);
        let advantages = gae(&deltas, ppo.gamma, ppo.lambda);

        let targets: Vec<T> = old_values
            .iter()
            .zip(&advantages)
            .map(|(&v, &a)| v + a)
            .collect();
        for _ in 0..ppo.update_epochs {
            critic_update(&mut critic, &mut critic_opt, &inputs, &targets)?;
        }

        let actor_adv: Vec<T> = if ppo.standardize_advantages {
            let n = T::lit(advantages.len() as f64);
            let mean = advantages.iter().cloned().sum::<T>() / n;
            let var = advantages
                .iter()
                .map(|&a| (a - mean) * (a - mean))
                .sum::<T>()
                / n;
            let std = var.sqrt().max(T::lit(1e-8));
            advantages.iter().map(|&a| (a - mean) / std).collect()
        } else {
            advantages.clone()
        };

        for u in 0..num_ues {
            let samples: Vec<ActorSample<'_, T>> = buffer
                .iter()
                .zip(&actor_adv)
                .map(|(tr, &a)| ActorSample {
                    state: &tr.states[u],
                    split: tr.action.splits[u],
                    bits: &tr.action.bits[u],
                    old_probs: &tr.old_probs[u],
                    advantage: a,
                })
                .collect();
            for _ in 0..ppo.update_epochs {
                actor_update(&mut actors[u], &mut actor_opts[u], &samples, ppo.clip)?;
            }
        }

        buffer.clear();
        old_actors = actors.clone();
        old_critic = critic.clone();
    }

    Ok(MaisResult {
        best,
        best_reward,
        trace,
    })
}
