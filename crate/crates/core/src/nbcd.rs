//! Short-term solver: nested block coordinate descent with fractional
//! programming auxiliaries.
//!
//! For a fixed channel draw, association, and split choice, the solver
//! alternates an uplink power-control block and a downlink beamforming block.
//! Each block maximizes a concave quadratic-transform surrogate of its
//! weighted sum rate exactly (the surrogates are separable per UE), with
//! Lagrange multipliers found by bisection so the per-UE uplink power and
//! per-AP downlink power budgets hold after every update. An outer loop
//! reweights UEs by subgradient penalty steps, steering the weighted-sum
//! solutions toward the min-max transmission latency.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::num::Real;
use crate::phy::{
    conjugate_combiner, downlink_amplitudes, rate_bps, uplink_gains, AssociationMatrix,
    BeamformerSet, UplinkPowers,
};
use crate::split_profile::SplitProfile;
use num_complex::Complex;

/// Penalty subgradient step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyStep {
    /// Step proportional to the penalty itself and the dimensionless latency
    /// slack, so the decay rate is invariant to rate units. Default.
    #[default]
    Relative,
    /// Literal constant-step rule on the raw rate subgradient (b/s units).
    Absolute,
}

/// Solver parameters. Powers in watts, bandwidth in Hz.
#[derive(Debug, Clone)]
pub struct NbcdConfig<T> {
    pub p_ul_max: T,
    pub p_dl_max: T,
    pub bandwidth: T,
    pub noise_power: T,
    pub penalty_step: PenaltyStep,
    /// Uplink penalty step size (dimensionless in relative mode).
    pub rho_theta: T,
    /// Downlink penalty step size.
    pub rho_pi: T,
    /// Smallest per-iteration decay factor in relative mode.
    pub relative_floor: T,
    /// Geometric decay of the step size across outer iterations. The min-max
    /// subgradient oscillates with a fixed step; shrinking it damps the
    /// oscillation so the outer loop settles, while the best iterate is kept.
    pub step_decay: T,
    pub tol_inner: T,
    pub tol_outer: T,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Consecutive outer iterations without a `tol_outer` improvement of the
    /// incumbent objective before declaring convergence.
    pub patience: usize,
    /// Relative tolerance of the multiplier bisections.
    pub bisect_tol: T,
    pub bisect_max: usize,
    /// Allowed relative slack of the per-AP power at the chi bisection stop;
    /// looser than `bisect_tol` because each probe re-solves linear systems.
    pub chi_tol: T,
    /// Cap on Gauss-Seidel sweeps over the per-AP multipliers.
    pub chi_sweeps: usize,
    /// Keep a per-outer-iteration trace in the solution.
    pub trace: bool,
}

impl<T: Real> Default for NbcdConfig<T> {
    fn default() -> Self {
        NbcdConfig {
            p_ul_max: T::lit(0.1),
            p_dl_max: T::lit(0.3),
            bandwidth: T::lit(15e3),
            noise_power: crate::num::db_to_linear(T::lit(-151.0)),
            penalty_step: PenaltyStep::Relative,
            rho_theta: T::lit(0.5),
            rho_pi: T::lit(0.5),
            relative_floor: T::lit(1e-3),
            step_decay: T::lit(0.9),
            tol_inner: T::lit(1e-4),
            tol_outer: T::lit(1e-4),
            max_inner: 50,
            max_outer: 100,
            patience: 10,
            bisect_tol: T::lit(1e-8),
            bisect_max: 100,
            chi_tol: T::lit(1e-4),
            chi_sweeps: 30,
            trace: false,
        }
    }
}

/// One outer-iteration trace row.
#[derive(Debug, Clone)]
pub struct TraceRow<T> {
    pub outer: usize,
    pub t_max_ul: T,
    pub t_max_dl: T,
    /// Worst relative power-budget violation (0 when feasible).
    pub violation: T,
}

/// Solver output; powers and beams are feasible for C1 and C2.
#[derive(Debug, Clone)]
pub struct NbcdSolution<T> {
    pub powers: UplinkPowers<T>,
    pub beams: BeamformerSet<T>,
    pub uplink_rates: Vec<T>,
    pub downlink_rates: Vec<T>,
    pub t_max_ul: T,
    pub t_max_dl: T,
    pub outer_iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow<T>>,
}

// ---------------------------------------------------------------------------
// uplink block
// ---------------------------------------------------------------------------

/// Channel-dependent uplink constants: squared combined gains and cluster
/// sizes. `gain_sq[u][v]` is how strongly UE `v`'s unit-power signal lands in
/// UE `u`'s combined observation.
#[derive(Debug, Clone)]
pub struct UlGeometry<T> {
    pub num_ues: usize,
    pub gain_sq: Vec<Vec<T>>,
    pub cluster: Vec<T>,
}

/// Precompute the uplink geometry for one realization.
pub fn uplink_geometry<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
) -> Result<UlGeometry<T>> {
    let combiners = conjugate_combiner(channel)?;
    let gains = uplink_gains(channel, assoc, &combiners);
    let num_ues = channel.num_ues;
    let gain_sq = gains
        .iter()
        .map(|row| row.iter().map(|g| g.norm_sqr()).collect())
        .collect();
    let cluster = (0..num_ues)
        .map(|u| T::lit(assoc.cluster_size_ue(u) as f64))
        .collect();
    Ok(UlGeometry {
        num_ues,
        gain_sq,
        cluster,
    })
}

impl<T: Real> UlGeometry<T> {
    /// Uplink SINR for the given powers.
    pub fn sinr(&self, p: &[T], sigma2: T) -> Vec<T> {
        (0..self.num_ues)
            .map(|u| {
                let useful = p[u] * self.gain_sq[u][u];
                let mut interference = T::zero();
                for v in 0..self.num_ues {
                    if v != u {
                        interference += p[v] * self.gain_sq[u][v];
                    }
                }
                useful / (interference + self.cluster[u] * sigma2)
            })
            .collect()
    }
}

/// Frozen uplink auxiliaries for one power update.
#[derive(Debug, Clone)]
pub struct UlAux<T> {
    pub omega: Vec<T>,
    /// `kappa_u = theta_u (1 + xi_u)`, frozen at the auxiliary update.
    pub kappa: Vec<T>,
    pub xi: Vec<T>,
}

/// Auxiliary update: `omega_u = sqrt(theta_u (1+xi_u) P_US) / (P_US + P_IUI +
/// C_u sigma^2)`, the stationary point of the quadratic transform.
pub fn update_omega<T: Real>(geo: &UlGeometry<T>, p: &[T], theta: &[T], sigma2: T) -> UlAux<T> {
    let n = geo.num_ues;
    let mut omega = vec![T::zero(); n];
    let mut kappa = vec![T::zero(); n];
    let mut xi = vec![T::zero(); n];
    for u in 0..n {
        let p_us = p[u] * geo.gain_sq[u][u];
        let mut p_iui = T::zero();
        for v in 0..n {
            if v != u {
                p_iui += p[v] * geo.gain_sq[u][v];
            }
        }
        let noise = geo.cluster[u] * sigma2;
        xi[u] = p_us / (p_iui + noise);
        kappa[u] = theta[u] * (T::one() + xi[u]);
        omega[u] = (kappa[u] * p_us).sqrt() / (p_us + p_iui + noise);
    }
    UlAux { omega, kappa, xi }
}

/// Power update: per-UE closed form with the multiplier `upsilon_u` bisected
/// so the budget holds. The surrogate is separable and strictly concave in
/// each `p_u`, so the clipped stationary point is its exact box maximizer.
pub fn update_power<T: Real>(
    geo: &UlGeometry<T>,
    aux: &UlAux<T>,
    cfg: &NbcdConfig<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = geo.num_ues;
    let k = T::lit(std::f64::consts::LN_2) / cfg.bandwidth;
    let mut p = vec![T::zero(); n];
    let mut upsilon = vec![T::zero(); n];
    for u in 0..n {
        let num = aux.kappa[u] * aux.omega[u] * aux.omega[u] * geo.gain_sq[u][u];
        let mut d = T::zero();
        for v in 0..n {
            d += aux.omega[v] * aux.omega[v] * geo.gain_sq[v][u];
        }
        if num == T::zero() {
            continue;
        }
        if !(d > T::zero()) {
            return Err(Error::InvalidArgument(
                "degenerate power update: zero denominator".into(),
            ));
        }
        let eval = |ups: T| num / ((d + k * ups) * (d + k * ups));
        let unconstrained = eval(T::zero());
        if unconstrained <= cfg.p_ul_max {
            p[u] = unconstrained;
            continue;
        }
        // p(upsilon) decreases to 0, so a bracket always exists
        let mut lo = T::zero();
        let mut hi = T::one();
        let mut guard = 0;
        while eval(hi) > cfg.p_ul_max {
            hi = hi + hi;
            guard += 1;
            if guard > 200 {
                return Err(Error::BisectionBracket("uplink power multiplier".into()));
            }
        }
        for _ in 0..cfg.bisect_max {
            let mid = (lo + hi) * T::lit(0.5);
            if eval(mid) > cfg.p_ul_max {
                lo = mid;
            } else {
                hi = mid;
            }
            if (eval(hi) - cfg.p_ul_max).abs() <= cfg.bisect_tol * cfg.p_ul_max {
                break;
            }
        }
        // the box maximizer sits exactly on the budget; hi approximates the
        // multiplier from the feasible side
        upsilon[u] = hi;
        p[u] = cfg.p_ul_max;
    }
    Ok((p, upsilon))
}

/// Weighted uplink sum rate, the quantity each full inner pass ascends.
pub fn ul_block_value<T: Real>(geo: &UlGeometry<T>, p: &[T], theta: &[T], cfg: &NbcdConfig<T>) -> T {
    geo.sinr(p, cfg.noise_power)
        .iter()
        .zip(theta)
        .map(|(&xi, &th)| th * rate_bps(xi, cfg.bandwidth))
        .sum()
}

// ---------------------------------------------------------------------------
// downlink block
// ---------------------------------------------------------------------------

/// Channel-dependent downlink constants: concatenated per-UE channel vectors
/// and the serving-antenna index sets.
#[derive(Debug, Clone)]
pub struct DlGeometry<T> {
    pub num_aps: usize,
    pub num_ues: usize,
    pub n_ant: usize,
    /// `h_cat[u]` stacks `h_{m,u}` over all APs, length `num_aps * n_ant`.
    pub h_cat: Vec<Vec<Complex<T>>>,
    /// Global antenna indices where UE `u`'s beamformer may be nonzero.
    pub support: Vec<Vec<usize>>,
    /// UEs served by each AP.
    pub served: Vec<Vec<usize>>,
}

/// Precompute the downlink geometry for one realization.
pub fn downlink_geometry<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
) -> DlGeometry<T> {
    let (num_aps, num_ues, n_ant) = (channel.num_aps, channel.num_ues, channel.n_ant);
    let h_cat = (0..num_ues)
        .map(|u| {
            let mut v = Vec::with_capacity(num_aps * n_ant);
            for m in 0..num_aps {
                v.extend_from_slice(channel.h(m, u));
            }
            v
        })
        .collect();
    let support = (0..num_ues)
        .map(|u| {
            let mut idx = Vec::new();
            for m in 0..num_aps {
                if assoc.serves(m, u) {
                    idx.extend((m * n_ant)..((m + 1) * n_ant));
                }
            }
            idx
        })
        .collect();
    let served = (0..num_aps)
        .map(|m| (0..num_ues).filter(|&u| assoc.serves(m, u)).collect())
        .collect();
    DlGeometry {
        num_aps,
        num_ues,
        n_ant,
        h_cat,
        support,
        served,
    }
}

/// Frozen downlink auxiliaries for one beamformer update.
#[derive(Debug, Clone)]
pub struct DlAux<T> {
    pub omega: Vec<Complex<T>>,
    /// `kappa_u = pi_u (1 + xi_u^dl)`, frozen at the auxiliary update.
    pub kappa: Vec<T>,
    pub xi: Vec<T>,
}

/// Auxiliary update for the downlink quadratic transform:
/// `Omega_u = sqrt(pi_u (1+xi_u)) s_uu / (sum_v |s_uv|^2 + sigma^2)` where
/// `s_uv` is the amplitude UE `u` receives from UE `v`'s beam.
pub fn update_big_omega<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    beams: &BeamformerSet<T>,
    pi: &[T],
    sigma2: T,
) -> DlAux<T> {
    let amps = downlink_amplitudes(channel, assoc, beams);
    let n = channel.num_ues;
    let mut omega = vec![Complex::new(T::zero(), T::zero()); n];
    let mut kappa = vec![T::zero(); n];
    let mut xi = vec![T::zero(); n];
    for u in 0..n {
        let useful = amps[u][u].norm_sqr();
        let mut total = T::zero();
        for v in 0..n {
            total += amps[u][v].norm_sqr();
        }
        xi[u] = useful / (total - useful + sigma2);
        kappa[u] = pi[u] * (T::one() + xi[u]);
        omega[u] = amps[u][u] * (kappa[u].sqrt() / (total + sigma2));
    }
    DlAux { omega, kappa, xi }
}

/// Multiplier-independent part of the downlink stationarity systems: the
/// shared quadratic term `G = sum_w |Omega_w|^2 h_w h_w^H` and its ridge,
/// built once per auxiliary update and reused across the `chi` search.
#[derive(Debug, Clone)]
pub struct DlQuadratic<T> {
    g: Vec<Complex<T>>,
    ridge: T,
    dim: usize,
}

/// Assemble [`DlQuadratic`] for the current auxiliaries.
pub fn dl_quadratic<T: Real>(geo: &DlGeometry<T>, aux: &DlAux<T>) -> DlQuadratic<T> {
    let dim = geo.num_aps * geo.n_ant;
    let weights: Vec<T> = aux.omega.iter().map(|o| o.norm_sqr()).collect();
    let mut g = vec![Complex::new(T::zero(), T::zero()); dim * dim];
    let mut trace = T::zero();
    for w in 0..geo.num_ues {
        if weights[w] == T::zero() {
            continue;
        }
        let h = &geo.h_cat[w];
        for i in 0..dim {
            let hi = h[i] * weights[w];
            for j in 0..dim {
                g[i * dim + j] += hi * h[j].conj();
            }
            trace += weights[w] * h[i].norm_sqr();
        }
    }
    DlQuadratic {
        g,
        ridge: T::lit(1e-12) * trace,
        dim,
    }
}

/// Solve the per-UE stationarity systems for fixed multipliers `chi`:
/// `(sum_w |Omega_w|^2 B_u h_w h_w^H B_u + (ln2/w) X) v_u =
///  Omega_u sqrt(kappa_u) B_u h_u`, restricted to UE `u`'s serving antennas.
pub fn solve_beams_given_chi<T: Real>(
    geo: &DlGeometry<T>,
    aux: &DlAux<T>,
    quad: &DlQuadratic<T>,
    chi: &[T],
    cfg: &NbcdConfig<T>,
    only_ues: Option<&[usize]>,
    beams: &mut BeamformerSet<T>,
) -> Result<()> {
    let k = T::lit(std::f64::consts::LN_2) / cfg.bandwidth;
    let dim = quad.dim;
    let all: Vec<usize> = (0..geo.num_ues).collect();
    let ues = only_ues.unwrap_or(&all);
    for &u in ues {
        let sup = &geo.support[u];
        let n = sup.len();
        let scale = aux.omega[u] * aux.kappa[u].sqrt();
        if scale.norm_sqr() == T::zero() {
            for slot in beams.v[u].iter_mut() {
                *slot = Complex::new(T::zero(), T::zero());
            }
            continue;
        }
        let mut a = vec![Complex::new(T::zero(), T::zero()); n * n];
        let mut rhs = vec![Complex::new(T::zero(), T::zero()); n];
        for (i, &gi) in sup.iter().enumerate() {
            for (j, &gj) in sup.iter().enumerate() {
                a[i * n + j] = quad.g[gi * dim + gj];
            }
            let ap = gi / geo.n_ant;
            a[i * n + i] += Complex::new(k * chi[ap] + quad.ridge, T::zero());
            rhs[i] = scale * geo.h_cat[u][gi];
        }
        solve_dense(&mut a, &mut rhs, n)?;
        for slot in beams.v[u].iter_mut() {
            *slot = Complex::new(T::zero(), T::zero());
        }
        for (i, &gi) in sup.iter().enumerate() {
            beams.v[u][gi] = rhs[i];
        }
    }
    Ok(())
}

fn ap_power<T: Real>(beams: &BeamformerSet<T>, m: usize) -> T {
    beams.ap_power(m)
}

/// Beamformer update with per-AP power enforcement: Gauss-Seidel sweeps where
/// each `chi_m` is bisected (others held) until every AP meets its budget.
/// The returned beams always come from a solve at the final `chi`, so they
/// satisfy the stationarity system exactly.
pub fn update_beamformer<T: Real>(
    geo: &DlGeometry<T>,
    aux: &DlAux<T>,
    chi: &mut [T],
    cfg: &NbcdConfig<T>,
    beams: &mut BeamformerSet<T>,
) -> Result<()> {
    let quad = dl_quadratic(geo, aux);
    solve_beams_given_chi(geo, aux, &quad, chi, cfg, None, beams)?;
    let budget = cfg.p_dl_max;
    let tol = cfg.chi_tol * budget;
    for _sweep in 0..cfg.chi_sweeps {
        let mut feasible = true;
        let mut moved = T::zero();
        for m in 0..geo.num_aps {
            if geo.served[m].is_empty() {
                continue;
            }
            let old = chi[m];
            // AP power is continuous and decreasing in chi_m. Probe the old
            // multiplier first so a near-stationary chi costs few solves;
            // beams stay exact solves under unchanged chi entries, so no
            // re-solve is needed when chi_m keeps its value.
            let probe = |chi: &mut [T], x: T, beams: &mut BeamformerSet<T>| -> Result<T> {
                chi[m] = x;
                solve_beams_given_chi(geo, aux, &quad, chi, cfg, Some(&geo.served[m]), beams)?;
                Ok(ap_power(beams, m))
            };
            if old == T::zero() {
                if ap_power(beams, m) <= budget {
                    continue;
                }
            } else if probe(chi, old, beams)? <= budget {
                // complementary slackness: release the multiplier if possible
                if probe(chi, T::zero(), beams)? <= budget {
                    moved = moved.max(old);
                    continue;
                }
            }
            // bracket the crossing around the last known point
            let (mut lo, mut hi);
            let mut guard = 0;
            if ap_power(beams, m) <= budget {
                // current chi[m] feasible; contract toward zero
                hi = chi[m];
                lo = hi * T::lit(0.5);
                while probe(chi, lo, beams)? <= budget {
                    hi = lo;
                    lo = lo * T::lit(0.5);
                    guard += 1;
                    if guard > 200 {
                        return Err(Error::BisectionBracket("per-AP power multiplier".into()));
                    }
                }
            } else {
                // current chi[m] infeasible; expand upward
                lo = chi[m];
                hi = if lo > T::zero() { lo + lo } else { T::one() };
                while probe(chi, hi, beams)? > budget {
                    lo = hi;
                    hi = hi + hi;
                    guard += 1;
                    if guard > 200 {
                        return Err(Error::BisectionBracket("per-AP power multiplier".into()));
                    }
                }
            }
            for _ in 0..cfg.bisect_max {
                // interval precision tied to the power tolerance
                if hi - lo <= cfg.chi_tol.sqrt() * hi {
                    break;
                }
                let mid = (lo + hi) * T::lit(0.5);
                let pm = probe(chi, mid, beams)?;
                if pm > budget {
                    lo = mid;
                } else {
                    hi = mid;
                    if budget - pm <= tol {
                        break;
                    }
                }
            }
            if chi[m] != hi {
                probe(chi, hi, beams)?;
            }
            feasible = false;
            moved = moved.max((old - chi[m]).abs());
        }
        // re-check: earlier APs may have drifted above budget
        let worst = (0..geo.num_aps)
            .map(|m| ap_power(beams, m))
            .fold(T::zero(), T::max);
        if worst <= budget * (T::one() + cfg.bisect_tol)
            && (feasible || moved <= cfg.bisect_tol * (T::one() + chi.iter().cloned().fold(T::zero(), T::max)))
        {
            break;
        }
    }
    // last-resort guard; unreachable when the sweeps converge
    let worst = (0..geo.num_aps)
        .map(|m| ap_power(beams, m))
        .fold(T::zero(), T::max);
    if worst > budget * (T::one() + T::lit(1e-9)) {
        let s = (budget / worst).sqrt();
        for v in beams.v.iter_mut() {
            for slot in v.iter_mut() {
                *slot = *slot * s;
            }
        }
    }
    Ok(())
}

/// Downlink SINR for the current beams via the amplitude decomposition.
pub fn dl_sinr<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    beams: &BeamformerSet<T>,
    sigma2: T,
) -> Vec<T> {
    crate::phy::downlink_sinr(channel, assoc, beams, sigma2)
}

/// Weighted downlink sum rate, the quantity each full inner pass ascends.
pub fn dl_block_value<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    beams: &BeamformerSet<T>,
    pi: &[T],
    cfg: &NbcdConfig<T>,
) -> T {
    dl_sinr(channel, assoc, beams, cfg.noise_power)
        .iter()
        .zip(pi)
        .map(|(&xi, &pw)| pw * rate_bps(xi, cfg.bandwidth))
        .sum()
}

// ---------------------------------------------------------------------------
// penalties
// ---------------------------------------------------------------------------

/// Piecewise subgradient step: keep the penalty unchanged whenever the step
/// would take it negative.
pub fn clipped_step<T: Real>(penalty: T, step: T) -> T {
    let next = penalty - step;
    if next < T::zero() {
        penalty
    } else {
        next
    }
}

/// Update one penalty vector from the demands (bits) and rates (bit/s) of the
/// last iteration; returns the resulting max per-UE latency.
///
/// The relative rule contracts each weight toward the bottleneck,
/// `penalty_u *= (t_u / t_max)^rho`, so it is invariant to rate units, leaves
/// the bottleneck UE untouched, and the step vanishes as the latencies
/// equalize. `floor` caps the per-iteration decay so very slack UEs lose
/// weight geometrically instead of collapsing in one step. The vector is
/// renormalized to a unit maximum afterwards; the surrogate blocks only see
/// penalty ratios, and the rescaling keeps long runs clear of underflow.
pub fn update_penalties<T: Real>(
    penalties: &mut [T],
    rates: &[T],
    demands: &[T],
    rho: T,
    floor: T,
    mode: PenaltyStep,
) -> T {
    let t: Vec<T> = rates
        .iter()
        .zip(demands)
        .map(|(&r, &d)| if r > T::zero() { d / r } else { T::infinity() })
        .collect();
    let t_max = t.iter().cloned().fold(T::zero(), T::max);
    for u in 0..penalties.len() {
        match mode {
            PenaltyStep::Absolute => {
                if !t_max.is_finite() {
                    continue;
                }
                let g = rates[u] - demands[u] / t_max;
                penalties[u] = clipped_step(penalties[u], rho * g);
            }
            PenaltyStep::Relative => {
                let factor = if t_max.is_finite() {
                    (t[u] / t_max).powf(rho).max(floor)
                } else if t[u].is_finite() {
                    // a zero-rate UE is the bottleneck; decay everyone else
                    floor
                } else {
                    T::one()
                };
                penalties[u] = penalties[u] * factor;
            }
        }
    }
    if mode == PenaltyStep::Relative {
        let mx = penalties.iter().cloned().fold(T::zero(), T::max);
        if mx.is_finite() && mx > T::zero() {
            for w in penalties.iter_mut() {
                *w = *w / mx;
            }
        }
    }
    t_max
}

// ---------------------------------------------------------------------------
// full solver
// ---------------------------------------------------------------------------

/// Run nested block coordinate descent on one realization.
///
/// The subgradient reweighting can oscillate around the min-max point, so the
/// solver keeps the incumbent (best feasible iterate so far) per direction;
/// the uplink and downlink blocks share no variables, which makes the two
/// incumbents independently valid. The outer objective is the incumbents'
/// combined transmission latency, and the loop stops once it has gone
/// [`NbcdConfig::patience`] iterations without a `tol_outer` improvement.
pub fn solve<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    splits: &[usize],
    profile: &SplitProfile<T>,
    cfg: &NbcdConfig<T>,
    init: Option<(UplinkPowers<T>, BeamformerSet<T>)>,
) -> Result<NbcdSolution<T>> {
    let num_ues = channel.num_ues;
    if assoc.num_aps() != channel.num_aps || assoc.num_ues() != num_ues {
        return Err(Error::ShapeMismatch("association vs channel".into()));
    }
    if splits.len() != num_ues {
        return Err(Error::ShapeMismatch("splits vs UE count".into()));
    }
    let d_ul: Vec<T> = splits
        .iter()
        .map(|&l| profile.activation_bits(l))
        .collect::<Result<_>>()?;
    let d_dl: Vec<T> = splits
        .iter()
        .map(|&l| profile.submodel_bits(l))
        .collect::<Result<_>>()?;

    let ul_geo = uplink_geometry(channel, assoc)?;
    let dl_geo = downlink_geometry(channel, assoc);
    let sigma2 = cfg.noise_power;

    let (mut p, mut beams) = match init {
        Some((p0, v0)) => (p0.0, v0),
        None => (
            vec![cfg.p_ul_max; num_ues],
            BeamformerSet::mrt_equal_power(channel, assoc, cfg.p_dl_max)?,
        ),
    };
    let mut theta = vec![T::one(); num_ues];
    let mut pi = vec![T::one(); num_ues];
    let mut chi = vec![T::zero(); channel.num_aps];

    let mut trace = Vec::new();
    // Per-direction incumbents; the blocks share no variables. Seeded from
    // the (feasible) starting point: in the low-SINR regime the weighted
    // blocks favor corner allocations, and the incumbent guarantees the
    // output never falls below the equal-power start.
    let latency = |rates: &[T], demands: &[T]| -> T {
        rates
            .iter()
            .zip(demands)
            .map(|(&r, &d)| if r > T::zero() { d / r } else { T::infinity() })
            .fold(T::zero(), T::max)
    };
    let gamma0_ul: Vec<T> = ul_geo
        .sinr(&p, sigma2)
        .iter()
        .map(|&xi| rate_bps(xi, cfg.bandwidth))
        .collect();
    let gamma0_dl: Vec<T> = dl_sinr(channel, assoc, &beams, sigma2)
        .iter()
        .map(|&xi| rate_bps(xi, cfg.bandwidth))
        .collect();
    let t0_ul = latency(&gamma0_ul, &d_ul);
    let t0_dl = latency(&gamma0_dl, &d_dl);
    let mut best_ul = (p.clone(), gamma0_ul, t0_ul);
    let mut best_dl = (beams.clone(), gamma0_dl, t0_dl);
    let mut prev_obj = T::infinity();
    let mut stall = 0usize;
    let mut converged = false;
    let mut outer_done = 0;

    for outer in 0..cfg.max_outer {
        // uplink inner loop
        let mut prev_val = T::neg_infinity();
        for _ in 0..cfg.max_inner {
            let aux = update_omega(&ul_geo, &p, &theta, sigma2);
            let (p_next, _ups) = update_power(&ul_geo, &aux, cfg)?;
            p = p_next;
            let val = ul_block_value(&ul_geo, &p, &theta, cfg);
            // signed test: also stops when the value plateaus or dips
            if prev_val.is_finite() {
                let denom = prev_val.abs().max(T::lit(1e-300));
                if (val - prev_val) / denom < cfg.tol_inner {
                    break;
                }
            }
            prev_val = val;
        }

        // downlink inner loop
        let mut prev_val = T::neg_infinity();
        for _ in 0..cfg.max_inner {
            let aux = update_big_omega(channel, assoc, &beams, &pi, sigma2);
            update_beamformer(&dl_geo, &aux, &mut chi, cfg, &mut beams)?;
            let val = dl_block_value(channel, assoc, &beams, &pi, cfg);
            // the multiplier re-enforcement can make the ascent non-monotone;
            // a signed test also stops on plateaus and dips
            if prev_val.is_finite() {
                let denom = prev_val.abs().max(T::lit(1e-300));
                if (val - prev_val) / denom < cfg.tol_inner {
                    break;
                }
            }
            prev_val = val;
        }

        // rates, latencies, penalty steps
        let gamma_ul: Vec<T> = ul_geo
            .sinr(&p, sigma2)
            .iter()
            .map(|&xi| rate_bps(xi, cfg.bandwidth))
            .collect();
        let gamma_dl: Vec<T> = dl_sinr(channel, assoc, &beams, sigma2)
            .iter()
            .map(|&xi| rate_bps(xi, cfg.bandwidth))
            .collect();
        let damp = cfg.step_decay.powi(outer as i32);
        let t_max_ul = update_penalties(
            &mut theta,
            &gamma_ul,
            &d_ul,
            cfg.rho_theta * damp,
            cfg.relative_floor,
            cfg.penalty_step,
        );
        let t_max_dl = update_penalties(
            &mut pi,
            &gamma_dl,
            &d_dl,
            cfg.rho_pi * damp,
            cfg.relative_floor,
            cfg.penalty_step,
        );
        outer_done = outer + 1;

        if cfg.trace {
            let mut violation = T::zero();
            for &pu in &p {
                violation = violation.max((pu - cfg.p_ul_max) / cfg.p_ul_max);
            }
            for m in 0..channel.num_aps {
                violation = violation.max((beams.ap_power(m) - cfg.p_dl_max) / cfg.p_dl_max);
            }
            trace.push(TraceRow {
                outer,
                t_max_ul,
                t_max_dl,
                violation: violation.max(T::zero()),
            });
        }

        if t_max_ul < best_ul.2 {
            best_ul = (p.clone(), gamma_ul, t_max_ul);
        }
        if t_max_dl < best_dl.2 {
            best_dl = (beams.clone(), gamma_dl, t_max_dl);
        }
        let obj = best_ul.2 + best_dl.2;

        if prev_obj.is_finite() && obj.is_finite() {
            let denom = prev_obj.abs().max(T::lit(1e-300));
            if (prev_obj - obj) / denom < cfg.tol_outer {
                stall += 1;
                if stall >= cfg.patience {
                    converged = true;
                    break;
                }
            } else {
                stall = 0;
            }
        }
        prev_obj = obj;
    }

    let (p_best, gamma_ul, t_max_ul) = best_ul;
    let (beams_best, gamma_dl, t_max_dl) = best_dl;
    Ok(NbcdSolution {
        powers: UplinkPowers(p_best),
        beams: beams_best,
        uplink_rates: gamma_ul,
        downlink_rates: gamma_dl,
        t_max_ul,
        t_max_dl,
        outer_iterations: outer_done,
        converged,
        trace,
    })
}
