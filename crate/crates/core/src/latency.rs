//! Per-iteration training latency: UE-side forward compute, uplink activation
//! transfer, DPU-side forward compute, a constant backpropagation term, and
//! the downlink sub-model transfer, with synchronization maxima where the
//! protocol waits for the slowest UE.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::split_profile::SplitProfile;
use serde::{Deserialize, Serialize};

/// Compute-side constants of the latency model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComputeConfig<T> {
    /// UE computing frequency, Hz.
    pub f_ue: T,
    /// DPU computing frequency, Hz.
    pub f_dpu: T,
    /// Cycles per operation.
    pub cycles_per_op: T,
    /// Constant DPU backpropagation time, seconds.
    pub t_back: T,
}

impl<T: Real> Default for ComputeConfig<T> {
    fn default() -> Self {
        ComputeConfig {
            f_ue: T::lit(1e9),
            f_dpu: T::lit(5e9),
            cycles_per_op: T::one(),
            t_back: T::lit(0.5),
        }
    }
}

impl<T: Real> ComputeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_ue > T::zero() && self.f_dpu > T::zero() && self.cycles_per_op > T::zero()) {
            return Err(Error::InvalidArgument(
                "frequencies and cycles_per_op must be positive".into(),
            ));
        }
        if self.t_back < T::zero() {
            return Err(Error::InvalidArgument("t_back must be >= 0".into()));
        }
        Ok(())
    }
}

/// All latency components for one channel realization, seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyBreakdown<T> {
    /// Slowest UE forward-compute time (shared by synchronization).
    pub t_ue: T,
    /// Per-UE uplink transfer times.
    pub t_ul: Vec<T>,
    /// max over t_ul; every UE waits for it.
    pub t_ul_max: T,
    /// Slowest per-UE DPU forward-compute time.
    pub t_dpu_max: T,
    /// Constant backpropagation time.
    pub t_back: T,
    /// Per-UE downlink transfer times.
    pub t_dl: Vec<T>,
    /// Per-UE totals: t_ue + t_ul_max + t_dpu_max + t_back + t_dl_u.
    pub t_total: Vec<T>,
}

impl<T: Real> LatencyBreakdown<T> {
    pub fn max_total(&self) -> T {
        self.t_total
            .iter()
            .cloned()
            .fold(T::neg_infinity(), T::max)
    }
}

fn check_splits<T: Real>(profile: &SplitProfile<T>, splits: &[usize]) -> Result<()> {
    for &l in splits {
        if l == 0 || l > profile.num_points() {
            return Err(Error::SplitOutOfRange {
                split: l,
                num_points: profile.num_points(),
            });
        }
    }
    Ok(())
}

/// Forward-compute time of the slowest UE: `max_u x(l_u) c / f_ue`.
pub fn ue_compute_latency<T: Real>(
    profile: &SplitProfile<T>,
    splits: &[usize],
    cfg: &ComputeConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    check_splits(profile, splits)?;
    let mut worst = T::zero();
    for &l in splits {
        worst = worst.max(profile.mac_ops(l)? * cfg.cycles_per_op / cfg.f_ue);
    }
    Ok(worst)
}

/// Per-UE uplink activation transfer times `D(l_u) / rate_u`.
pub fn uplink_latency<T: Real>(
    profile: &SplitProfile<T>,
    splits: &[usize],
    uplink_rates: &[T],
) -> Result<Vec<T>> {
    check_splits(profile, splits)?;
    if splits.len() != uplink_rates.len() {
        return Err(Error::ShapeMismatch("splits vs uplink rates".into()));
    }
    splits
        .iter()
        .zip(uplink_rates)
        .enumerate()
        .map(|(u, (&l, &rate))| {
            if !(rate > T::zero()) {
                return Err(Error::ZeroRate(u));
            }
            Ok(profile.activation_bits(l)? / rate)
        })
        .collect()
}

/// Slowest per-UE DPU forward compute: `max_u (x_L - x(l_u)) c / f_dpu`.
pub fn dpu_latency_max<T: Real>(
    profile: &SplitProfile<T>,
    splits: &[usize],
    cfg: &ComputeConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    check_splits(profile, splits)?;
    let mut worst = T::zero();
    for &l in splits {
        worst = worst.max(profile.dpu_ops(l)? * cfg.cycles_per_op / cfg.f_dpu);
    }
    Ok(worst)
}

/// Per-UE downlink sub-model transfer times `D_sub(l_u) / rate_u`.
pub fn downlink_latency<T: Real>(
    profile: &SplitProfile<T>,
    splits: &[usize],
    downlink_rates: &[T],
) -> Result<Vec<T>> {
    check_splits(profile, splits)?;
    if splits.len() != downlink_rates.len() {
        return Err(Error::ShapeMismatch("splits vs downlink rates".into()));
    }
    splits
        .iter()
        .zip(downlink_rates)
        .enumerate()
        .map(|(u, (&l, &rate))| {
            if !(rate > T::zero()) {
                return Err(Error::ZeroRate(u));
            }
            Ok(profile.submodel_bits(l)? / rate)
        })
        .collect()
}

/// Assemble the full per-iteration latency bound per UE.
pub fn total_latency<T: Real>(
    profile: &SplitProfile<T>,
    splits: &[usize],
    uplink_rates: &[T],
    downlink_rates: &[T],
    cfg: &ComputeConfig<T>,
) -> Result<LatencyBreakdown<T>> {
    let t_ue = ue_compute_latency(profile, splits, cfg)?;
    let t_ul = uplink_latency(profile, splits, uplink_rates)?;
    let t_ul_max = t_ul.iter().cloned().fold(T::zero(), T::max);
    let t_dpu_max = dpu_latency_max(profile, splits, cfg)?;
    let t_dl = downlink_latency(profile, splits, downlink_rates)?;
    let t_total = t_dl
        .iter()
        .map(|&dl| t_ue + t_ul_max + t_dpu_max + cfg.t_back + dl)
        .collect();
    Ok(LatencyBreakdown {
        t_ue,
        t_ul,
        t_ul_max,
        t_dpu_max,
        t_back: cfg.t_back,
        t_dl,
        t_total,
    })
}
