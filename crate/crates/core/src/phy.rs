//! SINR and achievable-rate computation.
//!
//! Uplink uses conjugate combining at the APs with CPU-side superposition of
//! the per-AP estimates; downlink uses clustered beamforming where each UE is
//! served only by the APs in its cluster. Expected rates are estimated by
//! Monte-Carlo averaging of the useful and interference powers separately
//! (ratio of means).

use crate::channel::{draw_channel, ChannelRealization, FadingParams, NetworkLayout};
use crate::error::{Error, Result};
use crate::linalg::{cdot, norm_sq};
use crate::num::Real;
use num_complex::Complex;

/// Binary AP-UE association matrix (`M x U`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssociationMatrix {
    num_aps: usize,
    num_ues: usize,
    b: Vec<bool>,
}

impl AssociationMatrix {
    pub fn new(num_aps: usize, num_ues: usize, entries: Vec<bool>) -> Result<Self> {
        if entries.len() != num_aps * num_ues {
            return Err(Error::ShapeMismatch(format!(
                "association matrix needs {} entries, got {}",
                num_aps * num_ues,
                entries.len()
            )));
        }
        let mat = AssociationMatrix {
            num_aps,
            num_ues,
            b: entries,
        };
        for u in 0..num_ues {
            if mat.cluster_size_ue(u) == 0 {
                return Err(Error::EmptyCluster(u));
            }
        }
        Ok(mat)
    }

    /// Every AP serves every UE.
    pub fn all_ones(num_aps: usize, num_ues: usize) -> Self {
        AssociationMatrix {
            num_aps,
            num_ues,
            b: vec![true; num_aps * num_ues],
        }
    }

    #[inline]
    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    #[inline]
    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    #[inline]
    pub fn serves(&self, m: usize, u: usize) -> bool {
        self.b[m * self.num_ues + u]
    }

    /// AP-cluster size `C_u`.
    pub fn cluster_size_ue(&self, u: usize) -> usize {
        (0..self.num_aps).filter(|&m| self.serves(m, u)).count()
    }

    /// UE-cluster size `C_m`.
    pub fn cluster_size_ap(&self, m: usize) -> usize {
        (0..self.num_ues).filter(|&u| self.serves(m, u)).count()
    }

    /// APs serving UE `u`.
    pub fn serving_aps(&self, u: usize) -> Vec<usize> {
        (0..self.num_aps).filter(|&m| self.serves(m, u)).collect()
    }

    /// Flat row-major entries.
    pub fn entries(&self) -> &[bool] {
        &self.b
    }
}

/// Per-UE uplink transmit powers, watts.
#[derive(Debug, Clone)]
pub struct UplinkPowers<T>(pub Vec<T>);

impl<T: Real> UplinkPowers<T> {
    pub fn full(num_ues: usize, p_max: T) -> Self {
        UplinkPowers(vec![p_max; num_ues])
    }

    /// Check constraint C1: `0 <= p_u <= p_max` for all UEs.
    pub fn satisfies_c1(&self, p_max: T, rel_tol: T) -> bool {
        self.0
            .iter()
            .all(|&p| p >= T::zero() && p <= p_max * (T::one() + rel_tol))
    }
}

/// Per-UE downlink beamformers as concatenations of per-AP blocks of length
/// `n_ant`; blocks of non-serving APs are zero.
#[derive(Debug, Clone)]
pub struct BeamformerSet<T> {
    pub num_aps: usize,
    pub n_ant: usize,
    /// `v[u]` has length `num_aps * n_ant`.
    pub v: Vec<Vec<Complex<T>>>,
}

impl<T: Real> BeamformerSet<T> {
    pub fn zeros(num_aps: usize, num_ues: usize, n_ant: usize) -> Self {
        BeamformerSet {
            num_aps,
            n_ant,
            v: vec![vec![Complex::new(T::zero(), T::zero()); num_aps * n_ant]; num_ues],
        }
    }

    #[inline]
    pub fn block(&self, u: usize, m: usize) -> &[Complex<T>] {
        &self.v[u][m * self.n_ant..(m + 1) * self.n_ant]
    }

    #[inline]
    pub fn block_mut(&mut self, u: usize, m: usize) -> &mut [Complex<T>] {
        &mut self.v[u][m * self.n_ant..(m + 1) * self.n_ant]
    }

    /// Transmit power of AP `m` summed over UEs.
    pub fn ap_power(&self, m: usize) -> T {
        (0..self.v.len()).map(|u| norm_sq(self.block(u, m))).sum()
    }

    /// Check constraint C2: per-AP power at most `p_max`.
    pub fn satisfies_c2(&self, p_max: T, rel_tol: T) -> bool {
        (0..self.num_aps).all(|m| self.ap_power(m) <= p_max * (T::one() + rel_tol))
    }

    /// MRT directions with each AP's power budget split equally across the
    /// UEs it serves.
    pub fn mrt_equal_power(
        channel: &ChannelRealization<T>,
        assoc: &AssociationMatrix,
        p_dl: T,
    ) -> Result<Self> {
        let mut set = Self::zeros(channel.num_aps, channel.num_ues, channel.n_ant);
        for m in 0..channel.num_aps {
            let served = assoc.cluster_size_ap(m);
            if served == 0 {
                continue;
            }
            let per_ue = p_dl / T::lit(served as f64);
            for u in 0..channel.num_ues {
                if !assoc.serves(m, u) {
                    continue;
                }
                let h = channel.h(m, u);
                let n = norm_sq(h).sqrt();
                if n == T::zero() {
                    return Err(Error::ZeroChannel { ap: m, ue: u });
                }
                let scale = per_ue.sqrt() / n;
                for (slot, hk) in set.block_mut(u, m).iter_mut().zip(h.iter()) {
                    *slot = *hk * scale;
                }
            }
        }
        Ok(set)
    }
}

/// SINRs and rates for one channel realization.
#[derive(Debug, Clone)]
pub struct LinkRates<T> {
    pub uplink_sinr: Vec<T>,
    pub uplink_rate: Vec<T>,
    pub downlink_sinr: Vec<T>,
    pub downlink_rate: Vec<T>,
    pub bandwidth: T,
}

/// Unit-norm conjugate combiners `u_{m,u} = h_{m,u} / ||h_{m,u}||`, stored
/// per (m, u) like the channel.
#[derive(Debug, Clone)]
pub struct CombinerSet<T> {
    pub num_aps: usize,
    pub num_ues: usize,
    pub n_ant: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CombinerSet<T> {
    #[inline]
    pub fn u(&self, m: usize, u: usize) -> &[Complex<T>] {
        let base = (m * self.num_ues + u) * self.n_ant;
        &self.data[base..base + self.n_ant]
    }
}

/// Build the conjugate combiner set from a channel realization.
pub fn conjugate_combiner<T: Real>(channel: &ChannelRealization<T>) -> Result<CombinerSet<T>> {
    let mut data = Vec::with_capacity(channel.num_aps * channel.num_ues * channel.n_ant);
    for m in 0..channel.num_aps {
        for u in 0..channel.num_ues {
            let h = channel.h(m, u);
            let n = norm_sq(h).sqrt();
            if !(n > T::zero()) {
                return Err(Error::ZeroChannel { ap: m, ue: u });
            }
            data.extend(h.iter().map(|z| *z / n));
        }
    }
    Ok(CombinerSet {
        num_aps: channel.num_aps,
        num_ues: channel.num_ues,
        n_ant: channel.n_ant,
        data,
    })
}

/// Combined uplink gains `G[u][v] = sum_m b_{m,u} <h_{m,v}, u_{m,u}>`: how
/// UE `v`'s signal appears in UE `u`'s CPU-combined output.
pub fn uplink_gains<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    combiners: &CombinerSet<T>,
) -> Vec<Vec<Complex<T>>> {
    let (num_ues, num_aps) = (channel.num_ues, channel.num_aps);
    let mut g = vec![vec![Complex::new(T::zero(), T::zero()); num_ues]; num_ues];
    for u in 0..num_ues {
        for v in 0..num_ues {
            let mut acc = Complex::new(T::zero(), T::zero());
            for m in 0..num_aps {
                if assoc.serves(m, u) {
                    acc += cdot(channel.h(m, v), combiners.u(m, u));
                }
            }
            g[u][v] = acc;
        }
    }
    g
}

/// Uplink SINR per UE with conjugate combining; the noise term is `C_u
/// sigma^2` because each serving AP contributes an independent noise sample.
pub fn uplink_sinr<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    powers: &UplinkPowers<T>,
    sigma2: T,
) -> Result<Vec<T>> {
    let combiners = conjugate_combiner(channel)?;
    let gains = uplink_gains(channel, assoc, &combiners);
    Ok(uplink_sinr_from_gains(&gains, assoc, powers, sigma2))
}

/// Uplink SINR given precomputed combined gains.
pub fn uplink_sinr_from_gains<T: Real>(
    gains: &[Vec<Complex<T>>],
    assoc: &AssociationMatrix,
    powers: &UplinkPowers<T>,
    sigma2: T,
) -> Vec<T> {
    let num_ues = gains.len();
    (0..num_ues)
        .map(|u| {
            let useful = powers.0[u] * gains[u][u].norm_sqr();
            let mut interference = T::zero();
            for v in 0..num_ues {
                if v != u {
                    interference += powers.0[v] * gains[u][v].norm_sqr();
                }
            }
            let noise = T::lit(assoc.cluster_size_ue(u) as f64) * sigma2;
            useful / (interference + noise)
        })
        .collect()
}

/// Received downlink amplitudes `s[u][v] = sum_m b_{m,v} h_{m,u}^H v_{m,v}`:
/// the signal UE `u` receives from UE `v`'s beam.
pub fn downlink_amplitudes<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    beams: &BeamformerSet<T>,
) -> Vec<Vec<Complex<T>>> {
    let (num_ues, num_aps) = (channel.num_ues, channel.num_aps);
    let mut s = vec![vec![Complex::new(T::zero(), T::zero()); num_ues]; num_ues];
    for u in 0..num_ues {
        for v in 0..num_ues {
            let mut acc = Complex::new(T::zero(), T::zero());
            for m in 0..num_aps {
                if assoc.serves(m, v) {
                    acc += cdot(beams.block(v, m), channel.h(m, u));
                }
            }
            s[u][v] = acc;
        }
    }
    s
}

/// Downlink SINR per UE for clustered beamforming.
pub fn downlink_sinr<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    beams: &BeamformerSet<T>,
    sigma2: T,
) -> Vec<T> {
    let amps = downlink_amplitudes(channel, assoc, beams);
    let num_ues = channel.num_ues;
    (0..num_ues)
        .map(|u| {
            let useful = amps[u][u].norm_sqr();
            let mut interference = T::zero();
            for v in 0..num_ues {
                if v != u {
                    interference += amps[u][v].norm_sqr();
                }
            }
            useful / (interference + sigma2)
        })
        .collect()
}

/// Shannon rate `w * log2(1 + sinr)`, evaluated through `ln_1p` so tiny
/// SINRs yield proportionally tiny rates instead of underflowing to zero.
pub fn rate_bps<T: Real>(sinr: T, bandwidth: T) -> T {
    bandwidth * sinr.ln_1p() / T::lit(std::f64::consts::LN_2)
}

/// Shannon rates `w * log2(1 + sinr)`.
pub fn rates<T: Real>(sinr: &[T], bandwidth: T) -> Vec<T> {
    sinr.iter().map(|&x| rate_bps(x, bandwidth)).collect()
}

/// Assemble [`LinkRates`] for one realization.
pub fn link_rates<T: Real>(
    channel: &ChannelRealization<T>,
    assoc: &AssociationMatrix,
    powers: &UplinkPowers<T>,
    beams: &BeamformerSet<T>,
    sigma2: T,
    bandwidth: T,
) -> Result<LinkRates<T>> {
    let ul = uplink_sinr(channel, assoc, powers, sigma2)?;
    let dl = downlink_sinr(channel, assoc, beams, sigma2);
    Ok(LinkRates {
        uplink_rate: rates(&ul, bandwidth),
        downlink_rate: rates(&dl, bandwidth),
        uplink_sinr: ul,
        downlink_sinr: dl,
        bandwidth,
    })
}

/// Expected uplink and downlink rates for fixed powers and beamformers,
/// estimated over `n_draws` channel draws by averaging the useful power and
/// the interference-plus-noise power separately before forming the SINR.
#[allow(clippy::too_many_arguments)]
pub fn expected_rates<T: Real>(
    layout: &NetworkLayout<T>,
    params: &FadingParams<T>,
    assoc: &AssociationMatrix,
    powers: &UplinkPowers<T>,
    beams: &BeamformerSet<T>,
    bandwidth: T,
    n_draws: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be >= 1".into()));
    }
    let num_ues = layout.num_ues();
    let mut ul_useful = vec![T::zero(); num_ues];
    let mut ul_denom = vec![T::zero(); num_ues];
    let mut dl_useful = vec![T::zero(); num_ues];
    let mut dl_denom = vec![T::zero(); num_ues];
    for draw in 0..n_draws {
        let channel = draw_channel(layout, params, seed.wrapping_add(draw as u64))?;
        let combiners = conjugate_combiner(&channel)?;
        let gains = uplink_gains(&channel, assoc, &combiners);
        let amps = downlink_amplitudes(&channel, assoc, beams);
        for u in 0..num_ues {
            ul_useful[u] += powers.0[u] * gains[u][u].norm_sqr();
            let mut interference = T::zero();
            for v in 0..num_ues {
                if v != u {
                    interference += powers.0[v] * gains[u][v].norm_sqr();
                }
            }
            ul_denom[u] +=
                interference + T::lit(assoc.cluster_size_ue(u) as f64) * params.noise_power;
            dl_useful[u] += amps[u][u].norm_sqr();
            let mut dl_int = T::zero();
            for v in 0..num_ues {
                if v != u {
                    dl_int += amps[u][v].norm_sqr();
                }
            }
            dl_denom[u] += dl_int + params.noise_power;
        }
    }
    let ul = (0..num_ues)
        .map(|u| rate_bps(ul_useful[u] / ul_denom[u], bandwidth))
        .collect();
    let dl = (0..num_ues)
        .map(|u| rate_bps(dl_useful[u] / dl_denom[u], bandwidth))
        .collect();
    Ok((ul, dl))
}
