//! Network geometry and stochastic channel generation.
//!
//! APs and UEs live on a disc; when wrap-around is enabled, distances are
//! measured on a torus built from the bounding square of side `2r`, which
//! removes edge effects. Channels combine a log-distance path loss,
//! log-normal shadowing, and multipath Rayleigh fading.

use crate::error::{Error, Result};
use crate::num::{db_to_linear, Real};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::TAU;
use std::fmt::Write as _;

/// AP placement rule. The UEs are always uniform on the disc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApPlacement {
    /// Uniform random on the disc, like the UEs.
    #[default]
    UniformDisc,
    /// Regular grid clipped to the disc, for reproducible geometry studies.
    Grid,
}

/// Positions of all APs and UEs plus the wrap-around flag.
#[derive(Debug, Clone)]
pub struct NetworkLayout<T> {
    pub radius: T,
    pub ap_positions: Vec<[T; 2]>,
    pub ue_positions: Vec<[T; 2]>,
    pub wrap_around: bool,
}

impl<T: Real> NetworkLayout<T> {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// Distance between AP `m` and UE `u`, using the torus metric when
    /// wrap-around is enabled.
    pub fn distance(&self, m: usize, u: usize) -> T {
        let a = self.ap_positions[m];
        let b = self.ue_positions[u];
        if self.wrap_around {
            wrap_distance(a, b, self.radius)
        } else {
            euclidean(a, b)
        }
    }
}

fn euclidean<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Torus metric on the bounding square of side `2r`.
pub fn wrap_distance<T: Real>(a: [T; 2], b: [T; 2], radius: T) -> T {
    let side = radius + radius;
    let mut acc = T::zero();
    for k in 0..2 {
        let mut d = (a[k] - b[k]).abs();
        if d > side - d {
            d = side - d;
        }
        acc = acc + d * d;
    }
    acc.sqrt()
}

fn uniform_disc<T: Real, R: Rng + ?Sized>(rng: &mut R, radius: T) -> [T; 2] {
    let r = radius * T::uniform01(rng).sqrt();
    let angle = T::lit(TAU) * T::uniform01(rng);
    [r * angle.cos(), r * angle.sin()]
}

/// Place `m` APs and `u` UEs uniformly on a disc of the given radius.
/// Deterministic for a fixed seed; wrap-around enabled.
pub fn place_network<T: Real>(seed: u64, m: usize, u: usize, radius: T) -> Result<NetworkLayout<T>> {
    place_network_with(seed, m, u, radius, ApPlacement::UniformDisc)
}

/// As [`place_network`] with an explicit AP placement rule.
pub fn place_network_with<T: Real>(
    seed: u64,
    m: usize,
    u: usize,
    radius: T,
    placement: ApPlacement,
) -> Result<NetworkLayout<T>> {
    if m == 0 || u == 0 {
        return Err(Error::InvalidArgument(
            "need at least one AP and one UE".into(),
        ));
    }
    if radius <= T::zero() {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ap_positions = match placement {
        ApPlacement::UniformDisc => (0..m).map(|_| uniform_disc(&mut rng, radius)).collect(),
        ApPlacement::Grid => grid_on_disc(m, radius),
    };
    let ue_positions = (0..u).map(|_| uniform_disc(&mut rng, radius)).collect();
    Ok(NetworkLayout {
        radius,
        ap_positions,
        ue_positions,
        wrap_around: true,
    })
}

fn grid_on_disc<T: Real>(m: usize, radius: T) -> Vec<[T; 2]> {
    // Concentric rings: one AP at the center, the rest spread over rings
    // whose radii keep every AP strictly inside the disc.
    let mut out = Vec::with_capacity(m);
    out.push([T::zero(), T::zero()]);
    let mut remaining = m - 1;
    let mut ring = 1usize;
    let rings = ((m as f64 - 1.0) / 6.0).sqrt().ceil().max(1.0) as usize;
    while remaining > 0 {
        let count = remaining.min(6 * ring);
        let r = radius * T::lit(ring as f64 / (rings as f64 + 0.5));
        for k in 0..count {
            let angle = T::lit(TAU * k as f64 / count as f64);
            out.push([r * angle.cos(), r * angle.sin()]);
        }
        remaining -= count;
        ring += 1;
    }
    out
}

/// Path loss in dB at the given distance (clamped below at 1 m).
pub fn path_loss_db<T: Real>(distance: T) -> Result<T> {
    let d = distance.max(T::one());
    if !(d > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "non-positive distance {distance}"
        )));
    }
    Ok(T::lit(-112.4) - T::lit(38.0) * d.log10())
}

/// Linear large-scale power gain for a distance and a shadowing sample in dB.
pub fn large_scale_gain<T: Real>(distance: T, shadow_db: T) -> Result<T> {
    let pl = path_loss_db(distance)?;
    Ok(db_to_linear(pl + shadow_db))
}

/// Fading and noise parameters.
#[derive(Debug, Clone)]
pub struct FadingParams<T> {
    /// Carrier frequency shift `f` in the multipath phase term, Hz.
    pub carrier_shift: T,
    /// Number of multipath components.
    pub num_paths: usize,
    /// Shadowing standard deviation, dB.
    pub shadow_std_db: T,
    /// Receiver noise power, watts.
    pub noise_power: T,
    /// Antennas per AP.
    pub n_ant: usize,
}

impl<T: Real> Default for FadingParams<T> {
    fn default() -> Self {
        FadingParams {
            carrier_shift: T::zero(),
            num_paths: 1,
            shadow_std_db: T::lit(4.0),
            // thermal noise -174 dBm/Hz + 10*log10(15 kHz) + 9 dB noise figure
            noise_power: db_to_linear(T::lit(-121.0 - 30.0)),
            n_ant: 4,
        }
    }
}

impl<T: Real> FadingParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::InvalidArgument("num_paths must be >= 1".into()));
        }
        if self.shadow_std_db < T::zero() {
            return Err(Error::InvalidArgument("shadow_std_db must be >= 0".into()));
        }
        if !(self.noise_power > T::zero()) {
            return Err(Error::InvalidArgument("noise_power must be > 0".into()));
        }
        if self.n_ant == 0 {
            return Err(Error::InvalidArgument("n_ant must be >= 1".into()));
        }
        Ok(())
    }
}

/// One stochastic channel draw: complex vectors `h[(m,u)]` of length `n_ant`
/// plus the linear large-scale gains.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    pub num_aps: usize,
    pub num_ues: usize,
    pub n_ant: usize,
    h: Vec<Complex<T>>,
    large_scale: Vec<T>,
}

impl<T: Real> ChannelRealization<T> {
    /// Assemble a realization from flat row-major data. `h` holds `n_ant`
    /// entries per (m, u) pair; `large_scale` one entry per pair.
    pub fn from_raw(
        num_aps: usize,
        num_ues: usize,
        n_ant: usize,
        h: Vec<Complex<T>>,
        large_scale: Vec<T>,
    ) -> Self {
        assert_eq!(h.len(), num_aps * num_ues * n_ant);
        assert_eq!(large_scale.len(), num_aps * num_ues);
        ChannelRealization {
            num_aps,
            num_ues,
            n_ant,
            h,
            large_scale,
        }
    }

    /// Channel vector from AP `m` to UE `u`.
    #[inline]
    pub fn h(&self, m: usize, u: usize) -> &[Complex<T>] {
        let base = (m * self.num_ues + u) * self.n_ant;
        &self.h[base..base + self.n_ant]
    }

    /// Linear large-scale gain `L_{m,u}`.
    #[inline]
    pub fn large_scale(&self, m: usize, u: usize) -> T {
        self.large_scale[m * self.num_ues + u]
    }

    /// CSV dump: one row per (m, u) with distance-free channel data.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("ap,ue,large_scale_db");
        for k in 0..self.n_ant {
            let _ = write!(out, ",re{k},im{k}");
        }
        out.push('\n');
        for m in 0..self.num_aps {
            for u in 0..self.num_ues {
                let ls_db = T::lit(10.0) * self.large_scale(m, u).log10();
                let _ = write!(out, "{m},{u},{ls_db}");
                for z in self.h(m, u) {
                    let _ = write!(out, ",{},{}", z.re, z.im);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Draw one channel realization. For each (m, u) the channel is a sum over
/// paths of `sqrt(L) * exp(-j 2 pi f tau_l) * g_l` with `g_l ~ CN(0, I)`.
/// Deterministic for a fixed seed.
pub fn draw_channel<T: Real>(
    layout: &NetworkLayout<T>,
    params: &FadingParams<T>,
    seed: u64,
) -> Result<ChannelRealization<T>> {
    params.validate()?;
    let (m_count, u_count, n_ant) = (layout.num_aps(), layout.num_ues(), params.n_ant);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut h = Vec::with_capacity(m_count * u_count * n_ant);
    let mut large_scale = Vec::with_capacity(m_count * u_count);
    let half = T::lit(0.5);
    for m in 0..m_count {
        for u in 0..u_count {
            let d = layout.distance(m, u);
            let shadow = T::std_normal(&mut rng) * params.shadow_std_db;
            let gain = large_scale_gain(d, shadow)?;
            large_scale.push(gain);
            let amp = gain.sqrt();
            let mut acc = vec![Complex::new(T::zero(), T::zero()); n_ant];
            for _ in 0..params.num_paths {
                // path delays only matter through the phase term; uniform on
                // [0, 1 us) keeps the term well defined for nonzero f
                let tau = T::uniform01(&mut rng) * T::lit(1e-6);
                let phase = -T::lit(TAU) * params.carrier_shift * tau;
                let rot = Complex::new(phase.cos(), phase.sin());
                for slot in acc.iter_mut() {
                    let g = Complex::new(
                        T::std_normal(&mut rng) * half.sqrt(),
                        T::std_normal(&mut rng) * half.sqrt(),
                    );
                    *slot += rot * g * amp;
                }
            }
            h.extend(acc);
        }
    }
    Ok(ChannelRealization {
        num_aps: m_count,
        num_ues: u_count,
        n_ant,
        h,
        large_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sq;

    #[test]
    fn placement_in_disc_and_deterministic() {
        let a = place_network::<f64>(7, 10, 4, 200.0).unwrap();
        let b = place_network::<f64>(7, 10, 4, 200.0).unwrap();
        assert_eq!(a.ap_positions.len(), 10);
        assert_eq!(a.ue_positions.len(), 4);
        for p in a.ap_positions.iter().chain(a.ue_positions.iter()) {
            assert!((p[0] * p[0] + p[1] * p[1]).sqrt() <= 200.0 + 1e-9);
        }
        for (x, y) in a.ap_positions.iter().zip(b.ap_positions.iter()) {
            assert_eq!(x, y);
        }
        for (x, y) in a.ue_positions.iter().zip(b.ue_positions.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn degenerate_single_pair() {
        let l = place_network::<f64>(7, 1, 1, 200.0).unwrap();
        assert_eq!(l.num_aps(), 1);
        assert_eq!(l.num_ues(), 1);
    }

    #[test]
    fn rejects_empty_network() {
        assert!(place_network::<f64>(7, 0, 4, 200.0).is_err());
        assert!(place_network::<f64>(7, 10, 0, 200.0).is_err());
    }

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0f64).unwrap() + 112.4).abs() < 1e-12);
        assert!((path_loss_db(10.0f64).unwrap() + 150.4).abs() < 1e-12);
        assert!((path_loss_db(100.0f64).unwrap() + 188.4).abs() < 1e-12);
        // clamped below 1 m
        assert_eq!(
            path_loss_db(0.2f64).unwrap(),
            path_loss_db(1.0f64).unwrap()
        );
    }

    #[test]
    fn large_scale_reference_points() {
        let g = large_scale_gain(1.0f64, 0.0).unwrap();
        assert!((g - 10f64.powf(-11.24)).abs() / g < 1e-12);
        let g = large_scale_gain(1.0f64, 10.0).unwrap();
        assert!((g - 10f64.powf(-10.24)).abs() / g < 1e-12);
        let g = large_scale_gain(10.0f64, 0.0).unwrap();
        assert!((g - 10f64.powf(-15.04)).abs() / g < 1e-12);
    }

    #[test]
    fn wrap_distance_symmetric_and_bounded() {
        let r = 200.0f64;
        let a = [150.0, -180.0];
        let b = [-170.0, 120.0];
        let w1 = wrap_distance(a, b, r);
        let w2 = wrap_distance(b, a, r);
        assert_eq!(w1, w2);
        assert!(w1 <= euclidean(a, b) + 1e-12);
    }

    #[test]
    fn channel_deterministic_per_seed() {
        let layout = place_network::<f64>(3, 4, 2, 200.0).unwrap();
        let params = FadingParams::default();
        let a = draw_channel(&layout, &params, 99).unwrap();
        let b = draw_channel(&layout, &params, 99).unwrap();
        assert_eq!(a.h(2, 1), b.h(2, 1));
        assert_eq!(a.large_scale(0, 0), b.large_scale(0, 0));
    }

    #[test]
    fn channel_second_moment_matches_large_scale() {
        // Monte-Carlo oracle: E[||h||^2] = L * n_ant for single-path fading.
        let layout = NetworkLayout {
            radius: 200.0f64,
            ap_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[30.0, 40.0]],
            wrap_around: true,
        };
        let params = FadingParams {
            shadow_std_db: 0.0,
            ..FadingParams::default()
        };
        let n = 100_000;
        let mut acc = 0.0;
        let mut ls = 0.0;
        for seed in 0..n {
            let ch = draw_channel(&layout, &params, seed as u64).unwrap();
            acc += norm_sq(ch.h(0, 0)) / params.n_ant as f64;
            ls = ch.large_scale(0, 0);
        }
        let mean = acc / n as f64;
        assert!(
            (mean - ls).abs() / ls < 0.02,
            "mean {mean}, large-scale {ls}"
        );
    }

    #[test]
    fn shadowing_variance_converges() {
        // dB-domain shadowing variance should approach 16 over many draws.
        let layout = NetworkLayout {
            radius: 200.0f64,
            ap_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[30.0, 40.0]],
            wrap_around: true,
        };
        let params = FadingParams::default();
        let d: f64 = layout.distance(0, 0);
        let pl = path_loss_db(d).unwrap();
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let ch = draw_channel(&layout, &params, seed as u64).unwrap();
            let shadow_db = 10.0 * ch.large_scale(0, 0).log10() - pl;
            sum += shadow_db;
            sum_sq += shadow_db * shadow_db;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - 16.0).abs() / 16.0 < 0.05, "var {var}");
    }

    #[test]
    fn csv_dump_has_row_per_pair() {
        let layout = place_network::<f64>(3, 2, 3, 200.0).unwrap();
        let ch = draw_channel(&layout, &FadingParams::default(), 1).unwrap();
        let csv = ch.to_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
        assert!(csv.starts_with("ap,ue,large_scale_db,re0,im0"));
    }
}
