//! Experiment configuration: one TOML file with flat sections, every field
//! defaulted to the reference simulation parameters, and command-line
//! overrides applied on top. The effective configuration is echoed into the
//! output directory so every result file carries its provenance.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cfsl_core::channel::{place_network, FadingParams, NetworkLayout};
use cfsl_core::latency::ComputeConfig;
use cfsl_core::mais::PpoConfig;
use cfsl_core::nbcd::NbcdConfig;
use cfsl_core::objective::Scenario;
use cfsl_core::split_profile::vgg16_profile;
use serde::{Deserialize, Serialize};

use crate::seeds::substream;

/// Network geometry and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Number of APs.
    pub m: usize,
    /// Number of UEs.
    pub u: usize,
    /// Deployment radius, meters.
    pub radius: f64,
    /// Antennas per AP.
    pub n_ant: usize,
    /// Master seed; all randomness derives from it via named substreams.
    pub seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            m: 10,
            u: 4,
            radius: 200.0,
            n_ant: 4,
            seed: 1,
        }
    }
}

/// Radio parameters shared by the channel model and the solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Uplink power budget per UE, watts.
    pub p_ul: f64,
    /// Downlink power budget per AP, watts.
    pub p_dl: f64,
    /// Noise power, dBm.
    pub noise_dbm: f64,
    /// Shadowing standard deviation, dB.
    pub shadow_std_db: f64,
    /// Multipath components per link.
    pub num_paths: usize,
}

impl Default for RadioSection {
    fn default() -> Self {
        let fading = FadingParams::<f64>::default();
        RadioSection {
            bandwidth: 15e3,
            p_ul: 0.1,
            p_dl: 0.3,
            noise_dbm: 10.0 * fading.noise_power.log10() + 30.0,
            shadow_std_db: fading.shadow_std_db,
            num_paths: fading.num_paths,
        }
    }
}

/// Compute-side latency constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeSection {
    /// UE computing frequency, Hz.
    pub f_ue: f64,
    /// DPU computing frequency, Hz.
    pub f_dpu: f64,
    /// Cycles per operation.
    pub cycles_per_op: f64,
    /// Constant DPU backpropagation time, seconds.
    pub t_back: f64,
}

impl Default for ComputeSection {
    fn default() -> Self {
        let c = ComputeConfig::<f64>::default();
        ComputeSection {
            f_ue: c.f_ue,
            f_dpu: c.f_dpu,
            cycles_per_op: c.cycles_per_op,
            t_back: c.t_back,
        }
    }
}

/// Long-term objective settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    /// Weighting exponent of the accuracy proxy.
    pub ell: f64,
    /// Channel draws per expectation estimate.
    pub n_draws: usize,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection {
            ell: 1.0,
            n_draws: 1,
        }
    }
}

/// Short-term solver settings surfaced to the configuration file; the
/// remaining solver constants keep their library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbcdSection {
    pub tol_outer: f64,
    pub max_outer: usize,
    pub patience: usize,
    /// Keep a per-outer-iteration trace in the solution.
    pub trace: bool,
}

impl Default for NbcdSection {
    fn default() -> Self {
        let c = NbcdConfig::<f64>::default();
        NbcdSection {
            tol_outer: c.tol_outer,
            max_outer: c.max_outer,
            patience: c.patience,
            trace: false,
        }
    }
}

/// Long-term learner settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoSection {
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: usize,
    pub clip: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub normalize_rewards: bool,
    pub log_rewards: bool,
    pub standardize_advantages: bool,
    pub update_epochs: usize,
    pub explore: f64,
    /// Rate normalization scale of the state features, b/s.
    pub rate_scale: f64,
}

impl Default for PpoSection {
    fn default() -> Self {
        let c = PpoConfig::<f64>::default();
        PpoSection {
            gamma: c.gamma,
            lambda: c.lambda,
            horizon: c.horizon,
            clip: c.clip,
            critic_lr: c.critic_lr,
            actor_lr: c.actor_lr,
            episodes: c.episodes,
            hidden: c.hidden,
            normalize_rewards: c.normalize_rewards,
            log_rewards: c.log_rewards,
            standardize_advantages: c.standardize_advantages,
            update_epochs: c.update_epochs,
            explore: c.explore,
            rate_scale: 1e5,
        }
    }
}

/// The swept quantity of a sweep command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// UE computing frequency, Hz.
    FUe,
    /// Bandwidth, Hz.
    W,
    /// Accuracy-proxy exponent.
    Ell,
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f_ue" => Ok(SweepAxis::FUe),
            "w" => Ok(SweepAxis::W),
            "ell" => Ok(SweepAxis::Ell),
            other => bail!("unknown sweep axis '{other}' (expected f_ue, w, or ell)"),
        }
    }
}

/// Sweep axis and values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: SweepAxis::FUe,
            values: vec![1e9, 1.5e9, 2e9, 2.5e9, 3e9],
        }
    }
}

/// Compared strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    /// The learned strategy.
    Ucsfl,
    /// Full association, learned splits.
    Bl1,
    /// First-layer split, learned association.
    Bl2,
    /// No splitting, full association.
    Bl3,
}

impl std::str::FromStr for Scheme {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "UCSFL" => Ok(Scheme::Ucsfl),
            "BL1" => Ok(Scheme::Bl1),
            "BL2" => Ok(Scheme::Bl2),
            "BL3" => Ok(Scheme::Bl3),
            other => bail!("unknown scheme '{other}' (expected UCSFL, BL1, BL2, or BL3)"),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Ucsfl => "UCSFL",
            Scheme::Bl1 => "BL1",
            Scheme::Bl2 => "BL2",
            Scheme::Bl3 => "BL3",
        };
        f.write_str(s)
    }
}

/// Desk-scale convergence-study settings (quadratic tasks with exactly
/// computed bound constants).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Model dimension.
    pub dim: usize,
    /// Layers of the two-level dispatch.
    pub num_layers: usize,
    /// Strong-convexity constant.
    pub mu: f64,
    /// Smoothness constant.
    pub beta: f64,
    /// Radius of the ball holding the local optima (0 = homogeneous).
    pub spread: f64,
    /// Per-model gradient-noise scale.
    pub eps: f64,
    pub rounds: usize,
    pub local_steps: usize,
    /// Seeds averaged per cluster size.
    pub num_seeds: usize,
    pub cluster_sizes: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            dim: 6,
            num_layers: 3,
            mu: 1.0,
            beta: 2.0,
            spread: 0.0,
            eps: 0.5,
            rounds: 50,
            local_steps: 1,
            num_seeds: 200,
            cluster_sizes: vec![1, 2, 5, 10],
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Ucsfl, Scheme::Bl1, Scheme::Bl2, Scheme::Bl3]
}

/// The full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub radio: RadioSection,
    pub compute: ComputeSection,
    pub objective: ObjectiveSection,
    pub nbcd: NbcdSection,
    pub ppo: PpoSection,
    pub sweep: SweepSection,
    pub convergence: ConvergenceSection,
    /// Schemes evaluated by the sweep commands.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: NetworkSection::default(),
            radio: RadioSection::default(),
            compute: ComputeSection::default(),
            objective: ObjectiveSection::default(),
            nbcd: NbcdSection::default(),
            ppo: PpoSection::default(),
            sweep: SweepSection::default(),
            convergence: ConvergenceSection::default(),
            schemes: default_schemes(),
        }
    }
}

/// Command-line overrides of the most common fields; `None` keeps the file
/// (or default) value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub num_aps: Option<usize>,
    pub num_ues: Option<usize>,
    pub bandwidth: Option<f64>,
    pub f_ue: Option<f64>,
    pub ell: Option<f64>,
    pub episodes: Option<usize>,
    pub n_draws: Option<usize>,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Option<Vec<f64>>,
    pub schemes: Option<Vec<Scheme>>,
}

impl ExperimentConfig {
    /// Load from a TOML file, or start from the defaults when no file is
    /// given, then apply the command-line overrides and validate.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config file {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply(over);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, over: &Overrides) {
        if let Some(v) = over.seed {
            self.network.seed = v;
        }
        if let Some(v) = over.num_aps {
            self.network.m = v;
        }
        if let Some(v) = over.num_ues {
            self.network.u = v;
        }
        if let Some(v) = over.bandwidth {
            self.radio.bandwidth = v;
        }
        if let Some(v) = over.f_ue {
            self.compute.f_ue = v;
        }
        if let Some(v) = over.ell {
            self.objective.ell = v;
        }
        if let Some(v) = over.episodes {
            self.ppo.episodes = v;
        }
        if let Some(v) = over.n_draws {
            self.objective.n_draws = v;
        }
        if let Some(v) = over.sweep_axis {
            self.sweep.axis = v;
        }
        if let Some(v) = &over.sweep_values {
            self.sweep.values = v.clone();
        }
        if let Some(v) = &over.schemes {
            self.schemes = v.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.network.m == 0 || self.network.u == 0 {
            bail!("network.m and network.u must be >= 1");
        }
        if !(self.network.radius > 0.0) {
            bail!("network.radius must be > 0");
        }
        if self.network.n_ant == 0 {
            bail!("network.n_ant must be >= 1");
        }
        if !(self.radio.bandwidth > 0.0 && self.radio.p_ul > 0.0 && self.radio.p_dl > 0.0) {
            bail!("radio bandwidth and power budgets must be > 0");
        }
        if !(self.compute.f_ue > 0.0 && self.compute.f_dpu > 0.0) {
            bail!("compute frequencies must be > 0");
        }
        if !(self.objective.ell > 0.0) {
            bail!("objective.ell must be > 0");
        }
        if self.objective.n_draws == 0 {
            bail!("objective.n_draws must be >= 1");
        }
        if self.sweep.values.is_empty() {
            bail!("sweep.values must be non-empty");
        }
        if self.schemes.is_empty() {
            bail!("schemes must be non-empty");
        }
        self.ppo_config().validate().map_err(anyhow::Error::from)?;
        Ok(())
    }

    /// Serialize the effective configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing effective config")
    }

    pub fn fading(&self) -> FadingParams<f64> {
        FadingParams {
            carrier_shift: 0.0,
            num_paths: self.radio.num_paths,
            shadow_std_db: self.radio.shadow_std_db,
            noise_power: 10f64.powf((self.radio.noise_dbm - 30.0) / 10.0),
            n_ant: self.network.n_ant,
        }
    }

    pub fn compute_config(&self) -> ComputeConfig<f64> {
        ComputeConfig {
            f_ue: self.compute.f_ue,
            f_dpu: self.compute.f_dpu,
            cycles_per_op: self.compute.cycles_per_op,
            t_back: self.compute.t_back,
        }
    }

    pub fn nbcd_config(&self) -> NbcdConfig<f64> {
        NbcdConfig {
            p_ul_max: self.radio.p_ul,
            p_dl_max: self.radio.p_dl,
            bandwidth: self.radio.bandwidth,
            tol_outer: self.nbcd.tol_outer,
            max_outer: self.nbcd.max_outer,
            patience: self.nbcd.patience,
            trace: self.nbcd.trace,
            ..NbcdConfig::default()
        }
    }

    pub fn ppo_config(&self) -> PpoConfig<f64> {
        PpoConfig {
            gamma: self.ppo.gamma,
            lambda: self.ppo.lambda,
            horizon: self.ppo.horizon,
            clip: self.ppo.clip,
            critic_lr: self.ppo.critic_lr,
            actor_lr: self.ppo.actor_lr,
            episodes: self.ppo.episodes,
            hidden: self.ppo.hidden.clone(),
            normalize_rewards: self.ppo.normalize_rewards,
            log_rewards: self.ppo.log_rewards,
            standardize_advantages: self.ppo.standardize_advantages,
            update_epochs: self.ppo.update_epochs,
            explore: self.ppo.explore,
        }
    }

    /// Geometry from the `placement` seed substream.
    pub fn layout(&self) -> Result<NetworkLayout<f64>> {
        Ok(place_network(
            substream(self.network.seed, "placement"),
            self.network.m,
            self.network.u,
            self.network.radius,
        )?)
    }

    /// The full scenario at the configured parameters; channel draws come
    /// from the `channel` seed substream.
    pub fn scenario(&self) -> Result<Scenario<f64>> {
        Ok(Scenario::new(
            self.layout()?,
            self.fading(),
            self.compute_config(),
            vgg16_profile(),
            self.nbcd_config(),
            self.objective.ell,
            self.objective.n_draws,
            substream(self.network.seed, "channel"),
        )?)
    }

    /// The scenario with one sweep-axis value substituted.
    pub fn scenario_at(&self, axis: SweepAxis, value: f64) -> Result<Scenario<f64>> {
        let mut cfg = self.clone();
        match axis {
            SweepAxis::FUe => cfg.compute.f_ue = value,
            SweepAxis::W => cfg.radio.bandwidth = value,
            SweepAxis::Ell => cfg.objective.ell = value,
        }
        cfg.scenario()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_reference_parameters() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.network.m, 10);
        assert_eq!(cfg.network.u, 4);
        assert_eq!(cfg.network.radius, 200.0);
        assert_eq!(cfg.radio.bandwidth, 15e3);
        assert_eq!(cfg.radio.p_ul, 0.1);
        assert_eq!(cfg.radio.p_dl, 0.3);
        assert_eq!(cfg.compute.f_dpu, 5e9);
        assert_eq!(cfg.schemes.len(), 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            schemes: vec![Scheme::Bl3],
            ..ExperimentConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.network.m, cfg.network.m);
        assert_eq!(back.sweep.values, cfg.sweep.values);
        assert_eq!(back.schemes, vec![Scheme::Bl3]);
    }

    #[test]
    fn overrides_beat_file_values() {
        let over = Overrides {
            seed: Some(9),
            num_aps: Some(3),
            bandwidth: Some(5e3),
            schemes: Some(vec![Scheme::Bl3]),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::load(None, &over).unwrap();
        assert_eq!(cfg.network.seed, 9);
        assert_eq!(cfg.network.m, 3);
        assert_eq!(cfg.radio.bandwidth, 5e3);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = ExperimentConfig {
            schemes: vec![Scheme::Bl3],
            ..ExperimentConfig::default()
        };
        cfg.network.m = 0;
        assert!(cfg.validate().is_err());
        cfg.network.m = 2;
        cfg.sweep.values.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[network]\nbogus = 1\n");
        assert!(err.is_err());
    }
}
