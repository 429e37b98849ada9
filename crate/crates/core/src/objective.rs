//! Long-term objective: the latency-to-accuracy ratio and the baseline
//! strategy generators.
//!
//! A strategy fixes each UE's split layer and AP cluster. Its quality is the
//! expected per-iteration latency divided by the cluster size raised to a
//! weighting exponent, so larger clusters (which converge faster) are allowed
//! proportionally more wall-clock time. The expectation is estimated by
//! Monte-Carlo over channel draws with the short-term solver run per draw.

use crate::channel::{draw_channel, FadingParams, NetworkLayout};
use crate::error::{Error, Result};
use crate::latency::{total_latency, ComputeConfig};
use crate::nbcd::{solve, NbcdConfig};
use crate::num::Real;
use crate::phy::AssociationMatrix;
use crate::split_profile::SplitProfile;

/// Long-term decision variables: split layer per UE and the association.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyAssignment {
    /// 1-based split layer `l_u` per UE.
    pub splits: Vec<usize>,
    pub assoc: AssociationMatrix,
}

impl StrategyAssignment {
    pub fn new(splits: Vec<usize>, assoc: AssociationMatrix) -> Result<Self> {
        if splits.len() != assoc.num_ues() {
            return Err(Error::ShapeMismatch("splits vs association".into()));
        }
        Ok(StrategyAssignment { splits, assoc })
    }

    /// Check split indices against a profile.
    pub fn validate<T: Real>(&self, profile: &SplitProfile<T>) -> Result<()> {
        for &l in &self.splits {
            if l == 0 || l > profile.num_points() {
                return Err(Error::SplitOutOfRange {
                    split: l,
                    num_points: profile.num_points(),
                });
            }
        }
        Ok(())
    }
}

/// Per-UE latency-to-accuracy ratios and their maximum.
#[derive(Debug, Clone)]
pub struct RatioReport<T> {
    /// `Upsilon_u = E{t_u} / C_u^ell`.
    pub ratios: Vec<T>,
    pub max_ratio: T,
    pub ell: T,
    pub expected_latency: Vec<T>,
}

/// Form the ratio report from expected latencies and the association.
pub fn latency_accuracy_ratio<T: Real>(
    exp_latency: &[T],
    assoc: &AssociationMatrix,
    ell: T,
) -> Result<RatioReport<T>> {
    if exp_latency.len() != assoc.num_ues() {
        return Err(Error::ShapeMismatch("latencies vs association".into()));
    }
    if !(ell > T::zero()) {
        return Err(Error::InvalidArgument("ell must be > 0".into()));
    }
    let ratios: Vec<T> = exp_latency
        .iter()
        .enumerate()
        .map(|(u, &t)| {
            let c = assoc.cluster_size_ue(u);
            // cluster sizes are >= 1 by the association invariant
            t / T::lit(c as f64).powf(ell)
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(T::neg_infinity(), T::max);
    Ok(RatioReport {
        ratios,
        max_ratio,
        ell,
        expected_latency: exp_latency.to_vec(),
    })
}

/// Reference strategies the learned one is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Full association, splits taken from the compared strategy.
    Bl1,
    /// Split at the first layer, association taken from the compared strategy.
    Bl2,
    /// No splitting (everything on the UE) and full association.
    Bl3,
}

/// Build a baseline strategy; `splits_from` is required for BL1 and
/// `assoc_from` for BL2.
pub fn baseline(
    kind: BaselineKind,
    num_aps: usize,
    num_ues: usize,
    splits_from: Option<&[usize]>,
    assoc_from: Option<&AssociationMatrix>,
    num_layers: usize,
) -> Result<StrategyAssignment> {
    match kind {
        BaselineKind::Bl1 => {
            let splits = splits_from
                .ok_or_else(|| Error::InvalidArgument("BL1 needs splits_from".into()))?;
            StrategyAssignment::new(splits.to_vec(), AssociationMatrix::all_ones(num_aps, num_ues))
        }
        BaselineKind::Bl2 => {
            let assoc = assoc_from
                .ok_or_else(|| Error::InvalidArgument("BL2 needs assoc_from".into()))?;
            StrategyAssignment::new(vec![1; num_ues], assoc.clone())
        }
        BaselineKind::Bl3 => StrategyAssignment::new(
            vec![num_layers; num_ues],
            AssociationMatrix::all_ones(num_aps, num_ues),
        ),
    }
}

/// Everything fixed for the long-term problem: geometry, channel statistics,
/// compute constants, the split profile, and the solver/estimator settings.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub layout: NetworkLayout<T>,
    pub fading: FadingParams<T>,
    pub compute: ComputeConfig<T>,
    pub profile: SplitProfile<T>,
    pub nbcd: NbcdConfig<T>,
    /// Weighting exponent of the accuracy proxy.
    pub ell: T,
    /// Channel draws per expectation estimate.
    pub n_draws: usize,
    /// Base seed of the per-draw channel substream.
    pub seed: u64,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        layout: NetworkLayout<T>,
        fading: FadingParams<T>,
        compute: ComputeConfig<T>,
        profile: SplitProfile<T>,
        nbcd: NbcdConfig<T>,
        ell: T,
        n_draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_draws == 0 {
            return Err(Error::InvalidArgument("n_draws must be >= 1".into()));
        }
        // the solver must see the same noise floor the channels are drawn with
        let mut nbcd = nbcd;
        nbcd.noise_power = fading.noise_power;
        Ok(Scenario {
            layout,
            fading,
            compute,
            profile,
            nbcd,
            ell,
            n_draws,
            seed,
        })
    }
}

/// Estimate a strategy's expected latencies (Monte-Carlo over channel draws,
/// short-term solver per draw) and form the ratio report.
pub fn evaluate_strategy<T: Real>(
    sc: &Scenario<T>,
    strategy: &StrategyAssignment,
) -> Result<RatioReport<T>> {
    strategy.validate(&sc.profile)?;
    let num_ues = sc.layout.num_ues();
    if strategy.assoc.num_ues() != num_ues || strategy.assoc.num_aps() != sc.layout.num_aps() {
        return Err(Error::ShapeMismatch("strategy vs layout".into()));
    }
    let mut acc = vec![T::zero(); num_ues];
    for draw in 0..sc.n_draws {
        let channel = draw_channel(&sc.layout, &sc.fading, sc.seed.wrapping_add(draw as u64))?;
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
        for (a, &t) in acc.iter_mut().zip(&breakdown.t_total) {
            *a += t;
        }
    }
    let n = T::lit(sc.n_draws as f64);
    for a in acc.iter_mut() {
        *a = *a / n;
    }
    latency_accuracy_ratio(&acc, &strategy.assoc, sc.ell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::place_network;
    use crate::split_profile::vgg16_profile;

    fn assoc_from_rows(rows: &[&[bool]]) -> AssociationMatrix {
        let m = rows.len();
        let u = rows[0].len();
        let entries = rows.iter().flat_map(|r| r.iter().cloned()).collect();
        AssociationMatrix::new(m, u, entries).unwrap()
    }

    #[test]
    fn ratio_reference_values() {
        // t = 10 s, C = 4: ell = 1 -> 2.5, ell = 2 -> 0.625
        let assoc = AssociationMatrix::all_ones(4, 1);
        let r = latency_accuracy_ratio(&[10.0], &assoc, 1.0).unwrap();
        assert_eq!(r.ratios[0], 2.5);
        assert_eq!(r.max_ratio, 2.5);
        let r = latency_accuracy_ratio(&[10.0], &assoc, 2.0).unwrap();
        assert_eq!(r.ratios[0], 0.625);
    }

    #[test]
    fn singleton_cluster_ratio_is_latency() {
        let assoc = AssociationMatrix::all_ones(1, 1);
        for ell in [0.3, 1.0, 4.2] {
            let r = latency_accuracy_ratio(&[7.25], &assoc, ell).unwrap();
            assert_eq!(r.ratios[0], 7.25);
        }
    }

    #[test]
    fn ratio_rejects_nonpositive_ell() {
        let assoc = AssociationMatrix::all_ones(2, 1);
        assert!(latency_accuracy_ratio(&[1.0], &assoc, 0.0).is_err());
        assert!(latency_accuracy_ratio(&[1.0], &assoc, -1.0).is_err());
    }

    #[test]
    fn ratio_decreases_in_cluster_size() {
        // fixed latency, growing C_u: Upsilon strictly decreases
        let mut last = f64::INFINITY;
        for c in 1..=8 {
            let assoc = AssociationMatrix::all_ones(c, 1);
            let r = latency_accuracy_ratio(&[5.0], &assoc, 1.3).unwrap();
            assert!(r.ratios[0] < last);
            last = r.ratios[0];
        }
    }

    #[test]
    fn max_ratio_permutation_invariant() {
        let a = assoc_from_rows(&[&[true, true], &[true, false]]);
        let b = assoc_from_rows(&[&[true, true], &[false, true]]);
        let ra = latency_accuracy_ratio(&[3.0, 9.0], &a, 1.0).unwrap();
        let rb = latency_accuracy_ratio(&[9.0, 3.0], &b, 1.0).unwrap();
        assert_eq!(ra.max_ratio, rb.max_ratio);
    }

    #[test]
    fn baseline_shapes() {
        let assoc = assoc_from_rows(&[&[true, false], &[true, true], &[false, true]]);
        let bl1 = baseline(BaselineKind::Bl1, 3, 2, Some(&[2, 5]), None, 6).unwrap();
        assert_eq!(bl1.splits, vec![2, 5]);
        assert!(bl1.assoc.entries().iter().all(|&e| e));
        let bl2 = baseline(BaselineKind::Bl2, 3, 2, None, Some(&assoc), 6).unwrap();
        assert_eq!(bl2.splits, vec![1, 1]);
        assert_eq!(bl2.assoc, assoc);
        let bl3 = baseline(BaselineKind::Bl3, 10, 4, None, None, 6).unwrap();
        assert_eq!(bl3.splits, vec![6, 6, 6, 6]);
        for u in 0..4 {
            assert_eq!(bl3.assoc.cluster_size_ue(u), 10);
        }
    }

    #[test]
    fn baseline_missing_inputs_rejected() {
        assert!(baseline(BaselineKind::Bl1, 2, 2, None, None, 6).is_err());
        assert!(baseline(BaselineKind::Bl2, 2, 2, None, None, 6).is_err());
    }

    fn small_scenario(n_draws: usize) -> Scenario<f64> {
        let layout = place_network::<f64>(5, 3, 2, 200.0).unwrap();
        Scenario::new(
            layout,
            FadingParams::default(),
            ComputeConfig::default(),
            vgg16_profile::<f64>(),
            NbcdConfig::default(),
            1.0,
            n_draws,
            900,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_strategy_deterministic_and_positive() {
        let sc = small_scenario(2);
        let strat = StrategyAssignment::new(vec![2, 4], AssociationMatrix::all_ones(3, 2)).unwrap();
        let a = evaluate_strategy(&sc, &strat).unwrap();
        let b = evaluate_strategy(&sc, &strat).unwrap();
        assert_eq!(a.max_ratio, b.max_ratio);
        assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
        for (&r, &t) in a.ratios.iter().zip(&a.expected_latency) {
            assert!(r > 0.0 && t > 0.0);
        }
    }

    #[test]
    fn evaluate_strategy_matches_manual_average() {
        // n_draws = 1 must equal a direct solve + total_latency composition
        let sc = small_scenario(1);
        let strat = StrategyAssignment::new(vec![1, 6], AssociationMatrix::all_ones(3, 2)).unwrap();
        let rep = evaluate_strategy(&sc, &strat).unwrap();
        let channel = draw_channel(&sc.layout, &sc.fading, sc.seed).unwrap();
        let sol = solve(
            &channel,
            &strat.assoc,
            &strat.splits,
            &sc.profile,
            &sc.nbcd,
            None,
        )
        .unwrap();
        let b = total_latency(
            &sc.profile,
            &strat.splits,
            &sol.uplink_rates,
            &sol.downlink_rates,
            &sc.compute,
        )
        .unwrap();
        for u in 0..2 {
            assert!((rep.expected_latency[u] - b.t_total[u]).abs() / b.t_total[u] < 1e-12);
        }
    }
}
