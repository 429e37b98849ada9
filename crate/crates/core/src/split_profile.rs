//! Per-split-point model statistics: forward compute load, activation size
//! at the cut, and sub-model size, plus the VGG16 preset.
//!
//! Split points index whole blocks, so the VGG16 preset has six points (five
//! convolutional blocks and one fully connected block). Canonical units are
//! bits for data and raw operations for compute.

use crate::error::{Error, Result};
use crate::num::Real;
use serde::{Deserialize, Serialize};

const MEGABIT: f64 = 1e6;
const GIGA: f64 = 1e9;

/// Convolutional layer geometry for counting multiply-accumulate operations.
/// Per filter `j` of layer `i`: kernel `r x q` and output map `h x w`.
#[derive(Debug, Clone)]
pub struct LayerDescriptor {
    /// Kernel heights, one per filter.
    pub kernel_h: Vec<u64>,
    /// Kernel widths, one per filter.
    pub kernel_w: Vec<u64>,
    /// Output map heights, one per filter.
    pub out_h: Vec<u64>,
    /// Output map widths, one per filter.
    pub out_w: Vec<u64>,
    /// Filter count `n_i`.
    pub kernel_count: u64,
    /// Input channel count `n_{i-1}`.
    pub in_channels: u64,
    /// Batch size `k`.
    pub batch: u64,
}

impl LayerDescriptor {
    fn validate(&self) -> Result<()> {
        let n = self.kernel_h.len();
        if self.kernel_w.len() != n || self.out_h.len() != n || self.out_w.len() != n {
            return Err(Error::ShapeMismatch(
                "per-filter vectors must share a length".into(),
            ));
        }
        let all = self
            .kernel_h
            .iter()
            .chain(&self.kernel_w)
            .chain(&self.out_h)
            .chain(&self.out_w);
        for &v in all {
            if v == 0 {
                return Err(Error::InvalidArgument(
                    "layer dimensions must be positive".into(),
                ));
            }
        }
        if self.kernel_count == 0 || self.in_channels == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument(
                "layer counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Multiply-accumulate operations to run the first `split` layers:
/// `x = sum_{i<=split} sum_j r_i^j q_i^j n_{i-1} h_i^j w_i^j n_i k`.
pub fn mac_load(layers: &[LayerDescriptor], split: usize) -> Result<u64> {
    if split == 0 || split > layers.len() {
        return Err(Error::SplitOutOfRange {
            split,
            num_points: layers.len(),
        });
    }
    let mut total = 0u64;
    for layer in &layers[..split] {
        layer.validate()?;
        for j in 0..layer.kernel_h.len() {
            total += layer.kernel_h[j]
                * layer.kernel_w[j]
                * layer.in_channels
                * layer.out_h[j]
                * layer.out_w[j]
                * layer.kernel_count
                * layer.batch;
        }
    }
    Ok(total)
}

/// Activation elements produced at the cut after layer `split`:
/// `h_split * w_split * n_split * k`, taking the first filter's map size.
/// Multiply by the configured bits per element to get bits on the air.
pub fn activation_elements(layers: &[LayerDescriptor], split: usize) -> Result<u64> {
    if split == 0 || split > layers.len() {
        return Err(Error::SplitOutOfRange {
            split,
            num_points: layers.len(),
        });
    }
    let layer = &layers[split - 1];
    layer.validate()?;
    Ok(layer.out_h[0] * layer.out_w[0] * layer.kernel_count * layer.batch)
}

/// Activation size in bits at the cut.
pub fn activation_bits<T: Real>(
    layers: &[LayerDescriptor],
    split: usize,
    bits_per_element: T,
) -> Result<T> {
    Ok(T::lit(activation_elements(layers, split)? as f64) * bits_per_element)
}

/// One row of a split profile, in canonical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPoint<T> {
    /// Activation size `D(l)` sent uplink, bits.
    pub activation_bits: T,
    /// Sub-model size `D_sub(l)` sent downlink, bits.
    pub submodel_bits: T,
    /// Forward compute up to the cut `x(l)`, operations.
    pub mac_ops: T,
}

/// Split-point table for one model. Index `l` runs from 1 to `num_points()`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitProfile<T> {
    points: Vec<SplitPoint<T>>,
}

impl<T: Real> SplitProfile<T> {
    /// Build from rows ordered by split index; checks the monotonicity
    /// invariants (compute and sub-model size grow strictly with the cut).
    pub fn new(points: Vec<SplitPoint<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("profile needs >= 1 point".into()));
        }
        for p in &points {
            if !(p.activation_bits > T::zero()
                && p.submodel_bits > T::zero()
                && p.mac_ops > T::zero())
            {
                return Err(Error::InvalidArgument(
                    "profile entries must be positive".into(),
                ));
            }
        }
        for w in points.windows(2) {
            if !(w[1].mac_ops > w[0].mac_ops) {
                return Err(Error::InvalidArgument(
                    "mac_ops must be strictly increasing in the split index".into(),
                ));
            }
            if !(w[1].submodel_bits > w[0].submodel_bits) {
                return Err(Error::InvalidArgument(
                    "submodel_bits must be strictly increasing in the split index".into(),
                ));
            }
        }
        Ok(SplitProfile { points })
    }

    /// Number of split points `L`.
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    fn point(&self, split: usize) -> Result<&SplitPoint<T>> {
        self.points
            .get(split.wrapping_sub(1))
            .ok_or_else(|| Error::SplitOutOfRange {
                split,
                num_points: self.points.len(),
            })
    }

    /// Uplink activation size `D(l)`, bits.
    pub fn activation_bits(&self, split: usize) -> Result<T> {
        Ok(self.point(split)?.activation_bits)
    }

    /// Downlink sub-model size `D_sub(l)`, bits.
    pub fn submodel_bits(&self, split: usize) -> Result<T> {
        Ok(self.point(split)?.submodel_bits)
    }

    /// UE-side compute `x(l)`, operations.
    pub fn mac_ops(&self, split: usize) -> Result<T> {
        Ok(self.point(split)?.mac_ops)
    }

    /// Total forward load `x_L`.
    pub fn total_ops(&self) -> T {
        self.points[self.points.len() - 1].mac_ops
    }

    /// DPU-side load `x_L - x(l)`, always nonnegative.
    pub fn dpu_ops(&self, split: usize) -> Result<T> {
        Ok(self.total_ops() - self.mac_ops(split)?)
    }
}

/// VGG16 preset: six block-level split points with per-cut activation size,
/// sub-model size, and cumulative forward load.
pub fn vgg16_profile<T: Real>() -> SplitProfile<T> {
    let d_mb = [0.8, 0.4, 0.2, 0.1, 0.025, 0.001];
    let d_sub_mb = [0.039, 0.261, 1.741, 7.641, 14.721, 138.361];
    let x_gops = [3.87, 9.42, 18.67, 27.92, 30.69, 30.94];
    let points = (0..6)
        .map(|i| SplitPoint {
            activation_bits: T::lit(d_mb[i] * MEGABIT),
            submodel_bits: T::lit(d_sub_mb[i] * MEGABIT),
            mac_ops: T::lit(x_gops[i] * GIGA),
        })
        .collect();
    SplitProfile::new(points).expect("preset satisfies the invariants")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_layer() -> LayerDescriptor {
        LayerDescriptor {
            kernel_h: vec![1],
            kernel_w: vec![1],
            out_h: vec![1],
            out_w: vec![1],
            kernel_count: 1,
            in_channels: 1,
            batch: 1,
        }
    }

    #[test]
    fn mac_load_all_ones() {
        assert_eq!(mac_load(&[ones_layer()], 1).unwrap(), 1);
    }

    #[test]
    fn mac_load_additive() {
        let layers = vec![ones_layer(), ones_layer()];
        assert_eq!(mac_load(&layers, 2).unwrap(), 2);
    }

    #[test]
    fn mac_load_matches_loop_nest_counter() {
        // Independent oracle: count every multiply-accumulate one by one.
        let layers = vec![
            LayerDescriptor {
                kernel_h: vec![3, 5],
                kernel_w: vec![3, 2],
                out_h: vec![8, 7],
                out_w: vec![8, 6],
                kernel_count: 2,
                in_channels: 3,
                batch: 4,
            },
            LayerDescriptor {
                kernel_h: vec![3],
                kernel_w: vec![3],
                out_h: vec![4],
                out_w: vec![4],
                kernel_count: 5,
                in_channels: 2,
                batch: 4,
            },
        ];
        let mut count = 0u64;
        for layer in &layers {
            for j in 0..layer.kernel_h.len() {
                for _r in 0..layer.kernel_h[j] {
                    for _q in 0..layer.kernel_w[j] {
                        for _c in 0..layer.in_channels {
                            for _h in 0..layer.out_h[j] {
                                for _w in 0..layer.out_w[j] {
                                    for _n in 0..layer.kernel_count {
                                        count += layer.batch;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(mac_load(&layers, 2).unwrap(), count);
    }

    #[test]
    fn mac_load_rejects_out_of_range() {
        let layers = vec![ones_layer()];
        assert!(mac_load(&layers, 0).is_err());
        assert!(mac_load(&layers, 2).is_err());
    }

    #[test]
    fn activation_element_counts() {
        assert_eq!(activation_elements(&[ones_layer()], 1).unwrap(), 1);
        let layer = LayerDescriptor {
            kernel_h: vec![1],
            kernel_w: vec![1],
            out_h: vec![2],
            out_w: vec![2],
            kernel_count: 3,
            in_channels: 1,
            batch: 4,
        };
        assert_eq!(activation_elements(&[layer], 1).unwrap(), 48);
    }

    #[test]
    fn vgg16_reference_values() {
        let p = vgg16_profile::<f64>();
        assert_eq!(p.num_points(), 6);
        assert_eq!(p.mac_ops(6).unwrap(), 30.94e9);
        assert_eq!(p.activation_bits(5).unwrap(), 0.025e6);
        assert_eq!(p.activation_bits(1).unwrap(), 0.8e6);
        assert_eq!(p.submodel_bits(6).unwrap(), 138.361e6);
        assert_eq!(p.total_ops(), 30.94e9);
    }

    #[test]
    fn vgg16_monotonicity() {
        let p = vgg16_profile::<f64>();
        for l in 1..6 {
            assert!(p.activation_bits(l + 1).unwrap() < p.activation_bits(l).unwrap());
            assert!(p.submodel_bits(l + 1).unwrap() > p.submodel_bits(l).unwrap());
            assert!(p.mac_ops(l + 1).unwrap() > p.mac_ops(l).unwrap());
        }
    }

    #[test]
    fn dpu_ops_nonnegative() {
        let p = vgg16_profile::<f64>();
        for l in 1..=6 {
            assert!(p.dpu_ops(l).unwrap() >= 0.0);
        }
        assert_eq!(p.dpu_ops(6).unwrap(), 0.0);
    }

    #[test]
    fn profile_rejects_non_monotone() {
        let mk = |x: f64| SplitPoint {
            activation_bits: 1.0,
            submodel_bits: x,
            mac_ops: x,
        };
        assert!(SplitProfile::new(vec![mk(2.0), mk(1.0)]).is_err());
        assert!(SplitProfile::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn profile_rejects_bad_split_index() {
        let p = vgg16_profile::<f64>();
        assert!(p.activation_bits(0).is_err());
        assert!(p.activation_bits(7).is_err());
    }
}
