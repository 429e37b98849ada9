//! Simulator and optimizer workbench for split federated learning over
//! user-centric cell-free MIMO networks.
//!
//! The crate is organised bottom-up: channel generation and link-level rate
//! computation, the split-point profile and latency model, the alternating
//! max-min resource optimizer, a small neural-network core, the multi-agent
//! strategy learner, and a two-level aggregation convergence laboratory.
//!
//! Everything numeric is generic over the scalar type through [`num::Real`];
//! the `F64`-suffixed aliases at the crate root fix the default precision.

pub mod channel;
pub mod convergence;
pub mod error;
pub mod latency;
pub mod linalg;
pub mod mais;
pub mod nbcd;
pub mod nn;
pub mod num;
pub mod objective;
pub mod phy;
pub mod split_profile;

pub use error::{Error, Result};
pub use num::Real;

/// Default-precision network layout.
pub type NetworkLayoutF64 = channel::NetworkLayout<f64>;
/// Default-precision fading parameters.
pub type FadingParamsF64 = channel::FadingParams<f64>;
/// Default-precision channel realization.
pub type ChannelRealizationF64 = channel::ChannelRealization<f64>;
/// Default-precision split profile.
pub type SplitProfileF64 = split_profile::SplitProfile<f64>;
/// Default-precision compute constants.
pub type ComputeConfigF64 = latency::ComputeConfig<f64>;
