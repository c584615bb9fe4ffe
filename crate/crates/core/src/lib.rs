//! Key-rate analysis and protocol simulation for post-selection
//! continuous-variable QKD over Gaussian channels with loss and excess noise.

pub mod dataset;
pub mod error;
pub mod eve;
pub mod info_theory;
pub mod keyrate;
pub mod numerics;
pub mod simulator;

pub use error::{Error, Result};
pub use eve::{Attack, BitPair, GramMatrix4, Target};
pub use info_theory::{AnnouncedPair, Channel, Modulation};
pub use keyrate::{
    ContourCell, OptimizedModulation, RateBreakdown, RateConvention, RegionMap, SecureRateResult,
    SweepPoint, VaChoice,
};
pub use simulator::{
    Basis, ChannelEstimate, EmpiricalRate, ExperimentConfig, ExperimentResult, Metadata, RawRecord,
    SiftedRecord,
};
