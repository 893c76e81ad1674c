//! Simulation and exact-computation toolkit for boundary-driven stochastic
//! energy-exchange chains.
//!
//! The crate covers five model families (BMP, BEP(m), SIP(m), KMP and a
//! three-site momentum-conserving rotor) with three kinds of machinery:
//!
//! * time-stepping simulators for the diffusions and continuous-time jump
//!   chains ([`diffusion`], [`jump`]),
//! * exact steady-state moments through absorbing dual walkers and sparse
//!   linear solves ([`absorb`]),
//! * symbolic verification of the generator-level duality identities and
//!   the su(1,1) ladder structure behind them, in exact rational (or
//!   radical-extended) arithmetic ([`poly`], [`operators`], [`verify`]).
//!
//! Monte Carlo runs reduce to moment estimates with batch-means error bars
//! in [`estimators`], and everything is driven by the [`model::ChainSpec`]
//! configuration type.

pub mod absorb;
pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod jump;
pub mod model;
pub mod operators;
pub mod poly;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    bep_duality_weight, bmp_duality_weight, validate_spec, AbsorptionDistribution, Boundary,
    ChainSpec, DualConfig, EnergyConfig, Family, VelocityConfig,
};
