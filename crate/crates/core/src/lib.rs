//! Simulation laboratory for occupation-time fluctuations of particle systems
//! driven by symmetric alpha-stable motions on the real line.
//!
//! The crate has three layers:
//!
//! * model ingredients: [`stable`] (the alpha-stable motion, its density and
//!   semigroup), [`measure`] (quasi-homogeneous random initial point measures),
//!   [`system`] (the event-driven particle simulator and the rescaled
//!   occupation-time fluctuation functional);
//! * closed-form limit theory: [`theory`] (regime classification, covariance
//!   kernels, the potential operator, exact finite-time moment oracles) and
//!   [`gaussian`] (exact simulation of the limit processes);
//! * statistics: [`verify`] (covariance estimation with jackknife errors,
//!   normality tests, theory-vs-simulation reports).
//!
//! All randomness flows through explicit `Rng` arguments; replica streams are
//! derived deterministically from a master seed (see [`rng`]), so equal seeds
//! reproduce results bit for bit regardless of thread count.

pub mod error;
pub mod gaussian;
pub mod grid;
pub mod measure;
pub mod numerics;
pub mod rng;
pub mod stable;
pub mod system;
pub mod testfn;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid, GridFn};
pub use measure::{PlacementRule, PointMeasure, ThetaLaw, Window};
pub use stable::{DensityGrid, StableDensity, StableParams};
pub use system::{FluctuationRunner, FluctuationSample, SimOptions, SystemConfig};
pub use testfn::TestFunction;
pub use theory::{CovarianceModel, PotentialOperator, Regime, RegimeLabel};
