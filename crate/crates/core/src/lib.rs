//! Random compositions of Liverani-Saussol-Vaienti maps.
//!
//! The crate builds the quenched transfer-operator cocycle of
//! `T_w^n = T_{sigma^{n-1} w} ∘ ... ∘ T_w` along sampled environments, and
//! measures memory loss, variance growth, CLT behaviour, moment growth and
//! the coupling-time tails that control polynomial mixing.
//!
//! * [`env`]: parameter laws, environment windows, `S_n`, `N_eps`, mixing bounds
//! * [`lsv`]: the map family, orbits, first-return structure and exact tails
//! * [`transfer`]: Ulam matrices, equivariant densities, normalised operators
//! * [`stats`]: observables, memory-loss and correlation curves, Birkhoff sums
//! * [`coupling`]: log-Lipschitz regularity and the coupling-time simulator
//! * [`fit`]: log-log exponent regression shared by all curves

pub mod coupling;
pub mod env;
pub mod error;
pub mod fit;
pub mod io;
pub mod lsv;
pub mod rng;
pub mod stats;
pub mod transfer;

pub use env::{EnvironmentPath, MixingProfile, ParameterLaw};
pub use error::{Error, Result};
pub use fit::{DecayCurve, ExponentFit};
pub use lsv::ReturnStructure;
pub use stats::Observable;
pub use transfer::{DensityTrack, DensityVector, Grid, GridKind, UlamCache, UlamMatrix};
