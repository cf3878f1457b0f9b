//! Score-based sampling laboratory.
//!
//! The crate has two halves that deliberately share their vocabulary:
//!
//! * **Simulation** — Langevin Monte Carlo with an estimated score, annealed
//!   LMC over a noise-level ladder, and exact-integral predictor /
//!   predictor-corrector steps for the reverse SDEs of variance-exploding
//!   (SMLD) and variance-preserving (DDPM) diffusions. All randomness is
//!   counter-based: a run is a pure function of `(seed, chain, step, slot)`,
//!   so results are byte-identical at any worker-thread count.
//! * **Theory** — the closed-form constants, one-step recursions, step-size
//!   ceilings, and budget planners that bound the chi-square / TV error of
//!   those samplers, evaluated exactly so simulations can be checked against
//!   them rather than against folklore.
//!
//! Supporting modules provide analytic Gaussian-mixture targets (density,
//! score, smoothness constants, exact noising), score oracles with controlled
//! L-infinity / L2(p) error, and quadrature-based divergences (chi-square, KL,
//! TV, relative Fisher information) for low dimension.
//!
//! Time convention: samplers run on the reverse clock `t in [0, T]`; the
//! forward time is always obtained through [`sde::DiffusionModel::forward_time`],
//! never by ad-hoc arithmetic at call sites.

pub mod bounds;
pub mod divergences;
pub mod error;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod sde;
pub mod targets;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
