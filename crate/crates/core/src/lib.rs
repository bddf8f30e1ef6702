//! Random-feature estimation of KL divergence and mutual information.
//!
//! The estimator fits the Donsker-Varadhan witness with a single hidden layer
//! of frozen random ReLU features, `psi(x) = phi(x)^T theta`, and trains only
//! the output coefficients with a projected stochastic-gradient recursion
//! that tracks the normalizer `E_Q[exp(psi)]` in a scalar `z`. Because the
//! hidden layer is fixed the objective is convex in `theta`.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`features`] | random feature map `phi` and the network `psi` |
//! | [`constants`] | closed-form constants, error bounds and step-size schedules |
//! | [`optimizer`] | the projected recursion, averaged iterate, exact gradient/Hessian |
//! | [`estimator`] | Donsker-Varadhan evaluation and mutual information mode |
//! | [`distributions`] | box-supported test distributions and quadrature KL oracles |
//! | [`approx`] | constructive approximation pipeline and its numerical checks |
//! | [`baseline`] | k-nearest-neighbour KL estimator |
//!
//! All randomness flows through [`rng::StreamRng`] (ChaCha20) seeded from
//! 64-bit seeds, so results reproduce bit-for-bit across platforms.

pub mod approx;
pub mod baseline;
pub mod constants;
pub mod distributions;
mod error;
pub mod estimator;
pub mod features;
pub mod optimizer;
pub mod quadrature;
pub mod rng;
mod samples;

pub use error::{Error, Result};
pub use samples::{PairedSamples, Samples};

pub use constants::{BoundReport, ProblemConstants, ScheduleKind, TheoremBound};
pub use distributions::{Distribution, DistributionPair, RadiusConvention};
pub use estimator::{DvEstimate, KlConfig, KlOutput};
pub use features::FeatureMap;
pub use optimizer::{ParamState, RunOutput, TrainConfig};
