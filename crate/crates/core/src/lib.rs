//! Generalized developments of curves in Riemannian manifolds and the
//! reconstruction of isometric immersions from first and second fundamental
//! form data.

pub mod charts;
pub mod error;
pub mod fundeq;
pub mod odeint;
pub mod problems;
pub mod reconstruct;
pub mod tensor;
pub mod transport;
pub mod variation;

pub use charts::{
    parse_scalar_field, AmbientSpec, BundleSpec, Christoffel, CurvatureValue, MetricField, ScalarField,
    SecondFundamentalField,
};
pub use error::{Error, Result};
pub use fundeq::{ResidualReport, TauMap};
pub use odeint::{Method, Trajectory};
pub use reconstruct::{ImmersionSample, PointSeed, Problem, Seed, SubmanifoldSeed};
pub use transport::{Curve, DevelopOptions, DevelopmentResult, SplitSeed};
pub use variation::{ExprFamily, Family, SeedKind, VariationState, VariationTrajectory};
pub use tensor::{SecondForm, Tensor4};
