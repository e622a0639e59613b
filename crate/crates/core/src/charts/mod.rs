//! Single-chart manifolds: expressions, metrics, bundles and curvature.

mod bundle;
mod expr;
mod metric;

pub use bundle::{BundleSpec, SecondFundamentalField, COMPATIBILITY_TOL};
pub use expr::{parse_scalar_field, Expr, Func, ScalarField};
pub use metric::{AmbientSpec, Christoffel, CurvatureValue, MetricField, MetricJet, SymmetryReport};
