//! Numerical toolkit for geodesic orbit metrics on quotients of `SO(n)` and `U(n)`.

pub mod error;
pub mod go;
pub mod lie;
pub mod linalg;
pub mod metric;
pub mod space;
pub mod structure;

pub use error::{Error, Result};
pub use lie::{bracket, build_algebra, inner, Algebra, BasisKind, BasisLabel, Element, Family};
pub use space::{decompose, normalizer, parse_spec, Decomposition, SpaceSpec, Submodule, SubmoduleKind};
pub use go::{check_go, explicit_witness, geodesic_residual, reproduce_theorem, GoVerdict, ParameterGrid, ProbeSet, Theorem, TheoremReport};
pub use metric::{diagonal_metric, gmu_metric, normal_metric, validate_metric, EigMap, MetricOperator, MetricTolerances, RawOperator, ValidationReport};
pub use structure::{bracket_projection, derive_constraints, hom_dimension, inequivalence_witness, EigenvalueClasses, Target, Under};
