//! Numerical engine for positive minimal heat kernels of Schrödinger-type
//! perturbations `P - eps V` on model manifolds.
//!
//! The library evaluates closed-form and envelope heat kernels, integrates
//! Duhamel convolutions by exact Brownian-bridge importance sampling,
//! constructs perturbed kernels as Neumann series with certified geometric
//! tails, and scans the inequalities the construction rests on (the
//! 3k-inequality, doubling, small-perturbation tails, parabolic Martin
//! transforms) against analytic oracles.
//!
//! See the `book/` guide for worked narrative chapters; its code snippets
//! are compiled as doc-tests from [`guide`].

pub mod bridge;
pub mod certify;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod martin;
pub mod numerics;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod series;

pub use certify::{CertificateKind, CertificateReport, ProbeGrid, Verdict};
pub use error::{Error, Result};
pub use geometry::{ManifoldModel, Point};
pub use kernel::{green, BaseKernel, EnvelopeForm, Estimate, Exactness, GreenValue, SpaceTimeKernel};
pub use martin::{CaloricFunction, ReferenceMeasure, SpaceTimeFn, TimeProfile};
pub use potential::{ExhaustionSpec, GridPotential, Norm, Potential};
pub use quadrature::{QuadratureConfig, QuadratureMode};
pub use scenario::{load_scenario, persist_report, Scenario, ScenarioFile};
pub use series::{NeumannEvaluator, SeriesConfig};
