//! Bernstein-type operators on Delzant polytopes with toric Kähler metrics.
//!
//! The crate is organized bottom-up:
//!
//! * [`polytope`] — exact facet presentations, Delzant validation, lattice
//!   dilations, facet charts with Leray densities;
//! * [`expr`] — a small symbolic expression language with exact
//!   differentiation, used for test functions and metric perturbations;
//! * [`metric`] — symplectic potentials `u = Σ ℓ_r log ℓ_r + g`, their
//!   derivatives, moment-map inversion, and Abreu's scalar curvature;
//! * [`quad`] — adaptive simplex quadrature (plain and log-domain) and
//!   facet-boundary integration;
//! * [`bernstein`] — norming constants, the induced positive operator
//!   `B_N f(x) = Σ f(α/N) p_α(x)`, and its localized evaluation;
//! * [`asymptotics`] — correction operators, Euler–MacLaurin and
//!   integration-by-parts identities, and convergence-order estimation.

pub mod asymptotics;
pub mod bernstein;
pub mod expr;
pub mod metric;
pub mod numeric;
pub mod polytope;
pub mod quad;

pub use asymptotics::{estimate_order, ExpansionReport};
pub use bernstein::{BernsteinEvaluator, EmpiricalMeasure, NormingTable};
pub use expr::Expr;
pub use metric::ToricMetric;
pub use polytope::{DelzantPolytope, Facet, LatticeSet};
pub use quad::QuadratureSpec;
