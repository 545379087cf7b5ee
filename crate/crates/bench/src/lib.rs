//! Shared fixtures for the pipeline benchmarks.

use toric_bernstein::{DelzantPolytope, Expr, NormingTable, QuadratureSpec, ToricMetric};

pub fn sigma2() -> ToricMetric {
    ToricMetric::canonical(DelzantPolytope::standard_simplex(2))
}

pub fn perturbed_interval() -> ToricMetric {
    ToricMetric::with_perturbation(
        DelzantPolytope::standard_simplex(1),
        Expr::parse("-0.2*x1^2", 1).expect("valid fixture expression"),
    )
    .expect("admissible fixture perturbation")
}

pub fn table(metric: &ToricMetric, n: u32) -> NormingTable {
    let spec = QuadratureSpec::default_for_dim(metric.dim());
    NormingTable::build(metric, n, &spec).expect("fixture table builds")
}
