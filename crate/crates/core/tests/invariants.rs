//! Property tests for structural invariants: expression round-trips and
//! derivatives, probability-measure properties of the operator weights,
//! quadrature exactness on polynomials, lattice enumeration, and moment-map
//! round-trips.

use std::sync::OnceLock;

use num_rational::Rational64;
use proptest::prelude::*;

use toric_bernstein::bernstein::{BernsteinEvaluator, NormingTable};
use toric_bernstein::polytope::{validate_delzant, DelzantPolytope, Facet};
use toric_bernstein::quad::integrate_polytope;
use toric_bernstein::{Expr, QuadratureSpec, ToricMetric};

// ---------------------------------------------------------------------------
// Expressions

/// Random well-formed expression text over bounded, smooth operations, so
/// values and derivatives stay moderate on `[0.1, 0.9]^nvars`.
fn expr_text(nvars: usize) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-20i32..=20).prop_map(|k| format!("{:.1}", f64::from(k) / 10.0)),
        (1..=nvars).prop_map(|i| format!("x{i}")),
    ];
    leaf.prop_recursive(2, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner, 2u32..=3).prop_map(|(a, k)| format!("({a})^{k}")),
        ]
    })
}

proptest! {
    /// Printing an expression and parsing it back evaluates identically.
    #[test]
    fn expr_display_parse_round_trip(
        text in expr_text(2),
        u in 0.1f64..0.9,
        v in 0.1f64..0.9,
    ) {
        let e = Expr::parse(&text, 2).unwrap();
        let printed = e.to_string();
        let reparsed = Expr::parse(&printed, 2).unwrap();
        let a = e.eval(&[u, v]).unwrap();
        let b = reparsed.eval(&[u, v]).unwrap();
        prop_assert!(
            (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
            "{text} printed as {printed}: {a} vs {b}"
        );
    }

    /// Symbolic derivatives agree with central finite differences.
    #[test]
    fn expr_derivative_matches_finite_difference(
        text in expr_text(2),
        u in 0.1f64..0.9,
        v in 0.1f64..0.9,
    ) {
        let e = Expr::parse(&text, 2).unwrap();
        let h = 1e-5;
        for var in 0..2 {
            let sym = e.derivative(var).eval(&[u, v]).unwrap();
            let mut hi = [u, v];
            let mut lo = [u, v];
            hi[var] += h;
            lo[var] -= h;
            let fd = (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * h);
            let scale = 1.0 + sym.abs() + e.eval(&[u, v]).unwrap().abs();
            prop_assert!(
                (sym - fd).abs() <= 1e-3 * scale,
                "d/dx{} of {text} at ({u}, {v}): symbolic {sym}, FD {fd}",
                var + 1
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Operator weights

/// Prebuilt evaluator pool shared across proptest cases: (metric, table)
/// for canonical interval, canonical 2-simplex, and a perturbed interval,
/// each at a few dilations.
fn pool() -> &'static Vec<(ToricMetric, NormingTable)> {
    static POOL: OnceLock<Vec<(ToricMetric, NormingTable)>> = OnceLock::new();
    POOL.get_or_init(|| {
        let metrics = vec![
            ToricMetric::canonical(DelzantPolytope::standard_simplex(1)),
            ToricMetric::canonical(DelzantPolytope::standard_simplex(2)),
            ToricMetric::with_perturbation(
                DelzantPolytope::standard_simplex(1),
                Expr::parse("0.1*sin(2*x1)", 1).unwrap(),
            )
            .unwrap(),
        ];
        let mut out = Vec::new();
        for metric in metrics {
            for n in [3u32, 7, 16, 64] {
                let spec = QuadratureSpec::default_for_dim(metric.dim());
                let table = NormingTable::build(&metric, n, &spec).unwrap();
                out.push((metric.clone(), table));
            }
        }
        out
    })
}

proptest! {
    /// At every interior point the operator weights form a probability
    /// measure and the operator is range-preserving and exact on constants.
    #[test]
    fn weights_form_probability_measure(
        which in 0usize..12,
        u in 0.02f64..0.95,
        t in 0.02f64..0.95,
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let (metric, table) = &pool()[which];
        let m = metric.dim();
        let x: Vec<f64> = if m == 1 {
            vec![u]
        } else {
            vec![u * 0.96, t * (0.96 - u * 0.96)]
        };
        let ev = BernsteinEvaluator::new(metric, table).unwrap();
        let mu = ev.measure(&x).unwrap();
        prop_assert!(mu.atoms().iter().all(|(_, w)| *w >= 0.0));
        prop_assert!((mu.total_mass() - 1.0).abs() <= 1e-12);

        let constant = ev.evaluate(|_| c[0], &x).unwrap();
        prop_assert!((constant - c[0]).abs() <= 1e-12 * (1.0 + c[0].abs()));

        let f = |y: &[f64]| {
            let y2 = if y.len() > 1 { y[1] } else { 0.0 };
            c[0] + c[1] * y[0] + c[2] * (y[0] * y[0] - y2)
        };
        let b = ev.evaluate(f, &x).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (y, _) in mu.atoms() {
            lo = lo.min(f(y));
            hi = hi.max(f(y));
        }
        prop_assert!(b >= lo - 1e-12 && b <= hi + 1e-12);
    }

    /// On the canonical interval the normalized weights are the binomial
    /// measure, so `N·μ₂ = x(1−x)` holds to rounding.
    #[test]
    fn binomial_variance_identity(u in 0.05f64..0.95) {
        // Pool entry 3 is the canonical interval at N = 64.
        let (metric, table) = &pool()[3];
        prop_assert!(metric.is_canonical() && metric.dim() == 1);
        let n = table.n() as f64;
        let ev = BernsteinEvaluator::new(metric, table).unwrap();
        let mu = ev.measure(&[u]).unwrap();
        prop_assert!((n * mu.central_moment(&[2]) - u * (1.0 - u)).abs() <= 1e-10);
    }
}

// ---------------------------------------------------------------------------
// Quadrature

proptest! {
    /// The composite scheme integrates monomials exactly on the 2-simplex
    /// (Dirichlet formula) and the unit square (product formula).
    #[test]
    fn quadrature_integrates_monomials_exactly(
        a in 0u32..=4,
        b in 0u32..=4,
        on_square in any::<bool>(),
        coeff in 0.5f64..2.0,
    ) {
        let (p, exact) = if on_square {
            (
                DelzantPolytope::unit_cube(2),
                1.0 / (f64::from(a + 1) * f64::from(b + 1)),
            )
        } else {
            // ∫_{Σ₂} x^a y^b dx dy = a! b! / (a + b + 2)!
            let mut v = 1.0;
            for k in 1..=a {
                v *= f64::from(k);
            }
            for k in 1..=b {
                v *= f64::from(k);
            }
            for k in 1..=(a + b + 2) {
                v /= f64::from(k);
            }
            (DelzantPolytope::standard_simplex(2), v)
        };
        let spec = QuadratureSpec::default_for_dim(2);
        let got = integrate_polytope(&p, &spec, |x| {
            coeff * x[0].powi(a as i32) * x[1].powi(b as i32)
        })
        .unwrap();
        prop_assert!(
            (got - coeff * exact).abs() <= 1e-11 * (1.0 + coeff * exact),
            "x^{a} y^{b}: got {got}, want {}",
            coeff * exact
        );
    }
}

// ---------------------------------------------------------------------------
// Lattice enumeration

fn rational_interval() -> DelzantPolytope {
    validate_delzant(
        1,
        vec![
            Facet::new(vec![1], Rational64::new(0, 1)).unwrap(),
            Facet::new(vec![-1], Rational64::new(-5, 2)).unwrap(),
        ],
    )
    .unwrap()
}

proptest! {
    /// Lattice point sets are sorted, deduplicated, contained in the dilated
    /// polytope, and have the count predicted by closed-form formulas.
    #[test]
    fn lattice_enumeration_is_exact(kind in 0usize..4, n in 1u32..=30) {
        let (p, expected): (DelzantPolytope, u64) = match kind {
            0 => (DelzantPolytope::standard_simplex(1), u64::from(n) + 1),
            1 => (
                DelzantPolytope::standard_simplex(2),
                u64::from(n + 1) * u64::from(n + 2) / 2,
            ),
            2 => (
                DelzantPolytope::unit_cube(2),
                u64::from(n + 1) * u64::from(n + 1),
            ),
            _ => (rational_interval(), u64::from(5 * n / 2) + 1),
        };
        let lattice = p.lattice_points(n);
        prop_assert_eq!(lattice.len() as u64, expected);
        let nf = f64::from(n);
        let mut prev: Option<&Vec<i64>> = None;
        for alpha in lattice.points() {
            if let Some(q) = prev {
                prop_assert!(q < alpha, "not strictly lex-sorted");
            }
            prev = Some(alpha);
            let x: Vec<f64> = alpha.iter().map(|&a| a as f64 / nf).collect();
            prop_assert!(p.contains(&x), "{alpha:?}/{n} outside polytope");
        }
    }
}

// ---------------------------------------------------------------------------
// Moment map

proptest! {
    /// `∇u ∘ moment_inverse` is the identity on log-coordinate space, and on
    /// canonical simplices the Kähler potential has its closed form.
    #[test]
    fn moment_map_round_trip(
        r1 in -4.0f64..4.0,
        r2 in -4.0f64..4.0,
        which in 0usize..3,
    ) {
        let metric = match which {
            0 => ToricMetric::canonical(DelzantPolytope::standard_simplex(1)),
            1 => ToricMetric::canonical(DelzantPolytope::standard_simplex(2)),
            _ => ToricMetric::with_perturbation(
                DelzantPolytope::standard_simplex(1),
                Expr::parse("0.1*sin(2*x1)", 1).unwrap(),
            )
            .unwrap(),
        };
        let rho: Vec<f64> = if metric.dim() == 1 {
            vec![r1]
        } else {
            vec![r1, r2]
        };
        let x = metric.moment_inverse(&rho).unwrap();
        let grad = metric.grad_symplectic_potential(&x).unwrap();
        for (g, r) in grad.iter().zip(&rho) {
            prop_assert!((g - r).abs() <= 1e-9, "∇u({x:?}) = {grad:?} ≠ {rho:?}");
        }
        if metric.is_canonical() {
            let want = (1.0 + rho.iter().map(|r| r.exp()).sum::<f64>()).ln();
            let got = metric.kahler_potential(&rho).unwrap();
            prop_assert!((got - want).abs() <= 1e-9);
        }
    }
}
