//! End-to-end acceptance checks for the full pipeline, one test per
//! criterion. Each prints a single PASS/FAIL line with the observed worst
//! case.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use toric_bernstein::asymptotics::{
    bernstein_residual, donaldson_identity, estimate_order, euler_maclaurin, CorrectionOrder,
};
use toric_bernstein::bernstein::{
    norming_closed_form_simplex, norming_constant, BernsteinEvaluator, NormingTable,
};
use toric_bernstein::polytope::DelzantPolytope;
use toric_bernstein::quad::integrate_polytope;
use toric_bernstein::{Expr, QuadratureSpec, ToricMetric};

fn check(name: &str, pass: bool, detail: String) {
    if pass {
        println!("PASS {name}: {detail}");
    } else {
        println!("FAIL {name}: {detail}");
        panic!("{name} failed: {detail}");
    }
}

fn spec(m: usize) -> QuadratureSpec {
    QuadratureSpec::default_for_dim(m)
}

/// Exact multinomial coefficient `N! / (α₁!…α_m!(N−|α|)!)` via big
/// integers, the independent oracle for the classical basis.
fn multinomial(n: u32, alpha: &[i64]) -> f64 {
    let mut num = BigUint::from(1u32);
    for k in 2..=u64::from(n) {
        num *= k;
    }
    let mut rest = i64::from(n);
    let mut den = BigUint::from(1u32);
    for &a in alpha {
        rest -= a;
        for k in 2..=(a as u64) {
            den *= k;
        }
    }
    for k in 2..=(rest as u64) {
        den *= k;
    }
    (num / den).to_f64().unwrap()
}

/// Direct evaluation of the classical operator
/// `Σ_α (N α) x^α (1−|x|)^{N−|α|} f(α/N)` on a canonical simplex.
fn classical_oracle(
    p: &DelzantPolytope,
    n: u32,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> f64 {
    let lattice = p.lattice_points(n);
    let nf = n as f64;
    let rest_base: f64 = 1.0 - x.iter().sum::<f64>();
    let mut total = 0.0;
    for alpha in lattice.points() {
        let mut w = multinomial(n, alpha);
        let mut rest_exp = i64::from(n);
        for (a, xi) in alpha.iter().zip(x) {
            w *= xi.powi(*a as i32);
            rest_exp -= a;
        }
        w *= rest_base.powi(rest_exp as i32);
        let y: Vec<f64> = alpha.iter().map(|a| *a as f64 / nf).collect();
        total += w * f(&y);
    }
    total
}

#[test]
fn criterion_01_classical_oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(0xC1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let m = if case % 2 == 0 { 1 } else { 2 };
        let p = DelzantPolytope::standard_simplex(m);
        let metric = ToricMetric::canonical(p.clone());
        let n: u32 = rng.gen_range(1..=50);
        // A strictly positive random test function keeps the relative
        // comparison meaningful.
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let f = move |y: &[f64]| {
            let y2 = if y.len() > 1 { y[1] } else { 0.0 };
            2.0 + c[0] * y[0]
                + c[1] * (std::f64::consts::PI * y[0]).sin()
                + c[2] * (y[0] + y2).exp() / 3.0
                + c[3] * y[0] * y2
        };
        let x: Vec<f64> = loop {
            let cand: Vec<f64> = (0..m).map(|_| rng.gen_range(0.02..0.95)).collect();
            if cand.iter().sum::<f64>() <= 0.96 {
                break cand;
            }
        };
        let table = NormingTable::build(&metric, n, &spec(m)).unwrap();
        let ev = BernsteinEvaluator::new(&metric, &table).unwrap();
        let got = ev.evaluate(&f, &x).unwrap();
        let want = classical_oracle(&p, n, &f, &x);
        let rel = (got - want).abs() / want.abs();
        worst = worst.max(rel);
    }
    check(
        "criterion 1 (classical oracle)",
        worst <= 1e-10,
        format!("worst relative gap {worst:.3e} over 100 cases (tol 1e-10)"),
    );
}

#[test]
fn criterion_02_second_moment_law() {
    let p = DelzantPolytope::standard_simplex(1);
    let metric = ToricMetric::canonical(p);
    let mut worst: f64 = 0.0;
    for n in 1u32..=64 {
        let table = NormingTable::build(&metric, n, &spec(1)).unwrap();
        let ev = BernsteinEvaluator::new(&metric, &table).unwrap();
        for i in 1..=20 {
            let x = i as f64 / 21.0;
            let got = ev.evaluate(|y| y[0] * y[0], &[x]).unwrap();
            let want = x * x + x * (1.0 - x) / n as f64;
            worst = worst.max((got - want).abs());
        }
    }
    check(
        "criterion 2 (second-moment law)",
        worst <= 1e-12,
        format!("worst |B(x²) − x² − x(1−x)/N| = {worst:.3e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_03_expansion_order_with_corrections() {
    let metric = ToricMetric::canonical(DelzantPolytope::standard_simplex(1));
    let f = Expr::parse("sin(pi*x1)", 1).unwrap();
    let ns = [64u32, 128, 256, 512];
    let tables: Vec<NormingTable> = ns
        .iter()
        .map(|&n| NormingTable::build(&metric, n, &spec(1)).unwrap())
        .collect();
    let mut worst_slope = f64::NEG_INFINITY;
    let mut detail = String::new();
    for x in [0.3, 0.5, 0.7] {
        let samples: Vec<(u32, f64)> = ns
            .iter()
            .zip(&tables)
            .map(|(&n, table)| {
                let ev = BernsteinEvaluator::new(&metric, table).unwrap();
                let r = bernstein_residual(&ev, &f, &[x], CorrectionOrder::Second).unwrap();
                (n, r)
            })
            .collect();
        let p = estimate_order(&samples).unwrap();
        let slope = -p;
        worst_slope = worst_slope.max(slope);
        detail.push_str(&format!("x={x}: slope {slope:.3}; "));
    }
    check(
        "criterion 3 (corrected expansion order)",
        worst_slope <= -2.6,
        format!("{detail}(required ≤ −2.6)"),
    );
}

#[test]
fn criterion_04_denominator_oracle() {
    // (a) D = (N+m)!/N! exactly on canonical simplices.
    let mut worst: f64 = 0.0;
    for m in [1usize, 2] {
        let metric = ToricMetric::canonical(DelzantPolytope::standard_simplex(m));
        for n in 1u32..=16 {
            let table = NormingTable::build(&metric, n, &spec(m)).unwrap();
            let ev = BernsteinEvaluator::new(&metric, &table).unwrap();
            let mut exact = 1.0;
            for k in 1..=m {
                exact *= (n as f64) + k as f64;
            }
            for i in 0..10 {
                let t = (i as f64 + 0.5) / 10.0;
                let x: Vec<f64> = match m {
                    1 => vec![t],
                    _ => vec![t * 0.45, (1.0 - t) * 0.45],
                };
                let d = ev.log_denominator(&x).unwrap().exp();
                worst = worst.max((d / exact - 1.0).abs());
            }
        }
    }
    // (b) ∫_P D dx counts lattice points for a perturbed metric.
    let g = Expr::parse("-0.2*x1^2", 1).unwrap();
    let metric =
        ToricMetric::with_perturbation(DelzantPolytope::standard_simplex(1), g).unwrap();
    let n = 12u32;
    let table = NormingTable::build(&metric, n, &spec(1)).unwrap();
    let ev = BernsteinEvaluator::new(&metric, &table).unwrap();
    let integral = integrate_polytope(metric.polytope(), &spec(1), |x| {
        ev.log_denominator(x).map(f64::exp).unwrap_or(f64::NAN)
    })
    .unwrap();
    let count = metric.polytope().lattice_points(n).len() as f64;
    let count_gap = (integral - count).abs() / count;
    check(
        "criterion 4 (denominator oracle)",
        worst <= 1e-9 && count_gap <= 1e-7,
        format!(
            "worst relative D gap {worst:.3e} (tol 1e-9); ∫D vs |NP∩ℤ| relative gap {count_gap:.3e} (tol 1e-7)"
        ),
    );
}

#[test]
fn criterion_05_norming_constants() {
    let metric1 = ToricMetric::canonical(DelzantPolytope::standard_simplex(1));
    let pairs1: Vec<(u32, Vec<i64>)> = (1u32..=32)
        .flat_map(|n| (0..=i64::from(n)).map(move |a| (n, vec![a])))
        .collect();
    let worst1 = pairs1
        .par_iter()
        .map(|(n, alpha)| {
            let cf = norming_closed_form_simplex(*n, alpha).unwrap();
            let quad = norming_constant(&metric1, *n, alpha, &spec(1)).unwrap();
            (quad - cf).abs() / cf.abs().max(1.0)
        })
        .reduce(|| 0.0, f64::max);

    let metric2 = ToricMetric::canonical(DelzantPolytope::standard_simplex(2));
    let pairs2: Vec<(u32, Vec<i64>)> = (1u32..=16)
        .flat_map(|n| {
            metric2
                .polytope()
                .lattice_points(n)
                .points()
                .iter()
                .cloned()
                .map(move |alpha| (n, alpha))
                .collect::<Vec<_>>()
        })
        .collect();
    let worst2 = pairs2
        .par_iter()
        .map(|(n, alpha)| {
            let cf = norming_closed_form_simplex(*n, alpha).unwrap();
            let quad = norming_constant(&metric2, *n, alpha, &spec(2)).unwrap();
            (quad - cf).abs() / cf.abs().max(1.0)
        })
        .reduce(|| 0.0, f64::max);

    check(
        "criterion 5 (norming constants)",
        worst1 <= 1e-8 && worst2 <= 1e-6,
        format!(
            "worst relative logQ gap: m=1 {worst1:.3e} over {} entries (tol 1e-8), m=2 {worst2:.3e} over {} entries (tol 1e-6)",
            pairs1.len(),
            pairs2.len()
        ),
    );
}

#[test]
fn criterion_06_euler_maclaurin() {
    // (a) The count identity on Σ₂: residual is exactly 1.
    let s2 = DelzantPolytope::standard_simplex(2);
    let mut worst_count: f64 = 0.0;
    for n in [2u32, 3, 5, 8, 13, 21] {
        let report = euler_maclaurin(&s2, &spec(2), n, |_| 1.0).unwrap();
        worst_count = worst_count.max((report.residual() - 1.0).abs());
    }
    // (b) Residual growth order ≤ m − 2 + 0.3 across shapes and functions.
    let ns = [16u32, 32, 64, 128];
    let pi = std::f64::consts::PI;
    let cases: Vec<(DelzantPolytope, &str)> = vec![
        (DelzantPolytope::standard_simplex(1), "interval"),
        (DelzantPolytope::unit_cube(2), "square"),
        (DelzantPolytope::standard_simplex(2), "simplex"),
    ];
    let mut detail = String::new();
    let mut pass_orders = true;
    for (p, name) in &cases {
        let m = p.dim();
        let fs: Vec<(&str, Box<dyn Fn(&[f64]) -> f64>)> = if m == 1 {
            vec![
                ("sin(pi*x1)", Box::new(move |x: &[f64]| (pi * x[0]).sin())),
                ("exp(x1)", Box::new(|x: &[f64]| x[0].exp())),
            ]
        } else {
            vec![
                ("sin(pi*x1)", Box::new(move |x: &[f64]| (pi * x[0]).sin())),
                ("x1*x2", Box::new(|x: &[f64]| x[0] * x[1])),
                ("exp(x1)", Box::new(|x: &[f64]| x[0].exp())),
            ]
        };
        for (fname, f) in fs {
            let samples: Vec<(u32, f64)> = ns
                .iter()
                .map(|&n| {
                    let report = euler_maclaurin(p, &spec(m), n, &f).unwrap();
                    (n, report.residual())
                })
                .collect();
            let slope = -estimate_order(&samples).unwrap();
            let bound = m as f64 - 2.0 + 0.3;
            if slope > bound {
                pass_orders = false;
            }
            detail.push_str(&format!("{name}/{fname}: {slope:.2}; "));
        }
    }
    check(
        "criterion 6 (Euler-MacLaurin)",
        worst_count <= 1e-9 && pass_orders,
        format!(
            "count-identity gap {worst_count:.3e} (tol 1e-9); residual slopes {detail}(bound m−2+0.3)"
        ),
    );
}

#[test]
fn criterion_07_donaldson_identity() {
    let q1 = QuadratureSpec {
        order: 16,
        max_levels: 8,
        rel_tol: 1e-8,
    };
    let q2 = QuadratureSpec {
        order: 16,
        max_levels: 6,
        rel_tol: 1e-8,
    };
    let interval = DelzantPolytope::standard_simplex(1);
    let square = DelzantPolytope::unit_cube(2);
    let metrics: Vec<(String, ToricMetric, QuadratureSpec)> = vec![
        (
            "interval canonical".into(),
            ToricMetric::canonical(interval.clone()),
            q1,
        ),
        (
            "interval perturbed".into(),
            ToricMetric::with_perturbation(
                interval.clone(),
                Expr::parse("0.05*sin(3*x1)", 1).unwrap(),
            )
            .unwrap(),
            q1,
        ),
        (
            "square canonical".into(),
            ToricMetric::canonical(square.clone()),
            q2,
        ),
        (
            "square perturbed".into(),
            ToricMetric::with_perturbation(
                square.clone(),
                Expr::parse("0.05*sin(x1 + 2*x2)", 2).unwrap(),
            )
            .unwrap(),
            q2,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_name = String::new();
    for (name, metric, q) in &metrics {
        let m = metric.dim();
        let fnames: Vec<&str> = if m == 1 {
            vec!["1", "x1", "x1^2", "sin(pi*x1)"]
        } else {
            vec!["1", "x1", "x1^2", "x1*x2", "sin(pi*x1)"]
        };
        for fname in fnames {
            let f = Expr::parse(fname, m).unwrap();
            let report = donaldson_identity(metric, &f, q).unwrap();
            let r = report.residual();
            if r > worst {
                worst = r;
                worst_name = format!("{name}, f = {fname}");
            }
        }
    }
    check(
        "criterion 7 (Donaldson identity)",
        worst <= 1e-7,
        format!("worst residual {worst:.3e} at {worst_name} (tol 1e-7)"),
    );
}

#[test]
fn criterion_08_scalar_curvature_models() {
    let interval = ToricMetric::canonical(DelzantPolytope::standard_simplex(1));
    let square = ToricMetric::canonical(DelzantPolytope::unit_cube(2));
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let t = 0.05 + 0.09 * i as f64;
        let s = interval.scalar_curvature(&[t]).unwrap();
        worst = worst.max((s - 2.0).abs());
        let s = square.scalar_curvature(&[t, 0.91 - 0.08 * i as f64]).unwrap();
        worst = worst.max((s - 4.0).abs());
    }
    check(
        "criterion 8 (model curvatures)",
        worst <= 1e-6,
        format!("worst |S − S_exact| = {worst:.3e} at 10 points per model (tol 1e-6)"),
    );
}

#[test]
fn criterion_09_measure_properties() {
    let interval = DelzantPolytope::standard_simplex(1);
    let metrics: Vec<ToricMetric> = vec![
        ToricMetric::canonical(interval.clone()),
        ToricMetric::canonical(DelzantPolytope::standard_simplex(2)),
        ToricMetric::with_perturbation(interval.clone(), Expr::parse("-0.2*x1^2", 1).unwrap())
            .unwrap(),
    ];
    let mut tables: std::collections::HashMap<(usize, u32), NormingTable> =
        std::collections::HashMap::new();
    let mut rng = StdRng::seed_from_u64(0xACCE);
    let mut worst_mass: f64 = 0.0;
    let mut range_ok = true;
    for _ in 0..50 {
        let mid = rng.gen_range(0..metrics.len());
        let metric = &metrics[mid];
        let m = metric.dim();
        let n: u32 = rng.gen_range(1..=40);
        let x: Vec<f64> = loop {
            let cand: Vec<f64> = (0..m).map(|_| rng.gen_range(0.02..0.95)).collect();
            if cand.iter().sum::<f64>() <= 0.96 {
                break cand;
            }
        };
        let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |y: &[f64]| {
            let y2 = if y.len() > 1 { y[1] } else { 0.0 };
            c[0] + c[1] * y[0] + c[2] * y[0] * y[0] + c[3] * y2 + c[4] * y[0] * y2
        };
        let table = tables
            .entry((mid, n))
            .or_insert_with(|| NormingTable::build(metric, n, &spec(m)).unwrap());
        let ev = BernsteinEvaluator::new(metric, table).unwrap();
        let mu = ev.measure(&x).unwrap();
        assert!(mu.atoms().iter().all(|(_, w)| *w >= 0.0));
        worst_mass = worst_mass.max((mu.total_mass() - 1.0).abs());
        let b = ev.evaluate(f, &x).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (y, _) in mu.atoms() {
            let v = f(y);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(b >= lo - 1e-12 && b <= hi + 1e-12) {
            range_ok = false;
        }
    }
    // Variance link at N = 256 on the perturbed interval.
    let metric = &metrics[2];
    let table = NormingTable::build(metric, 256, &spec(1)).unwrap();
    let ev = BernsteinEvaluator::new(metric, &table).unwrap();
    let x = [0.37];
    let mu = ev.measure(&x).unwrap();
    let h = metric.inverse_hessian(&x).unwrap()[(0, 0)];
    let link = 256.0 * mu.central_moment(&[2]);
    let link_gap = (link - h).abs() / h;
    check(
        "criterion 9 (measure properties)",
        worst_mass <= 1e-12 && range_ok && link_gap <= 0.05,
        format!(
            "worst |Σw − 1| = {worst_mass:.3e} (tol 1e-12); range preserved: {range_ok}; variance link N·μ₂ vs H relative gap {link_gap:.3e} (tol 0.05)"
        ),
    );
}

#[test]
fn criterion_10_localization() {
    let pi = std::f64::consts::PI;
    let mut worst_gap: f64 = 0.0;
    let mut fractions = String::new();
    let mut frac_ok = true;

    let interval = ToricMetric::canonical(DelzantPolytope::standard_simplex(1));
    for n in [100u32, 400] {
        let table = NormingTable::build(&interval, n, &spec(1)).unwrap();
        let ev = BernsteinEvaluator::new(&interval, &table).unwrap();
        let f = |y: &[f64]| (pi * y[0]).sin();
        for x in [[0.5], [0.3]] {
            let full = ev.evaluate(f, &x).unwrap();
            let (trunc, stats) = ev.evaluate_truncated(f, &x, 10.0).unwrap();
            let fmax = ev
                .measure(&x)
                .unwrap()
                .atoms()
                .iter()
                .map(|(y, _)| f(y).abs())
                .fold(0.0, f64::max);
            worst_gap = worst_gap.max((full - trunc).abs() / fmax.max(1e-300));
            if n == 400 {
                let frac = stats.used_fraction();
                if frac > 0.40 {
                    frac_ok = false;
                }
                fractions.push_str(&format!("interval x={}: {:.1}%; ", x[0], 100.0 * frac));
            }
        }
    }

    let simplex = ToricMetric::canonical(DelzantPolytope::standard_simplex(2));
    for n in [100u32, 400] {
        let table = NormingTable::build(&simplex, n, &spec(2)).unwrap();
        let ev = BernsteinEvaluator::new(&simplex, &table).unwrap();
        let f = |y: &[f64]| (pi * y[0]).sin() * (1.0 + y[1]).ln();
        for x in [[1.0 / 3.0, 1.0 / 3.0], [0.2, 0.5]] {
            let full = ev.evaluate(f, &x).unwrap();
            let (trunc, stats) = ev.evaluate_truncated(f, &x, 10.0).unwrap();
            let fmax = ev
                .measure(&x)
                .unwrap()
                .atoms()
                .iter()
                .map(|(y, _)| f(y).abs())
                .fold(0.0, f64::max);
            worst_gap = worst_gap.max((full - trunc).abs() / fmax.max(1e-300));
            if n == 400 {
                let frac = stats.used_fraction();
                if frac > 0.40 {
                    frac_ok = false;
                }
                fractions.push_str(&format!(
                    "simplex x=({:.2},{:.2}): {:.1}%; ",
                    x[0],
                    x[1],
                    100.0 * frac
                ));
            }
        }
    }
    check(
        "criterion 10 (localization)",
        worst_gap <= 1e-10 && frac_ok,
        format!(
            "worst truncation gap {worst_gap:.3e}·‖f‖∞ (tol 1e-10); N=400 point fractions: {fractions}(bound 40%)"
        ),
    );
}
