//! The six subcommands. Every command takes a resolved [`RunConfig`] and
//! returns the process exit code (errors bubble up as [`CliError`]).

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use toric_bernstein::asymptotics::{
    bernstein_residual, donaldson_identity, estimate_order, euler_maclaurin,
    l2_classical_apply, CorrectionOrder,
};
use toric_bernstein::bernstein::{
    norming_closed_form_simplex, norming_constant, BernsteinError, BernsteinEvaluator,
    NormingMethod, NormingTable,
};
use toric_bernstein::quad::integrate_polytope;
use toric_bernstein::{DelzantPolytope, Expr, QuadratureSpec, ToricMetric};

use crate::config::{CliError, RunConfig};
use crate::report::{fmt_float, write_output, Check, Csv, OrderFit, Summary};

/// Deterministic row-major interior grid: per-axis equispaced points over
/// the bounding box shrunk by `margin · diameter`, filtered to points at
/// least that far from the boundary.
fn interior_grid(
    p: &DelzantPolytope,
    counts: &[usize],
    margin: f64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let (lo, hi) = p.bounding_box();
    let inset = margin * p.diameter();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(counts.len());
    for j in 0..counts.len() {
        let (a, b) = (lo[j] + inset, hi[j] - inset);
        if a > b {
            return Err(CliError::Config(format!(
                "margin {margin} leaves no interior room on axis {}",
                j + 1
            )));
        }
        let k = counts[j];
        let axis = if k == 1 {
            vec![0.5 * (a + b)]
        } else {
            (0..k)
                .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                .collect()
        };
        axes.push(axis);
    }
    let mut points = Vec::new();
    let mut idx = vec![0usize; counts.len()];
    'outer: loop {
        let x: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| axes[j][i]).collect();
        if p.distance_to_boundary(&x)
            .map_or(false, |d| d >= inset * (1.0 - 1e-9))
        {
            points.push(x);
        }
        // Odometer, last axis fastest.
        let mut j = counts.len();
        loop {
            if j == 0 {
                break 'outer;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    if points.is_empty() {
        return Err(CliError::Config(
            "no grid points survive the interior margin; lower --margin or raise --grid".into(),
        ));
    }
    Ok(points)
}

/// Loads a table for `(metric, n)` from the cache file when a compatible
/// entry exists, otherwise builds it (and saves it back when caching).
///
/// The cache file holds either a single table object or an array of them;
/// saving always writes the array form, keyed by dilation and the metric
/// fingerprints embedded in each table.
fn load_or_build_table(
    metric: &ToricMetric,
    n: u32,
    quad: &QuadratureSpec,
    cache: Option<&Path>,
) -> Result<NormingTable, CliError> {
    if let Some(path) = cache {
        if path.exists() {
            let text = fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parsing cache {}: {e}", path.display())))?;
            let candidates: Vec<&serde_json::Value> = match &value {
                serde_json::Value::Array(a) => a.iter().collect(),
                other => vec![other],
            };
            for entry in candidates {
                if entry.get("N").and_then(|v| v.as_u64()) == Some(u64::from(n)) {
                    if let Ok(table) = NormingTable::from_json(metric, entry) {
                        return Ok(table);
                    }
                    // A same-N entry for a different metric or a stale
                    // schema: fall through and rebuild.
                }
            }
        }
    }
    let table = NormingTable::build(metric, n, quad)?;
    if let Some(path) = cache {
        save_to_cache(path, &table)?;
    }
    Ok(table)
}

fn save_to_cache(path: &Path, table: &NormingTable) -> Result<(), CliError> {
    let mut tables: Vec<serde_json::Value> = if path.exists() {
        match serde_json::from_str::<serde_json::Value>(&fs::read_to_string(path)?) {
            Ok(serde_json::Value::Array(a)) => a,
            Ok(v @ serde_json::Value::Object(_)) => vec![v],
            _ => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let fresh = table.to_json();
    let key = |t: &serde_json::Value| {
        (
            t.get("N").and_then(|v| v.as_u64()).unwrap_or(0),
            t.get("facets")
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string(),
            t.get("perturbation")
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string(),
        )
    };
    let fresh_key = key(&fresh);
    tables.retain(|t| key(t) != fresh_key);
    tables.push(fresh);
    tables.sort_by_key(|t| key(t));
    let mut text = serde_json::to_string(&serde_json::Value::Array(tables))
        .map_err(|e| CliError::Config(format!("serializing cache: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn eval_as_plain(f: &Expr) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| f.eval(x).unwrap_or(f64::NAN)
}

/// Fits the decay slope of `log|r|` against `log N`, or `None` when fewer
/// than two residuals rise above machine noise (an exact series).
fn fit_slope(samples: &[(u32, f64)], noise: f64) -> Option<f64> {
    let live: Vec<(u32, f64)> = samples
        .iter()
        .filter(|(_, r)| r.abs() > noise)
        .copied()
        .collect();
    if live.len() < 2 {
        return None;
    }
    estimate_order(&live).ok().map(|p| -p)
}

fn det_i64(rows: &[&[i64]]) -> i64 {
    match rows.len() {
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        3 => {
            rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
                - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
                + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
        }
        _ => unreachable!("polytope dimensions are 1..=3"),
    }
}

fn fmt_point(x: &[f64]) -> String {
    let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", coords.join(", "))
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<i32, CliError> {
    let p = cfg.metric.polytope();
    let m = p.dim();
    let mut out = String::new();
    out.push_str(&format!(
        "polytope: dim {m}, {} facets, {} vertices\n",
        p.num_facets(),
        p.vertices().len()
    ));
    for (r, facet) in p.facets().iter().enumerate() {
        out.push_str(&format!(
            "facet {r}: normal {:?}, lambda {}, leray weight {}\n",
            facet.normal(),
            facet.offset(),
            fmt_float(1.0 / p.facet_norm(r))
        ));
    }
    // Facets meeting each vertex, for the Delzant determinant table.
    let mut vertex_facets: Vec<Vec<usize>> = vec![Vec::new(); p.vertices().len()];
    for r in 0..p.num_facets() {
        for &k in p.facet_vertex_indices(r) {
            vertex_facets[k].push(r);
        }
    }
    for (k, v) in p.vertices().iter().enumerate() {
        let rows: Vec<&[i64]> = vertex_facets[k]
            .iter()
            .map(|&r| p.facets()[r].normal())
            .collect();
        let det = det_i64(&rows);
        out.push_str(&format!(
            "vertex {k}: {} facets {:?} det {det}\n",
            fmt_point(v),
            vertex_facets[k]
        ));
    }

    let grid = interior_grid(p, &vec![17; m], cfg.margin)?;
    let mut min_eig = f64::INFINITY;
    for x in &grid {
        let g = cfg.metric.hessian(x)?;
        let eig = g.symmetric_eigen();
        for v in eig.eigenvalues.iter() {
            min_eig = min_eig.min(*v);
        }
    }
    out.push_str(&format!(
        "min Hessian eigenvalue over {} interior points: {}\n",
        grid.len(),
        fmt_float(min_eig)
    ));

    let report = cfg.metric.check_convexity(33)?;
    if report.is_convex() {
        out.push_str(&format!(
            "convexity: OK ({} points checked)\n",
            report.points_checked()
        ));
        print!("{out}");
        Ok(0)
    } else {
        out.push_str(&format!(
            "convexity: FAILED at {} ({} of {} points)\n",
            fmt_point(report.first_failure().unwrap_or(&[])),
            report.failures(),
            report.points_checked()
        ));
        print!("{out}");
        Err(CliError::Validation(
            "symplectic potential is not convex on the interior grid".into(),
        ))
    }
}

pub fn cmd_approx(cfg: &RunConfig) -> Result<i32, CliError> {
    let f = cfg.require_f()?;
    let p = cfg.metric.polytope();
    let m = p.dim();
    let grid = interior_grid(p, &cfg.grid, cfg.margin)?;

    let mut header: Vec<String> = vec!["N".into()];
    header.extend((1..=m).map(|j| format!("x{j}")));
    header.extend(["f", "B", "abs_err"].map(String::from));
    let mut csv = Csv::new(header);

    for &n in &cfg.ns {
        let table = load_or_build_table(&cfg.metric, n, &cfg.quad, cfg.cache.as_deref())?;
        let ev = BernsteinEvaluator::new(&cfg.metric, &table)?;
        let values: Vec<Result<(f64, f64), BernsteinError>> = grid
            .par_iter()
            .map(|x| {
                let fx = f.eval(x).map_err(BernsteinError::from)?;
                let bx = ev.evaluate(eval_as_plain(f), x)?;
                Ok((fx, bx))
            })
            .collect();
        for (x, value) in grid.iter().zip(values) {
            let (fx, bx) = value?;
            let mut row = vec![n.to_string()];
            row.extend(x.iter().map(|v| fmt_float(*v)));
            row.extend([fmt_float(fx), fmt_float(bx), fmt_float((bx - fx).abs())]);
            csv.push_row(row);
        }
        // Vertex rows exercise boundary continuity; vertices where the
        // operator degenerates (no lattice point at N·v) are skipped.
        for v in p.vertices() {
            let Ok(fx) = f.eval(v) else { continue };
            let Ok(bx) = ev.evaluate(eval_as_plain(f), v) else {
                continue;
            };
            if !bx.is_finite() {
                continue;
            }
            let mut row = vec![n.to_string()];
            row.extend(v.iter().map(|c| fmt_float(*c)));
            row.extend([fmt_float(fx), fmt_float(bx), fmt_float((bx - fx).abs())]);
            csv.push_row(row);
        }
    }
    write_output(cfg.out.as_deref(), &csv.render())?;
    Ok(0)
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<i32, CliError> {
    let f = cfg.require_f()?;
    let p = cfg.metric.polytope();
    let grid = interior_grid(p, &cfg.grid, cfg.margin)?;
    // The second correction operator is defined for the classical interval
    // metric only; everywhere else the column is omitted.
    let with_l2 = l2_classical_apply(&cfg.metric, f, &grid[0]).is_ok();
    let orders: Vec<(CorrectionOrder, &str, f64)> = if with_l2 {
        vec![
            (CorrectionOrder::None, "raw", -1.0),
            (CorrectionOrder::First, "correction1", -2.0),
            (CorrectionOrder::Second, "correction2", -3.0),
        ]
    } else {
        vec![
            (CorrectionOrder::None, "raw", -1.0),
            (CorrectionOrder::First, "correction1", -2.0),
        ]
    };

    let mut header: Vec<String> = vec!["N".into()];
    header.extend(orders.iter().map(|(_, name, _)| format!("res_{name}")));
    let mut csv = Csv::new(header);

    let mut series: Vec<Vec<(u32, f64)>> = vec![Vec::new(); orders.len()];
    let mut fscale: f64 = 1.0;
    for x in &grid {
        fscale = fscale.max(f.eval(x).map_err(BernsteinError::from)?.abs());
    }
    for &n in &cfg.ns {
        let table = load_or_build_table(&cfg.metric, n, &cfg.quad, cfg.cache.as_deref())?;
        let ev = BernsteinEvaluator::new(&cfg.metric, &table)?;
        let mut row = vec![n.to_string()];
        for (k, (order, _, _)) in orders.iter().enumerate() {
            let residuals: Vec<f64> = grid
                .par_iter()
                .map(|x| bernstein_residual(&ev, f, x, *order))
                .collect::<Result<_, _>>()?;
            let sup = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
            series[k].push((n, sup));
            row.push(fmt_float(sup));
        }
        csv.push_row(row);
    }

    let noise = 1e-12 * (1.0 + fscale);
    let fits: Vec<OrderFit> = if cfg.ns.len() >= 2 {
        orders
            .iter()
            .enumerate()
            .map(|(k, (_, name, expected))| {
                let fitted = fit_slope(&series[k], noise);
                let pass = match fitted {
                    Some(slope) => slope <= expected + 0.4,
                    None => true, // at machine noise: exact
                };
                OrderFit {
                    name: (*name).to_string(),
                    fitted,
                    expected: *expected,
                    pass,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let summary = Summary {
        checks: Vec::new(),
        orders: fits,
    };

    write_output(cfg.out.as_deref(), &csv.render())?;
    write_output(cfg.summary.as_deref(), &summary.render())?;
    Ok(if summary.all_pass() { 0 } else { 1 })
}

pub fn cmd_riemann(cfg: &RunConfig) -> Result<i32, CliError> {
    let f = cfg.require_f()?;
    let p = cfg.metric.polytope();
    let m = p.dim();

    let mut csv = Csv::new(vec![
        "N",
        "lattice_sum",
        "volume_term",
        "boundary_term",
        "residual",
    ]);
    let mut samples: Vec<(u32, f64)> = Vec::new();
    let mut scale: f64 = 1.0;
    for &n in &cfg.ns {
        let report = euler_maclaurin(p, &cfg.quad, n, eval_as_plain(f))?;
        let r = report.residual();
        samples.push((n, r));
        scale = scale.max(report.lattice_sum.abs());
        csv.push_row(vec![
            n.to_string(),
            fmt_float(report.lattice_sum),
            fmt_float(report.volume_term),
            fmt_float(report.boundary_term),
            fmt_float(r),
        ]);
    }

    let expected = m as f64 - 2.0;
    let fits = if cfg.ns.len() >= 2 {
        let fitted = fit_slope(&samples, 1e-12 * scale);
        let pass = match fitted {
            Some(slope) => slope <= expected + 0.3,
            None => true,
        };
        vec![OrderFit {
            name: "residual".into(),
            fitted,
            expected,
            pass,
        }]
    } else {
        Vec::new()
    };
    let summary = Summary {
        checks: Vec::new(),
        orders: fits,
    };

    write_output(cfg.out.as_deref(), &csv.render())?;
    write_output(cfg.summary.as_deref(), &summary.render())?;
    Ok(if summary.all_pass() { 0 } else { 1 })
}

/// `true` when the polytope is the unit cube `[0,1]^m` in its standard
/// facet presentation.
fn is_unit_cube(p: &DelzantPolytope) -> bool {
    let reference = DelzantPolytope::unit_cube(p.dim());
    if p.num_facets() != reference.num_facets() {
        return false;
    }
    let key = |f: &toric_bernstein::Facet| (f.normal().to_vec(), f.offset());
    let mut ours: Vec<_> = p.facets().iter().map(key).collect();
    let mut theirs: Vec<_> = reference.facets().iter().map(key).collect();
    ours.sort();
    theirs.sort();
    ours == theirs
}

pub fn cmd_identities(cfg: &RunConfig) -> Result<i32, CliError> {
    let default_f = Expr::parse("x1^2", cfg.dim()).expect("valid default");
    let f = cfg.f.as_ref().unwrap_or(&default_f);
    let metric = &cfg.metric;
    let p = metric.polytope();
    let m = p.dim();
    let mut checks: Vec<Check> = Vec::new();

    // The scalar curvature entering the identity is differentiated
    // numerically, which floors the achievable residual near 1e-8.
    let mut dquad = cfg.quad;
    dquad.rel_tol = dquad.rel_tol.max(1e-8);
    let don = donaldson_identity(metric, f, &dquad)?;
    checks.push(Check {
        name: "donaldson".into(),
        residual: don.residual(),
        tolerance: 1e-7,
        pass: don.residual() <= 1e-7,
    });

    let model_curvature = if metric.is_canonical() && p.is_standard_simplex() {
        Some((m * (m + 1)) as f64)
    } else if metric.is_canonical() && is_unit_cube(p) {
        Some(2.0 * m as f64)
    } else {
        None
    };
    if let Some(expected) = model_curvature {
        let points = interior_grid(p, &vec![4; m], 0.1)?;
        let mut worst: f64 = 0.0;
        for x in points.iter().take(10) {
            worst = worst.max((metric.scalar_curvature(x)? - expected).abs());
        }
        checks.push(Check {
            name: "scalar_curvature_model".into(),
            residual: worst,
            tolerance: 1e-6,
            pass: worst <= 1e-6,
        });
    }

    let n_small = cfg.ns[0];
    let table = load_or_build_table(metric, n_small, &cfg.quad, cfg.cache.as_deref())?;
    let ev = BernsteinEvaluator::new(metric, &table)?;

    if metric.is_canonical() && p.is_standard_simplex() {
        let mut exact = 1.0;
        for k in 1..=m {
            exact *= f64::from(n_small) + k as f64;
        }
        let points = interior_grid(p, &vec![4; m], 0.05)?;
        let mut worst: f64 = 0.0;
        for x in points.iter().take(10) {
            let d = ev.log_denominator(x)?.exp();
            worst = worst.max((d / exact - 1.0).abs());
        }
        checks.push(Check {
            name: "denominator_model".into(),
            residual: worst,
            tolerance: 1e-9,
            pass: worst <= 1e-9,
        });
    }

    let integral = integrate_polytope(p, &cfg.quad, |x| {
        ev.log_denominator(x).map(f64::exp).unwrap_or(f64::NAN)
    })?;
    let count = p.lattice_points(n_small).len() as f64;
    let gap = (integral - count).abs() / count;
    checks.push(Check {
        name: "denominator_count".into(),
        residual: gap,
        tolerance: 1e-7,
        pass: gap <= 1e-7,
    });

    let summary = Summary {
        checks,
        orders: Vec::new(),
    };
    write_output(cfg.out.as_deref(), &summary.render())?;
    Ok(if summary.all_pass() { 0 } else { 1 })
}

pub fn cmd_norming(cfg: &RunConfig) -> Result<i32, CliError> {
    let metric = &cfg.metric;
    let m = metric.dim();
    let classical = metric.is_canonical() && metric.polytope().is_standard_simplex();

    let mut header: Vec<String> = vec!["N".into()];
    header.extend((1..=m).map(|j| format!("alpha{j}")));
    header.extend(["logQ_quad", "logQ_cf", "rel_err", "method"].map(String::from));
    let mut csv = Csv::new(header);

    for &n in &cfg.ns {
        let table = load_or_build_table(metric, n, &cfg.quad, cfg.cache.as_deref())?;
        let method = match table.method() {
            NormingMethod::ClosedForm => "cf",
            NormingMethod::Quadrature => "quad",
        };
        let alphas: Vec<&[i64]> = table.alphas().collect();
        let quads: Vec<f64> = if table.method() == NormingMethod::Quadrature {
            (0..alphas.len()).map(|i| table.log_q(i)).collect()
        } else {
            alphas
                .par_iter()
                .map(|alpha| norming_constant(metric, n, alpha, &cfg.quad))
                .collect::<Result<_, _>>()?
        };
        for (alpha, quad) in alphas.iter().zip(quads) {
            let mut row = vec![n.to_string()];
            row.extend(alpha.iter().map(|a| a.to_string()));
            row.push(fmt_float(quad));
            if classical {
                let cf = norming_closed_form_simplex(n, alpha)?;
                row.push(fmt_float(cf));
                row.push(fmt_float((quad - cf).abs() / cf.abs().max(1.0)));
            } else {
                row.push(String::new());
                row.push(String::new());
            }
            row.push(method.to_string());
            csv.push_row(row);
        }
    }
    write_output(cfg.out.as_deref(), &csv.render())?;
    Ok(0)
}
