//! Adaptive quadrature on Delzant polytopes and their boundaries.
//!
//! The polytope is triangulated once by coning each facet to the vertex
//! centroid. Each simplex is mapped to the unit cube by a Duffy transform
//! and integrated with a tensor Gauss–Legendre rule; a dyadic composite
//! refinement of the cube (`2^L` sub-boxes per axis at level `L`) provides
//! the convergence ladder. Estimates at successive levels must agree to the
//! requested relative tolerance, measured against the simultaneously
//! accumulated L¹ mass so that near-cancelling integrals are not held to an
//! impossible standard.
//!
//! A log-domain variant integrates `exp(E)` for exponents `E` far outside
//! the representable range of IEEE doubles, using a streaming rescaled
//! accumulator per level.

use crate::numeric::NeumaierSum;
use crate::polytope::{DelzantPolytope, PolytopeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("quadrature did not converge after {levels} levels: last {value:.16e}, previous {previous:.16e}")]
    NoConvergence {
        value: f64,
        previous: f64,
        levels: usize,
    },
    #[error("integrand is not finite at {point:?}")]
    NonFiniteIntegrand { point: Vec<f64> },
    #[error("degenerate simplex with vertices {vertices:?}")]
    DegenerateSimplex { vertices: Vec<Vec<f64>> },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Parameters of the composite Gauss–Legendre scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Base Gauss–Legendre order; the per-axis node count is raised by the
    /// simplex dimension minus one to absorb the polynomial degree added by
    /// the Duffy map, so degree `2·order − 1` integrands are exact at level
    /// zero.
    pub order: usize,
    /// Number of dyadic refinement levels to attempt (level `L` splits each
    /// cube axis into `2^L` panels).
    pub max_levels: usize,
    /// Relative agreement required between consecutive levels.
    pub rel_tol: f64,
}

impl QuadratureSpec {
    /// Defaults tuned per dimension: the per-level cost grows like
    /// `(order·2^L)^dim`, so higher dimensions get fewer levels and a
    /// correspondingly looser tolerance.
    pub fn default_for_dim(dim: usize) -> Self {
        let (max_levels, rel_tol) = match dim {
            0 | 1 => (8, 1e-10),
            2 => (6, 1e-8),
            _ => (4, 1e-6),
        };
        QuadratureSpec {
            order: 16,
            max_levels,
            rel_tol,
        }
    }

    fn validate(&self) -> Result<(), QuadError> {
        if self.order < 2 || self.order > 64 {
            return Err(QuadError::InvalidSpec(format!(
                "order {} outside 2..=64",
                self.order
            )));
        }
        if self.max_levels < 2 || self.max_levels > 12 {
            return Err(QuadError::InvalidSpec(format!(
                "max_levels {} outside 2..=12",
                self.max_levels
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(QuadError::InvalidSpec(format!(
                "rel_tol {} must be positive and finite",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// A nondegenerate simplex in `R^d` with `d + 1` vertices.
#[derive(Clone, Debug)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
    // Edge matrix columns v_i − v_0, flattened row-major, with |det|.
    edges: Vec<f64>,
    absdet: f64,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self, QuadError> {
        let d = vertices.len().saturating_sub(1);
        if d == 0 || vertices.iter().any(|v| v.len() != d) {
            return Err(QuadError::DegenerateSimplex { vertices });
        }
        let mut edges = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                edges[j * d + i] = vertices[i + 1][j] - vertices[0][j];
            }
        }
        let absdet = det_abs(&edges, d);
        if absdet <= 0.0 || !absdet.is_finite() {
            return Err(QuadError::DegenerateSimplex { vertices });
        }
        Ok(Simplex {
            vertices,
            edges,
            absdet,
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn volume(&self) -> f64 {
        let mut fact = 1.0;
        for k in 2..=self.dim() {
            fact *= k as f64;
        }
        self.absdet / fact
    }

    /// Maps barycentric-style coordinates `t` (with `t ≥ 0`, `Σt ≤ 1`) into
    /// the simplex.
    fn point(&self, t: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.copy_from_slice(&self.vertices[0]);
        for j in 0..d {
            let mut acc = 0.0;
            for (i, ti) in t.iter().enumerate() {
                acc += self.edges[j * d + i] * ti;
            }
            out[j] += acc;
        }
    }
}

fn det_abs(a: &[f64], d: usize) -> f64 {
    match d {
        1 => a[0].abs(),
        2 => (a[0] * a[3] - a[1] * a[2]).abs(),
        3 => (a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
            + a[2] * (a[3] * a[7] - a[4] * a[6]))
            .abs(),
        _ => 0.0,
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        // Roots come out in descending order of x; map to ascending on [0,1].
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n` and derivative at `x` via the three-term
/// recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fans every facet of the polytope to the vertex centroid, producing a
/// simplicial cover with pairwise disjoint interiors.
pub fn triangulate(p: &DelzantPolytope) -> Result<Vec<Simplex>, QuadError> {
    let m = p.dim();
    let centroid = p.centroid();
    let mut out = Vec::new();
    for r in 0..p.num_facets() {
        let cycle = p.facet_cycle(r)?;
        match m {
            1 => {
                out.push(Simplex::new(vec![
                    p.vertices()[cycle[0]].clone(),
                    centroid.clone(),
                ])?);
            }
            2 => {
                out.push(Simplex::new(vec![
                    p.vertices()[cycle[0]].clone(),
                    p.vertices()[cycle[1]].clone(),
                    centroid.clone(),
                ])?);
            }
            _ => {
                for i in 1..cycle.len() - 1 {
                    out.push(Simplex::new(vec![
                        p.vertices()[cycle[0]].clone(),
                        p.vertices()[cycle[i]].clone(),
                        p.vertices()[cycle[i + 1]].clone(),
                        centroid.clone(),
                    ])?);
                }
            }
        }
    }
    Ok(out)
}

/// Visits every quadrature point of `simplex` at the given composite level,
/// calling `visit(x, w)` with strictly interior points and positive weights.
fn for_each_point<V>(
    simplex: &Simplex,
    order: usize,
    level: usize,
    visit: &mut V,
) -> Result<(), QuadError>
where
    V: FnMut(&[f64], f64) -> Result<(), QuadError>,
{
    let d = simplex.dim();
    let n = order + d - 1;
    let (gl_nodes, gl_weights) = gauss_legendre_01(n);
    let panels = 1usize << level;
    let per_axis = panels * n;
    let scale = 1.0 / panels as f64;

    let mut idx = vec![0usize; d];
    let mut u = vec![0.0; d];
    let mut t = vec![0.0; d];
    let mut x = vec![0.0; d];
    loop {
        let mut w = simplex.absdet;
        for i in 0..d {
            let panel = idx[i] / n;
            let node = idx[i] % n;
            u[i] = (panel as f64 + gl_nodes[node]) * scale;
            w *= gl_weights[node] * scale;
        }
        // Duffy map t_i = u_i · Π_{j<i} (1 − u_j); its Jacobian is the
        // product of those prefixes.
        let mut prefix = 1.0;
        let mut jac = 1.0;
        for i in 0..d {
            t[i] = u[i] * prefix;
            if i + 1 < d {
                jac *= prefix * (1.0 - u[i]);
                prefix *= 1.0 - u[i];
            }
        }
        simplex.point(&t, &mut x);
        visit(&x, w * jac)?;

        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(());
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn converged(curr: f64, prev: f64, scale: f64, rel_tol: f64) -> bool {
    (curr - prev).abs() <= rel_tol * scale.max(f64::MIN_POSITIVE)
}

/// Composite integration of `f` over a set of simplices, refining globally
/// until two consecutive levels agree. Returns the value and the per-level
/// history (the last entry is the accepted value).
fn integrate_simplices<F>(
    simplices: &[Simplex],
    spec: &QuadratureSpec,
    f: F,
) -> Result<(f64, Vec<f64>), QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    for level in 0..spec.max_levels {
        let mut total = NeumaierSum::new();
        let mut total_abs = NeumaierSum::new();
        for s in simplices {
            for_each_point(s, spec.order, level, &mut |x, w| {
                let v = f(x);
                if !v.is_finite() {
                    return Err(QuadError::NonFiniteIntegrand { point: x.to_vec() });
                }
                total.add(w * v);
                total_abs.add(w * v.abs());
                Ok(())
            })?;
        }
        let value = total.value();
        history.push(value);
        if let Some(p) = prev {
            if converged(value, p, value.abs().max(total_abs.value()), spec.rel_tol) {
                return Ok((value, history));
            }
        }
        prev = Some(value);
    }
    let value = *history.last().unwrap();
    let previous = history[history.len() - 2];
    Err(QuadError::NoConvergence {
        value,
        previous,
        levels: spec.max_levels,
    })
}

/// Streaming rescaled accumulator for `Σ w_i · exp(E_i)` in the log domain.
struct LogAccumulator {
    max: f64,
    sum: f64,
}

impl LogAccumulator {
    fn new() -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add_log_term(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t <= self.max {
            self.sum += (t - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        }
    }

    fn log_value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn integrate_simplices_log<F>(
    simplices: &[Simplex],
    spec: &QuadratureSpec,
    log_f: F,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let mut history: Vec<f64> = Vec::new();
    for level in 0..spec.max_levels {
        let mut acc = LogAccumulator::new();
        for s in simplices {
            for_each_point(s, spec.order, level, &mut |x, w| {
                let e = log_f(x);
                if e.is_nan() || e == f64::INFINITY {
                    return Err(QuadError::NonFiniteIntegrand { point: x.to_vec() });
                }
                acc.add_log_term(w.ln() + e);
                Ok(())
            })?;
        }
        let value = acc.log_value();
        if let Some(&p) = history.last() {
            if value == f64::NEG_INFINITY && p == f64::NEG_INFINITY {
                return Ok(value);
            }
            if (value - p).abs() <= spec.rel_tol {
                return Ok(value);
            }
        }
        history.push(value);
    }
    Err(QuadError::NoConvergence {
        value: history[history.len() - 1],
        previous: history[history.len() - 2],
        levels: spec.max_levels,
    })
}

/// `∫_P f dx` over the polytope interior.
pub fn integrate_polytope<F>(
    polytope: &DelzantPolytope,
    spec: &QuadratureSpec,
    f: F,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    let simplices = triangulate(polytope)?;
    integrate_simplices(&simplices, spec, f).map(|(v, _)| v)
}

/// As [`integrate_polytope`], also returning the per-level estimates (the
/// last entry is the accepted value). Useful for inspecting refinement
/// behaviour.
pub fn integrate_polytope_history<F>(
    polytope: &DelzantPolytope,
    spec: &QuadratureSpec,
    f: F,
) -> Result<(f64, Vec<f64>), QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    let simplices = triangulate(polytope)?;
    integrate_simplices(&simplices, spec, f)
}

/// `log ∫_P exp(E(x)) dx` for a log-scale integrand `E`, stable for
/// exponents far outside the range of IEEE doubles. Convergence is measured
/// as absolute agreement of the logarithms, i.e. relative agreement of the
/// underlying integrals.
pub fn integrate_log_polytope<F>(
    polytope: &DelzantPolytope,
    spec: &QuadratureSpec,
    log_f: F,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    let simplices = triangulate(polytope)?;
    integrate_simplices_log(&simplices, spec, log_f)
}

/// `∫_{F_r} f dσ` over a single facet with the Leray measure `dσ`, the
/// boundary measure whose density against facet Lebesgue measure is
/// `1/|v_r|₂` for the primitive inward normal `v_r`.
pub fn integrate_facet_leray<F>(
    polytope: &DelzantPolytope,
    facet: usize,
    spec: &QuadratureSpec,
    f: F,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    let chart = polytope.facet_chart(facet)?;
    let density = chart.leray_density();
    match chart.chart_dim() {
        0 => {
            let x = chart.map(&[]);
            let v = f(&x);
            if !v.is_finite() {
                return Err(QuadError::NonFiniteIntegrand { point: x });
            }
            Ok(density * v)
        }
        1 => {
            let seg = Simplex::new(chart.polygon().to_vec())?;
            let g = |t: &[f64]| f(&chart.map(t));
            integrate_simplices(&[seg], spec, g).map(|(v, _)| density * v)
        }
        _ => {
            let poly = chart.polygon();
            let mut simplices = Vec::new();
            for i in 1..poly.len() - 1 {
                simplices.push(Simplex::new(vec![
                    poly[0].clone(),
                    poly[i].clone(),
                    poly[i + 1].clone(),
                ])?);
            }
            let g = |t: &[f64]| f(&chart.map(t));
            integrate_simplices(&simplices, spec, g).map(|(v, _)| density * v)
        }
    }
}

/// `∮_{∂P} f dσ`: the Leray boundary integral summed over all facets.
pub fn integrate_boundary_leray<F>(
    polytope: &DelzantPolytope,
    spec: &QuadratureSpec,
    f: F,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    let mut total = NeumaierSum::new();
    for r in 0..polytope.num_facets() {
        total.add(integrate_facet_leray(polytope, r, spec, &f)?);
    }
    Ok(total.value())
}
