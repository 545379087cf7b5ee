//! Toric Kähler metrics in symplectic (action) coordinates.
//!
//! A metric is described by its symplectic potential `u = u0 + g`, where
//! `u0 = Σ_r ℓ_r log ℓ_r` is the canonical potential built from the facet
//! affine functions of a Delzant polytope and `g` is a smooth perturbation
//! given as a closed-form expression. The metric Hessian `G = ∇²u` must be
//! positive definite on the interior; its inverse `H` carries the geometry
//! (scalar curvature, correction operators, integral identities).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::expr::{EvalError, Expr};
use crate::polytope::{DelzantPolytope, PolytopeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {point:?} is not in the interior of the polytope")]
    NotInterior { point: Vec<f64> },
    #[error("metric Hessian is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("perturbation is not finite at {point:?}: {detail}")]
    NonFinitePerturbation { point: Vec<f64>, detail: String },
    #[error("perturbation has {got} variable(s), polytope has dimension {expected}")]
    PerturbationArity { expected: usize, got: usize },
    #[error("moment inverse did not converge for {rho:?}: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        rho: Vec<f64>,
        iterations: usize,
        residual: f64,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Summary of a positive-definiteness sweep over an interior grid.
#[derive(Clone, Debug)]
pub struct ConvexityReport {
    points_checked: usize,
    failures: usize,
    first_failure: Option<Vec<f64>>,
}

impl ConvexityReport {
    pub fn is_convex(&self) -> bool {
        self.failures == 0
    }

    pub fn points_checked(&self) -> usize {
        self.points_checked
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    /// The first grid point where the Hessian failed to be positive
    /// definite, if any.
    pub fn first_failure(&self) -> Option<&[f64]> {
        self.first_failure.as_deref()
    }
}

/// A toric Kähler metric on a Delzant polytope, given by its symplectic
/// potential `u0 + g`.
#[derive(Clone, Debug)]
pub struct ToricMetric {
    polytope: DelzantPolytope,
    g: Expr,
    grad_g: Vec<Expr>,
    hess_g: Vec<Vec<Expr>>,
    canonical: bool,
}

impl ToricMetric {
    /// The canonical (Guillemin) metric: `g = 0`.
    pub fn canonical(polytope: DelzantPolytope) -> Self {
        let m = polytope.dim();
        let zero = Expr::zero(m);
        Self {
            polytope,
            g: zero.clone(),
            grad_g: vec![zero.clone(); m],
            hess_g: vec![vec![zero; m]; m],
            canonical: true,
        }
    }

    /// A perturbed metric `u = u0 + g`. The perturbation and its first and
    /// second derivatives are validated for finiteness on a coarse interior
    /// grid; positive definiteness of the full Hessian is checked separately
    /// via [`check_convexity`](Self::check_convexity) since it depends on
    /// where the metric is used.
    pub fn with_perturbation(polytope: DelzantPolytope, g: Expr) -> Result<Self, MetricError> {
        let m = polytope.dim();
        if g.nvars() != m {
            return Err(MetricError::PerturbationArity {
                expected: m,
                got: g.nvars(),
            });
        }
        let grad_g: Vec<Expr> = (0..m).map(|j| g.derivative(j)).collect();
        let hess_g: Vec<Vec<Expr>> = (0..m)
            .map(|j| (0..m).map(|k| grad_g[j].derivative(k)).collect())
            .collect();
        let metric = Self {
            polytope,
            g,
            grad_g,
            hess_g,
            canonical: false,
        };
        for point in metric.interior_grid(8) {
            let mut values = vec![metric.g.eval(&point)?];
            for e in &metric.grad_g {
                values.push(e.eval(&point)?);
            }
            for row in &metric.hess_g {
                for e in row {
                    values.push(e.eval(&point)?);
                }
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(MetricError::NonFinitePerturbation {
                    point,
                    detail: format!("value {bad}"),
                });
            }
        }
        Ok(metric)
    }

    pub fn polytope(&self) -> &DelzantPolytope {
        &self.polytope
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn perturbation(&self) -> &Expr {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), MetricError> {
        if x.len() != self.dim() {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Interior grid of roughly `res^m` points used for validation sweeps.
    fn interior_grid(&self, res: usize) -> Vec<Vec<f64>> {
        let m = self.dim();
        let (lo, hi) = self.polytope.bounding_box();
        let mut out = Vec::new();
        let mut idx = vec![0usize; m];
        loop {
            let point: Vec<f64> = (0..m)
                .map(|j| lo[j] + (idx[j] as f64 + 0.5) / res as f64 * (hi[j] - lo[j]))
                .collect();
            if let Ok(d) = self.polytope.distance_to_boundary(&point) {
                if d > 1e-9 * (1.0 + self.polytope.diameter()) {
                    out.push(point);
                }
            }
            let mut j = m;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < res {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// Symplectic potential `u(x) = Σ_r ℓ_r(x) log ℓ_r(x) + g(x)`.
    ///
    /// Continuous up to the boundary with the convention `0·log 0 = 0`;
    /// errors if any `ℓ_r(x) < 0`.
    pub fn symplectic_potential(&self, x: &[f64]) -> Result<f64, MetricError> {
        self.check_dim(x)?;
        let ells = self.polytope.ells(x)?;
        let mut sum = crate::numeric::NeumaierSum::new();
        for &l in &ells {
            if l < 0.0 {
                return Err(MetricError::NotInterior { point: x.to_vec() });
            }
            if l > 0.0 {
                sum.add(l * l.ln());
            }
        }
        sum.add(self.g.eval(x)?);
        Ok(sum.value())
    }

    /// Gradient of the symplectic potential (the moment coordinates of the
    /// complex picture): `∇u = Σ_r (1 + log ℓ_r) v_r + ∇g`. Interior only.
    pub fn grad_symplectic_potential(&self, x: &[f64]) -> Result<Vec<f64>, MetricError> {
        self.check_dim(x)?;
        let ells = self.interior_ells(x)?;
        let m = self.dim();
        let mut grad = vec![crate::numeric::NeumaierSum::new(); m];
        for (r, facet) in self.polytope.facets().iter().enumerate() {
            let c = 1.0 + ells[r].ln();
            for (j, acc) in grad.iter_mut().enumerate() {
                acc.add(c * facet.normal()[j] as f64);
            }
        }
        let mut out = Vec::with_capacity(m);
        for (j, acc) in grad.iter().enumerate() {
            out.push(acc.value() + self.grad_g[j].eval(x)?);
        }
        Ok(out)
    }

    fn interior_ells(&self, x: &[f64]) -> Result<Vec<f64>, MetricError> {
        let ells = self.polytope.ells(x)?;
        if ells.iter().any(|&l| l <= 0.0) {
            return Err(MetricError::NotInterior { point: x.to_vec() });
        }
        Ok(ells)
    }

    /// Metric Hessian `G(x) = Σ_r v_r v_rᵀ / ℓ_r(x) + ∇²g(x)`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, MetricError> {
        self.check_dim(x)?;
        let ells = self.interior_ells(x)?;
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for (r, facet) in self.polytope.facets().iter().enumerate() {
            let inv = 1.0 / ells[r];
            let v = facet.normal();
            for j in 0..m {
                for k in 0..m {
                    out[(j, k)] += inv * v[j] as f64 * v[k] as f64;
                }
            }
        }
        if !self.canonical {
            for j in 0..m {
                for k in 0..m {
                    out[(j, k)] += self.hess_g[j][k].eval(x)?;
                }
            }
        }
        Ok(out)
    }

    /// Inverse Hessian `H = G⁻¹` via Cholesky factorization.
    pub fn inverse_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, MetricError> {
        let g = self.hessian(x)?;
        let chol = Cholesky::new(g).ok_or_else(|| MetricError::NotPositiveDefinite {
            point: x.to_vec(),
        })?;
        Ok(chol.inverse())
    }

    /// Solves `∇u(x) = ρ` for the interior point `x` by damped Newton
    /// iteration, starting from the vertex centroid.
    pub fn moment_inverse(&self, rho: &[f64]) -> Result<Vec<f64>, MetricError> {
        self.check_dim(rho)?;
        let m = self.dim();
        let mut x = self.polytope.centroid();
        let mut residual = {
            let grad = self.grad_symplectic_potential(&x)?;
            DVector::from_iterator(m, (0..m).map(|j| grad[j] - rho[j]))
        };
        let tol = 1e-12;
        for iter in 0..200 {
            let res_norm = residual.amax();
            if res_norm <= tol {
                return Ok(x);
            }
            let g = self.hessian(&x)?;
            let chol = Cholesky::new(g).ok_or_else(|| MetricError::NotPositiveDefinite {
                point: x.clone(),
            })?;
            let step = chol.solve(&residual);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = (0..m).map(|j| x[j] - t * step[j]).collect();
                let inside = self
                    .polytope
                    .ells(&trial)
                    .map(|ells| ells.iter().all(|&l| l > 0.0))
                    .unwrap_or(false);
                if inside {
                    let grad = self.grad_symplectic_potential(&trial)?;
                    let trial_res =
                        DVector::from_iterator(m, (0..m).map(|j| grad[j] - rho[j]));
                    if trial_res.amax() < res_norm {
                        x = trial;
                        residual = trial_res;
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-18 {
                    return Err(MetricError::NoConvergence {
                        rho: rho.to_vec(),
                        iterations: iter,
                        residual: res_norm,
                    });
                }
            }
        }
        let res_norm = residual.amax();
        if res_norm <= tol {
            Ok(x)
        } else {
            Err(MetricError::NoConvergence {
                rho: rho.to_vec(),
                iterations: 200,
                residual: res_norm,
            })
        }
    }

    /// Kähler potential in complex coordinates: the Legendre transform
    /// `φ(ρ) = ⟨x, ρ⟩ − u(x)` evaluated at `x = (∇u)⁻¹(ρ)`.
    pub fn kahler_potential(&self, rho: &[f64]) -> Result<f64, MetricError> {
        let x = self.moment_inverse(rho)?;
        let mut sum = crate::numeric::NeumaierSum::new();
        for j in 0..self.dim() {
            sum.add(x[j] * rho[j]);
        }
        sum.add(-self.symplectic_potential(&x)?);
        Ok(sum.value())
    }

    /// Scalar curvature `S(x) = −Σ_{j,k} ∂²H_jk/∂x_j∂x_k` by central finite
    /// differences of the exact inverse Hessian.
    ///
    /// The step is `min(dist(x, ∂P)/2, 1e-4)`: shrinking near the boundary
    /// keeps every stencil point interior, and since `H` itself decays
    /// linearly toward facets the roundoff amplification `ε·|H|/h²` stays
    /// bounded as the step shrinks with the distance.
    pub fn scalar_curvature(&self, x: &[f64]) -> Result<f64, MetricError> {
        self.check_dim(x)?;
        let dist = self.polytope.distance_to_boundary(x)?;
        if dist <= 0.0 {
            return Err(MetricError::NotInterior { point: x.to_vec() });
        }
        let h = (dist / 2.0).min(1e-4);
        let m = self.dim();
        let mut sum = crate::numeric::NeumaierSum::new();
        let h_at = |p: &[f64]| self.inverse_hessian(p);
        // Diagonal second differences for (j, j); cross stencils for j < k,
        // counted twice by symmetry of H.
        let center = h_at(x)?;
        for j in 0..m {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let hp = h_at(&xp)?;
            let hm = h_at(&xm)?;
            sum.add(-(hp[(j, j)] - 2.0 * center[(j, j)] + hm[(j, j)]) / (h * h));
            for k in (j + 1)..m {
                let mut pp = x.to_vec();
                let mut pm = x.to_vec();
                let mut mp = x.to_vec();
                let mut mm = x.to_vec();
                pp[j] += h;
                pp[k] += h;
                pm[j] += h;
                pm[k] -= h;
                mp[j] -= h;
                mp[k] += h;
                mm[j] -= h;
                mm[k] -= h;
                let d2 = (h_at(&pp)?[(j, k)] - h_at(&pm)?[(j, k)] - h_at(&mp)?[(j, k)]
                    + h_at(&mm)?[(j, k)])
                    / (4.0 * h * h);
                sum.add(-2.0 * d2);
            }
        }
        Ok(sum.value())
    }

    /// Sweeps an interior grid of roughly `res^m` points and reports where
    /// the Hessian fails to be positive definite.
    pub fn check_convexity(&self, res: usize) -> Result<ConvexityReport, MetricError> {
        let mut points_checked = 0usize;
        let mut failures = 0usize;
        let mut first_failure = None;
        for point in self.interior_grid(res.max(2)) {
            points_checked += 1;
            let g = self.hessian(&point)?;
            if Cholesky::new(g).is_none() {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(point);
                }
            }
        }
        Ok(ConvexityReport {
            points_checked,
            failures,
            first_failure,
        })
    }
}
