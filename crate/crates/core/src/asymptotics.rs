//! Asymptotic expansions, correction operators, and integral identities.
//!
//! The operators here quantify the large-dilation behaviour of the
//! Bernstein operator and its partition function:
//!
//! * `B_N f = f + L₁f/N + L₂f/N² + O(N⁻³)` with the universal first-order
//!   correction `L₁f = ½⟨H, ∇²f⟩` built from the inverse metric Hessian,
//!   and (for the classical operator on the unit interval) the explicit
//!   second-order correction `L₂`;
//! * `D_N(x) = N^m (1 + S(x)/(2N) + O(N⁻²))` relating the partition
//!   function to scalar curvature;
//! * the Euler–MacLaurin two-term approximation of lattice sums,
//!   `Σ_α f(α/N) = N^m ∫_P f dx + (N^{m−1}/2) ∮_{∂P} f dσ + O(N^{m−2})`;
//! * the curvature integral identity
//!   `∫_P ⟨H, ∇²f⟩ dx + ∫_P S f dx = ∮_{∂P} f dσ`, which couples all three
//!   ingredients and serves as a global consistency check.

use crate::bernstein::{BernsteinError, BernsteinEvaluator, EmpiricalMeasure};
use crate::expr::{EvalError, Expr};
use crate::metric::{MetricError, ToricMetric};
use crate::numeric::NeumaierSum;
use crate::polytope::{DelzantPolytope, PolytopeError};
use crate::quad::{
    integrate_boundary_leray, integrate_polytope, QuadError, QuadratureSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("unsupported metric for this operator: {0}")]
    UnsupportedMetric(String),
    #[error("order estimation needs at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("residual {value} at sample {index} has no logarithm; cannot fit an order")]
    NonPositiveResidual { index: usize, value: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// First-order correction operator `L₁f(x) = ½ Σ_{jk} H_jk(x) ∂_j∂_k f(x)`,
/// defined for every toric metric.
pub fn l1_apply(metric: &ToricMetric, f: &Expr, x: &[f64]) -> Result<f64, AsymptoticsError> {
    let m = metric.dim();
    let h = metric.inverse_hessian(x)?;
    let mut sum = NeumaierSum::new();
    for j in 0..m {
        let fj = f.derivative(j);
        for k in j..m {
            let d2 = fj.derivative(k).eval(x)?;
            let weight = if k == j { 0.5 } else { 1.0 };
            sum.add(weight * h[(j, k)] * d2);
        }
    }
    Ok(sum.value())
}

/// Second-order correction for the classical operator on the canonical unit
/// interval:
///
/// ```text
/// L₂f = (1/6)(x − x²)(1 − 2x)·f‴ + (1/8)(x − x²)²·f⁗
/// ```
///
/// Any other metric or polytope is rejected: the corresponding tensor
/// coefficients are metric-specific and only the classical ones are
/// implemented.
pub fn l2_classical_apply(
    metric: &ToricMetric,
    f: &Expr,
    x: &[f64],
) -> Result<f64, AsymptoticsError> {
    if !(metric.is_canonical()
        && metric.dim() == 1
        && metric.polytope().is_standard_simplex())
    {
        return Err(AsymptoticsError::UnsupportedMetric(
            "second-order correction is implemented for the canonical metric on the unit interval only"
                .into(),
        ));
    }
    let t = x[0];
    let w = t - t * t;
    let f3 = f.derivative_seq(&[0, 0, 0]).eval(x)?;
    let f4 = f.derivative_seq(&[0, 0, 0, 0]).eval(x)?;
    Ok(w * (1.0 - 2.0 * t) * f3 / 6.0 + w * w * f4 / 8.0)
}

/// First Bergman expansion coefficient `a₁(x) = S(x)/2`.
pub fn bergman_a1(metric: &ToricMetric, x: &[f64]) -> Result<f64, AsymptoticsError> {
    Ok(metric.scalar_curvature(x)? / 2.0)
}

/// How many correction terms to subtract in residual computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionOrder {
    /// Raw residual against the target.
    None,
    /// Subtract the `1/N` term.
    First,
    /// Subtract the `1/N` and `1/N²` terms.
    Second,
}

/// Residual of the Bernstein approximation after subtracting the requested
/// corrections:
///
/// * `None`:   `B_N f(x) − f(x)`                       `= O(1/N)`
/// * `First`:  `B_N f(x) − f(x) − L₁f(x)/N`            `= O(1/N²)`
/// * `Second`: `… − L₂f(x)/N²` (classical interval)    `= O(1/N³)`
pub fn bernstein_residual(
    evaluator: &BernsteinEvaluator<'_>,
    f: &Expr,
    x: &[f64],
    correction: CorrectionOrder,
) -> Result<f64, AsymptoticsError> {
    let nf = evaluator.n() as f64;
    let b = evaluator.evaluate(|y| f.eval(y).unwrap_or(f64::NAN), x)?;
    let mut residual = b - f.eval(x)?;
    if correction != CorrectionOrder::None {
        residual -= l1_apply(evaluator.metric(), f, x)? / nf;
    }
    if correction == CorrectionOrder::Second {
        residual -= l2_classical_apply(evaluator.metric(), f, x)? / (nf * nf);
    }
    Ok(residual)
}

/// Residual of the partition-function expansion:
///
/// * `None`:  `D_N(x)/N^m − 1`            `= O(1/N)`
/// * `First`: `… − S(x)/(2N)`             `= O(1/N²)`
///
/// (`Second` is not available: the `1/N²` Bergman coefficient is not
/// implemented.)
pub fn bergman_residual(
    evaluator: &BernsteinEvaluator<'_>,
    x: &[f64],
    correction: CorrectionOrder,
) -> Result<f64, AsymptoticsError> {
    let nf = evaluator.n() as f64;
    let m = evaluator.metric().dim() as i32;
    let d = evaluator.log_denominator(x)?.exp();
    let mut residual = d / nf.powi(m) - 1.0;
    match correction {
        CorrectionOrder::None => {}
        CorrectionOrder::First => residual -= bergman_a1(evaluator.metric(), x)? / nf,
        CorrectionOrder::Second => {
            return Err(AsymptoticsError::UnsupportedMetric(
                "no second-order partition-function coefficient is implemented".into(),
            ))
        }
    }
    Ok(residual)
}

/// The pieces of the Euler–MacLaurin two-term approximation of a lattice
/// sum `Σ_{α ∈ NP ∩ ℤ^m} f(α/N)`.
#[derive(Clone, Copy, Debug)]
pub struct EulerMaclaurinReport {
    /// The exact lattice sum.
    pub lattice_sum: f64,
    /// `N^m ∫_P f dx`
    pub volume_term: f64,
    /// `(N^{m−1}/2) ∮_{∂P} f dσ`
    pub boundary_term: f64,
}

impl EulerMaclaurinReport {
    pub fn two_term(&self) -> f64 {
        self.volume_term + self.boundary_term
    }

    /// `lattice_sum − (volume + boundary)`, which is `O(N^{m−2})`.
    pub fn residual(&self) -> f64 {
        self.lattice_sum - self.two_term()
    }
}

/// Plain lattice sum `Σ_{α ∈ NP ∩ ℤ^m} f(α/N)`.
pub fn riemann_sum<F>(polytope: &DelzantPolytope, n: u32, f: F) -> Result<f64, AsymptoticsError>
where
    F: Fn(&[f64]) -> f64,
{
    let lattice = polytope.lattice_points(n);
    let nf = n as f64;
    let mut sum = NeumaierSum::new();
    let mut y = vec![0.0; polytope.dim()];
    for alpha in lattice.points() {
        for (yj, a) in y.iter_mut().zip(alpha) {
            *yj = *a as f64 / nf;
        }
        sum.add(f(&y));
    }
    Ok(sum.value())
}

/// Computes the lattice sum and its two-term Euler–MacLaurin approximation.
pub fn euler_maclaurin<F>(
    polytope: &DelzantPolytope,
    spec: &QuadratureSpec,
    n: u32,
    f: F,
) -> Result<EulerMaclaurinReport, AsymptoticsError>
where
    F: Fn(&[f64]) -> f64,
{
    let m = polytope.dim() as i32;
    let nf = n as f64;
    let lattice_sum = riemann_sum(polytope, n, &f)?;
    let volume = integrate_polytope(polytope, spec, &f)?;
    let boundary = integrate_boundary_leray(polytope, spec, &f)?;
    Ok(EulerMaclaurinReport {
        lattice_sum,
        volume_term: nf.powi(m) * volume,
        boundary_term: nf.powi(m - 1) / 2.0 * boundary,
    })
}

/// The three integrals of the curvature identity
/// `∫_P ⟨H, ∇²f⟩ dx + ∫_P S f dx = ∮_{∂P} f dσ`.
#[derive(Clone, Copy, Debug)]
pub struct DonaldsonReport {
    pub hessian_term: f64,
    pub curvature_term: f64,
    pub boundary_term: f64,
}

impl DonaldsonReport {
    pub fn residual(&self) -> f64 {
        (self.hessian_term + self.curvature_term - self.boundary_term).abs()
    }
}

/// Evaluates both sides of the curvature integral identity for a smooth
/// test function. The scalar curvature is computed by finite differences of
/// the inverse Hessian, which floors the achievable agreement near `1e-8`;
/// pass a spec with `rel_tol` no tighter than that.
pub fn donaldson_identity(
    metric: &ToricMetric,
    f: &Expr,
    spec: &QuadratureSpec,
) -> Result<DonaldsonReport, AsymptoticsError> {
    let m = metric.dim();
    let mut d2 = Vec::with_capacity(m * m);
    for j in 0..m {
        let fj = f.derivative(j);
        for k in 0..m {
            d2.push(fj.derivative(k));
        }
    }
    // Interior quadrature points cannot trigger metric or expression
    // failures for a validated metric; NaN propagation lets the quadrature
    // engine pinpoint any that do.
    let hessian_term = integrate_polytope(metric.polytope(), spec, |x| {
        let h = match metric.inverse_hessian(x) {
            Ok(h) => h,
            Err(_) => return f64::NAN,
        };
        let mut sum = 0.0;
        for j in 0..m {
            for k in 0..m {
                sum += h[(j, k)] * d2[j * m + k].eval(x).unwrap_or(f64::NAN);
            }
        }
        sum
    })?;
    let curvature_term = integrate_polytope(metric.polytope(), spec, |x| {
        match metric.scalar_curvature(x) {
            Ok(s) => s * f.eval(x).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    })?;
    let boundary_term = integrate_boundary_leray(metric.polytope(), spec, |x| {
        f.eval(x).unwrap_or(f64::NAN)
    })?;
    Ok(DonaldsonReport {
        hessian_term,
        curvature_term,
        boundary_term,
    })
}

/// All central moments `μ_β = Σ_α w_α (α/N − x)^β` with `1 ≤ |β| ≤
/// max_order`, in lexicographic order of `β`.
pub fn measure_moments(
    measure: &EmpiricalMeasure,
    max_order: u32,
) -> Vec<(Vec<u32>, f64)> {
    let m = measure.base_point().len();
    let mut out = Vec::new();
    let mut beta = vec![0u32; m];
    loop {
        // Advance the odometer (last coordinate fastest) over all β with
        // every entry ≤ max_order; filter by total order below.
        let mut j = m;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            beta[j] += 1;
            if beta[j] <= max_order {
                break;
            }
            beta[j] = 0;
        }
        let total: u32 = beta.iter().sum();
        if total >= 1 && total <= max_order {
            out.push((beta.clone(), measure.central_moment(&beta)));
        }
    }
}

/// Least-squares decay order of `|residual| ≈ C·N^{−p}`, fitted on all
/// samples and on the last three (the tail fit discounts preasymptotic
/// contamination at small `N`).
#[derive(Clone, Debug)]
pub struct ExpansionReport {
    pub samples: Vec<(u32, f64)>,
    /// Fitted `p` over all samples.
    pub fitted_order: f64,
    /// Fitted `p` over the three largest dilations, when available.
    pub tail_order: Option<f64>,
}

/// Fits the decay order `p` with `log|r| = log C − p·log N` by least
/// squares.
pub fn estimate_order(samples: &[(u32, f64)]) -> Result<f64, AsymptoticsError> {
    if samples.len() < 2 {
        return Err(AsymptoticsError::TooFewSamples {
            got: samples.len(),
            need: 2,
        });
    }
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for (i, (n, r)) in samples.iter().enumerate() {
        if *n == 0 {
            return Err(AsymptoticsError::TooFewSamples {
                got: samples.len(),
                need: 2,
            });
        }
        let a = r.abs();
        if a == 0.0 || !a.is_finite() {
            return Err(AsymptoticsError::NonPositiveResidual {
                index: i,
                value: *r,
            });
        }
        xs.push((*n as f64).ln());
        ys.push(a.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(-sxy / sxx)
}

pub fn expansion_report(samples: &[(u32, f64)]) -> Result<ExpansionReport, AsymptoticsError> {
    let fitted_order = estimate_order(samples)?;
    let tail_order = if samples.len() >= 3 {
        let mut sorted = samples.to_vec();
        sorted.sort_by_key(|(n, _)| *n);
        let tail = &sorted[sorted.len() - 3..];
        Some(estimate_order(tail)?)
    } else {
        None
    };
    Ok(ExpansionReport {
        samples: samples.to_vec(),
        fitted_order,
        tail_order,
    })
}
