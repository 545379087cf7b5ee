//! Generalized Bernstein operators attached to a toric Kähler metric.
//!
//! For a dilation `N` and a lattice point `α ∈ NP ∩ ℤ^m`, the basis weight
//! is `exp E(α, x)` with
//!
//! ```text
//! E(α, x) = Σ_r c_r(α)·log ℓ_r(x) + ⟨α − Nx, v̄⟩
//!         + N·g(x) + ⟨α − Nx, ∇g(x)⟩,
//! c_r(α)  = ⟨α, v_r⟩ − N λ_r,     v̄ = Σ_r v_r,
//! ```
//!
//! which on the interior equals `N·(u(x) + ⟨α/N − x, ∇u(x)⟩)` for the
//! symplectic potential `u = Σ ℓ_r log ℓ_r + g`, but stays continuous up to
//! the boundary (coefficients `c_r` vanish exactly on the facets through
//! `α/N`, so no `0·log 0` ambiguity arises). Each weight is normalized by
//! its integral `Q_α = ∫_P exp E(α, y) dy` and by the partition function
//! `D_N(x) = Σ_α exp E(α, x)/Q_α`, making the operator
//!
//! ```text
//! B_N f(x) = D_N(x)⁻¹ Σ_α f(α/N) · exp E(α, x) / Q_α
//! ```
//!
//! exact on constants. On the standard simplex with the canonical metric
//! the weights reduce to the classical multinomial Bernstein basis and the
//! norming constants have a factorial closed form, used both as a fast path
//! and as an oracle for the quadrature path.

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::metric::{MetricError, ToricMetric};
use crate::numeric::{log_factorial_table, logsumexp, NeumaierSum};
use crate::polytope::PolytopeError;
use crate::quad::{integrate_log_polytope, QuadError, QuadratureSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BernsteinError {
    #[error("dilation must be positive")]
    InvalidDilation,
    #[error("point {point:?} lies outside the polytope")]
    PointOutside { point: Vec<f64> },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lattice point {alpha:?} is not in the dilated polytope")]
    InvalidLatticePoint { alpha: Vec<i64> },
    #[error("the dilated polytope contains no lattice points")]
    EmptyLattice,
    #[error("no lattice points fall in the truncation window around {point:?} (radius {radius})")]
    EmptyWindow { point: Vec<f64>, radius: f64 },
    #[error("closed-form norming constants require the standard simplex")]
    NotSimplex,
    #[error(
        "norming cross-check failed at {alpha:?}: closed form {closed_form}, quadrature {quadrature}"
    )]
    NormingMismatch {
        alpha: Vec<i64>,
        closed_form: f64,
        quadrature: f64,
    },
    #[error("norming table does not match this metric: {detail}")]
    TableMismatch { detail: String },
    #[error("invalid norming cache: {0}")]
    CacheInvalid(String),
    #[error("function value is not finite at {point:?}")]
    NonFiniteFunction { point: Vec<f64> },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// A real number in log form: `sign · exp(log_abs)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub log_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

/// Per-lattice-point data of the weight exponent that depends only on the
/// polytope and dilation: exact facet coefficients and the linear term.
#[derive(Clone, Debug)]
struct WeightProfile {
    alpha: Vec<i64>,
    /// `c_r(α) = ⟨α, v_r⟩ − N λ_r ≥ 0`, with exact zeros preserved.
    c: Vec<f64>,
    alpha_dot_vbar: f64,
}

/// Per-evaluation-point data shared by all lattice points.
struct WeightPoint {
    log_ells: Vec<f64>,
    /// `−N⟨x, v̄⟩ + N g(x) − N⟨x, ∇g(x)⟩`
    linear: f64,
    grad_g: Vec<f64>,
}

struct WeightContext<'a> {
    metric: &'a ToricMetric,
    n: u32,
    vbar: Vec<f64>,
}

impl<'a> WeightContext<'a> {
    fn new(metric: &'a ToricMetric, n: u32) -> Result<Self, BernsteinError> {
        if n == 0 {
            return Err(BernsteinError::InvalidDilation);
        }
        let m = metric.dim();
        let mut vbar = vec![0.0; m];
        for facet in metric.polytope().facets() {
            for j in 0..m {
                vbar[j] += facet.normal()[j] as f64;
            }
        }
        Ok(WeightContext { metric, n, vbar })
    }

    fn profile(&self, alpha: &[i64]) -> Result<WeightProfile, BernsteinError> {
        let p = self.metric.polytope();
        if alpha.len() != p.dim() {
            return Err(BernsteinError::DimensionMismatch {
                expected: p.dim(),
                got: alpha.len(),
            });
        }
        let mut c = Vec::with_capacity(p.num_facets());
        for facet in p.facets() {
            let mut dot: i128 = 0;
            for (a, v) in alpha.iter().zip(facet.normal()) {
                dot += *a as i128 * *v as i128;
            }
            let q = *facet.offset().denom() as i128;
            let pnum = *facet.offset().numer() as i128;
            // c_r = dot − N·p/q = (dot·q − N·p)/q, tested exactly in i128.
            let num = dot * q - self.n as i128 * pnum;
            if num < 0 {
                return Err(BernsteinError::InvalidLatticePoint {
                    alpha: alpha.to_vec(),
                });
            }
            c.push(num as f64 / q as f64);
        }
        let alpha_dot_vbar: f64 = alpha
            .iter()
            .zip(&self.vbar)
            .map(|(a, v)| *a as f64 * v)
            .sum();
        Ok(WeightProfile {
            alpha: alpha.to_vec(),
            c,
            alpha_dot_vbar,
        })
    }

    /// Point data for any `x ∈ P` (boundary allowed: non-positive facet
    /// values record `−∞` logs, which kill exactly the weights with
    /// `c_r > 0` there).
    fn point(&self, x: &[f64]) -> Result<WeightPoint, BernsteinError> {
        let metric = self.metric;
        let ells = metric.polytope().ells(x)?;
        let log_ells = ells
            .iter()
            .map(|&l| if l > 0.0 { l.ln() } else { f64::NEG_INFINITY })
            .collect();
        let nf = self.n as f64;
        let mut linear = NeumaierSum::new();
        for j in 0..x.len() {
            linear.add(-nf * x[j] * self.vbar[j]);
        }
        let grad_g: Vec<f64> = if metric.is_canonical() {
            vec![0.0; x.len()]
        } else {
            let g = metric.perturbation().eval(x)?;
            let mut grad = Vec::with_capacity(x.len());
            for j in 0..x.len() {
                grad.push(metric.perturbation().derivative(j).eval(x)?);
            }
            linear.add(nf * g);
            for j in 0..x.len() {
                linear.add(-nf * x[j] * grad[j]);
            }
            grad
        };
        Ok(WeightPoint {
            log_ells,
            linear: linear.value(),
            grad_g,
        })
    }

    fn exponent(&self, profile: &WeightProfile, point: &WeightPoint) -> f64 {
        let mut sum = NeumaierSum::new();
        for (cr, log_ell) in profile.c.iter().zip(&point.log_ells) {
            if *cr != 0.0 {
                if *log_ell == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                sum.add(cr * log_ell);
            }
        }
        sum.add(profile.alpha_dot_vbar);
        sum.add(point.linear);
        for (a, gg) in profile.alpha.iter().zip(&point.grad_g) {
            if *gg != 0.0 {
                sum.add(*a as f64 * gg);
            }
        }
        sum.value()
    }
}

/// The weight exponent `E(α, x)` for one lattice point; continuous up to
/// the boundary of the polytope.
pub fn weight_exponent(
    metric: &ToricMetric,
    n: u32,
    alpha: &[i64],
    x: &[f64],
) -> Result<f64, BernsteinError> {
    let ctx = WeightContext::new(metric, n)?;
    check_point(metric, x)?;
    let profile = ctx.profile(alpha)?;
    let point = ctx.point(x)?;
    Ok(ctx.exponent(&profile, &point))
}

fn check_point(metric: &ToricMetric, x: &[f64]) -> Result<(), BernsteinError> {
    if x.len() != metric.dim() {
        return Err(BernsteinError::DimensionMismatch {
            expected: metric.dim(),
            got: x.len(),
        });
    }
    if !metric.polytope().contains(x) {
        return Err(BernsteinError::PointOutside { point: x.to_vec() });
    }
    Ok(())
}

/// `log Q_α = log ∫_P exp E(α, y) dy` by log-domain quadrature.
pub fn norming_constant(
    metric: &ToricMetric,
    n: u32,
    alpha: &[i64],
    spec: &QuadratureSpec,
) -> Result<f64, BernsteinError> {
    let ctx = WeightContext::new(metric, n)?;
    let profile = ctx.profile(alpha)?;
    let log_q = integrate_log_polytope(metric.polytope(), spec, |x| {
        match ctx.point(x) {
            Ok(point) => ctx.exponent(&profile, &point),
            // Interior quadrature points cannot fail; map defensively to NaN
            // so the quadrature reports the location.
            Err(_) => f64::NAN,
        }
    })?;
    Ok(log_q)
}

/// Closed form on the standard simplex with the canonical metric:
/// `Q_α = α₁!···α_m!(N−|α|)! / (N+m)!`, returned as `log Q_α`.
pub fn norming_closed_form_simplex(n: u32, alpha: &[i64]) -> Result<f64, BernsteinError> {
    let m = alpha.len();
    let mut total: i64 = 0;
    for &a in alpha {
        if a < 0 {
            return Err(BernsteinError::InvalidLatticePoint {
                alpha: alpha.to_vec(),
            });
        }
        total += a;
    }
    if total > n as i64 {
        return Err(BernsteinError::InvalidLatticePoint {
            alpha: alpha.to_vec(),
        });
    }
    let table = log_factorial_table(n as usize + m);
    let mut log_q = NeumaierSum::new();
    for &a in alpha {
        log_q.add(table[a as usize]);
    }
    log_q.add(table[(n as i64 - total) as usize]);
    log_q.add(-table[n as usize + m]);
    Ok(log_q.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormingMethod {
    ClosedForm,
    Quadrature,
}

/// Norming constants `log Q_α` for all lattice points of a dilation,
/// with the per-point weight profiles cached for fast evaluation.
#[derive(Clone, Debug)]
pub struct NormingTable {
    n: u32,
    method: NormingMethod,
    profiles: Vec<WeightProfile>,
    log_q: Vec<f64>,
    index: HashMap<Vec<i64>, usize>,
    /// Fingerprint of the metric the table was built for.
    perturbation: String,
    facets_digest: String,
}

fn facets_digest(metric: &ToricMetric) -> String {
    let parts: Vec<String> = metric
        .polytope()
        .facets()
        .iter()
        .map(|f| format!("{:?}:{}", f.normal(), f.offset()))
        .collect();
    parts.join(";")
}

impl NormingTable {
    /// Builds the table: closed form on the canonical standard simplex
    /// (cross-checked against quadrature at five pseudorandomly chosen
    /// entries), full quadrature otherwise.
    pub fn build(
        metric: &ToricMetric,
        n: u32,
        spec: &QuadratureSpec,
    ) -> Result<Self, BernsteinError> {
        let ctx = WeightContext::new(metric, n)?;
        let lattice = metric.polytope().lattice_points(n);
        if lattice.is_empty() {
            return Err(BernsteinError::EmptyLattice);
        }
        let profiles: Vec<WeightProfile> = lattice
            .points()
            .iter()
            .map(|alpha| ctx.profile(alpha))
            .collect::<Result<_, _>>()?;

        let closed_form = metric.polytope().is_standard_simplex() && metric.is_canonical();
        let (method, log_q) = if closed_form {
            let log_q: Vec<f64> = lattice
                .points()
                .iter()
                .map(|alpha| norming_closed_form_simplex(n, alpha))
                .collect::<Result<_, _>>()?;
            // Cross-check a few entries against the quadrature path.
            let mut rng = StdRng::seed_from_u64(0x5eed ^ n as u64);
            let count = lattice.len().min(5);
            let mut picked = Vec::with_capacity(count);
            while picked.len() < count {
                let i = rng.gen_range(0..lattice.len());
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            for i in picked {
                let alpha = &lattice.points()[i];
                let quad = norming_constant(metric, n, alpha, spec)?;
                let tol = (1.0 + log_q[i].abs()) * spec.rel_tol.max(1e-7);
                if (log_q[i] - quad).abs() > tol {
                    return Err(BernsteinError::NormingMismatch {
                        alpha: alpha.clone(),
                        closed_form: log_q[i],
                        quadrature: quad,
                    });
                }
            }
            (NormingMethod::ClosedForm, log_q)
        } else {
            let log_q: Vec<f64> = lattice
                .points()
                .par_iter()
                .map(|alpha| norming_constant(metric, n, alpha, spec))
                .collect::<Result<_, _>>()?;
            (NormingMethod::Quadrature, log_q)
        };

        let index = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.alpha.clone(), i))
            .collect();
        Ok(NormingTable {
            n,
            method,
            profiles,
            log_q,
            index,
            perturbation: metric.perturbation().to_string(),
            facets_digest: facets_digest(metric),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn method(&self) -> NormingMethod {
        self.method
    }

    pub fn alphas(&self) -> impl Iterator<Item = &[i64]> {
        self.profiles.iter().map(|p| p.alpha.as_slice())
    }

    /// `log Q_α` by lattice point, or `None` if `α` is not in the table.
    pub fn lookup(&self, alpha: &[i64]) -> Option<f64> {
        self.index.get(alpha).map(|&i| self.log_q[i])
    }

    pub fn log_q(&self, idx: usize) -> f64 {
        self.log_q[idx]
    }

    /// Serializes the table, including fingerprints of the polytope and
    /// perturbation so a stale cache cannot silently be reused.
    pub fn to_json(&self) -> serde_json::Value {
        let method = match self.method {
            NormingMethod::ClosedForm => "cf",
            NormingMethod::Quadrature => "quad",
        };
        let entries: Vec<serde_json::Value> = self
            .profiles
            .iter()
            .zip(&self.log_q)
            .map(|(p, q)| {
                serde_json::json!({
                    "alpha": p.alpha,
                    "logQ": q,
                    "method": method,
                })
            })
            .collect();
        serde_json::json!({
            "version": 1,
            "N": self.n,
            "perturbation": self.perturbation,
            "facets": self.facets_digest,
            "entries": entries,
        })
    }

    /// Restores a table for `metric` from its serialized form, validating
    /// the dilation, fingerprints, and the full lattice point set.
    pub fn from_json(
        metric: &ToricMetric,
        value: &serde_json::Value,
    ) -> Result<Self, BernsteinError> {
        let obj = value
            .as_object()
            .ok_or_else(|| BernsteinError::CacheInvalid("not a JSON object".into()))?;
        let n = obj
            .get("N")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| BernsteinError::CacheInvalid("missing dilation N".into()))?;
        let n = u32::try_from(n)
            .map_err(|_| BernsteinError::CacheInvalid("dilation out of range".into()))?;
        let perturbation = obj
            .get("perturbation")
            .and_then(|v| v.as_str())
            .ok_or_else(|| BernsteinError::CacheInvalid("missing perturbation".into()))?;
        if perturbation != metric.perturbation().to_string() {
            return Err(BernsteinError::CacheInvalid(format!(
                "cache was built for perturbation {perturbation:?}, metric has {:?}",
                metric.perturbation().to_string()
            )));
        }
        let digest = obj
            .get("facets")
            .and_then(|v| v.as_str())
            .ok_or_else(|| BernsteinError::CacheInvalid("missing facet digest".into()))?;
        if digest != facets_digest(metric) {
            return Err(BernsteinError::CacheInvalid(
                "cache was built for a different polytope".into(),
            ));
        }
        let entries = obj
            .get("entries")
            .and_then(|v| v.as_array())
            .ok_or_else(|| BernsteinError::CacheInvalid("missing entries".into()))?;

        let ctx = WeightContext::new(metric, n)?;
        let lattice = metric.polytope().lattice_points(n);
        if entries.len() != lattice.len() {
            return Err(BernsteinError::CacheInvalid(format!(
                "cache has {} entries, lattice has {}",
                entries.len(),
                lattice.len()
            )));
        }
        let mut profiles = Vec::with_capacity(entries.len());
        let mut log_q = Vec::with_capacity(entries.len());
        let mut method: Option<NormingMethod> = None;
        for (entry, alpha_expected) in entries.iter().zip(lattice.points()) {
            let entry_method = match entry.get("method").and_then(|v| v.as_str()) {
                Some("cf") => NormingMethod::ClosedForm,
                Some("quad") => NormingMethod::Quadrature,
                other => {
                    return Err(BernsteinError::CacheInvalid(format!(
                        "unknown method {other:?}"
                    )))
                }
            };
            if *method.get_or_insert(entry_method) != entry_method {
                return Err(BernsteinError::CacheInvalid(
                    "mixed methods in one table".into(),
                ));
            }
            let alpha: Vec<i64> = entry
                .get("alpha")
                .and_then(|v| v.as_array())
                .ok_or_else(|| BernsteinError::CacheInvalid("entry missing alpha".into()))?
                .iter()
                .map(|v| {
                    v.as_i64()
                        .ok_or_else(|| BernsteinError::CacheInvalid("bad alpha entry".into()))
                })
                .collect::<Result<_, _>>()?;
            if &alpha != alpha_expected {
                return Err(BernsteinError::CacheInvalid(format!(
                    "entry order mismatch: cache {alpha:?}, lattice {alpha_expected:?}"
                )));
            }
            let q = entry
                .get("logQ")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| BernsteinError::CacheInvalid("entry missing logQ".into()))?;
            if !q.is_finite() {
                return Err(BernsteinError::CacheInvalid("non-finite logQ".into()));
            }
            profiles.push(ctx.profile(&alpha)?);
            log_q.push(q);
        }
        let index = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.alpha.clone(), i))
            .collect();
        let method =
            method.ok_or_else(|| BernsteinError::CacheInvalid("empty entry list".into()))?;
        Ok(NormingTable {
            n,
            method,
            profiles,
            log_q,
            index,
            perturbation: perturbation.to_string(),
            facets_digest: digest.to_string(),
        })
    }
}

/// The discrete probability measure `μ_x = Σ_α w_α(x) δ_{α/N}` attached to
/// an evaluation point.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    base: Vec<f64>,
    atoms: Vec<(Vec<f64>, f64)>,
}

impl EmpiricalMeasure {
    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    /// `(α/N, weight)` pairs in lattice order.
    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = NeumaierSum::new();
        for (_, w) in &self.atoms {
            s.add(*w);
        }
        s.value()
    }

    pub fn mean(&self) -> Vec<f64> {
        let m = self.base.len();
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let mut s = NeumaierSum::new();
            for (y, w) in &self.atoms {
                s.add(w * y[j]);
            }
            out.push(s.value());
        }
        out
    }

    /// Central moment `Σ_α w_α Π_j (α_j/N − x_j)^{β_j}` about the base
    /// point.
    pub fn central_moment(&self, beta: &[u32]) -> f64 {
        let mut s = NeumaierSum::new();
        for (y, w) in &self.atoms {
            let mut term = *w;
            for (j, &b) in beta.iter().enumerate() {
                if b > 0 {
                    term *= (y[j] - self.base[j]).powi(b as i32);
                }
            }
            s.add(term);
        }
        s.value()
    }
}

/// Statistics of a truncated evaluation.
#[derive(Clone, Copy, Debug)]
pub struct TruncationStats {
    pub points_used: usize,
    pub points_total: usize,
    pub radius: f64,
}

impl TruncationStats {
    pub fn used_fraction(&self) -> f64 {
        self.points_used as f64 / self.points_total as f64
    }
}

/// Evaluates the Bernstein operator of a metric with a prebuilt norming
/// table.
pub struct BernsteinEvaluator<'a> {
    metric: &'a ToricMetric,
    table: &'a NormingTable,
    ctx: WeightContext<'a>,
}

impl<'a> BernsteinEvaluator<'a> {
    pub fn new(metric: &'a ToricMetric, table: &'a NormingTable) -> Result<Self, BernsteinError> {
        if table.perturbation != metric.perturbation().to_string()
            || table.facets_digest != facets_digest(metric)
        {
            return Err(BernsteinError::TableMismatch {
                detail: "table was built for a different metric or polytope".into(),
            });
        }
        let ctx = WeightContext::new(metric, table.n)?;
        Ok(BernsteinEvaluator { metric, table, ctx })
    }

    pub fn n(&self) -> u32 {
        self.table.n
    }

    pub fn metric(&self) -> &ToricMetric {
        self.metric
    }

    pub fn table(&self) -> &NormingTable {
        self.table
    }

    /// Normalized log-weights `E(α, x) − log Q_α − log D_N(x)` for lattice
    /// points selected by the window, together with the log partition value
    /// over that window.
    fn log_weights(
        &self,
        x: &[f64],
        window: Option<f64>,
    ) -> Result<(Vec<(usize, f64)>, f64, f64), BernsteinError> {
        check_point(self.metric, x)?;
        let point = self.ctx.point(x)?;
        let nf = self.table.n as f64;
        let radius = window.unwrap_or(f64::INFINITY).max(2.0 / nf);
        let mut terms = Vec::new();
        for (i, profile) in self.table.profiles.iter().enumerate() {
            if window.is_some() {
                let mut inside = true;
                for (a, xi) in profile.alpha.iter().zip(x) {
                    if (*a as f64 / nf - xi).abs() > radius {
                        inside = false;
                        break;
                    }
                }
                if !inside {
                    continue;
                }
            }
            let e = self.ctx.exponent(profile, &point) - self.table.log_q[i];
            terms.push((i, e));
        }
        if terms.is_empty() {
            return Err(BernsteinError::EmptyWindow {
                point: x.to_vec(),
                radius,
            });
        }
        let logs: Vec<f64> = terms.iter().map(|(_, e)| *e).collect();
        let log_d = logsumexp(&logs);
        Ok((terms, log_d, radius))
    }

    /// `log D_N(x)`, the log partition function (Bergman density on the
    /// diagonal).
    pub fn log_denominator(&self, x: &[f64]) -> Result<f64, BernsteinError> {
        let (_, log_d, _) = self.log_weights(x, None)?;
        Ok(log_d)
    }

    /// `B_N f(x)` over the full lattice.
    pub fn evaluate<F>(&self, f: F, x: &[f64]) -> Result<f64, BernsteinError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let (value, _) = self.eval_windowed(&f, x, None)?;
        Ok(value)
    }

    /// `B_N f(x)` restricted to lattice points with
    /// `‖α/N − x‖_∞ ≤ max(c·(1 + ln N)/N, 2/N)`, renormalized over the
    /// window. When the window covers the whole lattice this takes the same
    /// code path as [`evaluate`](Self::evaluate) and returns bitwise
    /// identical results.
    pub fn evaluate_truncated<F>(
        &self,
        f: F,
        x: &[f64],
        c: f64,
    ) -> Result<(f64, TruncationStats), BernsteinError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let nf = self.table.n as f64;
        let radius = c * (1.0 + nf.ln()) / nf;
        self.eval_windowed(&f, x, Some(radius))
    }

    fn eval_windowed<F>(
        &self,
        f: &F,
        x: &[f64],
        window: Option<f64>,
    ) -> Result<(f64, TruncationStats), BernsteinError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let (terms, log_d, radius) = self.log_weights(x, window)?;
        let nf = self.table.n as f64;
        let mut sum = NeumaierSum::new();
        let mut y = vec![0.0; x.len()];
        for (i, e) in &terms {
            let alpha = &self.table.profiles[*i].alpha;
            for (yj, a) in y.iter_mut().zip(alpha) {
                *yj = *a as f64 / nf;
            }
            let fv = f(&y);
            if !fv.is_finite() {
                return Err(BernsteinError::NonFiniteFunction { point: y.clone() });
            }
            sum.add(fv * (e - log_d).exp());
        }
        Ok((
            sum.value(),
            TruncationStats {
                points_used: terms.len(),
                points_total: self.table.len(),
                radius,
            },
        ))
    }

    /// The numerator `Σ_α f(α/N)·exp(E − log Q_α)` in signed log form,
    /// without the partition normalization.
    pub fn numerator<F>(&self, f: F, x: &[f64]) -> Result<SignedLog, BernsteinError>
    where
        F: Fn(&[f64]) -> f64,
    {
        let (terms, _, _) = self.log_weights(x, None)?;
        let nf = self.table.n as f64;
        let max_e = terms
            .iter()
            .map(|(_, e)| *e)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_e == f64::NEG_INFINITY {
            return Ok(SignedLog {
                log_abs: f64::NEG_INFINITY,
                sign: 0.0,
            });
        }
        let mut sum = NeumaierSum::new();
        let mut y = vec![0.0; x.len()];
        for (i, e) in &terms {
            let alpha = &self.table.profiles[*i].alpha;
            for (yj, a) in y.iter_mut().zip(alpha) {
                *yj = *a as f64 / nf;
            }
            let fv = f(&y);
            if !fv.is_finite() {
                return Err(BernsteinError::NonFiniteFunction { point: y.clone() });
            }
            sum.add(fv * (e - max_e).exp());
        }
        let s = sum.value();
        if s == 0.0 {
            Ok(SignedLog {
                log_abs: f64::NEG_INFINITY,
                sign: 0.0,
            })
        } else {
            Ok(SignedLog {
                log_abs: max_e + s.abs().ln(),
                sign: s.signum(),
            })
        }
    }

    /// The probability measure `μ_x` of normalized weights at `x`.
    pub fn measure(&self, x: &[f64]) -> Result<EmpiricalMeasure, BernsteinError> {
        let (terms, log_d, _) = self.log_weights(x, None)?;
        let nf = self.table.n as f64;
        let atoms = terms
            .iter()
            .map(|(i, e)| {
                let alpha = &self.table.profiles[*i].alpha;
                let y: Vec<f64> = alpha.iter().map(|a| *a as f64 / nf).collect();
                (y, (e - log_d).exp())
            })
            .collect();
        Ok(EmpiricalMeasure {
            base: x.to_vec(),
            atoms,
        })
    }
}
