//! Delzant polytopes with exact facet data.
//!
//! A polytope is stored in facet presentation `P = {x : ⟨x, v_r⟩ ≥ λ_r}`
//! with primitive integer inward normals `v_r` and rational offsets `λ_r`.
//! Validation, vertex solving, and lattice membership run in exact integer /
//! rational arithmetic so that boundary incidence is decided without float
//! tolerances. Dimensions 1 through 3 are supported.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error("dimension {0} is not supported (expected 1 ≤ dim ≤ 3)")]
    UnsupportedDimension(usize),
    #[error("facet {facet} has a non-primitive (or zero) normal")]
    NonPrimitiveNormal { facet: usize },
    #[error("facet normals admit a recession direction; the polytope is unbounded or empty")]
    UnboundedPolytope,
    #[error("the inequalities cut out a set with empty interior")]
    EmptyInterior,
    #[error("not Delzant at vertex {vertex:?}: {detail}")]
    NotDelzant { vertex: Vec<f64>, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("facet {facet} is degenerate (fewer than dim vertices)")]
    DegenerateFacet { facet: usize },
    #[error("invalid facet offset: {0}")]
    InvalidOffset(String),
    #[error("invalid polytope description: {0}")]
    InvalidJson(String),
}

/// One closed half-space `⟨x, normal⟩ ≥ offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    normal: Vec<i64>,
    offset: Rational64,
}

impl Facet {
    /// Builds a facet, rejecting zero or non-primitive normals.
    pub fn new(normal: Vec<i64>, offset: Rational64) -> Result<Self, PolytopeError> {
        let g = normal.iter().fold(0i64, |acc, &c| acc.gcd(&c.abs()));
        if g != 1 {
            // gcd == 0 covers the all-zero normal.
            return Err(PolytopeError::NonPrimitiveNormal { facet: usize::MAX });
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> &[i64] {
        &self.normal
    }

    pub fn offset(&self) -> Rational64 {
        self.offset
    }

    fn norm(&self) -> f64 {
        self.normal
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// A validated Delzant polytope: bounded, full-dimensional, with exactly
/// `dim` facets through each vertex and unimodular vertex normal frames.
#[derive(Clone, Debug)]
pub struct DelzantPolytope {
    dim: usize,
    facets: Vec<Facet>,
    facet_norms: Vec<f64>,
    vertices_exact: Vec<Vec<BigRational>>,
    vertices: Vec<Vec<f64>>,
    facet_vertices: Vec<Vec<usize>>,
    diameter: f64,
}

/// Lattice points of the dilation `NP`, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSet {
    dilation: u32,
    points: Vec<Vec<i64>>,
}

impl LatticeSet {
    pub fn dilation(&self) -> u32 {
        self.dilation
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Affine parametrization of facet `r` by an orthonormal frame of its
/// supporting hyperplane, together with the constant Leray density
/// `1/‖v_r‖₂` relating Euclidean surface measure to the measure dσ with
/// `dℓ_r ∧ dσ = dx`.
#[derive(Clone, Debug)]
pub struct FacetChart {
    facet: usize,
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    polygon: Vec<Vec<f64>>,
    leray_density: f64,
}

impl FacetChart {
    pub fn facet(&self) -> usize {
        self.facet
    }

    /// Facet vertices in chart coordinates ((dim−1)-dimensional, cyclic order).
    pub fn polygon(&self) -> &[Vec<f64>] {
        &self.polygon
    }

    pub fn leray_density(&self) -> f64 {
        self.leray_density
    }

    pub fn chart_dim(&self) -> usize {
        self.basis.len()
    }

    /// Maps chart coordinates to ambient coordinates on the facet.
    pub fn map(&self, t: &[f64]) -> Vec<f64> {
        let mut x = self.origin.clone();
        for (k, b) in self.basis.iter().enumerate() {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += t[k] * bi;
            }
        }
        x
    }
}

fn big(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Exact Gaussian elimination; returns None for singular systems.
fn solve_exact(mat: &[Vec<BigRational>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = rhs.len();
    let mut a: Vec<Vec<BigRational>> = mat
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &p;
            for c in col..=n {
                let sub = &factor * &a[col][c];
                a[r][c] = &a[r][c] - sub;
            }
        }
    }
    Some(
        (0..n)
            .map(|r| &a[r][n] / &a[r][r])
            .collect::<Vec<BigRational>>(),
    )
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
        _ => unreachable!("dimension cap is 3"),
    }
}

/// Searches for a nonzero integer direction `y` with `⟨y, v_r⟩ ≥ 0` for all
/// facets. Such a direction spans a recession ray of the feasible set.
fn recession_direction(facets: &[Facet], dim: usize) -> Option<Vec<i64>> {
    let admits = |y: &[i64]| {
        facets
            .iter()
            .all(|f| y.iter().zip(&f.normal).map(|(a, b)| a * b).sum::<i64>() >= 0)
    };
    let mut candidates: Vec<Vec<i64>> = Vec::new();
    match dim {
        1 => {
            candidates.push(vec![1]);
            candidates.push(vec![-1]);
        }
        2 => {
            // Rank deficiency: all normals parallel ⇒ a common perpendicular.
            if facets
                .iter()
                .zip(facets.iter().skip(1))
                .all(|(f, g)| det_i64(&[&f.normal, &g.normal]) == 0)
            {
                let v = &facets[0].normal;
                candidates.push(vec![-v[1], v[0]]);
            }
            // Extreme rays have one active facet: y ⊥ v_r.
            for f in facets {
                let y = vec![-f.normal[1], f.normal[0]];
                candidates.push(y.iter().map(|c| -c).collect());
                candidates.push(y);
            }
        }
        3 => {
            let rank3 = facets.iter().enumerate().any(|(i, fi)| {
                facets.iter().enumerate().any(|(j, fj)| {
                    j > i
                        && facets.iter().enumerate().any(|(k, fk)| {
                            k > j && det_i64(&[&fi.normal, &fj.normal, &fk.normal]) != 0
                        })
                })
            });
            if !rank3 {
                return Some(vec![0, 0, 0]); // degenerate: flagged by caller
            }
            // Extreme rays have two active facets: y = v_a × v_b.
            for (i, fa) in facets.iter().enumerate() {
                for fb in facets.iter().skip(i + 1) {
                    let a = &fa.normal;
                    let b = &fb.normal;
                    let y = vec![
                        a[1] * b[2] - a[2] * b[1],
                        a[2] * b[0] - a[0] * b[2],
                        a[0] * b[1] - a[1] * b[0],
                    ];
                    if y.iter().all(|&c| c == 0) {
                        continue;
                    }
                    candidates.push(y.iter().map(|c| -c).collect());
                    candidates.push(y);
                }
            }
        }
        _ => unreachable!(),
    }
    candidates
        .into_iter()
        .filter(|y| y.iter().any(|&c| c != 0))
        .find(|y| admits(y))
}

/// Validates the Delzant conditions and assembles the polytope.
///
/// Checks, in order: dimension cap, primitive normals, boundedness (no
/// recession direction), nonempty interior, and unimodular vertex frames
/// with exactly `dim` incident facets per vertex.
pub fn validate_delzant(dim: usize, facets: Vec<Facet>) -> Result<DelzantPolytope, PolytopeError> {
    if !(1..=3).contains(&dim) {
        return Err(PolytopeError::UnsupportedDimension(dim));
    }
    for (r, f) in facets.iter().enumerate() {
        if f.normal.len() != dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: dim,
                got: f.normal.len(),
            });
        }
        let g = f.normal.iter().fold(0i64, |acc, &c| acc.gcd(&c.abs()));
        if g != 1 {
            return Err(PolytopeError::NonPrimitiveNormal { facet: r });
        }
    }
    if facets.len() < dim + 1 {
        return Err(PolytopeError::UnboundedPolytope);
    }
    if recession_direction(&facets, dim).is_some() {
        return Err(PolytopeError::UnboundedPolytope);
    }

    // Candidate vertices: solutions of dim-subsets of facet equalities that
    // satisfy every inequality.
    let d = facets.len();
    let mut vertices_exact: Vec<Vec<BigRational>> = Vec::new();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    match dim {
        1 => subsets.extend((0..d).map(|i| vec![i])),
        2 => {
            for i in 0..d {
                for j in (i + 1)..d {
                    subsets.push(vec![i, j]);
                }
            }
        }
        3 => {
            for i in 0..d {
                for j in (i + 1)..d {
                    for k in (j + 1)..d {
                        subsets.push(vec![i, j, k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let ell_exact = |f: &Facet, x: &[BigRational]| -> BigRational {
        let mut acc = BigRational::zero();
        for (xi, &vi) in x.iter().zip(&f.normal) {
            acc += xi * BigRational::from(BigInt::from(vi));
        }
        acc - big(f.offset)
    };
    for subset in &subsets {
        let mat: Vec<Vec<BigRational>> = subset
            .iter()
            .map(|&r| {
                facets[r]
                    .normal
                    .iter()
                    .map(|&c| BigRational::from(BigInt::from(c)))
                    .collect()
            })
            .collect();
        let rhs: Vec<BigRational> = subset.iter().map(|&r| big(facets[r].offset)).collect();
        let Some(x) = solve_exact(&mat, &rhs) else {
            continue;
        };
        if facets.iter().all(|f| !ell_exact(f, &x).is_negative()) && !vertices_exact.contains(&x) {
            vertices_exact.push(x);
        }
    }
    if vertices_exact.is_empty() {
        return Err(PolytopeError::EmptyInterior);
    }

    // Full-dimensionality: the vertex centroid must be strictly interior.
    let nv = BigRational::from(BigInt::from(vertices_exact.len() as i64));
    let centroid: Vec<BigRational> = (0..dim)
        .map(|j| {
            vertices_exact
                .iter()
                .map(|v| v[j].clone())
                .fold(BigRational::zero(), |a, b| a + b)
                / nv.clone()
        })
        .collect();
    if facets.iter().any(|f| !ell_exact(f, &centroid).is_positive()) {
        return Err(PolytopeError::EmptyInterior);
    }

    let to_f64 = |v: &[BigRational]| -> Vec<f64> {
        v.iter()
            .map(|c| c.numer().to_f64().unwrap() / c.denom().to_f64().unwrap())
            .collect()
    };

    // Delzant conditions per vertex.
    let mut facet_vertices: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (vi, v) in vertices_exact.iter().enumerate() {
        let incident: Vec<usize> = (0..d)
            .filter(|&r| ell_exact(&facets[r], v).is_zero())
            .collect();
        if incident.len() != dim {
            return Err(PolytopeError::NotDelzant {
                vertex: to_f64(v),
                detail: format!("{} incident facets, expected {}", incident.len(), dim),
            });
        }
        let rows: Vec<&[i64]> = incident.iter().map(|&r| facets[r].normal.as_slice()).collect();
        let det = det_i64(&rows);
        if det.abs() != 1 {
            return Err(PolytopeError::NotDelzant {
                vertex: to_f64(v),
                detail: format!("vertex normal determinant {det}, expected ±1"),
            });
        }
        for &r in &incident {
            facet_vertices[r].push(vi);
        }
    }

    let vertices: Vec<Vec<f64>> = vertices_exact.iter().map(|v| to_f64(v)).collect();
    let mut diameter: f64 = 0.0;
    for (i, a) in vertices.iter().enumerate() {
        for b in vertices.iter().skip(i + 1) {
            let dist: f64 = a
                .iter()
                .zip(b)
                .map(|(ai, bi)| (ai - bi) * (ai - bi))
                .sum::<f64>()
                .sqrt();
            diameter = diameter.max(dist);
        }
    }
    let facet_norms = facets.iter().map(Facet::norm).collect();

    Ok(DelzantPolytope {
        dim,
        facets,
        facet_norms,
        vertices_exact,
        vertices,
        facet_vertices,
        diameter,
    })
}

impl DelzantPolytope {
    /// `Σ_m = {x ≥ 0, Σx ≤ 1}` (the unit interval for dim 1).
    pub fn standard_simplex(dim: usize) -> Self {
        let mut facets = Vec::with_capacity(dim + 1);
        for j in 0..dim {
            let mut n = vec![0i64; dim];
            n[j] = 1;
            facets.push(Facet::new(n, Rational64::from_integer(0)).unwrap());
        }
        facets.push(Facet::new(vec![-1; dim], Rational64::from_integer(-1)).unwrap());
        validate_delzant(dim, facets).expect("standard simplex is Delzant")
    }

    /// `[0,1]^dim`.
    pub fn unit_cube(dim: usize) -> Self {
        let mut facets = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            let mut n = vec![0i64; dim];
            n[j] = 1;
            facets.push(Facet::new(n.clone(), Rational64::from_integer(0)).unwrap());
            let m: Vec<i64> = n.iter().map(|c| -c).collect();
            facets.push(Facet::new(m, Rational64::from_integer(-1)).unwrap());
        }
        validate_delzant(dim, facets).expect("unit cube is Delzant")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertices_exact(&self) -> &[Vec<BigRational>] {
        &self.vertices_exact
    }

    /// Indices of the vertices lying on facet `r` (unordered).
    pub fn facet_vertex_indices(&self, r: usize) -> &[usize] {
        &self.facet_vertices[r]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() as f64;
        (0..self.dim)
            .map(|j| self.vertices.iter().map(|v| v[j]).sum::<f64>() / n)
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for j in 0..self.dim {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }

    /// Facet function `ℓ_r(x) = ⟨x, v_r⟩ − λ_r`.
    pub fn ell(&self, r: usize, x: &[f64]) -> Result<f64, PolytopeError> {
        if x.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let f = &self.facets[r];
        let dot: f64 = x.iter().zip(&f.normal).map(|(xi, &vi)| xi * vi as f64).sum();
        Ok(dot - rational_to_f64(f.offset))
    }

    /// All facet functions at once.
    pub fn ells(&self, x: &[f64]) -> Result<Vec<f64>, PolytopeError> {
        (0..self.facets.len()).map(|r| self.ell(r, x)).collect()
    }

    /// Euclidean ℓ₂ norm of the normal of facet `r`.
    pub fn facet_norm(&self, r: usize) -> f64 {
        self.facet_norms[r]
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64, PolytopeError> {
        let mut dist = f64::INFINITY;
        for r in 0..self.facets.len() {
            dist = dist.min(self.ell(r, x)? / self.facet_norms[r]);
        }
        Ok(dist)
    }

    /// Membership in the closed polytope, with a small tolerance band to
    /// absorb roundoff in `x` itself.
    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * (1.0 + self.diameter);
        (0..self.facets.len()).all(|r| match self.ell(r, x) {
            Ok(l) => l >= -tol * self.facet_norms[r],
            Err(_) => false,
        })
    }

    /// Exactly the lattice points `NP ∩ ℤ^dim`, lexicographically ordered.
    ///
    /// Membership is decided in integer arithmetic: with `λ_r = p_r/q_r`,
    /// the test is `q_r·⟨α, v_r⟩ ≥ N·p_r`.
    pub fn lattice_points(&self, n: u32) -> LatticeSet {
        assert!(n >= 1, "dilation must be at least 1");
        let nbig = BigInt::from(n);
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for v in &self.vertices_exact {
            for j in 0..self.dim {
                let scaled = &v[j] * BigRational::from(nbig.clone());
                let f = scaled.floor().to_integer().to_i64().expect("lattice bound fits i64");
                let c = scaled.ceil().to_integer().to_i64().expect("lattice bound fits i64");
                lo[j] = lo[j].min(c);
                hi[j] = hi[j].max(f);
            }
        }
        let tests: Vec<(Vec<i128>, i128, i128)> = self
            .facets
            .iter()
            .map(|f| {
                let v: Vec<i128> = f.normal.iter().map(|&c| c as i128).collect();
                (v, *f.offset.numer() as i128, *f.offset.denom() as i128)
            })
            .collect();
        let inside = |alpha: &[i64]| {
            tests.iter().all(|(v, p, q)| {
                let dot: i128 = alpha.iter().zip(v).map(|(&a, &vi)| a as i128 * vi).sum();
                q * dot >= i128::from(n) * p
            })
        };
        let mut points = Vec::new();
        let mut alpha: Vec<i64> = lo.clone();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return LatticeSet { dilation: n, points };
        }
        loop {
            if inside(&alpha) {
                points.push(alpha.clone());
            }
            // Odometer increment, last coordinate fastest (lexicographic order).
            let mut j = self.dim;
            loop {
                if j == 0 {
                    return LatticeSet { dilation: n, points };
                }
                j -= 1;
                if alpha[j] < hi[j] {
                    alpha[j] += 1;
                    break;
                }
                alpha[j] = lo[j];
            }
        }
    }

    /// Vertex indices of facet `r` in cyclic order (trivial for dim ≤ 2).
    pub fn facet_cycle(&self, r: usize) -> Result<Vec<usize>, PolytopeError> {
        let vs = &self.facet_vertices[r];
        if vs.len() < self.dim {
            return Err(PolytopeError::DegenerateFacet { facet: r });
        }
        if self.dim <= 2 {
            return Ok(vs.clone());
        }
        // Angular sort in the facet plane around the facet centroid.
        let basis = self.facet_plane_basis(r);
        let pts: Vec<&Vec<f64>> = vs.iter().map(|&i| &self.vertices[i]).collect();
        let centroid: Vec<f64> = (0..3)
            .map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64)
            .collect();
        let mut order: Vec<(f64, usize)> = vs
            .iter()
            .map(|&i| {
                let p = &self.vertices[i];
                let d: Vec<f64> = (0..3).map(|j| p[j] - centroid[j]).collect();
                let a: f64 = d.iter().zip(&basis[0]).map(|(x, y)| x * y).sum();
                let b: f64 = d.iter().zip(&basis[1]).map(|(x, y)| x * y).sum();
                (b.atan2(a), i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(order.into_iter().map(|(_, i)| i).collect())
    }

    fn facet_plane_basis(&self, r: usize) -> Vec<Vec<f64>> {
        // Orthonormal basis of the plane ⟂ normal, via Gram–Schmidt on the
        // least-aligned coordinate axes.
        let v = &self.facets[r].normal;
        let n = self.facet_norms[r];
        let unit: Vec<f64> = v.iter().map(|&c| c as f64 / n).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for axis in 0..3 {
            if basis.len() == 2 {
                break;
            }
            let mut e = vec![0.0; 3];
            e[axis] = 1.0;
            let mut w = e;
            let proj: f64 = w.iter().zip(&unit).map(|(a, b)| a * b).sum();
            for (wi, ui) in w.iter_mut().zip(&unit) {
                *wi -= proj * ui;
            }
            for b in &basis {
                let p: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= p * bi;
                }
            }
            let norm: f64 = w.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for wi in &mut w {
                    *wi /= norm;
                }
                basis.push(w);
            }
        }
        basis
    }

    /// Orthonormal affine chart of facet `r` plus the Leray density.
    pub fn facet_chart(&self, r: usize) -> Result<FacetChart, PolytopeError> {
        let cycle = self.facet_cycle(r)?;
        let leray_density = 1.0 / self.facet_norms[r];
        match self.dim {
            1 => Ok(FacetChart {
                facet: r,
                origin: self.vertices[cycle[0]].clone(),
                basis: Vec::new(),
                polygon: vec![Vec::new()],
                leray_density,
            }),
            2 => {
                let a = &self.vertices[cycle[0]];
                let b = &self.vertices[cycle[1]];
                let d: Vec<f64> = (0..2).map(|j| b[j] - a[j]).collect();
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                Ok(FacetChart {
                    facet: r,
                    origin: a.clone(),
                    basis: vec![vec![d[0] / len, d[1] / len]],
                    polygon: vec![vec![0.0], vec![len]],
                    leray_density,
                })
            }
            3 => {
                let basis = self.facet_plane_basis(r);
                let origin = self.vertices[cycle[0]].clone();
                let polygon = cycle
                    .iter()
                    .map(|&i| {
                        let p = &self.vertices[i];
                        basis
                            .iter()
                            .map(|b| (0..3).map(|j| (p[j] - origin[j]) * b[j]).sum())
                            .collect()
                    })
                    .collect();
                Ok(FacetChart {
                    facet: r,
                    origin,
                    basis,
                    polygon,
                    leray_density,
                })
            }
            _ => unreachable!(),
        }
    }

    /// True when the facet set is exactly `{⟨x, e_j⟩ ≥ 0} ∪ {⟨x, -1⃗⟩ ≥ -1}`.
    pub fn is_standard_simplex(&self) -> bool {
        if self.facets.len() != self.dim + 1 {
            return false;
        }
        let mut seen_diag = false;
        let mut seen_axis = vec![false; self.dim];
        for f in &self.facets {
            if f.normal.iter().all(|&c| c == -1) && f.offset == Rational64::from_integer(-1) {
                if seen_diag {
                    return false;
                }
                seen_diag = true;
                continue;
            }
            if f.offset != Rational64::from_integer(0) {
                return false;
            }
            let ones: Vec<usize> = (0..self.dim).filter(|&j| f.normal[j] != 0).collect();
            if ones.len() != 1 || f.normal[ones[0]] != 1 || seen_axis[ones[0]] {
                return false;
            }
            seen_axis[ones[0]] = true;
        }
        seen_diag && seen_axis.iter().all(|&b| b)
    }
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses an exact rational from `"p/q"`, an integer, or a decimal literal
/// (optionally with an exponent). Decimals convert exactly: `"0.1"` → 1/10.
pub fn parse_rational(text: &str) -> Result<Rational64, PolytopeError> {
    let s = text.trim();
    let bad = |msg: &str| PolytopeError::InvalidOffset(format!("{msg}: {s:?}"));
    if s.is_empty() {
        return Err(bad("empty"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad("bad numerator"))?;
        let q: i64 = q.trim().parse().map_err(|_| bad("bad denominator"))?;
        if q == 0 {
            return Err(bad("zero denominator"));
        }
        return Ok(Rational64::new(p, q));
    }
    // Decimal literal: sign, digits, optional fraction, optional exponent.
    let (mantissa, exp_part) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let exp: i32 = match exp_part {
        Some(e) => e.parse().map_err(|_| bad("bad exponent"))?,
        None => 0,
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad("not a number"));
    }
    if int_part.len() + frac_part.len() > 24 {
        return Err(bad("too many digits"));
    }
    let mut num: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        num = num * 10 + i128::from(c.to_digit(10).unwrap());
    }
    num *= sign;
    let mut den: i128 = 1;
    let shift = exp - frac_part.len() as i32;
    if shift.unsigned_abs() > 24 {
        return Err(bad("exponent out of range"));
    }
    for _ in 0..shift.max(0) {
        num = num.checked_mul(10).ok_or_else(|| bad("overflow"))?;
    }
    for _ in 0..(-shift).max(0) {
        den = den.checked_mul(10).ok_or_else(|| bad("overflow"))?;
    }
    let g = num.gcd(&den);
    let (num, den) = if g == 0 { (0, 1) } else { (num / g, den / g) };
    let p = i64::try_from(num).map_err(|_| bad("out of i64 range"))?;
    let q = i64::try_from(den).map_err(|_| bad("out of i64 range"))?;
    Ok(Rational64::new(p, q))
}

/// Reads `{"dim": m, "facets": [{"normal": [...], "lambda": ...}]}`.
///
/// `lambda` may be an integer, a decimal number, or a `"p/q"` string; all
/// three parse exactly.
pub fn polytope_from_json(value: &serde_json::Value) -> Result<DelzantPolytope, PolytopeError> {
    let obj = value
        .as_object()
        .ok_or_else(|| PolytopeError::InvalidJson("expected an object".into()))?;
    let dim = obj
        .get("dim")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| PolytopeError::InvalidJson("missing integer field \"dim\"".into()))?
        as usize;
    let facets_json = obj
        .get("facets")
        .and_then(|v| v.as_array())
        .ok_or_else(|| PolytopeError::InvalidJson("missing array field \"facets\"".into()))?;
    let mut facets = Vec::with_capacity(facets_json.len());
    for (r, fv) in facets_json.iter().enumerate() {
        let fo = fv
            .as_object()
            .ok_or_else(|| PolytopeError::InvalidJson(format!("facet {r} is not an object")))?;
        let normal_json = fo
            .get("normal")
            .and_then(|v| v.as_array())
            .ok_or_else(|| PolytopeError::InvalidJson(format!("facet {r}: missing \"normal\"")))?;
        let normal = normal_json
            .iter()
            .map(|c| {
                c.as_i64().ok_or_else(|| {
                    PolytopeError::InvalidJson(format!("facet {r}: normal entries must be integers"))
                })
            })
            .collect::<Result<Vec<i64>, _>>()?;
        let lambda = match fo.get("lambda") {
            Some(serde_json::Value::String(s)) => parse_rational(s)?,
            Some(serde_json::Value::Number(n)) => parse_rational(&n.to_string())?,
            _ => {
                return Err(PolytopeError::InvalidJson(format!(
                    "facet {r}: missing numeric or string \"lambda\""
                )))
            }
        };
        facets.push(Facet { normal, offset: lambda });
    }
    validate_delzant(dim, facets)
}

pub fn polytope_from_json_str(text: &str) -> Result<DelzantPolytope, PolytopeError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PolytopeError::InvalidJson(e.to_string()))?;
    polytope_from_json(&value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex2() -> DelzantPolytope {
        DelzantPolytope::standard_simplex(2)
    }

    #[test]
    fn interval_has_two_vertices() {
        let p = DelzantPolytope::standard_simplex(1);
        let mut xs: Vec<f64> = p.vertices().iter().map(|v| v[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![0.0, 1.0]);
        assert_eq!(p.diameter(), 1.0);
        assert!(p.is_standard_simplex());
    }

    #[test]
    fn simplex2_vertices_and_count() {
        let p = simplex2();
        assert_eq!(p.vertices().len(), 3);
        assert!(p.is_standard_simplex());
        // Lattice count at N = 3 is the triangular number C(5, 2) = 10.
        assert_eq!(p.lattice_points(3).len(), 10);
        // N = 1: the three vertices plus nothing else... in fact 3 points:
        // (0,0), (0,1), (1,0).
        assert_eq!(p.lattice_points(1).len(), 3);
    }

    #[test]
    fn lattice_points_are_lexicographic_and_inside() {
        let p = simplex2();
        let set = p.lattice_points(4);
        assert_eq!(set.len(), 15);
        let pts = set.points();
        for w in pts.windows(2) {
            assert!(w[0] < w[1], "lexicographic order violated: {w:?}");
        }
        for a in pts {
            assert!(a[0] >= 0 && a[1] >= 0 && a[0] + a[1] <= 4);
        }
    }

    #[test]
    fn cube_lattice_count() {
        let p = DelzantPolytope::unit_cube(3);
        assert_eq!(p.lattice_points(2).len(), 27);
        assert!(!p.is_standard_simplex());
    }

    #[test]
    fn non_delzant_triangle_reports_offending_vertex() {
        // Triangle (0,0), (1,0), (0,2): determinant 2 at (1,0).
        let facets = vec![
            Facet::new(vec![0, 1], Rational64::from_integer(0)).unwrap(),
            Facet::new(vec![1, 0], Rational64::from_integer(0)).unwrap(),
            Facet::new(vec![-2, -1], Rational64::from_integer(-2)).unwrap(),
        ];
        match validate_delzant(2, facets) {
            Err(PolytopeError::NotDelzant { vertex, detail }) => {
                assert_eq!(vertex, vec![1.0, 0.0]);
                assert!(detail.contains("determinant"), "{detail}");
            }
            other => panic!("expected NotDelzant, got {other:?}"),
        }
    }

    #[test]
    fn non_primitive_normal_rejected() {
        let facets = vec![
            Facet {
                normal: vec![2, 0],
                offset: Rational64::from_integer(0),
            },
            Facet {
                normal: vec![0, 1],
                offset: Rational64::from_integer(0),
            },
            Facet {
                normal: vec![-1, -1],
                offset: Rational64::from_integer(-1),
            },
        ];
        assert!(matches!(
            validate_delzant(2, facets),
            Err(PolytopeError::NonPrimitiveNormal { facet: 0 })
        ));
    }

    #[test]
    fn unbounded_quadrant_rejected() {
        let facets = vec![
            Facet::new(vec![1, 0], Rational64::from_integer(0)).unwrap(),
            Facet::new(vec![0, 1], Rational64::from_integer(0)).unwrap(),
            Facet::new(vec![1, 1], Rational64::from_integer(0)).unwrap(),
        ];
        assert!(matches!(
            validate_delzant(2, facets),
            Err(PolytopeError::UnboundedPolytope)
        ));
    }

    #[test]
    fn empty_interior_rejected() {
        // x ≥ 0 and -x ≥ 0 pin x = 0.
        let facets = vec![
            Facet::new(vec![1], Rational64::from_integer(0)).unwrap(),
            Facet::new(vec![-1], Rational64::from_integer(0)).unwrap(),
        ];
        assert!(matches!(
            validate_delzant(1, facets),
            Err(PolytopeError::EmptyInterior)
        ));
    }

    #[test]
    fn ell_and_distance() {
        let p = simplex2();
        let x = [0.25, 0.25];
        let ells = p.ells(&x).unwrap();
        assert_eq!(ells.len(), 3);
        // ℓ for the diagonal facet (-1,-1), λ = -1 is 1 - x₁ - x₂ = 0.5.
        let d = p.distance_to_boundary(&x).unwrap();
        assert!((d - 0.25).abs() < 1e-15, "{d}");
        assert!(p.contains(&x));
        assert!(!p.contains(&[0.9, 0.9]));
        assert!(matches!(
            p.ell(0, &[0.1]),
            Err(PolytopeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rational_offsets_shift_lattice_counts() {
        // [1/2, 3/2]: at N = 1 only x = 1 is inside.
        let facets = vec![
            Facet::new(vec![1], Rational64::new(1, 2)).unwrap(),
            Facet::new(vec![-1], Rational64::new(-3, 2)).unwrap(),
        ];
        let p = validate_delzant(1, facets).unwrap();
        assert_eq!(p.lattice_points(1).points(), &[vec![1]]);
        // 2P = [1, 3].
        assert_eq!(p.lattice_points(2).len(), 3);
        assert!(!p.is_standard_simplex());
    }

    #[test]
    fn facet_chart_interval() {
        let p = DelzantPolytope::standard_simplex(1);
        for r in 0..2 {
            let chart = p.facet_chart(r).unwrap();
            assert_eq!(chart.chart_dim(), 0);
            assert_eq!(chart.leray_density(), 1.0);
            let x = chart.map(&[]);
            assert!(x == vec![0.0] || x == vec![1.0]);
        }
    }

    #[test]
    fn facet_chart_simplex2_diagonal_has_unit_leray_mass() {
        let p = simplex2();
        // Diagonal facet: normal (-1,-1), Euclidean length √2, density 1/√2,
        // so total Leray mass is 1.
        let diag = p
            .facets()
            .iter()
            .position(|f| f.normal() == [-1, -1])
            .unwrap();
        let chart = p.facet_chart(diag).unwrap();
        let len = (chart.polygon()[0][0] - chart.polygon()[1][0]).abs();
        assert!((len * chart.leray_density() - 1.0).abs() < 1e-12);
        // Chart endpoints map to the two vertices on the facet.
        let a = chart.map(&chart.polygon()[0]);
        assert!(p.contains(&a));
        let l = p.ell(diag, &a).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn cube_facet_cycle_is_a_quadrilateral() {
        let p = DelzantPolytope::unit_cube(3);
        for r in 0..6 {
            let cycle = p.facet_cycle(r).unwrap();
            assert_eq!(cycle.len(), 4);
            let chart = p.facet_chart(r).unwrap();
            assert_eq!(chart.polygon().len(), 4);
            // Polygon edge lengths of the unit cube facet are 1.
            let poly = chart.polygon();
            for i in 0..4 {
                let a = &poly[i];
                let b = &poly[(i + 1) % 4];
                let len: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!((len - 1.0).abs() < 1e-12, "edge {i} has length {len}");
            }
        }
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3").unwrap(), Rational64::from_integer(3));
        assert_eq!(parse_rational("-2").unwrap(), Rational64::from_integer(-2));
        assert_eq!(parse_rational("0.1").unwrap(), Rational64::new(1, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational64::new(-1, 4));
        assert_eq!(parse_rational("1/3").unwrap(), Rational64::new(1, 3));
        assert_eq!(parse_rational("-7/2").unwrap(), Rational64::new(-7, 2));
        assert_eq!(parse_rational("2.5e-1").unwrap(), Rational64::new(1, 4));
        assert_eq!(parse_rational("1e2").unwrap(), Rational64::from_integer(100));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn json_round_trip_examples() {
        let text = r#"{
            "dim": 2,
            "facets": [
                {"normal": [1, 0], "lambda": 0},
                {"normal": [0, 1], "lambda": "0"},
                {"normal": [-1, -1], "lambda": -1}
            ]
        }"#;
        let p = polytope_from_json_str(text).unwrap();
        assert!(p.is_standard_simplex());

        let shifted = r#"{
            "dim": 1,
            "facets": [
                {"normal": [1], "lambda": 0.5},
                {"normal": [-1], "lambda": "-3/2"}
            ]
        }"#;
        let p = polytope_from_json_str(shifted).unwrap();
        assert_eq!(p.facets()[0].offset(), Rational64::new(1, 2));
        assert_eq!(p.facets()[1].offset(), Rational64::new(-3, 2));

        assert!(polytope_from_json_str("{\"dim\": 2}").is_err());
        assert!(polytope_from_json_str("not json").is_err());
    }

    #[test]
    fn ehrhart_leading_term() {
        // |NP ∩ ℤ^m| / N^m → vol(P), with relative error O(1/N) controlled
        // by the surface/volume ratio.
        let cases: Vec<(DelzantPolytope, f64)> = vec![
            (DelzantPolytope::standard_simplex(1), 1.0),
            (DelzantPolytope::standard_simplex(2), 0.5),
            (DelzantPolytope::unit_cube(2), 1.0),
            (DelzantPolytope::standard_simplex(3), 1.0 / 6.0),
        ];
        for (p, vol) in cases {
            let m = p.dim() as f64;
            for n in [8u32, 16, 32] {
                let count = p.lattice_points(n).len() as f64;
                let rel = (count / (n as f64).powf(m) - vol).abs() / vol;
                // Generous constant: 4m per unit of surface-to-volume.
                assert!(
                    rel <= 4.0 * m * m / n as f64,
                    "dim {m}, N {n}: rel err {rel}"
                );
            }
        }
    }
}
