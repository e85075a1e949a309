//! Second moments B and fourth-moment operators T, built empirically
//! from weighted samples or analytically for the model families with
//! closed-form spectra, plus seeded generators for those families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::parallel::{self, chunk_count, CHUNK_SIZE};
use crate::symspace::{
    matrix_sqrt_psd, sym_len, vech_iso, vech_iso_inv, vech_iso_outer_into, CoordVector, SymMatrix,
};

/// Default cap on the ambient dimension d for dense operator storage
/// (D = d(d+1)/2 grows quadratically). Overridable per call.
pub const DEFAULT_DENSE_LIMIT: usize = 96;

/// Name of the pseudo-random generator behind [`sample`], recorded in
/// reports so a seed pins the byte stream across builds. Normal variates
/// are drawn through `rand_distr`'s `StandardNormal` on this stream.
pub const RNG_ALGORITHM: &str = "chacha8";

/// n weighted points in ℝ^d representing an atomic probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    /// Row-major n×d coordinates.
    points: Vec<f64>,
    /// Non-negative, summing to 1.
    weights: Vec<f64>,
}

impl SampleSet {
    /// Weighted constructor. Weights must be non-negative and sum to 1
    /// within 1e-12; all coordinates must be finite; n ≥ 1.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be positive".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidData(format!(
                "point buffer of length {} is not a positive multiple of d = {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        if weights.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} points but {} weights",
                weights.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidData("weights must be finite and >= 0".into()));
        }
        // Compensated sum: naive summation of 1e5+ uniform weights drifts
        // past the 1e-12 budget on its own.
        let total = kahan_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidData(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(SampleSet {
            dim,
            points,
            weights,
        })
    }

    /// Uniform weights 1/n.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidData(
                "point buffer length must be a positive multiple of d".into(),
            ));
        }
        let n = points.len() / dim;
        let weights = vec![1.0 / n as f64; n];
        SampleSet::new(dim, points, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same atoms with different weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        SampleSet::new(self.dim, self.points.clone(), weights)
    }

    /// Pushforward by x ↦ M·x for a dense row-major d×d matrix.
    pub fn linear_pushforward(&self, m: &[f64]) -> Result<Self> {
        let d = self.dim;
        if m.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} entries, expected {}",
                m.len(),
                d * d
            )));
        }
        let mut out = vec![0.0; self.points.len()];
        for (src, dst) in self.points.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += m[i * d + j] * src[j];
                }
                dst[i] = acc;
            }
        }
        SampleSet::new(d, out, self.weights.clone())
    }
}

/// Where an operator's coefficients came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Empirical,
    Analytic(String),
    Derived(String),
}

/// The fourth-moment operator as a D×D symmetric matrix in the isometric
/// vech basis, D = d(d+1)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOperator {
    dim: usize,
    coord_dim: usize,
    /// Row-major D×D, exactly symmetric.
    matrix: Vec<f64>,
    provenance: Provenance,
}

impl MomentOperator {
    pub(crate) fn from_raw(dim: usize, matrix: Vec<f64>, provenance: Provenance) -> Self {
        let coord_dim = sym_len(dim);
        debug_assert_eq!(matrix.len(), coord_dim * coord_dim);
        MomentOperator {
            dim,
            coord_dim,
            matrix,
            provenance,
        }
    }

    /// Zero operator on d×d symmetric matrices (the operator of δ₀).
    pub fn zero(dim: usize) -> Self {
        let dd = sym_len(dim);
        MomentOperator::from_raw(dim, vec![0.0; dd * dd], Provenance::Analytic("zero".into()))
    }

    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate dimension D = d(d+1)/2.
    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Trace, which equals the sum of all D eigenvalues.
    pub fn trace(&self) -> f64 {
        let dd = self.coord_dim;
        (0..dd).map(|i| self.matrix[i * dd + i]).sum()
    }

    /// Σ of squared matrix entries, which equals Σ λᵢ².
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum()
    }

    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let dd = self.coord_dim;
        debug_assert_eq!(x.len(), dd);
        debug_assert_eq!(out.len(), dd);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * dd..(i + 1) * dd];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Action on coordinates.
    pub fn apply_coords(&self, x: &CoordVector) -> CoordVector {
        let mut out = vec![0.0; self.coord_dim];
        self.matvec_into(x.coords(), &mut out);
        CoordVector::new(out)
    }

    /// Action A ↦ T(A) on symmetric matrices.
    pub fn apply(&self, a: &SymMatrix) -> Result<SymMatrix> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs matrix dim {}",
                self.dim,
                a.dim()
            )));
        }
        vech_iso_inv(&self.apply_coords(&vech_iso(a)))
    }

    /// c·T (coefficient scaling, not a pushforward; see
    /// [`scale_pushforward`]).
    pub fn scaled(&self, c: f64) -> Self {
        MomentOperator {
            dim: self.dim,
            coord_dim: self.coord_dim,
            matrix: self.matrix.iter().map(|v| c * v).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Kahan-compensated sum.
pub(crate) fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// B = Σ wᵢ xᵢxᵢᵀ.
pub fn second_moment(s: &SampleSet) -> SymMatrix {
    weighted_second_moment(s, s.weights())
}

/// Second moment under an alternative weight vector over the same atoms
/// (weights need not be the sample's own; used for decomposition halves).
pub fn weighted_second_moment(s: &SampleSet, weights: &[f64]) -> SymMatrix {
    assert_eq!(weights.len(), s.len());
    let d = s.dim();
    let mut b = SymMatrix::zeros(d);
    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let x = s.point(k);
        for i in 0..d {
            let wxi = w * x[i];
            for j in i..d {
                b.set(i, j, b.get(i, j) + wxi * x[j]);
            }
        }
    }
    b
}

/// The empirical fourth-moment operator Σ wᵢ·vᵢvᵢᵀ with
/// vᵢ = vech_iso(xᵢxᵢᵀ).
///
/// Samples are accumulated in fixed chunks merged along a fixed binary
/// tree, so the parallel and sequential builds produce bit-identical
/// coefficients.
pub fn fourth_moment_operator(s: &SampleSet) -> Result<MomentOperator> {
    fourth_moment_operator_with_limit(s, DEFAULT_DENSE_LIMIT)
}

/// [`fourth_moment_operator`] with an explicit dimension cap.
pub fn fourth_moment_operator_with_limit(s: &SampleSet, limit: usize) -> Result<MomentOperator> {
    build_fourth_moment(s, limit, true)
}

/// Sequential reference path: same chunking, same merge tree, no thread
/// pool. Exists so benchmarks and bit-identity tests can compare the two
/// paths inside one binary.
pub fn fourth_moment_operator_sequential(s: &SampleSet) -> Result<MomentOperator> {
    build_fourth_moment(s, DEFAULT_DENSE_LIMIT, false)
}

fn build_fourth_moment(s: &SampleSet, limit: usize, parallel: bool) -> Result<MomentOperator> {
    let d = s.dim();
    if d > limit {
        return Err(Error::Capacity(format!(
            "dense operator needs D = {} coordinates for d = {d} (limit d <= {limit}); \
             use the top-k eigenpair path for larger dimensions",
            sym_len(d)
        )));
    }
    let dd = sym_len(d);
    let n = s.len();
    let n_chunks = chunk_count(n, CHUNK_SIZE);

    let leaf = |c: usize| {
        let lo = c * CHUNK_SIZE;
        let hi = (lo + CHUNK_SIZE).min(n);
        let mut acc = vec![0.0; dd * dd];
        let mut v = vec![0.0; dd];
        for k in lo..hi {
            vech_iso_outer_into(s.point(k), &mut v);
            let w = s.weights()[k];
            for a in 0..dd {
                let wa = w * v[a];
                if wa == 0.0 {
                    continue;
                }
                let row = &mut acc[a * dd..(a + 1) * dd];
                for b in a..dd {
                    row[b] += wa * v[b];
                }
            }
        }
        acc
    };
    let merge = |mut x: Vec<f64>, y: Vec<f64>| {
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi += yi;
        }
        x
    };

    let mut mat = if parallel {
        parallel::tree_reduce(n_chunks, &leaf, &merge)
    } else {
        parallel::tree_reduce_seq(n_chunks, &leaf, &merge)
    }
    .unwrap_or_else(|| vec![0.0; dd * dd]);

    for a in 0..dd {
        for b in (a + 1)..dd {
            mat[b * dd + a] = mat[a * dd + b];
        }
    }
    Ok(MomentOperator::from_raw(d, mat, Provenance::Empirical))
}

/// Operator of a centered iid coordinate law with unit variance and
/// fourth moment `m4`: A ↦ 2A + Tr(A)·I + (m4 − 3)·diag(A).
///
/// Spectrum: {d+m4−1 (×1), m4−1 (×(d−1)), 2 (×d(d−1)/2)}.
pub fn analytic_iid(dim: usize, m4: f64) -> Result<MomentOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension must be positive".into()));
    }
    if !(m4 >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fourth moment {m4} below 1 is impossible for unit variance"
        )));
    }
    let dd = sym_len(dim);
    let mut mat = vec![0.0; dd * dd];
    // Coordinate slots: slot(i,i) is a diagonal basis element, slot(i,j)
    // an off-diagonal one.
    let mut diag_slots = Vec::with_capacity(dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                diag_slots.push(k);
            } else {
                mat[k * dd + k] = 2.0;
            }
            k += 1;
        }
    }
    for &a in &diag_slots {
        for &b in &diag_slots {
            mat[a * dd + b] = if a == b { m4 - 1.0 + 1.0 } else { 1.0 };
        }
    }
    Ok(MomentOperator::from_raw(
        dim,
        mat,
        Provenance::Analytic("iid".into()),
    ))
}

/// Operator of N(0, B): A ↦ 2BAB + ⟨A,B⟩·B.
pub fn analytic_gaussian(b: &SymMatrix) -> Result<MomentOperator> {
    // PSD check through the square root (which performs it).
    let _ = matrix_sqrt_psd(b)?;
    Ok(analytic_gaussian_unchecked(b))
}

fn analytic_gaussian_unchecked(b: &SymMatrix) -> MomentOperator {
    let d = b.dim();
    let dd = sym_len(d);
    let dense = b.to_dense();
    let col = |i: usize| &dense[i * d..(i + 1) * d];
    let mut mat = vec![0.0; dd * dd];

    // Column for basis element E_(i,j): 2·B·E·B + ⟨E,B⟩·B, expressed with
    // columns bᵢ of B: B·eᵢeⱼᵀ·B = bᵢbⱼᵀ.
    let mut beta = 0;
    let mut m = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let bi = col(i);
            let bj = col(j);
            let (scale, inner) = if i == j {
                (2.0, b.get(i, i))
            } else {
                (
                    std::f64::consts::SQRT_2,
                    std::f64::consts::SQRT_2 * b.get(i, j),
                )
            };
            for p in 0..d {
                for q in p..d {
                    let sym_part = if i == j {
                        bi[p] * bi[q]
                    } else {
                        bi[p] * bj[q] + bj[p] * bi[q]
                    };
                    m.set(p, q, scale * sym_part + inner * b.get(p, q));
                }
            }
            let colv = vech_iso(&m);
            for (alpha, v) in colv.coords().iter().enumerate() {
                mat[alpha * dd + beta] = *v;
            }
            beta += 1;
        }
    }
    // Symmetrize exactly: the operator is self-adjoint, entries may differ
    // in the last ulp between (α,β) and (β,α).
    for a in 0..dd {
        for bidx in (a + 1)..dd {
            let avg = 0.5 * (mat[a * dd + bidx] + mat[bidx * dd + a]);
            mat[a * dd + bidx] = avg;
            mat[bidx * dd + a] = avg;
        }
    }
    MomentOperator::from_raw(d, mat, Provenance::Analytic("gaussian".into()))
}

/// Convex combination Σ wᵢ·Tᵢ of operators on the same space.
pub fn mixture_operator(parts: &[(f64, &MomentOperator)]) -> Result<MomentOperator> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter("empty mixture".into()));
    }
    let dim = parts[0].1.dim();
    if parts.iter().any(|(_, t)| t.dim() != dim) {
        return Err(Error::DimensionMismatch(
            "mixture parts have different dimensions".into(),
        ));
    }
    if parts.iter().any(|(w, _)| !(*w > 0.0)) {
        return Err(Error::InvalidParameter(
            "mixture weights must be positive".into(),
        ));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {total}, expected 1"
        )));
    }
    let dd = sym_len(dim);
    let mut mat = vec![0.0; dd * dd];
    for (w, t) in parts {
        for (m, v) in mat.iter_mut().zip(t.matrix()) {
            *m += w * v;
        }
    }
    Ok(MomentOperator::from_raw(
        dim,
        mat,
        Provenance::Analytic("mixture".into()),
    ))
}

/// Operator of the pushforward x ↦ c·x: returns c⁴·T.
pub fn scale_pushforward(t: &MomentOperator, c: f64) -> Result<MomentOperator> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale factor must be positive, got {c}"
        )));
    }
    Ok(t.scaled(c * c * c * c))
}

/// Operator of the uniform distribution on the unit sphere S^{d−1}:
/// the Gaussian operator scaled by 1/(d(d+2)).
/// Spectrum: λ₁ = 1/d, λᵢ = 2/(d(d+2)) for i ≥ 2.
pub fn analytic_sphere(dim: usize) -> Result<MomentOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension must be positive".into()));
    }
    let g = analytic_gaussian_unchecked(&SymMatrix::identity(dim));
    let c = 1.0 / (dim as f64 * (dim + 2) as f64);
    Ok(g.scaled(c)
        .with_provenance(Provenance::Analytic("sphere".into())))
}

/// Prefixes every point with a constant coordinate `a`, producing the
/// product measure of a point mass and the sample measure on ℝ^{d+1}.
/// Splitting the lifted measure sees first-order differences through the
/// cross terms of the new coordinate.
pub fn lift_first_order(s: &SampleSet, a: f64) -> SampleSet {
    let d = s.dim();
    let n = s.len();
    let mut points = Vec::with_capacity(n * (d + 1));
    for k in 0..n {
        points.push(a);
        points.extend_from_slice(s.point(k));
    }
    SampleSet::new(d + 1, points, s.weights().to_vec()).expect("lift preserves validity")
}

/// Model families with closed-form moments.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticModel {
    /// N(0, B).
    Gaussian { cov: SymMatrix },
    /// Centered iid coordinates with unit variance and fourth moment m4.
    /// Samplable for m4 ∈ {1 (±1 signs), 9/5 (uniform cube), 3 (normal)}.
    Iid { dim: usize, m4: f64 },
    /// ½·N(0,P) + ½·N(0,I−P) for an orthogonal projection P.
    ProjectionMixture { dim: usize, proj: SymMatrix },
    /// Uniform on the 2d points ±e₁,…,±e_d.
    DiscreteAxes { dim: usize },
    /// Uniform on the unit sphere S^{d−1}.
    Sphere { dim: usize },
    /// Pushforward x ↦ c·x of an inner model.
    Scaled {
        inner: Box<AnalyticModel>,
        factor: f64,
    },
    /// Mixture with positive weights summing to 1.
    Mixture { parts: Vec<(f64, AnalyticModel)> },
    /// δ_a × inner on ℝ^{d+1}.
    Lifted {
        inner: Box<AnalyticModel>,
        shift: f64,
    },
}

impl AnalyticModel {
    /// The canonical projection mixture: P projects onto the first d/2
    /// coordinates.
    pub fn projection_mixture_canonical(dim: usize) -> Result<AnalyticModel> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "projection mixture needs an even dimension, got {dim}"
            )));
        }
        let mut p = SymMatrix::zeros(dim);
        for i in 0..dim / 2 {
            p.set(i, i, 1.0);
        }
        Ok(AnalyticModel::ProjectionMixture { dim, proj: p })
    }

    /// Output dimension of sampled points.
    pub fn dim(&self) -> usize {
        match self {
            AnalyticModel::Gaussian { cov } => cov.dim(),
            AnalyticModel::Iid { dim, .. }
            | AnalyticModel::ProjectionMixture { dim, .. }
            | AnalyticModel::DiscreteAxes { dim }
            | AnalyticModel::Sphere { dim } => *dim,
            AnalyticModel::Scaled { inner, .. } => inner.dim(),
            AnalyticModel::Mixture { parts } => parts[0].1.dim(),
            AnalyticModel::Lifted { inner, .. } => inner.dim() + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticModel::Gaussian { .. } | AnalyticModel::Sphere { .. } => Ok(()),
            AnalyticModel::DiscreteAxes { dim } => {
                if *dim == 0 {
                    Err(Error::InvalidDimension("dimension must be positive".into()))
                } else {
                    Ok(())
                }
            }
            AnalyticModel::Iid { m4, .. } => {
                if *m4 >= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "iid fourth moment {m4} must be >= 1"
                    )))
                }
            }
            AnalyticModel::ProjectionMixture { dim, proj } => {
                if proj.dim() != *dim {
                    return Err(Error::DimensionMismatch(
                        "projection dimension differs from model dimension".into(),
                    ));
                }
                // P must be idempotent.
                let dense = proj.to_dense();
                let d = *dim;
                for i in 0..d {
                    for j in i..d {
                        let pij: f64 = (0..d).map(|k| dense[i * d + k] * dense[k * d + j]).sum();
                        if (pij - proj.get(i, j)).abs() > 1e-10 {
                            return Err(Error::InvalidParameter(
                                "projection matrix is not idempotent".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
            AnalyticModel::Scaled { inner, factor } => {
                if !(*factor > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "scale factor must be positive, got {factor}"
                    )));
                }
                inner.validate()
            }
            AnalyticModel::Mixture { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("empty mixture".into()));
                }
                let dim = parts[0].1.dim();
                let mut total = 0.0;
                for (w, m) in parts {
                    if !(*w > 0.0) {
                        return Err(Error::InvalidParameter(
                            "mixture weights must be positive".into(),
                        ));
                    }
                    if m.dim() != dim {
                        return Err(Error::DimensionMismatch(
                            "mixture parts have different dimensions".into(),
                        ));
                    }
                    m.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            AnalyticModel::Lifted { inner, .. } => inner.validate(),
        }
    }
}

/// The model's operator in closed form. Unsupported for lifted models.
pub fn analytic_operator(model: &AnalyticModel) -> Result<MomentOperator> {
    model.validate()?;
    match model {
        AnalyticModel::Gaussian { cov } => analytic_gaussian(cov),
        AnalyticModel::Iid { dim, m4 } => analytic_iid(*dim, *m4),
        AnalyticModel::ProjectionMixture { dim, proj } => {
            let q = SymMatrix::identity(*dim).sub(proj)?;
            let t1 = analytic_gaussian(proj)?;
            let t2 = analytic_gaussian(&q)?;
            Ok(mixture_operator(&[(0.5, &t1), (0.5, &t2)])?
                .with_provenance(Provenance::Analytic("projection-mixture".into())))
        }
        AnalyticModel::DiscreteAxes { dim } => {
            let d = *dim;
            let dd = sym_len(d);
            let mut mat = vec![0.0; dd * dd];
            let inv = 1.0 / d as f64;
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    if i == j {
                        mat[k * dd + k] = inv;
                    }
                    k += 1;
                }
            }
            Ok(MomentOperator::from_raw(
                d,
                mat,
                Provenance::Analytic("discrete-axes".into()),
            ))
        }
        AnalyticModel::Sphere { dim } => analytic_sphere(*dim),
        AnalyticModel::Scaled { inner, factor } => {
            scale_pushforward(&analytic_operator(inner)?, *factor)
        }
        AnalyticModel::Mixture { parts } => {
            let ops: Vec<(f64, MomentOperator)> = parts
                .iter()
                .map(|(w, m)| analytic_operator(m).map(|t| (*w, t)))
                .collect::<Result<_>>()?;
            let refs: Vec<(f64, &MomentOperator)> = ops.iter().map(|(w, t)| (*w, t)).collect();
            mixture_operator(&refs)
        }
        AnalyticModel::Lifted { .. } => Err(Error::Unsupported(
            "no closed-form operator for lifted models; sample instead".into(),
        )),
    }
}

/// The model's second moment in closed form.
pub fn analytic_second_moment(model: &AnalyticModel) -> Result<SymMatrix> {
    model.validate()?;
    match model {
        AnalyticModel::Gaussian { cov } => Ok(cov.clone()),
        AnalyticModel::Iid { dim, .. } => Ok(SymMatrix::identity(*dim)),
        AnalyticModel::ProjectionMixture { dim, .. } => Ok(SymMatrix::identity(*dim).scaled(0.5)),
        AnalyticModel::DiscreteAxes { dim } | AnalyticModel::Sphere { dim } => {
            Ok(SymMatrix::identity(*dim).scaled(1.0 / *dim as f64))
        }
        AnalyticModel::Scaled { inner, factor } => {
            Ok(analytic_second_moment(inner)?.scaled(factor * factor))
        }
        AnalyticModel::Mixture { parts } => {
            let dim = parts[0].1.dim();
            let mut b = SymMatrix::zeros(dim);
            for (w, m) in parts {
                b = b.add(&analytic_second_moment(m)?.scaled(*w))?;
            }
            Ok(b)
        }
        AnalyticModel::Lifted { inner, shift } => {
            // All supported inner families are centered, so the lifted
            // second moment is block-diagonal.
            let bi = analytic_second_moment(inner)?;
            let d = bi.dim();
            SymMatrix::from_fn(d + 1, |i, j| {
                if i == 0 && j == 0 {
                    shift * shift
                } else if i == 0 {
                    0.0
                } else {
                    bi.get(i - 1, j - 1)
                }
            })
        }
    }
}

/// Draws n points from the model, deterministically for a fixed seed
/// (see [`RNG_ALGORITHM`]). For `DiscreteAxes`, sampling is the exact
/// 2d-atom enumeration and requires n = 2d.
pub fn sample(model: &AnalyticModel, n: usize, seed: u64) -> Result<SampleSet> {
    sample_labeled(model, n, seed).map(|(s, _)| s)
}

/// [`sample`] keeping the ground-truth component label of each point
/// (meaningful for mixtures; zero elsewhere).
pub fn sample_labeled(model: &AnalyticModel, n: usize, seed: u64) -> Result<(SampleSet, Vec<u32>)> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if let AnalyticModel::DiscreteAxes { dim } = model {
        let d = *dim;
        if n != 2 * d {
            return Err(Error::Unsupported(format!(
                "discrete-axes sampling is exact enumeration of 2d = {} atoms; got n = {n}",
                2 * d
            )));
        }
        let mut points = vec![0.0; 2 * d * d];
        for i in 0..d {
            points[(2 * i) * d + i] = 1.0;
            points[(2 * i + 1) * d + i] = -1.0;
        }
        return Ok((SampleSet::uniform(d, points)?, vec![0; 2 * d]));
    }

    let sampler = Sampler::prepare(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let mut points = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut buf = vec![0.0; d];
    for _ in 0..n {
        let label = sampler.draw(&mut rng, &mut buf);
        points.extend_from_slice(&buf);
        labels.push(label);
    }
    Ok((SampleSet::uniform(d, points)?, labels))
}

/// Pre-resolved sampling plan (matrix square roots computed once).
enum Sampler {
    Gaussian {
        sqrt_cov: Vec<f64>,
        dim: usize,
    },
    IidNormal {
        dim: usize,
    },
    IidCube {
        dim: usize,
    },
    IidSigns {
        dim: usize,
    },
    Projection {
        proj: Vec<f64>,
        comp: Vec<f64>,
        dim: usize,
    },
    Sphere {
        dim: usize,
    },
    Axes {
        dim: usize,
    },
    Scaled {
        inner: Box<Sampler>,
        factor: f64,
    },
    Mixture {
        cumulative: Vec<f64>,
        parts: Vec<Sampler>,
        dim: usize,
    },
    Lifted {
        inner: Box<Sampler>,
        shift: f64,
    },
}

impl Sampler {
    fn prepare(model: &AnalyticModel) -> Result<Sampler> {
        Ok(match model {
            AnalyticModel::Gaussian { cov } => Sampler::Gaussian {
                sqrt_cov: matrix_sqrt_psd(cov)?.to_dense(),
                dim: cov.dim(),
            },
            AnalyticModel::Iid { dim, m4 } => {
                if (m4 - 3.0).abs() < 1e-12 {
                    Sampler::IidNormal { dim: *dim }
                } else if (m4 - 1.8).abs() < 1e-12 {
                    Sampler::IidCube { dim: *dim }
                } else if (m4 - 1.0).abs() < 1e-12 {
                    Sampler::IidSigns { dim: *dim }
                } else {
                    return Err(Error::Unsupported(format!(
                        "no sampler for iid with m4 = {m4}; supported: 1, 9/5, 3"
                    )));
                }
            }
            AnalyticModel::ProjectionMixture { dim, proj } => {
                let comp = SymMatrix::identity(*dim).sub(proj)?;
                Sampler::Projection {
                    proj: proj.to_dense(),
                    comp: comp.to_dense(),
                    dim: *dim,
                }
            }
            AnalyticModel::DiscreteAxes { dim } => Sampler::Axes { dim: *dim },
            AnalyticModel::Sphere { dim } => Sampler::Sphere { dim: *dim },
            AnalyticModel::Scaled { inner, factor } => Sampler::Scaled {
                inner: Box::new(Sampler::prepare(inner)?),
                factor: *factor,
            },
            AnalyticModel::Mixture { parts } => {
                let mut cumulative = Vec::with_capacity(parts.len());
                let mut acc = 0.0;
                for (w, _) in parts {
                    acc += w;
                    cumulative.push(acc);
                }
                let samplers = parts
                    .iter()
                    .map(|(_, m)| Sampler::prepare(m))
                    .collect::<Result<Vec<_>>>()?;
                Sampler::Mixture {
                    cumulative,
                    parts: samplers,
                    dim: model.dim(),
                }
            }
            AnalyticModel::Lifted { inner, shift } => Sampler::Lifted {
                inner: Box::new(Sampler::prepare(inner)?),
                shift: *shift,
            },
        })
    }

    /// Fills `out` with one draw; returns the component label.
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> u32 {
        match self {
            Sampler::Gaussian { sqrt_cov, dim } => {
                let g: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..*dim {
                    out[i] = (0..*dim).map(|j| sqrt_cov[i * dim + j] * g[j]).sum();
                }
                0
            }
            Sampler::IidNormal { dim } => {
                for o in out[..*dim].iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
                0
            }
            Sampler::IidCube { dim } => {
                let a = 3.0f64.sqrt();
                for o in out[..*dim].iter_mut() {
                    *o = rng.gen_range(-a..a);
                }
                0
            }
            Sampler::IidSigns { dim } => {
                for o in out[..*dim].iter_mut() {
                    *o = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                0
            }
            Sampler::Projection { proj, comp, dim } => {
                let d = *dim;
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let which = rng.gen::<bool>();
                let m = if which { comp } else { proj };
                for i in 0..d {
                    out[i] = (0..d).map(|j| m[i * d + j] * g[j]).sum();
                }
                which as u32
            }
            Sampler::Sphere { dim } => loop {
                let mut norm_sq = 0.0;
                for o in out[..*dim].iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *o = g;
                    norm_sq += g * g;
                }
                if norm_sq > 0.0 {
                    let inv = 1.0 / norm_sq.sqrt();
                    for o in out[..*dim].iter_mut() {
                        *o *= inv;
                    }
                    return 0;
                }
            },
            Sampler::Axes { dim } => {
                let k = rng.gen_range(0..2 * dim);
                out[..*dim].fill(0.0);
                out[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                (k / 2) as u32
            }
            Sampler::Scaled { inner, factor } => {
                let label = inner.draw(rng, out);
                for o in out.iter_mut() {
                    *o *= factor;
                }
                label
            }
            Sampler::Mixture {
                cumulative,
                parts,
                dim,
            } => {
                let u: f64 = rng.gen();
                let mut k = cumulative.len() - 1;
                for (i, c) in cumulative.iter().enumerate() {
                    if u < *c {
                        k = i;
                        break;
                    }
                }
                parts[k].draw(rng, &mut out[..*dim]);
                k as u32
            }
            Sampler::Lifted { inner, shift } => {
                out[0] = *shift;
                let label = inner.draw(rng, &mut out[1..]);
                label
            }
        }
    }
}
