//! The inner product space of d×d real symmetric matrices.
//!
//! Matrices are stored as the packed upper triangle, so symmetry is
//! structural rather than a runtime invariant. The space carries the
//! Frobenius inner product ⟨A,B⟩ = Tr(AB), and [`vech_iso`] embeds it
//! isometrically into ℝ^D, D = d(d+1)/2, by scaling off-diagonal entries
//! by √2. In that coordinate system the inner product is the plain dot
//! product, so operator eigenvalues can be read off a plain symmetric
//! matrix.

use crate::error::{Error, Result};

/// Default cap on the side length of dense eigendecompositions.
pub const DEFAULT_EIG_LIMIT: usize = 512;

/// Relative asymmetry accepted by [`SymMatrix::from_dense`] before the
/// input is rejected instead of symmetrized.
const SYMMETRIZE_TOL: f64 = 1e-8;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A d×d real symmetric matrix, stored as its upper triangle
/// (row-major, i ≤ j).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

/// Number of packed entries of a d×d symmetric matrix.
pub fn sym_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Recovers d from a packed length D = d(d+1)/2, if D is triangular.
pub fn sym_dim_for_len(len: usize) -> Result<usize> {
    let d = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if sym_len(d) == len && len > 0 {
        Ok(d)
    } else {
        Err(Error::InvalidDimension(format!(
            "length {len} is not of the form d(d+1)/2"
        )))
    }
}

#[inline]
fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < dim);
    // Row i starts after Σ_{r<i}(dim − r) packed entries.
    i * (2 * dim - i + 1) / 2 + (j - i)
}

impl SymMatrix {
    /// Zero matrix.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        SymMatrix {
            dim,
            data: vec![0.0; sym_len(dim)],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a function of (row, col), evaluated on i ≤ j only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!("non-finite entry at ({i},{j})")));
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Builds from a full row-major d×d buffer. Near-symmetric inputs
    /// (max |A_ij − A_ji| ≤ 1e-8·‖A‖_F) are symmetrized as (A + Aᵀ)/2;
    /// larger asymmetry is rejected.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                dense.len()
            )));
        }
        let frob: f64 = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max((dense[i * dim + j] - dense[j * dim + i]).abs());
            }
        }
        if max_asym > SYMMETRIZE_TOL * frob.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidData(format!(
                "matrix asymmetry {max_asym:.3e} exceeds {SYMMETRIZE_TOL:.0e}·‖A‖_F"
            )));
        }
        SymMatrix::from_fn(dim, |i, j| {
            if i == j {
                dense[i * dim + i]
            } else {
                0.5 * (dense[i * dim + j] + dense[j * dim + i])
            }
        })
    }

    /// The rank-one matrix xxᵀ.
    pub fn outer(x: &[f64]) -> Self {
        let dim = x.len();
        assert!(dim > 0);
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, x[i] * x[j]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[tri_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[tri_index(self.dim, i, j)] = v;
    }

    /// Full row-major d×d copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = self.get(i, j);
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        frobenius_inner(self, self).expect("same matrix")
    }

    /// y = A·x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// xᵀ·A·x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            acc += self.get(i, i) * x[i] * x[i];
            for j in (i + 1)..d {
                acc += 2.0 * self.get(i, j) * x[i] * x[j];
            }
        }
        acc
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// Packed upper-triangle slice (row-major, i ≤ j).
    pub fn packed(&self) -> &[f64] {
        &self.data
    }
}

/// Coordinates of a symmetric matrix in the isometric vech basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordVector {
    coords: Vec<f64>,
}

impl CoordVector {
    pub fn new(coords: Vec<f64>) -> Self {
        CoordVector { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dot(&self, other: &CoordVector) -> f64 {
        assert_eq!(self.coords.len(), other.coords.len());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Isometric half-vectorization: diagonal entries are copied and
/// off-diagonal entries scaled by √2, so that
/// `dot(vech_iso(A), vech_iso(B)) = Tr(AB)`.
pub fn vech_iso(a: &SymMatrix) -> CoordVector {
    let d = a.dim();
    let mut coords = Vec::with_capacity(sym_len(d));
    for i in 0..d {
        for j in i..d {
            let v = a.get(i, j);
            coords.push(if i == j { v } else { SQRT2 * v });
        }
    }
    CoordVector { coords }
}

/// Inverse of [`vech_iso`]. Fails if the coordinate length is not of the
/// form d(d+1)/2.
pub fn vech_iso_inv(v: &CoordVector) -> Result<SymMatrix> {
    let d = sym_dim_for_len(v.dim())?;
    let mut m = SymMatrix::zeros(d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let c = v.coords[k];
            m.set(i, j, if i == j { c } else { c / SQRT2 });
            k += 1;
        }
    }
    Ok(m)
}

/// Writes vech_iso(xxᵀ) into `out` without building the intermediate
/// matrix. `out.len()` must be `sym_len(x.len())`.
pub(crate) fn vech_iso_outer_into(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    debug_assert_eq!(out.len(), sym_len(d));
    let mut k = 0;
    for i in 0..d {
        out[k] = x[i] * x[i];
        k += 1;
        for j in (i + 1)..d {
            out[k] = SQRT2 * x[i] * x[j];
            k += 1;
        }
    }
}

/// Frobenius inner product ⟨A,B⟩ = Tr(AB).
pub fn frobenius_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim, b.dim)));
    }
    let d = a.dim;
    let mut acc = 0.0;
    for i in 0..d {
        acc += a.get(i, i) * b.get(i, i);
        for j in (i + 1)..d {
            acc += 2.0 * a.get(i, j) * b.get(i, j);
        }
    }
    Ok(acc)
}

/// Eigendecomposition of a small symmetric matrix: descending eigenvalues
/// with orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SmallSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Row k is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SmallSpectrum {
    /// Reconstructs Σ f(λ_k)·v_k v_kᵀ.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.eigenvectors[0].len();
        let mut m = SymMatrix::zeros(d);
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let c = f(*lam);
            if c == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in i..d {
                    m.set(i, j, m.get(i, j) + c * v[i] * v[j]);
                }
            }
        }
        m
    }
}

/// Eigendecomposition via cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius mass drops below
/// 1e-12·‖A‖_F, with a cap of 100 sweeps. Rotation order is fixed
/// (row-cyclic), eigenvalues are returned descending, and each
/// eigenvector's sign is fixed so its first coordinate above 1e-12 in
/// magnitude is positive, making the output deterministic.
pub fn eig_sym_small(a: &SymMatrix) -> Result<SmallSpectrum> {
    eig_sym_small_with_limit(a, DEFAULT_EIG_LIMIT)
}

/// [`eig_sym_small`] with an explicit dimension cap.
pub fn eig_sym_small_with_limit(a: &SymMatrix, limit: usize) -> Result<SmallSpectrum> {
    if a.dim() > limit {
        return Err(Error::Capacity(format!(
            "dense eigendecomposition of dimension {} exceeds limit {limit}",
            a.dim()
        )));
    }
    let mut dense = a.to_dense();
    jacobi_eigh(&mut dense, a.dim())
}

/// Cyclic Jacobi on a row-major dense symmetric buffer (consumed as
/// scratch). Shared by the small-matrix and operator-matrix paths.
pub(crate) fn jacobi_eigh(a: &mut [f64], n: usize) -> Result<SmallSpectrum> {
    const TOL_REL: f64 = 1e-12;
    const MAX_SWEEPS: usize = 100;

    debug_assert_eq!(a.len(), n * n);
    if n == 1 {
        return Ok(SmallSpectrum {
            eigenvalues: vec![a[0]],
            eigenvectors: vec![vec![1.0]],
        });
    }

    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = TOL_REL * frob;

    // v is accumulated row-major; column k will be the k-th eigenvector.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut acc = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    let x = a[p * n + q];
                    acc += 2.0 * x * x;
                }
            }
            acc.sqrt()
        };
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Rotation angle; the stable formula from the classic
                // Jacobi scheme.
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let s = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -s
                    } else {
                        s
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        let new_p = akp - s * (akq + tau * akp);
                        let new_q = akq + s * (akp - tau * akq);
                        a[k * n + p] = new_p;
                        a[p * n + k] = new_p;
                        a[k * n + q] = new_q;
                        a[q * n + k] = new_q;
                    }
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp - s * (vkq + tau * vkp);
                    v[k * n + q] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }
    if !converged {
        // One more check so a final sweep that finished the job counts.
        let off: f64 = {
            let mut acc = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    let x = a[p * n + q];
                    acc += 2.0 * x * x;
                }
            }
            acc.sqrt()
        };
        if off > threshold {
            return Err(Error::NonConvergence(format!(
                "Jacobi: off-diagonal mass {off:.3e} above {threshold:.3e} after {MAX_SWEEPS} sweeps (n={n})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("finite eigenvalues")
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &k in &order {
        eigenvalues.push(a[k * n + k]);
        let mut col: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
        fix_sign(&mut col);
        eigenvectors.push(col);
    }
    Ok(SmallSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Flips a vector so its first coordinate with magnitude above 1e-12 is
/// positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    for &x in v.iter() {
        if x.abs() > 1e-12 {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Splits A = A₊ − A₋ with both parts positive semidefinite and
/// ‖A₊ + A₋‖_F = ‖A‖_F, via the spectral decomposition.
pub fn psd_split(a: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let spec = eig_sym_small(a)?;
    let lam_max = spec.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let clamp = |l: f64| if l.abs() <= 1e-10 * lam_max { 0.0 } else { l };
    let plus = spec.rebuild(|l| clamp(l).max(0.0));
    let minus = spec.rebuild(|l| (-clamp(l)).max(0.0));
    Ok((plus, minus))
}

/// Symmetric PSD square root: returns S with S·S = B.
///
/// Fails if B has an eigenvalue below −1e-10·λmax.
pub fn matrix_sqrt_psd(b: &SymMatrix) -> Result<SymMatrix> {
    let spec = eig_sym_small(b)?;
    let lam_max = spec.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = spec.eigenvalues.last() {
        if min < -1e-10 * lam_max.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(format!(
                "eigenvalue {min:.3e} below tolerance for λmax = {lam_max:.3e}"
            )));
        }
    }
    Ok(spec.rebuild(|l| l.max(0.0).sqrt()))
}

/// Pseudo-inverse square root B^{+1/2}, with eigenvalues below
/// `cutoff_rel`·λmax treated as zero. Used for whitening.
pub(crate) fn pinv_sqrt(b: &SymMatrix, cutoff_rel: f64) -> Result<SymMatrix> {
    let spec = eig_sym_small(b)?;
    let lam_max = spec.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = spec.eigenvalues.last() {
        if min < -1e-10 * lam_max.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(format!(
                "eigenvalue {min:.3e} below tolerance for λmax = {lam_max:.3e}"
            )));
        }
    }
    let cutoff = cutoff_rel * lam_max;
    Ok(spec.rebuild(|l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        SymMatrix::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn vech_identity_d2() {
        let v = vech_iso(&SymMatrix::identity(2));
        assert_eq!(v.coords(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn vech_offdiag_scaling() {
        // e₁e₂ᵀ + e₂e₁ᵀ in d = 2.
        let mut a = SymMatrix::zeros(2);
        a.set(0, 1, 1.0);
        let v = vech_iso(&a);
        assert_eq!(v.coords()[0], 0.0);
        assert!((v.coords()[1] - SQRT2).abs() < 1e-15);
        assert_eq!(v.coords()[2], 0.0);
        assert!((a.frobenius_norm() - SQRT2).abs() < 1e-15);
        assert!((v.norm() - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn vech_self_dot_matches_entry_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sym(4, &mut rng);
        let v = vech_iso(&a);
        // Direct double-loop Frobenius sum as the oracle.
        let dense = a.to_dense();
        let brute: f64 = dense.iter().map(|x| x * x).sum();
        assert!((v.dot(&v) - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn vech_inv_rejects_bad_length() {
        let err = vech_iso_inv(&CoordVector::new(vec![0.0; 5])).unwrap_err();
        assert!(matches!(err, Error::InvalidDimension(_)));
    }

    #[test]
    fn vech_inv_hand_case() {
        let m = vech_iso_inv(&CoordVector::new(vec![1.0, SQRT2, 1.0])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frobenius_identity_cases() {
        let i5 = SymMatrix::identity(5);
        assert_eq!(frobenius_inner(&i5, &i5).unwrap(), 5.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_sym(5, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let quad = a.quad_form(&x);
        let inner = frobenius_inner(&a, &SymMatrix::outer(&x)).unwrap();
        assert!((quad - inner).abs() <= 1e-12 * quad.abs().max(1.0));
    }

    #[test]
    fn complementary_projections_orthogonal() {
        // P projects onto the first two coordinates of ℝ⁴.
        let mut p = SymMatrix::zeros(4);
        p.set(0, 0, 1.0);
        p.set(1, 1, 1.0);
        let ip = SymMatrix::identity(4).sub(&p).unwrap();
        assert_eq!(frobenius_inner(&p, &ip).unwrap(), 0.0);
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let spec = eig_sym_small(&SymMatrix::identity(3)).unwrap();
        for l in &spec.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        let mut d = SymMatrix::zeros(3);
        d.set(0, 0, 3.0);
        d.set(1, 1, 1.0);
        d.set(2, 2, -2.0);
        let spec = eig_sym_small(&d).unwrap();
        assert_eq!(spec.eigenvalues, vec![3.0, 1.0, -2.0]);
    }

    #[test]
    fn eig_trace_and_frobenius_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sym(6, &mut rng);
        let spec = eig_sym_small(&a).unwrap();
        let sum: f64 = spec.eigenvalues.iter().sum();
        let sum_sq: f64 = spec.eigenvalues.iter().map(|l| l * l).sum();
        assert!((sum - a.trace()).abs() <= 1e-10 * a.trace().abs().max(1.0));
        let fr2 = a.frobenius_norm_sq();
        assert!((sum_sq - fr2).abs() <= 1e-10 * fr2.max(1.0));
    }

    #[test]
    fn eig_residual_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_sym(8, &mut rng);
        let spec = eig_sym_small(&a).unwrap();
        let lam1 = spec.eigenvalues[0].abs().max(1e-30);
        for (lam, v) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
            let av = a.apply(v);
            let res: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - lam * y) * (x - lam * y))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-10 * lam1, "residual {res}");
        }
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = spec.eigenvectors[i]
                    .iter()
                    .zip(&spec.eigenvectors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn eig_recovers_planted_spectrum() {
        // Q from Gram-Schmidt of a random matrix, spectrum planted as
        // Q·diag(λ)·Qᵀ.
        let d = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q: Vec<Vec<f64>> = Vec::new();
        for _ in 0..d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for u in &q {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            q.push(v);
        }
        let planted: Vec<f64> = (0..d).map(|k| (k as f64) - 2.5).collect();
        let a = SymMatrix::from_fn(d, |i, j| {
            (0..d).map(|k| planted[k] * q[k][i] * q[k][j]).sum()
        })
        .unwrap();
        let spec = eig_sym_small(&a).unwrap();
        let mut want = planted.clone();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in spec.eigenvalues.iter().zip(&want) {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn eig_respects_limit() {
        let a = SymMatrix::identity(4);
        assert!(matches!(
            eig_sym_small_with_limit(&a, 3),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn psd_split_cases() {
        let mut d = SymMatrix::zeros(2);
        d.set(0, 0, 1.0);
        d.set(1, 1, -1.0);
        let (p, m) = psd_split(&d).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-12 && p.get(1, 1).abs() < 1e-12);
        assert!((m.get(1, 1) - 1.0).abs() < 1e-12 && m.get(0, 0).abs() < 1e-12);

        let i3 = SymMatrix::identity(3);
        let (p, m) = psd_split(&i3).unwrap();
        assert!((p.sub(&i3).unwrap().frobenius_norm()) < 1e-12);
        assert!(m.frobenius_norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_sym(5, &mut rng);
        let (p, m) = psd_split(&a).unwrap();
        let fr = a.frobenius_norm();
        assert!(p.sub(&m).unwrap().sub(&a).unwrap().frobenius_norm() <= 1e-10 * fr);
        assert!((p.add(&m).unwrap().frobenius_norm() - fr).abs() <= 1e-10 * fr);
    }

    #[test]
    fn sqrt_psd_cases() {
        let s = matrix_sqrt_psd(&SymMatrix::identity(3)).unwrap();
        assert!(s.sub(&SymMatrix::identity(3)).unwrap().frobenius_norm() < 1e-12);

        let mut d = SymMatrix::zeros(2);
        d.set(0, 0, 4.0);
        d.set(1, 1, 9.0);
        let s = matrix_sqrt_psd(&d).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((s.get(1, 1) - 3.0).abs() < 1e-12);

        // Random PSD of d = 6 via G·Gᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let b = SymMatrix::from_fn(6, |i, j| (0..6).map(|k| g[i][k] * g[j][k]).sum()).unwrap();
        let s = matrix_sqrt_psd(&b).unwrap();
        let dense_s = s.to_dense();
        let ss = SymMatrix::from_fn(6, |i, j| {
            (0..6)
                .map(|k| dense_s[i * 6 + k] * dense_s[k * 6 + j])
                .sum()
        })
        .unwrap();
        assert!(ss.sub(&b).unwrap().frobenius_norm() <= 1e-9 * b.frobenius_norm());

        let mut neg = SymMatrix::zeros(2);
        neg.set(0, 0, 1.0);
        neg.set(1, 1, -0.5);
        assert!(matches!(matrix_sqrt_psd(&neg), Err(Error::NotPsd(_))));
    }

    #[test]
    fn from_dense_symmetrizes_noise_and_rejects_garbage() {
        let noisy = vec![1.0, 0.5 + 1e-12, 0.5 - 1e-12, 2.0];
        let m = SymMatrix::from_dense(2, &noisy).unwrap();
        assert!((m.get(0, 1) - 0.5).abs() < 1e-11);

        let bad = vec![1.0, 0.9, 0.1, 2.0];
        assert!(matches!(
            SymMatrix::from_dense(2, &bad),
            Err(Error::InvalidData(_))
        ));
    }

    proptest! {
        #[test]
        fn vech_round_trip(d in 1usize..9, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sym(d, &mut rng);
            let back = vech_iso_inv(&vech_iso(&a)).unwrap();
            // Diagonal entries are copied verbatim; off-diagonals go
            // through ·√2 and /√2, which is exact up to one ulp (binary
            // floats cannot round-trip an irrational scale exactly).
            for i in 0..d {
                for j in i..d {
                    let (x, y) = (a.get(i, j), back.get(i, j));
                    if i == j {
                        prop_assert_eq!(x, y);
                    } else {
                        let ulps = (x.to_bits() as i64 - y.to_bits() as i64).abs();
                        prop_assert!(ulps <= 1, "({i},{j}): {x} vs {y}");
                    }
                }
            }
        }

        #[test]
        fn vech_isometry(d in 1usize..17, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sym(d, &mut rng);
            let b = random_sym(d, &mut rng);
            let dot = vech_iso(&a).dot(&vech_iso(&b));
            let tr = frobenius_inner(&a, &b).unwrap();
            let bound = 1e-12 * a.frobenius_norm() * b.frobenius_norm();
            prop_assert!((dot - tr).abs() <= bound.max(1e-300));
        }

        #[test]
        fn zero_vector_maps_to_zero_matrix(d in 1usize..9) {
            let v = CoordVector::new(vec![0.0; sym_len(d)]);
            let m = vech_iso_inv(&v).unwrap();
            prop_assert!(m.frobenius_norm() == 0.0);
        }
    }
}
