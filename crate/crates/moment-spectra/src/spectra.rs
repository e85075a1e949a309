//! Eigendecomposition of moment operators, the rank-one operator B⊗B,
//! and the centered operator T − B⊗B whose leading eigenvector drives the
//! decomposition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::moments::{MomentOperator, Provenance};
use crate::symspace::{self, jacobi_eigh, vech_iso, CoordVector, SymMatrix};

/// Relative gap under which the two leading eigenvalues are reported as a
/// degenerate pair (any orthonormal basis of the leading eigenspace is
/// then equally valid).
const DEGENERACY_TOL: f64 = 1e-10;

/// Eigenvalues in descending order with orthonormal eigenvectors in the
/// vech coordinates. `top_eigens` stores only the leading k pairs.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<CoordVector>,
    degenerate: bool,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[CoordVector] {
        &self.eigenvectors
    }

    /// True when λ₁ and λ₂ agree to within 1e-10 relative.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn degeneracy_flag(eigenvalues: &[f64]) -> bool {
    if eigenvalues.len() < 2 {
        return false;
    }
    let (l1, l2) = (eigenvalues[0], eigenvalues[1]);
    (l1 - l2).abs() <= DEGENERACY_TOL * l1.abs().max(f64::MIN_POSITIVE)
}

/// All D = d(d+1)/2 eigenpairs via the dense Jacobi path.
pub fn full_spectrum(t: &MomentOperator) -> Result<Spectrum> {
    full_spectrum_with_limit(t, symspace::DEFAULT_EIG_LIMIT)
}

/// [`full_spectrum`] with an explicit cap on the coordinate dimension D.
pub fn full_spectrum_with_limit(t: &MomentOperator, limit: usize) -> Result<Spectrum> {
    let dd = t.coord_dim();
    if dd > limit {
        return Err(Error::Capacity(format!(
            "dense eigendecomposition of D = {dd} exceeds limit {limit}; use top_eigens"
        )));
    }
    let mut scratch = t.matrix().to_vec();
    let small = jacobi_eigh(&mut scratch, dd)?;
    let degenerate = degeneracy_flag(&small.eigenvalues);
    Ok(Spectrum {
        eigenvalues: small.eigenvalues,
        eigenvectors: small
            .eigenvectors
            .into_iter()
            .map(CoordVector::new)
            .collect(),
        degenerate,
    })
}

/// Extra subspace columns beyond k: clustered eigenvalues inside the
/// block are resolved exactly by the Rayleigh–Ritz step, so only the
/// block edge needs a spectral gap to converge.
const RITZ_OVERSAMPLE: usize = 8;

/// Leading k eigenpairs by blocked subspace iteration with Rayleigh–Ritz
/// extraction on a (k + 8)-dimensional block.
///
/// Converges when every one of the k leading Ritz values moves by at
/// most 1e-12 relative between iterations, with an iteration cap of
/// 10·D. The start block is drawn from a fixed internal stream, so
/// output is deterministic. Intended for positive semidefinite
/// operators.
pub fn top_eigens(t: &MomentOperator, k: usize) -> Result<Spectrum> {
    let dd = t.coord_dim();
    if k == 0 || k > dd {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={dd}")));
    }
    let block = (k + RITZ_OVERSAMPLE).min(dd);
    // Headroom beyond 10·D: moderate spectral gaps (a few percent) need a
    // few hundred iterations regardless of D.
    let cap = 10 * dd + 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x746f_7065);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..dd).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize_block(&mut q, &mut rng);

    let mut z: Vec<Vec<f64>> = vec![vec![0.0; dd]; block];
    let mut prev: Vec<f64> = vec![f64::INFINITY; k];
    for _ in 0..cap {
        for (col, out) in q.iter().zip(z.iter_mut()) {
            t.matvec_into(col, out);
        }
        // Ritz step: eigendecomposition of the block compression QᵀTQ.
        let mut h = vec![0.0; block * block];
        for i in 0..block {
            for j in i..block {
                let v: f64 = q[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
                h[i * block + j] = v;
                h[j * block + i] = v;
            }
        }
        let ritz = jacobi_eigh(&mut h, block)?;

        // Jitter floor: Ritz values in the operator's null space are pure
        // round-off and never settle in a relative sense.
        let floor = 1e-14 * ritz.eigenvalues[0].abs() + 1e-300;
        let mut done = ritz.eigenvalues[..k]
            .iter()
            .zip(&prev)
            .all(|(now, before)| (now - before).abs() <= 1e-12 * now.abs() + floor);
        if !done {
            // Residual certificate: ‖T·q̃ − μ·q̃‖ ≤ 1e-10·μ₁ pins each
            // Ritz value within 1e-10·μ₁ of a true eigenvalue, which is
            // stronger than the spectrum's residual guarantee.
            let tol = 1e-10 * ritz.eigenvalues[0].abs() + 1e-300;
            done = (0..k).all(|j| {
                let y = &ritz.eigenvectors[j];
                let mu = ritz.eigenvalues[j];
                let mut res_sq = 0.0;
                for c in 0..dd {
                    let tv: f64 = y.iter().zip(&z).map(|(yi, zi)| yi * zi[c]).sum();
                    let qv: f64 = y.iter().zip(&q).map(|(yi, qi)| yi * qi[c]).sum();
                    let r = tv - mu * qv;
                    res_sq += r * r;
                }
                res_sq.sqrt() <= tol
            });
        }
        if done {
            let mut eigenvalues = Vec::with_capacity(k);
            let mut eigenvectors = Vec::with_capacity(k);
            for j in 0..k {
                eigenvalues.push(ritz.eigenvalues[j]);
                let y = &ritz.eigenvectors[j];
                let mut v = vec![0.0; dd];
                for (yi, qi) in y.iter().zip(&q) {
                    for (vi, qv) in v.iter_mut().zip(qi) {
                        *vi += yi * qv;
                    }
                }
                normalize(&mut v);
                symspace::fix_sign(&mut v);
                eigenvectors.push(CoordVector::new(v));
            }
            let degenerate = degeneracy_flag(&eigenvalues);
            return Ok(Spectrum {
                eigenvalues,
                eigenvectors,
                degenerate,
            });
        }
        prev.copy_from_slice(&ritz.eigenvalues[..k]);

        // Next block: rotate T·Q into the Ritz order, then re-orthonormalize.
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(block);
        for y in &ritz.eigenvectors {
            let mut v = vec![0.0; dd];
            for (yi, zi) in y.iter().zip(&z) {
                for (vi, zv) in v.iter_mut().zip(zi) {
                    *vi += yi * zv;
                }
            }
            next.push(v);
        }
        q = next;
        orthonormalize_block(&mut q, &mut rng);
    }
    Err(Error::NonConvergence(format!(
        "subspace iteration: leading Ritz values still moving after {cap} iterations"
    )))
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= dot * ui;
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Gram-Schmidt with a second pass and a *relative* collapse test: a
/// column whose residual against its predecessors is below 1e-8 of its
/// own norm lies numerically in their span (the residual may even be an
/// exact multiple of a predecessor, e.g. for rank-deficient operators)
/// and normalizing it would resurrect a duplicate direction. Such
/// columns are replaced by fresh deterministic draws.
fn orthonormalize_block(q: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for i in 0..q.len() {
        let (done, rest) = q.split_at_mut(i);
        let col = &mut rest[0];
        let pre: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        orthogonalize(col, done);
        let post: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut ok = post > 1e-8 * pre && post > 1e-300;
        if ok {
            normalize(col);
            orthogonalize(col, done);
            ok = normalize(col) > 0.5;
        }
        while !ok {
            for x in col.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            orthogonalize(col, done);
            if normalize(col) > 1e-6 {
                orthogonalize(col, done);
                ok = normalize(col) > 0.5;
            }
        }
    }
}

/// The rank-one operator B⊗B: A ↦ ⟨A,B⟩·B. Its only nonzero eigenvalue is
/// ‖B‖_F².
pub fn rank_one_op(b: &SymMatrix) -> MomentOperator {
    let v = vech_iso(b);
    let dd = v.dim();
    let c = v.coords();
    let mut mat = vec![0.0; dd * dd];
    for i in 0..dd {
        for j in 0..dd {
            mat[i * dd + j] = c[i] * c[j];
        }
    }
    MomentOperator::from_raw(b.dim(), mat, Provenance::Derived("rank-one".into()))
}

/// T − B⊗B, the covariance operator of the random variable ⟨AX,X⟩.
///
/// When (T, B) come from one measure this is positive semidefinite;
/// eigenvalues in [−1e-9·λ₁, 0) are clamped to zero (via a dense
/// reconstruction when D permits), anything more negative is rejected as
/// inconsistent inputs.
pub fn centered_operator(t: &MomentOperator, b: &SymMatrix) -> Result<MomentOperator> {
    if t.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs matrix dim {}",
            t.dim(),
            b.dim()
        )));
    }
    let dd = t.coord_dim();
    let v = vech_iso(b);
    let c = v.coords();
    let mut mat = t.matrix().to_vec();
    for i in 0..dd {
        for j in 0..dd {
            mat[i * dd + j] -= c[i] * c[j];
        }
    }
    let centered = MomentOperator::from_raw(t.dim(), mat, Provenance::Derived("centered".into()));

    let lam1 = top_eigens(&centered, 1)?.eigenvalues()[0];
    let lam_min = min_eigenvalue_estimate(&centered, lam1)?;
    // Tolerance scale: λ₁ of the centered operator, falling back to the
    // trace of T when centering annihilates everything (point masses).
    let scale = lam1
        .abs()
        .max(1e-6 * t.trace().abs())
        .max(f64::MIN_POSITIVE);
    let floor = -1e-9 * scale;
    if lam_min < floor {
        return Err(Error::InconsistentInputs(format!(
            "T − B⊗B has eigenvalue {lam_min:.6e} (λ₁ = {lam1:.6e}); \
             the operator and second moment do not describe one measure"
        )));
    }
    if lam_min < 0.0 && dd <= symspace::DEFAULT_EIG_LIMIT {
        // Clamp the round-off negatives to zero.
        let mut scratch = centered.matrix().to_vec();
        let spec = jacobi_eigh(&mut scratch, dd)?;
        let mut mat = vec![0.0; dd * dd];
        for (lam, vec) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
            let l = lam.max(0.0);
            if l == 0.0 {
                continue;
            }
            for i in 0..dd {
                for j in 0..dd {
                    mat[i * dd + j] += l * vec[i] * vec[j];
                }
            }
        }
        return Ok(MomentOperator::from_raw(
            t.dim(),
            mat,
            Provenance::Derived("centered".into()),
        ));
    }
    Ok(centered)
}

/// Smallest eigenvalue via power iteration on λ₁·I − M.
fn min_eigenvalue_estimate(m: &MomentOperator, lam1: f64) -> Result<f64> {
    let dd = m.coord_dim();
    let shift = lam1.abs().max(f64::MIN_POSITIVE);
    let mut shifted = m.matrix().to_vec();
    for v in shifted.iter_mut() {
        *v = -*v;
    }
    for i in 0..dd {
        shifted[i * dd + i] += shift;
    }
    let op = MomentOperator::from_raw(m.dim(), shifted, Provenance::Derived("shifted".into()));
    let top = top_eigens(&op, 1)?.eigenvalues()[0];
    Ok(shift - top)
}
