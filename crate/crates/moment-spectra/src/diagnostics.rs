//! Quantitative diagnostics: the largest-eigenvalue inequalities, the gap
//! statistic Γ, the two-sided bounds it yields on the separation
//! parameter, L^p–L² constant estimation, and the unequal-weight
//! conversion.
//!
//! Γ = λ₂/λ₁ + (1 − ‖B‖_F²/λ₁) controls the normalized separation
//! (s/‖B‖_F)² from both sides: the upper bound 4Γ holds unconditionally,
//! the lower bound Γ³/(200β⁸) needs an L⁸–L² constant β.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::beta::{coordinate_ascent, RatioEval};
use crate::error::{Error, Result};
use crate::moments::{fourth_moment_operator_with_limit, MomentOperator, SampleSet};
use crate::parallel::indexed_map;
use crate::spectra::top_eigens;
use crate::symspace::{eig_sym_small, pinv_sqrt, vech_iso_inv, SymMatrix};

/// Everything the two-sided separation bounds rest on.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub lambda1: f64,
    pub lambda2: f64,
    /// ‖B‖_F².
    pub b_frob_sq: f64,
    /// Γ = λ₂/λ₁ + (1 − ‖B‖_F²/λ₁), components clamped at −1e-9.
    pub gamma: f64,
    /// Upper bound on (s/‖B‖_F)²: 4Γ. Holds without any β assumption.
    pub s_upper_normalized_sq: f64,
    /// Lower bound on (s/‖B‖_F)²: Γ³/(200β⁸). Valid only when β really
    /// dominates the L⁸–L² ratio.
    pub s_lower_normalized_sq: f64,
    pub beta_used: f64,
    pub trace_t: f64,
    /// (λ₁ − trace/d, λ₁ − ‖B‖_F², (Σλᵢ²)^{1/2} − λ₁), all ≥ 0 up to
    /// round-off for any single measure.
    pub eigenvalue_slacks: [f64; 3],
    /// The upper bound never depends on β.
    pub upper_is_unconditional: bool,
}

/// Lower bound (and, for p = 4, a certified upper bound) on the smallest
/// admissible L^p–L² constant.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    pub p: u32,
    /// Max ratio over the tested directions: a lower bound on the minimal
    /// valid β.
    pub lower: f64,
    /// λ₁(T̃)^{1/4} of the whitened operator, a sound upper bound for
    /// p = 4 only.
    pub certified_upper_p4: Option<f64>,
    pub directions_tested: usize,
    pub seed: u64,
}

/// Range of the α-weighted separation supremum implied by the
/// equal-weight value.
#[derive(Debug, Clone, Copy)]
pub struct UnequalBounds {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

/// The three chained slack values of the largest-eigenvalue inequalities:
/// (λ₁ − trace(T)/d, λ₁ − ‖B‖_F², (Σλᵢ²)^{1/2} − λ₁).
///
/// All are non-negative for any (T, B) from one measure; a slack below
/// −1e-9·λ₁ means the inputs are inconsistent.
pub fn check_eigenvalue_inequalities(t: &MomentOperator, b: &SymMatrix) -> Result<[f64; 3]> {
    if t.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs matrix dim {}",
            t.dim(),
            b.dim()
        )));
    }
    let lambda1 = top_eigens(t, 1)?.eigenvalues()[0];
    let trace = t.trace();
    let ell2: f64 = t.frobenius_norm_sq().sqrt();
    let slacks = [
        lambda1 - trace / t.dim() as f64,
        lambda1 - b.frobenius_norm_sq(),
        ell2 - lambda1,
    ];
    let floor = -1e-9 * lambda1.abs().max(f64::MIN_POSITIVE);
    for (k, s) in slacks.iter().enumerate() {
        if *s < floor {
            return Err(Error::InconsistentInputs(format!(
                "largest-eigenvalue inequality {k} violated by {s:.6e} (λ₁ = {lambda1:.6e})"
            )));
        }
    }
    Ok(slacks)
}

fn clamp_component(x: f64, scale: f64, what: &str) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -1e-9 * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::InconsistentInputs(format!(
            "{what} = {x:.6e} is negative beyond round-off"
        )))
    }
}

fn leading_pair(t: &MomentOperator) -> Result<(f64, f64)> {
    let k = 2.min(t.coord_dim());
    let spec = top_eigens(t, k)?;
    let l1 = spec.eigenvalues()[0];
    let l2 = if k == 2 { spec.eigenvalues()[1] } else { 0.0 };
    Ok((l1, l2))
}

/// Γ = λ₂/λ₁ + (1 − ‖B‖_F²/λ₁) ∈ [0, 2]. Requires a nondegenerate
/// measure (λ₁ > 0).
pub fn gap_statistic(t: &MomentOperator, b: &SymMatrix) -> Result<f64> {
    if t.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs matrix dim {}",
            t.dim(),
            b.dim()
        )));
    }
    let (l1, l2) = leading_pair(t)?;
    if l1 <= 0.0 {
        return Err(Error::DegenerateMeasure(
            "λ₁ = 0: the measure is a point mass at the origin".into(),
        ));
    }
    let ratio = clamp_component(l2 / l1, 1.0, "λ₂/λ₁")?;
    let defect = clamp_component(1.0 - b.frobenius_norm_sq() / l1, 1.0, "1 − ‖B‖²/λ₁")?;
    Ok(ratio + defect)
}

/// Two-sided bounds on (s/‖B‖_F)² from the gap statistic: the full
/// [`GapReport`].
pub fn separation_bounds(t: &MomentOperator, b: &SymMatrix, beta: f64) -> Result<GapReport> {
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "β must be at least 1, got {beta}"
        )));
    }
    let eigenvalue_slacks = check_eigenvalue_inequalities(t, b)?;
    let (lambda1, lambda2) = leading_pair(t)?;
    if lambda1 <= 0.0 {
        return Err(Error::DegenerateMeasure(
            "λ₁ = 0: the measure is a point mass at the origin".into(),
        ));
    }
    let gamma = gap_statistic(t, b)?;
    let beta8 = beta.powi(8);
    Ok(GapReport {
        lambda1,
        lambda2,
        b_frob_sq: b.frobenius_norm_sq(),
        gamma,
        s_upper_normalized_sq: 4.0 * gamma,
        s_lower_normalized_sq: gamma.powi(3) / (200.0 * beta8),
        beta_used: beta,
        trace_t: t.trace(),
        eigenvalue_slacks,
        upper_is_unconditional: true,
    })
}

/// Estimates the smallest admissible L^p–L² constant by maximizing the
/// direction ratio over a structured candidate set (canonical axes,
/// eigenvectors of B, eigenvectors of the matrix form of the whitened
/// operator's leading eigenvector, and seeded random directions), each
/// refined by coordinate ascent. The result is a lower bound; for p = 4
/// the whitened operator also yields a certified upper bound.
pub fn estimate_beta(s: &SampleSet, p: u32, n_dirs: usize, seed: u64) -> Result<BetaEstimate> {
    if p != 4 && p != 8 {
        return Err(Error::InvalidParameter(format!(
            "p must be 4 or 8, got {p}"
        )));
    }
    let d = s.dim();
    let eval = RatioEval::new(s, p);
    let b = eval.second_moment().clone();
    let b_spec = eig_sym_small(&b)?;
    if b_spec.eigenvalues[0] <= 0.0 {
        return Err(Error::DegenerateMeasure(
            "empty support: every point is the origin".into(),
        ));
    }

    // Whitened operator T̃ = S·T(S·S)·S with S = B^{+1/2}: its leading
    // eigenvector (as a d×d matrix) supplies informed candidates, and its
    // top eigenvalue certifies the p = 4 ratio from above.
    let white = pinv_sqrt(&b, 1e-12)?;
    let whitened = s.linear_pushforward(&white.to_dense())?;
    let t_white = fourth_moment_operator_with_limit(&whitened, usize::MAX)?;
    let lead = top_eigens(&t_white, 1)?;
    let lam1_white = lead.eigenvalues()[0];
    let lead_matrix = vech_iso_inv(&lead.eigenvectors()[0])?;
    let lead_spec = eig_sym_small(&lead_matrix)?;

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        candidates.push(e);
    }
    candidates.extend(b_spec.eigenvectors.iter().cloned());
    candidates.extend(lead_spec.eigenvectors.iter().cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_dirs {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in v.iter_mut() {
                *x /= norm;
            }
        } else {
            v[0] = 1.0;
        }
        candidates.push(v);
    }

    let refined: Vec<Option<f64>> = indexed_map(candidates.len(), |i| {
        let v = &candidates[i];
        eval.ratio(v)?;
        coordinate_ascent(&eval, v, 3).map(|(_, r)| r)
    });
    let mut lower = f64::NEG_INFINITY;
    let mut tested = 0usize;
    for r in refined.iter().flatten() {
        tested += 1;
        if *r > lower {
            lower = *r;
        }
    }
    if tested == 0 {
        return Err(Error::DegenerateMeasure(
            "no direction meets the support; empty support".into(),
        ));
    }

    Ok(BetaEstimate {
        p,
        lower,
        certified_upper_p4: if p == 4 {
            Some(lam1_white.max(0.0).powf(0.25))
        } else {
            None
        },
        directions_tested: tested,
        seed,
    })
}

/// How an L^p–L² constant degrades under mixing: a mixture with weights
/// αᵢ of measures each admitting β admits β·max αᵢ^{(1/p)−(1/2)}.
pub fn beta_mixture_bound(betas: &[f64], weights: &[f64], p: u32) -> Result<f64> {
    if betas.is_empty() || betas.len() != weights.len() {
        return Err(Error::InvalidParameter(
            "need one β per mixture weight".into(),
        ));
    }
    if p < 2 {
        return Err(Error::InvalidParameter(format!("p must be ≥ 2, got {p}")));
    }
    if betas.iter().any(|b| !(*b >= 1.0)) {
        return Err(Error::InvalidParameter("every β must be ≥ 1".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter(
            "mixture weights must be positive".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {total}, expected 1"
        )));
    }
    let beta_max = betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let expo = 1.0 / p as f64 - 0.5;
    let factor = weights
        .iter()
        .map(|a| a.powf(expo))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(beta_max * factor)
}

/// Converts the equal-weight separation value into the interval the
/// α-weighted separation (halved, like s itself) must lie in:
/// [s/(2(1−α)), s/(2α)] for α ∈ (0, ½]. At α = ½ both ends equal s.
pub fn unequal_weight_bounds(s_value: f64, alpha: f64) -> Result<UnequalBounds> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "α must lie in (0, 1/2], got {alpha}"
        )));
    }
    if !(s_value >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation value must be ≥ 0, got {s_value}"
        )));
    }
    Ok(UnequalBounds {
        alpha,
        lower: s_value / (2.0 * (1.0 - alpha)),
        upper: s_value / (2.0 * alpha),
    })
}
