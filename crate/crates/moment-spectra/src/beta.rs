//! Evaluation and local maximization of the direction ratio
//! (Σ wᵢ⟨xᵢ,v⟩^p)^{1/p} / (Σ wᵢ⟨xᵢ,v⟩²)^{1/2}, the quantity whose
//! supremum over unit directions is the smallest admissible L^p–L²
//! constant β.

use crate::moments::{second_moment, SampleSet};
use crate::symspace::SymMatrix;

/// Directions with a second-moment denominator at or below this are
/// orthogonal to the support span (where the comparison holds vacuously)
/// and are skipped.
pub(crate) const DENOM_FLOOR: f64 = 1e-14;

/// Below this fraction of tr(B), a direction's second moment is too
/// small for the monomial expansion: its alternating terms cancel down
/// to round-off while the true value keeps shrinking like den^p. Such
/// directions fall back to direct evaluation.
const MONOMIAL_ENERGY_FLOOR: f64 = 0.05;

/// Precomputed exact expansion of Σ w⟨x,v⟩^p into monomial moments,
/// making each evaluation O(#monomials) instead of O(n·d).
struct MonomialMoments {
    degree: u32,
    /// Exponent tuples of total degree p.
    exponents: Vec<Vec<u8>>,
    /// Multinomial coefficient times the mixed sample moment, per tuple.
    weighted_moments: Vec<f64>,
}

impl MonomialMoments {
    fn build(samples: &SampleSet, p: u32) -> MonomialMoments {
        let d = samples.dim();
        let mut exponents = Vec::new();
        let mut current = vec![0u8; d];
        enumerate_exponents(d, p as u8, 0, &mut current, &mut exponents);

        let mut weighted_moments = vec![0.0; exponents.len()];
        let mut powers = vec![[0.0f64; 9]; d];
        for k in 0..samples.len() {
            let x = samples.point(k);
            let w = samples.weights()[k];
            for (i, &xi) in x.iter().enumerate() {
                powers[i][0] = 1.0;
                for e in 1..=p as usize {
                    powers[i][e] = powers[i][e - 1] * xi;
                }
            }
            for (m, exps) in weighted_moments.iter_mut().zip(&exponents) {
                let mut prod = w;
                for (i, &e) in exps.iter().enumerate() {
                    prod *= powers[i][e as usize];
                }
                *m += prod;
            }
        }
        for (m, exps) in weighted_moments.iter_mut().zip(&exponents) {
            *m *= multinomial(p, exps);
        }
        MonomialMoments {
            degree: p,
            exponents,
            weighted_moments,
        }
    }

    fn eval(&self, v: &[f64]) -> f64 {
        let mut powers = vec![[0.0f64; 9]; v.len()];
        for (i, &vi) in v.iter().enumerate() {
            powers[i][0] = 1.0;
            for e in 1..=self.degree as usize {
                powers[i][e] = powers[i][e - 1] * vi;
            }
        }
        let mut acc = 0.0;
        for (m, exps) in self.weighted_moments.iter().zip(&self.exponents) {
            let mut prod = *m;
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    prod *= powers[i][e as usize];
                }
            }
            acc += prod;
        }
        acc
    }
}

fn direct_pth(samples: &SampleSet, p: u32, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..samples.len() {
        let dot: f64 = samples.point(k).iter().zip(v).map(|(a, b)| a * b).sum();
        acc += samples.weights()[k] * dot.powi(p as i32);
    }
    acc
}

/// Ratio evaluator for one sample set at a fixed even p.
pub(crate) struct RatioEval<'a> {
    samples: &'a SampleSet,
    mono: Option<MonomialMoments>,
    second: SymMatrix,
    p: u32,
}

impl<'a> RatioEval<'a> {
    pub fn new(samples: &'a SampleSet, p: u32) -> Self {
        let second = second_moment(samples);
        let mono = (samples.dim() <= 4).then(|| MonomialMoments::build(samples, p));
        RatioEval {
            samples,
            mono,
            second,
            p,
        }
    }

    pub fn second_moment(&self) -> &SymMatrix {
        &self.second
    }

    /// (Σ w⟨x,v⟩^p)^{1/p} / (Σ w⟨x,v⟩²)^{1/2}, or `None` when v is
    /// (numerically) orthogonal to the support span.
    pub fn ratio(&self, v: &[f64]) -> Option<f64> {
        let den_sq = self.second.quad_form(v).max(0.0);
        let denom = den_sq.sqrt();
        if denom <= DENOM_FLOOR {
            return None;
        }
        let v_norm_sq: f64 = v.iter().map(|x| x * x).sum();
        let energetic = den_sq > MONOMIAL_ENERGY_FLOOR * self.second.trace() * v_norm_sq;
        let num_p = match (&self.mono, energetic) {
            (Some(m), true) => m.eval(v),
            _ => direct_pth(self.samples, self.p, v),
        };
        Some(num_p.max(0.0).powf(1.0 / self.p as f64) / denom)
    }
}

fn enumerate_exponents(d: usize, rem: u8, idx: usize, current: &mut [u8], out: &mut Vec<Vec<u8>>) {
    if idx == d - 1 {
        current[idx] = rem;
        out.push(current.to_vec());
        return;
    }
    for e in 0..=rem {
        current[idx] = e;
        enumerate_exponents(d, rem - e, idx + 1, current, out);
    }
}

fn multinomial(p: u32, exps: &[u8]) -> f64 {
    let fact = |n: u32| -> f64 { (1..=n).map(|v| v as f64).product::<f64>().max(1.0) };
    let mut denom = 1.0;
    for &e in exps {
        denom *= fact(e as u32);
    }
    fact(p) / denom
}

/// Golden-section maximization of `f` on [lo, hi]; `NEG_INFINITY` marks
/// infeasible points. Returns (argmax, max).
fn golden_max(mut lo: f64, mut hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut t1 = hi - phi * (hi - lo);
    let mut t2 = lo + phi * (hi - lo);
    let mut f1 = f(t1);
    let mut f2 = f(t2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + phi * (hi - lo);
            f2 = f(t2);
        } else {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - phi * (hi - lo);
            f1 = f(t1);
        }
    }
    if f1 >= f2 {
        (t1, f1)
    } else {
        (t2, f2)
    }
}

/// Golden-section coordinate ascent of the ratio on the unit sphere:
/// each pass line-searches v ← normalize(v + t·eⱼ) per coordinate.
/// Deterministic; returns the refined direction and its ratio.
///
/// With the direct evaluator the line restriction is handled through its
/// binomial expansion: Σw⟨x, v+t·eⱼ⟩^p = Σ_k C(p,k)·t^k·Σᵢ wᵢ gᵢ^{p−k}xᵢⱼ^k
/// with gᵢ = ⟨xᵢ, v⟩, so a line search costs O(n·p) once plus O(p) per
/// probe instead of O(n·d) per probe.
pub(crate) fn coordinate_ascent(
    eval: &RatioEval<'_>,
    start: &[f64],
    sweeps: usize,
) -> Option<(Vec<f64>, f64)> {
    if eval.mono.is_some() {
        coordinate_ascent_generic(eval, start, sweeps)
    } else {
        coordinate_ascent_direct(eval, start, sweeps)
    }
}

fn coordinate_ascent_generic(
    eval: &RatioEval<'_>,
    start: &[f64],
    sweeps: usize,
) -> Option<(Vec<f64>, f64)> {
    let d = start.len();
    let mut v = start.to_vec();
    normalize(&mut v)?;
    let mut best = eval.ratio(&v)?;
    let mut probe = vec![0.0; d];
    for _ in 0..sweeps {
        for j in 0..d {
            let base = v.clone();
            let (t_best, f_best) = golden_max(-3.0, 3.0, 60, |t| {
                probe.copy_from_slice(&base);
                probe[j] += t;
                match normalize(&mut probe) {
                    Some(()) => eval.ratio(&probe).unwrap_or(f64::NEG_INFINITY),
                    None => f64::NEG_INFINITY,
                }
            });
            if f_best > best {
                best = f_best;
                v.copy_from_slice(&base);
                v[j] += t_best;
                normalize(&mut v).expect("ascent step stays off the origin");
            }
        }
    }
    Some((v, best))
}

fn coordinate_ascent_direct(
    eval: &RatioEval<'_>,
    start: &[f64],
    sweeps: usize,
) -> Option<(Vec<f64>, f64)> {
    let samples = eval.samples;
    let p = eval.p as usize;
    let d = start.len();
    let n = samples.len();
    let b = &eval.second;

    let mut v = start.to_vec();
    normalize(&mut v)?;
    let start_v = v.clone();
    let start_ratio = eval.ratio(&v)?;
    let mut best = start_ratio;

    // Dots gᵢ = ⟨xᵢ, v⟩, maintained incrementally across accepted steps.
    let mut dots: Vec<f64> = (0..n)
        .map(|i| samples.point(i).iter().zip(&v).map(|(a, b)| a * b).sum())
        .collect();

    let binom: Vec<f64> = {
        let mut row = vec![1.0f64];
        for _ in 0..p {
            let mut next = vec![1.0];
            for w in row.windows(2) {
                next.push(w[0] + w[1]);
            }
            next.push(1.0);
            row = next;
        }
        row
    };

    let mut poly = vec![0.0f64; p + 1];
    for _ in 0..sweeps {
        for j in 0..d {
            // Line numerator coefficients.
            poly.fill(0.0);
            for i in 0..n {
                let w = samples.weights()[i];
                let g = dots[i];
                let x = samples.point(i)[j];
                // w·g^{p−k}·x^k accumulated for all k; computed as two
                // running power products so a tiny g never divides.
                let mut gpow = [0.0f64; 9];
                let mut xpow = [0.0f64; 9];
                gpow[0] = 1.0;
                xpow[0] = 1.0;
                for e in 1..=p {
                    gpow[e] = gpow[e - 1] * g;
                    xpow[e] = xpow[e - 1] * x;
                }
                for (k, slot) in poly.iter_mut().enumerate() {
                    *slot += w * gpow[p - k] * xpow[k];
                }
            }
            for (k, slot) in poly.iter_mut().enumerate() {
                *slot *= binom[k];
            }

            // Line denominator: quadratic in t through B.
            let bv_j: f64 = (0..d).map(|c| b.get(j, c) * v[c]).sum();
            let q0 = b.quad_form(&v);
            let q2 = b.get(j, j);
            let v_j = v[j];

            let (t_best, f_best) = golden_max(-3.0, 3.0, 60, |t| {
                let den_sq = q0 + 2.0 * t * bv_j + t * t * q2;
                let norm_sq = 1.0 + 2.0 * t * v_j + t * t;
                if norm_sq <= 1e-300 {
                    return f64::NEG_INFINITY;
                }
                let den = (den_sq.max(0.0) / norm_sq).sqrt();
                if den <= DENOM_FLOOR {
                    return f64::NEG_INFINITY;
                }
                // Horner, highest power first.
                let mut num = 0.0;
                for k in (0..=p).rev() {
                    num = num * t + poly[k];
                }
                let num = num.max(0.0).powf(1.0 / p as f64) / norm_sq.sqrt();
                num / den
            });
            if f_best > best {
                best = f_best;
                v[j] += t_best;
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in v.iter_mut() {
                    *x /= norm;
                }
                for (i, g) in dots.iter_mut().enumerate() {
                    *g = (*g + t_best * samples.point(i)[j]) / norm;
                }
            }
        }
        // Refresh the dots once per sweep to cap incremental drift.
        for (i, g) in dots.iter_mut().enumerate() {
            *g = samples.point(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }
    // Settle through the canonical evaluator; keep the start if the
    // line-expansion arithmetic over-promised.
    match eval.ratio(&v) {
        Some(settled) if settled >= start_ratio => Some((v, settled)),
        _ => Some((start_v, start_ratio)),
    }
}

fn normalize(v: &mut [f64]) -> Option<()> {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-300 {
        return None;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Some(())
}
