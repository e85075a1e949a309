//! Spectral analysis of fourth-moment operators of measures on ℝ^d.
//!
//! A probability measure μ on ℝ^d acts on symmetric matrices through its
//! fourth-moment operator T: A ↦ ∫⟨A,xxᵀ⟩xxᵀ dμ(x), a positive
//! semidefinite map whose d(d+1)/2 eigenvalues are invariant under
//! orthogonal pushforwards of μ. This crate computes T (empirically or in
//! closed form for several model families), its spectrum, and the
//! spectral-gap diagnostics that bound, from both sides, how far μ can
//! be split into an equal-weight mixture of two pieces with different
//! second moments. It also constructs the explicit median-threshold split
//! that achieves the guaranteed separation, and ships desk-scale
//! brute-force oracles used as ground truth in tests.
//!
//! The data-parallel inner loops (operator accumulation, direction
//! scans) run on rayon under the default `parallel` feature; disabling it
//! gives a sequential build with bit-identical results.

pub(crate) mod beta;
pub mod decompose;
pub mod diagnostics;
pub mod error;
pub mod moments;
pub mod oracle;
pub mod parallel;
pub mod spectra;
pub mod symspace;

pub use error::{Error, Result};

pub use symspace::{
    eig_sym_small, frobenius_inner, matrix_sqrt_psd, psd_split, sym_len, vech_iso, vech_iso_inv,
    CoordVector, SmallSpectrum, SymMatrix,
};

pub use moments::{
    analytic_gaussian, analytic_iid, analytic_operator, analytic_second_moment, analytic_sphere,
    fourth_moment_operator, fourth_moment_operator_sequential, lift_first_order, mixture_operator,
    sample, sample_labeled, scale_pushforward, second_moment, AnalyticModel, MomentOperator,
    Provenance, SampleSet, RNG_ALGORITHM,
};

pub use spectra::{centered_operator, full_spectrum, rank_one_op, top_eigens, Spectrum};

pub use diagnostics::{
    beta_mixture_bound, check_eigenvalue_inequalities, estimate_beta, gap_statistic,
    separation_bounds, unequal_weight_bounds, BetaEstimate, GapReport, UnequalBounds,
};

pub use decompose::{
    guarantee_lower_bound, leading_direction, median_split, run_decomposition, BetaSpec,
    Decomposition, Guarantee, LeadingDirection,
};

pub use oracle::{
    beta_exact_small, s_exact_small, s_exact_unequal, t_operator_brute, ArgMax, OracleResult,
};

pub use parallel::configure_threads_from_env;
