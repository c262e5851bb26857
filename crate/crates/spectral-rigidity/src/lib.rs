//! Spectral rigidity analysis for chains of square matrices.
//!
//! A layer chain is a finite sequence of full-rank d x d matrices. After
//! Frobenius normalization, each layer's squared singular values define a
//! point of the trace-d positive cone; exact power-law spectra trace out a
//! one-parameter diagonal orbit indexed by the decay exponent. This crate
//! implements the calculus on that orbit (harmonic normalization, Gibbs
//! statistics, Fisher information, Bures-Wasserstein geometry), exponent
//! chart fitting with residuals, the deterministic interface-margin
//! inequalities that make fitted exponent paths short, their converses and
//! action bounds, effective-rank tail analysis, and synthetic chain
//! generators used to exercise every inequality end to end.
//!
//! The `specrig` binary wraps the library: `analyze`, `synth`, `orbit`,
//! `rank`, and `verify` subcommands over a small binary matrix container and
//! plain-text config files.

pub mod chain;
pub mod charts;
pub mod cli;
pub mod error;
pub mod io;
pub mod nearid;
pub mod numerics;
pub mod orbit;
pub mod ranktail;

pub use error::{Error, Result};

/// Numeric knobs shared across the crate, with the defaults used by every
/// reported inequality. All pass/fail decisions use
/// `lhs <= rhs + pass_abs + pass_rel * scale`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Residual target for the radial-coordinate bisection inverse.
    pub bisection_residual: f64,
    /// Iteration cap for bisection solves.
    pub bisection_max_iter: usize,
    /// Grid size for 1-D minimizations/maximizations over exponent intervals.
    pub grid_points: usize,
    /// Abscissa tolerance for golden-section refinement and plateau edges.
    pub alpha_tol: f64,
    /// Relative floor (times trace) below which a symmetric eigenvalue is
    /// treated as genuinely negative rather than rounding noise.
    pub eig_nonneg: f64,
    /// Absolute slack added to every theorem inequality check.
    pub pass_abs: f64,
    /// Relative slack (times the bound magnitude) for theorem checks.
    pub pass_rel: f64,
    /// Full-rank threshold: layers with sigma_min <= threshold * sigma_max
    /// are rejected unless regularized.
    pub full_rank: f64,
    /// Allowed relative deviation of a normalized layer's squared Frobenius
    /// norm from d.
    pub frobenius_rel: f64,
    /// Matrix size above which operator norms switch from full SVD to power
    /// iteration.
    pub svd_cutoff: usize,
    /// Kink guard for near-identity order fits: one-sided expansions are
    /// skipped when the hinge argument is within `kink_factor * t^2` of 0.
    pub kink_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bisection_residual: 1e-12,
            bisection_max_iter: 200,
            grid_points: 512,
            alpha_tol: 1e-10,
            eig_nonneg: 1e-10,
            pass_abs: 1e-10,
            pass_rel: 1e-8,
            full_rank: 1e-10,
            frobenius_rel: 1e-8,
            svd_cutoff: 2048,
            kink_factor: 10.0,
        }
    }
}

impl Tolerances {
    /// Inequality gate: `lhs <= rhs` up to the configured slack.
    pub fn le(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs + self.pass_abs + self.pass_rel * rhs.abs().max(lhs.abs())
    }
}
