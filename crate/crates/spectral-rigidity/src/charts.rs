//! Fitted exponent charts for layer spectra and their residuals.
//!
//! A chart map assigns each layer an exponent `alpha` in a prescribed
//! interval. Three maps are provided: the top-radial chart (invert the
//! radial coordinate on the clamped radial observable), the Bures projection
//! chart (nearest orbit point in Bures-Wasserstein distance), and the
//! log-spectrum least-squares chart on a rank window. Each fitted layer
//! carries the signed radial residual `r = rho(P) - g(alpha)` plus the
//! full-spectrum chart errors in log-Cartan and Bures form; the rigidity
//! inequalities consume the increments of these residuals along a chain.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{kahan_sum, singular_values_desc};
use crate::orbit::{self, CartanPoint, ExponentInterval, Width};
use crate::Tolerances;

/// Ordered singular values of one layer together with their energy
/// `frobenius_sq = sum sigma_i^2`.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    values: Vec<f64>,
    frobenius_sq: f64,
}

impl Spectrum {
    /// Build from singular values in any order; sorts nonincreasing and
    /// rejects negatives or non-finite entries.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidWidth(0));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidSpectrum);
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let frobenius_sq = kahan_sum(values.iter().rev().map(|v| v * v));
        Ok(Self {
            values,
            frobenius_sq,
        })
    }

    /// Singular values of a dense matrix, padded implicitly square.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut values = singular_values_desc(m);
        let d = m.nrows().max(m.ncols());
        values.resize(d, 0.0);
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn width(&self) -> Width {
        Width::new(self.values.len()).expect("spectrum is nonempty")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }

    /// Whether `sum sigma_i^2 = d` within a relative tolerance (the trace-d
    /// slice for the associated Gram point).
    pub fn is_normalized(&self, rel_tol: f64) -> bool {
        let d = self.dim() as f64;
        (self.frobenius_sq - d).abs() <= rel_tol * d
    }

    /// Gram spectrum as a Cartan point (squares the singular values).
    /// Fails when any singular value vanishes.
    pub fn to_cartan(&self) -> Result<CartanPoint> {
        CartanPoint::new(self.values.iter().map(|v| v * v).collect())
    }
}

/// Set of ranks used by the log least-squares chart, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankWindow(Vec<usize>);

impl RankWindow {
    pub fn from_ranks(mut ranks: Vec<usize>) -> Result<Self> {
        ranks.sort_unstable();
        ranks.dedup();
        if ranks.len() < 2 {
            return Err(Error::DegenerateWindow);
        }
        if ranks[0] == 0 {
            return Err(Error::WindowOutOfRange(0, 0));
        }
        Ok(Self(ranks))
    }

    pub fn contiguous(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || hi < lo {
            return Err(Error::DegenerateWindow);
        }
        Self::from_ranks((lo..=hi).collect())
    }

    /// Default fitting window `1..=ceil(d/2)` (clamped to at least 2 ranks).
    pub fn default_for(d: Width) -> Self {
        let hi = d.get().div_ceil(2).max(2).min(d.get().max(2));
        Self(Vec::from_iter(1..=hi))
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Windows omitting rank 1 cannot transfer regression residuals to the
    /// radial residual; chart users flag them.
    pub fn omits_rank_one(&self) -> bool {
        self.0[0] != 1
    }

    pub fn validate_for(&self, d: Width) -> Result<()> {
        match self.0.last() {
            Some(&hi) if hi > d.get() => Err(Error::WindowOutOfRange(hi, d.get())),
            _ => Ok(()),
        }
    }
}

/// The chart map used to fit exponents.
#[derive(Debug, Clone, Serialize)]
pub enum ChartKind {
    /// Invert the radial coordinate on the interval-clamped radial value.
    TopRadial,
    /// Minimize the Bures-Wasserstein distance to the orbit over the interval.
    BuresProjection,
    /// Two-parameter regression of `log sigma_i` on `-log i` over a rank
    /// window. With `normalized_intercept` the intercept is constrained to
    /// `g_d(alpha)` and the fit becomes one-dimensional.
    LogLeastSquares {
        window: RankWindow,
        normalized_intercept: bool,
    },
}

impl ChartKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChartKind::TopRadial => "top_radial",
            ChartKind::BuresProjection => "bures",
            ChartKind::LogLeastSquares { .. } => "log_ls",
        }
    }
}

/// Diagnostics specific to the least-squares chart.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LsDiagnostics {
    /// Fitted slope before clamping to the interval.
    pub alpha_unclamped: f64,
    /// Intercept actually used for the window residual.
    pub intercept: f64,
    /// `max_{i in window} |log sigma_i - c + alpha log i|`.
    pub window_residual: f64,
    /// Set when the window omits rank 1 (radial transfer unavailable).
    pub omits_rank_one: bool,
}

/// A layer spectrum with its fitted exponent and every chart residual used
/// by the rigidity inequalities.
#[derive(Debug, Clone, Serialize)]
pub struct ChartedLayer {
    pub spectrum: Spectrum,
    /// Fitted exponent in the chart interval.
    pub alpha: f64,
    /// Signed radial residual `rho(P) - g(alpha)`.
    pub r: f64,
    /// Sup-norm gap between log-Cartan vectors.
    pub e_log: f64,
    /// Bures-Wasserstein distance to the fitted orbit point.
    pub e_bw: f64,
    /// `e_bw / sqrt(d)`; the Hellinger-type root distance of energy measures.
    pub e_bw_normalized: f64,
    /// Entrywise square-root residual vector (Bures chart direction).
    pub z_bw: Vec<f64>,
    /// Log-Cartan residual vector.
    pub u_log: Vec<f64>,
    /// Present for least-squares fits only.
    pub ls: Option<LsDiagnostics>,
}

/// Normalized top-radial functional `rho_d(P) = log(d lambda_1 / tr P) / 2`.
/// Scale invariant; equals `log lambda_1 / 2` on the trace-d slice.
pub fn rho(p: &CartanPoint) -> Result<f64> {
    let top = p.eigenvalues()[0];
    if top <= 0.0 {
        return Err(Error::ZeroTopEigenvalue);
    }
    Ok(0.5 * (p.dim() as f64 * top / p.trace()).ln())
}

fn require_normalized(p: &CartanPoint, tol: &Tolerances) -> Result<()> {
    if !p.is_trace_normalized(tol.frobenius_rel) {
        return Err(Error::InvalidSpectrum);
    }
    Ok(())
}

/// All chart error quantities at a given exponent.
#[derive(Debug, Clone)]
pub struct ChartErrors {
    pub r: f64,
    pub e_log: f64,
    pub e_bw: f64,
    pub e_bw_normalized: f64,
    pub z_bw: Vec<f64>,
    pub u_log: Vec<f64>,
}

/// Residuals of a trace-normalized Cartan point against the orbit point at
/// `alpha`: signed radial residual, sup-norm log-Cartan error, and the
/// diagonal Bures error with its dimension-free normalization.
pub fn chart_errors(p: &CartanPoint, alpha: f64, tol: &Tolerances) -> Result<ChartErrors> {
    require_normalized(p, tol)?;
    let d = p.width();
    let orbit_pt = orbit::orbit_point(d, alpha);
    let r = rho(p)? - orbit::g(d, alpha);
    let mut z_bw = Vec::with_capacity(p.dim());
    let mut u_log = Vec::with_capacity(p.dim());
    let mut e_log: f64 = 0.0;
    for (lam, lam_orbit) in p.eigenvalues().iter().zip(orbit_pt.eigenvalues()) {
        z_bw.push(lam.sqrt() - lam_orbit.sqrt());
        let u = lam.ln() - lam_orbit.ln();
        e_log = e_log.max(u.abs());
        u_log.push(u);
    }
    let e_bw = kahan_sum(z_bw.iter().rev().map(|z| z * z)).max(0.0).sqrt();
    Ok(ChartErrors {
        r,
        e_log,
        e_bw,
        e_bw_normalized: e_bw / (p.dim() as f64).sqrt(),
        z_bw,
        u_log,
    })
}

fn assemble(
    spectrum: Spectrum,
    alpha: f64,
    errors: ChartErrors,
    ls: Option<LsDiagnostics>,
) -> ChartedLayer {
    ChartedLayer {
        spectrum,
        alpha,
        r: errors.r,
        e_log: errors.e_log,
        e_bw: errors.e_bw,
        e_bw_normalized: errors.e_bw_normalized,
        z_bw: errors.z_bw,
        u_log: errors.u_log,
        ls,
    }
}

fn spectrum_of(p: &CartanPoint) -> Result<Spectrum> {
    Spectrum::new(p.eigenvalues().iter().map(|l| l.sqrt()).collect())
}

/// Top-radial chart: `alpha = g^{-1}(clamp(rho(P), g(I)))`. The signed
/// residual vanishes whenever `rho(P)` lies in `g(I)` and otherwise equals
/// the clamping excess.
pub fn chart_top_radial(
    p: &CartanPoint,
    interval: &ExponentInterval,
    tol: &Tolerances,
) -> Result<ChartedLayer> {
    require_normalized(p, tol)?;
    let alpha = orbit::g_inverse(p.width(), rho(p)?, interval, tol)?;
    let errors = chart_errors(p, alpha, tol)?;
    Ok(assemble(spectrum_of(p)?, alpha, errors, None))
}

/// Bures projection chart: minimize the diagonal Bures distance to the orbit
/// over the interval by dense grid plus golden-section refinement, ties
/// toward smaller alpha. The returned objective value is certified to be at
/// most the minimum over the evaluation grid.
pub fn chart_bures_projection(
    p: &CartanPoint,
    interval: &ExponentInterval,
    tol: &Tolerances,
) -> Result<ChartedLayer> {
    require_normalized(p, tol)?;
    let d = p.width();
    let sqrt_eigs: Vec<f64> = p.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let objective = |alpha: f64| -> f64 {
        let orbit_pt = orbit::orbit_point(d, alpha);
        kahan_sum(
            sqrt_eigs
                .iter()
                .zip(orbit_pt.eigenvalues())
                .rev()
                .map(|(s, l)| (s - l.sqrt()) * (s - l.sqrt())),
        )
    };
    let (alpha, _) = crate::numerics::grid_refine_min(
        interval.lo(),
        interval.hi(),
        tol.grid_points,
        tol.alpha_tol,
        objective,
    );
    let errors = chart_errors(p, alpha, tol)?;
    Ok(assemble(spectrum_of(p)?, alpha, errors, None))
}

/// Uniform window residual `max_{i in window} |log sigma_i - c + alpha log i|`.
pub fn uniform_window_residual(
    spectrum: &Spectrum,
    window: &RankWindow,
    alpha: f64,
    intercept: f64,
) -> Result<f64> {
    window.validate_for(spectrum.width())?;
    let mut sup: f64 = 0.0;
    for &i in window.ranks() {
        let sigma = spectrum.values()[i - 1];
        if sigma <= 0.0 {
            return Err(Error::ZeroSingularValueInWindow(i));
        }
        sup = sup.max((sigma.ln() - intercept + alpha * (i as f64).ln()).abs());
    }
    Ok(sup)
}

/// Log-spectrum least-squares chart on a rank window.
///
/// The free fit solves the two-parameter normal equations for
/// `log sigma_i ~ c - alpha log i` and clamps `alpha` to the interval
/// (re-optimizing the intercept at the clamped slope). With
/// `normalized_intercept` the intercept is constrained to `g_d(alpha)` and
/// the objective is minimized over the interval directly.
pub fn chart_log_least_squares(
    spectrum: &Spectrum,
    interval: &ExponentInterval,
    window: &RankWindow,
    normalized_intercept: bool,
    tol: &Tolerances,
) -> Result<ChartedLayer> {
    let d = spectrum.width();
    window.validate_for(d)?;
    let mut xs = Vec::with_capacity(window.ranks().len());
    let mut ys = Vec::with_capacity(window.ranks().len());
    for &i in window.ranks() {
        let sigma = spectrum.values()[i - 1];
        if sigma <= 0.0 {
            return Err(Error::ZeroSingularValueInWindow(i));
        }
        xs.push((i as f64).ln());
        ys.push(sigma.ln());
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::DegenerateWindow);
    }

    let (alpha, alpha_unclamped, intercept) = if normalized_intercept {
        let objective = |a: f64| -> f64 {
            let c = orbit::g(d, a);
            xs.iter()
                .zip(&ys)
                .map(|(x, y)| {
                    let e = y - c + a * x;
                    e * e
                })
                .sum()
        };
        let (a, _) = crate::numerics::grid_refine_min(
            interval.lo(),
            interval.hi(),
            tol.grid_points,
            tol.alpha_tol,
            objective,
        );
        (a, a, orbit::g(d, a))
    } else {
        let slope = (n * sxy - sx * sy) / denom;
        let alpha_free = -slope;
        let alpha = interval.clamp(alpha_free);
        // best intercept at the (possibly clamped) slope
        let c = (sy + alpha * sx) / n;
        (alpha, alpha_free, c)
    };

    let window_residual = uniform_window_residual(spectrum, window, alpha, intercept)?;
    let errors = chart_errors(&spectrum.to_cartan()?, alpha, tol)?;
    Ok(assemble(
        spectrum.clone(),
        alpha,
        errors,
        Some(LsDiagnostics {
            alpha_unclamped,
            intercept,
            window_residual,
            omits_rank_one: window.omits_rank_one(),
        }),
    ))
}

/// Apply a chart kind to one spectrum.
pub fn fit_chart(
    spectrum: &Spectrum,
    kind: &ChartKind,
    interval: &ExponentInterval,
    tol: &Tolerances,
) -> Result<ChartedLayer> {
    match kind {
        ChartKind::TopRadial => chart_top_radial(&spectrum.to_cartan()?, interval, tol),
        ChartKind::BuresProjection => {
            chart_bures_projection(&spectrum.to_cartan()?, interval, tol)
        }
        ChartKind::LogLeastSquares {
            window,
            normalized_intercept,
        } => chart_log_least_squares(spectrum, interval, window, *normalized_intercept, tol),
    }
}

/// Total variation `sum |r_{k+1} - r_k|` of a scalar residual sequence.
pub fn residual_variation(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::SequenceTooShort(residuals.len()));
    }
    Ok(residuals.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Variations of the full-spectrum chart residual vectors along a chain.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualVariations {
    /// `sum_k ||z_{k+1} - z_k||_2` for the Bures square-root residuals.
    pub tv_bw: f64,
    /// `sum_k ||u_{k+1} - u_k||_2` for the log-Cartan residuals.
    pub tv_log: f64,
    /// Per-interface `||z_{k+1} - z_k||_2`.
    pub bw_steps: Vec<f64>,
    /// Per-interface `||u_{k+1} - u_k||_2`.
    pub log_steps: Vec<f64>,
}

/// Accumulate both full-chart residual variations. Each Bures step is also
/// bounded by the endpoint sum `e_bw(k+1) + e_bw(k)`.
pub fn chart_residual_variations(layers: &[ChartedLayer]) -> Result<ResidualVariations> {
    if layers.len() < 2 {
        return Err(Error::SequenceTooShort(layers.len()));
    }
    let mut bw_steps = Vec::with_capacity(layers.len() - 1);
    let mut log_steps = Vec::with_capacity(layers.len() - 1);
    for pair in layers.windows(2) {
        let z_step = vec_norm_diff(&pair[1].z_bw, &pair[0].z_bw);
        debug_assert!(z_step <= pair[1].e_bw + pair[0].e_bw + 1e-12);
        bw_steps.push(z_step);
        log_steps.push(vec_norm_diff(&pair[1].u_log, &pair[0].u_log));
    }
    Ok(ResidualVariations {
        tv_bw: bw_steps.iter().sum(),
        tv_log: log_steps.iter().sum(),
        bw_steps,
        log_steps,
    })
}

fn vec_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    kahan_sum(a.iter().zip(b).rev().map(|(x, y)| (x - y) * (x - y)))
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sqrt_vector_distance;
    use crate::orbit::orbit_point;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn w(d: usize) -> Width {
        Width::new(d).unwrap()
    }

    fn interval(lo: f64, hi: f64) -> ExponentInterval {
        ExponentInterval::new(lo, hi).unwrap()
    }

    fn orbit_spectrum(d: usize, alpha: f64) -> Spectrum {
        Spectrum::new(
            orbit_point(w(d), alpha)
                .eigenvalues()
                .iter()
                .map(|l| l.sqrt())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rho_identity_scale_invariance_and_orbit_value() {
        let p = CartanPoint::new(vec![1.0; 6]).unwrap();
        assert_eq!(rho(&p).unwrap(), 0.0);

        let q = CartanPoint::new(vec![3.0, 2.0, 0.5]).unwrap();
        let scaled = CartanPoint::new(vec![30.0, 20.0, 5.0]).unwrap();
        assert_relative_eq!(rho(&q).unwrap(), rho(&scaled).unwrap(), max_relative = 1e-14);

        for (d, alpha) in [(5usize, 0.4), (32, 1.3)] {
            let point = orbit_point(w(d), alpha).to_cartan();
            assert_relative_eq!(
                rho(&point).unwrap(),
                crate::orbit::g(w(d), alpha),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn every_chart_recovers_interior_orbit_exponent() {
        let d = 12;
        let alpha0 = 0.8;
        let spectrum = orbit_spectrum(d, alpha0);
        let iv = interval(0.2, 2.0);
        let kinds = [
            ChartKind::TopRadial,
            ChartKind::BuresProjection,
            ChartKind::LogLeastSquares {
                window: RankWindow::default_for(w(d)),
                normalized_intercept: false,
            },
            ChartKind::LogLeastSquares {
                window: RankWindow::default_for(w(d)),
                normalized_intercept: true,
            },
        ];
        for kind in &kinds {
            let fitted = fit_chart(&spectrum, kind, &iv, &tol()).unwrap();
            assert!(
                (fitted.alpha - alpha0).abs() < 1e-8,
                "{}: {} vs {alpha0}",
                kind.name(),
                fitted.alpha
            );
            assert!(fitted.r.abs() < 1e-8);
            assert!(fitted.e_log < 1e-7, "{}", fitted.e_log);
            assert!(fitted.e_bw < 1e-8);
        }
    }

    #[test]
    fn top_radial_clamps_with_signed_excess() {
        let d = 10;
        let spectrum = orbit_spectrum(d, 1.5);
        let iv = interval(0.2, 0.9);
        let fitted = chart_top_radial(&spectrum.to_cartan().unwrap(), &iv, &tol()).unwrap();
        assert_eq!(fitted.alpha, 0.9);
        assert!(fitted.r > 0.0, "clamping from above leaves positive excess");

        let below = orbit_spectrum(d, 0.05);
        let fitted = chart_top_radial(&below.to_cartan().unwrap(), &iv, &tol()).unwrap();
        assert_eq!(fitted.alpha, 0.2);
        assert!(fitted.r < 0.0);
    }

    #[test]
    fn top_radial_residual_bounded_by_rho_shift() {
        let d = 9;
        let alpha0 = 0.7;
        let iv = interval(0.2, 1.4);
        let base = orbit_point(w(d), alpha0);
        // perturb the spectrum multiplicatively, then renormalize the trace
        let mut eigs: Vec<f64> = base
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, l)| l * (1.0 + 0.03 * ((i as f64 * 2.7).sin())))
            .collect();
        let trace: f64 = eigs.iter().sum();
        for e in &mut eigs {
            *e *= d as f64 / trace;
        }
        let p = CartanPoint::new(eigs).unwrap();
        let rho_shift = (rho(&p).unwrap() - crate::orbit::g(w(d), alpha0)).abs();
        let fitted = chart_top_radial(&p, &iv, &tol()).unwrap();
        assert!(fitted.r.abs() <= rho_shift + 1e-12);
    }

    #[test]
    fn bures_projection_certificate_and_dominance() {
        let d = 14;
        let iv = interval(0.3, 1.8);
        // an off-orbit normalized spectrum
        let mut vals: Vec<f64> = (1..=d)
            .map(|i| (i as f64).powf(-0.6) * (1.0 + 0.1 * (i as f64).cos()))
            .collect();
        let f2: f64 = vals.iter().map(|v| v * v).sum();
        for v in &mut vals {
            *v *= (d as f64 / f2).sqrt();
        }
        let spectrum = Spectrum::new(vals).unwrap();
        let p = spectrum.to_cartan().unwrap();
        let bures_fit = chart_bures_projection(&p, &iv, &tol()).unwrap();

        // grid certificate
        let n = tol().grid_points;
        for k in 0..n {
            let a = iv.lo() + (iv.hi() - iv.lo()) * k as f64 / (n - 1) as f64;
            let grid_err = chart_errors(&p, a, &tol()).unwrap().e_bw;
            assert!(
                bures_fit.e_bw <= grid_err + 1e-12,
                "certificate at alpha = {a}"
            );
        }

        // minimizer dominance over the top-radial chart's error
        let radial_fit = chart_top_radial(&p, &iv, &tol()).unwrap();
        assert!(bures_fit.e_bw <= radial_fit.e_bw + 1e-10);
    }

    #[test]
    fn least_squares_two_point_formula_and_degenerate_window() {
        let d = 8;
        let spectrum = orbit_spectrum(d, 0.9);
        let iv = interval(0.1, 3.0);
        let window = RankWindow::from_ranks(vec![1, 2]).unwrap();
        let fitted = chart_log_least_squares(&spectrum, &iv, &window, false, &tol()).unwrap();
        let expect =
            (spectrum.values()[0].ln() - spectrum.values()[1].ln()) / std::f64::consts::LN_2;
        assert_relative_eq!(fitted.alpha, expect, epsilon = 1e-12);

        assert!(RankWindow::from_ranks(vec![3]).is_err());
        assert!(RankWindow::from_ranks(vec![]).is_err());
    }

    #[test]
    fn perturbed_layer_fitted_alpha_stays_within_the_radial_band() {
        // multiplicative band of width delta keeps rho within
        // eta_pl = log((1+delta)/(1-delta)) of g(alpha_true), so any chart's
        // fitted exponent satisfies |g(fit) - g(true)| <= |r_fit| + eta_pl
        // and a mean-value bound transfers that to the exponent itself
        let d = 16;
        let alpha_true = 0.7;
        let delta = 0.1f64;
        let eta_pl = ((1.0 + delta) / (1.0 - delta)).ln();
        let iv = interval(0.1, 2.0);
        let base = orbit_point(w(d), alpha_true);
        let mut sigmas: Vec<f64> = base
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, l)| l.sqrt() * (1.0 + delta * ((i * 5 + 1) as f64).sin()))
            .collect();
        let f2: f64 = sigmas.iter().map(|s| s * s).sum();
        for s in &mut sigmas {
            *s *= (d as f64 / f2).sqrt();
        }
        let spectrum = Spectrum::new(sigmas).unwrap();
        for kind in [
            ChartKind::TopRadial,
            ChartKind::LogLeastSquares {
                window: RankWindow::default_for(w(d)),
                normalized_intercept: false,
            },
        ] {
            let fitted = fit_chart(&spectrum, &kind, &iv, &tol()).unwrap();
            let lo = fitted.alpha.min(alpha_true);
            let hi = fitted.alpha.max(alpha_true);
            let hull = interval(lo, (hi + 1e-12).max(lo * (1.0 + 1e-12)));
            let m_d = crate::orbit::min_slope(w(d), &hull).unwrap().value;
            let bound = (fitted.r.abs() + eta_pl) / m_d;
            assert!(
                (fitted.alpha - alpha_true).abs() <= bound + 1e-10,
                "{}: |{} - {alpha_true}| vs {bound}",
                kind.name(),
                fitted.alpha
            );
        }
    }

    #[test]
    fn least_squares_rejects_zero_singular_values_in_window() {
        let spectrum = Spectrum::new(vec![2.0, 1.0, 0.0, 0.0]).unwrap();
        let iv = interval(0.1, 2.0);
        let window = RankWindow::contiguous(1, 3).unwrap();
        assert!(matches!(
            chart_log_least_squares(&spectrum, &iv, &window, false, &tol()),
            Err(Error::ZeroSingularValueInWindow(3))
        ));
    }

    #[test]
    fn uniform_window_residual_controls_radial_residual() {
        // normalized layer, intercept pinned to g(alpha): the rank-1
        // regression residual IS the radial residual, so |r| <= sup residual
        let d = 10;
        let alpha = 0.65;
        let base = orbit_point(w(d), alpha);
        let mut sigmas: Vec<f64> = base
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, l)| l.sqrt() * (1.0 + 0.05 * ((i * i) as f64).sin()))
            .collect();
        let f2: f64 = sigmas.iter().map(|s| s * s).sum();
        for s in &mut sigmas {
            *s *= (d as f64 / f2).sqrt();
        }
        let spectrum = Spectrum::new(sigmas).unwrap();
        let window = RankWindow::contiguous(1, 6).unwrap();
        let c = crate::orbit::g(w(d), alpha);
        let delta = uniform_window_residual(&spectrum, &window, alpha, c).unwrap();
        let r = rho(&spectrum.to_cartan().unwrap()).unwrap() - c;
        assert!(r.abs() <= delta + 1e-12);
    }

    #[test]
    fn chart_errors_vanish_on_orbit_and_hit_hellinger_extreme() {
        let d = 7;
        let p = orbit_point(w(d), 1.1).to_cartan();
        let errs = chart_errors(&p, 1.1, &tol()).unwrap();
        assert!(errs.r.abs() < 1e-12);
        assert!(errs.e_log < 1e-12);
        assert!(errs.e_bw < 1e-12);

        // disjoint-support energy measures sit at the sqrt(2) extreme
        let mu = [1.0, 0.0, 0.0];
        let nu = [0.0, 0.5, 0.5];
        assert_relative_eq!(sqrt_vector_distance(&mu, &nu), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn chart_errors_match_energy_measure_distance() {
        let d = 11;
        let spectrum = orbit_spectrum(d, 0.45);
        let p = spectrum.to_cartan().unwrap();
        let alpha = 0.9;
        let errs = chart_errors(&p, alpha, &tol()).unwrap();
        let orbit_pt = orbit_point(w(d), alpha);
        let energy: Vec<f64> = p.eigenvalues().iter().map(|l| l / p.trace()).collect();
        let hellinger = sqrt_vector_distance(&energy, orbit_pt.gibbs());
        // same arithmetic scale: e_bw_normalized is the Hellinger-type
        // distance of the energy measures on the trace-d slice
        assert!((errs.e_bw_normalized - hellinger).abs() < 1e-10);
        assert!(errs.e_bw_normalized <= 2f64.sqrt());
    }

    proptest::proptest! {
        #[test]
        fn fitted_exponent_lands_in_the_interval(
            d in 2usize..40,
            lo in 0.05f64..1.0,
            span in 0.05f64..2.0,
            shape in 0.1f64..1.5,
            wobble in 0.0f64..0.4,
        ) {
            let iv = interval(lo, lo + span);
            let mut vals: Vec<f64> = (1..=d)
                .map(|i| (i as f64).powf(-shape) * (1.0 + wobble * (i as f64).sin()))
                .collect();
            let f2: f64 = vals.iter().map(|v| v * v).sum();
            for v in &mut vals {
                *v *= (d as f64 / f2).sqrt();
            }
            let spectrum = Spectrum::new(vals).unwrap();
            for kind in [
                ChartKind::TopRadial,
                ChartKind::BuresProjection,
                ChartKind::LogLeastSquares {
                    window: RankWindow::default_for(spectrum.width()),
                    normalized_intercept: false,
                },
            ] {
                let fitted = fit_chart(&spectrum, &kind, &iv, &tol()).unwrap();
                proptest::prop_assert!(iv.contains(fitted.alpha), "{}", kind.name());
                proptest::prop_assert!(fitted.e_bw_normalized <= 2f64.sqrt() + 1e-12);
                proptest::prop_assert!(fitted.e_log >= fitted.r.abs() - 1e-10);
            }
        }
    }

    #[test]
    fn residual_variations_basics() {
        assert_eq!(residual_variation(&[0.4, 0.4, 0.4]).unwrap(), 0.0);
        assert!(residual_variation(&[1.0]).is_err());
        assert_relative_eq!(
            residual_variation(&[0.0, 1.0, -1.0]).unwrap(),
            3.0,
            epsilon = 1e-15
        );

        // exact power-law chain: all variations vanish
        let iv = interval(0.2, 2.0);
        let layers: Vec<ChartedLayer> = [0.5, 0.8, 1.1]
            .iter()
            .map(|&a| {
                fit_chart(&orbit_spectrum(9, a), &ChartKind::TopRadial, &iv, &tol()).unwrap()
            })
            .collect();
        let vars = chart_residual_variations(&layers).unwrap();
        assert!(vars.tv_bw < 1e-8);
        assert!(vars.tv_log < 1e-7);

        // triangle: steps below endpoint sums on a noisy chain
        let noisy: Vec<ChartedLayer> = (0..4)
            .map(|k| {
                let mut vals: Vec<f64> = (1..=9)
                    .map(|i| (i as f64).powf(-0.5) * (1.0 + 0.1 * ((i + k) as f64).sin()))
                    .collect();
                let f2: f64 = vals.iter().map(|v| v * v).sum();
                for v in &mut vals {
                    *v *= (9.0 / f2).sqrt();
                }
                fit_chart(
                    &Spectrum::new(vals).unwrap(),
                    &ChartKind::TopRadial,
                    &iv,
                    &tol(),
                )
                .unwrap()
            })
            .collect();
        let vars = chart_residual_variations(&noisy).unwrap();
        let endpoint_sum: f64 = noisy.windows(2).map(|p| p[1].e_bw + p[0].e_bw).sum();
        assert!(vars.tv_bw <= endpoint_sum + 1e-12);
    }
}
