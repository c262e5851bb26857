//! Layer chains, interface transport margins, and the deterministic
//! rigidity inequalities.
//!
//! For a chain of Frobenius-normalized full-rank factors, each interface
//! carries a geometric-mean radial amplitude
//! `Lambda = ||W_{k+1} W_k||_2 / sqrt(||W_{k+1}||_2 ||W_k||_2)`, a
//! non-backtracking slack
//! `eta = [log(max(||W_{k+1}||_2, ||W_k||_2) / ||W_{k+1} W_k||_2)]_+`,
//! and the combined margin `b_k = log Lambda + eta`. These margins bound the
//! displacement of the radial observable, and (through the chart's
//! conditioning constant) the drift of the fitted exponent, its total
//! variation, Bures path lengths, and KL/Bures actions. Every inequality
//! here is a theorem on valid inputs: a failed pass flag signals a defect,
//! not data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::charts::{
    chart_residual_variations, fit_chart, ChartKind, ChartedLayer, ResidualVariations, Spectrum,
};
use crate::error::{Error, Result};
use crate::numerics::{check_finite, kahan_sum, operator_norm, singular_values_desc};
use crate::orbit::{self, CartanPoint, ExponentInterval, Width};
use crate::Tolerances;

/// An ordered chain of square real matrices over a common width.
#[derive(Debug, Clone)]
pub struct LayerChain {
    layers: Vec<DMatrix<f64>>,
    normalized: bool,
}

impl LayerChain {
    /// Validate and build a chain. Requires at least 2 layers of a common
    /// square shape, finite entries, and full rank
    /// (`sigma_min > tol.full_rank * sigma_max`); with `normalize` each
    /// layer is rescaled to squared Frobenius norm d.
    pub fn new(mut layers: Vec<DMatrix<f64>>, normalize: bool, tol: &Tolerances) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::ChainTooShort {
                required: 2,
                got: layers.len(),
            });
        }
        let d = layers[0].nrows();
        for (index, layer) in layers.iter_mut().enumerate() {
            if layer.nrows() != layer.ncols() {
                return Err(Error::DimensionMismatch(layer.nrows(), layer.ncols()));
            }
            if layer.nrows() != d {
                return Err(Error::DimensionMismatch(layer.nrows(), d));
            }
            check_finite(layer)?;
            let sv = singular_values_desc(layer);
            let (top, bottom) = (sv[0], sv[d - 1]);
            if top <= 0.0 {
                return Err(Error::ZeroMatrix);
            }
            if bottom <= tol.full_rank * top {
                return Err(Error::RankDeficient {
                    index,
                    ratio: bottom / top,
                });
            }
            if normalize {
                let scale = (d as f64).sqrt() / layer.norm();
                *layer *= scale;
            }
        }
        Ok(Self {
            layers,
            normalized: normalize,
        })
    }

    pub fn width(&self) -> Width {
        Width::new(self.layers[0].nrows()).expect("validated at construction")
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    /// Singular-value spectra of all layers.
    pub fn spectra(&self) -> Result<Vec<Spectrum>> {
        self.layers.iter().map(Spectrum::from_matrix).collect()
    }

    fn require_normalized(&self, tol: &Tolerances) -> Result<()> {
        let d = self.layers[0].nrows();
        for (index, layer) in self.layers.iter().enumerate() {
            let frobenius_sq = layer.norm_squared();
            if (frobenius_sq - d as f64).abs() > tol.frobenius_rel * d as f64 {
                return Err(Error::ChainNotNormalized {
                    index,
                    frobenius_sq,
                    d,
                });
            }
        }
        Ok(())
    }
}

/// Zero-pad a rectangular matrix square and optionally regularize and
/// normalize it.
///
/// Padding preserves every nonzero singular value together with the operator
/// and Frobenius norms. With `epsilon > 0` the factor is rebuilt so that its
/// Gram matrix becomes `W^T W + epsilon I` (singular values
/// `sqrt(sigma_i^2 + epsilon)`), which moves boundary points of the positive
/// cone into the interior. With `normalize` the result is rescaled to
/// squared Frobenius norm d.
pub fn normalize_and_embed(
    w: &DMatrix<f64>,
    epsilon: f64,
    normalize: bool,
) -> Result<DMatrix<f64>> {
    check_finite(w)?;
    if w.norm() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let d = w.nrows().max(w.ncols());
    let mut square = DMatrix::<f64>::zeros(d, d);
    square.view_mut((0, 0), (w.nrows(), w.ncols())).copy_from(w);
    if epsilon > 0.0 {
        let svd = square.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested");
        let v_t = svd.v_t.as_ref().expect("requested");
        let mut sigma = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            sigma[(i, i)] = (svd.singular_values[i] * svd.singular_values[i] + epsilon).sqrt();
        }
        square = u * sigma * v_t;
    }
    if normalize {
        let scale = (d as f64).sqrt() / square.norm();
        square *= scale;
    }
    Ok(square)
}

/// Per-interface transport quantities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterfaceMargins {
    /// Geometric-mean radial amplitude `Lambda(W_{k+1}, W_k)`.
    pub lambda: f64,
    /// Non-backtracking slack `eta_k^nb >= 0`.
    pub eta_nb: f64,
    /// Combined local radial margin `b_k = log lambda + eta_nb`.
    pub b: f64,
}

/// Measure one interface. `w_k` feeds `w_next`, so the two-step factor is
/// `w_next * w_k`.
pub fn interface_margins(
    w_k: &DMatrix<f64>,
    w_next: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<InterfaceMargins> {
    let norm_k = operator_norm(w_k, tol.svd_cutoff);
    let norm_next = operator_norm(w_next, tol.svd_cutoff);
    if norm_k <= 0.0 || norm_next <= 0.0 {
        return Err(Error::ZeroOperatorNorm);
    }
    let product_norm = operator_norm(&(w_next * w_k), tol.svd_cutoff);
    if product_norm <= 0.0 {
        return Err(Error::ZeroOperatorNorm);
    }
    let lambda = product_norm / (norm_next * norm_k).sqrt();
    let eta_nb = (norm_next.max(norm_k) / product_norm).ln().max(0.0);
    Ok(InterfaceMargins {
        lambda,
        eta_nb,
        b: lambda.ln() + eta_nb,
    })
}

/// Margins for every interface of a chain.
pub fn all_interface_margins(chain: &LayerChain, tol: &Tolerances) -> Result<Vec<InterfaceMargins>> {
    chain
        .layers()
        .windows(2)
        .map(|pair| interface_margins(&pair[0], &pair[1], tol))
        .collect()
}

/// One side-by-side check of the radial transport bound
/// `|rho(P_n) - rho(P_m)| <= 2 sum_{j=m}^{n-1} b_j`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn rho_of_spectrum(s: &Spectrum) -> f64 {
    let top = s.values()[0];
    0.5 * (s.dim() as f64 * top * top / s.frobenius_sq()).ln()
}

/// Radial displacement between layers m < n against the slack-aware budget.
pub fn radial_displacement_check(
    chain: &LayerChain,
    m: usize,
    n: usize,
    tol: &Tolerances,
) -> Result<RadialCheck> {
    if m >= n || n >= chain.len() {
        return Err(Error::LayerIndex {
            index: n,
            len: chain.len(),
        });
    }
    chain.require_normalized(tol)?;
    let spectra = chain.spectra()?;
    let margins = all_interface_margins(chain, tol)?;
    let lhs = (rho_of_spectrum(&spectra[n]) - rho_of_spectrum(&spectra[m])).abs();
    let rhs = 2.0 * margins[m..n].iter().map(|im| im.b).sum::<f64>();
    Ok(RadialCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-10,
    })
}

/// User-supplied uniform-budget hypotheses for the small-margin
/// specializations. They are asserted against the measured chain before any
/// specialized bound is reported.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BudgetHypotheses {
    /// Total amplitude budget M >= 1 with per-interface `lambda_k <= M^{2/L}`.
    pub amplitude: f64,
    /// Claim that every non-backtracking slack vanishes.
    pub zero_slack: bool,
    /// Optional residual rate R with `|r_{k+1} - r_k| <= R / L`.
    pub residual_rate: Option<f64>,
}

/// Evaluation of the small-margin specializations under supplied hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct SmallMarginReport {
    /// Whether `lambda_k <= M^{2/L}` held on every interface.
    pub amplitude_ok: bool,
    /// Whether measured slacks vanish (when claimed).
    pub zero_slack_ok: bool,
    /// Whether residual increments vanish (within tolerance).
    pub residual_const_ok: bool,
    /// `max_k |alpha_{k+1} - alpha_k|`.
    pub max_alpha_step: f64,
    /// Zero-slack exact-chart ceiling `4 log M / (L m_d(I))`.
    pub uniform_local_bound: f64,
    /// Pass flag for the ceiling; `None` when the hypotheses do not hold.
    pub uniform_local_pass: Option<bool>,
    /// General uniform-budget TV bound
    /// `(4 log M + 2 sum eta + TV(r)) / m_d(I)`.
    pub uniform_tv_bound: f64,
    /// Pass flag for the TV bound; `None` when the amplitude check failed.
    pub uniform_tv_pass: Option<bool>,
    /// Optional `(2B + R)/(L m_d)` ceiling from a supplied residual rate.
    pub rate_local_bound: Option<f64>,
    pub rate_local_pass: Option<bool>,
}

/// Fitted-orbit and actual-Cartan path lengths with their budget bounds.
#[derive(Debug, Clone, Serialize)]
pub struct PathLengths {
    /// `sum_k d_BW(G(alpha_{k+1}), G(alpha_k))`.
    pub fitted_bw: f64,
    /// `sqrt(d V_max(I)) * TV(alpha)`.
    pub fitted_rhs: f64,
    pub fitted_pass: bool,
    /// Budget form `(sqrt(d V_max)/m_d) (2 sum b + TV(r))`.
    pub fitted_rhs_budget: f64,
    pub fitted_budget_pass: bool,
    /// `sum_k d_BW(Cart(P_{k+1}), Cart(P_k))`.
    pub actual_bw: f64,
    /// Sharper residual-variation bound `TV_bw^chart + fitted_bw`.
    pub actual_rhs_variation: f64,
    pub actual_variation_pass: bool,
    /// Coarser endpoint bound `sum (e_bw(k+1) + e_bw(k)) + fitted_bw`.
    pub actual_rhs_endpoint: f64,
    pub actual_endpoint_pass: bool,
    /// Log-Cartan actual path `sum ||c(P_{k+1}) - c(P_k)||_2`.
    pub actual_log: f64,
    /// `sum ||c(G(alpha_{k+1})) - c(G(alpha_k))||_2 + TV_log^chart`.
    pub actual_log_rhs: f64,
    pub actual_log_pass: bool,
}

/// KL and squared-Bures action bounds for a budgeted chain.
#[derive(Debug, Clone, Serialize)]
pub struct ActionBounds {
    /// `sum_k KL(alpha_k || alpha_{k+1})`.
    pub kl_action: f64,
    /// `(I_max / (2 m_d^2)) sum B_k^2` with `B_k = 2 b_k + |r_{k+1} - r_k|`.
    pub kl_rhs: f64,
    pub kl_pass: bool,
    /// `sum_k d_BW(G(alpha_{k+1}), G(alpha_k))^2`.
    pub bw_action: f64,
    /// `(d V_max / m_d^2) sum B_k^2`.
    pub bw_rhs: f64,
    pub bw_pass: bool,
    /// Uniform-budget forms, present when the zero-slack exact-chart
    /// hypotheses hold: `8 (L-1) I_max (log M / L)^2 / m_d^2` and
    /// `16 (L-1) d V_max (log M / L)^2 / m_d^2`.
    pub uniform_kl_bound: Option<f64>,
    pub uniform_kl_pass: Option<bool>,
    pub uniform_bw_bound: Option<f64>,
    pub uniform_bw_pass: Option<bool>,
}

/// Converse row: the margin needed to explain the observed coordinate jump.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConverseRow {
    pub b: f64,
    /// `((|g(alpha_{k+1}) - g(alpha_k)| - |r_{k+1} - r_k|)/2)_+`.
    pub lower_bound: f64,
    pub pass: bool,
    /// Exact zero-slack shock bound `log lambda_k >= m_d |dalpha| / 2`,
    /// evaluated when the interface has vanishing slack and residuals.
    pub exact_lower: Option<f64>,
    pub exact_pass: Option<bool>,
}

/// Per-interface rigidity row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterfaceReport {
    pub margins: InterfaceMargins,
    /// `|alpha_{k+1} - alpha_k|`.
    pub alpha_step: f64,
    /// `|r_{k+1} - r_k|`.
    pub residual_step: f64,
    /// Signed-residual local bound `(2 b_k + |r_{k+1} - r_k|) / m_d(I)`.
    pub local_bound: f64,
    pub local_pass: bool,
    /// Unsigned variant `(2 b_k + |r_{k+1}| + |r_k|) / m_d(I)`.
    pub local_bound_unsigned: f64,
    pub local_unsigned_pass: bool,
    /// `m_d(I) |dalpha| / (2 b_k + |dr|)`; `None` when the denominator is
    /// below tolerance. At most 1 whenever defined.
    pub margin_ratio: Option<f64>,
}

/// Complete rigidity evaluation of one chain under one chart.
#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub d: usize,
    pub depth: usize,
    pub interval: ExponentInterval,
    pub chart: ChartKind,
    /// Conditioning constant `m_d(I)` and its positive lower bound.
    pub m_d: f64,
    pub m_d_lower_bound: f64,
    /// `V_max(I)` and `I_max(I) = 4 V_max(I)` over the interval.
    pub v_max: f64,
    pub i_max: f64,
    pub layers: Vec<ChartedLayer>,
    pub interfaces: Vec<InterfaceReport>,
    pub converse: Vec<ConverseRow>,
    /// Total variation of the fitted exponent profile.
    pub tv_alpha: f64,
    /// Total variation of the signed radial residuals.
    pub tv_r: f64,
    pub residual_variations: ResidualVariations,
    /// (C1) over every pair m < n.
    pub radial_pairs_pass: bool,
    /// (C2) over every pair m < n.
    pub alpha_pairs_pass: bool,
    /// (C3) signed bound `(2 sum b + TV(r)) / m_d`.
    pub tv_bound: f64,
    pub tv_pass: bool,
    /// (C3) crude bound with `delta_bar = max_k |r_k|`.
    pub tv_crude_bound: f64,
    pub tv_crude_pass: bool,
    pub small_margin: Option<SmallMarginReport>,
    pub path: PathLengths,
    pub actions: ActionBounds,
    /// Conjunction of every checked inequality.
    pub all_pass: bool,
}

fn bures_between_cartans(a: &CartanPoint, b: &CartanPoint) -> f64 {
    orbit::bures_diagonal(a, b).expect("same width within one chain")
}

fn log_vec_distance(a: &CartanPoint, b: &CartanPoint) -> f64 {
    kahan_sum(
        a.log_vector()
            .iter()
            .zip(b.log_vector().iter())
            .rev()
            .map(|(x, y)| (x - y) * (x - y)),
    )
    .max(0.0)
    .sqrt()
}

/// Chart every layer of a normalized chain.
pub fn charted_layers(
    chain: &LayerChain,
    interval: &ExponentInterval,
    chart: &ChartKind,
    tol: &Tolerances,
) -> Result<Vec<ChartedLayer>> {
    chain.require_normalized(tol)?;
    chain
        .spectra()?
        .iter()
        .map(|s| fit_chart(s, chart, interval, tol))
        .collect()
}

/// Evaluate every rigidity inequality for one chain/chart pair.
pub fn rigidity_report(
    chain: &LayerChain,
    interval: &ExponentInterval,
    chart: &ChartKind,
    budget: Option<&BudgetHypotheses>,
    tol: &Tolerances,
) -> Result<RigidityReport> {
    let d = chain.width();
    if d.is_degenerate() {
        return Err(Error::DegenerateWidth);
    }
    chain.require_normalized(tol)?;
    let depth = chain.len();
    let slope = orbit::min_slope(d, interval)?;
    let m_d = slope.value;
    let v_max = orbit::max_variance(d, interval, tol);
    let i_max = 4.0 * v_max;

    let layers = charted_layers(chain, interval, chart, tol)?;
    let margins = all_interface_margins(chain, tol)?;
    let cartans: Vec<CartanPoint> = layers
        .iter()
        .map(|l| l.spectrum.to_cartan())
        .collect::<Result<_>>()?;
    let rhos: Vec<f64> = layers.iter().map(|l| rho_of_spectrum(&l.spectrum)).collect();
    let alphas: Vec<f64> = layers.iter().map(|l| l.alpha).collect();
    let residuals: Vec<f64> = layers.iter().map(|l| l.r).collect();

    // prefix sums of the margins for the pairwise checks
    let mut b_prefix = vec![0.0f64];
    for im in &margins {
        b_prefix.push(b_prefix.last().unwrap() + im.b);
    }

    let mut all_pass = true;
    let mut interfaces = Vec::with_capacity(depth - 1);
    let mut converse = Vec::with_capacity(depth - 1);
    for k in 0..depth - 1 {
        let im = margins[k];
        let alpha_step = (alphas[k + 1] - alphas[k]).abs();
        let residual_step = (residuals[k + 1] - residuals[k]).abs();
        let local_bound = (2.0 * im.b + residual_step) / m_d;
        let local_pass = tol.le(alpha_step, local_bound);
        let local_bound_unsigned =
            (2.0 * im.b + residuals[k + 1].abs() + residuals[k].abs()) / m_d;
        let local_unsigned_pass = tol.le(alpha_step, local_bound_unsigned);
        let denom = 2.0 * im.b + residual_step;
        let margin_ratio = if denom > tol.pass_abs {
            Some(m_d * alpha_step / denom)
        } else {
            None
        };
        all_pass &= local_pass && local_unsigned_pass;
        interfaces.push(InterfaceReport {
            margins: im,
            alpha_step,
            residual_step,
            local_bound,
            local_pass,
            local_bound_unsigned,
            local_unsigned_pass,
            margin_ratio,
        });

        // converse: a coordinate jump needs margin
        let g_step = (orbit::g(d, alphas[k + 1]) - orbit::g(d, alphas[k])).abs();
        let lower_bound = 0.5 * (g_step - residual_step).max(0.0);
        let conv_pass = tol.le(lower_bound, im.b);
        let exact_here = im.eta_nb <= tol.pass_abs
            && residuals[k].abs() <= tol.pass_abs
            && residuals[k + 1].abs() <= tol.pass_abs;
        let (exact_lower, exact_pass) = if exact_here {
            let lower = 0.5 * m_d * alpha_step;
            (Some(lower), Some(tol.le(lower, im.lambda.ln())))
        } else {
            (None, None)
        };
        all_pass &= conv_pass && exact_pass.unwrap_or(true);
        converse.push(ConverseRow {
            b: im.b,
            lower_bound,
            pass: conv_pass,
            exact_lower,
            exact_pass,
        });
    }

    // (C1) and (C2) across every pair m < n
    let mut radial_pairs_pass = true;
    let mut alpha_pairs_pass = true;
    for m in 0..depth {
        for n in m + 1..depth {
            let budget_sum = 2.0 * (b_prefix[n] - b_prefix[m]);
            radial_pairs_pass &= tol.le((rhos[n] - rhos[m]).abs(), budget_sum);
            let bound = (budget_sum + (residuals[n] - residuals[m]).abs()) / m_d;
            alpha_pairs_pass &= tol.le((alphas[n] - alphas[m]).abs(), bound);
        }
    }
    all_pass &= radial_pairs_pass && alpha_pairs_pass;

    // (C3) total-variation bounds
    let tv_alpha: f64 = alphas.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let tv_r: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let sum_b: f64 = margins.iter().map(|im| im.b).sum();
    let tv_bound = (2.0 * sum_b + tv_r) / m_d;
    let tv_pass = tol.le(tv_alpha, tv_bound);
    let delta_bar = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    let tv_crude_bound = (2.0 * sum_b + 2.0 * (depth as f64 - 1.0) * delta_bar) / m_d;
    let tv_crude_pass = tol.le(tv_alpha, tv_crude_bound);
    all_pass &= tv_pass && tv_crude_pass;

    // path lengths: fitted orbit, actual Cartan, log-Cartan variant
    let residual_variations = chart_residual_variations(&layers)?;
    let orbit_points: Vec<CartanPoint> = alphas
        .iter()
        .map(|&a| orbit::orbit_point(d, a).to_cartan())
        .collect();
    let fitted_bw: f64 = (0..depth - 1)
        .map(|k| orbit::bures_orbit(d, alphas[k + 1], alphas[k]))
        .sum();
    let fitted_rhs = (d.get() as f64 * v_max).sqrt() * tv_alpha;
    let fitted_rhs_budget = (d.get() as f64 * v_max).sqrt() / m_d * (2.0 * sum_b + tv_r);
    let actual_bw: f64 = (0..depth - 1)
        .map(|k| bures_between_cartans(&cartans[k + 1], &cartans[k]))
        .sum();
    let actual_rhs_variation = residual_variations.tv_bw + fitted_bw;
    let endpoint_sum: f64 = (0..depth - 1)
        .map(|k| layers[k + 1].e_bw + layers[k].e_bw)
        .sum();
    let actual_rhs_endpoint = endpoint_sum + fitted_bw;
    let actual_log: f64 = (0..depth - 1)
        .map(|k| log_vec_distance(&cartans[k + 1], &cartans[k]))
        .sum();
    let fitted_log: f64 = (0..depth - 1)
        .map(|k| log_vec_distance(&orbit_points[k + 1], &orbit_points[k]))
        .sum();
    let actual_log_rhs = fitted_log + residual_variations.tv_log;
    let path = PathLengths {
        fitted_bw,
        fitted_rhs,
        fitted_pass: tol.le(fitted_bw, fitted_rhs),
        fitted_rhs_budget,
        fitted_budget_pass: tol.le(fitted_bw, fitted_rhs_budget),
        actual_bw,
        actual_rhs_variation,
        actual_variation_pass: tol.le(actual_bw, actual_rhs_variation),
        actual_rhs_endpoint,
        actual_endpoint_pass: tol.le(actual_bw, actual_rhs_endpoint),
        actual_log,
        actual_log_rhs,
        actual_log_pass: tol.le(actual_log, actual_log_rhs),
    };
    all_pass &= path.fitted_pass
        && path.fitted_budget_pass
        && path.actual_variation_pass
        && path.actual_endpoint_pass
        && path.actual_log_pass;

    // KL and Bures actions
    let kl_action: f64 = (0..depth - 1)
        .map(|k| orbit::kl(d, alphas[k], alphas[k + 1]))
        .sum();
    let bw_action: f64 = (0..depth - 1)
        .map(|k| {
            let dist = orbit::bures_orbit(d, alphas[k + 1], alphas[k]);
            dist * dist
        })
        .sum();
    let sum_b_sq: f64 = (0..depth - 1)
        .map(|k| {
            let bk = 2.0 * margins[k].b + interfaces[k].residual_step;
            bk * bk
        })
        .sum();
    let kl_rhs = i_max / (2.0 * m_d * m_d) * sum_b_sq;
    let bw_rhs = d.get() as f64 * v_max / (m_d * m_d) * sum_b_sq;
    let mut actions = ActionBounds {
        kl_action,
        kl_rhs,
        kl_pass: tol.le(kl_action, kl_rhs),
        bw_action,
        bw_rhs,
        bw_pass: tol.le(bw_action, bw_rhs),
        uniform_kl_bound: None,
        uniform_kl_pass: None,
        uniform_bw_bound: None,
        uniform_bw_pass: None,
    };
    all_pass &= actions.kl_pass && actions.bw_pass;

    // small-margin specializations under supplied budget hypotheses
    let small_margin = budget.map(|hyp| {
        let l = depth as f64;
        let per_interface_cap = hyp.amplitude.powf(2.0 / l);
        let amplitude_ok = margins
            .iter()
            .all(|im| im.lambda <= per_interface_cap * (1.0 + tol.pass_rel) + tol.pass_abs);
        let zero_slack_ok = !hyp.zero_slack
            || margins.iter().all(|im| im.eta_nb <= tol.pass_abs);
        let residual_const_ok = interfaces
            .iter()
            .all(|row| row.residual_step <= tol.pass_abs);
        let max_alpha_step = interfaces
            .iter()
            .fold(0.0f64, |acc, row| acc.max(row.alpha_step));
        let uniform_local_bound = 4.0 * hyp.amplitude.ln() / (l * m_d);
        let uniform_local_pass = (amplitude_ok && hyp.zero_slack && zero_slack_ok
            && residual_const_ok)
            .then(|| tol.le(max_alpha_step, uniform_local_bound));
        let sum_eta: f64 = margins.iter().map(|im| im.eta_nb).sum();
        let uniform_tv_bound = (4.0 * hyp.amplitude.ln() + 2.0 * sum_eta + tv_r) / m_d;
        let uniform_tv_pass = amplitude_ok.then(|| tol.le(tv_alpha, uniform_tv_bound));
        let b_max = margins.iter().fold(0.0f64, |acc, im| acc.max(im.b));
        let rate_local_bound = hyp
            .residual_rate
            .map(|rate| (2.0 * (b_max * l) + rate) / (l * m_d));
        // the bound only applies when the claimed residual rate actually
        // dominates the measured increments
        let rate_hypothesis_ok = hyp.residual_rate.is_some_and(|rate| {
            interfaces
                .iter()
                .all(|row| row.residual_step <= rate / l + tol.pass_abs)
        });
        let rate_local_pass = match (rate_local_bound, rate_hypothesis_ok) {
            (Some(bound), true) => Some(tol.le(max_alpha_step, bound)),
            _ => None,
        };

        if amplitude_ok && hyp.zero_slack && zero_slack_ok && residual_const_ok {
            let log_m = hyp.amplitude.ln();
            let kl_bound =
                8.0 * (l - 1.0) * i_max * (log_m / l) * (log_m / l) / (m_d * m_d);
            let bw_bound = 16.0 * (l - 1.0) * d.get() as f64 * v_max * (log_m / l)
                * (log_m / l)
                / (m_d * m_d);
            actions.uniform_kl_bound = Some(kl_bound);
            actions.uniform_kl_pass = Some(tol.le(kl_action, kl_bound));
            actions.uniform_bw_bound = Some(bw_bound);
            actions.uniform_bw_pass = Some(tol.le(bw_action, bw_bound));
        }

        SmallMarginReport {
            amplitude_ok,
            zero_slack_ok,
            residual_const_ok,
            max_alpha_step,
            uniform_local_bound,
            uniform_local_pass,
            uniform_tv_bound,
            uniform_tv_pass,
            rate_local_bound,
            rate_local_pass,
        }
    });
    if let Some(sm) = &small_margin {
        all_pass &= sm.uniform_local_pass.unwrap_or(true)
            && sm.uniform_tv_pass.unwrap_or(true)
            && sm.rate_local_pass.unwrap_or(true);
    }
    all_pass &= actions.uniform_kl_pass.unwrap_or(true) && actions.uniform_bw_pass.unwrap_or(true);

    Ok(RigidityReport {
        d: d.get(),
        depth,
        interval: *interval,
        chart: chart.clone(),
        m_d,
        m_d_lower_bound: slope.lower_bound,
        v_max,
        i_max,
        layers,
        interfaces,
        converse,
        tv_alpha,
        tv_r,
        residual_variations,
        radial_pairs_pass,
        alpha_pairs_pass,
        tv_bound,
        tv_pass,
        tv_crude_bound,
        tv_crude_pass,
        small_margin,
        path,
        actions,
        all_pass,
    })
}

/// Standalone path-length evaluation (also embedded in the full report).
pub fn path_lengths(
    chain: &LayerChain,
    interval: &ExponentInterval,
    chart: &ChartKind,
    tol: &Tolerances,
) -> Result<PathLengths> {
    Ok(rigidity_report(chain, interval, chart, None, tol)?.path)
}

/// Standalone converse bounds per interface.
pub fn converse_bound(
    chain: &LayerChain,
    interval: &ExponentInterval,
    chart: &ChartKind,
    tol: &Tolerances,
) -> Result<Vec<ConverseRow>> {
    Ok(rigidity_report(chain, interval, chart, None, tol)?.converse)
}

/// Standalone KL/Bures action bounds.
pub fn action_bounds(
    chain: &LayerChain,
    interval: &ExponentInterval,
    chart: &ChartKind,
    tol: &Tolerances,
) -> Result<ActionBounds> {
    Ok(rigidity_report(chain, interval, chart, None, tol)?.actions)
}

/// Strict-balance diagnosis of one interface.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalanceRow {
    /// `||W_k^T W_k - W_{k+1} W_{k+1}^T||_F`.
    pub gram_gap: f64,
    pub balanced: bool,
    /// Largest gap between the ordered singular values of the two layers.
    pub sv_gap: f64,
}

/// Flag interfaces satisfying the balancedness equation
/// `W_k^T W_k = W_{k+1} W_{k+1}^T` within `balance_tol`. On balanced
/// interfaces the singular-value multisets coincide (so any deterministic
/// chart fits equal exponents); `sv_gap` quantifies the match.
pub fn strict_balance_check(chain: &LayerChain, balance_tol: f64) -> Result<Vec<BalanceRow>> {
    let mut rows = Vec::with_capacity(chain.len() - 1);
    for pair in chain.layers().windows(2) {
        let gram_in = pair[0].transpose() * &pair[0];
        let gram_out = &pair[1] * pair[1].transpose();
        let gram_gap = (gram_in - gram_out).norm();
        let sv_k = singular_values_desc(&pair[0]);
        let sv_next = singular_values_desc(&pair[1]);
        let sv_gap = sv_k
            .iter()
            .zip(&sv_next)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        rows.push(BalanceRow {
            gram_gap,
            balanced: gram_gap <= balance_tol,
            sv_gap,
        });
    }
    Ok(rows)
}
