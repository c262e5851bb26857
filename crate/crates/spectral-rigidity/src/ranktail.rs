//! Spectral energy measures, truncation ranks, and power-law tail geometry.
//!
//! The energy measure of a layer puts mass `sigma_i^2 / ||W||_F^2` on rank
//! i; the truncation rank `R_eps` is the smallest rank retaining `1 - eps`
//! of that energy. Along the power-law orbit the tail mass has the exact
//! harmonic form `tau_alpha(r) = (H_{d,2a} - H_{r,2a}) / H_{d,2a}`, is
//! monotone in the exponent, and 2 log d Lipschitz, which yields
//! finite-width rank bounds, stability margins for the selected rank window,
//! and localization of rank transitions along a fitted exponent path.

use serde::Serialize;

use crate::chain::{BudgetHypotheses, RigidityReport};
use crate::charts::Spectrum;
use crate::error::{Error, Result};
use crate::numerics::kahan_sum;
use crate::orbit::{ExponentInterval, Width};
use crate::Tolerances;

/// Probability weights of the spectral energy measure, nonincreasing.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyMeasure {
    weights: Vec<f64>,
}

impl EnergyMeasure {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Tail masses `mu({r+1, ..., d})` for r = 0..=d, with exact endpoints
    /// 1 and 0.
    pub fn tails(&self) -> Vec<f64> {
        suffix_masses(&self.weights)
    }
}

fn suffix_masses(weights: &[f64]) -> Vec<f64> {
    let d = weights.len();
    let mut tails = vec![0.0; d + 1];
    let mut sum = 0.0;
    let mut carry = 0.0;
    for r in (0..d).rev() {
        let y = weights[r] - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
        tails[r] = sum;
    }
    // normalize so that the full mass is exactly 1
    let total = tails[0];
    if total > 0.0 {
        for t in tails.iter_mut() {
            *t /= total;
        }
    }
    tails[0] = 1.0;
    tails[d] = 0.0;
    tails
}

/// Energy measure of a spectrum: `sigma_i^2 / sum sigma_j^2`.
pub fn energy_measure(spectrum: &Spectrum) -> EnergyMeasure {
    let f2 = spectrum.frobenius_sq();
    EnergyMeasure {
        weights: spectrum.values().iter().map(|s| s * s / f2).collect(),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

/// Truncation rank: smallest r with cumulative mass at least `1 - eps`
/// (equivalently tail mass at most `eps`). Ties go to the smaller rank.
pub fn truncation_rank(mu: &EnergyMeasure, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let tails = mu.tails();
    match tails.iter().position(|&t| t <= eps) {
        Some(r) if r > 0 => Ok(r),
        _ => Ok(mu.dim()),
    }
}

/// Exact power-law tail mass `tau_alpha(r)` on the orbit, with the
/// convention `H_{0,s} = 0`; so `tau(0) = 1` and `tau(d) = 0`.
pub fn tail_tau(d: Width, alpha: f64, r: usize) -> Result<f64> {
    if r > d.get() {
        return Err(Error::RankOutOfRange { r, d: d.get() });
    }
    Ok(tail_profile(d, alpha).tau[r])
}

/// All tail masses of the orbit point at one exponent.
#[derive(Debug, Clone)]
pub struct TailProfile {
    pub d: Width,
    pub alpha: f64,
    /// `tau[r]` for r = 0..=d; nonincreasing from 1 to 0.
    pub tau: Vec<f64>,
}

/// Evaluate `tau_alpha(r)` for every rank at once.
pub fn tail_profile(d: Width, alpha: f64) -> TailProfile {
    let weights: Vec<f64> = (1..=d.get())
        .map(|i| (i as f64).powf(-2.0 * alpha))
        .collect();
    TailProfile {
        d,
        alpha,
        tau: suffix_masses(&weights),
    }
}

/// Truncation rank of the orbit point itself: `min { r : tau_alpha(r) <= eps }`.
pub fn orbit_rank(d: Width, alpha: f64, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let profile = tail_profile(d, alpha);
    for r in 1..=d.get() {
        if profile.tau[r] <= eps {
            return Ok(r);
        }
    }
    Ok(d.get())
}

/// Closed integral bounds for a power tail: for `s > 0` and `1 <= r < d`,
///
/// ```text
/// int_{r+1}^{d+1} x^-s dx  <=  sum_{i=r+1}^{d} i^-s  <=  int_r^d x^-s dx.
/// ```
pub fn integral_test_bounds(d: Width, s: f64, r: usize) -> Result<(f64, f64, f64)> {
    if r == 0 || r >= d.get() {
        return Err(Error::RankOutOfRange { r, d: d.get() });
    }
    let integral = |a: f64, b: f64| -> f64 {
        if (s - 1.0).abs() < 1e-14 {
            (b / a).ln()
        } else {
            (a.powf(1.0 - s) - b.powf(1.0 - s)) / (s - 1.0)
        }
    };
    let sum = kahan_sum(((r + 1)..=d.get()).rev().map(|i| (i as f64).powf(-s)));
    let lower = integral(r as f64 + 1.0, d.get() as f64 + 1.0);
    let upper = integral(r as f64, d.get() as f64);
    Ok((lower, sum, upper))
}

/// The finite-width truncation-rank bounds on the orbit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RankBounds {
    /// Ceiling bound `min(d, ceil((1/((2a-1) eps H_{d,2a}))^(1/(2a-1))))`.
    pub upper: usize,
    /// Largest r certified to satisfy `R_eps > r`, when one exists.
    pub lower_witness: Option<usize>,
}

/// Tail-integral bounds on the truncation rank; requires `alpha > 1/2`
/// (below the zeta threshold the quantile is still defined but the
/// dimension-free scaling is withheld).
pub fn rank_bounds(d: Width, alpha: f64, eps: f64) -> Result<RankBounds> {
    check_eps(eps)?;
    if alpha <= 0.5 {
        return Err(Error::ExponentBelowHalf(alpha));
    }
    let s = 2.0 * alpha;
    let h = crate::orbit::harmonic_number(d, s);
    let raw = (1.0 / ((s - 1.0) * eps * h)).powf(1.0 / (s - 1.0));
    let upper = (raw.ceil().max(1.0) as usize).min(d.get());

    let dd = d.get() as f64;
    let lower_cond = |r: usize| -> bool {
        let lhs = ((r as f64 + 1.0).powf(1.0 - s) - (dd + 1.0).powf(1.0 - s)) / (s - 1.0);
        lhs >= eps * h
    };
    let mut lower_witness = None;
    for r in 1..d.get() {
        if lower_cond(r) {
            lower_witness = Some(r);
        } else {
            break; // left side decreases in r
        }
    }
    Ok(RankBounds {
        upper,
        lower_witness,
    })
}

/// Rank-separation margin
/// `m_eps(alpha) = min(eps - tau(R), tau(R-1) - eps)` at `R = R_eps(alpha)`.
/// Nonpositive only when `eps` ties a tail value exactly.
pub fn separation_margin(d: Width, alpha: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let profile = tail_profile(d, alpha);
    let r = orbit_rank(d, alpha, eps)?;
    Ok((eps - profile.tau[r]).min(profile.tau[r - 1] - eps))
}

/// Result of a pairwise rank-window stability test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowStability {
    /// `2 log d |alpha - beta|`.
    pub condition_lhs: f64,
    /// `m_eps(alpha)`.
    pub margin: f64,
    /// `condition_lhs < margin`; forces equal ranks.
    pub stable: bool,
    pub rank_alpha: usize,
    pub rank_beta: usize,
    /// Whether `|tau_alpha(r) - tau_beta(r)| <= 2 log d |alpha - beta|`
    /// held for every rank (it must).
    pub lipschitz_ok: bool,
}

/// Test whether the effective-rank window at `alpha` survives moving the
/// exponent to `beta`, and verify the tail Lipschitz bound along the way.
pub fn window_stability(d: Width, alpha: f64, beta: f64, eps: f64) -> Result<WindowStability> {
    check_eps(eps)?;
    let margin = separation_margin(d, alpha, eps)?;
    let condition_lhs = 2.0 * (d.get() as f64).ln() * (alpha - beta).abs();
    let rank_alpha = orbit_rank(d, alpha, eps)?;
    let rank_beta = orbit_rank(d, beta, eps)?;
    let pa = tail_profile(d, alpha);
    let pb = tail_profile(d, beta);
    let lipschitz_ok = pa
        .tau
        .iter()
        .zip(&pb.tau)
        .all(|(a, b)| (a - b).abs() <= condition_lhs + 1e-12);
    let stable = condition_lhs < margin;
    debug_assert!(!stable || rank_alpha == rank_beta);
    Ok(WindowStability {
        condition_lhs,
        margin,
        stable,
        rank_alpha,
        rank_beta,
        lipschitz_ok,
    })
}

/// Uniform discrepancy between a layer's actual energy tail and the fitted
/// power-law tail: `sup_r |mu_W({r+1..d}) - tau_alpha(r)|` (exact max over
/// the finite rank set).
pub fn tail_residual(spectrum: &Spectrum, alpha: f64) -> f64 {
    let actual = energy_measure(spectrum).tails();
    let fitted = tail_profile(spectrum.width(), alpha).tau;
    actual
        .iter()
        .zip(&fitted)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
}

/// Single-layer sandwich `R_{eps+dt}(alpha) <= R_eps(W) <= R_{eps-dt}(alpha)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RankSandwich {
    pub delta_tau: f64,
    pub low: usize,
    pub actual: usize,
    pub high: usize,
}

/// Sandwich the actual truncation rank between orbit quantiles at shifted
/// thresholds. Errors when the tail residual leaves no room around `eps`.
pub fn rank_sandwich(spectrum: &Spectrum, alpha: f64, eps: f64) -> Result<RankSandwich> {
    check_eps(eps)?;
    let delta_tau = tail_residual(spectrum, alpha);
    if delta_tau >= eps || eps >= 1.0 - delta_tau {
        return Err(Error::MarginTooSmall {
            delta: delta_tau,
            eps,
        });
    }
    let d = spectrum.width();
    let low = orbit_rank(d, alpha, eps + delta_tau)?;
    let actual = truncation_rank(&energy_measure(spectrum), eps)?;
    let high = orbit_rank(d, alpha, eps - delta_tau)?;
    debug_assert!(low <= actual && actual <= high);
    Ok(RankSandwich {
        delta_tau,
        low,
        actual,
        high,
    })
}

/// Per-interface rank-window stability derived from a rigidity report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterfaceRankRow {
    /// Theorem displacement bound `B_k = (2 b_k + |dr|) / m_d(I)`.
    pub b_alpha: f64,
    /// `2 log d * B_k`.
    pub condition: f64,
    /// `m_eps(alpha_k)`.
    pub margin: f64,
    /// Tail residuals of the two layers.
    pub delta_tau_k: f64,
    pub delta_tau_next: f64,
    /// Fitted-window stability `condition < margin`.
    pub fitted_stable: bool,
    /// Actual-window stability `condition + dt_k + dt_{k+1} < margin`.
    pub actual_stable: bool,
    pub fitted_rank_k: usize,
    pub fitted_rank_next: usize,
    pub actual_rank_k: usize,
    pub actual_rank_next: usize,
    /// Zero-slack uniform-budget sufficient condition
    /// `8 log d log M / (L m_d) < margin`, when hypotheses were supplied.
    pub uniform_condition: Option<f64>,
    pub uniform_stable: Option<bool>,
}

/// Evaluate fitted and actual rank-window stability across every interface
/// of a charted chain.
pub fn interface_window_stability(
    report: &RigidityReport,
    eps: f64,
    budget: Option<&BudgetHypotheses>,
    _tol: &Tolerances,
) -> Result<Vec<InterfaceRankRow>> {
    check_eps(eps)?;
    let d = Width::new(report.d)?;
    let log_d = (report.d as f64).ln();
    let mut rows = Vec::with_capacity(report.interfaces.len());
    for (k, iface) in report.interfaces.iter().enumerate() {
        let b_alpha = (2.0 * iface.margins.b + iface.residual_step) / report.m_d;
        let condition = 2.0 * log_d * b_alpha;
        let alpha_k = report.layers[k].alpha;
        let alpha_next = report.layers[k + 1].alpha;
        let margin = separation_margin(d, alpha_k, eps)?;
        let delta_tau_k = tail_residual(&report.layers[k].spectrum, alpha_k);
        let delta_tau_next = tail_residual(&report.layers[k + 1].spectrum, alpha_next);
        let fitted_stable = condition < margin;
        let actual_stable = condition + delta_tau_k + delta_tau_next < margin;
        let fitted_rank_k = orbit_rank(d, alpha_k, eps)?;
        let fitted_rank_next = orbit_rank(d, alpha_next, eps)?;
        let actual_rank_k = truncation_rank(&energy_measure(&report.layers[k].spectrum), eps)?;
        let actual_rank_next =
            truncation_rank(&energy_measure(&report.layers[k + 1].spectrum), eps)?;
        debug_assert!(!fitted_stable || fitted_rank_k == fitted_rank_next);
        debug_assert!(
            !actual_stable
                || (actual_rank_k == fitted_rank_k && actual_rank_next == fitted_rank_k)
        );
        let uniform_condition = budget.map(|hyp| {
            8.0 * log_d * hyp.amplitude.ln() / (report.depth as f64 * report.m_d)
        });
        rows.push(InterfaceRankRow {
            b_alpha,
            condition,
            margin,
            delta_tau_k,
            delta_tau_next,
            fitted_stable,
            actual_stable,
            fitted_rank_k,
            fitted_rank_next,
            actual_rank_k,
            actual_rank_next,
            uniform_condition,
            uniform_stable: uniform_condition.map(|c| c < margin),
        });
    }
    Ok(rows)
}

/// One maximal exponent interval on which the orbit rank is constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Plateau {
    pub rank: usize,
    /// Left edge (0 means the plateau is unbounded toward 0+).
    pub alpha_lo: f64,
    /// Right edge; `None` for the terminal rank-1 plateau.
    pub alpha_hi: Option<f64>,
}

/// Budget terms carried over from a rigidity report for the transition
/// count bound.
#[derive(Debug, Clone, Copy)]
pub struct ChainBudget {
    pub sum_b: f64,
    pub tv_r: f64,
    pub m_d: f64,
}

/// Transitions of the orbit rank along a fitted exponent sequence.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    /// Interfaces k with `R_eps(alpha_{k+1}) != R_eps(alpha_k)`.
    pub transitions: Vec<usize>,
    /// Whether every transition satisfied the local lower bound
    /// `2 log d |dalpha| >= m_eps(alpha_k)` (a theorem).
    pub local_lower_ok: bool,
    /// `(2 log d / mu) TV(alpha)` when a margin floor was supplied.
    pub count_bound_tv: Option<f64>,
    pub count_tv_ok: Option<bool>,
    /// `(2 log d / (mu m_d)) (2 sum b + TV(r))` when budget terms supplied.
    pub count_bound_budget: Option<f64>,
    pub count_budget_ok: Option<bool>,
    /// Plateau decomposition of `(0, interval.hi()]`.
    pub plateaus: Vec<Plateau>,
}

/// Locate effective-rank transitions along an exponent path, check the
/// margin lower bound at each, and decompose the interval into rank
/// plateaus by bisection on the monotone tails.
pub fn transition_localization(
    alphas: &[f64],
    d: Width,
    eps: f64,
    interval: &ExponentInterval,
    margin_floor: Option<f64>,
    budget: Option<&ChainBudget>,
    tol: &Tolerances,
) -> Result<TransitionReport> {
    check_eps(eps)?;
    if alphas.len() < 2 {
        return Err(Error::SequenceTooShort(alphas.len()));
    }
    let log_d = (d.get() as f64).ln();
    let ranks: Vec<usize> = alphas
        .iter()
        .map(|&a| orbit_rank(d, a, eps))
        .collect::<Result<_>>()?;
    let mut transitions = Vec::new();
    let mut local_lower_ok = true;
    for k in 0..alphas.len() - 1 {
        if ranks[k + 1] != ranks[k] {
            transitions.push(k);
            let lhs = 2.0 * log_d * (alphas[k + 1] - alphas[k]).abs();
            let margin = separation_margin(d, alphas[k], eps)?;
            local_lower_ok &= lhs >= margin - tol.pass_abs;
        }
    }
    let tv_alpha: f64 = alphas.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let count = transitions.len() as f64;
    let count_bound_tv = margin_floor.map(|mu| 2.0 * log_d / mu * tv_alpha);
    let count_tv_ok = count_bound_tv.map(|bound| count <= bound + tol.pass_abs);
    let count_bound_budget = match (margin_floor, budget) {
        (Some(mu), Some(bt)) => {
            Some(2.0 * log_d / (mu * bt.m_d) * (2.0 * bt.sum_b + bt.tv_r))
        }
        _ => None,
    };
    let count_budget_ok = count_bound_budget.map(|bound| count <= bound + tol.pass_abs);

    Ok(TransitionReport {
        transitions,
        local_lower_ok,
        count_bound_tv,
        count_tv_ok,
        count_bound_budget,
        count_budget_ok,
        plateaus: plateau_decomposition(d, eps, interval.hi(), tol)?,
    })
}

/// Rank plateaus of `(0, alpha_big]`: for each achieved rank the maximal
/// interval `[a_r, a_{r-1})` with `a_r = inf { alpha : tau_alpha(r) <= eps }`
/// found by bisection (ties at the threshold belong to the smaller rank).
pub fn plateau_decomposition(
    d: Width,
    eps: f64,
    alpha_big: f64,
    tol: &Tolerances,
) -> Result<Vec<Plateau>> {
    check_eps(eps)?;
    let lo_probe = 1e-12;
    // threshold a_r for each rank; 0 when tau(r) <= eps already at 0+
    let threshold = |r: usize| -> f64 {
        let tau_at = |alpha: f64| tail_profile(d, alpha).tau[r];
        if tau_at(lo_probe) <= eps {
            return 0.0;
        }
        let mut hi = alpha_big.max(1.0);
        while tau_at(hi) > eps {
            hi *= 2.0;
            if hi > 1e6 {
                return hi; // rank unreachable at any practical exponent
            }
        }
        let mut lo = lo_probe;
        while hi - lo > tol.alpha_tol {
            let mid = 0.5 * (lo + hi);
            if tau_at(mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    // rank r occupies [a_r, a_{r-1}); a_r is nonincreasing in r
    let rank_lo = orbit_rank(d, alpha_big, eps)?;
    let rank_hi = orbit_rank(d, lo_probe, eps)?;
    let mut plateaus = Vec::with_capacity(rank_hi - rank_lo + 1);
    for rank in rank_lo..=rank_hi {
        let alpha_lo = if rank == rank_hi { 0.0 } else { threshold(rank) };
        let alpha_hi = if rank == 1 {
            None
        } else {
            Some(threshold(rank - 1))
        };
        plateaus.push(Plateau {
            rank,
            alpha_lo,
            alpha_hi,
        });
    }
    Ok(plateaus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::orbit_point;
    use approx::assert_relative_eq;

    fn w(d: usize) -> Width {
        Width::new(d).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn powerlaw_spectrum(d: usize, alpha: f64) -> Spectrum {
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
    fn truncation_rank_basics() {
        // rank-one spectrum: all energy at rank 1
        let one = Spectrum::new(vec![3.0, 0.0, 0.0, 0.0]).unwrap();
        for eps in [0.001, 0.3, 0.9] {
            assert_eq!(truncation_rank(&energy_measure(&one), eps).unwrap(), 1);
        }
        // uniform spectrum, half mass at half rank
        let uniform = Spectrum::new(vec![1.0; 4]).unwrap();
        assert_eq!(truncation_rank(&energy_measure(&uniform), 0.5).unwrap(), 2);
        assert!(truncation_rank(&energy_measure(&uniform), 0.0).is_err());
        assert!(truncation_rank(&energy_measure(&uniform), 1.0).is_err());

        // exact power law vs direct cumulative-sum oracle
        let spec = powerlaw_spectrum(100, 1.0);
        let rank = truncation_rank(&energy_measure(&spec), 0.05).unwrap();
        let mut cum = 0.0;
        let total: f64 = spec.values().iter().map(|s| s * s).sum();
        let mut oracle = 100;
        for (i, s) in spec.values().iter().enumerate() {
            cum += s * s;
            if cum >= (1.0 - 0.05) * total {
                oracle = i + 1;
                break;
            }
        }
        assert_eq!(rank, oracle);
        assert_eq!(rank, orbit_rank(w(100), 1.0, 0.05).unwrap());
    }

    #[test]
    fn tail_tau_endpoints_hand_value_and_complement() {
        for alpha in [0.0, 0.4, 1.7] {
            assert_eq!(tail_tau(w(9), alpha, 0).unwrap(), 1.0);
            assert_eq!(tail_tau(w(9), alpha, 9).unwrap(), 0.0);
        }
        // d=2, alpha=1/2: (1.5 - 1) / 1.5 = 1/3
        assert_relative_eq!(
            tail_tau(w(2), 0.5, 1).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        // complement of the Gibbs head
        let d = w(12);
        let alpha = 0.8;
        let p = orbit_point(d, alpha);
        for r in 0..=12 {
            let head: f64 = p.gibbs()[..r].iter().sum();
            assert_relative_eq!(
                tail_tau(d, alpha, r).unwrap(),
                1.0 - head,
                epsilon = 1e-12
            );
        }
        assert!(tail_tau(w(4), 0.5, 5).is_err());
    }

    #[test]
    fn energy_measure_of_powerlaw_layer_is_gibbs() {
        let d = 40;
        let alpha = 0.9;
        let spec = powerlaw_spectrum(d, alpha);
        let mu = energy_measure(&spec);
        let gibbs = orbit_point(w(d), alpha);
        for (a, b) in mu.weights().iter().zip(gibbs.gibbs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_bounds_sandwich_exact_rank() {
        for d in [16usize, 64, 256] {
            for alpha in [0.6, 1.0, 2.0] {
                for eps in [0.3, 0.1, 0.03] {
                    let bounds = rank_bounds(w(d), alpha, eps).unwrap();
                    let exact = orbit_rank(w(d), alpha, eps).unwrap();
                    assert!(
                        exact <= bounds.upper,
                        "d={d} a={alpha} eps={eps}: {exact} > {}",
                        bounds.upper
                    );
                    if let Some(witness) = bounds.lower_witness {
                        assert!(
                            witness < exact,
                            "witness {witness} not below exact {exact}"
                        );
                    }
                }
            }
        }
        // strong decay concentrates all energy at rank one
        assert_eq!(rank_bounds(w(128), 8.0, 0.2).unwrap().upper, 1);
        assert!(rank_bounds(w(16), 0.5, 0.1).is_err());
    }

    #[test]
    fn integral_test_bounds_bracket_sums() {
        for (d, s, r) in [(50usize, 2.0, 3usize), (200, 1.5, 10), (100, 1.0, 5), (64, 3.3, 1)] {
            let (lower, sum, upper) = integral_test_bounds(w(d), s, r).unwrap();
            assert!(lower <= sum + 1e-14, "lower {lower} sum {sum}");
            assert!(sum <= upper + 1e-14, "sum {sum} upper {upper}");
        }
        assert!(integral_test_bounds(w(10), 2.0, 0).is_err());
        assert!(integral_test_bounds(w(10), 2.0, 10).is_err());
    }

    #[test]
    fn tail_monotone_in_alpha_and_rank_monotone() {
        let d = w(30);
        let alphas: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        for r in 0..=30 {
            let mut prev = f64::INFINITY;
            for &a in &alphas {
                let t = tail_tau(d, a, r).unwrap();
                assert!(t <= prev + 1e-14, "tau must be nonincreasing in alpha");
                prev = t;
            }
        }
        for eps in [0.25, 0.1] {
            let mut prev = usize::MAX;
            for &a in &alphas {
                let rank = orbit_rank(d, a, eps).unwrap();
                assert!(rank <= prev, "rank must be nonincreasing in alpha");
                prev = rank;
            }
        }
    }

    #[test]
    fn separation_margin_cases() {
        let margin = separation_margin(w(10), 0.8, 0.1).unwrap();
        assert!(margin > 0.0);
        assert!(margin <= 0.1_f64.min(0.9) + 1e-15);

        // a tie by construction: eps set exactly to a tail value
        let d = w(6);
        let alpha = 0.7;
        let r = orbit_rank(d, alpha, 0.2).unwrap();
        let eps_tie = tail_tau(d, alpha, r).unwrap();
        if eps_tie > 0.0 && eps_tie < 1.0 {
            let tied = separation_margin(d, alpha, eps_tie).unwrap();
            assert!(tied.abs() < 1e-12, "tie margin should vanish, got {tied}");
        }
    }

    #[test]
    fn window_stability_sweep_has_no_counterexamples() {
        let d = w(24);
        let eps = 0.15;
        let alphas: Vec<f64> = (1..=30).map(|k| 0.07 * k as f64).collect();
        for &a in &alphas {
            let same = window_stability(d, a, a, eps).unwrap();
            assert!(same.stable || same.margin <= 0.0);
            assert_eq!(same.rank_alpha, same.rank_beta);
            for &b in &alphas {
                let ws = window_stability(d, a, b, eps).unwrap();
                assert!(ws.lipschitz_ok, "Lipschitz bound failed at ({a}, {b})");
                if ws.stable {
                    assert_eq!(ws.rank_alpha, ws.rank_beta, "stable pair ({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn tail_residual_collapses_on_orbit_and_controls_sandwich() {
        let spec = powerlaw_spectrum(25, 0.85);
        assert!(tail_residual(&spec, 0.85) < 1e-12);
        let s = rank_sandwich(&spec, 0.85, 0.2).unwrap();
        assert_eq!(s.low, s.actual);
        assert_eq!(s.actual, s.high);
    }

    #[test]
    fn tail_residual_bounded_by_normalized_bures_error() {
        // arbitrary normalized layer, arbitrary chart alpha
        let d = 18;
        let mut vals: Vec<f64> = (1..=d)
            .map(|i| (i as f64).powf(-0.7) * (1.0 + 0.25 * ((i * 3) as f64).sin()))
            .collect();
        let f2: f64 = vals.iter().map(|v| v * v).sum();
        for v in &mut vals {
            *v *= (d as f64 / f2).sqrt();
        }
        let spec = Spectrum::new(vals).unwrap();
        for alpha in [0.3, 0.7, 1.4] {
            let delta = tail_residual(&spec, alpha);
            let errs =
                crate::charts::chart_errors(&spec.to_cartan().unwrap(), alpha, &tol()).unwrap();
            assert!(
                delta <= errs.e_bw_normalized + 1e-12,
                "delta {delta} vs hellinger {}",
                errs.e_bw_normalized
            );
        }
    }

    #[test]
    fn sandwich_rejects_vanishing_margin() {
        let d = 12;
        let mut vals: Vec<f64> = (1..=d).map(|i| (i as f64).powf(-0.5)).collect();
        let f2: f64 = vals.iter().map(|v| v * v).sum();
        for v in &mut vals {
            *v *= (d as f64 / f2).sqrt();
        }
        let spec = Spectrum::new(vals).unwrap();
        // a wildly wrong chart exponent makes the residual swamp epsilon
        let delta = tail_residual(&spec, 6.0);
        assert!(delta > 0.05);
        assert!(matches!(
            rank_sandwich(&spec, 6.0, delta * 0.5),
            Err(Error::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn sandwich_brackets_perturbed_layers() {
        let d = 30;
        let alpha = 0.9;
        let base = powerlaw_spectrum(d, alpha);
        let mut vals: Vec<f64> = base
            .values()
            .iter()
            .enumerate()
            .map(|(i, s)| s * (1.0 + 0.08 * ((i * 7) as f64).cos()))
            .collect();
        let f2: f64 = vals.iter().map(|v| v * v).sum();
        for v in &mut vals {
            *v *= (d as f64 / f2).sqrt();
        }
        let spec = Spectrum::new(vals).unwrap();
        let s = rank_sandwich(&spec, alpha, 0.15).unwrap();
        assert!(s.low <= s.actual && s.actual <= s.high);
        assert!(s.delta_tau > 0.0);
    }

    #[test]
    fn transitions_absent_on_slow_ramp_present_at_crossing() {
        let d = w(20);
        let eps = 0.15;
        let iv = ExponentInterval::new(0.2, 2.2).unwrap();

        // slow ramp well inside one plateau
        let anchor = 1.0;
        let rank = orbit_rank(d, anchor, eps).unwrap();
        let ramp: Vec<f64> = (0..8).map(|k| anchor + 1e-4 * k as f64).collect();
        assert!(ramp
            .iter()
            .all(|&a| orbit_rank(d, a, eps).unwrap() == rank));
        let report =
            transition_localization(&ramp, d, eps, &iv, Some(0.01), None, &tol()).unwrap();
        assert!(report.transitions.is_empty());
        assert!(report.local_lower_ok);
        assert_eq!(report.count_tv_ok, Some(true));

        // cross exactly one plateau boundary
        let plateaus = plateau_decomposition(d, eps, iv.hi(), &tol()).unwrap();
        let inner = plateaus
            .iter()
            .find(|p| p.alpha_lo > 0.0 && p.alpha_hi.is_some())
            .expect("an interior plateau exists");
        let boundary = inner.alpha_lo;
        let path = [boundary - 0.05, boundary - 0.02, boundary + 0.02];
        let report =
            transition_localization(&path, d, eps, &iv, None, None, &tol()).unwrap();
        assert_eq!(report.transitions, vec![1], "one transition at the crossing");
        assert!(report.local_lower_ok);
    }

    proptest::proptest! {
        #[test]
        fn truncation_rank_matches_cumulative_oracle(
            raw in proptest::collection::vec(0.01f64..10.0, 1..40),
            eps in 0.01f64..0.99,
        ) {
            let spectrum = Spectrum::new(raw).unwrap();
            let mu = energy_measure(&spectrum);
            let rank = truncation_rank(&mu, eps).unwrap();
            // direct cumulative scan over the normalized weights
            let total: f64 = mu.weights().iter().sum();
            let mut cum = 0.0;
            let mut oracle = mu.dim();
            for (i, p) in mu.weights().iter().enumerate() {
                cum += p / total;
                if cum >= 1.0 - eps {
                    oracle = i + 1;
                    break;
                }
            }
            // floating summation orders can differ at exact threshold ties
            proptest::prop_assert!(rank.abs_diff(oracle) <= 1);
            // tails complement the heads
            let tails = mu.tails();
            proptest::prop_assert!((tails[0] - 1.0).abs() < 1e-15);
            proptest::prop_assert!(tails[mu.dim()] == 0.0);
            for r in 1..=mu.dim() {
                proptest::prop_assert!(tails[r] <= tails[r - 1] + 1e-15);
            }
        }
    }

    #[test]
    fn interface_stability_flags_exactly_the_shock() {
        use crate::chain::{rigidity_report, BudgetHypotheses, LayerChain};
        use crate::charts::ChartKind;
        use crate::numerics::random_orthogonal;
        use nalgebra::DMatrix;
        use rand::SeedableRng;

        // reversal-aligned exact power-law layers: the two-step norm is
        // sigma_1 sigma_d, which makes b = log(sigma_d) - log(sigma_d) = 0
        // at equal-exponent interfaces; one engineered exponent jump then
        // concentrates the whole transport budget at the shock interface
        let d = 16usize;
        let tolv = tol();
        let alphas = [0.3, 0.3, 1.2, 1.2];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let reversal = DMatrix::from_fn(d, d, |i, j| if i + j == d - 1 { 1.0 } else { 0.0 });
        let mut right = random_orthogonal(&mut rng, d);
        let mut layers = Vec::new();
        for &alpha in &alphas {
            let left = random_orthogonal(&mut rng, d);
            let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d,
                orbit_point(w(d), alpha).eigenvalues().iter().map(|l| l.sqrt()),
            ));
            layers.push(&left * diag * right.transpose());
            right = &left * &reversal;
        }
        let chain = LayerChain::new(layers, true, &tolv).unwrap();
        let iv = ExponentInterval::new(0.1, 2.0).unwrap();
        let budget = BudgetHypotheses {
            amplitude: 2.0,
            zero_slack: false,
            residual_rate: None,
        };
        let report =
            rigidity_report(&chain, &iv, &ChartKind::TopRadial, Some(&budget), &tolv).unwrap();
        assert!(report.all_pass, "the theorem package still holds");
        assert!(report.interfaces[0].margins.b.abs() < 1e-10, "aligned interface");
        assert!(report.interfaces[2].margins.b.abs() < 1e-10);
        assert!(report.interfaces[1].margins.b > 0.3, "shock carries the budget");

        let rows = interface_window_stability(&report, 0.3, Some(&budget), &tolv).unwrap();
        assert!(rows[0].fitted_stable && rows[0].actual_stable);
        assert!(rows[2].fitted_stable && rows[2].actual_stable);
        assert!(!rows[1].fitted_stable, "condition must fail exactly at the shock");
        assert!(!rows[1].actual_stable);
        // stable interfaces select one rank window on both sides, and the
        // actual windows agree with the fitted one
        for row in [&rows[0], &rows[2]] {
            assert_eq!(row.fitted_rank_k, row.fitted_rank_next);
            assert_eq!(row.actual_rank_k, row.fitted_rank_k);
            assert_eq!(row.actual_rank_next, row.fitted_rank_k);
        }
        assert!(rows[0].uniform_condition.is_some(), "budget condition evaluated");

        // the jump is also a rank transition, and the transition count obeys
        // both the TV bound and the budgeted bound
        let alphas: Vec<f64> = report.layers.iter().map(|l| l.alpha).collect();
        let eps = 0.3;
        let floor = separation_margin(w(d), alphas[1], eps).unwrap();
        assert!(floor > 0.0);
        let chain_budget = ChainBudget {
            sum_b: report.interfaces.iter().map(|i| i.margins.b).sum(),
            tv_r: report.tv_r,
            m_d: report.m_d,
        };
        let tr = transition_localization(
            &alphas,
            w(d),
            eps,
            &iv,
            Some(floor),
            Some(&chain_budget),
            &tolv,
        )
        .unwrap();
        assert_eq!(tr.transitions, vec![1], "the shock is the only transition");
        assert!(tr.local_lower_ok);
        assert_eq!(tr.count_tv_ok, Some(true));
        assert_eq!(tr.count_budget_ok, Some(true));
    }

    #[test]
    fn plateaus_partition_the_interval() {
        let d = w(16);
        let eps = 0.2;
        let alpha_big = 2.5;
        let plateaus = plateau_decomposition(d, eps, alpha_big, &tol()).unwrap();
        assert!(!plateaus.is_empty());
        // dense probe: every alpha lands in the plateau of its rank
        for k in 1..=400 {
            let alpha = alpha_big * k as f64 / 400.0;
            let rank = orbit_rank(d, alpha, eps).unwrap();
            let plateau = plateaus
                .iter()
                .find(|p| p.rank == rank)
                .unwrap_or_else(|| panic!("rank {rank} missing at alpha {alpha}"));
            let lo_ok = alpha >= plateau.alpha_lo - 1e-6;
            let hi_ok = plateau.alpha_hi.is_none_or(|hi| alpha < hi + 1e-6);
            assert!(lo_ok && hi_ok, "alpha {alpha} outside plateau of rank {rank}");
        }
        // plateaus tile without overlap: edges are shared
        for pair in plateaus.windows(2) {
            // ranks increase, alphas decrease
            assert!(pair[1].rank > pair[0].rank);
            assert_relative_eq!(
                pair[1].alpha_hi.unwrap(),
                pair[0].alpha_lo,
                epsilon = 1e-9
            );
        }
    }
}
