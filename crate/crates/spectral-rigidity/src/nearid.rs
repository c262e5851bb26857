//! Synthetic chain construction and near-identity expansion checks.
//!
//! Exact power-law chains (seeded orthogonal factors around orbit spectra),
//! multiplicatively perturbed chains satisfying a delta band, and
//! near-identity cocycles `J_k = I + t A_k` with bounded generators. For the
//! cocycles, the first-order expansions of the interface quantities are
//! driven by the symmetric parts `S_k = (A_k + A_k^T)/2`:
//!
//! ```text
//! log ||J_k||_2        = t mu_k            + O(t^2)
//! log ||J_{k+1} J_k||  = t mu_{k+1,k}      + O(t^2)
//! log Lambda           = t (mu_{k+1,k} - mu_{k+1}/2 - mu_k/2) + O(t^2)
//! eta^nb               = t [max(mu_{k+1}, mu_k) - mu_{k+1,k}]_+ + O(t^2)
//! ```
//!
//! with Frobenius-normalized variants obtained by subtracting the trace
//! means `tau_k = tr(S_k)/d`. The expansion checker measures each quantity
//! over a geometric step sequence, subtracts the first-order prediction, and
//! fits the order of the remainder (the halving ratio tends to 4). Hinge
//! kinks in `max` and `[.]_+` break one-sided expansions, so samples whose
//! hinge argument is within `kink_factor * t^2` of zero are flagged instead
//! of fitted.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::chain::{all_interface_margins, LayerChain};
use crate::error::{Error, Result};
use crate::numerics::{operator_norm, random_orthogonal, symmetric_eigenvalues_desc};
use crate::orbit::{self, ExponentInterval, Width};
use crate::Tolerances;

/// A sequence of bounded generators for a near-identity cocycle.
#[derive(Debug, Clone)]
pub struct GeneratorChain {
    generators: Vec<DMatrix<f64>>,
    bound: f64,
}

impl GeneratorChain {
    /// Validate `||A_k||_2 <= bound` for every generator.
    pub fn new(generators: Vec<DMatrix<f64>>, bound: f64, tol: &Tolerances) -> Result<Self> {
        if generators.len() < 2 {
            return Err(Error::ChainTooShort {
                required: 2,
                got: generators.len(),
            });
        }
        let d = generators[0].nrows();
        for (index, a) in generators.iter().enumerate() {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::DimensionMismatch(a.nrows(), a.ncols()));
            }
            let norm = operator_norm(a, tol.svd_cutoff);
            if norm > bound * (1.0 + 1e-12) {
                return Err(Error::GeneratorBound {
                    index,
                    norm,
                    bound,
                });
            }
        }
        Ok(Self { generators, bound })
    }

    /// Seeded Gaussian generators rescaled to operator norms in
    /// `[bound/2, bound]`.
    pub fn random(d: usize, len: usize, bound: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generators = (0..len)
            .map(|_| {
                let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let scale = bound * (0.5 + 0.5 * rng.random::<f64>()) / operator_norm(&g, 2048);
                g * scale
            })
            .collect();
        Self { generators, bound }
    }

    /// Seeded symmetric commuting generators (random diagonals in a fixed
    /// basis), useful because their expansions are exactly log(1 + t mu).
    pub fn commuting_symmetric(d: usize, len: usize, bound: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_orthogonal(&mut rng, d);
        let generators = (0..len)
            .map(|_| {
                let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| {
                    bound * (2.0 * rng.random::<f64>() - 1.0)
                }));
                &basis * diag * basis.transpose()
            })
            .collect();
        Self { generators, bound }
    }

    /// The adversarial cancellation pair `A_1 = -A_0` with `||A_0||_2 = bound`.
    pub fn cancellation_pair(d: usize, bound: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = &g * (bound / operator_norm(&g, 2048));
        let neg = -&a;
        Self {
            generators: vec![a, neg],
            bound,
        }
    }

    pub fn width(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }
}

/// Spectral data of the symmetric parts driving the first-order expansions.
#[derive(Debug, Clone)]
pub struct SymmetricParts {
    /// `mu_k = lambda_max((A_k + A_k^T)/2)`, one per generator.
    pub mu: Vec<f64>,
    /// Trace means `tau_k = tr(S_k)/d`; always `<= mu_k`.
    pub tau: Vec<f64>,
    /// `mu_{k+1,k} = lambda_max(S_{k+1} + S_k)`, one per interface.
    pub mu_pair: Vec<f64>,
}

/// Compute the symmetric-part spectra of a generator chain.
pub fn symmetric_parts(chain: &GeneratorChain) -> SymmetricParts {
    let sym: Vec<DMatrix<f64>> = chain
        .generators()
        .iter()
        .map(|a| (a + a.transpose()) * 0.5)
        .collect();
    let d = chain.width() as f64;
    let mu: Vec<f64> = sym.iter().map(|s| symmetric_eigenvalues_desc(s)[0]).collect();
    let tau: Vec<f64> = sym.iter().map(|s| s.trace() / d).collect();
    let mu_pair: Vec<f64> = sym
        .windows(2)
        .map(|pair| symmetric_eigenvalues_desc(&(&pair[1] + &pair[0]))[0])
        .collect();
    for (m, t) in mu.iter().zip(&tau) {
        debug_assert!(m + 1e-12 >= *t, "max eigenvalue dominates the mean");
    }
    SymmetricParts { mu, tau, mu_pair }
}

/// Exact power-law chain: `W_k = U_k Sigma(alpha_k) V_k^T` with seeded
/// orthogonal factors and `sigma_i = sqrt(d / H_{d,2a}) i^(-alpha)`. Each
/// layer is Frobenius normalized; its Gram Cartan point is the orbit point.
pub fn synth_powerlaw_chain(
    d: usize,
    alphas: &[f64],
    seed: u64,
    tol: &Tolerances,
) -> Result<LayerChain> {
    Ok(synth_perturbed_chain(d, alphas, 0.0, seed, tol)?.0)
}

/// Multiplicative log-band `eta_pl = log((1 + delta)/(1 - delta))` of a
/// delta-approximate power-law fit.
pub fn eta_pl(delta: f64) -> f64 {
    ((1.0 + delta) / (1.0 - delta)).ln()
}

/// Exact power-law chain with aligned singular frames: each layer's left
/// frame is the next layer's right frame, so two-step top norms multiply
/// (`||W_{k+1} W_k||_2 = ||W_{k+1}||_2 ||W_k||_2`) and every
/// non-backtracking slack vanishes. The interface amplitude reduces to
/// `sqrt(||W_{k+1}||_2 ||W_k||_2)`.
pub fn synth_zero_slack_chain(
    d: usize,
    alphas: &[f64],
    seed: u64,
    tol: &Tolerances,
) -> Result<LayerChain> {
    let width = Width::new(d)?;
    if width.is_degenerate() {
        return Err(Error::DegenerateWidth);
    }
    for &alpha in alphas {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::NegativeExponent(alpha));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut right_frame = random_orthogonal(&mut rng, d);
    let mut layers = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let left_frame = random_orthogonal(&mut rng, d);
        let sigmas: Vec<f64> = orbit::orbit_point(width, alpha)
            .eigenvalues()
            .iter()
            .map(|l| l.sqrt())
            .collect();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sigmas));
        layers.push(&left_frame * diag * right_frame.transpose());
        right_frame = left_frame;
    }
    LayerChain::new(layers, true, tol)
}

/// Power-law chain with singular values multiplied by seeded factors in
/// `[1 - delta, 1 + delta]`, then renormalized. Renormalization preserves
/// the multiplicative band; the effective band (widest over layers) is
/// recomputed from the built spectra and returned with the chain.
pub fn synth_perturbed_chain(
    d: usize,
    alphas: &[f64],
    delta_pl: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<(LayerChain, f64)> {
    let width = Width::new(d)?;
    if width.is_degenerate() {
        return Err(Error::DegenerateWidth);
    }
    if !(0.0..1.0).contains(&delta_pl) {
        return Err(Error::InvalidEpsilon(delta_pl));
    }
    for &alpha in alphas {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::NegativeExponent(alpha));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let u = random_orthogonal(&mut rng, d);
        let v = random_orthogonal(&mut rng, d);
        let sigmas: Vec<f64> = orbit::orbit_point(width, alpha)
            .eigenvalues()
            .iter()
            .map(|l| l.sqrt() * (1.0 + delta_pl * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sigmas));
        layers.push(u * diag * v.transpose());
    }
    let chain = LayerChain::new(layers, true, tol)?;

    // recompute the effective band after renormalization
    let mut delta_effective = 0.0f64;
    for (spectrum, &alpha) in chain.spectra()?.iter().zip(alphas) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (i, sigma) in spectrum.values().iter().enumerate() {
            let m = sigma * ((i + 1) as f64).powf(alpha);
            lo = lo.min(m);
            hi = hi.max(m);
        }
        delta_effective = delta_effective.max((hi - lo) / (hi + lo));
    }
    Ok((chain, delta_effective))
}

/// Build the raw cocycle `J_k = I + t A_k` and its Frobenius-normalized
/// companion `W_k = sqrt(d) J_k / ||J_k||_F`. Requires `t C < 1`.
pub fn build_nearid_chain(
    chain: &GeneratorChain,
    t: f64,
    tol: &Tolerances,
) -> Result<(LayerChain, LayerChain)> {
    if t * chain.bound() >= 1.0 {
        return Err(Error::StepTooLarge(t * chain.bound()));
    }
    let d = chain.width();
    let eye = DMatrix::<f64>::identity(d, d);
    let factors: Vec<DMatrix<f64>> = chain
        .generators()
        .iter()
        .map(|a| &eye + a * t)
        .collect();
    let raw = LayerChain::new(factors.clone(), false, tol)?;
    let normalized = LayerChain::new(factors, true, tol)?;
    Ok((raw, normalized))
}

/// The eight per-interface expansion quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionQuantity {
    RawSingleNorm,
    RawProductNorm,
    RawAmplitude,
    RawSlack,
    NormalizedSingleNorm,
    NormalizedProductNorm,
    NormalizedAmplitude,
    NormalizedSlack,
}

impl ExpansionQuantity {
    pub const ALL: [ExpansionQuantity; 8] = [
        ExpansionQuantity::RawSingleNorm,
        ExpansionQuantity::RawProductNorm,
        ExpansionQuantity::RawAmplitude,
        ExpansionQuantity::RawSlack,
        ExpansionQuantity::NormalizedSingleNorm,
        ExpansionQuantity::NormalizedProductNorm,
        ExpansionQuantity::NormalizedAmplitude,
        ExpansionQuantity::NormalizedSlack,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExpansionQuantity::RawSingleNorm => "log_norm_single",
            ExpansionQuantity::RawProductNorm => "log_norm_product",
            ExpansionQuantity::RawAmplitude => "log_amplitude",
            ExpansionQuantity::RawSlack => "slack",
            ExpansionQuantity::NormalizedSingleNorm => "normalized_log_norm_single",
            ExpansionQuantity::NormalizedProductNorm => "normalized_log_norm_product",
            ExpansionQuantity::NormalizedAmplitude => "normalized_log_amplitude",
            ExpansionQuantity::NormalizedSlack => "normalized_slack",
        }
    }
}

/// One measured point of the expansion table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpansionSample {
    pub t: f64,
    pub measured: f64,
    pub predicted_first_order: f64,
    pub remainder: f64,
}

/// Remainder order fit for one (interface, quantity) pair.
#[derive(Debug, Clone, Serialize)]
pub struct QuantityFit {
    pub interface: usize,
    pub quantity: ExpansionQuantity,
    pub samples: Vec<ExpansionSample>,
    /// Consecutive remainder ratios across the halvings.
    pub ratios: Vec<f64>,
    /// The most asymptotic (smallest-t) ratio; `None` when degenerate.
    pub final_ratio: Option<f64>,
    /// Set when a hinge argument came within `kink_factor * t^2` of zero or
    /// the remainders sit at rounding noise; the order fit is skipped.
    pub kink_flagged: bool,
}

impl QuantityFit {
    /// Estimated remainder order `log2(final ratio)`; 2 means the
    /// first-order prediction leaves a clean second-order remainder.
    pub fn order_estimate(&self) -> Option<f64> {
        self.final_ratio.map(f64::log2)
    }
}

/// Expansion table for every interface and quantity over a step sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub fits: Vec<QuantityFit>,
}

struct InterfaceMeasurement {
    measured: [f64; 8],
    hinge_raw: f64,
    hinge_norm: f64,
    max_gap_raw: f64,
    max_gap_norm: f64,
}

fn measure_interface(
    a_k: &DMatrix<f64>,
    a_next: &DMatrix<f64>,
    t: f64,
    d: usize,
    tol: &Tolerances,
) -> InterfaceMeasurement {
    let eye = DMatrix::<f64>::identity(d, d);
    let j_k = &eye + a_k * t;
    let j_next = &eye + a_next * t;
    let log_single = operator_norm(&j_k, tol.svd_cutoff).ln();
    let log_single_next = operator_norm(&j_next, tol.svd_cutoff).ln();
    let log_product = operator_norm(&(&j_next * &j_k), tol.svd_cutoff).ln();
    let log_lambda = log_product - 0.5 * log_single_next - 0.5 * log_single;
    let hinge_raw = log_single_next.max(log_single) - log_product;
    let slack = hinge_raw.max(0.0);

    let scale_k = ((d as f64).sqrt() / j_k.norm()).ln();
    let scale_next = ((d as f64).sqrt() / j_next.norm()).ln();
    let n_single = log_single + scale_k;
    let n_single_next = log_single_next + scale_next;
    let n_product = log_product + scale_k + scale_next;
    let n_lambda = n_product - 0.5 * n_single_next - 0.5 * n_single;
    let hinge_norm = n_single_next.max(n_single) - n_product;
    let n_slack = hinge_norm.max(0.0);

    InterfaceMeasurement {
        measured: [
            log_single, log_product, log_lambda, slack, n_single, n_product, n_lambda, n_slack,
        ],
        hinge_raw,
        hinge_norm,
        max_gap_raw: (log_single_next - log_single).abs(),
        max_gap_norm: (n_single_next - n_single).abs(),
    }
}

fn first_order_predictions(parts: &SymmetricParts, k: usize, t: f64) -> [f64; 8] {
    let (mu_k, mu_next) = (parts.mu[k], parts.mu[k + 1]);
    let (tau_k, tau_next) = (parts.tau[k], parts.tau[k + 1]);
    let mu_pair = parts.mu_pair[k];
    [
        t * mu_k,
        t * mu_pair,
        t * (mu_pair - 0.5 * mu_next - 0.5 * mu_k),
        t * (mu_next.max(mu_k) - mu_pair).max(0.0),
        t * (mu_k - tau_k),
        t * (mu_pair - tau_next - tau_k),
        t * (mu_pair - 0.5 * mu_next - 0.5 * mu_k - 0.5 * tau_next - 0.5 * tau_k),
        t * ((mu_next - tau_next).max(mu_k - tau_k) - (mu_pair - tau_next - tau_k)).max(0.0),
    ]
}

/// Measure all eight expansion quantities of every interface over a
/// geometric `t` sequence and fit the remainder order. Remainders are
/// second order, so consecutive halving ratios approach 4 away from hinge
/// kinks.
pub fn expansion_check(
    chain: &GeneratorChain,
    t_sequence: &[f64],
    tol: &Tolerances,
) -> Result<ExpansionReport> {
    if t_sequence.len() < 2 {
        return Err(Error::SequenceTooShort(t_sequence.len()));
    }
    for &t in t_sequence {
        if t * chain.bound() >= 1.0 {
            return Err(Error::StepTooLarge(t * chain.bound()));
        }
    }
    let parts = symmetric_parts(chain);
    let d = chain.width();
    let mut fits = Vec::new();
    for k in 0..chain.len() - 1 {
        let mut samples: Vec<Vec<ExpansionSample>> = vec![Vec::new(); 8];
        let mut kinked = [false; 8];
        for &t in t_sequence {
            let m = measure_interface(&chain.generators()[k], &chain.generators()[k + 1], t, d, tol);
            let preds = first_order_predictions(&parts, k, t);
            let kink_gate = tol.kink_factor * t * t;
            // hinge arguments of the slack quantities and the norm-max gap
            if m.hinge_raw.abs() < kink_gate || m.max_gap_raw < kink_gate {
                kinked[3] = true;
            }
            if m.hinge_norm.abs() < kink_gate || m.max_gap_norm < kink_gate {
                kinked[7] = true;
            }
            for (q, sample_list) in samples.iter_mut().enumerate() {
                sample_list.push(ExpansionSample {
                    t,
                    measured: m.measured[q],
                    predicted_first_order: preds[q],
                    remainder: m.measured[q] - preds[q],
                });
            }
        }
        for (q, quantity) in ExpansionQuantity::ALL.iter().enumerate() {
            let series = &samples[q];
            let noise_floor = 1e-13;
            let mut ratios = Vec::new();
            let mut degenerate = false;
            for pair in series.windows(2) {
                if pair[0].remainder.abs() < noise_floor || pair[1].remainder.abs() < noise_floor {
                    degenerate = true;
                    ratios.push(f64::NAN);
                } else {
                    ratios.push(pair[0].remainder / pair[1].remainder);
                }
            }
            let kink_flagged = kinked[q] || degenerate;
            let final_ratio = if kink_flagged {
                None
            } else {
                ratios.last().copied()
            };
            fits.push(QuantityFit {
                interface: k,
                quantity: *quantity,
                samples: series.clone(),
                ratios,
                final_ratio,
                kink_flagged,
            });
        }
    }
    Ok(ExpansionReport { fits })
}

/// Per-interface check of the coarse bounded-generator margin.
#[derive(Debug, Clone, Serialize)]
pub struct MarginCheck {
    /// Measured margins `b_k` of the normalized chain.
    pub b_measured: Vec<f64>,
    /// The coarse bound `18 C t`.
    pub coarse_bound: f64,
    /// Per-interface pass flags for `b_k <= 18 C t`.
    pub pass: Vec<bool>,
    /// `(36 C + R) t / m_d(I)` when a residual rate and interval are given.
    pub local_alpha_bound: Option<f64>,
}

/// Verify `b_k <= 18 C t` on the Frobenius-normalized near-identity chain
/// (valid for `t C <= 1/4`) and optionally report the exponent-drift
/// ceiling `(36 C + R) t / m_d(I)`.
pub fn explicit_margin_check(
    chain: &GeneratorChain,
    t: f64,
    residual_rate: Option<f64>,
    interval: Option<&ExponentInterval>,
    tol: &Tolerances,
) -> Result<MarginCheck> {
    let tc = t * chain.bound();
    if tc > 0.25 {
        return Err(Error::StepBeyondQuarter(tc));
    }
    let (_, normalized) = build_nearid_chain(chain, t, tol)?;
    let margins = all_interface_margins(&normalized, tol)?;
    let coarse_bound = 18.0 * chain.bound() * t;
    let b_measured: Vec<f64> = margins.iter().map(|m| m.b).collect();
    let pass = b_measured
        .iter()
        .map(|&b| b <= coarse_bound + tol.pass_abs)
        .collect();
    let local_alpha_bound = match (residual_rate, interval) {
        (Some(rate), Some(iv)) => {
            let m_d = orbit::min_slope(Width::new(chain.width())?, iv)?.value;
            Some((36.0 * chain.bound() + rate) * t / m_d)
        }
        _ => None,
    };
    Ok(MarginCheck {
        b_measured,
        coarse_bound,
        pass,
        local_alpha_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::rigidity_report;
    use crate::charts::{fit_chart, ChartKind, RankWindow};
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn powerlaw_chain_layers_sit_on_the_orbit() {
        let alphas = [0.5, 0.8, 1.1];
        let chain = synth_powerlaw_chain(12, &alphas, 7, &tol()).unwrap();
        let width = chain.width();
        let iv = ExponentInterval::new(0.2, 1.8).unwrap();
        for (spectrum, &alpha) in chain.spectra().unwrap().iter().zip(&alphas) {
            // top singular value carries the harmonic normalization
            let expect = (12.0 / orbit::harmonic_number(width, 2.0 * alpha)).sqrt();
            assert_relative_eq!(spectrum.values()[0], expect, max_relative = 1e-10);
            // every chart recovers the exponent with zero residuals
            for kind in [
                ChartKind::TopRadial,
                ChartKind::BuresProjection,
                ChartKind::LogLeastSquares {
                    window: RankWindow::default_for(width),
                    normalized_intercept: false,
                },
            ] {
                let fitted = fit_chart(spectrum, &kind, &iv, &tol()).unwrap();
                assert!((fitted.alpha - alpha).abs() < 1e-8);
                assert!(fitted.r.abs() < 1e-9);
                assert!(fitted.e_bw < 1e-9);
            }
            // Cartan point of the Gram equals the orbit point
            let orbit_pt = orbit::orbit_point(width, alpha);
            for (l, l_orbit) in spectrum
                .to_cartan()
                .unwrap()
                .eigenvalues()
                .iter()
                .zip(orbit_pt.eigenvalues())
            {
                assert!((l - l_orbit).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_rejects_degenerate_width() {
        let a = synth_powerlaw_chain(8, &[0.4, 0.9], 99, &tol()).unwrap();
        let b = synth_powerlaw_chain(8, &[0.4, 0.9], 99, &tol()).unwrap();
        for (x, y) in a.layers().iter().zip(b.layers()) {
            assert_eq!(x, y, "same seed must give bit-identical layers");
        }
        let c = synth_powerlaw_chain(8, &[0.4, 0.9], 100, &tol()).unwrap();
        assert_ne!(a.layers()[0], c.layers()[0]);
        assert!(synth_powerlaw_chain(1, &[0.4, 0.9], 1, &tol()).is_err());
    }

    #[test]
    fn perturbed_chain_band_and_chart_bounds() {
        let alphas = [0.6, 0.75, 0.9];
        for delta in [0.01, 0.1, 0.3] {
            let (chain, delta_eff) =
                synth_perturbed_chain(16, &alphas, delta, 31, &tol()).unwrap();
            assert!(delta_eff < 1.0);
            let band = eta_pl(delta_eff);
            let iv = ExponentInterval::new(0.1, 2.0).unwrap();
            for (spectrum, &alpha) in chain.spectra().unwrap().iter().zip(&alphas) {
                // chart at the *true* generating exponent: the lemma bounds
                // apply to that chart choice
                let errs =
                    crate::charts::chart_errors(&spectrum.to_cartan().unwrap(), alpha, &tol())
                        .unwrap();
                assert!(errs.r.abs() <= band + 1e-12, "radial band");
                assert!(errs.e_log <= 2.0 * band + 1e-12, "log band");
                assert!(
                    errs.e_bw_normalized <= band.exp_m1() + 1e-12,
                    "Hellinger band"
                );
                assert!(errs.e_bw <= 16f64.sqrt() * band.exp_m1() + 1e-12);
                let _ = iv;
            }
        }
        // delta = 0 reduces to the exact chain
        let (exact, delta_eff) = synth_perturbed_chain(10, &[0.5, 0.7], 0.0, 5, &tol()).unwrap();
        let plain = synth_powerlaw_chain(10, &[0.5, 0.7], 5, &tol()).unwrap();
        assert!(delta_eff < 1e-12);
        for (x, y) in exact.layers().iter().zip(plain.layers()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn nearid_chain_construction() {
        let gens = GeneratorChain::random(6, 4, 1.0, 3);
        // t = 0 gives identity layers
        let (raw, normalized) = build_nearid_chain(&gens, 0.0, &tol()).unwrap();
        let eye = DMatrix::<f64>::identity(6, 6);
        for layer in raw.layers().iter().chain(normalized.layers()) {
            assert!((layer - &eye).norm() < 1e-14);
        }
        // singular values stay inside the Weyl band [1 - tC, 1 + tC]
        let t = 0.3;
        let (raw, _) = build_nearid_chain(&gens, t, &tol()).unwrap();
        for spectrum in raw.spectra().unwrap() {
            for &s in spectrum.values() {
                assert!(s >= 1.0 - t - 1e-12 && s <= 1.0 + t + 1e-12);
            }
        }
        assert!(build_nearid_chain(&gens, 1.0, &tol()).is_err());
        assert!(GeneratorChain::new(vec![eye.clone() * 3.0, eye], 1.0, &tol()).is_err());
    }

    #[test]
    fn symmetric_part_max_dominates_mean() {
        for seed in 0..5 {
            let gens = GeneratorChain::random(9, 5, 2.0, seed);
            let parts = symmetric_parts(&gens);
            for (mu, tau) in parts.mu.iter().zip(&parts.tau) {
                assert!(mu + 1e-12 >= *tau, "mu {mu} vs tau {tau}");
                assert!(mu.abs() <= 2.0 + 1e-9);
            }
        }
    }

    #[test]
    fn expansion_order_for_commuting_symmetric_generators() {
        let gens = GeneratorChain::commuting_symmetric(10, 3, 1.0, 11);
        let ts: Vec<f64> = (0..5).map(|k| 1e-2 / f64::powi(2.0, k)).collect();
        let report = expansion_check(&gens, &ts, &tol()).unwrap();
        let mut fitted = 0;
        for fit in &report.fits {
            if let Some(ratio) = fit.final_ratio {
                assert!(
                    (3.5..=4.5).contains(&ratio),
                    "{} at interface {}: ratio {ratio}",
                    fit.quantity.name(),
                    fit.interface
                );
                fitted += 1;
            }
        }
        assert!(fitted > 0, "at least some quantities must be fitted");
    }

    #[test]
    fn expansion_order_for_cancellation_pair() {
        let gens = GeneratorChain::cancellation_pair(8, 1.0, 17);
        let parts = symmetric_parts(&gens);
        // S_1 = -S_0, so the pair top is lambda_max(0) = 0 and the slack
        // first-order coefficient max(mu_0, mu_1) is positive
        assert!(parts.mu_pair[0].abs() < 1e-12);
        assert!(parts.mu[0].max(parts.mu[1]) > 0.0);
        let ts: Vec<f64> = (0..5).map(|k| 1e-2 / f64::powi(2.0, k)).collect();
        let report = expansion_check(&gens, &ts, &tol()).unwrap();
        for fit in &report.fits {
            if let Some(ratio) = fit.final_ratio {
                assert!(
                    (3.4..=4.6).contains(&ratio),
                    "{}: ratio {ratio}",
                    fit.quantity.name()
                );
            }
        }
    }

    #[test]
    fn zero_generators_measure_zero_and_flag_degenerate() {
        let zero = DMatrix::<f64>::zeros(5, 5);
        let gens = GeneratorChain::new(vec![zero.clone(), zero], 1.0, &tol()).unwrap();
        let report = expansion_check(&gens, &[1e-2, 5e-3], &tol()).unwrap();
        for fit in &report.fits {
            assert!(fit.kink_flagged);
            for sample in &fit.samples {
                assert_eq!(sample.measured, 0.0);
                assert_eq!(sample.predicted_first_order, 0.0);
            }
        }
    }

    #[test]
    fn explicit_margin_holds_with_slack() {
        let gens = GeneratorChain::random(8, 4, 1.0, 23);
        let check = explicit_margin_check(&gens, 0.1, None, None, &tol()).unwrap();
        for (b, ok) in check.b_measured.iter().zip(&check.pass) {
            assert!(*ok, "b = {b} vs bound {}", check.coarse_bound);
            assert!(*b <= 0.5 * check.coarse_bound, "large slack expected");
        }
        // t -> 0 sends both sides to zero
        let tiny = explicit_margin_check(&gens, 1e-9, None, None, &tol()).unwrap();
        assert!(tiny.coarse_bound < 1e-7);
        assert!(tiny.b_measured.iter().all(|b| b.abs() < 1e-7));
        assert!(explicit_margin_check(&gens, 0.3, None, None, &tol()).is_err());
    }

    #[test]
    fn explicit_margin_survives_adversarial_cancellation() {
        let gens = GeneratorChain::cancellation_pair(8, 1.0, 29);
        let check = explicit_margin_check(&gens, 0.25, None, None, &tol()).unwrap();
        assert!(check.pass.iter().all(|&p| p), "bound at tC = 1/4");

        let iv = ExponentInterval::new(0.3, 1.2).unwrap();
        let with_rate = explicit_margin_check(&gens, 0.1, Some(2.0), Some(&iv), &tol()).unwrap();
        let ceiling = with_rate.local_alpha_bound.unwrap();
        assert!(ceiling > 0.0);
    }

    #[test]
    fn zero_slack_chain_has_vanishing_slack_and_multiplicative_norms() {
        let chain = synth_zero_slack_chain(12, &[0.3, 0.35, 0.4, 0.45], 5, &tol()).unwrap();
        let margins = all_interface_margins(&chain, &tol()).unwrap();
        for im in &margins {
            assert!(im.eta_nb <= 1e-12, "slack must vanish, got {}", im.eta_nb);
            assert!(im.b >= 0.0);
        }
        // the amplitude is the geometric mean of the adjacent top norms
        for (k, im) in margins.iter().enumerate() {
            let n0 = operator_norm(&chain.layers()[k], 2048);
            let n1 = operator_norm(&chain.layers()[k + 1], 2048);
            assert_relative_eq!(im.lambda, (n0 * n1).sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn powerlaw_chain_passes_full_rigidity_with_zero_residuals() {
        let alphas = [0.5, 0.6, 0.7, 0.8];
        let chain = synth_powerlaw_chain(10, &alphas, 77, &tol()).unwrap();
        let iv = ExponentInterval::new(0.2, 1.5).unwrap();
        let report = rigidity_report(&chain, &iv, &ChartKind::TopRadial, None, &tol()).unwrap();
        assert!(report.all_pass);
        assert!(report.tv_r < 1e-9, "zero-residual branch of the local bound");
        for layer in &report.layers {
            assert!(layer.e_bw <= 1e-8);
        }
    }
}
