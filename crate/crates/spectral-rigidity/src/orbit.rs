//! The normalized power-law orbit in the trace-d slice of SPD(d) and its
//! closed-form calculus.
//!
//! A width-d layer with exact power-law singular values and squared Frobenius
//! norm d projects onto the diagonal family
//!
//! ```text
//! G_d(alpha) = diag(lambda_1, ..., lambda_d),
//! lambda_i = d * i^(-2 alpha) / H_{d,2 alpha},
//! ```
//!
//! where `H_{d,s}` is the generalized harmonic number. The same family read
//! as the probability vector `p_i = lambda_i / d` is a Gibbs law on ranks
//! with energies `log i`, which makes its entropy, relative entropy, Fisher
//! information, and Bures-Wasserstein geometry available in closed form.
//! Everything in this module is a pure function of its inputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{kahan_sum, sqrt_vector_distance, symmetric_eigenvalues_desc};
use crate::Tolerances;

/// Matrix side length. Guarantees `d >= 1`; `d = 1` is the degenerate orbit
/// (a single point) on which the exponent coordinate is not identifiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Width(usize);

impl Width {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidWidth(d));
        }
        Ok(Width(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// True when the orbit is a single point and `g_prime` is identically 0.
    #[inline]
    pub fn is_degenerate(self) -> bool {
        self.0 == 1
    }

    fn require_identifiable(self) -> Result<Self> {
        if self.is_degenerate() {
            return Err(Error::DegenerateWidth);
        }
        Ok(self)
    }
}

impl std::fmt::Display for Width {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Compact exponent interval `[alpha_min, alpha_max]` with `alpha_min > 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExponentInterval {
    alpha_min: f64,
    alpha_max: f64,
}

impl ExponentInterval {
    pub fn new(alpha_min: f64, alpha_max: f64) -> Result<Self> {
        if !(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max.is_finite()) {
            return Err(Error::InvalidInterval(alpha_min, alpha_max));
        }
        Ok(Self {
            alpha_min,
            alpha_max,
        })
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.alpha_min
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.alpha_max
    }

    #[inline]
    pub fn clamp(&self, alpha: f64) -> f64 {
        alpha.clamp(self.alpha_min, self.alpha_max)
    }

    #[inline]
    pub fn contains(&self, alpha: f64) -> bool {
        (self.alpha_min..=self.alpha_max).contains(&alpha)
    }
}

fn assert_exponent(alpha: f64) {
    assert!(
        alpha >= 0.0 && alpha.is_finite(),
        "exponent must be finite and nonnegative, got {alpha}"
    );
}

/// Generalized harmonic number `H_{d,s} = sum_{i=1}^{d} i^(-s)`.
///
/// Summed with Kahan compensation from `i = d` down to `1`, so for `s > 0`
/// the small terms accumulate first.
pub fn harmonic_number(d: Width, s: f64) -> f64 {
    kahan_sum((1..=d.get()).rev().map(|i| (i as f64).powf(-s)))
}

/// Log-weighted power sum `sum_{i=1}^{d} (log i) i^(-s)`, same ordering as
/// [`harmonic_number`].
pub fn log_weighted_sum(d: Width, s: f64) -> f64 {
    kahan_sum(
        (1..=d.get())
            .rev()
            .map(|i| (i as f64).ln() * (i as f64).powf(-s)),
    )
}

/// One point of the normalized power-law orbit: eigenvalues of `G_d(alpha)`
/// together with the Gibbs weights `p_i = lambda_i / d`.
#[derive(Debug, Clone)]
pub struct OrbitPoint {
    d: Width,
    alpha: f64,
    eigenvalues: Vec<f64>,
    gibbs: Vec<f64>,
}

impl OrbitPoint {
    pub fn width(&self) -> Width {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Nonincreasing eigenvalues `lambda_i = d i^(-2 alpha) / H_{d,2 alpha}`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Gibbs probability weights `p_i = i^(-2 alpha) / H_{d,2 alpha}`.
    pub fn gibbs(&self) -> &[f64] {
        &self.gibbs
    }

    pub fn to_cartan(&self) -> CartanPoint {
        CartanPoint {
            eigenvalues: self.eigenvalues.clone(),
        }
    }
}

/// Evaluate the orbit point `G_d(alpha)`. `alpha = 0` is the uniform
/// spectrum; negative exponents are rejected.
pub fn orbit_point(d: Width, alpha: f64) -> OrbitPoint {
    assert_exponent(alpha);
    let h = harmonic_number(d, 2.0 * alpha);
    let n = d.get();
    let mut gibbs = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for i in 1..=n {
        let p = (i as f64).powf(-2.0 * alpha) / h;
        gibbs.push(p);
        eigenvalues.push(n as f64 * p);
    }
    OrbitPoint {
        d,
        alpha,
        eigenvalues,
        gibbs,
    }
}

/// Radial coordinate of the orbit: `g_d(alpha) = (log d - log H_{d,2a}) / 2`.
///
/// Strictly increasing and strictly concave in `alpha` for `d >= 2`;
/// identically 0 for `d = 1`.
pub fn g(d: Width, alpha: f64) -> f64 {
    assert_exponent(alpha);
    0.5 * (d.get() as f64).ln() - 0.5 * harmonic_number(d, 2.0 * alpha).ln()
}

/// Derivative of the radial coordinate,
/// `g_d'(alpha) = sum (log i) i^(-2a) / H_{d,2a}`, with values in
/// `(0, log d]` for `d >= 2`. Returns 0 for the degenerate width `d = 1`
/// (query [`Width::is_degenerate`] for the flag).
pub fn g_prime(d: Width, alpha: f64) -> f64 {
    assert_exponent(alpha);
    if d.is_degenerate() {
        return 0.0;
    }
    log_weighted_sum(d, 2.0 * alpha) / harmonic_number(d, 2.0 * alpha)
}

/// Mean, variance, and Fisher information of `log i` under the Gibbs weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsStats {
    /// Internal energy `U = E[log i]`; coincides with `g_d'(alpha)`.
    pub mean_log_rank: f64,
    /// Variance `V = Var[log i]`; satisfies `g_d'' = -2V`.
    pub var_log_rank: f64,
    /// Fisher information `I = 4V` (same arithmetic, exactly).
    pub fisher_info: f64,
}

/// Thermodynamic statistics of the Gibbs family at `alpha`.
pub fn gibbs_stats(d: Width, alpha: f64) -> GibbsStats {
    assert_exponent(alpha);
    let mean = g_prime(d, alpha);
    let h = harmonic_number(d, 2.0 * alpha);
    let var = kahan_sum((1..=d.get()).rev().map(|i| {
        let x = (i as f64).ln() - mean;
        x * x * (i as f64).powf(-2.0 * alpha) / h
    }))
    .max(0.0);
    GibbsStats {
        mean_log_rank: mean,
        var_log_rank: var,
        fisher_info: 4.0 * var,
    }
}

/// Shannon entropy of the Gibbs weights:
/// `S_d(alpha) = log H_{d,2a} + 2 alpha g_d'(alpha)`.
pub fn entropy(d: Width, alpha: f64) -> f64 {
    assert_exponent(alpha);
    harmonic_number(d, 2.0 * alpha).ln() + 2.0 * alpha * g_prime(d, alpha)
}

/// Relative entropy between Gibbs weights,
/// `KL_d(alpha || beta) = log(H_{d,2b}/H_{d,2a}) + 2(b - a) g_d'(alpha)`.
/// Nonnegative, zero iff `alpha = beta`.
pub fn kl(d: Width, alpha: f64, beta: f64) -> f64 {
    assert_exponent(alpha);
    assert_exponent(beta);
    let ha = harmonic_number(d, 2.0 * alpha).ln();
    let hb = harmonic_number(d, 2.0 * beta).ln();
    (hb - ha) + 2.0 * (beta - alpha) * g_prime(d, alpha)
}

/// Chart conditioning constant `m_d(I) = min_{alpha in I} g_d'(alpha)`,
/// attained at `alpha_max` by concavity, together with the coarse positive
/// lower bound `(log 2) 2^(-2 alpha_max) / H_{d,2 alpha_min}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinSlope {
    pub value: f64,
    pub lower_bound: f64,
}

/// Minimum slope of the radial coordinate over an exponent interval.
/// Rejects `d = 1`, where the coordinate is degenerate.
pub fn min_slope(d: Width, interval: &ExponentInterval) -> Result<MinSlope> {
    d.require_identifiable()?;
    let value = g_prime(d, interval.hi());
    let lower_bound = std::f64::consts::LN_2 * (-2.0 * interval.hi()).exp2()
        / harmonic_number(d, 2.0 * interval.lo());
    debug_assert!(value >= lower_bound - 1e-14);
    Ok(MinSlope { value, lower_bound })
}

/// Invert the radial coordinate over an interval by bisection.
///
/// `y` is clamped into `[g(alpha_min), g(alpha_max)]` first; on the clamped
/// target the bisection drives `|g(alpha) - y|` below
/// `tol.bisection_residual` (g is strictly increasing for `d >= 2`).
pub fn g_inverse(d: Width, y: f64, interval: &ExponentInterval, tol: &Tolerances) -> Result<f64> {
    d.require_identifiable()?;
    let (g_lo, g_hi) = (g(d, interval.lo()), g(d, interval.hi()));
    let target = y.clamp(g_lo, g_hi);
    if target <= g_lo {
        return Ok(interval.lo());
    }
    if target >= g_hi {
        return Ok(interval.hi());
    }
    let (mut lo, mut hi) = (interval.lo(), interval.hi());
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..tol.bisection_max_iter {
        mid = 0.5 * (lo + hi);
        let val = g(d, mid);
        if (val - target).abs() <= tol.bisection_residual {
            return Ok(mid);
        }
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Bures-Wasserstein distance between two orbit points, in closed harmonic
/// form:
///
/// ```text
/// d_BW(G(a), G(b))^2 = 2d (1 - H_{d,a+b} / sqrt(H_{d,2a} H_{d,2b})).
/// ```
pub fn bures_orbit(d: Width, alpha: f64, beta: f64) -> f64 {
    assert_exponent(alpha);
    assert_exponent(beta);
    if alpha == beta {
        return 0.0;
    }
    let h_ab = harmonic_number(d, alpha + beta);
    let h_aa = harmonic_number(d, 2.0 * alpha);
    let h_bb = harmonic_number(d, 2.0 * beta);
    let sq = 2.0 * d.get() as f64 * (1.0 - h_ab / (h_aa * h_bb).sqrt());
    sq.max(0.0).sqrt()
}

/// Ordered spectrum of a positive definite matrix: the Cartan representative
/// that survives the orthogonal-gauge quotient.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanPoint {
    eigenvalues: Vec<f64>,
}

impl CartanPoint {
    /// Build from eigenvalues in any order; sorts nonincreasing and rejects
    /// nonpositive entries.
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidWidth(0));
        }
        if eigenvalues.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::NonPositiveEigenvalue);
        }
        eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(Self { eigenvalues })
    }

    /// Ordered spectrum of a dense symmetric positive definite matrix via
    /// symmetric eigendecomposition. Eigenvalues below
    /// `-tol.eig_nonneg * trace` are rejected.
    pub fn from_spd(m: &DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        let eigs = symmetric_eigenvalues_desc(&((m + m.transpose()) * 0.5));
        let floor = -tol.eig_nonneg * m.trace().abs().max(1.0);
        if eigs.iter().any(|&e| e < floor) {
            return Err(Error::NonPositiveEigenvalue);
        }
        Self::new(eigs.into_iter().map(|e| e.max(f64::MIN_POSITIVE)).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn width(&self) -> Width {
        Width(self.eigenvalues.len())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        kahan_sum(self.eigenvalues.iter().rev().copied())
    }

    /// Logarithmic Weyl-chamber coordinate `(log lambda_1, ..., log lambda_d)`.
    pub fn log_vector(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|x| x.ln()).collect()
    }

    /// Whether the point sits on the trace-d slice within a relative tolerance.
    pub fn is_trace_normalized(&self, rel_tol: f64) -> bool {
        let d = self.dim() as f64;
        (self.trace() - d).abs() <= rel_tol * d
    }
}

/// Bures-Wasserstein distance between commuting (diagonal Cartan) points:
/// the Euclidean distance between entrywise square roots.
pub fn bures_diagonal(p: &CartanPoint, q: &CartanPoint) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    Ok(sqrt_vector_distance(p.eigenvalues(), q.eigenvalues()))
}

/// Bures-Wasserstein distance between dense symmetric positive semidefinite
/// matrices, `tr P + tr Q - 2 tr((P^{1/2} Q P^{1/2})^{1/2})`, via symmetric
/// eigendecomposition. Eigenvalues below `-tol.eig_nonneg * trace` are
/// rejected; small negative noise is clamped to zero.
pub fn bures_dense(p: &DMatrix<f64>, q: &DMatrix<f64>, tol: &Tolerances) -> Result<f64> {
    if p.nrows() != p.ncols() || q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch(p.nrows(), p.ncols()));
    }
    if p.nrows() != q.nrows() {
        return Err(Error::DimensionMismatch(p.nrows(), q.nrows()));
    }
    let sqrt_p = psd_sqrt(p, tol)?;
    let inner = &sqrt_p * q * &sqrt_p;
    let inner = (&inner + inner.transpose()) * 0.5;
    let floor = -tol.eig_nonneg * p.trace().abs().max(q.trace().abs()).max(1.0);
    let mut cross = 0.0;
    for ev in symmetric_eigenvalues_desc(&inner) {
        if ev < floor {
            return Err(Error::NonPositiveEigenvalue);
        }
        cross += ev.max(0.0).sqrt();
    }
    let sq = p.trace() + q.trace() - 2.0 * cross;
    Ok(sq.max(0.0).sqrt())
}

fn psd_sqrt(m: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let floor = -tol.eig_nonneg * m.trace().abs().max(1.0);
    let d = m.nrows();
    let mut sqrt_vals = Vec::with_capacity(d);
    for &ev in eig.eigenvalues.iter() {
        if ev < floor {
            return Err(Error::NonPositiveEigenvalue);
        }
        sqrt_vals.push(ev.max(0.0).sqrt());
    }
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sqrt_vals));
    Ok(&eig.eigenvectors * lambda * eig.eigenvectors.transpose())
}

/// Finite-difference probe of the induced line element: the squared-distance
/// quotient `d_BW(G(a+h), G(a))^2 / h^2` against its limit `d * V_d(a)`.
#[derive(Debug, Clone, Copy)]
pub struct LineElementCheck {
    pub measured: f64,
    pub predicted: f64,
}

impl LineElementCheck {
    pub fn error(&self) -> f64 {
        (self.measured - self.predicted).abs()
    }
}

/// Compare the finite-h Bures quotient with the Fisher prediction `d V_d(a)`
/// (equivalently `d/4` times the Fisher information). The gap decays O(h).
pub fn bures_line_element_check(d: Width, alpha: f64, h: f64) -> LineElementCheck {
    assert!(h > 0.0, "step h must be positive");
    let dist = bures_orbit(d, alpha, alpha + h);
    LineElementCheck {
        measured: dist * dist / (h * h),
        predicted: d.get() as f64 * gibbs_stats(d, alpha).var_log_rank,
    }
}

/// Maximum Gibbs variance `V_{d,max}(I)` over an interval, by dense grid and
/// golden-section refinement. Used as the Lipschitz constant of the orbit's
/// Bures speed.
pub fn max_variance(d: Width, interval: &ExponentInterval, tol: &Tolerances) -> f64 {
    if d.is_degenerate() {
        return 0.0;
    }
    let (_, v) = crate::numerics::grid_refine_max(
        interval.lo(),
        interval.hi(),
        tol.grid_points,
        tol.alpha_tol,
        |a| gibbs_stats(d, a).var_log_rank,
    );
    v
}

/// Maximum Fisher information over an interval, `I_{d,max}(I) = 4 V_{d,max}(I)`.
pub fn max_fisher(d: Width, interval: &ExponentInterval, tol: &Tolerances) -> f64 {
    4.0 * max_variance(d, interval, tol)
}

/// Partial harmonic sum together with its zeta tail bound
/// `0 <= zeta(s) - H_{d,s} <= d^(1-s) / (s-1)` for `s > 1`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicTail {
    pub partial_sum: f64,
    pub tail_bound: f64,
}

/// Harmonic tail bound; rejects `s <= 1` where the zeta value diverges.
pub fn zeta_tail_bounds(d: Width, s: f64) -> Result<HarmonicTail> {
    if s <= 1.0 {
        return Err(Error::TailBoundRange("harmonic", s));
    }
    let dd = d.get() as f64;
    Ok(HarmonicTail {
        partial_sum: harmonic_number(d, s),
        tail_bound: dd.powf(1.0 - s) / (s - 1.0),
    })
}

/// Tail bound for the log-weighted sum:
/// `0 <= (-zeta'(s)) - sum_{n<=d} (log n) n^(-s) <= d^(1-s) (log d/(s-1) + 1/(s-1)^2)`,
/// valid for `s > 1` and `d >= 3`.
pub fn log_tail_bound(d: Width, s: f64) -> Result<f64> {
    if s <= 1.0 {
        return Err(Error::TailBoundRange("log-weighted", s));
    }
    if d.get() < 3 {
        return Err(Error::InvalidWidth(d.get()));
    }
    let dd = d.get() as f64;
    Ok(dd.powf(1.0 - s) * (dd.ln() / (s - 1.0) + 1.0 / ((s - 1.0) * (s - 1.0))))
}
