//! Shared numerical building blocks: compensated summation, 1-D grid
//! optimization with golden-section refinement, operator norms, and seeded
//! orthogonal factors.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Kahan-compensated sum of an iterator of terms, in the order supplied.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for term in terms {
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

const GOLDEN_INV: f64 = 0.618_033_988_749_894_9;

/// Minimize `f` over `[lo, hi]` by a dense grid scan followed by
/// golden-section refinement inside the best grid cell.
///
/// Ties on the grid go to the smaller abscissa. The returned objective value
/// never exceeds the minimum over the evaluation grid, which callers use as
/// a certificate.
pub fn grid_refine_min(
    lo: f64,
    hi: f64,
    grid_points: usize,
    x_tol: f64,
    mut f: impl FnMut(f64) -> f64,
) -> (f64, f64) {
    assert!(hi >= lo && grid_points >= 2);
    let n = grid_points;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    let mut xs = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i + 1 == n { hi } else { lo + step * i as f64 };
        xs.push(x);
        let v = f(x);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    // Refine inside the cell around the best grid point.
    let mut a = xs[best_idx.saturating_sub(1)];
    let mut b = xs[(best_idx + 1).min(n - 1)];
    let mut x1 = b - GOLDEN_INV * (b - a);
    let mut x2 = a + GOLDEN_INV * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > x_tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN_INV * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN_INV * (b - a);
            f2 = f(x2);
        }
    }
    let x_mid = 0.5 * (a + b);
    let f_mid = f(x_mid);
    // Keep whichever candidate is lowest; prefer smaller x on ties.
    let mut best_x = xs[best_idx];
    let mut best_f = best_val;
    for (x, v) in [(x1, f1), (x2, f2), (x_mid, f_mid)] {
        if v < best_f || (v == best_f && x < best_x) {
            best_f = v;
            best_x = x;
        }
    }
    (best_x, best_f)
}

/// Maximize `f` over `[lo, hi]`; same grid + golden-section machinery.
pub fn grid_refine_max(
    lo: f64,
    hi: f64,
    grid_points: usize,
    x_tol: f64,
    mut f: impl FnMut(f64) -> f64,
) -> (f64, f64) {
    let (x, neg) = grid_refine_min(lo, hi, grid_points, x_tol, |x| -f(x));
    (x, -neg)
}

/// Largest singular value. Full SVD up to `svd_cutoff` rows/cols, power
/// iteration on the Gram matrix above it.
pub fn operator_norm(m: &DMatrix<f64>, svd_cutoff: usize) -> f64 {
    if m.nrows().max(m.ncols()) <= svd_cutoff {
        m.singular_values().max()
    } else {
        power_iteration_norm(m, 1e-10, 20_000)
    }
}

/// Largest singular value by power iteration on W^T W with a deterministic
/// start vector. Convergence is measured on the Rayleigh quotient.
pub fn power_iteration_norm(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 % 7.0) * 0.125);
    v /= v.norm();
    let mut sigma_sq = 0.0;
    for _ in 0..max_iter {
        let w = m.tr_mul(&(m * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm; // Rayleigh quotient of W^T W at unit v
        let rel = (next - sigma_sq).abs() / next.max(f64::MIN_POSITIVE);
        v = w / norm;
        sigma_sq = next;
        if rel < tol {
            break;
        }
    }
    sigma_sq.sqrt()
}

/// Singular values of `m` in nonincreasing order.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Eigenvalues of a symmetric matrix in nonincreasing order.
pub fn symmetric_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Seeded Haar-distributed orthogonal matrix: QR of a standard Gaussian
/// matrix with the R diagonal signs folded into Q. Deterministic for a given
/// RNG state.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Euclidean distance between the entrywise square roots of two nonnegative
/// vectors. For probability vectors this is the Hellinger-type root distance.
pub fn sqrt_vector_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sq = kahan_sum(
        a.iter()
            .zip(b)
            .map(|(x, y)| (x.sqrt() - y.sqrt()) * (x.sqrt() - y.sqrt())),
    );
    sq.max(0.0).sqrt()
}

/// Validate that every entry of a matrix is finite.
pub fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFiniteEntry(i, j));
            }
        }
    }
    Ok(())
}
