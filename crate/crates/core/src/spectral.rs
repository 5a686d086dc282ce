//! Symmetric eigenvalues and semicircle-law analytics.

use std::f64::consts::PI;

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::Par;

use crate::{Error, Matrix, Result};

/// Entrywise tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues of a symmetric matrix, sorted descending (`l_1 >= ... >= l_N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` descending. Ties keep their input order.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("eigenvalue", bad, "finite reals"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dimension `N` of the source matrix.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `l_j` with the one-based indexing used by the estimators.
    pub fn ell(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    /// `tails[j] = sum_{i > j} l_i^2` for `j = 0..=N`, accumulated from the
    /// smallest eigenvalue upwards.
    pub fn tail_sums_of_squares(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut tails = vec![0.0; n + 1];
        for j in (0..n).rev() {
            tails[j] = tails[j + 1] + self.values[j] * self.values[j];
        }
        tails
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.tail_sums_of_squares()[0]
    }
}

/// Something that turns a symmetric matrix into its [`Spectrum`].
///
/// The Monte Carlo harness is generic over this so tests can count or stub
/// eigensolves.
pub trait EigenSolver: Sync {
    fn eigenvalues_desc(&self, x: &Matrix) -> Result<Spectrum>;
}

/// Dense tridiagonalisation + QR eigensolver, run sequentially so results do
/// not depend on the thread pool it is called from.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseEigenSolver;

impl EigenSolver for DenseEigenSolver {
    fn eigenvalues_desc(&self, x: &Matrix) -> Result<Spectrum> {
        eigenvalues_desc(x)
    }
}

/// Verifies square shape and entrywise symmetry within [`SYMMETRY_TOL`].
pub fn check_symmetric(x: &Matrix) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::InvalidDimension(format!(
            "expected a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    for j in 0..n {
        for i in 0..j {
            let gap = (x[(i, j)] - x[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL) {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

fn symmetric_evd(x: &Matrix, vectors: bool) -> Result<(Vec<f64>, Option<Matrix>)> {
    check_symmetric(x)?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    let par = Par::Seq;
    let compute = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut s = Diag::<f64>::zeros(n);
    let mut u = vectors.then(|| Matrix::zeros(n, n));
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        compute,
        par,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        x.as_ref(),
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = (0..n).map(|i| s[i]).collect();
    Ok((values, u))
}

/// All eigenvalues of the symmetric matrix `x`, descending.
pub fn eigenvalues_desc(x: &Matrix) -> Result<Spectrum> {
    let (values, _) = symmetric_evd(x, false)?;
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Eigensolver(format!("non-finite eigenvalue {bad}")));
    }
    let mut values = values;
    // the solver returns ascending order
    values.reverse();
    Ok(Spectrum { values })
}

/// Eigenvalues (descending) together with matching unit eigenvectors as
/// columns. Not used on the Monte Carlo hot path.
pub fn eigen_desc(x: &Matrix) -> Result<(Spectrum, Matrix)> {
    let (values, u) = symmetric_evd(x, true)?;
    let u = u.expect("eigenvectors requested");
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let vectors = Matrix::from_fn(n, n, |i, c| u[(i, order[c])]);
    let values = order.iter().map(|&c| values[c]).collect();
    Ok((Spectrum { values }, vectors))
}

/// Best rank-`j` approximation `sum_{i <= j} l_i v_i v_i^T` of a symmetric
/// matrix. With `clip_negative`, eigenvalues are replaced by `max(l_i, 0)`,
/// which gives the best positive semi-definite rank-`j` approximation.
pub fn low_rank_approximation(x: &Matrix, j: usize, clip_negative: bool) -> Result<Matrix> {
    let (spec, v) = eigen_desc(x)?;
    let n = spec.n();
    if j > n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    let weights: Vec<f64> = spec.values()[..j]
        .iter()
        .map(|&l| if clip_negative { l.max(0.0) } else { l })
        .collect();
    Ok(Matrix::from_fn(n, n, |r, c| {
        weights
            .iter()
            .enumerate()
            .map(|(p, &w)| w * v[(r, p)] * v[(c, p)])
            .sum()
    }))
}

/// `psi_sigma(x) = x + sigma^2 / x`, the almost-sure limit of the eigenvalue
/// produced by a spike of strength `x`.
pub fn psi(sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma", sigma, "(0, inf)"));
    }
    if !(x > 0.0) {
        return Err(Error::domain("x", x, "(0, inf)"));
    }
    Ok(x + sigma * sigma / x)
}

/// Inverse of `psi_sigma` on its increasing branch `[sigma, inf)`.
pub fn psi_inverse(sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma", sigma, "(0, inf)"));
    }
    if !(y >= 2.0 * sigma) {
        return Err(Error::domain("y", y, "[2 sigma, inf)"));
    }
    let disc = (y * y - 4.0 * sigma * sigma).max(0.0);
    Ok(0.5 * (y + disc.sqrt()))
}

/// Smallest spike strength `psi_sigma^{-1}(sqrt(2 gamma) sigma)` that the
/// penalty `gamma >= 2` still detects. Equals `sigma` at `gamma = 2`.
pub fn lambda_threshold(sigma: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 2.0) || !gamma.is_finite() {
        return Err(Error::domain("gamma", gamma, "[2, inf)"));
    }
    psi_inverse(sigma, (2.0 * gamma).sqrt() * sigma)
}

/// Semicircle density with variance `sigma2`, supported on `[-2 sigma, 2 sigma]`.
pub fn semicircle_density(x: f64, sigma2: f64) -> f64 {
    let r2 = 4.0 * sigma2;
    if x * x >= r2 {
        return 0.0;
    }
    (r2 - x * x).sqrt() / (2.0 * PI * sigma2)
}

/// CDF of the standard (unit variance) semicircle law.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
}

/// Point `q` with upper tail mass `alpha` under the standard semicircle law,
/// found by bisection on [`semicircle_cdf`].
pub fn semicircle_upper_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha", alpha, "(0, 1)"));
    }
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if semicircle_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `int_{-q}^{q} x^2 rho_sc(x; 1) dx`. With `q = 2 sin(theta)` this is
/// `2 theta / pi - sin(4 theta) / (2 pi)`.
pub fn truncated_second_moment(q: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&q) {
        return Err(Error::domain("q", q, "[0, 2]"));
    }
    let theta = (q / 2.0).asin();
    Ok(2.0 * theta / PI - (4.0 * theta).sin() / (2.0 * PI))
}
