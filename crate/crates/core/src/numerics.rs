//! Dense complex linear-algebra kernels.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex64`. The
//! Hermitian eigensolver is a cyclic complex Jacobi method, which is accurate
//! to a few ulps on the small (K <= 64) matrices the simulator produces and
//! keeps tiny eigenvalues relatively accurate, which matters for the
//! numerical-rank decisions made by [`psd_factor`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance used for Hermitian checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default relative eigenvalue threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Columns whose Gram-Schmidt residual falls below this fraction of the
/// largest column norm are treated as dependent.
pub const QR_RANK_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the same order as `values`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuilds `V f(Λ) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|x| x)
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `‖M - M^H‖_F / max(‖M‖_F, tiny)`.
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// `‖A - B‖_F / ‖B‖_F`, with the denominator floored at `f64::MIN_POSITIVE`.
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Bilinear product `u^T v` (no conjugation).
pub fn bilinear(u: &CVector, v: &CVector) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// Outer product `u v^H`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eig(m: &CMatrix) -> Result<EigenDecomposition> {
    check_square(m, "eigendecomposition input")?;
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NonHermitian { asymmetry });
    }

    let n = m.nrows();
    let mut a = hermitian_part(m);
    for i in 0..n {
        a[(i, i)].im = 0.0;
    }
    let mut v = CMatrix::identity(n, n);
    let scale = a.norm();

    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for q in 0..n {
                for p in 0..q {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q, scale);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok(EigenDecomposition { values, vectors })
}

fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, scale: f64) {
    let n = a.nrows();
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag <= 1e-300 || mag <= 1e-18 * scale {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / mag;
    let conj_phase = phase.conj();
    let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
    let (s, cth) = theta.sin_cos();

    // G = diag(1, e^{-iφ}) * [[c, s], [-s, c]]
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * cth - akq * conj_phase * s;
        a[(k, q)] = akp * s + akq * conj_phase * cth;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * cth - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * cth;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * cth - vkq * conj_phase * s;
        v[(k, q)] = vkp * s + vkq * conj_phase * cth;
    }
}

/// Output of [`gram_schmidt_basis`].
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    pub q: CMatrix,
    /// `Q^H A`, upper trapezoidal when no column was dropped.
    pub r: CMatrix,
    /// Indices of input columns that were numerically dependent on earlier ones.
    pub dropped: Vec<usize>,
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// residual norm falls below `tol` times the largest input column norm are
/// skipped, so `q` spans the column space of `a`.
pub fn gram_schmidt_basis(a: &CMatrix, tol: f64) -> Result<GramSchmidt> {
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let (rows, cols) = a.shape();
    let max_norm = (0..cols)
        .map(|j| a.column(j).norm())
        .fold(0.0_f64, f64::max);
    let mut basis: Vec<CVector> = Vec::with_capacity(cols.min(rows));
    let mut dropped = Vec::new();

    for j in 0..cols {
        let mut w: CVector = a.column(j).into_owned();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dotc(&w);
                w -= q * proj;
            }
        }
        let norm = w.norm();
        if max_norm == 0.0 || norm <= tol * max_norm || basis.len() == rows {
            dropped.push(j);
            continue;
        }
        basis.push(w.unscale(norm));
    }

    let mut q = CMatrix::zeros(rows, basis.len());
    for (j, col) in basis.iter().enumerate() {
        q.set_column(j, col);
    }
    let r = q.adjoint() * a;
    Ok(GramSchmidt { q, r, dropped })
}

/// Thin QR factorization `A = Q R` of a full-column-rank matrix, with `R`
/// upper triangular and a real positive diagonal.
pub fn gram_schmidt_qr(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let gs = gram_schmidt_basis(a, QR_RANK_TOL)?;
    if let Some(&column) = gs.dropped.first() {
        return Err(Error::RankDeficient { column });
    }
    let n = a.ncols();
    let mut r = gs.r;
    for j in 0..n {
        for i in (j + 1)..n {
            r[(i, j)] = Complex64::new(0.0, 0.0);
        }
        r[(j, j)] = Complex64::new(r[(j, j)].re, 0.0);
    }
    Ok((gs.q, r))
}

/// Factor `M = B B^H` keeping only eigenvalues above `tol * λ_max`.
pub fn psd_factor(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    psd_factor_from_eig(&eig, tol)
}

pub fn psd_factor_from_eig(eig: &EigenDecomposition, tol: f64) -> Result<CMatrix> {
    let n = eig.dim();
    let max = eig.max_eigenvalue().max(0.0);
    let min = eig.min_eigenvalue();
    if min < -tol * max || (max == 0.0 && min < -1e-300) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| max > 0.0 && eig.values[i] > tol * max)
        .collect();
    let mut b = CMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        let w = eig.values[src].sqrt();
        b.set_column(dst, &eig.vectors.column(src).scale(w));
    }
    Ok(b)
}

/// Bisection on a continuous function with a sign change on `[lo, hi]`.
///
/// Stops once the bracket is no wider than `tol`, or when the bracket can no
/// longer be split in floating point.
pub fn bisection_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::MaxIterations(BISECTION_MAX_ITER))
    }
}

/// One draw of `CN(0, 1)`: independent real and imaginary parts of variance 1/2.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws from `CN(0, R)` through a precomputed factor `R = B B^H`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: CMatrix,
}

impl GaussianSampler {
    pub fn new(covariance: &CMatrix) -> Result<Self> {
        Ok(Self {
            factor: psd_factor(covariance, DEFAULT_RANK_TOL)?,
        })
    }

    pub fn from_factor(factor: CMatrix) -> Self {
        Self { factor }
    }

    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = CVector::from_fn(self.rank(), |_, _| standard_complex_normal(rng));
        &self.factor * z
    }
}

/// Single draw from `CN(0, R)`. Factorizes `R` on every call; use
/// [`GaussianSampler`] for repeated draws.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(cov: &CMatrix, rng: &mut R) -> Result<CVector> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}
