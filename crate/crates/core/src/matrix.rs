//! Dense complex linear-algebra kernel.
//!
//! Everything downstream works on [`CMatrix`]/[`CVector`] (nalgebra dense
//! storage over `Complex64`). This module adds the Hermitian-specific pieces:
//! a sorted spectral decomposition, the PSD acceptance rule, the real
//! symmetric embedding used by the conic solver, and a correlated
//! circularly-symmetric Gaussian sampler.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative asymmetry accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative PSD tolerance: `λ_min ≥ -PSD_TOL · max(1, tr)`.
pub const PSD_TOL: f64 = 1e-9;

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored column-wise, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl HermEig {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Eigenvector paired with the largest eigenvalue.
    pub fn principal_vector(&self) -> CVector {
        self.eigenvectors.column(self.eigenvectors.ncols() - 1).into_owned()
    }

    /// `V diag(λ) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        &scaled * self.eigenvectors.adjoint()
    }
}

fn ensure_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return invalid(format!(
            "{what}: expected non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        ));
    }
    Ok(())
}

/// Frobenius norm of `A - A^H` relative to `max(1, ‖A‖_F)`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt() / a.norm().max(1.0)
}

/// Full spectral decomposition of a Hermitian matrix.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermEig> {
    ensure_square(a, "hermitian_eig")?;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("hermitian_eig: non-finite entry");
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return invalid(format!(
            "hermitian_eig: matrix is not Hermitian (relative asymmetry {defect:e})"
        ));
    }
    let eig = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Hermitian part `(A + A^H) / 2`.
pub fn herm_part(a: &CMatrix) -> Result<CMatrix> {
    ensure_square(a, "herm_part")?;
    Ok(hermitize(a))
}

/// Unchecked `(A + A^H) / 2` for callers that already know `A` is square.
pub(crate) fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Real symmetric embedding `[[Re A, -Im A], [Im A, Re A]]`.
///
/// For Hermitian `A`, `X`: `tr(realify(A) realify(X)) = 2 tr(A X)`.
pub fn realify(a: &CMatrix) -> Result<RMatrix> {
    ensure_square(a, "realify")?;
    let n = a.nrows();
    let mut out = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Left inverse of [`realify`]; averages the redundant blocks so a generic
/// real symmetric `Y` maps onto the nearest embedded Hermitian matrix.
pub fn unrealify(y: &RMatrix) -> Result<CMatrix> {
    if y.nrows() != y.ncols() || y.nrows() % 2 != 0 || y.nrows() == 0 {
        return invalid(format!(
            "unrealify: expected even square matrix, got {}x{}",
            y.nrows(),
            y.ncols()
        ));
    }
    let n = y.nrows() / 2;
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
            let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(hermitize(&out))
}

/// Real trace of a (nominally Hermitian) matrix.
pub fn real_trace(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `u v^H`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// `Re(x^H A x)`.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Lower PSD acceptance bound for `a`: `-PSD_TOL · max(1, tr a)`.
pub fn psd_floor(a: &CMatrix) -> f64 {
    -PSD_TOL * real_trace(a).abs().max(1.0)
}

pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(&hermitize(a))?.min_eigenvalue())
}

/// PSD test under the crate-wide tolerance.
pub fn is_psd(a: &CMatrix) -> Result<bool> {
    Ok(min_eigenvalue(a)? >= psd_floor(a))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn project_psd(a: &CMatrix) -> Result<CMatrix> {
    let mut eig = hermitian_eig(&hermitize(a))?;
    for lambda in eig.eigenvalues.iter_mut() {
        *lambda = lambda.max(0.0);
    }
    Ok(hermitize(&eig.reconstruct()))
}

/// Draws from `CN(0, cov)` through a fixed square-root factor.
#[derive(Debug, Clone)]
pub struct ComplexGaussianSampler {
    factor: CMatrix,
}

impl ComplexGaussianSampler {
    pub fn new(cov: &CMatrix) -> Result<Self> {
        ensure_square(cov, "complex gaussian covariance")?;
        let eig = hermitian_eig(cov)?;
        if eig.min_eigenvalue() < psd_floor(cov) {
            return invalid(format!(
                "covariance is indefinite (min eigenvalue {:e})",
                eig.min_eigenvalue()
            ));
        }
        let noise = cov.nrows() as f64 * f64::EPSILON * eig.max_eigenvalue().max(0.0);
        let mut factor = eig.eigenvectors.clone();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            let lambda = if lambda <= noise { 0.0 } else { lambda };
            factor.column_mut(j).scale_mut(lambda.sqrt());
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `L z` with `z ~ CN(0, I)` and `L L^H = cov`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = standard_complex_normal(self.dim(), rng);
        &self.factor * z
    }
}

/// i.i.d. `CN(0, 1)` entries: real and imaginary parts each `N(0, 1/2)`.
pub fn standard_complex_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        }),
    )
}

/// One draw from `CN(0, cov)`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(cov: &CMatrix, rng: &mut R) -> Result<CVector> {
    Ok(ComplexGaussianSampler::new(cov)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            c(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        hermitize(&random_matrix(n, rng))
    }

    fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    #[test]
    fn identity_spectrum() {
        let eig = hermitian_eig(&CMatrix::identity(3, 3)).unwrap();
        for &l in eig.eigenvalues.iter() {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_spectrum_is_sorted() {
        let eig = hermitian_eig(&pauli_y()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        let eig = hermitian_eig(&a).unwrap();
        assert!((&a - eig.reconstruct()).norm() < 1e-10);
        let v = &eig.eigenvectors;
        let lam = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(l, 0.0)));
        let resid = (&a * v - v * lam).norm();
        assert!(resid <= 1e-10 * a.norm().max(1.0));
        let gram = v.adjoint() * v;
        assert!((gram - CMatrix::identity(6, 6)).norm() < 1e-10);
        for w in eig.eigenvalues.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(hermitian_eig(&CMatrix::zeros(2, 3)).is_err());
        let a = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(2., 0.), c(0., 0.), c(0., 0.)]);
        assert!(hermitian_eig(&a).is_err());
    }

    #[test]
    fn herm_part_examples() {
        let h = pauli_y();
        assert_eq!(herm_part(&h).unwrap(), h);
        let a = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(2., 0.), c(0., 0.), c(0., 0.)]);
        let expected =
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        assert_eq!(herm_part(&a).unwrap(), expected);
        assert!(herm_part(&CMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn herm_part_preserves_real_trace_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(5, &mut rng);
        let x = random_hermitian(5, &mut rng);
        let h = herm_part(&a).unwrap();
        assert!(hermitian_defect(&h) < 1e-15);
        let lhs = trace_product(&h, &x);
        let rhs = trace_product(&a, &x).re;
        assert!((lhs.re - rhs).abs() < 1e-12);
        assert!(lhs.im.abs() < 1e-12);
    }

    #[test]
    fn realify_examples() {
        assert_eq!(
            realify(&CMatrix::identity(3, 3)).unwrap(),
            RMatrix::identity(6, 6)
        );
        let expected = RMatrix::from_row_slice(
            4,
            4,
            &[
                0., 0., 0., 1., //
                0., 0., -1., 0., //
                0., -1., 0., 0., //
                1., 0., 0., 0.,
            ],
        );
        assert_eq!(realify(&pauli_y()).unwrap(), expected);
    }

    #[test]
    fn realify_trace_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..6 {
            let a = random_hermitian(n, &mut rng);
            let x = random_hermitian(n, &mut rng);
            let lhs = (realify(&a).unwrap() * realify(&x).unwrap()).trace();
            let rhs = 2.0 * trace_product(&a, &x).re;
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
            let back = unrealify(&realify(&a).unwrap()).unwrap();
            assert!((back - &a).norm() < 1e-14);
        }
    }

    #[test]
    fn realify_preserves_min_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(4, &mut rng);
        let complex_min = min_eigenvalue(&a).unwrap();
        let real = realify(&a).unwrap();
        let real_min = SymmetricEigen::new(real).eigenvalues.min();
        assert!((complex_min - real_min).abs() < 1e-10);
    }

    #[test]
    fn zero_covariance_gives_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = sample_complex_gaussian(&CMatrix::zeros(4, 4), &mut rng).unwrap();
        assert!(v.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn identity_covariance_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 3;
        let sampler = ComplexGaussianSampler::new(&CMatrix::identity(n, n)).unwrap();
        let draws = 100_000;
        let mut acc = CMatrix::zeros(n, n);
        for _ in 0..draws {
            let v = sampler.sample(&mut rng);
            acc += outer(&v, &v);
        }
        acc.scale_mut(1.0 / draws as f64);
        let rel = (acc - CMatrix::identity(n, n)).norm() / (n as f64).sqrt();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cov = {
            let a = random_matrix(4, &mut rng);
            &a * a.adjoint()
        };
        let a = sample_complex_gaussian(&cov, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_complex_gaussian(&cov, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let cov = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.0)]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_complex_gaussian(&cov, &mut rng).is_err());
    }

    #[test]
    fn projection_clips_negative_modes() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(-1e-3, 0.0)]));
        let p = project_psd(&a).unwrap();
        assert!((p[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!(p[(1, 1)].norm() < 1e-14);
        assert!(is_psd(&p).unwrap());
        assert!(!is_psd(&a).unwrap());
    }
}
