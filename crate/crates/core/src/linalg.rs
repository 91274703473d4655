//! Small dense linear algebra used by the thermodynamic and zeta modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Perron data of a nonnegative primitive matrix.
#[derive(Debug, Clone)]
pub struct PerronEigen {
    pub eigenvalue: f64,
    /// Right eigenvector, normalized to unit sum.
    pub right: DVector<f64>,
    /// Left eigenvector, normalized so that `left · right = 1`.
    pub left: DVector<f64>,
    pub residual_right: f64,
    pub residual_left: f64,
    pub iterations: usize,
    pub used_dense_fallback: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Accepted relative residual after polishing.
    pub residual_tolerance: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, tolerance: 1e-15, residual_tolerance: 1e-12 }
    }
}

fn power_iterate(b: &DMatrix<f64>, opts: &EigenOptions) -> (f64, DVector<f64>, usize, bool) {
    let n = b.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = 0.0;
    for it in 1..=opts.max_iterations {
        let y = b * &x;
        let s: f64 = y.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return (s, x, it, false);
        }
        let y = y / s;
        let delta = (&y - &x).amax();
        let converged = delta <= opts.tolerance && (s - lambda).abs() <= opts.tolerance * s;
        x = y;
        lambda = s;
        if converged {
            return (lambda, x, it, true);
        }
    }
    (lambda, x, opts.max_iterations, false)
}

/// Inverse-iteration polish of an eigenpair estimate.
fn polish(b: &DMatrix<f64>, lambda: f64, x: &DVector<f64>, steps: usize) -> (f64, DVector<f64>) {
    let n = b.nrows();
    let mut x = x.clone();
    let mut lambda = lambda;
    for _ in 0..steps {
        let shift = lambda * (1.0 + 1e-10) + 1e-300;
        let shifted = b - DMatrix::identity(n, n) * shift;
        let lu = shifted.lu();
        let Some(y) = lu.solve(&x) else { break };
        let s: f64 = y.iter().sum();
        if !s.is_finite() || s == 0.0 {
            break;
        }
        let y = y / s;
        let by = b * &y;
        let new_lambda = by.iter().sum::<f64>() / y.iter().sum::<f64>();
        if !new_lambda.is_finite() {
            break;
        }
        x = y;
        lambda = new_lambda;
    }
    (lambda, x)
}

fn relative_residual(b: &DMatrix<f64>, lambda: f64, x: &DVector<f64>) -> f64 {
    let r = b * x - x * lambda;
    r.amax() / (lambda.abs() * x.amax()).max(f64::MIN_POSITIVE)
}

fn dense_leading(b: &DMatrix<f64>) -> Option<f64> {
    let ev = b.complex_eigenvalues();
    ev.iter().filter(|z| z.im.abs() <= 1e-9 * z.norm().max(1.0)).map(|z| z.re).fold(None, |acc, v| {
        Some(match acc {
            None => v,
            Some(a) if v > a => v,
            Some(a) => a,
        })
    })
}

fn right_perron(b: &DMatrix<f64>, opts: &EigenOptions) -> Result<(f64, DVector<f64>, usize, bool)> {
    let (lambda, x, iters, converged) = power_iterate(b, opts);
    let (lambda, x, fallback) = if converged && lambda > 0.0 {
        (lambda, x, false)
    } else {
        let lead = dense_leading(b).ok_or(Error::NoConvergence { iterations: iters, residual: f64::NAN })?;
        let start = DVector::from_element(b.nrows(), 1.0 / b.nrows() as f64);
        (lead, start, true)
    };
    let (lambda, x) = polish(b, lambda, &x, if fallback { 4 } else { 2 });
    let res = relative_residual(b, lambda, &x);
    if !(res <= opts.residual_tolerance) {
        return Err(Error::NoConvergence { iterations: iters, residual: res });
    }
    Ok((lambda, x, iters, fallback))
}

/// Perron eigenvalue with right and left eigenvectors of a nonnegative,
/// primitive matrix.
pub fn perron(b: &DMatrix<f64>, opts: &EigenOptions) -> Result<PerronEigen> {
    if b.nrows() == 0 || b.nrows() != b.ncols() {
        return Err(Error::invalid("Perron eigenproblem needs a non-empty square matrix"));
    }
    let (lambda, right, it_r, fb_r) = right_perron(b, opts)?;
    let bt = b.transpose();
    let (lambda_l, left, it_l, fb_l) = right_perron(&bt, opts)?;
    if ((lambda - lambda_l) / lambda).abs() > 1e-10 {
        return Err(Error::NoConvergence { iterations: it_r.max(it_l), residual: (lambda - lambda_l).abs() });
    }
    for v in right.iter().chain(left.iter()) {
        if !(*v > 0.0) {
            return Err(Error::NegativeEigenvector { value: *v });
        }
    }
    let scale = left.dot(&right);
    let left = left / scale;
    let residual_right = relative_residual(b, lambda, &right);
    let residual_left = relative_residual(&bt, lambda, &left);
    Ok(PerronEigen {
        eigenvalue: lambda,
        right,
        left,
        residual_right,
        residual_left,
        iterations: it_r.max(it_l),
        used_dense_fallback: fb_r || fb_l,
    })
}

/// Result of solving `(I - M) X = B`.
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub solution: CMatrix,
    /// 1-norm condition estimate of `I - M`.
    pub condition: f64,
}

fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solve `(I - M) X = rhs` and report the 1-norm condition number of `I - M`.
/// Returns `None` for the solution when the matrix is numerically singular.
pub fn resolvent_solve(m: &CMatrix, rhs: &CMatrix) -> (Option<CMatrix>, f64) {
    let n = m.nrows();
    let a = CMatrix::identity(n, n) - m;
    let lu = a.clone().lu();
    let Some(inv) = lu.try_inverse() else {
        return (None, f64::INFINITY);
    };
    let cond = norm1(&a) * norm1(&inv);
    if !cond.is_finite() {
        return (None, f64::INFINITY);
    }
    (Some(&inv * rhs), cond)
}

/// `det(I - M)`.
pub fn det_i_minus(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    (CMatrix::identity(n, n) - m).determinant()
}

/// Eigenvalue of largest modulus of a complex matrix.
pub fn leading_eigenvalue(m: &CMatrix) -> Complex64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    if let Some(ev) = m.clone().eigenvalues() {
        if ev.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return ev.iter().copied().fold(Complex64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() { z } else { a });
        }
    }
    // Fallback: power iteration for the modulus and Rayleigh quotient.
    let n = m.nrows();
    let mut x = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let mut lambda = Complex64::new(0.0, 0.0);
    for _ in 0..10_000 {
        let y = m * &x;
        let nrm = y.norm();
        if nrm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        lambda = x.dotc(&y) / x.dotc(&x);
        x = y / Complex64::new(nrm, 0.0);
    }
    lambda
}

/// Product of two matrices with an exponent-tracked scale, used for high
/// powers whose entries would overflow.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub mantissa: CMatrix,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(n: usize) -> Self {
        Self { mantissa: CMatrix::identity(n, n), log_scale: 0.0 }
    }

    pub fn mul(&self, rhs: &CMatrix) -> Self {
        let mut p = &self.mantissa * rhs;
        let mut log_scale = self.log_scale;
        let mx = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if mx > 0.0 && mx.is_finite() {
            p /= Complex64::new(mx, 0.0);
            log_scale += mx.ln();
        }
        Self { mantissa: p, log_scale }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perron_of_golden_mean_matrix() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let p = perron(&b, &EigenOptions::default()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.eigenvalue - phi).abs() < 1e-14);
        assert!(p.residual_right < 1e-13 && p.residual_left < 1e-13);
        assert!((p.left.dot(&p.right) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn resolvent_condition_blows_up_at_eigenvalue_one() {
        let m = CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        let (sol, cond) = resolvent_solve(&m, &CMatrix::identity(2, 2));
        assert!(sol.is_none() || cond > 1e12);
    }

    #[test]
    fn leading_eigenvalue_of_rank_one() {
        let m = CMatrix::from_element(3, 3, Complex64::new(0.0, 0.25));
        let z = leading_eigenvalue(&m);
        assert!((z - Complex64::new(0.0, 0.75)).norm() < 1e-12);
    }
}
