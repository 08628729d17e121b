//! Dense complex linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entry magnitude of a matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry magnitude of a slice.
pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Complex LU factorization with partial pivoting, reused across right-hand sides.
pub struct Lu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMat, what: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Singular(format!("{what}: matrix is not square")));
        }
        let n = a.nrows();
        let lu = a.clone().lu();
        let scale = max_abs(a).max(f64::MIN_POSITIVE);
        let u = lu.u();
        for k in 0..n {
            let piv = u[(k, k)].norm();
            if !piv.is_finite() || piv <= 1e-30 * scale {
                return Err(Error::Singular(format!("{what}: zero pivot at {k}")));
            }
        }
        Ok(Lu { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &CVec) -> Result<CVec> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        self.lu
            .solve(b)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve_mat(&CMat::identity(self.n, self.n))
    }

    /// Principal-branch logarithm of the determinant, accumulated from the pivots.
    pub fn ln_det(&self) -> C64 {
        let u = self.lu.u();
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.n {
            acc += u[(k, k)].ln();
        }
        let sign: C64 = self.lu.p().determinant();
        if sign.re < 0.0 {
            acc += C64::new(0.0, PI);
        }
        wrap_principal(acc)
    }

    pub fn det(&self) -> C64 {
        self.lu.determinant()
    }
}

/// Reduce the imaginary part of a logarithm to the principal interval (−π, π].
pub fn wrap_principal(z: C64) -> C64 {
    let mut im = z.im % (2.0 * PI);
    if im > PI {
        im -= 2.0 * PI;
    } else if im <= -PI {
        im += 2.0 * PI;
    }
    C64::new(z.re, im)
}

pub fn inverse(a: &CMat, what: &str) -> Result<CMat> {
    Lu::new(a, what)?.inverse()
}

/// Eigenvalues of a general complex matrix (complex Schur form).
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let schur = a.clone().try_schur(1e-15, 10_000).ok_or_else(|| {
        Error::NonConvergence("complex Schur iteration did not converge".into())
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|k| t[(k, k)]).collect())
}

/// Unit-norm null vector of `a − λ·Id` for a simple eigenvalue λ.
///
/// Obtained from the right singular vector of the smallest singular value and
/// polished by two steps of inverse iteration.
pub fn eigenvector(a: &CMat, lambda: C64) -> Result<CVec> {
    let n = a.nrows();
    let shifted = a - CMat::identity(n, n) * lambda;
    let svd = shifted.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NonConvergence("SVD failed in eigenvector".into()))?;
    let (kmin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, s)| if *s < acc.1 { (k, *s) } else { acc });
    let mut v = CVec::from_iterator(n, (0..n).map(|j| v_t[(kmin, j)].conj()));
    let scale = max_abs(a).max(1.0);
    let perturbed = &shifted - CMat::identity(n, n) * C64::new(1e-13 * scale, 0.0);
    if let Ok(lu) = Lu::new(&perturbed, "inverse iteration") {
        for _ in 0..2 {
            if let Ok(w) = lu.solve_vec(&v) {
                let nrm = w.norm();
                if nrm.is_finite() && nrm > 0.0 {
                    v = w / C64::new(nrm, 0.0);
                }
            }
        }
    }
    Ok(v)
}

/// Eigen-decomposition `a·V = V·diag(λ)` with eigenvalues sorted by (real, imag).
///
/// Real parts that agree to a relative 1e−9 are treated as ties and ordered by the
/// imaginary part, so conjugate pairs keep a stable order under tiny perturbations.
pub fn eigen_sorted(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let mut ev = eigenvalues(a)?;
    let scale = ev.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    ev.sort_by(|x, y| {
        if (x.re - y.re).abs() <= 1e-9 * scale {
            x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let n = a.nrows();
    let mut v = CMat::zeros(n, n);
    for (k, lam) in ev.iter().enumerate() {
        let col = eigenvector(a, *lam)?;
        v.set_column(k, &col);
    }
    Ok((ev, v))
}

/// Binomial coefficient as a float.
pub fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc *= (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Generalized binomial coefficient `binom(−b, r) = (−1)^r·C(b+r−1, r)` for b ≥ 1.
pub fn binom_neg(b: u32, r: u32) -> f64 {
    let v = binom(b + r - 1, r);
    if r.is_multiple_of(2) { v } else { -v }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Integer power of a complex number by repeated squaring (exact for small exponents).
pub fn cpowi(z: C64, n: i32) -> C64 {
    if n < 0 {
        return C64::new(1.0, 0.0) / cpowi(z, -n);
    }
    let mut base = z;
    let mut e = n as u32;
    let mut acc = C64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_decomposition_of_complex_matrix() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[c(1.0, 0.5), c(2.0, 0.0), c(0.0, 1.0), c(0.3, 0.0), c(-1.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(1.0, -1.0), c(2.0, 0.0)],
        );
        let (ev, v) = eigen_sorted(&a).unwrap();
        let lhs = &a * &v;
        let rhs = &v * CMat::from_diagonal(&CVec::from_vec(ev.clone()));
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
        assert!(ev[0].re <= ev[1].re && ev[1].re <= ev[2].re);
    }

    #[test]
    fn ln_det_matches_det() {
        let a = CMat::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
        let lu = Lu::new(&a, "t").unwrap();
        assert!((lu.det() - re(-1.0)).norm() < 1e-15);
        assert!((lu.ln_det() - c(0.0, PI)).norm() < 1e-15);
        let b = CMat::from_row_slice(2, 2, &[c(2.0, 1.0), re(1.0), re(3.0), c(0.0, -2.0)]);
        let lu = Lu::new(&b, "t").unwrap();
        assert!((lu.ln_det().exp() - lu.det()).norm() < 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom_neg(2, 3), -4.0);
        assert_eq!(binom_neg(1, 4), 1.0);
        assert_eq!(factorial(4), 24.0);
        assert!((cpowi(c(0.0, 1.0), 3) - c(0.0, -1.0)).norm() < 1e-15);
    }
}
