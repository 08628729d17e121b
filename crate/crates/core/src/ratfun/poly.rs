use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{self, C64, CMat};

/// Dense polynomial with complex coefficients, lowest degree first.
///
/// Trailing exact zeros are trimmed, so the zero polynomial has an empty
/// coefficient list and `degree()` returns `None`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|z| *z == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn constant(a: C64) -> Self {
        Poly::new(vec![a])
    }

    /// The monomial `a·x^k`.
    pub fn monomial(k: usize, a: C64) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); k + 1];
        v[k] = a;
        Poly::new(v)
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `x^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() { None } else { Some(self.coeffs.len() - 1) }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        linalg::max_abs_slice(&self.coeffs)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * x + a)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, a)| a * k as f64)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Poly {
        let mut v = vec![C64::new(0.0, 0.0)];
        v.extend(self.coeffs.iter().enumerate().map(|(k, a)| a / (k + 1) as f64));
        Poly::new(v)
    }

    pub fn scale(&self, a: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|z| z * a).collect())
    }

    /// Composition `self(q(x))` by Horner's scheme.
    pub fn compose(&self, q: &Poly) -> Poly {
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, a| &(&acc * q) + &Poly::constant(*a))
    }

    /// Values `p, p′, …, p^(m)` at `x`.
    pub fn derivs_at(&self, x: C64, m: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(m + 1);
        let mut p = self.clone();
        for _ in 0..=m {
            out.push(p.eval(x));
            p = p.derivative();
        }
        out
    }

    /// All roots via eigenvalues of the companion matrix, polished by Newton steps.
    pub fn roots(&self) -> crate::Result<Vec<C64>> {
        let d = match self.degree() {
            None => return Err(crate::Error::InvalidModel("roots of the zero polynomial".into())),
            Some(d) => d,
        };
        if d == 0 {
            return Ok(vec![]);
        }
        let lead = self.leading();
        let mut comp = CMat::zeros(d, d);
        for k in 0..d {
            comp[(0, k)] = -self.coeffs[d - 1 - k] / lead;
        }
        for k in 1..d {
            comp[(k, k - 1)] = C64::new(1.0, 0.0);
        }
        let mut r = linalg::eigenvalues(&comp)?;
        let dp = self.derivative();
        for z in r.iter_mut() {
            for _ in 0..3 {
                let f = self.eval(*z);
                let g = dp.eval(*z);
                if g.norm() == 0.0 {
                    break;
                }
                let step = f / g;
                let cand = *z - step;
                if self.eval(cand).norm() < f.norm() {
                    *z = cand;
                } else {
                    break;
                }
            }
        }
        Ok(r)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|z| -z).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![C64::new(0.0, 0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }
}

/// Bivariate polynomial `Σ c[i][j]·x^i·y^j`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BiPoly {
    /// `coeffs[j]` is the polynomial in x multiplying `y^j`.
    pub by_y: Vec<Poly>,
}

impl BiPoly {
    pub fn new(mut by_y: Vec<Poly>) -> Self {
        while by_y.last().is_some_and(|p| p.is_zero()) {
            by_y.pop();
        }
        BiPoly { by_y }
    }

    /// Polynomial in x multiplying `y^j`.
    pub fn y_coeff(&self, j: usize) -> Poly {
        self.by_y.get(j).cloned().unwrap_or_default()
    }

    pub fn degree_y(&self) -> Option<usize> {
        if self.by_y.is_empty() { None } else { Some(self.by_y.len() - 1) }
    }

    pub fn eval(&self, x: C64, y: C64) -> C64 {
        self.by_y.iter().rev().fold(C64::new(0.0, 0.0), |acc, p| acc * y + p.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    #[test]
    fn trims_and_degree() {
        let p = Poly::new(vec![re(1.0), re(0.0), re(0.0)]);
        assert_eq!(p.degree(), Some(0));
        assert_eq!(Poly::zero().degree(), None);
        assert_eq!(Poly::from_real(&[0.0, 0.0]).degree(), None);
    }

    #[test]
    fn arithmetic_and_degree_of_product() {
        let p = Poly::from_real(&[1.0, 2.0]);
        let q = Poly::new(vec![c(0.0, 1.0), re(0.0), re(3.0)]);
        let pq = &p * &q;
        assert_eq!(pq.degree(), Some(3));
        let x = c(0.3, -0.7);
        assert!((pq.eval(x) - p.eval(x) * q.eval(x)).norm() < 1e-14);
        assert!(((&p + &q).eval(x) - p.eval(x) - q.eval(x)).norm() < 1e-14);
    }

    #[test]
    fn antiderivative_has_zero_constant() {
        let p = Poly::from_real(&[0.0, 0.0, 1.0]);
        let a = p.antiderivative();
        assert_eq!(a.eval(re(0.0)), re(0.0));
        assert!((a.eval(re(1.0)) - re(1.0 / 3.0)).norm() < 1e-15);
        assert_eq!(a.derivative(), p);
    }

    #[test]
    fn composition_and_roots() {
        let v1 = Poly::from_real(&[0.0, 1.0]);
        let v2 = Poly::from_real(&[0.0, 0.0, 1.0]);
        let f = &v2.compose(&v1) - &v1;
        let mut r = f.roots().unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!(r[0].norm() < 1e-14 && (r[1] - re(1.0)).norm() < 1e-14);
    }
}
