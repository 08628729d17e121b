use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::basis::{basis_mul, Anchors, Basis};
use super::poly::Poly;
use super::tensor::PoleTensor;
use crate::error::{Error, Result};
use crate::json::cjson;
use crate::linalg::{binom, cpowi, C64};

/// Relative magnitude below which coefficients are pruned during normalization.
pub const PRUNE_REL: f64 = 1e-14;

/// A rational function `poly(x) + Σ c_{i,a}/(x−s_i)^a` with poles only at the anchors.
#[derive(Clone, Debug)]
pub struct PoleSum {
    anchors: Anchors,
    poly: Poly,
    /// `poles[i][a−1]` is the coefficient of `(x−s_i)^{−a}`.
    poles: Vec<Vec<C64>>,
}

/// Laurent data of a [`PoleSum`] at one anchor: coefficients of `(x−s_i)^r` for
/// `r = min_order ..= max_order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent {
    pub min_order: i32,
    pub coeffs: Vec<C64>,
}

impl Laurent {
    /// Coefficient of `(x−s_i)^r`, zero outside the stored window.
    pub fn at(&self, r: i32) -> C64 {
        let k = r - self.min_order;
        if k < 0 {
            return C64::new(0.0, 0.0);
        }
        self.coeffs.get(k as usize).copied().unwrap_or_default()
    }
}

impl PoleSum {
    pub fn zero(anchors: &Anchors) -> Self {
        PoleSum { anchors: anchors.clone(), poly: Poly::zero(), poles: vec![vec![]; anchors.len()] }
    }

    pub fn from_poly(anchors: &Anchors, p: Poly) -> Self {
        let mut z = PoleSum::zero(anchors);
        z.poly = p;
        z
    }

    /// The single term `coef/(x−s_i)^a`.
    pub fn pole(anchors: &Anchors, i: usize, a: usize, coef: C64) -> Self {
        let mut z = PoleSum::zero(anchors);
        z.add_pole(i, a, coef);
        z
    }

    /// Build from explicit terms `(i, a, c)`.
    pub fn from_terms(anchors: &Anchors, poly: Poly, terms: &[(usize, usize, C64)]) -> Self {
        let mut z = PoleSum::from_poly(anchors, poly);
        for &(i, a, c) in terms {
            z.add_pole(i, a, c);
        }
        z.normalize();
        z
    }

    pub fn anchors(&self) -> &Anchors {
        &self.anchors
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    /// Coefficient of `(x−s_i)^{−a}`.
    pub fn pole_coeff(&self, i: usize, a: usize) -> C64 {
        if a == 0 {
            return C64::new(0.0, 0.0);
        }
        self.poles[i].get(a - 1).copied().unwrap_or_default()
    }

    pub fn add_pole(&mut self, i: usize, a: usize, coef: C64) {
        assert!(a >= 1, "pole order must be at least 1");
        let v = &mut self.poles[i];
        if v.len() < a {
            v.resize(a, C64::new(0.0, 0.0));
        }
        v[a - 1] += coef;
    }

    /// Highest pole order at anchor `i` (0 when regular there).
    pub fn max_order(&self, i: usize) -> usize {
        self.poles[i].iter().rposition(|z| *z != C64::new(0.0, 0.0)).map_or(0, |k| k + 1)
    }

    pub fn max_order_all(&self) -> usize {
        (0..self.anchors.len()).map(|i| self.max_order(i)).max().unwrap_or(0)
    }

    /// Nonzero pole terms `(i, a, c)` in (anchor, order) order.
    pub fn terms(&self) -> Vec<(usize, usize, C64)> {
        let mut out = vec![];
        for (i, v) in self.poles.iter().enumerate() {
            for (k, c) in v.iter().enumerate() {
                if *c != C64::new(0.0, 0.0) {
                    out.push((i, k + 1, *c));
                }
            }
        }
        out
    }

    /// Drop coefficients below `PRUNE_REL` times the largest coefficient and trim.
    pub fn normalize(&mut self) {
        let m = self.max_abs_coeff();
        let cut = PRUNE_REL * m;
        let zero = C64::new(0.0, 0.0);
        let mut pc: Vec<C64> = self.poly.coeffs().to_vec();
        for z in pc.iter_mut() {
            if z.norm() <= cut {
                *z = zero;
            }
        }
        self.poly = Poly::new(pc);
        for v in self.poles.iter_mut() {
            for z in v.iter_mut() {
                if z.norm() <= cut {
                    *z = zero;
                }
            }
            while v.last().is_some_and(|z| *z == zero) {
                v.pop();
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn max_abs_coeff(&self) -> f64 {
        let p = self.poly.max_abs_coeff();
        self.poles.iter().flatten().fold(p, |m, z| m.max(z.norm()))
    }

    /// Largest pole coefficient magnitude (zero means pole-free).
    pub fn max_pole_abs(&self) -> f64 {
        self.poles.iter().flatten().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero() && self.poles.iter().flatten().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// The same function without its polynomial part.
    pub fn pole_part(&self) -> PoleSum {
        PoleSum { anchors: self.anchors.clone(), poly: Poly::zero(), poles: self.poles.clone() }
    }

    pub fn eval(&self, x: C64) -> C64 {
        let s = self.anchors.points();
        let mut acc = self.poly.eval(x);
        for (i, v) in self.poles.iter().enumerate() {
            let w = C64::new(1.0, 0.0) / (x - s[i]);
            let mut p = w;
            for c in v {
                acc += c * p;
                p *= w;
            }
        }
        acc
    }

    pub fn scale(&self, a: C64) -> PoleSum {
        PoleSum {
            anchors: self.anchors.clone(),
            poly: self.poly.scale(a),
            poles: self.poles.iter().map(|v| v.iter().map(|z| z * a).collect()).collect(),
        }
    }

    /// `self += a·other` without normalization.
    pub fn axpy(&mut self, a: C64, other: &PoleSum) {
        debug_assert!(self.anchors.same(&other.anchors));
        self.poly = &self.poly + &other.poly.scale(a);
        for (i, v) in other.poles.iter().enumerate() {
            for (k, z) in v.iter().enumerate() {
                if *z != C64::new(0.0, 0.0) {
                    self.add_pole(i, k + 1, a * z);
                }
            }
        }
    }

    pub fn add(&self, other: &PoleSum) -> Result<PoleSum> {
        self.anchors.check(&other.anchors)?;
        let mut r = self.clone();
        r.axpy(C64::new(1.0, 0.0), other);
        Ok(r.normalized())
    }

    pub fn sub(&self, other: &PoleSum) -> Result<PoleSum> {
        self.anchors.check(&other.anchors)?;
        let mut r = self.clone();
        r.axpy(C64::new(-1.0, 0.0), other);
        Ok(r.normalized())
    }

    /// Basis-level terms of this function.
    pub(crate) fn basis_terms(&self) -> Vec<(Basis, C64)> {
        let mut out: Vec<(Basis, C64)> = self
            .poly
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C64::new(0.0, 0.0))
            .map(|(k, c)| (Basis::Mono(k as u32), *c))
            .collect();
        for (i, a, c) in self.terms() {
            out.push((Basis::Pole(i as u32, a as u32), c));
        }
        out
    }

    pub(crate) fn from_basis_terms(anchors: &Anchors, terms: impl IntoIterator<Item = (Basis, C64)>) -> PoleSum {
        let mut poly: Vec<C64> = vec![];
        let mut z = PoleSum::zero(anchors);
        for (b, c) in terms {
            match b {
                Basis::Mono(k) => {
                    let k = k as usize;
                    if poly.len() <= k {
                        poly.resize(k + 1, C64::new(0.0, 0.0));
                    }
                    poly[k] += c;
                }
                Basis::Pole(i, a) => z.add_pole(i as usize, a as usize, c),
            }
        }
        z.poly = Poly::new(poly);
        z
    }

    /// Exact product, re-expanded into partial fractions over the same anchors.
    pub fn multiply(&self, other: &PoleSum) -> Result<PoleSum> {
        self.anchors.check(&other.anchors)?;
        let s = self.anchors.points();
        let mut acc: BTreeMap<Basis, C64> = BTreeMap::new();
        let mut buf = vec![];
        for (ba, ca) in self.basis_terms() {
            for (bb, cb) in other.basis_terms() {
                buf.clear();
                basis_mul(ba, bb, s, &mut buf);
                for (b, c) in buf.iter() {
                    *acc.entry(*b).or_default() += ca * cb * c;
                }
            }
        }
        Ok(PoleSum::from_basis_terms(&self.anchors, acc).normalized())
    }

    pub fn derivative(&self) -> PoleSum {
        let mut z = PoleSum::from_poly(&self.anchors, self.poly.derivative());
        for (i, a, c) in self.terms() {
            z.add_pole(i, a + 1, -c * a as f64);
        }
        z
    }

    /// Coefficient of `(x−s_i)^r` in the Laurent expansion at anchor `i`.
    pub fn laurent_coeff(&self, i: usize, r: i32) -> C64 {
        if r < 0 {
            return self.pole_coeff(i, (-r) as usize);
        }
        let s = self.anchors.points();
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.poly.coeffs().iter().enumerate() {
            acc += c * Basis::Mono(k as u32).laurent(i, r, s);
        }
        for (j, v) in self.poles.iter().enumerate() {
            if j == i {
                continue;
            }
            for (k, c) in v.iter().enumerate() {
                if *c != C64::new(0.0, 0.0) {
                    acc += c * Basis::Pole(j as u32, k as u32 + 1).laurent(i, r, s);
                }
            }
        }
        acc
    }

    /// Pole coefficients at anchor `i` down to its maximal order, and Taylor
    /// coefficients of the regular part up to order `m_max`.
    pub fn laurent_coeffs(&self, i: usize, m_max: usize) -> Laurent {
        let top = self.max_order(i) as i32;
        let coeffs = (-top..=m_max as i32).map(|r| self.laurent_coeff(i, r)).collect();
        Laurent { min_order: -top, coeffs }
    }

    /// Large-x moments `μ_k`, `f(x) = Σ_k μ_k x^{−(k+1)}`, for `k = 0..=m_max`.
    pub fn large_x_moments(&self, m_max: usize) -> Result<Vec<C64>> {
        if !self.poly.is_zero() {
            return Err(Error::NonzeroPolynomialPart);
        }
        let s = self.anchors.points();
        Ok((0..=m_max)
            .map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for (i, a, c) in self.terms() {
                    if a - 1 <= k {
                        acc += c * binom(k as u32, (a - 1) as u32) * cpowi(s[i], (k + 1 - a) as i32);
                    }
                }
                acc
            })
            .collect())
    }

    /// Coefficient-wise comparison within an absolute tolerance.
    pub fn approx_eq(&self, other: &PoleSum, tol: f64) -> bool {
        match self.sub(other) {
            Ok(d) => d.max_abs_coeff() <= tol,
            Err(_) => false,
        }
    }

    /// Single-variable tensor view.
    pub fn to_tensor(&self) -> PoleTensor {
        PoleTensor::from_terms(&self.anchors, 1, self.basis_terms().into_iter().map(|(b, c)| (vec![b], c)))
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms()
            .into_iter()
            .map(|(i, a, c)| json!({"pole": i, "order": a, "coeff": cjson(c)}))
            .collect();
        json!({
            "poly": self.poly.coeffs().iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
            "terms": terms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    fn anchors(v: &[C64]) -> Anchors {
        Anchors::with_default_tol(v.to_vec()).unwrap()
    }

    #[test]
    fn additive_inverse_is_zero() {
        let a = anchors(&[re(1.0)]);
        let f = PoleSum::pole(&a, 0, 1, re(1.0));
        let g = PoleSum::pole(&a, 0, 1, re(-1.0));
        assert!(f.add(&g).unwrap().is_zero());
    }

    #[test]
    fn disjoint_orders_and_evaluation() {
        let a = anchors(&[re(1.0)]);
        let f = PoleSum::pole(&a, 0, 1, re(1.0)).add(&PoleSum::pole(&a, 0, 2, re(1.0))).unwrap();
        assert_eq!(f.terms(), vec![(0, 1, re(1.0)), (0, 2, re(1.0))]);
        let g = PoleSum::from_terms(&a, Poly::from_real(&[0.0, 1.0]), &[(0, 1, re(1.0))]);
        assert!((g.eval(re(2.0)) - re(3.0)).norm() < 1e-15);
    }

    #[test]
    fn product_partial_fractions() {
        let a = anchors(&[re(0.0), re(1.0)]);
        let p = PoleSum::pole(&a, 0, 1, re(1.0)).multiply(&PoleSum::pole(&a, 1, 1, re(1.0))).unwrap();
        assert!((p.pole_coeff(1, 1) - re(1.0)).norm() < 1e-15);
        assert!((p.pole_coeff(0, 1) - re(-1.0)).norm() < 1e-15);
        let b = anchors(&[re(1.0)]);
        let sq = PoleSum::pole(&b, 0, 1, re(1.0)).multiply(&PoleSum::pole(&b, 0, 1, re(1.0))).unwrap();
        assert_eq!(sq.terms(), vec![(0, 2, re(1.0))]);
        let x = PoleSum::from_poly(&b, Poly::from_real(&[0.0, 1.0]));
        let q = x.multiply(&PoleSum::pole(&b, 0, 1, re(1.0))).unwrap();
        assert_eq!(q.poly(), &Poly::from_real(&[1.0]));
        assert_eq!(q.terms(), vec![(0, 1, re(1.0))]);
    }

    #[test]
    fn laurent_examples() {
        let a = anchors(&[re(0.5), re(2.0)]);
        let f = PoleSum::pole(&a, 0, 3, re(1.0));
        let l = f.laurent_coeffs(0, 2);
        assert_eq!(l.at(-3), re(1.0));
        assert_eq!(l.at(-1), re(0.0));
        let g = PoleSum::pole(&a, 0, 1, re(1.0));
        let l = g.laurent_coeffs(1, 2);
        assert!((l.at(0) - re(1.0 / 1.5)).norm() < 1e-15);
        assert!((l.at(1) - re(-1.0 / 2.25)).norm() < 1e-15);
        let h = PoleSum::from_poly(&a, Poly::from_real(&[0.0, 0.0, 1.0]));
        assert_eq!(h.laurent_coeffs(0, 3).min_order, 0);
    }

    #[test]
    fn moments() {
        let s = c(0.3, 0.4);
        let a = anchors(&[s]);
        let f = PoleSum::pole(&a, 0, 1, re(1.0));
        let m = f.large_x_moments(4).unwrap();
        for (k, mu) in m.iter().enumerate() {
            assert!((mu - cpowi(s, k as i32)).norm() < 1e-15);
        }
        let g = PoleSum::pole(&a, 0, 2, re(1.0));
        let m = g.large_x_moments(4).unwrap();
        assert_eq!(m[0], re(0.0));
        for k in 1..5 {
            assert!((m[k] - cpowi(s, k as i32 - 1) * k as f64).norm() < 1e-14);
        }
        let h = PoleSum::from_poly(&a, Poly::from_real(&[1.0]));
        assert!(h.large_x_moments(2).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let a = anchors(&[re(0.0), c(1.0, 1.0)]);
        let f = PoleSum::from_terms(&a, Poly::from_real(&[1.0, 2.0, 3.0]), &[(0, 2, re(1.5)), (1, 1, c(0.0, 1.0))]);
        let df = f.derivative();
        let x = c(0.7, -0.3);
        let h = 1e-6;
        let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
        assert!((fd - df.eval(x)).norm() < 1e-7);
    }
}
