//! Single-variable basis functions `x^k` and `(x−s_i)^{−a}` and their exact algebra.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{binom, binom_neg, cpowi, C64};

/// Default relative clustering tolerance for anchor sets.
pub const CLUSTER_TOL: f64 = 1e-8;

/// A fixed set of distinct pole locations shared by every function built on it.
#[derive(Clone, Debug)]
pub struct Anchors(Arc<Vec<C64>>);

impl Anchors {
    /// Build an anchor set, rejecting points closer than `rel_tol·max(1, max|s|)`.
    pub fn new(points: Vec<C64>, rel_tol: f64) -> Result<Self> {
        let scale = points.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        for i in 0..points.len() {
            for j in 0..i {
                let d = (points[i] - points[j]).norm();
                if d <= rel_tol * scale {
                    return Err(Error::AnchorCollision { i: j, j: i, distance: d });
                }
            }
        }
        Ok(Anchors(Arc::new(points)))
    }

    pub fn with_default_tol(points: Vec<C64>) -> Result<Self> {
        Anchors::new(points, CLUSTER_TOL)
    }

    pub fn points(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> C64 {
        self.0[i]
    }

    /// Two anchor sets are interchangeable when they hold identical points.
    pub fn same(&self, other: &Anchors) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }

    pub(crate) fn check(&self, other: &Anchors) -> Result<()> {
        if self.same(other) { Ok(()) } else { Err(Error::AnchorMismatch) }
    }
}

/// A basis function of one variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Basis {
    /// `x^k`.
    Mono(u32),
    /// `(x − s_i)^{−a}` with `a ≥ 1`.
    Pole(u32, u32),
}

pub const ONE: Basis = Basis::Mono(0);

impl Basis {
    pub fn eval(self, x: C64, s: &[C64]) -> C64 {
        match self {
            Basis::Mono(k) => cpowi(x, k as i32),
            Basis::Pole(i, a) => cpowi(x - s[i as usize], -(a as i32)),
        }
    }

    pub fn is_pole(self) -> bool {
        matches!(self, Basis::Pole(..))
    }

    /// Derivative in its variable as a single scaled basis function.
    pub fn derivative(self) -> Option<(Basis, f64)> {
        match self {
            Basis::Mono(0) => None,
            Basis::Mono(k) => Some((Basis::Mono(k - 1), k as f64)),
            Basis::Pole(i, a) => Some((Basis::Pole(i, a + 1), -(a as f64))),
        }
    }

    /// Coefficient of `(x − s_i)^r` in the Laurent expansion at anchor `i`.
    pub fn laurent(self, i: usize, r: i32, s: &[C64]) -> C64 {
        let zero = C64::new(0.0, 0.0);
        match self {
            Basis::Pole(j, a) if j as usize == i => {
                if r == -(a as i32) { C64::new(1.0, 0.0) } else { zero }
            }
            Basis::Pole(j, a) => {
                if r < 0 {
                    return zero;
                }
                let d = s[i] - s[j as usize];
                cpowi(d, -(a as i32) - r) * binom_neg(a, r as u32)
            }
            Basis::Mono(k) => {
                if r < 0 || r as u32 > k {
                    return zero;
                }
                cpowi(s[i], k as i32 - r) * binom(k, r as u32)
            }
        }
    }
}

/// Exact product of two basis functions of the same variable, re-expanded in the basis.
pub fn basis_mul(a: Basis, b: Basis, s: &[C64], out: &mut Vec<(Basis, C64)>) {
    let one = C64::new(1.0, 0.0);
    match (a, b) {
        (Basis::Mono(0), o) | (o, Basis::Mono(0)) => out.push((o, one)),
        (Basis::Mono(p), Basis::Mono(q)) => out.push((Basis::Mono(p + q), one)),
        (Basis::Pole(i, pa), Basis::Pole(j, pb)) if i == j => out.push((Basis::Pole(i, pa + pb), one)),
        (Basis::Pole(i, pa), Basis::Pole(j, pb)) => {
            let d = s[i as usize] - s[j as usize];
            for k in 1..=pa {
                let r = pa - k;
                out.push((Basis::Pole(i, k), cpowi(d, -(pb as i32) - r as i32) * binom_neg(pb, r)));
            }
            for l in 1..=pb {
                let r = pb - l;
                out.push((Basis::Pole(j, l), cpowi(-d, -(pa as i32) - r as i32) * binom_neg(pa, r)));
            }
        }
        (Basis::Mono(k), Basis::Pole(i, pa)) | (Basis::Pole(i, pa), Basis::Mono(k)) => {
            let si = s[i as usize];
            for r in 0..=k {
                let cr = cpowi(si, (k - r) as i32) * binom(k, r);
                if r < pa {
                    out.push((Basis::Pole(i, pa - r), cr));
                } else {
                    let m = r - pa;
                    for q in 0..=m {
                        out.push((Basis::Mono(q), cr * cpowi(-si, (m - q) as i32) * binom(m, q)));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    fn check_product(a: Basis, b: Basis, s: &[C64]) {
        let mut out = vec![];
        basis_mul(a, b, s, &mut out);
        for x in [c(0.37, 0.81), c(-1.3, 0.2), c(2.5, -0.4)] {
            let lhs = a.eval(x, s) * b.eval(x, s);
            let rhs: C64 = out.iter().map(|(bb, cc)| cc * bb.eval(x, s)).sum();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0), "{a:?}*{b:?}");
        }
    }

    #[test]
    fn products_are_exact() {
        let s = [re(0.0), re(1.0), c(0.5, 0.7)];
        let all = [
            Basis::Mono(0),
            Basis::Mono(1),
            Basis::Mono(3),
            Basis::Pole(0, 1),
            Basis::Pole(0, 3),
            Basis::Pole(1, 2),
            Basis::Pole(2, 4),
        ];
        for a in all {
            for b in all {
                check_product(a, b, &s);
            }
        }
    }

    #[test]
    fn laurent_of_remote_pole_is_geometric() {
        let s = [re(0.0), re(2.0)];
        let b = Basis::Pole(0, 1);
        assert!((b.laurent(1, 0, &s) - re(0.5)).norm() < 1e-15);
        assert!((b.laurent(1, 1, &s) - re(-0.25)).norm() < 1e-15);
        assert_eq!(b.laurent(1, -1, &s), re(0.0));
    }

    #[test]
    fn collision_is_rejected() {
        assert!(Anchors::with_default_tol(vec![re(1.0), re(1.0 + 1e-12)]).is_err());
        assert!(Anchors::with_default_tol(vec![re(1.0), re(1.1)]).is_ok());
    }
}
