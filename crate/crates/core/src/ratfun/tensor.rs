use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::basis::{basis_mul, Anchors, Basis, ONE};
use super::polesum::{PoleSum, PRUNE_REL};
use crate::error::Result;
use crate::json::cjson;
use crate::linalg::C64;

/// A rational function of several variables, stored as a sparse sum of products of
/// single-variable basis functions over a shared anchor set.
///
/// Correlators `W_n⁽ᵍ⁾` with `n ≥ 2` are pure pole tensors; intermediate quantities
/// of the recursion may also carry monomial factors.
#[derive(Clone, Debug)]
pub struct PoleTensor {
    anchors: Anchors,
    nvars: usize,
    terms: BTreeMap<Vec<Basis>, C64>,
}

type Key = Vec<Basis>;

impl PoleTensor {
    pub fn zero(anchors: &Anchors, nvars: usize) -> Self {
        PoleTensor { anchors: anchors.clone(), nvars, terms: BTreeMap::new() }
    }

    /// The constant `a` as a tensor in `nvars` variables.
    pub fn constant(anchors: &Anchors, nvars: usize, a: C64) -> Self {
        let mut t = PoleTensor::zero(anchors, nvars);
        t.add_term(vec![ONE; nvars], a);
        t
    }

    pub fn from_terms(anchors: &Anchors, nvars: usize, terms: impl IntoIterator<Item = (Key, C64)>) -> Self {
        let mut t = PoleTensor::zero(anchors, nvars);
        for (k, c) in terms {
            t.add_term(k, c);
        }
        t
    }

    pub fn anchors(&self) -> &Anchors {
        &self.anchors
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Key, C64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: Key, c: C64) {
        debug_assert_eq!(key.len(), self.nvars);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        *self.terms.entry(key).or_default() += c;
    }

    /// Value of a zero-variable tensor.
    pub fn scalar_value(&self) -> C64 {
        debug_assert_eq!(self.nvars, 0);
        self.terms.get(&vec![]).copied().unwrap_or_default()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Whether every factor of every term is a pole (no polynomial pieces).
    pub fn is_pure_pole(&self) -> bool {
        self.terms.keys().all(|k| k.iter().all(|b| b.is_pole()))
    }

    /// Drop terms below `PRUNE_REL` times the largest coefficient.
    pub fn prune(&mut self) {
        let cut = PRUNE_REL * self.max_abs_coeff();
        self.terms.retain(|_, c| c.norm() > cut);
    }

    pub fn pruned(mut self) -> Self {
        self.prune();
        self
    }

    pub fn scale(&self, a: C64) -> PoleTensor {
        let mut t = self.clone();
        for c in t.terms.values_mut() {
            *c *= a;
        }
        t
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: C64, other: &PoleTensor) {
        debug_assert!(self.anchors.same(&other.anchors));
        debug_assert_eq!(self.nvars, other.nvars);
        for (k, c) in other.terms.iter() {
            *self.terms.entry(k.clone()).or_default() += a * c;
        }
    }

    pub fn add(&self, other: &PoleTensor) -> Result<PoleTensor> {
        self.anchors.check(&other.anchors)?;
        let mut t = self.clone();
        t.axpy(C64::new(1.0, 0.0), other);
        Ok(t.pruned())
    }

    pub fn sub(&self, other: &PoleTensor) -> Result<PoleTensor> {
        self.anchors.check(&other.anchors)?;
        let mut t = self.clone();
        t.axpy(C64::new(-1.0, 0.0), other);
        Ok(t.pruned())
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        debug_assert_eq!(x.len(), self.nvars);
        let s = self.anchors.points();
        self.terms
            .iter()
            .map(|(k, c)| k.iter().zip(x).fold(*c, |acc, (b, xv)| acc * b.eval(*xv, s)))
            .sum()
    }

    /// Expand per-slot factor lists into terms of `out`.
    fn push_cartesian(out: &mut BTreeMap<Key, C64>, slots: &[Vec<(Basis, C64)>], coef: C64) {
        let n = slots.len();
        if slots.iter().any(|v| v.is_empty()) {
            return;
        }
        let mut idx = vec![0usize; n];
        loop {
            let mut c = coef;
            let mut key = Vec::with_capacity(n);
            for v in 0..n {
                let (b, cc) = slots[v][idx[v]];
                key.push(b);
                c *= cc;
            }
            *out.entry(key).or_default() += c;
            let mut v = n;
            loop {
                if v == 0 {
                    return;
                }
                v -= 1;
                idx[v] += 1;
                if idx[v] < slots[v].len() {
                    break;
                }
                idx[v] = 0;
            }
        }
    }

    /// Move variable `v` of the input to slot `map[v]` of an `nout`-variable output.
    ///
    /// Output slots that receive no input become constant factors; slots that receive
    /// several inputs realize the coincidence limit by exact basis products.
    pub fn relabel(&self, map: &[usize], nout: usize) -> PoleTensor {
        debug_assert_eq!(map.len(), self.nvars);
        let s = self.anchors.points();
        let mut out = BTreeMap::new();
        let mut buf = vec![];
        for (key, c) in self.terms.iter() {
            let mut slots: Vec<Vec<(Basis, C64)>> = vec![vec![(ONE, C64::new(1.0, 0.0))]; nout];
            for (v, b) in key.iter().enumerate() {
                let target = map[v];
                let mut next = BTreeMap::new();
                for (pb, pc) in slots[target].iter() {
                    buf.clear();
                    basis_mul(*pb, *b, s, &mut buf);
                    for (nb, nc) in buf.iter() {
                        *next.entry(*nb).or_insert(C64::new(0.0, 0.0)) += pc * nc;
                    }
                }
                slots[target] = next.into_iter().collect();
            }
            Self::push_cartesian(&mut out, &slots, *c);
        }
        PoleTensor { anchors: self.anchors.clone(), nvars: nout, terms: out }.pruned()
    }

    /// Pointwise product of two tensors over the same variables.
    pub fn mul(&self, other: &PoleTensor) -> Result<PoleTensor> {
        self.anchors.check(&other.anchors)?;
        debug_assert_eq!(self.nvars, other.nvars);
        let s = self.anchors.points();
        let mut out = BTreeMap::new();
        let mut slots: Vec<Vec<(Basis, C64)>> = vec![vec![]; self.nvars];
        for (ka, ca) in self.terms.iter() {
            for (kb, cb) in other.terms.iter() {
                for v in 0..self.nvars {
                    slots[v].clear();
                    basis_mul(ka[v], kb[v], s, &mut slots[v]);
                }
                Self::push_cartesian(&mut out, &slots, ca * cb);
            }
        }
        Ok(PoleTensor { anchors: self.anchors.clone(), nvars: self.nvars, terms: out }.pruned())
    }

    /// Outer product: variables of `self` first, then those of `other`.
    pub fn outer(&self, other: &PoleTensor) -> PoleTensor {
        let mut out = BTreeMap::new();
        for (ka, ca) in self.terms.iter() {
            for (kb, cb) in other.terms.iter() {
                let mut k = ka.clone();
                k.extend_from_slice(kb);
                *out.entry(k).or_default() += ca * cb;
            }
        }
        PoleTensor { anchors: self.anchors.clone(), nvars: self.nvars + other.nvars, terms: out }
    }

    /// Partial derivative in variable `var`.
    pub fn derivative(&self, var: usize) -> PoleTensor {
        let mut t = PoleTensor::zero(&self.anchors, self.nvars);
        for (k, c) in self.terms.iter() {
            if let Some((b, f)) = k[var].derivative() {
                let mut nk = k.clone();
                nk[var] = b;
                t.add_term(nk, c * f);
            }
        }
        t
    }

    /// Coefficient of `(x_var − s_i)^r` in the Laurent expansion in one variable,
    /// as a tensor in the remaining variables.
    pub fn laurent_coeff(&self, var: usize, i: usize, r: i32) -> PoleTensor {
        let s = self.anchors.points();
        let mut t = PoleTensor::zero(&self.anchors, self.nvars - 1);
        for (k, c) in self.terms.iter() {
            let f = k[var].laurent(i, r, s);
            if f != C64::new(0.0, 0.0) {
                let mut nk = k.clone();
                nk.remove(var);
                *t.terms.entry(nk).or_default() += c * f;
            }
        }
        t
    }

    /// Highest pole order in variable `var` at anchor `i`.
    pub fn max_pole_order(&self, var: usize, i: usize) -> usize {
        self.terms
            .keys()
            .filter_map(|k| match k[var] {
                Basis::Pole(j, a) if j as usize == i => Some(a as usize),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Largest coefficient among terms that carry a pole in variable `var`.
    pub fn max_pole_abs_in(&self, var: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k[var].is_pole())
            .fold(0.0, |m, (_, c)| m.max(c.norm()))
    }

    /// Principal parts at every anchor, in variable `xvar`, of `self/(x − ξ)²`, with the
    /// new variable ξ inserted at position `pos` of the output.
    ///
    /// Uses `1/(x−ξ)² = Σ_r (r+1)(x−s_i)^r/(ξ−s_i)^{r+2}` near each anchor.
    pub fn pole_part_over_square_difference(&self, xvar: usize, pos: usize) -> PoleTensor {
        let mut t = PoleTensor::zero(&self.anchors, self.nvars + 1);
        for (k, c) in self.terms.iter() {
            if let Basis::Pole(i, a) = k[xvar] {
                for b in 1..=a {
                    let mut nk = k.clone();
                    nk[xvar] = Basis::Pole(i, b);
                    nk.insert(pos, Basis::Pole(i, a - b + 2));
                    t.add_term(nk, c * (a - b + 1) as f64);
                }
            }
        }
        t
    }

    /// Restriction to one variable when `nvars == 1`.
    pub fn to_polesum(&self) -> PoleSum {
        debug_assert_eq!(self.nvars, 1);
        PoleSum::from_basis_terms(&self.anchors, self.terms.iter().map(|(k, c)| (k[0], *c)))
    }

    /// Largest coefficient of `self − self∘σ` for the variable permutation `perm`.
    pub fn permutation_defect(&self, perm: &[usize]) -> f64 {
        let p = self.relabel(perm, self.nvars);
        let mut d = self.clone();
        d.axpy(C64::new(-1.0, 0.0), &p);
        d.max_abs_coeff()
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let idx: Vec<Value> = k
                    .iter()
                    .map(|b| match b {
                        Basis::Pole(i, a) => json!({"pole": i, "order": a}),
                        Basis::Mono(p) => json!({"power": p}),
                    })
                    .collect();
                json!({"index": idx, "coeff": cjson(*c)})
            })
            .collect();
        json!({"arity": self.nvars, "terms": terms})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    fn anchors() -> Anchors {
        Anchors::with_default_tol(vec![re(0.0), re(1.0), c(0.4, 0.9)]).unwrap()
    }

    fn sample(a: &Anchors) -> PoleTensor {
        PoleTensor::from_terms(
            a,
            2,
            vec![
                (vec![Basis::Pole(0, 2), Basis::Pole(1, 1)], re(1.5)),
                (vec![Basis::Pole(2, 1), Basis::Mono(1)], c(0.0, 1.0)),
                (vec![Basis::Mono(2), Basis::Pole(0, 3)], re(-0.5)),
            ],
        )
    }

    #[test]
    fn relabel_merge_is_diagonal_evaluation() {
        let a = anchors();
        let t = sample(&a);
        let d = t.relabel(&[0, 0], 1);
        for x in [c(0.3, 0.2), c(-0.7, 1.1)] {
            assert!((d.eval(&[x]) - t.eval(&[x, x])).norm() < 1e-11);
        }
        let sw = t.relabel(&[1, 0], 2);
        let (x, y) = (c(0.3, 0.2), c(2.0, -0.5));
        assert!((sw.eval(&[y, x]) - t.eval(&[x, y])).norm() < 1e-13);
    }

    #[test]
    fn product_and_outer() {
        let a = anchors();
        let t = sample(&a);
        let p = t.mul(&t).unwrap();
        let (x, y) = (c(0.3, 0.2), c(2.0, -0.5));
        assert!((p.eval(&[x, y]) - t.eval(&[x, y]).powi(2)).norm() < 1e-10 * t.eval(&[x, y]).norm().powi(2));
        let o = t.outer(&t);
        let z = [x, y, y, x];
        assert!((o.eval(&z) - t.eval(&[x, y]) * t.eval(&[y, x])).norm() < 1e-10);
    }

    #[test]
    fn laurent_and_derivative() {
        let a = anchors();
        let t = sample(&a);
        let x = c(0.2, -0.4);
        let y = c(1.3, 0.3);
        let dt = t.derivative(1);
        let h = 1e-6;
        let fd = (t.eval(&[x, y + h]) - t.eval(&[x, y - h])) / (2.0 * h);
        assert!((fd - dt.eval(&[x, y])).norm() < 1e-6);
        let l = t.laurent_coeff(0, 0, -2);
        assert!((l.eval(&[y]) - re(1.5) / (y - re(1.0))).norm() < 1e-14);
        assert_eq!(t.max_pole_order(0, 0), 2);
        assert_eq!(t.max_pole_order(1, 0), 3);
    }

    #[test]
    fn square_difference_principal_part() {
        let a = anchors();
        let f = PoleTensor::from_terms(&a, 1, vec![(vec![Basis::Pole(1, 3)], re(1.0))]);
        let g = f.pole_part_over_square_difference(0, 1);
        // principal part at s=1 of 1/((x−1)³(x−ξ)²) must match the exact function up to a
        // remainder regular at x = 1; compare Laurent coefficients by sampling ξ.
        let xi = c(2.5, 0.7);
        let exact = PoleSum::from_terms(&a, Default::default(), &[(1, 3, re(1.0))]);
        let inv_sq = |x: C64| C64::new(1.0, 0.0) / ((x - xi) * (x - xi));
        for b in 1..=3 {
            let coef = g.laurent_coeff(0, 1, -b).eval(&[xi]);
            // numerical Laurent coefficient via contour integral on a small circle
            let r = 0.1;
            let m = 64;
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..m {
                let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let z = C64::from_polar(r, th);
                let x = re(1.0) + z;
                acc += exact.eval(x) * inv_sq(x) * z.powi(b);
            }
            acc /= m as f64;
            assert!((acc - coef).norm() < 1e-10, "order {b}: {acc} vs {coef}");
        }
    }
}
