//! The recursion kernel `K(x₀, x)`: jets at the Bethe roots, the blocks of the linear
//! system that determines them, and the compatibility identity at the roots.

use serde_json::{json, Value};

use crate::bethe::{BetheSolution, LeadingData};
use crate::error::{Error, Result};
use crate::json::cmat_json;
use crate::linalg::{cpowi, factorial, max_abs, CMat, Lu, C64};
use crate::model::ModelSpec;
use crate::ratfun::{PoleSum, PoleSumMatrix};

/// Default depth of the derivative table, enough for genus one.
pub const DEFAULT_DEPTH: usize = 3;

/// Depth needed to run the recursion up to genus `g`.
pub fn depth_for_genus(g: usize) -> usize {
    (2 * g + 1).max(DEFAULT_DEPTH)
}

/// The blocks `B₀ … B_{d₂−1}` and the `(d₂N)×(d₂N)` matrix 𝓜.
#[derive(Clone, Debug)]
pub struct Blocks {
    pub b: Vec<CMat>,
    pub m: CMat,
}

pub fn build_blocks(sol: &BetheSolution, model: &ModelSpec) -> Blocks {
    let n = sol.n();
    let d2 = model.d2();
    let c = model.c();
    let s = &sol.s;
    let b: Vec<CMat> = (0..d2)
        .map(|k| {
            let u = &sol.u[k];
            CMat::from_fn(n, n, |i, j| {
                if i == j {
                    let mut acc = -model.v1p.derivative().eval(s[i]) * u[i];
                    for l in 0..n {
                        if l != i {
                            acc -= c * (u[i] + u[l]) / ((s[i] - s[l]) * (s[i] - s[l]));
                        }
                    }
                    if k == 0 {
                        acc += c;
                    }
                    acc
                } else {
                    c * (u[i] + u[j]) / ((s[i] - s[j]) * (s[i] - s[j]))
                }
            })
        })
        .collect();
    let mut m = CMat::zeros(d2 * n, d2 * n);
    for p in 0..d2 - 1 {
        for i in 0..n {
            for j in 0..n {
                m[(p * n + i, p * n + j)] = -sol.b[(j, i)];
            }
            m[(p * n + i, (p + 1) * n + i)] = C64::new(1.0, 0.0);
        }
    }
    for (k, bk) in b.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                m[((d2 - 1) * n + i, k * n + j)] = bk[(i, j)];
            }
        }
    }
    Blocks { b, m }
}

/// The blocks `C₀ … C_{d₂−1}` of the compatibility identity.
pub fn compat_blocks(sol: &BetheSolution, model: &ModelSpec) -> Vec<CMat> {
    let n = sol.n();
    let d2 = model.d2();
    let c = model.c();
    let tt = model.tt(d2);
    let s = &sol.s;
    let mut out = Vec::with_capacity(d2);
    for k in 0..d2 - 1 {
        let u = &sol.u[k];
        out.push(CMat::from_fn(n, n, |i, j| {
            if i == j {
                let mut acc = -model.tt(k);
                if k == 0 {
                    acc += s[i];
                }
                for l in 0..n {
                    if l != i {
                        acc += u[l] / (s[i] - s[l]);
                    }
                }
                acc * c / tt
            } else {
                c * u[i] / (tt * (s[i] - s[j]))
            }
        }));
    }
    out.push(CMat::from_fn(n, n, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let mut acc = -model.v1p.eval(s[i]) - model.tt(d2 - 1) / tt;
        for l in 0..n {
            if l != i {
                acc += c * 2.0 / (s[i] - s[l]);
            }
        }
        acc * c
    }));
    out
}

/// `‖Σ_k C_k (Bᵗ)ᵏ‖∞`. The transpose is the matrix that appears in the first block rows
/// of 𝓜.
pub fn compat_residual(sol: &BetheSolution, model: &ModelSpec) -> f64 {
    let n = sol.n();
    let cs = compat_blocks(sol, model);
    let bt = sol.b.transpose();
    let mut acc = CMat::zeros(n, n);
    let mut bp = CMat::identity(n, n);
    for ck in &cs {
        acc += ck * &bp;
        bp = &bp * &bt;
    }
    max_abs(&acc)
}

pub const COMPAT_TOL: f64 = 1e-9;

/// The compatibility residual, failing above `1e−9·scale`.
pub fn compat_check(sol: &BetheSolution, model: &ModelSpec) -> Result<f64> {
    let r = compat_residual(sol, model);
    let thr = COMPAT_TOL * sol.scale() * model.precision;
    if r > thr {
        return Err(Error::verification("compatibility identity", r, thr));
    }
    Ok(r)
}

/// Jets `K⁽ᵐ⁾(x₀, s_i)` for `m = 0..=depth`, with the matrices `A_i(x₀)`.
#[derive(Clone, Debug)]
pub struct KernelTable {
    /// `derivs[i][m]` is `K⁽ᵐ⁾(x₀, s_i)`, entries indexed `(p, q)`.
    pub derivs: Vec<Vec<PoleSumMatrix>>,
    pub a: Vec<PoleSumMatrix>,
    pub depth: usize,
    d2: usize,
    c: C64,
    tt: C64,
    /// `w[i][k] = u_{k,i}/t̃_{d₂}`.
    w: Vec<Vec<C64>>,
    /// Laurent coefficients `Y_(r)` at each root, `r = −1..=depth`.
    y_laurent: Vec<Vec<C64>>,
    /// Laurent coefficients `U_(r),k` at each root, `r = −1..=depth`.
    u_laurent: Vec<Vec<Vec<C64>>>,
    s: Vec<C64>,
}

type Mat = PoleSumMatrix;

fn zero_like(k: &Mat) -> Mat {
    PoleSumMatrix::zero(k.get(0, 0).anchors(), k.dim())
}

impl KernelTable {
    /// Solve for `K(x₀, s_i)` and its jets to the requested depth.
    pub fn build(sol: &BetheSolution, model: &ModelSpec, leading: &LeadingData, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Insufficient("kernel depth must be at least 1".into()));
        }
        let n = sol.n();
        let d2 = model.d2();
        let c = model.c();
        let tt = model.tt(d2);
        let an = &sol.anchors;
        let blocks = build_blocks(sol, model);
        let minv = Lu::new(&blocks.m, "kernel system matrix")?.inverse()?;
        let last = d2 - 1;
        let mut k0 = vec![PoleSumMatrix::zero(an, d2); n];
        for (i, ki) in k0.iter_mut().enumerate() {
            for p in 0..d2 {
                for q in 0..d2 {
                    let row = p * n + i;
                    let mut f = PoleSum::zero(an);
                    for j in 0..n {
                        if q < last {
                            f.add_pole(j, 1, minv[(row, q * n + j)]);
                        }
                        f.add_pole(j, 2, minv[(row, last * n + j)] * sol.u[q][j]);
                    }
                    ki.set(p, q, f.normalized());
                }
            }
        }
        let w: Vec<Vec<C64>> = (0..n).map(|i| (0..d2).map(|k| sol.u[k][i] / tt).collect()).collect();
        let mut table = KernelTable {
            derivs: k0.into_iter().map(|k| vec![k]).collect(),
            a: Vec::new(),
            depth: 0,
            d2,
            c,
            tt,
            w,
            y_laurent: Vec::new(),
            u_laurent: Vec::new(),
            s: sol.s.clone(),
        };
        table.a = (0..n).map(|i| table.a_matrix(i, &table.derivs[i][0])).collect();
        table.fill_laurent(leading, depth);
        table.first_derivative(sol);
        table.extend(leading, depth)?;
        Ok(table)
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    fn fill_laurent(&mut self, leading: &LeadingData, depth: usize) {
        let n = self.n();
        let top = depth as i32;
        self.y_laurent = (0..n).map(|i| (-1..=top).map(|r| leading.y.laurent_coeff(i, r)).collect()).collect();
        self.u_laurent = (0..n)
            .map(|i| (-1..=top).map(|r| (0..self.d2).map(|k| leading.u0[k].laurent_coeff(i, r)).collect()).collect())
            .collect();
    }

    fn y_at(&self, i: usize, r: usize) -> C64 {
        self.y_laurent[i][r + 1]
    }

    fn u_at(&self, i: usize, r: usize, k: usize) -> C64 {
        self.u_laurent[i][r + 1][k]
    }

    /// `(T/N + r⃗w⃗_iᵗ)·K`.
    fn a_matrix(&self, i: usize, k: &Mat) -> Mat {
        let last = self.d2 - 1;
        let mut out = zero_like(k);
        for p in 0..self.d2 {
            for q in 0..self.d2 {
                let mut e = k.get(p, q).scale(self.c);
                if p == last {
                    for l in 0..self.d2 {
                        e.axpy(self.w[i][l], k.get(l, q));
                    }
                }
                out.set(p, q, e.normalized());
            }
        }
        out
    }

    /// `G_(n)` at root `i`: the order-`n` Taylor coefficient of `G(x₀, x)` at `x = s_i`
    /// without the `A_i/(x − s_i)` pole.
    fn g_coeff(&self, i: usize, order: usize) -> Mat {
        let n = self.n();
        let an = self.derivs[i][0].get(0, 0).anchors().clone();
        let mut out = PoleSumMatrix::zero(&an, self.d2);
        for p in 0..self.d2 {
            out.get_mut(p, p).add_pole(i, order + 1, C64::new(1.0, 0.0));
        }
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        for j in 0..n {
            if j == i {
                continue;
            }
            let f = cpowi(self.s[i] - self.s[j], -(order as i32 + 1)) * sign;
            for p in 0..self.d2 {
                for q in 0..self.d2 {
                    out.get_mut(p, q).axpy(f, self.a[j].get(p, q));
                }
            }
        }
        out
    }

    /// `K′` from the closed form for its last row; the other rows vanish in our gauge.
    fn first_derivative(&mut self, sol: &BetheSolution) {
        let n = self.n();
        let last = self.d2 - 1;
        let c2 = self.c * self.c;
        for i in 0..n {
            let an = self.derivs[i][0].get(0, 0).anchors().clone();
            let mut k1 = PoleSumMatrix::zero(&an, self.d2);
            for q in 0..self.d2 {
                let mut e = PoleSum::pole(&an, i, 1, sol.u[q][i] / self.tt);
                for k in 0..self.d2 {
                    for j in 0..n {
                        if j != i {
                            let f = self.c * (sol.u[k][i] + sol.u[k][j]) / (self.tt * (self.s[i] - self.s[j]));
                            e.axpy(f, self.derivs[j][0].get(k, q));
                        }
                    }
                }
                k1.set(last, q, e.scale(C64::new(1.0, 0.0) / c2).normalized());
            }
            self.derivs[i].push(k1);
        }
        self.depth = 1;
    }

    /// Row `p` of `Σ_{l=0}^{n} Y_(n−l) K⁽ˡ⁾/l!` minus the shift term and the source.
    fn first_rows_rhs(&self, i: usize, nn: usize, p: usize, q: usize, g: &Mat) -> PoleSum {
        let ks = &self.derivs[i];
        let mut acc = g.get(p, q).clone();
        for l in 0..=nn {
            acc.axpy(self.y_at(i, nn - l) / factorial(l as u32), ks[l].get(p, q));
        }
        acc.axpy(C64::new(-1.0 / factorial(nn as u32), 0.0), ks[nn].get(p + 1, q));
        acc
    }

    /// Extend the jet table to `depth` (no-op if already deep enough).
    pub fn extend(&mut self, leading: &LeadingData, depth: usize) -> Result<()> {
        if depth <= self.depth {
            return Ok(());
        }
        if self.y_laurent.first().is_some_and(|v| v.len() < depth + 2) {
            self.fill_laurent(leading, depth);
        }
        let n = self.n();
        let last = self.d2 - 1;
        for nn in self.depth..depth {
            for i in 0..n {
                let g = self.g_coeff(i, nn);
                let an = g.get(0, 0).anchors().clone();
                let mut next = PoleSumMatrix::zero(&an, self.d2);
                let lead = C64::new(-factorial(nn as u32 + 1), 0.0) / (self.c * nn as f64);
                for p in 0..last {
                    for q in 0..self.d2 {
                        next.set(p, q, self.first_rows_rhs(i, nn, p, q, &g).scale(lead).normalized());
                    }
                }
                if nn >= 2 {
                    let fact = factorial(nn as u32 + 1);
                    for q in 0..self.d2 {
                        let mut r = g.get(last, q).scale(C64::new(-1.0, 0.0));
                        for k in 0..last {
                            r.axpy(self.w[i][k] / fact, next.get(k, q));
                        }
                        for l in 0..=nn {
                            let wl = 1.0 / factorial(l as u32);
                            r.axpy(-self.y_at(i, nn - l) * wl, self.derivs[i][l].get(last, q));
                            for k in 0..self.d2 {
                                r.axpy(self.u_at(i, nn - l, k) / self.tt * wl, self.derivs[i][l].get(k, q));
                            }
                        }
                        let coef = C64::new(fact, 0.0) / (self.c * (nn as f64 - 1.0));
                        next.set(last, q, r.scale(coef).normalized());
                    }
                }
                self.derivs[i].push(next);
            }
            self.depth = nn + 1;
        }
        Ok(())
    }

    /// Residual matrix of the order-`n` jet equation at root `i`; needs `n < depth`.
    pub fn jet_residual(&self, i: usize, nn: usize) -> Result<Mat> {
        if nn >= self.depth {
            return Err(Error::Insufficient(format!("jet equation of order {nn} needs kernel depth {}", nn + 1)));
        }
        let last = self.d2 - 1;
        let ks = &self.derivs[i];
        let g = self.g_coeff(i, nn);
        let mut out = zero_like(&g);
        let fact = factorial(nn as u32 + 1);
        for p in 0..self.d2 {
            for q in 0..self.d2 {
                let mut e = g.get(p, q).scale(C64::new(-1.0, 0.0));
                e.axpy(-self.c * (nn as f64) / fact, ks[nn + 1].get(p, q));
                for l in 0..=nn {
                    let wl = 1.0 / factorial(l as u32);
                    e.axpy(-self.y_at(i, nn - l) * wl, ks[l].get(p, q));
                }
                if p < last {
                    e.axpy(C64::new(1.0 / factorial(nn as u32), 0.0), ks[nn].get(p + 1, q));
                } else {
                    for k in 0..self.d2 {
                        e.axpy(self.w[i][k] / fact, ks[nn + 1].get(k, q));
                        for l in 0..=nn {
                            e.axpy(self.u_at(i, nn - l, k) / self.tt / factorial(l as u32), ks[l].get(k, q));
                        }
                    }
                }
                out.set(p, q, e.normalized());
            }
        }
        Ok(out)
    }

    /// Largest jet-equation residual over all roots for orders `0..depth`.
    pub fn verify_g(&self) -> Result<f64> {
        self.verify_g_orders(0..self.depth)
    }

    pub fn verify_g_orders(&self, orders: std::ops::Range<usize>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for nn in orders.clone() {
                worst = worst.max(self.jet_residual(i, nn)?.max_abs_coeff());
            }
        }
        Ok(worst)
    }

    /// Largest entry of the rows that vanish in our gauge: `K′` rows `p < d₂−1` and the
    /// last row of `K″`.
    pub fn gauge_defect(&self) -> f64 {
        let last = self.d2 - 1;
        let mut worst: f64 = 0.0;
        for ks in &self.derivs {
            for p in 0..self.d2 {
                for q in 0..self.d2 {
                    if p < last {
                        worst = worst.max(ks[1].get(p, q).max_abs_coeff());
                    }
                    if p == last && ks.len() > 2 {
                        worst = worst.max(ks[2].get(p, q).max_abs_coeff());
                    }
                }
            }
        }
        worst
    }

    /// Largest coefficient of a pole other than order two in the last column of `K`.
    pub fn last_column_defect(&self) -> f64 {
        let last = self.d2 - 1;
        let mut worst: f64 = 0.0;
        for ks in &self.derivs {
            for p in 0..self.d2 {
                let f = ks[0].get(p, last);
                worst = worst.max(f.poly().max_abs_coeff());
                for (_, a, c) in f.terms() {
                    if a != 2 {
                        worst = worst.max(c.norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest pole order in `K⁽ᵐ⁾` over all entries and roots.
    pub fn max_pole_order(&self, m: usize) -> usize {
        self.derivs
            .iter()
            .map(|ks| {
                let k = &ks[m];
                (0..self.d2)
                    .flat_map(|p| (0..self.d2).map(move |q| (p, q)))
                    .map(|(p, q)| k.get(p, q).max_order_all())
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> Value {
        let mat = |m: &Mat| -> Value {
            (0..m.dim()).map(|p| (0..m.dim()).map(|q| m.get(p, q).to_json()).collect::<Vec<_>>()).collect::<Vec<_>>().into()
        };
        json!({
            "depth": self.depth,
            "K": self.derivs.iter().map(|ks| ks.iter().map(mat).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "A": self.a.iter().map(mat).collect::<Vec<_>>(),
        })
    }
}

impl Blocks {
    pub fn to_json(&self) -> Value {
        json!({ "B": self.b.iter().map(cmat_json).collect::<Vec<_>>(), "M": cmat_json(&self.m) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{leading_data, solve_bethe};
    use crate::linalg::re;

    fn ma() -> (ModelSpec, BetheSolution, LeadingData) {
        let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(1.0)], 1.0, 1)
            .unwrap()
            .with_selection(&[1]);
        let sol = solve_bethe(&m).unwrap();
        let ld = leading_data(&sol, &m);
        (m, sol, ld)
    }

    fn close(f: &PoleSum, terms: &[(usize, usize, f64)]) {
        let want = PoleSum::from_terms(f.anchors(), crate::ratfun::Poly::zero(), &terms.iter().map(|&(i, a, c)| (i, a, re(c))).collect::<Vec<_>>());
        assert!(f.approx_eq(&want, 1e-12), "got {f:?}");
    }

    #[test]
    fn ma_blocks() {
        let (m, sol, _) = ma();
        let bl = build_blocks(&sol, &m);
        assert!((bl.b[0][(0, 0)]).norm() < 1e-14);
        assert!((bl.b[1][(0, 0)] - re(-1.0)).norm() < 1e-14);
        let want = CMat::from_row_slice(2, 2, &[re(-1.0), re(1.0), re(0.0), re(-1.0)]);
        assert!(max_abs(&(bl.m - want)) < 1e-14);
        let cs = compat_blocks(&sol, &m);
        assert!((cs[0][(0, 0)] - re(1.0)).norm() < 1e-14);
        assert!((cs[1][(0, 0)] - re(-1.0)).norm() < 1e-14);
        assert!(compat_residual(&sol, &m) < 1e-14);
    }

    #[test]
    fn ma_kernel_values() {
        let (m, sol, ld) = ma();
        let kt = KernelTable::build(&sol, &m, &ld, 3).unwrap();
        let k = &kt.derivs[0];
        close(k[0].get(0, 1), &[(0, 2, -1.0)]);
        close(k[0].get(1, 1), &[(0, 2, -1.0)]);
        close(k[0].get(0, 0), &[(0, 1, -1.0), (0, 2, -1.0)]);
        close(k[0].get(1, 0), &[(0, 2, -1.0)]);
        close(k[1].get(1, 0), &[(0, 1, 1.0)]);
        close(k[1].get(1, 1), &[(0, 1, 1.0)]);
        close(k[2].get(0, 1), &[(0, 1, 2.0), (0, 2, 2.0)]);
        assert!(kt.gauge_defect() < 1e-14);
        assert!(kt.last_column_defect() < 1e-14);
        assert!(kt.verify_g().unwrap() < 1e-12);
    }
}
