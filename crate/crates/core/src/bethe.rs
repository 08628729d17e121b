//! Bethe roots of the polynomial wave function and the leading-order data built on them.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{cjson, cmat_json, cvec_json, parse_cmat, parse_cvec};
use crate::linalg::{max_abs_slice, CMat, CVec, Lu, C64};
use crate::model::{BetheMode, ModelSpec};
use crate::ratfun::{Anchors, BiPoly, PoleSum, Poly, CLUSTER_TOL};

/// One accepted point of the temperature continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyPoint {
    /// Fraction of the target temperature.
    pub lambda: f64,
    /// Imaginary bend of the temperature path; zero for the real ramp.
    pub detour: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Converged Bethe roots with the matrix B and the coefficient table u.
#[derive(Clone, Debug)]
pub struct BetheSolution {
    pub s: Vec<C64>,
    pub b: CMat,
    /// `u[k][i]` for `k = 0..=d₂`.
    pub u: Vec<Vec<C64>>,
    pub residual: f64,
    pub trace: Vec<HomotopyPoint>,
    pub newton_iterations: usize,
    pub anchors: Anchors,
}

/// `ψ`, `Y`, `W₁⁽⁰⁾`, `U_{0,k}⁽⁰⁾` and `P₀⁽⁰⁾` of a Bethe solution.
#[derive(Clone, Debug)]
pub struct LeadingData {
    pub psi: Poly,
    pub y: PoleSum,
    pub w1: PoleSum,
    /// `u0[k]` for `k = 0..=d₂`.
    pub u0: Vec<PoleSum>,
    pub p0: BiPoly,
}

/// Characteristic size of a root set, used to scale tolerances and steps.
pub fn root_scale(s: &[C64]) -> f64 {
    s.iter().fold(1.0_f64, |m, z| m.max(z.norm()))
}

/// All roots of `V₂′(V₁′(x)) − x`, sorted by (real, imag).
pub fn decoupled_roots(model: &ModelSpec) -> Result<Vec<C64>> {
    let f = &model.v2p.compose(&model.v1p) - &Poly::from_real(&[0.0, 1.0]);
    let scale = model.v2p.compose(&model.v1p).max_abs_coeff().max(1.0);
    if f.max_abs_coeff() <= 1e-14 * scale {
        return Err(Error::InvalidModel("degenerate decoupled equation: V2'(V1'(x)) - x vanishes identically".into()));
    }
    let mut r = f.roots()?;
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(r)
}

/// The matrix B(s) at temperature `temperature`.
pub fn b_matrix(s: &[C64], model: &ModelSpec, temperature: f64) -> CMat {
    b_matrix_at(s, model, C64::new(temperature, 0.0))
}

/// The matrix B(s) at a complex temperature, as used along a continuation detour.
fn b_matrix_at(s: &[C64], model: &ModelSpec, temperature: C64) -> CMat {
    let n = s.len();
    let c = temperature / model.n as f64;
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            let mut acc = model.v1p.eval(s[i]);
            for k in 0..n {
                if k != i {
                    acc -= c / (s[i] - s[k]);
                }
            }
            acc
        } else {
            -c / (s[i] - s[j])
        }
    })
}

/// `V₂′(B)·e` by Horner's scheme.
pub fn v2p_of_b_e(b: &CMat, model: &ModelSpec) -> CVec {
    let n = b.nrows();
    let e = CVec::from_element(n, C64::new(1.0, 0.0));
    let d2 = model.d2();
    let mut v = &e * model.tt(d2);
    for k in (0..d2).rev() {
        v = b * v + &e * model.tt(k);
    }
    v
}

/// `F(s) = V₂′(B(s))e − S e` at the given temperature.
pub fn bethe_map(s: &[C64], model: &ModelSpec, temperature: f64) -> CVec {
    bethe_map_at(s, model, C64::new(temperature, 0.0))
}

fn bethe_map_at(s: &[C64], model: &ModelSpec, temperature: C64) -> CVec {
    let b = b_matrix_at(s, model, temperature);
    let mut f = v2p_of_b_e(&b, model);
    for (fi, si) in f.iter_mut().zip(s) {
        *fi -= si;
    }
    f
}

fn inf_norm(v: &CVec) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn min_separation(s: &[C64]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..s.len() {
        for j in 0..i {
            d = d.min((s[i] - s[j]).norm());
        }
    }
    d
}

/// Newton iteration with a finite-difference Jacobian and residual backtracking.
fn newton(s0: &[C64], model: &ModelSpec, temperature: C64, tol: f64, max_iter: usize) -> Result<(Vec<C64>, f64, usize)> {
    let n = s0.len();
    let mut s = s0.to_vec();
    let mut f = bethe_map_at(&s, model, temperature);
    let mut r = inf_norm(&f);
    let mut it = 0;
    while r > tol {
        if it >= max_iter {
            return Err(Error::NonConvergence(format!("Newton stalled at residual {r:e} after {it} iterations")));
        }
        it += 1;
        let h = 1e-7 * root_scale(&s);
        let mut jac = CMat::zeros(n, n);
        for j in 0..n {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[j] += h;
            sm[j] -= h;
            let col = (bethe_map_at(&sp, model, temperature) - bethe_map_at(&sm, model, temperature)) / C64::new(2.0 * h, 0.0);
            jac.set_column(j, &col);
        }
        let dx = Lu::new(&jac, "Bethe Jacobian")?.solve_vec(&f)?;
        let sep_floor = CLUSTER_TOL * root_scale(&s);
        let mut lam = 1.0;
        let mut accepted = false;
        while lam >= 1.0 / 1024.0 {
            let cand: Vec<C64> = s.iter().zip(dx.iter()).map(|(a, d)| a - d * lam).collect();
            if min_separation(&cand) > sep_floor {
                let fc = bethe_map_at(&cand, model, temperature);
                let rc = inf_norm(&fc);
                if rc.is_finite() && rc < r {
                    s = cand;
                    f = fc;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            if r <= tol * 100.0 && it > 1 {
                break;
            }
            return Err(Error::NonConvergence(format!("Newton line search failed at residual {r:e}")));
        }
    }
    if r > tol {
        return Err(Error::NonConvergence(format!("Newton residual {r:e} above tolerance {tol:e}")));
    }
    Ok((s, r, it))
}

/// Imaginary bends tried, in order, when continuation along real temperatures fails.
const DETOURS: [f64; 2] = [0.5, -0.5];

/// Temperature at continuation time `lam` on a path bent by `gamma` into the complex plane.
fn path_temperature(model: &ModelSpec, lam: f64, gamma: f64) -> C64 {
    C64::new(lam * model.temperature, 0.0) * C64::new(1.0, gamma * (1.0 - lam))
}

/// Continuation from the decoupled roots `start` at T = 0 to the target temperature.
fn follow_path(start: &[C64], model: &ModelSpec, gamma: f64) -> Result<(Vec<C64>, Vec<HomotopyPoint>, usize)> {
    let cfg = &model.bethe;
    let base = 1.0 / cfg.steps.max(1) as f64;
    let mut lam = 0.0;
    let mut dlam = base;
    let mut s = start.to_vec();
    let mut prev: Option<(f64, Vec<C64>)> = None;
    let mut halvings = 0;
    let mut trace = vec![];
    let mut total_iter = 0;
    while lam < 1.0 {
        let next = (lam + dlam).min(1.0);
        let pred: Vec<C64> = match &prev {
            Some((lp, sp)) if lam > *lp => {
                let w = (next - lam) / (lam - lp);
                s.iter().zip(sp).map(|(a, b)| a + (a - b) * w).collect()
            }
            _ => s.clone(),
        };
        let temp = path_temperature(model, next, gamma);
        match newton(&pred, model, temp, cfg.tol, cfg.max_iter) {
            Ok((sn, r, it)) => {
                if min_separation(&sn) <= CLUSTER_TOL * root_scale(&sn) {
                    return Err(Error::NonConvergence(format!("root collision during continuation at T = {temp}")));
                }
                total_iter += it;
                trace.push(HomotopyPoint { lambda: next, detour: gamma, iterations: it, residual: r });
                prev = Some((lam, std::mem::replace(&mut s, sn)));
                lam = next;
                dlam = (dlam * 2.0).min(base);
            }
            Err(e) => {
                halvings += 1;
                if halvings > cfg.max_halvings {
                    return Err(Error::NonConvergence(format!("homotopy failed near T = {temp}: {e}")));
                }
                dlam *= 0.5;
            }
        }
    }
    Ok((s, trace, total_iter))
}

/// Solve the Bethe system according to the model's solver configuration.
pub fn solve_bethe(model: &ModelSpec) -> Result<BetheSolution> {
    let cfg = &model.bethe;
    let target = model.temperature;
    let mut trace = vec![];
    let mut total_iter = 0;
    let s = match &cfg.mode {
        BetheMode::Direct { initial_guesses } => {
            if initial_guesses.len() != model.n {
                return Err(Error::InvalidModel("initial_guesses length differs from N".into()));
            }
            let (s, r, it) = newton(initial_guesses, model, C64::new(target, 0.0), cfg.tol, cfg.max_iter)?;
            total_iter += it;
            trace.push(HomotopyPoint { lambda: 1.0, detour: 0.0, iterations: it, residual: r });
            s
        }
        BetheMode::Homotopy { root_selection } => {
            let sel = root_selection.as_ref().ok_or_else(|| {
                Error::InvalidModel("homotopy mode requires an explicit root_selection (branches are never chosen automatically)".into())
            })?;
            if sel.len() != model.n {
                return Err(Error::InvalidModel("root_selection length differs from N".into()));
            }
            let roots = decoupled_roots(model)?;
            let mut seen = std::collections::BTreeSet::new();
            for &k in sel {
                if k >= roots.len() {
                    return Err(Error::InvalidModel(format!("root_selection index {k} out of range (0..{})", roots.len())));
                }
                if !seen.insert(k) {
                    return Err(Error::InvalidModel(format!("root_selection index {k} repeated")));
                }
            }
            let start: Vec<C64> = sel.iter().map(|&k| roots[k]).collect();
            Anchors::with_default_tol(start.clone())
                .map_err(|_| Error::InvalidModel("selected decoupled roots coincide".into()))?;
            let mut outcome = follow_path(&start, model, 0.0);
            for gamma in DETOURS {
                if outcome.is_ok() {
                    break;
                }
                outcome = follow_path(&start, model, gamma);
            }
            let (s, path_trace, it) = outcome?;
            total_iter += it;
            trace = path_trace;
            s
        }
    };
    let mut sol = BetheSolution::from_roots(model, s)?;
    sol.trace = trace;
    sol.newton_iterations = total_iter;
    compute_u(&sol, model)?;
    Ok(sol)
}

impl BetheSolution {
    /// Build B and u from given roots without requiring them to solve the system.
    pub fn from_roots(model: &ModelSpec, s: Vec<C64>) -> Result<Self> {
        let anchors = Anchors::with_default_tol(s.clone())?;
        let b = b_matrix(&s, model, model.temperature);
        let residual = inf_norm(&bethe_map(&s, model, model.temperature));
        let u = u_table(&b, model);
        Ok(BetheSolution { s, b, u, residual, trace: vec![], newton_iterations: 0, anchors })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn scale(&self) -> f64 {
        root_scale(&self.s)
    }

    /// `u_{k,i}` (zero for `k` outside `0..=d₂`).
    pub fn u(&self, k: usize, i: usize) -> C64 {
        self.u.get(k).map_or(C64::new(0.0, 0.0), |row| row[i])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "roots": cvec_json(&self.s),
            "B": cmat_json(&self.b),
            "u": self.u.iter().map(|r| cvec_json(r)).collect::<Vec<_>>(),
            "residual": self.residual,
            "newton_iterations": self.newton_iterations,
            "homotopy_trace": self.trace.iter().map(|p| json!({
                "lambda": p.lambda, "detour": p.detour, "iterations": p.iterations, "residual": p.residual
            })).collect::<Vec<_>>(),
        })
    }

    /// Rebuild from a cached record; B and u are recomputed from the roots and
    /// compared with the stored values.
    pub fn from_json(v: &Value, model: &ModelSpec) -> Result<Self> {
        let s = parse_cvec(v.get("roots").ok_or_else(|| Error::InvalidModel("cache lacks roots".into()))?)?;
        if s.len() != model.n {
            return Err(Error::InvalidModel("cached root count differs from N".into()));
        }
        let mut sol = BetheSolution::from_roots(model, s)?;
        if let Some(b) = v.get("B") {
            let b = parse_cmat(b)?;
            if b.shape() != sol.b.shape() || crate::linalg::max_abs(&(b - &sol.b)) > 1e-12 * sol.scale() {
                return Err(Error::InvalidModel("cached B disagrees with the roots".into()));
            }
        }
        sol.newton_iterations = v.get("newton_iterations").and_then(|x| x.as_u64()).unwrap_or(0) as usize;
        Ok(sol)
    }
}

/// `u⃗_k = (T/N)Σ_{p=0}^{d₂−k−1} t̃_{k+p+1} Bᵖ e⃗` for `k = 0..=d₂`.
pub fn u_table(b: &CMat, model: &ModelSpec) -> Vec<Vec<C64>> {
    let n = b.nrows();
    let d2 = model.d2();
    let c = model.c();
    let e = CVec::from_element(n, C64::new(1.0, 0.0));
    let mut powers = vec![e.clone()];
    for p in 1..d2 {
        let next = b * &powers[p - 1];
        powers.push(next);
    }
    (0..=d2)
        .map(|k| {
            let mut v = CVec::zeros(n);
            for p in 0..d2.saturating_sub(k) {
                v += &powers[p] * model.tt(k + p + 1);
            }
            (v * c).iter().copied().collect()
        })
        .collect()
}

/// Residuals of the descending recursion, the closure relation and the
/// componentwise recursion satisfied by the u table.
#[derive(Clone, Debug, PartialEq)]
pub struct UChecks {
    pub descending: f64,
    pub closure: f64,
    pub componentwise: f64,
}

pub fn u_checks(sol: &BetheSolution, model: &ModelSpec) -> UChecks {
    let n = sol.n();
    let d2 = model.d2();
    let c = model.c();
    let col = |k: usize| CVec::from_vec(sol.u[k].clone());
    let e = CVec::from_element(n, C64::new(1.0, 0.0));
    let mut descending: f64 = 0.0;
    for k in 1..=d2 {
        let lhs = col(k - 1);
        let rhs = &sol.b * col(k) + &e * (c * model.tt(k));
        descending = descending.max(inf_norm(&(lhs - rhs)));
    }
    let s = CVec::from_vec(sol.s.clone());
    let closure_v = -(&sol.b * col(0)) - (&e * model.tt(0) - &s) * c;
    let closure = inf_norm(&closure_v);
    let mut componentwise: f64 = 0.0;
    for k in 0..=d2 {
        for i in 0..n {
            let prev = if k == 0 { C64::new(0.0, 0.0) } else { sol.u[k - 1][i] };
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    sum += sol.u[k][j] / (sol.s[i] - sol.s[j]);
                }
            }
            let delta = if k == 0 { sol.s[i] } else { C64::new(0.0, 0.0) };
            let r = prev - sol.b[(i, i)] * sol.u[k][i] + c * (sum - model.tt(k) + delta);
            componentwise = componentwise.max(r.norm());
        }
    }
    UChecks { descending, closure, componentwise }
}

/// Assert the u-table identities at a converged solution and return the table.
pub fn compute_u(sol: &BetheSolution, model: &ModelSpec) -> Result<Vec<Vec<C64>>> {
    let chk = u_checks(sol, model);
    let tol = 1e-9 * model.precision * sol.scale().powi(model.d2().max(1) as i32);
    let worst = chk.descending.max(chk.closure).max(chk.componentwise);
    if worst > tol {
        return Err(Error::verification("u-table closure", worst, tol));
    }
    Ok(sol.u.clone())
}

/// `e⃗ᵗ S^a B^q e⃗` moments used by the divided-difference form of P₀⁽⁰⁾.
fn mixed_moments(sol: &BetheSolution, amax: usize, qmax: usize) -> Vec<Vec<C64>> {
    let n = sol.n();
    let mut bq = vec![CVec::from_element(n, C64::new(1.0, 0.0))];
    for q in 1..=qmax {
        let next = &sol.b * &bq[q - 1];
        bq.push(next);
    }
    (0..=amax)
        .map(|a| {
            (0..=qmax)
                .map(|q| (0..n).map(|i| crate::linalg::cpowi(sol.s[i], a as i32) * bq[q][i]).sum())
                .collect()
        })
        .collect()
}

/// Leading-order functions of a Bethe solution.
pub fn leading_data(sol: &BetheSolution, model: &ModelSpec) -> LeadingData {
    let an = &sol.anchors;
    let n = sol.n();
    let c = model.c();
    let d1 = model.d1();
    let d2 = model.d2();
    let psi = sol
        .s
        .iter()
        .fold(Poly::constant(C64::new(1.0, 0.0)), |acc, si| &acc * &Poly::new(vec![-si, C64::new(1.0, 0.0)]));
    let mut w1 = PoleSum::zero(an);
    for i in 0..n {
        w1.add_pole(i, 1, c);
    }
    let y = PoleSum::from_poly(an, model.v1p.clone()).sub(&w1).expect("same anchors");
    let u0: Vec<PoleSum> = (0..=d2)
        .map(|k| {
            let mut p = vec![-model.tt(k)];
            if k == 0 {
                p.push(C64::new(1.0, 0.0));
            }
            let mut f = PoleSum::from_poly(an, Poly::new(p));
            for i in 0..n {
                f.add_pole(i, 1, sol.u[k][i]);
            }
            f.normalized()
        })
        .collect();
    let mm = mixed_moments(sol, d1, d2);
    let mut by_y: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); d1.max(1)]; d2.max(1)];
    for k in 1..=d1 {
        for p in 0..k {
            for kk in 1..=d2 {
                for pp in 0..kk {
                    by_y[pp][p] += c * model.t(k) * model.tt(kk) * mm[k - 1 - p][kk - 1 - pp];
                }
            }
        }
    }
    let p0 = BiPoly::new(by_y.into_iter().map(Poly::new).collect());
    LeadingData { psi, y, w1, u0, p0 }
}

impl LeadingData {
    pub fn to_json(&self) -> Value {
        json!({
            "psi": cvec_json(self.psi.coeffs()),
            "W1_0": self.w1.to_json(),
            "Y": self.y.to_json(),
            "U0_0": self.u0.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
            "P0_0": self.p0.by_y.iter().map(|p| cvec_json(p.coeffs())).collect::<Vec<_>>(),
        })
    }
}

/// Power sums `(T/N)Σ_i s_i^k`, the large-x moments of W₁⁽⁰⁾.
pub fn w1_power_sums(sol: &BetheSolution, model: &ModelSpec, kmax: usize) -> Vec<C64> {
    (0..=kmax)
        .map(|k| model.c() * sol.s.iter().map(|z| crate::linalg::cpowi(*z, k as i32)).sum::<C64>())
        .collect()
}

/// Maximum magnitude among the residual components, as a plain number.
pub fn residual_of(s: &[C64], model: &ModelSpec) -> f64 {
    max_abs_slice(bethe_map(s, model, model.temperature).as_slice())
}

pub fn complex_json(z: C64) -> Value {
    cjson(z)
}
