//! The Yang–Yang functional: extremal frame, action, Hessian, free energies and the
//! variational correlators.

use serde_json::{json, Value};

use crate::bethe::BetheSolution;
use crate::error::{Error, Result};
use crate::json::{cjson, cvec_json};
use crate::linalg::{eigen_sorted, max_abs, CMat, CVec, Lu, C64};
use crate::model::ModelSpec;
use crate::ratfun::{Basis, PoleTensor, CLUSTER_TOL};

/// Point `R = (s, s̃, A, u)` in the variable order of the Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Variables {
    pub s: Vec<C64>,
    pub st: Vec<C64>,
    pub a: CMat,
    pub u: Vec<C64>,
}

impl Variables {
    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn dim(&self) -> usize {
        let n = self.n();
        3 * n + n * n
    }

    pub fn to_vec(&self) -> Vec<C64> {
        let n = self.n();
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.s);
        v.extend_from_slice(&self.st);
        for r in 0..n {
            for c in 0..n {
                v.push(self.a[(r, c)]);
            }
        }
        v.extend_from_slice(&self.u);
        v
    }

    pub fn from_vec(n: usize, v: &[C64]) -> Self {
        Variables {
            s: v[..n].to_vec(),
            st: v[n..2 * n].to_vec(),
            a: CMat::from_fn(n, n, |r, c| v[2 * n + r * n + c]),
            u: v[2 * n + n * n..3 * n + n * n].to_vec(),
        }
    }

    fn shifted(&self, step: &[(usize, C64)]) -> Self {
        let mut v = self.to_vec();
        for &(k, h) in step {
            v[k] += h;
        }
        Variables::from_vec(self.n(), &v)
    }
}

/// Extremum of the functional associated with a Bethe solution.
#[derive(Clone, Debug)]
pub struct ExtremalFrame {
    pub vars: Variables,
    pub h: CMat,
    pub action: C64,
    /// `‖BᵗA − A·diag(s̃)‖∞`.
    pub eigen_residual: f64,
    /// Residual of the linear system determining A, including `eᵗA = eᵗ`.
    pub a_system_residual: f64,
    /// Largest component of the analytic gradient at the frame.
    pub gradient_residual: f64,
    /// Blockwise maximum relative deviation of the analytic Hessian from finite differences.
    pub hessian_fd_error: f64,
}

fn ln_vandermonde(z: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            acc += (z[j] - z[i]).ln();
        }
    }
    acc
}

/// Log terms evaluated relative to a reference point, so nearby points stay on one branch.
fn ln_vandermonde_rel(z: &[C64], z0: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let d0 = z0[j] - z0[i];
            acc += d0.ln() + ((z[j] - z[i]) / d0).ln();
        }
    }
    acc
}

fn ln_det_rel(a: &CMat, a0: &CMat) -> Result<C64> {
    let lu0 = Lu::new(a0, "reference A")?;
    let ratio = lu0.solve_mat(a)?;
    Ok(lu0.ln_det() + Lu::new(&ratio, "A ratio")?.ln_det())
}

/// `𝒮̂(R)`; with a reference point the logarithms are continued from it.
pub fn action(r: &Variables, model: &ModelSpec, reference: Option<&Variables>) -> Result<C64> {
    let n = r.n();
    let c = model.c();
    let ainv = Lu::new(&r.a, "A")?.inverse()?;
    let mut val = C64::new(0.0, 0.0);
    for i in 0..n {
        val += model.v1.eval(r.s[i]) + model.v2.eval(r.st[i]);
    }
    let sd = CMat::from_diagonal(&CVec::from_vec(r.s.clone()));
    let std = CMat::from_diagonal(&CVec::from_vec(r.st.clone()));
    val -= (&sd * &r.a * &std * &ainv).trace();
    let (lns, lnst, lna) = match reference {
        Some(r0) => (ln_vandermonde_rel(&r.s, &r0.s), ln_vandermonde_rel(&r.st, &r0.st), ln_det_rel(&r.a, &r0.a)?),
        None => (ln_vandermonde(&r.s), ln_vandermonde(&r.st), Lu::new(&r.a, "A")?.ln_det()),
    };
    val += c * (lna - lns - lnst);
    let ae = &r.a * CVec::from_element(n, C64::new(1.0, 0.0));
    for i in 0..n {
        val -= c * r.u[i] * (ae[i] - C64::new(1.0, 0.0));
    }
    Ok(val)
}

/// Analytic first derivatives of `𝒮̂` in the Hessian variable order.
pub fn gradient(r: &Variables, model: &ModelSpec) -> Result<Vec<C64>> {
    let n = r.n();
    let c = model.c();
    let p = Lu::new(&r.a, "A")?.inverse()?;
    let sd = CMat::from_diagonal(&CVec::from_vec(r.s.clone()));
    let std = CMat::from_diagonal(&CVec::from_vec(r.st.clone()));
    let asp = &r.a * &std * &p;
    let psa = &p * &sd * &r.a;
    let stps = &std * &p * &sd;
    let m2 = &p * &sd * &r.a * &std * &p;
    let mut g = vec![C64::new(0.0, 0.0); r.dim()];
    for i in 0..n {
        let mut acc = model.v1p.eval(r.s[i]) - asp[(i, i)];
        let mut acct = model.v2p.eval(r.st[i]) - psa[(i, i)];
        for j in 0..n {
            if j != i {
                acc -= c / (r.s[i] - r.s[j]);
                acct -= c / (r.st[i] - r.st[j]);
            }
        }
        g[i] = acc;
        g[n + i] = acct;
    }
    for a in 0..n {
        for b in 0..n {
            g[2 * n + a * n + b] = -stps[(b, a)] + m2[(b, a)] + c * p[(b, a)] - c * r.u[a];
        }
    }
    let ae = &r.a * CVec::from_element(n, C64::new(1.0, 0.0));
    for i in 0..n {
        g[2 * n + n * n + i] = -c * (ae[i] - C64::new(1.0, 0.0));
    }
    Ok(g)
}

/// Analytic second derivatives of `𝒮̂` at an arbitrary point.
pub fn hessian_analytic(r: &Variables, model: &ModelSpec) -> Result<CMat> {
    let n = r.n();
    let c = model.c();
    let d = r.dim();
    let p = Lu::new(&r.a, "A")?.inverse()?;
    let sd = CMat::from_diagonal(&CVec::from_vec(r.s.clone()));
    let std = CMat::from_diagonal(&CVec::from_vec(r.st.clone()));
    let ps = &p * &sd;
    let stp = &std * &p;
    let asp = &r.a * &std * &p;
    let psa = &p * &sd * &r.a;
    let m2 = &ps * &r.a * &stp;
    let ai = |r_: usize, s_: usize| 2 * n + r_ * n + s_;
    let ui = |i: usize| 2 * n + n * n + i;
    let mut h = CMat::zeros(d, d);
    let set = |h: &mut CMat, i: usize, j: usize, v: C64| {
        h[(i, j)] = v;
        h[(j, i)] = v;
    };
    for i in 0..n {
        let mut diag = model.v1p.derivative().eval(r.s[i]);
        let mut diagt = model.v2p.derivative().eval(r.st[i]);
        for j in 0..n {
            if j != i {
                let e = c / ((r.s[i] - r.s[j]) * (r.s[i] - r.s[j]));
                let et = c / ((r.st[i] - r.st[j]) * (r.st[i] - r.st[j]));
                diag += e;
                diagt += et;
                set(&mut h, i, j, -e);
                set(&mut h, n + i, n + j, -et);
            }
        }
        set(&mut h, i, i, diag);
        set(&mut h, n + i, n + i, diagt);
        for k in 0..n {
            set(&mut h, i, n + k, -r.a[(i, k)] * p[(k, i)]);
        }
    }
    for rr in 0..n {
        for ss in 0..n {
            let col = ai(rr, ss);
            for i in 0..n {
                let dri = if rr == i { stp[(ss, i)] } else { C64::new(0.0, 0.0) };
                set(&mut h, i, col, -(dri - asp[(i, rr)] * p[(ss, i)]));
                let dsk = if ss == i { ps[(i, rr)] } else { C64::new(0.0, 0.0) };
                set(&mut h, n + i, col, -(dsk - p[(i, rr)] * psa[(ss, i)]));
            }
            set(&mut h, ui(rr), col, -c);
            for a in 0..n {
                for b in 0..n {
                    let v = stp[(ss, a)] * ps[(b, rr)] + ps[(ss, a)] * stp[(b, rr)]
                        - p[(ss, a)] * m2[(b, rr)]
                        - m2[(ss, a)] * p[(b, rr)]
                        - c * p[(ss, a)] * p[(b, rr)];
                    h[(ai(a, b), col)] = v;
                }
            }
        }
    }
    Ok(h)
}

/// Central finite-difference Hessian of `𝒮̂` with step `step`.
pub fn hessian_fd(r: &Variables, model: &ModelSpec, step: f64) -> Result<CMat> {
    let d = r.dim();
    let h = C64::new(step, 0.0);
    let f = |shift: &[(usize, C64)]| action(&r.shifted(shift), model, Some(r));
    let f0 = f(&[])?;
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        let fp = f(&[(i, h)])?;
        let fm = f(&[(i, -h)])?;
        out[(i, i)] = (fp - f0 * 2.0 + fm) / (h * h);
        for j in 0..i {
            let fpp = f(&[(i, h), (j, h)])?;
            let fpm = f(&[(i, h), (j, -h)])?;
            let fmp = f(&[(i, -h), (j, h)])?;
            let fmm = f(&[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (h * h * 4.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Blockwise maximum of `|H_an − H_fd| / max(1, max|block|)` over the (s, s̃, A, u) blocks.
pub fn hessian_block_error(an: &CMat, fd: &CMat, n: usize) -> f64 {
    let bounds = [0, n, 2 * n, 2 * n + n * n, 3 * n + n * n];
    let mut worst: f64 = 0.0;
    for bi in 0..4 {
        for bj in 0..4 {
            let (r0, r1, c0, c1) = (bounds[bi], bounds[bi + 1], bounds[bj], bounds[bj + 1]);
            let mut scale: f64 = 1.0;
            let mut err: f64 = 0.0;
            for i in r0..r1 {
                for j in c0..c1 {
                    scale = scale.max(an[(i, j)].norm());
                    err = err.max((an[(i, j)] - fd[(i, j)]).norm());
                }
            }
            worst = worst.max(err / scale);
        }
    }
    worst
}

pub const HESSIAN_FD_TOL: f64 = 1e-5;

/// Extremal frame of a Bethe solution with a validated Hessian.
pub fn build_frame(sol: &BetheSolution, model: &ModelSpec) -> Result<ExtremalFrame> {
    let frame = build_frame_unvalidated(sol, model)?;
    if frame.hessian_fd_error > HESSIAN_FD_TOL * model.precision {
        return Err(Error::verification("Hessian finite-difference validation", frame.hessian_fd_error, HESSIAN_FD_TOL));
    }
    Ok(frame)
}

/// Extremal frame with the finite-difference Hessian error recorded but not enforced.
pub fn build_frame_unvalidated(sol: &BetheSolution, model: &ModelSpec) -> Result<ExtremalFrame> {
    let n = sol.n();
    let c = model.c();
    let bt = sol.b.transpose();
    let (st, v) = eigen_sorted(&bt)?;
    let scale = sol.scale();
    for i in 0..n {
        for j in 0..i {
            if (st[i] - st[j]).norm() <= CLUSTER_TOL * scale {
                return Err(Error::Singular(format!("B has a repeated eigenvalue near {}", st[i])));
            }
        }
    }
    let e = CVec::from_element(n, C64::new(1.0, 0.0));
    let coef = Lu::new(&v, "eigenvector matrix of B")?.solve_vec(&e)?;
    let a = &v * CMat::from_diagonal(&coef);
    let std = CMat::from_diagonal(&CVec::from_vec(st.clone()));
    let eigen_residual = max_abs(&(&bt * &a - &a * &std));
    let mut a_sys: f64 = (e.transpose() * &a - e.transpose()).iter().fold(0.0, |m, z| m.max(z.norm()));
    for i in 0..n {
        for j in 0..n {
            let mut acc = a[(j, i)] * (model.v1p.eval(sol.s[j]) - st[i]);
            for k in 0..n {
                if k != j {
                    acc -= c * (a[(k, i)] - a[(j, i)]) / (sol.s[k] - sol.s[j]);
                }
            }
            a_sys = a_sys.max(acc.norm());
        }
        a_sys = a_sys.max(((&a * &e)[i] - C64::new(1.0, 0.0)).norm());
    }
    let vars = Variables { s: sol.s.clone(), st, a, u: vec![C64::new(1.0, 0.0); n] };
    let g = gradient(&vars, model)?;
    let gradient_residual = g.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let h = hessian_analytic(&vars, model)?;
    let fd = hessian_fd(&vars, model, 1e-5 * scale)?;
    let hessian_fd_error = hessian_block_error(&h, &fd, n);
    let act = action(&vars, model, None)?;
    Ok(ExtremalFrame {
        vars,
        h,
        action: act,
        eigen_residual,
        a_system_residual: a_sys,
        gradient_residual,
        hessian_fd_error,
    })
}

/// Free energies from the frame.
#[derive(Clone, Debug)]
pub struct FreeEnergies {
    pub shat: C64,
    pub f0: C64,
    /// `−½ ln det 𝓗`, defined up to a potential-independent additive constant.
    pub f1_full: C64,
    /// `−½ ln det` of the Schur complement of 𝓗 onto the (s, s̃) block.
    pub f1_reduced: C64,
    pub det_h: C64,
    /// `‖𝓗‖₁‖𝓗⁻¹‖₁`.
    pub condition: f64,
}

impl ExtremalFrame {
    pub fn n(&self) -> usize {
        self.vars.n()
    }

    pub fn f0(&self, model: &ModelSpec) -> C64 {
        -model.c() * self.action
    }

    /// `f₀` with logarithms continued from another frame (for finite differences).
    pub fn f0_relative_to(&self, other: &ExtremalFrame, model: &ModelSpec) -> Result<C64> {
        Ok(-model.c() * action(&self.vars, model, Some(&other.vars))?)
    }

    pub fn h_inverse(&self) -> Result<CMat> {
        Lu::new(&self.h, "Hessian")?.inverse()
    }

    pub fn reduced_hessian(&self) -> Result<CMat> {
        let n = self.n();
        let d = self.vars.dim();
        let k = 2 * n;
        let h11 = self.h.view((0, 0), (k, k)).into_owned();
        let h12 = self.h.view((0, k), (k, d - k)).into_owned();
        let h22 = self.h.view((k, k), (d - k, d - k)).into_owned();
        let x = Lu::new(&h22, "(A, u) block of the Hessian")?.solve_mat(&h12.transpose())?;
        Ok(h11 - h12 * x)
    }

    pub fn free_energies(&self, model: &ModelSpec) -> Result<FreeEnergies> {
        let lu = Lu::new(&self.h, "Hessian")?;
        let red = Lu::new(&self.reduced_hessian()?, "reduced Hessian")?;
        let inv = lu.inverse()?;
        let norm1 = |m: &CMat| (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        Ok(FreeEnergies {
            shat: self.action,
            f0: self.f0(model),
            f1_full: lu.ln_det() * -0.5,
            f1_reduced: red.ln_det() * -0.5,
            det_h: lu.det(),
            condition: norm1(&self.h) * norm1(&inv),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "stilde": cvec_json(&self.vars.st),
            "A": crate::json::cmat_json(&self.vars.a),
            "action": cjson(self.action),
            "eigen_residual": self.eigen_residual,
            "a_system_residual": self.a_system_residual,
            "gradient_residual": self.gradient_residual,
            "hessian_fd_error": self.hessian_fd_error,
        })
    }
}

impl FreeEnergies {
    pub fn to_json(&self) -> Value {
        json!({
            "Shat": cjson(self.shat),
            "f0": cjson(self.f0),
            "f1_full": cjson(self.f1_full),
            "f1_reduced": cjson(self.f1_reduced),
            "f1_note": "defined up to an additive, potential-independent constant",
            "det_H": cjson(self.det_h),
            "condition_estimate": self.condition,
        })
    }
}

/// `(T/N) Σ_{ij} (𝓗⁻¹)_{ij} / ((x − s_i)²(x′ − s_j)²)`.
pub fn w2_variational(frame: &ExtremalFrame, sol: &BetheSolution, model: &ModelSpec) -> Result<PoleTensor> {
    let n = frame.n();
    let hinv = frame.h_inverse()?;
    let c = model.c();
    let mut t = PoleTensor::zero(&sol.anchors, 2);
    for i in 0..n {
        for j in 0..n {
            t.add_term(vec![Basis::Pole(i as u32, 2), Basis::Pole(j as u32, 2)], c * hinv[(i, j)]);
        }
    }
    Ok(t.pruned())
}

/// `C_{ijk}` contracted from third derivatives obtained by finite differences of the
/// analytic Hessian along the columns of 𝓗⁻¹.
pub fn c_tensor(frame: &ExtremalFrame, model: &ModelSpec) -> Result<Vec<Vec<Vec<C64>>>> {
    let n = frame.n();
    let d = frame.vars.dim();
    let hinv = frame.h_inverse()?;
    let scale = crate::bethe::root_scale(&frame.vars.s);
    let mut out = vec![vec![vec![C64::new(0.0, 0.0); n]; n]; n];
    for k in 0..n {
        let dir: Vec<C64> = (0..d).map(|g| hinv[(k, g)]).collect();
        let dn = dir.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        let t = 1e-4 * scale / dn;
        let step = |sign: f64| -> Vec<(usize, C64)> { dir.iter().enumerate().map(|(g, z)| (g, z * (sign * t))).collect() };
        let hp = hessian_analytic(&frame.vars.shifted(&step(1.0)), model)?;
        let hm = hessian_analytic(&frame.vars.shifted(&step(-1.0)), model)?;
        let dh = (hp - hm) / C64::new(2.0 * t, 0.0);
        let m = &hinv * dh * &hinv;
        for i in 0..n {
            for j in 0..n {
                out[i][j][k] = m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// The variational three-point function.
pub fn w3_variational(frame: &ExtremalFrame, sol: &BetheSolution, model: &ModelSpec) -> Result<PoleTensor> {
    let n = frame.n();
    let hinv = frame.h_inverse()?;
    let c = model.c();
    let ct = c_tensor(frame, model)?;
    let p = |i: usize, a: u32| Basis::Pole(i as u32, a);
    let mut t = PoleTensor::zero(&sol.anchors, 3);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let two_c = c * 2.0;
                t.add_term(vec![p(i, 3), p(j, 2), p(k, 2)], two_c * hinv[(i, j)] * hinv[(i, k)]);
                t.add_term(vec![p(i, 2), p(j, 3), p(k, 2)], two_c * hinv[(i, j)] * hinv[(j, k)]);
                t.add_term(vec![p(i, 2), p(j, 2), p(k, 3)], two_c * hinv[(i, k)] * hinv[(k, j)]);
                t.add_term(vec![p(i, 2), p(j, 2), p(k, 2)], -c * ct[i][j][k]);
            }
        }
    }
    Ok(t.pruned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::solve_bethe;
    use crate::linalg::re;

    fn ma() -> (ModelSpec, BetheSolution) {
        let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(1.0)], 1.0, 1)
            .unwrap()
            .with_selection(&[1]);
        let sol = solve_bethe(&m).unwrap();
        (m, sol)
    }

    #[test]
    fn ma_frame_and_action() {
        let (m, sol) = ma();
        let fr = build_frame(&sol, &m).unwrap();
        assert!((fr.vars.st[0] - re(1.0)).norm() < 1e-14);
        assert!((fr.vars.a[(0, 0)] - re(1.0)).norm() < 1e-14);
        assert!((fr.action - re(-1.0 / 6.0)).norm() < 1e-14);
        assert!((fr.f0(&m) - re(1.0 / 6.0)).norm() < 1e-14);
        assert!(fr.gradient_residual < 1e-14);
    }

    #[test]
    fn ma_hessian_matches_hand_matrix() {
        let (m, sol) = ma();
        let fr = build_frame(&sol, &m).unwrap();
        let hand = [[1.0, -1.0, 0.0, 0.0], [-1.0, 2.0, 0.0, 0.0], [0.0, 0.0, -1.0, -1.0], [0.0, 0.0, -1.0, 0.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert!((fr.h[(i, j)] - re(hand[i][j])).norm() < 1e-12, "H[{i}][{j}] = {}", fr.h[(i, j)]);
            }
        }
        let fe = fr.free_energies(&m).unwrap();
        assert!((fe.det_h - re(-1.0)).norm() < 1e-12);
        assert!(fe.f1_reduced.norm() < 1e-12);
    }

    #[test]
    fn ma_w2_variational() {
        let (m, sol) = ma();
        let fr = build_frame(&sol, &m).unwrap();
        let w2 = w2_variational(&fr, &sol, &m).unwrap();
        let key = vec![Basis::Pole(0, 2), Basis::Pole(0, 2)];
        assert!((w2.terms()[&key] - re(2.0)).norm() < 1e-12);
    }
}
