//! The spectral curve `E(x, y)`, its companion matrix and the leading loop equation.

use serde_json::{json, Value};

use crate::bethe::LeadingData;
use crate::error::{Error, Result};
use crate::json::cvec_json;
use crate::linalg::{CMat, C64};
use crate::model::ModelSpec;
use crate::ratfun::{PoleSum, Poly};

/// `E(x, y) = Σ_k yᵏ E_k(x)` with `k = 0..=d₂+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCurve {
    pub ek: Vec<Poly>,
}

impl SpectralCurve {
    /// Assemble `E = (V₁′(x)−y)(V₂′(y)−x) − P₀⁽⁰⁾ + T + T/N` coefficientwise in `y`.
    pub fn build(leading: &LeadingData, model: &ModelSpec) -> Self {
        let d2 = model.d2();
        let x = Poly::from_real(&[0.0, 1.0]);
        // V₂′(y) − x as polynomials in x for each power of y.
        let shifted = |k: usize| -> Poly {
            let mut p = Poly::constant(model.tt(k));
            if k == 0 {
                p = &p - &x;
            }
            p
        };
        let ek = (0..=d2 + 1)
            .map(|k| {
                let mut e = Poly::zero();
                if k <= d2 {
                    e = &e + &(&model.v1p * &shifted(k));
                }
                if k >= 1 {
                    e = &e - &shifted(k - 1);
                }
                e = &e - &leading.p0.y_coeff(k);
                if k == 0 {
                    let n = model.n as f64;
                    e = &e + &Poly::constant(C64::new(model.temperature + model.temperature / n, 0.0));
                }
                e
            })
            .collect();
        SpectralCurve { ek }
    }

    pub fn eval(&self, x: C64, y: C64) -> C64 {
        self.ek.iter().rev().fold(C64::new(0.0, 0.0), |acc, e| acc * y + e.eval(x))
    }

    /// Sum of the magnitudes of the individual terms of `E(x, y)`, a scale for relative errors.
    pub fn magnitude(&self, x: C64, y: C64) -> f64 {
        self.ek
            .iter()
            .enumerate()
            .map(|(k, e)| e.eval(x).norm() * y.norm().powi(k as i32))
            .sum()
    }

    pub fn to_json(&self) -> Value {
        json!({ "E_k": self.ek.iter().map(|p| cvec_json(p.coeffs())).collect::<Vec<_>>() })
    }
}

/// `p ↦ V₁′(x)p − (T/N)p′`.
fn lowering(p: &Poly, model: &ModelSpec) -> Poly {
    &(&model.v1p * p) - &p.derivative().scale(model.c())
}

/// Normalized residual of `Σ_k (V₁′(x) − ŷ)ᵏ[E_k ψ]` with `ŷ = (T/N)d/dx`.
pub fn quantum_curve_residual(curve: &SpectralCurve, psi: &Poly, model: &ModelSpec) -> Result<f64> {
    if psi.degree().unwrap_or(0) == 0 {
        return Err(Error::InvalidModel("quantum-curve check needs a wave function of degree N >= 1".into()));
    }
    let mut total = Poly::zero();
    let mut scale: f64 = 0.0;
    for (k, e) in curve.ek.iter().enumerate() {
        let mut term = e * psi;
        scale = scale.max(term.max_abs_coeff());
        for _ in 0..k {
            term = lowering(&term, model);
        }
        scale = scale.max(term.max_abs_coeff());
        total = &total + &term;
    }
    Ok(if scale == 0.0 { 0.0 } else { total.max_abs_coeff() / scale })
}

/// The `(d₂+1)×(d₂+1)` companion-like matrix 𝒞(x) acting on `(ψ_{d₂}, …, ψ₀)`.
pub fn companion(curve: &SpectralCurve, model: &ModelSpec, x: C64) -> CMat {
    let d2 = model.d2();
    let lead = model.tt(d2);
    let v1 = model.v1p.eval(x);
    let mut c = CMat::zeros(d2 + 1, d2 + 1);
    for r in 0..=d2 {
        let k = d2 - r;
        c[(r, 0)] -= curve.ek[k].eval(x) / lead;
        c[(r, r)] += v1;
        if r < d2 {
            c[(r, r + 1)] = C64::new(-1.0, 0.0);
        }
    }
    c
}

/// Relative error of `−t̃_{d₂} det((y − V₁′(x))Id + 𝒞(x)) = E(x, y)` at one point.
pub fn companion_error(curve: &SpectralCurve, model: &ModelSpec, x: C64, y: C64) -> f64 {
    let d2 = model.d2();
    let shift = y - model.v1p.eval(x);
    let m = companion(curve, model, x) + CMat::identity(d2 + 1, d2 + 1) * shift;
    let lhs = -model.tt(d2) * m.determinant();
    let rhs = curve.eval(x, y);
    let denom = curve.magnitude(x, y).max(lhs.norm()).max(f64::MIN_POSITIVE);
    (lhs - rhs).norm() / denom
}

pub fn verify_companion(curve: &SpectralCurve, model: &ModelSpec, samples: &[(C64, C64)]) -> f64 {
    samples.iter().map(|&(x, y)| companion_error(curve, model, x, y)).fold(0.0, f64::max)
}

/// Residuals of `U_{0,k−1} + (−Y + (T/N)∂)U_{0,k} − E_k` for `k = 0..=d₂+1`, as functions of x.
pub fn loop_g0_by_power(leading: &LeadingData, curve: &SpectralCurve, model: &ModelSpec) -> Vec<PoleSum> {
    let d2 = model.d2();
    let an = leading.y.anchors();
    let zero = PoleSum::zero(an);
    let minus_y = leading.y.scale(C64::new(-1.0, 0.0));
    (0..=d2 + 1)
        .map(|k| {
            let mut r = if k >= 1 { leading.u0[k - 1].clone() } else { zero.clone() };
            if k <= d2 {
                let uk = &leading.u0[k];
                r = r.add(&minus_y.multiply(uk).expect("same anchors")).expect("same anchors");
                r.axpy(model.c(), &uk.derivative());
            }
            r.sub(&PoleSum::from_poly(an, curve.ek[k].clone())).expect("same anchors").normalized()
        })
        .collect()
}

/// Largest coefficient of `(y − Y(x) + (T/N)∂_x)U₀⁽⁰⁾(x, y) − E(x, y)` over the samples in `y`,
/// together with the largest per-power residual.
pub fn verify_loop_g0(leading: &LeadingData, curve: &SpectralCurve, model: &ModelSpec, ys: &[C64]) -> f64 {
    let per_k = loop_g0_by_power(leading, curve, model);
    let mut worst = per_k.iter().fold(0.0_f64, |m, r| m.max(r.max_abs_coeff()));
    let an = leading.y.anchors();
    for &y in ys {
        let mut acc = PoleSum::zero(an);
        let mut yk = C64::new(1.0, 0.0);
        for r in &per_k {
            acc.axpy(yk, r);
            yk *= y;
        }
        worst = worst.max(acc.normalized().max_abs_coeff());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{leading_data, solve_bethe};
    use crate::linalg::re;

    fn ma_curve() -> (ModelSpec, LeadingData, SpectralCurve) {
        let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(1.0)], 1.0, 1)
            .unwrap()
            .with_selection(&[1]);
        let sol = solve_bethe(&m).unwrap();
        let ld = leading_data(&sol, &m);
        let curve = SpectralCurve::build(&ld, &m);
        (m, ld, curve)
    }

    #[test]
    fn ma_curve_coefficients() {
        let (_, _, curve) = ma_curve();
        assert_eq!(curve.ek[0], Poly::from_real(&[1.0, 0.0, -1.0]));
        assert_eq!(curve.ek[1], Poly::from_real(&[-1.0, 1.0]));
        assert_eq!(curve.ek[2], Poly::from_real(&[0.0, 1.0]));
        assert_eq!(curve.ek[3], Poly::from_real(&[-1.0]));
    }

    #[test]
    fn ma_quantum_curve_is_exactly_zero() {
        let (m, ld, curve) = ma_curve();
        assert_eq!(quantum_curve_residual(&curve, &ld.psi, &m).unwrap(), 0.0);
        assert!(quantum_curve_residual(&curve, &Poly::constant(re(1.0)), &m).is_err());
    }

    #[test]
    fn ma_companion_at_reference_point() {
        let (m, _, curve) = ma_curve();
        assert!((curve.eval(re(2.0), re(3.0)) - re(-9.0)).norm() < 1e-14);
        assert!(companion_error(&curve, &m, re(2.0), re(3.0)) < 1e-15);
    }

    #[test]
    fn ma_leading_loop_equation() {
        let (m, ld, curve) = ma_curve();
        assert!(verify_loop_g0(&ld, &curve, &m, &[re(0.0), C64::new(0.3, -1.2)]) < 1e-14);
    }
}
