//! Cross-checks between the recursion, the variational correlators and finite
//! differences in the potential.

mod common;

use betamm_core::bethe::leading_data;
use betamm_core::linalg::{binom, c, re};
use betamm_core::yangyang::{build_frame, w3_variational};
use betamm_core::{Basis, BetheSolution, CorrelatorStore, KernelTable, ModelSpec, PoleTensor, C64};

fn store(m: &ModelSpec, sol: &BetheSolution) -> CorrelatorStore {
    let ld = leading_data(sol, m);
    let kt = KernelTable::build(sol, m, &ld, 3).unwrap();
    CorrelatorStore::new(m, &ld, kt)
}

#[test]
fn three_point_function_agrees_with_the_variational_route() {
    let pts = [c(2.1, 0.3), c(-1.7, 1.1), c(0.4, -2.2)];
    for (label, m) in common::all_models() {
        let sol = common::solved(&m);
        let rec = store(&m, &sol).w(2, 0).unwrap().eval(&pts);
        let var = w3_variational(&build_frame(&sol, &m).unwrap(), &sol, &m).unwrap().eval(&pts);
        assert!((rec - var).norm() < 1e-5 * var.norm().max(1e-3), "{label}: {rec} vs {var}");
    }
}

#[test]
fn genus_one_triple_pole_is_the_inverse_hessian_diagonal() {
    for (label, m) in common::all_models() {
        let sol = common::solved(&m);
        let w = store(&m, &sol).w(0, 1).unwrap().clone();
        let hinv = build_frame(&sol, &m).unwrap().h_inverse().unwrap();
        for j in 0..sol.n() {
            let tp = w.terms().get(&vec![Basis::Pole(j as u32, 3)]).copied().unwrap_or_default();
            assert!((tp - hinv[(j, j)]).norm() < 1e-9, "{label}, root {j}: {tp} vs {}", hinv[(j, j)]);
        }
    }
}

#[test]
fn recursion_has_no_simple_poles_at_genus_one() {
    for (label, m) in common::all_models() {
        let sol = common::solved(&m);
        let w = store(&m, &sol).w(0, 1).unwrap().clone();
        for (k, v) in w.terms() {
            assert!(matches!(k[0], Basis::Pole(_, 2) | Basis::Pole(_, 3)) || v.norm() < 1e-10, "{label}: {k:?} {v}");
        }
    }
}

/// Coefficient of `ξ^{−(k+1)}` in variable 1 of a two-variable tensor, at fixed `x₀`.
fn moment_in_second_variable(t: &PoleTensor, x0: C64, k: usize) -> C64 {
    let s = t.anchors().points();
    t.terms()
        .iter()
        .filter_map(|(key, v)| match key[1] {
            Basis::Pole(i, a) if (a as usize) <= k + 1 => {
                let f = PoleTensor::from_terms(t.anchors(), 1, [(vec![key[0]], *v)]).eval(&[x0]);
                Some(f * binom(k as u32, a - 1) * s[i as usize].powi((k + 1 - a as usize) as i32))
            }
            _ => None,
        })
        .sum()
}

#[test]
fn two_point_moments_are_potential_derivatives() {
    // The ξ^{−(m+2)} coefficient of U₁⁽⁰⁾(x₀, ξ) is −(m+1)∂U₀⁽⁰⁾(x₀)/∂t_m.
    let h = 1e-5;
    let x0 = c(1.9, -0.8);
    for (label, m) in common::all_models() {
        let sol = common::solved(&m);
        let mut st = store(&m, &sol);
        st.compute(1, 0).unwrap();
        let u1 = st.get(1, 0).unwrap().u.clone();
        for tm in 0..=m.d1() {
            let mp = m.with_t_shift(tm, re(h)).unwrap();
            let mm = m.with_t_shift(tm, re(-h)).unwrap();
            let lp = leading_data(&common::solved(&mp), &mp);
            let lm = leading_data(&common::solved(&mm), &mm);
            for (k, u) in u1.iter().enumerate() {
                let fd = (lp.u0[k].eval(x0) - lm.u0[k].eval(x0)) / (2.0 * h);
                let mu = moment_in_second_variable(u, x0, tm + 1);
                let pred = -fd * (tm + 1) as f64;
                assert!((mu - pred).norm() < 1e-4 * pred.norm().max(1.0), "{label}, t_{tm}, k={k}: {mu} vs {pred}");
            }
        }
    }
}

#[test]
fn genus_one_two_point_moments_are_potential_derivatives() {
    // The same insertion relation one genus up: W₂⁽¹⁾ against ∂W₁⁽¹⁾/∂t_m.
    let h = 1e-5;
    let x0 = c(1.9, -0.8);
    for (label, m) in common::all_models() {
        let sol = common::solved(&m);
        let w2 = store(&m, &sol).w(1, 1).unwrap().clone();
        for tm in 0..=m.d1() {
            let mp = m.with_t_shift(tm, re(h)).unwrap();
            let mm = m.with_t_shift(tm, re(-h)).unwrap();
            let wp = store(&mp, &common::solved(&mp)).w(0, 1).unwrap().eval(&[x0]);
            let wm = store(&mm, &common::solved(&mm)).w(0, 1).unwrap().eval(&[x0]);
            let pred = -(wp - wm) / (2.0 * h) * (tm + 1) as f64;
            let mu = moment_in_second_variable(&w2, x0, tm + 1);
            assert!((mu - pred).norm() < 1e-4 * pred.norm().max(1.0), "{label}, t_{tm}: {mu} vs {pred}");
        }
    }
}
