//! Property tests for the rational-function layer and the model document.

mod common;

use betamm_core::linalg::c;
use betamm_core::spectral::companion_error;
use betamm_core::{Anchors, Basis, ModelSpec, PoleSum, PoleTensor, Poly, SpectralCurve, C64};
use proptest::prelude::*;

fn cplx() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| c(a, b))
}

fn anchors() -> Anchors {
    Anchors::with_default_tol(vec![c(1.0, 0.0), c(-0.5, 0.7), c(0.2, -1.1)]).unwrap()
}

/// A pole sum with a polynomial part of degree ≤ 2 and poles of order ≤ 3.
fn polesum() -> impl Strategy<Value = PoleSum> {
    (prop::collection::vec(cplx(), 3), prop::collection::vec(cplx(), 9)).prop_map(|(p, q)| {
        let an = anchors();
        let terms: Vec<(usize, usize, C64)> = (0..9).map(|k| (k / 3, k % 3 + 1, q[k])).collect();
        PoleSum::from_terms(&an, Poly::new(p), &terms)
    })
}

/// A point at distance at least 0.3 from every anchor.
fn probe() -> impl Strategy<Value = C64> {
    cplx().prop_filter("away from anchors", |z| anchors().points().iter().all(|s| (z - s).norm() > 0.3))
}

fn close(a: C64, b: C64, scale: f64) -> bool {
    (a - b).norm() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #[test]
    fn sum_and_product_agree_with_pointwise_values(f in polesum(), g in polesum(), x in probe()) {
        let (fx, gx) = (f.eval(x), g.eval(x));
        let scale = fx.norm() * gx.norm() + fx.norm() + gx.norm();
        prop_assert!(close(f.add(&g).unwrap().eval(x), fx + gx, scale));
        prop_assert!(close(f.sub(&g).unwrap().eval(x), fx - gx, scale));
        prop_assert!(close(f.multiply(&g).unwrap().eval(x), fx * gx, scale));
    }

    #[test]
    fn multiplication_commutes(f in polesum(), g in polesum(), x in probe()) {
        let a = f.multiply(&g).unwrap().eval(x);
        let b = g.multiply(&f).unwrap().eval(x);
        prop_assert!(close(a, b, a.norm()));
    }

    #[test]
    fn derivative_matches_central_difference(f in polesum(), x in probe()) {
        let h = 1e-5;
        let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
        let d = f.derivative().eval(x);
        prop_assert!((fd - d).norm() <= 1e-5 * d.norm().max(1.0));
    }

    #[test]
    fn moments_match_the_large_x_expansion(f in polesum()) {
        let pole = f.pole_part();
        let mu = pole.large_x_moments(12).unwrap();
        let x = c(40.0, 13.0);
        let series: C64 = mu.iter().enumerate().map(|(k, m)| m / x.powi(k as i32 + 1)).sum();
        let exact = pole.eval(x);
        prop_assert!((series - exact).norm() <= 1e-9 * exact.norm().max(1e-3));
    }

    #[test]
    fn symmetrized_tensor_has_no_permutation_defect(coefs in prop::collection::vec(cplx(), 6)) {
        let an = anchors();
        let keys = [
            vec![Basis::Pole(0, 1), Basis::Pole(1, 2)],
            vec![Basis::Pole(2, 3), Basis::Mono(1)],
            vec![Basis::Pole(0, 2), Basis::Pole(0, 1)],
        ];
        let t = PoleTensor::from_terms(&an, 2, keys.iter().cloned().zip(coefs.iter().copied()));
        let sym = t.add(&t.relabel(&[1, 0], 2)).unwrap();
        prop_assert!(sym.permutation_defect(&[1, 0]) <= 1e-14 * sym.max_abs_coeff().max(1.0));
    }

    #[test]
    fn tensor_product_agrees_with_pointwise_values(a in cplx(), b in cplx(), x in probe(), y in probe()) {
        let an = anchors();
        let t = PoleTensor::from_terms(&an, 2, [(vec![Basis::Pole(0, 2), Basis::Pole(1, 1)], a)]);
        let u = PoleTensor::from_terms(&an, 2, [(vec![Basis::Pole(1, 1), Basis::Mono(2)], b)]);
        let prod = t.mul(&u).unwrap();
        let v = prod.eval(&[x, y]);
        let w = t.eval(&[x, y]) * u.eval(&[x, y]);
        prop_assert!(close(v, w, w.norm()));
    }

    #[test]
    fn companion_identity_holds_at_random_points(x in cplx(), y in cplx(), n in 1usize..=3) {
        let m = common::cubic(n);
        let sol = common::solved(&m);
        let ld = betamm_core::bethe::leading_data(&sol, &m);
        let curve = SpectralCurve::build(&ld, &m);
        prop_assert!(companion_error(&curve, &m, x, y) < 1e-9);
    }

    #[test]
    fn model_json_round_trips_with_stable_hash(t in prop::collection::vec(cplx(), 2..4), tt in prop::collection::vec(cplx(), 2..5), temp in 0.1..3.0f64) {
        let m = ModelSpec::new(t, tt, temp, 2).unwrap().with_selection(&[0, 1]);
        let back = ModelSpec::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.hash(), m.hash());
    }
}
