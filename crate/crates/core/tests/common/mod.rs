//! Test models shared by the integration tests.

#![allow(dead_code)]

use betamm_core::linalg::re;
use betamm_core::{solve_bethe, BetheSolution, ModelSpec, C64};

/// V₁′ = x, V₂′ = y², T = 1.
pub fn ma(n: usize) -> ModelSpec {
    let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(1.0)], 1.0, n).unwrap();
    match n {
        1 => m.with_selection(&[1]),
        2 => m.with_selection(&[0, 1]),
        3 => m.with_guesses(&[re(-0.9), re(-0.4), re(0.4)]),
        _ => panic!("no M_A branch configured for N = {n}"),
    }
}

/// V₁′ = x, V₂′ = y³, T = 1.
pub fn cubic(n: usize) -> ModelSpec {
    let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(0.0), re(1.0)], 1.0, n).unwrap();
    match n {
        1 => m.with_selection(&[0]),
        2 => m.with_selection(&[0, 1]),
        3 => m.with_selection(&[0, 1, 2]),
        _ => panic!("no cubic branch configured for N = {n}"),
    }
}

pub fn solved(m: &ModelSpec) -> BetheSolution {
    solve_bethe(m).unwrap()
}

/// Every configured model with its label.
pub fn all_models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("M_A N=1", ma(1)),
        ("M_A N=2", ma(2)),
        ("M_A N=3", ma(3)),
        ("cubic N=1", cubic(1)),
        ("cubic N=2", cubic(2)),
        ("cubic N=3", cubic(3)),
    ]
}

pub fn max_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}
