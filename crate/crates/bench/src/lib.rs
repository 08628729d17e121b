//! Benchmark fixtures: the M_A and cubic models at several root counts.

use betamm_core::linalg::re;
use betamm_core::ModelSpec;

/// V₁′ = x, V₂′ = y², T = 1, on the branch used by the tests.
pub fn ma(n: usize) -> ModelSpec {
    let m = ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(1.0)], 1.0, n).unwrap();
    match n {
        1 => m.with_selection(&[1]),
        2 => m.with_selection(&[0, 1]),
        _ => m.with_guesses(&[re(-0.9), re(-0.4), re(0.4)]),
    }
}

/// V₁′ = x, V₂′ = y³, T = 1, continued from the first `n` decoupled roots.
pub fn cubic(n: usize) -> ModelSpec {
    let sel: Vec<usize> = (0..n).collect();
    ModelSpec::new(vec![re(0.0), re(1.0)], vec![re(0.0), re(0.0), re(0.0), re(1.0)], 1.0, n)
        .unwrap()
        .with_selection(&sel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_solve() {
        for n in 1..=3 {
            assert!(betamm_core::solve_bethe(&ma(n)).unwrap().residual < 1e-10);
            assert!(betamm_core::solve_bethe(&cubic(n)).unwrap().residual < 1e-10);
        }
    }
}
