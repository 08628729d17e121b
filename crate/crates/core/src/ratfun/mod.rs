//! Polynomials and rational functions with poles at a fixed anchor set.

mod basis;
mod poly;
mod polesum;
mod tensor;

pub use basis::{basis_mul, Anchors, Basis, CLUSTER_TOL, ONE};
pub use poly::{BiPoly, Poly};
pub use polesum::{Laurent, PoleSum, PRUNE_REL};
pub use tensor::PoleTensor;

use crate::error::{Error, Result};
use crate::linalg::{factorial, C64};

/// Square matrix whose entries are functions of one variable.
#[derive(Clone, Debug)]
pub struct PoleSumMatrix {
    dim: usize,
    entries: Vec<PoleSum>,
}

impl PoleSumMatrix {
    pub fn zero(anchors: &Anchors, dim: usize) -> Self {
        PoleSumMatrix { dim, entries: vec![PoleSum::zero(anchors); dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, p: usize, q: usize) -> &PoleSum {
        &self.entries[p * self.dim + q]
    }

    pub fn get_mut(&mut self, p: usize, q: usize) -> &mut PoleSum {
        &mut self.entries[p * self.dim + q]
    }

    pub fn set(&mut self, p: usize, q: usize, v: PoleSum) {
        self.entries[p * self.dim + q] = v;
    }

    pub fn row_is_zero(&self, p: usize) -> bool {
        (0..self.dim).all(|q| self.get(p, q).is_zero())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max_abs_coeff()))
    }

    pub fn normalize(&mut self) {
        for e in self.entries.iter_mut() {
            e.normalize();
        }
    }

    pub fn values_at(&self, x0: C64) -> crate::linalg::CMat {
        crate::linalg::CMat::from_fn(self.dim, self.dim, |p, q| self.get(p, q).eval(x0))
    }
}

/// `Res_{x→s_i} Kᵗ(x₀,x)·v(x) = Σ_m (1/m!)·K⁽ᵐ⁾ᵗ(x₀,s_i)·v_{−(m+1)}` for a vector of
/// single-variable functions `v`; polynomial parts of `v` contribute nothing.
pub fn residue_pairing(kderivs: &[PoleSumMatrix], v: &[PoleSum], i: usize) -> Result<Vec<PoleSum>> {
    let d = v.len();
    let need = v.iter().map(|f| f.max_order(i)).max().unwrap_or(0);
    if need > kderivs.len() {
        return Err(Error::Insufficient(format!(
            "residue pairing needs kernel derivatives to order {} but {} supplied",
            need - 1,
            kderivs.len().saturating_sub(1)
        )));
    }
    let anchors = match kderivs.first() {
        Some(k) => k.get(0, 0).anchors().clone(),
        None => return Ok(v.iter().map(|f| PoleSum::zero(f.anchors())).collect()),
    };
    let mut out = vec![PoleSum::zero(&anchors); d];
    for (m, km) in kderivs.iter().enumerate().take(need) {
        let w = 1.0 / factorial(m as u32);
        for (l, vl) in v.iter().enumerate() {
            let coef = vl.pole_coeff(i, m + 1) * w;
            if coef == C64::new(0.0, 0.0) {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                o.axpy(coef, km.get(l, k));
            }
        }
    }
    Ok(out.into_iter().map(|f| f.normalized()).collect())
}

/// Tensor form of [`residue_pairing`]: `v` is a vector of tensors whose variable 0 is
/// the integration variable; the result has `x₀` as variable 0 followed by the
/// remaining variables of `v`.
pub fn residue_pairing_tensor(kderivs: &[PoleSumMatrix], v: &[PoleTensor], i: usize) -> Result<Vec<PoleTensor>> {
    let d = v.len();
    let need = v.iter().map(|f| f.max_pole_order(0, i)).max().unwrap_or(0);
    if need > kderivs.len() {
        return Err(Error::Insufficient(format!(
            "residue pairing needs kernel derivatives to order {} but {} supplied",
            need - 1,
            kderivs.len().saturating_sub(1)
        )));
    }
    let nv = v.first().map_or(1, |t| t.nvars());
    let anchors = v.first().map(|t| t.anchors().clone());
    let Some(anchors) = anchors else { return Ok(vec![]) };
    let mut out = vec![PoleTensor::zero(&anchors, nv); d];
    for (m, km) in kderivs.iter().enumerate().take(need) {
        let w = C64::new(1.0 / factorial(m as u32), 0.0);
        for (l, vl) in v.iter().enumerate() {
            let coef = vl.laurent_coeff(0, i, -(m as i32 + 1));
            if coef.is_empty() {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                let kt = km.get(l, k).to_tensor();
                if kt.is_empty() {
                    continue;
                }
                o.axpy(w, &kt.outer(&coef));
            }
        }
    }
    Ok(out.into_iter().map(|t| t.pruned()).collect())
}
