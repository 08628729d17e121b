//! The topological recursion: correlators `U_n⁽ᵍ⁾` and `W_{n+1}⁽ᵍ⁾` from residues
//! against the kernel, and the higher loop equations they must satisfy.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::bethe::LeadingData;
use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::linalg::C64;
use crate::model::ModelSpec;
use crate::ratfun::{residue_pairing_tensor, PoleTensor};

/// `U_n⁽ᵍ⁾` per power of `y` and `W_{n+1}⁽ᵍ⁾`, as tensors in `(x, ξ₁, …, ξ_n)`.
#[derive(Clone, Debug)]
pub struct Correlator {
    pub u: Vec<PoleTensor>,
    pub w: PoleTensor,
    /// How the entry was obtained.
    pub route: &'static str,
}

/// Memoized correlators keyed by `(n, g)`, where entry `(n, g)` holds `U_n⁽ᵍ⁾` and
/// `W_{n+1}⁽ᵍ⁾`.
#[derive(Clone, Debug)]
pub struct CorrelatorStore {
    entries: BTreeMap<(usize, usize), Correlator>,
    kernel: KernelTable,
    leading: LeadingData,
    d2: usize,
    c: C64,
    tt: C64,
}

/// All subsets of `0..n` as sorted index lists, in increasing bitmask order.
fn subsets(n: usize) -> Vec<Vec<usize>> {
    (0..1usize << n).map(|m| (0..n).filter(|b| m >> b & 1 == 1).collect()).collect()
}

impl CorrelatorStore {
    pub fn new(model: &ModelSpec, leading: &LeadingData, kernel: KernelTable) -> Self {
        let d2 = model.d2();
        let u: Vec<PoleTensor> = leading.u0.iter().map(|f| f.to_tensor()).collect();
        let w = leading.w1.to_tensor();
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), Correlator { u, w, route: "leading order" });
        CorrelatorStore { entries, kernel, leading: leading.clone(), d2, c: model.c(), tt: model.tt(d2) }
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn get(&self, n: usize, g: usize) -> Option<&Correlator> {
        self.entries.get(&(n, g))
    }

    fn entry(&self, n: usize, g: usize) -> Result<&Correlator> {
        self.entries
            .get(&(n, g))
            .ok_or_else(|| Error::Insufficient(format!("correlator U_{n}^({g}) has not been computed")))
    }

    /// `W_{n+1}⁽ᵍ⁾`, computing it and its dependencies if needed.
    pub fn w(&mut self, n: usize, g: usize) -> Result<&PoleTensor> {
        self.compute(n, g)?;
        Ok(&self.entry(n, g)?.w)
    }

    /// Compute `U_n⁽ᵍ⁾` and everything it depends on, in increasing `2g + n`.
    pub fn compute(&mut self, n: usize, g: usize) -> Result<()> {
        if self.entries.contains_key(&(n, g)) {
            return Ok(());
        }
        for (dn, dg) in self.dependencies(n, g) {
            self.compute(dn, dg)?;
        }
        let v = self.source(n, g, self.d2)?;
        let v: Vec<PoleTensor> = v.into_iter().map(|t| t.scale(C64::new(-1.0, 0.0))).collect();
        let u = self.pair_with_kernel(&v, n + 1)?;
        let w = u[self.d2 - 1].scale(C64::new(1.0, 0.0) / self.tt).pruned();
        self.entries.insert((n, g), Correlator { u, w, route: "recursion" });
        Ok(())
    }

    fn dependencies(&self, n: usize, g: usize) -> Vec<(usize, usize)> {
        let mut deps = vec![];
        if g >= 1 {
            deps.push((n + 1, g - 1));
            deps.push((n, g - 1));
        }
        if n >= 1 {
            deps.push((n - 1, g));
        }
        for h in 0..=g {
            for i_size in 0..=n {
                if (i_size == 0 && h == g) || (i_size == n && h == 0) {
                    continue;
                }
                deps.push((i_size, g - h));
                deps.push((n - i_size, h));
            }
        }
        deps.retain(|&d| d != (n, g));
        deps
    }

    /// `Σ_i Res_{x→s_i} Kᵗ(x₀, x) v(x)`, growing the kernel table when needed.
    fn pair_with_kernel(&mut self, v: &[PoleTensor], nvars: usize) -> Result<Vec<PoleTensor>> {
        let n_roots = self.kernel.n();
        let need = (0..n_roots)
            .flat_map(|i| v.iter().map(move |t| t.max_pole_order(0, i)))
            .max()
            .unwrap_or(0);
        if need > self.kernel.depth + 1 {
            self.kernel.extend(&self.leading, need - 1)?;
        }
        let an = self.leading.y.anchors().clone();
        let mut out = vec![PoleTensor::zero(&an, nvars); self.d2];
        for i in 0..n_roots {
            let r = residue_pairing_tensor(&self.kernel.derivs[i], v, i)?;
            for (o, t) in out.iter_mut().zip(r) {
                o.axpy(C64::new(1.0, 0.0), &t);
            }
        }
        Ok(out.into_iter().map(|t| t.pruned()).collect())
    }

    /// Component `k` of `U_n⁽ᵍ⁾`, zero beyond the stored range.
    fn u_comp(&self, n: usize, g: usize, k: usize) -> Result<PoleTensor> {
        let e = self.entry(n, g)?;
        Ok(match e.u.get(k) {
            Some(t) => t.clone(),
            None => PoleTensor::zero(self.leading.y.anchors(), n + 1),
        })
    }

    /// The right-hand side `R_k` of the loop equation for `U_n⁽ᵍ⁾` without the unknown
    /// polynomial, for `k = 0..=kmax`: the convolution terms except `(∅, g)` and `(ξ⃗, 0)`,
    /// the coincident term, the derivative term and the principal parts of the
    /// `ξ_j`-insertion terms.
    fn source(&self, n: usize, g: usize, kmax_excl: usize) -> Result<Vec<PoleTensor>> {
        let an = self.leading.y.anchors().clone();
        let nv = n + 1;
        let inv_c = C64::new(1.0, 0.0) / self.c;
        let mut out = vec![PoleTensor::zero(&an, nv); kmax_excl];
        let subs = subsets(n);
        for h in 0..=g {
            for set_i in &subs {
                let isz = set_i.len();
                if (isz == 0 && h == g) || (isz == n && h == 0) {
                    continue;
                }
                let set_j: Vec<usize> = (0..n).filter(|b| !set_i.contains(b)).collect();
                let w = &self.entry(isz, g - h)?.w;
                let mut wmap = vec![0];
                wmap.extend(set_i.iter().map(|b| b + 1));
                let wr = w.relabel(&wmap, nv);
                let mut umap = vec![0];
                umap.extend(set_j.iter().map(|b| b + 1));
                for (k, o) in out.iter_mut().enumerate() {
                    let uk = self.u_comp(set_j.len(), h, k)?;
                    if uk.is_empty() {
                        continue;
                    }
                    o.axpy(C64::new(1.0, 0.0), &wr.mul(&uk.relabel(&umap, nv))?);
                }
            }
        }
        if g >= 1 {
            let mut dmap = vec![0, 0];
            dmap.extend(1..=n);
            for (k, o) in out.iter_mut().enumerate() {
                let diag = self.u_comp(n + 1, g - 1, k)?.relabel(&dmap, nv);
                o.axpy(C64::new(1.0, 0.0), &diag);
                let d = self.u_comp(n, g - 1, k)?.derivative(0);
                o.axpy(-inv_c, &d);
            }
        }
        for j in 0..n {
            // U_{n−1}⁽ᵍ⁾(x; ξ⃗ without ξ_j)/(x − ξ_j)², with ξ_j restored at slot j + 1.
            for (k, o) in out.iter_mut().enumerate() {
                let uk = self.u_comp(n - 1, g, k)?;
                if uk.is_empty() {
                    continue;
                }
                o.axpy(C64::new(1.0, 0.0), &uk.pole_part_over_square_difference(0, j + 1));
            }
        }
        Ok(out.into_iter().map(|t| t.pruned()).collect())
    }

    /// Largest coefficient of an x-pole in the loop equation for `U_n⁽ᵍ⁾`, over every
    /// power of `y` and over the combinations at the sample values `ys`.
    pub fn verify_loop_g(&mut self, n: usize, g: usize, ys: &[C64]) -> Result<f64> {
        if (n, g) == (0, 0) {
            return Err(Error::Insufficient("use the leading-order loop equation for (n, g) = (0, 0)".into()));
        }
        self.compute(n, g)?;
        let per_k = self.loop_equation_by_power(n, g)?;
        let mut worst = per_k.iter().fold(0.0_f64, |m, t| m.max(t.max_pole_abs_in(0)));
        for &y in ys {
            let mut acc = PoleTensor::zero(self.leading.y.anchors(), n + 1);
            let mut yk = C64::new(1.0, 0.0);
            for t in &per_k {
                acc.axpy(yk, t);
                yk *= y;
            }
            worst = worst.max(acc.pruned().max_pole_abs_in(0));
        }
        Ok(worst)
    }

    /// `U_{n,k−1} + (−Y + (T/N)∂_x)U_{n,k} + W_{n+1}U_{0,k}⁽⁰⁾ + R_k` for `k = 0..=d₂+1`.
    pub fn loop_equation_by_power(&self, n: usize, g: usize) -> Result<Vec<PoleTensor>> {
        let nv = n + 1;
        let kmax = self.d2 + 2;
        let r = self.source(n, g, kmax)?;
        let y = self.leading.y.to_tensor().relabel(&[0], nv);
        let w = &self.entry(n, g)?.w;
        let mut out = Vec::with_capacity(kmax);
        for (k, rk) in r.into_iter().enumerate() {
            let mut t = rk;
            if k >= 1 {
                t.axpy(C64::new(1.0, 0.0), &self.u_comp(n, g, k - 1)?);
            }
            let uk = self.u_comp(n, g, k)?;
            t.axpy(C64::new(-1.0, 0.0), &y.mul(&uk)?);
            t.axpy(self.c, &uk.derivative(0));
            let u0 = self.u_comp(0, 0, k)?.relabel(&[0], nv);
            t.axpy(C64::new(1.0, 0.0), &w.mul(&u0)?);
            out.push(t.pruned());
        }
        Ok(out)
    }

    pub fn to_json(&self, n: usize, g: usize) -> Result<Value> {
        let e = self.entry(n, g)?;
        Ok(json!({
            "n": n,
            "g": g,
            "route": e.route,
            "U": e.u.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
            "W": e.w.to_json(),
        }))
    }
}
