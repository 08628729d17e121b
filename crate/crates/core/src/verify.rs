//! The verification suite: every identity the engine relies on, evaluated at one
//! solution and reported as `{name, residual, threshold, pass}` records.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bethe::{leading_data, BetheSolution, LeadingData};
use crate::error::Result;
use crate::kernel::{compat_residual, depth_for_genus, KernelTable, COMPAT_TOL};
use crate::linalg::{c, C64};
use crate::model::ModelSpec;
use crate::ratfun::PoleTensor;
use crate::recursion::CorrelatorStore;
use crate::spectral::{quantum_curve_residual, verify_companion, verify_loop_g0, SpectralCurve};
use crate::yangyang::{build_frame_unvalidated, w2_variational, HESSIAN_FD_TOL};

/// Names accepted by `--checks`, in the order they run.
pub const ALL_CHECKS: [&str; 11] = [
    "bethe",
    "ode",
    "companion",
    "loop_g0",
    "loop_g1",
    "loop_g1_n1",
    "compat",
    "hessian",
    "kernel",
    "w2_two_route",
    "symmetry",
];

pub const BETHE_TOL: f64 = 1e-10;
pub const ODE_TOL: f64 = 1e-8;
pub const COMPANION_TOL: f64 = 1e-9;
pub const COMPANION_SAMPLES: usize = 20;
pub const LOOP_TOL: f64 = 1e-9;
pub const LOOP_N1_TOL: f64 = 1e-7;
pub const KERNEL_TOL: f64 = 1e-8;
pub const TWO_ROUTE_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-7;

/// Relative sign between the kernel-route and the variational `W₂⁽⁰⁾`, fixed once on M_A.
pub const W2_ROUTE_SIGN: f64 = 1.0;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    fn from_result(name: &str, threshold: f64, r: Result<f64>) -> Self {
        match r {
            Ok(residual) => CheckRecord {
                name: name.to_string(),
                residual,
                threshold,
                pass: residual.is_finite() && residual < threshold,
                error: None,
            },
            Err(e) => CheckRecord {
                name: name.to_string(),
                residual: f64::INFINITY,
                threshold,
                pass: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Subset of [`ALL_CHECKS`]; empty means all.
    pub checks: Vec<String>,
    pub seed: u64,
    /// Relative size of the root perturbation injected before the checks (0 for none).
    pub perturb: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { checks: vec![], seed: 0, perturb: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub checks: Vec<CheckRecord>,
    pub all_pass: bool,
}

impl Report {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Seeded sample points kept away from the roots.
pub struct Sampler {
    rng: ChaCha8Rng,
    roots: Vec<C64>,
    radius: f64,
}

impl Sampler {
    pub fn new(seed: u64, roots: &[C64]) -> Self {
        let radius = 2.0 * roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), roots: roots.to_vec(), radius }
    }

    /// A point in the box of half-width `radius`, at distance at least `0.1·radius`
    /// from every root.
    pub fn point(&mut self) -> C64 {
        loop {
            let z = c(self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0)) * self.radius;
            if self.roots.iter().all(|r| (z - r).norm() > 0.1 * self.radius) {
                return z;
            }
        }
    }

    pub fn points(&mut self, k: usize) -> Vec<C64> {
        (0..k).map(|_| self.point()).collect()
    }

    /// A unit complex number.
    pub fn phase(&mut self) -> C64 {
        C64::from_polar(1.0, self.rng.random_range(0.0..std::f64::consts::TAU))
    }
}

/// Roots moved by `eps·max(1, |s|∞)` in seeded random directions.
pub fn perturbed(sol: &BetheSolution, model: &ModelSpec, eps: f64, seed: u64) -> Result<BetheSolution> {
    let mut sampler = Sampler::new(seed ^ 0x5eed, &sol.s);
    let size = eps * sol.scale().max(1.0);
    let s = sol.s.iter().map(|z| z + sampler.phase() * size).collect();
    BetheSolution::from_roots(model, s)
}

/// Largest pointwise difference, relative to `max(1, |a|)`, of two tensors in two
/// variables on the grid `xs × xps`.
pub fn grid_difference(a: &PoleTensor, b: &PoleTensor, sign: f64, xs: &[C64], xps: &[C64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in xs {
        for &xp in xps {
            let va = a.eval(&[x, xp]);
            let vb = b.eval(&[x, xp]) * sign;
            worst = worst.max((va - vb).norm() / va.norm().max(1.0));
        }
    }
    worst
}

/// Largest permutation defect over all permutations of the variables.
pub fn symmetry_defect(t: &PoleTensor) -> f64 {
    let n = t.nvars();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut worst: f64 = 0.0;
    // Heap's algorithm over all n! orderings.
    let mut cnt = vec![0; n];
    let mut i = 0;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(cnt[i], i);
            }
            worst = worst.max(t.permutation_defect(&perm));
            cnt[i] += 1;
            i = 0;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    worst
}

/// Lazily built state shared by the checks.
struct Context<'a> {
    model: &'a ModelSpec,
    sol: BetheSolution,
    leading: LeadingData,
    curve: SpectralCurve,
    sampler: Sampler,
    store: Option<Result<CorrelatorStore>>,
}

impl Context<'_> {
    fn store(&mut self) -> Result<&mut CorrelatorStore> {
        if self.store.is_none() {
            let built = KernelTable::build(&self.sol, self.model, &self.leading, depth_for_genus(1))
                .map(|k| CorrelatorStore::new(self.model, &self.leading, k));
            self.store = Some(built);
        }
        match self.store.as_mut().expect("just set") {
            Ok(s) => Ok(s),
            Err(e) => Err(crate::error::Error::Insufficient(format!("kernel table unavailable: {e}"))),
        }
    }
}

fn run_one(ctx: &mut Context, name: &str) -> CheckRecord {
    let p = ctx.model.precision;
    let ys = [C64::new(0.0, 0.0), ctx.sampler.point()];
    match name {
        "bethe" => CheckRecord::from_result(name, BETHE_TOL * p, Ok(ctx.sol.residual)),
        "ode" => CheckRecord::from_result(name, ODE_TOL * p, quantum_curve_residual(&ctx.curve, &ctx.leading.psi, ctx.model)),
        "companion" => {
            let pts: Vec<(C64, C64)> = (0..COMPANION_SAMPLES).map(|_| (ctx.sampler.point(), ctx.sampler.point())).collect();
            CheckRecord::from_result(name, COMPANION_TOL * p, Ok(verify_companion(&ctx.curve, ctx.model, &pts)))
        }
        "loop_g0" => {
            let lead = verify_loop_g0(&ctx.leading, &ctx.curve, ctx.model, &ys);
            let r = ctx.store().and_then(|st| st.verify_loop_g(1, 0, &ys)).map(|x| x.max(lead));
            CheckRecord::from_result(name, LOOP_TOL * p, r)
        }
        "loop_g1" => {
            let r = ctx.store().and_then(|st| st.verify_loop_g(0, 1, &ys));
            CheckRecord::from_result(name, LOOP_TOL * p, r)
        }
        "loop_g1_n1" => {
            let r = ctx.store().and_then(|st| st.verify_loop_g(1, 1, &ys));
            CheckRecord::from_result(name, LOOP_N1_TOL * p, r)
        }
        "compat" => CheckRecord::from_result(name, COMPAT_TOL * p, Ok(compat_residual(&ctx.sol, ctx.model))),
        "hessian" => {
            let r = build_frame_unvalidated(&ctx.sol, ctx.model).map(|f| f.hessian_fd_error);
            CheckRecord::from_result(name, HESSIAN_FD_TOL * p, r)
        }
        "kernel" => {
            let r = ctx.store().and_then(|st| {
                let k = st.kernel();
                Ok(k.verify_g_orders(0..2)?.max(k.gauge_defect()).max(k.last_column_defect()))
            });
            CheckRecord::from_result(name, KERNEL_TOL * p, r)
        }
        "w2_two_route" => {
            let xs = ctx.sampler.points(5);
            let xps = ctx.sampler.points(5);
            let r = build_frame_unvalidated(&ctx.sol, ctx.model)
                .and_then(|f| w2_variational(&f, &ctx.sol, ctx.model))
                .and_then(|var| {
                    let rec = ctx.store()?.w(1, 0)?.clone();
                    Ok(grid_difference(&var, &rec, W2_ROUTE_SIGN, &xs, &xps))
                });
            CheckRecord::from_result(name, TWO_ROUTE_TOL * p, r)
        }
        "symmetry" => {
            let r = ctx.store().and_then(|st| {
                let mut worst: f64 = 0.0;
                for (n, g) in [(1, 0), (2, 0), (1, 1)] {
                    worst = worst.max(symmetry_defect(st.w(n, g)?));
                }
                Ok(worst)
            });
            CheckRecord::from_result(name, SYMMETRY_TOL * p, r)
        }
        other => CheckRecord::from_result(
            other,
            0.0,
            Err(crate::error::Error::InvalidModel(format!("unknown check `{other}`"))),
        ),
    }
}

/// Validate a `--checks` list against [`ALL_CHECKS`].
pub fn parse_checks(list: &str) -> Result<Vec<String>> {
    let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    for n in &names {
        if !ALL_CHECKS.contains(&n.as_str()) {
            return Err(crate::error::Error::InvalidModel(format!(
                "unknown check `{n}` (known: {})",
                ALL_CHECKS.join(",")
            )));
        }
    }
    Ok(names)
}

/// Run the selected checks at `sol` (perturbed first if requested).
pub fn run_checks(sol: &BetheSolution, model: &ModelSpec, opts: &VerifyOptions) -> Result<Report> {
    let sol = if opts.perturb != 0.0 { perturbed(sol, model, opts.perturb, opts.seed)? } else { sol.clone() };
    let leading = leading_data(&sol, model);
    let curve = SpectralCurve::build(&leading, model);
    let sampler = Sampler::new(opts.seed, &sol.s);
    let mut ctx = Context { model, sol, leading, curve, sampler, store: None };
    let selected: Vec<&str> = if opts.checks.is_empty() {
        ALL_CHECKS.to_vec()
    } else {
        ALL_CHECKS.iter().copied().filter(|n| opts.checks.iter().any(|c| c == n)).collect()
    };
    let checks: Vec<CheckRecord> = selected.into_iter().map(|n| run_one(&mut ctx, n)).collect();
    let all_pass = checks.iter().all(|r| r.pass);
    Ok(Report { checks, all_pass })
}

/// JSON for the sampler settings used by a report.
pub fn options_json(opts: &VerifyOptions) -> Value {
    json!({ "checks": opts.checks, "seed": opts.seed, "perturb": opts.perturb })
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
    fn ma_passes_every_check() {
        let (m, sol) = ma();
        let rep = run_checks(&sol, &m, &VerifyOptions::default()).unwrap();
        for r in &rep.checks {
            assert!(r.pass, "{r:?}");
        }
        assert_eq!(rep.checks.len(), ALL_CHECKS.len());
    }

    #[test]
    fn perturbation_breaks_compatibility() {
        let (m, sol) = ma();
        let opts = VerifyOptions { checks: vec!["compat".into()], seed: 0, perturb: 1e-2 };
        let rep = run_checks(&sol, &m, &opts).unwrap();
        assert!(!rep.all_pass);
        assert!(rep.checks[0].residual > 1e-6);
    }

    #[test]
    fn subsetting_and_unknown_names() {
        assert_eq!(parse_checks("ode, companion").unwrap(), vec!["ode", "companion"]);
        assert!(parse_checks("ode,bogus").is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_avoids_roots() {
        let roots = [re(1.0)];
        let a = Sampler::new(3, &roots).points(10);
        let b = Sampler::new(3, &roots).points(10);
        assert_eq!(a, b);
        assert!(a.iter().all(|z| (z - re(1.0)).norm() > 0.39));
    }
}
