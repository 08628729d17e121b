//! Model definition: the potentials, temperature, root count and solver settings.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::json::{cjson, cvec_json, parse_complex, parse_cvec};
use crate::linalg::C64;
use crate::ratfun::Poly;

/// How the Bethe system is solved.
#[derive(Clone, Debug, PartialEq)]
pub enum BetheMode {
    /// Continuation in T from the decoupled roots with the given indices
    /// (into the sorted list of decoupled roots). `None` until the user chooses.
    Homotopy { root_selection: Option<Vec<usize>> },
    /// Newton iteration from explicit starting points.
    Direct { initial_guesses: Vec<C64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetheConfig {
    pub mode: BetheMode,
    /// Number of homotopy substeps from T=0 to the target temperature.
    pub steps: usize,
    /// Newton stopping tolerance on ‖(V₂′(B)−S)e‖∞.
    pub tol: f64,
    /// Newton iteration cap per substep.
    pub max_iter: usize,
    /// Number of times a failed homotopy step may be halved.
    pub max_halvings: usize,
}

impl Default for BetheConfig {
    fn default() -> Self {
        BetheConfig {
            mode: BetheMode::Homotopy { root_selection: None },
            steps: 20,
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

/// A validated two-matrix model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// V₁′ coefficients `t_k`, lowest degree first.
    pub v1p: Poly,
    /// V₂′ coefficients `t̃_k`, lowest degree first.
    pub v2p: Poly,
    /// Antiderivatives with zero constant term.
    pub v1: Poly,
    pub v2: Poly,
    pub temperature: f64,
    pub n: usize,
    pub bethe: BetheConfig,
    /// Multiplies every tolerance of the engine.
    pub precision: f64,
}

const KEYS: [&str; 6] = ["V1_prime", "V2_prime", "T", "N", "bethe", "precision"];
const BETHE_KEYS: [&str; 7] = ["mode", "root_selection", "initial_guesses", "steps", "tol", "max_iter", "max_halvings"];

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::InvalidModel(format!("unknown key `{k}` in {ctx}")));
        }
    }
    Ok(())
}

fn get_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::InvalidModel(format!("`{what}` must be a non-negative integer")))
}

fn get_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::InvalidModel(format!("`{what}` must be a number")))
}

impl ModelSpec {
    /// Build and validate a model from coefficient lists.
    pub fn new(v1p: Vec<C64>, v2p: Vec<C64>, temperature: f64, n: usize) -> Result<Self> {
        let d1 = v1p.len().checked_sub(1).ok_or_else(|| Error::InvalidModel("V1_prime is empty".into()))?;
        let d2 = v2p.len().checked_sub(1).ok_or_else(|| Error::InvalidModel("V2_prime is empty".into()))?;
        if v1p[d1] == C64::new(0.0, 0.0) {
            return Err(Error::InvalidModel("zero leading coefficient in V1_prime".into()));
        }
        if v2p[d2] == C64::new(0.0, 0.0) {
            return Err(Error::InvalidModel("zero leading coefficient in V2_prime".into()));
        }
        if d1 == 0 {
            return Err(Error::InvalidModel("V1_prime must have degree at least 1".into()));
        }
        if d2 == 0 {
            return Err(Error::InvalidModel("V2_prime must have degree at least 1 (d2 = 0 is rejected)".into()));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidModel("T must be a positive real number".into()));
        }
        if n == 0 {
            return Err(Error::InvalidModel("N must be a positive integer".into()));
        }
        let v1p = Poly::new(v1p);
        let v2p = Poly::new(v2p);
        Ok(ModelSpec {
            v1: v1p.antiderivative(),
            v2: v2p.antiderivative(),
            v1p,
            v2p,
            temperature,
            n,
            bethe: BetheConfig::default(),
            precision: 1.0,
        })
    }

    pub fn with_bethe(mut self, bethe: BetheConfig) -> Self {
        self.bethe = bethe;
        self
    }

    pub fn with_selection(mut self, sel: &[usize]) -> Self {
        self.bethe.mode = BetheMode::Homotopy { root_selection: Some(sel.to_vec()) };
        self
    }

    pub fn with_guesses(mut self, guesses: &[C64]) -> Self {
        self.bethe.mode = BetheMode::Direct { initial_guesses: guesses.to_vec() };
        self
    }

    /// Parse a model document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("malformed JSON: {e}")))?;
        Self::from_json(&v)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidModel(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::InvalidModel("model must be a JSON object".into()))?;
        reject_unknown(obj, &KEYS, "model")?;
        let need = |k: &str| obj.get(k).ok_or_else(|| Error::InvalidModel(format!("missing key `{k}`")));
        let t = parse_cvec(need("V1_prime")?)?;
        let tt = parse_cvec(need("V2_prime")?)?;
        let temperature = get_f64(need("T")?, "T")?;
        let nval = need("N")?;
        let n = match nval.as_i64() {
            Some(x) if x > 0 => x as usize,
            _ => return Err(Error::InvalidModel("N must be a positive integer".into())),
        };
        let mut m = ModelSpec::new(t, tt, temperature, n)?;
        if let Some(p) = obj.get("precision") {
            let p = get_f64(p, "precision")?;
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidModel("precision must be positive".into()));
            }
            m.precision = p;
        }
        if let Some(b) = obj.get("bethe") {
            m.bethe = parse_bethe(b, n)?;
        }
        Ok(m)
    }

    /// Canonical JSON form (stable key order, complex numbers as pairs).
    pub fn to_json(&self) -> Value {
        let mut bethe = Map::new();
        match &self.bethe.mode {
            BetheMode::Homotopy { root_selection } => {
                bethe.insert("mode".into(), json!("homotopy"));
                if let Some(sel) = root_selection {
                    bethe.insert("root_selection".into(), json!(sel));
                }
            }
            BetheMode::Direct { initial_guesses } => {
                bethe.insert("mode".into(), json!("direct"));
                bethe.insert("initial_guesses".into(), cvec_json(initial_guesses));
            }
        }
        bethe.insert("steps".into(), json!(self.bethe.steps));
        bethe.insert("tol".into(), json!(self.bethe.tol));
        bethe.insert("max_iter".into(), json!(self.bethe.max_iter));
        bethe.insert("max_halvings".into(), json!(self.bethe.max_halvings));
        json!({
            "V1_prime": cvec_json(&self.t_coeffs()),
            "V2_prime": cvec_json(&self.tt_coeffs()),
            "T": self.temperature,
            "N": self.n,
            "bethe": Value::Object(bethe),
            "precision": self.precision,
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_json()).expect("model serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn d1(&self) -> usize {
        self.v1p.degree().expect("validated")
    }

    pub fn d2(&self) -> usize {
        self.v2p.degree().expect("validated")
    }

    /// `t_k` (zero beyond the degree).
    pub fn t(&self, k: usize) -> C64 {
        self.v1p.coeff(k)
    }

    /// `t̃_k` (zero beyond the degree).
    pub fn tt(&self, k: usize) -> C64 {
        self.v2p.coeff(k)
    }

    pub fn t_coeffs(&self) -> Vec<C64> {
        (0..=self.d1()).map(|k| self.t(k)).collect()
    }

    pub fn tt_coeffs(&self) -> Vec<C64> {
        (0..=self.d2()).map(|k| self.tt(k)).collect()
    }

    /// The ratio T/N that multiplies most formulas.
    pub fn c(&self) -> C64 {
        C64::new(self.temperature / self.n as f64, 0.0)
    }

    /// `V, V′, …, V^(max)` at `x` for potential 1 or 2.
    pub fn eval_v_derivs(&self, which: u8, x: C64, max_deriv: usize) -> Vec<C64> {
        match which {
            1 => self.v1.derivs_at(x, max_deriv),
            2 => self.v2.derivs_at(x, max_deriv),
            _ => panic!("potential index must be 1 or 2"),
        }
    }

    /// A copy with `t_m` shifted by `h` (used by finite-difference checks).
    pub fn with_t_shift(&self, m: usize, h: C64) -> Result<Self> {
        let mut t = self.t_coeffs();
        if t.len() <= m {
            t.resize(m + 1, C64::new(0.0, 0.0));
        }
        t[m] += h;
        let mut out = ModelSpec::new(t, self.tt_coeffs(), self.temperature, self.n)?;
        out.bethe = self.bethe.clone();
        out.precision = self.precision;
        Ok(out)
    }

    /// A copy with the same potentials but a different root count and mode.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        let mut out = ModelSpec::new(self.t_coeffs(), self.tt_coeffs(), self.temperature, n)?;
        out.precision = self.precision;
        Ok(out)
    }
}

fn parse_bethe(v: &Value, n: usize) -> Result<BetheConfig> {
    let obj = v.as_object().ok_or_else(|| Error::InvalidModel("`bethe` must be an object".into()))?;
    reject_unknown(obj, &BETHE_KEYS, "bethe")?;
    let mut cfg = BetheConfig::default();
    let mode = obj.get("mode").and_then(|m| m.as_str()).unwrap_or("homotopy");
    cfg.mode = match mode {
        "homotopy" => {
            if obj.contains_key("initial_guesses") {
                return Err(Error::InvalidModel("`initial_guesses` requires mode \"direct\"".into()));
            }
            let sel = match obj.get("root_selection") {
                None => None,
                Some(s) => {
                    let a = s.as_array().ok_or_else(|| Error::InvalidModel("`root_selection` must be an array".into()))?;
                    Some(a.iter().map(|x| get_usize(x, "root_selection")).collect::<Result<Vec<_>>>()?)
                }
            };
            if let Some(s) = &sel
                && s.len() != n
            {
                return Err(Error::InvalidModel(format!("root_selection has {} entries but N = {n}", s.len())));
            }
            BetheMode::Homotopy { root_selection: sel }
        }
        "direct" => {
            if obj.contains_key("root_selection") {
                return Err(Error::InvalidModel("`root_selection` requires mode \"homotopy\"".into()));
            }
            let g = obj
                .get("initial_guesses")
                .ok_or_else(|| Error::InvalidModel("direct mode needs `initial_guesses`".into()))?;
            let g = parse_cvec(g)?;
            if g.len() != n {
                return Err(Error::InvalidModel(format!("initial_guesses has {} entries but N = {n}", g.len())));
            }
            BetheMode::Direct { initial_guesses: g }
        }
        other => return Err(Error::InvalidModel(format!("unknown bethe mode `{other}`"))),
    };
    if let Some(x) = obj.get("steps") {
        cfg.steps = get_usize(x, "steps")?.max(1);
    }
    if let Some(x) = obj.get("tol") {
        cfg.tol = get_f64(x, "tol")?;
        if cfg.tol.is_nan() || cfg.tol <= 0.0 {
            return Err(Error::InvalidModel("`tol` must be positive".into()));
        }
    }
    if let Some(x) = obj.get("max_iter") {
        cfg.max_iter = get_usize(x, "max_iter")?;
    }
    if let Some(x) = obj.get("max_halvings") {
        cfg.max_halvings = get_usize(x, "max_halvings")?;
    }
    Ok(cfg)
}

/// Evaluate a complex-valued JSON field (re-exported for the CLI).
pub fn complex_from_json(v: &Value) -> Result<C64> {
    parse_complex(v)
}

pub fn complex_to_json(z: C64) -> Value {
    cjson(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    const MA: &str = r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":1,"N":1}"#;

    #[test]
    fn loads_reference_model() {
        let m = ModelSpec::from_json_str(MA).unwrap();
        assert_eq!((m.d1(), m.d2()), (1, 2));
        assert_eq!(m.c(), re(1.0));
        let v1 = m.eval_v_derivs(1, re(1.0), 3);
        assert_eq!(v1, vec![re(0.5), re(1.0), re(1.0), re(0.0)]);
        let v2 = m.eval_v_derivs(2, re(1.0), 3);
        assert!((v2[0] - re(1.0 / 3.0)).norm() < 1e-15);
        assert_eq!(&v2[1..], &[re(1.0), re(2.0), re(2.0)]);
        assert_eq!(m.eval_v_derivs(1, re(0.0), 0), vec![re(0.0)]);
    }

    #[test]
    fn rejects_invalid_documents() {
        for bad in [
            r#"{"V1_prime":[0,1],"V2_prime":[1],"T":1,"N":1}"#,
            r#"{"V1_prime":[0,0],"V2_prime":[0,0,1],"T":1,"N":1}"#,
            r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":1,"N":0}"#,
            r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":1,"N":1,"extra":2}"#,
            r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":-1,"N":1}"#,
            r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":1,"N":2,"bethe":{"root_selection":[0]}}"#,
            r#"{"V1_prime":[0,1],"V2_prime":[0,0,1],"T":1,"N":1,"bethe":{"mode":"direct"}}"#,
        ] {
            assert!(ModelSpec::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn complex_coefficients_and_round_trip() {
        let text = r#"{"V1_prime":[[0,0.5],1],"V2_prime":[0,0,[1,0]],"T":0.5,"N":2,
                       "bethe":{"mode":"direct","initial_guesses":[0,[1,0.1]],"tol":1e-11},"precision":2}"#;
        let m = ModelSpec::from_json_str(text).unwrap();
        assert_eq!(m.t(0), C64::new(0.0, 0.5));
        let again = ModelSpec::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
        assert_eq!(again.hash(), m.hash());
    }
}
