//! The run manifest embedded in every output document.
//!
//! It holds only deterministic data, so identical invocations write identical bytes.

use betamm_core::{BetheSolution, ModelSpec};
use serde_json::{json, Map, Value};

use crate::Common;

pub struct Manifest {
    command: &'static str,
    model_hash: String,
    model: Value,
    parameters: Map<String, Value>,
    counters: Map<String, Value>,
    output: Value,
}

impl Manifest {
    pub fn new(command: &'static str, model: &ModelSpec, c: &Common) -> Self {
        let mut parameters = Map::new();
        parameters.insert("model_path".into(), json!(c.model.display().to_string()));
        parameters.insert("seed".into(), json!(c.seed));
        parameters.insert("precision".into(), json!(model.precision));
        if let Some(cache) = &c.cache {
            parameters.insert("cache".into(), json!(cache.display().to_string()));
        }
        Manifest {
            command,
            model_hash: model.hash(),
            model: model.to_json(),
            parameters,
            counters: Map::new(),
            output: match &c.out {
                Some(p) => json!(p.display().to_string()),
                None => json!("stdout"),
            },
        }
    }

    pub fn parameter(&mut self, key: &str, v: Value) {
        self.parameters.insert(key.into(), v);
    }

    pub fn counter(&mut self, key: &str, v: Value) {
        self.counters.insert(key.into(), v);
    }

    /// Record the solver counters of a solution.
    pub fn solution(&mut self, sol: &BetheSolution) {
        self.counter("newton_iterations", json!(sol.newton_iterations));
        self.counter("homotopy_points", json!(sol.trace.len()));
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "model_hash": self.model_hash,
            "model": self.model,
            "parameters": Value::Object(self.parameters.clone()),
            "counters": Value::Object(self.counters.clone()),
            "output": self.output,
        })
    }
}
