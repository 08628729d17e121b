//! `betamm`: command-line front end for the engine.
//!
//! Every command reads a model document, runs one stage of the pipeline and writes a
//! JSON document that embeds the run manifest. Exit codes: 0 success, 1 configuration
//! error, 2 solver failure, 3 failed verification.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use betamm_core::bethe::leading_data;
use betamm_core::json::cjson;
use betamm_core::kernel::depth_for_genus;
use betamm_core::spectral::{companion_error, verify_loop_g0};
use betamm_core::verify::{options_json, parse_checks};
use betamm_core::yangyang::build_frame;
use betamm_core::{
    run_checks, solve_bethe, BetheSolution, CorrelatorStore, KernelTable, ModelSpec, SpectralCurve, VerifyOptions, C64,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "betamm", version, about = "Bethe roots, free energies and correlators of the polynomial-ψ two-matrix model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the Bethe system and write the solution.
    Solve(Common),
    /// Run the verification suite and write one record per check.
    Verify(VerifyArgs),
    /// Write the spectral curve and, optionally, its values at `--eval x,y` points.
    Curve(EvalArgs),
    /// Write the Yang–Yang frame and the free energies f₀ and f₁.
    #[command(name = "free-energy")]
    FreeEnergy(Common),
    /// Compute U_n⁽ᵍ⁾ and W_{n+1}⁽ᵍ⁾ by the recursion.
    Correlators(CorrelatorArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model document (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solution written by `solve`, used instead of re-solving.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Seed for sample points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance multiplier, overriding the model's `precision`.
    #[arg(long)]
    precision: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subset of checks (default: all).
    #[arg(long)]
    checks: Option<String>,
    /// Move the roots by this relative amount before checking (negative control).
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Evaluation point as comma-separated complex values (`1.5`, `2-0.5i`), optionally
    /// named by position (`x=…,xp=…`). Repeatable.
    #[arg(long)]
    eval: Vec<String>,
}

#[derive(Args, Debug)]
struct CorrelatorArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Number of extra arguments: the entry holds W_{n+1}.
    #[arg(long)]
    n: usize,
    /// Genus.
    #[arg(long)]
    g: usize,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use betamm_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::InvalidModel(_)) | Some(E::Json(_)) | Some(E::Io(_)) => 1,
        Some(E::Verification { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn classify(error: anyhow::Error) -> Failure {
    Failure { code: exit_code(&error), error }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> std::result::Result<u8, Failure> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Verify(v) => cmd_verify(&v),
        Command::Curve(e) => cmd_curve(&e),
        Command::FreeEnergy(c) => cmd_free_energy(&c),
        Command::Correlators(a) => cmd_correlators(&a),
    }
}

fn config(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn load_model(c: &Common) -> std::result::Result<ModelSpec, Failure> {
    let mut m = ModelSpec::load(&c.model).map_err(|e| classify(e.into()))?;
    if let Some(p) = c.precision {
        if !(p.is_finite() && p > 0.0) {
            return Err(config(anyhow!("--precision must be positive")));
        }
        m.precision = p;
    }
    Ok(m)
}

fn load_solution(c: &Common, model: &ModelSpec) -> std::result::Result<BetheSolution, Failure> {
    match &c.cache {
        None => solve_bethe(model).map_err(|e| classify(e.into())),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read cache {}", path.display()))
                .map_err(config)?;
            let doc: Value = serde_json::from_str(&text).context("malformed cache").map_err(config)?;
            let cached_hash = doc.pointer("/manifest/model_hash").and_then(Value::as_str);
            if cached_hash != Some(model.hash().as_str()) {
                return Err(config(anyhow!("cache {} was written for a different model", path.display())));
            }
            let sol = doc.get("solution").ok_or_else(|| config(anyhow!("cache lacks a solution")))?;
            BetheSolution::from_json(sol, model).map_err(|e| classify(e.into()))
        }
    }
}

fn write_output(c: &Common, doc: &Value) -> std::result::Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(doc).expect("json serializes");
    text.push('\n');
    match &c.out {
        Some(path) => write_file(path, &text).map_err(config),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn document(manifest: Manifest, key: &str, result: Value) -> Value {
    json!({ "manifest": manifest.to_json(), key: result })
}

fn cmd_solve(c: &Common) -> std::result::Result<u8, Failure> {
    let model = load_model(c)?;
    let sol = load_solution(c, &model)?;
    let mut man = Manifest::new("solve", &model, c);
    man.solution(&sol);
    write_output(c, &document(man, "solution", sol.to_json()))?;
    Ok(0)
}

fn cmd_verify(v: &VerifyArgs) -> std::result::Result<u8, Failure> {
    let model = load_model(&v.common)?;
    let checks = match &v.checks {
        Some(list) => parse_checks(list).map_err(|e| classify(e.into()))?,
        None => vec![],
    };
    if !v.perturb.is_finite() {
        return Err(config(anyhow!("--perturb must be finite")));
    }
    let sol = load_solution(&v.common, &model)?;
    let opts = VerifyOptions { checks, seed: v.common.seed, perturb: v.perturb };
    let report = run_checks(&sol, &model, &opts).map_err(|e| classify(e.into()))?;
    let mut man = Manifest::new("verify", &model, &v.common);
    man.solution(&sol);
    man.parameter("verify", options_json(&opts));
    write_output(&v.common, &document(man, "report", report.to_json()))?;
    Ok(if report.all_pass { 0 } else { 3 })
}

/// Parse `1.5`, `-2i`, `0.3-1.2i` or `x=…` into a complex number.
fn parse_complex(text: &str) -> Result<C64> {
    let t = text.rsplit('=').next().unwrap_or(text).trim().replace(' ', "");
    if t.is_empty() {
        bail!("empty value in `{text}`");
    }
    if let Some(body) = t.strip_suffix('i') {
        // Split at the last sign that is not the leading one or part of an exponent.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            s => s,
        };
        let re: f64 = re.parse().with_context(|| format!("bad real part in `{text}`"))?;
        let im: f64 = im.parse().with_context(|| format!("bad imaginary part in `{text}`"))?;
        Ok(C64::new(re, im))
    } else {
        Ok(C64::new(t.parse().with_context(|| format!("bad number `{text}`"))?, 0.0))
    }
}

fn parse_point(text: &str, arity: usize) -> Result<Vec<C64>> {
    let vals: Vec<C64> = text.split(',').map(parse_complex).collect::<Result<_>>()?;
    if vals.len() != arity {
        bail!("--eval `{text}` has {} values, expected {arity}", vals.len());
    }
    Ok(vals)
}

fn cmd_curve(a: &EvalArgs) -> std::result::Result<u8, Failure> {
    let c = &a.common;
    let model = load_model(c)?;
    let points: Vec<Vec<C64>> = a.eval.iter().map(|e| parse_point(e, 2)).collect::<Result<_>>().map_err(config)?;
    let sol = load_solution(c, &model)?;
    let ld = leading_data(&sol, &model);
    let curve = SpectralCurve::build(&ld, &model);
    let evals: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "x": cjson(p[0]),
                "y": cjson(p[1]),
                "E": cjson(curve.eval(p[0], p[1])),
                "companion_rel_err": companion_error(&curve, &model, p[0], p[1]),
            })
        })
        .collect();
    let result = json!({
        "curve": curve.to_json(),
        "leading": ld.to_json(),
        "loop_g0_residual": verify_loop_g0(&ld, &curve, &model, &[C64::new(0.0, 0.0)]),
        "evaluations": evals,
    });
    let mut man = Manifest::new("curve", &model, c);
    man.solution(&sol);
    write_output(c, &document(man, "result", result))?;
    Ok(0)
}

fn cmd_free_energy(c: &Common) -> std::result::Result<u8, Failure> {
    let model = load_model(c)?;
    let sol = load_solution(c, &model)?;
    let frame = build_frame(&sol, &model).map_err(|e| classify(e.into()))?;
    let fe = frame.free_energies(&model).map_err(|e| classify(e.into()))?;
    let result = json!({ "frame": frame.to_json(), "free_energies": fe.to_json() });
    let mut man = Manifest::new("free-energy", &model, c);
    man.solution(&sol);
    write_output(c, &document(man, "result", result))?;
    Ok(0)
}

fn cmd_correlators(a: &CorrelatorArgs) -> std::result::Result<u8, Failure> {
    let c = &a.eval.common;
    let model = load_model(c)?;
    let arity = a.n + 1;
    let points: Vec<Vec<C64>> =
        a.eval.eval.iter().map(|e| parse_point(e, arity)).collect::<Result<_>>().map_err(config)?;
    let sol = load_solution(c, &model)?;
    let ld = leading_data(&sol, &model);
    let kernel = KernelTable::build(&sol, &model, &ld, depth_for_genus(a.g)).map_err(|e| classify(e.into()))?;
    let mut store = CorrelatorStore::new(&model, &ld, kernel);
    let w = store.w(a.n, a.g).map_err(|e| classify(e.into()))?.clone();
    let evals: Vec<Value> = points
        .iter()
        .map(|p| json!({ "point": p.iter().map(|z| cjson(*z)).collect::<Vec<_>>(), "W": cjson(w.eval(p)) }))
        .collect();
    let mut entry = store.to_json(a.n, a.g).map_err(|e| classify(e.into()))?;
    entry["evaluations"] = Value::Array(evals);
    entry["kernel"] = store.kernel().to_json();
    let mut man = Manifest::new("correlators", &model, c);
    man.solution(&sol);
    man.parameter("n", json!(a.n));
    man.parameter("g", json!(a.g));
    man.counter("kernel_depth", json!(store.kernel().depth));
    write_output(c, &document(man, "result", entry))?;
    Ok(0)
}
