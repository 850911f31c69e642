//! Browser bindings: thin JSON adapters over the library's fit, convergence,
//! and counterexample operations. Each export returns a JSON string so the
//! page needs no generated TypeScript glue beyond the wasm-bindgen loader.

use monospline::{
    builtin, builtin_functions, counterexample_xn, run_convergence, ApproxConfig, ApproxError,
    Partition, ProjectionResult, TargetFunction,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn target(function: &str) -> Result<TargetFunction, JsError> {
    builtin(function).ok_or_else(|| JsError::new(&format!("unknown function `{function}`")))
}

fn partition_for(kind: &str, a: f64, b: f64, size: usize, seed: u64) -> Result<Partition, JsError> {
    match kind {
        "uniform" => Partition::uniform(a, b, size),
        "chebyshev" => Partition::chebyshev_first_kind(a, b, size),
        "random" => Partition::random(a, b, size, seed),
        other => return Err(JsError::new(&format!("unknown partition kind `{other}`"))),
    }
    .map_err(err)
}

/// Builtin target ids, in display order.
#[wasm_bindgen]
pub fn list_functions() -> String {
    let ids: Vec<String> = builtin_functions()
        .iter()
        .map(|f| f.id().to_string())
        .collect();
    serde_json::to_string(&ids).expect("string list serializes")
}

#[derive(Serialize)]
struct FitSummary {
    function: String,
    p: f64,
    m: usize,
    l: usize,
    objective: f64,
    optimality_gap: f64,
    iterations: usize,
    converged: bool,
    knots: Vec<f64>,
    /// 401-point sampling of the target (`f`) and the fit (`s`).
    x: Vec<f64>,
    f: Vec<f64>,
    s: Vec<f64>,
}

/// Best L^p fit of a builtin target on one partition, with a plot-ready
/// sampling of target and fit.
#[wasm_bindgen]
pub fn fit(
    function: &str,
    m: usize,
    l: usize,
    p: f64,
    size: usize,
    partition: &str,
    seed: u64,
) -> Result<String, JsError> {
    let f = target(function)?;
    let part = partition_for(partition, f.a(), f.b(), size, seed)?;
    let cfg = ApproxConfig::new(p, m, l);
    let (result, converged): (ProjectionResult, bool) = match monospline::project(&f, &part, &cfg) {
        Ok(r) => (r, true),
        Err(ApproxError::NonConvergence { result, .. }) => (*result, false),
        Err(e) => return Err(err(e)),
    };
    let (a, b) = (f.a(), f.b());
    let n = 400usize;
    let mut xs = Vec::with_capacity(n + 1);
    let mut fs = Vec::with_capacity(n + 1);
    let mut ss = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i == n {
            b
        } else {
            a + (b - a) * i as f64 / n as f64
        };
        xs.push(x);
        fs.push(f.eval(x));
        ss.push(result.spline.eval(x).map_err(err)?);
    }
    let summary = FitSummary {
        function: function.to_string(),
        p,
        m,
        l,
        objective: result.objective,
        optimality_gap: result.optimality_gap,
        iterations: result.iterations,
        converged,
        knots: part.knots().to_vec(),
        x: xs,
        f: fs,
        s: ss,
    };
    serde_json::to_string(&summary).map_err(err)
}

/// Convergence ladder over comma-separated sizes; the report rows carry the
/// L^p error, global/inner sup errors, endpoint errors, the interpolant
/// bound (when `m >= 2l + 1`), and the optimality gap.
#[wasm_bindgen]
pub fn converge(
    function: &str,
    m: usize,
    l: usize,
    p: f64,
    sizes: &str,
    partition: &str,
    seed: u64,
) -> Result<String, JsError> {
    let f = target(function)?;
    let mut parsed: Vec<usize> = Vec::new();
    for item in sizes.split(',') {
        let k: usize = item
            .trim()
            .parse()
            .map_err(|_| JsError::new(&format!("bad size `{item}`")))?;
        parsed.push(k);
    }
    if parsed.windows(2).any(|w| w[1] <= w[0]) || parsed.iter().any(|&k| k < 2) {
        return Err(JsError::new(
            "sizes must be strictly increasing and at least 2",
        ));
    }
    let parts: Result<Vec<Partition>, JsError> = parsed
        .iter()
        .enumerate()
        .map(|(i, &k)| partition_for(partition, f.a(), f.b(), k, seed ^ (i as u64 + 1)))
        .collect();
    let (a, b) = (f.a(), f.b());
    let inner = (a + 0.1 * (b - a), a + 0.9 * (b - a));
    let report = run_convergence(&f, &parts?, &ApproxConfig::new(p, m, l), inner).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// The x^n family on [0, 1]: best monotone constant-spline approximations
/// have L^p norm ((np + 1)^(-1/p)) -> 0 while the sup norm stays 1.
#[wasm_bindgen]
pub fn counterexample(p: f64, n_max: u32) -> Result<String, JsError> {
    if n_max == 0 {
        return Err(JsError::new("need at least one exponent"));
    }
    let ns: Vec<u32> = (1..=n_max).collect();
    let rows = counterexample_xn(&ns, p).map_err(err)?;
    serde_json::to_string(&rows).map_err(err)
}
