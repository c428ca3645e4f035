//! Problem-spec documents.
//!
//! ```json
//! {
//!   "components":   [{"name": "X1", "symbols": ["0", "1"]}, ...],
//!   "reproduction": [{"name": "Y1", "symbols": ["0", "1", "e"]}, ...],
//!   "pmf":          [0.25, 0.25, 0.25, 0.25],
//!   "distortion":   [0, 1, "forbidden", ...],
//!   "k": 1,
//!   "options": {"grid": 201, "lambda_min": 0.001, ...}
//! }
//! ```
//!
//! `pmf` is row-major over the source components (last component fastest);
//! `distortion` is row-major over (source symbol, reproduction symbol).
//! `reproduction` defaults to copies of the source alphabets, `distortion`
//! to the probability of error (only when the alphabets agree), `k` to 1 and
//! every option to its library default.

use std::fmt;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::distortion::DistortionTable;
use crate::prob::{normalize_probs, ComponentAlphabet, JointPmf, ProductSet, RENORMALIZE_TOL};
use crate::problem::Problem;
use crate::srdf::SrdfOptions;

/// One validation failure, located by a JSON-pointer-like path.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecOptions {
    pub grid: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub cap: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub seed: u64,
}

impl Default for SpecOptions {
    fn default() -> Self {
        let o = SrdfOptions::default();
        Self {
            grid: o.grid,
            lambda_min: o.lambda_min,
            lambda_max: o.lambda_max,
            lambda_points: o.lambda_points,
            tol: o.tol,
            max_iter: o.max_iter,
            cap: o.cap,
            threads: 0,
            seed: 0,
        }
    }
}

impl SpecOptions {
    pub fn srdf(&self) -> SrdfOptions {
        SrdfOptions {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            lambda_points: self.lambda_points,
            tol: self.tol,
            max_iter: self.max_iter,
            grid: self.grid,
            cap: self.cap,
            ..SrdfOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistortionEntry {
    Value(f64),
    Forbidden,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub components: Vec<ComponentAlphabet>,
    pub reproduction: Vec<ComponentAlphabet>,
    /// Normalized.
    pub pmf: Vec<f64>,
    pub distortion: Vec<DistortionEntry>,
    pub k: usize,
    pub options: SpecOptions,
}

struct Errors(Vec<SpecError>);

impl Errors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(SpecError { path: path.into(), message: message.into() });
    }
}

fn alphabets(v: Option<&Value>, path: &str, errs: &mut Errors) -> Option<Vec<ComponentAlphabet>> {
    let Some(v) = v else { return None };
    let Some(items) = v.as_array() else {
        errs.push(path, "expected an array of components");
        return None;
    };
    if items.is_empty() {
        errs.push(path, "needs at least one component");
        return None;
    }
    let mut out = Vec::new();
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let p = format!("{path}/{i}");
        let Some(obj) = item.as_object() else {
            errs.push(&p, "expected an object with `name` and `symbols`");
            ok = false;
            continue;
        };
        for key in obj.keys() {
            if key != "name" && key != "symbols" {
                errs.push(format!("{p}/{key}"), "unknown field");
                ok = false;
            }
        }
        let name = match obj.get("name") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                errs.push(format!("{p}/name"), "expected a string");
                ok = false;
                continue;
            }
            None => {
                errs.push(format!("{p}/name"), "missing");
                ok = false;
                continue;
            }
        };
        let symbols: Option<Vec<String>> = obj.get("symbols").and_then(|s| s.as_array()).and_then(|a| {
            a.iter()
                .map(|x| match x {
                    Value::String(s) => Some(s.clone()),
                    Value::Number(n) => Some(n.to_string()),
                    _ => None,
                })
                .collect()
        });
        let Some(symbols) = symbols else {
            errs.push(format!("{p}/symbols"), "expected an array of symbol strings");
            ok = false;
            continue;
        };
        match ComponentAlphabet::new(name, symbols) {
            Ok(c) => out.push(c),
            Err(e) => {
                errs.push(format!("{p}/symbols"), e.to_string());
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn product(c: &[ComponentAlphabet]) -> usize {
    c.iter().map(|a| a.len()).product()
}

fn parse_options(v: Option<&Value>, errs: &mut Errors) -> SpecOptions {
    let mut o = SpecOptions::default();
    let Some(v) = v else { return o };
    let Some(obj) = v.as_object() else {
        errs.push("/options", "expected an object");
        return o;
    };
    for (key, val) in obj {
        let p = format!("/options/{key}");
        let pos_f = |errs: &mut Errors| match val.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            _ => {
                errs.push(&p, "expected a positive finite number");
                None
            }
        };
        let uint = |errs: &mut Errors, min: u64| match val.as_u64() {
            Some(x) if x >= min => Some(x),
            _ => {
                errs.push(&p, format!("expected an integer ≥ {min}"));
                None
            }
        };
        match key.as_str() {
            "grid" => o.grid = uint(errs, 1).map_or(o.grid, |x| x as usize),
            "lambda_min" => o.lambda_min = pos_f(errs).unwrap_or(o.lambda_min),
            "lambda_max" => o.lambda_max = pos_f(errs).unwrap_or(o.lambda_max),
            "lambda_points" => o.lambda_points = uint(errs, 2).map_or(o.lambda_points, |x| x as usize),
            "tol" => o.tol = pos_f(errs).unwrap_or(o.tol),
            "max_iter" => o.max_iter = uint(errs, 1).map_or(o.max_iter, |x| x as usize),
            "cap" => o.cap = uint(errs, 1).unwrap_or(o.cap),
            "threads" => o.threads = uint(errs, 0).map_or(o.threads, |x| x as usize),
            "seed" => o.seed = uint(errs, 0).unwrap_or(o.seed),
            _ => errs.push(p, "unknown field"),
        }
    }
    if o.lambda_min >= o.lambda_max {
        errs.push("/options/lambda_min", "must be smaller than lambda_max");
    }
    o
}

/// Parse and validate a spec, reporting every problem found.
pub fn parse_problem_spec(text: &str) -> Result<ProblemSpec, Vec<SpecError>> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        vec![SpecError { path: "/".into(), message: format!("not a JSON document: {e}") }]
    })?;
    let Some(obj) = root.as_object() else {
        return Err(vec![SpecError { path: "/".into(), message: "expected an object".into() }]);
    };
    let mut errs = Errors(Vec::new());
    for key in obj.keys() {
        if !["components", "reproduction", "pmf", "distortion", "k", "options"].contains(&key.as_str()) {
            errs.push(format!("/{key}"), "unknown field");
        }
    }
    if !obj.contains_key("components") {
        errs.push("/components", "missing");
    }
    if !obj.contains_key("pmf") {
        errs.push("/pmf", "missing");
    }
    let components = alphabets(obj.get("components"), "/components", &mut errs);
    let reproduction = match obj.get("reproduction") {
        Some(v) => alphabets(Some(v), "/reproduction", &mut errs),
        None => components.as_ref().map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, a)| ComponentAlphabet { name: format!("Y{}", i + 1), symbols: a.symbols.clone() })
                .collect()
        }),
    };
    if let (Some(c), Some(r)) = (&components, &reproduction) {
        if c.len() != r.len() {
            errs.push("/reproduction", format!("{} components for {} source components", r.len(), c.len()));
        }
    }

    let mut pmf = None;
    if let Some(v) = obj.get("pmf") {
        match v.as_array() {
            None => errs.push("/pmf", "expected an array of probabilities"),
            Some(a) => {
                let mut vals = Vec::with_capacity(a.len());
                let mut ok = true;
                for (i, x) in a.iter().enumerate() {
                    match x.as_f64() {
                        Some(p) if p >= 0.0 && p.is_finite() => vals.push(p),
                        Some(_) => {
                            errs.push(format!("/pmf/{i}"), "probability must be nonnegative and finite");
                            ok = false;
                        }
                        None => {
                            errs.push(format!("/pmf/{i}"), "expected a number");
                            ok = false;
                        }
                    }
                }
                if let Some(c) = &components {
                    if a.len() != product(c) {
                        errs.push("/pmf", format!("has {} entries, the source alphabet has {}", a.len(), product(c)));
                        ok = false;
                    }
                }
                if ok {
                    match normalize_probs(vals) {
                        Ok(p) => pmf = Some(p),
                        Err(_) => {
                            let s: f64 = a.iter().filter_map(|x| x.as_f64()).sum();
                            errs.push("/pmf", format!("sums to {s}, not within {RENORMALIZE_TOL} of 1"));
                        }
                    }
                }
            }
        }
    }

    let mut distortion = None;
    match obj.get("distortion") {
        Some(v) => match v.as_array() {
            None => errs.push("/distortion", "expected an array"),
            Some(a) => {
                let mut vals = Vec::with_capacity(a.len());
                for (i, x) in a.iter().enumerate() {
                    match x {
                        Value::String(s) if s == "forbidden" => vals.push(DistortionEntry::Forbidden),
                        Value::Number(n) => match n.as_f64() {
                            Some(d) if d >= 0.0 && d.is_finite() => vals.push(DistortionEntry::Value(d)),
                            _ => errs.push(format!("/distortion/{i}"), "distortion must be nonnegative and finite"),
                        },
                        _ => errs.push(format!("/distortion/{i}"), "expected a number or \"forbidden\""),
                    }
                }
                if let (Some(c), Some(r)) = (&components, &reproduction) {
                    let want = product(c) * product(r);
                    if a.len() != want {
                        errs.push("/distortion", format!("has {} entries, expected {want}", a.len()));
                    }
                }
                if vals.len() == a.len() {
                    distortion = Some(vals);
                }
            }
        },
        None => {
            if let (Some(c), Some(r)) = (&components, &reproduction) {
                let same = c.len() == r.len() && c.iter().zip(r).all(|(a, b)| a.len() == b.len());
                if same {
                    let t = DistortionTable::probability_of_error(&c.iter().map(|a| a.len()).collect::<Vec<_>>());
                    distortion = Some(t.entries().into_iter().map(|v| v.map_or(DistortionEntry::Forbidden, DistortionEntry::Value)).collect());
                } else {
                    errs.push("/distortion", "missing (the probability-of-error default needs matching alphabets)");
                }
            }
        }
    }

    let k = match obj.get("k") {
        None => 1,
        Some(v) => match v.as_u64() {
            Some(k) => k as usize,
            None => {
                errs.push("/k", "expected a positive integer");
                1
            }
        },
    };
    if let Some(c) = &components {
        if k == 0 || k > c.len() {
            errs.push("/k", format!("k = {k} outside [1, {}]", c.len()));
        }
    }
    let options = parse_options(obj.get("options"), &mut errs);

    if !errs.0.is_empty() {
        return Err(errs.0);
    }
    let spec = ProblemSpec {
        components: components.expect("validated"),
        reproduction: reproduction.expect("validated"),
        pmf: pmf.expect("validated"),
        distortion: distortion.expect("validated"),
        k,
        options,
    };
    // catches structural issues such as a source symbol with every reproduction forbidden
    spec.to_problem().map_err(|e| vec![SpecError { path: "/distortion".into(), message: e.to_string() }])?;
    Ok(spec)
}

impl ProblemSpec {
    pub fn to_problem(&self) -> crate::error::Result<Problem> {
        let pmf = JointPmf::with_partial_support(self.components.clone(), self.pmf.clone())?;
        let repro_set = ProductSet::new(self.reproduction.iter().map(|a| a.len()).collect());
        let entries = self
            .distortion
            .iter()
            .map(|e| match e {
                DistortionEntry::Value(v) => Some(*v),
                DistortionEntry::Forbidden => None,
            })
            .collect();
        let d = DistortionTable::new(pmf.shape().clone(), repro_set, entries)?;
        Problem::new(pmf, self.reproduction.clone(), d)
    }

    /// Canonical document with every default written out.
    pub fn to_json(&self) -> Value {
        let comps = |c: &[ComponentAlphabet]| -> Value {
            c.iter().map(|a| json!({"name": a.name, "symbols": a.symbols})).collect()
        };
        let d: Vec<Value> = self
            .distortion
            .iter()
            .map(|e| match e {
                DistortionEntry::Value(v) => json!(v),
                DistortionEntry::Forbidden => json!("forbidden"),
            })
            .collect();
        let o = &self.options;
        let mut options = Map::new();
        options.insert("grid".into(), json!(o.grid));
        options.insert("lambda_min".into(), json!(o.lambda_min));
        options.insert("lambda_max".into(), json!(o.lambda_max));
        options.insert("lambda_points".into(), json!(o.lambda_points));
        options.insert("tol".into(), json!(o.tol));
        options.insert("max_iter".into(), json!(o.max_iter));
        options.insert("cap".into(), json!(o.cap));
        options.insert("threads".into(), json!(o.threads));
        options.insert("seed".into(), json!(o.seed));
        json!({
            "components": comps(&self.components),
            "reproduction": comps(&self.reproduction),
            "pmf": self.pmf,
            "distortion": d,
            "k": self.k,
            "options": options,
        })
    }

    /// Hex SHA-256 of the canonical document.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().to_string().as_bytes()))
    }

    /// Spec of an in-memory problem.
    pub fn from_problem(problem: &Problem, k: usize, options: SpecOptions) -> Self {
        let distortion = problem
            .distortion
            .entries()
            .into_iter()
            .map(|v| v.map_or(DistortionEntry::Forbidden, DistortionEntry::Value))
            .collect();
        Self {
            components: problem.pmf.components().to_vec(),
            reproduction: problem.repro.clone(),
            pmf: problem.pmf.probs().to_vec(),
            distortion,
            k,
            options,
        }
    }
}
