//! Command-line front end: spec loading, option merging, dispatch and output.
//!
//! Option precedence is flag, then `SRDF_*` environment variable, then the
//! spec's `options` block, then the library default.

pub mod emit;
pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::Error;
use crate::oracle::{compare_with_brute_force, seeded_instance, COMPARISON_FRACTIONS};
use crate::distortion::fixed_set_instance;
use crate::prob::{subsets_of_size, SubsetIndex};
use crate::problem::{example1, example2, Problem};
use crate::solver::prune_dominated;
use crate::srdf::{
    fixed_set_srdf, irs_srdf, mrs_informed_srdf, mrs_uninformed_bound, mrs_uninformed_randomized_refine,
    pe_fixed_set_srdf, subset_id, SrdfResult,
};
use emit::{curve_report, emit_curve, fmt_g9, Format, RunMetadata};
use spec::{parse_problem_spec, ProblemSpec, SpecOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Oracle disagreement above this many bits fails the `oracle` command.
const ORACLE_TOL: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(name = "srdf", version, about = "Sampling rate distortion functions of discrete multiple sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true, env = "SRDF_LAMBDA_MIN")]
    pub lambda_min: Option<f64>,
    #[arg(long, global = true, env = "SRDF_LAMBDA_MAX")]
    pub lambda_max: Option<f64>,
    #[arg(long, global = true, env = "SRDF_LAMBDA_POINTS")]
    pub lambda_points: Option<usize>,
    #[arg(long, global = true, env = "SRDF_TOL")]
    pub tol: Option<f64>,
    #[arg(long, global = true, env = "SRDF_MAX_ITER")]
    pub max_iter: Option<usize>,
    /// Rows per emitted curve.
    #[arg(long, global = true, env = "SRDF_GRID")]
    pub grid: Option<usize>,
    /// Largest number of point-mass samplers to enumerate.
    #[arg(long, global = true, env = "SRDF_CAP")]
    pub cap: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "SRDF_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, env = "SRDF_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "SRDF_FORMAT", value_enum, default_value = "csv")]
    pub format: Format,
    /// Output directory (created if missing).
    #[arg(long, global = true, env = "SRDF_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate distortion function when a fixed subset is always sampled.
    FixedSet(SetArgs),
    /// Fixed-subset curve under probability of error via the reduced problem.
    PeFixedSet(SetArgs),
    /// Independent random sampler: envelope of all size-k fixed-set curves.
    Irs(KArgs),
    /// Memoryless random sampler with an informed decoder.
    MrsInformed(KArgs),
    /// Upper bounds for the memoryless random sampler with an uninformed decoder.
    MrsUninformedBound(UninformedArgs),
    /// Compare the solver against exhaustive search over quantized kernels.
    Oracle(OracleArgs),
    /// Fixed-set and IRS curves of the erasure/Hamming two-bit example.
    Example1,
    /// All curves of the noisy two-bit example under probability of error.
    Example2(Example2Args),
}

#[derive(Debug, Args)]
pub struct SetArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Observed components: names or one-based indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct KArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's `k`.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UninformedArgs {
    #[command(flatten)]
    pub base: KArgs,
    /// Also run the alternating refinement over randomized samplers.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Check the fixed-set instances of this spec instead of random ones.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Random instances to draw when no spec is given.
    #[arg(long, default_value_t = 20)]
    pub instances: u64,
    /// Kernel entries are multiples of 1/resolution.
    #[arg(long, default_value_t = 40)]
    pub resolution: u32,
}

#[derive(Debug, Args)]
pub struct Example2Args {
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
}

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Validation(Vec<String>),
    Cap(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Cap(_) => EXIT_CAP,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn report(&self) {
        match self {
            Failure::Validation(msgs) => {
                for m in msgs {
                    eprintln!("error: {m}");
                }
            }
            Failure::Cap(m) | Failure::Io(m) => eprintln!("error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => Failure::Cap(e.to_string()),
            _ => Failure::Validation(vec![e.to_string()]),
        }
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_spec(path: &Path) -> Result<ProblemSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    parse_problem_spec(&text)
        .map_err(|errs| Failure::Validation(errs.iter().map(|e| format!("{}: {e}", path.display())).collect()))
}

fn merge(c: &Common, base: &SpecOptions) -> SpecOptions {
    SpecOptions {
        grid: c.grid.unwrap_or(base.grid),
        lambda_min: c.lambda_min.unwrap_or(base.lambda_min),
        lambda_max: c.lambda_max.unwrap_or(base.lambda_max),
        lambda_points: c.lambda_points.unwrap_or(base.lambda_points),
        tol: c.tol.unwrap_or(base.tol),
        max_iter: c.max_iter.unwrap_or(base.max_iter),
        cap: c.cap.unwrap_or(base.cap),
        threads: c.threads.unwrap_or(base.threads),
        seed: c.seed.unwrap_or(base.seed),
    }
}

/// Parse `--set` tokens: component names first, then one-based indices.
fn parse_set(problem: &Problem, tokens: &[String]) -> Result<SubsetIndex, Failure> {
    let comps = problem.pmf.components();
    let mut members = Vec::new();
    for t in tokens {
        let t = t.trim();
        if let Some(i) = comps.iter().position(|c| c.name == t) {
            members.push(i);
        } else if let Ok(i) = t.parse::<usize>() {
            if i == 0 || i > comps.len() {
                return Err(Failure::Validation(vec![format!("--set: index {i} outside 1..={}", comps.len())]));
            }
            members.push(i - 1);
        } else {
            return Err(Failure::Validation(vec![format!("--set: unknown component `{t}`")]));
        }
    }
    SubsetIndex::new(members).map_err(Failure::from)
}

fn check_k(problem: &Problem, k: usize) -> Result<usize, Failure> {
    if k == 0 || k > problem.arity() {
        return Err(Failure::Validation(vec![format!("k = {k} outside [1, {}]", problem.arity())]));
    }
    Ok(k)
}

struct Run {
    command: String,
    spec: ProblemSpec,
    curves: Vec<(String, SrdfResult)>,
    extra: Option<(String, String, Value)>,
    failed_check: bool,
}

fn compute(cli: &Cli) -> Result<Run, Failure> {
    let c = &cli.common;
    let (command, spec, curves): (&str, ProblemSpec, Vec<(String, SrdfResult)>) = match &cli.command {
        Command::FixedSet(a) | Command::PeFixedSet(a) => {
            let mut spec = load_spec(&a.spec)?;
            spec.options = merge(c, &spec.options);
            let problem = spec.to_problem()?;
            let set = parse_set(&problem, &a.set)?;
            let opts = spec.options.srdf();
            if matches!(cli.command, Command::FixedSet(_)) {
                let r = fixed_set_srdf(&problem.pmf, &problem.distortion, &set, &opts)?;
                ("fixed-set", spec, vec![(format!("fixed_set_{}", subset_id(&set)), r)])
            } else {
                if problem.pmf.shape() != problem.distortion.repro() || !problem.distortion.is_probability_of_error() {
                    return Err(Error::AlphabetMismatch(
                        "the reduction needs reproduction alphabets equal to the source ones and the probability-of-error distortion".into(),
                    )
                    .into());
                }
                let r = pe_fixed_set_srdf(&problem.pmf, &set, &opts)?;
                ("pe-fixed-set", spec, vec![(format!("pe_fixed_set_{}", subset_id(&set)), r)])
            }
        }
        Command::Irs(a) | Command::MrsInformed(a) => {
            let mut spec = load_spec(&a.spec)?;
            spec.options = merge(c, &spec.options);
            let problem = spec.to_problem()?;
            let k = check_k(&problem, a.k.unwrap_or(spec.k))?;
            spec.k = k;
            let opts = spec.options.srdf();
            if matches!(cli.command, Command::Irs(_)) {
                let r = irs_srdf(&problem.pmf, &problem.distortion, k, &opts)?;
                ("irs", spec, vec![(format!("irs_k{k}"), r)])
            } else {
                let r = mrs_informed_srdf(&problem.pmf, &problem.distortion, k, &opts)?;
                ("mrs-informed", spec, vec![(format!("mrs_informed_k{k}"), r)])
            }
        }
        Command::MrsUninformedBound(a) => {
            let mut spec = load_spec(&a.base.spec)?;
            spec.options = merge(c, &spec.options);
            let problem = spec.to_problem()?;
            let k = check_k(&problem, a.base.k.unwrap_or(spec.k))?;
            spec.k = k;
            let opts = spec.options.srdf();
            let (raw, cvx) = mrs_uninformed_bound(&problem.pmf, &problem.distortion, k, &opts)?;
            let mut curves = vec![
                (format!("mrs_uninformed_raw_k{k}"), raw),
                (format!("mrs_uninformed_convexified_k{k}"), cvx),
            ];
            if a.refine {
                let r = mrs_uninformed_randomized_refine(&problem.pmf, &problem.distortion, k, &opts)?;
                if r.diagnostics.refine_improved {
                    eprintln!("note: randomized samplers improved on the point-mass bound at some slope");
                }
                curves.push((format!("mrs_uninformed_refined_k{k}"), r));
            }
            ("mrs-uninformed-bound", spec, curves)
        }
        Command::Example1 => {
            let problem = example1();
            let spec = ProblemSpec::from_problem(&problem, 1, merge(c, &SpecOptions::default()));
            let opts = spec.options.srdf();
            let (pmf, d) = (&problem.pmf, &problem.distortion);
            let mut curves = Vec::new();
            for a in subsets_of_size(2, 1) {
                curves.push((format!("fixed_set_{}", subset_id(&a)), fixed_set_srdf(pmf, d, &a, &opts)?));
            }
            curves.push(("irs_k1".to_string(), irs_srdf(pmf, d, 1, &opts)?));
            ("example1", spec, curves)
        }
        Command::Example2(a) => {
            let problem = example2(a.p, a.q)?;
            let spec = ProblemSpec::from_problem(&problem, 1, merge(c, &SpecOptions::default()));
            let opts = spec.options.srdf();
            let (pmf, d) = (&problem.pmf, &problem.distortion);
            let mut curves = vec![("mrs_informed_k1".to_string(), mrs_informed_srdf(pmf, d, 1, &opts)?)];
            for s in subsets_of_size(2, 1) {
                curves.push((format!("fixed_set_{}", subset_id(&s)), fixed_set_srdf(pmf, d, &s, &opts)?));
            }
            curves.push(("irs_k1".to_string(), irs_srdf(pmf, d, 1, &opts)?));
            let (raw, cvx) = mrs_uninformed_bound(pmf, d, 1, &opts)?;
            curves.push(("mrs_uninformed_raw_k1".to_string(), raw));
            curves.push(("mrs_uninformed_convexified_k1".to_string(), cvx));
            ("example2", spec, curves)
        }
        Command::Oracle(a) => return oracle_run(c, a),
    };
    Ok(Run { command: command.to_string(), spec, curves, extra: None, failed_check: false })
}

fn oracle_run(c: &Common, a: &OracleArgs) -> Result<Run, Failure> {
    let (spec, instances): (ProblemSpec, Vec<(String, _)>) = match &a.spec {
        Some(path) => {
            let mut spec = load_spec(path)?;
            spec.options = merge(c, &spec.options);
            let problem = spec.to_problem()?;
            let insts = subsets_of_size(problem.arity(), spec.k)
                .iter()
                // dominated reproductions do not change the curve but inflate the search
                .map(|s| Ok((subset_id(s), prune_dominated(&fixed_set_instance(&problem.pmf, &problem.distortion, s)?)?.0)))
                .collect::<Result<Vec<_>, Error>>()?;
            (spec, insts)
        }
        None => {
            let opts = merge(c, &SpecOptions::default());
            let insts = (0..a.instances)
                .map(|i| Ok((format!("random{i}"), seeded_instance(opts.seed, i)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            let spec = ProblemSpec::from_problem(&example1(), 1, opts);
            (spec, insts)
        }
    };
    let o = &spec.options;
    let mut csv = String::from("instance,delta,solver,oracle,difference\n");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut failed = false;
    for (name, inst) in &instances {
        let cmp = match compare_with_brute_force(inst, a.resolution, &COMPARISON_FRACTIONS, o.tol, o.max_iter) {
            Ok(c) => c,
            Err(Error::OracleSpaceTooLarge { size, .. }) => {
                eprintln!("note: {name}: skipped, {size} grid kernels");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for x in cmp {
            let diff = x.excess();
            worst = worst.max(diff.abs());
            failed |= diff > ORACLE_TOL || diff < -1e-6;
            csv.push_str(&format!("{name},{},{},{},{}\n", fmt_g9(x.delta), fmt_g9(x.solver), fmt_g9(x.oracle), fmt_g9(diff)));
            rows.push(json!({"instance": name, "delta": x.delta, "solver": x.solver, "oracle": x.oracle}));
        }
    }
    if rows.is_empty() {
        eprintln!("oracle: no instance fits the exhaustive search; nothing was checked");
    } else {
        eprintln!("oracle: largest |oracle - solver| = {} bits ({})", fmt_g9(worst), if failed { "FAIL" } else { "ok" });
    }
    let summary = json!({"resolution": a.resolution, "tolerance": ORACLE_TOL, "checked": rows.len(), "largest_difference": worst, "pass": !failed, "rows": rows});
    Ok(Run {
        command: "oracle".into(),
        spec,
        curves: vec![],
        extra: Some(("oracle.csv".into(), csv, summary)),
        failed_check: failed,
    })
}

fn write(cli: &Cli, run: &Run) -> Result<bool, Failure> {
    let c = &cli.common;
    fs::create_dir_all(&c.out).map_err(|e| io_fail(&c.out, e))?;
    let o = &run.spec.options;
    let meta = RunMetadata {
        tool: "srdf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: run.command.clone(),
        spec_sha256: run.spec.hash(),
        seed: o.seed,
        options: run.spec.to_json()["options"].clone(),
    };
    let mut entries = Vec::new();
    let mut nonconverged = 0;
    for (name, r) in &run.curves {
        let path = emit_curve(r, name, c.format, &c.out, o.grid, &meta).map_err(|e| io_fail(&c.out, e))?;
        nonconverged += r.diagnostics.nonconverged;
        entries.push(curve_report(name, &path, r));
    }
    let mut report = json!({ "metadata": meta, "curves": entries });
    if let Some((file, text, summary)) = &run.extra {
        let path = c.out.join(file);
        fs::write(&path, text).map_err(|e| io_fail(&path, e))?;
        report["oracle"] = summary.clone();
    }
    report["nonconverged_points"] = json!(nonconverged);
    let path = c.out.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    fs::write(&path, text).map_err(|e| io_fail(&path, e))?;
    if nonconverged > 0 {
        eprintln!("warning: {nonconverged} solver points did not converge; outputs were written anyway");
    }
    Ok(nonconverged == 0)
}

/// Thread count requested by the spec's options, if the spec parses.
fn spec_threads(cmd: &Command) -> usize {
    let path = match cmd {
        Command::FixedSet(a) | Command::PeFixedSet(a) => Some(&a.spec),
        Command::Irs(a) | Command::MrsInformed(a) => Some(&a.spec),
        Command::MrsUninformedBound(a) => Some(&a.base.spec),
        Command::Oracle(a) => a.spec.as_ref(),
        Command::Example1 | Command::Example2(_) => None,
    };
    path.and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| parse_problem_spec(&t).ok())
        .map_or(0, |s| s.options.threads)
}

/// Run one command; returns the process exit code.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.common.threads.unwrap_or_else(|| spec_threads(&cli.command));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_VALIDATION;
        }
    };
    let outcome = pool.install(|| compute(&cli).and_then(|run| Ok((write(&cli, &run)?, run.failed_check))));
    match outcome {
        Ok((true, false)) => EXIT_OK,
        Ok(_) => EXIT_NONCONVERGENCE,
        Err(f) => {
            f.report();
            f.code()
        }
    }
}
