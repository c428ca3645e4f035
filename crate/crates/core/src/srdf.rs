//! Sampling rate distortion functions for each sampler class, with the
//! sampler/subset witnesses and kernels that attain every curve point.
//!
//! Every curve is assembled from per-source point clouds (a source is a fixed
//! subset or a point-mass sampler). Envelopes are refined by re-solving the
//! two sources of every mixed segment at that segment's slope, which pins the
//! breakpoints between sources far more precisely than the base sweep does.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{
    alpha_map, composite_distortion, fixed_set_extremes, fixed_set_instance, irs_delta_min, mrs_extremes,
    pe_extremes, sampler_branch_problems, unconditional_delta_max, DeltaRange, DistortionTable, ExtremeWitness,
};
use crate::envelope::{lower_convex_envelope, pointwise_min, CurvePoint, PiecewiseLinearCurve, WitnessTag};
use crate::error::{Error, Result};
use crate::prob::{subsets_of_size, JointPmf, Kernel, ProductSet, SubsetIndex};
use crate::sampler::{enumerate_point_mass_samplers, PointMassSampler, DEFAULT_CAP};
use crate::solver::{
    ba_fixed_slope, branch_point, branch_sweep_adaptive, geometric_schedule, sweep_adaptive, Branch, BranchPoint,
    RdInstance, RdPoint,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrdfOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Evaluation grid size for emitted rows and the pointwise-minimum bound.
    pub grid: usize,
    pub cap: u64,
    /// Chord-versus-tangent gap below which a sweep is not refined further.
    pub refine_gap: f64,
    /// Per-curve point budget for refinement.
    pub max_points: usize,
    /// Rounds of re-solving mixed envelope segments at their own slope.
    pub tangent_rounds: usize,
}

impl Default for SrdfOptions {
    fn default() -> Self {
        Self {
            lambda_min: 1e-3,
            lambda_max: 64.0,
            lambda_points: 64,
            tol: 1e-10,
            max_iter: 5000,
            grid: 201,
            cap: DEFAULT_CAP,
            refine_gap: 1e-4,
            max_points: 2000,
            tangent_rounds: 8,
        }
    }
}

impl SrdfOptions {
    pub fn schedule(&self) -> Result<Vec<f64>> {
        geometric_schedule(self.lambda_min, self.lambda_max, self.lambda_points)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        if !(self.tol > 0.0) || self.max_iter == 0 || self.grid == 0 || !(self.refine_gap > 0.0) {
            return Err(Error::OutOfRange(
                "tolerance, refinement gap, iteration budget and grid size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    FixedSet,
    PeFixedSet,
    Irs,
    MrsInformed,
    MrsUninformedRaw,
    MrsUninformedConvexified,
    MrsUninformedRefined,
}

/// What a witness source is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// Fixed observed subset; kernels map `X_A` to `Y_M`.
    Subset(SubsetIndex),
    /// Fixed subset solved through the probability-of-error reduction; kernels
    /// are the reduced kernels completed by the MAP estimator.
    Reduced(SubsetIndex),
    /// Point-mass sampler with an informed decoder; one kernel per branch.
    Sampler(PointMassSampler),
    /// Point-mass sampler with an uninformed decoder; one kernel on `(S, X_S)`.
    Composite(PointMassSampler),
}

/// Reproduction kernel of one branch of a curve point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchWitness {
    /// Observed subset of the branch; `None` for a kernel on `(S, X_S)` atoms.
    pub subset: Option<SubsetIndex>,
    pub weight: f64,
    pub kernel: Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePoint {
    pub lambda: f64,
    pub delta: f64,
    pub rate: f64,
    pub converged: bool,
    pub iterations: usize,
    pub branches: Vec<BranchWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSource {
    pub id: String,
    pub kind: SourceKind,
    /// Ids of sources with an identical problem, folded into this one.
    pub aliases: Vec<String>,
    pub points: Vec<SourcePoint>,
}

/// Outcome of the alternating refinement over randomized samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinePoint {
    pub lambda: f64,
    pub seed: String,
    pub result: String,
    pub seed_objective: f64,
    pub refined_objective: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub samplers_enumerated: u64,
    pub distinct_problems: usize,
    pub solver_points: usize,
    pub ba_iterations: usize,
    pub nonconverged: usize,
    pub tangent_rounds: usize,
    pub notes: Vec<String>,
    pub refine: Vec<RefinePoint>,
    pub refine_improved: bool,
}

/// One emitted row: the curve at `delta`, its slope magnitude and witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub delta: f64,
    pub rate: f64,
    pub lambda: f64,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrdfResult {
    pub kind: CurveKind,
    pub curve: PiecewiseLinearCurve,
    pub sources: Vec<WitnessSource>,
    pub delta_range: DeltaRange,
    pub diagnostics: Diagnostics,
    /// For pointwise-minimum curves: each source's own envelope.
    per_source: Option<Vec<PiecewiseLinearCurve>>,
}

/// Identifier of a fixed subset, e.g. `A1_2` for `{1,2}`.
pub fn subset_id(a: &SubsetIndex) -> String {
    let parts: Vec<String> = a.members().iter().map(|i| (i + 1).to_string()).collect();
    format!("A{}", parts.join("_"))
}

impl SrdfResult {
    pub fn eval(&self, delta: f64) -> Result<f64> {
        self.curve.eval(delta)
    }

    pub fn source_by_id(&self, id: &str) -> Option<&WitnessSource> {
        self.sources.iter().find(|s| s.id == id || s.aliases.iter().any(|a| a == id))
    }

    /// Source points and time-sharing weights realizing the curve at `delta`.
    pub fn mixture_at(&self, delta: f64) -> Result<Vec<(WitnessTag, f64)>> {
        let Some(per) = &self.per_source else {
            return self.curve.mixture_at(delta);
        };
        let v = self.curve.vertices();
        let at = |i: usize| per[v[i].candidates[0].source].mixture_at(v[i].delta);
        if v.len() == 1 || delta <= v[0].delta {
            return at(0);
        }
        if delta >= v[v.len() - 1].delta {
            return at(v.len() - 1);
        }
        let i = self.curve.segment_at(delta).expect("inside the curve");
        let t = (delta - v[i].delta) / (v[i + 1].delta - v[i].delta);
        if t <= 1e-12 {
            return at(i);
        }
        if t >= 1.0 - 1e-12 {
            return at(i + 1);
        }
        let mut out: Vec<(WitnessTag, f64)> = at(i)?.into_iter().map(|(w, a)| (w, a * (1.0 - t))).collect();
        out.extend(at(i + 1)?.into_iter().map(|(w, a)| (w, a * t)));
        Ok(out)
    }

    /// Source points attaining vertex `i`: every tied candidate for an
    /// envelope, the realizing mixture for a pointwise minimum.
    pub fn vertex_witnesses(&self, i: usize) -> Result<Vec<WitnessTag>> {
        let v = &self.curve.vertices()[i];
        if self.per_source.is_some() {
            return Ok(self.mixture_at(v.delta)?.into_iter().map(|(t, _)| t).collect());
        }
        Ok(v.candidates.clone())
    }

    pub fn point(&self, tag: WitnessTag) -> &SourcePoint {
        &self.sources[tag.source].points[tag.point]
    }

    /// Slope magnitude of the segment at `delta` (right segment at a vertex).
    pub fn lambda_at(&self, delta: f64) -> f64 {
        let slopes = self.curve.slopes();
        match self.curve.segment_at(delta) {
            Some(i) if delta < self.curve.delta_max() => -slopes[i],
            _ => 0.0,
        }
    }

    /// Witness label: a source id, or `mix(id:w;id:w)` when sources differ.
    pub fn witness_label(&self, delta: f64) -> Result<String> {
        let mix = self.mixture_at(delta)?;
        let mut by_source: Vec<(usize, f64)> = Vec::new();
        for (tag, w) in mix {
            match by_source.iter_mut().find(|(s, _)| *s == tag.source) {
                Some(e) => e.1 += w,
                None => by_source.push((tag.source, w)),
            }
        }
        if by_source.len() == 1 {
            return Ok(self.sources[by_source[0].0].id.clone());
        }
        let parts: Vec<String> = by_source
            .iter()
            .map(|(s, w)| format!("{}:{:.9}", self.sources[*s].id, w))
            .collect();
        Ok(format!("mix({})", parts.join(";")))
    }

    /// `n` uniformly spaced distortions over the result's domain (one if degenerate).
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = (self.delta_range.delta_min, self.delta_range.delta_max);
        if n <= 1 || hi - lo <= 1e-12 {
            return vec![lo];
        }
        (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }

    pub fn rows(&self, n: usize) -> Result<Vec<CurveRow>> {
        self.grid(n)
            .into_iter()
            .map(|delta| {
                Ok(CurveRow {
                    delta,
                    rate: self.eval(delta)?,
                    lambda: self.lambda_at(delta),
                    witness: self.witness_label(delta)?,
                })
            })
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.diagnostics.nonconverged == 0
    }
}

/// Recompute `(E[d], rate)` of a source point from its stored witnesses.
pub fn replay(pmf: &JointPmf, d: &DistortionTable, source: &WitnessSource, point: &SourcePoint) -> Result<(f64, f64)> {
    let one = |inst: &RdInstance, k: &Kernel| (inst.distortion_of(k), inst.rate_of(k));
    match &source.kind {
        SourceKind::Subset(a) | SourceKind::Reduced(a) => {
            Ok(one(&fixed_set_instance(pmf, d, a)?, &point.branches[0].kernel))
        }
        SourceKind::Composite(h) => Ok(one(&composite_distortion(pmf, d, h)?.instance, &point.branches[0].kernel)),
        SourceKind::Sampler(h) => {
            let branches = sampler_branch_problems(pmf, d, h)?;
            let (mut delta, mut rate) = (0.0, 0.0);
            for b in &branches {
                let w = point
                    .branches
                    .iter()
                    .find(|x| x.subset.as_ref() == Some(&b.subset))
                    .ok_or_else(|| Error::Dimension(format!("no kernel for branch {}", b.subset)))?;
                let (dd, rr) = one(&b.instance, &w.kernel);
                delta += b.weight * dd;
                rate += b.weight * rr;
            }
            Ok((delta, rate))
        }
    }
}

fn from_rd(p: RdPoint, subset: Option<SubsetIndex>) -> SourcePoint {
    SourcePoint {
        lambda: p.lambda,
        delta: p.delta,
        rate: p.rate,
        converged: p.converged,
        iterations: p.iterations,
        branches: vec![BranchWitness { subset, weight: 1.0, kernel: p.kernel }],
    }
}

fn from_branch(p: BranchPoint, subsets: &[SubsetIndex], weights: &[f64]) -> SourcePoint {
    SourcePoint {
        lambda: p.lambda,
        delta: p.delta,
        rate: p.rate,
        converged: p.converged(),
        iterations: p.parts.iter().map(|x| x.iterations).sum(),
        branches: p
            .parts
            .into_iter()
            .zip(subsets.iter().zip(weights))
            .map(|(x, (s, &w))| BranchWitness { subset: Some(s.clone()), weight: w, kernel: x.kernel })
            .collect(),
    }
}

/// How to produce more points of a source.
#[derive(Clone, Debug)]
enum Solver {
    Instance { subset: Option<SubsetIndex>, inst: RdInstance },
    Branches { subsets: Vec<SubsetIndex>, branches: Vec<Branch> },
}

impl Solver {
    fn sweep(&self, opts: &SrdfOptions) -> Result<Vec<SourcePoint>> {
        let schedule = opts.schedule()?;
        match self {
            Solver::Instance { subset, inst } => {
                let c = sweep_adaptive(inst, &schedule, opts.tol, opts.max_iter, opts.refine_gap, opts.max_points)?;
                Ok(c.points.into_iter().map(|p| from_rd(p, subset.clone())).collect())
            }
            Solver::Branches { subsets, branches } => {
                let c = branch_sweep_adaptive(branches, &schedule, opts.tol, opts.max_iter, opts.refine_gap, opts.max_points)?;
                let weights: Vec<f64> = branches.iter().map(|b| b.weight).collect();
                Ok(c.points.into_iter().map(|p| from_branch(p, subsets, &weights)).collect())
            }
        }
    }

    fn solve(&self, lambda: f64, opts: &SrdfOptions) -> Result<SourcePoint> {
        match self {
            Solver::Instance { subset, inst } => {
                Ok(from_rd(ba_fixed_slope(inst, lambda, opts.tol, opts.max_iter)?, subset.clone()))
            }
            Solver::Branches { subsets, branches } => {
                let weights: Vec<f64> = branches.iter().map(|b| b.weight).collect();
                Ok(from_branch(branch_point(branches, lambda, opts.tol, opts.max_iter)?, subsets, &weights))
            }
        }
    }
}

struct Contributor {
    source: WitnessSource,
    solver: Solver,
}

fn sweep_all(
    specs: Vec<(String, SourceKind, Vec<String>, Solver)>,
    opts: &SrdfOptions,
) -> Result<Vec<Contributor>> {
    specs
        .into_par_iter()
        .map(|(id, kind, aliases, solver)| {
            let points = solver.sweep(opts)?;
            Ok(Contributor { source: WitnessSource { id, kind, aliases, points }, solver })
        })
        .collect()
}

fn tagged_points(contribs: &[Contributor]) -> Vec<CurvePoint> {
    contribs
        .iter()
        .enumerate()
        .flat_map(|(s, c)| {
            c.source.points.iter().enumerate().map(move |(i, p)| CurvePoint {
                delta: p.delta,
                rate: p.rate,
                witness: WitnessTag { source: s, point: i },
            })
        })
        .collect()
}

fn source_envelope(c: &Contributor, s: usize) -> Result<PiecewiseLinearCurve> {
    let pts: Vec<CurvePoint> = c
        .source
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| CurvePoint { delta: p.delta, rate: p.rate, witness: WitnessTag { source: s, point: i } })
        .collect();
    lower_convex_envelope(&pts)
}

fn has_slope(c: &Contributor, lambda: f64) -> bool {
    c.source.points.iter().any(|p| (p.lambda - lambda).abs() <= 1e-12 * lambda)
}

/// Envelope of all contributors, re-solving both sources of every segment
/// that mixes two different sources at that segment's slope.
fn refined_envelope(contribs: &mut [Contributor], opts: &SrdfOptions, diag: &mut Diagnostics) -> Result<PiecewiseLinearCurve> {
    for round in 0..opts.tangent_rounds {
        let curve = lower_convex_envelope(&tagged_points(contribs))?;
        let slopes = curve.slopes();
        let mut wanted: Vec<(usize, f64)> = Vec::new();
        for (seg, slope) in curve.segments().iter().zip(slopes) {
            let lambda = -slope;
            if seg.left.source == seg.right.source || !(lambda > 0.0) || !lambda.is_finite() {
                continue;
            }
            for s in [seg.left.source, seg.right.source] {
                if !has_slope(&contribs[s], lambda) && !wanted.contains(&(s, lambda)) {
                    wanted.push((s, lambda));
                }
            }
        }
        if wanted.is_empty() {
            break;
        }
        diag.tangent_rounds = round + 1;
        let solved: Vec<(usize, SourcePoint)> = wanted
            .par_iter()
            .map(|&(s, l)| Ok((s, contribs[s].solver.solve(l, opts)?)))
            .collect::<Result<_>>()?;
        for (s, p) in solved {
            contribs[s].source.points.push(p);
        }
    }
    for c in contribs.iter_mut() {
        c.source.points.sort_by(|a, b| b.lambda.total_cmp(&a.lambda).then(a.delta.total_cmp(&b.delta)));
    }
    lower_convex_envelope(&tagged_points(contribs))
}

fn finish(
    kind: CurveKind,
    curve: PiecewiseLinearCurve,
    contribs: Vec<Contributor>,
    delta_range: DeltaRange,
    mut diagnostics: Diagnostics,
    per_source: Option<Vec<PiecewiseLinearCurve>>,
) -> SrdfResult {
    let sources: Vec<WitnessSource> = contribs.into_iter().map(|c| c.source).collect();
    let pts = sources.iter().flat_map(|s| &s.points);
    diagnostics.solver_points = pts.clone().count();
    diagnostics.ba_iterations = pts.clone().map(|p| p.iterations).sum();
    diagnostics.nonconverged = pts.filter(|p| !p.converged).count();
    SrdfResult { kind, curve, sources, delta_range, diagnostics, per_source }
}

fn check_subset(pmf: &JointPmf, a: &SubsetIndex) -> Result<()> {
    a.check_within(pmf.arity())?;
    if a.is_empty() {
        return Err(Error::InvalidSubset("observed subset must be nonempty".into()));
    }
    Ok(())
}

fn fixed_contributor(pmf: &JointPmf, d: &DistortionTable, a: &SubsetIndex) -> Result<(String, SourceKind, Vec<String>, Solver)> {
    let inst = fixed_set_instance(pmf, d, a)?;
    Ok((subset_id(a), SourceKind::Subset(a.clone()), vec![], Solver::Instance { subset: Some(a.clone()), inst }))
}

/// `R_A(Δ)`: rate distortion function of `X_A` under the modified distortion `d_A`.
pub fn fixed_set_srdf(pmf: &JointPmf, d: &DistortionTable, a: &SubsetIndex, opts: &SrdfOptions) -> Result<SrdfResult> {
    opts.validate()?;
    check_subset(pmf, a)?;
    let mut contribs = sweep_all(vec![fixed_contributor(pmf, d, a)?], opts)?;
    let mut diag = Diagnostics { distinct_problems: 1, ..Default::default() };
    let curve = refined_envelope(&mut contribs, opts, &mut diag)?;
    let range = fixed_set_extremes(pmf, d, a)?;
    Ok(finish(CurveKind::FixedSet, curve, contribs, range, diag, None))
}

/// `y_{A^c}` maximizing `P(X_{A^c} = · | X_A = y_A)`, as a flat index over `A^c`.
pub fn map_estimator(pmf: &JointPmf, a: &SubsetIndex, y_a: usize) -> Result<usize> {
    check_subset(pmf, a)?;
    let alpha = alpha_map(pmf, a)?;
    alpha.witness.get(y_a).copied().ok_or_else(|| {
        Error::OutOfRange(format!("symbol index {y_a} outside the {} symbols of {a}", alpha.witness.len()))
    })
}

/// Reproduction kernel `X_A -> Y_M` that completes `y_A` with the MAP estimate.
fn map_lift(pmf: &JointPmf, a: &SubsetIndex, witness: &[usize], reduced: &Kernel) -> Kernel {
    let shape = pmf.shape();
    let comp = a.complement(pmf.arity());
    let (sa, sc) = (shape.restrict(a), shape.restrict(&comp));
    let mut data = vec![0.0; reduced.rows() * shape.len()];
    for x in 0..reduced.rows() {
        for ya in 0..reduced.cols() {
            let w = reduced.get(x, ya);
            if w == 0.0 {
                continue;
            }
            let mut coords = vec![0; shape.arity()];
            for (&i, &c) in a.members().iter().zip(&sa.coords(ya)) {
                coords[i] = c;
            }
            for (&i, &c) in comp.members().iter().zip(&sc.coords(witness[ya])) {
                coords[i] = c;
            }
            data[x * shape.len() + shape.flat(&coords)] += w;
        }
    }
    Kernel::from_raw(reduced.rows(), shape.len(), data)
}

/// `R_A(Δ)` for the probability-of-error distortion via the reduced problem
/// `ρ̃(x_A, y_A) = α(x_A) 1(x_A ≠ y_A)` at threshold `Δ - (1 - E[α])`.
pub fn pe_fixed_set_srdf(pmf: &JointPmf, a: &SubsetIndex, opts: &SrdfOptions) -> Result<SrdfResult> {
    opts.validate()?;
    check_subset(pmf, a)?;
    let alpha = alpha_map(pmf, a)?;
    let shift = 1.0 - alpha.expected();
    let n = alpha.alpha.len();
    let sub = pmf.shape().restrict(a);
    let reduced = DistortionTable::from_fn(ProductSet::new(vec![n]), ProductSet::new(vec![n]), |x, y| {
        Some(if x[0] == y[0] { 0.0 } else { alpha.alpha[x[0]] })
    })?;
    let inst = RdInstance::new(alpha.marginal.clone(), reduced)?;
    let points = Solver::Instance { subset: Some(a.clone()), inst }.sweep(opts)?;
    let points: Vec<SourcePoint> = points
        .into_iter()
        .map(|mut p| {
            p.delta += shift;
            p.branches[0].kernel = map_lift(pmf, a, &alpha.witness, &p.branches[0].kernel);
            p
        })
        .collect();
    debug_assert_eq!(sub.len(), n);
    let source = WitnessSource { id: subset_id(a), kind: SourceKind::Reduced(a.clone()), aliases: vec![], points };
    let tagged: Vec<CurvePoint> = source
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| CurvePoint { delta: p.delta, rate: p.rate, witness: WitnessTag { source: 0, point: i } })
        .collect();
    let curve = lower_convex_envelope(&tagged)?;
    let range = pe_extremes(pmf, a)?;
    let diag = Diagnostics {
        distinct_problems: 1,
        notes: vec![format!("reduced threshold shift 1 - E[alpha] = {shift}")],
        ..Default::default()
    };
    let solver = Solver::Instance { subset: None, inst: RdInstance::new(vec![1.0], DistortionTable::hamming(1))? };
    Ok(finish(CurveKind::PeFixedSet, curve, vec![Contributor { source, solver }], range, diag, None))
}

fn irs_contributors(pmf: &JointPmf, d: &DistortionTable, k: usize, opts: &SrdfOptions) -> Result<Vec<Contributor>> {
    let specs = subsets_of_size(pmf.arity(), k)
        .iter()
        .map(|a| fixed_contributor(pmf, d, a))
        .collect::<Result<Vec<_>>>()?;
    sweep_all(specs, opts)
}

/// `R_i(Δ)`: lower convex envelope of the fixed-set curves of all `k`-subsets.
pub fn irs_srdf(pmf: &JointPmf, d: &DistortionTable, k: usize, opts: &SrdfOptions) -> Result<SrdfResult> {
    opts.validate()?;
    let range = irs_delta_min(pmf, d, k)?;
    let mut contribs = irs_contributors(pmf, d, k, opts)?;
    let mut diag = Diagnostics { distinct_problems: contribs.len(), ..Default::default() };
    let curve = refined_envelope(&mut contribs, opts, &mut diag)?;
    Ok(finish(CurveKind::Irs, curve, contribs, range, diag, None))
}

/// Enumerate samplers, keep the first of each group with an identical
/// fingerprint, and return `(representative, aliases)`.
fn distinct_samplers<F>(pmf: &JointPmf, k: usize, cap: u64, fingerprint: F) -> Result<(u64, Vec<(PointMassSampler, Vec<u64>)>)>
where
    F: Fn(&PointMassSampler) -> Result<Vec<u64>> + Sync,
{
    let all = enumerate_point_mass_samplers(pmf, k, cap)?;
    let total = all.total();
    let prints: Vec<Vec<u64>> = (0..total).into_par_iter().map(|e| fingerprint(&all.get(e))).collect::<Result<_>>()?;
    let mut first: HashMap<&[u64], usize> = HashMap::new();
    let mut out: Vec<(PointMassSampler, Vec<u64>)> = Vec::new();
    for (e, fp) in prints.iter().enumerate() {
        match first.get(fp.as_slice()) {
            Some(&i) => out[i].1.push(e as u64),
            None => {
                first.insert(fp.as_slice(), out.len());
                out.push((all.get(e as u64), vec![]));
            }
        }
    }
    Ok((total, out))
}

fn alias_ids(encs: &[u64]) -> Vec<String> {
    encs.iter().map(|e| format!("h{e}")).collect()
}

fn branches_of(pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> Result<(Vec<SubsetIndex>, Vec<Branch>)> {
    let b = sampler_branch_problems(pmf, d, h)?;
    Ok(b.into_iter().map(|x| (x.subset, Branch { weight: x.weight, instance: x.instance })).unzip())
}

fn is_constant(h: &PointMassSampler) -> bool {
    h.assignment().windows(2).all(|w| w[0] == w[1])
}

/// `R_m^I(Δ)`: envelope over point-mass samplers of their equal-slope branch
/// curves. Constant samplers reuse the fixed-set sources, so this curve is
/// never above the IRS curve computed with the same options.
pub fn mrs_informed_srdf(pmf: &JointPmf, d: &DistortionTable, k: usize, opts: &SrdfOptions) -> Result<SrdfResult> {
    opts.validate()?;
    let range = mrs_extremes(pmf, d, k, opts.cap)?;
    let (total, distinct) = distinct_samplers(pmf, k, opts.cap, |h| {
        let mut fp = Vec::new();
        for b in sampler_branch_problems(pmf, d, h)? {
            fp.push(u64::MAX);
            fp.extend(b.subset.members().iter().map(|&i| i as u64));
            fp.push(b.weight.to_bits());
            fp.extend(b.instance.fingerprint());
        }
        Ok(fp)
    })?;
    let n = pmf.len();
    let mut contribs = Vec::new();
    for mut c in irs_contributors(pmf, d, k, opts)? {
        let SourceKind::Subset(a) = &c.source.kind else { unreachable!() };
        let h = PointMassSampler::constant(pmf.arity(), n, a)?;
        c.source.aliases = vec![c.source.id.clone()];
        c.source.id = h.id();
        if let Some((_, al)) = distinct.iter().find(|(g, _)| g == &h) {
            c.source.aliases.extend(alias_ids(al));
        }
        c.source.kind = SourceKind::Sampler(h);
        contribs.push(c);
    }
    let specs = distinct
        .iter()
        .filter(|(h, _)| !is_constant(h))
        .map(|(h, al)| {
            let (subsets, branches) = branches_of(pmf, d, h)?;
            Ok((h.id(), SourceKind::Sampler(h.clone()), alias_ids(al), Solver::Branches { subsets, branches }))
        })
        .collect::<Result<Vec<_>>>()?;
    contribs.extend(sweep_all(specs, opts)?);
    let mut diag = Diagnostics { samplers_enumerated: total, distinct_problems: distinct.len(), ..Default::default() };
    let curve = refined_envelope(&mut contribs, opts, &mut diag)?;
    Ok(finish(CurveKind::MrsInformed, curve, contribs, range, diag, None))
}

/// Uninformed-decoder bounds: `raw` is the pointwise minimum over samplers of
/// `min I(S, X_S ∧ Y_M)` on the evaluation grid (not necessarily convex);
/// `convexified` is the lower convex envelope of all sampler points, a
/// further bound obtained by time-sharing.
pub fn mrs_uninformed_bound(pmf: &JointPmf, d: &DistortionTable, k: usize, opts: &SrdfOptions) -> Result<(SrdfResult, SrdfResult)> {
    opts.validate()?;
    let (mut contribs, total, n_distinct) = uninformed_contributors(pmf, d, k, opts)?;
    let mut diag = Diagnostics { samplers_enumerated: total, distinct_problems: n_distinct, ..Default::default() };
    let convex_curve = refined_envelope(&mut contribs, opts, &mut diag)?;
    let range = uninformed_range(pmf, d, &contribs)?;
    let per: Vec<PiecewiseLinearCurve> =
        contribs.iter().enumerate().map(|(s, c)| source_envelope(c, s)).collect::<Result<_>>()?;
    let grid = grid_over(&range, opts.grid);
    let samples = pointwise_min(&per, &grid)?;
    let raw_curve = PiecewiseLinearCurve::from_polyline(&samples)?;
    let mut raw_diag = diag.clone();
    raw_diag.notes.push(format!(
        "pointwise minimum over {} sampler curves on a {}-point grid; convex on the grid: {}",
        per.len(),
        grid.len(),
        raw_curve.is_convex()
    ));
    diag.notes.push("time-shared lower convex envelope of all sampler points; a possibly loose further bound".into());
    let raw_sources: Vec<Contributor> = contribs
        .iter()
        .map(|c| Contributor { source: c.source.clone(), solver: c.solver.clone() })
        .collect();
    let raw = finish(CurveKind::MrsUninformedRaw, raw_curve, raw_sources, range.clone(), raw_diag, Some(per));
    let convexified = finish(CurveKind::MrsUninformedConvexified, convex_curve, contribs, range, diag, None);
    Ok((raw, convexified))
}

fn grid_over(range: &DeltaRange, n: usize) -> Vec<f64> {
    let (lo, hi) = (range.delta_min, range.delta_max);
    if n <= 1 || hi - lo <= 1e-12 {
        return vec![lo];
    }
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn uninformed_contributors(
    pmf: &JointPmf,
    d: &DistortionTable,
    k: usize,
    opts: &SrdfOptions,
) -> Result<(Vec<Contributor>, u64, usize)> {
    let (total, distinct) =
        distinct_samplers(pmf, k, opts.cap, |h| Ok(composite_distortion(pmf, d, h)?.instance.fingerprint()))?;
    let specs = distinct
        .iter()
        .map(|(h, al)| {
            let inst = composite_distortion(pmf, d, h)?.instance;
            Ok((h.id(), SourceKind::Composite(h.clone()), alias_ids(al), Solver::Instance { subset: None, inst }))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = specs.len();
    Ok((sweep_all(specs, opts)?, total, n))
}

/// Smallest sampler floor to the unconditional maximum distortion.
fn uninformed_range(pmf: &JointPmf, d: &DistortionTable, contribs: &[Contributor]) -> Result<DeltaRange> {
    let (delta_max, y) = unconditional_delta_max(pmf, d)?;
    let mut best: Option<(f64, &PointMassSampler)> = None;
    for c in contribs {
        let (SourceKind::Composite(h), Solver::Instance { inst, .. }) = (&c.source.kind, &c.solver) else {
            unreachable!()
        };
        let lo = inst.delta_min();
        if best.map_or(true, |(b, _)| lo < b) {
            best = Some((lo, h));
        }
    }
    let (delta_min, h) = best.ok_or_else(|| Error::Empty("no samplers".into()))?;
    Ok(DeltaRange {
        delta_min,
        delta_max,
        min_witness: Some(ExtremeWitness::Sampler(h.clone())),
        max_witness: Some(ExtremeWitness::Reproduction(y)),
    })
}

/// Sampler-row and kernel state of the alternating refinement.
struct Alternating<'a> {
    pmf: &'a JointPmf,
    d: &'a DistortionTable,
    subsets: Vec<SubsetIndex>,
    proj: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    n_atoms: usize,
    lambda: f64,
}

impl<'a> Alternating<'a> {
    fn new(pmf: &'a JointPmf, d: &'a DistortionTable, k: usize, lambda: f64) -> Self {
        let subsets = subsets_of_size(pmf.arity(), k);
        let proj: Vec<Vec<usize>> = subsets.iter().map(|a| pmf.shape().projection(a)).collect();
        let mut offsets = vec![0];
        for a in &subsets {
            offsets.push(offsets.last().unwrap() + pmf.shape().restrict(a).len());
        }
        let n_atoms = *offsets.last().unwrap();
        Self { pmf, d, subsets, proj, offsets, n_atoms, lambda }
    }

    fn atom(&self, s: usize, x: usize) -> usize {
        self.offsets[s] + self.proj[s][x]
    }

    /// Joint mass of each atom and `Σ P(x, s) d(x, y)` under sampler rows.
    fn atom_sums(&self, rows: &Kernel) -> (Vec<f64>, Vec<Option<f64>>) {
        let ny = self.d.cols();
        let mut mass = vec![0.0; self.n_atoms];
        let mut dsum: Vec<Option<f64>> = vec![Some(0.0); self.n_atoms * ny];
        for (x, &p) in self.pmf.probs().iter().enumerate() {
            for s in 0..self.subsets.len() {
                let w = p * rows.get(x, s);
                if w == 0.0 {
                    continue;
                }
                let a = self.atom(s, x);
                mass[a] += w;
                for y in 0..ny {
                    let e = &mut dsum[a * ny + y];
                    *e = match (*e, self.d.get(x, y)) {
                        (Some(acc), Some(v)) => Some(acc + w * v),
                        _ => None,
                    };
                }
            }
        }
        (mass, dsum)
    }

    /// Kernel and marginal update at fixed sampler rows (one BA step from `q`).
    fn kernel_step(&self, rows: &Kernel, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ny = self.d.cols();
        let (mass, dsum) = self.atom_sums(rows);
        let mut w = vec![0.0; self.n_atoms * ny];
        let mut q_next = vec![0.0; ny];
        for a in 0..self.n_atoms {
            if mass[a] == 0.0 {
                continue;
            }
            let rho: Vec<Option<f64>> = (0..ny).map(|y| dsum[a * ny + y].map(|v| v / mass[a])).collect();
            let lo = rho.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v));
            let row = &mut w[a * ny..(a + 1) * ny];
            let mut norm = 0.0;
            for y in 0..ny {
                if let Some(r) = rho[y] {
                    row[y] = q[y] * (-self.lambda * (r - lo)).exp2();
                    norm += row[y];
                }
            }
            if norm == 0.0 {
                for y in 0..ny {
                    row[y] = if rho[y].is_some() { 1.0 } else { 0.0 };
                }
                norm = row.iter().sum();
            }
            row.iter_mut().for_each(|v| *v /= norm);
            for y in 0..ny {
                q_next[y] += mass[a] * row[y];
            }
        }
        (w, q_next)
    }

    /// `Σ_x P(x) Σ_s P(s|x) Σ_y W(y|s,x_s) [log2(W/q) + λ d(x, y)]`.
    fn cost(&self, x: usize, s: usize, w: &[f64], q: &[f64]) -> f64 {
        let ny = self.d.cols();
        let a = self.atom(s, x);
        let mut c = 0.0;
        for y in 0..ny {
            let v = w[a * ny + y];
            if v == 0.0 {
                continue;
            }
            match self.d.get(x, y) {
                Some(dv) => c += v * ((v / q[y]).log2() + self.lambda * dv),
                None => return f64::INFINITY,
            }
        }
        c
    }

    fn objective(&self, rows: &Kernel, w: &[f64], q: &[f64]) -> f64 {
        let mut total = 0.0;
        for (x, &p) in self.pmf.probs().iter().enumerate() {
            for s in 0..self.subsets.len() {
                let r = rows.get(x, s);
                if r > 0.0 {
                    total += p * r * self.cost(x, s, w, q);
                }
            }
        }
        total
    }

    /// Each row moves to its cheapest subset; the current one is kept on ties.
    fn sampler_step(&self, rows: &Kernel, w: &[f64], q: &[f64]) -> Kernel {
        let n = self.subsets.len();
        let mut data = rows.data().to_vec();
        for x in 0..self.pmf.len() {
            let costs: Vec<f64> = (0..n).map(|s| self.cost(x, s, w, q)).collect();
            let current = (0..n)
                .filter(|&s| rows.get(x, s) > 0.0)
                .map(|s| costs[s])
                .fold(f64::NEG_INFINITY, f64::max);
            let (best, bc) = costs
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (s, &c)| if c < acc.1 { (s, c) } else { acc });
            if bc < current - 1e-15 {
                let row = &mut data[x * n..(x + 1) * n];
                row.iter_mut().for_each(|v| *v = 0.0);
                row[best] = 1.0;
            }
        }
        Kernel::from_raw(self.pmf.len(), n, data)
    }
}

/// Probe whether randomized samplers beat point-mass ones for the uninformed
/// decoder: at each slope, alternate over sampler rows, reproduction kernel
/// and output marginal starting from the best point-mass sampler, and flag
/// any decrease of `I + λ E[d]` beyond `1e-6`.
pub fn mrs_uninformed_randomized_refine(pmf: &JointPmf, d: &DistortionTable, k: usize, opts: &SrdfOptions) -> Result<SrdfResult> {
    opts.validate()?;
    let (mut contribs, total, n_distinct) = uninformed_contributors(pmf, d, k, opts)?;
    let schedule = opts.schedule()?;
    let outcomes: Vec<(RefinePoint, SourcePoint, PointMassSampler)> = schedule
        .par_iter()
        .map(|&lambda| refine_at(pmf, d, k, lambda, &contribs, opts))
        .collect::<Result<_>>()?;
    let mut diag = Diagnostics { samplers_enumerated: total, distinct_problems: n_distinct, ..Default::default() };
    for (rp, sp, h) in outcomes {
        diag.refine_improved |= rp.improved;
        diag.refine.push(rp);
        let id = h.id();
        match contribs.iter_mut().find(|c| c.source.id == id || c.source.aliases.contains(&id)) {
            Some(c) => c.source.points.push(sp),
            None => {
                let inst = composite_distortion(pmf, d, &h)?.instance;
                contribs.push(Contributor {
                    source: WitnessSource { id, kind: SourceKind::Composite(h), aliases: vec![], points: vec![sp] },
                    solver: Solver::Instance { subset: None, inst },
                });
            }
        }
    }
    let curve = refined_envelope(&mut contribs, opts, &mut diag)?;
    let range = uninformed_range(pmf, d, &contribs)?;
    Ok(finish(CurveKind::MrsUninformedRefined, curve, contribs, range, diag, None))
}

fn refine_at(
    pmf: &JointPmf,
    d: &DistortionTable,
    k: usize,
    lambda: f64,
    contribs: &[Contributor],
    opts: &SrdfOptions,
) -> Result<(RefinePoint, SourcePoint, PointMassSampler)> {
    // seed: the sampler whose curve has the smallest Lagrangian at this slope
    let (seed_idx, _) = contribs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let best = c.source.points.iter().map(|p| p.rate + lambda * p.delta).fold(f64::INFINITY, f64::min);
            (i, best)
        })
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let SourceKind::Composite(seed) = &contribs[seed_idx].source.kind else { unreachable!() };
    let alt = Alternating::new(pmf, d, k, lambda);
    let mut rows = seed.to_randomized().rows().clone();
    let ny = d.cols();
    let n_adm = (0..ny).filter(|&y| (0..pmf.len()).any(|x| d.get(x, y).is_some())).count() as f64;
    let mut q: Vec<f64> = (0..ny)
        .map(|y| if (0..pmf.len()).any(|x| d.get(x, y).is_some()) { 1.0 / n_adm } else { 0.0 })
        .collect();
    let mut prev = f64::INFINITY;
    let mut seed_objective = f64::NAN;
    let (mut w, mut q_next) = alt.kernel_step(&rows, &q);
    for it in 0..opts.max_iter {
        let obj = alt.objective(&rows, &w, &q);
        if it == 0 {
            seed_objective = obj;
        }
        if prev - obj < opts.tol {
            break;
        }
        prev = obj;
        q = q_next;
        rows = alt.sampler_step(&rows, &w, &q);
        (w, q_next) = alt.kernel_step(&rows, &q);
    }
    // exact evaluation of the final (point-mass) sampler and kernel
    let assignment: Vec<usize> = (0..pmf.len())
        .map(|x| (0..alt.subsets.len()).find(|&s| rows.get(x, s) > 0.5).unwrap_or(0))
        .collect();
    let h = PointMassSampler::new(pmf.arity(), k, assignment)?;
    let comp = composite_distortion(pmf, d, &h)?;
    let mut data = Vec::with_capacity(comp.atoms.len() * ny);
    for (s, xs) in &comp.atoms {
        let si = alt.subsets.iter().position(|a| a == s).expect("subset of the family");
        let a = alt.offsets[si] + xs;
        data.extend_from_slice(&w[a * ny..(a + 1) * ny]);
    }
    let kernel = Kernel::from_raw(comp.atoms.len(), ny, data);
    let (delta, rate) = (comp.instance.distortion_of(&kernel), comp.instance.rate_of(&kernel));
    let refined_objective = rate + lambda * delta;
    // the seed's own best Lagrangian value from its solved curve
    let seed_best = contribs[seed_idx]
        .source
        .points
        .iter()
        .map(|p| p.rate + lambda * p.delta)
        .fold(f64::INFINITY, f64::min)
        .min(seed_objective);
    let point = SourcePoint {
        lambda,
        delta,
        rate,
        converged: true,
        iterations: 0,
        branches: vec![BranchWitness { subset: None, weight: 1.0, kernel }],
    };
    let rp = RefinePoint {
        lambda,
        seed: seed.id(),
        result: h.id(),
        seed_objective: seed_best,
        refined_objective,
        improved: refined_objective < seed_best - 1e-6,
    };
    Ok((rp, point, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{entropy, h2};
    use crate::problem::{example1, example2};

    fn one(i: usize) -> SubsetIndex {
        SubsetIndex::from_one_based(&[i]).unwrap()
    }

    #[test]
    fn subset_ids_have_no_commas() {
        assert_eq!(subset_id(&SubsetIndex::from_one_based(&[1, 3]).unwrap()), "A1_3");
    }

    #[test]
    fn example1_fixed_sets() {
        let pr = example1();
        let o = SrdfOptions::default();
        let r1 = fixed_set_srdf(&pr.pmf, &pr.distortion, &one(1), &o).unwrap();
        let r2 = fixed_set_srdf(&pr.pmf, &pr.distortion, &one(2), &o).unwrap();
        for d in r1.grid(201) {
            assert!((r1.eval(d).unwrap() - (1.5 - d)).abs() < 5e-3);
        }
        for d in r2.grid(201) {
            assert!((r2.eval(d).unwrap() - (1.0 - h2(d - 1.0))).abs() < 5e-3);
        }
        assert!(r1.all_converged() && r2.all_converged());
    }

    #[test]
    fn lossless_point_of_full_observation() {
        let pr = example2(0.1, 0.5).unwrap();
        let r = fixed_set_srdf(&pr.pmf, &pr.distortion, &SubsetIndex::full(2), &SrdfOptions::default()).unwrap();
        assert!((r.eval(0.0).unwrap() - entropy(&pr.pmf)).abs() < 1e-9);
    }

    #[test]
    fn map_estimator_examples() {
        let copy = JointPmf::with_partial_support(
            crate::prob::numbered_components("X", &[2, 2]).unwrap(),
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        assert_eq!(map_estimator(&copy, &one(1), 0).unwrap(), 0);
        assert_eq!(map_estimator(&copy, &one(1), 1).unwrap(), 1);
        let pr = example2(0.1, 0.5).unwrap();
        assert_eq!(map_estimator(&pr.pmf, &one(2), 0).unwrap(), 0);
        assert_eq!(map_estimator(&pr.pmf, &one(2), 1).unwrap(), 0);
        let iid = JointPmf::from_dims(&[2, 2], vec![0.25; 4]).unwrap();
        assert_eq!(map_estimator(&iid, &one(1), 1).unwrap(), 0);
    }

    #[test]
    fn pe_reduction_example2() {
        let pr = example2(0.1, 0.5).unwrap();
        let r = pe_fixed_set_srdf(&pr.pmf, &one(2), &SrdfOptions::default()).unwrap();
        assert!((r.delta_range.delta_min - 0.1).abs() < 1e-12);
        assert!((r.delta_range.delta_max - 0.55).abs() < 1e-12);
        for d in r.grid(201) {
            let expect = 1.0 - h2(((d - 0.1) / 0.9).min(0.5));
            assert!((r.eval(d).unwrap() - expect).abs() < 5e-3, "{d}");
        }
        // lifted kernels replay through the unreduced problem
        for p in &r.sources[0].points {
            let (dd, rr) = replay(&pr.pmf, &pr.distortion, &r.sources[0], p).unwrap();
            assert!((dd - p.delta).abs() < 1e-9 && (rr - p.rate).abs() < 1e-9);
        }
    }

    #[test]
    fn pe_reduction_with_deterministic_completion() {
        // X2 = X1: α ≡ 1, plain Hamming problem of X1 with no shift
        let copy = JointPmf::with_partial_support(
            crate::prob::numbered_components("X", &[2, 2]).unwrap(),
            vec![0.3, 0.0, 0.0, 0.7],
        )
        .unwrap();
        let r = pe_fixed_set_srdf(&copy, &one(1), &SrdfOptions::default()).unwrap();
        assert_eq!(r.delta_range.delta_min, 0.0);
        for d in r.grid(51) {
            let expect = (h2(0.3) - h2(d.min(0.3))).max(0.0);
            assert!((r.eval(d).unwrap() - expect).abs() < 5e-3);
        }
    }

    #[test]
    fn irs_with_full_observation_is_fixed_set() {
        let pr = example1();
        let o = SrdfOptions::default();
        let irs = irs_srdf(&pr.pmf, &pr.distortion, 2, &o).unwrap();
        let fixed = fixed_set_srdf(&pr.pmf, &pr.distortion, &SubsetIndex::full(2), &o).unwrap();
        assert_eq!(irs.curve.vertices().len(), fixed.curve.vertices().len());
        for d in fixed.grid(101) {
            assert_eq!(irs.eval(d).unwrap(), fixed.eval(d).unwrap());
        }
    }

    #[test]
    fn mrs_with_full_observation_is_fixed_set() {
        let pr = example2(0.2, 0.3).unwrap();
        let o = SrdfOptions::default();
        let mrs = mrs_informed_srdf(&pr.pmf, &pr.distortion, 2, &o).unwrap();
        let fixed = fixed_set_srdf(&pr.pmf, &pr.distortion, &SubsetIndex::full(2), &o).unwrap();
        for d in fixed.grid(101) {
            assert!((mrs.eval(d).unwrap() - fixed.eval(d).unwrap()).abs() < 1e-12);
        }
        let (raw, cvx) = mrs_uninformed_bound(&pr.pmf, &pr.distortion, 2, &o).unwrap();
        for d in fixed.grid(101) {
            assert!((raw.eval(d).unwrap() - fixed.eval(d).unwrap()).abs() < 1e-9);
            assert!((cvx.eval(d).unwrap() - fixed.eval(d).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_points_replay() {
        let pr = example2(0.1, 0.5).unwrap();
        let r = mrs_informed_srdf(&pr.pmf, &pr.distortion, 1, &SrdfOptions::default()).unwrap();
        for v in r.curve.vertices() {
            for tag in &v.candidates {
                let (dd, rr) = replay(&pr.pmf, &pr.distortion, &r.sources[tag.source], r.point(*tag)).unwrap();
                assert!((dd - v.delta).abs() < 1e-9 && (rr - v.rate).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_distortion_costs_nothing() {
        let pmf = JointPmf::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let d = DistortionTable::from_fn(pmf.shape().clone(), pmf.shape().clone(), |_, _| Some(0.0)).unwrap();
        let r = mrs_uninformed_randomized_refine(&pmf, &d, 1, &SrdfOptions::default()).unwrap();
        assert!(r.diagnostics.refine.iter().all(|p| p.refined_objective.abs() < 1e-12));
        assert_eq!(r.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn refinement_keeps_an_optimal_seed() {
        let pr = example2(0.1, 0.5).unwrap();
        let r = mrs_uninformed_randomized_refine(&pr.pmf, &pr.distortion, 1, &SrdfOptions::default()).unwrap();
        assert!(!r.diagnostics.refine_improved);
        for p in &r.diagnostics.refine {
            assert!(p.refined_objective >= p.seed_objective - 1e-6, "{p:?}");
        }
    }
}
