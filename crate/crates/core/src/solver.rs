//! Blahut–Arimoto at fixed slope, slope sweeps with adaptive refinement,
//! target-distortion inversion and equal-slope aggregation over branches.
//!
//! Rates are in bits. A point computed at slope `λ` minimizes `I + λ E[ρ]`,
//! so `λ` is the magnitude of the curve's slope there. `λ = ∞` denotes the
//! minimum-distortion endpoint and `λ = 0` the zero-rate endpoint.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{DeltaRange, DistortionTable, ExtremeWitness};
use crate::error::{Error, Result};
use crate::prob::{mutual_information, Kernel, ProductSet, RENORMALIZE_TOL};

/// Kernel entries below this are flushed to zero at convergence.
pub const FLUSH: f64 = 1e-15;
/// Pairs within this of the row minimum count as minimizers.
const ARGMIN_TOL: f64 = 1e-12;
/// Points whose distortions differ by less than this are merged.
const DEDUP_TOL: f64 = 1e-9;
/// Largest slope tried when inverting a target distortion.
const LAMBDA_CEILING: f64 = (1u64 << 20) as f64;

/// A rate distortion problem: source pmf on `Z`, distortion `ρ` on `Z × Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RdInstance {
    source: Vec<f64>,
    rho: DistortionTable,
}

impl RdInstance {
    pub fn new(source: Vec<f64>, rho: DistortionTable) -> Result<Self> {
        if source.len() != rho.rows() {
            return Err(Error::Dimension(format!(
                "source has {} symbols, distortion has {} rows",
                source.len(),
                rho.rows()
            )));
        }
        if source.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf("source entries must be finite and nonnegative".into()));
        }
        let total: f64 = source.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidPmf(format!("source sums to {total}")));
        }
        let source = source.into_iter().map(|p| p / total).collect();
        let inst = Self { source, rho };
        inst.delta_max_choice()?;
        Ok(inst)
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn rho(&self) -> &DistortionTable {
        &self.rho
    }

    pub fn n_source(&self) -> usize {
        self.source.len()
    }

    pub fn n_repro(&self) -> usize {
        self.rho.cols()
    }

    /// `E[min_y ρ(Z, y)]`.
    pub fn delta_min(&self) -> f64 {
        self.source
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(z, &p)| p * self.rho.row_min(z))
            .sum()
    }

    /// `min_y E[ρ(Z, y)]` over `y` admissible on the whole support, and the
    /// smallest such minimizer.
    pub fn delta_max_choice(&self) -> Result<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        'y: for y in 0..self.n_repro() {
            let mut total = 0.0;
            for (z, &p) in self.source.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                match self.rho.get(z, y) {
                    Some(v) => total += p * v,
                    None => continue 'y,
                }
            }
            if best.map_or(true, |(b, _)| total < b) {
                best = Some((total, y));
            }
        }
        best.ok_or_else(|| {
            Error::NoAdmissibleReproduction("no reproduction is admissible for every source symbol".into())
        })
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max_choice().expect("checked at construction").0
    }

    pub fn domain(&self) -> DeltaRange {
        let (delta_max, y) = self.delta_max_choice().expect("checked at construction");
        DeltaRange {
            delta_min: self.delta_min(),
            delta_max,
            min_witness: None,
            max_witness: Some(ExtremeWitness::Reproduction(y)),
        }
    }

    /// `E[ρ]` under `kernel`; infinite if positive mass sits on a forbidden pair.
    pub fn distortion_of(&self, kernel: &Kernel) -> f64 {
        let mut total = 0.0;
        for (z, &p) in self.source.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (y, &w) in kernel.row(z).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                match self.rho.get(z, y) {
                    Some(v) => total += p * w * v,
                    None => return f64::INFINITY,
                }
            }
        }
        total
    }

    pub fn rate_of(&self, kernel: &Kernel) -> f64 {
        mutual_information(&self.source, kernel)
    }

    /// Exact bit pattern of the instance, for deduplication.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(2 + self.source.len() + 2 * self.rho.values().len());
        out.push(self.source.len() as u64);
        out.push(self.n_repro() as u64);
        out.extend(self.source.iter().map(|p| p.to_bits()));
        out.extend(self.rho.values().iter().map(|v| v.to_bits()));
        out.extend(self.rho.forbidden_mask().iter().map(|&f| f as u64));
        out
    }
}

/// One point of a parametric curve together with the kernel attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub lambda: f64,
    pub delta: f64,
    pub rate: f64,
    pub kernel: Kernel,
    pub iterations: usize,
    pub converged: bool,
}

/// Anything located on a curve by its supporting slope.
pub trait SlopePoint {
    fn lambda(&self) -> f64;
    fn delta(&self) -> f64;
    fn rate(&self) -> f64;
}

impl SlopePoint for RdPoint {
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn rate(&self) -> f64 {
        self.rate
    }
}

fn check_solver_args(tol: f64, lambda: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {tol} must be positive")));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::OutOfRange(format!("slope {lambda} must be nonnegative")));
    }
    Ok(())
}

/// Live columns that another live column beats, or ties with a lower index,
/// on every source symbol of positive mass (cells outside `support` cost `∞`).
fn dominated_columns(inst: &RdInstance, support: &[bool], cols: &[bool]) -> Vec<bool> {
    let (nz, ny) = (inst.n_source(), inst.n_repro());
    let cost = |z: usize, y: usize| if support[z * ny + y] { inst.rho.raw(z, y) } else { f64::INFINITY };
    let live_rows: Vec<usize> = (0..nz).filter(|&z| inst.source[z] > 0.0).collect();
    let beats = |b: usize, y: usize| {
        let mut strict = false;
        for &z in &live_rows {
            let (cb, cy) = (cost(z, b), cost(z, y));
            if cb > cy {
                return false;
            }
            strict |= cb < cy;
        }
        strict || b < y
    };
    (0..ny).map(|y| cols[y] && (0..ny).any(|b| b != y && cols[b] && beats(b, y))).collect()
}

/// The instance restricted to its undominated reproductions, with their
/// original indices. Its rate distortion function is the same.
pub fn prune_dominated(inst: &RdInstance) -> Result<(RdInstance, Vec<usize>)> {
    let (nz, ny) = (inst.n_source(), inst.n_repro());
    let support = admissible_support(inst);
    let cols: Vec<bool> = (0..ny).map(|y| (0..nz).any(|z| inst.source[z] > 0.0 && support[z * ny + y])).collect();
    let dominated = dominated_columns(inst, &support, &cols);
    let keep: Vec<usize> = (0..ny).filter(|&y| cols[y] && !dominated[y]).collect();
    let entries = (0..nz).flat_map(|z| keep.iter().map(move |&y| inst.rho.get(z, y))).collect();
    let rho = DistortionTable::new(ProductSet::new(vec![nz]), ProductSet::new(vec![keep.len()]), entries)?;
    Ok((RdInstance::new(inst.source.clone(), rho)?, keep))
}

/// Fixed data of one Blahut–Arimoto run.
struct Ba<'a> {
    p: &'a [f64],
    nz: usize,
    ny: usize,
    lambda: f64,
    /// `ρ_min(z)`, subtracted before exponentiating.
    shift: Vec<f64>,
    /// `2^{-λ(ρ - ρ_min)}` on the support, zero elsewhere.
    expo: Vec<f64>,
    cols: Vec<bool>,
    /// Columns another live column beats (or ties with a lower index) on every source symbol.
    dominated: Vec<bool>,
}

/// Result of one update from an output marginal `q`.
struct BaStep {
    objective: f64,
    next_q: Vec<f64>,
    /// `max_y c(y)` in bits: an upper bound on `objective - optimum`.
    gap: f64,
    c: Vec<f64>,
}

impl<'a> Ba<'a> {
    fn new(inst: &'a RdInstance, lambda: f64, support: &[bool]) -> Self {
        let (nz, ny) = (inst.n_source(), inst.n_repro());
        let mut shift = vec![0.0; nz];
        let mut expo = vec![0.0; nz * ny];
        for z in 0..nz {
            let row_min = (0..ny)
                .filter(|&y| support[z * ny + y])
                .map(|y| inst.rho.raw(z, y))
                .fold(f64::INFINITY, f64::min);
            shift[z] = row_min;
            for y in 0..ny {
                if support[z * ny + y] {
                    expo[z * ny + y] = (-lambda * (inst.rho.raw(z, y) - row_min)).exp2();
                }
            }
        }
        let cols: Vec<bool> = (0..ny).map(|y| (0..nz).any(|z| inst.source[z] > 0.0 && support[z * ny + y])).collect();
        let dominated = dominated_columns(inst, support, &cols);
        Self { p: &inst.source, nz, ny, lambda, shift, expo, cols, dominated }
    }

    /// Uniform over the undominated reproductions. Moving a dominated
    /// column's mass to its dominator lowers neither distortion nor rate, so
    /// the optimum is unaffected while the slow decay of near-tied columns
    /// is avoided.
    fn uniform(&self) -> Vec<f64> {
        let live: Vec<bool> = (0..self.ny).map(|y| self.cols[y] && !self.dominated[y]).collect();
        let n = live.iter().filter(|&&a| a).count() as f64;
        live.iter().map(|&a| if a { 1.0 / n } else { 0.0 }).collect()
    }

    /// Optimal kernel for `q` written into `w`, plus objective, next marginal and gap.
    fn step(&self, q: &[f64], w: &mut [f64]) -> BaStep {
        let ny = self.ny;
        let mut objective = 0.0;
        let mut c = vec![0.0; ny];
        let mut degenerate = false;
        for z in 0..self.nz {
            let row = &mut w[z * ny..(z + 1) * ny];
            let e = &self.expo[z * ny..(z + 1) * ny];
            let mut norm = 0.0;
            for y in 0..ny {
                row[y] = q[y] * e[y];
                norm += row[y];
            }
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            } else {
                // q vanished on this row's support: fall back to its own weights
                let s: f64 = e.iter().sum();
                row.iter_mut().zip(e).for_each(|(v, &x)| *v = x / s);
                degenerate |= self.p[z] > 0.0;
            }
            if self.p[z] > 0.0 && norm > 0.0 {
                objective += self.p[z] * (self.lambda * self.shift[z] - norm.log2());
                for y in 0..ny {
                    c[y] += self.p[z] * e[y] / norm;
                }
            }
        }
        let next_q: Vec<f64> = (0..ny).map(|y| q[y] * c[y]).collect();
        let worst = (0..ny).filter(|&y| self.cols[y]).map(|y| c[y]).fold(0.0, f64::max);
        let gap = if degenerate { f64::INFINITY } else { worst.log2().max(0.0) };
        BaStep { objective, next_q, gap, c }
    }

    /// Drop the reproductions that are shrinking, iterate on what is left and
    /// return the marginal if the optimality gap over all reproductions closes.
    fn certify_pruned(&self, q: &[f64], c: &[f64], tol: f64, budget: usize, w: &mut [f64]) -> (Option<Vec<f64>>, usize) {
        let keep: Vec<bool> = (0..self.ny).map(|y| q[y] > 0.0 && c[y] >= 1.0).collect();
        if (0..self.ny).all(|y| keep[y] == (q[y] > 0.0)) || !keep.iter().any(|&k| k) {
            return (None, 0);
        }
        let mut cand: Vec<f64> = (0..self.ny).map(|y| if keep[y] { q[y] } else { 0.0 }).collect();
        let s: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|v| *v /= s);
        let mut prev = f64::INFINITY;
        for used in 1..=budget {
            let st = self.step(&cand, w);
            if st.gap < tol {
                return (Some(cand), used);
            }
            if prev - st.objective < tol * 1e-2 {
                return (None, used);
            }
            prev = st.objective;
            cand = st.next_q;
        }
        (None, budget)
    }

    /// `Σ_z p(z) ln Σ_y q(y) e(z, y)`, the part of the objective that depends on `q`.
    fn log_likelihood(&self, q: &[f64]) -> f64 {
        (0..self.nz)
            .filter(|&z| self.p[z] > 0.0)
            .map(|z| {
                let e = &self.expo[z * self.ny..(z + 1) * self.ny];
                self.p[z] * e.iter().zip(q).map(|(a, b)| a * b).sum::<f64>().ln()
            })
            .sum()
    }

    /// Newton's method on faces of the simplex for the concave problem
    /// `max_q Σ_z p(z) ln Σ_y q(y) e(z, y)`, started from `q`. Coordinates
    /// that reach zero leave the face; reproductions with `c(y) > 1` join it.
    /// Returns the marginal if its gap certificate is below `tol`.
    fn newton_certify(&self, q: &[f64], tol: f64, w: &mut [f64]) -> Option<Vec<f64>> {
        let ny = self.ny;
        let rows: Vec<usize> = (0..self.nz).filter(|&z| self.p[z] > 0.0).collect();
        let mut q = q.to_vec();
        let mut active: Vec<bool> = (0..ny).map(|y| self.cols[y] && q[y] > 0.0).collect();
        let mut steps = 0;
        'outer: while steps < NEWTON_STEPS {
            steps += 1;
            let face: Vec<usize> = (0..ny).filter(|&y| active[y]).collect();
            let n = face.len();
            let mut g = vec![0.0; n];
            let mut h = DMatrix::<f64>::zeros(n + 1, n + 1);
            for &z in &rows {
                let e = &self.expo[z * ny..(z + 1) * ny];
                let r: f64 = face.iter().map(|&y| e[y] * q[y]).sum();
                if !(r > 0.0) {
                    return None;
                }
                for (i, &a) in face.iter().enumerate() {
                    g[i] += self.p[z] * e[a] / r;
                    for (j, &b) in face.iter().enumerate() {
                        h[(i, j)] += self.p[z] * e[a] * e[b] / (r * r);
                    }
                }
            }
            let scale = (0..n).map(|i| h[(i, i)]).fold(0.0, f64::max);
            let mut rhs = DVector::<f64>::zeros(n + 1);
            for i in 0..n {
                // faces wider than the source leave the Hessian singular
                h[(i, i)] += 1e-12 * scale;
                h[(i, n)] = 1.0;
                h[(n, i)] = 1.0;
                rhs[i] = g[i];
            }
            let step = h.lu().solve(&rhs)?;
            let dir: Vec<f64> = (0..n).map(|i| step[i]).collect();
            if dir.iter().all(|d| d.abs() <= 1e-15) {
                // optimal on this face: grow it if some reproduction still pays
                let st = self.step(&q, w);
                let best = (0..ny)
                    .filter(|&y| self.cols[y] && !active[y])
                    .max_by(|&a, &b| st.c[a].total_cmp(&st.c[b]));
                match best {
                    Some(y) if st.c[y] > 1.0 + 1e-14 => {
                        active[y] = true;
                        continue 'outer;
                    }
                    _ => break,
                }
            }
            let mut t: f64 = 1.0;
            let mut blocking = None;
            for (i, &y) in face.iter().enumerate() {
                if dir[i] < 0.0 && q[y] + t * dir[i] <= 0.0 {
                    t = -q[y] / dir[i];
                    blocking = Some(y);
                }
            }
            if t <= 0.0 {
                if let Some(y) = blocking {
                    active[y] = false;
                    q[y] = 0.0;
                    continue;
                }
            }
            let base = self.log_likelihood(&q);
            let mut accepted = false;
            for _ in 0..60 {
                let mut cand = q.clone();
                for (i, &y) in face.iter().enumerate() {
                    cand[y] = (q[y] + t * dir[i]).max(0.0);
                }
                if self.log_likelihood(&cand) >= base - 1e-15 * base.abs().max(1.0) {
                    q = cand;
                    accepted = true;
                    break;
                }
                t /= 2.0;
                blocking = None;
            }
            if !accepted {
                break;
            }
            if let Some(y) = blocking {
                q[y] = 0.0;
                active[y] = false;
            }
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= s);
        }
        let st = self.step(&q, w);
        (st.gap < tol).then_some(q)
    }
}

/// Squared extrapolation of the fixed-point map `q -> q1 -> q2`, shortened
/// until every live reproduction keeps positive mass (`α = -1` is `q2`).
fn squarem(q: &[f64], q1: &[f64], q2: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = q1.iter().zip(q).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = (0..q.len()).map(|y| q2[y] - 2.0 * q1[y] + q[y]).collect();
    let (rr, vv) = (r.iter().map(|x| x * x).sum::<f64>(), v.iter().map(|x| x * x).sum::<f64>());
    if !(vv > 0.0) {
        return q2.to_vec();
    }
    let mut alpha = -(rr / vv).sqrt();
    for _ in 0..30 {
        if alpha >= -1.0 {
            break;
        }
        let cand: Vec<f64> = (0..q.len()).map(|y| q[y] - 2.0 * alpha * r[y] + alpha * alpha * v[y]).collect();
        if (0..q.len()).all(|y| q[y] == 0.0 || cand[y] > 0.0) {
            let s: f64 = cand.iter().filter(|x| **x > 0.0).sum();
            return cand.iter().map(|&x| if x > 0.0 { x / s } else { 0.0 }).collect();
        }
        alpha = (alpha - 1.0) / 2.0;
    }
    q2.to_vec()
}

/// Newton steps (including face changes) per certification attempt.
const NEWTON_STEPS: usize = 200;

/// Iterations between attempts to certify a pruned support.
const PRUNE_EVERY: usize = 50;

/// Alternating minimization of `I + λ E[ρ]` over kernels supported on `support`.
///
/// Stops when the objective changes by less than `tol` or when Blahut's
/// bound certifies it is within `tol` of the optimum. Near slopes where the
/// optimal output marginal loses support the plain iteration only decays
/// geometrically, so shrinking reproductions are periodically dropped on
/// trial and kept out only if the bound then certifies optimality.
fn blahut_arimoto(inst: &RdInstance, lambda: f64, support: &[bool], tol: f64, max_iter: usize) -> RdPoint {
    let ba = Ba::new(inst, lambda, support);
    let (nz, ny) = (ba.nz, ba.ny);
    let mut q = ba.uniform();
    let mut w = vec![0.0; nz * ny];
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    // plain two-step iterate and its objective bound, for rejecting extrapolations
    let mut fallback: Option<(Vec<f64>, f64)> = None;
    let mut next_prune = PRUNE_EVERY;
    while iterations < max_iter {
        iterations += 1;
        let mut st = ba.step(&q, &mut w);
        if let Some((q2, bound)) = fallback.take() {
            if !(st.objective <= bound) {
                q = q2;
                iterations += 1;
                st = ba.step(&q, &mut w);
            }
        }
        debug_assert!(
            st.objective <= prev + 1e-9 * (1.0 + st.objective.abs()),
            "objective increased from {prev} to {}",
            st.objective
        );
        let done = st.gap < tol || prev - st.objective < tol;
        prev = st.objective;
        if done || iterations >= next_prune {
            next_prune = iterations + PRUNE_EVERY;
            let budget = max_iter.saturating_sub(iterations).min(10 * PRUNE_EVERY);
            let mut trial = vec![0.0; nz * ny];
            let (found, used) = ba.certify_pruned(&q, &st.c, tol, budget, &mut trial);
            iterations += used;
            let found = found.or_else(|| {
                iterations += 1;
                ba.newton_certify(&q, tol, &mut trial)
            });
            if let Some(cand) = found {
                ba.step(&cand, &mut w);
                converged = true;
                break;
            }
            if done {
                // a pruned certificate would change `w`; the plain one stands
                ba.step(&q, &mut w);
                converged = true;
                break;
            }
        }
        let q1 = st.next_q;
        iterations += 1;
        let st1 = ba.step(&q1, &mut w);
        q = squarem(&q, &q1, &st1.next_q);
        fallback = Some((st1.next_q, st1.objective));
    }
    for z in 0..nz {
        let row = &mut w[z * ny..(z + 1) * ny];
        row.iter_mut().for_each(|v| {
            if *v < FLUSH {
                *v = 0.0
            }
        });
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let kernel = Kernel::from_raw(nz, ny, w);
    RdPoint {
        lambda,
        delta: inst.distortion_of(&kernel),
        rate: inst.rate_of(&kernel),
        kernel,
        iterations,
        converged,
    }
}

fn admissible_support(inst: &RdInstance) -> Vec<bool> {
    inst.rho.forbidden_mask().iter().map(|&f| !f).collect()
}

/// Minimize `I + λ E[ρ]`; `λ = 0` and `λ = ∞` give the two endpoints.
pub fn ba_fixed_slope(inst: &RdInstance, lambda: f64, tol: f64, max_iter: usize) -> Result<RdPoint> {
    check_solver_args(tol, lambda)?;
    if lambda == 0.0 {
        return Ok(max_distortion_point(inst));
    }
    if lambda.is_infinite() {
        return min_distortion_point(inst, tol, max_iter);
    }
    Ok(blahut_arimoto(inst, lambda, &admissible_support(inst), tol, max_iter))
}

/// `(Δ_max, 0)` realized by a constant reproduction.
pub fn max_distortion_point(inst: &RdInstance) -> RdPoint {
    let (delta, y) = inst.delta_max_choice().expect("checked at construction");
    RdPoint {
        lambda: 0.0,
        delta,
        rate: 0.0,
        kernel: Kernel::constant(inst.n_source(), inst.n_repro(), y),
        iterations: 0,
        converged: true,
    }
}

/// `(Δ_min, R(Δ_min))`: the least informative kernel among those that only
/// use row-minimizing reproductions.
pub fn min_distortion_point(inst: &RdInstance, tol: f64, max_iter: usize) -> Result<RdPoint> {
    check_solver_args(tol, 0.0)?;
    let ny = inst.n_repro();
    let mut support = vec![false; inst.n_source() * ny];
    for z in 0..inst.n_source() {
        let m = inst.rho.row_min(z);
        for y in 0..ny {
            if let Some(v) = inst.rho.get(z, y) {
                support[z * ny + y] = v <= m + ARGMIN_TOL * (1.0 + m.abs());
            }
        }
    }
    let mut pt = blahut_arimoto(inst, 0.0, &support, tol, max_iter);
    pt.lambda = f64::INFINITY;
    Ok(pt)
}

/// `n` slopes spaced geometrically on `[lo, hi]`, in decreasing order.
pub fn geometric_schedule(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::OutOfRange(format!(
            "slope schedule needs 0 < min <= max and at least one point (got [{lo}, {hi}], {n})"
        )));
    }
    if n == 1 {
        return Ok(vec![hi]);
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).rev().map(|i| lo * (ratio * i as f64).exp()).collect())
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() || schedule.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::OutOfRange("slope schedule must be nonempty, positive and finite".into()));
    }
    Ok(())
}

/// Sort by slope descending (distortion ascending) and merge nearly equal distortions.
fn assemble<P: SlopePoint>(mut pts: Vec<P>) -> Vec<P> {
    pts.sort_by(|a, b| b.lambda().total_cmp(&a.lambda()));
    let mut out: Vec<P> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some(last) if (p.delta() - last.delta()).abs() <= DEDUP_TOL => {
                // endpoints win so the curve keeps its exact extremes
                let replace = if last.lambda().is_infinite() {
                    false
                } else {
                    p.lambda() == 0.0 || p.rate() < last.rate()
                };
                if replace {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

/// Vertical gap between the chord and the two supporting lines of adjacent
/// points `a` (steeper) and `b`; a bound on how far the chord overestimates.
fn chord_gap(a: &impl SlopePoint, b: &impl SlopePoint) -> f64 {
    let (da, ra, la) = (a.delta(), a.rate(), a.lambda());
    let (db, rb, lb) = (b.delta(), b.rate(), b.lambda());
    if db - da <= 1e-12 {
        return 0.0;
    }
    let chord = |d: f64| ra + (rb - ra) * (d - da) / (db - da);
    if la.is_infinite() {
        // vertical support at a: compare at its own distortion
        return (ra - (rb + lb * (db - da))).max(0.0);
    }
    let x = ((ra + la * da - rb - lb * db) / (la - lb)).clamp(da, db);
    (chord(x) - (ra - la * (x - da))).max(0.0)
}

fn midpoint_slope(la: f64, lb: f64) -> f64 {
    if la.is_infinite() {
        (2.0 * lb).max(1.0)
    } else if lb == 0.0 {
        la / 2.0
    } else {
        (la * lb).sqrt()
    }
}

/// Insert slopes between adjacent points until every chord is within `gap`
/// of the curve, slopes can no longer be split, or `max_points` is reached.
pub fn refine<P, F>(pts: Vec<P>, solve: F, gap: f64, max_points: usize) -> Result<Vec<P>>
where
    P: SlopePoint + Send,
    F: Fn(f64) -> Result<P> + Sync,
{
    let mut pts = assemble(pts);
    loop {
        let mut wanted = Vec::new();
        for w in pts.windows(2) {
            let (la, lb) = (w[0].lambda(), w[1].lambda());
            let splittable = if la.is_infinite() {
                lb < LAMBDA_CEILING
            } else {
                la > 1e-12 && la > lb * (1.0 + 1e-9)
            };
            if !splittable {
                continue;
            }
            if chord_gap(&w[0], &w[1]) > gap {
                wanted.push(midpoint_slope(la, lb));
            }
        }
        let room = max_points.saturating_sub(pts.len());
        if wanted.is_empty() || room == 0 {
            return Ok(pts);
        }
        wanted.truncate(room);
        let new: Vec<P> = wanted.into_par_iter().map(&solve).collect::<Result<_>>()?;
        let before = pts.len();
        pts.extend(new);
        pts = assemble(pts);
        if pts.len() == before {
            return Ok(pts);
        }
    }
}

/// A traced curve: points by increasing distortion.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    pub points: Vec<RdPoint>,
    pub domain: DeltaRange,
}

impl RdCurve {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// Piecewise-linear interpolation through the points.
    pub fn interpolate(&self, delta: f64) -> f64 {
        interpolate(&self.points, delta)
    }
}

pub(crate) fn interpolate<P: SlopePoint>(pts: &[P], delta: f64) -> f64 {
    let first = &pts[0];
    if delta <= first.delta() {
        return first.rate();
    }
    for w in pts.windows(2) {
        if delta <= w[1].delta() {
            let t = (delta - w[0].delta()) / (w[1].delta() - w[0].delta());
            return w[0].rate() + t * (w[1].rate() - w[0].rate());
        }
    }
    pts[pts.len() - 1].rate()
}

/// Solve every slope of `schedule` plus the two endpoints.
pub fn sweep(inst: &RdInstance, schedule: &[f64], tol: f64, max_iter: usize) -> Result<RdCurve> {
    check_schedule(schedule)?;
    let mut slopes = schedule.to_vec();
    slopes.push(0.0);
    slopes.push(f64::INFINITY);
    let points = slopes
        .into_par_iter()
        .map(|l| ba_fixed_slope(inst, l, tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    Ok(RdCurve { points: assemble(points), domain: inst.domain() })
}

/// [`sweep`] followed by [`refine`].
pub fn sweep_adaptive(
    inst: &RdInstance,
    schedule: &[f64],
    tol: f64,
    max_iter: usize,
    gap: f64,
    max_points: usize,
) -> Result<RdCurve> {
    let base = sweep(inst, schedule, tol, max_iter)?;
    let points = refine(base.points, |l| ba_fixed_slope(inst, l, tol, max_iter), gap, max_points)?;
    Ok(RdCurve { points, domain: base.domain })
}

/// Result of inverting the curve at a target distortion.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAtDistortion {
    pub rate: f64,
    pub delta: f64,
    /// One point, or two points with time-sharing weights summing to one.
    pub parts: Vec<(f64, RdPoint)>,
}

/// `R(target)` by bisection on the slope, time-sharing the bracketing points
/// when the distortion jumps across the target.
pub fn rate_at_distortion(inst: &RdInstance, target: f64, tol: f64, max_iter: usize) -> Result<RateAtDistortion> {
    let ba_tol = 1e-12;
    let lo_pt = min_distortion_point(inst, ba_tol, max_iter)?;
    if target < lo_pt.delta - DEDUP_TOL {
        return Err(Error::InfeasibleDistortion { target, delta_min: lo_pt.delta });
    }
    let single = |p: RdPoint| RateAtDistortion { rate: p.rate, delta: p.delta, parts: vec![(1.0, p)] };
    let top = max_distortion_point(inst);
    if target >= top.delta {
        return Ok(single(top));
    }
    if target <= lo_pt.delta + tol {
        return Ok(single(lo_pt));
    }
    // hi: distortion <= target (steep side); lo: distortion > target
    let mut hi: Option<RdPoint> = None;
    let mut lo = top;
    let mut l = 1.0;
    while l <= LAMBDA_CEILING {
        let p = blahut_arimoto(inst, l, &admissible_support(inst), ba_tol, max_iter);
        if p.delta <= target {
            hi = Some(p);
            break;
        }
        lo = p;
        l *= 2.0;
    }
    let mut hi = hi.unwrap_or(lo_pt);
    if (hi.delta - target).abs() <= tol {
        return Ok(single(hi));
    }
    for _ in 0..200 {
        let (a, b) = (lo.lambda, hi.lambda);
        if b.is_finite() && a > 0.0 && b / a < 1.0 + 1e-12 {
            break;
        }
        let mid = if b.is_infinite() {
            2.0 * a.max(0.5)
        } else if a == 0.0 {
            b / 2.0
        } else {
            (a * b).sqrt()
        };
        if mid > LAMBDA_CEILING {
            break;
        }
        let p = blahut_arimoto(inst, mid, &admissible_support(inst), ba_tol, max_iter);
        if (p.delta - target).abs() <= tol {
            return Ok(single(p));
        }
        if p.delta < target {
            hi = p;
        } else {
            lo = p;
        }
    }
    let w = (lo.delta - target) / (lo.delta - hi.delta);
    Ok(RateAtDistortion {
        rate: w * hi.rate + (1.0 - w) * lo.rate,
        delta: target,
        parts: vec![(w, hi), (1.0 - w, lo)],
    })
}

/// One weighted subproblem of an equal-slope aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub instance: RdInstance,
}

/// Aggregate of per-branch points solved at a common slope.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub delta: f64,
    pub rate: f64,
    pub parts: Vec<RdPoint>,
}

impl SlopePoint for BranchPoint {
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn delta(&self) -> f64 {
        self.delta
    }
    fn rate(&self) -> f64 {
        self.rate
    }
}

impl BranchPoint {
    pub fn converged(&self) -> bool {
        self.parts.iter().all(|p| p.converged)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchCurve {
    pub points: Vec<BranchPoint>,
    pub domain: DeltaRange,
}

impl BranchCurve {
    pub fn interpolate(&self, delta: f64) -> f64 {
        interpolate(&self.points, delta)
    }
}

fn check_branches(branches: &[Branch]) -> Result<()> {
    if branches.is_empty() {
        return Err(Error::Empty("no branches".into()));
    }
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    if branches.iter().any(|b| !(b.weight >= 0.0)) || (total - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::InvalidPmf(format!("branch weights sum to {total}")));
    }
    Ok(())
}

/// Solve every branch at slope `lambda` and aggregate by weight.
pub fn branch_point(branches: &[Branch], lambda: f64, tol: f64, max_iter: usize) -> Result<BranchPoint> {
    let parts = branches
        .iter()
        .map(|b| ba_fixed_slope(&b.instance, lambda, tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    let delta = branches.iter().zip(&parts).map(|(b, p)| b.weight * p.delta).sum();
    let rate = branches.iter().zip(&parts).map(|(b, p)| b.weight * p.rate).sum();
    Ok(BranchPoint { lambda, delta, rate, parts })
}

fn branch_domain(branches: &[Branch]) -> DeltaRange {
    let lo = branches.iter().map(|b| b.weight * b.instance.delta_min()).sum();
    let hi = branches.iter().map(|b| b.weight * b.instance.delta_max()).sum();
    DeltaRange::new(lo, hi)
}

/// Equal-slope sweep of a weighted family of problems.
pub fn branch_sweep(branches: &[Branch], schedule: &[f64], tol: f64, max_iter: usize) -> Result<BranchCurve> {
    check_branches(branches)?;
    check_schedule(schedule)?;
    let mut slopes = schedule.to_vec();
    slopes.push(0.0);
    slopes.push(f64::INFINITY);
    let points = slopes
        .into_par_iter()
        .map(|l| branch_point(branches, l, tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchCurve { points: assemble(points), domain: branch_domain(branches) })
}

/// [`branch_sweep`] followed by [`refine`].
pub fn branch_sweep_adaptive(
    branches: &[Branch],
    schedule: &[f64],
    tol: f64,
    max_iter: usize,
    gap: f64,
    max_points: usize,
) -> Result<BranchCurve> {
    let base = branch_sweep(branches, schedule, tol, max_iter)?;
    let points = refine(base.points, |l| branch_point(branches, l, tol, max_iter), gap, max_points)?;
    Ok(BranchCurve { points, domain: base.domain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::fixed_set_instance;
    use crate::prob::{h2, ProductSet, SubsetIndex};
    use crate::problem::example1;

    fn bernoulli_hamming(p: f64) -> RdInstance {
        RdInstance::new(vec![1.0 - p, p], DistortionTable::hamming(2)).unwrap()
    }

    fn schedule() -> Vec<f64> {
        geometric_schedule(1e-3, 64.0, 64).unwrap()
    }

    /// Near a support change of the output marginal the plain iteration
    /// needs tens of thousands of steps on this instance.
    fn slow_instance() -> RdInstance {
        let rho = [0.4427, 0.8029, 0.5554, 0.7998, 0.7999, 0.4723, 0.6787, 0.5828];
        let table = DistortionTable::new(
            ProductSet::new(vec![2]),
            ProductSet::new(vec![4]),
            rho.iter().map(|&v| Some(v)).collect(),
        )
        .unwrap();
        RdInstance::new(vec![0.417, 0.583], table).unwrap()
    }

    #[test]
    fn support_changes_are_certified_quickly() {
        let inst = slow_instance();
        for lambda in [1.126, 1.3422, 1.4655, 1.6] {
            let p = ba_fixed_slope(&inst, lambda, 1e-10, 5000).unwrap();
            assert!(p.converged && p.iterations < 1000, "slope {lambda}: {} iterations", p.iterations);
            let q = p.kernel.output_marginal(inst.source());
            assert_eq!((q[2], q[3]), (0.0, 0.0));
            // no other kernel beats the certified objective
            let long = ba_fixed_slope(&inst, lambda, 1e-14, 200_000).unwrap();
            assert!(p.rate + lambda * p.delta <= long.rate + lambda * long.delta + 1e-9);
        }
    }

    #[test]
    fn dominated_reproductions_are_pruned() {
        let table = DistortionTable::new(
            ProductSet::new(vec![2]),
            ProductSet::new(vec![4]),
            vec![Some(0.0), Some(0.5), Some(0.0), Some(1.0), Some(1.0), Some(0.5), Some(1.0), None],
        )
        .unwrap();
        let inst = RdInstance::new(vec![0.3, 0.7], table).unwrap();
        let (pruned, kept) = prune_dominated(&inst).unwrap();
        // column 2 duplicates column 0; column 3 is worse than column 0 everywhere
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(pruned.n_repro(), 2);
        for lambda in [0.5, 2.0, 8.0] {
            let a = ba_fixed_slope(&inst, lambda, 1e-12, 5000).unwrap();
            let b = ba_fixed_slope(&pruned, lambda, 1e-12, 5000).unwrap();
            assert!((a.rate - b.rate).abs() < 1e-9 && (a.delta - b.delta).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_slope_is_the_max_point() {
        let inst = bernoulli_hamming(0.3);
        let p = ba_fixed_slope(&inst, 0.0, 1e-10, 5000).unwrap();
        assert_eq!((p.rate, p.delta), (0.0, 0.3));
        assert_eq!(p.kernel, Kernel::constant(2, 2, 0));
    }

    #[test]
    fn uniform_hamming_at_log9() {
        let inst = bernoulli_hamming(0.5);
        let p = ba_fixed_slope(&inst, 9f64.log2(), 1e-12, 5000).unwrap();
        assert!(p.converged);
        assert!((p.delta - 0.1).abs() < 1e-6, "{}", p.delta);
        assert!((p.rate - (1.0 - h2(0.1))).abs() < 1e-6, "{}", p.rate);
        assert!((p.rate - 0.5310).abs() < 1e-4);
    }

    #[test]
    fn steep_slope_reaches_delta_min() {
        let inst = fixed_set_instance(&example1().pmf, &example1().distortion, &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        let p = ba_fixed_slope(&inst, 60.0, 1e-10, 5000).unwrap();
        assert!((p.delta - inst.delta_min()).abs() < 1e-6);
    }

    #[test]
    fn forbidden_pairs_get_zero_mass() {
        let inst = fixed_set_instance(&example1().pmf, &example1().distortion, &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        for l in [0.5, 1.0, 3.0, f64::INFINITY] {
            let p = ba_fixed_slope(&inst, l, 1e-10, 5000).unwrap();
            for z in 0..2 {
                for y in 0..6 {
                    if inst.rho().is_forbidden(z, y) {
                        assert_eq!(p.kernel.get(z, y), 0.0);
                    }
                }
            }
            assert!(p.delta.is_finite());
        }
    }

    #[test]
    fn sweep_matches_binary_closed_form() {
        let inst = bernoulli_hamming(0.5);
        let c = sweep(&inst, &schedule(), 1e-10, 5000).unwrap();
        assert!(c.all_converged());
        for p in &c.points {
            assert!((p.rate - (1.0 - h2(p.delta))).abs() < 1e-6, "{} {}", p.delta, p.rate);
        }
        assert_eq!(c.points.first().unwrap().rate, 1.0);
        assert_eq!(c.points.last().unwrap().rate, 0.0);
        // chords of the fixed schedule sag up to ~4e-3 near Δ = 0.03; refinement closes them
        let c = sweep_adaptive(&inst, &schedule(), 1e-10, 5000, 1e-4, 2000).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..200 {
            let d = 0.5 * i as f64 / 200.0;
            worst = worst.max((c.interpolate(d) - (1.0 - h2(d))).abs());
        }
        assert!(worst < 2e-3, "sup error {worst}");
    }

    #[test]
    fn point_mass_source_gives_a_single_point() {
        let inst = RdInstance::new(vec![1.0, 0.0], DistortionTable::hamming(2)).unwrap();
        let c = sweep(&inst, &schedule(), 1e-10, 5000).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!((c.points[0].delta, c.points[0].rate), (0.0, 0.0));
    }

    #[test]
    fn example1_first_set_is_a_line() {
        let pr = example1();
        let inst = fixed_set_instance(&pr.pmf, &pr.distortion, &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        let c = sweep_adaptive(&inst, &schedule(), 1e-10, 5000, 1e-4, 2000).unwrap();
        for i in 0..=200 {
            let d = 0.5 + i as f64 / 200.0;
            assert!((c.interpolate(d) - (1.5 - d)).abs() < 5e-3);
        }
    }

    #[test]
    fn sweep_is_monotone() {
        let inst = RdInstance::new(
            vec![0.2, 0.5, 0.3],
            DistortionTable::new(
                ProductSet::new(vec![3]),
                ProductSet::new(vec![2]),
                vec![Some(0.0), Some(1.0), Some(0.3), Some(0.4), None, Some(0.0)],
            )
            .unwrap(),
        )
        .unwrap();
        let c = sweep(&inst, &schedule(), 1e-10, 5000).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].delta > w[0].delta);
            assert!(w[1].rate <= w[0].rate + 1e-6);
        }
    }

    #[test]
    fn rate_at_distortion_examples() {
        let inst = bernoulli_hamming(0.5);
        let r = rate_at_distortion(&inst, 0.1, 1e-7, 5000).unwrap();
        assert!((r.rate - 0.5310).abs() < 1e-3);
        assert_eq!(rate_at_distortion(&inst, 0.5, 1e-7, 5000).unwrap().rate, 0.0);
        assert!(matches!(
            rate_at_distortion(&inst, -0.1, 1e-7, 5000),
            Err(Error::InfeasibleDistortion { .. })
        ));
        let pr = example1();
        let inst = fixed_set_instance(&pr.pmf, &pr.distortion, &SubsetIndex::new(vec![1]).unwrap()).unwrap();
        let r = rate_at_distortion(&inst, 1.25, 1e-7, 5000).unwrap();
        assert!((r.rate - 0.1887).abs() < 5e-3, "{}", r.rate);
    }

    #[test]
    fn plateau_is_time_shared() {
        // Example 1, observing the first bit: the whole curve is one segment
        let pr = example1();
        let inst = fixed_set_instance(&pr.pmf, &pr.distortion, &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        let r = rate_at_distortion(&inst, 1.0, 1e-9, 5000).unwrap();
        assert!((r.rate - 0.5).abs() < 1e-6, "{}", r.rate);
        let total: f64 = r.parts.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let replay: f64 = r.parts.iter().map(|(w, p)| w * inst.distortion_of(&p.kernel)).sum();
        assert!((replay - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_and_duplicated_branches_match_sweep() {
        let inst = bernoulli_hamming(0.3);
        let s = schedule();
        let plain = sweep(&inst, &s, 1e-10, 5000).unwrap();
        let one = branch_sweep(&[Branch { weight: 1.0, instance: inst.clone() }], &s, 1e-10, 5000).unwrap();
        let two = branch_sweep(
            &[Branch { weight: 0.5, instance: inst.clone() }, Branch { weight: 0.5, instance: inst }],
            &s,
            1e-10,
            5000,
        )
        .unwrap();
        assert_eq!(plain.points.len(), one.points.len());
        for ((a, b), c) in plain.points.iter().zip(&one.points).zip(&two.points) {
            assert!((a.delta - b.delta).abs() < 1e-12 && (a.rate - b.rate).abs() < 1e-12);
            assert!((a.delta - c.delta).abs() < 1e-12 && (a.rate - c.rate).abs() < 1e-12);
        }
    }

    #[test]
    fn refine_reduces_chord_gaps() {
        let inst = bernoulli_hamming(0.5);
        let c = sweep_adaptive(&inst, &[1.0], 1e-10, 5000, 1e-4, 2000).unwrap();
        for w in c.points.windows(2) {
            assert!(chord_gap(&w[0], &w[1]) <= 1e-4 || w[0].lambda / w[1].lambda < 1.0 + 1e-8);
        }
    }

    #[test]
    fn geometric_schedule_shape() {
        let s = geometric_schedule(1e-3, 64.0, 64).unwrap();
        assert_eq!(s.len(), 64);
        assert!((s[0] - 64.0).abs() < 1e-9 && (s[63] - 1e-3).abs() < 1e-15);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert!(geometric_schedule(0.0, 1.0, 3).is_err());
    }
}
