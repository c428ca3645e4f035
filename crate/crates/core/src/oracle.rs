//! Independent checks: exhaustive search over quantized kernels, Monte Carlo
//! distortion estimates, and two algebraic identities the solvers rely on.
//!
//! Nothing here calls the Blahut–Arimoto solver or the envelope refinement;
//! these functions only evaluate candidate kernels and compare.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::DistortionTable;
use crate::envelope::{lower_convex_envelope, CurvePoint, WitnessTag};
use crate::error::{Error, Result};
use crate::prob::{subsets_of_size, JointPmf, Kernel, ProductSet, SubsetIndex};
use crate::sampler::RandomizedSampler;
use crate::solver::{rate_at_distortion, RdInstance};

/// Largest search space `brute_force_rate` will walk.
pub const ORACLE_LIMIT: u128 = 10_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// All row-stochastic `rows × cols` matrices whose entries are multiples of `1/q`.
#[derive(Clone, Debug)]
pub struct GridKernelIterator {
    rows: usize,
    cols: usize,
    q: u32,
    compositions: Vec<Vec<u32>>,
    next: u128,
    count: u128,
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl GridKernelIterator {
    pub fn new(rows: usize, cols: usize, q: u32) -> Result<Self> {
        if rows == 0 || cols == 0 || q == 0 {
            return Err(Error::OutOfRange("grid kernels need positive dimensions and resolution".into()));
        }
        let per_row = binomial(q as u128 + cols as u128 - 1, cols as u128 - 1);
        let count = per_row.checked_pow(rows as u32).unwrap_or(u128::MAX);
        let compositions = if count <= ORACLE_LIMIT { compositions(q, cols) } else { vec![] };
        Ok(Self { rows, cols, q, compositions, next: 0, count })
    }

    /// `C(q + cols - 1, cols - 1)^rows`.
    pub fn total(&self) -> u128 {
        self.count
    }

    /// Kernel number `index` (row 0 is the most significant digit).
    pub fn get(&self, mut index: u128) -> Kernel {
        let base = self.compositions.len() as u128;
        let mut data = vec![0.0; self.rows * self.cols];
        for r in (0..self.rows).rev() {
            let c = &self.compositions[(index % base) as usize];
            index /= base;
            for (j, &v) in c.iter().enumerate() {
                data[r * self.cols + j] = v as f64 / self.q as f64;
            }
        }
        Kernel::from_raw(self.rows, self.cols, data)
    }
}

impl Iterator for GridKernelIterator {
    type Item = Kernel;

    fn next(&mut self) -> Option<Kernel> {
        if self.next >= self.count || self.compositions.is_empty() {
            return None;
        }
        let k = self.get(self.next);
        self.next += 1;
        Some(k)
    }
}

/// Mutual information in bits, written out independently of the solver.
fn info(source: &[f64], w: &[f64], cols: usize) -> f64 {
    let mut q = vec![0.0; cols];
    for (z, &p) in source.iter().enumerate() {
        for y in 0..cols {
            q[y] += p * w[z * cols + y];
        }
    }
    let mut total = 0.0;
    for (z, &p) in source.iter().enumerate() {
        for y in 0..cols {
            let v = w[z * cols + y];
            if p > 0.0 && v > 0.0 {
                total += p * v * (v / q[y]).log2();
            }
        }
    }
    total.max(0.0)
}

/// Grid kernels per parallel task; fixed so the reduction order does not
/// depend on the thread count.
const CHUNK: u64 = 1 << 16;

/// Points of `pts` not dominated in `(distortion, rate)`, by increasing distortion.
fn pareto(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if out.last().is_none_or(|l| p.1 < l.1) {
            out.push(p);
        }
    }
    out
}

/// Lower convex envelope of the exhaustive staircase `δ ↦ min { I : E[ρ] ≤ δ }`
/// over all grid kernels (time-sharing between grid kernels is feasible),
/// evaluated at each `δ` in `grid` that some grid kernel reaches.
pub fn brute_force_rate(inst: &RdInstance, grid: &[f64], q: u32) -> Result<Vec<CurvePoint>> {
    let (nz, ny) = (inst.n_source(), inst.n_repro());
    let kernels = GridKernelIterator::new(nz, ny, q)?;
    if kernels.total() > ORACLE_LIMIT {
        return Err(Error::OracleSpaceTooLarge { size: kernels.total(), limit: ORACLE_LIMIT });
    }
    let total = kernels.total() as u64;
    let source = inst.source().to_vec();
    let rho = inst.rho();
    let chunks: Vec<Vec<(f64, f64)>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let pts = (c * CHUNK..((c + 1) * CHUNK).min(total))
                .filter_map(|i| {
                    let k = kernels.get(i as u128);
                    let w = k.data();
                    let mut dist = 0.0;
                    for (z, &p) in source.iter().enumerate() {
                        for y in 0..ny {
                            let v = w[z * ny + y];
                            if p > 0.0 && v > 0.0 {
                                dist += p * v * rho.get(z, y)?;
                            }
                        }
                    }
                    Some((dist, info(&source, w, ny)))
                })
                .collect();
            pareto(pts)
        })
        .collect();
    let front = pareto(chunks.concat());
    if front.is_empty() {
        return Ok(vec![]);
    }
    let pts: Vec<CurvePoint> = front
        .iter()
        .enumerate()
        .map(|(i, &(delta, rate))| CurvePoint { delta, rate, witness: WitnessTag { source: 0, point: i } })
        .collect();
    let env = lower_convex_envelope(&pts)?;
    grid.iter()
        .enumerate()
        .filter(|(_, &d)| d >= env.delta_min() - 1e-12)
        .map(|(i, &delta)| {
            let rate = env.eval(delta.max(env.delta_min()))?;
            Ok(CurvePoint { delta, rate, witness: WitnessTag { source: 0, point: i } })
        })
        .collect()
}

fn alias_table(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::InvalidKernel(format!("cannot sample row: {e}")))
}

/// Monte Carlo estimate of `E[d(X_M, Y_M)]` when `S` is drawn from `sampler`
/// and `Y_M` from the branch kernel of `S` applied to `X_S`. `kernels[i]`
/// maps the symbols of the `i`-th `k`-subset (in family order) to `Y_M`.
/// Returns `(mean, standard error)`; each block of draws uses its own stream
/// of a ChaCha8 generator seeded by `seed`, so results do not depend on
/// scheduling.
pub fn mc_expected_distortion(
    pmf: &JointPmf,
    d: &DistortionTable,
    sampler: &RandomizedSampler,
    kernels: &[Kernel],
    n: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::OutOfRange("need at least one draw".into()));
    }
    let subsets = sampler.subsets();
    if kernels.len() != subsets.len() {
        return Err(Error::Dimension(format!("{} kernels for {} subsets", kernels.len(), subsets.len())));
    }
    let proj: Vec<Vec<usize>> = subsets.iter().map(|a| pmf.shape().projection(a)).collect();
    for (k, a) in kernels.iter().zip(subsets) {
        if k.rows() != pmf.shape().restrict(a).len() || k.cols() != d.cols() {
            return Err(Error::Dimension(format!("branch kernel for {a} has the wrong shape")));
        }
    }
    let x_dist = alias_table(pmf.probs())?;
    let s_dist: Vec<WeightedIndex<f64>> =
        (0..pmf.len()).map(|x| alias_table(sampler.rows().row(x))).collect::<Result<_>>()?;
    let y_dist: Vec<Vec<WeightedIndex<f64>>> = kernels
        .iter()
        .map(|k| (0..k.rows()).map(|r| alias_table(k.row(r))).collect())
        .collect::<Result<_>>()?;
    const BLOCK: u64 = 1 << 16;
    let blocks = n.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let draws = BLOCK.min(n - b * BLOCK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                let x = x_dist.sample(&mut rng);
                let s = s_dist[x].sample(&mut rng);
                let y = y_dist[s][proj[s][x]].sample(&mut rng);
                let v = d.get(x, y).ok_or_else(|| {
                    Error::InvalidKernel(format!("drew forbidden pair (source {x}, reproduction {y})"))
                })?;
                s1 += v;
                s2 += v * v;
            }
            Ok((s1, s2))
        })
        .collect::<Result<_>>()?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = s1 / nf;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Per-`x_A` posterior maximum `α` and its lexicographically first argmax
/// over `A^c`, computed straight from the joint pmf.
fn posterior_max(pmf: &JointPmf, a: &SubsetIndex) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let shape = pmf.shape();
    let comp = a.complement(pmf.arity());
    let (sa, sc) = (shape.restrict(a), shape.restrict(&comp));
    let mut p_a = vec![0.0; sa.len()];
    let mut alpha = vec![0.0; sa.len()];
    let mut arg = vec![0; sa.len()];
    for xa in 0..sa.len() {
        let ca = sa.coords(xa);
        for xc in 0..sc.len() {
            let cc = sc.coords(xc);
            let mut full = vec![0; shape.arity()];
            for (&i, &v) in a.members().iter().zip(&ca) {
                full[i] = v;
            }
            for (&i, &v) in comp.members().iter().zip(&cc) {
                full[i] = v;
            }
            let p = pmf.probs()[shape.flat(&full)];
            p_a[xa] += p;
            if p > alpha[xa] {
                alpha[xa] = p;
                arg[xa] = xc;
            }
        }
    }
    for xa in 0..sa.len() {
        alpha[xa] = if p_a[xa] > 0.0 { alpha[xa] / p_a[xa] } else { 1.0 };
    }
    (p_a, alpha, arg)
}

/// `|E_Q[d] − (1 − E[α] + E[α 1(X_A ≠ Y_A)])|` for the probability-of-error
/// distortion, where `Q` draws `Y_A` through `kernel` and completes `Y_{A^c}`
/// with the MAP estimate given `X_A = Y_A`.
pub fn decomposition_identity_check(pmf: &JointPmf, a: &SubsetIndex, kernel: &Kernel) -> Result<f64> {
    a.check_within(pmf.arity())?;
    let shape = pmf.shape();
    let comp = a.complement(pmf.arity());
    let (sa, sc) = (shape.restrict(a), shape.restrict(&comp));
    if kernel.rows() != sa.len() || kernel.cols() != sa.len() {
        return Err(Error::Dimension("kernel must map the symbols of A onto themselves".into()));
    }
    let (p_a, alpha, arg) = posterior_max(pmf, a);
    let mut lhs = 0.0;
    for x in 0..shape.len() {
        let cx = shape.coords(x);
        let xa = sa.flat(&a.members().iter().map(|&i| cx[i]).collect::<Vec<_>>());
        for ya in 0..sa.len() {
            let w = kernel.get(xa, ya);
            if w == 0.0 {
                continue;
            }
            let ca = sa.coords(ya);
            let cc = sc.coords(arg[ya]);
            let mut y = vec![0; shape.arity()];
            for (&i, &v) in a.members().iter().zip(&ca) {
                y[i] = v;
            }
            for (&i, &v) in comp.members().iter().zip(&cc) {
                y[i] = v;
            }
            if y != cx {
                lhs += pmf.probs()[x] * w;
            }
        }
    }
    let e_alpha: f64 = p_a.iter().zip(&alpha).map(|(p, a)| p * a).sum();
    let mut mismatch = 0.0;
    for xa in 0..sa.len() {
        for ya in 0..sa.len() {
            if ya != xa {
                mismatch += p_a[xa] * alpha[xa] * kernel.get(xa, ya);
            }
        }
    }
    Ok((lhs - (1.0 - e_alpha + mismatch)).abs())
}

/// Shape of the random problems drawn by `lagrangian_vertex_check`.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexCheckSpec {
    pub dims: Vec<usize>,
    pub k: usize,
    /// Size of the time-sharing alphabet.
    pub n_u: usize,
    /// Interior sampler rows drawn per trial.
    pub interior_samples: usize,
    /// Weight of `Σ P(s|x,u)²` added to the objective; zero for the real
    /// objective, positive for the negative control.
    pub convex_penalty: f64,
}

impl Default for VertexCheckSpec {
    fn default() -> Self {
        Self { dims: vec![2, 2], k: 1, n_u: 2, interior_samples: 32, convex_penalty: 0.0 }
    }
}

fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

struct LagrangianProblem {
    pmf: Vec<f64>,
    p_u: Vec<f64>,
    /// `c[u][x][s]`: cost of sampling `s` at `(x, u)` under the fixed kernels.
    c: Vec<Vec<Vec<f64>>>,
    penalty: f64,
}

impl LagrangianProblem {
    fn random(rng: &mut ChaCha8Rng, spec: &VertexCheckSpec, lambda: f64) -> Result<Self> {
        let shape = ProductSet::new(spec.dims.clone());
        let m = shape.arity();
        let subsets = subsets_of_size(m, spec.k);
        let ny = shape.len();
        let pmf = random_row(rng, shape.len());
        let p_u = random_row(rng, spec.n_u);
        let d: Vec<f64> = (0..shape.len() * ny).map(|_| rng.random::<f64>()).collect();
        let mut c = vec![vec![vec![0.0; subsets.len()]; shape.len()]; spec.n_u];
        for cu in c.iter_mut() {
            for (si, a) in subsets.iter().enumerate() {
                let proj = shape.projection(a);
                let n_a = shape.restrict(a).len();
                let q = random_row(rng, ny);
                let w: Vec<Vec<f64>> = (0..n_a).map(|_| random_row(rng, ny)).collect();
                for x in 0..shape.len() {
                    let row = &w[proj[x]];
                    cu[x][si] = (0..ny).map(|y| row[y] * ((row[y] / q[y]).log2() + lambda * d[x * ny + y])).sum();
                }
            }
        }
        Ok(Self { pmf, p_u, c, penalty: spec.convex_penalty })
    }

    fn objective(&self, rows: &[Vec<Vec<f64>>]) -> f64 {
        let mut total = 0.0;
        for (u, pu) in self.p_u.iter().enumerate() {
            for (x, px) in self.pmf.iter().enumerate() {
                let r = &rows[u][x];
                let lin: f64 = r.iter().zip(&self.c[u][x]).map(|(a, b)| a * b).sum();
                let pen: f64 = r.iter().map(|v| v * v).sum();
                total += pu * px * (lin + self.penalty * pen);
            }
        }
        total
    }

    /// Smallest objective over all assignments of a vertex to every row.
    fn best_vertex(&self) -> f64 {
        let (nu, nx, ns) = (self.p_u.len(), self.pmf.len(), self.c[0][0].len());
        let slots = nu * nx;
        let total = (ns as u64).pow(slots as u32);
        (0..total)
            .into_par_iter()
            .map(|mut code| {
                let mut rows = vec![vec![vec![0.0; ns]; nx]; nu];
                for slot in (0..slots).rev() {
                    rows[slot / nx][slot % nx][(code % ns as u64) as usize] = 1.0;
                    code /= ns as u64;
                }
                self.objective(&rows)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

/// With the output marginals and reproduction kernels fixed, the Lagrangian
/// is linear in every sampler row, so some all-vertex assignment is optimal.
/// Each trial draws a random problem and checks that no interior sampler
/// (the barycenter, then random rows) beats the best vertex assignment by
/// more than `1e-12`.
pub fn lagrangian_vertex_check(spec: &VertexCheckSpec, lambda: f64, seed: u64, trials: usize) -> Result<bool> {
    if trials == 0 {
        return Err(Error::OutOfRange("need at least one trial".into()));
    }
    let n_sub = subsets_of_size(spec.dims.len(), spec.k).len();
    if spec.k == 0 || spec.k > spec.dims.len() || spec.n_u == 0 {
        return Err(Error::OutOfRange("invalid vertex-check shape".into()));
    }
    let n_x: usize = spec.dims.iter().product();
    let slots = (spec.n_u * n_x) as u32;
    if (n_sub as u128).checked_pow(slots).is_none_or(|c| c > ORACLE_LIMIT) {
        return Err(Error::OracleSpaceTooLarge { size: (n_sub as u128).saturating_pow(slots), limit: ORACLE_LIMIT });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let prob = LagrangianProblem::random(&mut rng, spec, lambda)?;
        let best = prob.best_vertex();
        for i in 0..spec.interior_samples.max(1) {
            let rows: Vec<Vec<Vec<f64>>> = (0..spec.n_u)
                .map(|_| {
                    (0..n_x)
                        .map(|_| if i == 0 { vec![1.0 / n_sub as f64; n_sub] } else { random_row(&mut rng, n_sub) })
                        .collect()
                })
                .collect();
            if prob.objective(&rows) < best - 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A random instance with full-support source, distortions in `[0, 1)` and
/// at least one zero per row (so `Δ_min` is zero-cost reachable). Draws are
/// repeated until the distortion range is nondegenerate.
pub fn random_instance(rng: &mut ChaCha8Rng, nz: usize, ny: usize) -> Result<RdInstance> {
    loop {
        let source = random_row(rng, nz);
        let mut vals: Vec<Option<f64>> = (0..nz * ny).map(|_| Some(rng.random::<f64>())).collect();
        for z in 0..nz {
            vals[z * ny + rng.random_range(0..ny)] = Some(0.0);
        }
        let rho = DistortionTable::new(ProductSet::new(vec![nz]), ProductSet::new(vec![ny]), vals)?;
        let inst = RdInstance::new(source, rho)?;
        let dom = inst.domain();
        if ny < 2 || dom.delta_max - dom.delta_min > 1e-3 {
            return Ok(inst);
        }
    }
}

/// A random full-support pmf on the product alphabet `dims`.
pub fn random_pmf(rng: &mut ChaCha8Rng, dims: &[usize]) -> Result<JointPmf> {
    let n = dims.iter().product();
    JointPmf::from_dims(dims, random_row(rng, n))
}

/// A random row-stochastic kernel.
pub fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Kernel {
    let data = (0..rows).flat_map(|_| random_row(rng, cols)).collect();
    Kernel::from_raw(rows, cols, data)
}

/// Interior fractions of `[Δ_min, Δ_max]` at which solver and oracle are compared.
pub const COMPARISON_FRACTIONS: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];

/// Instance shapes `(|Z|, |Y|)` whose `q = 40` search space fits the oracle.
pub const ORACLE_SHAPES: [(usize, usize); 3] = [(2, 2), (2, 3), (3, 2)];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleComparison {
    pub delta: f64,
    pub solver: f64,
    pub oracle: f64,
}

impl OracleComparison {
    /// Oracle minus solver; grid kernels are feasible, so this is `≥ 0` up to solver tolerance.
    pub fn excess(&self) -> f64 {
        self.oracle - self.solver
    }
}

/// Solver rate versus exhaustive grid search at interior fractions of the domain.
pub fn compare_with_brute_force(inst: &RdInstance, q: u32, fractions: &[f64], tol: f64, max_iter: usize) -> Result<Vec<OracleComparison>> {
    let dom = inst.domain();
    let grid: Vec<f64> = fractions.iter().map(|f| dom.delta_min + f * (dom.delta_max - dom.delta_min)).collect();
    let brute = brute_force_rate(inst, &grid, q)?;
    brute
        .into_iter()
        .map(|b| {
            let s = rate_at_distortion(inst, b.delta, tol, max_iter)?;
            Ok(OracleComparison { delta: b.delta, solver: s.rate, oracle: b.rate })
        })
        .collect()
}

/// The `index`-th random instance of the stream selected by `seed`; shapes
/// cycle through `ORACLE_SHAPES`.
pub fn seeded_instance(seed: u64, index: u64) -> Result<RdInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let (nz, ny) = ORACLE_SHAPES[(index % ORACLE_SHAPES.len() as u64) as usize];
    random_instance(&mut rng, nz, ny)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::h2;

    fn bern_hamming(p: f64) -> RdInstance {
        RdInstance::new(vec![1.0 - p, p], DistortionTable::hamming(2)).unwrap()
    }

    #[test]
    fn grid_kernel_count() {
        let g = GridKernelIterator::new(2, 3, 4).unwrap();
        assert_eq!(g.total(), 15 * 15);
        let all: Vec<Kernel> = g.collect();
        assert_eq!(all.len(), 225);
        for k in &all {
            for r in 0..2 {
                assert!((k.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brute_force_bernoulli() {
        let pts = brute_force_rate(&bern_hamming(0.5), &[0.1, 0.2, 0.3], 40).unwrap();
        for p in pts {
            assert!((p.rate - (1.0 - h2(p.delta))).abs() < 0.02, "{p:?}");
            assert!(p.rate >= 1.0 - h2(p.delta) - 1e-12);
        }
    }

    #[test]
    fn brute_force_point_mass() {
        let inst = RdInstance::new(
            vec![1.0, 0.0],
            DistortionTable::new(ProductSet::new(vec![2]), ProductSet::new(vec![2]), vec![Some(0.3), Some(0.7), Some(0.0), Some(0.0)])
                .unwrap(),
        )
        .unwrap();
        let pts = brute_force_rate(&inst, &[0.3, 0.5], 7).unwrap();
        assert_eq!(pts[0].delta, 0.3);
        assert!(pts.iter().all(|p| p.rate == 0.0));
    }

    #[test]
    fn brute_force_refuses_huge_spaces() {
        let inst = RdInstance::new(vec![1.0 / 3.0; 3], DistortionTable::hamming(3)).unwrap();
        assert!(matches!(brute_force_rate(&inst, &[0.1], 40), Err(Error::OracleSpaceTooLarge { .. })));
    }

    #[test]
    fn mc_constant_distortion_is_exact() {
        let pmf = JointPmf::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let d = DistortionTable::from_fn(pmf.shape().clone(), pmf.shape().clone(), |_, _| Some(0.7)).unwrap();
        let h = crate::sampler::PointMassSampler::from_encoding(2, 1, 4, 6).unwrap();
        let kernels = vec![Kernel::constant(2, 4, 0), Kernel::constant(2, 4, 3)];
        let (m, se) = mc_expected_distortion(&pmf, &d, &h.to_randomized(), &kernels, 1000, 1).unwrap();
        assert!((m - 0.7).abs() < 1e-12);
        assert!(se < 1e-7);
    }

    #[test]
    fn mc_is_reproducible() {
        let pmf = JointPmf::from_dims(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let d = DistortionTable::probability_of_error(&[2, 2]);
        let h = crate::sampler::PointMassSampler::from_encoding(2, 1, 4, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernels = vec![random_kernel(&mut rng, 2, 4), random_kernel(&mut rng, 2, 4)];
        let a = mc_expected_distortion(&pmf, &d, &h.to_randomized(), &kernels, 200_000, 9).unwrap();
        let b = mc_expected_distortion(&pmf, &d, &h.to_randomized(), &kernels, 200_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_kernel_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pmf = random_pmf(&mut rng, &[2, 2]).unwrap();
        let a = SubsetIndex::from_one_based(&[1]).unwrap();
        assert!(decomposition_identity_check(&pmf, &a, &Kernel::identity(2)).unwrap() <= 1e-12);
    }

    #[test]
    fn vertex_check_and_negative_control() {
        assert!(lagrangian_vertex_check(&VertexCheckSpec::default(), 1.5, 11, 10).unwrap());
        let single = VertexCheckSpec { k: 2, ..Default::default() };
        assert!(lagrangian_vertex_check(&single, 1.5, 11, 5).unwrap());
        let control = VertexCheckSpec { convex_penalty: 10.0, ..Default::default() };
        assert!(!lagrangian_vertex_check(&control, 1.5, 11, 10).unwrap());
    }
}
