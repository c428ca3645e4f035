//! Distortion tables, conditional (modified and composite) distortions,
//! MAP completions, and the minimum/maximum distortion of every sampler class.
//!
//! Forbidden source/reproduction pairs are carried as a mask rather than as a
//! large number. A derived table marks a pair forbidden as soon as any source
//! symbol of positive conditional probability hits a forbidden pair, so every
//! optimizer simply keeps zero mass there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{marginal, subsets_of_size, JointPmf, ProductSet, SubsetIndex};
use crate::sampler::{enumerate_point_mass_samplers, PointMassSampler};
use crate::solver::RdInstance;

/// Single-letter distortion between a source index set and a reproduction index set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionTable {
    source: ProductSet,
    repro: ProductSet,
    values: Vec<f64>,
    forbidden: Vec<bool>,
}

impl DistortionTable {
    /// `entries` is row-major over (source, reproduction); `None` marks a forbidden pair.
    pub fn new(source: ProductSet, repro: ProductSet, entries: Vec<Option<f64>>) -> Result<Self> {
        let (rows, cols) = (source.len(), repro.len());
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "distortion has {} entries, expected {rows}x{cols}",
                entries.len()
            )));
        }
        let mut values = vec![0.0; entries.len()];
        let mut forbidden = vec![false; entries.len()];
        for (i, e) in entries.into_iter().enumerate() {
            match e {
                Some(v) if v.is_finite() && v >= 0.0 => values[i] = v,
                Some(v) => {
                    return Err(Error::InvalidDistortion(format!(
                        "entry ({}, {}) is {v}; values must be finite and nonnegative",
                        i / cols,
                        i % cols
                    )))
                }
                None => forbidden[i] = true,
            }
        }
        for r in 0..rows {
            if forbidden[r * cols..(r + 1) * cols].iter().all(|&f| f) {
                return Err(Error::NoAdmissibleReproduction(format!(
                    "every reproduction is forbidden for source symbol {r}"
                )));
            }
        }
        Ok(Self { source, repro, values, forbidden })
    }

    pub fn from_fn(
        source: ProductSet,
        repro: ProductSet,
        f: impl Fn(&[usize], &[usize]) -> Option<f64>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(source.len() * repro.len());
        for x in 0..source.len() {
            let xc = source.coords(x);
            for y in 0..repro.len() {
                entries.push(f(&xc, &repro.coords(y)));
            }
        }
        Self::new(source, repro, entries)
    }

    /// `d(x, y) = 1(x != y)` on identical source and reproduction alphabets.
    pub fn probability_of_error(dims: &[usize]) -> Self {
        let set = ProductSet::new(dims.to_vec());
        Self::from_fn(set.clone(), set, |x, y| Some(if x == y { 0.0 } else { 1.0 }))
            .expect("probability of error is a valid table")
    }

    /// Hamming distortion on one alphabet of size `n`.
    pub fn hamming(n: usize) -> Self {
        Self::probability_of_error(&[n])
    }

    pub fn source(&self) -> &ProductSet {
        &self.source
    }

    pub fn repro(&self) -> &ProductSet {
        &self.repro
    }

    pub fn rows(&self) -> usize {
        self.source.len()
    }

    pub fn cols(&self) -> usize {
        self.repro.len()
    }

    /// `None` when the pair is forbidden.
    pub fn get(&self, z: usize, y: usize) -> Option<f64> {
        let i = z * self.cols() + y;
        (!self.forbidden[i]).then_some(self.values[i])
    }

    pub fn is_forbidden(&self, z: usize, y: usize) -> bool {
        self.forbidden[z * self.cols() + y]
    }

    /// Numeric value; forbidden entries read as zero.
    pub(crate) fn raw(&self, z: usize, y: usize) -> f64 {
        self.values[z * self.cols() + y]
    }

    /// Row-major entries with `None` on forbidden pairs.
    pub fn entries(&self) -> Vec<Option<f64>> {
        self.values.iter().zip(&self.forbidden).map(|(&v, &f)| (!f).then_some(v)).collect()
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn forbidden_mask(&self) -> &[bool] {
        &self.forbidden
    }

    /// Smallest admissible value in row `z`.
    pub fn row_min(&self, z: usize) -> f64 {
        (0..self.cols())
            .filter_map(|y| self.get(z, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Every entry is finite and admissible.
    pub fn has_forbidden(&self) -> bool {
        self.forbidden.iter().any(|&f| f)
    }

    /// Whether `d(x, y) = 1(x != y)` on matching alphabets.
    pub fn is_probability_of_error(&self) -> bool {
        self.source == self.repro
            && (0..self.rows()).all(|z| {
                (0..self.cols()).all(|y| self.get(z, y) == Some(if z == y { 0.0 } else { 1.0 }))
            })
    }
}

/// Which object attains an extreme distortion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtremeWitness {
    /// A fixed observed subset.
    Subset(SubsetIndex),
    /// A point-mass sampler.
    Sampler(PointMassSampler),
    /// A constant reproduction symbol (flat index).
    Reproduction(usize),
}

/// Feasible distortion interval of a rate distortion function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRange {
    pub delta_min: f64,
    pub delta_max: f64,
    pub min_witness: Option<ExtremeWitness>,
    pub max_witness: Option<ExtremeWitness>,
}

impl DeltaRange {
    pub fn new(delta_min: f64, delta_max: f64) -> Self {
        Self { delta_min, delta_max, min_witness: None, max_witness: None }
    }

    pub fn contains(&self, delta: f64, tol: f64) -> bool {
        delta >= self.delta_min - tol && delta <= self.delta_max + tol
    }
}

/// Per-atom accumulators of `Σ P(x) d(x, y)` over the source symbols mapped to each atom.
struct AtomSums {
    mass: Vec<f64>,
    dsum: Vec<f64>,
    forbidden: Vec<bool>,
    cols: usize,
}

impl AtomSums {
    fn collect(
        pmf: &JointPmf,
        d: &DistortionTable,
        n_atoms: usize,
        atom_of: impl Fn(usize) -> Option<usize>,
    ) -> Self {
        let cols = d.cols();
        let mut s = AtomSums {
            mass: vec![0.0; n_atoms],
            dsum: vec![0.0; n_atoms * cols],
            forbidden: vec![false; n_atoms * cols],
            cols,
        };
        for (x, &p) in pmf.probs().iter().enumerate() {
            let Some(a) = atom_of(x) else { continue };
            if p == 0.0 {
                continue;
            }
            s.mass[a] += p;
            for y in 0..cols {
                match d.get(x, y) {
                    Some(v) => s.dsum[a * cols + y] += p * v,
                    None => s.forbidden[a * cols + y] = true,
                }
            }
        }
        s
    }

    /// Conditional distortion rows; zero-mass atoms get an all-zero admissible row.
    fn rows(&self, range: std::ops::Range<usize>) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(range.len() * self.cols);
        for a in range {
            let m = self.mass[a];
            for y in 0..self.cols {
                let i = a * self.cols + y;
                out.push(if m == 0.0 {
                    Some(0.0)
                } else if self.forbidden[i] {
                    None
                } else {
                    Some(self.dsum[i] / m)
                });
            }
        }
        out
    }

    /// `Σ_atoms min_y Σ P(x) d(x, y)` over atoms in `range`; infinite if some
    /// atom of positive mass has no admissible reproduction.
    fn min_sum(&self, range: std::ops::Range<usize>) -> f64 {
        let mut total = 0.0;
        for a in range {
            if self.mass[a] == 0.0 {
                continue;
            }
            let best = (0..self.cols)
                .filter(|&y| !self.forbidden[a * self.cols + y])
                .map(|y| self.dsum[a * self.cols + y])
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        total
    }

    /// `min_y Σ_{atoms in range} Σ P(x) d(x, y)` with `y` admissible for every atom.
    fn sum_min(&self, range: std::ops::Range<usize>) -> (f64, Option<usize>) {
        let mut best = (f64::INFINITY, None);
        for y in 0..self.cols {
            let mut total = 0.0;
            let mut ok = true;
            for a in range.clone() {
                if self.mass[a] == 0.0 {
                    continue;
                }
                if self.forbidden[a * self.cols + y] {
                    ok = false;
                    break;
                }
                total += self.dsum[a * self.cols + y];
            }
            if ok && total < best.0 {
                best = (total, Some(y));
            }
        }
        best
    }
}

fn check_problem(pmf: &JointPmf, d: &DistortionTable) -> Result<()> {
    if d.source() != pmf.shape() {
        return Err(Error::Dimension(format!(
            "distortion source alphabet {:?} does not match pmf alphabet {:?}",
            d.source().dims(),
            pmf.shape().dims()
        )));
    }
    Ok(())
}

/// `d_A(x_A, y) = E[d(X_M, y) | X_A = x_A]`, as a table over `(X_A, Y_M)`.
pub fn modified_distortion(pmf: &JointPmf, d: &DistortionTable, subset: &SubsetIndex) -> Result<DistortionTable> {
    Ok(fixed_set_instance(pmf, d, subset)?.rho().clone())
}

/// Rate distortion instance `(P_{X_A}, Y_M, d_A)` of a fixed observed subset.
pub fn fixed_set_instance(pmf: &JointPmf, d: &DistortionTable, subset: &SubsetIndex) -> Result<RdInstance> {
    check_problem(pmf, d)?;
    subset.check_within(pmf.arity())?;
    if subset.is_empty() {
        return Err(Error::InvalidSubset("observed subset must be nonempty".into()));
    }
    let shape = pmf.shape();
    let proj = shape.projection(subset);
    let sub = shape.restrict(subset);
    let sums = AtomSums::collect(pmf, d, sub.len(), |x| Some(proj[x]));
    let table = DistortionTable::new(sub.clone(), d.repro().clone(), sums.rows(0..sub.len()))?;
    let source = marginal(pmf, subset)?.probs().to_vec();
    RdInstance::new(source, table)
}

/// Per-`x_A` maximum posterior probability of the unobserved components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMap {
    /// `α(x_A)` indexed by the flat index of `x_A`.
    pub alpha: Vec<f64>,
    /// Flat index of the lexicographically smallest maximizer `x̃_{A^c}`.
    pub witness: Vec<usize>,
    /// Marginal `P_{X_A}`, kept for expectations.
    pub marginal: Vec<f64>,
}

impl AlphaMap {
    /// `E[α(X_A)]`.
    pub fn expected(&self) -> f64 {
        self.alpha.iter().zip(&self.marginal).map(|(a, p)| a * p).sum()
    }
}

/// `α(x_A) = max_{x̃} P(X_{A^c} = x̃ | X_A = x_A)` with its argmax.
pub fn alpha_map(pmf: &JointPmf, subset: &SubsetIndex) -> Result<AlphaMap> {
    subset.check_within(pmf.arity())?;
    if subset.is_empty() {
        return Err(Error::InvalidSubset("observed subset must be nonempty".into()));
    }
    let comp = subset.complement(pmf.arity());
    let shape = pmf.shape();
    let (pa, pc) = (shape.projection(subset), shape.projection(&comp));
    let (na, nc) = (shape.restrict(subset).len(), shape.restrict(&comp).len());
    let mut joint = vec![0.0; na * nc];
    for (x, &p) in pmf.probs().iter().enumerate() {
        joint[pa[x] * nc + pc[x]] += p;
    }
    let mut alpha = Vec::with_capacity(na);
    let mut witness = Vec::with_capacity(na);
    for row in joint.chunks(nc) {
        let total: f64 = row.iter().sum();
        let (arg, best) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        // an unobserved x_A has no posterior; its α never enters an expectation
        alpha.push(if total > 0.0 { best / total } else { 1.0 });
        witness.push(arg);
    }
    let marginal = marginal(pmf, subset)?.probs().to_vec();
    Ok(AlphaMap { alpha, witness, marginal })
}

/// Distortion extremes of the fixed-set function `R_A`.
pub fn fixed_set_extremes(pmf: &JointPmf, d: &DistortionTable, subset: &SubsetIndex) -> Result<DeltaRange> {
    let inst = fixed_set_instance(pmf, d, subset)?;
    let (delta_max, y) = inst.delta_max_choice()?;
    Ok(DeltaRange {
        delta_min: inst.delta_min(),
        delta_max,
        min_witness: Some(ExtremeWitness::Subset(subset.clone())),
        max_witness: Some(ExtremeWitness::Reproduction(y)),
    })
}

/// `min_y E[d(X_M, y)]` computed directly from `d`, with its minimizer.
pub fn unconditional_delta_max(pmf: &JointPmf, d: &DistortionTable) -> Result<(f64, usize)> {
    check_problem(pmf, d)?;
    let sums = AtomSums::collect(pmf, d, 1, |_| Some(0));
    match sums.sum_min(0..1) {
        (v, Some(y)) => Ok((v, y)),
        _ => Err(Error::NoAdmissibleReproduction(
            "no reproduction symbol is admissible for every source symbol".into(),
        )),
    }
}

/// Extremes under the probability-of-error distortion: `1 - E[α(X_A)]` and `1 - max P`.
pub fn pe_extremes(pmf: &JointPmf, subset: &SubsetIndex) -> Result<DeltaRange> {
    let alpha = alpha_map(pmf, subset)?;
    Ok(DeltaRange {
        delta_min: (1.0 - alpha.expected()).max(0.0),
        delta_max: (1.0 - pmf.max_prob()).max(0.0),
        min_witness: Some(ExtremeWitness::Subset(subset.clone())),
        max_witness: None,
    })
}

/// Smallest fixed-set minimum distortion over all `k`-subsets; ties go to
/// the lexicographically first subset.
pub fn irs_delta_min(pmf: &JointPmf, d: &DistortionTable, k: usize) -> Result<DeltaRange> {
    let m = pmf.arity();
    if k == 0 || k > m {
        return Err(Error::OutOfRange(format!("k = {k} must lie in [1, {m}]")));
    }
    let mut best: Option<(f64, SubsetIndex)> = None;
    let mut delta_max = f64::INFINITY;
    for a in subsets_of_size(m, k) {
        let r = fixed_set_extremes(pmf, d, &a)?;
        delta_max = r.delta_max;
        if best.as_ref().map_or(true, |(v, _)| r.delta_min < *v) {
            best = Some((r.delta_min, a));
        }
    }
    let (delta_min, arg) = best.expect("at least one subset");
    let (_, y) = unconditional_delta_max(pmf, d)?;
    Ok(DeltaRange {
        delta_min,
        delta_max,
        min_witness: Some(ExtremeWitness::Subset(arg)),
        max_witness: Some(ExtremeWitness::Reproduction(y)),
    })
}

/// Per-subset projection data shared by every sampler of a problem.
struct SamplerLayout {
    subsets: Vec<SubsetIndex>,
    proj: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    n_atoms: usize,
}

impl SamplerLayout {
    fn new(pmf: &JointPmf, k: usize) -> Self {
        let subsets = subsets_of_size(pmf.arity(), k);
        let proj: Vec<Vec<usize>> = subsets.iter().map(|a| pmf.shape().projection(a)).collect();
        let mut offsets = Vec::with_capacity(subsets.len() + 1);
        let mut n = 0;
        for a in &subsets {
            offsets.push(n);
            n += pmf.shape().restrict(a).len();
        }
        offsets.push(n);
        Self { subsets, proj, offsets, n_atoms: n }
    }

    fn sums(&self, pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> AtomSums {
        AtomSums::collect(pmf, d, self.n_atoms, |x| {
            let a = h.assignment()[x];
            Some(self.offsets[a] + self.proj[a][x])
        })
    }

    fn range(&self, a: usize) -> std::ops::Range<usize> {
        self.offsets[a]..self.offsets[a + 1]
    }
}

fn check_sampler(pmf: &JointPmf, h: &PointMassSampler) -> Result<()> {
    if h.n_symbols() != pmf.len() || h.subsets().first().map_or(true, |a| a.len() != h.k()) {
        return Err(Error::Dimension("sampler does not match the source alphabet".into()));
    }
    if h.subsets().iter().any(|a| a.check_within(pmf.arity()).is_err()) {
        return Err(Error::Dimension("sampler subsets exceed the number of components".into()));
    }
    Ok(())
}

/// `(Δ_min, Δ_max)` of one point-mass sampler: expected best distortion given
/// `(S, X_S)` and given `S` alone.
pub fn sampler_extremes(pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> Result<(f64, f64)> {
    check_problem(pmf, d)?;
    check_sampler(pmf, h)?;
    let layout = SamplerLayout::new(pmf, h.k());
    Ok(layout_extremes(&layout, pmf, d, h))
}

fn layout_extremes(layout: &SamplerLayout, pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> (f64, f64) {
    let sums = layout.sums(pmf, d, h);
    let dmin = sums.min_sum(0..layout.n_atoms);
    let dmax = (0..layout.subsets.len())
        .map(|a| sums.sum_min(layout.range(a)).0)
        .sum();
    (dmin, dmax)
}

/// Extremes of the memoryless random sampler with informed decoder, each
/// minimized exhaustively over point-mass samplers.
///
/// The minimum distortion is attained over `(S, X_S)`-conditional
/// reproductions; the maximum over reproductions that only depend on `S`.
/// The uninformed-decoder bound instead ends at the unconditional maximum
/// (see [`unconditional_delta_max`]); both values are exposed.
pub fn mrs_extremes(pmf: &JointPmf, d: &DistortionTable, k: usize, cap: u64) -> Result<DeltaRange> {
    check_problem(pmf, d)?;
    let all = enumerate_point_mass_samplers(pmf, k, cap)?;
    let layout = SamplerLayout::new(pmf, k);
    type Best = ((f64, u64), (f64, u64));
    let pick = |a: (f64, u64), b: (f64, u64)| {
        match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
            std::cmp::Ordering::Greater => b,
            _ => a,
        }
    };
    let identity: Best = ((f64::INFINITY, u64::MAX), (f64::INFINITY, u64::MAX));
    let (min, max) = (0..all.total())
        .into_par_iter()
        .map(|enc| {
            let h = all.get(enc);
            let (lo, hi) = layout_extremes(&layout, pmf, d, &h);
            ((lo, enc), (hi, enc))
        })
        .reduce(|| identity, |a, b| (pick(a.0, b.0), pick(a.1, b.1)));
    if !min.0.is_finite() || !max.0.is_finite() {
        return Err(Error::NoAdmissibleReproduction(
            "no point-mass sampler admits a finite distortion".into(),
        ));
    }
    Ok(DeltaRange {
        delta_min: min.0,
        delta_max: max.0,
        min_witness: Some(ExtremeWitness::Sampler(all.get(min.1))),
        max_witness: Some(ExtremeWitness::Sampler(all.get(max.1))),
    })
}

/// One branch `S = A` of a point-mass sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerBranch {
    pub subset: SubsetIndex,
    /// `P(S = A)`.
    pub weight: f64,
    /// Source `P_{X_A | S = A}` over `X_A`, reproduction `Y_M`, distortion
    /// `E[d(X_M, y) | S = A, X_A = x_A]`.
    pub instance: RdInstance,
}

/// Split the sampled problem into its positive-probability branches.
///
/// The branch distortion uses the posterior of the unobserved components
/// given both `X_A` and the sampling event, which matters whenever `h`
/// depends on unobserved values.
pub fn sampler_branch_problems(pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> Result<Vec<SamplerBranch>> {
    check_problem(pmf, d)?;
    check_sampler(pmf, h)?;
    let layout = SamplerLayout::new(pmf, h.k());
    let sums = layout.sums(pmf, d, h);
    let mut out = Vec::new();
    for (a, subset) in layout.subsets.iter().enumerate() {
        let range = layout.range(a);
        let weight: f64 = sums.mass[range.clone()].iter().sum();
        if weight == 0.0 {
            continue;
        }
        let source: Vec<f64> = sums.mass[range.clone()].iter().map(|m| m / weight).collect();
        let table = DistortionTable::new(
            pmf.shape().restrict(subset),
            d.repro().clone(),
            sums.rows(range),
        )?;
        out.push(SamplerBranch {
            subset: subset.clone(),
            weight,
            instance: RdInstance::new(source, table)?,
        });
    }
    Ok(out)
}

/// Rate distortion instance over the sampler output `Z = (S, X_S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeInstance {
    /// `(S, flat x_S)` for each atom of positive probability, in subset order.
    pub atoms: Vec<(SubsetIndex, usize)>,
    pub instance: RdInstance,
}

/// `d̃((s, x_s), y) = E[d(X_M, y) | S = s, X_S = x_s]` over the positive
/// atoms of `P_{S X_S}` induced by `h`.
pub fn composite_distortion(pmf: &JointPmf, d: &DistortionTable, h: &PointMassSampler) -> Result<CompositeInstance> {
    check_problem(pmf, d)?;
    check_sampler(pmf, h)?;
    let layout = SamplerLayout::new(pmf, h.k());
    let sums = layout.sums(pmf, d, h);
    let mut atoms = Vec::new();
    let mut source = Vec::new();
    let mut entries = Vec::new();
    for (a, subset) in layout.subsets.iter().enumerate() {
        for (xs, atom) in layout.range(a).enumerate() {
            if sums.mass[atom] == 0.0 {
                continue;
            }
            atoms.push((subset.clone(), xs));
            source.push(sums.mass[atom]);
            entries.extend(sums.rows(atom..atom + 1));
        }
    }
    let table = DistortionTable::new(ProductSet::new(vec![atoms.len()]), d.repro().clone(), entries)?;
    Ok(CompositeInstance { atoms, instance: RdInstance::new(source, table)? })
}
