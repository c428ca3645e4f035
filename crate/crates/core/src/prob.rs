//! Finite-alphabet probability primitives.
//!
//! Every multi-component object is stored as a dense tensor in row-major
//! order over the component order fixed at construction: the flat index of
//! `(x_1, ..., x_m)` is `((x_1 * n_2 + x_2) * n_3 + x_3) ...`, so the last
//! component varies fastest. For two binary components the flat order is
//! `00, 01, 10, 11`.
//!
//! Logarithms are base 2 and `0 log 0 = 0` throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs whose total mass is this close to one are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Named finite alphabet of one source or reproduction component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentAlphabet {
    pub name: String,
    pub symbols: Vec<String>,
}

impl ComponentAlphabet {
    pub fn new(name: impl Into<String>, symbols: Vec<String>) -> Result<Self> {
        let name = name.into();
        if symbols.is_empty() {
            return Err(Error::Dimension(format!("alphabet `{name}` has no symbols")));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::Dimension(format!(
                    "alphabet `{name}` repeats symbol `{s}`"
                )));
            }
        }
        Ok(Self { name, symbols })
    }

    /// Alphabet with symbols `"0", "1", ..., "n-1"`.
    pub fn numbered(name: impl Into<String>, n: usize) -> Result<Self> {
        Self::new(name, (0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// Cartesian product of finite index sets with row-major flattening.
///
/// The product of zero factors has exactly one element (the empty tuple),
/// which is how an empty complement `A^c = ∅` is represented.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductSet {
    dims: Vec<usize>,
}

impl ProductSet {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(dims.iter().all(|&n| n > 0), "every factor must be nonempty");
        Self { dims }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &n)| {
                debug_assert!(c < n);
                acc * n + c
            })
    }

    pub fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// Sub-product over the members of `subset`.
    pub fn restrict(&self, subset: &SubsetIndex) -> ProductSet {
        ProductSet::new(subset.members().iter().map(|&i| self.dims[i]).collect())
    }

    /// For every flat index of `self`, the flat index of its projection onto
    /// `subset` inside [`ProductSet::restrict`].
    pub fn projection(&self, subset: &SubsetIndex) -> Vec<usize> {
        let sub = self.restrict(subset);
        (0..self.len())
            .map(|x| {
                let c = self.coords(x);
                let picked: Vec<usize> = subset.members().iter().map(|&i| c[i]).collect();
                sub.flat(&picked)
            })
            .collect()
    }
}

/// Sorted set of component indices (stored zero-based, displayed one-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsetIndex {
    members: Vec<usize>,
}

impl SubsetIndex {
    /// Zero-based members; must be strictly increasing.
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset(format!(
                "members {members:?} are not strictly increasing"
            )));
        }
        Ok(Self { members })
    }

    /// One-based members as written in the literature, e.g. `{1}` or `{1, 2}`.
    pub fn from_one_based(members: &[usize]) -> Result<Self> {
        if members.contains(&0) {
            return Err(Error::InvalidSubset("one-based member 0".into()));
        }
        let mut m: Vec<usize> = members.iter().map(|&i| i - 1).collect();
        m.sort_unstable();
        m.dedup();
        if m.len() != members.len() {
            return Err(Error::InvalidSubset(format!("repeated member in {members:?}")));
        }
        Self::new(m)
    }

    pub fn full(m: usize) -> Self {
        Self { members: (0..m).collect() }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn complement(&self, m: usize) -> SubsetIndex {
        SubsetIndex {
            members: (0..m).filter(|&i| !self.contains(i)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &SubsetIndex) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &SubsetIndex) -> bool {
        self.members.iter().all(|&i| !other.contains(i))
    }

    pub fn union(&self, other: &SubsetIndex) -> SubsetIndex {
        let mut members: Vec<usize> = self.members.iter().chain(&other.members).copied().collect();
        members.sort_unstable();
        members.dedup();
        SubsetIndex { members }
    }

    pub fn check_within(&self, m: usize) -> Result<()> {
        match self.members.last() {
            Some(&last) if last >= m => Err(Error::InvalidSubset(format!(
                "{self} refers to component {} but the source has {m}",
                last + 1
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", m + 1)?;
        }
        write!(f, "}}")
    }
}

/// All `k`-sized subsets of `{0..m}` in lexicographic order.
pub fn subsets_of_size(m: usize, k: usize) -> Vec<SubsetIndex> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<SubsetIndex>) {
        if cur.len() == k {
            out.push(SubsetIndex { members: cur.clone() });
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= m {
        rec(0, m, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Validate a probability vector, renormalizing small deviations of the total.
pub fn normalize_probs(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidPmf("empty probability vector".into()));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
    }
    let total: f64 = probs.iter().sum();
    // slack for the rounding of decimal inputs and of the sum itself
    let slack = 4.0 * f64::EPSILON * probs.len() as f64;
    if (total - 1.0).abs() > RENORMALIZE_TOL + slack {
        return Err(Error::InvalidPmf(format!("entries sum to {total}")));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Joint pmf over a product of component alphabets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    components: Vec<ComponentAlphabet>,
    shape: ProductSet,
    probs: Vec<f64>,
    full_support: bool,
}

impl JointPmf {
    /// A source pmf: every entry must be strictly positive.
    pub fn new(components: Vec<ComponentAlphabet>, probs: Vec<f64>) -> Result<Self> {
        let pmf = Self::with_partial_support(components, probs)?;
        if !pmf.full_support {
            return Err(Error::InvalidPmf("source pmf must have full support".into()));
        }
        Ok(pmf)
    }

    /// An intermediate pmf that may contain zero entries.
    pub fn with_partial_support(components: Vec<ComponentAlphabet>, probs: Vec<f64>) -> Result<Self> {
        let shape = ProductSet::new(components.iter().map(|c| c.len()).collect());
        if probs.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "pmf has {} entries but the alphabets have {} joint symbols",
                probs.len(),
                shape.len()
            )));
        }
        let probs = normalize_probs(probs)?;
        let full_support = probs.iter().all(|&p| p > 0.0);
        Ok(Self { components, shape, probs, full_support })
    }

    /// Full-support pmf over numbered alphabets `X1, X2, ...` of the given sizes.
    pub fn from_dims(dims: &[usize], probs: Vec<f64>) -> Result<Self> {
        let comps = numbered_components("X", dims)?;
        Self::new(comps, probs)
    }

    pub fn components(&self) -> &[ComponentAlphabet] {
        &self.components
    }

    pub fn shape(&self) -> &ProductSet {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of components `m`.
    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_full_support(&self) -> bool {
        self.full_support
    }

    pub fn prob(&self, coords: &[usize]) -> f64 {
        self.probs[self.shape.flat(coords)]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

/// Alphabets `{prefix}1, {prefix}2, ...` with numbered symbols.
pub fn numbered_components(prefix: &str, dims: &[usize]) -> Result<Vec<ComponentAlphabet>> {
    dims.iter()
        .enumerate()
        .map(|(i, &n)| ComponentAlphabet::numbered(format!("{prefix}{}", i + 1), n))
        .collect()
}

/// Row-stochastic matrix between two flat index sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    from: usize,
    to: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(from: usize, to: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != from * to {
            return Err(Error::InvalidKernel(format!(
                "{} entries for a {from}x{to} kernel",
                data.len()
            )));
        }
        let mut data = data;
        for r in 0..from {
            let row = &mut data[r * to..(r + 1) * to];
            let normalized = normalize_probs(row.to_vec())
                .map_err(|e| Error::InvalidKernel(format!("row {r}: {e}")))?;
            row.copy_from_slice(&normalized);
        }
        Ok(Self { from, to, data })
    }

    /// Rows are trusted to be stochastic (internal construction).
    pub(crate) fn from_raw(from: usize, to: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), from * to);
        Self { from, to, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { from: n, to: n, data }
    }

    /// Every row is the point mass on column `col`.
    pub fn constant(from: usize, to: usize, col: usize) -> Self {
        assert!(col < to);
        let mut data = vec![0.0; from * to];
        for r in 0..from {
            data[r * to + col] = 1.0;
        }
        Self { from, to, data }
    }

    pub fn rows(&self) -> usize {
        self.from
    }

    pub fn cols(&self) -> usize {
        self.to
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.to..(r + 1) * self.to]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.to + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Output marginal `q(y) = Σ_z p(z) W(y|z)`.
    pub fn output_marginal(&self, source: &[f64]) -> Vec<f64> {
        assert_eq!(source.len(), self.from, "source length must match kernel rows");
        let mut q = vec![0.0; self.to];
        for (z, &pz) in source.iter().enumerate() {
            if pz == 0.0 {
                continue;
            }
            for (qy, w) in q.iter_mut().zip(self.row(z)) {
                *qy += pz * w;
            }
        }
        q
    }
}

/// Marginal of `pmf` on the components in `subset`.
pub fn marginal(pmf: &JointPmf, subset: &SubsetIndex) -> Result<JointPmf> {
    subset.check_within(pmf.arity())?;
    let proj = pmf.shape().projection(subset);
    let sub = pmf.shape().restrict(subset);
    let mut probs = vec![0.0; sub.len()];
    for (x, &p) in pmf.probs().iter().enumerate() {
        probs[proj[x]] += p;
    }
    let comps = subset.members().iter().map(|&i| pmf.components()[i].clone()).collect();
    JointPmf::with_partial_support(comps, probs)
}

/// `P(target | given)` as a kernel from the flat index set of `given` to that
/// of `target`. An empty `given` yields a single row equal to the marginal.
pub fn conditional(pmf: &JointPmf, target: &SubsetIndex, given: &SubsetIndex) -> Result<Kernel> {
    target.check_within(pmf.arity())?;
    given.check_within(pmf.arity())?;
    if !target.is_disjoint(given) {
        return Err(Error::InvalidSubset(format!("target {target} overlaps given {given}")));
    }
    let shape = pmf.shape();
    let pt = shape.projection(target);
    let pg = shape.projection(given);
    let nt = shape.restrict(target).len();
    let ng = shape.restrict(given).len();
    let mut joint = vec![0.0; ng * nt];
    for (x, &p) in pmf.probs().iter().enumerate() {
        joint[pg[x] * nt + pt[x]] += p;
    }
    for g in 0..ng {
        let row = &mut joint[g * nt..(g + 1) * nt];
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityCondition(format!(
                "row {g} of P({target} | {given})"
            )));
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(Kernel::from_raw(ng, nt, joint))
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Shannon entropy in bits of a joint pmf.
pub fn entropy(pmf: &JointPmf) -> f64 {
    entropy_bits(pmf.probs())
}

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("binary entropy argument {p} outside [0, 1]")));
    }
    Ok(h2(p))
}

pub(crate) fn h2(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// `I(Z ∧ Y)` in bits for `Z ~ source` and `Y | Z ~ kernel`.
///
/// Panics if the source length differs from the number of kernel rows.
pub fn mutual_information(source: &[f64], kernel: &Kernel) -> f64 {
    let q = kernel.output_marginal(source);
    let mut total = 0.0;
    for (z, &pz) in source.iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        for (y, &w) in kernel.row(z).iter().enumerate() {
            if w > 0.0 {
                total += pz * w * (w / q[y]).log2();
            }
        }
    }
    total.max(0.0)
}

/// `Σ_s w(s) I(Z ∧ Y | S = s)`; a branch may be omitted only when its weight is zero.
pub fn conditional_mutual_information(
    weights: &[f64],
    branches: &[Option<(&[f64], &Kernel)>],
) -> Result<f64> {
    if weights.len() != branches.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} branches",
            weights.len(),
            branches.len()
        )));
    }
    let weights = normalize_probs(weights.to_vec())?;
    let mut total = 0.0;
    for (i, (w, b)) in weights.iter().zip(branches).enumerate() {
        if *w == 0.0 {
            continue;
        }
        let (src, ker) = b.ok_or_else(|| {
            Error::Empty(format!("branch {i} has positive weight {w} but no joint"))
        })?;
        total += w * mutual_information(src, ker);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2_pmf() -> JointPmf {
        // X1 ~ Bernoulli(0.1), X2 = X1 xor Bernoulli(0.5)
        JointPmf::from_dims(&[2, 2], vec![0.45, 0.45, 0.05, 0.05]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flat_index_is_row_major() {
        let s = ProductSet::new(vec![2, 3]);
        assert_eq!(s.flat(&[0, 2]), 2);
        assert_eq!(s.flat(&[1, 0]), 3);
        assert_eq!(s.coords(5), vec![1, 2]);
        assert_eq!(ProductSet::new(vec![]).len(), 1);
    }

    #[test]
    fn subsets_are_lexicographic() {
        let s: Vec<String> = subsets_of_size(3, 2).iter().map(|a| a.to_string()).collect();
        assert_eq!(s, ["{1,2}", "{1,3}", "{2,3}"]);
        assert_eq!(subsets_of_size(2, 2).len(), 1);
    }

    #[test]
    fn marginal_of_uniform_is_uniform() {
        let p = JointPmf::from_dims(&[2, 2], vec![0.25; 4]).unwrap();
        let m = marginal(&p, &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn marginal_of_example2_first_bit() {
        let m = marginal(&example2_pmf(), &SubsetIndex::new(vec![0]).unwrap()).unwrap();
        assert!(close(m.probs()[0], 0.9, 1e-12) && close(m.probs()[1], 0.1, 1e-12));
    }

    #[test]
    fn marginal_on_full_set_is_identity() {
        let p = example2_pmf();
        let m = marginal(&p, &SubsetIndex::full(2)).unwrap();
        assert_eq!(m.probs(), p.probs());
    }

    #[test]
    fn marginal_rejects_bad_index() {
        let err = marginal(&example2_pmf(), &SubsetIndex::new(vec![2]).unwrap());
        assert!(matches!(err, Err(Error::InvalidSubset(_))));
    }

    #[test]
    fn conditional_examples() {
        let one = SubsetIndex::new(vec![0]).unwrap();
        let two = SubsetIndex::new(vec![1]).unwrap();
        let k = conditional(&example2_pmf(), &two, &one).unwrap();
        for r in 0..2 {
            assert!(close(k.get(r, 0), 0.5, 1e-12) && close(k.get(r, 1), 0.5, 1e-12));
        }
        // independent product: rows equal the target marginal
        let p = JointPmf::from_dims(&[2, 3], vec![0.06, 0.12, 0.12, 0.14, 0.28, 0.28]).unwrap();
        let k = conditional(&p, &two, &one).unwrap();
        for r in 0..2 {
            assert!(close(k.get(r, 0), 0.2, 1e-12));
            assert!(close(k.get(r, 1), 0.4, 1e-12));
        }
        // copy source: identity rows
        let copy = JointPmf::with_partial_support(
            numbered_components("X", &[2, 2]).unwrap(),
            vec![0.3, 0.0, 0.0, 0.7],
        )
        .unwrap();
        let k = conditional(&copy, &two, &one).unwrap();
        assert_eq!(k, Kernel::identity(2));
    }

    #[test]
    fn conditional_on_zero_probability_fails() {
        let p = JointPmf::with_partial_support(
            numbered_components("X", &[2, 2]).unwrap(),
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let r = conditional(&p, &SubsetIndex::new(vec![1]).unwrap(), &SubsetIndex::new(vec![0]).unwrap());
        assert!(matches!(r, Err(Error::ZeroProbabilityCondition(_))));
    }

    #[test]
    fn entropy_examples() {
        assert!(close(entropy(&JointPmf::from_dims(&[4], vec![0.25; 4]).unwrap()), 2.0, 1e-12));
        assert_eq!(entropy_bits(&[1.0, 0.0]), 0.0);
        assert!(close(entropy_bits(&[0.9, 0.1]), 0.4690, 5e-5));
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!(close(binary_entropy(0.1).unwrap(), 0.4690, 5e-5));
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let src = [0.5, 0.5];
        let same = Kernel::new(2, 2, vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        assert!(mutual_information(&src, &same).abs() < 1e-15);
        assert!(close(mutual_information(&src, &Kernel::identity(2)), 1.0, 1e-15));
        let bsc = Kernel::new(2, 2, vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        assert!(close(mutual_information(&src, &bsc), 1.0 - h2(0.1), 1e-12));
        assert!(close(mutual_information(&src, &bsc), 0.5310, 5e-5));
    }

    #[test]
    fn conditional_mutual_information_examples() {
        let src = [0.5, 0.5];
        let id = Kernel::identity(2);
        let bsc = Kernel::new(2, 2, vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let flat = Kernel::constant(2, 2, 0);
        let one = conditional_mutual_information(&[1.0], &[Some((&src, &id))]).unwrap();
        assert!(close(one, 1.0, 1e-15));
        let zero =
            conditional_mutual_information(&[0.5, 0.5], &[Some((&src, &flat)), Some((&src, &flat))])
                .unwrap();
        assert_eq!(zero, 0.0);
        let mixed =
            conditional_mutual_information(&[0.5, 0.5], &[Some((&src, &id)), Some((&src, &bsc))])
                .unwrap();
        assert!(close(mixed, 0.7655, 5e-5));
        assert!(conditional_mutual_information(&[0.5, 0.5], &[Some((&src, &id)), None]).is_err());
        assert!(conditional_mutual_information(&[1.0, 0.0], &[Some((&src, &id)), None]).is_ok());
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let p = JointPmf::from_dims(&[2], vec![0.5, 0.499_999_999_5]).unwrap();
        assert!(close(p.probs().iter().sum::<f64>(), 1.0, 1e-15));
        assert!(JointPmf::from_dims(&[2], vec![0.5, 0.49]).is_err());
        assert!(JointPmf::from_dims(&[2], vec![1.5, -0.5]).is_err());
        assert!(JointPmf::from_dims(&[2], vec![1.0, 0.0]).is_err());
    }
}
