//! Samplers choosing which `k` of the `m` source components are observed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{subsets_of_size, JointPmf, Kernel, SubsetIndex};

/// Default bound on the number of point-mass samplers enumerated.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Deterministic map `h` from joint source symbols to `k`-subsets.
///
/// `assignment[x]` indexes into `subsets` (the lexicographically ordered
/// family of all `k`-subsets). The encoding reads the assignment as a
/// mixed-radix number whose most significant digit belongs to `x = 0`, so
/// numeric order on encodings is lexicographic order on assignments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointMassSampler {
    k: usize,
    subsets: Vec<SubsetIndex>,
    assignment: Vec<usize>,
    encoding: u64,
}

impl PointMassSampler {
    pub fn new(m: usize, k: usize, assignment: Vec<usize>) -> Result<Self> {
        check_k(m, k)?;
        let subsets = subsets_of_size(m, k);
        let radix = subsets.len() as u64;
        if let Some(&bad) = assignment.iter().find(|&&a| a >= subsets.len()) {
            return Err(Error::InvalidSubset(format!(
                "assignment index {bad} outside the {} subsets of size {k}",
                subsets.len()
            )));
        }
        let mut encoding: u64 = 0;
        for &a in &assignment {
            encoding = encoding
                .checked_mul(radix)
                .and_then(|e| e.checked_add(a as u64))
                .ok_or_else(|| Error::OutOfRange("sampler encoding overflows u64".into()))?;
        }
        Ok(Self { k, subsets, assignment, encoding })
    }

    /// Build from explicit subsets per source symbol.
    pub fn from_subsets(m: usize, k: usize, map: &[SubsetIndex]) -> Result<Self> {
        let family = subsets_of_size(m, k);
        let assignment = map
            .iter()
            .map(|s| {
                family.iter().position(|f| f == s).ok_or_else(|| {
                    Error::InvalidSubset(format!("{s} is not a subset of size {k} of {m} components"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(m, k, assignment)
    }

    /// The sampler that always observes `subset`.
    pub fn constant(m: usize, n_symbols: usize, subset: &SubsetIndex) -> Result<Self> {
        Self::from_subsets(m, subset.len(), &vec![subset.clone(); n_symbols])
    }

    pub fn from_encoding(m: usize, k: usize, n_symbols: usize, encoding: u64) -> Result<Self> {
        check_k(m, k)?;
        let radix = subsets_of_size(m, k).len() as u64;
        let mut digits = vec![0usize; n_symbols];
        let mut rest = encoding;
        for d in digits.iter_mut().rev() {
            *d = (rest % radix) as usize;
            rest /= radix;
        }
        if rest != 0 {
            return Err(Error::OutOfRange(format!("encoding {encoding} too large")));
        }
        Self::new(m, k, digits)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[SubsetIndex] {
        &self.subsets
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn encoding(&self) -> u64 {
        self.encoding
    }

    pub fn n_symbols(&self) -> usize {
        self.assignment.len()
    }

    /// Subset observed when the source emits flat symbol `x`.
    pub fn subset_for(&self, x: usize) -> &SubsetIndex {
        &self.subsets[self.assignment[x]]
    }

    pub fn id(&self) -> String {
        format!("h{}", self.encoding)
    }

    pub fn to_randomized(&self) -> RandomizedSampler {
        let n = self.subsets.len();
        let mut data = vec![0.0; self.assignment.len() * n];
        for (x, &a) in self.assignment.iter().enumerate() {
            data[x * n + a] = 1.0;
        }
        RandomizedSampler {
            subsets: self.subsets.clone(),
            rows: Kernel::from_raw(self.assignment.len(), n, data),
        }
    }
}

fn check_k(m: usize, k: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::OutOfRange(format!("k = {k} must lie in [1, {m}]")));
    }
    Ok(())
}

/// Sampler with a stochastic choice of subset per source symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSampler {
    subsets: Vec<SubsetIndex>,
    rows: Kernel,
}

impl RandomizedSampler {
    pub fn new(m: usize, k: usize, rows: Kernel) -> Result<Self> {
        check_k(m, k)?;
        let subsets = subsets_of_size(m, k);
        if rows.cols() != subsets.len() {
            return Err(Error::Dimension(format!(
                "sampler rows have {} columns for {} subsets",
                rows.cols(),
                subsets.len()
            )));
        }
        Ok(Self { subsets, rows })
    }

    pub fn subsets(&self) -> &[SubsetIndex] {
        &self.subsets
    }

    pub fn rows(&self) -> &Kernel {
        &self.rows
    }
}

/// `|A_k|^{|X_M|}` in exact arithmetic.
pub fn point_mass_count(m: usize, k: usize, n_symbols: usize) -> u128 {
    let radix = subsets_of_size(m, k).len() as u128;
    let mut count: u128 = 1;
    for _ in 0..n_symbols {
        count = count.saturating_mul(radix);
    }
    count
}

/// All point-mass samplers for a source, in increasing encoding order.
#[derive(Clone, Debug)]
pub struct PointMassSamplers {
    m: usize,
    k: usize,
    n_symbols: usize,
    next: u64,
    end: u64,
}

impl PointMassSamplers {
    pub fn total(&self) -> u64 {
        self.end
    }

    /// Random access by encoding, independent of iteration state.
    pub fn get(&self, encoding: u64) -> PointMassSampler {
        assert!(encoding < self.end);
        PointMassSampler::from_encoding(self.m, self.k, self.n_symbols, encoding)
            .expect("encoding within range")
    }
}

impl Iterator for PointMassSamplers {
    type Item = PointMassSampler;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let h = self.get(self.next);
        self.next += 1;
        Some(h)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for PointMassSamplers {}

/// Enumerate every map `h: X_M -> A_k`, refusing when the count exceeds `cap`.
pub fn enumerate_point_mass_samplers(pmf: &JointPmf, k: usize, cap: u64) -> Result<PointMassSamplers> {
    let m = pmf.arity();
    check_k(m, k)?;
    let count = point_mass_count(m, k, pmf.len());
    if count > cap as u128 {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(PointMassSamplers { m, k, n_symbols: pmf.len(), next: 0, end: count as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(m: usize) -> JointPmf {
        let n = 1usize << m;
        JointPmf::from_dims(&vec![2; m], vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_point_mass_samplers(&binary(2), 1, DEFAULT_CAP).unwrap().total(), 16);
        assert_eq!(enumerate_point_mass_samplers(&binary(2), 2, DEFAULT_CAP).unwrap().total(), 1);
        assert_eq!(enumerate_point_mass_samplers(&binary(3), 2, DEFAULT_CAP).unwrap().total(), 6561);
        assert_eq!(point_mass_count(3, 2, 8), 3u128.pow(8));
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_point_mass_samplers(&binary(3), 2, 1000).unwrap_err();
        assert_eq!(err, Error::CapExceeded { count: 6561, cap: 1000 });
    }

    #[test]
    fn order_is_lexicographic() {
        let all: Vec<_> = enumerate_point_mass_samplers(&binary(2), 1, DEFAULT_CAP).unwrap().collect();
        for (i, h) in all.iter().enumerate() {
            assert_eq!(h.encoding(), i as u64);
        }
        assert_eq!(all[6].assignment(), &[0, 1, 1, 0]);
        assert!(all.windows(2).all(|w| w[0].assignment() < w[1].assignment()));
    }

    #[test]
    fn encoding_round_trips() {
        let h = PointMassSampler::new(3, 2, vec![2, 0, 1, 1, 0, 2, 2, 1]).unwrap();
        let back = PointMassSampler::from_encoding(3, 2, 8, h.encoding()).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(enumerate_point_mass_samplers(&binary(2), 0, DEFAULT_CAP).is_err());
        assert!(enumerate_point_mass_samplers(&binary(2), 3, DEFAULT_CAP).is_err());
    }
}
