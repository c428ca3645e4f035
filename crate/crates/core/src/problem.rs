//! A complete sampling rate distortion problem and the two reference instances.

use crate::distortion::DistortionTable;
use crate::error::{Error, Result};
use crate::prob::{ComponentAlphabet, JointPmf, ProductSet};

/// Source pmf, reproduction alphabets, and distortion measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub pmf: JointPmf,
    pub repro: Vec<ComponentAlphabet>,
    pub distortion: DistortionTable,
}

impl Problem {
    pub fn new(pmf: JointPmf, repro: Vec<ComponentAlphabet>, distortion: DistortionTable) -> Result<Self> {
        if repro.len() != pmf.arity() {
            return Err(Error::Dimension(format!(
                "{} reproduction components for {} source components",
                repro.len(),
                pmf.arity()
            )));
        }
        let repro_set = ProductSet::new(repro.iter().map(|c| c.len()).collect());
        if distortion.source() != pmf.shape() || distortion.repro() != &repro_set {
            return Err(Error::Dimension(
                "distortion table does not match the source and reproduction alphabets".into(),
            ));
        }
        Ok(Self { pmf, repro, distortion })
    }

    pub fn arity(&self) -> usize {
        self.pmf.arity()
    }
}

fn bits(name: &str) -> ComponentAlphabet {
    ComponentAlphabet::new(name, vec!["0".into(), "1".into()]).expect("two distinct symbols")
}

/// Two iid uniform bits; `Y1 = {0, 1, e}`, `Y2 = {0, 1}`, and
/// `d = d1 + d2` where `d1` is 0 on a correct bit, 1 on an erasure and
/// forbidden on a flipped bit, while `d2` is the Hamming distortion.
pub fn example1() -> Problem {
    let pmf = JointPmf::new(vec![bits("X1"), bits("X2")], vec![0.25; 4]).expect("uniform pmf");
    let y1 = ComponentAlphabet::new("Y1", vec!["0".into(), "1".into(), "e".into()]).expect("symbols");
    let repro = vec![y1, bits("Y2")];
    let d = DistortionTable::from_fn(
        pmf.shape().clone(),
        ProductSet::new(vec![3, 2]),
        |x, y| {
            let d1 = match (x[0], y[0]) {
                (_, 2) => 1.0,
                (a, b) if a == b => 0.0,
                _ => return None,
            };
            let d2 = if x[1] == y[1] { 0.0 } else { 1.0 };
            Some(d1 + d2)
        },
    )
    .expect("valid table");
    Problem::new(pmf, repro, d).expect("consistent problem")
}

/// Two bits with `X1 ~ Bernoulli(p)` and `X2 = X1 xor N`, `N ~ Bernoulli(q)`
/// independent of `X1`, under the probability-of-error distortion.
pub fn example2(p: f64, q: f64) -> Result<Problem> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::OutOfRange(format!("{name} = {v} must lie in (0, 1) for full support")));
        }
    }
    let px1 = [1.0 - p, p];
    let mut probs = Vec::with_capacity(4);
    for x1 in 0..2 {
        for x2 in 0..2 {
            let noise = if x1 == x2 { 1.0 - q } else { q };
            probs.push(px1[x1] * noise);
        }
    }
    let pmf = JointPmf::new(vec![bits("X1"), bits("X2")], probs)?;
    let repro = vec![bits("Y1"), bits("Y2")];
    let d = DistortionTable::probability_of_error(&[2, 2]);
    Problem::new(pmf, repro, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_layout() {
        let pr = example1();
        let d = &pr.distortion;
        // x = (0, 1), y = (e, 1): erasure + match
        assert_eq!(d.get(1, 2 * 2 + 1), Some(1.0));
        // x = (0, 0), y = (1, 0): flipped first bit
        assert_eq!(d.get(0, 2), None);
        assert_eq!(d.get(0, 1), Some(1.0));
    }

    #[test]
    fn example2_pmf() {
        let pr = example2(0.1, 0.5).unwrap();
        let expect = [0.45, 0.45, 0.05, 0.05];
        for (a, b) in pr.pmf.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(example2(0.0, 0.5).is_err());
    }
}
