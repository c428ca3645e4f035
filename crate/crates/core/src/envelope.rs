//! Lower convex envelopes of rate/distortion point clouds, with the witnesses
//! needed to realize any point on a segment by time-sharing two points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this in distortion are merged.
const MERGE_TOL: f64 = 1e-12;

/// Identifies an input point: `source` is the curve (subset, sampler, ...) it
/// came from and `point` its position within that curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WitnessTag {
    pub source: usize,
    pub point: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    pub rate: f64,
    pub witness: WitnessTag,
}

/// Hull vertex with every input point that attains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub delta: f64,
    pub rate: f64,
    /// Sorted, nonempty.
    pub candidates: Vec<WitnessTag>,
}

/// The two witnesses mixed along one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub left: WitnessTag,
    pub right: WitnessTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearCurve {
    vertices: Vec<Vertex>,
    segments: Vec<Segment>,
    convex: bool,
}

fn check_points(points: &[CurvePoint]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("no curve points".into()));
    }
    if let Some(p) = points.iter().find(|p| !p.delta.is_finite() || !p.rate.is_finite() || p.rate < 0.0) {
        return Err(Error::OutOfRange(format!(
            "curve point ({}, {}) must be finite with nonnegative rate",
            p.delta, p.rate
        )));
    }
    Ok(())
}

/// Sort and merge points with (nearly) equal distortion, keeping the lowest rate.
fn merge(points: &[CurvePoint]) -> Vec<Vertex> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.rate.total_cmp(&b.rate))
            .then(a.witness.cmp(&b.witness))
    });
    let mut out: Vec<Vertex> = Vec::new();
    let mut group: Vec<CurvePoint> = Vec::new();
    let flush = |group: &mut Vec<CurvePoint>, out: &mut Vec<Vertex>| {
        if group.is_empty() {
            return;
        }
        let best = group.iter().map(|p| p.rate).fold(f64::INFINITY, f64::min);
        let lead = group.iter().find(|p| p.rate == best).expect("nonempty");
        let mut candidates: Vec<WitnessTag> = group
            .iter()
            .filter(|p| p.rate <= best + MERGE_TOL)
            .map(|p| p.witness)
            .collect();
        candidates.sort();
        candidates.dedup();
        out.push(Vertex { delta: lead.delta, rate: best, candidates });
        group.clear();
    };
    for p in sorted {
        if group.first().is_some_and(|g| p.delta - g.delta > MERGE_TOL) {
            flush(&mut group, &mut out);
        }
        group.push(p);
    }
    flush(&mut group, &mut out);
    out
}

/// `(a - o) × (b - o)`, and a scale for deciding when it counts as zero.
fn cross(o: &Vertex, a: &Vertex, b: &Vertex) -> (f64, f64) {
    let (ax, ay) = (a.delta - o.delta, a.rate - o.rate);
    let (bx, by) = (b.delta - o.delta, b.rate - o.rate);
    (ax * by - ay * bx, (ax.abs() + ay.abs()) * (bx.abs() + by.abs()))
}

/// Segment witnesses: a source present at both ends if there is one (the
/// smallest such), otherwise the smallest tag at each end.
fn choose_segment(l: &Vertex, r: &Vertex) -> Segment {
    for a in &l.candidates {
        if let Some(b) = r.candidates.iter().find(|b| b.source == a.source) {
            return Segment { left: *a, right: *b };
        }
    }
    Segment { left: l.candidates[0], right: r.candidates[0] }
}

fn segments_of(vertices: &[Vertex]) -> Vec<Segment> {
    vertices.windows(2).map(|w| choose_segment(&w[0], &w[1])).collect()
}

/// Greatest convex minorant of `points`, cut at its first minimum-rate vertex
/// (beyond which a rate distortion curve is flat).
pub fn lower_convex_envelope(points: &[CurvePoint]) -> Result<PiecewiseLinearCurve> {
    check_points(points)?;
    let merged = merge(points);
    let mut hull: Vec<Vertex> = Vec::with_capacity(merged.len());
    for v in merged {
        while hull.len() >= 2 {
            let (c, scale) = cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &v);
            if c <= MERGE_TOL * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(v);
    }
    let min_rate = hull.iter().map(|v| v.rate).fold(f64::INFINITY, f64::min);
    let cut = hull.iter().position(|v| v.rate <= min_rate + MERGE_TOL).expect("nonempty");
    hull.truncate(cut + 1);
    let segments = segments_of(&hull);
    Ok(PiecewiseLinearCurve { vertices: hull, segments, convex: true })
}

impl PiecewiseLinearCurve {
    /// Curve through `points` as given (after sorting and merging); may be non-convex.
    pub fn from_polyline(points: &[CurvePoint]) -> Result<Self> {
        check_points(points)?;
        let vertices = merge(points);
        let segments = segments_of(&vertices);
        let mut curve = Self { vertices, segments, convex: true };
        curve.convex = curve.slopes().windows(2).all(|w| w[1] >= w[0] - 1e-9);
        Ok(curve)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn delta_min(&self) -> f64 {
        self.vertices[0].delta
    }

    pub fn delta_max(&self) -> f64 {
        self.vertices[self.vertices.len() - 1].delta
    }

    /// Slope of every segment (nonpositive on a rate distortion curve).
    pub fn slopes(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .map(|w| (w[1].rate - w[0].rate) / (w[1].delta - w[0].delta))
            .collect()
    }

    /// Index of the segment containing `delta`, or `None` outside the vertex span.
    pub fn segment_at(&self, delta: f64) -> Option<usize> {
        if self.vertices.len() < 2 || delta < self.delta_min() || delta > self.delta_max() {
            return None;
        }
        let i = self.vertices.partition_point(|v| v.delta <= delta);
        Some(i.clamp(1, self.vertices.len() - 1) - 1)
    }

    /// Linear interpolation; flat beyond the last vertex.
    pub fn eval(&self, delta: f64) -> Result<f64> {
        let lo = self.delta_min();
        if delta < lo - 1e-9 || delta.is_nan() {
            return Err(Error::InfeasibleDistortion { target: delta, delta_min: lo });
        }
        if delta >= self.delta_max() {
            return Ok(self.vertices[self.vertices.len() - 1].rate);
        }
        let Some(i) = self.segment_at(delta.max(lo)) else {
            return Ok(self.vertices[0].rate);
        };
        let (a, b) = (&self.vertices[i], &self.vertices[i + 1]);
        let t = (delta.max(lo) - a.delta) / (b.delta - a.delta);
        Ok(a.rate + t * (b.rate - a.rate))
    }

    /// Witness of a vertex, consistent with the adjoining segment choice.
    pub fn vertex_witness(&self, i: usize) -> WitnessTag {
        if i < self.segments.len() {
            self.segments[i].left
        } else if i > 0 {
            self.segments[i - 1].right
        } else {
            self.vertices[i].candidates[0]
        }
    }

    /// Time-sharing weights realizing the curve at `delta` (one or two points).
    pub fn mixture_at(&self, delta: f64) -> Result<Vec<(WitnessTag, f64)>> {
        self.eval(delta)?;
        let last = self.vertices.len() - 1;
        if delta >= self.delta_max() - MERGE_TOL {
            return Ok(vec![(self.vertex_witness(last), 1.0)]);
        }
        if delta <= self.delta_min() + MERGE_TOL {
            return Ok(vec![(self.vertex_witness(0), 1.0)]);
        }
        let i = self.segment_at(delta).expect("inside the vertex span");
        let (a, b) = (&self.vertices[i], &self.vertices[i + 1]);
        let w = (b.delta - delta) / (b.delta - a.delta);
        let s = self.segments[i];
        if (delta - a.delta).abs() <= MERGE_TOL {
            return Ok(vec![(s.left, 1.0)]);
        }
        if (b.delta - delta).abs() <= MERGE_TOL {
            return Ok(vec![(s.right, 1.0)]);
        }
        Ok(vec![(s.left, w), (s.right, 1.0 - w)])
    }
}

/// Minimum over `curves` at each grid distortion. The witness of each result
/// carries the index of the minimizing curve as `source` and the grid index
/// as `point`. Ties within rounding keep the previous grid point's curve,
/// otherwise go to the first curve. Curves are skipped where `delta`
/// lies below their domain.
pub fn pointwise_min(curves: &[PiecewiseLinearCurve], grid: &[f64]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut last: Option<usize> = None;
    for (g, &delta) in grid.iter().enumerate() {
        let values: Vec<Option<f64>> = curves.iter().map(|c| c.eval(delta).ok()).collect();
        let rate = values.iter().flatten().fold(f64::INFINITY, |m, &r| m.min(r));
        let ties = |c: usize| values[c].is_some_and(|r| r <= rate + MERGE_TOL);
        let c = match last {
            Some(c) if ties(c) => c,
            _ => (0..curves.len()).find(|&c| ties(c)).ok_or_else(|| Error::InfeasibleDistortion {
                target: delta,
                delta_min: curves.iter().map(|c| c.delta_min()).fold(f64::INFINITY, f64::min),
            })?,
        };
        last = Some(c);
        out.push(CurvePoint { delta, rate, witness: WitnessTag { source: c, point: g } });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::h2;
    use proptest::prelude::*;

    fn pt(delta: f64, rate: f64, source: usize, point: usize) -> CurvePoint {
        CurvePoint { delta, rate, witness: WitnessTag { source, point } }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(lower_convex_envelope(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn collinear_points_give_one_segment() {
        let pts: Vec<_> = (0..5).map(|i| pt(i as f64, 4.0 - i as f64, 0, i)).collect();
        let c = lower_convex_envelope(&pts).unwrap();
        assert_eq!(c.vertices().len(), 2);
        assert_eq!(c.eval(2.5).unwrap(), 1.5);
    }

    #[test]
    fn convex_input_keeps_every_vertex() {
        let pts: Vec<_> = (0..=10).map(|i| {
            let d = 0.05 * i as f64;
            pt(d, 1.0 - h2(d), 0, i)
        }).collect();
        let c = lower_convex_envelope(&pts).unwrap();
        assert_eq!(c.vertices().len(), 11);
        assert_eq!(c.eval(0.05).unwrap(), 1.0 - h2(0.05));
        let mid = c.eval(0.075).unwrap();
        assert!((mid - 0.5 * (2.0 - h2(0.05) - h2(0.1))).abs() < 1e-15);
    }

    #[test]
    fn single_point() {
        let c = lower_convex_envelope(&[pt(0.3, 0.0, 2, 0)]).unwrap();
        assert_eq!(c.eval(0.3).unwrap(), 0.0);
        assert_eq!(c.eval(5.0).unwrap(), 0.0);
        assert!(c.eval(0.2).is_err());
        assert_eq!(c.mixture_at(0.3).unwrap(), vec![(WitnessTag { source: 2, point: 0 }, 1.0)]);
    }

    #[test]
    fn example1_envelope_from_closed_forms() {
        // R_1 = 1.5 - Δ on [0.5, 1.5], R_2 = 1 - h(Δ - 1) on [1, 1.5]
        let mut pts = Vec::new();
        for i in 0..=200 {
            let d = 0.5 + i as f64 / 200.0;
            pts.push(pt(d, 1.5 - d, 0, i));
        }
        for i in 0..=2000 {
            let d = 1.0 + 0.5 * i as f64 / 2000.0;
            pts.push(pt(d, 1.0 - h2(d - 1.0), 1, i));
        }
        let c = lower_convex_envelope(&pts).unwrap();
        assert!((c.eval(1.0).unwrap() - 0.4485).abs() < 5e-3);
        // the chord from (0.5, 1) touches R_2 where its tangent passes through (0.5, 1)
        let v = c.vertices();
        let kink = v.iter().position(|x| x.candidates[0].source == 1).unwrap();
        assert!((v[kink].delta - 1.318).abs() < 0.01, "{}", v[kink].delta);
        assert!((c.slopes()[0] + 1.103).abs() < 5e-3);
    }

    #[test]
    fn witnesses_prefer_a_common_source() {
        // source 1 is a straight segment; source 0 only shares its right end
        let pts = [pt(0.0, 1.0, 1, 0), pt(1.0, 0.0, 0, 3), pt(1.0, 0.0, 1, 1)];
        let c = lower_convex_envelope(&pts).unwrap();
        let s = c.segments()[0];
        assert_eq!((s.left.source, s.right.source), (1, 1));
        let mix = c.mixture_at(0.25).unwrap();
        assert_eq!(mix, vec![(WitnessTag { source: 1, point: 0 }, 0.75), (WitnessTag { source: 1, point: 1 }, 0.25)]);
    }

    #[test]
    fn hull_is_cut_at_minimum_rate() {
        let pts = [pt(0.0, 1.0, 0, 0), pt(1.0, 0.0, 0, 1), pt(2.0, 0.0, 0, 2), pt(3.0, 0.5, 0, 3)];
        let c = lower_convex_envelope(&pts).unwrap();
        assert_eq!(c.vertices().len(), 2);
        assert_eq!(c.eval(2.5).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_min_picks_the_lower_curve() {
        let a = lower_convex_envelope(&[pt(0.0, 1.0, 0, 0), pt(1.0, 0.0, 0, 1)]).unwrap();
        let b = lower_convex_envelope(&[pt(0.5, 1.0, 0, 0), pt(1.0, 0.5, 0, 1)]).unwrap();
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let m = pointwise_min(&[b.clone(), a.clone()], &grid).unwrap();
        assert!(m.iter().all(|p| p.witness.source == 1));
        assert_eq!(m[1].rate, 0.75);
        assert!(pointwise_min(&[b], &[0.1]).is_err());
        let own = pointwise_min(&[a.clone()], &grid).unwrap();
        for p in own {
            assert_eq!(p.rate, a.eval(p.delta).unwrap());
        }
    }

    #[test]
    fn polyline_flags_nonconvexity() {
        let c = PiecewiseLinearCurve::from_polyline(&[pt(0.0, 1.0, 0, 0), pt(1.0, 0.9, 0, 1), pt(2.0, 0.0, 0, 2)]).unwrap();
        assert!(!c.is_convex());
        assert_eq!(c.vertices().len(), 3);
    }

    fn cloud() -> impl Strategy<Value = Vec<CurvePoint>> {
        prop::collection::vec((0.0..2.0f64, 0.0..3.0f64), 1..40).prop_map(|v| {
            v.into_iter().enumerate().map(|(i, (d, r))| pt(d, r, i % 3, i)).collect()
        })
    }

    proptest! {
        #[test]
        fn envelope_lies_below_inputs(pts in cloud()) {
            let c = lower_convex_envelope(&pts).unwrap();
            for p in &pts {
                prop_assert!(c.eval(p.delta).unwrap() <= p.rate + 1e-9);
            }
            // touches at least two inputs, or one when the hull is a point
            let touching = pts.iter().filter(|p| (c.eval(p.delta).unwrap() - p.rate).abs() <= 1e-9).count();
            prop_assert!(touching >= c.vertices().len().min(2));
        }

        #[test]
        fn envelope_is_idempotent(pts in cloud()) {
            let c = lower_convex_envelope(&pts).unwrap();
            let again: Vec<_> = c.vertices().iter().enumerate()
                .map(|(i, v)| pt(v.delta, v.rate, 0, i)).collect();
            let c2 = lower_convex_envelope(&again).unwrap();
            prop_assert_eq!(c.vertices().len(), c2.vertices().len());
            for (a, b) in c.vertices().iter().zip(c2.vertices()) {
                prop_assert_eq!((a.delta, a.rate), (b.delta, b.rate));
            }
        }

        #[test]
        fn envelope_is_convex_and_nonincreasing(pts in cloud()) {
            let c = lower_convex_envelope(&pts).unwrap();
            let (lo, hi) = (c.delta_min(), c.delta_max() + 0.5);
            let grid: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
            let r: Vec<f64> = grid.iter().map(|&d| c.eval(d).unwrap()).collect();
            for w in r.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
            for w in r.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn mixtures_reproduce_the_curve(pts in cloud(), t in 0.0..1.0f64) {
            let c = lower_convex_envelope(&pts).unwrap();
            let d = c.delta_min() + t * (c.delta_max() - c.delta_min());
            let mix = c.mixture_at(d).unwrap();
            prop_assert!(mix.len() <= 2);
            let lookup = |w: WitnessTag| pts.iter().find(|p| p.witness == w).unwrap();
            let md: f64 = mix.iter().map(|(w, a)| a * lookup(*w).delta).sum();
            let mr: f64 = mix.iter().map(|(w, a)| a * lookup(*w).rate).sum();
            prop_assert!((md - d).abs() <= 1e-9);
            prop_assert!((mr - c.eval(d).unwrap()).abs() <= 1e-9);
        }
    }
}
