use serde::{Deserialize, Serialize};

use super::WeightedDigraph;
use crate::error::{Error, Result};

/// Piecewise-constant time-varying graph `A(t)`.
///
/// Segment `k` is active on `[breakpoints[k], breakpoints[k + 1])`; the last
/// segment is held for all later times, so the signal is defined on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalDoc", into = "SignalDoc")]
pub struct GraphSignal {
    n: usize,
    breakpoints: Vec<f64>,
    segments: Vec<WeightedDigraph>,
    weight_bound: f64,
}

/// JSON layout: `{"n": .., "breakpoints": [..], "segments": [[row-major]..]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalDoc {
    n: usize,
    breakpoints: Vec<f64>,
    segments: Vec<Vec<f64>>,
}

impl TryFrom<SignalDoc> for GraphSignal {
    type Error = Error;

    fn try_from(doc: SignalDoc) -> Result<Self> {
        let segments = doc
            .segments
            .into_iter()
            .map(|w| WeightedDigraph::new(doc.n, w))
            .collect::<Result<Vec<_>>>()?;
        GraphSignal::new(doc.breakpoints, segments)
    }
}

impl From<GraphSignal> for SignalDoc {
    fn from(s: GraphSignal) -> Self {
        SignalDoc {
            n: s.n,
            breakpoints: s.breakpoints,
            segments: s.segments.into_iter().map(|g| g.weights).collect(),
        }
    }
}

fn check_breakpoints(breakpoints: &[f64], segments: usize) -> Result<()> {
    if segments == 0 {
        return Err(Error::InvalidSignal("no segments".into()));
    }
    if breakpoints.len() != segments {
        return Err(Error::InvalidSignal(format!(
            "{} breakpoints for {segments} segments",
            breakpoints.len()
        )));
    }
    if breakpoints[0] != 0.0 {
        return Err(Error::InvalidSignal("first breakpoint must be 0".into()));
    }
    if breakpoints.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidSignal("non-finite breakpoint".into()));
    }
    if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSignal(
            "breakpoints must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl GraphSignal {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<WeightedDigraph>) -> Result<Self> {
        check_breakpoints(&breakpoints, segments.len())?;
        let n = segments[0].n();
        if segments.iter().any(|g| g.n() != n) {
            return Err(Error::InvalidSignal("segments disagree on n".into()));
        }
        let weight_bound = segments
            .iter()
            .map(WeightedDigraph::max_weight)
            .fold(0.0, f64::max);
        Ok(Self {
            n,
            breakpoints,
            segments,
            weight_bound,
        })
    }

    pub fn constant(g: WeightedDigraph) -> Self {
        Self::new(vec![0.0], vec![g]).expect("single segment is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[WeightedDigraph] {
        &self.segments
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Supremum of all weights.
    pub fn weight_bound(&self) -> f64 {
        self.weight_bound
    }

    pub fn last_breakpoint(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Index of the segment active at `t`; times before 0 map to segment 0.
    #[inline]
    pub fn segment_index(&self, t: f64) -> usize {
        self.breakpoints
            .partition_point(|&b| b <= t)
            .saturating_sub(1)
    }

    #[inline]
    pub fn at(&self, t: f64) -> &WeightedDigraph {
        &self.segments[self.segment_index(t)]
    }

    pub fn segment_start(&self, k: usize) -> f64 {
        self.breakpoints[k]
    }

    /// End of segment `k` (infinite for the last one).
    pub fn segment_end(&self, k: usize) -> f64 {
        self.breakpoints.get(k + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// `int_{t0}^{t1} A(s) ds`, exact for the piecewise-constant signal.
    pub fn union_over(&self, t0: f64, t1: f64) -> Result<WeightedDigraph> {
        if !(t0 >= 0.0) || !(t1 > t0) || !t1.is_finite() {
            return Err(Error::OutsideDomain { t0, t1 });
        }
        Ok(self.union_unchecked(t0, t1))
    }

    pub(crate) fn union_unchecked(&self, t0: f64, t1: f64) -> WeightedDigraph {
        let mut acc = WeightedDigraph::zeros(self.n);
        let first = self.segment_index(t0);
        for k in first..self.segments.len() {
            let start = self.breakpoints[k];
            if start >= t1 {
                break;
            }
            let overlap = t1.min(self.segment_end(k)) - t0.max(start);
            if overlap > 0.0 {
                acc.add_scaled(&self.segments[k], overlap);
            }
        }
        acc
    }

    /// Applies `f` to each segment, keeping the breakpoints.
    pub fn map_segments(
        &self,
        f: impl Fn(usize, &WeightedDigraph) -> Result<WeightedDigraph>,
    ) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, g)| f(k, g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.breakpoints.clone(), segments)
    }
}

/// Piecewise-constant signed weights `b_ij(t)` (zero diagonal) for the
/// signed-network opinion model. Shares the JSON layout of [`GraphSignal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalDoc", into = "SignalDoc")]
pub struct SignedSignal {
    n: usize,
    breakpoints: Vec<f64>,
    segments: Vec<Vec<f64>>,
    magnitudes: GraphSignal,
}

impl TryFrom<SignalDoc> for SignedSignal {
    type Error = Error;

    fn try_from(doc: SignalDoc) -> Result<Self> {
        SignedSignal::new(doc.n, doc.breakpoints, doc.segments)
    }
}

impl From<SignedSignal> for SignalDoc {
    fn from(s: SignedSignal) -> Self {
        SignalDoc {
            n: s.n,
            breakpoints: s.breakpoints,
            segments: s.segments,
        }
    }
}

impl SignedSignal {
    pub fn new(n: usize, breakpoints: Vec<f64>, segments: Vec<Vec<f64>>) -> Result<Self> {
        check_breakpoints(&breakpoints, segments.len())?;
        for (k, seg) in segments.iter().enumerate() {
            if seg.len() != n * n {
                return Err(Error::InvalidSignal(format!("segment {k} has wrong size")));
            }
            if seg.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidSignal(format!("segment {k} has non-finite weight")));
            }
            if (0..n).any(|i| seg[i * n + i] != 0.0) {
                return Err(Error::InvalidSignal(format!("segment {k} has a self-loop")));
            }
        }
        let magnitudes = GraphSignal::new(
            breakpoints.clone(),
            segments
                .iter()
                .map(|seg| WeightedDigraph::new(n, seg.iter().map(|b| b.abs()).collect()))
                .collect::<Result<Vec<_>>>()?,
        )?;
        Ok(Self {
            n,
            breakpoints,
            segments,
            magnitudes,
        })
    }

    /// Signs `sign[i][j]` applied to the weights of an unsigned signal.
    pub fn from_signs(graph: &GraphSignal, signs: &[f64]) -> Result<Self> {
        let n = graph.n();
        if signs.len() != n * n {
            return Err(Error::InvalidSignal("sign pattern has wrong size".into()));
        }
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0 && *s != 0.0) {
            return Err(Error::InvalidSignal("signs must be -1, 0 or 1".into()));
        }
        let segments = graph
            .segments()
            .iter()
            .map(|g| g.as_slice().iter().zip(signs).map(|(w, s)| w * s).collect())
            .collect();
        Self::new(n, graph.breakpoints().to_vec(), segments)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Row-major signed weights of segment `k`.
    pub fn segment(&self, k: usize) -> &[f64] {
        &self.segments[k]
    }

    /// The unsigned graph `a_ij = |b_ij|`.
    pub fn magnitudes(&self) -> &GraphSignal {
        &self.magnitudes
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.magnitudes.segment_index(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arc(n: usize, from: usize, to: usize, w: f64) -> WeightedDigraph {
        let mut g = WeightedDigraph::zeros(n);
        g.set(to, from, w);
        g
    }

    /// Period-2 alternation: arc 1->2 on [2k, 2k+1), arc 2->1 on [2k+1, 2k+2).
    pub(crate) fn alternating(periods: usize) -> GraphSignal {
        let mut bps = Vec::new();
        let mut segs = Vec::new();
        for k in 0..periods {
            bps.push(2.0 * k as f64);
            segs.push(arc(2, 0, 1, 1.0));
            bps.push(2.0 * k as f64 + 1.0);
            segs.push(arc(2, 1, 0, 1.0));
        }
        GraphSignal::new(bps, segs).unwrap()
    }

    #[test]
    fn constant_union_scales() {
        let a = WeightedDigraph::from_rows(&[vec![0.0, 1.5], vec![0.5, 0.0]]).unwrap();
        let s = GraphSignal::constant(a.clone());
        let u = s.union_over(0.0, 2.0).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 3.0, 1.0, 0.0]);
    }

    #[test]
    fn alternating_union() {
        let s = alternating(3);
        let u = s.union_over(0.0, 2.0).unwrap();
        assert_eq!(u.weight(1, 0), 1.0);
        assert_eq!(u.weight(0, 1), 1.0);
        let half = s.union_over(0.5, 1.0).unwrap();
        assert_eq!(half.weight(0, 1), 0.0);
        assert_eq!(half.weight(1, 0), 0.5);
    }

    #[test]
    fn union_domain_errors() {
        let s = alternating(1);
        assert!(s.union_over(-1.0, 1.0).is_err());
        assert!(s.union_over(1.0, 1.0).is_err());
        assert!(s.union_over(2.0, 1.0).is_err());
        // beyond the last breakpoint the last segment is held
        let u = s.union_over(10.0, 11.0).unwrap();
        assert_eq!(u.weight(0, 1), 1.0);
    }

    #[test]
    fn segment_lookup() {
        let s = alternating(2);
        assert_eq!(s.segment_index(0.0), 0);
        assert_eq!(s.segment_index(0.999), 0);
        assert_eq!(s.segment_index(1.0), 1);
        assert_eq!(s.segment_index(100.0), 3);
        assert_eq!(s.segment_end(3), f64::INFINITY);
    }

    #[test]
    fn json_layout_round_trip() {
        let s = alternating(1);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"n":2,"breakpoints":[0.0,1.0],"segments":[[0.0,0.0,1.0,0.0],[0.0,1.0,0.0,0.0]]}"#
        );
        let back: GraphSignal = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_validation() {
        for bad in [
            r#"{"n":2,"breakpoints":[1.0],"segments":[[0,0,0,0]]}"#,
            r#"{"n":2,"breakpoints":[0.0],"segments":[[0,0,0]]}"#,
            r#"{"n":2,"breakpoints":[0.0,0.0],"segments":[[0,0,0,0],[0,0,0,0]]}"#,
            r#"{"n":2,"breakpoints":[0.0],"segments":[[0,-1,0,0]]}"#,
            r#"{"n":2,"breakpoints":[0.0],"segments":[[0,0,0,0]],"extra":1}"#,
        ] {
            assert!(serde_json::from_str::<GraphSignal>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn signed_magnitudes() {
        let s = SignedSignal::new(2, vec![0.0], vec![vec![0.0, -1.0, 2.0, 0.0]]).unwrap();
        assert_eq!(s.magnitudes().segments()[0].as_slice(), &[0.0, 1.0, 2.0, 0.0]);
        assert!(SignedSignal::new(2, vec![0.0], vec![vec![1.0, 0.0, 0.0, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn union_is_additive(
            lens in proptest::collection::vec(0.1..3.0f64, 1..8),
            weights in proptest::collection::vec(0.0..5.0f64, 8 * 9),
            a in 0.0..10.0f64, b in 0.0..10.0f64, c in 0.0..10.0f64,
        ) {
            let n = 3;
            let mut bps = vec![0.0];
            for l in &lens[..lens.len() - 1] { bps.push(bps.last().unwrap() + l); }
            let segs: Vec<_> = (0..lens.len()).map(|k| {
                let mut w = weights[k * 9..(k + 1) * 9].to_vec();
                for i in 0..n { w[i * n + i] = 0.0; }
                WeightedDigraph::new(n, w).unwrap()
            }).collect();
            let s = GraphSignal::new(bps, segs).unwrap();
            let mut t = [a, b, c];
            t.sort_by(f64::total_cmp);
            prop_assume!(t[1] - t[0] > 1e-6 && t[2] - t[1] > 1e-6);
            let left = s.union_over(t[0], t[1]).unwrap();
            let right = s.union_over(t[1], t[2]).unwrap();
            let whole = s.union_over(t[0], t[2]).unwrap();
            for k in 0..9 {
                let sum = left.as_slice()[k] + right.as_slice()[k];
                prop_assert!((sum - whole.as_slice()[k]).abs() <= 1e-12 * (1.0 + whole.as_slice()[k]));
            }
        }
    }
}
