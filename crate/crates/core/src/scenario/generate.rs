//! Random graph signals with connectivity properties known by construction.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rng_stream, GRAPH_STREAM};
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, WeightedDigraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// One random segment.
    StaticRandom,
    /// A cycle of random segments repeated every period.
    PeriodicSwitching,
    /// A fixed Hamiltonian cycle in the first sub-segment of every period.
    UscByConstruction,
    /// Type-symmetric segments with a random spanning tree once per period.
    CutBalancedRandom,
    /// Row `leader` vanishes; a fixed spanning tree rooted at the leader in
    /// the first sub-segment of every period.
    LeaderRooted,
}

fn default_weight_range() -> [f64; 2] {
    [0.5, 1.5]
}

fn default_period() -> f64 {
    4.0
}

fn default_density() -> f64 {
    0.3
}

fn default_periods() -> usize {
    10
}

fn default_subsegments() -> usize {
    4
}

fn default_k() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default = "default_weight_range")]
    pub weight_range: [f64; 2],
    #[serde(default = "default_period")]
    pub period: f64,
    /// Probability of each extra arc per sub-segment.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Periods emitted before the final segment, which is held forever.
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default = "default_subsegments")]
    pub subsegments: usize,
    /// Type-symmetry ratio of `cut-balanced-random`.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Weights of `cut-balanced-random` segments are scaled by
    /// `1 / (1 + decay t)` at their start time.
    #[serde(default)]
    pub decay: f64,
    #[serde(default)]
    pub leader: usize,
    /// Overrides the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        Self {
            kind,
            n,
            weight_range: default_weight_range(),
            period: default_period(),
            density: default_density(),
            periods: default_periods(),
            subsegments: default_subsegments(),
            k: default_k(),
            decay: 0.0,
            leader: 0,
            seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        let [lo, hi] = self.weight_range;
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("weight range [{lo}, {hi}] must satisfy 0 < low <= high"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad(format!("period {} must be positive", self.period));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad(format!("density {} must lie in [0, 1]", self.density));
        }
        if self.periods == 0 || self.subsegments == 0 {
            return bad("periods and subsegments must be at least 1".into());
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return bad(format!("k = {} must be >= 1", self.k));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad(format!("decay {} must be nonnegative", self.decay));
        }
        if self.decay != 0.0 && self.kind != GeneratorKind::CutBalancedRandom {
            return bad("decay only applies to cut-balanced-random".into());
        }
        if self.leader >= self.n {
            return bad(format!("leader {} out of range", self.leader));
        }
        if self.kind == GeneratorKind::UscByConstruction && self.density == 0.0 {
            return bad("usc-by-construction needs a positive density".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    pub period: f64,
    pub delta: f64,
}

/// Properties a generated signal satisfies by construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Advertised {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usc: Option<WindowParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uqsc: Option<WindowParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    /// Type-symmetry, hence cut-balance, ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_balance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub signal: GraphSignal,
    pub advertised: Advertised,
}

struct Draw<'a> {
    rng: ChaCha8Rng,
    spec: &'a GeneratorSpec,
}

impl Draw<'_> {
    fn weight(&mut self) -> f64 {
        let [lo, hi] = self.spec.weight_range;
        if lo == hi {
            lo
        } else {
            self.rng.random_range(lo..=hi)
        }
    }

    /// Random directed arcs `j -> i` with `i` outside `skip_rows`.
    fn extras(&mut self, g: &mut WeightedDigraph, skip_row: Option<usize>) {
        let n = self.spec.n;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.rng.random_bool(self.spec.density) {
                    let w = self.weight();
                    if Some(i) != skip_row {
                        g.set(i, j, w);
                    }
                }
            }
        }
    }

    fn permutation(&mut self, first: Option<usize>) -> Vec<usize> {
        let n = self.spec.n;
        let mut p: Vec<usize> = (0..n).filter(|&i| Some(i) != first).collect();
        p.shuffle(&mut self.rng);
        if let Some(f) = first {
            p.insert(0, f);
        }
        p
    }

    /// Parent of `p[k]` is a uniformly drawn earlier entry.
    fn tree(&mut self, p: &[usize]) -> Vec<(usize, usize)> {
        (1..p.len())
            .map(|k| (p[self.rng.random_range(0..k)], p[k]))
            .collect()
    }

    /// `a_ij = w`, `a_ji = w r` with `log_K r` uniform in `[-1, 1]`.
    fn symmetric_pair(&mut self, g: &mut WeightedDigraph, i: usize, j: usize, scale: f64) {
        let w = self.weight() * scale;
        let u: f64 = self.rng.random_range(-1.0..=1.0);
        g.set(i, j, w);
        g.set(j, i, w * self.spec.k.powf(u));
    }
}

/// Draws a graph signal from stream 1 of `seed`.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Generated> {
    spec.validate()?;
    let mut d = Draw {
        rng: rng_stream(seed, GRAPH_STREAM),
        spec,
    };
    let n = spec.n;
    let s = spec.subsegments;
    let sub = spec.period / s as f64;
    let count = spec.periods * s;
    let breakpoints: Vec<f64> = (0..=count).map(|k| k as f64 * sub).collect();
    let wmin = spec.weight_range[0];
    let window = WindowParams {
        period: spec.period,
        delta: wmin * sub,
    };
    let mut advertised = Advertised::default();

    let segments = match spec.kind {
        GeneratorKind::StaticRandom => {
            let mut g = WeightedDigraph::zeros(n);
            d.extras(&mut g, None);
            return Ok(Generated {
                signal: GraphSignal::constant(g),
                advertised,
            });
        }
        GeneratorKind::PeriodicSwitching => {
            let cycle: Vec<WeightedDigraph> = (0..s)
                .map(|_| {
                    let mut g = WeightedDigraph::zeros(n);
                    d.extras(&mut g, None);
                    g
                })
                .collect();
            // the held average keeps every window of one period at the same mass
            let mut avg = WeightedDigraph::zeros(n);
            for g in &cycle {
                avg.add_scaled(g, 1.0 / s as f64);
            }
            let mut segs: Vec<WeightedDigraph> = (0..count).map(|k| cycle[k % s].clone()).collect();
            segs.push(avg);
            segs
        }
        GeneratorKind::UscByConstruction | GeneratorKind::LeaderRooted => {
            let leader = (spec.kind == GeneratorKind::LeaderRooted).then_some(spec.leader);
            let order = d.permutation(leader);
            let skeleton: Vec<(usize, usize)> = match leader {
                Some(_) => d.tree(&order),
                None => (0..n).map(|k| (order[k], order[(k + 1) % n])).collect(),
            };
            let frame = |with_skeleton: bool, d: &mut Draw| {
                let mut g = WeightedDigraph::zeros(n);
                d.extras(&mut g, leader);
                if with_skeleton {
                    for &(from, to) in &skeleton {
                        let w = d.weight();
                        g.set(to, from, w);
                    }
                }
                g
            };
            let mut segs: Vec<WeightedDigraph> = (0..count).map(|k| frame(k % s == 0, &mut d)).collect();
            segs.push(frame(true, &mut d));
            match leader {
                Some(root) => {
                    advertised.uqsc = Some(window);
                    advertised.root = Some(root);
                }
                None => advertised.usc = Some(window),
            }
            segs
        }
        GeneratorKind::CutBalancedRandom => {
            let scale = |t: f64| 1.0 / (1.0 + spec.decay * t);
            let frame = |t: f64, with_tree: bool, d: &mut Draw| {
                let mut g = WeightedDigraph::zeros(n);
                for i in 0..n {
                    for j in i + 1..n {
                        if d.rng.random_bool(spec.density) {
                            d.symmetric_pair(&mut g, i, j, scale(t));
                        }
                    }
                }
                if with_tree {
                    let order = d.permutation(None);
                    for (a, b) in d.tree(&order) {
                        d.symmetric_pair(&mut g, a, b, scale(t));
                    }
                }
                g
            };
            let mut segs = Vec::with_capacity(count + 1);
            for p in 0..spec.periods {
                let tree_at = d.rng.random_range(0..s);
                for k in 0..s {
                    segs.push(frame(breakpoints[p * s + k], k == tree_at, &mut d));
                }
            }
            segs.push(frame(breakpoints[count], true, &mut d));
            advertised.cut_balance = Some(spec.k);
            segs
        }
    };
    Ok(Generated {
        signal: GraphSignal::new(breakpoints, segments)?,
        advertised,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        certify_cut_balance_signal, certify_type_symmetry_signal, certify_uqsc, certify_usc,
    };

    #[test]
    fn usc_by_construction_certifies() {
        for seed in 0..20 {
            let mut spec = GeneratorSpec::new(GeneratorKind::UscByConstruction, 5);
            spec.periods = 6;
            let g = generate(&spec, seed).unwrap();
            let w = g.advertised.usc.unwrap();
            assert_eq!(w.period, 4.0);
            let horizon = g.signal.last_breakpoint() + 2.0 * w.period;
            assert!(certify_usc(&g.signal, w.period, w.delta, horizon).unwrap().holds(), "seed {seed}");
        }
    }

    #[test]
    fn leader_rooted_certifies() {
        for seed in 0..20 {
            let mut spec = GeneratorSpec::new(GeneratorKind::LeaderRooted, 6);
            spec.leader = 2;
            spec.periods = 5;
            let g = generate(&spec, seed).unwrap();
            let w = g.advertised.uqsc.unwrap();
            assert!(g.signal.segments().iter().all(|s| s.row(2).iter().all(|&a| a == 0.0)));
            let horizon = g.signal.last_breakpoint() + w.period;
            assert!(certify_uqsc(&g.signal, w.period, w.delta, horizon).unwrap().holds());
        }
    }

    #[test]
    fn cut_balanced_certifies() {
        for seed in 0..10 {
            let mut spec = GeneratorSpec::new(GeneratorKind::CutBalancedRandom, 6);
            spec.k = 3.0;
            spec.decay = 0.1;
            spec.periods = 3;
            let g = generate(&spec, seed).unwrap();
            let k = g.advertised.cut_balance.unwrap();
            assert!(certify_type_symmetry_signal(&g.signal, k).unwrap().holds());
            assert!(certify_cut_balance_signal(&g.signal, k).unwrap().holds());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GeneratorSpec::new(GeneratorKind::PeriodicSwitching, 4);
        assert_eq!(generate(&spec, 7).unwrap(), generate(&spec, 7).unwrap());
        assert_ne!(generate(&spec, 7).unwrap().signal, generate(&spec, 8).unwrap().signal);
    }

    #[test]
    fn infeasible_specs() {
        let mut spec = GeneratorSpec::new(GeneratorKind::UscByConstruction, 5);
        spec.density = 0.0;
        assert!(matches!(generate(&spec, 0), Err(Error::InvalidParameters(_))));
        let mut spec = GeneratorSpec::new(GeneratorKind::StaticRandom, 1);
        assert!(generate(&spec, 0).is_err());
        spec.n = 3;
        spec.weight_range = [0.0, 1.0];
        assert!(generate(&spec, 0).is_err());
        let mut spec = GeneratorSpec::new(GeneratorKind::LeaderRooted, 3);
        spec.decay = 1.0;
        assert!(generate(&spec, 0).is_err());
    }

    #[test]
    fn periodic_switching_holds_average() {
        let spec = GeneratorSpec::new(GeneratorKind::PeriodicSwitching, 4);
        let g = generate(&spec, 3).unwrap();
        let segs = g.signal.segments();
        assert_eq!(segs.len(), spec.periods * spec.subsegments + 1);
        let last = segs.last().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mean = (0..4).map(|k| segs[k].weight(i, j)).sum::<f64>() / 4.0;
                assert!((last.weight(i, j) - mean).abs() < 1e-15);
            }
        }
    }
}
