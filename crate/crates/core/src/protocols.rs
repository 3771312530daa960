//! Right-hand sides of the coordination protocols and the scalar lifts that
//! turn each of them into a solution of the Laplacian inequality.


use serde::{Deserialize, Serialize};

use crate::convex::{dot, ConvexSet};
use crate::dynamics::{Lift, ResidualOptions, VectorField};
use crate::error::{Error, Result};
use crate::graph::{laplacian_flow_into, GraphSignal, SignedSignal, WeightedDigraph};
use crate::tolerance::Tolerances;

/// Unit complex number stored as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Phase {
    pub re: f64,
    pub im: f64,
}

impl From<[f64; 2]> for Phase {
    fn from([re, im]: [f64; 2]) -> Self {
        Self { re, im }
    }
}

impl From<Phase> for [f64; 2] {
    fn from(p: Phase) -> Self {
        [p.re, p.im]
    }
}

impl Phase {
    pub const ONE: Phase = Phase { re: 1.0, im: 0.0 };

    pub fn from_angle(theta: f64) -> Self {
        Self {
            re: theta.cos(),
            im: theta.sin(),
        }
    }

    /// `k`-th of the `n` roots of unity.
    pub fn root_of_unity(k: usize, n: usize) -> Self {
        Self::from_angle(std::f64::consts::TAU * k as f64 / n as f64)
    }

    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn mul(self, o: Phase) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    pub fn modulus(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Rotates a planar point.
    #[inline]
    pub fn rotate(self, v: &[f64]) -> [f64; 2] {
        [self.re * v[0] - self.im * v[1], self.re * v[1] + self.im * v[0]]
    }
}

/// How the anchor points `omega_i` of informed agents are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorRule {
    /// `points[k][i]` is agent `i`'s anchor on segment `k`; one segment is
    /// broadcast to all.
    Fixed { points: Vec<Vec<Vec<f64>>> },
    /// `omega_i = P(xi_i)`.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationParams {
    pub target: ConvexSet,
    /// `gains[k][i] = a_i0` on segment `k` of the graph signal; one segment is
    /// broadcast to all.
    pub gains: Vec<Vec<f64>>,
    pub anchors: AnchorRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainmentParams {
    pub leader_positions: Vec<Vec<f64>>,
    /// `leader_gains[k][i][l]`: weight of follower `i` on leader `l` during
    /// segment `k`; one segment is broadcast to all.
    pub leader_gains: Vec<Vec<Vec<f64>>>,
}

/// Unimodular weights, given directly or through consistency generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    /// Full matrix `w_ij`.
    Matrix(Vec<Vec<Phase>>),
    /// `w_ij = conj(p_i) p_j`.
    Generators(Vec<Phase>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurroundingParams {
    pub target: ConvexSet,
    pub weights: WeightSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltafiniParams {
    pub signs: SignedSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Consensus,
    Aggregation,
    Containment,
    OptimalConsensus,
    Surrounding,
    Altafini,
    Leader,
}

#[derive(Debug, Clone)]
enum Variant {
    Consensus,
    Aggregation {
        target: ConvexSet,
        /// Per segment, per agent.
        gains: Vec<Vec<f64>>,
        /// `None` for the projection rule; zero where the gain vanishes.
        anchors: Option<Vec<Vec<Vec<f64>>>>,
    },
    Containment {
        leaders: Vec<Vec<f64>>,
        gains: Vec<Vec<Vec<f64>>>,
    },
    OptimalConsensus {
        sets: Vec<ConvexSet>,
    },
    Surrounding {
        target: ConvexSet,
        /// Row-major `n x n`.
        weights: Vec<Phase>,
        generators: Option<Vec<Phase>>,
    },
    Altafini {
        signs: SignedSignal,
    },
    Leader {
        leader: usize,
    },
}

/// Evaluator for one protocol over a graph signal.
#[derive(Debug, Clone)]
pub struct ProtocolField {
    graph: GraphSignal,
    dim: usize,
    rate_bound: f64,
    variant: Variant,
    tol: Tolerances,
}

fn broadcast<T>(per_segment: &[T], k: usize) -> &T {
    &per_segment[if per_segment.len() == 1 { 0 } else { k }]
}

fn check_segments<T>(what: &str, v: &[T], segments: usize) -> Result<()> {
    if v.len() != 1 && v.len() != segments {
        return Err(Error::InvalidParameters(format!(
            "{what}: expected 1 or {segments} segments, got {}",
            v.len()
        )));
    }
    Ok(())
}

fn field(graph: GraphSignal, dim: usize, variant: Variant) -> ProtocolField {
    let rate_bound = graph.weight_bound();
    ProtocolField {
        graph,
        dim,
        rate_bound,
        variant,
        tol: Tolerances::default(),
    }
}

/// `xi' = -L(t) xi`.
pub fn consensus_field(s: GraphSignal, dim: usize) -> ProtocolField {
    field(s, dim, Variant::Consensus)
}

/// `xi_i' = sum_j a_ij (xi_j - xi_i) + a_i0 (omega_i - xi_i)`.
pub fn aggregation_field(s: GraphSignal, p: AggregationParams) -> Result<ProtocolField> {
    p.target.validate()?;
    let (n, d, segs) = (s.n(), p.target.dim(), s.segment_count());
    check_segments("gains", &p.gains, segs)?;
    for g in &p.gains {
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.len(),
            });
        }
        if g.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameters("gains must be finite and nonnegative".into()));
        }
    }
    let tol = Tolerances::default();
    let anchors = match p.anchors {
        AnchorRule::Projection => None,
        AnchorRule::Fixed { points } => {
            check_segments("anchors", &points, segs)?;
            let mut cleaned = Vec::with_capacity(segs);
            for k in 0..segs {
                let pts = broadcast(&points, k);
                let gains = broadcast(&p.gains, k);
                if pts.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: pts.len(),
                    });
                }
                let mut seg = Vec::with_capacity(n);
                for (i, w) in pts.iter().enumerate() {
                    if gains[i] > 0.0 {
                        let dist = p.target.project_with(w, &tol)?.distance;
                        if dist > tol.feas {
                            return Err(Error::Infeasible(dist));
                        }
                        seg.push(w.clone());
                    } else {
                        seg.push(vec![0.0; d]);
                    }
                }
                cleaned.push(seg);
            }
            Some(cleaned)
        }
    };
    let gain_bound = p.gains.iter().flatten().fold(0.0, |m: f64, &g| m.max(g));
    let mut f = field(
        s,
        d,
        Variant::Aggregation {
            target: p.target,
            gains: p.gains,
            anchors,
        },
    );
    f.rate_bound = f.rate_bound.max(gain_bound);
    Ok(f)
}

/// Extended signal on `n + 1` nodes: node 0 stands for the target set, with a
/// zero row and column entries `a_i0`.
pub fn extend_with_virtual_agent(s: &GraphSignal, gains: &[Vec<f64>]) -> Result<GraphSignal> {
    let n = s.n();
    check_segments("gains", gains, s.segment_count())?;
    let segments = s
        .segments()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let gk = broadcast(gains, k);
            if gk.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: gk.len(),
                });
            }
            let mut w = vec![0.0; (n + 1) * (n + 1)];
            for i in 0..n {
                w[(i + 1) * (n + 1)] = gk[i];
                w[(i + 1) * (n + 1) + 1..(i + 2) * (n + 1)].copy_from_slice(g.row(i));
            }
            WeightedDigraph::new(n + 1, w)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphSignal::new(s.breakpoints().to_vec(), segments)
}

/// Follower dynamics pulled by `q` fixed leaders.
pub fn containment_field(s: GraphSignal, p: ContainmentParams) -> Result<ProtocolField> {
    let (n, q) = (s.n(), p.leader_positions.len());
    if q == 0 {
        return Err(Error::InvalidParameters("containment needs at least one leader".into()));
    }
    let d = p.leader_positions[0].len();
    ConvexSet::polytope(p.leader_positions.clone()).validate()?;
    check_segments("leader_gains", &p.leader_gains, s.segment_count())?;
    for seg in &p.leader_gains {
        if seg.len() != n || seg.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidParameters(format!("leader gains must be {n} x {q}")));
        }
        if seg.iter().flatten().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameters("leader gains must be finite and nonnegative".into()));
        }
    }
    let gain_bound = p
        .leader_gains
        .iter()
        .flat_map(|seg| seg.iter().map(|r| r.iter().sum::<f64>()))
        .fold(0.0, f64::max);
    let mut f = field(
        s,
        d,
        Variant::Containment {
            leaders: p.leader_positions,
            gains: p.leader_gains,
        },
    );
    f.rate_bound = f.rate_bound.max(gain_bound);
    Ok(f)
}

/// Equivalent aggregation data: target `conv(leaders)`, gains
/// `a_i0 = sum_l a_il` and anchors `omega_i = sum_l (a_il / a_i0) xi_l`.
pub fn containment_reduction(p: &ContainmentParams) -> AggregationParams {
    let d = p.leader_positions.first().map_or(0, Vec::len);
    let mut gains = Vec::with_capacity(p.leader_gains.len());
    let mut points = Vec::with_capacity(p.leader_gains.len());
    for seg in &p.leader_gains {
        let mut g = Vec::with_capacity(seg.len());
        let mut pts = Vec::with_capacity(seg.len());
        for row in seg {
            let total: f64 = row.iter().sum();
            let mut w = vec![0.0; d];
            if total > 0.0 {
                for (a, leader) in row.iter().zip(&p.leader_positions) {
                    for c in 0..d {
                        w[c] += a / total * leader[c];
                    }
                }
            }
            g.push(total);
            pts.push(w);
        }
        gains.push(g);
        points.push(pts);
    }
    AggregationParams {
        target: ConvexSet::polytope(p.leader_positions.clone()),
        gains,
        anchors: AnchorRule::Fixed { points },
    }
}

/// `xi_i' = sum_j a_ij (xi_j - xi_i) + P_i(xi_i) - xi_i`.
pub fn optimal_consensus_field(s: GraphSignal, sets: Vec<ConvexSet>) -> Result<ProtocolField> {
    if sets.len() != s.n() || sets.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: sets.len(),
        });
    }
    let d = sets[0].dim();
    for set in &sets {
        set.validate()?;
        if set.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: set.dim(),
            });
        }
    }
    ConvexSet::Intersection { sets: sets.clone() }
        .probe_nonempty(&Tolerances::default())?;
    let mut f = field(s, d, Variant::OptimalConsensus { sets });
    f.rate_bound = f.rate_bound.max(1.0);
    Ok(f)
}

/// Planar `xi_i' = sum_j a_ij (w_ij r_j - r_i)` with `r = xi - P(xi)`.
pub fn surrounding_field(s: GraphSignal, p: SurroundingParams) -> Result<ProtocolField> {
    let n = s.n();
    p.target.validate()?;
    if p.target.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: p.target.dim(),
        });
    }
    let (weights, generators) = match p.weights {
        WeightSpec::Matrix(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidParameters(format!("weight matrix must be {n} x {n}")));
            }
            (rows.concat(), None)
        }
        WeightSpec::Generators(ps) => {
            if ps.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: ps.len(),
                });
            }
            let w = (0..n * n).map(|k| ps[k / n].conj().mul(ps[k % n])).collect();
            (w, Some(ps))
        }
    };
    let unimodular = |w: &Phase| (w.modulus() - 1.0).abs() <= 1e-12;
    if !weights.iter().all(unimodular) || !generators.iter().flatten().all(unimodular) {
        return Err(Error::InvalidParameters("weights must have unit modulus".into()));
    }
    Ok(field(
        s,
        2,
        Variant::Surrounding {
            target: p.target,
            weights,
            generators,
        },
    ))
}

/// `xi_i' = sum_j (b_ij xi_j - |b_ij| xi_i)` on scalar opinions.
pub fn altafini_field(p: AltafiniParams) -> ProtocolField {
    field(p.signs.magnitudes().clone(), 1, Variant::Altafini { signs: p.signs })
}

/// Consensus over a signal whose `leader` row is identically zero.
pub fn leader_field(s: GraphSignal, leader: usize, dim: usize) -> Result<ProtocolField> {
    if leader >= s.n() {
        return Err(Error::InvalidParameters(format!("leader {leader} out of range")));
    }
    if s.segments().iter().any(|g| g.row(leader).iter().any(|&a| a != 0.0)) {
        return Err(Error::Precondition(format!("row {leader} must be zero on every segment")));
    }
    Ok(field(s, dim, Variant::Leader { leader }))
}

impl ProtocolField {
    pub fn kind(&self) -> ProtocolKind {
        match self.variant {
            Variant::Consensus => ProtocolKind::Consensus,
            Variant::Aggregation { .. } => ProtocolKind::Aggregation,
            Variant::Containment { .. } => ProtocolKind::Containment,
            Variant::OptimalConsensus { .. } => ProtocolKind::OptimalConsensus,
            Variant::Surrounding { .. } => ProtocolKind::Surrounding,
            Variant::Altafini { .. } => ProtocolKind::Altafini,
            Variant::Leader { .. } => ProtocolKind::Leader,
        }
    }

    pub fn graph(&self) -> &GraphSignal {
        &self.graph
    }

    /// Set whose squared distance is the natural lift, if any.
    pub fn target(&self) -> Option<ConvexSet> {
        match &self.variant {
            Variant::Aggregation { target, .. } | Variant::Surrounding { target, .. } => Some(target.clone()),
            Variant::Containment { leaders, .. } => Some(ConvexSet::polytope(leaders.clone())),
            Variant::OptimalConsensus { sets } => Some(if sets.iter().all(|s| s == &sets[0]) {
                sets[0].clone()
            } else {
                ConvexSet::Intersection { sets: sets.clone() }
            }),
            _ => None,
        }
    }

    pub fn leader(&self) -> Option<usize> {
        match self.variant {
            Variant::Leader { leader } => Some(leader),
            _ => None,
        }
    }

    /// Consistency generators of a surrounding field.
    pub fn generators(&self) -> Option<&[Phase]> {
        match &self.variant {
            Variant::Surrounding { generators, .. } => generators.as_deref(),
            _ => None,
        }
    }

    /// Scalar map under which trajectories solve the Laplacian inequality.
    pub fn natural_lift(&self) -> Lift {
        match &self.variant {
            Variant::Altafini { .. } => Lift::Modulus,
            _ => match self.target() {
                Some(set) => Lift::HalfSquaredDistance(set),
                None => Lift::Identity,
            },
        }
    }

    /// Graph signal of the lifted inequality; aggregation-type protocols use
    /// the extended signal with the virtual agent in front.
    pub fn lifted_signal(&self) -> Result<(GraphSignal, ResidualOptions)> {
        let extended = |gains: &[Vec<f64>]| -> Result<(GraphSignal, ResidualOptions)> {
            Ok((
                extend_with_virtual_agent(&self.graph, gains)?,
                ResidualOptions {
                    virtual_agent: true,
                    ..Default::default()
                },
            ))
        };
        match &self.variant {
            Variant::Aggregation { gains, .. } => extended(gains),
            Variant::Containment { gains, .. } => {
                let totals: Vec<Vec<f64>> = gains
                    .iter()
                    .map(|seg| seg.iter().map(|r| r.iter().sum()).collect())
                    .collect();
                extended(&totals)
            }
            _ => Ok((self.graph.clone(), ResidualOptions::default())),
        }
    }
}

impl VectorField for ProtocolField {
    fn agents(&self) -> usize {
        self.graph.n()
    }

    fn state_dim(&self) -> usize {
        self.dim
    }

    fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    fn breakpoints(&self) -> &[f64] {
        self.graph.breakpoints()
    }

    fn eval(&self, _t: f64, seg: usize, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let g = &self.graph.segments()[seg];
        match &self.variant {
            Variant::Consensus | Variant::Leader { .. } => laplacian_flow_into(g, x, d, out),
            Variant::Aggregation {
                target,
                gains,
                anchors,
            } => {
                laplacian_flow_into(g, x, d, out);
                let gains = broadcast(gains, seg);
                let mut p = vec![0.0; d];
                for (i, &a) in gains.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let xi = &x[i * d..(i + 1) * d];
                    let w: &[f64] = match anchors {
                        Some(pts) => &broadcast(pts, seg)[i],
                        None => {
                            target.project_into(xi, &mut p, &self.tol);
                            &p
                        }
                    };
                    for c in 0..d {
                        out[i * d + c] += a * (w[c] - xi[c]);
                    }
                }
            }
            Variant::Containment { leaders, gains } => {
                laplacian_flow_into(g, x, d, out);
                for (i, row) in broadcast(gains, seg).iter().enumerate() {
                    for (a, leader) in row.iter().zip(leaders) {
                        if *a > 0.0 {
                            for c in 0..d {
                                out[i * d + c] += a * (leader[c] - x[i * d + c]);
                            }
                        }
                    }
                }
            }
            Variant::OptimalConsensus { sets } => {
                laplacian_flow_into(g, x, d, out);
                let mut p = vec![0.0; d];
                for (i, set) in sets.iter().enumerate() {
                    let xi = &x[i * d..(i + 1) * d];
                    set.project_into(xi, &mut p, &self.tol);
                    for c in 0..d {
                        out[i * d + c] += p[c] - xi[c];
                    }
                }
            }
            Variant::Surrounding { target, weights, .. } => {
                let n = g.n();
                let mut r = vec![0.0; 2 * n];
                let mut p = [0.0; 2];
                for i in 0..n {
                    target.project_into(&x[2 * i..2 * i + 2], &mut p, &self.tol);
                    r[2 * i] = x[2 * i] - p[0];
                    r[2 * i + 1] = x[2 * i + 1] - p[1];
                }
                for i in 0..n {
                    let (mut u, mut v) = (0.0, 0.0);
                    for (j, &a) in g.row(i).iter().enumerate() {
                        if a > 0.0 {
                            let wr = weights[i * n + j].rotate(&r[2 * j..2 * j + 2]);
                            u += a * (wr[0] - r[2 * i]);
                            v += a * (wr[1] - r[2 * i + 1]);
                        }
                    }
                    out[2 * i] = u;
                    out[2 * i + 1] = v;
                }
            }
            Variant::Altafini { signs } => {
                let n = g.n();
                let b = signs.segment(seg);
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let bij = b[i * n + j];
                        if bij > 0.0 {
                            acc += bij * (x[j] - x[i]);
                        } else if bij < 0.0 {
                            acc += -bij * (-x[j] - x[i]);
                        }
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

/// `|r|^2 / 2` for the residual `r = xi - P(xi)`.
pub fn half_squared_distance(set: &ConvexSet, xi: &[f64]) -> f64 {
    let mut p = vec![0.0; xi.len()];
    set.project_into(xi, &mut p, &Tolerances::default());
    let r: Vec<f64> = xi.iter().zip(&p).map(|(a, b)| a - b).collect();
    0.5 * dot(&r, &r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, residual_trace_with};
    use crate::graph::certify_uqsc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(rows: &[&[f64]]) -> WeightedDigraph {
        WeightedDigraph::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ring(n: usize, w: f64) -> GraphSignal {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + (i + 1) % n] = w;
        }
        GraphSignal::constant(WeightedDigraph::new(n, m).unwrap())
    }

    fn eval(f: &ProtocolField, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        f.eval(0.0, 0, x, &mut out);
        out
    }

    #[test]
    fn consensus_examples() {
        let pair = GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let f = consensus_field(pair, 1);
        assert_eq!(eval(&f, &[1.0, 0.0]), vec![-1.0, 1.0]);
        assert_eq!(eval(&f, &[0.7, 0.7]), vec![0.0, 0.0]);
        let zero = consensus_field(GraphSignal::constant(WeightedDigraph::zeros(3)), 2);
        assert!(eval(&zero, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregation_examples() {
        let single = GraphSignal::constant(WeightedDigraph::zeros(1));
        let p = AggregationParams {
            target: ConvexSet::singleton(vec![0.0, 0.0]),
            gains: vec![vec![1.0]],
            anchors: AnchorRule::Fixed {
                points: vec![vec![vec![0.0, 0.0]]],
            },
        };
        let f = aggregation_field(single, p).unwrap();
        assert_eq!(eval(&f, &[2.0, 0.0]), vec![-2.0, 0.0]);

        let pair = GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let p = AggregationParams {
            target: ConvexSet::ball(vec![0.0, 0.0], 1.0),
            gains: vec![vec![1.0, 0.0]],
            anchors: AnchorRule::Fixed {
                points: vec![vec![vec![0.5, 0.0], vec![9.0, 9.0]]],
            },
        };
        let f = aggregation_field(pair.clone(), p.clone()).unwrap();
        assert_eq!(eval(&f, &[0.5, 0.0, 0.5, 0.0]), vec![0.0; 4]);

        let mut bad = p;
        bad.gains = vec![vec![1.0, 1.0]];
        assert!(matches!(aggregation_field(pair, bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn virtual_agent_extension() {
        let s = GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let ext = extend_with_virtual_agent(&s, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(ext.n(), 3);
        let sc = crate::graph::scc_decomposition(&ext.segments()[0]);
        assert!(sc.components.contains(&vec![0]));
        assert!(ext.segments()[0].row(0).iter().all(|&a| a == 0.0));

        let one = GraphSignal::constant(WeightedDigraph::zeros(1));
        let ext = extend_with_virtual_agent(&one, &[vec![1.0]]).unwrap();
        assert_eq!(ext.segments()[0].as_slice(), &[0.0, 0.0, 1.0, 0.0]);

        // one informed agent at a time, rotating over a ring
        let n = 4;
        let bps: Vec<f64> = (0..8).map(f64::from).collect();
        let base = ring(n, 1.0).segments()[0].clone();
        let graph = GraphSignal::new(bps, vec![base; 8]).unwrap();
        let gains: Vec<Vec<f64>> = (0..8)
            .map(|k| (0..n).map(|i| if i == k % n { 1.0 } else { 0.0 }).collect())
            .collect();
        let ext = extend_with_virtual_agent(&graph, &gains).unwrap();
        assert!(certify_uqsc(&ext, 1.0, 0.5, 8.0).unwrap().holds());
        assert!(!crate::graph::certify_usc(&ext, 1.0, 0.5, 8.0).unwrap().holds());
    }

    #[test]
    fn containment_matches_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let graph = ring(n, 0.7);
        let params = ContainmentParams {
            leader_positions: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.5]],
            leader_gains: vec![(0..n)
                .map(|i| if i == 1 { vec![0.0; 3] } else { (0..3).map(|_| rng.random_range(0.0..2.0)).collect() })
                .collect()],
        };
        let direct = containment_field(graph.clone(), params.clone()).unwrap();
        let reduced_params = containment_reduction(&params);
        let AnchorRule::Fixed { points } = &reduced_params.anchors else { panic!() };
        let hull = ConvexSet::polytope(params.leader_positions.clone());
        for (i, w) in points[0].iter().enumerate() {
            if reduced_params.gains[0][i] > 0.0 {
                assert!(hull.distance(w).unwrap() < 1e-12);
            } else {
                assert_eq!(w, &vec![0.0, 0.0]);
            }
        }
        let reduced = aggregation_field(graph, reduced_params).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (a, b) = (eval(&direct, &x), eval(&reduced, &x));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-13 * (1.0 + u.abs()), "{u} vs {v}");
            }
        }

        let one_leader = ContainmentParams {
            leader_positions: vec![vec![1.0, -1.0]],
            leader_gains: vec![vec![vec![1.0]; n]],
        };
        let f = containment_field(ring(n, 1.0), one_leader).unwrap();
        assert_eq!(eval(&f, &[1.0, -1.0].repeat(n)), vec![0.0; 2 * n]);
    }

    #[test]
    fn optimal_consensus_examples() {
        let single = GraphSignal::constant(WeightedDigraph::zeros(1));
        let f = optimal_consensus_field(single, vec![ConvexSet::ball(vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(eval(&f, &[2.0, 0.0]), vec![-1.0, 0.0]);

        let sets = vec![
            ConvexSet::ball(vec![0.0, 0.0], 1.0),
            ConvexSet::ball(vec![1.0, 0.0], 1.0),
        ];
        let pair = GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let f = optimal_consensus_field(pair.clone(), sets).unwrap();
        assert_eq!(eval(&f, &[0.5, 0.2, 0.5, 0.2]), vec![0.0; 4]);

        let apart = vec![
            ConvexSet::ball(vec![0.0, 0.0], 1.0),
            ConvexSet::ball(vec![5.0, 0.0], 1.0),
        ];
        assert!(matches!(
            optimal_consensus_field(pair, apart),
            Err(Error::EmptyIntersection(_))
        ));
    }

    #[test]
    fn surrounding_examples() {
        let n = 4;
        let target = ConvexSet::ball(vec![0.0, 0.0], 1.0);
        let ps: Vec<Phase> = (0..n).map(|k| Phase::root_of_unity(k, n)).collect();
        let f = surrounding_field(
            ring(n, 1.0),
            SurroundingParams {
                target: target.clone(),
                weights: WeightSpec::Generators(ps),
            },
        )
        .unwrap();
        let inside = [0.1, 0.2, -0.3, 0.0, 0.0, 0.9, 0.5, -0.5];
        assert_eq!(eval(&f, &inside), vec![0.0; 8]);

        let plain = surrounding_field(
            ring(n, 1.0),
            SurroundingParams {
                target: ConvexSet::singleton(vec![0.0, 0.0]),
                weights: WeightSpec::Generators(vec![Phase::ONE; n]),
            },
        )
        .unwrap();
        let x = [1.0, 2.0, -1.0, 0.5, 3.0, -2.0, 0.0, 1.0];
        assert_eq!(eval(&plain, &x), eval(&consensus_field(ring(n, 1.0), 2), &x));

        let bad = SurroundingParams {
            target,
            weights: WeightSpec::Matrix(vec![vec![Phase { re: 1.1, im: 0.0 }; n]; n]),
        };
        assert!(surrounding_field(ring(n, 1.0), bad).is_err());
    }

    #[test]
    fn surrounding_gauge_equivalence() {
        let n = 4;
        let ps: Vec<Phase> = (0..n).map(|k| Phase::root_of_unity(k, n)).collect();
        let s = ring(n, 1.0);
        let f = surrounding_field(
            s.clone(),
            SurroundingParams {
                target: ConvexSet::singleton(vec![0.0, 0.0]),
                weights: WeightSpec::Generators(ps.clone()),
            },
        )
        .unwrap();
        let x0 = [1.0, 0.0, 0.0, 2.0, -1.0, -1.0, 0.5, 0.3];
        let gauge = |x: &[f64]| -> Vec<f64> {
            (0..n).flat_map(|i| ps[i].rotate(&x[2 * i..2 * i + 2])).collect()
        };
        let a = integrate(&f, &x0, 5.0, 1e-3).unwrap();
        let b = integrate(&consensus_field(s, 2), &gauge(&x0), 5.0, 1e-3).unwrap();
        for k in (0..a.len()).step_by(500) {
            let za = gauge(a.state(k));
            for (u, v) in za.iter().zip(b.state(k)) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    fn signed(b: &[f64], n: usize) -> SignedSignal {
        SignedSignal::new(n, vec![0.0], vec![b.to_vec()]).unwrap()
    }

    #[test]
    fn altafini_examples() {
        let f = altafini_field(AltafiniParams {
            signs: signed(&[0.0, -1.0, -1.0, 0.0], 2),
        });
        assert_eq!(eval(&f, &[1.0, -1.0]), vec![0.0, 0.0]);

        let (a, b) = (0.8, 0.2);
        let traj = integrate(&f, &[a, b], 20.0, 1e-3).unwrap();
        let x = traj.final_state();
        assert!((x[0] - (a - b) / 2.0).abs() < 1e-6);
        assert!((x[1] + (a - b) / 2.0).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(0.5) {
                    w[i * n + j] = rng.random_range(0.0..2.0);
                }
            }
        }
        let alt = altafini_field(AltafiniParams { signs: signed(&w, n) });
        let cons = consensus_field(GraphSignal::constant(WeightedDigraph::new(n, w).unwrap()), 1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (u, v) = (eval(&alt, &x), eval(&cons, &x));
            assert!(u.iter().zip(&v).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn leader_examples() {
        let s = GraphSignal::constant(g(&[&[0.0, 0.0], &[1.0, 0.0]]));
        let f = leader_field(s, 0, 1).unwrap();
        let traj = integrate(&f, &[1.0, 3.0], 5.0, 1e-3).unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.state(k)[0], 1.0);
            let t = traj.times()[k];
            assert!((traj.state(k)[1] - (1.0 + 2.0 * (-t).exp())).abs() < 1e-10);
            assert!(traj.state(k)[1] >= 1.0);
        }
        let bad = GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert!(matches!(leader_field(bad, 0, 1), Err(Error::Precondition(_))));
    }

    fn check_lift(f: &ProtocolField, x0: &[f64], t_end: f64) {
        let traj = integrate(f, x0, t_end, 1e-3).unwrap();
        let (signal, opts) = f.lifted_signal().unwrap();
        let res = residual_trace_with(&traj, &signal, &f.natural_lift(), &opts).unwrap();
        assert!(res.min() >= -Tolerances::default().res, "min residual {}", res.min());
    }

    #[test]
    fn lifted_inequalities_hold() {
        let n = 4;
        let s = ring(n, 1.0);
        let x0 = [3.0, 0.0, -2.0, 1.0, 0.5, -3.0, 4.0, 4.0];
        let agg = aggregation_field(
            s.clone(),
            AggregationParams {
                target: ConvexSet::ball(vec![0.0, 0.0], 1.0),
                gains: vec![vec![1.0, 0.0, 0.0, 0.5]],
                anchors: AnchorRule::Fixed {
                    points: vec![vec![vec![0.6, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0, -1.0]]],
                },
            },
        )
        .unwrap();
        check_lift(&agg, &x0, 10.0);

        let proj = aggregation_field(
            s.clone(),
            AggregationParams {
                target: ConvexSet::Box {
                    lower: vec![-1.0, -1.0],
                    upper: vec![1.0, 1.0],
                },
                gains: vec![vec![0.3; n]],
                anchors: AnchorRule::Projection,
            },
        )
        .unwrap();
        check_lift(&proj, &x0, 10.0);

        let opt = optimal_consensus_field(
            s.clone(),
            vec![
                ConvexSet::ball(vec![0.0, 0.0], 1.5),
                ConvexSet::ball(vec![1.0, 0.0], 1.5),
                ConvexSet::ball(vec![0.5, 1.0], 1.5),
                ConvexSet::ball(vec![0.5, 0.0], 2.0),
            ],
        )
        .unwrap();
        check_lift(&opt, &x0, 5.0);

        let sur = surrounding_field(
            s,
            SurroundingParams {
                target: ConvexSet::ball(vec![0.0, 0.0], 0.5),
                weights: WeightSpec::Generators((0..n).map(|k| Phase::root_of_unity(k, n)).collect()),
            },
        )
        .unwrap();
        check_lift(&sur, &x0, 10.0);

        // mixed signs on a ring, with zero crossings of several agents
        let b = [0.0, 1.0, 0.0, -1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 1.0, 0.0, -1.0, 0.0];
        let alt = altafini_field(AltafiniParams { signs: signed(&b, n) });
        check_lift(&alt, &x0[..n], 10.0);
    }
}
