//! Closed convex target sets and their Euclidean projections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

const POLYTOPE_MAX_ITER: usize = 10_000;
const DYKSTRA_MAX_ITER: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : normal . x <= offset}` with a unit normal.
    Halfspace { normal: Vec<f64>, offset: f64 },
    Singleton { point: Vec<f64> },
    /// Convex hull of the vertices.
    Polytope { vertices: Vec<Vec<f64>> },
    Intersection { sets: Vec<ConvexSet> },
}

/// Nearest point of a set together with the residual `x - P(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub projection: Vec<f64>,
    pub residual: Vec<f64>,
    pub distance: f64,
}

impl ProjectionResult {
    fn new(x: &[f64], projection: Vec<f64>) -> Self {
        let residual: Vec<f64> = x.iter().zip(&projection).map(|(a, b)| a - b).collect();
        let distance = norm(&residual);
        Self {
            projection,
            residual,
            distance,
        }
    }
}

/// Polytope projection with its convex weights over the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeProjection {
    pub result: ProjectionResult,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ConvexSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConvexSet::Ball { center, radius }
    }

    pub fn singleton(point: Vec<f64>) -> Self {
        ConvexSet::Singleton { point }
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Self {
        ConvexSet::Polytope { vertices }
    }

    /// `{x : normal . x <= offset}`, rescaling to a unit normal.
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let len = norm(&normal);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::InvalidSet("halfspace normal must be nonzero".into()));
        }
        Ok(ConvexSet::Halfspace {
            normal: normal.iter().map(|v| v / len).collect(),
            offset: offset / len,
        })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Halfspace { normal, .. } => normal.len(),
            ConvexSet::Singleton { point } => point.len(),
            ConvexSet::Polytope { vertices } => vertices.first().map_or(0, Vec::len),
            ConvexSet::Intersection { sets } => sets.first().map_or(0, ConvexSet::dim),
        }
    }

    /// Structural checks; intersections are additionally probed for
    /// nonemptiness with Dykstra's method.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if let ConvexSet::Intersection { .. } = self {
            self.probe_nonempty(&Tolerances::default())?;
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSet(m.into()));
        let d = self.dim();
        if d == 0 {
            return bad("ambient dimension must be positive");
        }
        match self {
            ConvexSet::Ball { center, radius } => {
                if !finite(center) || !(*radius > 0.0) || !radius.is_finite() {
                    return bad("ball needs a finite center and a positive radius");
                }
            }
            ConvexSet::Box { lower, upper } => {
                if upper.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: upper.len(),
                    });
                }
                if !finite(lower) || !finite(upper) || lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return bad("box bounds must be finite with lower <= upper");
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                if !finite(normal) || !offset.is_finite() || (norm(normal) - 1.0).abs() > 1e-12 {
                    return bad("halfspace normal must be a finite unit vector");
                }
            }
            ConvexSet::Singleton { point } => {
                if !finite(point) {
                    return bad("singleton point must be finite");
                }
            }
            ConvexSet::Polytope { vertices } => {
                for v in vertices {
                    if v.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: v.len(),
                        });
                    }
                    if !finite(v) {
                        return bad("polytope vertices must be finite");
                    }
                }
            }
            ConvexSet::Intersection { sets } => {
                for s in sets {
                    s.validate_shape()?;
                    if s.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: s.dim(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Projects the origin onto an intersection and checks the result lies in
    /// every member.
    pub fn probe_nonempty(&self, tol: &Tolerances) -> Result<()> {
        let ConvexSet::Intersection { sets } = self else {
            return Ok(());
        };
        let origin = vec![0.0; self.dim()];
        let (p, converged, _) = dykstra(sets, &origin, tol);
        let worst = sets
            .iter()
            .map(|s| {
                let mut q = vec![0.0; p.len()];
                s.project_into(&p, &mut q, tol);
                dist(&p, &q)
            })
            .fold(0.0, f64::max);
        if !converged || worst > tol.feas {
            return Err(Error::EmptyIntersection(format!(
                "feasibility probe ended {worst:e} away from a member set"
            )));
        }
        Ok(())
    }

    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult> {
        self.project_with(x, &Tolerances::default())
    }

    /// Exact projection; iterative solvers report an error when their budget
    /// runs out before reaching `tol.proj`.
    pub fn project_with(&self, x: &[f64], tol: &Tolerances) -> Result<ProjectionResult> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match self {
            ConvexSet::Polytope { vertices } => {
                project_polytope(vertices, x, tol).map(|p| p.result)
            }
            ConvexSet::Intersection { sets } => {
                let (p, converged, moved) = dykstra(sets, x, tol);
                if !converged {
                    return Err(Error::IterationBudget {
                        solver: "dykstra",
                        iterations: DYKSTRA_MAX_ITER,
                        residual: moved,
                    });
                }
                Ok(ProjectionResult::new(x, p))
            }
            _ => {
                let mut p = vec![0.0; x.len()];
                self.project_into(x, &mut p, tol);
                Ok(ProjectionResult::new(x, p))
            }
        }
    }

    /// Writes the projection of `x` into `out`. Never fails: iterative
    /// solvers return their last iterate when the budget runs out.
    pub fn project_into(&self, x: &[f64], out: &mut [f64], tol: &Tolerances) {
        match self {
            ConvexSet::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let s = radius / r;
                    for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                        *o = ci + (xi - ci) * s;
                    }
                }
            }
            ConvexSet::Box { lower, upper } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = x[k].clamp(lower[k], upper[k]);
                }
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                out.copy_from_slice(x);
                if excess > 0.0 {
                    for (o, n) in out.iter_mut().zip(normal) {
                        *o -= excess * n;
                    }
                }
            }
            ConvexSet::Singleton { point } => out.copy_from_slice(point),
            ConvexSet::Polytope { vertices } => {
                let (p, _, _) = wolfe(vertices, x, tol);
                out.copy_from_slice(&p.0);
            }
            ConvexSet::Intersection { sets } => {
                let (p, _, _) = dykstra(sets, x, tol);
                out.copy_from_slice(&p);
            }
        }
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.project(x)?.distance)
    }
}

/// Projection onto `conv(vertices)`, returning the convex weights.
///
/// Wolfe's minimum-norm-point method on the translated vertices
/// `q_k = v_k - x`: an active set of affinely independent vertices whose
/// affine minimizer is found by a small KKT solve, grown by the vertex with
/// the most negative linear term and shrunk by line search whenever the
/// affine minimizer leaves the simplex.
pub fn project_polytope(
    vertices: &[Vec<f64>],
    x: &[f64],
    tol: &Tolerances,
) -> Result<PolytopeProjection> {
    if vertices.is_empty() {
        return Err(Error::InvalidSet("polytope needs at least one vertex".into()));
    }
    for v in vertices {
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: v.len(),
            });
        }
    }
    let ((p, weights), iterations, gap) = wolfe(vertices, x, tol);
    if iterations >= POLYTOPE_MAX_ITER {
        return Err(Error::IterationBudget {
            solver: "polytope",
            iterations,
            residual: gap,
        });
    }
    Ok(PolytopeProjection {
        result: ProjectionResult::new(x, p),
        weights,
        iterations,
    })
}

type WolfeOutput = ((Vec<f64>, Vec<f64>), usize, f64);

fn wolfe(vertices: &[Vec<f64>], x: &[f64], tol: &Tolerances) -> WolfeOutput {
    let m = vertices.len();
    let d = x.len();
    let q: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.iter().zip(x).map(|(a, b)| a - b).collect())
        .collect();
    // p = x + sum_k w_k q_k = sum_k w_k v_k
    let finish = |active: &[usize], lambda: &[f64]| {
        let mut w = vec![0.0; m];
        let mut p = x.to_vec();
        for (&k, &l) in active.iter().zip(lambda) {
            w[k] = l;
            for (pi, qk) in p.iter_mut().zip(&q[k]) {
                *pi += l * qk;
            }
        }
        (p, w)
    };
    if m == 1 {
        return (finish(&[0], &[1.0]), 0, 0.0);
    }
    let scale = q.iter().map(|v| dot(v, v)).fold(1.0, f64::max);
    let gap_tol = tol.proj * scale;

    let first = (0..m)
        .min_by(|&a, &b| dot(&q[a], &q[a]).total_cmp(&dot(&q[b], &q[b])))
        .unwrap();
    let mut active = vec![first];
    let mut lambda = vec![1.0];
    let mut y = q[first].clone();
    let mut iterations = 0;
    let mut gap = f64::INFINITY;

    while iterations < POLYTOPE_MAX_ITER {
        iterations += 1;
        let yy = dot(&y, &y);
        let j = (0..m)
            .min_by(|&a, &b| dot(&q[a], &y).total_cmp(&dot(&q[b], &y)))
            .unwrap();
        gap = yy - dot(&q[j], &y);
        if gap <= gap_tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            iterations += 1;
            let alpha = affine_minimizer(&q, &active);
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                break;
            }
            // step from lambda toward alpha until a weight hits zero
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= 1e-14 {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if active.len() <= 1 || iterations >= POLYTOPE_MAX_ITER {
                break;
            }
        }
        y = vec![0.0; d];
        for (&k, &l) in active.iter().zip(&lambda) {
            for (yi, qi) in y.iter_mut().zip(&q[k]) {
                *yi += l * qi;
            }
        }
    }
    (finish(&active, &lambda), iterations, gap)
}

/// Minimizes `|sum_k a_k q_k|` subject to `sum_k a_k = 1` over the active set.
fn affine_minimizer(q: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let s = active.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for (r, &a) in active.iter().enumerate() {
        for (c, &b) in active.iter().enumerate() {
            kkt[(r, c)] = dot(&q[a], &q[b]);
        }
        kkt[(r, s)] = 1.0;
        kkt[(s, r)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-14).ok())
        .unwrap_or_else(|| {
            let mut v = DVector::zeros(s + 1);
            v.rows_mut(0, s).fill(1.0 / s as f64);
            v
        });
    sol.rows(0, s).iter().copied().collect()
}

/// Dykstra's alternating projections. Returns the final iterate, whether it
/// converged, and the size of the last iterate move.
fn dykstra(sets: &[ConvexSet], x: &[f64], tol: &Tolerances) -> (Vec<f64>, bool, f64) {
    let d = x.len();
    if sets.is_empty() {
        return (x.to_vec(), true, 0.0);
    }
    let mut cur = x.to_vec();
    let mut incr = vec![vec![0.0; d]; sets.len()];
    let mut y = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut moved = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_ITER {
        let start = cur.clone();
        let mut incr_change = 0.0f64;
        for (set, p) in sets.iter().zip(incr.iter_mut()) {
            for k in 0..d {
                y[k] = cur[k] + p[k];
            }
            set.project_into(&y, &mut next, tol);
            let mut change = 0.0;
            for k in 0..d {
                let np = y[k] - next[k];
                change += (np - p[k]) * (np - p[k]);
                p[k] = np;
            }
            incr_change = incr_change.max(change.sqrt());
            cur.copy_from_slice(&next);
        }
        moved = dist(&start, &cur);
        if moved < tol.proj && incr_change < tol.proj {
            return (cur, true, moved);
        }
    }
    (cur, false, moved)
}

/// Margins of the three projection inequalities; each holds when its margin
/// is at least `-tol.ineq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionInequalities {
    pub holds: [bool; 3],
    pub margins: [f64; 3],
}

/// Evaluates, with `r = x - P(x)`:
/// `(w - x).r <= -|r|^2`,
/// `(x2 - x1).r1 <= r2.r1 - |r1|^2`,
/// `(x2 - x1).(r2 - r1) >= |r2 - r1|^2`.
pub fn check_projection_inequalities(
    set: &ConvexSet,
    x1: &[f64],
    x2: &[f64],
    omega: &[f64],
    tol: &Tolerances,
) -> Result<ProjectionInequalities> {
    let w = set.project_with(omega, tol)?;
    if w.distance > tol.feas {
        return Err(Error::Infeasible(w.distance));
    }
    let r1 = set.project_with(x1, tol)?.residual;
    let r2 = set.project_with(x2, tol)?.residual;
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u - v).collect() };
    let wx = sub(omega, x1);
    let dx = sub(x2, x1);
    let dr = sub(&r2, &r1);
    let margins = [
        -dot(&r1, &r1) - dot(&wx, &r1),
        dot(&r2, &r1) - dot(&r1, &r1) - dot(&dx, &r1),
        dot(&dx, &dr) - dot(&dr, &dr),
    ];
    Ok(ProjectionInequalities {
        holds: margins.map(|m| m >= -tol.ineq),
        margins,
    })
}

/// `(2 r, central-difference gradient of d^2)` at `x`.
pub fn distance_squared_gradient(
    set: &ConvexSet,
    x: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameters(format!("difference step {h} must be positive")));
    }
    let analytic = set.project(x)?.residual.iter().map(|r| 2.0 * r).collect();
    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = set.distance(&probe)?.powi(2);
        probe[k] = x[k] - h;
        let down = set.distance(&probe)?.powi(2);
        probe[k] = x[k];
        numeric.push((up - down) / (2.0 * h));
    }
    Ok((analytic, numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: &[f64], b: &[f64], eps: f64) -> bool {
        dist(a, b) <= eps
    }

    #[test]
    fn closed_form_examples() {
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0);
        let r = ball.project(&[2.0, 0.0]).unwrap();
        assert_eq!(r.projection, vec![1.0, 0.0]);
        assert_eq!(r.distance, 1.0);

        let inside = ball.project(&[0.3, -0.2]).unwrap();
        assert_eq!(inside.projection, vec![0.3, -0.2]);
        assert_eq!(inside.distance, 0.0);

        let bx = ConvexSet::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 2.0],
        };
        assert_eq!(bx.project(&[-1.0, 3.0]).unwrap().projection, vec![0.0, 2.0]);

        let hs = ConvexSet::halfspace(vec![0.0, 2.0], 2.0).unwrap();
        assert_eq!(hs.project(&[5.0, 4.0]).unwrap().projection, vec![5.0, 1.0]);

        let pt = ConvexSet::singleton(vec![1.0, 1.0]);
        assert_eq!(pt.project(&[0.0, 0.0]).unwrap().distance, 2f64.sqrt());
    }

    #[test]
    fn polytope_examples() {
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = project_polytope(&tri, &[1.0, 1.0], &tol()).unwrap();
        assert!(close(&p.result.projection, &[0.5, 0.5], 1e-12));
        assert!((p.weights[0]).abs() < 1e-12);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let inner = project_polytope(&tri, &[0.2, 0.3], &tol()).unwrap();
        assert!(close(&inner.result.projection, &[0.2, 0.3], 1e-12));

        let corner = project_polytope(&tri, &[-1.0, -2.0], &tol()).unwrap();
        assert!(close(&corner.result.projection, &[0.0, 0.0], 1e-12));

        let single = project_polytope(&[vec![3.0, 4.0]], &[0.0, 0.0], &tol()).unwrap();
        assert_eq!(single.result.projection, vec![3.0, 4.0]);
        assert_eq!(single.result.distance, 5.0);

        // repeated and collinear vertices
        let seg = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.0]];
        let s = project_polytope(&seg, &[1.5, 1.0], &tol()).unwrap();
        assert!(close(&s.result.projection, &[1.5, 0.0], 1e-12));
    }

    /// Grid minimization of the distance over points of a 2-D set.
    fn grid_oracle(inside: impl Fn(f64, f64) -> bool, x: &[f64], lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        for i in 0..=n {
            for j in 0..=n {
                let (u, v) = (lo + i as f64 * step, lo + j as f64 * step);
                if inside(u, v) {
                    let d = (u - x[0]).powi(2) + (v - x[1]).powi(2);
                    if d < best.0 {
                        best = (d, vec![u, v]);
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn intersection_matches_grid_oracle() {
        let set = ConvexSet::Intersection {
            sets: vec![
                ConvexSet::ball(vec![0.0, 0.0], 1.0),
                ConvexSet::halfspace(vec![-1.0, 0.0], -0.5).unwrap(),
            ],
        };
        set.validate().unwrap();
        let p = set.project(&[-1.0, 0.0]).unwrap();
        assert!(close(&p.projection, &[0.5, 0.0], 1e-8));
        let oracle = grid_oracle(|u, v| u * u + v * v <= 1.0 && u >= 0.5, &[-1.0, 0.0], -1.5, 1.5, 1e-3);
        assert!(close(&p.projection, &oracle, 2e-3));

        for x in [[0.2, 2.0], [3.0, -3.0], [0.6, 0.1]] {
            let p = set.project(&x).unwrap();
            let oracle = grid_oracle(|u, v| u * u + v * v <= 1.0 && u >= 0.5, &x, -1.5, 1.5, 1e-3);
            assert!(close(&p.projection, &oracle, 2e-3), "{x:?}");
        }
    }

    #[test]
    fn empty_intersection_is_rejected() {
        let set = ConvexSet::Intersection {
            sets: vec![
                ConvexSet::ball(vec![0.0, 0.0], 1.0),
                ConvexSet::ball(vec![3.0, 0.0], 1.0),
            ],
        };
        assert!(matches!(set.validate(), Err(Error::EmptyIntersection(_))));
    }

    #[test]
    fn invalid_sets() {
        assert!(ConvexSet::ball(vec![0.0], 0.0).validate().is_err());
        assert!(ConvexSet::Box {
            lower: vec![1.0],
            upper: vec![0.0]
        }
        .validate()
        .is_err());
        assert!(ConvexSet::Halfspace {
            normal: vec![2.0, 0.0],
            offset: 0.0
        }
        .validate()
        .is_err());
        assert!(ConvexSet::polytope(vec![]).validate().is_err());
        assert!(ConvexSet::polytope(vec![vec![0.0, 0.0], vec![1.0]]).validate().is_err());
        assert!(matches!(
            ConvexSet::ball(vec![0.0, 0.0], 1.0).project(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_layout() {
        let set: ConvexSet =
            serde_json::from_str(r#"{"type":"ball","center":[0.0,1.0],"radius":2.0}"#).unwrap();
        assert_eq!(set, ConvexSet::ball(vec![0.0, 1.0], 2.0));
        let nested: ConvexSet = serde_json::from_str(
            r#"{"type":"intersection","sets":[{"type":"singleton","point":[1.0]},
                {"type":"box","lower":[0.0],"upper":[2.0]}]}"#,
        )
        .unwrap();
        assert_eq!(nested.dim(), 1);
        assert!(serde_json::from_str::<ConvexSet>(r#"{"type":"ball","center":[0.0],"radius":1.0,"x":1}"#).is_err());
    }

    #[test]
    fn projection_inequality_examples() {
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0);
        let c = check_projection_inequalities(&ball, &[2.0, 0.0], &[0.0, 2.0], &[0.0, 0.0], &tol()).unwrap();
        assert_eq!(c.holds, [true; 3]);
        let c = check_projection_inequalities(&ball, &[0.1, 0.0], &[0.0, 0.2], &[0.5, 0.5], &tol()).unwrap();
        assert_eq!(c.margins, [0.0; 3]);
        assert!(matches!(
            check_projection_inequalities(&ball, &[0.0, 0.0], &[0.0, 0.0], &[2.0, 0.0], &tol()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0);
        let (a, n) = distance_squared_gradient(&ball, &[2.0, 0.0], 1e-5).unwrap();
        assert!(close(&a, &[2.0, 0.0], 1e-12));
        assert!(close(&n, &[2.0, 0.0], 1e-6));
        let (a, n) = distance_squared_gradient(&ball, &[0.1, 0.2], 1e-5).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
        assert_eq!(n, vec![0.0, 0.0]);
    }

    fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0..3.0f64, d)
    }

    fn closed_form_set() -> impl Strategy<Value = ConvexSet> {
        prop_oneof![
            (point(2), 0.1..2.0f64).prop_map(|(c, r)| ConvexSet::ball(c, r)),
            (point(2), proptest::collection::vec(0.0..2.0f64, 2)).prop_map(|(l, w)| ConvexSet::Box {
                upper: l.iter().zip(&w).map(|(a, b)| a + b).collect(),
                lower: l,
            }),
            (0.0..std::f64::consts::TAU, -2.0..2.0f64)
                .prop_map(|(a, b)| ConvexSet::halfspace(vec![a.cos(), a.sin()], b).unwrap()),
            point(2).prop_map(ConvexSet::singleton),
        ]
    }

    fn any_set() -> impl Strategy<Value = ConvexSet> {
        prop_oneof![
            3 => closed_form_set(),
            1 => proptest::collection::vec(point(2), 1..7).prop_map(ConvexSet::polytope),
            1 => (0.5..2.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| ConvexSet::Intersection {
                sets: vec![
                    ConvexSet::ball(vec![0.0, 0.0], r),
                    ConvexSet::halfspace(vec![a.cos(), a.sin()], 0.1).unwrap(),
                ],
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn projection_is_idempotent_and_nonexpansive(set in any_set(), x1 in point(2), x2 in point(2)) {
            let t = tol();
            let p1 = set.project(&x1).unwrap();
            let p2 = set.project(&x2).unwrap();
            let again = set.project(&p1.projection).unwrap();
            prop_assert!(dist(&again.projection, &p1.projection) <= 2.0 * t.proj);
            prop_assert!(dist(&p1.projection, &p2.projection) <= dist(&x1, &x2) + 2.0 * t.proj);
            prop_assert!((p1.distance - norm(&p1.residual)).abs() <= 1e-15 * (1.0 + p1.distance));
        }

        #[test]
        fn projection_inequalities_hold(set in any_set(), x1 in point(2), x2 in point(2), w in point(2)) {
            let t = tol();
            let omega = set.project(&w).unwrap().projection;
            let c = check_projection_inequalities(&set, &x1, &x2, &omega, &t).unwrap();
            prop_assert_eq!(c.holds, [true; 3], "{:?}", c.margins);
        }

        #[test]
        fn gradient_matches_differences(set in closed_form_set(), x in point(2)) {
            let (a, n) = distance_squared_gradient(&set, &x, 1e-5).unwrap();
            prop_assert!(dist(&a, &n) <= 1e-6, "{:?} vs {:?}", a, n);
        }

        #[test]
        fn polytope_weights_in_simplex(vs in proptest::collection::vec(point(3), 1..9), x in point(3)) {
            let p = project_polytope(&vs, &x, &tol()).unwrap();
            prop_assert!(p.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut combo = vec![0.0; 3];
            for (w, v) in p.weights.iter().zip(&vs) {
                for k in 0..3 {
                    combo[k] += w * v[k];
                }
            }
            prop_assert!(dist(&combo, &p.result.projection) < 1e-9);
            // optimality: no vertex is closer along the residual direction
            let r = &p.result.residual;
            let pr = dot(&p.result.projection, r);
            for v in &vs {
                prop_assert!(dot(v, r) <= pr + 1e-9 * (1.0 + norm(r)));
            }
        }
    }
}
