//! Verdicts drawn from finite trajectories. Every verdict records the
//! tolerance it used and the time window it was computed on.

use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::dynamics::{
    integrate_with, lift_trajectory, ordering_trace, residual_trace, IntegrationOptions, Lift,
    Trajectory, VectorField,
};
use crate::error::{Error, Result};
use crate::graph::{certify_usc, reachable_from, ConnectivityCertificate, GraphSignal, WeightedDigraph};
use crate::par::{self, Execution};
use crate::protocols::Phase;
use crate::tolerance::Tolerances;

/// Sup-norm at or above which a trajectory counts as unbounded.
pub const BOUNDED_NORM: f64 = 1e6;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
/// Share of the horizon skipped by the rate fit.
pub const RATE_FIT_SKIP: f64 = 0.1;
/// Share of the horizon whose contribution decides a plateau.
pub const PLATEAU_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryClass {
    Unbounded,
    Consensus,
    /// Settled, but agents disagree.
    ConvergentDisagreement,
    BoundedNonConvergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub bounded: bool,
    pub diverged: bool,
    pub sup_norm: f64,
    pub bound: f64,
    pub window: [f64; 2],
}

pub fn boundedness(traj: &Trajectory) -> Boundedness {
    let sup_norm = traj.sup_norm();
    Boundedness {
        bounded: !traj.diverged() && sup_norm < BOUNDED_NORM,
        diverged: traj.diverged(),
        sup_norm,
        bound: BOUNDED_NORM,
        window: [traj.times()[0], traj.horizon()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusVerdict {
    pub class: TrajectoryClass,
    pub holds: bool,
    /// Mean terminal state, per coordinate.
    pub limit: Vec<f64>,
    /// Largest pairwise distance between agents over the tail.
    pub tail_spread: f64,
    /// Largest excursion of a single coordinate over the tail.
    pub tail_variation: f64,
    pub terminal_spread: f64,
    pub tol: f64,
    pub window: [f64; 2],
}

fn tail_start(traj: &Trajectory, fraction: f64) -> usize {
    let (t0, t1) = (traj.times()[0], traj.horizon());
    traj.index_at(t1 - fraction.clamp(0.0, 1.0) * (t1 - t0))
}

/// Largest pairwise Euclidean distance between agents.
pub fn spread(state: &[f64], agents: usize, dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..agents {
        for j in i + 1..agents {
            let d2: f64 = (0..dim)
                .map(|c| (state[i * dim + c] - state[j * dim + c]).powi(2))
                .sum();
            worst = worst.max(d2);
        }
    }
    worst.sqrt()
}

/// Consensus holds when the spread stays below `tol` over the trailing
/// `tail_fraction` of the horizon.
pub fn consensus_verdict(traj: &Trajectory, tol: f64, tail_fraction: f64) -> ConsensusVerdict {
    let (n, d) = (traj.agents(), traj.dim());
    let start = tail_start(traj, tail_fraction);
    let bounded = boundedness(traj).bounded;
    let mut tail_spread = 0.0f64;
    let mut lo = vec![f64::INFINITY; n * d];
    let mut hi = vec![f64::NEG_INFINITY; n * d];
    for k in start..traj.len() {
        let x = traj.state(k);
        tail_spread = tail_spread.max(spread(x, n, d));
        for (c, v) in x.iter().enumerate() {
            lo[c] = lo[c].min(*v);
            hi[c] = hi[c].max(*v);
        }
    }
    let tail_variation = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let last = traj.final_state();
    let limit = (0..d)
        .map(|c| (0..n).map(|i| last[i * d + c]).sum::<f64>() / n as f64)
        .collect();
    let class = if !bounded {
        TrajectoryClass::Unbounded
    } else if tail_spread < tol {
        TrajectoryClass::Consensus
    } else if tail_variation < tol {
        TrajectoryClass::ConvergentDisagreement
    } else {
        TrajectoryClass::BoundedNonConvergent
    };
    ConsensusVerdict {
        class,
        holds: class == TrajectoryClass::Consensus,
        limit,
        tail_spread,
        tail_variation,
        terminal_spread: spread(last, n, d),
        tol,
        window: [traj.times()[start], traj.horizon()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log e(t)`.
    pub rate: f64,
    /// Absolute correlation of the log-linear fit.
    pub quality: f64,
    pub samples: usize,
    pub reference: f64,
    pub floor: f64,
    pub window: [f64; 2],
}

/// Least-squares slope of `log max_i |x_i(t) - reference|` over samples past
/// the first tenth of the horizon with the error in `[floor, e(0) / 10]`.
pub fn exponential_rate_fit(traj: &Trajectory, reference: f64, floor: f64) -> Result<RateFit> {
    let err = |k: usize| {
        traj.state(k)
            .iter()
            .fold(0.0f64, |m, v| m.max((v - reference).abs()))
    };
    let e0 = err(0);
    if (0..traj.len()).all(|k| err(k) < floor) {
        return Err(Error::Precondition("error below the floor everywhere: instant convergence".into()));
    }
    let (t0, t1) = (traj.times()[0], traj.horizon());
    let skip = t0 + RATE_FIT_SKIP * (t1 - t0);
    let pts: Vec<(f64, f64)> = (0..traj.len())
        .filter(|&k| traj.times()[k] >= skip)
        .map(|k| (traj.times()[k], err(k)))
        .filter(|&(_, e)| e >= floor && e <= e0 / 10.0)
        .map(|(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!(
            "only {} samples in the fitting window",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let (mt, me) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let (mut stt, mut see, mut ste) = (0.0, 0.0, 0.0);
    for (t, e) in &pts {
        stt += (t - mt) * (t - mt);
        see += (e - me) * (e - me);
        ste += (t - mt) * (e - me);
    }
    let quality = if see > 0.0 { (ste / (stt * see).sqrt()).abs() } else { 1.0 };
    Ok(RateFit {
        rate: ste / stt,
        quality,
        samples: pts.len(),
        reference,
        floor,
        window: [pts[0].0, pts[pts.len() - 1].0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeIntegral {
    pub i: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    pub total: f64,
    /// Contribution of the final stretch of the horizon.
    pub tail: f64,
    pub plateau: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// `int |a_ij (x_j - x_i)|` for every pair with a positive weight somewhere.
    pub couplings: Vec<CumulativeIntegral>,
    /// `int |x_i'|`.
    pub derivatives: Vec<CumulativeIntegral>,
    /// `int D_i`.
    pub residuals: Vec<CumulativeIntegral>,
    pub all_plateau: bool,
    pub tol: f64,
    pub window: [f64; 2],
    pub tail_window: [f64; 2],
}

/// Trapezoidal totals of the summable quantities; a plateau means the last
/// fifth of the horizon adds less than `tol` times the total.
pub fn summability_check(traj: &Trajectory, s: &GraphSignal, tol: f64) -> Result<SummabilityReport> {
    if traj.dim() != 1 {
        return Err(Error::Precondition("summability needs scalar states".into()));
    }
    let n = traj.agents();
    if s.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.n(),
        });
    }
    let ever: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| s.segments().iter().any(|g| g.weight(i, j) > 0.0))
        .collect();
    let residual = residual_trace(traj, s, &Lift::Identity)?;
    let half = 0.5 * traj.integration_step();
    let (t0, t1) = (traj.times()[0], traj.horizon());
    let cut = t1 - PLATEAU_FRACTION * (t1 - t0);

    let integrate_series = |f: &dyn Fn(usize) -> f64| -> (f64, f64) {
        let (mut total, mut tail) = (0.0, 0.0);
        let mut prev = f(0);
        for k in 1..traj.len() {
            let cur = f(k);
            let (a, b) = (traj.times()[k - 1], traj.times()[k]);
            let piece = 0.5 * (b - a) * (prev + cur);
            total += piece;
            if b > cut {
                tail += piece * ((b - a.max(cut)) / (b - a));
            }
            prev = cur;
        }
        (total, tail)
    };
    let entry = |i: usize, j: Option<usize>, (total, tail): (f64, f64)| CumulativeIntegral {
        i,
        j,
        total,
        tail,
        plateau: tail.abs() <= tol * total.abs(),
    };
    let couplings: Vec<_> = ever
        .iter()
        .map(|&(i, j)| {
            let f = |k: usize| {
                let x = traj.state(k);
                let a = s.at(traj.times()[k] + half).weight(i, j);
                (a * (x[j] - x[i])).abs()
            };
            entry(i, Some(j), integrate_series(&f))
        })
        .collect();
    let derivatives: Vec<_> = (0..n)
        .map(|i| entry(i, None, integrate_series(&|k| traj.derivative(k)[i].abs())))
        .collect();
    let residuals: Vec<_> = (0..n)
        .map(|i| entry(i, None, integrate_series(&|k| residual.row(k)[i])))
        .collect();
    let all_plateau = couplings
        .iter()
        .chain(&derivatives)
        .chain(&residuals)
        .all(|c| c.plateau);
    Ok(SummabilityReport {
        couplings,
        derivatives,
        residuals,
        all_plateau,
        tol,
        window: [t0, t1],
        tail_window: [cut, t1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistanceVerdict {
    pub holds: bool,
    /// Mean terminal distance to the set.
    pub d_star: f64,
    pub distances: Vec<f64>,
    pub deviations: Vec<f64>,
    pub spread: f64,
    pub tol: f64,
    pub time: f64,
}

pub fn equidistance_verdict(traj: &Trajectory, target: &ConvexSet, tol: f64) -> Result<EquidistanceVerdict> {
    if traj.diverged() {
        return Err(Error::Diverged);
    }
    let k = traj.len() - 1;
    let distances = (0..traj.agents())
        .map(|i| target.distance(traj.agent(k, i)))
        .collect::<Result<Vec<_>>>()?;
    let d_star = distances.iter().sum::<f64>() / distances.len() as f64;
    let deviations: Vec<f64> = distances.iter().map(|d| (d - d_star).abs()).collect();
    let spread = distances.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - distances.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(EquidistanceVerdict {
        holds: spread < tol,
        d_star,
        distances,
        deviations,
        spread,
        tol,
        time: traj.horizon(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusRegime {
    /// Common modulus below tolerance.
    Stability,
    /// All classified agents share a sign.
    Consensus,
    /// Two nonempty sign groups.
    Polarization,
    /// Moduli did not agree.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusVerdict {
    pub holds: bool,
    pub regime: ModulusRegime,
    pub x_star: f64,
    pub deviations: Vec<f64>,
    pub spread: f64,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// Agents with `|xi_i| < tol` at the final time.
    pub unclassified: Vec<usize>,
    pub tol: f64,
    pub time: f64,
}

pub fn modulus_consensus_verdict(traj: &Trajectory, tol: f64) -> Result<ModulusVerdict> {
    if traj.dim() != 1 {
        return Err(Error::Precondition("modulus consensus needs scalar states".into()));
    }
    let last = traj.final_state();
    let moduli: Vec<f64> = last.iter().map(|v| v.abs()).collect();
    let x_star = moduli.iter().sum::<f64>() / moduli.len() as f64;
    let deviations: Vec<f64> = moduli.iter().map(|m| (m - x_star).abs()).collect();
    let spread = moduli.iter().fold(0.0f64, |a, &b| a.max(b)) - moduli.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let holds = spread < tol;
    let (mut positive, mut negative, mut unclassified) = (vec![], vec![], vec![]);
    for (i, v) in last.iter().enumerate() {
        if v.abs() < tol {
            unclassified.push(i);
        } else if *v > 0.0 {
            positive.push(i);
        } else {
            negative.push(i);
        }
    }
    let regime = if !holds {
        ModulusRegime::None
    } else if x_star < tol {
        ModulusRegime::Stability
    } else if positive.is_empty() || negative.is_empty() {
        ModulusRegime::Consensus
    } else {
        ModulusRegime::Polarization
    };
    Ok(ModulusVerdict {
        holds,
        regime,
        x_star,
        deviations,
        spread,
        positive,
        negative,
        unclassified,
        tol,
        time: traj.horizon(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurroundVerdict {
    pub holds: bool,
    /// `max_{i,j} |p_i r_i - p_j r_j|` over the tail, `r = xi - P(xi)`.
    pub tail_max: f64,
    pub terminal: f64,
    pub tol: f64,
    pub window: [f64; 2],
}

pub fn surround_verdict(
    traj: &Trajectory,
    generators: &[Phase],
    target: &ConvexSet,
    tol: f64,
    tail_fraction: f64,
) -> Result<SurroundVerdict> {
    let n = traj.agents();
    if traj.dim() != 2 || generators.len() != n {
        return Err(Error::Precondition("surround verdict needs planar states and one generator per agent".into()));
    }
    let t = Tolerances::default();
    let gap = |k: usize| -> f64 {
        let mut p = [0.0; 2];
        let z: Vec<f64> = (0..n)
            .flat_map(|i| {
                let xi = traj.agent(k, i);
                target.project_into(xi, &mut p, &t);
                generators[i].rotate(&[xi[0] - p[0], xi[1] - p[1]])
            })
            .collect();
        spread(&z, n, 2)
    };
    let start = tail_start(traj, tail_fraction);
    let tail_max = (start..traj.len()).map(gap).fold(0.0, f64::max);
    Ok(SurroundVerdict {
        holds: tail_max < tol,
        tail_max,
        terminal: gap(traj.len() - 1),
        tol,
        window: [traj.times()[start], traj.horizon()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalDistance {
    pub holds: bool,
    pub max: f64,
    pub distances: Vec<f64>,
    pub tol: f64,
    pub time: f64,
}

/// Distances of the final states to `set`; holds when all are below `tol`.
pub fn terminal_distance(traj: &Trajectory, set: &ConvexSet, tol: f64) -> Result<TerminalDistance> {
    if traj.diverged() {
        return Err(Error::Diverged);
    }
    let k = traj.len() - 1;
    let distances = (0..traj.agents())
        .map(|i| set.distance(traj.agent(k, i)))
        .collect::<Result<Vec<_>>>()?;
    let max = distances.iter().copied().fold(0.0, f64::max);
    Ok(TerminalDistance {
        holds: max < tol,
        max,
        distances,
        tol,
        time: traj.horizon(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderOrdering {
    pub holds: bool,
    pub leader: usize,
    /// `min_{t, i} x_i(t) - x_leader(t)`.
    pub min_gap: f64,
    /// Whether every follower started at or above the leader.
    pub initially_above: bool,
    pub tol: f64,
    pub window: [f64; 2],
}

/// Followers that start above a scalar leader stay above it up to `tol`.
pub fn leader_ordering_check(traj: &Trajectory, leader: usize, tol: f64) -> Result<LeaderOrdering> {
    if traj.dim() != 1 {
        return Err(Error::Precondition("leader ordering needs scalar states".into()));
    }
    if leader >= traj.agents() {
        return Err(Error::InvalidParameters(format!("leader {leader} out of range")));
    }
    let gap = |k: usize| {
        let x = traj.state(k);
        x.iter()
            .enumerate()
            .filter(|&(i, _)| i != leader)
            .map(|(_, v)| v - x[leader])
            .fold(f64::INFINITY, f64::min)
    };
    let initially_above = gap(0) >= 0.0;
    let min_gap = (0..traj.len()).map(gap).fold(f64::INFINITY, f64::min);
    Ok(LeaderOrdering {
        holds: initially_above && min_gap >= -tol,
        leader,
        min_gap,
        initially_above,
        tol,
        window: [traj.times()[0], traj.horizon()],
    })
}

/// Scalar trajectory of the distances `d(xi_i(t))` to `set`.
pub fn distance_trajectory(traj: &Trajectory, set: &ConvexSet) -> Result<Trajectory> {
    let lifted = lift_trajectory(traj, &Lift::HalfSquaredDistance(set.clone()))?;
    let len = lifted.len();
    let n = traj.agents();
    let mut states = Vec::with_capacity(len * n);
    let mut ders = Vec::with_capacity(len * n);
    for k in 0..len {
        for (x, dx) in lifted.state(k).iter().zip(lifted.derivative(k)) {
            let d = (2.0 * x).sqrt();
            states.push(d);
            ders.push(if d > 0.0 { dx / d } else { 0.0 });
        }
    }
    Trajectory::from_samples(n, 1, lifted.times().to_vec(), states, ders)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMax {
    pub holds: bool,
    /// Largest increase of `max_i x_i` between consecutive samples.
    pub max_increase: f64,
    /// `N * h * tol_res` with the recorded spacing `h`.
    pub allowed: f64,
    pub tol: f64,
    pub window: [f64; 2],
}

/// Checks that `max_i x_i(t)` does not increase beyond the slack.
pub fn monotone_max_check(lifted: &Trajectory, tol_res: f64) -> Result<MonotoneMax> {
    let order = ordering_trace(lifted)?;
    let h = lifted
        .times()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let max_increase = (1..lifted.len())
        .map(|k| order.max(k) - order.max(k - 1))
        .fold(0.0, f64::max);
    let allowed = lifted.agents() as f64 * h * tol_res;
    Ok(MonotoneMax {
        holds: max_increase <= allowed,
        max_increase,
        allowed,
        tol: tol_res,
        window: [lifted.times()[0], lifted.horizon()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionViolation {
    pub t: f64,
    /// 1-based rank `m` of the violated inequality.
    pub m: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub theta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    pub period: f64,
    /// Global row-sum bound `T * N * weight_bound` used for `theta`.
    pub c_global: f64,
    /// Largest row sum of a window union among the checked windows.
    pub c_windows: f64,
    pub windows_checked: usize,
    pub violation_count: usize,
    /// First violations, at most [`MAX_REPORTED_VIOLATIONS`].
    pub violations: Vec<ContractionViolation>,
    pub tol: f64,
}

pub const MAX_REPORTED_VIOLATIONS: usize = 100;

/// `theta = min(e^{-C}, delta e^{-2C})` with `C = T N weight_bound`.
pub fn contraction_theta(s: &GraphSignal, period: f64, delta: f64) -> (f64, f64, f64, f64) {
    let c = period * s.n() as f64 * s.weight_bound();
    let theta1 = (-c).exp();
    let theta2 = delta * theta1 * theta1;
    (theta1.min(theta2), theta1, theta2, c)
}

/// Checks `y_{m+1}(t + T) <= theta y_m(t) + (1 - theta) y_N(t)` on every
/// sample start `t` whose window fits in the trajectory.
pub fn contraction_certificate(
    s: &GraphSignal,
    period: f64,
    delta: f64,
    traj: &Trajectory,
    tol_res: f64,
) -> Result<ContractionCertificate> {
    if traj.dim() != 1 || traj.agents() != s.n() {
        return Err(Error::Precondition("contraction check needs scalar states on the signal's nodes".into()));
    }
    let horizon = traj.horizon();
    if horizon < period {
        return Err(Error::HorizonTooShort {
            horizon,
            window: period,
        });
    }
    if !certify_usc(s, period, delta, horizon)?.holds() {
        return Err(Error::Precondition(format!(
            "signal is not certified USC with T = {period}, delta = {delta}"
        )));
    }
    let (theta, theta1, theta2, c_global) = contraction_theta(s, period, delta);
    let n = s.n();
    let sorted_at = |t: f64| -> Vec<f64> {
        let times = traj.times();
        let k = times.partition_point(|&u| u < t).min(times.len() - 1);
        let mut x = if (times[k] - t).abs() <= 1e-9 * t.max(1.0) || k == 0 {
            traj.state(k).to_vec()
        } else {
            let (a, b) = (times[k - 1], times[k]);
            let w = (t - a) / (b - a);
            traj.state(k - 1)
                .iter()
                .zip(traj.state(k))
                .map(|(u, v)| u + w * (v - u))
                .collect()
        };
        x.sort_by(f64::total_cmp);
        x
    };
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut windows_checked = 0;
    let mut c_windows = 0.0f64;
    for (k, &t) in traj.times().iter().enumerate() {
        if t + period > horizon * (1.0 + 1e-12) {
            break;
        }
        windows_checked += 1;
        let mut y = traj.state(k).to_vec();
        y.sort_by(f64::total_cmp);
        let later = sorted_at(t + period);
        for m in 1..n {
            let rhs = theta * y[m - 1] + (1.0 - theta) * y[n - 1];
            let excess = later[m] - rhs;
            if excess > tol_res {
                violation_count += 1;
                if violations.len() < MAX_REPORTED_VIOLATIONS {
                    violations.push(ContractionViolation { t, m, excess });
                }
            }
        }
        let union = s.union_over(t, t + period)?;
        c_windows = c_windows.max(union.max_row_sum());
    }
    Ok(ContractionCertificate {
        theta,
        theta1,
        theta2,
        delta,
        period,
        c_global,
        c_windows,
        windows_checked,
        violation_count,
        violations,
        tol: tol_res,
    })
}

/// Bounded non-convergent solution of the inequality on a static graph whose
/// strongly connected components are not isolated: for an arc `j -> i` with
/// no walk back from `i` to `j`, `x_i = sin t`, `x_k = M` on the ancestors of
/// `j` and `-1` elsewhere. Returns `None` when every arc lies inside a
/// component.
pub fn disconnected_witness(g: &WeightedDigraph, horizon: f64, step: f64) -> Result<Option<Trajectory>> {
    let n = g.n();
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidParameters("step and horizon must be positive".into()));
    }
    let arc = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| g.weight(i, j) > 0.0 && !reachable_from(g, i)[j]);
    let Some((i, j)) = arc else {
        return Ok(None);
    };
    // ancestors of j: nodes with a walk to j
    let ancestors: Vec<bool> = (0..n).map(|k| reachable_from(g, k)[j]).collect();
    let outside: f64 = (0..n).filter(|&k| !ancestors[k]).map(|k| g.weight(i, k)).sum();
    let big = 1.0 + (2.0 * outside + 1.0) / g.weight(i, j);
    let steps = (horizon / step).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * step).collect();
    let mut states = Vec::with_capacity(times.len() * n);
    let mut ders = Vec::with_capacity(times.len() * n);
    for &t in &times {
        for k in 0..n {
            let (x, dx) = if k == i {
                (t.sin(), t.cos())
            } else if ancestors[k] {
                (big, 0.0)
            } else {
                (-1.0, 0.0)
            };
            states.push(x);
            ders.push(dx);
        }
    }
    Trajectory::from_samples(n, 1, times, states, ders).map(Some)
}

/// The ray `x(t) = x0 - t c 1`, a solution of the inequality for any graph
/// when `c > 0`.
pub fn ray_solution(x0: &[f64], speed: f64, horizon: f64, step: f64) -> Result<Trajectory> {
    let n = x0.len();
    let steps = (horizon / step).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * step).collect();
    let states = times
        .iter()
        .flat_map(|t| x0.iter().map(move |x| x - t * speed))
        .collect();
    Trajectory::from_samples(n, 1, times, states, vec![-speed; (steps + 1) * n])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    /// `simulated` or `crafted`.
    pub origin: String,
    pub class: TrajectoryClass,
    pub tail_spread: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub unbounded: usize,
    pub consensus: usize,
    pub convergent_disagreement: usize,
    pub bounded_non_convergent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub counts: ClassCounts,
    pub tol: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub horizon: f64,
    pub step: f64,
    pub record_every: usize,
    pub tol: f64,
    pub tail_fraction: f64,
    pub execution: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            step: 1e-3,
            record_every: 100,
            tol: 1e-4,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            execution: Execution::default(),
        }
    }
}

/// Integrates `field` from every initial state (in parallel when enabled),
/// appends the crafted solutions, and classifies each trajectory with the
/// identity lift. Run order in the report follows the inputs.
pub fn dichotomy_sweep<F: VectorField + ?Sized>(
    field: &F,
    initial: &[Vec<f64>],
    crafted: &[Trajectory],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let iopts = IntegrationOptions::new(opts.horizon, opts.step).record_every(opts.record_every);
    let simulated = par::map(opts.execution, initial, |x0| integrate_with(field, x0, &iopts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(simulated.len() + crafted.len());
    let mut counts = ClassCounts::default();
    let all = simulated
        .iter()
        .map(|t| ("simulated", t))
        .chain(crafted.iter().map(|t| ("crafted", t)));
    for (index, (origin, traj)) in all.enumerate() {
        let v = consensus_verdict(traj, opts.tol, opts.tail_fraction);
        match v.class {
            TrajectoryClass::Unbounded => counts.unbounded += 1,
            TrajectoryClass::Consensus => counts.consensus += 1,
            TrajectoryClass::ConvergentDisagreement => counts.convergent_disagreement += 1,
            TrajectoryClass::BoundedNonConvergent => counts.bounded_non_convergent += 1,
        }
        runs.push(SweepRun {
            index,
            origin: origin.to_string(),
            class: v.class,
            tail_spread: v.tail_spread,
            sup_norm: traj.sup_norm(),
        });
    }
    Ok(SweepReport {
        runs,
        counts,
        tol: opts.tol,
        tail_fraction: opts.tail_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub holds: bool,
    pub min: f64,
    pub tol: f64,
    /// Largest absolute sliding-window integral over the tail.
    pub tail_window_integral: f64,
    pub window: [f64; 2],
    pub note: String,
}

/// Aggregate of every diagnostic requested for one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundedness: Option<Boundedness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summability: Option<SummabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equidistance: Option<EquidistanceVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surround: Option<SurroundVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone_max: Option<MonotoneMax>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_distance: Option<TerminalDistance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leader_ordering: Option<LeaderOrdering>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub certificates: Vec<ConnectivityCertificate>,
    /// Pass/fail of every requested verdict, by name.
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty", default)]
    pub verdicts: std::collections::BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}
