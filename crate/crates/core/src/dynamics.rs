//! Fixed-step integration of agent dynamics, inequality residuals and
//! ordering diagnostics.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::convex::{dot, ConvexSet};
use crate::error::{Error, Result};
use crate::graph::{laplacian_flow_into, GraphSignal};
use crate::tolerance::Tolerances;

/// States at or above this norm count as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Right-hand side of a stacked agent system `xi' = f(t, xi)` with
/// `agents() * state_dim()` coordinates.
pub trait VectorField: Sync {
    fn agents(&self) -> usize;

    fn state_dim(&self) -> usize;

    /// Bound on the coupling weights; sets the largest stable step.
    fn rate_bound(&self) -> f64;

    /// Switching instants of the piecewise-constant data, starting at 0.
    fn breakpoints(&self) -> &[f64];

    /// Evaluates the field with the data of `segment`.
    fn eval(&self, t: f64, segment: usize, x: &[f64], out: &mut [f64]);

    fn segment_at(&self, t: f64) -> usize {
        self.breakpoints()
            .partition_point(|&b| b <= t)
            .saturating_sub(1)
    }

    fn max_step(&self) -> f64 {
        let rate = self.rate_bound() * self.agents() as f64;
        if rate > 0.0 {
            0.5 / rate
        } else {
            f64::INFINITY
        }
    }
}

/// `x' = -L(t) x`, coordinatewise for `dim`-dimensional agent states.
#[derive(Debug, Clone)]
pub struct LaplacianFlow {
    signal: GraphSignal,
    dim: usize,
}

impl LaplacianFlow {
    pub fn new(signal: GraphSignal, dim: usize) -> Self {
        Self { signal, dim }
    }

    pub fn signal(&self) -> &GraphSignal {
        &self.signal
    }
}

impl VectorField for LaplacianFlow {
    fn agents(&self) -> usize {
        self.signal.n()
    }

    fn state_dim(&self) -> usize {
        self.dim
    }

    fn rate_bound(&self) -> f64 {
        self.signal.weight_bound()
    }

    fn breakpoints(&self) -> &[f64] {
        self.signal.breakpoints()
    }

    fn eval(&self, _t: f64, segment: usize, x: &[f64], out: &mut [f64]) {
        laplacian_flow_into(&self.signal.segments()[segment], x, self.dim, out);
    }
}

/// Sampled solution on a uniform grid. States are stacked per sample as
/// `agents * dim` values; `derivatives` holds the right-hand side at each
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    agents: usize,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivatives: Vec<f64>,
    /// Step of the integrator; the recorded spacing may be a multiple.
    integration_step: f64,
    diverged: bool,
}

impl Trajectory {
    /// Wraps externally computed samples, e.g. closed-form solutions.
    pub fn from_samples(
        agents: usize,
        dim: usize,
        times: Vec<f64>,
        states: Vec<f64>,
        derivatives: Vec<f64>,
    ) -> Result<Self> {
        let width = agents * dim;
        if width == 0 || times.is_empty() {
            return Err(Error::InvalidParameters("empty trajectory".into()));
        }
        if states.len() != times.len() * width || derivatives.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len() * width,
                got: states.len().min(derivatives.len()),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameters("sample times must increase".into()));
        }
        let integration_step = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self {
            agents,
            dim,
            times,
            states,
            derivatives,
            integration_step,
            diverged: false,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn integration_step(&self) -> f64 {
        self.integration_step
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let w = self.agents * self.dim;
        &self.states[k * w..(k + 1) * w]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        let w = self.agents * self.dim;
        &self.derivatives[k * w..(k + 1) * w]
    }

    pub fn agent(&self, k: usize, i: usize) -> &[f64] {
        &self.state(k)[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Largest absolute coordinate over all samples.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First sample index with `t >= t0`.
    pub fn index_at(&self, t0: f64) -> usize {
        self.times.partition_point(|&t| t < t0).min(self.len() - 1)
    }

    /// Writes `t,agent,coord,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "agent", "coord", "value"])?;
        for k in 0..self.len() {
            let t = fmt(self.times[k]);
            for i in 0..self.agents {
                for (c, v) in self.agent(k, i).iter().enumerate() {
                    out.write_record([t.as_str(), &i.to_string(), &c.to_string(), &fmt(*v)])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    /// Keep every `record_every`-th grid point.
    pub record_every: usize,
}

impl IntegrationOptions {
    pub fn new(t_end: f64, step: f64) -> Self {
        Self {
            t0: 0.0,
            t_end,
            step,
            record_every: 1,
        }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }
}

pub fn integrate<F: VectorField + ?Sized>(field: &F, x0: &[f64], t_end: f64, h: f64) -> Result<Trajectory> {
    integrate_with(field, x0, &IntegrationOptions::new(t_end, h))
}

/// Classical fourth-order Runge-Kutta on the grid `t0 + k h`.
///
/// All four stages of a step use the data segment active at the step
/// midpoint, so a switch falling strictly inside a step takes effect at the
/// nearest grid point. A span that is not a multiple of `h` is covered with
/// the next-smaller step dividing it.
pub fn integrate_with<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    let (agents, dim) = (field.agents(), field.state_dim());
    let width = agents * dim;
    if x0.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: x0.len(),
        });
    }
    let span = opts.t_end - opts.t0;
    if !(opts.step > 0.0) || !(span >= 0.0) || !span.is_finite() || opts.record_every == 0 {
        return Err(Error::InvalidParameters(format!(
            "need step > 0, t_end >= t0 and record_every >= 1, got step {}, span {span}",
            opts.step
        )));
    }
    let limit = field.max_step();
    if opts.step > limit {
        return Err(Error::UnstableStep {
            step: opts.step,
            limit,
        });
    }
    let steps = (span / opts.step - 1e-9).ceil().max(0.0) as usize;
    if steps % opts.record_every != 0 {
        return Err(Error::InvalidParameters(format!(
            "{steps} steps are not a multiple of record_every = {}",
            opts.record_every
        )));
    }
    let h = if steps > 0 { span / steps as f64 } else { opts.step };
    let samples = steps / opts.record_every + 1;

    let mut times = Vec::with_capacity(samples);
    let mut states = Vec::with_capacity(samples * width);
    let mut derivatives = Vec::with_capacity(samples * width);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; width], vec![0.0; width], vec![0.0; width], vec![0.0; width]);
    let mut stage = vec![0.0; width];
    let mut diverged = !healthy(&x);

    let mut k = 0;
    while !diverged {
        let t = opts.t0 + k as f64 * h;
        let seg = field.segment_at(t + 0.5 * h);
        field.eval(t, seg, &x, &mut k1);
        if k % opts.record_every == 0 {
            times.push(t);
            states.extend_from_slice(&x);
            derivatives.extend_from_slice(&k1);
        }
        if k == steps {
            break;
        }
        for c in 0..width {
            stage[c] = x[c] + 0.5 * h * k1[c];
        }
        field.eval(t + 0.5 * h, seg, &stage, &mut k2);
        for c in 0..width {
            stage[c] = x[c] + 0.5 * h * k2[c];
        }
        field.eval(t + 0.5 * h, seg, &stage, &mut k3);
        for c in 0..width {
            stage[c] = x[c] + h * k3[c];
        }
        field.eval(t + h, seg, &stage, &mut k4);
        for c in 0..width {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        diverged = !healthy(&x);
        k += 1;
    }
    if times.is_empty() {
        return Err(Error::Diverged);
    }
    Ok(Trajectory {
        agents,
        dim,
        times,
        states,
        derivatives,
        integration_step: h,
        diverged,
    })
}

fn healthy(x: &[f64]) -> bool {
    dot(x, x).sqrt() < DIVERGENCE_NORM
}

/// Map from an agent state to the scalar that solves the inequality.
#[derive(Clone)]
pub enum Lift {
    /// Scalar states used as they are.
    Identity,
    /// `x_i = |xi_i - P(xi_i)|^2 / 2`, differentiated by the chain rule
    /// `x_i' = (xi_i - P(xi_i)) . xi_i'`.
    HalfSquaredDistance(ConvexSet),
    /// `x_i = |xi_i|` for scalar states, `x_i' = sign(xi_i) xi_i'`.
    Modulus,
    /// Arbitrary map; derivatives by central differences on the grid.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Lift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lift::Identity => f.write_str("Identity"),
            Lift::HalfSquaredDistance(s) => f.debug_tuple("HalfSquaredDistance").field(s).finish(),
            Lift::Modulus => f.write_str("Modulus"),
            Lift::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Lift {
    /// Whether derivatives come from differencing, making the two boundary
    /// samples unreliable.
    fn differenced(&self) -> bool {
        matches!(self, Lift::Custom(_))
    }
}

/// Scalar lifted trajectory with its derivative estimate. For differenced
/// lifts the boundary derivatives are one-sided.
pub fn lift_trajectory(traj: &Trajectory, lift: &Lift) -> Result<Trajectory> {
    let n = traj.agents;
    let len = traj.len();
    let mut states = Vec::with_capacity(len * n);
    let mut derivatives = Vec::with_capacity(len * n);
    match lift {
        Lift::Identity => {
            if traj.dim != 1 {
                return Err(Error::Precondition("identity lift needs scalar states".into()));
            }
            return Ok(traj.clone());
        }
        Lift::HalfSquaredDistance(set) => {
            if set.dim() != traj.dim {
                return Err(Error::DimensionMismatch {
                    expected: traj.dim,
                    got: set.dim(),
                });
            }
            let tol = Tolerances::default();
            let mut p = vec![0.0; traj.dim];
            let mut r = vec![0.0; traj.dim];
            for k in 0..len {
                for i in 0..n {
                    let xi = traj.agent(k, i);
                    set.project_into(xi, &mut p, &tol);
                    for c in 0..traj.dim {
                        r[c] = xi[c] - p[c];
                    }
                    let v = &traj.derivative(k)[i * traj.dim..(i + 1) * traj.dim];
                    states.push(0.5 * dot(&r, &r));
                    derivatives.push(dot(&r, v));
                }
            }
        }
        Lift::Modulus => {
            if traj.dim != 1 {
                return Err(Error::Precondition("modulus lift needs scalar states".into()));
            }
            for (x, v) in traj.states.iter().zip(&traj.derivatives) {
                states.push(x.abs());
                derivatives.push(if *x == 0.0 { 0.0 } else { x.signum() * v });
            }
        }
        Lift::Custom(f) => {
            for k in 0..len {
                for i in 0..n {
                    states.push(f(traj.agent(k, i)));
                }
            }
            derivatives.resize(len * n, 0.0);
            if len > 1 {
                for k in 0..len {
                    let (a, b) = (k.saturating_sub(1), (k + 1).min(len - 1));
                    let dt = traj.times[b] - traj.times[a];
                    for i in 0..n {
                        derivatives[k * n + i] = (states[b * n + i] - states[a * n + i]) / dt;
                    }
                }
            }
        }
    }
    Ok(Trajectory {
        agents: n,
        dim: 1,
        times: traj.times.clone(),
        states,
        derivatives,
        integration_step: traj.integration_step,
        diverged: traj.diverged,
    })
}

/// `D(t_k) = -L(t_k) x(t_k) - x'(t_k)` for a lifted trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace {
    agents: usize,
    pub times: Vec<f64>,
    /// Row-major, one row of `agents` values per sample.
    pub values: Vec<f64>,
    /// Length of the sliding integration window.
    pub window: f64,
    /// `int_t^{t+window} D` for every sample `t` whose window fits.
    pub window_integrals: Vec<f64>,
}

impl ResidualTrace {
    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.agents..(k + 1) * self.agents]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn window_row(&self, k: usize) -> &[f64] {
        &self.window_integrals[k * self.agents..(k + 1) * self.agents]
    }

    pub fn window_count(&self) -> usize {
        self.window_integrals.len() / self.agents.max(1)
    }

    /// Writes `t,agent,residual` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "agent", "residual"])?;
        for (k, t) in self.times.iter().enumerate() {
            let t = fmt(*t);
            for (i, v) in self.row(k).iter().enumerate() {
                out.write_record([t.as_str(), &i.to_string(), &fmt(*v)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualOptions {
    /// Window length for the sliding integrals; zero disables them.
    pub window: f64,
    /// The signal carries a virtual node 0 held at `x_0 = 0` in front of the
    /// agents (extended graph of the aggregation protocol).
    pub virtual_agent: bool,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            window: 1.0,
            virtual_agent: false,
        }
    }
}

pub fn residual_trace(traj: &Trajectory, s: &GraphSignal, lift: &Lift) -> Result<ResidualTrace> {
    residual_trace_with(traj, s, lift, &ResidualOptions::default())
}

pub fn residual_trace_with(
    traj: &Trajectory,
    s: &GraphSignal,
    lift: &Lift,
    opts: &ResidualOptions,
) -> Result<ResidualTrace> {
    let n = traj.agents;
    let offset = usize::from(opts.virtual_agent);
    if s.n() != n + offset {
        return Err(Error::DimensionMismatch {
            expected: n + offset,
            got: s.n(),
        });
    }
    let lifted = lift_trajectory(traj, lift)?;
    let trim = usize::from(lift.differenced() && lifted.len() > 2);
    let range = trim..lifted.len() - trim;
    let half = 0.5 * traj.integration_step;
    let mut times = Vec::with_capacity(range.len());
    let mut values = Vec::with_capacity(range.len() * n);
    let mut full = vec![0.0; s.n()];
    let mut flow = vec![0.0; s.n()];
    for k in range {
        let t = lifted.times[k];
        full[offset..].copy_from_slice(lifted.state(k));
        laplacian_flow_into(s.at(t + half), &full, 1, &mut flow);
        times.push(t);
        let dx = lifted.derivative(k);
        values.extend((0..n).map(|i| flow[i + offset] - dx[i]));
    }
    let window_integrals = window_integrals(&times, &values, n, opts.window);
    Ok(ResidualTrace {
        agents: n,
        times,
        values,
        window: opts.window,
        window_integrals,
    })
}

/// Trapezoidal `int_{t_k}^{t_k + w}` for each start whose window fits on the
/// grid, interpolating linearly at the right end.
fn window_integrals(times: &[f64], values: &[f64], n: usize, w: f64) -> Vec<f64> {
    if !(w > 0.0) || times.len() < 2 {
        return Vec::new();
    }
    let len = times.len();
    let mut cum = vec![0.0; len * n];
    for k in 1..len {
        let dt = times[k] - times[k - 1];
        for i in 0..n {
            cum[k * n + i] = cum[(k - 1) * n + i] + 0.5 * dt * (values[k * n + i] + values[(k - 1) * n + i]);
        }
    }
    let at = |t: f64, i: usize| -> f64 {
        let j = times.partition_point(|&s| s <= t).clamp(1, len - 1);
        let (t0, t1) = (times[j - 1], times[j]);
        let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (v0, v1) = (values[(j - 1) * n + i], values[j * n + i]);
        let vt = v0 + frac * (v1 - v0);
        cum[(j - 1) * n + i] + 0.5 * (t - t0) * (v0 + vt)
    };
    let last = *times.last().unwrap();
    let mut out = Vec::new();
    for k in 0..len {
        if times[k] + w > last + 1e-12 * last.max(1.0) {
            break;
        }
        for i in 0..n {
            out.push(at(times[k] + w, i) - cum[k * n + i]);
        }
    }
    out
}

/// Sorted agent values per sample with the stable ordering permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingTrace {
    agents: usize,
    pub times: Vec<f64>,
    /// `y_1 <= ... <= y_N` per sample.
    pub sorted: Vec<f64>,
    /// `permutation[k * N + r]` is the (0-based) agent holding rank `r`.
    pub permutation: Vec<usize>,
}

impl OrderingTrace {
    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn sorted_row(&self, k: usize) -> &[f64] {
        &self.sorted[k * self.agents..(k + 1) * self.agents]
    }

    pub fn permutation_row(&self, k: usize) -> &[usize] {
        &self.permutation[k * self.agents..(k + 1) * self.agents]
    }

    /// `M(t_k)`.
    pub fn max(&self, k: usize) -> f64 {
        self.sorted[(k + 1) * self.agents - 1]
    }

    /// `m(t_k)`.
    pub fn min(&self, k: usize) -> f64 {
        self.sorted[k * self.agents]
    }

    pub fn spread(&self, k: usize) -> f64 {
        self.max(k) - self.min(k)
    }

    /// Writes `t,rank,agent,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "rank", "agent", "value"])?;
        for (k, t) in self.times.iter().enumerate() {
            let t = fmt(*t);
            for (r, (a, v)) in self.permutation_row(k).iter().zip(self.sorted_row(k)).enumerate() {
                out.write_record([t.as_str(), &r.to_string(), &a.to_string(), &fmt(*v)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn ordering_trace(traj: &Trajectory) -> Result<OrderingTrace> {
    if traj.dim != 1 {
        return Err(Error::Precondition("ordering needs scalar states".into()));
    }
    let n = traj.agents;
    let mut sorted = Vec::with_capacity(traj.len() * n);
    let mut permutation = Vec::with_capacity(traj.len() * n);
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..traj.len() {
        let x = traj.state(k);
        idx.iter_mut().enumerate().for_each(|(r, v)| *v = r);
        // stable: equal values keep ascending agent order
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        permutation.extend_from_slice(&idx);
        sorted.extend(idx.iter().map(|&i| x[i]));
    }
    Ok(OrderingTrace {
        agents: n,
        times: traj.times.clone(),
        sorted,
        permutation,
    })
}

/// Cauchy matrix `Phi(t1, t0)` of `x' = -L(t) x`, integrated column-wise with
/// the same scheme as [`integrate`].
pub fn transition_matrix(s: &GraphSignal, t0: f64, t1: f64, h: f64) -> Result<DMatrix<f64>> {
    let n = s.n();
    if !(t1 >= t0) || !(t0 >= 0.0) {
        return Err(Error::OutsideDomain { t0, t1 });
    }
    // row i of Phi is agent i's state across n coordinates, starting from I
    let flow = LaplacianFlow::new(s.clone(), n);
    let x0 = DMatrix::<f64>::identity(n, n).transpose();
    let opts = IntegrationOptions {
        t0,
        t_end: t1,
        step: h,
        record_every: 1,
    };
    let steps = ((t1 - t0) / h - 1e-9).ceil().max(0.0) as usize;
    let traj = integrate_with(&flow, x0.as_slice(), &IntegrationOptions { record_every: steps.max(1), ..opts })?;
    if traj.diverged {
        return Err(Error::Diverged);
    }
    Ok(DMatrix::from_row_slice(n, n, traj.final_state()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedDigraph;
    use proptest::prelude::*;

    fn g(rows: &[&[f64]]) -> WeightedDigraph {
        WeightedDigraph::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn pair() -> GraphSignal {
        GraphSignal::constant(g(&[&[0.0, 1.0], &[1.0, 0.0]]))
    }

    #[test]
    fn two_node_closed_form() {
        let flow = LaplacianFlow::new(pair(), 1);
        let traj = integrate(&flow, &[1.0, 0.0], 1.0, 1e-3).unwrap();
        let e = (-2.0f64).exp();
        let x = traj.final_state();
        assert!((x[0] - (0.5 + 0.5 * e)).abs() < 1e-8);
        assert!((x[1] - (0.5 - 0.5 * e)).abs() < 1e-8);
        assert_eq!(traj.len(), 1001);
        assert_eq!(traj.times()[1000], 1.0);
    }

    #[test]
    fn consensus_and_zero_graph_are_fixed() {
        let flow = LaplacianFlow::new(pair(), 1);
        let traj = integrate(&flow, &[0.3, 0.3], 5.0, 1e-2).unwrap();
        assert!(traj.final_state().iter().all(|&v| v == 0.3));
        let zero = LaplacianFlow::new(GraphSignal::constant(WeightedDigraph::zeros(3)), 2);
        let x0 = [1.0, -2.0, 3.0, 0.5, 0.0, 7.0];
        let traj = integrate(&zero, &x0, 5.0, 1e-1).unwrap();
        assert_eq!(traj.final_state(), &x0);
    }

    #[test]
    fn step_validation() {
        let flow = LaplacianFlow::new(pair(), 1);
        assert!(matches!(
            integrate(&flow, &[1.0, 0.0], 1.0, 0.3),
            Err(Error::UnstableStep { .. })
        ));
        assert!(integrate(&flow, &[1.0], 1.0, 0.1).is_err());
        assert!(integrate(&flow, &[1.0, 0.0], 1.0, 0.0).is_err());
        let opts = IntegrationOptions::new(1.0, 0.1).record_every(3);
        assert!(integrate_with(&flow, &[1.0, 0.0], &opts).is_err());
        let opts = IntegrationOptions::new(1.0, 0.1).record_every(5);
        assert_eq!(integrate_with(&flow, &[1.0, 0.0], &opts).unwrap().len(), 3);
    }

    struct Unstable;

    impl VectorField for Unstable {
        fn agents(&self) -> usize {
            1
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn rate_bound(&self) -> f64 {
            0.0
        }
        fn breakpoints(&self) -> &[f64] {
            &[0.0]
        }
        fn eval(&self, _t: f64, _s: usize, x: &[f64], out: &mut [f64]) {
            out[0] = x[0] * x[0];
        }
    }

    #[test]
    fn blow_up_sets_divergence_flag() {
        let traj = integrate(&Unstable, &[1.0], 2.0, 1e-3).unwrap();
        assert!(traj.diverged());
        assert!(traj.horizon() < 1.01);
        assert!(traj.final_state()[0].is_finite());
    }

    #[test]
    fn fourth_order_refinement() {
        let s = GraphSignal::constant(g(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0], &[1.5, 0.0, 0.0]]));
        let flow = LaplacianFlow::new(s, 1);
        let x0 = [1.0, -1.0, 0.5];
        let end = |h: f64| integrate(&flow, &x0, 2.0, h).unwrap().final_state().to_vec();
        let (a, b, c) = (end(0.04), end(0.02), end(0.01));
        let e1: f64 = a.iter().zip(&c).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let e2: f64 = b.iter().zip(&c).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        // (h^4 - (h/4)^4) / ((h/2)^4 - (h/4)^4) = 17
        assert!((e1 / e2 - 17.0).abs() < 1.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn switching_is_aligned_with_grid() {
        let fwd = g(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let back = g(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let s = GraphSignal::new(
            (0..6).map(f64::from).collect(),
            (0..6).map(|k| if k % 2 == 0 { fwd.clone() } else { back.clone() }).collect(),
        )
        .unwrap();
        let flow = LaplacianFlow::new(s.clone(), 1);
        let traj = integrate(&flow, &[1.0, 0.0], 6.0, 1e-3).unwrap();
        let res = residual_trace(&traj, &s, &Lift::Identity).unwrap();
        assert!(res.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn transition_matrix_examples() {
        let phi = transition_matrix(&pair(), 0.0, 1.0, 1e-3).unwrap();
        let e = (-2.0f64).exp();
        let expect = DMatrix::from_row_slice(2, 2, &[(1.0 + e) / 2.0, (1.0 - e) / 2.0, (1.0 - e) / 2.0, (1.0 + e) / 2.0]);
        assert!((phi - expect).abs().max() < 1e-10);
        assert_eq!(transition_matrix(&pair(), 2.0, 2.0, 1e-3).unwrap(), DMatrix::identity(2, 2));
        let zero = GraphSignal::constant(WeightedDigraph::zeros(3));
        assert_eq!(transition_matrix(&zero, 0.0, 4.0, 1e-2).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn ordering_examples() {
        let traj = Trajectory::from_samples(3, 1, vec![0.0, 1.0], vec![3.0, 1.0, 2.0, 5.0, 5.0, 5.0], vec![0.0; 6]).unwrap();
        let o = ordering_trace(&traj).unwrap();
        assert_eq!(o.sorted_row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(o.permutation_row(0), &[1, 2, 0]);
        assert_eq!(o.permutation_row(1), &[0, 1, 2]);
        assert_eq!((o.max(0), o.min(0)), (3.0, 1.0));
        let ties = Trajectory::from_samples(2, 1, vec![0.0], vec![1.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(ordering_trace(&ties).unwrap().permutation_row(0), &[0, 1]);
    }

    /// `x1 = sin t`, `x2 = 2` against the single arc 2 -> 1.
    #[test]
    fn bounded_oscillation_solves_inequality() {
        let s = GraphSignal::constant(g(&[&[0.0, 1.0], &[0.0, 0.0]]));
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
        let states = times.iter().flat_map(|t| [t.sin(), 2.0]).collect();
        let ders = times.iter().flat_map(|t| [t.cos(), 0.0]).collect();
        let traj = Trajectory::from_samples(2, 1, times.clone(), states, ders).unwrap();
        let res = residual_trace(&traj, &s, &Lift::Identity).unwrap();
        for (k, t) in times.iter().enumerate() {
            let d = res.row(k);
            assert!((d[0] - (2.0 - t.sin() - t.cos())).abs() < 1e-15);
            assert!(d[0] > 0.0 && d[1] == 0.0);
        }
    }

    #[test]
    fn custom_lift_drops_boundary() {
        let traj = integrate(&LaplacianFlow::new(pair(), 1), &[1.0, 0.0], 2.0, 1e-3).unwrap();
        let lift = Lift::Custom(Arc::new(|x: &[f64]| x[0]));
        let res = residual_trace(&traj, &pair(), &lift).unwrap();
        assert_eq!(res.times.len(), traj.len() - 2);
        assert!(res.min() > -1e-6);
        let exact = residual_trace(&traj, &pair(), &Lift::Identity).unwrap();
        assert!(exact.values.iter().all(|v| v.abs() < 1e-12));
        assert!(exact.window_integrals.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn disturbed_solution_stays_below_free_flow() {
        // x' = -L x + f with f <= 0 stays below Phi(t, 0) x(0)
        struct Disturbed(LaplacianFlow);
        impl VectorField for Disturbed {
            fn agents(&self) -> usize {
                self.0.agents()
            }
            fn state_dim(&self) -> usize {
                1
            }
            fn rate_bound(&self) -> f64 {
                self.0.rate_bound()
            }
            fn breakpoints(&self) -> &[f64] {
                self.0.breakpoints()
            }
            fn eval(&self, t: f64, s: usize, x: &[f64], out: &mut [f64]) {
                self.0.eval(t, s, x, out);
                for (i, o) in out.iter_mut().enumerate() {
                    *o -= (1.0 + (t + i as f64).sin()) * 0.3;
                }
            }
        }
        let s = GraphSignal::constant(g(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.5, 0.0]]));
        let x0 = [1.0, -0.5, 0.25];
        let dist = integrate(&Disturbed(LaplacianFlow::new(s.clone(), 1)), &x0, 3.0, 1e-3).unwrap();
        for t in [0.5, 1.5, 3.0] {
            let k = dist.index_at(t);
            let free = transition_matrix(&s, 0.0, dist.times()[k], 1e-3).unwrap() * nalgebra::DVector::from_row_slice(&x0);
            for i in 0..3 {
                assert!(dist.state(k)[i] <= free[i] + 1e-9);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory::from_samples(1, 2, vec![0.0], vec![0.1, 2.0], vec![0.0; 2]).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,agent,coord,value\n0.0000000000000000e0,0,0,1.0000000000000001e-1\n0.0000000000000000e0,0,1,2.0000000000000000e0\n"
        );
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn transition_rows_are_stochastic(w in proptest::collection::vec(0.0..2.0f64, 16), t1 in 0.1..3.0f64) {
            let mut m = w.clone();
            for i in 0..4 { m[i * 4 + i] = 0.0; }
            let s = GraphSignal::constant(WeightedDigraph::new(4, m).unwrap());
            let phi = transition_matrix(&s, 0.0, t1, 1e-2).unwrap();
            for i in 0..4 {
                prop_assert!((phi.row(i).sum() - 1.0).abs() < 1e-8);
            }
            prop_assert!(phi.iter().all(|&v| v >= -1e-8 && v <= 1.0 + 1e-8));
        }
    }
}
