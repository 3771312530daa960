//! Scenario evaluation and artifact export.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    resolve, sweep_initial_states, CertificateRequest, CraftedSpec, Observable, Resolved, Scenario,
};
use crate::analysis::{
    boundedness, consensus_verdict, contraction_certificate, dichotomy_sweep, disconnected_witness,
    distance_trajectory, equidistance_verdict, exponential_rate_fit, leader_ordering_check,
    modulus_consensus_verdict, monotone_max_check, ray_solution, summability_check,
    surround_verdict, terminal_distance, DiagnosticsReport, ResidualSummary, SweepOptions,
    DEFAULT_TAIL_FRACTION,
};
use crate::dynamics::{
    integrate_with, lift_trajectory, ordering_trace, residual_trace_with, IntegrationOptions, Lift,
    OrderingTrace, ResidualTrace, Trajectory, VectorField,
};
use crate::error::{Error, Result};
use crate::graph::{
    certify_cut_balance_signal, certify_isc_proxy, certify_static, certify_type_symmetry_signal,
    certify_windows, Connectivity, ConnectivityCertificate, GraphSignal, Verdict, WindowCheck,
};
use crate::par::Execution;
use crate::protocols::ProtocolKind;

/// Process exit status of a run; see [`ExitStatus::code`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    Inconclusive,
    VerdictFailed,
    Diverged,
    Precondition,
    Schema,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::VerdictFailed => 1,
            ExitStatus::Schema => 2,
            ExitStatus::Precondition => 3,
            ExitStatus::Diverged => 4,
            ExitStatus::Inconclusive => 5,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Diverged => ExitStatus::Diverged,
            Error::Precondition(_)
            | Error::EmptyIntersection(_)
            | Error::TooManyNodes { .. }
            | Error::Infeasible(_)
            | Error::IterationBudget { .. }
            | Error::HorizonTooShort { .. } => ExitStatus::Precondition,
            _ => ExitStatus::Schema,
        }
    }
}

/// In-memory result of a scenario.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub scenario: Scenario,
    pub trajectory: Option<Trajectory>,
    pub residual: Option<ResidualTrace>,
    pub ordering: Option<OrderingTrace>,
    pub report: DiagnosticsReport,
    pub status: ExitStatus,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub status: ExitStatus,
    pub report: DiagnosticsReport,
}

#[derive(Serialize)]
struct DiagnosticsDoc<'a> {
    scenario: &'a str,
    seed: u64,
    status: ExitStatus,
    exit_code: i32,
    #[serde(flatten)]
    report: &'a DiagnosticsReport,
}

fn crafted_trajectory(
    spec: &CraftedSpec,
    r: &Resolved,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = r.signal.n();
    match spec {
        CraftedSpec::Example1 => {
            if n != 2 {
                return Err(Error::InvalidParameters("example1 needs two agents".into()));
            }
            let steps = (horizon / dt).round() as usize;
            let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
            let states = times.iter().flat_map(|t| [t.sin(), 2.0]).collect();
            let ders = times.iter().flat_map(|t| [t.cos(), 0.0]).collect();
            Trajectory::from_samples(2, 1, times, states, ders)
        }
        CraftedSpec::SinWitness => disconnected_witness(&r.signal.segments()[0], horizon, dt)?
            .ok_or_else(|| Error::Precondition("every arc lies inside a strongly connected component".into())),
        CraftedSpec::Ray { speed } => {
            if !(*speed > 0.0) {
                return Err(Error::InvalidParameters(format!("ray speed {speed} must be positive")));
            }
            ray_solution(&r.initial, *speed, horizon, dt)
        }
    }
}

fn certificate(req: &CertificateRequest, r: &Resolved, horizon: f64) -> Result<ConnectivityCertificate> {
    let pick = |extended: bool| -> Result<GraphSignal> {
        Ok(if extended {
            r.field.lifted_signal()?.0
        } else {
            r.signal.clone()
        })
    };
    match req {
        CertificateRequest::Strong { extended } => {
            let s = pick(*extended)?;
            if s.segment_count() != 1 {
                return Err(Error::InvalidParameters("strong certificate needs a static graph".into()));
            }
            certify_static(&s.segments()[0], Connectivity::Strong, None)
        }
        CertificateRequest::Usc {
            period,
            delta,
            horizon: h,
            extended,
        }
        | CertificateRequest::Uqsc {
            period,
            delta,
            horizon: h,
            extended,
        } => {
            let s = pick(*extended)?;
            let h = h.unwrap_or(horizon.max(s.last_breakpoint() + period));
            let mut check = if matches!(req, CertificateRequest::Usc { .. }) {
                WindowCheck::usc(*period, *delta, h)
            } else {
                WindowCheck::uqsc(*period, *delta, h)
            };
            check.execution = Execution::Sequential;
            certify_windows(&s, &check)
        }
        CertificateRequest::Isc { horizon: h, mass } => certify_isc_proxy(&r.signal, h.unwrap_or(horizon), *mass),
        CertificateRequest::CutBalance { k } => certify_cut_balance_signal(&r.signal, *k),
        CertificateRequest::TypeSymmetry { k } => certify_type_symmetry_signal(&r.signal, *k),
    }
}

/// Prepends the virtual agent held at zero.
fn with_virtual_agent(lifted: &Trajectory) -> Result<Trajectory> {
    let n = lifted.agents();
    let mut states = Vec::with_capacity(lifted.len() * (n + 1));
    let mut ders = Vec::with_capacity(lifted.len() * (n + 1));
    for k in 0..lifted.len() {
        states.push(0.0);
        states.extend_from_slice(lifted.state(k));
        ders.push(0.0);
        ders.extend_from_slice(lifted.derivative(k));
    }
    Trajectory::from_samples(n + 1, 1, lifted.times().to_vec(), states, ders)
}

struct Ledger {
    report: DiagnosticsReport,
    failure: Option<ExitStatus>,
}

impl Ledger {
    fn verdict(&mut self, name: &str, holds: bool) {
        self.report.verdicts.insert(name.to_string(), holds);
    }

    /// Records a diagnostic that could not be evaluated.
    fn attempt<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.report.notes.push(format!("{name}: {e}"));
                self.verdict(name, false);
                let s = ExitStatus::from_error(&e);
                self.failure = Some(self.failure.map_or(s, |f| f.max(s)));
                None
            }
        }
    }
}

/// Resolves, certifies, integrates and diagnoses a scenario without touching
/// the disk. Errors are schema-level problems; failed preconditions and
/// verdicts are reported through [`Evaluation::status`].
pub fn evaluate(sc: &Scenario, base: &Path) -> Result<Evaluation> {
    sc.validate()?;
    let r = resolve(sc, base)?;
    let req = &sc.diagnostics;
    let tol = req.tolerances;
    let mut ledger = Ledger {
        report: DiagnosticsReport::default(),
        failure: None,
    };
    let done = |ledger: Ledger, trajectory, residual, ordering, fallback: ExitStatus| {
        let verdicts_ok = ledger.report.verdicts.values().all(|&v| v);
        let status = ledger.failure.unwrap_or(if verdicts_ok { fallback } else { ExitStatus::VerdictFailed });
        Evaluation {
            scenario: sc.clone(),
            trajectory,
            residual,
            ordering,
            report: ledger.report,
            status,
        }
    };

    let mut inconclusive = false;
    let mut certified = true;
    for c in &req.certificates {
        let Some(cert) = ledger.attempt("certificate", certificate(c, &r, sc.horizon)) else {
            certified = false;
            continue;
        };
        match cert.verdict {
            Verdict::Holds => {}
            Verdict::Fails => certified = false,
            Verdict::Inconclusive => inconclusive = true,
        }
        ledger.report.certificates.push(cert);
    }
    if !certified {
        ledger.report.notes.push("a requested certificate does not hold; nothing was integrated".into());
        ledger.failure = Some(ledger.failure.map_or(ExitStatus::Precondition, |f| f.max(ExitStatus::Precondition)));
        return Ok(done(ledger, None, None, None, ExitStatus::Precondition));
    }
    let fallback = if inconclusive { ExitStatus::Inconclusive } else { ExitStatus::Ok };

    let dt = sc.step * sc.record_every as f64;
    let traj = match &sc.crafted {
        Some(spec) => {
            if r.field.kind() != ProtocolKind::Consensus || r.field.state_dim() != 1 {
                return Err(Error::Schema("crafted solutions need the scalar consensus protocol".into()));
            }
            crafted_trajectory(spec, &r, sc.horizon, dt)?
        }
        None => integrate_with(
            &r.field,
            &r.initial,
            &IntegrationOptions::new(sc.horizon, sc.step).record_every(sc.record_every),
        )?,
    };
    ledger.report.boundedness = Some(boundedness(&traj));
    if traj.diverged() {
        ledger.report.notes.push("integration diverged; diagnostics skipped".into());
        ledger.failure = Some(ExitStatus::Diverged);
        return Ok(done(ledger, Some(traj), None, None, ExitStatus::Diverged));
    }

    let lift = if sc.crafted.is_some() {
        Lift::Identity
    } else {
        r.field.natural_lift()
    };
    let lifted = lift_trajectory(&traj, &lift)?;
    let (lsig, ropts) = r.field.lifted_signal()?;
    let residual = residual_trace_with(&traj, &lsig, &lift, &ropts)?;
    let ordering = ordering_trace(&lifted)?;
    let extended = if ropts.virtual_agent {
        with_virtual_agent(&lifted)?
    } else {
        lifted.clone()
    };
    let target = r.field.target();
    let need_target = || target.clone().ok_or_else(|| Error::Precondition("protocol has no target set".into()));
    let observe = |on: Observable| -> Result<Trajectory> {
        match on {
            Observable::State => Ok(traj.clone()),
            Observable::Lifted => Ok(lifted.clone()),
            Observable::Distance => distance_trajectory(&traj, &need_target()?),
        }
    };

    if req.residual {
        let start = ((1.0 - DEFAULT_TAIL_FRACTION) * residual.window_count() as f64) as usize;
        let tail_window_integral = (start..residual.window_count())
            .flat_map(|k| residual.window_row(k).iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        let min = residual.min();
        let holds = min >= -tol.res;
        ledger.report.residual = Some(ResidualSummary {
            holds,
            min,
            tol: tol.res,
            tail_window_integral,
            window: [traj.times()[0], traj.horizon()],
            note: "checked at recorded samples only".into(),
        });
        ledger.verdict("residual", holds);
    }
    if let Some(c) = &req.consensus {
        if let Some(t) = ledger.attempt("consensus", observe(c.on)) {
            let v = consensus_verdict(&t, c.tol, c.tail_fraction);
            ledger.verdict("consensus", v.class == c.expect);
            ledger.report.consensus = Some(v);
        }
    }
    if let Some(c) = &req.rate {
        let reference = c.reference.unwrap_or_else(|| match r.field.leader() {
            Some(l) if c.on == Observable::State => r.initial[l * r.field.state_dim()],
            _ => 0.0,
        });
        let fit = observe(c.on).and_then(|t| exponential_rate_fit(&t, reference, c.floor));
        if let Some(fit) = ledger.attempt("rate", fit) {
            ledger.verdict("rate", fit.rate < 0.0 && fit.quality > c.min_quality);
            ledger.report.rate = Some(fit);
        }
    }
    if req.monotone_max {
        if let Some(m) = ledger.attempt("monotone_max", monotone_max_check(&lifted, tol.res)) {
            ledger.verdict("monotone_max", m.holds);
            ledger.report.monotone_max = Some(m);
        }
    }
    if req.leader_ordering {
        let check = r
            .field
            .leader()
            .ok_or_else(|| Error::Precondition("protocol has no leader".into()))
            .and_then(|l| leader_ordering_check(&traj, l, tol.res));
        if let Some(o) = ledger.attempt("leader_ordering", check) {
            ledger.verdict("leader_ordering", o.holds);
            ledger.report.leader_ordering = Some(o);
        }
    }
    if let Some(c) = &req.summability {
        if let Some(s) = ledger.attempt("summability", summability_check(&extended, &lsig, c.tol)) {
            ledger.verdict("summability", s.all_plateau);
            ledger.report.summability = Some(s);
        }
    }
    if let Some(c) = &req.equidistance {
        let v = need_target().and_then(|t| equidistance_verdict(&traj, &t, c.tol));
        if let Some(v) = ledger.attempt("equidistance", v) {
            ledger.verdict("equidistance", v.holds && c.max_d_star.is_none_or(|m| v.d_star < m));
            ledger.report.equidistance = Some(v);
        }
    }
    if let Some(c) = &req.terminal_distance {
        let v = need_target().and_then(|t| terminal_distance(&traj, &t, c.tol));
        if let Some(v) = ledger.attempt("terminal_distance", v) {
            ledger.verdict("terminal_distance", v.holds);
            ledger.report.terminal_distance = Some(v);
        }
    }
    if let Some(c) = &req.modulus {
        if let Some(v) = ledger.attempt("modulus", modulus_consensus_verdict(&traj, c.tol)) {
            ledger.verdict("modulus", v.holds && c.expect.is_none_or(|e| e == v.regime));
            ledger.report.modulus = Some(v);
        }
    }
    if let Some(c) = &req.surround {
        let v = match (r.field.generators(), &target) {
            (Some(g), Some(t)) => surround_verdict(&traj, g, t, c.tol, c.tail_fraction),
            _ => Err(Error::Precondition("surround verdict needs consistency generators".into())),
        };
        if let Some(v) = ledger.attempt("surround", v) {
            ledger.verdict("surround", v.holds);
            ledger.report.surround = Some(v);
        }
    }
    if let Some(c) = &req.contraction {
        let v = contraction_certificate(&lsig, c.period, c.delta, &extended, tol.res);
        if let Some(v) = ledger.attempt("contraction", v) {
            ledger.verdict("contraction", v.violation_count == 0);
            ledger.report.contraction = Some(v);
        }
    }
    if let Some(c) = &req.sweep {
        let len = r.field.agents() * r.field.state_dim();
        let sweep = sweep_initial_states(c, len, sc.seed).and_then(|inits| {
            let crafted = c
                .crafted
                .iter()
                .map(|spec| crafted_trajectory(spec, &r, sc.horizon, dt))
                .collect::<Result<Vec<_>>>()?;
            let opts = SweepOptions {
                horizon: sc.horizon,
                step: sc.step,
                record_every: sc.record_every,
                tol: c.tol,
                tail_fraction: DEFAULT_TAIL_FRACTION,
                execution: Execution::default(),
            };
            dichotomy_sweep(&r.field, &inits, &crafted, &opts)
        });
        if let Some(s) = ledger.attempt("sweep", sweep) {
            let count = |class| s.runs.iter().filter(|run| run.class == class).count();
            let holds = c.expect.absent.iter().all(|&k| count(k) == 0)
                && c.expect.present.iter().all(|&k| count(k) > 0);
            ledger.verdict("sweep", holds);
            ledger.report.sweep = Some(s);
        }
    }
    Ok(done(ledger, Some(traj), Some(residual), Some(ordering), fallback))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    f(BufWriter::new(File::create(path)?))
}

/// Writes `scenario.json`, `trajectory.csv`, `residual.csv`, `ordering.csv`
/// and `diagnostics.json` into `<out_root>/<name>-<seed>/`.
pub fn write_artifacts(eval: &Evaluation, out_root: &Path) -> Result<PathBuf> {
    let dir = out_root.join(eval.scenario.slug());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("scenario.json"), eval.scenario.to_json()?)?;
    if let Some(t) = &eval.trajectory {
        write_with(&dir.join("trajectory.csv"), |w| t.write_csv(w))?;
    }
    if let Some(r) = &eval.residual {
        write_with(&dir.join("residual.csv"), |w| r.write_csv(w))?;
    }
    if let Some(o) = &eval.ordering {
        write_with(&dir.join("ordering.csv"), |w| o.write_csv(w))?;
    }
    let doc = DiagnosticsDoc {
        scenario: &eval.scenario.name,
        seed: eval.scenario.seed,
        status: eval.status,
        exit_code: eval.status.code(),
        report: &eval.report,
    };
    fs::write(dir.join("diagnostics.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(dir)
}

pub fn run(sc: &Scenario, base: &Path, out_root: &Path) -> Result<RunOutcome> {
    let eval = evaluate(sc, base)?;
    let dir = write_artifacts(&eval, out_root)?;
    log::info!("{}: {:?} -> {}", sc.slug(), eval.status, dir.display());
    Ok(RunOutcome {
        dir,
        status: eval.status,
        report: eval.report,
    })
}

