//! Connectivity certificates: static strong/quasi-strong connectivity,
//! uniform (windowed) connectivity, the integral proxy for infinite
//! connectivity, and cut balance.

use serde::{Deserialize, Serialize};

use super::connectivity::{quasi_strongly_connected, scc_decomposition, strongly_connected};
use super::{truncate_unchecked, GraphSignal, WeightedDigraph};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Largest node count accepted by the exhaustive cut enumeration.
pub const MAX_EXHAUSTIVE_NODES: usize = 20;

const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Strong,
    QuasiStrong,
    DeltaStrong,
    DeltaQuasiStrong,
    Usc,
    Uqsc,
    IscProxy,
    CutBalance,
    TypeSymmetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Holds => 0,
            Verdict::Fails => 1,
            Verdict::Inconclusive => 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Window whose truncated union lacks the required connectivity, with the
    /// strongly connected components of that union.
    Window {
        start: f64,
        end: f64,
        components: Vec<Vec<usize>>,
    },
    /// Cut `S` violating the balance bound.
    Cut {
        nodes: Vec<usize>,
        outflow: f64,
        inflow: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        segment: Option<usize>,
    },
    /// Pair `(i, j)` with `a_ij` and `a_ji` out of ratio.
    Pair {
        i: usize,
        j: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        segment: Option<usize>,
    },
    Components { components: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityCertificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    pub parameters: CertificateParameters,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows_checked: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConnectivityCertificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    fn new(kind: CertificateKind, verdict: Verdict, parameters: CertificateParameters) -> Self {
        Self {
            kind,
            verdict,
            parameters,
            witness: None,
            windows_checked: None,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Strong,
    QuasiStrong,
}

impl Connectivity {
    pub fn check(self, g: &WeightedDigraph) -> bool {
        match self {
            Connectivity::Strong => strongly_connected(g),
            Connectivity::QuasiStrong => quasi_strongly_connected(g),
        }
    }
}

/// Static (optionally delta-truncated) strong or quasi-strong connectivity.
pub fn certify_static(
    g: &WeightedDigraph,
    connectivity: Connectivity,
    delta: Option<f64>,
) -> Result<ConnectivityCertificate> {
    let graph = match delta {
        Some(d) => super::truncate(g, d)?,
        None => g.clone(),
    };
    let kind = match (connectivity, delta.is_some()) {
        (Connectivity::Strong, false) => CertificateKind::Strong,
        (Connectivity::QuasiStrong, false) => CertificateKind::QuasiStrong,
        (Connectivity::Strong, true) => CertificateKind::DeltaStrong,
        (Connectivity::QuasiStrong, true) => CertificateKind::DeltaQuasiStrong,
    };
    let ok = connectivity.check(&graph);
    let mut cert = ConnectivityCertificate::new(
        kind,
        if ok { Verdict::Holds } else { Verdict::Fails },
        CertificateParameters {
            delta,
            ..Default::default()
        },
    );
    if !ok {
        cert.witness = Some(Witness::Components {
            components: scc_decomposition(&graph).components,
        });
    }
    Ok(cert)
}

/// Parameters of a sliding-window connectivity check.
#[derive(Debug, Clone, Copy)]
pub struct WindowCheck {
    /// Window length `T`.
    pub period: f64,
    /// Truncation threshold on integrated weight.
    pub delta: f64,
    /// Window starts range over `[0, horizon - period]`.
    pub horizon: f64,
    /// Extra grid of window starts; defaults to `period / 10`.
    pub stride: Option<f64>,
    pub connectivity: Connectivity,
    pub execution: Execution,
}

impl WindowCheck {
    pub fn usc(period: f64, delta: f64, horizon: f64) -> Self {
        Self {
            period,
            delta,
            horizon,
            stride: None,
            connectivity: Connectivity::Strong,
            execution: Execution::default(),
        }
    }

    pub fn uqsc(period: f64, delta: f64, horizon: f64) -> Self {
        Self {
            connectivity: Connectivity::QuasiStrong,
            ..Self::usc(period, delta, horizon)
        }
    }
}

/// Uniform strong connectivity over `[0, horizon]`.
pub fn certify_usc(
    s: &GraphSignal,
    period: f64,
    delta: f64,
    horizon: f64,
) -> Result<ConnectivityCertificate> {
    certify_windows(s, &WindowCheck::usc(period, delta, horizon))
}

/// Uniform quasi-strong connectivity over `[0, horizon]`.
pub fn certify_uqsc(
    s: &GraphSignal,
    period: f64,
    delta: f64,
    horizon: f64,
) -> Result<ConnectivityCertificate> {
    certify_windows(s, &WindowCheck::uqsc(period, delta, horizon))
}

/// Checks that every window union `int_t^{t+T} A`, truncated at `delta`, has
/// the requested connectivity for all starts `t` in `[0, horizon - T]`.
///
/// Each entry of the window union is piecewise linear in `t` with kinks only
/// where `t` or `t + T` meets a breakpoint. Between kinks an arc can enter or
/// leave the truncated graph only where its integrated weight crosses
/// `delta`, and the arc set on an open sub-interval is contained in the sets
/// at its ends. Evaluating at kinks, crossings' midpoints and the stride grid
/// therefore decides the property for every real window start.
pub fn certify_windows(s: &GraphSignal, check: &WindowCheck) -> Result<ConnectivityCertificate> {
    let WindowCheck {
        period,
        delta,
        horizon,
        connectivity,
        execution,
        ..
    } = *check;
    if !(period > 0.0) {
        return Err(Error::InvalidParameters(format!("window length {period} must be positive")));
    }
    if !(delta > 0.0) {
        return Err(Error::NonPositiveThreshold(delta));
    }
    if !(horizon >= period) {
        return Err(Error::HorizonTooShort {
            horizon,
            window: period,
        });
    }
    let stride = check.stride.unwrap_or(period / 10.0);
    if !(stride > 0.0) {
        return Err(Error::InvalidParameters("stride must be positive".into()));
    }
    let last_start = horizon - period;

    let mut starts = vec![0.0, last_start];
    for &b in s.breakpoints() {
        for p in [b, b - period] {
            if p > 0.0 && p < last_start {
                starts.push(p);
            }
        }
    }
    let grid = (last_start / stride).floor() as usize;
    starts.extend((1..=grid).map(|k| k as f64 * stride).filter(|&p| p < last_start));
    starts.sort_by(f64::total_cmp);
    starts.dedup();

    // window sums pick up rounding; an arc at exactly delta must survive
    let cutoff = delta * (1.0 - REL_SLACK);
    let n = s.n();
    let passes = |t: f64| -> Option<WeightedDigraph> {
        let union = truncate_unchecked(&s.union_unchecked(t, t + period), cutoff);
        if connectivity.check(&union) {
            None
        } else {
            Some(union)
        }
    };

    // job i: the start point itself plus the interior of [starts[i], starts[i+1]]
    let jobs = par::map_range(execution, starts.len(), |i| {
        let u = starts[i];
        let mut checked = 1;
        if let Some(g) = passes(u) {
            return (checked, Some((u, g)));
        }
        let Some(&v) = starts.get(i + 1) else {
            return (checked, None);
        };
        let lo = s.union_unchecked(u, u + period);
        let hi = s.union_unchecked(v, v + period);
        let mut cuts = vec![u, v];
        for e in 0..n * n {
            let fu = lo.as_slice()[e] - cutoff;
            let fv = hi.as_slice()[e] - cutoff;
            if (fu >= 0.0) != (fv >= 0.0) {
                let c = u + fu / (fu - fv) * (v - u);
                cuts.push(c.clamp(u, v));
            }
        }
        if cuts.len() > 2 {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                if w[1] > w[0] {
                    let mid = 0.5 * (w[0] + w[1]);
                    checked += 1;
                    if let Some(g) = passes(mid) {
                        return (checked, Some((mid, g)));
                    }
                }
            }
        }
        (checked, None)
    });

    let windows_checked = jobs.iter().map(|j| j.0).sum();
    let failure = jobs.into_iter().find_map(|j| j.1);
    let kind = match connectivity {
        Connectivity::Strong => CertificateKind::Usc,
        Connectivity::QuasiStrong => CertificateKind::Uqsc,
    };
    let params = CertificateParameters {
        period: Some(period),
        delta: Some(delta),
        horizon: Some(horizon),
        stride: Some(stride),
        ..Default::default()
    };
    let mut cert = ConnectivityCertificate::new(
        kind,
        if failure.is_some() { Verdict::Fails } else { Verdict::Holds },
        params,
    );
    cert.windows_checked = Some(windows_checked);
    let coverage = if last_start >= s.last_breakpoint() {
        "every window start t >= 0 (the signal is constant past its last breakpoint)".to_string()
    } else {
        format!("every window start in [0, {last_start}]")
    };
    cert.note = Some(format!(
        "starts checked at breakpoint kinks, threshold crossings and a stride-{stride} grid; \
         verdict covers {coverage}"
    ));
    if let Some((t, g)) = failure {
        cert.witness = Some(Witness::Window {
            start: t,
            end: t + period,
            components: scc_decomposition(&g).components,
        });
    }
    Ok(cert)
}

/// Finite-horizon proxy for infinite strong connectivity: arcs whose
/// integrated weight over `[0, horizon]` reaches `mass_threshold` must form a
/// strongly connected graph. Never reports `Fails`, since finite data cannot
/// rule out divergence of the integral.
pub fn certify_isc_proxy(
    s: &GraphSignal,
    horizon: f64,
    mass_threshold: f64,
) -> Result<ConnectivityCertificate> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameters(format!("horizon {horizon} must be positive")));
    }
    if !(mass_threshold > 0.0) {
        return Err(Error::NonPositiveThreshold(mass_threshold));
    }
    let heavy = truncate_unchecked(&s.union_unchecked(0.0, horizon), mass_threshold);
    let ok = strongly_connected(&heavy);
    let mut cert = ConnectivityCertificate::new(
        CertificateKind::IscProxy,
        if ok { Verdict::Holds } else { Verdict::Inconclusive },
        CertificateParameters {
            horizon: Some(horizon),
            mass_threshold: Some(mass_threshold),
            ..Default::default()
        },
    );
    cert.note = Some("proxy verdict: integrated mass over a finite horizon".into());
    if !ok {
        cert.witness = Some(Witness::Components {
            components: scc_decomposition(&heavy).components,
        });
    }
    Ok(cert)
}

fn check_ratio(k: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::InvalidParameters(format!("balance ratio {k} must be >= 1")));
    }
    Ok(())
}

#[inline]
fn balanced(out: f64, inflow: f64, k: f64) -> bool {
    let slack = REL_SLACK * (out + inflow);
    out <= k * inflow + slack && inflow <= k * out + slack
}

/// Flows across the cut given by `mask`: (leaving, entering).
fn cut_flows(g: &WeightedDigraph, mask: u32) -> (f64, f64) {
    let n = g.n();
    let mut out = 0.0;
    let mut inflow = 0.0;
    for j in (0..n).filter(|j| mask >> j & 1 == 1) {
        for k in (0..n).filter(|k| mask >> k & 1 == 0) {
            out += g.weight(k, j);
            inflow += g.weight(j, k);
        }
    }
    (out, inflow)
}

fn first_unbalanced_cut(g: &WeightedDigraph, k: f64, exec: Execution) -> Result<Option<Witness>> {
    let n = g.n();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::TooManyNodes {
            n,
            max: MAX_EXHAUSTIVE_NODES,
        });
    }
    if n < 2 {
        return Ok(None);
    }
    // a cut and its complement impose the same condition: skip masks with the top node
    let total: u32 = 1 << (n - 1);
    const CHUNK: u32 = 4096;
    let chunks = total.div_ceil(CHUNK) as usize;
    let hit = par::find_first(exec, chunks, |c| {
        let lo = (c as u32 * CHUNK).max(1);
        let hi = ((c as u32 + 1) * CHUNK).min(total);
        (lo..hi).find_map(|mask| {
            let (out, inflow) = cut_flows(g, mask);
            (!balanced(out, inflow, k)).then_some((mask, out, inflow))
        })
    });
    Ok(hit.map(|(_, (mask, outflow, inflow))| Witness::Cut {
        nodes: (0..n).filter(|j| mask >> j & 1 == 1).collect(),
        outflow,
        inflow,
        segment: None,
    }))
}

/// Exhaustive cut-balance check over all `2^n` cuts (`n <= 20`).
pub fn certify_cut_balance(g: &WeightedDigraph, k: f64) -> Result<ConnectivityCertificate> {
    certify_cut_balance_with(g, k, Execution::default())
}

pub fn certify_cut_balance_with(g: &WeightedDigraph, k: f64, exec: Execution) -> Result<ConnectivityCertificate> {
    check_ratio(k)?;
    let witness = first_unbalanced_cut(g, k, exec)?;
    Ok(cut_certificate(witness, k))
}

/// Cut balance of every segment of a signal.
pub fn certify_cut_balance_signal(s: &GraphSignal, k: f64) -> Result<ConnectivityCertificate> {
    check_ratio(k)?;
    for (idx, g) in s.segments().iter().enumerate() {
        if let Some(mut w) = first_unbalanced_cut(g, k, Execution::default())? {
            if let Witness::Cut { segment, .. } = &mut w {
                *segment = Some(idx);
            }
            return Ok(cut_certificate(Some(w), k));
        }
    }
    Ok(cut_certificate(None, k))
}

fn cut_certificate(witness: Option<Witness>, k: f64) -> ConnectivityCertificate {
    let mut cert = ConnectivityCertificate::new(
        CertificateKind::CutBalance,
        if witness.is_some() { Verdict::Fails } else { Verdict::Holds },
        CertificateParameters {
            k: Some(k),
            ..Default::default()
        },
    );
    cert.witness = witness;
    cert
}

fn unbalanced_pair(g: &WeightedDigraph, k: f64) -> Option<(usize, usize)> {
    let n = g.n();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .find(|&(i, j)| !balanced(g.weight(i, j), g.weight(j, i), k))
}

/// Pairwise condition `a_ji / K <= a_ij <= K a_ji`; sufficient for cut balance
/// with the same `K`.
pub fn certify_type_symmetry(g: &WeightedDigraph, k: f64) -> Result<bool> {
    check_ratio(k)?;
    Ok(unbalanced_pair(g, k).is_none())
}

pub fn certify_type_symmetry_signal(s: &GraphSignal, k: f64) -> Result<ConnectivityCertificate> {
    check_ratio(k)?;
    let witness = s
        .segments()
        .iter()
        .enumerate()
        .find_map(|(idx, g)| {
            unbalanced_pair(g, k).map(|(i, j)| Witness::Pair {
                i,
                j,
                segment: Some(idx),
            })
        });
    let mut cert = ConnectivityCertificate::new(
        CertificateKind::TypeSymmetry,
        if witness.is_some() { Verdict::Fails } else { Verdict::Holds },
        CertificateParameters {
            k: Some(k),
            ..Default::default()
        },
    );
    cert.witness = witness;
    Ok(cert)
}
