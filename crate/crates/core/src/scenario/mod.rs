//! Reproducible scenario files: schema, random graph generators, the built-in
//! registry and the runner that writes artifacts to disk.
//!
//! Randomness comes from ChaCha8 seeded with the scenario seed; each
//! component draws from its own stream so that, for instance, changing the
//! initial-state spec leaves the generated graph untouched:
//!
//! | stream | component |
//! |--------|-----------|
//! | 1 | graph generator |
//! | 2 | initial states |
//! | 3 | protocol parameters |
//! | 4 | sweep initial states |

mod generate;
mod registry;
mod run;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{ModulusRegime, TrajectoryClass, DEFAULT_TAIL_FRACTION};
use crate::convex::ConvexSet;
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, SignedSignal};
use crate::protocols::{
    aggregation_field, altafini_field, consensus_field, containment_field, leader_field,
    optimal_consensus_field, surrounding_field, AggregationParams, AltafiniParams, AnchorRule,
    ContainmentParams, ProtocolField, SurroundingParams, WeightSpec,
};
use crate::tolerance::Tolerances;

pub use generate::{generate, Advertised, Generated, GeneratorKind, GeneratorSpec, WindowParams};
pub use registry::{builtin, builtin_names};
pub use run::{evaluate, run, write_artifacts, Evaluation, ExitStatus, RunOutcome};

pub const SCENARIO_VERSION: u32 = 1;

pub const GRAPH_STREAM: u64 = 1;
pub const INITIAL_STREAM: u64 = 2;
pub const PARAMS_STREAM: u64 = 3;
pub const SWEEP_STREAM: u64 = 4;

/// Generator for one component of a scenario.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub graph: GraphSource,
    pub protocol: ProtocolSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Replaces integration by a closed-form solution of the inequality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crafted: Option<CraftedSpec>,
    /// Connectivity parameters promised by the generator that emitted the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advertised: Option<Advertised>,
    #[serde(default)]
    pub diagnostics: DiagnosticRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Signal(GraphSignal),
    Generator(GeneratorSpec),
    /// Signal JSON, relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    Consensus {
        #[serde(default = "one")]
        dim: usize,
    },
    Leader {
        #[serde(default)]
        leader: usize,
        #[serde(default = "one")]
        dim: usize,
    },
    Aggregation {
        target: ConvexSet,
        gains: GainSpec,
        anchors: AnchorSpec,
    },
    Containment {
        leader_positions: Vec<Vec<f64>>,
        leader_gains: LeaderGainSpec,
    },
    OptimalConsensus {
        sets: Vec<ConvexSet>,
    },
    Surrounding {
        target: ConvexSet,
        weights: WeightSpec,
    },
    Altafini {
        signs: SignPattern,
    },
}

/// Informed-agent gains `a_i0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GainSpec {
    /// `[segment][agent]`; a single row is broadcast.
    Explicit(Vec<Vec<f64>>),
    /// The listed agents are informed at all times.
    Persistent { agents: Vec<usize>, gain: f64 },
    /// Agent `k mod n` is the only informed one on segment `k`.
    Rotating { gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnchorSpec {
    Projection,
    /// One anchor shared by every agent and segment.
    Point(Vec<f64>),
    /// `[segment][agent][coord]`.
    Explicit(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderGainSpec {
    /// `[segment][follower][leader]`.
    Explicit(Vec<Vec<Vec<f64>>>),
    /// Every follower listens to every leader.
    Uniform { gain: f64 },
    /// Only the listed followers listen, to every leader.
    Persistent { followers: Vec<usize>, gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignPattern {
    /// Row-major `n x n` entries in `{-1, 0, 1}`.
    Matrix(Vec<f64>),
    /// Group label per agent: cooperative inside a group, antagonistic across.
    Bipartite(Vec<usize>),
    /// Sign-symmetric pattern, each pair antagonistic with the given
    /// probability.
    Random { negative_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Stacked agent states.
    States(Vec<f64>),
    Uniform { low: f64, high: f64 },
    /// Leader at `leader_value`, followers uniform in
    /// `[leader_value + low, leader_value + high]`.
    AboveLeader {
        leader_value: f64,
        low: f64,
        high: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CraftedSpec {
    /// `x_1 = sin t`, `x_2 = 2` on the graph where only agent 1 listens.
    Example1,
    /// Bounded non-convergent witness built from the first segment.
    SinWitness,
    /// `x(t) = x(0) - speed t 1`.
    Ray { speed: f64 },
}

/// What a consensus-type verdict looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    State,
    #[default]
    Lifted,
    /// Distances of the states to the protocol target.
    Distance,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_FRACTION
}

fn default_expect() -> TrajectoryClass {
    TrajectoryClass::Consensus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusRequest {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default = "default_expect")]
    pub expect: TrajectoryClass,
    #[serde(default)]
    pub on: Observable,
}

fn default_floor() -> f64 {
    1e-9
}

fn default_quality() -> f64 {
    0.99
}

fn state_observable() -> Observable {
    Observable::State
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRequest {
    #[serde(default = "state_observable")]
    pub on: Observable,
    /// Defaults to the leader's initial value, or 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_quality")]
    pub min_quality: f64,
}

fn default_plateau_tol() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummabilityRequest {
    #[serde(default = "default_plateau_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistanceRequest {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Also require `d_* < max_d_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_d_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceRequest {
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusRequest {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ModulusRegime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurroundRequest {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionRequest {
    pub period: f64,
    pub delta: f64,
}

/// Connectivity hypotheses checked before anything is integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateRequest {
    Strong {
        #[serde(default)]
        extended: bool,
    },
    Usc {
        period: f64,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        /// Certify the lifted graph with the virtual agent.
        #[serde(default)]
        extended: bool,
    },
    Uqsc {
        period: f64,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        #[serde(default)]
        extended: bool,
    },
    Isc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        mass: f64,
    },
    CutBalance {
        k: f64,
    },
    TypeSymmetry {
        k: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepExpectation {
    /// Classes that must not occur.
    #[serde(default)]
    pub absent: Vec<TrajectoryClass>,
    /// Classes that must occur at least once.
    #[serde(default)]
    pub present: Vec<TrajectoryClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub runs: usize,
    pub low: f64,
    pub high: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub crafted: Vec<CraftedSpec>,
    #[serde(default)]
    pub expect: SweepExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticRequest {
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<CertificateRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateRequest>,
    /// Nonnegativity of the lifted residual within the residual tolerance.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub residual: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub monotone_max: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub leader_ordering: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summability: Option<SummabilityRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equidistance: Option<EquidistanceRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_distance: Option<ToleranceRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surround: Option<SurroundRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepRequest>,
}

impl Scenario {
    /// Parses and validates scenario JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Reads a scenario file; relative `file` graph sources resolve against
    /// its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Schema(format!(
                "unsupported version {}, expected {SCENARIO_VERSION}",
                self.version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Schema(format!("invalid scenario name {:?}", self.name)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Schema(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.step > 0.0) || self.step > self.horizon {
            return Err(Error::Schema(format!("step {} must lie in (0, horizon]", self.step)));
        }
        if self.record_every == 0 {
            return Err(Error::Schema("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Output directory name, `<name>-<seed>`.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.name, self.seed)
    }
}

/// Scenario with every random or external component materialized.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub signal: GraphSignal,
    pub field: ProtocolField,
    pub initial: Vec<f64>,
    pub advertised: Option<Advertised>,
}

/// Builds the graph signal of a scenario.
pub fn resolve_graph(sc: &Scenario, base: &Path) -> Result<(GraphSignal, Option<Advertised>)> {
    match &sc.graph {
        GraphSource::Signal(s) => Ok((s.clone(), sc.advertised.clone())),
        GraphSource::File(p) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
            Ok((serde_json::from_str(&text)?, sc.advertised.clone()))
        }
        GraphSource::Generator(spec) => {
            let g = generate(spec, spec.seed.unwrap_or(sc.seed))?;
            Ok((g.signal, Some(g.advertised)))
        }
    }
}

pub fn resolve(sc: &Scenario, base: &Path) -> Result<Resolved> {
    let (signal, advertised) = resolve_graph(sc, base)?;
    let field = build_field(&sc.protocol, &signal, sc.seed)?;
    let initial = initial_states(&sc.initial, &field, sc.seed)?;
    Ok(Resolved {
        signal,
        field,
        initial,
        advertised,
    })
}

fn check_agent(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::InvalidParameters(format!("agent {i} out of range for n = {n}")));
    }
    Ok(())
}

fn build_field(spec: &ProtocolSpec, s: &GraphSignal, seed: u64) -> Result<ProtocolField> {
    let n = s.n();
    let segments = s.segment_count();
    match spec {
        ProtocolSpec::Consensus { dim } => Ok(consensus_field(s.clone(), *dim)),
        ProtocolSpec::Leader { leader, dim } => leader_field(s.clone(), *leader, *dim),
        ProtocolSpec::Aggregation {
            target,
            gains,
            anchors,
        } => {
            let gains = match gains {
                GainSpec::Explicit(g) => g.clone(),
                GainSpec::Persistent { agents, gain } => {
                    let mut row = vec![0.0; n];
                    for &i in agents {
                        check_agent(i, n)?;
                        row[i] = *gain;
                    }
                    vec![row]
                }
                GainSpec::Rotating { gain } => (0..segments)
                    .map(|k| (0..n).map(|i| if i == k % n { *gain } else { 0.0 }).collect())
                    .collect(),
            };
            let anchors = match anchors {
                AnchorSpec::Projection => AnchorRule::Projection,
                AnchorSpec::Point(p) => AnchorRule::Fixed {
                    points: vec![vec![p.clone(); n]],
                },
                AnchorSpec::Explicit(points) => AnchorRule::Fixed {
                    points: points.clone(),
                },
            };
            aggregation_field(
                s.clone(),
                AggregationParams {
                    target: target.clone(),
                    gains,
                    anchors,
                },
            )
        }
        ProtocolSpec::Containment {
            leader_positions,
            leader_gains,
        } => {
            let m = leader_positions.len();
            let leader_gains = match leader_gains {
                LeaderGainSpec::Explicit(g) => g.clone(),
                LeaderGainSpec::Uniform { gain } => vec![vec![vec![*gain; m]; n]],
                LeaderGainSpec::Persistent { followers, gain } => {
                    let mut seg = vec![vec![0.0; m]; n];
                    for &i in followers {
                        check_agent(i, n)?;
                        seg[i] = vec![*gain; m];
                    }
                    vec![seg]
                }
            };
            containment_field(
                s.clone(),
                ContainmentParams {
                    leader_positions: leader_positions.clone(),
                    leader_gains,
                },
            )
        }
        ProtocolSpec::OptimalConsensus { sets } => optimal_consensus_field(s.clone(), sets.clone()),
        ProtocolSpec::Surrounding { target, weights } => surrounding_field(
            s.clone(),
            SurroundingParams {
                target: target.clone(),
                weights: weights.clone(),
            },
        ),
        ProtocolSpec::Altafini { signs } => {
            let signs = sign_matrix(signs, n, seed)?;
            Ok(altafini_field(AltafiniParams {
                signs: SignedSignal::from_signs(s, &signs)?,
            }))
        }
    }
}

fn sign_matrix(p: &SignPattern, n: usize, seed: u64) -> Result<Vec<f64>> {
    match p {
        SignPattern::Matrix(m) => Ok(m.clone()),
        SignPattern::Bipartite(groups) => {
            if groups.len() != n {
                return Err(Error::InvalidParameters(format!(
                    "expected {n} group labels, got {}",
                    groups.len()
                )));
            }
            Ok((0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    if i == j {
                        0.0
                    } else if groups[i] == groups[j] {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect())
        }
        SignPattern::Random { negative_fraction } => {
            if !(0.0..=1.0).contains(negative_fraction) {
                return Err(Error::InvalidParameters(format!(
                    "negative_fraction {negative_fraction} must lie in [0, 1]"
                )));
            }
            let mut rng = rng_stream(seed, PARAMS_STREAM);
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let s = if rng.random_bool(*negative_fraction) { -1.0 } else { 1.0 };
                    m[i * n + j] = s;
                    m[j * n + i] = s;
                }
            }
            Ok(m)
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> Result<f64> {
    if !(low <= high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::InvalidParameters(format!("invalid range [{low}, {high}]")));
    }
    Ok(if low == high { low } else { rng.random_range(low..high) })
}

fn initial_states(spec: &InitialSpec, field: &ProtocolField, seed: u64) -> Result<Vec<f64>> {
    use crate::dynamics::VectorField;
    let len = field.agents() * field.state_dim();
    let mut rng = rng_stream(seed, INITIAL_STREAM);
    match spec {
        InitialSpec::States(x) => {
            if x.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: x.len(),
                });
            }
            Ok(x.clone())
        }
        InitialSpec::Uniform { low, high } => (0..len).map(|_| uniform(&mut rng, *low, *high)).collect(),
        InitialSpec::AboveLeader {
            leader_value,
            low,
            high,
        } => {
            let leader = field
                .leader()
                .ok_or_else(|| Error::InvalidParameters("above_leader needs a leader protocol".into()))?;
            if *low < 0.0 {
                return Err(Error::InvalidParameters("above_leader needs low >= 0".into()));
            }
            let d = field.state_dim();
            (0..len)
                .map(|k| {
                    if k / d == leader {
                        Ok(*leader_value)
                    } else {
                        Ok(leader_value + uniform(&mut rng, *low, *high)?)
                    }
                })
                .collect()
        }
    }
}

/// Initial states of a sweep, one vector per run.
pub fn sweep_initial_states(req: &SweepRequest, len: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_stream(seed, SWEEP_STREAM);
    (0..req.runs)
        .map(|_| (0..len).map(|_| uniform(&mut rng, req.low, req.high)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::TrajectoryClass;

    fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    }

    #[test]
    fn registry_exit_codes_match_verdicts() {
        for name in builtin_names() {
            let e = evaluate(&builtin(name).unwrap(), Path::new(".")).unwrap();
            assert_eq!(e.status, ExitStatus::Ok, "{name}: {:?} {:?}", e.report.verdicts, e.report.notes);
            assert!(!e.report.verdicts.is_empty(), "{name} requests no verdict");
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sc = builtin("altafini").unwrap();
        let ra = run(&sc, Path::new("."), a.path()).unwrap();
        let rb = run(&sc, Path::new("."), b.path()).unwrap();
        assert_eq!(ra.dir.file_name().unwrap(), "altafini-1");
        let files = read_all(&ra.dir);
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            ["diagnostics.json", "ordering.csv", "residual.csv", "scenario.json", "trajectory.csv"]
        );
        assert_eq!(files, read_all(&rb.dir));

        // the stored scenario reproduces the run
        let (stored, base) = Scenario::load(&ra.dir.join("scenario.json")).unwrap();
        let c = tempfile::tempdir().unwrap();
        let rc = run(&stored, &base, c.path()).unwrap();
        assert_eq!(files, read_all(&rc.dir));
    }

    #[test]
    fn streams_are_independent() {
        let mut sc = builtin("aggregation-usc").unwrap();
        let first = resolve(&sc, Path::new(".")).unwrap();
        sc.initial = InitialSpec::Uniform { low: 0.0, high: 1.0 };
        let second = resolve(&sc, Path::new(".")).unwrap();
        assert_eq!(first.signal, second.signal);
        assert_ne!(first.initial, second.initial);
        sc.seed = 2;
        assert_ne!(resolve(&sc, Path::new(".")).unwrap().signal, first.signal);
    }

    #[test]
    fn schema_violations() {
        let good = builtin("example1").unwrap().to_json().unwrap();
        assert!(Scenario::from_json(&good).is_ok());
        assert!(matches!(Scenario::from_json("{ not json"), Err(Error::Json(_))));
        let extra = good.replacen("\"seed\"", "\"colour\": 1, \"seed\"", 1);
        assert!(matches!(Scenario::from_json(&extra), Err(Error::Json(_))));
        let v2 = good.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(Scenario::from_json(&v2), Err(Error::Schema(_))));
        let no_step = good.replacen("\"step\": 0.001", "\"step\": 0.0", 1);
        assert!(matches!(Scenario::from_json(&no_step), Err(Error::Schema(_))));
        let bad_kind = good.replacen("\"kind\": \"consensus\"", "\"kind\": \"flocking\"", 1);
        assert!(Scenario::from_json(&bad_kind).is_err());
        for e in [
            Error::Json(serde_json::from_str::<u8>("x").unwrap_err()),
            Error::Schema(String::new()),
        ] {
            assert_eq!(ExitStatus::from_error(&e).code(), 2);
        }
        assert_eq!(ExitStatus::from_error(&Error::Precondition(String::new())).code(), 3);
        assert_eq!(ExitStatus::from_error(&Error::Diverged).code(), 4);
    }

    #[test]
    fn failed_certificate_is_a_precondition_failure() {
        let mut sc = builtin("dichotomy-static-disconnected").unwrap();
        sc.diagnostics.certificates = vec![CertificateRequest::Strong { extended: false }];
        let e = evaluate(&sc, Path::new(".")).unwrap();
        assert_eq!(e.status.code(), 3);
        assert!(e.trajectory.is_none());
        assert!(!e.report.certificates[0].holds());
    }

    #[test]
    fn failed_verdict_and_inconclusive_certificate() {
        let mut sc = builtin("example1").unwrap();
        sc.diagnostics.consensus.as_mut().unwrap().expect = TrajectoryClass::Consensus;
        assert_eq!(evaluate(&sc, Path::new(".")).unwrap().status.code(), 1);

        let mut sc = builtin("example1").unwrap();
        sc.diagnostics.certificates = vec![CertificateRequest::Isc {
            horizon: None,
            mass: 1.0,
        }];
        assert_eq!(evaluate(&sc, Path::new(".")).unwrap().status.code(), 5);
    }

    #[test]
    fn graph_file_resolves_relative_to_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = builtin("altafini-bipartite").unwrap();
        let GraphSource::Signal(s) = &sc.graph else { unreachable!() };
        std::fs::write(dir.path().join("g.json"), serde_json::to_string(s).unwrap()).unwrap();
        sc.graph = GraphSource::File("g.json".into());
        std::fs::write(dir.path().join("sc.json"), sc.to_json().unwrap()).unwrap();
        let (loaded, base) = Scenario::load(&dir.path().join("sc.json")).unwrap();
        assert_eq!(evaluate(&loaded, &base).unwrap().status, ExitStatus::Ok);
        assert!(matches!(evaluate(&loaded, Path::new("/nonexistent")), Err(Error::Schema(_))));
    }
}
