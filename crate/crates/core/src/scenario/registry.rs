//! Canonical scenarios shipped with the toolkit.

use super::{
    AnchorSpec, CertificateRequest, ConsensusRequest, CraftedSpec, DiagnosticRequest,
    EquidistanceRequest, GainSpec, GeneratorKind, GeneratorSpec, GraphSource, InitialSpec,
    LeaderGainSpec, ModulusRequest, Observable, ProtocolSpec, RateRequest, Scenario, SignPattern,
    SummabilityRequest, SurroundRequest, SweepExpectation, SweepRequest, ToleranceRequest,
    SCENARIO_VERSION,
};
use crate::analysis::{ModulusRegime, TrajectoryClass, DEFAULT_TAIL_FRACTION};
use crate::convex::ConvexSet;
use crate::error::{Error, Result};
use crate::graph::{GraphSignal, WeightedDigraph};
use crate::protocols::{Phase, WeightSpec};

const NAMES: &[&str] = &[
    "example1",
    "leader",
    "leader-chain",
    "aggregation-usc",
    "aggregation-cutbalance",
    "containment",
    "optimal-consensus",
    "surrounding",
    "altafini",
    "altafini-bipartite",
    "dichotomy-static-connected",
    "dichotomy-static-disconnected",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

fn base(name: &str, graph: GraphSource, protocol: ProtocolSpec, initial: InitialSpec) -> Scenario {
    Scenario {
        version: SCENARIO_VERSION,
        name: name.to_string(),
        seed: 1,
        graph,
        protocol,
        initial,
        horizon: 200.0,
        step: 1e-3,
        record_every: 100,
        crafted: None,
        advertised: None,
        diagnostics: DiagnosticRequest::default(),
    }
}

fn constant(rows: &[&[f64]]) -> GraphSource {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    GraphSource::Signal(GraphSignal::constant(
        WeightedDigraph::from_rows(&rows).expect("built-in graph is valid"),
    ))
}

fn consensus(tol: f64, expect: TrajectoryClass, on: Observable) -> Option<ConsensusRequest> {
    Some(ConsensusRequest {
        tol,
        tail_fraction: DEFAULT_TAIL_FRACTION,
        expect,
        on,
    })
}

fn generator(kind: GeneratorKind, n: usize, period: f64, subsegments: usize, periods: usize) -> GeneratorSpec {
    GeneratorSpec {
        period,
        subsegments,
        periods,
        ..GeneratorSpec::new(kind, n)
    }
}

/// Window parameters promised by `usc-by-construction` and `leader-rooted`.
fn window_delta(g: &GeneratorSpec) -> f64 {
    g.weight_range[0] * g.period / g.subsegments as f64
}

fn planar_ball(center: [f64; 2], radius: f64) -> ConvexSet {
    ConvexSet::ball(center.to_vec(), radius)
}

/// Fourth roots of unity with exact components.
fn fourth_roots() -> Vec<Phase> {
    [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        .into_iter()
        .map(Phase::from)
        .collect()
}

/// Built-in scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    let sc = match name {
        "example1" => {
            let mut sc = base(
                name,
                constant(&[&[0.0, 1.0], &[0.0, 0.0]]),
                ProtocolSpec::Consensus { dim: 1 },
                InitialSpec::States(vec![0.0, 2.0]),
            );
            sc.record_every = 10;
            sc.crafted = Some(CraftedSpec::Example1);
            sc.diagnostics.residual = true;
            sc.diagnostics.monotone_max = true;
            sc.diagnostics.consensus = consensus(1e-4, TrajectoryClass::BoundedNonConvergent, Observable::State);
            sc
        }
        "leader" | "leader-chain" => {
            let g = GeneratorSpec {
                weight_range: [1.0, 2.0],
                density: 0.2,
                ..generator(GeneratorKind::LeaderRooted, 6, 1.0, 2, 40)
            };
            let delta = window_delta(&g);
            let period = g.period;
            let mut sc = base(
                name,
                GraphSource::Generator(g),
                ProtocolSpec::Leader { leader: 0, dim: 1 },
                InitialSpec::AboveLeader {
                    leader_value: 0.0,
                    low: 0.0,
                    high: 1.0,
                },
            );
            sc.horizon = 60.0;
            sc.record_every = 10;
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::Uqsc {
                period,
                delta,
                horizon: None,
                extended: false,
            }];
            d.rate = Some(RateRequest {
                on: Observable::State,
                reference: None,
                floor: 1e-9,
                min_quality: 0.99,
            });
            d.leader_ordering = true;
            d.residual = true;
            sc
        }
        "aggregation-usc" => {
            let g = generator(GeneratorKind::UscByConstruction, 5, 2.0, 2, 40);
            let (period, delta) = (g.period, window_delta(&g));
            let mut sc = base(
                name,
                GraphSource::Generator(g),
                ProtocolSpec::Aggregation {
                    target: planar_ball([0.0, 0.0], 1.0),
                    gains: GainSpec::Persistent {
                        agents: vec![0],
                        gain: 1.0,
                    },
                    anchors: AnchorSpec::Projection,
                },
                InitialSpec::Uniform { low: -10.0, high: 10.0 },
            );
            sc.horizon = 120.0;
            sc.record_every = 10;
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::Uqsc {
                period,
                delta,
                horizon: None,
                extended: true,
            }];
            d.terminal_distance = Some(ToleranceRequest { tol: 1e-4 });
            d.rate = Some(RateRequest {
                on: Observable::Distance,
                reference: Some(0.0),
                floor: 1e-9,
                min_quality: 0.9,
            });
            d.residual = true;
            d.monotone_max = true;
            sc
        }
        "aggregation-cutbalance" => {
            let g = GeneratorSpec {
                decay: 0.05,
                density: 0.2,
                ..generator(GeneratorKind::CutBalancedRandom, 5, 2.0, 2, 100)
            };
            let k = g.k;
            let mut sc = base(
                name,
                GraphSource::Generator(g),
                ProtocolSpec::Aggregation {
                    target: planar_ball([0.0, 0.0], 1.0),
                    gains: GainSpec::Persistent {
                        agents: vec![0],
                        gain: 1.0,
                    },
                    anchors: AnchorSpec::Projection,
                },
                InitialSpec::Uniform { low: -10.0, high: 10.0 },
            );
            let d = &mut sc.diagnostics;
            d.certificates = vec![
                CertificateRequest::TypeSymmetry { k },
                CertificateRequest::Isc {
                    horizon: None,
                    mass: 1.0,
                },
            ];
            d.terminal_distance = Some(ToleranceRequest { tol: 1e-3 });
            d.residual = true;
            sc
        }
        "containment" => {
            let mut sc = base(
                name,
                constant(&[
                    &[0.0, 1.0, 0.0, 0.0, 0.0],
                    &[0.0, 0.0, 1.0, 0.0, 0.0],
                    &[0.0, 0.0, 0.0, 1.0, 0.0],
                    &[0.0, 0.0, 0.0, 0.0, 1.0],
                    &[1.0, 0.0, 0.0, 0.0, 0.0],
                ]),
                ProtocolSpec::Containment {
                    leader_positions: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.5]],
                    leader_gains: LeaderGainSpec::Persistent {
                        followers: vec![0, 2],
                        gain: 1.0,
                    },
                },
                InitialSpec::Uniform { low: -5.0, high: 5.0 },
            );
            sc.horizon = 60.0;
            sc.record_every = 10;
            let d = &mut sc.diagnostics;
            d.terminal_distance = Some(ToleranceRequest { tol: 1e-4 });
            d.residual = true;
            sc
        }
        "optimal-consensus" => {
            let g = generator(GeneratorKind::UscByConstruction, 3, 2.0, 2, 40);
            let (period, delta) = (g.period, window_delta(&g));
            let mut sc = base(
                name,
                GraphSource::Generator(g),
                ProtocolSpec::OptimalConsensus {
                    sets: vec![
                        planar_ball([0.0, 0.0], 1.0),
                        planar_ball([1.0, 0.0], 1.0),
                        planar_ball([0.5, 0.8], 1.0),
                    ],
                },
                InitialSpec::Uniform { low: -5.0, high: 5.0 },
            );
            sc.horizon = 100.0;
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::Usc {
                period,
                delta,
                horizon: None,
                extended: false,
            }];
            d.equidistance = Some(EquidistanceRequest {
                tol: 1e-4,
                max_d_star: Some(1e-4),
            });
            d.consensus = consensus(1e-3, TrajectoryClass::Consensus, Observable::State);
            d.residual = true;
            sc
        }
        "surrounding" => {
            let mut sc = base(
                name,
                constant(&[
                    &[0.0, 1.0, 0.0, 1.0],
                    &[1.0, 0.0, 1.0, 0.0],
                    &[0.0, 1.0, 0.0, 1.0],
                    &[1.0, 0.0, 1.0, 0.0],
                ]),
                ProtocolSpec::Surrounding {
                    target: planar_ball([0.0, 0.0], 0.5),
                    weights: WeightSpec::Generators(fourth_roots()),
                },
                InitialSpec::Uniform { low: -3.0, high: 3.0 },
            );
            sc.horizon = 50.0;
            sc.record_every = 10;
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::Strong { extended: false }];
            d.surround = Some(SurroundRequest {
                tol: 1e-4,
                tail_fraction: DEFAULT_TAIL_FRACTION,
            });
            d.residual = true;
            sc
        }
        "altafini" => {
            let g = GeneratorSpec {
                density: 0.3,
                ..generator(GeneratorKind::CutBalancedRandom, 6, 2.0, 2, 60)
            };
            let k = g.k;
            let mut sc = base(
                name,
                GraphSource::Generator(g),
                ProtocolSpec::Altafini {
                    signs: SignPattern::Random { negative_fraction: 0.5 },
                },
                InitialSpec::Uniform { low: -2.0, high: 2.0 },
            );
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::TypeSymmetry { k }];
            d.modulus = Some(ModulusRequest { tol: 1e-4, expect: None });
            d.residual = true;
            sc
        }
        "altafini-bipartite" => {
            let mut sc = base(
                name,
                constant(&[&[0.0, 1.0], &[1.0, 0.0]]),
                ProtocolSpec::Altafini {
                    signs: SignPattern::Bipartite(vec![0, 1]),
                },
                InitialSpec::States(vec![3.0, 1.0]),
            );
            sc.horizon = 20.0;
            sc.record_every = 10;
            sc.diagnostics.modulus = Some(ModulusRequest {
                tol: 1e-6,
                expect: Some(ModulusRegime::Polarization),
            });
            sc
        }
        "dichotomy-static-connected" => {
            let mut sc = base(
                name,
                constant(&[
                    &[0.0, 1.0, 0.0, 0.0, 0.5],
                    &[0.0, 0.0, 1.0, 0.0, 0.0],
                    &[0.7, 0.0, 0.0, 1.0, 0.0],
                    &[0.0, 0.0, 0.0, 0.0, 1.0],
                    &[1.0, 0.0, 0.3, 0.0, 0.0],
                ]),
                ProtocolSpec::Consensus { dim: 1 },
                InitialSpec::Uniform { low: -1.0, high: 1.0 },
            );
            let d = &mut sc.diagnostics;
            d.certificates = vec![CertificateRequest::Strong { extended: false }];
            d.consensus = consensus(1e-4, TrajectoryClass::Consensus, Observable::State);
            d.summability = Some(SummabilityRequest { tol: 0.01 });
            d.sweep = Some(SweepRequest {
                runs: 20,
                low: -1.0,
                high: 1.0,
                tol: 1e-4,
                crafted: vec![CraftedSpec::Ray { speed: 1e4 }],
                expect: SweepExpectation {
                    absent: vec![TrajectoryClass::BoundedNonConvergent, TrajectoryClass::ConvergentDisagreement],
                    present: vec![TrajectoryClass::Consensus],
                },
            });
            sc
        }
        "dichotomy-static-disconnected" => {
            let mut sc = base(
                name,
                constant(&[
                    &[0.0, 1.0, 0.0, 0.0],
                    &[1.0, 0.0, 0.0, 0.0],
                    &[0.0, 1.0, 0.0, 1.0],
                    &[0.0, 0.0, 1.0, 0.0],
                ]),
                ProtocolSpec::Consensus { dim: 1 },
                InitialSpec::Uniform { low: -1.0, high: 1.0 },
            );
            sc.diagnostics.sweep = Some(SweepRequest {
                runs: 10,
                low: -1.0,
                high: 1.0,
                tol: 1e-4,
                crafted: vec![CraftedSpec::SinWitness],
                expect: SweepExpectation {
                    absent: vec![],
                    present: vec![TrajectoryClass::BoundedNonConvergent],
                },
            });
            sc
        }
        _ => {
            return Err(Error::Schema(format!(
                "unknown scenario {name:?}; available: {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(sc)
}
