//! Independent invariant auditor and random scenario generator for engine runs.
#![allow(dead_code)]

use powersim::engine::{
    ArrivalMode, ClusterConfig, ServerPowerProfile, ServerState, ServiceMode, SimTime, Snapshot, TimelineResolution,
};
use powersim::policies::{PolicySpec, TierInput};
use powersim::workload::{RequestTrace, TraceSample};
use proptest::prelude::*;

/// Checks every snapshot against the engine's conservation, power and
/// setup rules, recomputing everything from the raw server states.
pub struct Audit {
    pub profile: ServerPowerProfile,
    pub t_setup: SimTime,
    pub n_servers: usize,
    setup_since: Vec<Option<SimTime>>,
    last_state: Vec<Option<ServerState>>,
    pub violation: Option<String>,
    pub events: u64,
}

impl Audit {
    pub fn new(cfg: &ClusterConfig) -> Self {
        Self {
            profile: cfg.power,
            t_setup: SimTime::from_secs_f64(cfg.t_setup),
            n_servers: cfg.n_servers,
            setup_since: vec![None; cfg.n_servers],
            last_state: vec![None; cfg.n_servers],
            violation: None,
            events: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        if self.violation.is_none() {
            self.violation = Some(msg);
        }
    }

    pub fn check(&mut self, s: &Snapshot<'_>) {
        self.events += 1;
        if s.arrived != s.completed + s.in_queue + s.in_service {
            self.fail(format!(
                "conservation at {}: {} != {} + {} + {}",
                s.time, s.arrived, s.completed, s.in_queue, s.in_service
            ));
        }
        let busy = s.servers.iter().filter(|x| x.state == ServerState::Busy).count() as u64;
        if busy != s.in_service {
            self.fail(format!("{busy} busy servers but {} requests in service", s.in_service));
        }
        let p = self.profile;
        let mut expected = 0.0;
        for srv in s.servers {
            expected += match srv.state {
                ServerState::Busy => p.p_full,
                ServerState::Idle => p.k * p.p_full,
                ServerState::Setup { .. } => p.p_setup,
                ServerState::Sleep => p.p_sleep,
            };
        }
        if expected != s.power {
            self.fail(format!("power {} != composed {}", s.power, expected));
        }
        let lo = p.p_sleep.min(p.k * p.p_full).min(p.p_setup) * self.n_servers as f64;
        if s.power < lo || s.power > p.p_full * self.n_servers as f64 {
            self.fail(format!("power {} outside bounds", s.power));
        }
        if s.in_queue > 0 && s.servers.iter().any(|x| x.state == ServerState::Idle) {
            self.fail(format!("request queued at {} while a server idles", s.time));
        }
        for (i, srv) in s.servers.iter().enumerate() {
            let prev = self.last_state[i];
            let now_setup = matches!(srv.state, ServerState::Setup { .. });
            match (prev, srv.state) {
                (Some(ServerState::Sleep), ServerState::Busy | ServerState::Idle) => {
                    self.fail(format!("server {i} left sleep without setup at {}", s.time));
                }
                (Some(ServerState::Sleep) | None, ServerState::Setup { .. }) => {
                    self.setup_since[i] = Some(s.time);
                }
                (Some(ServerState::Setup { .. }), next) if !now_setup => {
                    if next != ServerState::Idle && next != ServerState::Busy {
                        self.fail(format!("server {i} setup ended in {next:?}"));
                    }
                    match self.setup_since[i].take() {
                        Some(start) if s.time - start == self.t_setup => {}
                        Some(start) => self.fail(format!(
                            "server {i} setup lasted {} not {}",
                            s.time - start,
                            self.t_setup
                        )),
                        None => self.fail(format!("server {i} setup with unknown start")),
                    }
                }
                _ => {}
            }
            self.last_state[i] = Some(srv.state);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub trace: RequestTrace,
    pub policy: PolicySpec,
    pub config: ClusterConfig,
    pub seed: u64,
}

fn trace_strategy() -> impl Strategy<Value = RequestTrace> {
    (3u64..30, proptest::collection::vec(0u32..400, 1..12)).prop_map(|(step, rates)| {
        let samples: Vec<TraceSample> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| TraceSample {
                time: i as u64 * step,
                rate: r as f64,
            })
            .collect();
        let duration = rates.len() as u64 * step;
        RequestTrace::new(samples, duration).unwrap()
    })
}

pub fn policy_strategy() -> impl Strategy<Value = PolicySpec> {
    prop_oneof![
        (1usize..10).prop_map(|n| PolicySpec::AlwaysOn { provisioned_count: n }),
        Just(PolicySpec::Reactive),
        (0u32..20).prop_map(|t| PolicySpec::SoftReactive {
            idle_timeout: t as f64 / 2.0
        }),
        (0u32..50, 1u32..3000, 0u32..3000).prop_map(|(l, sla, tau)| PolicySpec::HybridSchema {
            tiers: vec![TierInput {
                queued: l as f64,
                incoming: 0.0,
                t_sla: sla as f64,
                throughput_est: tau as f64,
            }],
        }),
    ]
}

/// Integer-watt profiles so composed power compares exactly.
fn config_strategy() -> impl Strategy<Value = ClusterConfig> {
    (
        1usize..8,
        1u32..40,
        1u32..20,
        prop_oneof![Just(60.0), 10.0f64..120.0],
        (1u32..4, 0u32..=4, 0u32..=100),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(n, setup_half_s, epoch, mu, (pf, kq, sleep_pct), det_arr, det_svc)| {
            let p_full = 100.0 * pf as f64;
            let k = kq as f64 / 4.0;
            let p_sleep = ((k * p_full) * sleep_pct as f64 / 100.0).floor();
            let mut power = ServerPowerProfile::new(p_full, k, p_sleep);
            power.p_setup = (p_full * 0.75).floor();
            ClusterConfig {
                n_servers: n,
                t_setup: setup_half_s as f64 / 2.0,
                service_rate: mu,
                power,
                decision_epoch: epoch as f64,
                arrivals: if det_arr {
                    ArrivalMode::Deterministic
                } else {
                    ArrivalMode::Poisson
                },
                service: if det_svc {
                    ServiceMode::Deterministic
                } else {
                    ServiceMode::Exponential
                },
                timeline: TimelineResolution::Full,
            }
        })
}

pub fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (trace_strategy(), policy_strategy(), config_strategy(), any::<u64>()).prop_map(|(trace, policy, config, seed)| {
        Scenario {
            trace,
            policy,
            config,
            seed,
        }
    })
}
