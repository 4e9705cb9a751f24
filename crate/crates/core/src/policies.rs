//! Provisioning rules and the sleep/wake planning shared by the dynamic policies.
//!
//! Every policy reduces to a target number of provisioned front-end servers.
//! [`plan_commands`] turns a target into concrete commands using a fixed
//! tie-breaking order: sleep orders go to the highest-indexed idle servers
//! (then busy ones, which finish their request first), rescinds and wakes go to
//! the lowest-indexed servers.

use crate::engine::{Server, ServerState, SimTime};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Requests per second one front-end server sustains.
pub const FRONTEND_CAPACITY: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Fixed provisioned count for the whole run.
    AlwaysOn { provisioned_count: usize },
    /// Sizes to the request rate observed over the last decision epoch.
    Reactive,
    /// Reactive sizing; surplus servers sleep only after `idle_timeout`
    /// seconds of continuous idleness.
    SoftReactive { idle_timeout: f64 },
    /// Per-tier minimal servers, floored by the rate-based count, planned on
    /// the known upcoming request rate. `tiers[0]` is the front end.
    HybridSchema { tiers: Vec<TierInput<f64>> },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::AlwaysOn { .. } => "alwayson",
            PolicySpec::Reactive => "reactive",
            PolicySpec::SoftReactive { .. } => "softreactive",
            PolicySpec::HybridSchema { .. } => "hybrid",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::AlwaysOn { provisioned_count } if *provisioned_count == 0 => {
                Err(Error::invalid("provisioned_count", "must be >= 1"))
            }
            PolicySpec::SoftReactive { idle_timeout } if !(idle_timeout.is_finite() && *idle_timeout >= 0.0) => {
                Err(Error::invalid("idle_timeout", format!("{idle_timeout} must be >= 0")))
            }
            PolicySpec::HybridSchema { tiers } => {
                if tiers.is_empty() {
                    return Err(Error::invalid("tiers", "hybrid schema needs at least one tier"));
                }
                tiers.iter().try_for_each(TierInput::validate)
            }
            _ => Ok(()),
        }
    }
}

/// Inputs to the per-tier minimal-server formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierInput<T> {
    /// Requests queued at the tier.
    pub queued: T,
    /// Incoming requests.
    pub incoming: T,
    /// Target response time, ms.
    pub t_sla: T,
    /// Estimated tier throughput, in the same scale as `t_sla`.
    pub throughput_est: T,
}

impl<T: Scalar> TierInput<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        for (field, v) in [
            ("queued", self.queued),
            ("incoming", self.incoming),
            ("t_sla", self.t_sla),
            ("throughput_est", self.throughput_est),
        ] {
            if !v.is_finite_value() || v < zero {
                return Err(Error::invalid(field, format!("{v} must be finite and >= 0")));
            }
        }
        if self.t_sla + self.throughput_est <= zero {
            return Err(Error::invalid("throughput_est", "t_sla + throughput_est must be > 0"));
        }
        Ok(())
    }

    /// `(L + r) / (T_SLA + tau)`, unrounded.
    pub fn minimal_servers(&self) -> Result<T> {
        self.validate()?;
        Ok((self.queued + self.incoming) / (self.t_sla + self.throughput_est))
    }
}

fn capacity<T: Scalar>() -> T {
    T::from_f64(FRONTEND_CAPACITY).expect("capacity representable")
}

/// Servers that cover `rate` at [`FRONTEND_CAPACITY`] each. Negative rates count as zero.
pub fn servers_for_rate<T: Scalar>(rate: T) -> usize {
    (rate / capacity()).ceil_count().unwrap_or(0)
}

/// Static peak-sized fleet.
pub fn alwayson_servers<T: Scalar>(peak: T) -> Result<usize> {
    if !peak.is_finite_value() || peak < T::zero() {
        return Err(Error::invalid("peak", format!("{peak} must be finite and >= 0")));
    }
    Ok(servers_for_rate(peak))
}

pub fn reactive_target<T: Scalar>(rate: T) -> usize {
    servers_for_rate(rate)
}

/// Front-end target: the larger of the front-end tier's rounded-up minimal
/// count and the rate-based count.
pub fn hybrid_target<T: Scalar>(tiers: &[TierInput<T>], rate: T) -> Result<usize> {
    let front = tiers
        .first()
        .ok_or_else(|| Error::invalid("tiers", "at least one tier required"))?;
    for tier in &tiers[1..] {
        tier.validate()?;
    }
    let minimal = front
        .minimal_servers()?
        .ceil_count()
        .ok_or_else(|| Error::invalid("tiers", "minimal server count is not representable"))?;
    Ok(minimal.max(servers_for_rate(rate)))
}

/// What a policy sees of one server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerView {
    pub server: Server,
    /// Seconds the server has been continuously idle (zero unless idle).
    pub idle_for: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Boot a sleeping server, or rescind its sleep order.
    Wake(usize),
    /// Sleep now, or right after the in-flight request if busy.
    Sleep(usize),
    /// Start a countdown of continuous idleness before sleeping.
    ArmIdleTimer { server: usize, remaining: SimTime },
}

impl Command {
    pub fn server(&self) -> usize {
        match *self {
            Command::Wake(i) | Command::Sleep(i) => i,
            Command::ArmIdleTimer { server, .. } => server,
        }
    }
}

/// Commands that move the provisioned capacity to `target`.
///
/// With `idle_timeout = None` surplus servers are told to sleep immediately.
/// With `Some(t)` a surplus idle server sleeps now only if it has already been
/// idle for `t` seconds; otherwise it gets a countdown for the remainder. Busy
/// surplus servers get the full countdown, started when they go idle.
pub fn plan_commands(servers: &[ServerView], target: usize, idle_timeout: Option<f64>) -> Vec<Command> {
    let capacity = servers.iter().filter(|v| v.server.counts_toward_capacity()).count();
    let mut cmds = Vec::new();
    if target > capacity {
        let mut need = target - capacity;
        let rescind = servers
            .iter()
            .enumerate()
            .filter(|(_, v)| v.server.state.is_serving() && v.server.pending_sleep.is_some());
        let wake = servers
            .iter()
            .enumerate()
            .filter(|(_, v)| v.server.state == ServerState::Sleep);
        for (i, _) in rescind.chain(wake) {
            if need == 0 {
                break;
            }
            cmds.push(Command::Wake(i));
            need -= 1;
        }
    } else if target < capacity {
        let surplus = capacity - target;
        let unordered = |state: ServerState| {
            servers
                .iter()
                .enumerate()
                .rev()
                .filter(move |(_, v)| v.server.state == state && v.server.pending_sleep.is_none())
        };
        for (i, view) in unordered(ServerState::Idle)
            .chain(unordered(ServerState::Busy))
            .take(surplus)
        {
            let cmd = match idle_timeout {
                None => Command::Sleep(i),
                Some(timeout) => {
                    let waited = if view.server.state == ServerState::Idle {
                        view.idle_for
                    } else {
                        0.0
                    };
                    let left = SimTime::from_secs_f64(timeout - waited);
                    if left == SimTime::ZERO {
                        Command::Sleep(i)
                    } else {
                        Command::ArmIdleTimer {
                            server: i,
                            remaining: left,
                        }
                    }
                }
            };
            cmds.push(cmd);
        }
    }
    cmds
}

/// Reactive decision at the observed `rate`.
pub fn reactive_decide(servers: &[ServerView], rate: f64) -> Vec<Command> {
    plan_commands(servers, reactive_target(rate), None)
}

/// SoftReactive decision at the observed `rate`.
pub fn softreactive_decide(servers: &[ServerView], rate: f64, idle_timeout: f64) -> Vec<Command> {
    plan_commands(servers, reactive_target(rate), Some(idle_timeout))
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;
    use proptest::prelude::*;

    use super::*;

    fn tier(l: f64, r: f64, sla: f64, tau: f64) -> TierInput<f64> {
        TierInput {
            queued: l,
            incoming: r,
            t_sla: sla,
            throughput_est: tau,
        }
    }

    fn view(state: ServerState, idle_for: f64) -> ServerView {
        ServerView {
            server: Server::new(state),
            idle_for,
        }
    }

    #[test]
    fn alwayson_sizing() {
        assert_eq!(alwayson_servers(800.0).unwrap(), 14);
        assert_eq!(alwayson_servers(0.0).unwrap(), 0);
        assert_eq!(alwayson_servers(60.0).unwrap(), 1);
        assert_eq!(alwayson_servers(61.0).unwrap(), 2);
        assert_eq!(alwayson_servers(Ratio::from_integer(800i64)).unwrap(), 14);
        assert!(alwayson_servers(-1.0).is_err());
    }

    #[test]
    fn reactive_sizing() {
        assert_eq!(reactive_target(800.0), 14);
        assert_eq!(reactive_target(120.0), 2);
        assert_eq!(reactive_target(1.0), 1);
        assert_eq!(reactive_target(0.0), 0);
    }

    #[test]
    fn hybrid_examples() {
        assert_eq!(hybrid_target(&[tier(0.0, 0.0, 2000.0, 1000.0)], 0.0).unwrap(), 0);
        assert_eq!(hybrid_target(&[tier(100.0, 800.0, 2000.0, 1000.0)], 800.0).unwrap(), 14);
        let big = tier(50000.0, 10000.0, 500.0, 500.0);
        assert_eq!(big.minimal_servers().unwrap(), 60.0);
        assert_eq!(hybrid_target(&[big], 10000.0).unwrap(), 167);
        // Minimal-count branch wins when the rate is small.
        assert_eq!(hybrid_target(&[big], 100.0).unwrap(), 60);
    }

    #[test]
    fn hybrid_rejects_zero_denominator_and_empty() {
        let err = hybrid_target(&[tier(1.0, 1.0, 0.0, 0.0)], 10.0).unwrap_err();
        assert!(matches!(
            err,
            Error::Invalid {
                field: "throughput_est",
                ..
            }
        ));
        assert!(hybrid_target::<f64>(&[], 10.0).is_err());
        let err = hybrid_target(&[tier(1.0, 1.0, 1.0, 1.0), tier(-1.0, 0.0, 1.0, 1.0)], 10.0);
        assert!(err.is_err());
    }

    #[test]
    fn hybrid_exact_in_rationals() {
        let t = TierInput {
            queued: Ratio::from_integer(100i64),
            incoming: Ratio::from_integer(800),
            t_sla: Ratio::from_integer(2000),
            throughput_est: Ratio::from_integer(1000),
        };
        assert_eq!(t.minimal_servers().unwrap(), Ratio::new(3, 10));
        assert_eq!(hybrid_target(&[t], Ratio::from_integer(800)).unwrap(), 14);
    }

    #[test]
    fn soft_timer_not_expired() {
        let servers = [view(ServerState::Busy, 0.0), view(ServerState::Idle, 30.0)];
        let cmds = softreactive_decide(&servers, 60.0, 60.0);
        assert_eq!(
            cmds,
            vec![Command::ArmIdleTimer {
                server: 1,
                remaining: SimTime::from_secs(30)
            }]
        );
        assert!(!cmds.iter().any(|c| matches!(c, Command::Sleep(_))));
    }

    #[test]
    fn soft_timer_expired() {
        let servers = [view(ServerState::Busy, 0.0), view(ServerState::Idle, 61.0)];
        assert_eq!(softreactive_decide(&servers, 60.0, 60.0), vec![Command::Sleep(1)]);
    }

    #[test]
    fn surplus_targets_highest_idle_then_busy() {
        let servers = [
            view(ServerState::Busy, 0.0),
            view(ServerState::Idle, 0.0),
            view(ServerState::Busy, 0.0),
            view(ServerState::Idle, 0.0),
        ];
        assert_eq!(
            reactive_decide(&servers, 60.0),
            vec![Command::Sleep(3), Command::Sleep(1), Command::Sleep(2)]
        );
    }

    #[test]
    fn deficit_rescinds_then_wakes_lowest() {
        let mut marked = Server::idle();
        marked.pending_sleep = Some(SimTime(10));
        let servers = [
            view(ServerState::Busy, 0.0),
            ServerView {
                server: marked,
                idle_for: 1.0,
            },
            view(ServerState::Sleep, 0.0),
            view(ServerState::Sleep, 0.0),
        ];
        assert_eq!(
            reactive_decide(&servers, 180.0),
            vec![Command::Wake(1), Command::Wake(2)]
        );
    }

    #[test]
    fn booting_servers_count_as_capacity() {
        let setup = ServerState::Setup { remaining: SimTime(1) };
        let servers = [view(setup, 0.0), view(ServerState::Sleep, 0.0)];
        assert!(reactive_decide(&servers, 60.0).is_empty());
    }

    proptest! {
        #[test]
        fn reactive_is_capacity_covering_and_minimal(rate in 0.0f64..1e6) {
            let n = reactive_target(rate) as f64;
            prop_assert!(n * FRONTEND_CAPACITY >= rate);
            if rate > 0.0 {
                prop_assert!((n - 1.0) * FRONTEND_CAPACITY < rate);
            }
        }

        #[test]
        fn hybrid_never_below_reactive(
            l in 0.0f64..1e5, r in 0.0f64..1e5, sla in 1.0f64..5000.0, tau in 0.0f64..5000.0, rate in 0.0f64..1e5,
        ) {
            let h = hybrid_target(&[tier(l, r, sla, tau)], rate).unwrap();
            prop_assert!(h >= reactive_target(rate));
            if rate > 0.0 {
                prop_assert!(h >= 1);
            }
        }

        #[test]
        fn soft_zero_timeout_matches_reactive(
            states in proptest::collection::vec(0u8..4, 1..20), idle in proptest::collection::vec(0.0f64..100.0, 20), rate in 0.0f64..1500.0,
        ) {
            let servers: Vec<ServerView> = states.iter().zip(&idle).map(|(s, &w)| {
                let state = match s {
                    0 => ServerState::Busy,
                    1 => ServerState::Idle,
                    2 => ServerState::Setup { remaining: SimTime(5) },
                    _ => ServerState::Sleep,
                };
                view(state, w)
            }).collect();
            prop_assert_eq!(softreactive_decide(&servers, rate, 0.0), reactive_decide(&servers, rate));
        }
    }
}
