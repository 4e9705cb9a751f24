use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::policies::{self, Command, PolicySpec, ServerView, TierInput};
use crate::workload::RequestTrace;

use super::power::ServerPowerProfile;
use super::server::{advance_server, route_request, Server, ServerEvent, ServerState};
use super::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrivalMode {
    /// Poisson count per 1-second bucket, uniformly placed.
    #[default]
    Poisson,
    /// Exactly `round(rate)` arrivals per bucket, evenly spaced.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServiceMode {
    #[default]
    Exponential,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimelineResolution {
    /// One entry per change.
    Full,
    /// Bin-averaged power and end-of-bin state counts, one entry per bin of
    /// this many seconds.
    Binned(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub n_servers: usize,
    /// Seconds from wake command to serving.
    pub t_setup: f64,
    /// Requests per second per server.
    pub service_rate: f64,
    pub power: ServerPowerProfile,
    /// Seconds between policy decisions.
    pub decision_epoch: f64,
    pub arrivals: ArrivalMode,
    pub service: ServiceMode,
    pub timeline: TimelineResolution,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_servers: 14,
            t_setup: 19.0 * 60.0,
            service_rate: policies::FRONTEND_CAPACITY,
            power: ServerPowerProfile::default(),
            decision_epoch: 60.0,
            arrivals: ArrivalMode::Poisson,
            service: ServiceMode::Exponential,
            timeline: TimelineResolution::Binned(1.0),
        }
    }
}

impl ClusterConfig {
    /// Both arrivals and service deterministic.
    pub fn deterministic(mut self) -> Self {
        self.arrivals = ArrivalMode::Deterministic;
        self.service = ServiceMode::Deterministic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_servers == 0 {
            return Err(Error::invalid("n_servers", "must be >= 1"));
        }
        if !(self.t_setup.is_finite() && self.t_setup > 0.0) {
            return Err(Error::invalid("t_setup", format!("{} must be > 0", self.t_setup)));
        }
        if !(self.service_rate.is_finite() && self.service_rate > 0.0) {
            return Err(Error::invalid(
                "service_rate",
                format!("{} must be > 0", self.service_rate),
            ));
        }
        if !(self.decision_epoch.is_finite() && self.decision_epoch > 0.0) {
            return Err(Error::invalid(
                "decision_epoch",
                format!("{} must be > 0", self.decision_epoch),
            ));
        }
        if let TimelineResolution::Binned(dt) = self.timeline {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid("timeline", format!("bin width {dt} must be > 0")));
            }
        }
        self.power.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StateCounts {
    pub busy: usize,
    pub idle: usize,
    pub setup: usize,
    pub sleep: usize,
}

impl StateCounts {
    pub fn of(servers: &[Server]) -> Self {
        let mut c = StateCounts::default();
        for s in servers {
            c.add(&s.state, 1);
        }
        c
    }

    fn add(&mut self, state: &ServerState, n: isize) {
        let slot = match state {
            ServerState::Busy => &mut self.busy,
            ServerState::Idle => &mut self.idle,
            ServerState::Setup { .. } => &mut self.setup,
            ServerState::Sleep => &mut self.sleep,
        };
        *slot = slot.wrapping_add_signed(n);
    }

    pub fn power(&self, p: &ServerPowerProfile) -> f64 {
        self.busy as f64 * p.p_full
            + self.idle as f64 * p.idle()
            + self.setup as f64 * p.p_setup
            + self.sleep as f64 * p.p_sleep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandRecord {
    pub time: SimTime,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: &'static str,
    /// Per completed request, milliseconds, in completion order.
    pub response_times: Vec<f64>,
    /// Watt-hours over the horizon.
    pub energy: f64,
    /// Watts, `energy / duration`.
    pub avg_power: f64,
    /// Seconds.
    pub duration: f64,
    pub arrived: u64,
    pub completed: u64,
    pub queued_at_end: u64,
    pub in_service_at_end: u64,
    /// Time-averaged central queue length.
    pub mean_queue_len: f64,
    /// `(seconds, watts)`, piecewise constant from each timestamp.
    pub power_timeline: Vec<(f64, f64)>,
    pub active_server_timeline: Vec<(f64, StateCounts)>,
    pub commands: Vec<CommandRecord>,
    /// The policy asked for more servers than the cluster has.
    pub saturated: bool,
}

/// Engine state after an event, for invariant checking.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub time: SimTime,
    pub arrived: u64,
    pub completed: u64,
    pub in_queue: u64,
    pub in_service: u64,
    pub servers: &'a [Server],
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Completion(usize),
    SetupDone(usize),
    IdleTimer { server: usize, generation: u64 },
    Epoch,
}

impl EventKind {
    // Same-instant ordering: departures free servers before anything else looks at them.
    fn rank(&self) -> u8 {
        match self {
            EventKind::Completion(_) => 0,
            EventKind::SetupDone(_) => 1,
            EventKind::IdleTimer { .. } => 2,
            EventKind::Epoch => 3,
        }
    }
}

/// Per-bucket arrival realization.
struct ArrivalStream<'a> {
    trace: &'a RequestTrace,
    mode: ArrivalMode,
    rng: ChaCha8Rng,
    bucket: u64,
    pending: VecDeque<SimTime>,
}

impl<'a> ArrivalStream<'a> {
    fn new(trace: &'a RequestTrace, mode: ArrivalMode, rng: ChaCha8Rng) -> Self {
        Self {
            trace,
            mode,
            rng,
            bucket: 0,
            pending: VecDeque::new(),
        }
    }

    fn peek(&mut self) -> Option<SimTime> {
        while self.pending.is_empty() {
            if self.bucket >= self.trace.duration() {
                return None;
            }
            self.fill_bucket();
            self.bucket += 1;
        }
        self.pending.front().copied()
    }

    fn pop(&mut self) -> Option<SimTime> {
        self.peek()?;
        self.pending.pop_front()
    }

    fn fill_bucket(&mut self) {
        let rate = self.trace.rate_at(self.bucket);
        let start = SimTime::from_secs(self.bucket).0;
        const SEC: u64 = 1_000_000_000;
        match self.mode {
            ArrivalMode::Deterministic => {
                let n = rate.round() as u64;
                for i in 0..n {
                    self.pending.push_back(SimTime(start + i * SEC / n));
                }
            }
            ArrivalMode::Poisson => {
                if rate <= 0.0 {
                    return;
                }
                let n = Poisson::new(rate).expect("positive finite rate").sample(&mut self.rng) as usize;
                let mut offsets: Vec<u64> = (0..n).map(|_| self.rng.random_range(0..SEC)).collect();
                offsets.sort_unstable();
                self.pending.extend(offsets.into_iter().map(|o| SimTime(start + o)));
            }
        }
    }
}

struct Timeline {
    resolution: Option<SimTime>,
    power: Vec<(f64, f64)>,
    counts: Vec<(f64, StateCounts)>,
    bin_start: SimTime,
    bin_energy: f64,
}

impl Timeline {
    fn new(resolution: TimelineResolution) -> Self {
        let resolution = match resolution {
            TimelineResolution::Full => None,
            TimelineResolution::Binned(dt) => Some(SimTime::from_secs_f64(dt).max(SimTime(1))),
        };
        Self {
            resolution,
            power: Vec::new(),
            counts: Vec::new(),
            bin_start: SimTime::ZERO,
            bin_energy: 0.0,
        }
    }

    /// Accounts `[from, to)` at constant `watts`.
    fn span(&mut self, from: SimTime, to: SimTime, watts: f64, counts: StateCounts) {
        let Some(width) = self.resolution else { return };
        let mut t = from;
        while t < to {
            let bin_end = self.bin_start + width;
            let seg_end = to.min(bin_end);
            self.bin_energy += watts * (seg_end - t).0 as f64;
            t = seg_end;
            if seg_end == bin_end {
                self.close_bin(bin_end, counts);
            }
        }
    }

    fn close_bin(&mut self, end: SimTime, counts: StateCounts) {
        let width = (end - self.bin_start).0 as f64;
        if width > 0.0 {
            self.power.push((self.bin_start.as_secs_f64(), self.bin_energy / width));
            self.counts.push((self.bin_start.as_secs_f64(), counts));
        }
        self.bin_start = end;
        self.bin_energy = 0.0;
    }

    /// Full-resolution change point.
    fn change(&mut self, at: SimTime, watts: f64, counts: StateCounts) {
        if self.resolution.is_some() {
            return;
        }
        let t = at.as_secs_f64();
        match self.power.last_mut() {
            Some(last) if last.0 == t => {
                *last = (t, watts);
                *self.counts.last_mut().expect("parallel timelines") = (t, counts);
            }
            Some(last) if last.1 == watts && self.counts.last().map(|c| c.1) == Some(counts) => {}
            _ => {
                self.power.push((t, watts));
                self.counts.push((t, counts));
            }
        }
    }
}

type Observer<'o> = Option<&'o mut dyn FnMut(&Snapshot<'_>)>;

struct Engine<'a, 'o> {
    trace: &'a RequestTrace,
    policy: &'a PolicySpec,
    cfg: &'a ClusterConfig,
    horizon: SimTime,
    t_setup: SimTime,
    epoch: SimTime,
    servers: Vec<Server>,
    idle_since: Vec<SimTime>,
    generation: Vec<u64>,
    serving: Vec<Option<SimTime>>,
    queue: VecDeque<SimTime>,
    heap: BinaryHeap<Reverse<(SimTime, u8, u64, EventKind)>>,
    seq: u64,
    arrivals: ArrivalStream<'a>,
    service_rng: ChaCha8Rng,
    service_dist: Exp<f64>,
    now: SimTime,
    counts: StateCounts,
    power: f64,
    energy_wns: f64,
    queue_area: f64,
    timeline: Timeline,
    arrived: u64,
    completed: u64,
    epoch_arrivals: u64,
    response_times: Vec<f64>,
    commands: Vec<CommandRecord>,
    saturated: bool,
    observer: Observer<'o>,
}

impl<'a, 'o> Engine<'a, 'o> {
    fn new(
        trace: &'a RequestTrace,
        policy: &'a PolicySpec,
        cfg: &'a ClusterConfig,
        seed: u64,
        observer: Observer<'o>,
    ) -> Self {
        let mut arrival_rng = ChaCha8Rng::seed_from_u64(seed);
        arrival_rng.set_stream(1);
        let mut service_rng = ChaCha8Rng::seed_from_u64(seed);
        service_rng.set_stream(2);
        let n = cfg.n_servers;
        Self {
            trace,
            policy,
            cfg,
            horizon: SimTime::from_secs(trace.duration()),
            t_setup: SimTime::from_secs_f64(cfg.t_setup).max(SimTime(1)),
            epoch: SimTime::from_secs_f64(cfg.decision_epoch).max(SimTime(1)),
            servers: vec![Server::asleep(); n],
            idle_since: vec![SimTime::ZERO; n],
            generation: vec![0; n],
            serving: vec![None; n],
            queue: VecDeque::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            arrivals: ArrivalStream::new(trace, cfg.arrivals, arrival_rng),
            service_rng,
            service_dist: Exp::new(cfg.service_rate).expect("validated service rate"),
            now: SimTime::ZERO,
            counts: StateCounts::default(),
            power: 0.0,
            energy_wns: 0.0,
            queue_area: 0.0,
            timeline: Timeline::new(cfg.timeline),
            arrived: 0,
            completed: 0,
            epoch_arrivals: 0,
            response_times: Vec::new(),
            commands: Vec::new(),
            saturated: false,
            observer,
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse((at, kind.rank(), self.seq, kind)));
    }

    /// Integrates power and queue length up to `to`.
    fn advance_clock(&mut self, to: SimTime) {
        if to <= self.now {
            return;
        }
        let dt = (to - self.now).0 as f64;
        self.energy_wns += self.power * dt;
        self.queue_area += self.queue.len() as f64 * dt;
        self.timeline.span(self.now, to, self.power, self.counts);
        self.now = to;
    }

    fn apply(&mut self, i: usize, event: ServerEvent) -> Result<()> {
        let before = self.servers[i];
        let after = advance_server(before, event, self.t_setup)?;
        self.servers[i] = after;
        if std::mem::discriminant(&before.state) != std::mem::discriminant(&after.state) {
            self.counts.add(&before.state, -1);
            self.counts.add(&after.state, 1);
            self.power = self.counts.power(&self.cfg.power);
            self.timeline.change(self.now, self.power, self.counts);
            if after.state == ServerState::Idle {
                self.idle_since[i] = self.now;
            }
        }
        if before.pending_sleep.is_some() && after.pending_sleep.is_none() {
            self.generation[i] += 1;
        }
        Ok(())
    }

    fn views(&self) -> Vec<ServerView> {
        self.servers
            .iter()
            .zip(&self.idle_since)
            .map(|(s, since)| ServerView {
                server: *s,
                idle_for: if s.state == ServerState::Idle {
                    (self.now - *since).as_secs_f64()
                } else {
                    0.0
                },
            })
            .collect()
    }

    fn target(&mut self, observed_rate: f64) -> Result<usize> {
        let want = match self.policy {
            PolicySpec::AlwaysOn { provisioned_count } => *provisioned_count,
            PolicySpec::Reactive | PolicySpec::SoftReactive { .. } => policies::reactive_target(observed_rate),
            PolicySpec::HybridSchema { tiers } => {
                // Plan on the known rate over the window a wake issued now must cover.
                let from = self.now.0 / 1_000_000_000;
                let lookahead = (self.t_setup + self.epoch).as_secs_f64().ceil() as u64;
                let rate = self.trace.max_rate_in(from, from + lookahead);
                let mut tiers: Vec<TierInput<f64>> = tiers.clone();
                tiers[0].queued = self.queue.len() as f64;
                tiers[0].incoming = rate;
                policies::hybrid_target(&tiers, rate)?
            }
        };
        if want > self.cfg.n_servers {
            self.saturated = true;
        }
        Ok(want.min(self.cfg.n_servers))
    }

    fn decide(&mut self, observed_rate: f64) -> Result<()> {
        let target = self.target(observed_rate)?;
        let idle_timeout = match self.policy {
            PolicySpec::SoftReactive { idle_timeout } => Some(*idle_timeout),
            _ => None,
        };
        let cmds = policies::plan_commands(&self.views(), target, idle_timeout);
        for command in cmds {
            self.commands.push(CommandRecord {
                time: self.now,
                command,
            });
            match command {
                Command::Wake(i) => {
                    let was_asleep = self.servers[i].state == ServerState::Sleep;
                    self.apply(i, ServerEvent::WakeCommand)?;
                    if was_asleep {
                        self.schedule(self.now + self.t_setup, EventKind::SetupDone(i));
                    }
                }
                Command::Sleep(i) => self.apply(i, ServerEvent::SleepCommand { delay: SimTime::ZERO })?,
                Command::ArmIdleTimer { server, remaining } => {
                    self.apply(server, ServerEvent::SleepCommand { delay: remaining })?;
                    self.arm_if_idle(server);
                }
            }
        }
        Ok(())
    }

    fn arm_if_idle(&mut self, i: usize) {
        let s = self.servers[i];
        if let (ServerState::Idle, Some(left)) = (s.state, s.pending_sleep) {
            let generation = self.generation[i];
            self.schedule(self.now + left, EventKind::IdleTimer { server: i, generation });
        }
    }

    fn dispatch(&mut self, i: usize, arrival: SimTime) -> Result<()> {
        self.apply(i, ServerEvent::Dispatch)?;
        let service = match self.cfg.service {
            ServiceMode::Deterministic => SimTime::from_secs_f64(1.0 / self.cfg.service_rate),
            ServiceMode::Exponential => SimTime::from_secs_f64(self.service_dist.sample(&mut self.service_rng)),
        };
        self.serving[i] = Some(arrival);
        self.schedule(self.now + service, EventKind::Completion(i));
        Ok(())
    }

    /// Hands the queue head to server `i` if it is idle.
    fn pull(&mut self, i: usize) -> Result<()> {
        if self.servers[i].state == ServerState::Idle {
            if let Some(arrival) = self.queue.pop_front() {
                self.dispatch(i, arrival)?;
            }
        }
        Ok(())
    }

    fn observe(&mut self) {
        if let Some(obs) = self.observer.as_mut() {
            let in_service = self.serving.iter().filter(|s| s.is_some()).count() as u64;
            obs(&Snapshot {
                time: self.now,
                arrived: self.arrived,
                completed: self.completed,
                in_queue: self.queue.len() as u64,
                in_service,
                servers: &self.servers,
                power: self.power,
            });
        }
    }

    fn handle(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::Completion(i) => {
                let arrival = self.serving[i]
                    .take()
                    .ok_or_else(|| Error::Contract(format!("completion on server {i} with no request")))?;
                self.completed += 1;
                self.response_times.push((self.now - arrival).as_millis_f64());
                self.apply(i, ServerEvent::Complete)?;
                self.arm_if_idle(i);
                self.pull(i)?;
            }
            EventKind::SetupDone(i) => {
                self.apply(i, ServerEvent::Tick(self.t_setup))?;
                self.pull(i)?;
            }
            EventKind::IdleTimer { server, generation } => {
                let s = self.servers[server];
                if generation == self.generation[server] && s.state == ServerState::Idle {
                    if let Some(left) = s.pending_sleep {
                        self.apply(server, ServerEvent::Tick(left))?;
                    }
                }
            }
            EventKind::Epoch => {
                let observed = self.epoch_arrivals as f64 / self.epoch.as_secs_f64();
                self.epoch_arrivals = 0;
                self.decide(observed)?;
                let next = self.now + self.epoch;
                if next < self.horizon {
                    self.schedule(next, EventKind::Epoch);
                }
            }
        }
        Ok(())
    }

    fn on_arrival(&mut self, at: SimTime) -> Result<()> {
        self.arrived += 1;
        self.epoch_arrivals += 1;
        match route_request(&self.servers) {
            Some(i) => self.dispatch(i, at),
            None => {
                self.queue.push_back(at);
                Ok(())
            }
        }
    }

    fn run(mut self) -> Result<SimResult> {
        // Warm start: the initial target is already serving at t = 0.
        let initial = self.target(self.trace.rate_at(0))?;
        for i in 0..self.cfg.n_servers {
            self.servers[i] = if i < initial { Server::idle() } else { Server::asleep() };
        }
        self.counts = StateCounts::of(&self.servers);
        self.power = self.counts.power(&self.cfg.power);
        self.timeline.change(SimTime::ZERO, self.power, self.counts);
        if self.epoch < self.horizon {
            self.schedule(self.epoch, EventKind::Epoch);
        }
        self.observe();

        loop {
            let next_event = self.heap.peek().map(|Reverse((t, ..))| *t);
            let next_arrival = self.arrivals.peek();
            let arrival_first = match (next_event, next_arrival) {
                (None, None) => break,
                (Some(e), Some(a)) => a < e,
                (None, Some(_)) => true,
                (Some(_), None) => false,
            };
            let at = if arrival_first { next_arrival } else { next_event }.expect("one source is non-empty");
            if at >= self.horizon {
                break;
            }
            self.advance_clock(at);
            if arrival_first {
                self.arrivals.pop();
                self.on_arrival(at)?;
            } else {
                let Reverse((_, _, _, kind)) = self.heap.pop().expect("peeked");
                self.handle(kind)?;
            }
            self.observe();
        }
        self.advance_clock(self.horizon);
        if self.timeline.resolution.is_some() && self.timeline.bin_start < self.horizon {
            let counts = self.counts;
            self.timeline.close_bin(self.horizon, counts);
        }

        let duration = self.horizon.as_secs_f64();
        let energy = self.energy_wns / 1e9 / 3600.0;
        let in_service_at_end = self.serving.iter().filter(|s| s.is_some()).count() as u64;
        Ok(SimResult {
            policy: self.policy.name(),
            response_times: self.response_times,
            energy,
            avg_power: if duration > 0.0 {
                energy * 3600.0 / duration
            } else {
                0.0
            },
            duration,
            arrived: self.arrived,
            completed: self.completed,
            queued_at_end: self.queue.len() as u64,
            in_service_at_end,
            mean_queue_len: if self.horizon.0 > 0 {
                self.queue_area / self.horizon.0 as f64
            } else {
                0.0
            },
            power_timeline: self.timeline.power,
            active_server_timeline: self.timeline.counts,
            commands: self.commands,
            saturated: self.saturated,
        })
    }
}

/// Runs one simulation over the whole trace horizon.
///
/// A policy asking for more than `n_servers` is clamped and reported through
/// [`SimResult::saturated`].
pub fn run_simulation(
    trace: &RequestTrace,
    policy: &PolicySpec,
    config: &ClusterConfig,
    seed: u64,
) -> Result<SimResult> {
    run_simulation_observed(trace, policy, config, seed, None)
}

/// [`run_simulation`] with a callback after every processed event.
pub fn run_simulation_observed(
    trace: &RequestTrace,
    policy: &PolicySpec,
    config: &ClusterConfig,
    seed: u64,
    observer: Option<&mut dyn FnMut(&Snapshot<'_>)>,
) -> Result<SimResult> {
    config.validate()?;
    policy.validate()?;
    Engine::new(trace, policy, config, seed, observer).run()
}
