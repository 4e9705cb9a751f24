//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, lists are comma-separated.
//! Every key is optional; see [`RunConfig::default`] for the values used
//! when a key is absent.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use powersim::analysis::{reference, EnergyModelParams};
use powersim::engine::{ArrivalMode, ClusterConfig, ServerPowerProfile, ServiceMode, TimelineResolution};
use powersim::policies::{alwayson_servers, PolicySpec, TierInput};
use powersim::workload::{generate_trace, load_trace, peak_rate, Pattern, RequestTrace, TraceSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    Spec(TraceSpec),
    File(PathBuf),
}

/// A configured policy. AlwaysOn without an explicit count is sized to the
/// peak of whatever trace it runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyEntry {
    AlwaysOn(Option<usize>),
    Fixed(PolicySpec),
}

impl PolicyEntry {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyEntry::AlwaysOn(_) => "alwayson",
            PolicyEntry::Fixed(spec) => spec.name(),
        }
    }

    pub fn resolve(&self, trace: &RequestTrace) -> powersim::Result<PolicySpec> {
        match self {
            PolicyEntry::AlwaysOn(Some(n)) => Ok(PolicySpec::AlwaysOn { provisioned_count: *n }),
            PolicyEntry::AlwaysOn(None) => Ok(PolicySpec::AlwaysOn {
                provisioned_count: alwayson_servers(peak_rate(trace))?.max(1),
            }),
            PolicyEntry::Fixed(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Minutes.
    pub t_setups: Vec<f64>,
    /// Watts.
    pub p_sleeps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// The default set is one of many that yield 250 Wh.
    pub energy_params: EnergyModelParams<f64>,
    /// Watt-hours; replaces the value computed from `energy_params`.
    pub energy: Option<f64>,
    pub n_sleeping: usize,
    pub ppw_alwayson: f64,
    /// Per-row PPW anchors, one per sweep setup time.
    pub anchor_ppw: Option<Vec<f64>>,
    /// Per-row measured T_95 in ms; takes precedence over anchors.
    pub row_t95: Option<Vec<f64>>,
    /// Disciplines per request for the response-time estimate. No default.
    pub disciplines: Option<f64>,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trace: TraceSource,
    /// Horizon the run must cover, seconds; checked against file traces.
    pub horizon: Option<u64>,
    pub policies: Vec<PolicyEntry>,
    pub cluster: ClusterConfig,
    pub sweep: SweepConfig,
    pub analysis: AnalysisConfig,
    pub fleet_sizes: Vec<usize>,
    /// Scale the trace with the fleet so every size sees the same per-server load.
    pub scale_load: bool,
    pub output: PathBuf,
    pub seed: u64,
}

/// Sinusoid between 200 and 800 req/s over one hour.
pub fn default_trace_spec() -> TraceSpec {
    TraceSpec::sinusoid(200.0, 800.0, 3600.0, 3600)
}

pub fn default_hybrid() -> PolicySpec {
    PolicySpec::HybridSchema {
        tiers: vec![TierInput {
            queued: 0.0,
            incoming: 0.0,
            t_sla: 500.0,
            throughput_est: 0.0,
        }],
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trace: TraceSource::Spec(default_trace_spec()),
            horizon: None,
            policies: vec![
                PolicyEntry::AlwaysOn(None),
                PolicyEntry::Fixed(PolicySpec::Reactive),
                PolicyEntry::Fixed(PolicySpec::SoftReactive { idle_timeout: 120.0 }),
                PolicyEntry::Fixed(default_hybrid()),
            ],
            cluster: ClusterConfig::default(),
            sweep: SweepConfig {
                t_setups: reference::T_SETUPS_MIN.to_vec(),
                p_sleeps: reference::P_SLEEPS_W.to_vec(),
            },
            analysis: AnalysisConfig {
                energy_params: EnergyModelParams::default(),
                energy: None,
                n_sleeping: reference::N_SLEEPING,
                ppw_alwayson: reference::PPW_ALWAYSON,
                anchor_ppw: None,
                row_t95: None,
                disciplines: None,
                speed: 1.0,
            },
            fleet_sizes: vec![14, 20, 30, 40, 50, 60],
            scale_load: true,
            output: PathBuf::from("out"),
            seed: 1,
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Keys {
    map: BTreeMap<String, Entry>,
}

fn bad(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| bad(e.line, format!("{key}: cannot parse {:?}", e.value))),
        }
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.parsed(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| bad(e.line, format!("{key}: cannot parse {s:?}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn flag(&mut self, key: &str, slot: &mut bool) -> Result<()> {
        if let Some(e) = self.take(key) {
            *slot = match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(bad(e.line, format!("{key}: expected true or false, got {:?}", e.value))),
            };
        }
        Ok(())
    }
}

fn tokenize(text: &str) -> Result<Keys> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected `key = value`, got {content:?}")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(bad(line, "empty key"));
        }
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if let Some(prev) = map.insert(key.clone(), entry) {
            return Err(bad(line, format!("{key} already set on line {}", prev.line)));
        }
    }
    Ok(Keys { map })
}

impl RunConfig {
    /// Parses config text. Relative trace paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut keys = tokenize(text)?;
        let mut cfg = RunConfig::default();

        if let Some(e) = keys.take("trace.file") {
            let path = PathBuf::from(&e.value);
            cfg.trace = TraceSource::File(if path.is_relative() { base_dir.join(path) } else { path });
            for key in [
                "trace.pattern",
                "trace.base_rate",
                "trace.peak_rate",
                "trace.period",
                "trace.seed",
            ] {
                if let Some(other) = keys.take(key) {
                    return Err(bad(other.line, format!("{key} conflicts with trace.file")));
                }
            }
            cfg.horizon = keys.parsed("trace.duration")?;
        } else {
            let mut spec = default_trace_spec();
            if let Some(e) = keys.take("trace.pattern") {
                spec.pattern = Pattern::from_str(&e.value).map_err(|err| bad(e.line, err.to_string()))?;
            }
            keys.set("trace.base_rate", &mut spec.base_rate)?;
            keys.set("trace.peak_rate", &mut spec.peak_rate)?;
            keys.set("trace.period", &mut spec.period)?;
            keys.set("trace.duration", &mut spec.duration)?;
            keys.set("trace.seed", &mut spec.seed)?;
            cfg.trace = TraceSource::Spec(spec);
        }

        let c = &mut cfg.cluster;
        keys.set("cluster.n_servers", &mut c.n_servers)?;
        keys.set("cluster.t_setup", &mut c.t_setup)?;
        keys.set("cluster.service_rate", &mut c.service_rate)?;
        keys.set("cluster.decision_epoch", &mut c.decision_epoch)?;
        let mut p_full = c.power.p_full;
        let mut k = c.power.k;
        let mut p_sleep = c.power.p_sleep;
        keys.set("cluster.p_full", &mut p_full)?;
        keys.set("cluster.k", &mut k)?;
        keys.set("cluster.p_sleep", &mut p_sleep)?;
        c.power = ServerPowerProfile::new(p_full, k, p_sleep);
        keys.set("cluster.p_setup", &mut c.power.p_setup)?;
        if let Some(e) = keys.take("cluster.arrivals") {
            c.arrivals = match e.value.as_str() {
                "poisson" => ArrivalMode::Poisson,
                "deterministic" => ArrivalMode::Deterministic,
                other => return Err(bad(e.line, format!("cluster.arrivals: unknown mode {other:?}"))),
            };
        }
        if let Some(e) = keys.take("cluster.service") {
            c.service = match e.value.as_str() {
                "exponential" => ServiceMode::Exponential,
                "deterministic" => ServiceMode::Deterministic,
                other => return Err(bad(e.line, format!("cluster.service: unknown mode {other:?}"))),
            };
        }
        if let Some(e) = keys.take("cluster.timeline") {
            c.timeline = if e.value == "full" {
                TimelineResolution::Full
            } else {
                let dt = e.value.parse().map_err(|_| {
                    bad(
                        e.line,
                        format!("cluster.timeline: expected `full` or seconds, got {:?}", e.value),
                    )
                })?;
                TimelineResolution::Binned(dt)
            };
        }

        let policy_line = keys.map.get("policies").map(|e| e.line).unwrap_or(0);
        let names: Option<Vec<String>> = keys.list("policies")?;
        let mut alwayson: Option<usize> = keys.parsed("policy.alwayson.servers")?;
        let mut idle_timeout = 120.0;
        keys.set("policy.softreactive.idle_timeout", &mut idle_timeout)?;
        let hybrid = hybrid_from_keys(&mut keys)?;
        if let Some(names) = names {
            let mut policies = Vec::new();
            for name in &names {
                let entry = match name.as_str() {
                    "alwayson" => PolicyEntry::AlwaysOn(alwayson.take()),
                    "reactive" => PolicyEntry::Fixed(PolicySpec::Reactive),
                    "softreactive" => PolicyEntry::Fixed(PolicySpec::SoftReactive { idle_timeout }),
                    "hybrid" => PolicyEntry::Fixed(hybrid.clone()),
                    other => return Err(bad(policy_line, format!("unknown policy {other:?}"))),
                };
                if policies.iter().any(|p: &PolicyEntry| p.name() == entry.name()) {
                    return Err(bad(policy_line, format!("policy {name} listed twice")));
                }
                policies.push(entry);
            }
            cfg.policies = policies;
        } else {
            cfg.policies[0] = PolicyEntry::AlwaysOn(alwayson);
            cfg.policies[2] = PolicyEntry::Fixed(PolicySpec::SoftReactive { idle_timeout });
            cfg.policies[3] = PolicyEntry::Fixed(hybrid);
        }

        if let Some(v) = keys.list("sweep.t_setups")? {
            cfg.sweep.t_setups = v;
        }
        if let Some(v) = keys.list("sweep.p_sleeps")? {
            cfg.sweep.p_sleeps = v;
        }

        let a = &mut cfg.analysis;
        let ep = &mut a.energy_params;
        keys.set("analysis.p_full_speed", &mut ep.p_full_speed)?;
        keys.set("analysis.s", &mut ep.s)?;
        keys.set("analysis.rho", &mut ep.rho)?;
        keys.set("analysis.k", &mut ep.k)?;
        keys.set("analysis.k_prime", &mut ep.k_prime)?;
        keys.set("analysis.t_interval", &mut ep.t_interval)?;
        keys.set("analysis.t_sleep", &mut ep.t_sleep)?;
        a.energy = keys.parsed("analysis.energy")?;
        keys.set("analysis.n_sleeping", &mut a.n_sleeping)?;
        keys.set("analysis.ppw_alwayson", &mut a.ppw_alwayson)?;
        a.anchor_ppw = keys.list("analysis.anchor_ppw")?;
        a.row_t95 = keys.list("analysis.row_t95")?;
        a.disciplines = keys.parsed("analysis.n")?;
        keys.set("analysis.speed", &mut a.speed)?;

        if let Some(v) = keys.list("scaling.fleet_sizes")? {
            cfg.fleet_sizes = v;
        }
        keys.flag("scaling.scale_load", &mut cfg.scale_load)?;
        if let Some(e) = keys.take("output") {
            let path = PathBuf::from(e.value);
            cfg.output = if path.is_relative() { base_dir.join(path) } else { path };
        }
        keys.set("seed", &mut cfg.seed)?;

        if let Some((key, e)) = keys.map.into_iter().next() {
            return Err(bad(e.line, format!("unknown key {key}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> powersim::Result<()> {
        let invalid = |field: &'static str, reason: &str| powersim::Error::Invalid {
            field,
            reason: reason.to_string(),
        };
        if self.policies.is_empty() {
            return Err(invalid("policies", "at least one policy required"));
        }
        if let TraceSource::Spec(spec) = &self.trace {
            spec.validate()?;
        }
        self.cluster.validate()?;
        for p in &self.policies {
            if let PolicyEntry::Fixed(spec) = p {
                spec.validate()?;
            }
            if let PolicyEntry::AlwaysOn(Some(0)) = p {
                return Err(invalid("policy.alwayson.servers", "must be >= 1"));
            }
        }
        self.analysis.energy_params.validate()?;
        if self.fleet_sizes.contains(&0) {
            return Err(invalid("scaling.fleet_sizes", "fleet sizes must be >= 1"));
        }
        Ok(())
    }

    /// Loads or generates the trace and checks it covers the configured horizon.
    pub fn load_trace(&self) -> Result<RequestTrace> {
        let trace = match &self.trace {
            TraceSource::Spec(spec) => generate_trace(spec)?,
            TraceSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                load_trace(&text)?
            }
        };
        if let Some(h) = self.horizon {
            if h != trace.duration() {
                return Err(powersim::Error::Invalid {
                    field: "trace.duration",
                    reason: format!("configured horizon {h} s but trace covers {} s", trace.duration()),
                }
                .into());
            }
        }
        Ok(trace)
    }

    /// Energy operating point in watt-hours.
    pub fn energy(&self) -> powersim::Result<f64> {
        match self.analysis.energy {
            Some(e) => Ok(e),
            None => powersim::analysis::energy_eq1(&self.analysis.energy_params),
        }
    }
}

fn hybrid_from_keys(keys: &mut Keys) -> Result<PolicySpec> {
    let t_sla: Vec<f64> = keys.list("policy.hybrid.t_sla")?.unwrap_or_else(|| vec![500.0]);
    let n = t_sla.len();
    let mut column = |key: &str, default: f64| -> Result<Vec<f64>> {
        let line = keys.map.get(key).map_or(0, |e| e.line);
        match keys.list::<f64>(key)? {
            None => Ok(vec![default; n]),
            Some(v) if v.len() == n => Ok(v),
            Some(v) => Err(bad(line, format!("{key} has {} entries for {n} tiers", v.len()))),
        }
    };
    let throughput = column("policy.hybrid.throughput_est", 0.0)?;
    let queued = column("policy.hybrid.queued", 0.0)?;
    let incoming = column("policy.hybrid.incoming", 0.0)?;
    let tiers = (0..n)
        .map(|i| TierInput {
            queued: queued[i],
            incoming: incoming[i],
            t_sla: t_sla[i],
            throughput_est: throughput[i],
        })
        .collect();
    Ok(PolicySpec::HybridSchema { tiers })
}
