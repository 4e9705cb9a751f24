//! The three run modes: metric tables, policy comparison and fleet scaling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use powersim::analysis::{
    approx_response_time, avg_power, build_metrics_table, nppw, ppw, reference, t95, MetricsInputs, MetricsTable,
    RowLatency,
};
use powersim::engine::{run_simulation, ClusterConfig, SimResult};
use powersim::policies::{alwayson_servers, PolicySpec};
use powersim::workload::{peak_rate, RequestTrace};
use rayon::prelude::*;

use crate::config::{PolicyEntry, RunConfig};
use crate::error::{CliError, Result};

pub const TABLE_HEADER: [&str; 3] = ["t_setup_min", "p_sleep_w", "value"];
pub const METRICS_HEADER: [&str; 6] = ["t_setup_min", "p_sleep_w", "p_avg_w", "t95_ms", "ppw", "nppw"];
pub const COMPARE_HEADER: [&str; 6] = ["policy", "avg_power_w", "t95_ms", "ppw", "completed", "saturated"];
pub const SCALING_HEADER: [&str; 6] = ["fleet_size", "policy", "nppw", "avg_power_w", "t95_ms", "saturated"];
pub const TIMELINE_HEADER: [&str; 6] = ["time_s", "power_w", "busy", "idle", "setup", "sleep"];

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn write_csv<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.as_ref()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn metrics_inputs(cfg: &RunConfig) -> Result<MetricsInputs<f64>> {
    let sweep = &cfg.sweep;
    let a = &cfg.analysis;
    let invalid = |field: &'static str, reason: String| CliError::Core(powersim::Error::Invalid { field, reason });
    let rows = sweep.t_setups.len();
    let latency = if let Some(t) = &a.row_t95 {
        if t.len() != rows {
            return Err(invalid(
                "analysis.row_t95",
                format!("{} values for {rows} setup times", t.len()),
            ));
        }
        t.iter().map(|&ms| RowLatency::Measured(ms)).collect()
    } else if let Some(p) = &a.anchor_ppw {
        if p.len() != rows {
            return Err(invalid(
                "analysis.anchor_ppw",
                format!("{} values for {rows} setup times", p.len()),
            ));
        }
        p.iter().map(|&v| RowLatency::AnchorPpw(v)).collect()
    } else {
        sweep
            .t_setups
            .iter()
            .map(|&t| {
                reference::T_SETUPS_MIN
                    .iter()
                    .position(|&r| r == t)
                    .map(|i| RowLatency::AnchorPpw(reference::ANCHOR_PPW[i]))
                    .ok_or_else(|| {
                        invalid(
                            "analysis.anchor_ppw",
                            format!("no reference latency for a {t}-minute setup; set analysis.anchor_ppw or analysis.row_t95"),
                        )
                    })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MetricsInputs {
        energy: cfg.energy()?,
        n_sleeping: a.n_sleeping,
        t_setups: sweep.t_setups.clone(),
        p_sleeps: sweep.p_sleeps.clone(),
        latency,
        ppw_alwayson: a.ppw_alwayson,
    })
}

type CellFormat = fn(&powersim::MetricsCell) -> String;

#[derive(Debug, Clone)]
pub struct TablesReport {
    pub table: MetricsTable<f64>,
    pub files: Vec<PathBuf>,
}

/// Writes `pavg.csv`, `ppw.csv`, `nppw.csv`, `flags.csv` (cells with NPPW
/// above 1) and the combined `metrics.csv`.
pub fn run_tables(cfg: &RunConfig) -> Result<TablesReport> {
    let table = build_metrics_table(&metrics_inputs(cfg)?)?;
    prepare_output(&cfg.output)?;
    let key = |c: &powersim::MetricsCell| [num(c.t_setup), num(c.p_sleep)];
    let mut files = Vec::new();
    let per_metric: [(&str, CellFormat); 4] = [
        ("pavg.csv", |c| num(c.p_avg)),
        ("ppw.csv", |c| num(c.ppw)),
        ("nppw.csv", |c| num(c.nppw)),
        ("flags.csv", |c| (c.nppw > 1.0).to_string()),
    ];
    for (name, value) in per_metric {
        let rows: Vec<Vec<String>> = table
            .cells()
            .iter()
            .map(|c| {
                let [t, p] = key(c);
                vec![t, p, value(c)]
            })
            .collect();
        let path = cfg.output.join(name);
        write_csv(&path, &TABLE_HEADER, &rows)?;
        files.push(path);
    }
    let rows: Vec<Vec<String>> = table
        .cells()
        .iter()
        .map(|c| {
            vec![
                num(c.t_setup),
                num(c.p_sleep),
                num(c.p_avg),
                num(c.t95),
                num(c.ppw),
                num(c.nppw),
            ]
        })
        .collect();
    let path = cfg.output.join("metrics.csv");
    write_csv(&path, &METRICS_HEADER, &rows)?;
    files.push(path);
    Ok(TablesReport { table, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policy: String,
    pub avg_power: f64,
    /// NaN when nothing completed.
    pub t95: f64,
    pub ppw: f64,
    pub completed: u64,
    pub saturated: bool,
    pub mean_queue_len: f64,
}

impl RunSummary {
    pub fn of(result: &SimResult) -> Result<Self> {
        let avg = avg_power(result)?;
        let (latency, efficiency) = if result.response_times.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let l = t95(&result.response_times)?;
            (l, if avg > 0.0 { ppw(avg, l)? } else { f64::NAN })
        };
        Ok(Self {
            policy: result.policy.to_string(),
            avg_power: avg,
            t95: latency,
            ppw: efficiency,
            completed: result.completed,
            saturated: result.saturated,
            mean_queue_len: result.mean_queue_len,
        })
    }
}

/// Runs every policy on the same trace and seed, in parallel.
pub fn simulate_all(
    policies: &[PolicySpec],
    trace: &RequestTrace,
    cluster: &ClusterConfig,
    seed: u64,
) -> Result<Vec<SimResult>> {
    policies
        .par_iter()
        .map(|p| run_simulation(trace, p, cluster, seed).map_err(CliError::from))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<RunSummary>,
    pub results: Vec<SimResult>,
    /// Policy with the highest PPW.
    pub best: String,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn compare(cfg: &RunConfig) -> Result<(Vec<RunSummary>, Vec<SimResult>)> {
    if cfg.policies.len() < 2 {
        return Err(powersim::Error::Invalid {
            field: "policies",
            reason: format!("compare needs at least 2 policies, got {}", cfg.policies.len()),
        }
        .into());
    }
    let trace = cfg.load_trace()?;
    let specs = cfg
        .policies
        .iter()
        .map(|p| p.resolve(&trace))
        .collect::<powersim::Result<Vec<_>>>()?;
    let results = simulate_all(&specs, &trace, &cfg.cluster, cfg.seed)?;
    let horizon = results[0].duration;
    if let Some(r) = results.iter().find(|r| r.duration != horizon) {
        return Err(powersim::Error::Invalid {
            field: "horizon",
            reason: format!(
                "{} ran {} s, {} ran {} s",
                results[0].policy, horizon, r.policy, r.duration
            ),
        }
        .into());
    }
    let rows = results.iter().map(RunSummary::of).collect::<Result<Vec<_>>>()?;
    Ok((rows, results))
}

fn summary_text(cfg: &RunConfig, rows: &[RunSummary], best: &str) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14}{:>14}{:>12}{:>14}{:>12}  saturated",
        "policy", "avg_power_w", "t95_ms", "ppw", "completed"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14}{:>14.1}{:>12.1}{:>14.4e}{:>12}  {}",
            r.policy, r.avg_power, r.t95, r.ppw, r.completed, r.saturated
        );
    }
    let _ = writeln!(s, "highest ppw: {best}");
    if let Some(base) = rows.iter().find(|r| r.policy == "alwayson") {
        for r in rows.iter().filter(|r| r.policy != "alwayson") {
            let _ = writeln!(
                s,
                "{} draws {:.1}% of alwayson power (nppw {:.3})",
                r.policy,
                100.0 * r.avg_power / base.avg_power,
                r.ppw / base.ppw
            );
        }
    }
    if let Some(n) = cfg.analysis.disciplines {
        for r in rows {
            let est = approx_response_time(r.mean_queue_len, n, cfg.analysis.speed)?;
            let _ = writeln!(s, "{} estimated response time (L + 1) n / s: {est:.3}", r.policy);
        }
    }
    Ok(s)
}

/// Writes `compare.csv`, `summary.txt` and one `timeline_<policy>.csv` per policy.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let (rows, results) = compare(cfg)?;
    let best = rows
        .iter()
        .filter(|r| !r.ppw.is_nan())
        .fold(None::<&RunSummary>, |acc, r| match acc {
            Some(a) if a.ppw >= r.ppw => Some(a),
            _ => Some(r),
        })
        .map_or_else(|| "none".to_string(), |r| r.policy.clone());
    let summary = summary_text(cfg, &rows, &best)?;

    prepare_output(&cfg.output)?;
    let mut files = Vec::new();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.policy.clone(),
                num(r.avg_power),
                num(r.t95),
                num(r.ppw),
                r.completed.to_string(),
                r.saturated.to_string(),
            ]
        })
        .collect();
    let path = cfg.output.join("compare.csv");
    write_csv(&path, &COMPARE_HEADER, &csv_rows)?;
    files.push(path);
    for r in &results {
        let timeline: Vec<Vec<String>> = r
            .power_timeline
            .iter()
            .zip(&r.active_server_timeline)
            .map(|(&(t, p), (_, c))| {
                vec![
                    num(t),
                    num(p),
                    c.busy.to_string(),
                    c.idle.to_string(),
                    c.setup.to_string(),
                    c.sleep.to_string(),
                ]
            })
            .collect();
        let path = cfg.output.join(format!("timeline_{}.csv", r.policy));
        write_csv(&path, &TIMELINE_HEADER, &timeline)?;
        files.push(path);
    }
    let path = cfg.output.join("summary.txt");
    fs::write(&path, &summary).map_err(|e| CliError::io(&path, e))?;
    files.push(path);
    Ok(CompareReport {
        rows,
        results,
        best,
        summary,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub fleet_size: usize,
    pub policy: String,
    /// PPW relative to a peak-sized AlwaysOn fleet on the same load.
    pub nppw: f64,
    pub avg_power: f64,
    pub t95: f64,
    pub saturated: bool,
}

/// One row per (fleet size, configured policy), ordered by fleet then policy.
pub fn scaling(cfg: &RunConfig) -> Result<Vec<ScalingRow>> {
    if cfg.fleet_sizes.is_empty() {
        return Err(powersim::Error::Empty("scaling.fleet_sizes").into());
    }
    let base_trace = cfg.load_trace()?;
    let base_fleet = cfg.cluster.n_servers as f64;

    struct Fleet {
        size: usize,
        trace: RequestTrace,
        cluster: ClusterConfig,
        required: usize,
        // Index 0 is the AlwaysOn baseline.
        specs: Vec<PolicySpec>,
    }
    let fleets = cfg
        .fleet_sizes
        .iter()
        .map(|&size| {
            let trace = if cfg.scale_load {
                base_trace.scaled(size as f64 / base_fleet)?
            } else {
                base_trace.clone()
            };
            let required = alwayson_servers(peak_rate(&trace))?;
            let mut specs = vec![PolicyEntry::AlwaysOn(None).resolve(&trace)?];
            for p in &cfg.policies {
                specs.push(p.resolve(&trace)?);
            }
            Ok(Fleet {
                size,
                cluster: ClusterConfig {
                    n_servers: size,
                    ..cfg.cluster.clone()
                },
                trace,
                required,
                specs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = fleets
        .iter()
        .enumerate()
        .flat_map(|(f, fleet)| (0..fleet.specs.len()).map(move |p| (f, p)))
        .collect();
    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(f, p)| {
            let fleet = &fleets[f];
            let r = run_simulation(&fleet.trace, &fleet.specs[p], &fleet.cluster, cfg.seed)?;
            RunSummary::of(&r)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut cursor = 0;
    for fleet in &fleets {
        let group = &results[cursor..cursor + fleet.specs.len()];
        cursor += fleet.specs.len();
        let baseline = &group[0];
        for s in &group[1..] {
            let ratio = if baseline.ppw.is_nan() || s.ppw.is_nan() {
                f64::NAN
            } else {
                nppw(s.ppw, baseline.ppw)?
            };
            rows.push(ScalingRow {
                fleet_size: fleet.size,
                policy: s.policy.clone(),
                nppw: ratio,
                avg_power: s.avg_power,
                t95: s.t95,
                saturated: s.saturated || fleet.required > fleet.size,
            });
        }
    }
    Ok(rows)
}

pub fn run_scaling(cfg: &RunConfig) -> Result<(Vec<ScalingRow>, PathBuf)> {
    let rows = scaling(cfg)?;
    prepare_output(&cfg.output)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.fleet_size.to_string(),
                r.policy.clone(),
                num(r.nppw),
                num(r.avg_power),
                num(r.t95),
                r.saturated.to_string(),
            ]
        })
        .collect();
    let path = cfg.output.join("scaling.csv");
    write_csv(&path, &SCALING_HEADER, &csv_rows)?;
    Ok((rows, path))
}
