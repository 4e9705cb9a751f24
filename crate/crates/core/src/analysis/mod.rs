//! Closed-form energy and efficiency model, plus metric extraction from
//! simulation results.
//!
//! Everything here except the simulation-facing helpers is generic over
//! [`Scalar`], so the same formulas run in `f64` for reporting and in exact
//! rationals for checking identities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod reference;
mod table;

pub use table::{build_metrics_table, MetricsCell, MetricsInputs, MetricsTable, RowLatency};

use crate::engine::SimResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameters of the interval energy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModelParams<T> {
    /// Watts at CPU speed `s` and full utilization.
    pub p_full_speed: T,
    /// Normalized CPU speed. Only `p_full_speed` depends on it; carried for reporting.
    pub s: T,
    /// Utilization in `[0, 1]`.
    pub rho: T,
    /// Idle power as a fraction of `p_full_speed`.
    pub k: T,
    /// Sleep power as a fraction of `p_full_speed`.
    pub k_prime: T,
    /// Interval length, hours.
    pub t_interval: T,
    /// Time asleep within the interval, hours.
    pub t_sleep: T,
}

impl<T: Scalar> EnergyModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        if !(self.p_full_speed >= zero) {
            return Err(Error::invalid(
                "p_full_speed",
                format!("{} must be >= 0", self.p_full_speed),
            ));
        }
        if !(zero <= self.rho && self.rho <= one) {
            return Err(Error::invalid("rho", format!("{} outside [0, 1]", self.rho)));
        }
        if !(zero <= self.k_prime && self.k_prime <= self.k && self.k <= one) {
            return Err(Error::invalid(
                "k_prime",
                format!("need 0 <= k' ({}) <= k ({}) <= 1", self.k_prime, self.k),
            ));
        }
        if !(zero <= self.t_sleep && self.t_sleep <= self.t_interval) {
            return Err(Error::invalid(
                "t_sleep",
                format!("need 0 <= t ({}) <= T ({})", self.t_sleep, self.t_interval),
            ));
        }
        Ok(())
    }
}

impl Default for EnergyModelParams<f64> {
    /// One parameter set that lands on the 250 Wh operating point.
    fn default() -> Self {
        Self {
            p_full_speed: 200.0,
            s: 1.0,
            rho: 0.5,
            k: 0.6,
            k_prime: 0.1,
            t_interval: 2.0,
            t_sleep: 0.5,
        }
    }
}

/// Interval energy in watt-hours:
/// `P(s,1)[(T - t)(rho(1 - k) + k) + t k']`.
pub fn energy_eq1<T: Scalar>(params: &EnergyModelParams<T>) -> Result<T> {
    params.validate()?;
    let p = params;
    let active = p.rho * (T::one() - p.k) + p.k;
    Ok(p.p_full_speed * ((p.t_interval - p.t_sleep) * active + p.t_sleep * p.k_prime))
}

/// Average power in watts of `energy` watt-hours spread over `t_setup` minutes.
pub fn power_from_energy<T: Scalar>(energy: T, t_setup: T) -> Result<T> {
    if !(t_setup > T::zero()) {
        return Err(Error::invalid("t_setup", format!("{t_setup} must be > 0")));
    }
    if !(energy >= T::zero()) {
        return Err(Error::invalid("energy", format!("{energy} must be >= 0")));
    }
    Ok(energy / (t_setup / T::from_int(60)))
}

/// Modelled P_avg: the converted energy plus `n_sleeping` servers at `p_sleep`.
pub fn p_avg_model<T: Scalar>(t_setup: T, p_sleep: T, energy: T, n_sleeping: usize) -> Result<T> {
    Ok(power_from_energy(energy, t_setup)? + T::from_count(n_sleeping) * p_sleep)
}

/// Nearest-rank 95th percentile: the element at 1-based rank `ceil(0.95 n)`.
pub fn t95<T: Scalar>(values: &[T]) -> Result<T> {
    percentile_nearest_rank(values, 95)
}

/// Nearest-rank percentile for `pct` in `1..=100`.
pub fn percentile_nearest_rank<T: Scalar>(values: &[T], pct: usize) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty("response times"));
    }
    if !(1..=100).contains(&pct) {
        return Err(Error::invalid("pct", format!("{pct} outside 1..=100")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    // Integer ceil of pct * n / 100.
    let rank = (pct * sorted.len()).div_ceil(100).max(1);
    Ok(sorted[rank - 1])
}

/// Time-weighted mean power of a run, watts.
pub fn avg_power(result: &SimResult) -> Result<f64> {
    if result.duration <= 0.0 {
        return Err(Error::invalid("duration", "zero-duration run"));
    }
    if result.power_timeline.is_empty() {
        return Err(Error::Empty("power timeline"));
    }
    Ok(timeline_mean(&result.power_timeline, result.duration))
}

/// Mean of a piecewise-constant `(time, value)` series over `[0, end)`.
pub fn timeline_mean(series: &[(f64, f64)], end: f64) -> f64 {
    let mut area = 0.0;
    for (i, &(t, v)) in series.iter().enumerate() {
        let next = series.get(i + 1).map_or(end, |s| s.0);
        area += v * (next - t);
    }
    area / end
}

/// Approximate response time `(L + 1) n / s`.
pub fn approx_response_time<T: Scalar>(queued: T, disciplines: T, speed: T) -> Result<T> {
    if !(speed > T::zero()) {
        return Err(Error::invalid("s", format!("{speed} must be > 0")));
    }
    if !(disciplines >= T::one()) {
        return Err(Error::invalid("n", format!("{disciplines} must be >= 1")));
    }
    if !(queued >= T::zero()) {
        return Err(Error::invalid("queued", format!("{queued} must be >= 0")));
    }
    Ok((queued + T::one()) * disciplines / speed)
}

/// Performance per watt, `1 / (P_avg * T_95)` in (ms * W)^-1.
pub fn ppw<T: Scalar>(p_avg: T, t95: T) -> Result<T> {
    if !(p_avg > T::zero()) {
        return Err(Error::invalid("p_avg", format!("{p_avg} must be > 0")));
    }
    if !(t95 > T::zero()) {
        return Err(Error::invalid("t95", format!("{t95} must be > 0")));
    }
    Ok(T::one() / (p_avg * t95))
}

/// The T_95 (ms) a row must have for `ppw_col0` at `p_avg_col0`.
pub fn derive_row_t95<T: Scalar>(p_avg_col0: T, ppw_col0: T) -> Result<T> {
    if !(p_avg_col0 > T::zero()) {
        return Err(Error::invalid("p_avg_col0", format!("{p_avg_col0} must be > 0")));
    }
    if !(ppw_col0 > T::zero()) {
        return Err(Error::invalid("ppw_col0", format!("{ppw_col0} must be > 0")));
    }
    Ok(T::one() / (p_avg_col0 * ppw_col0))
}

/// Normalized PPW. Above 1 means more efficient than the baseline.
pub fn nppw<T: Scalar>(ppw_candidate: T, ppw_alwayson: T) -> Result<T> {
    if !(ppw_alwayson > T::zero()) {
        return Err(Error::invalid("ppw_alwayson", format!("{ppw_alwayson} must be > 0")));
    }
    Ok(ppw_candidate / ppw_alwayson)
}

/// Least-squares count of sleeping servers behind a P_avg grid.
///
/// Fits `p_avg - power_from_energy(energy, t_setup) = n * p_sleep` through
/// the origin over all cells not listed in `skip` (as `(row, col)`).
pub fn fit_sleeping_count(
    energy: f64,
    t_setups: &[f64],
    p_sleeps: &[f64],
    p_avg: &[Vec<f64>],
    skip: &[(usize, usize)],
) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (r, &t) in t_setups.iter().enumerate() {
        let base = power_from_energy(energy, t)?;
        for (c, &p) in p_sleeps.iter().enumerate() {
            if skip.contains(&(r, c)) {
                continue;
            }
            let y = p_avg
                .get(r)
                .and_then(|row| row.get(c))
                .ok_or_else(|| Error::invalid("p_avg", format!("missing cell ({r}, {c})")))?;
            num += p * (y - base);
            den += p * p;
        }
    }
    if den == 0.0 {
        return Err(Error::invalid("p_sleeps", "no non-zero sleep power to fit against"));
    }
    Ok(num / den)
}

/// Default inputs reproducing the published grids.
pub fn default_metrics_inputs() -> MetricsInputs<f64> {
    MetricsInputs {
        energy: reference::ENERGY_WH,
        n_sleeping: reference::N_SLEEPING,
        t_setups: reference::T_SETUPS_MIN.to_vec(),
        p_sleeps: reference::P_SLEEPS_W.to_vec(),
        latency: reference::ANCHOR_PPW
            .iter()
            .map(|&p| RowLatency::AnchorPpw(p))
            .collect(),
        ppw_alwayson: reference::PPW_ALWAYSON,
    }
}
