use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{derive_row_t95, nppw, p_avg_model, ppw};

/// Where a setup-time row gets its 95th-percentile latency from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowLatency<T> {
    /// Back out T_95 from the modelled zero-sleep-power P_avg and this PPW.
    AnchorPpw(T),
    /// A known T_95 in milliseconds, e.g. from a simulation run.
    Measured(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsCell<T> {
    /// Minutes.
    pub t_setup: T,
    /// Watts.
    pub p_sleep: T,
    /// Watts.
    pub p_avg: T,
    /// Milliseconds.
    pub t95: T,
    /// (ms * W)^-1.
    pub ppw: T,
    pub nppw: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsInputs<T> {
    /// Watt-hours.
    pub energy: T,
    pub n_sleeping: usize,
    pub t_setups: Vec<T>,
    pub p_sleeps: Vec<T>,
    /// One entry per `t_setups` row.
    pub latency: Vec<RowLatency<T>>,
    pub ppw_alwayson: T,
}

/// `(t_setup, p_sleep)` grid of power and efficiency metrics, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable<T> {
    pub t_setups: Vec<T>,
    pub p_sleeps: Vec<T>,
    pub ppw_alwayson: T,
    cells: Vec<MetricsCell<T>>,
}

impl<T: Scalar> MetricsTable<T> {
    pub fn cells(&self) -> &[MetricsCell<T>] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> &MetricsCell<T> {
        &self.cells[row * self.p_sleeps.len() + col]
    }

    /// Looks a cell up by its key values.
    pub fn get(&self, t_setup: T, p_sleep: T) -> Option<&MetricsCell<T>> {
        self.cells.iter().find(|c| c.t_setup == t_setup && c.p_sleep == p_sleep)
    }

    pub fn rows(&self) -> usize {
        self.t_setups.len()
    }

    pub fn cols(&self) -> usize {
        self.p_sleeps.len()
    }
}

/// Fills every cell from the P_avg model, one T_95 per setup-time row and the
/// PPW/NPPW ratios.
pub fn build_metrics_table<T: Scalar>(inputs: &MetricsInputs<T>) -> Result<MetricsTable<T>> {
    if inputs.t_setups.is_empty() {
        return Err(Error::Empty("t_setups"));
    }
    if inputs.p_sleeps.is_empty() {
        return Err(Error::Empty("p_sleeps"));
    }
    if inputs.latency.len() != inputs.t_setups.len() {
        return Err(Error::invalid(
            "latency",
            format!(
                "{} row latencies for {} setup times",
                inputs.latency.len(),
                inputs.t_setups.len()
            ),
        ));
    }
    let mut cells = Vec::with_capacity(inputs.t_setups.len() * inputs.p_sleeps.len());
    for (&t_setup, latency) in inputs.t_setups.iter().zip(&inputs.latency) {
        let t95 = match *latency {
            RowLatency::AnchorPpw(anchor) => {
                let base = p_avg_model(t_setup, T::zero(), inputs.energy, inputs.n_sleeping)?;
                derive_row_t95(base, anchor)?
            }
            RowLatency::Measured(ms) => ms,
        };
        for &p_sleep in &inputs.p_sleeps {
            let p_avg = p_avg_model(t_setup, p_sleep, inputs.energy, inputs.n_sleeping)?;
            let efficiency = ppw(p_avg, t95)?;
            cells.push(MetricsCell {
                t_setup,
                p_sleep,
                p_avg,
                t95,
                ppw: efficiency,
                nppw: nppw(efficiency, inputs.ppw_alwayson)?,
            });
        }
    }
    Ok(MetricsTable {
        t_setups: inputs.t_setups.clone(),
        p_sleeps: inputs.p_sleeps.clone(),
        ppw_alwayson: inputs.ppw_alwayson,
        cells,
    })
}
