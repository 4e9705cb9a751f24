//! Discrete-event simulation of a front-end cluster with sleep states.
//!
//! Requests arrive from a [`RequestTrace`](crate::workload::RequestTrace),
//! wait in one central FCFS queue and are packed onto the lowest-indexed idle
//! server. A policy re-plans the provisioned count every decision epoch.

mod power;
mod server;
mod sim;
mod time;

pub use power::ServerPowerProfile;
pub use server::{advance_server, route_request, Server, ServerEvent, ServerState};
pub use sim::{
    run_simulation, run_simulation_observed, ArrivalMode, ClusterConfig, CommandRecord, ServiceMode, SimResult,
    Snapshot, StateCounts, TimelineResolution,
};
pub use time::SimTime;
