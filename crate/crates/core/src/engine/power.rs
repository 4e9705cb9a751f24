use crate::error::{Error, Result};

use super::server::ServerState;

/// Per-server power draw by state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerPowerProfile {
    /// Watts while serving at full speed.
    pub p_full: f64,
    /// Idle draw as a fraction of `p_full`.
    pub k: f64,
    /// Watts while asleep.
    pub p_sleep: f64,
    /// Watts while booting out of sleep.
    pub p_setup: f64,
}

impl ServerPowerProfile {
    /// Profile with setup drawn at full power.
    pub fn new(p_full: f64, k: f64, p_sleep: f64) -> Self {
        Self {
            p_full,
            k,
            p_sleep,
            p_setup: p_full,
        }
    }

    pub fn idle(&self) -> f64 {
        self.k * self.p_full
    }

    pub fn draw(&self, state: &ServerState) -> f64 {
        match state {
            ServerState::Busy => self.p_full,
            ServerState::Idle => self.idle(),
            ServerState::Setup { .. } => self.p_setup,
            ServerState::Sleep => self.p_sleep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.p_full, self.k, self.p_sleep, self.p_setup]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.p_full < 0.0 {
            return Err(Error::invalid(
                "p_full",
                format!("{} must be finite and >= 0", self.p_full),
            ));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(Error::invalid("k", format!("{} outside [0, 1]", self.k)));
        }
        if self.p_sleep < 0.0 || self.p_sleep > self.idle() {
            return Err(Error::invalid(
                "p_sleep",
                format!("{} outside [0, k*p_full = {}]", self.p_sleep, self.idle()),
            ));
        }
        if !(0.0..=self.p_full).contains(&self.p_setup) {
            return Err(Error::invalid(
                "p_setup",
                format!("{} outside [0, p_full = {}]", self.p_setup, self.p_full),
            ));
        }
        Ok(())
    }
}

impl Default for ServerPowerProfile {
    /// 200 W busy, 140 W idle, instant-off sleep.
    fn default() -> Self {
        Self::new(200.0, 0.7, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draw_by_state() {
        let p = ServerPowerProfile::new(150.0, 0.6, 10.0);
        assert_eq!(p.draw(&ServerState::Busy), 150.0);
        assert_eq!(p.draw(&ServerState::Idle), 90.0);
        assert_eq!(
            p.draw(&ServerState::Setup {
                remaining: super::super::SimTime(5)
            }),
            150.0
        );
        assert_eq!(p.draw(&ServerState::Sleep), 10.0);
    }

    #[test]
    fn sleep_above_idle_rejected() {
        let p = ServerPowerProfile::new(100.0, 0.5, 60.0);
        assert!(matches!(p.validate(), Err(Error::Invalid { field: "p_sleep", .. })));
        let mut p = ServerPowerProfile::new(100.0, 0.5, 0.0);
        p.p_setup = 101.0;
        assert!(matches!(p.validate(), Err(Error::Invalid { field: "p_setup", .. })));
        assert!(ServerPowerProfile::new(100.0, 1.2, 0.0).validate().is_err());
    }
}
