use crate::error::{Error, Result};

use super::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerState {
    Busy,
    Idle,
    /// Booting out of sleep; unavailable until `remaining` reaches zero.
    Setup {
        remaining: SimTime,
    },
    Sleep,
}

impl ServerState {
    /// Whether the server can hold a request (idle servers accept dispatch).
    pub fn is_serving(&self) -> bool {
        matches!(self, ServerState::Busy | ServerState::Idle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Server {
    pub state: ServerState,
    /// Outstanding sleep order.
    ///
    /// On an idle server this is the countdown still to run before it sleeps.
    /// On a busy server it is the countdown that starts once the in-flight
    /// request completes (zero means sleep on completion).
    pub pending_sleep: Option<SimTime>,
}

impl Server {
    pub fn new(state: ServerState) -> Self {
        Self {
            state,
            pending_sleep: None,
        }
    }

    pub fn idle() -> Self {
        Self::new(ServerState::Idle)
    }

    pub fn asleep() -> Self {
        Self::new(ServerState::Sleep)
    }

    /// Part of the provisioned capacity: serving without a sleep order, or booting.
    pub fn counts_toward_capacity(&self) -> bool {
        match self.state {
            ServerState::Busy | ServerState::Idle => self.pending_sleep.is_none(),
            ServerState::Setup { .. } => true,
            ServerState::Sleep => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerEvent {
    Dispatch,
    Complete,
    /// Sleep after `delay` of continuous idleness. Zero means immediately
    /// (or as soon as the in-flight request completes).
    SleepCommand {
        delay: SimTime,
    },
    /// Boot a sleeping server, or rescind an outstanding sleep order.
    WakeCommand,
    Tick(SimTime),
}

/// Applies one event to a server.
///
/// Illegal pairs (dispatch to a non-idle server, completion on a non-busy one,
/// waking a server with nothing to wake or rescind, sleeping a server that is
/// asleep or booting) are engine bugs and return [`Error::Contract`].
pub fn advance_server(server: Server, event: ServerEvent, t_setup: SimTime) -> Result<Server> {
    use ServerEvent as E;
    use ServerState as S;

    let illegal = || {
        Err(Error::Contract(format!(
            "event {event:?} is illegal for server in {:?} (pending sleep {:?})",
            server.state, server.pending_sleep
        )))
    };

    let next = match (server.state, event) {
        (S::Idle, E::Dispatch) => Server::new(S::Busy),
        (S::Busy, E::Complete) => match server.pending_sleep {
            Some(d) if d == SimTime::ZERO => Server::asleep(),
            pending => Server {
                state: S::Idle,
                pending_sleep: pending,
            },
        },
        (S::Idle, E::SleepCommand { delay }) if server.pending_sleep.is_none() => {
            if delay == SimTime::ZERO {
                Server::asleep()
            } else {
                Server {
                    state: S::Idle,
                    pending_sleep: Some(delay),
                }
            }
        }
        (S::Busy, E::SleepCommand { delay }) if server.pending_sleep.is_none() => Server {
            state: S::Busy,
            pending_sleep: Some(delay),
        },
        (S::Sleep, E::WakeCommand) => {
            if t_setup == SimTime::ZERO {
                Server::idle()
            } else {
                Server::new(S::Setup { remaining: t_setup })
            }
        }
        (S::Idle | S::Busy, E::WakeCommand) if server.pending_sleep.is_some() => Server::new(server.state),
        (S::Setup { remaining }, E::Tick(dt)) => {
            if dt >= remaining {
                Server::idle()
            } else {
                Server::new(S::Setup {
                    remaining: remaining - dt,
                })
            }
        }
        (S::Idle, E::Tick(dt)) => match server.pending_sleep {
            Some(left) if dt >= left => Server::asleep(),
            Some(left) => Server {
                state: S::Idle,
                pending_sleep: Some(left - dt),
            },
            None => server,
        },
        (S::Busy | S::Sleep, E::Tick(_)) => server,
        _ => return illegal(),
    };
    Ok(next)
}

/// Packing dispatch: the lowest-indexed idle server, or `None` when the
/// request must wait in the central queue.
pub fn route_request(servers: &[Server]) -> Option<usize> {
    servers.iter().position(|s| s.state == ServerState::Idle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SETUP: SimTime = SimTime(5_000_000_000);

    fn step(s: Server, e: ServerEvent) -> Server {
        advance_server(s, e, SETUP).unwrap()
    }

    #[test]
    fn wake_enters_setup_for_full_duration() {
        let s = step(Server::asleep(), ServerEvent::WakeCommand);
        assert_eq!(s.state, ServerState::Setup { remaining: SETUP });
    }

    #[test]
    fn setup_countdown_exhausts_to_idle() {
        let s = Server::new(ServerState::Setup { remaining: SETUP });
        let half = step(s, ServerEvent::Tick(SimTime(2_000_000_000)));
        assert_eq!(
            half.state,
            ServerState::Setup {
                remaining: SimTime(3_000_000_000)
            }
        );
        assert_eq!(step(s, ServerEvent::Tick(SETUP)), Server::idle());
    }

    #[test]
    fn service_round_trip() {
        let busy = step(Server::idle(), ServerEvent::Dispatch);
        assert_eq!(busy.state, ServerState::Busy);
        assert_eq!(step(busy, ServerEvent::Complete), Server::idle());
    }

    #[test]
    fn immediate_sleep_and_deferred_sleep() {
        let zero = ServerEvent::SleepCommand { delay: SimTime::ZERO };
        assert_eq!(step(Server::idle(), zero), Server::asleep());

        let busy = step(Server::new(ServerState::Busy), zero);
        assert_eq!(busy.state, ServerState::Busy);
        assert_eq!(step(busy, ServerEvent::Complete), Server::asleep());
    }

    #[test]
    fn idle_countdown_and_cancel_on_dispatch() {
        let armed = step(Server::idle(), ServerEvent::SleepCommand { delay: SimTime(60) });
        assert_eq!(armed.pending_sleep, Some(SimTime(60)));
        let part = step(armed, ServerEvent::Tick(SimTime(30)));
        assert_eq!(part.pending_sleep, Some(SimTime(30)));
        assert_eq!(step(part, ServerEvent::Tick(SimTime(30))), Server::asleep());

        let rescued = step(part, ServerEvent::Dispatch);
        assert_eq!(rescued, Server::new(ServerState::Busy));
    }

    #[test]
    fn wake_rescinds_sleep_order() {
        let armed = step(Server::idle(), ServerEvent::SleepCommand { delay: SimTime(60) });
        assert_eq!(step(armed, ServerEvent::WakeCommand), Server::idle());
    }

    #[test]
    fn illegal_pairs_are_contract_violations() {
        let cases = [
            (Server::asleep(), ServerEvent::Dispatch),
            (Server::new(ServerState::Busy), ServerEvent::Dispatch),
            (Server::idle(), ServerEvent::Complete),
            (Server::idle(), ServerEvent::WakeCommand),
            (Server::asleep(), ServerEvent::SleepCommand { delay: SimTime::ZERO }),
            (
                Server::new(ServerState::Setup { remaining: SETUP }),
                ServerEvent::SleepCommand { delay: SimTime::ZERO },
            ),
        ];
        for (s, e) in cases {
            assert!(
                matches!(advance_server(s, e, SETUP), Err(Error::Contract(_))),
                "{s:?} {e:?}"
            );
        }
    }

    #[test]
    fn routing_packs_onto_lowest_idle() {
        let busy = Server::new(ServerState::Busy);
        assert_eq!(route_request(&[busy, Server::idle(), Server::idle()]), Some(1));
        assert_eq!(route_request(&[busy, busy, busy]), None);
        let setup = Server::new(ServerState::Setup { remaining: SETUP });
        assert_eq!(route_request(&[Server::asleep(), setup, Server::idle()]), Some(2));
    }
}
