use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// A single adoption: `user` posted on `cascade` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub user: usize,
    pub cascade: usize,
    pub time: f64,
}

impl Event {
    pub const fn new(user: usize, cascade: usize, time: f64) -> Self {
        Self {
            user,
            cascade,
            time,
        }
    }

    /// Deterministic total order: time, then user, then cascade.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.user.cmp(&other.user))
            .then(self.cascade.cmp(&other.cascade))
    }
}

/// Time-ordered event history observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
    horizon: f64,
}

impl EventLog {
    /// Validates and sorts `events` into canonical order.
    ///
    /// Times must be finite, nonnegative and not exceed `horizon`.
    pub fn new(mut events: Vec<Event>, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be finite and nonnegative, got {horizon}"
            )));
        }
        for (index, e) in events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("time {} is not a finite nonnegative number", e.time),
                });
            }
            if e.time > horizon {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("time {} exceeds horizon {horizon}", e.time),
                });
            }
        }
        events.sort_by(Event::canonical_cmp);
        Ok(Self { events, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Fails on the first event referencing a user or cascade outside the given ranges.
    pub fn check_ids(&self, n_users: usize, n_cascades: usize) -> Result<()> {
        for e in &self.events {
            if e.user >= n_users {
                return Err(Error::UserOutOfRange {
                    user: e.user,
                    n_users,
                });
            }
            if e.cascade >= n_cascades {
                return Err(Error::CascadeOutOfRange {
                    cascade: e.cascade,
                    n_cascades,
                });
            }
        }
        Ok(())
    }

    /// Number of events of each user; ids beyond `n_users` are ignored.
    pub fn user_counts(&self, n_users: usize) -> Vec<usize> {
        let mut counts = vec![0; n_users];
        for e in &self.events {
            if let Some(c) = counts.get_mut(e.user) {
                *c += 1;
            }
        }
        counts
    }

    pub fn cascade_counts(&self, n_cascades: usize) -> Vec<usize> {
        let mut counts = vec![0; n_cascades];
        for e in &self.events {
            if let Some(c) = counts.get_mut(e.cascade) {
                *c += 1;
            }
        }
        counts
    }

    /// Largest user id + 1 and largest cascade id + 1 seen in the log.
    pub fn id_extent(&self) -> (usize, usize) {
        self.events.iter().fold((0, 0), |(u, c), e| {
            (u.max(e.user + 1), c.max(e.cascade + 1))
        })
    }
}
