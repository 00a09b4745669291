//! Sliding-window rate limiting for LLM and embedding traffic.
//!
//! Token budget: in any 60 s window ending at a grant, the sum of granted
//! tokens never exceeds `tokens_per_minute`. Windows are half-open
//! `(t - 60s, t]`, the usual sliding-log convention.

use crate::clock::Clock;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

pub const TOKEN_WINDOW: Duration = Duration::from_secs(60);

/// Process-wide LLM traffic ceiling.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RateBudget {
    pub tokens_per_minute: u64,
    pub requests_in_flight_max: usize,
}

impl Default for RateBudget {
    fn default() -> Self {
        Self {
            tokens_per_minute: 200_000,
            requests_in_flight_max: 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum RateError {
    #[error("request of {requested} tokens exceeds the per-minute budget of {budget}")]
    OverBudget { requested: u64, budget: u64 },
}

/// Sliding-window token limiter. `acquire` blocks (via the injected clock)
/// until the requested tokens fit in the current window, then records the
/// grant and returns its monotonic timestamp.
pub struct TokenRateLimiter {
    budget: u64,
    clock: Arc<dyn Clock>,
    grants: Mutex<VecDeque<(Duration, u64)>>,
}

impl TokenRateLimiter {
    pub fn new(tokens_per_minute: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            budget: tokens_per_minute,
            clock,
            grants: Mutex::new(VecDeque::new()),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn acquire(&self, tokens: u64) -> Result<Duration, RateError> {
        if tokens > self.budget {
            return Err(RateError::OverBudget {
                requested: tokens,
                budget: self.budget,
            });
        }
        if tokens == 0 {
            return Ok(self.clock.monotonic());
        }
        loop {
            let wait = {
                let mut grants = self.grants.lock().unwrap();
                let now = self.clock.monotonic();
                // Expire grants that fell out of the (now - 60s, now] window.
                while let Some(&(t, _)) = grants.front() {
                    if now >= t + TOKEN_WINDOW {
                        grants.pop_front();
                    } else {
                        break;
                    }
                }
                let used: u64 = grants.iter().map(|&(_, n)| n).sum();
                if used + tokens <= self.budget {
                    grants.push_back((now, tokens));
                    return Ok(now);
                }
                // Wait until the oldest grant leaves the window.
                let oldest = grants.front().map(|&(t, _)| t).unwrap_or(now);
                (oldest + TOKEN_WINDOW).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

/// Sliding-window request-count limiter (used by the download worker to
/// honor a requests-per-interval ceiling).
pub struct RequestRateLimiter {
    max_requests: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    sent: Mutex<VecDeque<Duration>>,
}

impl RequestRateLimiter {
    pub fn new(max_requests: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            max_requests: max_requests.max(1),
            window,
            clock,
            sent: Mutex::new(VecDeque::new()),
        }
    }

    /// Block until a request slot is free, then claim it.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut sent = self.sent.lock().unwrap();
                let now = self.clock.monotonic();
                while let Some(&t) = sent.front() {
                    if now >= t + self.window {
                        sent.pop_front();
                    } else {
                        break;
                    }
                }
                if sent.len() < self.max_requests {
                    sent.push_back(now);
                    return now;
                }
                let oldest = *sent.front().unwrap();
                (oldest + self.window).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

/// Bounds the number of concurrently outstanding backend requests.
pub struct InFlightLimiter {
    max: usize,
    state: Mutex<usize>,
    cv: Condvar,
}

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            state: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    pub fn enter(&self) -> InFlightGuard<'_> {
        let mut n = self.state.lock().unwrap();
        while *n >= self.max {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard { limiter: self }
    }
}

pub struct InFlightGuard<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.state.lock().unwrap();
        *n -= 1;
        self.limiter.cv.notify_one();
    }
}
