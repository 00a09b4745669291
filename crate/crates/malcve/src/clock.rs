//! Clock abstraction so pipelines, rate limiters, and reports can run against
//! real time in production and injected time in tests.

use chrono::{DateTime, TimeZone, Utc};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Time source for the pipeline. `now` feeds report timestamps, `monotonic`
/// and `sleep` drive rate limiting and retry backoff.
pub trait Clock: Send + Sync {
    /// Current wall-clock time (UTC).
    fn now(&self) -> DateTime<Utc>;

    /// Monotonic time elapsed since the clock was created.
    fn monotonic(&self) -> Duration;

    /// Block the caller for `d` (or advance virtual time by `d`).
    fn sleep(&self, d: Duration);
}

/// Real time: `Utc::now`, `Instant`, `thread::sleep`.
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn monotonic(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Virtual time for tests: `sleep` advances the clock instantly, both the
/// wall time and the monotonic reading move together.
pub struct VirtualClock {
    start: DateTime<Utc>,
    elapsed: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            start,
            elapsed: Mutex::new(Duration::ZERO),
        }
    }

    /// Virtual clock starting at the Unix epoch.
    pub fn at_epoch() -> Self {
        Self::new(Utc.timestamp_opt(0, 0).unwrap())
    }

    /// Advance virtual time without sleeping.
    pub fn advance(&self, d: Duration) {
        *self.elapsed.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        self.start + chrono::Duration::from_std(self.monotonic()).unwrap_or_default()
    }

    fn monotonic(&self) -> Duration {
        *self.elapsed.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Frozen wall clock: `now` always returns the same instant so report output
/// is byte-stable, while the monotonic reading still advances on `sleep` so
/// rate limiters cannot deadlock.
pub struct FixedClock {
    fixed: DateTime<Utc>,
    elapsed: Mutex<Duration>,
}

impl FixedClock {
    pub fn new(fixed: DateTime<Utc>) -> Self {
        Self {
            fixed,
            elapsed: Mutex::new(Duration::ZERO),
        }
    }

    pub fn at_epoch() -> Self {
        Self::new(Utc.timestamp_opt(0, 0).unwrap())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.fixed
    }

    fn monotonic(&self) -> Duration {
        *self.elapsed.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        *self.elapsed.lock().unwrap() += d;
    }
}
