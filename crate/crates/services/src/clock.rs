//! Time sources. Services read time only through [`Clock`] so tests can run
//! on virtual time.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch on this clock.
    fn now_ms(&self) -> u64;

    /// Blocks until `ms` milliseconds of this clock's time have passed.
    fn sleep_ms(&self, ms: u64);

    fn sleep_until(&self, deadline_ms: u64) {
        let now = self.now_ms();
        if deadline_ms > now {
            self.sleep_ms(deadline_ms - now);
        }
    }
}

pub fn system_now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Sleeps `ms` of clock time in short steps, returning early (with `false`)
/// once `stop` is set.
pub fn sleep_or_stop(clock: &dyn Clock, ms: u64, stop: &AtomicBool) -> bool {
    let deadline = clock.now_ms().saturating_add(ms);
    loop {
        if stop.load(Ordering::SeqCst) {
            return false;
        }
        let now = clock.now_ms();
        if now >= deadline {
            return true;
        }
        clock.sleep_ms((deadline - now).min(100));
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        system_now_ms()
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Virtual time running `speed` times faster than the wall clock, starting at
/// the wall-clock time of construction.
#[derive(Debug, Clone)]
pub struct ScaledClock {
    origin_ms: u64,
    started: Instant,
    speed: f64,
}

impl ScaledClock {
    pub fn new(speed: f64) -> Self {
        Self::starting_at(system_now_ms(), speed)
    }

    pub fn starting_at(origin_ms: u64, speed: f64) -> Self {
        assert!(
            speed.is_finite() && speed > 0.0,
            "clock speed must be positive"
        );
        Self {
            origin_ms,
            started: Instant::now(),
            speed,
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }
}

impl Clock for ScaledClock {
    fn now_ms(&self) -> u64 {
        let real = self.started.elapsed().as_secs_f64() * 1000.0;
        self.origin_ms + (real * self.speed) as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_secs_f64(ms as f64 / 1000.0 / self.speed));
    }
}

/// Hand-driven clock for tests. `sleep_ms` advances time instead of blocking.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    now: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self {
            now: Arc::new(AtomicU64::new(start_ms)),
        }
    }

    pub fn set(&self, ms: u64) {
        self.now.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }
}
