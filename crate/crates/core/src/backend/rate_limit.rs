use std::collections::VecDeque;
use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

/// Sliding-window schedule over an abstract clock: at most `limit` slots in
/// any `window`-long interval.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    limit: usize,
    window: Duration,
    recent: VecDeque<Duration>,
}

impl SlidingWindow {
    pub fn new(limit: usize, window: Duration) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        Self {
            limit,
            window,
            recent: VecDeque::with_capacity(limit),
        }
    }

    pub fn per_minute(limit: usize) -> Self {
        Self::new(limit, Duration::from_secs(60))
    }

    /// Books the earliest slot at or after `now` and returns it. Slots are
    /// handed out in non-decreasing order and each is at least one window
    /// after the slot `limit` positions earlier.
    pub fn reserve(&mut self, now: Duration) -> Duration {
        let mut slot = now;
        if let Some(last) = self.recent.back() {
            slot = slot.max(*last);
        }
        if self.recent.len() == self.limit {
            let oldest = self.recent.pop_front().expect("non-empty at limit");
            slot = slot.max(oldest + self.window);
        }
        self.recent.push_back(slot);
        slot
    }
}

/// Async limiter over the tokio clock. Shared across tasks; reservations are
/// booked under a lock and the wait happens outside it.
#[derive(Debug)]
pub struct RateLimiter {
    epoch: Instant,
    schedule: Mutex<SlidingWindow>,
}

impl RateLimiter {
    pub fn per_minute(limit: usize) -> Self {
        Self {
            epoch: Instant::now(),
            schedule: Mutex::new(SlidingWindow::per_minute(limit)),
        }
    }

    pub async fn acquire(&self) {
        let slot = {
            let mut schedule = self.schedule.lock().await;
            schedule.reserve(self.epoch.elapsed())
        };
        tokio::time::sleep_until(self.epoch + slot).await;
    }
}
