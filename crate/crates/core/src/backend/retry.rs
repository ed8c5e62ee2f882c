use std::future::Future;
use std::time::Duration;

use super::BackendError;

/// Exponential backoff: wait `base * factor^(n-1)` before the `n`-th retry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

/// Outcome of a single failed attempt.
#[derive(Debug)]
pub(crate) enum AttemptError {
    Transient(String),
    Permanent(BackendError),
}

impl RetryPolicy {
    /// Delay before attempt number `attempt` (1-based); zero for the first.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        self.base_delay.mul_f64(self.factor.powi(attempt as i32 - 2))
    }

    /// Sum of all delays slept before the final attempt.
    pub fn total_backoff(&self) -> Duration {
        (1..=self.max_attempts).map(|a| self.delay_before(a)).sum()
    }

    pub(crate) async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, BackendError>
    where
        F: FnMut(u32) -> Fut,
        Fut: Future<Output = Result<T, AttemptError>>,
    {
        let max = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            let delay = self.delay_before(attempt);
            if !delay.is_zero() {
                tracing::debug!(attempt, ?delay, "retrying after transient failure: {last}");
                tokio::time::sleep(delay).await;
            }
            match op(attempt).await {
                Ok(v) => return Ok(v),
                Err(AttemptError::Permanent(e)) => return Err(e),
                Err(AttemptError::Transient(msg)) => last = msg,
            }
        }
        Err(BackendError::Transport {
            attempts: max,
            message: last,
        })
    }
}
