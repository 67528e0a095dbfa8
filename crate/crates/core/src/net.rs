//! Request pacing, retry and an order-preserving worker pool for outbound
//! HTTP.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Spaces requests at least `1 / rate` seconds apart across all threads
/// sharing the limiter.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks until the caller may issue a request.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let secs = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(secs.min(self.max_delay.as_secs_f64()))
    }
}

/// Outcome of one attempt.
pub enum Attempt<T> {
    Done(T),
    /// Worth retrying, with an optional server-requested delay.
    Retry(String, Option<Duration>),
    Fail(String),
}

/// Runs `op` until it succeeds, fails permanently, or retries run out.
/// Returns the error message and the number of attempts made on failure.
pub fn with_retry<T>(policy: &RetryPolicy, mut op: impl FnMut() -> Attempt<T>) -> Result<T, (String, u32)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match op() {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fail(msg) => return Err((msg, attempt)),
            Attempt::Retry(msg, after) => {
                if attempt > policy.max_retries {
                    return Err((msg, attempt));
                }
                let delay = after.unwrap_or_else(|| policy.delay(attempt - 1));
                tracing::warn!(attempt, ?delay, "retrying: {msg}");
                thread::sleep(delay);
            }
        }
    }
}

/// Runs `f` over `jobs` on up to `workers` threads, returning results in
/// job order. Stops handing out work after the first error.
pub fn parallel_map<J: Sync, T: Send, E: Send>(
    workers: usize,
    jobs: &[J],
    f: impl Fn(&J) -> Result<T, E> + Sync,
) -> Result<Vec<T>, E> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<T, E>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().expect("slot poisoned") = Some(r);
            });
        }
    });
    let mut out = Vec::with_capacity(jobs.len());
    let mut first_err = None;
    for slot in slots {
        match slot.into_inner().expect("slot poisoned") {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            None => {}
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
