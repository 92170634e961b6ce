//! Polite single-process page fetching.

use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{CorpusError, RawPage, Result};

/// Enforces a minimum spacing between requests across all threads.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        Self { min_interval, next_slot: Mutex::new(None) }
    }

    /// Blocks until the caller may issue its request.
    pub fn acquire(&self) {
        let wait_until = {
            let mut slot = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let start = match *slot {
                Some(t) if t > now => t,
                _ => now,
            };
            *slot = Some(start + self.min_interval);
            start
        };
        let now = Instant::now();
        if wait_until > now {
            std::thread::sleep(wait_until - now);
        }
    }
}

pub struct Fetcher {
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl Fetcher {
    pub fn new(min_interval: Duration, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        Self { agent: ureq::Agent::new_with_config(config), limiter: RateLimiter::new(min_interval) }
    }

    pub fn fetch(&self, url: &str) -> Result<RawPage> {
        self.limiter.acquire();
        let fail = |e: ureq::Error| CorpusError::Fetch { url: url.to_string(), message: e.to_string() };
        let mut response = self.agent.get(url).call().map_err(fail)?;
        let html = response.body_mut().read_to_string().map_err(fail)?;
        let fetched_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64);
        RawPage::new(url, html, fetched_at)
    }

    /// Fetches every URL, running up to `workers` requests at once. Results
    /// keep input order; failures are returned in place.
    pub fn fetch_all(&self, urls: &[String], workers: usize) -> Vec<Result<RawPage>> {
        let workers = workers.clamp(1, urls.len().max(1));
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<RawPage>>>> = urls.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(url) = urls.get(i) else { break };
                    *results[i].lock().expect("result slot poisoned") = Some(self.fetch(url));
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().expect("result slot poisoned").expect("every url fetched"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn limiter_spaces_requests() {
        let limiter = RateLimiter::new(Duration::from_millis(20));
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(60));
    }

    #[test]
    fn fetches_from_local_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            for _ in 0..2 {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 1024];
                let _ = stream.read(&mut buf).unwrap();
                let body = "<p>hello fetch</p>";
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    body.len(),
                    body
                )
                .unwrap();
            }
        });
        let fetcher = Fetcher::new(Duration::from_millis(1), Duration::from_secs(5));
        let urls = vec![format!("http://{addr}/"), format!("http://{addr}/about")];
        let pages = fetcher.fetch_all(&urls, 2);
        server.join().unwrap();
        for page in pages {
            let page = page.unwrap();
            assert_eq!(page.html, "<p>hello fetch</p>");
            assert_eq!(page.domain, "127.0.0.1");
        }
    }
}
