use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use lru::LruCache;
use parking_lot::Mutex;

use super::fixture::normalize_query;
use super::{canonical_title, BackendMode, SearchBackend, WikiError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Clone)]
enum Cached {
    Titles(Vec<String>),
    Text(Option<String>),
}

/// LRU + TTL decorator over another backend. Only successful responses are
/// stored; keys are the operation plus its normalized argument.
pub struct CachedBackend<B> {
    inner: B,
    entries: Mutex<LruCache<String, (Instant, Cached)>>,
    ttl: Duration,
    hits: AtomicU64,
    misses: AtomicU64,
}

/// Wraps `inner` in a cache of `capacity` entries that expire after `ttl`.
/// A capacity of zero is treated as one.
pub fn cached<B: SearchBackend>(inner: B, capacity: usize, ttl: Duration) -> CachedBackend<B> {
    CachedBackend::new(inner, capacity, ttl)
}

impl<B: SearchBackend> CachedBackend<B> {
    pub fn new(inner: B, capacity: usize, ttl: Duration) -> CachedBackend<B> {
        let capacity = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        CachedBackend {
            inner,
            entries: Mutex::new(LruCache::new(capacity)),
            ttl,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn lookup(&self, key: &str) -> Option<Cached> {
        let mut entries = self.entries.lock();
        let fresh = match entries.get(key) {
            Some((at, value)) if at.elapsed() <= self.ttl => Some(value.clone()),
            Some(_) => {
                entries.pop(key);
                None
            }
            None => None,
        };
        drop(entries);
        let counter = if fresh.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        fresh
    }

    fn store(&self, key: String, value: Cached) {
        self.entries.lock().put(key, (Instant::now(), value));
    }
}

#[async_trait]
impl<B: SearchBackend> SearchBackend for CachedBackend<B> {
    fn mode(&self) -> BackendMode {
        self.inner.mode()
    }

    async fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, WikiError> {
        let key = format!("search\u{1f}{limit}\u{1f}{}", normalize_query(query));
        if let Some(Cached::Titles(t)) = self.lookup(&key) {
            return Ok(t);
        }
        let titles = self.inner.search(query, limit).await?;
        self.store(key, Cached::Titles(titles.clone()));
        Ok(titles)
    }

    async fn get_text(&self, title: &str) -> Result<Option<String>, WikiError> {
        let key = format!("text\u{1f}{}", canonical_title(title));
        if let Some(Cached::Text(t)) = self.lookup(&key) {
            return Ok(t);
        }
        let text = self.inner.get_text(title).await?;
        self.store(key, Cached::Text(text.clone()));
        Ok(text)
    }
}
