//! Level-one retrieval: run query plans against a search backend, merge the
//! per-query results and fetch article plain text.

mod cache;
mod fixture;
mod live;

use std::sync::Arc;
use std::time::{Duration, SystemTime};

use async_trait::async_trait;
use futures::future::join_all;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::query::QueryPlan;

pub use cache::{cached, CacheStats, CachedBackend};
pub use fixture::FixtureBackend;
pub use live::{MediaWikiBackend, DEFAULT_API_URL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Live,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WikiError {
    #[error("search limit must be at least 1")]
    InvalidLimit,
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited (retry after {retry_after:?}s)")]
    RateLimited { retry_after: Option<u64> },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("retrieval failed for every query: {}", .0.join("; "))]
    Retrieval(Vec<String>),
}

impl WikiError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, WikiError::Network(_))
    }
}

/// Search and plain-text access to a wiki. Implementations must tolerate
/// concurrent calls.
#[async_trait]
pub trait SearchBackend: Send + Sync {
    fn mode(&self) -> BackendMode;

    /// Titles of the top `limit` hits for `query`, best first.
    async fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, WikiError>;

    /// Plain text of an article, or `None` when the page does not exist.
    async fn get_text(&self, title: &str) -> Result<Option<String>, WikiError>;
}

#[async_trait]
impl<B: SearchBackend + ?Sized> SearchBackend for Arc<B> {
    fn mode(&self) -> BackendMode {
        (**self).mode()
    }

    async fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, WikiError> {
        (**self).search(query, limit).await
    }

    async fn get_text(&self, title: &str) -> Result<Option<String>, WikiError> {
        (**self).get_text(title).await
    }
}

/// Canonical wiki title: underscores become spaces, whitespace collapses and
/// the first character is upper-cased.
pub fn canonical_title(title: &str) -> String {
    let spaced = title.replace('_', " ");
    let collapsed = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut chars = collapsed.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleCandidate {
    pub title: String,
    /// 1 is the top hit of its query.
    pub rank: usize,
    pub source_query_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleContent {
    pub title: String,
    pub plain_text: String,
    pub retrieved_at: SystemTime,
    /// The page does not exist or could not be fetched; `plain_text` is empty.
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanOutcome {
    pub candidates: Vec<ArticleCandidate>,
    /// One entry per failed query.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FetchOutcome {
    /// One entry per requested title, in request order.
    pub contents: Vec<ArticleContent>,
    pub warnings: Vec<String>,
}

impl FetchOutcome {
    pub fn missing_count(&self) -> usize {
        self.contents.iter().filter(|c| c.missing).count()
    }
}

/// Retry schedule for transient network failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, WikiError>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<T, WikiError>>,
    {
        let mut attempt = 1;
        loop {
            match op().await {
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    let delay = self.base_delay * 2u32.pow(attempt - 1);
                    log::debug!("attempt {attempt} failed ({e}), retrying in {delay:?}");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

pub const DEFAULT_MAX_INFLIGHT: usize = 4;

/// Front end over a [`SearchBackend`] with retries and a bounded number of
/// in-flight requests. Clones share the same request budget.
#[derive(Clone)]
pub struct WikiClient {
    backend: Arc<dyn SearchBackend>,
    permits: Arc<Semaphore>,
    retry: RetryPolicy,
}

impl WikiClient {
    pub fn new(backend: Arc<dyn SearchBackend>) -> WikiClient {
        Self::with_limits(backend, DEFAULT_MAX_INFLIGHT, RetryPolicy::default())
    }

    pub fn with_limits(backend: Arc<dyn SearchBackend>, max_inflight: usize, retry: RetryPolicy) -> WikiClient {
        WikiClient {
            backend,
            permits: Arc::new(Semaphore::new(max_inflight.max(1))),
            retry,
        }
    }

    pub fn backend(&self) -> &Arc<dyn SearchBackend> {
        &self.backend
    }

    pub async fn search(&self, query: &str, limit: usize) -> Result<Vec<ArticleCandidate>, WikiError> {
        self.search_indexed(query, limit, 0).await
    }

    async fn search_indexed(
        &self,
        query: &str,
        limit: usize,
        source_query_index: usize,
    ) -> Result<Vec<ArticleCandidate>, WikiError> {
        if limit == 0 {
            return Err(WikiError::InvalidLimit);
        }
        let titles = self
            .retry
            .run(|| async {
                let _permit = self.permits.acquire().await.expect("semaphore closed");
                self.backend.search(query, limit).await
            })
            .await?;
        Ok(titles
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, t)| ArticleCandidate {
                title: canonical_title(t),
                rank: i + 1,
                source_query_index,
            })
            .collect())
    }

    /// Runs every query of the plan concurrently and merges the results
    /// rank by rank (all top hits in query order, then all second hits, ...),
    /// keeping the first occurrence of each title.
    pub async fn execute_plan(&self, plan: &QueryPlan) -> Result<PlanOutcome, WikiError> {
        let results = join_all(
            plan.queries
                .iter()
                .enumerate()
                .map(|(i, q)| self.search_indexed(q, plan.per_query_limit, i)),
        )
        .await;

        let mut warnings = Vec::new();
        let mut lists = Vec::with_capacity(results.len());
        for (query, result) in plan.queries.iter().zip(results) {
            match result {
                Ok(list) => lists.push(list),
                Err(e) => warnings.push(format!("query {query:?} failed: {e}")),
            }
        }
        if lists.is_empty() && !plan.queries.is_empty() {
            return Err(WikiError::Retrieval(warnings));
        }
        Ok(PlanOutcome {
            candidates: interleave_by_rank(lists),
            warnings,
        })
    }

    /// Fetches article texts concurrently, one entry per title in input
    /// order. Missing or unreachable pages are flagged, never fatal.
    pub async fn fetch_texts(&self, titles: &[String]) -> FetchOutcome {
        let results = join_all(titles.iter().map(|t| async move {
            self.retry
                .run(|| async {
                    let _permit = self.permits.acquire().await.expect("semaphore closed");
                    self.backend.get_text(t).await
                })
                .await
        }))
        .await;

        let mut outcome = FetchOutcome::default();
        for (title, result) in titles.iter().zip(results) {
            let text = match result {
                Ok(Some(text)) if !text.trim().is_empty() => Some(text),
                Ok(_) => {
                    outcome.warnings.push(format!("missing page {title:?}"));
                    None
                }
                Err(e) => {
                    outcome.warnings.push(format!("fetching {title:?} failed: {e}"));
                    None
                }
            };
            outcome.contents.push(ArticleContent {
                title: title.clone(),
                missing: text.is_none(),
                plain_text: text.unwrap_or_default(),
                retrieved_at: SystemTime::now(),
            });
        }
        outcome
    }
}

/// Round-robin merge by rank with first-occurrence dedup on title.
pub fn interleave_by_rank(lists: Vec<Vec<ArticleCandidate>>) -> Vec<ArticleCandidate> {
    let depth = lists.iter().map(Vec::len).max().unwrap_or(0);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for r in 0..depth {
        for list in &lists {
            if let Some(c) = list.get(r) {
                if seen.insert(c.title.clone()) {
                    out.push(c.clone());
                }
            }
        }
    }
    out
}
