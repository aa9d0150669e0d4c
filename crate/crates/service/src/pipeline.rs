use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use wikicheck::evalkit::{aggregate_verdict, rank_evidence, EvalError, Profiler, Stage};
use wikicheck::nli::{NliError, NliHead, Predictor};
use wikicheck::query::{EntityExtractor, ExtractedEntity, QueryError, QueryPlan};
use wikicheck::retrieval::{LevelOne, RetrievalError};
use wikicheck::wikiclient::{
    cached, ArticleCandidate, BackendMode, FixtureBackend, MediaWikiBackend, RetryPolicy, SearchBackend, WikiClient,
    WikiError,
};
use wikicheck::{Claim, EmptyClaim, NliLabel, StageTimings, Verdict};

use crate::config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    InvalidClaim(#[from] EmptyClaim),
    #[error("no classification head loaded (set nli.head_path)")]
    ModelNotLoaded,
    #[error("setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Nli(#[from] NliError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Wiki(#[from] WikiError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Running per-stage latency sums for `/metrics`.
#[derive(Debug, Default)]
pub struct StageMetrics {
    inner: Mutex<MetricsInner>,
}

#[derive(Debug, Default, Clone)]
struct MetricsInner {
    requests: u64,
    degraded: u64,
    stage_seconds: [f64; 6],
    total_seconds: f64,
}

impl StageMetrics {
    fn observe(&self, t: &StageTimings, degraded: bool) {
        let mut m = self.inner.lock().expect("metrics lock");
        m.requests += 1;
        m.degraded += degraded as u64;
        for (i, stage) in Stage::ALL.iter().enumerate() {
            m.stage_seconds[i] += stage_value(t, *stage);
        }
        m.total_seconds += t.total_time;
    }

    pub fn requests(&self) -> u64 {
        self.inner.lock().expect("metrics lock").requests
    }

    /// Prometheus text exposition.
    pub fn render(&self) -> String {
        let m = self.inner.lock().expect("metrics lock").clone();
        let mut out = String::new();
        let _ = writeln!(out, "# TYPE wikicheck_requests_total counter");
        let _ = writeln!(out, "wikicheck_requests_total {}", m.requests);
        let _ = writeln!(out, "# TYPE wikicheck_degraded_total counter");
        let _ = writeln!(out, "wikicheck_degraded_total {}", m.degraded);
        let _ = writeln!(out, "# TYPE wikicheck_stage_seconds_sum counter");
        for (i, stage) in Stage::ALL.iter().enumerate() {
            let _ = writeln!(
                out,
                "wikicheck_stage_seconds_sum{{stage=\"{}\"}} {:.6}",
                stage.name(),
                m.stage_seconds[i]
            );
        }
        let _ = writeln!(
            out,
            "wikicheck_stage_seconds_sum{{stage=\"total_time\"}} {:.6}",
            m.total_seconds
        );
        out
    }
}

fn stage_value(t: &StageTimings, stage: Stage) -> f64 {
    match stage {
        Stage::NerModel => t.ner_model,
        Stage::WikiSearch => t.wiki_search,
        Stage::WikiTexts => t.wiki_texts,
        Stage::EmbeddingClaim => t.embedding_claim,
        Stage::EmbeddingHypothesis => t.embedding_hypothesis,
        Stage::Classification => t.classification,
    }
}

/// Output of the `search` command.
#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub entities: Vec<ExtractedEntity>,
    pub plan: QueryPlan,
    pub candidates: Vec<ArticleCandidate>,
    pub warnings: Vec<String>,
}

/// Level one plus level two, shared by every request.
pub struct Pipeline {
    level_one: LevelOne,
    predictor: Option<Predictor>,
    tau: f64,
    metrics: StageMetrics,
}

impl Pipeline {
    pub fn new(level_one: LevelOne, predictor: Option<Predictor>, tau: f64) -> Pipeline {
        Pipeline {
            level_one,
            predictor,
            tau,
            metrics: StageMetrics::default(),
        }
    }

    /// Builds the search backend described by the config, behind the
    /// response cache.
    pub fn backend_from_config(cfg: &PipelineConfig) -> Result<Arc<dyn SearchBackend>, PipelineError> {
        let ttl = Duration::from_secs(cfg.cache.ttl_seconds);
        Ok(match &cfg.wiki.fixture_path {
            Some(root) => {
                let fixture = FixtureBackend::open(root)
                    .map_err(|e| PipelineError::Setup(format!("fixture {}: {e}", root.display())))?;
                Arc::new(cached(fixture, cfg.cache.capacity, ttl))
            }
            None => Arc::new(cached(
                MediaWikiBackend::new(&cfg.wiki.api_url)?,
                cfg.cache.capacity,
                ttl,
            )),
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Pipeline, PipelineError> {
        Self::with_backend(cfg, Self::backend_from_config(cfg)?)
    }

    /// Like [`Pipeline::from_config`] but with an explicit search backend.
    pub fn with_backend(cfg: &PipelineConfig, backend: Arc<dyn SearchBackend>) -> Result<Pipeline, PipelineError> {
        let client = WikiClient::with_limits(backend, cfg.concurrency.max_inflight, RetryPolicy::default());
        let extractor: Arc<dyn EntityExtractor> = Arc::from(cfg.ner.backend.load()?);
        let level_one = LevelOne::new(extractor, client, cfg.query.strategy, cfg.query.n);
        let predictor = match &cfg.nli.head_path {
            Some(path) => {
                let head =
                    NliHead::load(path).map_err(|e| PipelineError::Setup(format!("head {}: {e}", path.display())))?;
                let encoder = cfg.nli.encoder.load()?;
                Some(Predictor::new(encoder, Arc::new(head))?.with_batch_size(cfg.nli.batch_size))
            }
            None => None,
        };
        Ok(Pipeline::new(level_one, predictor, cfg.agg.tau))
    }

    pub fn level_one(&self) -> &LevelOne {
        &self.level_one
    }

    pub fn predictor(&self) -> Option<&Predictor> {
        self.predictor.as_ref()
    }

    pub fn metrics(&self) -> &StageMetrics {
        &self.metrics
    }

    pub fn backend_mode(&self) -> BackendMode {
        self.level_one.client().backend().mode()
    }

    /// Verifies one claim. A retrieval failure yields an NEI verdict with a
    /// warning instead of an error.
    pub async fn check(&self, text: &str) -> Result<Verdict, PipelineError> {
        let claim = Claim::new(text)?;
        let predictor = self.predictor.as_ref().ok_or(PipelineError::ModelNotLoaded)?;
        let mut profiler = Profiler::new();

        let retrieved = match self.level_one.retrieve(&claim, &mut profiler).await {
            Ok(r) => r,
            Err(e) => {
                log::warn!("retrieval failed for {:?}: {e}", claim.text);
                let timings = profiler.timings();
                self.metrics.observe(&timings, true);
                return Ok(Verdict {
                    claim,
                    label: NliLabel::Nei,
                    predictions: Vec::new(),
                    candidates: Vec::new(),
                    timings,
                    warnings: vec![format!("retrieval failed: {e}")],
                });
            }
        };

        let predictions = predictor.predict_claim(&claim, &retrieved.sentences, &mut profiler)?;
        let ranked = rank_evidence(predictions);
        let label = aggregate_verdict(&ranked, self.tau)?;
        let timings = profiler.timings();
        self.metrics.observe(&timings, false);
        Ok(Verdict {
            claim,
            label,
            predictions: ranked,
            candidates: retrieved.candidate_titles(),
            timings,
            warnings: retrieved.warnings,
        })
    }

    /// Entities, query plan and merged candidates, without classification.
    pub async fn search(&self, text: &str) -> Result<SearchReport, PipelineError> {
        let claim = Claim::new(text)?;
        let (entities, plan) = self.level_one.plan(&claim, &mut Profiler::new())?;
        let outcome = self.level_one.client().execute_plan(&plan).await?;
        Ok(SearchReport {
            entities,
            plan,
            candidates: outcome.candidates,
            warnings: outcome.warnings,
        })
    }
}
