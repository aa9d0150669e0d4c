//! Shared fixture helpers for the service integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::Value;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use wikicheck::evalkit::Profiler;
use wikicheck::nli::{EncoderSpec, TrainConfig};
use wikicheck::wikiclient::{BackendMode, SearchBackend, WikiError};
use wikicheck::{parse_label, Claim, EvidenceRef, LabeledPair, NliLabel};
use wikicheck_service::server::serve_on;
use wikicheck_service::training::train_on_pairs;
use wikicheck_service::{Pipeline, PipelineConfig};

pub const HASH_DIM: usize = 128;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

#[derive(Debug, Clone)]
pub struct FixtureClaim {
    pub id: u64,
    pub claim: String,
    pub label: NliLabel,
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Deserialize)]
struct RawClaim {
    id: u64,
    claim: String,
    label: String,
    evidence: Vec<(String, usize)>,
}

pub fn load_claims() -> Vec<FixtureClaim> {
    std::fs::read_to_string(fixture_dir().join("claims.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let r: RawClaim = serde_json::from_str(l).unwrap();
            FixtureClaim {
                id: r.id,
                claim: r.claim,
                label: parse_label(&r.label).unwrap(),
                evidence: r.evidence.into_iter().map(|(t, i)| EvidenceRef::new(t, i)).collect(),
            }
        })
        .collect()
}

pub fn fixture_config(head_path: Option<&Path>) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.wiki.fixture_path = Some(fixture_dir());
    cfg.nli.encoder = EncoderSpec::Hash(HASH_DIM);
    cfg.nli.head_path = head_path.map(Path::to_path_buf);
    cfg
}

/// Every retrieved sentence of every fixture claim: the gold sentence
/// carries the claim label, everything else is NEI.
pub async fn fixture_pairs() -> Vec<LabeledPair> {
    let pipeline = Pipeline::from_config(&fixture_config(None)).unwrap();
    let mut pairs = Vec::new();
    for c in load_claims() {
        let claim = Claim::new(c.claim.clone()).unwrap();
        let retrieved = pipeline
            .level_one()
            .retrieve(&claim, &mut Profiler::new())
            .await
            .unwrap();
        for s in retrieved.sentences {
            let label = if c.evidence.contains(&s.evidence_ref) {
                c.label
            } else {
                NliLabel::Nei
            };
            pairs.push(LabeledPair::new(c.claim.clone(), s.cleaned_text.clone(), label).with_ref(s.evidence_ref));
        }
    }
    pairs
}

pub fn train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.1,
        epochs: 300,
        batch_size: 16,
        seed: 0,
        hidden: 64,
        ..Default::default()
    }
}

/// Trains a head on the fixture pair set and writes it to `dir/head.json`.
pub async fn train_fixture_head(dir: &Path) -> PathBuf {
    let pairs = fixture_pairs().await;
    let encoder = EncoderSpec::Hash(HASH_DIM).load().unwrap();
    let trained = train_on_pairs(&pairs, encoder.as_ref(), &train_config()).unwrap();
    let path = dir.join("head.json");
    trained.head.save(&path).unwrap();
    path
}

pub const STAGE_KEYS: [&str; 7] = [
    "NER_model",
    "wiki_search",
    "wiki_texts",
    "embedding_claim",
    "embedding_hypothesis",
    "classification",
    "total_time",
];

pub struct Server {
    pub base: String,
    stop: Option<oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    pub async fn start(pipeline: Pipeline) -> Server {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(serve_on(listener, Arc::new(pipeline), async {
            let _ = rx.await;
        }));
        Server {
            base,
            stop: Some(tx),
            handle,
        }
    }

    pub async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap().unwrap();
    }
}

/// Every call fails with a non-retryable backend error.
pub struct FailingBackend;

#[async_trait]
impl SearchBackend for FailingBackend {
    fn mode(&self) -> BackendMode {
        BackendMode::Live
    }

    async fn search(&self, _query: &str, _limit: usize) -> Result<Vec<String>, WikiError> {
        Err(WikiError::Backend("injected outage".into()))
    }

    async fn get_text(&self, _title: &str) -> Result<Option<String>, WikiError> {
        Err(WikiError::Backend("injected outage".into()))
    }
}

/// Checks the verdict JSON shape and the timing invariants.
pub fn assert_verdict_schema(v: &Value) {
    for key in ["claim", "label", "predictions", "candidates", "timings", "warnings"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
    let timings = v["timings"].as_object().unwrap();
    let mut keys: Vec<&str> = timings.keys().map(String::as_str).collect();
    keys.sort();
    let mut expected = STAGE_KEYS.to_vec();
    expected.sort();
    assert_eq!(keys, expected);
    let total = timings["total_time"].as_f64().unwrap();
    for k in STAGE_KEYS {
        let t = timings[k].as_f64().unwrap();
        assert!(t >= 0.0 && t <= total, "{k} = {t}, total {total}");
    }
    assert!(["SUPPORTS", "REFUTES", "NEI"].contains(&v["label"].as_str().unwrap()));
    for p in v["predictions"].as_array().unwrap() {
        let probs = &p["probs"];
        let sum: f64 = ["SUPPORTS", "REFUTES", "NEI"]
            .iter()
            .map(|k| probs[k].as_f64().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(p["evidence"]["ref"]["article_title"].is_string());
    }
}
