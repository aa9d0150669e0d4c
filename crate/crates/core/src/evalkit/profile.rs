use std::fmt;
use std::future::Future;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::types::StageTimings;

/// The logical parts of one claim check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "NER_model")]
    NerModel,
    #[serde(rename = "wiki_search")]
    WikiSearch,
    #[serde(rename = "wiki_texts")]
    WikiTexts,
    #[serde(rename = "embedding_claim")]
    EmbeddingClaim,
    #[serde(rename = "embedding_hypothesis")]
    EmbeddingHypothesis,
    #[serde(rename = "classification")]
    Classification,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::NerModel,
        Stage::WikiSearch,
        Stage::WikiTexts,
        Stage::EmbeddingClaim,
        Stage::EmbeddingHypothesis,
        Stage::Classification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::NerModel => "NER_model",
            Stage::WikiSearch => "wiki_search",
            Stage::WikiTexts => "wiki_texts",
            Stage::EmbeddingClaim => "embedding_claim",
            Stage::EmbeddingHypothesis => "embedding_hypothesis",
            Stage::Classification => "classification",
        }
    }

    fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).unwrap()
    }

    fn of(t: &StageTimings, s: Stage) -> f64 {
        match s {
            Stage::NerModel => t.ner_model,
            Stage::WikiSearch => t.wiki_search,
            Stage::WikiTexts => t.wiki_texts,
            Stage::EmbeddingClaim => t.embedding_claim,
            Stage::EmbeddingHypothesis => t.embedding_hypothesis,
            Stage::Classification => t.classification,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pipeline stage {0:?}")]
pub struct UnknownStage(pub String);

impl FromStr for Stage {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownStage(s.to_string()))
    }
}

/// Wall-clock stage timer for a single request. Repeated measurements of the
/// same stage accumulate.
#[derive(Debug, Clone)]
pub struct Profiler {
    started: Instant,
    stages: [Duration; 6],
}

impl Default for Profiler {
    fn default() -> Self {
        Self::new()
    }
}

impl Profiler {
    pub fn new() -> Profiler {
        Profiler {
            started: Instant::now(),
            stages: [Duration::ZERO; 6],
        }
    }

    pub fn record(&mut self, stage: Stage, elapsed: Duration) {
        self.stages[stage.index()] += elapsed;
    }

    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.record(stage, t0.elapsed());
        out
    }

    pub async fn time_async<T>(&mut self, stage: Stage, fut: impl Future<Output = T>) -> T {
        let t0 = Instant::now();
        let out = fut.await;
        self.record(stage, t0.elapsed());
        out
    }

    /// Times `f` under the stage called `name`, returning its result and
    /// the measured duration.
    pub fn profile_stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> Result<(T, Duration), UnknownStage> {
        let stage: Stage = name.parse()?;
        let t0 = Instant::now();
        let out = f();
        let elapsed = t0.elapsed();
        self.record(stage, elapsed);
        Ok((out, elapsed))
    }

    pub fn elapsed(&self, stage: Stage) -> Duration {
        self.stages[stage.index()]
    }

    /// Snapshot of all stages. `total_time` is the wall clock since the
    /// profiler was created, never less than the sum of the stages.
    pub fn timings(&self) -> StageTimings {
        let s = |st: Stage| self.stages[st.index()].as_secs_f64();
        let sum: f64 = Stage::ALL.iter().map(|&st| s(st)).sum();
        StageTimings {
            ner_model: s(Stage::NerModel),
            wiki_search: s(Stage::WikiSearch),
            wiki_texts: s(Stage::WikiTexts),
            embedding_claim: s(Stage::EmbeddingClaim),
            embedding_hypothesis: s(Stage::EmbeddingHypothesis),
            classification: s(Stage::Classification),
            total_time: self.started.elapsed().as_secs_f64().max(sum),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl StageSummary {
    fn of(values: &[f64]) -> StageSummary {
        if values.is_empty() {
            return StageSummary { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        StageSummary { mean, std: var.sqrt() }
    }
}

impl fmt::Display for StageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Mean and spread of stage timings across many runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    runs: Vec<StageTimings>,
}

impl LatencyReport {
    pub fn new() -> LatencyReport {
        Self::default()
    }

    pub fn add(&mut self, timings: StageTimings) {
        self.runs.push(timings);
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn stage(&self, stage: Stage) -> StageSummary {
        let values: Vec<f64> = self.runs.iter().map(|t| Stage::of(t, stage)).collect();
        StageSummary::of(&values)
    }

    pub fn total(&self) -> StageSummary {
        let values: Vec<f64> = self.runs.iter().map(|t| t.total_time).collect();
        StageSummary::of(&values)
    }

    /// `{"NER_model": {"mean":..,"std":..}, ..., "total_time": {..}, "runs": n}`
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for st in Stage::ALL {
            map.insert(st.name().into(), serde_json::to_value(self.stage(st)).unwrap());
        }
        map.insert("total_time".into(), serde_json::to_value(self.total()).unwrap());
        map.insert("runs".into(), self.runs.len().into());
        serde_json::Value::Object(map)
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{:>16}", "system parts", "seconds")?;
        for st in Stage::ALL {
            writeln!(f, "{:<22}{:>16}", st.name(), self.stage(st).to_string())?;
        }
        write!(f, "{:<22}{:>16}", "total_time", self.total().to_string())
    }
}
