//! Level one end to end: entities, query plan, search, article texts and
//! sentence segmentation for a single claim.

use std::sync::Arc;

use crate::evalkit::{Profiler, Stage};
use crate::query::{
    build_query_plan, extract_entities, EntityExtractor, ExtractedEntity, QueryError, QueryPlan, QueryStrategy,
};
use crate::textproc::segment_sentences;
use crate::types::{Claim, EvidenceRef, EvidenceSentence};
use crate::wikiclient::{ArticleCandidate, WikiClient, WikiError};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Wiki(#[from] WikiError),
}

/// Everything level one produced for a claim.
#[derive(Debug, Clone, Default)]
pub struct Retrieved {
    pub entities: Vec<ExtractedEntity>,
    pub plan: Option<QueryPlan>,
    pub candidates: Vec<ArticleCandidate>,
    /// Sentences of every fetched article, in candidate order.
    pub sentences: Vec<EvidenceSentence>,
    pub warnings: Vec<String>,
}

impl Retrieved {
    pub fn candidate_titles(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.title.clone()).collect()
    }
}

pub struct LevelOne {
    extractor: Arc<dyn EntityExtractor>,
    client: WikiClient,
    strategy: QueryStrategy,
    n: usize,
}

impl LevelOne {
    pub fn new(extractor: Arc<dyn EntityExtractor>, client: WikiClient, strategy: QueryStrategy, n: usize) -> LevelOne {
        LevelOne {
            extractor,
            client,
            strategy,
            n,
        }
    }

    pub fn client(&self) -> &WikiClient {
        &self.client
    }

    pub fn strategy(&self) -> QueryStrategy {
        self.strategy
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entities and the resulting query plan, without touching the backend.
    pub fn plan(
        &self,
        claim: &Claim,
        profiler: &mut Profiler,
    ) -> Result<(Vec<ExtractedEntity>, QueryPlan), RetrievalError> {
        let entities = if self.strategy == QueryStrategy::NoNer {
            Vec::new()
        } else {
            profiler.time(Stage::NerModel, || extract_entities(claim, self.extractor.as_ref()))?
        };
        let plan = build_query_plan(claim, &entities, self.strategy, self.n)?;
        Ok((entities, plan))
    }

    /// Runs the whole of level one. Fails only when entity extraction fails
    /// or every search query fails; partial failures become warnings.
    pub async fn retrieve(&self, claim: &Claim, profiler: &mut Profiler) -> Result<Retrieved, RetrievalError> {
        let (entities, plan) = self.plan(claim, profiler)?;
        let outcome = profiler
            .time_async(Stage::WikiSearch, self.client.execute_plan(&plan))
            .await?;
        let mut warnings = outcome.warnings;
        let titles: Vec<String> = outcome.candidates.iter().map(|c| c.title.clone()).collect();

        let fetched = profiler
            .time_async(Stage::WikiTexts, self.client.fetch_texts(&titles))
            .await;
        warnings.extend(fetched.warnings);
        let sentences = profiler.time(Stage::WikiTexts, || {
            fetched
                .contents
                .iter()
                .filter(|a| !a.missing)
                .flat_map(|a| {
                    segment_sentences(&a.plain_text)
                        .into_iter()
                        .enumerate()
                        .map(|(i, s)| EvidenceSentence::new(EvidenceRef::new(a.title.clone(), i), s))
                })
                .collect()
        });

        Ok(Retrieved {
            entities,
            plan: Some(plan),
            candidates: outcome.candidates,
            sentences,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::HeuristicExtractor;
    use crate::wikiclient::testing::ScriptedBackend;

    fn level_one(backend: ScriptedBackend) -> LevelOne {
        LevelOne::new(
            Arc::new(HeuristicExtractor),
            WikiClient::new(Arc::new(backend)),
            QueryStrategy::Separate,
            3,
        )
    }

    #[tokio::test]
    async fn retrieves_and_segments() {
        let mut b = ScriptedBackend::with(&[("Mogadishu", &["Mogadishu", "Somalia"])]);
        b.texts.insert(
            "Mogadishu".into(),
            "Mogadishu is a city. It is the capital of Somalia.".into(),
        );
        let l1 = level_one(b);
        let mut prof = Profiler::new();
        let r = l1
            .retrieve(&Claim::new("Mogadishu is in Asia.").unwrap(), &mut prof)
            .await
            .unwrap();
        assert_eq!(r.candidate_titles(), ["Mogadishu", "Somalia"]);
        assert_eq!(r.sentences.len(), 2);
        assert_eq!(r.sentences[1].evidence_ref, EvidenceRef::new("Mogadishu", 1));
        assert_eq!(r.sentences[1].raw_text, "It is the capital of Somalia.");
        let t = prof.timings();
        assert!(t.wiki_search > 0.0 && t.wiki_texts > 0.0);
    }

    #[tokio::test]
    async fn total_search_failure_is_an_error() {
        let mut b = ScriptedBackend::default();
        b.failing = vec!["Mogadishu".into(), "Asia".into()];
        let err = level_one(b)
            .retrieve(&Claim::new("Mogadishu is in Asia.").unwrap(), &mut Profiler::new())
            .await
            .unwrap_err();
        assert!(matches!(err, RetrievalError::Wiki(WikiError::Retrieval(_))));
    }

    #[tokio::test]
    async fn no_hits_is_empty_not_error() {
        let r = level_one(ScriptedBackend::default())
            .retrieve(&Claim::new("there is water.").unwrap(), &mut Profiler::new())
            .await
            .unwrap();
        assert!(r.candidates.is_empty() && r.sentences.is_empty());
        assert_eq!(r.plan.unwrap().queries, ["there is water."]);
    }
}
