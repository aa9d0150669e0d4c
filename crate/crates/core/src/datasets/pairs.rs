use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fever::{FeverRawRecord, WikiDumpIndex};
use crate::evalkit::Profiler;
use crate::retrieval::LevelOne;
use crate::textproc::clean_hypothesis;
use crate::types::{Claim, EvidenceRef, LabeledPair, NliLabel};

/// Pairs plus the inputs that could not be turned into pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairBuild {
    pub pairs: Vec<LabeledPair>,
    /// `(record id, reason)` for every skipped reference or record.
    pub skipped: Vec<(u64, String)>,
}

fn hypothesis(raw: &str, clean: bool) -> String {
    if clean {
        clean_hypothesis(raw)
    } else {
        raw.to_string()
    }
}

/// One pair per evidence reference of every SUPPORTS/REFUTES record, the
/// hypothesis being the referenced dump sentence. A reference listed in
/// several groups yields several pairs.
pub fn build_pair_dataset(records: &[FeverRawRecord], dump: &WikiDumpIndex, clean: bool) -> PairBuild {
    let mut out = PairBuild::default();
    for rec in records.iter().filter(|r| r.label != NliLabel::Nei) {
        for r in rec.evidence_groups.iter().flatten() {
            match dump.sentence(r) {
                Some(raw) => out
                    .pairs
                    .push(LabeledPair::new(rec.claim.clone(), hypothesis(raw, clean), rec.label).with_ref(r.clone())),
                None => out
                    .skipped
                    .push((rec.id, format!("unresolved {}#{}", r.article_title, r.sentence_index))),
            }
        }
    }
    out
}

/// Negative sampling for NEI training pairs: for each NEI record, a
/// uniformly random article, then a uniformly random non-empty sentence of
/// it. Articles without sentences are never drawn.
pub fn sample_nei_train(records: &[FeverRawRecord], dump: &WikiDumpIndex, seed: u64, clean: bool) -> Vec<LabeledPair> {
    let eligible: Vec<(&str, Vec<usize>)> = dump
        .titles()
        .filter_map(|t| {
            let idx: Vec<usize> = dump
                .article(t)?
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.trim().is_empty())
                .map(|(i, _)| i)
                .collect();
            (!idx.is_empty()).then_some((t, idx))
        })
        .collect();
    if eligible.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .filter(|r| r.label == NliLabel::Nei)
        .map(|rec| {
            let (title, idx) = &eligible[rng.random_range(0..eligible.len())];
            let i = idx[rng.random_range(0..idx.len())];
            let r = EvidenceRef::new(*title, i);
            let raw = dump.sentence(&r).expect("eligible sentence");
            LabeledPair::new(rec.claim.clone(), hypothesis(raw, clean), NliLabel::Nei).with_ref(r)
        })
        .collect()
}

/// NEI test pairs drawn from what level one actually retrieves for each NEI
/// claim. Records are processed in order with one seeded stream; records
/// with nothing retrievable are skipped and reported.
pub async fn build_nei_test(records: &[FeverRawRecord], level_one: &LevelOne, seed: u64) -> PairBuild {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PairBuild::default();
    for rec in records.iter().filter(|r| r.label == NliLabel::Nei) {
        let claim = match Claim::new(rec.claim.clone()) {
            Ok(c) => c,
            Err(e) => {
                out.skipped.push((rec.id, e.to_string()));
                continue;
            }
        };
        let retrieved = match level_one.retrieve(&claim, &mut Profiler::new()).await {
            Ok(r) => r,
            Err(e) => {
                out.skipped.push((rec.id, e.to_string()));
                continue;
            }
        };
        let usable: Vec<_> = retrieved
            .sentences
            .into_iter()
            .filter(|s| !s.cleaned_text.is_empty())
            .collect();
        if usable.is_empty() {
            out.skipped.push((rec.id, "no retrievable sentences".into()));
            continue;
        }
        let pick = &usable[rng.random_range(0..usable.len())];
        out.pairs.push(
            LabeledPair::new(rec.claim.clone(), pick.cleaned_text.clone(), NliLabel::Nei)
                .with_ref(pick.evidence_ref.clone()),
        );
    }
    out
}
