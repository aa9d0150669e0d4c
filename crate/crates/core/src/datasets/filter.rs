use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{LabeledPair, NliLabel};

pub const DEFAULT_MIN_GROUP: usize = 10;

/// Keeps the first pair of every `(claim, hypothesis)` key, in input order.
/// Duplicates that disagree on the label are logged.
pub fn dedup_exact(pairs: Vec<LabeledPair>) -> Vec<LabeledPair> {
    let mut seen: HashMap<(String, String), NliLabel> = HashMap::with_capacity(pairs.len());
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let key = (p.claim_text.clone(), p.hypothesis_text.clone());
        match seen.get(&key) {
            Some(&first) => {
                if first != p.label {
                    log::warn!(
                        "duplicate pair with conflicting labels ({first} kept, {} dropped): {:?} / {:?}",
                        p.label,
                        p.claim_text,
                        p.hypothesis_text
                    );
                }
            }
            None => {
                seen.insert(key, p.label);
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceOptions {
    /// Groups smaller than this are left alone.
    pub min_count: usize,
    /// Whether NEI pairs count toward `min_count`.
    pub count_nei: bool,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            min_count: DEFAULT_MIN_GROUP,
            count_nei: true,
        }
    }
}

/// Per-hypothesis SUPPORTS/REFUTES balancing with NEI counted toward the
/// group size. See [`balance_hypotheses_with`].
pub fn balance_hypotheses(pairs: Vec<LabeledPair>, seed: u64, min_count: usize) -> Vec<LabeledPair> {
    balance_hypotheses_with(
        pairs,
        seed,
        BalanceOptions {
            min_count,
            count_nei: true,
        },
    )
}

/// For every hypothesis with at least `min_count` pairs, draws
/// `N_drop` uniformly from `0..=N_diff` (`N_diff = |#S - #R|`) and removes
/// that many uniformly chosen pairs of the majority class. Groups are
/// visited in lexicographic hypothesis order with one seeded stream, so the
/// result does not depend on input order. Survivors keep their order.
pub fn balance_hypotheses_with(pairs: Vec<LabeledPair>, seed: u64, opts: BalanceOptions) -> Vec<LabeledPair> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        groups.entry(p.hypothesis_text.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; pairs.len()];
    for members in groups.values() {
        let of = |l: NliLabel| {
            members
                .iter()
                .copied()
                .filter(|&i| pairs[i].label == l)
                .collect::<Vec<_>>()
        };
        let (s, r) = (of(NliLabel::Supports), of(NliLabel::Refutes));
        let size = if opts.count_nei {
            members.len()
        } else {
            s.len() + r.len()
        };
        if size < opts.min_count {
            continue;
        }
        let n_diff = s.len().abs_diff(r.len());
        if n_diff == 0 {
            continue;
        }
        let n_drop = rng.random_range(0..=n_diff);
        let mut major = if s.len() > r.len() { s } else { r };
        // sorted by content so the draw ignores input order
        major.sort_by(|&a, &b| {
            (&pairs[a].claim_text, &pairs[a].evidence_ref).cmp(&(&pairs[b].claim_text, &pairs[b].evidence_ref))
        });
        for k in sample(&mut rng, major.len(), n_drop) {
            dropped[major[k]] = true;
        }
    }
    pairs
        .into_iter()
        .zip(dropped)
        .filter_map(|(p, d)| (!d).then_some(p))
        .collect()
}

/// Cuts NEI down to a seeded uniform subset the size of SUPPORTS when NEI
/// is the larger class.
pub fn undersample_nei(pairs: Vec<LabeledPair>, seed: u64) -> Vec<LabeledPair> {
    let nei: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label == NliLabel::Nei).collect();
    let supports = pairs.iter().filter(|p| p.label == NliLabel::Supports).count();
    if nei.len() <= supports {
        return pairs;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; pairs.len()];
    nei.iter().for_each(|&i| keep[i] = false);
    for k in sample(&mut rng, nei.len(), supports) {
        keep[nei[k]] = true;
    }
    pairs
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_input: usize,
    pub n_after_dedup: usize,
    pub n_after_balance: usize,
    pub n_after_undersample: usize,
    pub fraction_dropped_dedup: f64,
    pub fraction_dropped_balance: f64,
    pub fraction_dropped_undersample: f64,
    pub fraction_dropped_total: f64,
    pub seed: u64,
}

impl FilterReport {
    fn new(n_input: usize, n_dedup: usize, n_balance: usize, n_under: usize, seed: u64) -> FilterReport {
        let frac = |before: usize, after: usize| {
            if n_input == 0 {
                0.0
            } else {
                (before - after) as f64 / n_input as f64
            }
        };
        FilterReport {
            n_input,
            n_after_dedup: n_dedup,
            n_after_balance: n_balance,
            n_after_undersample: n_under,
            fraction_dropped_dedup: frac(n_input, n_dedup),
            fraction_dropped_balance: frac(n_dedup, n_balance),
            fraction_dropped_undersample: frac(n_balance, n_under),
            fraction_dropped_total: frac(n_input, n_under),
            seed,
        }
    }
}

/// Deduplication, hypothesis balancing and NEI undersampling in sequence.
/// Balancing and undersampling draw from independent streams derived from
/// `seed`.
pub fn filter_pipeline(pairs: Vec<LabeledPair>, seed: u64) -> (Vec<LabeledPair>, FilterReport) {
    filter_pipeline_with(pairs, seed, BalanceOptions::default())
}

pub fn filter_pipeline_with(
    pairs: Vec<LabeledPair>,
    seed: u64,
    opts: BalanceOptions,
) -> (Vec<LabeledPair>, FilterReport) {
    let n_input = pairs.len();
    let pairs = dedup_exact(pairs);
    let n_dedup = pairs.len();
    let pairs = balance_hypotheses_with(pairs, seed, opts);
    let n_balance = pairs.len();
    let pairs = undersample_nei(pairs, seed.wrapping_add(1));
    let report = FilterReport::new(n_input, n_dedup, n_balance, pairs.len(), seed);
    (pairs, report)
}
