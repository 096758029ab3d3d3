//! Caption metrics and corpus evaluation.

pub mod bleu;
pub mod cider;
pub mod meteor;
pub mod rouge;
pub mod stem;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bleu::{bleu4, sentence_bleu4_smoothed, BleuStats};
pub use cider::{cider_d, PreparedRefs};
pub use meteor::meteor_lite;
pub use rouge::rouge_l;

use crate::ngram::CorpusStats;
use crate::text_norm::{tokenize, TokenSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub video_id: String,
    pub cider: f64,
    /// Smoothed sentence-level BLEU-4.
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor_lite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub corpus_cider: f64,
    /// Corpus-level BLEU-4, not the mean of the item values.
    pub corpus_bleu4: f64,
    pub corpus_rouge_l: f64,
    #[serde(rename = "corpus_meteor_lite")]
    pub corpus_meteor: f64,
    /// Corpus BLEU-1..4.
    pub bleu: [f64; 4],
    pub n_items: usize,
    pub items: Vec<ItemScore>,
    #[serde(skip)]
    pub bleu_stats: Vec<BleuStats>,
}

impl ScoreReport {
    /// Aggregates per-item scores given in id order.
    pub fn from_items(scored: Vec<(ItemScore, BleuStats)>) -> Self {
        let n = scored.len();
        let mean = |f: fn(&ItemScore) -> f64| {
            if n == 0 {
                0.0
            } else {
                scored.iter().map(|(item, _)| f(item)).sum::<f64>() / n as f64
            }
        };
        let corpus_cider = mean(|i| i.cider);
        let corpus_rouge_l = mean(|i| i.rouge_l);
        let corpus_meteor = mean(|i| i.meteor_lite);
        let mut total = BleuStats::default();
        for (_, stats) in &scored {
            total += stats;
        }
        let bleu = total.scores();
        let (items, bleu_stats) = scored.into_iter().unzip();
        ScoreReport {
            corpus_cider,
            corpus_bleu4: bleu[3],
            corpus_rouge_l,
            corpus_meteor,
            bleu,
            n_items: n,
            items,
            bleu_stats,
        }
    }
}

/// One tokenized item ready for scoring.
#[derive(Debug, Clone)]
pub struct ScoringItem {
    pub video_id: String,
    pub candidate: TokenSequence,
    pub refs: Vec<TokenSequence>,
}

pub fn score_item(item: &ScoringItem, stats: &CorpusStats) -> Result<(ItemScore, BleuStats)> {
    let with_id = |e: Error| match e {
        Error::EmptyReferences(_) => Error::EmptyReferences(item.video_id.clone()),
        other => other,
    };
    let cider = cider_d(&item.candidate, &item.refs, stats).map_err(with_id)?;
    let bleu_stats = BleuStats::new(&item.candidate, &item.refs).map_err(with_id)?;
    let score = ItemScore {
        video_id: item.video_id.clone(),
        cider,
        bleu4: bleu_stats.smoothed_bleu4(),
        rouge_l: rouge_l(&item.candidate, &item.refs).map_err(with_id)?,
        meteor_lite: meteor_lite(&item.candidate, &item.refs).map_err(with_id)?,
    };
    Ok((score, bleu_stats))
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))
}

/// Scores items on `workers` threads (0 = machine parallelism). Items are
/// sorted by id first, so the report does not depend on the worker count.
pub fn evaluate_items(mut items: Vec<ScoringItem>, stats: &CorpusStats, workers: usize) -> Result<ScoreReport> {
    if items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    items.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let scored = if workers == 1 {
        items.iter().map(|item| score_item(item, stats)).collect::<Result<Vec<_>>>()?
    } else {
        worker_pool(workers)?
            .install(|| items.par_iter().map(|item| score_item(item, stats)).collect::<Result<Vec<_>>>())?
    };
    Ok(ScoreReport::from_items(scored))
}

/// Tokenizes, builds corpus statistics from `refs` and scores every
/// candidate. `candidates` and `refs` must cover the same ids.
pub fn evaluate(
    candidates: &BTreeMap<String, String>,
    refs: &BTreeMap<String, Vec<String>>,
    workers: usize,
) -> Result<ScoreReport> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(id) = refs.keys().find(|id| !candidates.contains_key(*id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    let items = candidates
        .iter()
        .map(|(id, caption)| {
            let raw_refs = refs.get(id).ok_or_else(|| Error::IdMismatch(id.clone()))?;
            if raw_refs.is_empty() {
                return Err(Error::EmptyReferences(id.clone()));
            }
            Ok(ScoringItem {
                video_id: id.clone(),
                candidate: tokenize(caption),
                refs: raw_refs.iter().map(|r| tokenize(r)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = CorpusStats::from_references(items.iter().map(|item| item.refs.as_slice()))?;
    evaluate_items(items, &stats, workers)
}

/// Fraction of questions whose normalized prediction equals the normalized
/// answer.
pub fn vqa_top1(predictions: &BTreeMap<String, String>, answers: &BTreeMap<String, String>) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(id) = answers.keys().find(|id| !predictions.contains_key(*id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    let mut correct = 0usize;
    for (id, prediction) in predictions {
        let answer = answers.get(id).ok_or_else(|| Error::IdMismatch(id.clone()))?;
        if tokenize(prediction) == tokenize(answer) {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.len() as f64)
}
