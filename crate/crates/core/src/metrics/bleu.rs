//! BLEU with clipped n-gram precision and closest-reference brevity penalty.

use std::collections::{BTreeMap, HashMap};
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::ngram::{extract_all, MAX_ORDER};
use crate::text_norm::TokenSequence;
use crate::{Error, Result};

/// Precision smoothing for the per-item (reward) variant.
pub const SMOOTHING_EPSILON: f64 = 1e-9;

/// Sufficient statistics for BLEU; they add up across items.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn new(candidate: &TokenSequence, refs: &[TokenSequence]) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::EmptyReferences(String::new()));
        }
        let cand_counts = extract_all(candidate);
        let ref_counts: Vec<_> = refs.iter().map(|r| extract_all(r)).collect();
        let mut stats = BleuStats {
            candidate_len: candidate.len() as u64,
            reference_len: closest_reference_len(candidate.len(), refs) as u64,
            ..Default::default()
        };
        for (order_idx, counts) in cand_counts.iter().enumerate() {
            let mut max_ref: HashMap<&str, u32> = HashMap::new();
            for r in &ref_counts {
                for (gram, count) in r[order_idx].iter() {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
            stats.totals[order_idx] = counts.total() as u64;
            stats.matches[order_idx] = counts
                .iter()
                .map(|(gram, count)| count.min(max_ref.get(gram).copied().unwrap_or(0)) as u64)
                .sum();
        }
        Ok(stats)
    }

    fn brevity_penalty(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        (1.0 - self.reference_len as f64 / self.candidate_len as f64)
            .exp()
            .min(1.0)
    }

    /// Unsmoothed BLEU-1..4; an order with no matches zeroes itself and
    /// every higher order.
    pub fn scores(&self) -> [f64; MAX_ORDER] {
        let bp = self.brevity_penalty();
        let mut out = [0.0; MAX_ORDER];
        let mut log_sum = 0.0;
        for k in 0..MAX_ORDER {
            if self.matches[k] == 0 {
                break;
            }
            log_sum += (self.matches[k] as f64 / self.totals[k] as f64).ln();
            out[k] = bp * (log_sum / (k + 1) as f64).exp();
        }
        out
    }

    /// BLEU-4 with every precision floored at `SMOOTHING_EPSILON` (orders
    /// with no n-grams count as `SMOOTHING_EPSILON`), so a single item with
    /// a missing order still yields a usable reward.
    pub fn smoothed_bleu4(&self) -> f64 {
        let bp = self.brevity_penalty();
        if bp == 0.0 {
            return 0.0;
        }
        let log_sum: f64 = (0..MAX_ORDER)
            .map(|k| {
                let precision = if self.totals[k] == 0 {
                    0.0
                } else {
                    self.matches[k] as f64 / self.totals[k] as f64
                };
                precision.max(SMOOTHING_EPSILON).ln()
            })
            .sum();
        bp * (log_sum / MAX_ORDER as f64).exp()
    }
}

impl AddAssign<&BleuStats> for BleuStats {
    fn add_assign(&mut self, rhs: &BleuStats) {
        for k in 0..MAX_ORDER {
            self.matches[k] += rhs.matches[k];
            self.totals[k] += rhs.totals[k];
        }
        self.candidate_len += rhs.candidate_len;
        self.reference_len += rhs.reference_len;
    }
}

/// Reference length closest to the candidate's, ties going to the shorter.
pub fn closest_reference_len(candidate_len: usize, refs: &[TokenSequence]) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(candidate_len), len))
        .unwrap_or(0)
}

/// Corpus-level BLEU-1..4.
pub fn bleu4(
    candidates: &BTreeMap<String, TokenSequence>,
    refs: &BTreeMap<String, Vec<TokenSequence>>,
) -> Result<[f64; MAX_ORDER]> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(id) = refs.keys().find(|id| !candidates.contains_key(*id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    let mut total = BleuStats::default();
    for (id, candidate) in candidates {
        let item_refs = refs.get(id).ok_or_else(|| Error::IdMismatch(id.clone()))?;
        let item = BleuStats::new(candidate, item_refs).map_err(|_| Error::EmptyReferences(id.clone()))?;
        total += &item;
    }
    Ok(total.scores())
}

pub fn sentence_bleu4_smoothed(candidate: &TokenSequence, refs: &[TokenSequence]) -> Result<f64> {
    Ok(BleuStats::new(candidate, refs)?.smoothed_bleu4())
}
