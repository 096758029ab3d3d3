//! CIDEr-D: TF-IDF n-gram cosine consensus with count clipping and a
//! Gaussian length penalty, scaled to `[0, 10]`.

use crate::ngram::{extract_all, into_tfidf_vector, tfidf_vector, tfidf_with_total, CorpusStats, TfIdfVector, MAX_ORDER};
use crate::text_norm::TokenSequence;
use crate::{Error, Result};

pub const SIGMA: f64 = 6.0;
pub const SCALE: f64 = 10.0;

struct PreparedRef {
    len: usize,
    vectors: [TfIdfVector; MAX_ORDER],
    norms: [f64; MAX_ORDER],
}

/// TF-IDF vectors for one video's references, reusable across candidates.
pub struct PreparedRefs {
    refs: Vec<PreparedRef>,
}

impl PreparedRefs {
    pub fn new(refs: &[TokenSequence], stats: &CorpusStats) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::EmptyReferences(String::new()));
        }
        if stats.num_videos() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let refs = refs
            .iter()
            .map(|reference| {
                let vectors = extract_all(reference).map(|c| into_tfidf_vector(c, stats));
                let norms = vectors.each_ref().map(TfIdfVector::norm);
                PreparedRef {
                    len: reference.len(),
                    vectors,
                    norms,
                }
            })
            .collect();
        Ok(Self { refs })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    /// Largest count of `gram` in any single reference.
    fn max_count(&self, order_idx: usize, gram: &str) -> u32 {
        self.refs
            .iter()
            .map(|r| r.vectors[order_idx].count(gram))
            .max()
            .unwrap_or(0)
    }

    pub fn score(&self, candidate: &TokenSequence, stats: &CorpusStats) -> f64 {
        let counts = extract_all(candidate);
        let mut total = 0.0;
        for (order_idx, order_counts) in counts.iter().enumerate() {
            let full = tfidf_vector(order_counts, stats);
            let norm = full.norm();
            let clipped_counts = order_counts.clipped_by(|gram| self.max_count(order_idx, gram));
            let clipped = tfidf_with_total(clipped_counts, order_counts.total(), stats);
            let mut order_score = 0.0;
            for reference in &self.refs {
                let ref_norm = reference.norms[order_idx];
                if norm == 0.0 || ref_norm == 0.0 {
                    continue;
                }
                let sim = clipped.dot(&reference.vectors[order_idx]) / (norm * ref_norm);
                order_score += length_penalty(candidate.len(), reference.len) * sim;
            }
            total += SCALE * order_score / self.refs.len() as f64;
        }
        (total / MAX_ORDER as f64).clamp(0.0, SCALE)
    }
}

/// `exp(-(l_c - l_s)^2 / (2 sigma^2))`.
pub fn length_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    let delta = candidate_len as f64 - reference_len as f64;
    (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp()
}

pub fn cider_d(candidate: &TokenSequence, refs: &[TokenSequence], stats: &CorpusStats) -> Result<f64> {
    Ok(PreparedRefs::new(refs, stats)?.score(candidate, stats))
}
