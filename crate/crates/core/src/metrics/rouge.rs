use crate::text_norm::TokenSequence;
use crate::{Error, Result};

pub const BETA: f64 = 1.2;

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure (beta = 1.2), best over references.
pub fn rouge_l(candidate: &TokenSequence, refs: &[TokenSequence]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::EmptyReferences(String::new()));
    }
    let mut best: f64 = 0.0;
    for reference in refs {
        let lcs = lcs_len(candidate, reference) as f64;
        if lcs == 0.0 {
            continue;
        }
        let precision = lcs / candidate.len() as f64;
        let recall = lcs / reference.len() as f64;
        let f = (1.0 + BETA * BETA) * recall * precision / (recall + BETA * BETA * precision);
        best = best.max(f);
    }
    Ok(best)
}
