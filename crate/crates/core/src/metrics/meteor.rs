//! METEOR-lite: exact and stem matching stages, no synonym or paraphrase
//! tables. Scores are not comparable to the official METEOR scorer.

use std::borrow::Cow;

use super::stem::porter_stem;
use crate::text_norm::TokenSequence;
use crate::{Error, Result};

pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 3.0;
pub const GAMMA: f64 = 0.5;

/// Aligned `(candidate index, reference index)` pairs, ordered by candidate
/// index. Each stage walks the candidate left to right and links each
/// unmatched word to the first free reference word it matches.
pub fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut link: Vec<Option<usize>> = vec![None; candidate.len()];
    let mut used = vec![false; reference.len()];
    greedy_stage(&mut link, &mut used, |i, j| candidate[i] == reference[j]);

    if link.iter().any(Option::is_none) && used.iter().any(|u| !u) {
        let cand_stems: Vec<Cow<'_, str>> = candidate.iter().map(|w| porter_stem(w)).collect();
        let ref_stems: Vec<Cow<'_, str>> = reference.iter().map(|w| porter_stem(w)).collect();
        greedy_stage(&mut link, &mut used, |i, j| cand_stems[i] == ref_stems[j]);
    }

    link.iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|j| (i, j)))
        .collect()
}

fn greedy_stage(link: &mut [Option<usize>], used: &mut [bool], matches: impl Fn(usize, usize) -> bool) {
    for i in 0..link.len() {
        if link[i].is_some() {
            continue;
        }
        if let Some(j) = (0..used.len()).find(|&j| !used[j] && matches(i, j)) {
            used[j] = true;
            link[i] = Some(j);
        }
    }
}

/// Maximal runs adjacent in both candidate and reference.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    alignment
        .iter()
        .enumerate()
        .filter(|&(k, &(i, j))| k == 0 || alignment[k - 1] != (i.wrapping_sub(1), j.wrapping_sub(1)))
        .count()
}

fn score_against(candidate: &[String], reference: &[String]) -> f64 {
    let alignment = align(candidate, reference);
    let matched = alignment.len();
    if matched == 0 {
        return 0.0;
    }
    let m = matched as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let f_mean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
    let fragmentation = count_chunks(&alignment) as f64 / m;
    f_mean * (1.0 - GAMMA * fragmentation.powf(BETA))
}

pub fn meteor_lite(candidate: &TokenSequence, refs: &[TokenSequence]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::EmptyReferences(String::new()));
    }
    Ok(refs
        .iter()
        .map(|reference| score_against(candidate, reference))
        .fold(0.0, f64::max))
}
