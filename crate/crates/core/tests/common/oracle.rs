//! Direct-formula reference implementations of the caption metrics.
//!
//! Written independently of the engine: n-grams are token vectors in
//! ordered maps, LCS is found by enumerating candidate subsequences, and the
//! stemmer is a fixed lookup table covering the toy vocabulary.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub type Sent = Vec<String>;

pub const TOY_VOCAB: [&str; 10] = [
    "a", "man", "cat", "cats", "run", "runs", "running", "dog", "dogs", "the",
];

fn grams(s: &[String], n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut out = BTreeMap::new();
    if s.len() >= n {
        for i in 0..=s.len() - n {
            *out.entry(s[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    out
}

pub struct OracleDf {
    pub n_videos: usize,
    pub df: BTreeMap<Vec<String>, usize>,
}

pub fn doc_freq(corpus: &[Vec<Sent>]) -> OracleDf {
    let mut df = BTreeMap::new();
    for refs in corpus {
        let mut present = BTreeSet::new();
        for r in refs {
            for n in 1..=4 {
                for g in grams(r, n).into_keys() {
                    present.insert(g);
                }
            }
        }
        for g in present {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    OracleDf {
        n_videos: corpus.len(),
        df,
    }
}

fn idf(stats: &OracleDf, g: &Vec<String>) -> f64 {
    let df = *stats.df.get(g).unwrap_or(&1) as f64;
    (stats.n_videos as f64 / df).ln()
}

pub fn cider_d(cand: &[String], refs: &[Sent], stats: &OracleDf) -> f64 {
    let sigma = 6.0f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let c = grams(cand, n);
        let c_total: usize = c.values().sum();
        let mut per_ref = 0.0;
        for r in refs {
            let s = grams(r, n);
            let s_total: usize = s.values().sum();
            let mut num = 0.0;
            let mut c_sq = 0.0;
            let mut s_sq = 0.0;
            for (g, &count) in &c {
                let w = count as f64 / c_total as f64 * idf(stats, g);
                c_sq += w * w;
                let max_ref = refs
                    .iter()
                    .map(|rr| *grams(rr, n).get(g).unwrap_or(&0))
                    .max()
                    .unwrap();
                let clipped = count.min(max_ref);
                let wc = clipped as f64 / c_total as f64 * idf(stats, g);
                if let Some(&sc) = s.get(g) {
                    num += wc * (sc as f64 / s_total as f64 * idf(stats, g));
                }
            }
            for (g, &count) in &s {
                let w = count as f64 / s_total as f64 * idf(stats, g);
                s_sq += w * w;
            }
            let sim = if c_sq == 0.0 || s_sq == 0.0 {
                0.0
            } else {
                num / (c_sq.sqrt() * s_sq.sqrt())
            };
            let delta = cand.len() as f64 - r.len() as f64;
            per_ref += (-(delta * delta) / (2.0 * sigma * sigma)).exp() * sim;
        }
        total += 10.0 * per_ref / refs.len() as f64;
    }
    total / 4.0
}

fn closest_ref_len(c: usize, refs: &[Sent]) -> usize {
    let mut best = refs[0].len();
    for r in refs {
        let d = (r.len() as i64 - c as i64).abs();
        let bd = (best as i64 - c as i64).abs();
        if d < bd || (d == bd && r.len() < best) {
            best = r.len();
        }
    }
    best
}

fn clipped_matches(cand: &[String], refs: &[Sent], n: usize) -> (usize, usize) {
    let c = grams(cand, n);
    let mut matched = 0;
    for (g, &count) in &c {
        let max_ref = refs.iter().map(|r| *grams(r, n).get(g).unwrap_or(&0)).max().unwrap();
        matched += count.min(max_ref);
    }
    (matched, c.values().sum())
}

/// Corpus BLEU-1..4 over aligned (candidate, refs) items.
pub fn corpus_bleu(items: &[(Sent, Vec<Sent>)]) -> [f64; 4] {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let mut r_len = 0usize;
    let mut c_len = 0usize;
    for (cand, refs) in items {
        for n in 1..=4 {
            let (a, b) = clipped_matches(cand, refs, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
        c_len += cand.len();
        r_len += closest_ref_len(cand.len(), refs);
    }
    let bp = if c_len == 0 {
        0.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp().min(1.0)
    };
    let mut out = [0.0; 4];
    for k in 1..=4 {
        let mut log_sum = 0.0;
        let mut zero = false;
        for n in 1..=k {
            if m[n - 1] == 0 {
                zero = true;
            } else {
                log_sum += (m[n - 1] as f64 / t[n - 1] as f64).ln();
            }
        }
        out[k - 1] = if zero { 0.0 } else { bp * (log_sum / k as f64).exp() };
    }
    out
}

/// Sentence BLEU-4 with precisions floored at 1e-9.
pub fn sentence_bleu4_smoothed(cand: &[String], refs: &[Sent]) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let eps = 1e-9;
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (a, b) = clipped_matches(cand, refs, n);
        let p = if b == 0 { 0.0 } else { a as f64 / b as f64 };
        log_sum += if p < eps { eps.ln() } else { p.ln() };
    }
    let r = closest_ref_len(cand.len(), refs) as f64;
    let bp = (1.0 - r / cand.len() as f64).exp().min(1.0);
    bp * (log_sum / 4.0).exp()
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// LCS length by enumerating every subsequence of `a` (|a| ≤ 20).
pub fn lcs_brute(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 20);
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if picked.len() > best && is_subsequence(&picked, b) {
            best = picked.len();
        }
    }
    best
}

pub fn rouge_l(cand: &[String], refs: &[Sent]) -> f64 {
    let beta: f64 = 1.2;
    let mut best: f64 = 0.0;
    for r in refs {
        let l = lcs_brute(cand, r) as f64;
        if l == 0.0 {
            continue;
        }
        let p = l / cand.len() as f64;
        let rec = l / r.len() as f64;
        let f = (1.0 + beta * beta) * rec * p / (rec + beta * beta * p);
        best = best.max(f);
    }
    best
}

pub fn toy_stem(w: &str) -> &str {
    match w {
        "cats" => "cat",
        "runs" | "running" => "run",
        "dogs" => "dog",
        other => other,
    }
}

pub fn meteor_lite(cand: &[String], refs: &[Sent]) -> f64 {
    let mut best: f64 = 0.0;
    for r in refs {
        // ref position aligned to each candidate position
        let mut link: Vec<Option<usize>> = vec![None; cand.len()];
        let mut used = vec![false; r.len()];
        for stage in 0..2 {
            for i in 0..cand.len() {
                if link[i].is_some() {
                    continue;
                }
                for j in 0..r.len() {
                    let hit = if stage == 0 {
                        cand[i] == r[j]
                    } else {
                        toy_stem(&cand[i]) == toy_stem(&r[j])
                    };
                    if !used[j] && hit {
                        used[j] = true;
                        link[i] = Some(j);
                        break;
                    }
                }
            }
        }
        let m = link.iter().flatten().count();
        if m == 0 {
            continue;
        }
        let mut chunks = 0;
        let mut prev: Option<(usize, usize)> = None;
        for (i, l) in link.iter().enumerate() {
            if let Some(j) = *l {
                match prev {
                    Some((pi, pj)) if pi + 1 == i && pj + 1 == j => {}
                    _ => chunks += 1,
                }
                prev = Some((i, j));
            } else {
                prev = None;
            }
        }
        let p = m as f64 / cand.len() as f64;
        let rec = m as f64 / r.len() as f64;
        let f = p * rec / (0.9 * p + 0.1 * rec);
        let pen = 0.5 * (chunks as f64 / m as f64).powi(3);
        best = best.max(f * (1.0 - pen));
    }
    best
}
