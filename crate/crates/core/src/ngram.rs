//! N-gram counting and the TF-IDF corpus statistics behind CIDEr-D.
//!
//! An n-gram is keyed by its tokens joined with single spaces. Tokens never
//! contain whitespace, so the key is unambiguous and its order is
//! `spaces + 1`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::text_norm::TokenSequence;
use crate::{Error, Result};

pub const MAX_ORDER: usize = 4;

const STATS_FORMAT_VERSION: u32 = 1;

/// Sliding-window n-gram counts of one order, in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts {
    order: usize,
    counts: IndexMap<String, u32>,
}

impl NgramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, gram: &str) -> u32 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(gram, &count)| (gram.as_str(), count))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of n-gram occurrences, `max(0, len - n + 1)` of the source.
    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    /// Counts clipped to `limit(gram)`, keeping entries that stay positive.
    pub(crate) fn clipped_by(&self, mut limit: impl FnMut(&str) -> u32) -> NgramCounts {
        let counts = self
            .counts
            .iter()
            .filter_map(|(gram, &count)| {
                let clipped = count.min(limit(gram));
                (clipped > 0).then(|| (gram.clone(), clipped))
            })
            .collect();
        NgramCounts {
            order: self.order,
            counts,
        }
    }
}

pub fn extract_ngrams(tokens: &[String], n: usize) -> Result<NgramCounts> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::InvalidOrder(n));
    }
    let mut counts = IndexMap::new();
    let mut key = String::new();
    for window in tokens.windows(n) {
        key.clear();
        for (i, token) in window.iter().enumerate() {
            if i > 0 {
                key.push(' ');
            }
            key.push_str(token);
        }
        match counts.get_mut(key.as_str()) {
            Some(count) => *count += 1,
            None => {
                counts.insert(key.clone(), 1);
            }
        }
    }
    Ok(NgramCounts { order: n, counts })
}

/// Counts for every order `1..=MAX_ORDER`, index 0 holding unigrams.
pub fn extract_all(tokens: &[String]) -> [NgramCounts; MAX_ORDER] {
    std::array::from_fn(|i| extract_ngrams(tokens, i + 1).expect("order in range"))
}

/// Document frequencies over a reference corpus, one document per video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    num_videos: usize,
    doc_freq: [HashMap<String, u32>; MAX_ORDER],
}

impl CorpusStats {
    pub fn new() -> Self {
        Self {
            num_videos: 0,
            doc_freq: Default::default(),
        }
    }

    /// Builds stats from the reference lists of each video.
    pub fn from_references<'a, I>(videos: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [TokenSequence]>,
    {
        let mut stats = Self::new();
        for refs in videos {
            stats.add_video(refs);
        }
        if stats.num_videos == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(stats)
    }

    /// Adds one video document. Each n-gram counts once per video however
    /// often it occurs in that video's references.
    pub fn add_video(&mut self, refs: &[TokenSequence]) {
        self.num_videos += 1;
        for (order_idx, table) in self.doc_freq.iter_mut().enumerate() {
            let mut seen: HashSet<String> = HashSet::new();
            for reference in refs {
                let counts = extract_ngrams(reference, order_idx + 1).expect("order in range");
                seen.extend(counts.counts.into_keys());
            }
            for gram in seen {
                *table.entry(gram).or_insert(0) += 1;
            }
        }
    }

    pub fn num_videos(&self) -> usize {
        self.num_videos
    }

    /// Document frequency of `gram` (an n-gram key of the given order), or 0.
    pub fn doc_freq(&self, order: usize, gram: &str) -> u32 {
        self.doc_freq
            .get(order.wrapping_sub(1))
            .and_then(|table| table.get(gram))
            .copied()
            .unwrap_or(0)
    }

    /// `ln(N / df)`, with unseen n-grams treated as `df = 1`.
    pub fn idf(&self, order: usize, gram: &str) -> f64 {
        let df = self.doc_freq(order, gram).max(1);
        (self.num_videos as f64 / df as f64).ln()
    }

    pub fn num_entries(&self) -> usize {
        self.doc_freq.iter().map(HashMap::len).sum()
    }

    pub fn to_file_format(&self) -> StatsFile {
        let mut entries: Vec<StatsEntry> = self
            .doc_freq
            .iter()
            .enumerate()
            .flat_map(|(i, table)| {
                table.iter().map(move |(gram, &df)| StatsEntry {
                    n: i + 1,
                    gram: gram.clone(),
                    df,
                })
            })
            .collect();
        entries.sort_by(|a, b| (a.n, &a.gram).cmp(&(b.n, &b.gram)));
        StatsFile {
            version: STATS_FORMAT_VERSION,
            n_videos: self.num_videos,
            entries,
        }
    }

    pub fn from_file_format(file: StatsFile) -> Result<Self> {
        if file.version != STATS_FORMAT_VERSION {
            return Err(Error::InvalidStats(format!(
                "unsupported version {}",
                file.version
            )));
        }
        if file.n_videos == 0 {
            return Err(Error::InvalidStats("n_videos must be positive".into()));
        }
        let mut stats = Self::new();
        stats.num_videos = file.n_videos;
        for entry in file.entries {
            if !(1..=MAX_ORDER).contains(&entry.n) {
                return Err(Error::InvalidStats(format!("order {} out of range", entry.n)));
            }
            if entry.gram.split(' ').count() != entry.n || entry.gram.split(' ').any(str::is_empty) {
                return Err(Error::InvalidStats(format!(
                    "gram `{}` is not a {}-gram",
                    entry.gram, entry.n
                )));
            }
            if entry.df == 0 || entry.df as usize > file.n_videos {
                return Err(Error::InvalidStats(format!(
                    "df {} of `{}` outside [1, {}]",
                    entry.df, entry.gram, file.n_videos
                )));
            }
            if stats.doc_freq[entry.n - 1].insert(entry.gram.clone(), entry.df).is_some() {
                return Err(Error::InvalidStats(format!("duplicate entry `{}`", entry.gram)));
            }
        }
        Ok(stats)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file_format())?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: StatsFile = serde_json::from_str(text.trim_start_matches('\u{feff}'))?;
        Self::from_file_format(file)
    }
}

impl Default for CorpusStats {
    fn default() -> Self {
        Self::new()
    }
}

pub fn build_corpus_stats(references: &BTreeMap<String, Vec<TokenSequence>>) -> Result<CorpusStats> {
    if let Some((id, _)) = references.iter().find(|(_, refs)| refs.is_empty()) {
        return Err(Error::EmptyReferences(id.clone()));
    }
    CorpusStats::from_references(references.values().map(Vec::as_slice))
}

/// On-disk form of [`CorpusStats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n_videos: usize,
    pub entries: Vec<StatsEntry>,
}

fn default_version() -> u32 {
    STATS_FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub n: usize,
    pub gram: String,
    pub df: u32,
}

/// Sparse TF-IDF vector of one n-gram order.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVector {
    counts: NgramCounts,
    /// Parallel to `counts`, by insertion index.
    weights: Vec<f64>,
}

impl TfIdfVector {
    fn build(counts: NgramCounts, total: u32, stats: &CorpusStats) -> Self {
        let weights = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts
                .iter()
                .map(|(gram, count)| {
                    let tf = count as f64 / total as f64;
                    tf * stats.idf(counts.order, gram)
                })
                .collect()
        };
        TfIdfVector { counts, weights }
    }

    pub fn weight(&self, gram: &str) -> f64 {
        self.counts
            .counts
            .get_index_of(gram)
            .map_or(0.0, |i| self.weights[i])
    }

    /// Raw count of `gram` in the source sequence.
    pub(crate) fn count(&self, gram: &str) -> u32 {
        self.counts.get(gram)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.counts.counts.keys().map(String::as_str).zip(self.weights.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TfIdfVector) -> f64 {
        self.iter().map(|(gram, w)| w * other.weight(gram)).sum()
    }
}

/// TF-IDF weights with term frequency normalized by the n-gram total of
/// the sequence.
pub fn tfidf_vector(counts: &NgramCounts, stats: &CorpusStats) -> TfIdfVector {
    TfIdfVector::build(counts.clone(), counts.total(), stats)
}

/// As [`tfidf_vector`], taking ownership of the counts.
pub(crate) fn into_tfidf_vector(counts: NgramCounts, stats: &CorpusStats) -> TfIdfVector {
    let total = counts.total();
    TfIdfVector::build(counts, total, stats)
}

/// As [`tfidf_vector`], normalizing by an explicit total. Used for clipped
/// candidate counts, which keep the unclipped sequence's total.
pub(crate) fn tfidf_with_total(counts: NgramCounts, total: u32, stats: &CorpusStats) -> TfIdfVector {
    TfIdfVector::build(counts, total, stats)
}
