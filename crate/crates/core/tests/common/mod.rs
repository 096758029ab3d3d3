#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;

use oracle::{Sent, TOY_VOCAB};

/// Toy corpus: candidate plus references per video.
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub ids: Vec<String>,
    pub candidates: Vec<Sent>,
    pub refs: Vec<Vec<Sent>>,
}

fn sentence<R: Rng>(rng: &mut R, min_len: usize, max_len: usize) -> Sent {
    let len = rng.random_range(min_len..=max_len);
    (0..len)
        .map(|_| TOY_VOCAB.choose(rng).unwrap().to_string())
        .collect()
}

/// ≤ 5 videos, ≤ 3 refs each, sentences of ≤ 7 words over a 10-word vocab.
pub fn toy_corpus<R: Rng>(rng: &mut R) -> ToyCorpus {
    let videos = rng.random_range(1..=5);
    let mut corpus = ToyCorpus {
        ids: Vec::new(),
        candidates: Vec::new(),
        refs: Vec::new(),
    };
    for v in 0..videos {
        corpus.ids.push(format!("vid{v}"));
        let n_refs = rng.random_range(1..=3);
        let refs: Vec<Sent> = (0..n_refs).map(|_| sentence(rng, 1, 7)).collect();
        // a third of candidates copy a reference so high-overlap cases show up
        let candidate = if rng.random_bool(0.33) {
            refs.choose(rng).unwrap().clone()
        } else {
            sentence(rng, 0, 7)
        };
        corpus.candidates.push(candidate);
        corpus.refs.push(refs);
    }
    corpus
}

impl ToyCorpus {
    pub fn candidate_map(&self) -> BTreeMap<String, String> {
        self.ids
            .iter()
            .zip(&self.candidates)
            .map(|(id, c)| (id.clone(), c.join(" ")))
            .collect()
    }

    pub fn ref_map(&self) -> BTreeMap<String, Vec<String>> {
        self.ids
            .iter()
            .zip(&self.refs)
            .map(|(id, refs)| (id.clone(), refs.iter().map(|r| r.join(" ")).collect()))
            .collect()
    }
}

/// Canonical annotation JSON with every video in `split`.
pub fn annotation_json(name: &str, split: &str, refs: &BTreeMap<String, Vec<String>>) -> String {
    let videos: Vec<_> = refs
        .keys()
        .map(|id| serde_json::json!({"id": id, "split": split}))
        .collect();
    let sentences: Vec<_> = refs
        .iter()
        .flat_map(|(id, caps)| caps.iter().map(move |c| serde_json::json!({"video_id": id, "caption": c})))
        .collect();
    serde_json::json!({"name": name, "videos": videos, "sentences": sentences}).to_string()
}

pub fn predictions_jsonl(candidates: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (id, caption) in candidates {
        writeln!(out, "{}", serde_json::json!({"video_id": id, "caption": caption})).unwrap();
    }
    out
}

/// MSR-VTT layout with the standard 6513/497/2990 split and 20 captions per
/// video.
pub fn msrvtt_fixture() -> String {
    let mut videos = Vec::new();
    let mut sentences = Vec::new();
    let mut index = 0usize;
    for (split, count) in [("train", 6513), ("validate", 497), ("test", 2990)] {
        for _ in 0..count {
            let vid = format!("video{index}");
            videos.push(serde_json::json!({
                "category": index % 20, "url": format!("https://example.invalid/{index}"),
                "video_id": vid, "start time": 0.0, "end time": 10.0, "split": split, "id": index,
            }));
            for s in 0..20 {
                sentences.push(serde_json::json!({
                    "caption": format!("clip {index} described in way {s}"),
                    "video_id": vid, "sen_id": index * 20 + s,
                }));
            }
            index += 1;
        }
    }
    serde_json::json!({"info": {"year": 2016}, "videos": videos, "sentences": sentences}).to_string()
}
