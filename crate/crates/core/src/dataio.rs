//! Annotation, prediction and answer files.
//!
//! Canonical annotation schema:
//!
//! ```json
//! {"name": "toy",
//!  "videos": [{"id": "v1", "split": "train"}],
//!  "sentences": [{"video_id": "v1", "caption": "a man is talking"}]}
//! ```
//!
//! The `msrvtt` profile reads the public MSR-VTT layout (`videos[].video_id`
//! plus an `info` block) onto the same structure and checks the standard
//! split sizes. Sentences may carry a `lang` field; only English ones are
//! kept.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::ScoringItem;
use crate::text_norm::{tokenize, TokenSequence};
use crate::{Error, Result};

/// MSR-VTT standard partition sizes.
pub const MSRVTT_SPLITS: [(&str, usize); 3] = [("train", 6513), ("validate", 497), ("test", 2990)];
pub const MSRVTT_CAPTIONS_PER_VIDEO: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Msrvtt,
    #[default]
    Generic,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "msrvtt" => Ok(Profile::Msrvtt),
            "generic" => Ok(Profile::Generic),
            other => Err(format!("unknown profile `{other}`")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Msrvtt => "msrvtt",
            Profile::Generic => "generic",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaptionDataset {
    pub name: String,
    /// Split name to video ids, in file order.
    pub splits: BTreeMap<String, Vec<String>>,
    /// Video id to reference captions, in file order.
    pub references: BTreeMap<String, Vec<String>>,
}

impl CaptionDataset {
    pub fn split(&self, split: &str) -> Result<&[String]> {
        self.splits
            .get(split)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSplit(split.to_owned()))
    }

    pub fn num_videos(&self) -> usize {
        self.references.len()
    }

    /// Tokenized references of every video in `split`.
    pub fn tokenized_refs(&self, split: &str) -> Result<BTreeMap<String, Vec<TokenSequence>>> {
        Ok(self
            .split(split)?
            .iter()
            .map(|id| {
                let refs = self.references[id].iter().map(|r| tokenize(r)).collect();
                (id.clone(), refs)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut videos = Vec::new();
        for (split, ids) in &self.splits {
            for id in ids {
                videos.push(serde_json::json!({"id": id, "split": split}));
            }
        }
        let mut sentences = Vec::new();
        for ids in self.splits.values() {
            for id in ids {
                for caption in &self.references[id] {
                    sentences.push(serde_json::json!({"video_id": id, "caption": caption}));
                }
            }
        }
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "name": self.name,
            "videos": videos,
            "sentences": sentences,
        }))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Deserialize)]
struct CanonicalVideo {
    #[serde(default)]
    id: Option<Value>,
    #[serde(default)]
    video_id: Option<Value>,
    #[serde(default)]
    split: Option<String>,
}

impl CanonicalVideo {
    /// MSR-VTT keeps the string key in `video_id` and a numeric index in
    /// `id`; the canonical schema uses `id`.
    fn key(&self, profile: Profile) -> Option<&Value> {
        match profile {
            Profile::Msrvtt => self.video_id.as_ref().or(self.id.as_ref()),
            Profile::Generic => self.id.as_ref().or(self.video_id.as_ref()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CanonicalSentence {
    video_id: Value,
    caption: String,
    #[serde(default)]
    lang: Option<String>,
}

fn id_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Everything `validate-data` reports about an annotation file.
#[derive(Debug, Clone, Default)]
pub struct DatasetInspection {
    pub dataset: CaptionDataset,
    pub profile: Profile,
    /// Invariant violations; nonempty means the file is rejected.
    pub violations: Vec<String>,
    /// Deviations from the profile's expectations.
    pub warnings: Vec<String>,
    pub splits_disjoint: bool,
    /// Captions per video → number of videos.
    pub captions_histogram: BTreeMap<usize, usize>,
    /// Captions repeating an earlier caption of the same video after
    /// normalization.
    pub duplicate_captions: usize,
}

impl DatasetInspection {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const KNOWN_TOP_LEVEL: [&str; 4] = ["name", "videos", "sentences", "info"];

fn read_text(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match text.strip_prefix('\u{feff}') {
        Some(stripped) => stripped.to_owned(),
        None => text,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parses an annotation file and checks it without rejecting on invariant
/// violations; schema and parse failures are still errors.
pub fn inspect_annotations(path: &Path, profile: Profile, strict: bool) -> Result<DatasetInspection> {
    let text = read_text(path)?;
    inspect_annotations_str(&text, profile, strict)
        .map_err(|e| match e {
            Error::Json(json) => parse_error(path, json.line(), json.to_string()),
            Error::Parse { line, message, .. } => parse_error(path, line, message),
            other => other,
        })
}

pub fn inspect_annotations_str(text: &str, profile: Profile, strict: bool) -> Result<DatasetInspection> {
    let root: Value = serde_json::from_str(text)?;
    let object = root
        .as_object()
        .ok_or_else(|| Error::Parse { path: String::new(), line: 1, message: "top level must be an object".into() })?;
    if strict {
        if let Some(key) = object.keys().find(|k| !KNOWN_TOP_LEVEL.contains(&k.as_str())) {
            return Err(Error::Parse {
                path: String::new(),
                line: 1,
                message: format!("unknown top-level field `{key}`"),
            });
        }
    }
    let field = |key: &str| -> Result<Value> {
        object.get(key).cloned().ok_or_else(|| Error::Parse {
            path: String::new(),
            line: 1,
            message: format!("missing `{key}`"),
        })
    };
    let videos: Vec<CanonicalVideo> = serde_json::from_value(field("videos")?)?;
    let sentences: Vec<CanonicalSentence> = serde_json::from_value(field("sentences")?)?;
    let name = object
        .get("name")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .unwrap_or_else(|| profile.to_string());

    let mut inspection = DatasetInspection {
        profile,
        ..Default::default()
    };
    let mut dataset = CaptionDataset {
        name,
        ..Default::default()
    };
    let mut split_of: HashMap<String, String> = HashMap::new();
    for (idx, video) in videos.iter().enumerate() {
        let Some(id) = video.key(profile).and_then(id_string).filter(|id| !id.is_empty()) else {
            inspection.violations.push(format!("videos[{idx}]: id must be a nonempty string or number"));
            continue;
        };
        let split = video.split.clone().unwrap_or_else(|| "all".to_owned());
        if let Some(previous) = split_of.get(&id) {
            inspection
                .violations
                .push(format!("duplicate video id `{id}` (splits `{previous}` and `{split}`)"));
            continue;
        }
        split_of.insert(id.clone(), split.clone());
        dataset.splits.entry(split).or_default().push(id.clone());
        dataset.references.insert(id, Vec::new());
    }
    for ids in dataset.splits.values_mut() {
        ids.sort_unstable();
    }

    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for (idx, sentence) in sentences.iter().enumerate() {
        if let Some(lang) = &sentence.lang {
            if !matches!(lang.to_ascii_lowercase().as_str(), "en" | "eng" | "english") {
                continue;
            }
        }
        let Some(id) = id_string(&sentence.video_id) else {
            inspection.violations.push(format!("sentences[{idx}]: bad video_id"));
            continue;
        };
        match dataset.references.get_mut(&id) {
            Some(refs) => refs.push(sentence.caption.clone()),
            None => {
                unknown.insert(id);
            }
        }
    }
    for id in unknown {
        inspection.violations.push(format!("captions reference unknown video `{id}`"));
    }

    for (id, refs) in &dataset.references {
        if refs.is_empty() {
            inspection.violations.push(format!("video `{id}` has no captions"));
        }
        *inspection.captions_histogram.entry(refs.len()).or_insert(0) += 1;
        let mut seen = HashSet::new();
        inspection.duplicate_captions += refs.iter().filter(|r| !seen.insert(tokenize(r))).count();
    }

    let mut owners: HashMap<&str, &str> = HashMap::new();
    inspection.splits_disjoint = dataset
        .splits
        .iter()
        .all(|(split, ids)| ids.iter().all(|id| owners.insert(id, split).is_none()));
    if !inspection.splits_disjoint {
        inspection.violations.push("splits are not disjoint".into());
    }

    if profile == Profile::Msrvtt {
        for (split, expected) in MSRVTT_SPLITS {
            let actual = dataset
                .splits
                .get(split)
                .or_else(|| (split == "validate").then(|| dataset.splits.get("val")).flatten())
                .map_or(0, Vec::len);
            if actual != expected {
                inspection
                    .warnings
                    .push(format!("split `{split}` has {actual} videos, MSR-VTT standard is {expected}"));
            }
        }
        let off = dataset
            .references
            .values()
            .filter(|refs| refs.len() != MSRVTT_CAPTIONS_PER_VIDEO)
            .count();
        if off > 0 {
            inspection.warnings.push(format!(
                "{off} videos do not have {MSRVTT_CAPTIONS_PER_VIDEO} captions"
            ));
        }
    }

    inspection.dataset = dataset;
    Ok(inspection)
}

/// Loads and validates an annotation file. Profile expectations (split
/// sizes, captions per video) only produce warnings.
pub fn load_annotations(path: &Path, profile: Profile, strict: bool) -> Result<CaptionDataset> {
    let inspection = inspect_annotations(path, profile, strict)?;
    if !inspection.is_valid() {
        return Err(Error::InvalidDataset(inspection.violations));
    }
    for warning in &inspection.warnings {
        log::warn!("{}: {warning}", path.display());
    }
    Ok(inspection.dataset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub entries: BTreeMap<String, Prediction>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct PredictionRecord {
    video_id: Value,
    caption: String,
    #[serde(default)]
    samples: Option<Vec<String>>,
    #[serde(default)]
    logprobs: Option<Vec<f64>>,
}

const PREDICTION_FIELDS: [&str; 4] = ["video_id", "caption", "samples", "logprobs"];

/// Yields `(line number, content)` for nonblank lines, BOM stripped.
fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_start_matches('\u{feff}').trim()))
        .filter(|(_, line)| !line.is_empty())
}

fn check_fields(value: &Value, allowed: &[&str]) -> std::result::Result<(), String> {
    let Some(object) = value.as_object() else {
        return Err("record must be a JSON object".into());
    };
    match object.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(key) => Err(format!("unknown field `{key}`")),
        None => Ok(()),
    }
}

pub fn parse_predictions(text: &str, source: &Path, strict: bool) -> Result<PredictionSet> {
    let mut set = PredictionSet::default();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in jsonl_lines(text) {
        let value: Value = serde_json::from_str(line).map_err(|e| parse_error(source, line_no, e.to_string()))?;
        if strict {
            check_fields(&value, &PREDICTION_FIELDS).map_err(|m| parse_error(source, line_no, m))?;
        }
        let record: PredictionRecord =
            serde_json::from_value(value).map_err(|e| parse_error(source, line_no, e.to_string()))?;
        let id = id_string(&record.video_id)
            .filter(|id| !id.is_empty())
            .ok_or_else(|| parse_error(source, line_no, "video_id must be a nonempty string or number"))?;
        match (&record.samples, &record.logprobs) {
            (Some(s), Some(l)) if s.len() != l.len() => {
                return Err(parse_error(
                    source,
                    line_no,
                    format!("`{id}`: {} samples but {} logprobs", s.len(), l.len()),
                ));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(parse_error(source, line_no, format!("`{id}`: samples and logprobs must come together")));
            }
            _ => {}
        }
        if let Some(lps) = &record.logprobs {
            if lps.iter().any(|lp| !lp.is_finite() || *lp > 0.0) {
                return Err(parse_error(source, line_no, format!("`{id}`: logprobs must be finite and <= 0")));
            }
        }
        if let Some(first) = first_line.insert(id.clone(), line_no) {
            return Err(Error::DuplicateId {
                id,
                location: format!("{}:{line_no}, first seen on line {first}", source.display()),
            });
        }
        set.entries.insert(
            id,
            Prediction {
                caption: record.caption,
                samples: record.samples,
                logprobs: record.logprobs,
            },
        );
    }
    Ok(set)
}

/// Reads a line-delimited JSON prediction file:
/// `{"video_id", "caption"}` plus optional `"samples"` and `"logprobs"`.
pub fn load_predictions(path: &Path, strict: bool) -> Result<PredictionSet> {
    parse_predictions(&read_text(path)?, path, strict)
}

#[derive(Debug, Deserialize)]
struct AnswerRecord {
    #[serde(alias = "question_id")]
    id: Value,
    answer: String,
}

/// Reads a VQA answer (or prediction) file: one `{"id", "answer"}` per line.
pub fn load_answers(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_text(path)?;
    let mut answers = BTreeMap::new();
    for (line_no, line) in jsonl_lines(&text) {
        let record: AnswerRecord = serde_json::from_str(line).map_err(|e| parse_error(path, line_no, e.to_string()))?;
        let id = id_string(&record.id).ok_or_else(|| parse_error(path, line_no, "id must be a string or number"))?;
        if answers.insert(id.clone(), record.answer).is_some() {
            return Err(Error::DuplicateId {
                id,
                location: format!("{}:{line_no}", path.display()),
            });
        }
    }
    Ok(answers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub video_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub split: String,
    /// Pairs sorted by video id.
    pub pairs: Vec<AlignedPair>,
    /// Split videos without a prediction.
    pub missing: usize,
    /// Predictions for videos outside the split.
    pub extra: usize,
}

impl Alignment {
    pub fn scoring_items(&self) -> Vec<ScoringItem> {
        self.pairs
            .iter()
            .map(|pair| ScoringItem {
                video_id: pair.video_id.clone(),
                candidate: tokenize(&pair.candidate),
                refs: pair.references.iter().map(|r| tokenize(r)).collect(),
            })
            .collect()
    }
}

pub fn align(predictions: &PredictionSet, dataset: &CaptionDataset, split: &str) -> Result<Alignment> {
    let ids = dataset.split(split)?;
    let in_split: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let mut pairs: Vec<AlignedPair> = ids
        .iter()
        .filter_map(|id| {
            predictions.entries.get(id).map(|p| AlignedPair {
                video_id: id.clone(),
                candidate: p.caption.clone(),
                references: dataset.references[id].clone(),
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::ZeroOverlap(split.to_owned()));
    }
    pairs.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let extra = predictions
        .entries
        .keys()
        .filter(|id| !in_split.contains(id.as_str()))
        .count();
    Ok(Alignment {
        split: split.to_owned(),
        missing: in_split.len() - pairs.len(),
        pairs,
        extra,
    })
}
