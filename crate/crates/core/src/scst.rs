//! Self-critical sequence training rewards.
//!
//! Each sampled caption is scored against the video's references and
//! compared with the score of the greedy decode; the difference is the
//! advantage that weights the sample's log-probability in REINFORCE. The
//! engine stops at the scalar loss, gradients belong to the caller.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{BleuStats, PreparedRefs};
use crate::ngram::CorpusStats;
use crate::text_norm::{tokenize, TokenSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMetric {
    #[default]
    CiderD,
    Bleu4Smoothed,
}

impl fmt::Display for RewardMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMetric::CiderD => "cider-d",
            RewardMetric::Bleu4Smoothed => "bleu4-smoothed",
        })
    }
}

impl FromStr for RewardMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cider-d" | "cider" => Ok(RewardMetric::CiderD),
            "bleu4-smoothed" | "bleu4" => Ok(RewardMetric::Bleu4Smoothed),
            other => Err(format!("unknown reward metric `{other}`")),
        }
    }
}

/// Greedy decode plus `k` sampled captions for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub video_id: String,
    pub greedy_caption: String,
    pub sampled_captions: Vec<String>,
    pub token_logprob_sums: Vec<f64>,
}

impl SampleGroup {
    pub fn validate(&self) -> Result<()> {
        if self.sampled_captions.len() != self.token_logprob_sums.len() {
            return Err(Error::LengthMismatch {
                context: format!("samples/logprobs of `{}`", self.video_id),
                left: self.sampled_captions.len(),
                right: self.token_logprob_sums.len(),
            });
        }
        if self.token_logprob_sums.iter().any(|lp| !lp.is_finite() || *lp > 0.0) {
            return Err(Error::NonFinite(format!(
                "logprob sums of `{}` (must be finite and <= 0)",
                self.video_id
            )));
        }
        Ok(())
    }
}

/// Rewards and advantages for one group; also the stream response record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRewards {
    pub video_id: String,
    pub greedy_reward: f64,
    #[serde(rename = "rewards")]
    pub sampled_rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardBatch {
    pub groups: Vec<GroupRewards>,
}

/// Scores captions against one video's references with a fixed metric.
pub struct RewardScorer<'a> {
    stats: &'a CorpusStats,
    metric: RewardMetric,
}

impl<'a> RewardScorer<'a> {
    pub fn new(stats: &'a CorpusStats, metric: RewardMetric) -> Self {
        Self { stats, metric }
    }

    pub fn metric(&self) -> RewardMetric {
        self.metric
    }

    /// Rewards of the greedy caption and of each sample.
    pub fn rewards<S: AsRef<str>>(
        &self,
        greedy: &str,
        samples: &[S],
        refs: &[TokenSequence],
    ) -> Result<(f64, Vec<f64>)> {
        if refs.is_empty() {
            return Err(Error::EmptyReferences(String::new()));
        }
        match self.metric {
            RewardMetric::CiderD => {
                let prepared = PreparedRefs::new(refs, self.stats)?;
                let score = |caption: &str| prepared.score(&tokenize(caption), self.stats);
                Ok((score(greedy), samples.iter().map(|s| score(s.as_ref())).collect()))
            }
            RewardMetric::Bleu4Smoothed => {
                let score = |caption: &str| -> Result<f64> {
                    Ok(BleuStats::new(&tokenize(caption), refs)?.smoothed_bleu4())
                };
                let sampled = samples.iter().map(|s| score(s.as_ref())).collect::<Result<_>>()?;
                Ok((score(greedy)?, sampled))
            }
        }
    }

    pub fn group_rewards<S: AsRef<str>>(
        &self,
        video_id: &str,
        greedy: &str,
        samples: &[S],
        refs: &[TokenSequence],
    ) -> Result<GroupRewards> {
        let (greedy_reward, sampled_rewards) = self.rewards(greedy, samples, refs).map_err(|e| match e {
            Error::EmptyReferences(_) => Error::EmptyReferences(video_id.to_owned()),
            other => other,
        })?;
        Ok(GroupRewards {
            video_id: video_id.to_owned(),
            advantages: advantages(greedy_reward, &sampled_rewards),
            greedy_reward,
            sampled_rewards,
        })
    }
}

pub fn compute_rewards(
    group: &SampleGroup,
    refs: &[TokenSequence],
    stats: &CorpusStats,
    metric: RewardMetric,
) -> Result<(f64, Vec<f64>)> {
    group.validate()?;
    RewardScorer::new(stats, metric).rewards(&group.greedy_caption, &group.sampled_captions, refs)
}

/// `r_i - r_greedy` for every sample.
pub fn advantages(greedy_reward: f64, sampled_rewards: &[f64]) -> Vec<f64> {
    sampled_rewards.iter().map(|r| r - greedy_reward).collect()
}

/// `-(1/M) Σ a_i · lp_i` over every sample of every group.
pub fn scst_loss<'a, I>(groups: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut weighted = 0.0;
    let mut samples = 0usize;
    for (group_idx, (advs, logprobs)) in groups.into_iter().enumerate() {
        if advs.len() != logprobs.len() {
            return Err(Error::LengthMismatch {
                context: format!("advantages/logprobs of group {group_idx}"),
                left: advs.len(),
                right: logprobs.len(),
            });
        }
        for (a, lp) in advs.iter().zip(logprobs) {
            if !a.is_finite() || !lp.is_finite() {
                return Err(Error::NonFinite(format!("group {group_idx}")));
            }
            weighted += a * lp;
        }
        samples += advs.len();
    }
    if samples == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(-weighted / samples as f64)
}

impl RewardBatch {
    /// Loss of this batch given each group's logprob sums, in group order.
    pub fn loss(&self, logprob_sums: &[Vec<f64>]) -> Result<f64> {
        if logprob_sums.len() != self.groups.len() {
            return Err(Error::LengthMismatch {
                context: "groups/logprob lists".into(),
                left: self.groups.len(),
                right: logprob_sums.len(),
            });
        }
        scst_loss(
            self.groups
                .iter()
                .zip(logprob_sums)
                .map(|(g, lp)| (g.advantages.as_slice(), lp.as_slice())),
        )
    }
}

/// One line of the reward stream protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub video_id: String,
    pub greedy: String,
    pub samples: Vec<String>,
    #[serde(default)]
    pub refs: Vec<String>,
}

/// Per-record failure, written in place of a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamError {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StreamSummary {
    pub served: usize,
    pub failed: usize,
    pub samples: usize,
    pub reward_sum: f64,
}

impl StreamSummary {
    pub fn mean_reward(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.reward_sum / self.samples as f64
        }
    }
}

/// Serves reward requests against preloaded corpus statistics.
///
/// Requests that omit `refs` fall back to the references registered with
/// [`RewardStream::with_fallback_refs`], looked up by `video_id`.
pub struct RewardStream<'a> {
    scorer: RewardScorer<'a>,
    fallback: Option<&'a BTreeMap<String, Vec<TokenSequence>>>,
}

impl<'a> RewardStream<'a> {
    pub fn new(stats: &'a CorpusStats, metric: RewardMetric) -> Self {
        Self {
            scorer: RewardScorer::new(stats, metric),
            fallback: None,
        }
    }

    pub fn with_fallback_refs(mut self, refs: &'a BTreeMap<String, Vec<TokenSequence>>) -> Self {
        self.fallback = Some(refs);
        self
    }

    pub fn handle(&self, request: &RewardRequest) -> Result<GroupRewards> {
        let refs: Vec<TokenSequence> = if request.refs.is_empty() {
            self.fallback
                .and_then(|table| table.get(&request.video_id))
                .cloned()
                .unwrap_or_default()
        } else {
            request.refs.iter().map(|r| tokenize(r)).collect()
        };
        self.scorer
            .group_rewards(&request.video_id, &request.greedy, &request.samples, &refs)
    }

    /// Parses and answers one protocol line (1-based `line_no`).
    pub fn handle_line(&self, line_no: usize, line: &str) -> std::result::Result<GroupRewards, StreamError> {
        let request: RewardRequest = serde_json::from_str(line).map_err(|e| StreamError {
            line: line_no,
            video_id: serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("video_id").and_then(|id| id.as_str()).map(str::to_owned)),
            error: format!("malformed request: {e}"),
        })?;
        self.handle(&request).map_err(|e| StreamError {
            line: line_no,
            video_id: Some(request.video_id.clone()),
            error: e.to_string(),
        })
    }

    /// Answers requests in arrival order.
    pub fn responses<'s, I>(&'s self, requests: I) -> impl Iterator<Item = Result<GroupRewards>> + 's
    where
        I: IntoIterator<Item = RewardRequest>,
        I::IntoIter: 's,
    {
        requests.into_iter().map(move |request| self.handle(&request))
    }

    /// Line-delimited JSON loop: one response (or error record) per
    /// nonblank input line, flushed as soon as it is written.
    pub fn serve<R: BufRead, W: Write>(&self, reader: R, mut writer: W) -> io::Result<StreamSummary> {
        let mut summary = StreamSummary::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_start_matches('\u{feff}').trim();
            if line.is_empty() {
                continue;
            }
            let encoded = match self.handle_line(idx + 1, line) {
                Ok(response) => {
                    summary.served += 1;
                    summary.samples += response.sampled_rewards.len();
                    summary.reward_sum += response.sampled_rewards.iter().sum::<f64>();
                    serde_json::to_string(&response)
                }
                Err(error) => {
                    summary.failed += 1;
                    log::warn!("line {}: {}", error.line, error.error);
                    serde_json::to_string(&error)
                }
            }
            .map_err(io::Error::other)?;
            writer.write_all(encoded.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        Ok(summary)
    }
}

pub fn reward_stream<'a, I>(
    requests: I,
    stats: &'a CorpusStats,
    metric: RewardMetric,
) -> impl Iterator<Item = Result<GroupRewards>> + 'a
where
    I: IntoIterator<Item = RewardRequest>,
    I::IntoIter: 'a,
{
    let stream = RewardStream::new(stats, metric);
    requests.into_iter().map(move |request| stream.handle(&request))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint() -> (Vec<TokenSequence>, CorpusStats) {
        let refs = vec![tokenize("a man plays a guitar"), tokenize("the dog runs on grass")];
        let stats = CorpusStats::from_references(refs.chunks(1)).unwrap();
        (refs, stats)
    }

    fn group(greedy: &str, samples: &[&str], lps: &[f64]) -> SampleGroup {
        SampleGroup {
            video_id: "v0".into(),
            greedy_caption: greedy.into(),
            sampled_captions: samples.iter().map(|s| s.to_string()).collect(),
            token_logprob_sums: lps.to_vec(),
        }
    }

    #[test]
    fn sample_equal_to_greedy_gets_equal_reward() {
        let (refs, stats) = disjoint();
        let g = group("a man plays", &["a man plays"], &[-1.0]);
        for metric in [RewardMetric::CiderD, RewardMetric::Bleu4Smoothed] {
            let (greedy, sampled) = compute_rewards(&g, &refs[..1], &stats, metric).unwrap();
            assert_eq!(greedy, sampled[0]);
        }
    }

    #[test]
    fn reference_sample_scores_ten() {
        let (refs, stats) = disjoint();
        let g = group("a dog", &["a man plays a guitar"], &[-3.0]);
        let (_, sampled) = compute_rewards(&g, &refs[..1], &stats, RewardMetric::CiderD).unwrap();
        assert!((sampled[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn group_invariants_checked() {
        let (refs, stats) = disjoint();
        let g = group("a", &["a", "b"], &[-1.0]);
        assert!(matches!(
            compute_rewards(&g, &refs, &stats, RewardMetric::CiderD),
            Err(Error::LengthMismatch { .. })
        ));
        let g = group("a", &["a"], &[0.5]);
        assert!(compute_rewards(&g, &refs, &stats, RewardMetric::CiderD).is_err());
        let g = group("a", &["a"], &[-0.5]);
        assert!(compute_rewards(&g, &[], &stats, RewardMetric::CiderD).is_err());
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(advantages(0.6, &[0.6]), vec![0.0]);
        let a = advantages(0.6, &[0.8, 0.4]);
        assert!((a[0] - 0.2).abs() < 1e-12 && (a[1] + 0.2).abs() < 1e-12);
        assert_eq!(advantages(10.0, &[10.0, 0.0]), vec![0.0, -10.0]);
    }

    #[test]
    fn loss_examples() {
        let zeros = [0.0, 0.0];
        let lps = [-1.0, -4.0];
        assert_eq!(scst_loss([(&zeros[..], &lps[..])]).unwrap(), 0.0);
        assert_eq!(scst_loss([(&[0.5][..], &[-2.0][..])]).unwrap(), 1.0);
        assert_eq!(scst_loss([(&[0.2, -0.2][..], &[-1.0, -1.0][..])]).unwrap(), 0.0);
        assert!(matches!(scst_loss([(&[0.2][..], &[][..])]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(scst_loss(std::iter::empty()), Err(Error::EmptyBatch)));
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!("cider-d".parse::<RewardMetric>().unwrap(), RewardMetric::CiderD);
        assert_eq!("bleu4_smoothed".parse::<RewardMetric>().unwrap(), RewardMetric::Bleu4Smoothed);
        assert!("spice".parse::<RewardMetric>().is_err());
    }

    #[test]
    fn stream_reports_bad_lines_and_continues() {
        let (_, stats) = disjoint();
        let stream = RewardStream::new(&stats, RewardMetric::CiderD);
        let input = concat!(
            "{\"video_id\":\"v0\",\"greedy\":\"a man\",\"samples\":[\"a man plays a guitar\"],\"refs\":[\"a man plays a guitar\"]}\n",
            "not json\n",
            "\n",
            "{\"video_id\":\"v9\",\"greedy\":\"x\",\"samples\":[\"y\"]}\n",
        );
        let mut out = Vec::new();
        let summary = stream.serve(input.as_bytes(), &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines.len(), 3);
        let first: GroupRewards = serde_json::from_str(lines[0]).unwrap();
        assert!((first.sampled_rewards[0] - 10.0).abs() < 1e-12);
        let second: StreamError = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(second.line, 2);
        let third: StreamError = serde_json::from_str(lines[2]).unwrap();
        assert_eq!((third.line, third.video_id.as_deref()), (4, Some("v9")));
        assert_eq!((summary.served, summary.failed), (1, 2));
    }

    #[test]
    fn stream_falls_back_to_registered_refs() {
        let (refs, stats) = disjoint();
        let table: BTreeMap<String, Vec<TokenSequence>> = [("v0".to_string(), refs[..1].to_vec())].into();
        let stream = RewardStream::new(&stats, RewardMetric::CiderD).with_fallback_refs(&table);
        let request = RewardRequest {
            video_id: "v0".into(),
            greedy: "a man plays a guitar".into(),
            samples: vec!["a man".into()],
            refs: vec![],
        };
        let response = stream.handle(&request).unwrap();
        assert!((response.greedy_reward - 10.0).abs() < 1e-12);
        assert!(response.advantages[0] < 0.0);
    }

    #[test]
    fn empty_stream_gives_empty_output() {
        let (_, stats) = disjoint();
        assert_eq!(reward_stream(Vec::new(), &stats, RewardMetric::CiderD).count(), 0);
        let mut out = Vec::new();
        let summary = RewardStream::new(&stats, RewardMetric::CiderD).serve(&b""[..], &mut out).unwrap();
        assert!(out.is_empty());
        assert_eq!(summary.served, 0);
        assert_eq!(summary.mean_reward(), 0.0);
    }
}
