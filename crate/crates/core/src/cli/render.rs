//! Report rendering and bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::metrics::{BleuStats, ScoreReport};
use crate::Result;

/// Leaderboard column labels, in display order.
pub const COLUMNS: [&str; 4] = ["C.", "M.", "R.", "B4."];

/// Header and value row for the four leaderboard columns, each value
/// multiplied by 100 and shown with one decimal.
pub fn metrics_row(cider: f64, meteor: f64, rouge_l: f64, bleu4: f64) -> (String, String) {
    let values = [cider, meteor, rouge_l, bleu4].map(|v| format!("{:.1}", v * 100.0));
    let widths: Vec<usize> = COLUMNS
        .iter()
        .zip(&values)
        .map(|(label, value)| label.len().max(value.len()))
        .collect();
    let header = COLUMNS
        .iter()
        .zip(&widths)
        .map(|(label, w)| format!("{label:>w$}"))
        .collect::<Vec<_>>()
        .join("  ");
    let row = values
        .iter()
        .zip(&widths)
        .map(|(value, w)| format!("{value:>w$}"))
        .collect::<Vec<_>>()
        .join("  ");
    (header, row)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bootstrap {
    pub samples: usize,
    pub seed: u64,
    pub confidence: f64,
    pub cider: Interval,
    pub meteor_lite: Interval,
    pub rouge_l: Interval,
    pub bleu4: Interval,
}

/// Linear-interpolated percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn interval(mut values: Vec<f64>, confidence: f64) -> Interval {
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Interval {
        low: percentile(&values, tail),
        high: percentile(&values, 1.0 - tail),
    }
}

/// Percentile bootstrap over items. CIDEr, ROUGE-L and METEOR-lite use the
/// resampled item means; BLEU-4 is recomputed from the resampled corpus.
pub fn bootstrap(report: &ScoreReport, samples: usize, seed: u64) -> Option<Bootstrap> {
    let n = report.items.len();
    if samples == 0 || n == 0 {
        return None;
    }
    let confidence = 0.95;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: [Vec<f64>; 4] = Default::default();
    for _ in 0..samples {
        let mut sums = [0.0; 3];
        let mut bleu = BleuStats::default();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let item = &report.items[i];
            sums[0] += item.cider;
            sums[1] += item.meteor_lite;
            sums[2] += item.rouge_l;
            bleu += &report.bleu_stats[i];
        }
        for (draw, sum) in draws.iter_mut().zip(sums) {
            draw.push(sum / n as f64);
        }
        draws[3].push(bleu.scores()[3]);
    }
    let [cider, meteor_lite, rouge_l, bleu4] = draws.map(|d| interval(d, confidence));
    Some(Bootstrap {
        samples,
        seed,
        confidence,
        cider,
        meteor_lite,
        rouge_l,
        bleu4,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub cider: f64,
    pub meteor_lite: f64,
    pub rouge_l: f64,
    pub bleu4: f64,
    pub bleu: [f64; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationOutput<'a> {
    pub dataset: &'a str,
    pub split: &'a str,
    pub n_items: usize,
    pub missing: usize,
    pub extra: usize,
    pub seed: u64,
    pub corpus: CorpusSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<Bootstrap>,
    pub items: &'a [crate::metrics::ItemScore],
}

impl<'a> EvaluationOutput<'a> {
    pub fn new(
        dataset: &'a str,
        split: &'a str,
        report: &'a ScoreReport,
        missing: usize,
        extra: usize,
        seed: u64,
        bootstrap: Option<Bootstrap>,
    ) -> Self {
        Self {
            dataset,
            split,
            n_items: report.n_items,
            missing,
            extra,
            seed,
            corpus: CorpusSummary {
                cider: report.corpus_cider,
                meteor_lite: report.corpus_meteor,
                rouge_l: report.corpus_rouge_l,
                bleu4: report.corpus_bleu4,
                bleu: report.bleu,
            },
            bootstrap,
            items: &report.items,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_table(&self) -> String {
        let c = &self.corpus;
        let (header, row) = metrics_row(c.cider, c.meteor_lite, c.rouge_l, c.bleu4);
        let mut out = format!(
            "dataset: {}  split: {}  items: {}  missing: {}  extra: {}\n{header}\n{row}\n",
            self.dataset, self.split, self.n_items, self.missing, self.extra
        );
        if let Some(b) = &self.bootstrap {
            let (_, low) = metrics_row(b.cider.low, b.meteor_lite.low, b.rouge_l.low, b.bleu4.low);
            let (_, high) = metrics_row(b.cider.high, b.meteor_lite.high, b.rouge_l.high, b.bleu4.high);
            out.push_str(&format!(
                "{low}  (bootstrap {:.1}% low, {} samples)\n{high}  (bootstrap {:.1}% high)\n",
                (1.0 - b.confidence) / 2.0 * 100.0,
                b.samples,
                (1.0 + b.confidence) / 2.0 * 100.0,
            ));
        }
        out.push_str(&format!("M. = METEOR-lite (exact + stem matching)  seed: {}\n", self.seed));
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| crate::Error::Internal(e.to_string());
        writer
            .write_record(["video_id", "cider", "meteor_lite", "rouge_l", "bleu4"])
            .map_err(csv_err)?;
        for item in self.items {
            writer
                .write_record([
                    item.video_id.clone(),
                    item.cider.to_string(),
                    item.meteor_lite.to_string(),
                    item.rouge_l.to_string(),
                    item.bleu4.to_string(),
                ])
                .map_err(csv_err)?;
        }
        let c = &self.corpus;
        writer
            .write_record([
                "__corpus__".to_string(),
                c.cider.to_string(),
                c.meteor_lite.to_string(),
                c.rouge_l.to_string(),
                c.bleu4.to_string(),
            ])
            .map_err(csv_err)?;
        let bytes = writer.into_inner().map_err(|e| crate::Error::Internal(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `6513` → `6,513`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
