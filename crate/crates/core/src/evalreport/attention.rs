use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::netmodel::RealtimeModel;
use crate::textprep::{encode_spans, Vocab};
use crate::training::PreparedLog;

/// Attention over one report, per head.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionExport {
    pub outage_id: u64,
    /// 1-based position of the report within its outage.
    pub report_index: usize,
    pub tokens: Vec<String>,
    /// Byte offsets of each token in the raw report text.
    pub offsets: Vec<usize>,
    /// `raw[head][token]`
    pub raw: Vec<Vec<f64>>,
    pub smoothed: Vec<Vec<f64>>,
}

/// One line of the line-delimited attention export.
#[derive(Clone, Debug, Serialize)]
pub struct AttentionRecord<'a> {
    pub outage_id: u64,
    pub report: usize,
    pub position: usize,
    pub token: &'a str,
    pub offset: usize,
    pub head: usize,
    pub raw: f64,
    pub smoothed: f64,
}

/// Centered moving average of width 3. Each end is padded by repeating its
/// edge value, which keeps the total mass unchanged.
pub fn smooth(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { w[0] } else { w[i - 1] };
            let right = if i + 1 == n { w[n - 1] } else { w[i + 1] };
            (left + w[i] + right) / 3.0
        })
        .collect()
}

/// Run the frozen model over one outage and capture attention for every report.
pub fn attention_export(
    model: &RealtimeModel,
    outage_id: u64,
    features: &[f64],
    logs: &[PreparedLog],
    vocab: &Vocab,
) -> Result<Vec<AttentionExport>> {
    let seqs: Vec<_> = logs.iter().map(|l| encode_spans(&l.tokens, vocab)).collect();
    let steps: Vec<_> = logs
        .iter()
        .zip(&seqs)
        .map(|(l, s)| crate::netmodel::LogStep {
            elapsed_hours: l.elapsed_hours,
            tokens: &s.ids,
        })
        .collect();
    let preds = model.predict(features, &steps)?;
    Ok(preds
        .into_iter()
        .zip(logs.iter().zip(&seqs))
        .enumerate()
        .map(|(i, ((_, raw), (log, seq)))| AttentionExport {
            outage_id,
            report_index: i + 1,
            tokens: log.tokens.iter().map(|t| t.text.clone()).collect(),
            offsets: seq.offsets.clone(),
            smoothed: raw.iter().map(|h| smooth(h)).collect(),
            raw,
        })
        .collect())
}

impl AttentionExport {
    pub fn records(&self) -> impl Iterator<Item = AttentionRecord<'_>> {
        self.raw.iter().enumerate().flat_map(move |(head, weights)| {
            weights.iter().enumerate().map(move |(pos, &raw)| AttentionRecord {
                outage_id: self.outage_id,
                report: self.report_index,
                position: pos,
                token: &self.tokens[pos],
                offset: self.offsets[pos],
                head: head + 1,
                raw,
                smoothed: self.smoothed[head][pos],
            })
        })
    }

    /// Index of the highest raw weight for `head`; the first wins on ties.
    pub fn argmax(&self, head: usize) -> usize {
        let w = &self.raw[head];
        let mut best = 0;
        for (i, &v) in w.iter().enumerate() {
            if v > w[best] {
                best = i;
            }
        }
        best
    }
}

pub fn attention_jsonl(exports: &[AttentionExport]) -> Result<String> {
    let mut out = String::new();
    for e in exports {
        for r in e.records() {
            out.push_str(&serde_json::to_string(&r).map_err(|e| crate::error::Error::data(e.to_string()))?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Per head, the bigrams around each report's most attended token, counted
/// over all reports and sorted by count then text.
pub fn top_bigrams(exports: &[AttentionExport]) -> Vec<Vec<(String, usize)>> {
    let heads = exports.iter().map(|e| e.raw.len()).max().unwrap_or(0);
    (0..heads)
        .map(|h| {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for e in exports.iter().filter(|e| h < e.raw.len()) {
                let i = e.argmax(h);
                if i > 0 {
                    *counts.entry(format!("{} {}", e.tokens[i - 1], e.tokens[i])).or_default() += 1;
                }
                if i + 1 < e.tokens.len() {
                    *counts.entry(format!("{} {}", e.tokens[i], e.tokens[i + 1])).or_default() += 1;
                }
            }
            let mut v: Vec<(String, usize)> = counts.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            v
        })
        .collect()
}

/// Two columns per head, `limit` rows.
pub fn bigram_tsv(table: &[Vec<(String, usize)>], limit: usize) -> String {
    let mut out = String::from("rank");
    for h in 1..=table.len() {
        out.push_str(&format!("\thead{h}_bigram\thead{h}_count"));
    }
    out.push('\n');
    let rows = table.iter().map(|t| t.len().min(limit)).max().unwrap_or(0);
    for r in 0..rows {
        out.push_str(&(r + 1).to_string());
        for t in table {
            match t.get(r) {
                Some((b, c)) => out.push_str(&format!("\t{b}\t{c}")),
                None => out.push_str("\t\t"),
            }
        }
        out.push('\n');
    }
    out
}
