//! Metrics, per-report curves, the least-squares baseline, attention exports
//! and customer-facing forecast rows.

mod attention;
mod baseline;
mod metrics;

pub use attention::{attention_export, attention_jsonl, bigram_tsv, smooth, top_bigrams, AttentionExport, AttentionRecord};
pub use baseline::{fit_linear, linear_baseline, LinearModel, RIDGE};
pub use metrics::{
    metrics, metrics_tsv, pearson, per_report_metrics, point_metrics, report_count_tsv, report_row, MetricRow,
    ReportCountRow, ReportRow, SequenceOutcome, METRIC_HEADER, MIN_REPORTS,
};
