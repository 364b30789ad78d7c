use serde::Serialize;

use crate::error::{Error, Result};
use crate::gammadist::GammaParams;
use crate::training::Target;

/// One row of a model comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub dataset: String,
    pub features: String,
    pub n: usize,
    pub nll: f64,
    pub rmse: f64,
    /// Pearson correlation times 100.
    pub corr: f64,
    /// Set when the point predictions had zero variance and `corr` was forced to 0.
    pub zero_variance: bool,
}

pub const METRIC_HEADER: &str = "dataset\tfeatures\tn\tnll\trmse\tcorr\tzero_variance";

impl MetricRow {
    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.3}\t{}",
            self.dataset, self.features, self.n, self.nll, self.rmse, self.corr, self.zero_variance
        )
    }
}

pub fn metrics_tsv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRIC_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_tsv_line());
        out.push('\n');
    }
    out
}

/// Pearson correlation by the two-pass formula; `None` when either side has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// RMSE, correlation ×100 and the zero-variance flag for point predictions.
pub fn point_metrics(predicted: &[f64], truth: &[f64]) -> Result<(f64, f64, bool)> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    let mse = predicted.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64;
    let (corr, flag) = match pearson(predicted, truth) {
        Some(r) => (100.0 * r, false),
        None => (0.0, true),
    };
    Ok((mse.sqrt(), corr, flag))
}

/// Mean NLL, RMSE of the Gamma mean, and correlation of the Gamma mean with truth.
pub fn metrics(predictions: &[GammaParams], truth: &[f64], dataset: &str, features: &str) -> Result<MetricRow> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} truths",
            predictions.len(),
            truth.len()
        )));
    }
    let means: Vec<f64> = predictions.iter().map(GammaParams::mean).collect();
    let (rmse, corr, zero_variance) = point_metrics(&means, truth)?;
    let mut nll = 0.0;
    for (p, &d) in predictions.iter().zip(truth) {
        nll += p.nll(d)?;
    }
    Ok(MetricRow {
        dataset: dataset.to_string(),
        features: features.to_string(),
        n: truth.len(),
        nll: nll / truth.len() as f64,
        rmse,
        corr,
        zero_variance,
    })
}

/// Predictions for one outage: the onset forecast and one per report.
#[derive(Clone, Debug)]
pub struct SequenceOutcome {
    pub duration: f64,
    pub initial: GammaParams,
    /// `(elapsed hours, forecast)` per report, in time order.
    pub updates: Vec<(f64, GammaParams)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportCountRow {
    pub reports: usize,
    pub n: usize,
    pub nll: f64,
    pub rmse: f64,
}

pub const MIN_REPORTS: usize = 3;

/// NLL and RMSE after 0..=3 reports over outages with at least three reports.
/// Row 0 scores the onset forecast against the total duration; later rows
/// score against `target`.
pub fn per_report_metrics(outcomes: &[SequenceOutcome], target: Target) -> Result<Vec<ReportCountRow>> {
    let subset: Vec<&SequenceOutcome> = outcomes.iter().filter(|o| o.updates.len() >= MIN_REPORTS).collect();
    if subset.is_empty() {
        return Err(Error::data("no outages with at least three reports"));
    }
    let mut rows = Vec::with_capacity(MIN_REPORTS + 1);
    for r in 0..=MIN_REPORTS {
        let mut preds = Vec::with_capacity(subset.len());
        let mut truth = Vec::with_capacity(subset.len());
        for o in &subset {
            if r == 0 {
                preds.push(o.initial);
                truth.push(o.duration);
            } else {
                let (t, p) = o.updates[r - 1];
                preds.push(p);
                truth.push(target.value(o.duration, t));
            }
        }
        let m = metrics(&preds, &truth, "", "")?;
        rows.push(ReportCountRow {
            reports: r,
            n: m.n,
            nll: m.nll,
            rmse: m.rmse,
        });
    }
    Ok(rows)
}

pub fn report_count_tsv(rows: &[ReportCountRow]) -> String {
    let mut out = String::from("reports\tn\tnll\trmse\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\n", r.reports, r.n, r.nll, r.rmse));
    }
    out
}

/// Customer-facing summary of a forecast, in hours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub mode: f64,
    pub mean: f64,
    pub q80: f64,
}

pub fn report_row(p: &GammaParams) -> Result<ReportRow> {
    Ok(ReportRow {
        mode: p.mode(),
        mean: p.mean(),
        q80: p.quantile(0.8)?,
    })
}
