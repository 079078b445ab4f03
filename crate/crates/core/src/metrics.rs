//! ROC analysis and per-point Anderson-Darling normality diagnostics.

use std::collections::HashMap;
use std::io::Write;

use crate::data::{AuditDataset, StatisticKind};
use crate::error::{Error, Result};
use crate::numeric::mean_var;
use crate::score::ScoreVector;
use crate::special::log_norm_cdf;

/// Critical value of the corrected A*² statistic at the 5% level.
pub const AD_CRITICAL: f64 = 0.748;
pub const AD_MIN_SAMPLES: usize = 8;

/// Operating points of a threshold sweep, one per distinct score.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    // Cumulative (false positives, true positives) at each point.
    counts: Vec<(u64, u64)>,
    positives: u64,
    negatives: u64,
}

impl RocCurve {
    pub fn positives(&self) -> u64 {
        self.positives
    }

    pub fn negatives(&self) -> u64 {
        self.negatives
    }
}

/// ROC of `scores` against `labels` (`true` = member), higher score = more
/// likely member.
pub fn roc_from(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::domain(bad, "score (not NaN)"));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InsufficientData(
            "ROC needs at least one member and one non-member".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut counts = vec![(0u64, 0u64)];
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        counts.push((fp, tp));
    }
    let points = counts
        .iter()
        .map(|&(f, t)| (f as f64 / negatives as f64, t as f64 / positives as f64))
        .collect();
    Ok(RocCurve {
        points,
        counts,
        positives,
        negatives,
    })
}

/// [`roc_from`] on a score vector; `labels` follow its point order.
pub fn roc(scores: &ScoreVector, labels: &[bool]) -> Result<RocCurve> {
    roc_from(&scores.scores, labels)
}

/// Trapezoidal area, computed from integer counts so tied blocks get exactly
/// half credit.
pub fn auc(curve: &RocCurve) -> f64 {
    let twice: u128 = curve
        .counts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as u128 * (w[1].1 + w[0].1) as u128)
        .sum();
    twice as f64 / (2 * curve.positives as u128 * curve.negatives as u128) as f64
}

/// TPR at `target_fpr`, linearly interpolated between operating points.
pub fn tpr_at_fpr(curve: &RocCurve, target_fpr: f64) -> f64 {
    let pts = &curve.points;
    let i = pts.partition_point(|&(f, _)| f <= target_fpr);
    if i == 0 {
        return 0.0;
    }
    let (f0, t0) = pts[i - 1];
    if i == pts.len() || f0 == target_fpr {
        return t0;
    }
    let (f1, t1) = pts[i];
    t0 + (t1 - t0) * (target_fpr - f0) / (f1 - f0)
}

/// AUC and TPR at each requested FPR.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub auc: f64,
    pub tpr: Vec<f64>,
}

pub fn evaluate(scores: &[f64], labels: &[bool], fprs: &[f64]) -> Result<Metrics> {
    let curve = roc_from(scores, labels)?;
    Ok(Metrics {
        auc: auc(&curve),
        tpr: fprs.iter().map(|&f| tpr_at_fpr(&curve, f)).collect(),
    })
}

/// Reorders `scores` to the point order `ids`.
pub fn align(scores: &ScoreVector, ids: &[String]) -> Result<Vec<f64>> {
    if scores.len() != ids.len() {
        return Err(Error::Config(format!(
            "{} scores {} points but the reference has {}",
            scores.method,
            scores.len(),
            ids.len()
        )));
    }
    let index: HashMap<&str, f64> = scores.iter().collect();
    ids.iter()
        .map(|id| {
            index.get(id.as_str()).copied().ok_or_else(|| {
                Error::Config(format!("{} has no score for point {id}", scores.method))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub method: String,
    pub d_auc: f64,
    pub d_tpr: Vec<f64>,
}

/// Differences of each method from a baseline; positive favours the method.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub baseline: String,
    pub fprs: Vec<f64>,
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["method".to_string(), "delta_auc".to_string()];
        header.extend(self.fprs.iter().map(|f| format!("delta_tpr_at_{f}")));
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone(), r.d_auc.to_string()];
            rec.extend(r.d_tpr.iter().map(f64::to_string));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `labels` follow the baseline's point order; methods are aligned to it by
/// point id.
pub fn delta_table(
    methods: &[ScoreVector],
    baseline: &ScoreVector,
    labels: &[bool],
    fprs: &[f64],
) -> Result<DeltaTable> {
    let base = evaluate(&baseline.scores, labels, fprs)?;
    let rows = methods
        .iter()
        .map(|m| {
            let s = align(m, &baseline.point_ids)?;
            let e = evaluate(&s, labels, fprs)?;
            Ok(DeltaRow {
                method: m.method.clone(),
                d_auc: e.auc - base.auc,
                d_tpr: e.tpr.iter().zip(&base.tpr).map(|(a, b)| a - b).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DeltaTable {
        baseline: baseline.method.clone(),
        fprs: fprs.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdResult {
    /// Small-sample corrected A*².
    pub statistic: f64,
    pub reject: bool,
}

/// Anderson-Darling test of normality with estimated mean and variance.
pub fn anderson_darling(samples: &[f64]) -> Result<AdResult> {
    let n = samples.len();
    if n < AD_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "Anderson-Darling needs at least {AD_MIN_SAMPLES} samples, got {n}"
        )));
    }
    let nf = n as f64;
    let (mu, var) = mean_var(samples);
    let sd = (var * nf / (nf - 1.0)).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateSample(format!("sample of {n} has zero variance")));
    }
    let mut y: Vec<f64> = samples.iter().map(|x| (x - mu) / sd).collect();
    y.sort_by(f64::total_cmp);
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (log_norm_cdf(y[i]) + log_norm_cdf(-y[n - 1 - i])))
        .sum();
    let a2 = -nf - s / nf;
    let statistic = a2 * (1.0 + 4.0 / nf - 25.0 / (nf * nf));
    Ok(AdResult {
        statistic,
        reject: statistic > AD_CRITICAL,
    })
}

/// Per-class summary of per-point Anderson-Darling tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagnostics {
    /// 0 = OUT, 1 = IN.
    pub class: u8,
    pub tested: usize,
    /// Points whose class sample failed a precondition.
    pub skipped: usize,
    /// `NaN` when nothing was tested.
    pub median_statistic: f64,
    pub reject_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub classes: Vec<ClassDiagnostics>,
}

impl DiagnosticsReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["class", "median_ad", "reject_pct"]).map_err(csv_err)?;
        for c in &self.classes {
            out.write_record([
                c.class.to_string(),
                c.median_statistic.to_string(),
                c.reject_pct.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Tests each point's IN and OUT shadow log-odds separately.
pub fn diagnose_dataset(ds: &AuditDataset) -> Result<DiagnosticsReport> {
    if ds.stat_kind() != StatisticKind::LogOdds {
        return Err(Error::Config(format!(
            "diagnostics run on log-odds; convert the {} dataset first",
            ds.stat_kind()
        )));
    }
    if ds.is_empty() {
        return Ok(DiagnosticsReport::default());
    }
    let classes = [0u8, 1]
        .into_iter()
        .map(|class| {
            let mut stats = Vec::new();
            let mut rejects = 0usize;
            let mut skipped = 0usize;
            for p in ds.points() {
                match anderson_darling(&p.class_stats(class == 1)) {
                    Ok(r) => {
                        rejects += r.reject as usize;
                        stats.push(r.statistic);
                    }
                    Err(_) => skipped += 1,
                }
            }
            let tested = stats.len();
            ClassDiagnostics {
                class,
                tested,
                skipped,
                median_statistic: median(&mut stats),
                reject_pct: if tested == 0 {
                    f64::NAN
                } else {
                    100.0 * rejects as f64 / tested as f64
                },
            }
        })
        .collect();
    Ok(DiagnosticsReport { classes })
}
