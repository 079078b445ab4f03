//! The BASE hierarchy of Gaussian LLR attacks, from pooled centering (BASE1)
//! to four per-point class-conditional parameters (BASE4), plus LiRA and the
//! BASE1 form of RMIA.
//!
//! BASE scores orient the statistic so that IN shadows sit above OUT shadows:
//! loss datasets are scored on `z = -loss`, confidences and log-odds as-is.

use crate::data::{ensure_kind, AuditDataset, PointRecord, StatisticKind};
use crate::error::{Error, Result};
use crate::family::{fit_gaussian, llr_gaussian, GaussParams};
use crate::numeric::{log_mean_exp, mean, mean_var, CompensatedSum, VARIANCE_FLOOR};
use crate::score::{score_points, ScoreReport, ScoreVector};

/// Per-class shadow count below which LiRA falls back to global variances.
pub const HARD_SWITCH_THRESHOLD: usize = 32;

/// Estimator for the BASE1 pooled centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringMode {
    Arithmetic,
    /// `log(mean(exp(-loss)))`, the softmin of the shadow losses. Loss
    /// datasets only.
    LogSumExp,
}

/// How LiRA estimates the two class variances of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    PerPoint,
    Global,
    /// Global variances for points with fewer than `threshold` shadows in
    /// either class, per-point variances otherwise.
    HardSwitch { threshold: usize },
}

impl VarianceMode {
    pub fn hard_switch() -> Self {
        VarianceMode::HardSwitch {
            threshold: HARD_SWITCH_THRESHOLD,
        }
    }

    fn describe(self) -> String {
        match self {
            VarianceMode::PerPoint => "variance=perpoint".into(),
            VarianceMode::Global => "variance=global".into(),
            VarianceMode::HardSwitch { threshold } => format!("variance=hardswitch({threshold})"),
        }
    }
}

fn orientation(kind: StatisticKind) -> f64 {
    if kind == StatisticKind::Loss {
        -1.0
    } else {
        1.0
    }
}

struct Oriented {
    target: f64,
    all: Vec<f64>,
    out: Vec<f64>,
    in_: Vec<f64>,
}

fn oriented(p: &PointRecord, sign: f64) -> Oriented {
    let mut o = Oriented {
        target: sign * p.target_stat,
        all: Vec::with_capacity(p.shadow_stats.len()),
        out: Vec::new(),
        in_: Vec::new(),
    };
    for (&z, &m) in p.shadow_stats.iter().zip(&p.shadow_members) {
        let z = sign * z;
        o.all.push(z);
        if m {
            o.in_.push(z);
        } else {
            o.out.push(z);
        }
    }
    o
}

fn require_k(ds: &AuditDataset, min: usize, what: &str) -> Result<()> {
    if !ds.is_empty() && ds.k() < min {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {min} shadow models per point, dataset has {}",
            ds.k()
        )));
    }
    Ok(())
}

fn require_classes(p: &PointRecord) -> Result<()> {
    let n_in = p.n_in();
    if n_in == 0 {
        return Err(Error::MissingClass {
            point_id: p.point_id.clone(),
            class: 1,
        });
    }
    if n_in == p.shadow_members.len() {
        return Err(Error::MissingClass {
            point_id: p.point_id.clone(),
            class: 0,
        });
    }
    Ok(())
}

/// `-loss_0 - log(mean_k exp(-loss_k))`.
pub(crate) fn lse_centered(p: &PointRecord, scale: f64) -> f64 {
    let neg: Vec<f64> = p.shadow_stats.iter().map(|l| -l).collect();
    -p.target_stat - scale * log_mean_exp(&neg)
}

pub fn base1_report(ds: &AuditDataset, centering: CenteringMode) -> Result<ScoreReport> {
    require_k(ds, 1, "BASE1")?;
    match centering {
        CenteringMode::Arithmetic => {
            let sign = orientation(ds.stat_kind());
            Ok(score_points(ds, "BASE1", "centering=arithmetic".into(), |p| {
                let o = oriented(p, sign);
                Ok(o.target - mean(&o.all))
            }))
        }
        CenteringMode::LogSumExp => {
            if ds.stat_kind() != StatisticKind::Loss {
                return Err(Error::Config(format!(
                    "log-sum-exp centering needs a loss statistic, dataset carries {}",
                    ds.stat_kind()
                )));
            }
            Ok(score_points(ds, "BASE1", "centering=lse".into(), |p| Ok(lse_centered(p, 1.0))))
        }
    }
}

/// Target statistic minus the pooled shadow centre.
pub fn score_base1(ds: &AuditDataset, centering: CenteringMode) -> Result<ScoreVector> {
    base1_report(ds, centering)?.into_scores()
}

pub fn base2_report(ds: &AuditDataset) -> Result<ScoreReport> {
    require_k(ds, 2, "BASE2")?;
    let sign = orientation(ds.stat_kind());
    Ok(score_points(ds, "BASE2", String::new(), |p| {
        let o = oriented(p, sign);
        let (mu, var) = mean_var(&o.all);
        Ok((o.target - mu) / var.max(VARIANCE_FLOOR))
    }))
}

/// `(z_0 - pooled mean) / pooled variance`, membership ignored.
pub fn score_base2(ds: &AuditDataset) -> Result<ScoreVector> {
    base2_report(ds)?.into_scores()
}

pub fn base3_report(ds: &AuditDataset) -> Result<ScoreReport> {
    let sign = orientation(ds.stat_kind());
    Ok(score_points(ds, "BASE3", String::new(), |p| {
        require_classes(p)?;
        let o = oriented(p, sign);
        let (mu0, mu1) = (mean(&o.out), mean(&o.in_));
        let ss: CompensatedSum = o
            .out
            .iter()
            .map(|z| (z - mu0) * (z - mu0))
            .chain(o.in_.iter().map(|z| (z - mu1) * (z - mu1)))
            .collect();
        let var = (ss.value() / o.all.len() as f64).max(VARIANCE_FLOOR);
        Ok((mu1 - mu0) / var * (o.target - (mu1 + mu0) / 2.0))
    }))
}

/// Separate class means, variance pooled over both classes.
pub fn score_base3(ds: &AuditDataset) -> Result<ScoreVector> {
    base3_report(ds)?.into_scores()
}

fn class_fits(o: &Oriented) -> Result<(GaussParams, GaussParams)> {
    Ok((fit_gaussian(&o.out)?, fit_gaussian(&o.in_)?))
}

pub fn base4_report(ds: &AuditDataset) -> Result<ScoreReport> {
    let sign = orientation(ds.stat_kind());
    Ok(score_points(ds, "BASE4", String::new(), |p| {
        require_classes(p)?;
        let o = oriented(p, sign);
        let (out, in_) = class_fits(&o)?;
        Ok(llr_gaussian(o.target, out, in_))
    }))
}

/// Full Gaussian LLR with per-point, per-class MLE parameters.
pub fn score_base4(ds: &AuditDataset) -> Result<ScoreVector> {
    base4_report(ds)?.into_scores()
}

/// Global per-class variance: residuals about each point's class mean,
/// pooled over every point, biased, floored. Index 0 = OUT, 1 = IN.
pub fn global_class_variances(ds: &AuditDataset) -> [f64; 2] {
    let mut ss = [CompensatedSum::new(), CompensatedSum::new()];
    let mut n = [0usize; 2];
    for p in ds.points() {
        for (class, member) in [(0, false), (1, true)] {
            let zs = p.class_stats(member);
            if zs.is_empty() {
                continue;
            }
            let mu = mean(&zs);
            for z in &zs {
                ss[class].add((z - mu) * (z - mu));
            }
            n[class] += zs.len();
        }
    }
    [0, 1].map(|c| {
        if n[c] == 0 {
            VARIANCE_FLOOR
        } else {
            (ss[c].value() / n[c] as f64).max(VARIANCE_FLOOR)
        }
    })
}

pub fn lira_report(ds: &AuditDataset, vmode: VarianceMode) -> Result<ScoreReport> {
    if ds.stat_kind() != StatisticKind::LogOdds {
        return Err(Error::Config(format!(
            "LiRA scores log-odds; convert the {} dataset first",
            ds.stat_kind()
        )));
    }
    if let VarianceMode::HardSwitch { threshold } = vmode {
        if threshold < 2 {
            return Err(Error::Config(format!("hard-switch threshold {threshold} is below 2")));
        }
    }
    let global = match vmode {
        VarianceMode::PerPoint => None,
        _ => Some(global_class_variances(ds)),
    };
    Ok(score_points(ds, "LiRA", vmode.describe(), |p| {
        require_classes(p)?;
        let o = oriented(p, 1.0);
        let (mut out, mut in_) = class_fits(&o)?;
        let use_global = match vmode {
            VarianceMode::PerPoint => false,
            VarianceMode::Global => true,
            VarianceMode::HardSwitch { threshold } => o.out.len().min(o.in_.len()) < threshold,
        };
        if use_global {
            let g = global.expect("global variances computed for non-per-point modes");
            out.var = g[0];
            in_.var = g[1];
        }
        Ok(llr_gaussian(o.target, out, in_))
    }))
}

/// LiRA on log-odds with the chosen variance estimator.
pub fn score_lira(ds: &AuditDataset, vmode: VarianceMode) -> Result<ScoreVector> {
    lira_report(ds, vmode)?.into_scores()
}

pub fn rmia_report(ds: &AuditDataset) -> Result<ScoreReport> {
    let loss = ensure_kind(ds, StatisticKind::Loss)?;
    let mut report = base1_report(&loss, CenteringMode::LogSumExp)?;
    report.scores.method = "RMIA(γ=1)".into();
    report.scores.config = "via=BASE1-lse".into();
    Ok(report)
}

/// RMIA at γ = 1 through its BASE1 log-sum-exp form. Non-loss datasets are
/// converted to loss first.
pub fn score_rmia(ds: &AuditDataset) -> Result<ScoreVector> {
    rmia_report(ds)?.into_scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StatisticKind::*;

    fn point(id: &str, target: f64, shadows: &[(f64, bool)]) -> PointRecord {
        PointRecord {
            point_id: id.into(),
            target_stat: target,
            target_member: None,
            shadow_stats: shadows.iter().map(|s| s.0).collect(),
            shadow_members: shadows.iter().map(|s| s.1).collect(),
        }
    }

    fn ds(kind: StatisticKind, points: Vec<PointRecord>) -> AuditDataset {
        AuditDataset::new(points, kind).unwrap()
    }

    #[test]
    fn base1_examples() {
        let d = ds(LogOdds, vec![point("a", 5.0, &[(3.0, true), (3.0, false), (3.0, true)])]);
        assert_eq!(score_base1(&d, CenteringMode::Arithmetic).unwrap().scores, vec![2.0]);

        let ln2 = std::f64::consts::LN_2;
        let d = ds(Loss, vec![point("a", ln2, &[(ln2, true), (ln2, false)])]);
        assert_eq!(score_base1(&d, CenteringMode::LogSumExp).unwrap().scores, vec![0.0]);

        let d = ds(LogOdds, vec![point("a", 0.0, &[(1.0, true)])]);
        assert!(matches!(score_base1(&d, CenteringMode::LogSumExp), Err(Error::Config(_))));
    }

    #[test]
    fn base1_orients_loss() {
        let d = ds(Loss, vec![point("a", 1.0, &[(3.0, true), (3.0, false)])]);
        assert_eq!(score_base1(&d, CenteringMode::Arithmetic).unwrap().scores, vec![2.0]);
    }

    #[test]
    fn base1_shift_invariance() {
        let shadows = [(0.5, true), (1.25, false), (-0.75, true), (2.0, false)];
        let d = ds(LogOdds, vec![point("a", 0.25, &shadows)]);
        let shifted: Vec<(f64, bool)> = shadows.iter().map(|&(z, m)| (z + 8.0, m)).collect();
        let e = ds(LogOdds, vec![point("a", 8.25, &shifted)]);
        assert_eq!(
            score_base1(&d, CenteringMode::Arithmetic).unwrap().scores,
            score_base1(&e, CenteringMode::Arithmetic).unwrap().scores
        );
    }

    #[test]
    fn base2_examples() {
        let d = ds(LogOdds, vec![
            point("a", 2.0, &[(0.0, true), (2.0, false)]),
            point("b", 1.0, &[(0.0, true), (2.0, false)]),
            point("c", 3.0, &[(1.0, true), (1.0, false)]),
        ]);
        let s = score_base2(&d).unwrap().scores;
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 0.0);
        assert_eq!(s[2], 2.0 / VARIANCE_FLOOR);
        let one = ds(LogOdds, vec![point("a", 2.0, &[(0.0, true)])]);
        assert!(matches!(score_base2(&one), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn base3_examples() {
        // IN {1, 3}: mean 2; OUT {-1, 1}: mean 0; pooled variance 1.
        let sh = [(1.0, true), (3.0, true), (-1.0, false), (1.0, false)];
        let d = ds(LogOdds, vec![point("mid", 1.0, &sh), point("hi", 2.0, &sh)]);
        assert_eq!(score_base3(&d).unwrap().scores, vec![0.0, 2.0]);

        let same = [(0.3, true), (0.7, true), (0.3, false), (0.7, false)];
        let d = ds(LogOdds, vec![point("a", -4.0, &same), point("b", 9.0, &same)]);
        assert_eq!(score_base3(&d).unwrap().scores, vec![0.0, 0.0]);
    }

    #[test]
    fn missing_class_carries_point_id() {
        let d = ds(LogOdds, vec![
            point("ok", 0.0, &[(1.0, true), (0.0, false)]),
            point("bad", 0.0, &[(1.0, false), (0.0, false)]),
        ]);
        let err = score_base3(&d).unwrap_err();
        assert_eq!(err, Error::MissingClass { point_id: "bad".into(), class: 1 });
        let report = base4_report(&d).unwrap();
        assert_eq!(report.scores.point_ids, vec!["ok".to_string()]);
        assert_eq!(report.failures.len(), 1);
    }

    #[test]
    fn base4_is_gaussian_llr_of_class_fits() {
        let sh = [(0.3, true), (1.9, true), (0.8, true), (-1.0, false), (0.2, false), (-0.4, false)];
        let d = ds(LogOdds, vec![point("a", 0.7, &sh)]);
        let want = llr_gaussian(
            0.7,
            fit_gaussian(&[-1.0, 0.2, -0.4]).unwrap(),
            fit_gaussian(&[0.3, 1.9, 0.8]).unwrap(),
        );
        assert_eq!(score_base4(&d).unwrap().scores, vec![want]);
        let same = [(0.5, true), (1.5, true), (0.5, false), (1.5, false)];
        let d = ds(LogOdds, vec![point("a", 3.0, &same)]);
        assert_eq!(score_base4(&d).unwrap().scores, vec![0.0]);
    }

    #[test]
    fn lira_modes() {
        let sh = [(0.3, true), (1.9, true), (0.8, true), (-1.0, false), (0.2, false), (-0.4, false)];
        let sh2 = [(2.3, true), (1.1, true), (0.0, true), (-3.0, false), (0.9, false), (0.4, false)];
        let d = ds(LogOdds, vec![point("a", 0.7, &sh), point("b", -0.2, &sh2)]);
        assert_eq!(
            score_lira(&d, VarianceMode::PerPoint).unwrap().scores,
            score_base4(&d).unwrap().scores
        );
        assert_eq!(
            score_lira(&d, VarianceMode::hard_switch()).unwrap().scores,
            score_lira(&d, VarianceMode::Global).unwrap().scores
        );
        assert_eq!(
            score_lira(&d, VarianceMode::HardSwitch { threshold: 3 }).unwrap().scores,
            score_lira(&d, VarianceMode::PerPoint).unwrap().scores
        );
        let loss = ds(Loss, vec![point("a", 0.7, &[(1.0, true), (2.0, false)])]);
        assert!(matches!(score_lira(&loss, VarianceMode::PerPoint), Err(Error::Config(_))));
        assert!(matches!(
            score_lira(&d, VarianceMode::HardSwitch { threshold: 1 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lira_global_with_equal_class_means_is_zero() {
        // Both classes pool to the same global variance.
        let a = [(0.0, true), (2.0, true), (0.5, false), (1.5, false)];
        let b = [(0.5, true), (1.5, true), (0.0, false), (2.0, false)];
        let d = ds(LogOdds, vec![point("a", 0.7, &a), point("b", 3.0, &b)]);
        for s in score_lira(&d, VarianceMode::Global).unwrap().scores {
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn global_variance_pools_residuals() {
        let d = ds(LogOdds, vec![
            point("a", 0.0, &[(0.0, true), (2.0, true), (10.0, false), (12.0, false)]),
            point("b", 0.0, &[(5.0, true), (9.0, true), (0.0, false), (0.0, false)]),
        ]);
        let g = global_class_variances(&d);
        // IN residuals: ±1, ±2 -> (1+1+4+4)/4; OUT residuals: ±1, 0, 0 -> 2/4.
        assert_eq!(g, [0.5, 2.5]);
    }

    #[test]
    fn rmia_matches_base1_lse_and_converts() {
        let loss = ds(Loss, vec![
            point("a", 0.3, &[(0.2, true), (1.4, false), (0.9, true)]),
            point("b", 2.1, &[(0.5, true), (0.7, false), (3.0, false)]),
        ]);
        let r = score_rmia(&loss).unwrap();
        let b = score_base1(&loss, CenteringMode::LogSumExp).unwrap();
        assert_eq!(r.scores, b.scores);
        assert_eq!(r.method, "RMIA(γ=1)");
        let conf = crate::data::convert_dataset(&loss, Confidence).unwrap();
        let rc = score_rmia(&conf).unwrap();
        assert!(rc.scores[0] > rc.scores[1]);
        assert!(r.scores[0] > r.scores[1]);
    }
}
