//! Normal-inverse-gamma shrinkage of per-point Gaussian parameters
//! (BaVarIA) and the offline scorers.
//!
//! An empirical-Bayes prior is fitted once over all points. Each point's
//! class posterior is the conjugate update of that prior with the point's own
//! shadow observations; a class without observations keeps the prior, which
//! makes the offline case a special case of the online one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base::{global_class_variances, lse_centered};
use crate::data::{AuditDataset, PointRecord, StatisticKind};
use crate::error::{Error, Result};
use crate::family::{llr_gaussian, GaussParams};
use crate::numeric::{mean, sum_sq_dev, CompensatedSum, VARIANCE_FLOOR};
use crate::score::{score_points, ScoreReport, ScoreVector};
use crate::special::{ln_gamma_half_ratio, log_norm_cdf};

pub const DEFAULT_KAPPA: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 2.0;

/// NIG parameters for one class: `μ | σ² ~ N(mu, σ²/kappa)`,
/// `σ² ~ InvGamma(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nig {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Class-specific locations and scales with shared strength and shape.
/// Index 0 is OUT, 1 is IN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub mu0: f64,
    pub mu1: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
}

/// Student-t posterior predictive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TPredictive {
    pub nu: f64,
    pub loc: f64,
    pub scale2: f64,
}

impl NigPrior {
    /// Validated constructor.
    pub fn new(mu0: f64, mu1: f64, kappa: f64, alpha: f64, beta0: f64, beta1: f64) -> Result<Self> {
        let p = Self {
            mu0,
            mu1,
            kappa,
            alpha,
            beta0,
            beta1,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("prior {what} = {v} is invalid")));
        if !(self.mu0.is_finite()) {
            return bad("mu0", self.mu0);
        }
        if !(self.mu1.is_finite()) {
            return bad("mu1", self.mu1);
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa (must be > 0)", self.kappa);
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad("alpha (must be > 1)", self.alpha);
        }
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return bad("beta0 (must be > 0)", self.beta0);
        }
        if !(self.beta1 > 0.0 && self.beta1.is_finite()) {
            return bad("beta1 (must be > 0)", self.beta1);
        }
        Ok(())
    }

    /// The prior slice for one class.
    pub fn class(&self, member: bool) -> Nig {
        let (mu, beta) = if member {
            (self.mu1, self.beta1)
        } else {
            (self.mu0, self.beta0)
        };
        Nig {
            mu,
            kappa: self.kappa,
            alpha: self.alpha,
            beta,
        }
    }

    /// Key-value text form (`mu0 = ...` per line).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat struct of floats serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s).map_err(|e| Error::Config(format!("prior file: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }
}

/// [`NigPrior::new`] under its conventional name.
pub fn set_prior(mu0: f64, mu1: f64, kappa: f64, alpha: f64, beta0: f64, beta1: f64) -> Result<NigPrior> {
    NigPrior::new(mu0, mu1, kappa, alpha, beta0, beta1)
}

/// Empirical-Bayes prior: per-class global mean and variance of all shadow
/// statistics, `kappa = 1`, `alpha = 2`, `beta = variance * (alpha - 1)`.
pub fn fit_prior(ds: &AuditDataset) -> Result<NigPrior> {
    let mut stats: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for p in ds.points() {
        for (&z, &m) in p.shadow_stats.iter().zip(&p.shadow_members) {
            stats[m as usize].push(z);
        }
    }
    for (class, s) in stats.iter().enumerate() {
        if s.is_empty() {
            let name = if class == 1 { "IN" } else { "OUT" };
            return Err(Error::InsufficientData(format!(
                "no {name} shadow observations to fit a prior from; supply one with set_prior"
            )));
        }
    }
    let fit = |s: &[f64]| {
        let mu = mean(s);
        let var = (sum_sq_dev(s, mu) / s.len() as f64).max(VARIANCE_FLOOR);
        (mu, var * (DEFAULT_ALPHA - 1.0))
    };
    let (mu0, beta0) = fit(&stats[0]);
    let (mu1, beta1) = fit(&stats[1]);
    NigPrior::new(mu0, mu1, DEFAULT_KAPPA, DEFAULT_ALPHA, beta0, beta1)
}

/// Conjugate update with `n` observations of mean `mean` and sum of squared
/// deviations `ss`.
pub fn nig_update(prior: Nig, n: usize, mean: f64, ss: f64) -> Result<Nig> {
    if ss < 0.0 || ss.is_nan() {
        return Err(Error::domain(ss, "sum of squared deviations (>= 0)"));
    }
    if n == 0 {
        return Ok(prior);
    }
    let nf = n as f64;
    let kappa = prior.kappa + nf;
    let d = mean - prior.mu;
    Ok(Nig {
        mu: (prior.kappa * prior.mu + nf * mean) / kappa,
        kappa,
        alpha: prior.alpha + nf / 2.0,
        beta: prior.beta + ss / 2.0 + prior.kappa * nf * d * d / (2.0 * kappa),
    })
}

/// Updates with a sample directly.
pub fn nig_update_sample(prior: Nig, zs: &[f64]) -> Result<Nig> {
    if zs.is_empty() {
        return Ok(prior);
    }
    let m = mean(zs);
    nig_update(prior, zs.len(), m, sum_sq_dev(zs, m))
}

pub fn predictive(post: Nig) -> TPredictive {
    TPredictive {
        nu: 2.0 * post.alpha,
        loc: post.mu,
        scale2: post.beta * (post.kappa + 1.0) / (post.alpha * post.kappa),
    }
}

impl TPredictive {
    /// Student-t log-density, normalization included.
    pub fn ln_pdf(&self, z: f64) -> f64 {
        let nu = self.nu;
        let d = z - self.loc;
        ln_gamma_half_ratio(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI * self.scale2).ln()
            - (nu + 1.0) / 2.0 * (d * d / (nu * self.scale2)).ln_1p()
    }
}

/// Per-class posteriors `[OUT, IN]` of one point; an unobserved class keeps
/// the prior exactly.
pub fn class_posteriors(p: &PointRecord, prior: &NigPrior) -> Result<[Nig; 2]> {
    Ok([
        nig_update_sample(prior.class(false), &p.class_stats(false))?,
        nig_update_sample(prior.class(true), &p.class_stats(true))?,
    ])
}

fn require_logodds(ds: &AuditDataset, what: &str) -> Result<()> {
    if ds.stat_kind() != StatisticKind::LogOdds {
        return Err(Error::Config(format!(
            "{what} scores log-odds; convert the {} dataset first",
            ds.stat_kind()
        )));
    }
    Ok(())
}

fn prior_config(prior: &NigPrior) -> String {
    format!(
        "mu0={},mu1={},kappa={},alpha={},beta0={},beta1={}",
        prior.mu0, prior.mu1, prior.kappa, prior.alpha, prior.beta0, prior.beta1
    )
}

pub fn bavaria_t_report(ds: &AuditDataset, prior: &NigPrior) -> Result<ScoreReport> {
    require_logodds(ds, "BaVarIA-t")?;
    prior.validate()?;
    Ok(score_points(ds, "BaVarIA-t", prior_config(prior), |p| {
        let [out, in_] = class_posteriors(p, prior)?;
        let z = p.target_stat;
        Ok(predictive(in_).ln_pdf(z) - predictive(out).ln_pdf(z))
    }))
}

/// Student-t predictive LLR.
pub fn score_bavaria_t(ds: &AuditDataset, prior: &NigPrior) -> Result<ScoreVector> {
    bavaria_t_report(ds, prior)?.into_scores()
}

/// Gaussian parameters BaVarIA-n uses for one class: the sample mean (prior
/// location when empty) and the posterior-mean variance `beta / (alpha - 1)`.
pub fn bavaria_n_params(zs: &[f64], prior: Nig) -> Result<GaussParams> {
    let post = nig_update_sample(prior, zs)?;
    let mean = if zs.is_empty() { prior.mu } else { mean(zs) };
    Ok(GaussParams {
        mean,
        var: (post.beta / (post.alpha - 1.0)).max(VARIANCE_FLOOR),
    })
}

pub fn bavaria_n_report(ds: &AuditDataset, prior: &NigPrior) -> Result<ScoreReport> {
    require_logodds(ds, "BaVarIA-n")?;
    prior.validate()?;
    Ok(score_points(ds, "BaVarIA-n", prior_config(prior), |p| {
        let out = bavaria_n_params(&p.class_stats(false), prior.class(false))?;
        let in_ = bavaria_n_params(&p.class_stats(true), prior.class(true))?;
        Ok(llr_gaussian(p.target_stat, out, in_))
    }))
}

/// Gaussian LLR with MLE means and NIG posterior-mean variances.
pub fn score_bavaria_n(ds: &AuditDataset, prior: &NigPrior) -> Result<ScoreVector> {
    bavaria_n_report(ds, prior)?.into_scores()
}

/// Link used by offline LiRA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfflineForm {
    /// Gaussian LLR against an OUT distribution shifted by `delta`.
    Linear,
    /// One-sided test `log Φ((z - μ_out) / σ)`.
    LogCdf,
}

fn require_offline(ds: &AuditDataset, what: &str) -> Result<()> {
    if let Some(p) = ds.points().iter().find(|p| p.n_in() > 0) {
        return Err(Error::Config(format!(
            "{what} is an offline scorer but point {} has IN shadows",
            p.point_id
        )));
    }
    Ok(())
}

pub fn lira_offline_report(ds: &AuditDataset, delta: f64, form: OfflineForm) -> Result<ScoreReport> {
    require_logodds(ds, "offline LiRA")?;
    require_offline(ds, "offline LiRA")?;
    if !delta.is_finite() {
        return Err(Error::Config(format!("mean shift {delta} is not finite")));
    }
    if !ds.is_empty() && ds.k() == 0 {
        return Err(Error::InsufficientData("offline LiRA needs at least one shadow model".into()));
    }
    let var = global_class_variances(ds)[0];
    let sd = var.sqrt();
    let config = match form {
        OfflineForm::Linear => format!("form=linear,delta={delta}"),
        OfflineForm::LogCdf => "form=logcdf".to_string(),
    };
    Ok(score_points(ds, "LiRA-offline", config, |p| {
        let mu_out = mean(&p.shadow_stats);
        let d = p.target_stat - mu_out;
        Ok(match form {
            OfflineForm::Linear => delta / var * (d - delta / 2.0),
            OfflineForm::LogCdf => log_norm_cdf(d / sd),
        })
    }))
}

/// Offline LiRA with a global OUT variance and a fixed IN mean shift.
pub fn score_lira_offline(ds: &AuditDataset, delta: f64, form: OfflineForm) -> Result<ScoreVector> {
    lira_offline_report(ds, delta, form)?.into_scores()
}

pub fn base_offline_report(ds: &AuditDataset, alpha: f64) -> Result<ScoreReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("offline scale {alpha} is outside [0, 1]")));
    }
    if ds.stat_kind() != StatisticKind::Loss {
        return Err(Error::Config(format!(
            "offline BASE scores losses; convert the {} dataset first",
            ds.stat_kind()
        )));
    }
    require_offline(ds, "offline BASE")?;
    if !ds.is_empty() && ds.k() == 0 {
        return Err(Error::InsufficientData("offline BASE needs at least one shadow model".into()));
    }
    Ok(score_points(ds, "BASE-offline", format!("alpha={alpha}"), |p| {
        Ok(lse_centered(p, alpha))
    }))
}

/// `-loss_0 - alpha * log(mean_k exp(-loss_k))` over OUT shadows.
pub fn score_base_offline(ds: &AuditDataset, alpha: f64) -> Result<ScoreVector> {
    base_offline_report(ds, alpha)?.into_scores()
}

/// Global IN mean minus global OUT mean of labelled reference shadows.
pub fn offline_mean_shift(reference: &AuditDataset) -> Result<f64> {
    let mut sums = [CompensatedSum::new(), CompensatedSum::new()];
    let mut n = [0usize; 2];
    for p in reference.points() {
        for (&z, &m) in p.shadow_stats.iter().zip(&p.shadow_members) {
            sums[m as usize].add(z);
            n[m as usize] += 1;
        }
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(Error::InsufficientData(
            "mean shift needs reference data with both IN and OUT shadows".into(),
        ));
    }
    Ok(sums[1].value() / n[1] as f64 - sums[0].value() / n[0] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nig(mu: f64, kappa: f64, alpha: f64, beta: f64) -> Nig {
        Nig { mu, kappa, alpha, beta }
    }

    fn point(id: &str, target: f64, shadows: &[(f64, bool)]) -> PointRecord {
        PointRecord {
            point_id: id.into(),
            target_stat: target,
            target_member: None,
            shadow_stats: shadows.iter().map(|s| s.0).collect(),
            shadow_members: shadows.iter().map(|s| s.1).collect(),
        }
    }

    #[test]
    fn update_examples() {
        let p = nig(0.0, 1.0, 2.0, 1.0);
        assert_eq!(nig_update(p, 0, 5.0, 3.0).unwrap(), p);
        assert_eq!(nig_update(p, 1, 2.0, 0.0).unwrap(), nig(1.0, 2.0, 2.5, 2.0));
        assert_eq!(nig_update(p, 4, 0.0, 4.0).unwrap(), nig(0.0, 5.0, 4.0, 3.0));
        assert!(matches!(nig_update(p, 2, 0.0, -1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn predictive_examples() {
        let t = predictive(nig(0.0, 5.0, 4.0, 3.0));
        assert_eq!((t.nu, t.loc), (8.0, 0.0));
        assert!((t.scale2 - 0.9).abs() < 1e-15);
        let t = predictive(nig(0.0, 1.0, 2.0, 1.0));
        assert_eq!((t.nu, t.scale2), (4.0, 1.0));
    }

    #[test]
    fn t_density_matches_closed_form_at_small_nu() {
        // nu = 1 is Cauchy: 1 / (pi s (1 + x^2 / s^2)).
        let t = TPredictive { nu: 1.0, loc: 0.5, scale2: 4.0 };
        for z in [-3.0, 0.5, 2.0, 10.0] {
            let x: f64 = (z - 0.5) / 2.0;
            let want = -(std::f64::consts::PI * 2.0 * (1.0 + x * x)).ln();
            assert!((t.ln_pdf(z) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn large_nu_approaches_gaussian() {
        let t = TPredictive { nu: 1e6, loc: 0.0, scale2: 1.0 };
        for i in -40..=40 {
            let z = i as f64 / 10.0;
            let g = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln();
            assert!((t.ln_pdf(z) - g).abs() < 1e-4);
        }
    }

    #[test]
    fn prior_validation() {
        assert!(set_prior(0.0, 1.0, 1.0, 2.0, 1.0, 1.0).is_ok());
        assert!(matches!(set_prior(0.0, 1.0, 1.0, 1.0, 1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(set_prior(0.0, 1.0, 0.0, 2.0, 1.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(set_prior(0.0, 1.0, 1.0, 2.0, 0.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn prior_text_round_trip() {
        let p = set_prior(-0.25, 1.5, 1.0, 2.0, 0.3, 1e-7).unwrap();
        assert_eq!(NigPrior::from_toml_str(&p.to_toml_string()).unwrap(), p);
        assert!(NigPrior::from_toml_str("mu0 = 1").is_err());
    }

    #[test]
    fn fit_prior_examples() {
        let ds = AuditDataset::new(
            vec![
                point("a", 0.0, &[(2.0, true), (1.0, false), (2.0, true), (3.0, false)]),
                point("b", 0.0, &[(2.0, true), (-1.0, false), (2.0, true), (1.0, false)]),
            ],
            StatisticKind::LogOdds,
        )
        .unwrap();
        let p = fit_prior(&ds).unwrap();
        assert_eq!((p.kappa, p.alpha), (1.0, 2.0));
        assert_eq!((p.mu1, p.beta1), (2.0, VARIANCE_FLOOR));
        // OUT stats {1, 3, -1, 1}: mean 1, variance 2.
        assert_eq!((p.mu0, p.beta0), (1.0, 2.0));

        let offline = AuditDataset::new(vec![point("a", 0.0, &[(1.0, false)])], StatisticKind::LogOdds).unwrap();
        assert!(matches!(fit_prior(&offline), Err(Error::InsufficientData(_))));
    }

    fn ds(points: Vec<PointRecord>) -> AuditDataset {
        AuditDataset::new(points, StatisticKind::LogOdds).unwrap()
    }

    #[test]
    fn identical_posteriors_score_zero() {
        let prior = set_prior(0.4, 0.4, 1.0, 2.0, 1.3, 1.3).unwrap();
        let d = ds(vec![point("a", 1.7, &[(0.1, true), (0.9, true), (0.1, false), (0.9, false)])]);
        assert_eq!(score_bavaria_t(&d, &prior).unwrap().scores, vec![0.0]);
        assert_eq!(score_bavaria_n(&d, &prior).unwrap().scores, vec![0.0]);
    }

    #[test]
    fn symmetric_posteriors_score_zero_at_origin() {
        let prior = set_prior(-1.0, 1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let d = ds(vec![point("a", 0.0, &[(0.5, true), (-0.5, false)])]);
        assert_eq!(score_bavaria_t(&d, &prior).unwrap().scores, vec![0.0]);
    }

    #[test]
    fn bavaria_n_variance_is_posterior_mean() {
        let g = bavaria_n_params(&[-1.0, 1.0, -1.0, 1.0], nig(0.0, 1.0, 2.0, 1.0)).unwrap();
        assert_eq!(g, GaussParams { mean: 0.0, var: 1.0 });
        let g = bavaria_n_params(&[], nig(0.7, 1.0, 3.0, 4.0)).unwrap();
        assert_eq!(g, GaussParams { mean: 0.7, var: 2.0 });
    }

    #[test]
    fn offline_bavaria_uses_prior_for_in() {
        let prior = set_prior(0.0, 2.0, 1.0, 2.0, 1.0, 3.0).unwrap();
        let p = point("a", 0.3, &[(0.2, false), (-0.4, false), (1.1, false)]);
        let [_, in_] = class_posteriors(&p, &prior).unwrap();
        assert_eq!(in_, prior.class(true));
        assert!(score_bavaria_t(&ds(vec![p]), &prior).unwrap().scores[0].is_finite());
    }

    #[test]
    fn wrong_kind_is_config_error() {
        let prior = set_prior(0.0, 1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let d = AuditDataset::new(vec![point("a", 0.5, &[(0.2, true)])], StatisticKind::Loss).unwrap();
        assert!(matches!(score_bavaria_t(&d, &prior), Err(Error::Config(_))));
        assert!(matches!(score_bavaria_n(&d, &prior), Err(Error::Config(_))));
    }

    #[test]
    fn lira_offline_examples() {
        let d = ds(vec![
            point("a", 0.5, &[(0.0, false), (1.0, false)]),
            point("b", 3.0, &[(1.0, false), (3.0, false)]),
        ]);
        for s in score_lira_offline(&d, 0.0, OfflineForm::Linear).unwrap().scores {
            assert_eq!(s, 0.0);
        }
        let cdf = score_lira_offline(&d, 0.0, OfflineForm::LogCdf).unwrap().scores;
        assert_eq!(cdf[0], 0.5f64.ln());
        let lin = score_lira_offline(&d, 1.5, OfflineForm::Linear).unwrap().scores;
        assert_eq!(crate::numeric::spearman(&lin, &cdf), 1.0);
        let online = ds(vec![point("a", 0.5, &[(0.0, true), (1.0, false)])]);
        assert!(matches!(
            score_lira_offline(&online, 1.0, OfflineForm::Linear),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn base_offline_examples() {
        let d = AuditDataset::new(
            vec![point("a", 1.0, &[(1.0, false), (1.0, false)])],
            StatisticKind::Loss,
        )
        .unwrap();
        assert_eq!(score_base_offline(&d, 0.5).unwrap().scores, vec![-0.5]);
        assert_eq!(score_base_offline(&d, 0.0).unwrap().scores, vec![-1.0]);
        assert!(matches!(score_base_offline(&d, 1.5), Err(Error::Config(_))));
        assert_eq!(
            score_base_offline(&d, 1.0).unwrap().scores,
            crate::base::score_base1(&d, crate::base::CenteringMode::LogSumExp).unwrap().scores
        );
    }

    #[test]
    fn mean_shift_examples() {
        let r = ds(vec![point("a", 0.0, &[(3.0, true), (1.0, false), (3.0, true), (1.0, false)])]);
        assert_eq!(offline_mean_shift(&r).unwrap(), 2.0);
        let same = ds(vec![point("a", 0.0, &[(0.4, true), (0.4, false)])]);
        assert_eq!(offline_mean_shift(&same).unwrap(), 0.0);
        let off = ds(vec![point("a", 0.0, &[(0.4, false)])]);
        assert!(matches!(offline_mean_shift(&off), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn batch_update_equals_sequential(
            zs in prop::collection::vec(-5.0f64..5.0, 0..20),
            mu in -2.0f64..2.0, kappa in 0.1f64..5.0, alpha in 1.1f64..5.0, beta in 0.1f64..5.0,
        ) {
            let prior = nig(mu, kappa, alpha, beta);
            let batch = nig_update_sample(prior, &zs).unwrap();
            let mut seq = prior;
            for &z in &zs {
                seq = nig_update(seq, 1, z, 0.0).unwrap();
            }
            for (a, b) in [(batch.mu, seq.mu), (batch.kappa, seq.kappa), (batch.alpha, seq.alpha), (batch.beta, seq.beta)] {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn scores_ignore_shadow_order(
            shadows in prop::collection::vec((-3.0f64..3.0, any::<bool>()), 1..12),
            target in -3.0f64..3.0,
        ) {
            let prior = set_prior(-0.5, 0.5, 1.0, 2.0, 1.0, 1.5).unwrap();
            let mut rev = shadows.clone();
            rev.reverse();
            let a = ds(vec![point("a", target, &shadows)]);
            let b = ds(vec![point("a", target, &rev)]);
            let ta = score_bavaria_t(&a, &prior).unwrap().scores[0];
            let tb = score_bavaria_t(&b, &prior).unwrap().scores[0];
            prop_assert!((ta - tb).abs() <= 1e-12 * (1.0 + ta.abs()));
            let na = score_bavaria_n(&a, &prior).unwrap().scores[0];
            let nb = score_bavaria_n(&b, &prior).unwrap().scores[0];
            prop_assert!((na - nb).abs() <= 1e-12 * (1.0 + na.abs()));
        }
    }
}
