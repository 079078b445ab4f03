//! Method tokens and uniform dispatch to the scorers.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use crate::base::{self, CenteringMode, VarianceMode};
use crate::bavaria::{self, NigPrior, OfflineForm};
use crate::data::{ensure_kind, AuditDataset, StatisticKind};
use crate::elsa::{self, FeatureMask};
use crate::error::{Error, Result};
use crate::score::{ScoreReport, ScoreVector};

/// A scorer together with its structural options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Base1(CenteringMode),
    Base2,
    Base3,
    Base4,
    Lira(VarianceMode),
    Rmia,
    BavariaN,
    BavariaT,
    Elsa(FeatureMask),
    LiraOffline(OfflineForm),
    BaseOffline,
}

/// Numeric inputs some methods need.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    /// BaVarIA prior; fitted from the scored data when absent.
    pub prior: Option<NigPrior>,
    pub lambda: f64,
    pub alpha: f64,
    /// Offline LiRA mean shift.
    pub delta: Option<f64>,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            prior: None,
            lambda: elsa::DEFAULT_LAMBDA,
            alpha: 1.0,
            delta: None,
        }
    }
}

/// Scores plus notes about implicit conversions.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub report: ScoreReport,
    pub notes: Vec<String>,
}

impl Method {
    /// Accepted tokens, with default options.
    pub const TOKENS: &'static [&'static str] = &[
        "base1",
        "base2",
        "base3",
        "base4",
        "lira",
        "rmia",
        "bavaria_n",
        "bavaria_t",
        "elsa1",
        "elsa2phi",
        "elsa3beta",
        "elsa3gamma",
        "elsa3phi",
        "elsafull",
        "lira_offline",
        "base_offline",
    ];

    pub fn token(&self) -> String {
        match self {
            Method::Base1(_) => "base1".into(),
            Method::Base2 => "base2".into(),
            Method::Base3 => "base3".into(),
            Method::Base4 => "base4".into(),
            Method::Lira(_) => "lira".into(),
            Method::Rmia => "rmia".into(),
            Method::BavariaN => "bavaria_n".into(),
            Method::BavariaT => "bavaria_t".into(),
            Method::Elsa(m) => m.token().map_or_else(|| m.name(), str::to_string),
            Method::LiraOffline(_) => "lira_offline".into(),
            Method::BaseOffline => "base_offline".into(),
        }
    }

    /// The statistic the scorer runs on, or `None` if it accepts any.
    pub fn required_stat(&self) -> Option<StatisticKind> {
        match self {
            Method::Base1(CenteringMode::LogSumExp) | Method::Rmia | Method::BaseOffline => {
                Some(StatisticKind::Loss)
            }
            Method::Lira(_) | Method::BavariaN | Method::BavariaT | Method::LiraOffline(_) => {
                Some(StatisticKind::LogOdds)
            }
            Method::Elsa(_) => Some(StatisticKind::Confidence),
            Method::Base1(CenteringMode::Arithmetic) | Method::Base2 | Method::Base3 | Method::Base4 => None,
        }
    }

    /// Needs IN shadows for every point.
    pub fn is_online_only(&self) -> bool {
        matches!(
            self,
            Method::Base3 | Method::Base4 | Method::Lira(_) | Method::Elsa(_)
        )
    }

    pub fn is_offline_scorer(&self) -> bool {
        matches!(self, Method::LiraOffline(_) | Method::BaseOffline)
    }

    /// Scores `ds`, converting the statistic first when the method needs a
    /// different kind.
    pub fn run(&self, ds: &AuditDataset, params: &MethodParams) -> Result<MethodRun> {
        let mut notes = Vec::new();
        let data: Cow<AuditDataset> = match self.required_stat() {
            Some(kind) if kind != ds.stat_kind() => {
                notes.push(format!(
                    "{}: converted {} statistics to {}",
                    self.token(),
                    ds.stat_kind(),
                    kind
                ));
                ensure_kind(ds, kind)?
            }
            _ => Cow::Borrowed(ds),
        };
        let ds = data.as_ref();
        let prior = || -> Result<NigPrior> {
            match params.prior {
                Some(p) => Ok(p),
                None => bavaria::fit_prior(ds),
            }
        };
        let report = match *self {
            Method::Base1(c) => base::base1_report(ds, c)?,
            Method::Base2 => base::base2_report(ds)?,
            Method::Base3 => base::base3_report(ds)?,
            Method::Base4 => base::base4_report(ds)?,
            Method::Lira(v) => base::lira_report(ds, v)?,
            Method::Rmia => base::rmia_report(ds)?,
            Method::BavariaN => bavaria::bavaria_n_report(ds, &prior()?)?,
            Method::BavariaT => bavaria::bavaria_t_report(ds, &prior()?)?,
            Method::Elsa(m) => elsa::elsa_report(ds, params.lambda, m)?,
            Method::LiraOffline(form) => {
                let delta = params.delta.ok_or_else(|| {
                    Error::Config("offline LiRA needs a mean shift (delta)".into())
                })?;
                bavaria::lira_offline_report(ds, delta, form)?
            }
            Method::BaseOffline => bavaria::base_offline_report(ds, params.alpha)?,
        };
        Ok(MethodRun { report, notes })
    }

    /// [`Method::run`] that fails on the first per-point error.
    pub fn score(&self, ds: &AuditDataset, params: &MethodParams) -> Result<ScoreVector> {
        self.run(ds, params)?.report.into_scores()
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Ok(match t.as_str() {
            "base1" => Method::Base1(CenteringMode::Arithmetic),
            "base2" => Method::Base2,
            "base3" => Method::Base3,
            "base4" => Method::Base4,
            "lira" => Method::Lira(VarianceMode::PerPoint),
            "rmia" => Method::Rmia,
            "bavaria_n" | "bavaria-n" => Method::BavariaN,
            "bavaria_t" | "bavaria-t" => Method::BavariaT,
            "lira_offline" => Method::LiraOffline(OfflineForm::Linear),
            "base_offline" => Method::BaseOffline,
            _ if t.starts_with("elsa") => Method::Elsa(t.parse()?),
            _ => {
                return Err(Error::Config(format!(
                    "unknown method {s:?}; expected one of {}",
                    Self::TOKENS.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig, SynthFamily};

    #[test]
    fn tokens_round_trip() {
        for tok in Method::TOKENS {
            let m: Method = tok.parse().unwrap();
            assert_eq!(&m.token(), tok);
        }
        assert!("lira2".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_runs_on_synthetic_data() {
        let cfg = SynthConfig {
            n_points: 40,
            k_shadows: 16,
            family: SynthFamily::Exponential,
            seed: 1,
            ..SynthConfig::default()
        };
        let (ds, _) = generate(&cfg).unwrap();
        let params = MethodParams::default();
        for tok in Method::TOKENS.iter().filter(|t| !t.ends_with("offline")) {
            let m: Method = tok.parse().unwrap();
            let run = m.run(&ds, &params).unwrap();
            assert!(run.report.failures.is_empty(), "{tok}");
            assert_eq!(run.report.scores.len(), 40);
            assert_eq!(run.notes.is_empty(), matches!(m.required_stat(), None | Some(StatisticKind::Loss)));
        }
    }

    #[test]
    fn offline_lira_requires_delta() {
        let cfg = SynthConfig { n_points: 5, k_shadows: 4, offline: true, ..SynthConfig::default() };
        let (ds, _) = generate(&cfg).unwrap();
        let m: Method = "lira_offline".parse().unwrap();
        assert!(matches!(m.run(&ds, &MethodParams::default()), Err(Error::Config(_))));
        let p = MethodParams { delta: Some(1.0), ..MethodParams::default() };
        assert_eq!(m.score(&ds, &p).unwrap().len(), 5);
    }
}
