//! Seeded synthetic audits with known per-point class-conditional laws.
//!
//! Every point draws from its own ChaCha stream, keyed by the seed and the
//! point index, so generation is parallel and reproducible. Stream part 0
//! holds the true parameters, the target membership and the target
//! statistic; part 1 holds the shadow membership shuffle and the shadow
//! statistics. Datasets generated with the same seed but different shadow
//! counts therefore share their truths and targets.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AuditDataset, PointRecord, StatisticKind};
use crate::error::{Error, Result};
use crate::family::{llr_exponential, llr_gaussian, ExpParams, GaussParams};
use crate::score::ScoreVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthFamily {
    /// Log-odds statistics, Gaussian per class.
    Gaussian,
    /// Loss statistics, exponential per class.
    Exponential,
}

impl std::str::FromStr for SynthFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::Config(format!("unknown synthetic family {other:?}"))),
        }
    }
}

/// Generator settings. Every field has a default; config files may set any
/// subset.
///
/// Gaussian points draw `mu0 ~ N(mu_out_mean, mu_out_sd²)`,
/// `mu1 = mu0 + LogNormal(ln shift_median, shift_log_sd)`,
/// `var0 = exp(N(log_var_mean, log_var_sd²))` and
/// `var1 = var0 * exp(N(log_var_ratio_mean, log_var_ratio_sd²))` (or
/// `var1 = var0` with `equal_variance`). Exponential points draw
/// `lam0 = exp(N(log_rate_mean, log_rate_sd²))` and
/// `lam1 = lam0 * (1 + LogNormal(ln rate_excess_median, rate_excess_log_sd))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_points: usize,
    pub k_shadows: usize,
    pub family: SynthFamily,
    pub in_fraction: f64,
    pub target_member_fraction: f64,
    pub offline: bool,
    pub seed: u64,

    pub mu_out_mean: f64,
    pub mu_out_sd: f64,
    pub shift_median: f64,
    pub shift_log_sd: f64,
    pub log_var_mean: f64,
    pub log_var_sd: f64,
    pub log_var_ratio_mean: f64,
    pub log_var_ratio_sd: f64,
    pub equal_variance: bool,

    pub log_rate_mean: f64,
    pub log_rate_sd: f64,
    pub rate_excess_median: f64,
    pub rate_excess_log_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_points: 1000,
            k_shadows: 64,
            family: SynthFamily::Gaussian,
            in_fraction: 0.5,
            target_member_fraction: 0.5,
            offline: false,
            seed: 0,
            mu_out_mean: 0.0,
            mu_out_sd: 2.0,
            shift_median: 1.0,
            shift_log_sd: 0.5,
            log_var_mean: 0.0,
            log_var_sd: 1.0,
            log_var_ratio_mean: -0.5,
            log_var_ratio_sd: 0.5,
            equal_variance: false,
            log_rate_mean: 0.0,
            log_rate_sd: 0.5,
            rate_excess_median: 1.0,
            rate_excess_log_sd: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(format!("synth config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn stat_kind(&self) -> StatisticKind {
        match self.family {
            SynthFamily::Gaussian => StatisticKind::LogOdds,
            SynthFamily::Exponential => StatisticKind::Loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("in_fraction", self.in_fraction)?;
        unit("target_member_fraction", self.target_member_fraction)?;
        for (name, v) in [
            ("mu_out_sd", self.mu_out_sd),
            ("shift_log_sd", self.shift_log_sd),
            ("log_var_sd", self.log_var_sd),
            ("log_var_ratio_sd", self.log_var_ratio_sd),
            ("log_rate_sd", self.log_rate_sd),
            ("rate_excess_log_sd", self.rate_excess_log_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [
            ("shift_median", self.shift_median),
            ("rate_excess_median", self.rate_excess_median),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and > 0")));
            }
        }
        for (name, v) in [
            ("mu_out_mean", self.mu_out_mean),
            ("log_var_mean", self.log_var_mean),
            ("log_var_ratio_mean", self.log_var_ratio_mean),
            ("log_rate_mean", self.log_rate_mean),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be finite")));
            }
        }
        Ok(())
    }
}

/// True class-conditional parameters of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrueParams {
    Gaussian { out: GaussParams, in_: GaussParams },
    Exponential { out: ExpParams, in_: ExpParams },
}

impl TrueParams {
    pub fn llr(&self, z: f64) -> f64 {
        match *self {
            TrueParams::Gaussian { out, in_ } => llr_gaussian(z, out, in_),
            TrueParams::Exponential { out, in_ } => llr_exponential(z, out, in_),
        }
    }
}

/// Generator ground truth, one entry per point in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub family: SynthFamily,
    pub point_ids: Vec<String>,
    pub params: Vec<TrueParams>,
    pub members: Vec<bool>,
    index: HashMap<String, usize>,
}

impl SynthTruth {
    pub fn new(
        family: SynthFamily,
        point_ids: Vec<String>,
        params: Vec<TrueParams>,
        members: Vec<bool>,
    ) -> Self {
        let index = point_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self {
            family,
            point_ids,
            params,
            members,
            index,
        }
    }

    pub fn params_of(&self, point_id: &str) -> Result<TrueParams> {
        self.index
            .get(point_id)
            .map(|&i| self.params[i])
            .ok_or_else(|| Error::UnknownPoint(point_id.to_string()))
    }

    /// Exact LLR under the point's true parameters.
    pub fn true_llr(&self, point_id: &str, z: f64) -> Result<f64> {
        Ok(self.params_of(point_id)?.llr(z))
    }

    /// True-LLR scores of every target statistic in `ds`.
    pub fn true_scores(&self, ds: &AuditDataset) -> Result<ScoreVector> {
        let scores = ds
            .points()
            .iter()
            .map(|p| self.true_llr(&p.point_id, p.target_stat))
            .collect::<Result<_>>()?;
        Ok(ScoreVector {
            method: "true-LLR".into(),
            config: String::new(),
            point_ids: ds.point_ids(),
            scores,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        match self.family {
            SynthFamily::Gaussian => out.write_record(["point_id", "mu0", "mu1", "var0", "var1", "member"]),
            SynthFamily::Exponential => out.write_record(["point_id", "lam0", "lam1", "member"]),
        }
        .map_err(io)?;
        for ((id, p), &m) in self.point_ids.iter().zip(&self.params).zip(&self.members) {
            let mut rec = vec![id.clone()];
            match *p {
                TrueParams::Gaussian { out, in_ } => rec.extend(
                    [out.mean, in_.mean, out.var, in_.var].iter().map(f64::to_string),
                ),
                TrueParams::Exponential { out, in_ } => {
                    rec.extend([out.rate, in_.rate].iter().map(f64::to_string))
                }
            }
            rec.push((m as u8).to_string());
            out.write_record(&rec).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let family = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["point_id", "mu0", "mu1", "var0", "var1", "member"] => SynthFamily::Gaussian,
            ["point_id", "lam0", "lam1", "member"] => SynthFamily::Exponential,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unrecognised truth header {header:?}"),
                })
            }
        };
        let (mut ids, mut params, mut members) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let num = |j: usize| -> Result<f64> {
                rec[j].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number {:?}", &rec[j]),
                })
            };
            ids.push(rec[0].to_string());
            let last = rec.len() - 1;
            params.push(match family {
                SynthFamily::Gaussian => TrueParams::Gaussian {
                    out: GaussParams { mean: num(1)?, var: num(3)? },
                    in_: GaussParams { mean: num(2)?, var: num(4)? },
                },
                SynthFamily::Exponential => TrueParams::Exponential {
                    out: ExpParams { rate: num(1)? },
                    in_: ExpParams { rate: num(2)? },
                },
            });
            members.push(match &rec[last] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("member must be 0 or 1, got {other:?}"),
                    })
                }
            });
        }
        Ok(Self::new(family, ids, params, members))
    }
}

fn stream(seed: u64, point: usize, part: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64 * 4 + part);
    rng
}

fn lognormal(rng: &mut ChaCha8Rng, log_mean: f64, log_sd: f64) -> f64 {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    (log_mean + log_sd * z).exp()
}

fn draw_params(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> TrueParams {
    match cfg.family {
        SynthFamily::Gaussian => {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let mu0 = cfg.mu_out_mean + cfg.mu_out_sd * z;
            let mu1 = mu0 + lognormal(rng, cfg.shift_median.ln(), cfg.shift_log_sd);
            let var0 = lognormal(rng, cfg.log_var_mean, cfg.log_var_sd);
            let ratio = lognormal(rng, cfg.log_var_ratio_mean, cfg.log_var_ratio_sd);
            let var1 = if cfg.equal_variance { var0 } else { var0 * ratio };
            TrueParams::Gaussian {
                out: GaussParams { mean: mu0, var: var0 },
                in_: GaussParams { mean: mu1, var: var1 },
            }
        }
        SynthFamily::Exponential => {
            let lam0 = lognormal(rng, cfg.log_rate_mean, cfg.log_rate_sd);
            let excess = lognormal(rng, cfg.rate_excess_median.ln(), cfg.rate_excess_log_sd);
            TrueParams::Exponential {
                out: ExpParams { rate: lam0 },
                in_: ExpParams { rate: lam0 * (1.0 + excess) },
            }
        }
    }
}

fn draw_stat(params: &TrueParams, member: bool, rng: &mut ChaCha8Rng) -> f64 {
    match *params {
        TrueParams::Gaussian { out, in_ } => {
            let g = if member { in_ } else { out };
            Normal::new(g.mean, g.var.sqrt()).expect("positive variance").sample(rng)
        }
        TrueParams::Exponential { out, in_ } => {
            let rate = if member { in_.rate } else { out.rate };
            // Loss stays strictly positive so the confidence is below 1.
            Exp::new(rate).expect("positive rate").sample(rng).max(f64::MIN_POSITIVE)
        }
    }
}

/// Generates a dataset (target membership included) and its ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<(AuditDataset, SynthTruth)> {
    cfg.validate()?;
    let k = cfg.k_shadows;
    let n_in = if cfg.offline {
        0
    } else {
        (k as f64 * cfg.in_fraction).round() as usize
    };
    let drawn: Vec<(PointRecord, TrueParams)> = (0..cfg.n_points)
        .into_par_iter()
        .map(|i| {
            let mut truth_rng = stream(cfg.seed, i, 0);
            let params = draw_params(cfg, &mut truth_rng);
            let member = truth_rng.random_bool(cfg.target_member_fraction);
            let target_stat = draw_stat(&params, member, &mut truth_rng);

            let mut shadow_rng = stream(cfg.seed, i, 1);
            let mut shadow_members: Vec<bool> = (0..k).map(|j| j < n_in).collect();
            shadow_members.shuffle(&mut shadow_rng);
            let shadow_stats = shadow_members
                .iter()
                .map(|&m| draw_stat(&params, m, &mut shadow_rng))
                .collect();
            let record = PointRecord {
                point_id: format!("p{i}"),
                target_stat,
                target_member: Some(member),
                shadow_stats,
                shadow_members,
            };
            (record, params)
        })
        .collect();
    let (points, params): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    let truth = SynthTruth::new(
        cfg.family,
        points.iter().map(|p| p.point_id.clone()).collect(),
        params,
        points.iter().map(|p| p.target_member == Some(true)).collect(),
    );
    Ok((AuditDataset::new(points, cfg.stat_kind())?, truth))
}
