//! Audit datasets: one target statistic plus K labelled shadow statistics
//! per audited point, and the long-CSV file format they are stored in.
//!
//! ```text
//! point_id,model_id,stat,member
//! p0,0,0.91,1
//! p0,1,0.88,1
//! p0,2,0.42,0
//! ```
//!
//! `model_id` 0 is the target model; `member` may be empty only on target
//! rows. The statistic kind is not stored in the file.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Confidences are clamped to `[CONFIDENCE_CLAMP, 1 - CONFIDENCE_CLAMP]`
/// before any logarithm or logit is taken.
pub const CONFIDENCE_CLAMP: f64 = 1e-12;

const HEADER: [&str; 4] = ["point_id", "model_id", "stat", "member"];

/// Which scalar summary of the model output a dataset carries.
///
/// Under cross-entropy the three are monotone transforms of one another:
/// `loss = -ln p` and `log_odds = ln(p / (1 - p))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    Loss,
    Confidence,
    LogOdds,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Loss => "loss",
            StatisticKind::Confidence => "conf",
            StatisticKind::LogOdds => "logodds",
        }
    }

    /// Whether `value` lies in the open domain of this kind.
    pub fn contains(self, value: f64) -> bool {
        match self {
            StatisticKind::Loss => value.is_finite() && value > 0.0,
            StatisticKind::Confidence => value > 0.0 && value < 1.0,
            StatisticKind::LogOdds => value.is_finite(),
        }
    }

    fn check(self, value: f64) -> Result<()> {
        if self.contains(value) {
            Ok(())
        } else {
            Err(Error::domain(value, self.name()))
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loss" => Ok(StatisticKind::Loss),
            "conf" | "confidence" => Ok(StatisticKind::Confidence),
            "logodds" | "log-odds" | "logit" => Ok(StatisticKind::LogOdds),
            other => Err(Error::Config(format!(
                "unknown statistic kind {other:?} (expected loss, conf or logodds)"
            ))),
        }
    }
}

/// Converts one statistic value between kinds, clamping the implied
/// confidence to `[CONFIDENCE_CLAMP, 1 - CONFIDENCE_CLAMP]`.
pub fn convert_statistic(value: f64, from: StatisticKind, to: StatisticKind) -> Result<f64> {
    convert_statistic_clamped(value, from, to, CONFIDENCE_CLAMP)
}

/// [`convert_statistic`] with an explicit confidence clamp `eps`.
pub fn convert_statistic_clamped(
    value: f64,
    from: StatisticKind,
    to: StatisticKind,
    eps: f64,
) -> Result<f64> {
    use StatisticKind::*;
    if !value.is_finite() {
        return Err(Error::domain(value, from.name()));
    }
    from.check(value)?;
    if from == to {
        return Ok(value);
    }
    let out = match (from, to) {
        (Confidence, Loss) => -value.clamp(eps, 1.0 - eps).ln(),
        (Confidence, LogOdds) => logit(value.clamp(eps, 1.0 - eps)),
        (Loss, Confidence) => (-value).exp().clamp(eps, 1.0 - eps),
        (Loss, LogOdds) => {
            // p = e^{-l}; clamp l so that p stays inside [eps, 1 - eps].
            let l = value.clamp(-(-eps).ln_1p(), -eps.ln());
            -l - (-(-l).exp_m1()).ln()
        }
        (LogOdds, Confidence) => sigmoid(value).clamp(eps, 1.0 - eps),
        (LogOdds, Loss) => {
            let bound = ((1.0 - eps) / eps).ln();
            softplus(-value.clamp(-bound, bound))
        }
        _ => unreachable!(),
    };
    Ok(out)
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// One audited point: the target statistic and its labelled shadows.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub point_id: String,
    pub target_stat: f64,
    /// Ground truth for evaluation only; never read by scorers.
    pub target_member: Option<bool>,
    pub shadow_stats: Vec<f64>,
    /// `true` = the shadow model was trained on this point (IN).
    pub shadow_members: Vec<bool>,
}

impl PointRecord {
    /// Shadow statistics of one membership class.
    pub fn class_stats(&self, member: bool) -> Vec<f64> {
        self.shadow_stats
            .iter()
            .zip(&self.shadow_members)
            .filter(|(_, &m)| m == member)
            .map(|(&z, _)| z)
            .collect()
    }

    pub fn n_in(&self) -> usize {
        self.shadow_members.iter().filter(|&&m| m).count()
    }

    pub fn n_out(&self) -> usize {
        self.shadow_members.len() - self.n_in()
    }
}

/// A validated collection of [`PointRecord`]s sharing one statistic kind
/// and one shadow count `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDataset {
    points: Vec<PointRecord>,
    stat_kind: StatisticKind,
    k: usize,
}

impl AuditDataset {
    /// Validates shape and domain invariants.
    pub fn new(points: Vec<PointRecord>, stat_kind: StatisticKind) -> Result<Self> {
        let k = points.first().map_or(0, |p| p.shadow_stats.len());
        for p in &points {
            if p.shadow_stats.len() != p.shadow_members.len() {
                return Err(Error::Config(format!(
                    "point {}: {} shadow statistics but {} membership bits",
                    p.point_id,
                    p.shadow_stats.len(),
                    p.shadow_members.len()
                )));
            }
            if p.shadow_stats.len() != k {
                return Err(Error::RaggedRecord {
                    point_id: p.point_id.clone(),
                    expected: k,
                    found: p.shadow_stats.len(),
                });
            }
            for &z in std::iter::once(&p.target_stat).chain(&p.shadow_stats) {
                stat_kind.check(z).map_err(|e| e.with_point(&p.point_id))?;
            }
        }
        Ok(Self {
            points,
            stat_kind,
            k,
        })
    }

    pub fn empty(stat_kind: StatisticKind) -> Self {
        Self {
            points: Vec::new(),
            stat_kind,
            k: 0,
        }
    }

    pub fn points(&self) -> &[PointRecord] {
        &self.points
    }

    pub fn stat_kind(&self) -> StatisticKind {
        self.stat_kind
    }

    /// Number of shadow models per point.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_ids(&self) -> Vec<String> {
        self.points.iter().map(|p| p.point_id.clone()).collect()
    }

    /// True when no shadow model was trained on any audited point.
    pub fn is_offline(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.shadow_members.iter().all(|&m| !m))
    }

    /// Ground-truth labels, if every point carries one.
    pub fn labels(&self) -> Option<Vec<bool>> {
        self.points.iter().map(|p| p.target_member).collect()
    }

    /// The same dataset with ground-truth target membership removed.
    pub fn without_labels(mut self) -> Self {
        for p in &mut self.points {
            p.target_member = None;
        }
        self
    }

    pub fn into_points(self) -> Vec<PointRecord> {
        self.points
    }
}

/// Applies [`convert_statistic`] to every statistic in the dataset.
pub fn convert_dataset(ds: &AuditDataset, to: StatisticKind) -> Result<AuditDataset> {
    convert_dataset_clamped(ds, to, CONFIDENCE_CLAMP)
}

pub fn convert_dataset_clamped(ds: &AuditDataset, to: StatisticKind, eps: f64) -> Result<AuditDataset> {
    let from = ds.stat_kind;
    let conv = |z: f64, id: &str| convert_statistic_clamped(z, from, to, eps).map_err(|e| e.with_point(id));
    let points = ds
        .points
        .iter()
        .map(|p| {
            Ok(PointRecord {
                point_id: p.point_id.clone(),
                target_stat: conv(p.target_stat, &p.point_id)?,
                target_member: p.target_member,
                shadow_stats: p
                    .shadow_stats
                    .iter()
                    .map(|&z| conv(z, &p.point_id))
                    .collect::<Result<_>>()?,
                shadow_members: p.shadow_members.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditDataset {
        points,
        stat_kind: to,
        k: ds.k,
    })
}

/// Converts only when the kind differs; borrows otherwise.
pub(crate) fn ensure_kind(
    ds: &AuditDataset,
    kind: StatisticKind,
) -> Result<std::borrow::Cow<'_, AuditDataset>> {
    if ds.stat_kind == kind {
        Ok(std::borrow::Cow::Borrowed(ds))
    } else {
        Ok(std::borrow::Cow::Owned(convert_dataset(ds, kind)?))
    }
}

pub fn load_dataset(path: impl AsRef<Path>, stat_kind: StatisticKind) -> Result<AuditDataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_dataset(std::io::BufReader::new(file), stat_kind)
}

#[derive(Default)]
struct PendingPoint {
    id: String,
    first_line: u64,
    target: Option<(f64, Option<bool>)>,
    shadows: Vec<(u64, f64, bool)>,
}

/// Parses the long-CSV format.
pub fn read_dataset<R: Read>(reader: R, stat_kind: StatisticKind) -> Result<AuditDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", HEADER.join(","), header),
        });
    }

    let mut order: Vec<PendingPoint> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<(usize, u64), u64> = HashMap::new();

    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let perr = |message: String| Error::Parse { line, message };
        let point_id = rec[0].trim().to_string();
        if point_id.is_empty() {
            return Err(perr("empty point_id".into()));
        }
        let model_id: u64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| perr(format!("invalid model_id {:?}", &rec[1])))?;
        let stat: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| perr(format!("invalid stat {:?}", &rec[2])))?;
        let member = match rec[3].trim() {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(perr(format!("invalid member {other:?} (expected 0, 1 or empty)"))),
        };
        if stat_kind.check(stat).is_err() {
            return Err(Error::Domain {
                value: stat,
                kind: stat_kind.name(),
                point_id: Some(point_id),
            });
        }
        let slot = *index.entry(point_id.clone()).or_insert_with(|| {
            order.push(PendingPoint {
                id: point_id.clone(),
                first_line: line,
                ..Default::default()
            });
            order.len() - 1
        });
        if let Some(prev) = seen.insert((slot, model_id), line) {
            return Err(perr(format!(
                "duplicate entry for point {point_id}, model {model_id} (first seen on line {prev})"
            )));
        }
        let pending = &mut order[slot];
        if model_id == 0 {
            pending.target = Some((stat, member));
        } else {
            let m = member.ok_or_else(|| perr("member may only be empty for model_id 0".into()))?;
            pending.shadows.push((model_id, stat, m));
        }
    }

    let mut points = Vec::with_capacity(order.len());
    for mut p in order {
        let (target_stat, target_member) = p.target.ok_or_else(|| Error::Parse {
            line: p.first_line,
            message: format!("point {} has no target row (model_id 0)", p.id),
        })?;
        p.shadows.sort_by_key(|s| s.0);
        points.push(PointRecord {
            point_id: p.id,
            target_stat,
            target_member,
            shadow_stats: p.shadows.iter().map(|s| s.1).collect(),
            shadow_members: p.shadows.iter().map(|s| s.2).collect(),
        });
    }
    AuditDataset::new(points, stat_kind)
}

/// Writes the long-CSV format; shadows are numbered `1..=k` in order.
/// Values use the shortest representation that round-trips exactly.
pub fn write_dataset<W: Write>(ds: &AuditDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for p in &ds.points {
        let member = match p.target_member {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([p.point_id.as_str(), "0", &p.target_stat.to_string(), member])
            .map_err(io)?;
        for (k, (z, m)) in p.shadow_stats.iter().zip(&p.shadow_members).enumerate() {
            w.write_record([
                p.point_id.as_str(),
                &(k + 1).to_string(),
                &z.to_string(),
                if *m { "1" } else { "0" },
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
