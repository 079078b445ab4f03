//! Per-point ridge logistic regression on a fixed feature map of the
//! confidence (ELSA).
//!
//! For each point, the shadow confidences are mapped to
//! `[1, ln(-ln p), ln p, ln(1-p), φ², p, p²]` (plus the log-odds `φ` itself
//! as an optional composite feature) and a logistic model of membership is
//! fitted. The fitted log-odds at the target confidence, minus the prior
//! log-odds absorbed by the intercept, is an LLR estimate up to a per-point
//! constant; we report the fitted linear predictor itself.
//!
//! Active non-intercept features are z-scored over the point's shadows before
//! fitting so that the ridge penalty treats them on one scale. The penalty is
//! `λ ‖w̃‖²` on the standardized non-intercept weights; reported weights are
//! mapped back to the raw features.

use std::fmt;
use std::str::FromStr;

use crate::data::{ensure_kind, AuditDataset, PointRecord, StatisticKind, CONFIDENCE_CLAMP};
use crate::error::{Error, Result};
use crate::numeric::{mean_var, CompensatedSum};
use crate::score::{score_points, ScoreReport, ScoreVector};

pub const N_FEATURES: usize = 8;
/// Index of the composite log-odds feature.
pub const PHI: usize = 7;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const MAX_ITERS: usize = 100;
pub const GRAD_TOLERANCE: f64 = 1e-8;

/// `[1, ln(-ln p), ln p, ln(1-p), φ², p, p², φ]` with `p` clamped into the
/// open unit interval.
pub fn feature_map(p: f64) -> [f64; N_FEATURES] {
    let p = p.clamp(CONFIDENCE_CLAMP, 1.0 - CONFIDENCE_CLAMP);
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let phi = lp - lq;
    [1.0, (-lp).ln(), lp, lq, phi * phi, p, p * p, phi]
}

/// Active features as a bitset over the [`feature_map`] indices. The
/// intercept (bit 0) is always set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const ELSA1: Self = Self(0b1);
    pub const ELSA2_PHI: Self = Self(0b1000_0001);
    pub const ELSA3_BETA: Self = Self(0b1101);
    pub const ELSA3_GAMMA: Self = Self(0b111);
    pub const ELSA3_PHI: Self = Self(0b1001_0001);
    pub const FULL: Self = Self(0b111_1111);

    /// Mask from feature indices; the intercept is added.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 1u8;
        for &i in indices {
            if i >= N_FEATURES {
                return Err(Error::Config(format!("feature index {i} out of range")));
            }
            bits |= 1 << i;
        }
        Ok(Self(bits))
    }

    pub fn contains(self, i: usize) -> bool {
        i < N_FEATURES && self.0 & (1 << i) != 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..N_FEATURES).filter(|&i| self.contains(i)).collect()
    }

    pub fn name(self) -> String {
        match self {
            Self::ELSA1 => "ELSA1".into(),
            Self::ELSA2_PHI => "ELSA2φ".into(),
            Self::ELSA3_BETA => "ELSA3β".into(),
            Self::ELSA3_GAMMA => "ELSA3γ".into(),
            Self::ELSA3_PHI => "ELSA3φ".into(),
            Self::FULL => "ELSA-full".into(),
            Self(bits) => format!("ELSA[{bits:#010b}]"),
        }
    }

    pub fn token(self) -> Option<&'static str> {
        Some(match self {
            Self::ELSA1 => "elsa1",
            Self::ELSA2_PHI => "elsa2phi",
            Self::ELSA3_BETA => "elsa3beta",
            Self::ELSA3_GAMMA => "elsa3gamma",
            Self::ELSA3_PHI => "elsa3phi",
            Self::FULL => "elsafull",
            _ => return None,
        })
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "elsa1" => Self::ELSA1,
            "elsa2phi" => Self::ELSA2_PHI,
            "elsa3beta" => Self::ELSA3_BETA,
            "elsa3gamma" => Self::ELSA3_GAMMA,
            "elsa3phi" => Self::ELSA3_PHI,
            "elsafull" | "elsa" => Self::FULL,
            other => return Err(Error::Config(format!("unknown ELSA mask {other:?}"))),
        })
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A fitted per-point model.
#[derive(Debug, Clone, PartialEq)]
pub struct ElsaWeights {
    /// Raw-feature coefficients; inactive or dropped features are exactly 0.
    pub weights: [f64; N_FEATURES],
    pub lambda: f64,
    pub mask: FeatureMask,
    pub iterations: usize,
    /// Gradient norm of the standardized objective at the solution.
    pub grad_norm: f64,
    /// Per-feature standardization `(center, scale)`, `(0, 1)` if unused.
    pub center: [f64; N_FEATURES],
    pub scale: [f64; N_FEATURES],
    std_weights: Vec<f64>,
    cols: Vec<usize>,
}

impl ElsaWeights {
    /// Linear predictor at confidence `p`.
    pub fn score(&self, p: f64) -> f64 {
        let x = feature_map(p);
        let mut s = self.std_weights[0];
        for (w, &j) in self.std_weights[1..].iter().zip(&self.cols) {
            s += w * (x[j] - self.center[j]) / self.scale[j];
        }
        s
    }
}

fn sigmoid(x: f64) -> f64 {
    crate::data::sigmoid(x)
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Problem {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    lambda: f64,
}

impl Problem {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn eta(&self, w: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(w).map(|(x, w)| x * w).sum())
            .collect()
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let nll: CompensatedSum = self
            .eta(w)
            .iter()
            .zip(&self.y)
            .map(|(&e, &y)| softplus(e) - y * e)
            .collect();
        nll.value() + self.lambda * w[1..].iter().map(|v| v * v).sum::<f64>()
    }

    fn grad_hess(&self, w: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.dim();
        let mut g = vec![CompensatedSum::new(); d];
        let mut h = vec![vec![0.0; d]; d];
        for (r, (&e, &y)) in self.rows.iter().zip(self.eta(w).iter().zip(&self.y)) {
            let p = sigmoid(e);
            let wt = p * (1.0 - p);
            for a in 0..d {
                g[a].add((p - y) * r[a]);
                for b in 0..=a {
                    h[a][b] += wt * r[a] * r[b];
                }
            }
        }
        let mut g: Vec<f64> = g.iter().map(CompensatedSum::value).collect();
        for a in 1..d {
            g[a] += 2.0 * self.lambda * w[a];
            h[a][a] += 2.0 * self.lambda;
        }
        for a in 0..d {
            for b in a + 1..d {
                h[a][b] = h[b][a];
            }
        }
        (g, h)
    }
}

/// Solves `H x = g` by Cholesky; `None` unless `H` is positive definite.
fn cholesky_solve(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = h[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-300 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (g[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the penalized logistic model on one point's shadows.
pub fn fit_elsa(point: &PointRecord, lambda: f64, mask: FeatureMask) -> Result<ElsaWeights> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge strength {lambda} must be finite and >= 0")));
    }
    let n_in = point.n_in();
    for (class, missing) in [(1u8, n_in == 0), (0u8, n_in == point.shadow_members.len())] {
        if missing {
            return Err(Error::MissingClass {
                point_id: point.point_id.clone(),
                class,
            });
        }
    }
    let feats: Vec<[f64; N_FEATURES]> = point.shadow_stats.iter().map(|&p| feature_map(p)).collect();
    let mut center = [0.0; N_FEATURES];
    let mut scale = [1.0; N_FEATURES];
    let mut cols = Vec::new();
    for j in mask.indices().into_iter().filter(|&j| j != 0) {
        let col: Vec<f64> = feats.iter().map(|f| f[j]).collect();
        let (m, v) = mean_var(&col);
        let sd = v.sqrt();
        if sd > 1e-12 * m.abs().max(1.0) {
            center[j] = m;
            scale[j] = sd;
            cols.push(j);
        }
    }
    let rows = feats
        .iter()
        .map(|f| {
            std::iter::once(1.0)
                .chain(cols.iter().map(|&j| (f[j] - center[j]) / scale[j]))
                .collect()
        })
        .collect();
    let y = point.shadow_members.iter().map(|&m| m as u8 as f64).collect();
    let prob = Problem { rows, y, lambda };

    let rate = n_in as f64 / point.shadow_members.len() as f64;
    let mut w = vec![0.0; prob.dim()];
    w[0] = (rate / (1.0 - rate)).ln();
    let mut f = prob.objective(&w);
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < MAX_ITERS {
        let (g, h) = prob.grad_hess(&w);
        grad_norm = norm(&g);
        if grad_norm < GRAD_TOLERANCE {
            break;
        }
        iterations += 1;
        let step = cholesky_solve(&h, &g).unwrap_or_else(|| g.clone());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(w, s)| w - t * s).collect();
            let fc = prob.objective(&cand);
            if fc <= f + 1e-14 * f.abs() {
                w = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if grad_norm >= GRAD_TOLERANCE {
        let (g, _) = prob.grad_hess(&w);
        grad_norm = norm(&g);
    }
    // Without a penalty, strictly separable shadows have no finite optimum:
    // the gradient can still fall below tolerance as the weights run off.
    let separated = lambda == 0.0 && {
        let eta = prob.eta(&w);
        let lo_in = eta.iter().zip(&prob.y).filter(|e| *e.1 == 1.0).map(|e| *e.0).fold(f64::INFINITY, f64::min);
        let hi_out = eta.iter().zip(&prob.y).filter(|e| *e.1 == 0.0).map(|e| *e.0).fold(f64::NEG_INFINITY, f64::max);
        lo_in > hi_out
    };
    if separated || !(grad_norm < GRAD_TOLERANCE) || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "ELSA fit for point {} did not converge (gradient norm {grad_norm:.3e} after {iterations} \
             iterations); use a ridge strength > 0",
            point.point_id
        )));
    }

    let mut weights = [0.0; N_FEATURES];
    weights[0] = w[0];
    for (wj, &j) in w[1..].iter().zip(&cols) {
        weights[j] = wj / scale[j];
        weights[0] -= wj * center[j] / scale[j];
    }
    Ok(ElsaWeights {
        weights,
        lambda,
        mask,
        iterations,
        grad_norm,
        center,
        scale,
        std_weights: w,
        cols,
    })
}

pub fn elsa_report(ds: &AuditDataset, lambda: f64, mask: FeatureMask) -> Result<ScoreReport> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge strength {lambda} must be finite and >= 0")));
    }
    let conf = ensure_kind(ds, StatisticKind::Confidence)?;
    Ok(score_points(&conf, &mask.name(), format!("lambda={lambda}"), |p| {
        Ok(fit_elsa(p, lambda, mask)?.score(p.target_stat))
    }))
}

/// Fits each point and evaluates at its target confidence. Non-confidence
/// datasets are converted first.
pub fn score_elsa(ds: &AuditDataset, lambda: f64, mask: FeatureMask) -> Result<ScoreVector> {
    elsa_report(ds, lambda, mask)?.into_scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(shadows: &[(f64, bool)]) -> PointRecord {
        PointRecord {
            point_id: "x".into(),
            target_stat: 0.5,
            target_member: None,
            shadow_stats: shadows.iter().map(|s| s.0).collect(),
            shadow_members: shadows.iter().map(|s| s.1).collect(),
        }
    }

    fn random_point(seed: u64, k: usize, shift: f64) -> PointRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shadows: Vec<(f64, bool)> = (0..k)
            .map(|i| {
                let m = i % 2 == 0;
                let phi: f64 = rng.random_range(-2.0..2.0) + if m { shift } else { 0.0 };
                (crate::data::sigmoid(phi), m)
            })
            .collect();
        point(&shadows)
    }

    #[test]
    fn feature_map_examples() {
        let f = feature_map(0.5);
        let want = [1.0, -0.366_512_920_581_664_3, -std::f64::consts::LN_2, -std::f64::consts::LN_2, 0.0, 0.5, 0.25];
        for i in 0..7 {
            assert!((f[i] - want[i]).abs() < 1e-15, "feature {i}");
        }
        assert!(feature_map((-1.0f64).exp())[1].abs() < 1e-15);
        for p in [0.1, 0.37, 0.9] {
            assert!((feature_map(p)[4] - feature_map(1.0 - p)[4]).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_tokens() {
        for tok in ["elsa1", "elsa2phi", "elsa3beta", "elsa3gamma", "elsa3phi", "elsafull"] {
            let m: FeatureMask = tok.parse().unwrap();
            assert_eq!(m.token(), Some(tok));
            assert!(m.contains(0));
        }
        assert_eq!(FeatureMask::ELSA2_PHI.indices(), vec![0, PHI]);
        assert_eq!(FeatureMask::ELSA3_BETA.indices(), vec![0, 2, 3]);
        assert!("elsa9".parse::<FeatureMask>().is_err());
    }

    #[test]
    fn single_class_is_missing_class() {
        let p = point(&[(0.3, false), (0.6, false)]);
        assert!(matches!(fit_elsa(&p, 1.0, FeatureMask::FULL), Err(Error::MissingClass { class: 1, .. })));
    }

    #[test]
    fn intercept_only_recovers_base_rate() {
        let p = point(&[(0.3, true), (0.6, false), (0.2, false), (0.9, false)]);
        let w = fit_elsa(&p, 1.0, FeatureMask::ELSA1).unwrap();
        assert!((w.weights[0] - (1.0f64 / 3.0).ln()).abs() < 1e-9);
        assert_eq!(w.score(0.01), w.score(0.99));
    }

    #[test]
    fn uninformative_features_and_base_rate() {
        // Same confidences in both classes.
        let ps = [0.1, 0.35, 0.6, 0.8, 0.95];
        let shadows: Vec<(f64, bool)> = ps.iter().flat_map(|&p| [(p, true), (p, false), (p, false)]).collect();
        let p = point(&shadows);
        for lambda in [0.5, 5.0, 50.0] {
            let w = fit_elsa(&p, lambda, FeatureMask::FULL).unwrap();
            let mean_prob: f64 = shadows.iter().map(|s| sigmoid(w.score(s.0))).sum::<f64>() / shadows.len() as f64;
            assert!((mean_prob - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_data_has_zero_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut shadows = Vec::new();
        for _ in 0..20 {
            let phi: f64 = rng.random_range(0.1..3.0);
            shadows.push((crate::data::sigmoid(phi), true));
            shadows.push((crate::data::sigmoid(-phi), false));
        }
        let w = fit_elsa(&point(&shadows), 1.0, FeatureMask::ELSA2_PHI).unwrap();
        assert!(w.std_weights[0].abs() < 1e-6);
        assert!(w.weights[PHI] > 0.0);
    }

    #[test]
    fn inactive_weights_are_zero() {
        let p = random_point(3, 40, 1.0);
        let w = fit_elsa(&p, 1.0, FeatureMask::ELSA3_BETA).unwrap();
        for i in [1, 4, 5, 6, PHI] {
            assert_eq!(w.weights[i], 0.0);
        }
    }

    #[test]
    fn separable_without_ridge_fails_to_converge() {
        let p = point(&[(0.9, true), (0.95, true), (0.1, false), (0.2, false)]);
        let err = fit_elsa(&p, 0.0, FeatureMask::ELSA2_PHI).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("ridge")));
        assert!(fit_elsa(&p, 1.0, FeatureMask::ELSA2_PHI).is_ok());
    }

    // Independent oracle: plain gradient descent on the same objective,
    // written from raw features with its own standardization.
    fn oracle_objective(p: &PointRecord, lambda: f64, cols: &[usize], w0: f64, w: &[f64]) -> f64 {
        let feats: Vec<[f64; N_FEATURES]> = p.shadow_stats.iter().map(|&c| feature_map(c)).collect();
        let stats: Vec<(f64, f64)> = cols
            .iter()
            .map(|&j| {
                let n = feats.len() as f64;
                let m = feats.iter().map(|f| f[j]).sum::<f64>() / n;
                let v = feats.iter().map(|f| (f[j] - m).powi(2)).sum::<f64>() / n;
                (m, v.sqrt())
            })
            .collect();
        let mut obj = 0.0;
        for (f, &y) in feats.iter().zip(&p.shadow_members) {
            let mut eta = w0;
            for ((&j, &(m, s)), &wj) in cols.iter().zip(&stats).zip(w) {
                eta += wj * (f[j] - m) / s;
            }
            obj += (1.0 + eta.exp()).ln() - if y { eta } else { 0.0 };
        }
        obj + lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let p = random_point(5, 30, 1.2);
        let lambda = 2.0;
        let mask = FeatureMask::ELSA3_BETA;
        let cols = [2usize, 3];
        let fit = fit_elsa(&p, lambda, mask).unwrap();

        let (mut w0, mut w) = (0.0, vec![0.0; cols.len()]);
        let h = 1e-6;
        let lr = 0.01;
        for _ in 0..100_000 {
            let f = oracle_objective(&p, lambda, &cols, w0, &w);
            let g0 = (oracle_objective(&p, lambda, &cols, w0 + h, &w) - f) / h;
            let mut g = vec![0.0; w.len()];
            for i in 0..w.len() {
                let mut wp = w.clone();
                wp[i] += h;
                g[i] = (oracle_objective(&p, lambda, &cols, w0, &wp) - f) / h;
            }
            w0 -= lr * g0;
            for i in 0..w.len() {
                w[i] -= lr * g[i];
            }
        }
        let oracle = oracle_objective(&p, lambda, &cols, w0, &w);
        let ours: Vec<f64> = cols.iter().map(|&j| fit.weights[j] * fit.scale[j]).collect();
        let ours0 = fit.weights[0] + cols.iter().map(|&j| fit.weights[j] * fit.center[j]).sum::<f64>();
        let mine = oracle_objective(&p, lambda, &cols, ours0, &ours);
        assert!(mine <= oracle + 1e-6, "ours {mine}, oracle {oracle}");
        assert!((mine - oracle).abs() < 1e-6);
    }

    #[test]
    fn ridge_shrinks_weights_monotonically() {
        let p = random_point(9, 32, 1.5);
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let w = fit_elsa(&p, lambda, FeatureMask::FULL).unwrap();
            let n = norm(&w.std_weights[1..]);
            assert!(n <= prev + 1e-12);
            prev = n;
        }
    }

    proptest! {
        #[test]
        fn fits_are_order_invariant_and_optimal(seed in 0u64..1000, shift in -2.0f64..2.0) {
            let p = random_point(seed, 24, shift);
            let mut q = p.clone();
            q.shadow_stats.reverse();
            q.shadow_members.reverse();
            let a = fit_elsa(&p, 1.0, FeatureMask::FULL).unwrap();
            let b = fit_elsa(&q, 1.0, FeatureMask::FULL).unwrap();
            prop_assert!(a.grad_norm < GRAD_TOLERANCE);
            prop_assert!((a.score(0.3) - b.score(0.3)).abs() < 1e-7);
        }
    }
}
