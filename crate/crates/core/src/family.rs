//! Class-conditional fits and closed-form LLRs for the four exponential
//! families: Exponential and Gamma on the loss, Beta on the confidence and
//! Gaussian on the log-odds.
//!
//! Every LLR is `log p(z | IN) - log p(z | OUT)`, i.e. affine in the family's
//! sufficient statistics, and every function takes the OUT parameters first.
//! All LLRs are written as differences of per-class terms so that swapping the
//! two classes negates the score bit-for-bit.

use crate::error::{Error, Result};
use crate::numeric::{mean, mean_var, VARIANCE_FLOOR};
use crate::special::{digamma, ln_beta, ln_gamma, trigamma};

/// Gamma and Beta shape/scale estimates are clamped into this range.
pub const SHAPE_BOUNDS: (f64, f64) = (1e-3, 1e6);
/// Iteration cap for the Gamma and Beta Newton solvers.
pub const MAX_NEWTON_ITERS: usize = 100;
/// Residual the Gamma and Beta solvers must reach.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpParams {
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussParams {
    pub mean: f64,
    pub var: f64,
}

/// Parameter sharing imposed on a Gamma LLR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaConstraint {
    General,
    /// `scale_out == scale_in`: the LLR is affine in `ln l`.
    SharedScale,
    /// `shape_out == shape_in`: the LLR is affine in `l`.
    SharedShape,
}

fn clamp_shape(x: f64) -> f64 {
    x.clamp(SHAPE_BOUNDS.0, SHAPE_BOUNDS.1)
}

fn require_samples(samples: &[f64], min: usize, what: &str) -> Result<()> {
    if samples.len() < min {
        return Err(Error::InsufficientData(format!(
            "{what} fit needs at least {min} samples, got {}",
            samples.len()
        )));
    }
    Ok(())
}

fn check_domain(samples: &[f64], kind: &'static str, ok: impl Fn(f64) -> bool) -> Result<()> {
    match samples.iter().find(|&&x| !ok(x)) {
        Some(&x) => Err(Error::domain(x, kind)),
        None => Ok(()),
    }
}

fn require_distinct(samples: &[f64], what: &str) -> Result<()> {
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(Error::DegenerateSample(format!("{what} fit: all samples equal")));
    }
    Ok(())
}

/// Rate MLE `1 / mean(l)`.
pub fn fit_exponential(samples: &[f64]) -> Result<ExpParams> {
    require_samples(samples, 1, "exponential")?;
    check_domain(samples, "loss", |x| x.is_finite() && x > 0.0)?;
    Ok(ExpParams {
        rate: 1.0 / mean(samples),
    })
}

/// Shape residual `ln k - ψ(k) - (ln mean(l) - mean(ln l))` of the profile
/// likelihood; zero at the MLE.
pub fn gamma_shape_residual(shape: f64, log_mean_gap: f64) -> f64 {
    shape.ln() - digamma(shape) - log_mean_gap
}

/// Gamma MLE. Solves the profile-likelihood equation for the shape by damped
/// Newton from the method-of-moments start; the scale follows as
/// `mean / shape`.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaParams> {
    require_samples(samples, 2, "gamma")?;
    check_domain(samples, "loss", |x| x.is_finite() && x > 0.0)?;
    require_distinct(samples, "gamma")?;

    let (m, var) = mean_var(samples);
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let gap = m.ln() - mean(&logs);
    if gap <= 0.0 {
        // Jensen gap vanishes only for (numerically) constant samples.
        return Err(Error::DegenerateSample(format!(
            "gamma fit: log-mean gap {gap:e} is not positive"
        )));
    }

    // Profile log-likelihood per sample, up to a constant.
    let profile = |k: f64| (k - 1.0) * (-gap) - ln_gamma(k) + k * k.ln() - k;

    let mut k = m * m / var;
    if !k.is_finite() || k <= 0.0 {
        k = 1.0;
    }
    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let f = gamma_shape_residual(k, gap);
        if f.abs() < 1e-13 {
            converged = true;
            break;
        }
        let fp = 1.0 / k - trigamma(k);
        let step = -f / fp;
        let base = profile(k);
        let worse = |next: f64| {
            profile(next) < base - 1e-14 * base.abs().max(1.0)
                && !(f.abs() < 1e-6 && gamma_shape_residual(next, gap).abs() < f.abs())
        };
        let mut t = 1.0;
        let mut next = k + step;
        while (next <= 0.0 || worse(next)) && t > 1e-10 {
            t *= 0.5;
            next = k + t * step;
        }
        if next <= 0.0 {
            break;
        }
        if (next - k).abs() <= 1e-15 * k {
            k = next;
            converged = gamma_shape_residual(k, gap).abs() < SOLVER_TOLERANCE;
            break;
        }
        k = next;
        if k > SHAPE_BOUNDS.1 {
            break;
        }
    }
    let residual = gamma_shape_residual(k, gap);
    let shape = clamp_shape(k);
    if !converged && residual.abs() >= SOLVER_TOLERANCE && shape == k {
        return Err(Error::Numerical(format!(
            "gamma shape solver did not converge (residual {residual:e})"
        )));
    }
    Ok(GammaParams {
        shape,
        scale: clamp_shape(m / shape),
    })
}

/// Residuals of the two Beta score equations at `(alpha, beta)` given the
/// sample means of `ln p` and `ln(1 - p)`.
pub fn beta_residuals(alpha: f64, beta: f64, mean_ln_p: f64, mean_ln_q: f64) -> (f64, f64) {
    let d = digamma(alpha + beta);
    (
        digamma(alpha) - d - mean_ln_p,
        digamma(beta) - d - mean_ln_q,
    )
}

/// Starting point from probability-weighted moments: the zeroth PWM is the
/// mean, the first gives the L-scale `2 b1 - b0`, converted to a variance with
/// the Gaussian ratio `sd = sqrt(pi) * L-scale`. Falls back to ordinary
/// moments, then to `(1, 1)`.
fn beta_start(samples: &[f64]) -> (f64, f64) {
    let from_moments = |m: f64, v: f64| {
        let common = m * (1.0 - m) / v - 1.0;
        (common > 0.0 && common.is_finite()).then_some((m * common, (1.0 - m) * common))
    };
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b0 = mean(&sorted);
    let b1 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| i as f64 / (n - 1) as f64 * x)
        .sum::<f64>()
        / n as f64;
    let l2 = 2.0 * b1 - b0;
    let pwm_var = std::f64::consts::PI * l2 * l2;
    from_moments(b0, pwm_var)
        .or_else(|| {
            let (m, v) = mean_var(samples);
            from_moments(m, v)
        })
        .unwrap_or((1.0, 1.0))
}

/// Beta MLE by damped two-dimensional Newton on the (concave) likelihood.
pub fn fit_beta(samples: &[f64]) -> Result<BetaParams> {
    require_samples(samples, 2, "beta")?;
    check_domain(samples, "conf", |x| x > 0.0 && x < 1.0)?;
    require_distinct(samples, "beta")?;

    let g1 = mean(&samples.iter().map(|p| p.ln()).collect::<Vec<_>>());
    let g2 = mean(&samples.iter().map(|p| (-p).ln_1p()).collect::<Vec<_>>());
    let loglik = |a: f64, b: f64| (a - 1.0) * g1 + (b - 1.0) * g2 - ln_beta(a, b);

    let (mut a, mut b) = beta_start(samples);
    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let (r1, r2) = beta_residuals(a, b, g1, g2);
        if r1.abs().max(r2.abs()) < 1e-13 {
            converged = true;
            break;
        }
        // Gradient of the mean log-likelihood is -(r1, r2); Hessian is -J.
        let tab = trigamma(a + b);
        let j11 = trigamma(a) - tab;
        let j22 = trigamma(b) - tab;
        let j12 = -tab;
        let det = j11 * j22 - j12 * j12;
        let (da, db) = if det > 0.0 && det.is_finite() {
            ((-j22 * r1 + j12 * r2) / det, (j12 * r1 - j11 * r2) / det)
        } else {
            (-r1 * a, -r2 * b)
        };
        let base = loglik(a, b);
        let res = r1.abs().max(r2.abs());
        // Near the optimum the likelihood gain drops below rounding noise;
        // a step that shrinks the residual is then accepted on that merit.
        let worse = |na: f64, nb: f64| {
            if loglik(na, nb) >= base - 1e-14 * base.abs().max(1.0) {
                return false;
            }
            let (s1, s2) = beta_residuals(na, nb, g1, g2);
            !(res < 1e-6 && s1.abs().max(s2.abs()) < res)
        };
        let mut t = 1.0;
        let (mut na, mut nb) = (a + da, b + db);
        while (na <= 0.0 || nb <= 0.0 || worse(na, nb)) && t > 1e-10 {
            t *= 0.5;
            na = a + t * da;
            nb = b + t * db;
        }
        if na <= 0.0 || nb <= 0.0 {
            break;
        }
        let still = (na - a).abs() <= 1e-15 * a && (nb - b).abs() <= 1e-15 * b;
        a = na;
        b = nb;
        if still || a > SHAPE_BOUNDS.1 || b > SHAPE_BOUNDS.1 {
            let (r1, r2) = beta_residuals(a, b, g1, g2);
            converged = r1.abs().max(r2.abs()) < SOLVER_TOLERANCE;
            break;
        }
    }
    let (r1, r2) = beta_residuals(a, b, g1, g2);
    let (ca, cb) = (clamp_shape(a), clamp_shape(b));
    if !converged && r1.abs().max(r2.abs()) >= SOLVER_TOLERANCE && ca == a && cb == b {
        return Err(Error::Numerical(format!(
            "beta solver did not converge (residuals {r1:e}, {r2:e})"
        )));
    }
    Ok(BetaParams { alpha: ca, beta: cb })
}

/// Gaussian MLE: sample mean and biased variance, floored at
/// [`VARIANCE_FLOOR`].
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussParams> {
    require_samples(samples, 1, "gaussian")?;
    check_domain(samples, "logodds", f64::is_finite)?;
    let (mean, var) = mean_var(samples);
    Ok(GaussParams {
        mean,
        var: var.max(VARIANCE_FLOOR),
    })
}

/// `ln(rate_in / rate_out) - (rate_in - rate_out) * l`.
pub fn llr_exponential(loss: f64, out: ExpParams, in_: ExpParams) -> f64 {
    (in_.rate.ln() - out.rate.ln()) - (in_.rate - out.rate) * loss
}

fn approx_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Gamma LLR under the requested parameter sharing.
pub fn llr_gamma(loss: f64, out: GammaParams, in_: GammaParams, constraint: GammaConstraint) -> Result<f64> {
    match constraint {
        GammaConstraint::General => {
            let norm = |p: GammaParams| ln_gamma(p.shape) + p.shape * p.scale.ln();
            Ok((1.0 / out.scale - 1.0 / in_.scale) * loss + (in_.shape - out.shape) * loss.ln()
                - (norm(in_) - norm(out)))
        }
        GammaConstraint::SharedScale => {
            if !approx_eq(out.scale, in_.scale) {
                return Err(Error::Constraint(format!(
                    "shared-scale gamma LLR with scales {} and {}",
                    out.scale, in_.scale
                )));
            }
            let ln_scale = out.scale.ln();
            Ok((in_.shape - out.shape) * loss.ln()
                - ((ln_gamma(in_.shape) - ln_gamma(out.shape)) + (in_.shape - out.shape) * ln_scale))
        }
        GammaConstraint::SharedShape => {
            if !approx_eq(out.shape, in_.shape) {
                return Err(Error::Constraint(format!(
                    "shared-shape gamma LLR with shapes {} and {}",
                    out.shape, in_.shape
                )));
            }
            Ok((1.0 / out.scale - 1.0 / in_.scale) * loss - out.shape * (in_.scale.ln() - out.scale.ln()))
        }
    }
}

/// Beta LLR, affine in `(ln p, ln(1 - p))`.
pub fn llr_beta(p: f64, out: BetaParams, in_: BetaParams) -> f64 {
    (in_.alpha - out.alpha) * p.ln() + (in_.beta - out.beta) * (-p).ln_1p()
        - (ln_beta(in_.alpha, in_.beta) - ln_beta(out.alpha, out.beta))
}

/// Gaussian LLR. With bit-identical variances the equal-variance linear form
/// is used, so the quadratic terms cancel exactly.
pub fn llr_gaussian(z: f64, out: GaussParams, in_: GaussParams) -> f64 {
    if out.var == in_.var {
        return (in_.mean - out.mean) / out.var * (z - (in_.mean + out.mean) / 2.0);
    }
    let d0 = z - out.mean;
    let d1 = z - in_.mean;
    (d0 * d0 / (2.0 * out.var) - d1 * d1 / (2.0 * in_.var)) + 0.5 * (out.var.ln() - in_.var.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gauss(mean: f64, var: f64) -> GaussParams {
        GaussParams { mean, var }
    }

    #[test]
    fn exponential_fits() {
        assert_eq!(fit_exponential(&[1.0, 1.0, 1.0]).unwrap().rate, 1.0);
        assert_eq!(fit_exponential(&[0.5, 1.5]).unwrap().rate, 1.0);
        assert!((fit_exponential(&[2.0, 4.0]).unwrap().rate - 1.0 / 3.0).abs() < 1e-16);
        assert!(matches!(fit_exponential(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn exponential_llr_examples() {
        let (one, two) = (ExpParams { rate: 1.0 }, ExpParams { rate: 2.0 });
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(llr_exponential(0.0, one, two), ln2);
        assert!((llr_exponential(1.0, one, two) - (ln2 - 1.0)).abs() < 1e-15);
        for l in [0.1, 1.0, 7.0] {
            assert_eq!(llr_exponential(l, two, two), 0.0);
        }
    }

    #[test]
    fn gaussian_fits() {
        assert_eq!(fit_gaussian(&[0.0, 2.0]).unwrap(), gauss(1.0, 1.0));
        assert_eq!(fit_gaussian(&[1.0, 1.0, 1.0]).unwrap(), gauss(1.0, VARIANCE_FLOOR));
        assert_eq!(fit_gaussian(&[-3.5]).unwrap(), gauss(-3.5, VARIANCE_FLOOR));
        assert!(matches!(fit_gaussian(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gaussian_llr_examples() {
        assert_eq!(llr_gaussian(1.0, gauss(-1.0, 1.0), gauss(1.0, 1.0)), 2.0);
        assert_eq!(llr_gaussian(1.0, gauss(0.0, 1.0), gauss(2.0, 1.0)), 0.0);
        assert_eq!(llr_gaussian(0.3, gauss(0.1, 2.0), gauss(0.1, 2.0)), 0.0);
        // Unequal variances match the expanded formula.
        let v = llr_gaussian(0.5, gauss(0.0, 1.0), gauss(1.0, 4.0));
        let want = 0.125 - 0.25 / 8.0 + 0.5 * (1.0f64 / 4.0).ln();
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn gamma_degenerate_and_constraints() {
        assert!(matches!(fit_gamma(&[2.0, 2.0, 2.0]), Err(Error::DegenerateSample(_))));
        assert!(matches!(fit_gamma(&[2.0]), Err(Error::InsufficientData(_))));
        let a = GammaParams { shape: 2.0, scale: 1.0 };
        let b = GammaParams { shape: 3.0, scale: 2.0 };
        assert!(matches!(llr_gamma(1.0, a, b, GammaConstraint::SharedScale), Err(Error::Constraint(_))));
        assert!(matches!(llr_gamma(1.0, a, b, GammaConstraint::SharedShape), Err(Error::Constraint(_))));
        assert_eq!(llr_gamma(1.3, b, b, GammaConstraint::General).unwrap(), 0.0);
    }

    #[test]
    fn gamma_shared_shape_one_is_exponential() {
        let out = GammaParams { shape: 1.0, scale: 2.0 };
        let in_ = GammaParams { shape: 1.0, scale: 0.5 };
        for i in 1..50 {
            let l = i as f64 * 0.13;
            let g = llr_gamma(l, out, in_, GammaConstraint::SharedShape).unwrap();
            let e = llr_exponential(l, ExpParams { rate: 0.5 }, ExpParams { rate: 2.0 });
            assert!((g - e).abs() < 1e-14, "{l}: {g} vs {e}");
        }
    }

    #[test]
    fn gamma_fit_satisfies_first_moment_and_residual() {
        let xs = [0.3, 1.2, 0.8, 2.5, 0.05, 1.7, 0.9];
        let fit = fit_gamma(&xs).unwrap();
        let m = mean(&xs);
        assert!((fit.shape * fit.scale - m).abs() <= 1e-12 * m);
        let gap = m.ln() - mean(&xs.iter().map(|x| x.ln()).collect::<Vec<_>>());
        assert!(gamma_shape_residual(fit.shape, gap).abs() < SOLVER_TOLERANCE);
    }

    #[test]
    fn beta_fit_symmetric_and_degenerate() {
        let half = [0.1, 0.25, 0.3, 0.45];
        let xs: Vec<f64> = half.iter().flat_map(|&p| [p, 1.0 - p]).collect();
        let fit = fit_beta(&xs).unwrap();
        assert!((fit.alpha - fit.beta).abs() < 1e-8, "{fit:?}");
        assert!(matches!(fit_beta(&[0.5, 0.5, 0.5]), Err(Error::DegenerateSample(_))));
        assert!(matches!(fit_beta(&[0.5, 1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn beta_llr_zero_for_identical_params() {
        let p = BetaParams { alpha: 2.0, beta: 5.0 };
        assert_eq!(llr_beta(0.3, p, p), 0.0);
    }

    proptest! {
        #[test]
        fn swapping_classes_negates_every_llr(
            z in 0.01f64..0.99,
            a in 0.1f64..20.0, b in 0.1f64..20.0, c in 0.1f64..20.0, d in 0.1f64..20.0,
            mu0 in -5.0f64..5.0, mu1 in -5.0f64..5.0,
        ) {
            let (e0, e1) = (ExpParams { rate: a }, ExpParams { rate: b });
            prop_assert_eq!(llr_exponential(z, e0, e1), -llr_exponential(z, e1, e0));
            let (g0, g1) = (GammaParams { shape: a, scale: b }, GammaParams { shape: c, scale: d });
            prop_assert_eq!(
                llr_gamma(z, g0, g1, GammaConstraint::General).unwrap(),
                -llr_gamma(z, g1, g0, GammaConstraint::General).unwrap()
            );
            let (b0, b1) = (BetaParams { alpha: a, beta: b }, BetaParams { alpha: c, beta: d });
            prop_assert_eq!(llr_beta(z, b0, b1), -llr_beta(z, b1, b0));
            let (n0, n1) = (gauss(mu0, a), gauss(mu1, c));
            prop_assert_eq!(llr_gaussian(z, n0, n1), -llr_gaussian(z, n1, n0));
            let (n0, n1) = (gauss(mu0, a), gauss(mu1, a));
            prop_assert_eq!(llr_gaussian(z, n0, n1), -llr_gaussian(z, n1, n0));
        }

        #[test]
        fn llrs_are_affine_in_natural_parameters(
            z in 0.01f64..0.99,
            a in 0.1f64..20.0, b in 0.1f64..20.0, c in 0.1f64..20.0, d in 0.1f64..20.0,
            mu0 in -5.0f64..5.0, mu1 in -5.0f64..5.0,
        ) {
            // (eta_1 - eta_0) . T(z) - (A(eta_1) - A(eta_0))
            let natural = |eta0: &[f64], eta1: &[f64], t: &[f64], a0: f64, a1: f64| {
                eta0.iter().zip(eta1).zip(t).map(|((e0, e1), t)| (e1 - e0) * t).sum::<f64>() - (a1 - a0)
            };
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0);

            let want = natural(&[-a], &[-b], &[z], -a.ln(), -b.ln());
            let got = llr_exponential(z, ExpParams { rate: a }, ExpParams { rate: b });
            prop_assert!(close(got, want));

            let (g0, g1) = (GammaParams { shape: a, scale: b }, GammaParams { shape: c, scale: d });
            let want = natural(
                &[-1.0 / b, a - 1.0], &[-1.0 / d, c - 1.0], &[z, z.ln()],
                ln_gamma(a) + a * b.ln(), ln_gamma(c) + c * d.ln(),
            );
            prop_assert!(close(llr_gamma(z, g0, g1, GammaConstraint::General).unwrap(), want));

            let want = natural(
                &[a - 1.0, b - 1.0], &[c - 1.0, d - 1.0], &[z.ln(), (1.0 - z).ln()],
                ln_beta(a, b), ln_beta(c, d),
            );
            let got = llr_beta(z, BetaParams { alpha: a, beta: b }, BetaParams { alpha: c, beta: d });
            prop_assert!(close(got, want));

            let want = natural(
                &[mu0 / a, -0.5 / a], &[mu1 / c, -0.5 / c], &[z, z * z],
                mu0 * mu0 / (2.0 * a) + 0.5 * a.ln(), mu1 * mu1 / (2.0 * c) + 0.5 * c.ln(),
            );
            prop_assert!(close(llr_gaussian(z, gauss(mu0, a), gauss(mu1, c)), want));
        }

        #[test]
        fn fits_are_permutation_invariant(xs in proptest::collection::vec(0.01f64..0.99, 3..30)) {
            let mut rev = xs.clone();
            rev.reverse();
            if let (Ok(f), Ok(g)) = (fit_beta(&xs), fit_beta(&rev)) {
                prop_assert!((f.alpha - g.alpha).abs() <= 1e-9 * f.alpha);
                prop_assert!((f.beta - g.beta).abs() <= 1e-9 * f.beta);
            }
            if let (Ok(f), Ok(g)) = (fit_gamma(&xs), fit_gamma(&rev)) {
                prop_assert!((f.shape - g.shape).abs() <= 1e-9 * f.shape);
            }
        }
    }
}
