//! Chaos diagnostics: 1-D Wasserstein distances, pair covariances, the
//! Kuramoto order parameter and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `W_p` between two equal-size samples via order statistics, `p ∈ {1, 2}`.
pub fn wasserstein_1d(a: &[f64], b: &[f64], p: u32) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("wasserstein of an empty sample".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "sample sizes differ ({} vs {}); resample first",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let n = a.len() as f64;
    match p {
        1 => Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n),
        2 => Ok((sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()),
        _ => Err(Error::InvalidInput(format!("p must be 1 or 2, got {p}"))),
    }
}

/// Empirical quantiles of `a` at `m` equally spaced levels, so that samples of
/// different sizes can be compared with [`wasserstein_1d`].
pub fn resample_quantiles(a: &[f64], m: usize) -> Vec<f64> {
    let s = sorted(a);
    let n = s.len();
    (0..m)
        .map(|k| {
            let u = (k as f64 + 0.5) / m as f64;
            s[((u * n as f64) as usize).min(n - 1)]
        })
        .collect()
}

/// Sample covariance across replicas of `(φ(X¹), φ(X²))`; `first[r]` and
/// `second[r]` are the two particles' states in replica `r`.
pub fn pair_covariance(first: &[f64], second: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    let r = first.len().min(second.len());
    if r < 2 {
        return 0.0;
    }
    let a: Vec<f64> = first[..r].iter().map(|&x| phi(x)).collect();
    let b: Vec<f64> = second[..r].iter().map(|&x| phi(x)).collect();
    let ma = a.iter().sum::<f64>() / r as f64;
    let mb = b.iter().sum::<f64>() / r as f64;
    a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (r as f64 - 1.0)
}

/// Pair covariance estimated from all ordered pairs `i ≠ j` of every replica,
/// using exchangeability: `E[φ(Z¹)φ(Z²)] − E[φ(Z¹)]²`.
///
/// `replicas[r]` holds the scalar observable inputs of every particle in
/// replica `r`.
pub fn pooled_pair_covariance(replicas: &[Vec<f64>], phi: impl Fn(f64) -> f64) -> f64 {
    let mut cross = 0.0;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut used = 0usize;
    for rep in replicas {
        let n = rep.len();
        if n < 2 {
            continue;
        }
        let vals: Vec<f64> = rep.iter().map(|&x| phi(x)).collect();
        let s: f64 = vals.iter().sum();
        let s2: f64 = vals.iter().map(|v| v * v).sum();
        cross += (s * s - s2) / (n as f64 * (n as f64 - 1.0));
        total += s;
        count += n;
        used += 1;
    }
    if used == 0 {
        return 0.0;
    }
    let mean = total / count as f64;
    cross / used as f64 - mean * mean
}

/// `|(1/N) Σ exp(iθ)|`.
pub fn kuramoto_order_parameter(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let (c, s) = phases.iter().fold((0.0, 0.0), |(c, s), t| (c + t.cos(), s + t.sin()));
    let n = phases.len() as f64;
    ((c / n).powi(2) + (s / n).powi(2)).sqrt().min(1.0)
}

/// Sample excess kurtosis `m4 / m2² − 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Two-sided Kolmogorov–Smirnov statistic of `xs` against a continuous CDF.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(xs);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `c(α)/√n` for α ∈ {0.05, 0.01, 0.001}.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if alpha <= 0.001 {
        1.949
    } else if alpha <= 0.01 {
        1.628
    } else {
        1.358
    };
    c / (n as f64).sqrt()
}

/// Least-squares fit of `log error` against `log N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(log N, log error)` pairs.
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(errors: &[(usize, f64)]) -> Result<RateFit> {
    let mut ns: Vec<usize> = errors.iter().map(|e| e.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs >= 3 distinct N, got {}",
            ns.len()
        )));
    }
    if let Some((n, e)) = errors.iter().find(|(_, e)| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput(format!("non-positive error {e} at N = {n}")));
    }
    let points: Vec<(f64, f64)> = errors.iter().map(|&(n, e)| ((n as f64).ln(), e.ln())).collect();
    let (slope, intercept, r2) = least_squares(&points);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        points,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;
    use proptest::prelude::*;

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[0.0], &[1.0], 1).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[3.0, 1.0], &[1.0, 3.0], 2).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[0.0, 2.0], 1).unwrap(), 1.0);
        assert!(wasserstein_1d(&[], &[], 1).is_err());
        assert!(wasserstein_1d(&[1.0], &[1.0, 2.0], 1).is_err());
        assert!(wasserstein_1d(&[1.0], &[1.0], 3).is_err());
    }

    #[test]
    fn resampling_keeps_distribution() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let q = resample_quantiles(&a, 10);
        assert_eq!(q.len(), 10);
        assert_eq!(q[0], 50.0);
        assert_eq!(q[9], 950.0);
    }

    #[test]
    fn pair_covariance_examples() {
        assert_eq!(pair_covariance(&[2.0; 50], &[2.0; 50], |x| x), 0.0);
        let mut r = make_rng(11, 0);
        let xs: Vec<f64> = (0..4000).map(|_| r.gaussian()).collect();
        let c = pair_covariance(&xs, &xs, |x| x);
        assert!((c - 1.0).abs() < 3.0 / (4000f64).sqrt(), "{c}");
        assert_eq!(pair_covariance(&xs, &xs, |_| 0.5), 0.0);
    }

    #[test]
    fn pooled_covariance_of_centered_sums() {
        // each replica sums to zero exactly: Cov(Z1, Z2) = −Var/(N−1)
        let mut r = make_rng(12, 0);
        let n = 20;
        let reps: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let mut v: Vec<f64> = (0..n).map(|_| r.gaussian()).collect();
                let m = v.iter().sum::<f64>() / n as f64;
                v.iter_mut().for_each(|x| *x -= m);
                v
            })
            .collect();
        let c = pooled_pair_covariance(&reps, |x| x);
        let expect = -(1.0 - 1.0 / n as f64) / (n as f64 - 1.0);
        assert!((c - expect).abs() < 0.1 * expect.abs(), "{c} vs {expect}");
    }

    #[test]
    fn order_parameter_examples() {
        assert!((kuramoto_order_parameter(&[0.3; 7]) - 1.0).abs() < 1e-15);
        assert!(kuramoto_order_parameter(&[0.0, std::f64::consts::PI]) < 1e-15);
        let r = kuramoto_order_parameter(&[0.0, std::f64::consts::FRAC_PI_2]);
        assert!((r - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fit_exact_power_laws() {
        let f = fit_rate(&[(10, 1.0), (100, 0.1), (1000, 0.01)]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let errs: Vec<(usize, f64)> = [50, 200, 800].iter().map(|&n| (n, 3.0 / (n as f64).sqrt())).collect();
        assert!((fit_rate(&errs).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_noisy_power_law() {
        let mut r = make_rng(13, 0);
        let errs: Vec<(usize, f64)> = [50, 100, 200, 400, 800]
            .iter()
            .map(|&n| (n, 2.0 / n as f64 * (1.0 + 0.05 * r.uniform_range(-1.0, 1.0))))
            .collect();
        assert!((fit_rate(&errs).unwrap().slope + 1.0).abs() < 0.1);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_rate(&[(10, 1.0), (100, 0.1)]).is_err());
        assert!(fit_rate(&[(10, 1.0), (100, 0.0), (1000, 0.1)]).is_err());
        assert!(fit_rate(&[(10, 1.0), (10, 0.5), (100, 0.1)]).is_err());
    }

    #[test]
    fn ks_detects_uniform() {
        let mut r = make_rng(14, 0);
        let xs: Vec<f64> = (0..5000).map(|_| r.uniform()).collect();
        assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) < ks_critical(5000, 0.01));
        assert!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0).powi(2)) > ks_critical(5000, 0.01));
    }

    #[test]
    fn kurtosis_of_gaussian() {
        let mut r = make_rng(15, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| r.gaussian()).collect();
        assert!(excess_kurtosis(&xs).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(
            a in prop::collection::vec(-100f64..100.0, 8),
            b in prop::collection::vec(-100f64..100.0, 8),
            c in prop::collection::vec(-100f64..100.0, 8),
        ) {
            for p in [1, 2] {
                let ab = wasserstein_1d(&a, &b, p).unwrap();
                let ba = wasserstein_1d(&b, &a, p).unwrap();
                prop_assert_eq!(ab, ba);
                let ac = wasserstein_1d(&a, &c, p).unwrap();
                let cb = wasserstein_1d(&c, &b, p).unwrap();
                prop_assert!(ab <= ac + cb + 1e-12);
            }
        }

        #[test]
        fn wasserstein_translation(a in prop::collection::vec(-100f64..100.0, 1..30), c in -50f64..50.0) {
            let b: Vec<f64> = a.iter().map(|x| x + c).collect();
            let w = wasserstein_1d(&a, &b, 1).unwrap();
            prop_assert!((w - c.abs()).abs() < 1e-9);
        }

        #[test]
        fn fit_scale_invariant(e in prop::collection::vec(1e-3f64..10.0, 4), s in 1e-3f64..1e3) {
            let ns = [10usize, 20, 40, 80];
            let a: Vec<(usize, f64)> = ns.iter().copied().zip(e.iter().copied()).collect();
            let b: Vec<(usize, f64)> = ns.iter().copied().zip(e.iter().map(|v| v * s)).collect();
            let fa = fit_rate(&a).unwrap();
            let fb = fit_rate(&b).unwrap();
            prop_assert!((fa.slope - fb.slope).abs() < 1e-9);
        }
    }
}
