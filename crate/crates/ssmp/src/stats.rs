//! Goodness-of-fit statistics used by the validator.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Asymptotic Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("KS test needs two non-empty samples".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok((d, ks_p_value(d, na * nb / (na + nb))))
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF, with p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<(f64, f64)> {
    if a.is_empty() {
        return Err(Error::Domain("KS test needs a non-empty sample".into()));
    }
    let a = sorted(a);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok((d, ks_p_value(d, n)))
}

/// Chi-square upper tail `P(χ²_df > stat)`.
pub fn chi_square_tail(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Pearson goodness of fit of observed counts to expected counts; bins with
/// expected count below 5 are pooled from the right. Returns `(stat, df, p)`.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> Result<(f64, f64, f64)> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::Domain("chi-square needs matching, non-empty bins".into()));
    }
    let (obs, exp) = pool(observed, expected);
    let stat: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = (obs.len() as f64 - 1.0).max(0.0);
    Ok((stat, df, chi_square_tail(stat, df)))
}

fn pool(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o_acc;
            *le += e_acc;
        } else {
            obs.push(o_acc);
            exp.push(e_acc);
        }
    }
    (obs, exp)
}

/// Chi-square homogeneity test of two samples of non-negative integer counts
/// (e.g. numbers of sign changes). Returns `(stat, df, p)`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("chi-square needs two non-empty samples".into()));
    }
    let top = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ha = vec![0.0; top + 1];
    let mut hb = vec![0.0; top + 1];
    a.iter().for_each(|&k| ha[k as usize] += 1.0);
    b.iter().for_each(|&k| hb[k as usize] += 1.0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    // pool bins until each expected cell count is at least 5
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for k in 0..=top {
        ca += ha[k];
        cb += hb[k];
        let tot = ca + cb;
        if tot * na.min(nb) / (na + nb) >= 5.0 {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(c) => {
                c.0 += ca;
                c.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let n = na + nb;
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let tot = x + y;
        let (ea, eb) = (tot * na / n, tot * nb / n);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = (cells.len() as f64 - 1.0).max(0.0);
    Ok((stat, df, chi_square_tail(stat, df)))
}

/// Mean and standard error of the mean.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares line through `(t_j, E[X_{t_j}])` estimated from per-path
/// rows `rows[i][j] = X^{(i)}_{t_j}`.
///
/// Slope and intercept are linear in each row, so their standard errors are
/// computed from per-path contributions and account for the correlation
/// between time points on the same path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
}

pub fn fit_line_over_paths(t: &[f64], rows: &[Vec<f64>]) -> Result<LineFit> {
    if t.len() < 2 || rows.len() < 2 {
        return Err(Error::Domain("line fit needs two time points and two paths".into()));
    }
    let k = t.len() as f64;
    let tbar = t.iter().sum::<f64>() / k;
    let sxx: f64 = t.iter().map(|x| (x - tbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Domain("time points must not all coincide".into()));
    }
    let w: Vec<f64> = t.iter().map(|x| (x - tbar) / sxx).collect();
    let slopes: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&w).map(|(x, w)| x * w).sum())
        .collect();
    let intercepts: Vec<f64> = rows
        .iter()
        .zip(&slopes)
        .map(|(r, b)| r.iter().sum::<f64>() / k - b * tbar)
        .collect();
    let (slope, slope_se) = mean_se(&slopes);
    let (intercept, intercept_se) = mean_se(&intercepts);
    Ok(LineFit { slope, slope_se, intercept, intercept_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, path_stream};
    use rand::Rng;

    #[test]
    fn identical_samples_have_zero_distance() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn shifted_uniforms_are_half_apart() {
        let mut rng = path_stream(1, 0);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| 0.5 + rng.random::<f64>()).collect();
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 0.02, "{d}");
        assert!(p < 1e-10);
    }

    #[test]
    fn empty_input_is_a_domain_error() {
        assert!(matches!(ks_two_sample(&[], &[1.0]), Err(Error::Domain(_))));
        assert!(ks_one_sample(&[], |x| x).is_err());
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // standard table values of the Kolmogorov distribution
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_tail(1.63) - 0.0098).abs() < 1e-3);
        assert!((kolmogorov_tail(1.0) - 0.2700).abs() < 1e-3);
    }

    #[test]
    fn one_sample_uniform_is_accepted() {
        let mut rng = path_stream(2, 0);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let (d, p) = ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.03);
        assert!(p > 0.001);
    }

    #[test]
    fn chi_square_accepts_fair_die() {
        let obs = [98.0, 103.0, 101.0, 97.0, 99.0, 102.0];
        let (stat, df, p) = chi_square_gof(&obs, &[100.0; 6]).unwrap();
        assert_eq!(df, 5.0);
        assert!((stat - 0.28).abs() < 1e-12);
        assert!(p > 0.99);
    }

    #[test]
    fn chi_square_tail_matches_table() {
        // 95th percentile of chi-square with 3 degrees of freedom
        assert!((chi_square_tail(7.814727903, 3.0) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn two_sample_counts_detect_difference() {
        let a: Vec<u64> = (0..2000).map(|i| (i % 3) as u64).collect();
        let b: Vec<u64> = (0..2000).map(|i| (i % 3) as u64).collect();
        assert!(chi_square_two_sample(&a, &b).unwrap().2 > 0.99);
        let c: Vec<u64> = (0..2000).map(|i| (i % 4) as u64).collect();
        assert!(chi_square_two_sample(&a, &c).unwrap().2 < 1e-6);
    }

    #[test]
    fn line_fit_recovers_brownian_square_slope() {
        // E[W_t^2] = t
        let t = [0.25, 0.5, 1.0];
        let rows: Vec<Vec<f64>> = (0..20_000)
            .map(|i| {
                let mut rng = path_stream(5, i);
                let mut w = 0.0;
                let mut prev = 0.0f64;
                t.iter()
                    .map(|&s| {
                        w += (s - prev).sqrt() * normal(&mut rng);
                        prev = s;
                        w * w
                    })
                    .collect()
            })
            .collect();
        let fit = fit_line_over_paths(&t, &rows).unwrap();
        assert!((fit.slope - 1.0).abs() < 4.0 * fit.slope_se);
        assert!(fit.intercept.abs() < 4.0 * fit.intercept_se);
    }
}
