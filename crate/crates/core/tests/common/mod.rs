//! Shared statistics helpers for the integration suites.
#![allow(dead_code)]

/// Two-sided one-sample KS distance of sorted samples against a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic two-sided KS critical value at significance `level`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    ((2.0 / level).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Two-sample KS distance (both inputs sorted).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = ((2.0 / level).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance with a delete-1 jackknife standard error.
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let centered: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let s2: f64 = centered.iter().map(|c| c * c).sum();
    let var = s2 / (n - 1.0);
    let mut loo = Vec::with_capacity(xs.len());
    for c in &centered {
        // Leave-one-out variance from the centered sums.
        let s2_i = s2 - c * c;
        let mean_shift = -c / (n - 1.0);
        let var_i = (s2_i - (n - 1.0) * mean_shift * mean_shift) / (n - 2.0);
        loo.push(var_i);
    }
    let loo_mean = loo.iter().sum::<f64>() / n;
    let se2: f64 =
        loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum::<f64>() * (n - 1.0) / n;
    (var, se2.sqrt())
}

/// Covariance of paired samples with a delete-1 jackknife standard error.
pub fn covariance_and_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let cy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sxy: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    let sx: f64 = 0.0;
    let sy: f64 = 0.0;
    let cov = sxy / (n - 1.0);
    let np = n - 1.0;
    let mut loo = Vec::with_capacity(xs.len());
    for (a, b) in cx.iter().zip(&cy) {
        let c = (sxy - a * b - (sx - a) * (sy - b) / np) / (np - 1.0);
        loo.push(c);
    }
    let lm = loo.iter().sum::<f64>() / n;
    let se2: f64 = loo.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>() * (n - 1.0) / n;
    (cov, se2.sqrt())
}

/// Pearson chi-square statistic; `expected` given as probabilities.
pub fn chi_square_stat(observed: &[u64], probs: &[f64], total: u64) -> (f64, usize) {
    assert_eq!(observed.len(), probs.len());
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (o, p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e > 1e-12 {
            stat += (*o as f64 - e) * (*o as f64 - e) / e;
            dof += 1;
        }
    }
    (stat, dof.saturating_sub(1))
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_p(stat: f64, dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let d = ChiSquared::new(dof as f64).unwrap();
    1.0 - d.cdf(stat)
}

/// Least-squares slope of log|y| on log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    sxy / sxx
}
