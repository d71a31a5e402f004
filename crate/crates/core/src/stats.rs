//! Goodness-of-fit and summary statistics used by the verification harness.

use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// Asymptotic 1% Kolmogorov quantile.
pub const KS_1PCT: f64 = 1.627_62;

/// Two-sided 1% normal quantile.
pub const Z_1PCT: f64 = 2.575_829_303_548_901;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
    pub passed: bool,
}

/// One-sample Kolmogorov–Smirnov test at the 1% level.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let n = samples.len();
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let critical = ks_critical(n);
    KsResult { n, statistic: d, critical, passed: n > 0 && d < critical }
}

/// 1% critical value with the Stephens finite-sample correction.
pub fn ks_critical(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    KS_1PCT / (s + 0.12 + 0.11 / s)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
    pub passed: bool,
}

/// Pearson goodness-of-fit. Adjacent bins are merged (left to right, the
/// remainder folded into the last bin) until each expected count is at least 5.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted_params: usize) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1 + fitted_params);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).map(|d| d.cdf(statistic)).unwrap_or(0.0)
    };
    ChiSquareResult { statistic, dof, p_value, bins: bins.len(), passed: dof > 0 && p_value > 0.01 }
}

/// Exact two-sided binomial test (probability of outcomes no more likely than `k`).
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> f64 {
    let Ok(b) = Binomial::new(p, n) else { return 0.0 };
    let pk = b.pmf(k);
    let mut total = 0.0;
    for j in 0..=n {
        let pj = b.pmf(j);
        if pj <= pk * (1.0 + 1e-7) {
            total += pj;
        }
    }
    total.min(1.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanSe {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { n, mean: f64::NAN, se: f64::NAN };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    MeanSe { n, mean, se: (var / nf).sqrt() }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated empirical quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    } else {
        v[i]
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return f64::NAN;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&ranks(xs), &ranks(ys))
}

/// Large-sample z-score of a correlation coefficient under independence.
pub fn correlation_z(rho: f64, n: usize) -> f64 {
    rho * ((n as f64) - 1.0).max(0.0).sqrt()
}

/// Rate estimate for right-censored exponential waiting times:
/// events divided by total exposure.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct CensoredRate {
    pub events: f64,
    pub exposure: f64,
}

impl CensoredRate {
    pub fn add(&mut self, time: f64, observed: bool) {
        self.exposure += time;
        if observed {
            self.events += 1.0;
        }
    }

    pub fn rate(&self) -> f64 {
        self.events / self.exposure
    }

    pub fn se(&self) -> f64 {
        self.events.sqrt() / self.exposure
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn ks_accepts_uniform_and_rejects_shift() {
        let mut r = rng::stream(3, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng::unit_open0(&mut r)).collect();
        assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)).passed);
        assert!(!ks_test(&xs, |x| (x * 1.05).clamp(0.0, 1.0)).passed);
    }

    #[test]
    fn ks_statistic_hand_example() {
        // Two points at 0.25 and 0.75 against U(0,1): D = 0.25.
        let r = ks_test(&[0.25, 0.75], |x| x);
        assert!((r.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chi_square_merges_small_bins() {
        let obs = [10.0, 1.0, 1.0, 1.0, 12.0];
        let exp = [10.0, 1.0, 2.0, 2.0, 10.0];
        let r = chi_square(&obs, &exp, 0);
        assert_eq!(r.bins, 3);
        assert_eq!(r.dof, 2);
        assert!(r.passed);
    }

    #[test]
    fn chi_square_known_value() {
        // statistic (20-25)^2/25 + (30-25)^2/25 = 2 on one dof: p = 0.1573.
        let r = chi_square(&[20.0, 30.0], &[25.0, 25.0], 0);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        assert!((r.p_value - 0.157_299_207).abs() < 1e-6);
    }

    #[test]
    fn binomial_symmetric_case() {
        let p = binomial_two_sided(5, 10, 0.5);
        assert!((p - 1.0).abs() < 1e-12);
        let p = binomial_two_sided(0, 10, 0.5);
        assert!((p - 2.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn censored_rate_estimate() {
        let mut c = CensoredRate::default();
        c.add(1.0, true);
        c.add(2.0, false);
        c.add(1.0, true);
        assert_eq!(c.rate(), 0.5);
    }

    #[test]
    fn spearman_of_monotone_map() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
    }
}
