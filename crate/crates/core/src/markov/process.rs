//! The killed Markov chain on strengths and its survival function.

use super::kernel::{sample_q, sample_q_ratio, KernelVariant};
use super::rates::{check_alpha, check_zeta, exact_block_ratio, g_mu_closed};
use crate::error::{invalid, Result};
use crate::par;
use crate::quad::adaptive;
use crate::rng::{exp1, stream, unit_open0, SimRng};
use crate::stats::{mean_se, MeanSe};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChainState {
    Live { zeta: f64, e: f64 },
    Delta,
}

/// Survival probability `p(ζ)` of one chain step.
pub trait PModel: Sync {
    fn p(&self, zeta: f64) -> f64;
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantP(pub f64);

impl PModel for ConstantP {
    fn p(&self, _zeta: f64) -> f64 {
        self.0.clamp(0.0, 1.0)
    }
}

/// Tabulated `p`, linear in `ln ζ` and held constant beyond the ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridP {
    pub zeta: Vec<f64>,
    pub p: Vec<f64>,
}

impl GridP {
    pub fn new(zeta: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if zeta.is_empty() || zeta.len() != p.len() {
            return invalid("p table needs matching, nonempty columns");
        }
        if zeta.windows(2).any(|w| !(w[0] < w[1])) || zeta[0] < 1.0 {
            return invalid("p table abscissae must increase from >= 1");
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return invalid("p table values must lie in [0, 1]");
        }
        Ok(GridP { zeta, p })
    }

    pub fn from_fn<F: Fn(f64) -> Result<f64>>(zeta: Vec<f64>, f: F) -> Result<Self> {
        let p = zeta.iter().map(|&z| f(z).map(|v| v.clamp(0.0, 1.0))).collect::<Result<Vec<_>>>()?;
        GridP::new(zeta, p)
    }
}

impl PModel for GridP {
    fn p(&self, zeta: f64) -> f64 {
        let k = self.zeta.partition_point(|&z| z <= zeta);
        if k == 0 {
            return self.p[0];
        }
        if k == self.zeta.len() {
            return self.p[k - 1];
        }
        let (z0, z1) = (self.zeta[k - 1].ln(), self.zeta[k].ln());
        let w = (zeta.ln() - z0) / (z1 - z0);
        self.p[k - 1] + w * (self.p[k] - self.p[k - 1])
    }
}

/// `E e^{−μ(ζ′)}` with `ζ′ ~ Q(ζ, ·)`, by quadrature after `x = c/ζ′`, `v = x^{α−1}`.
pub fn g_acceptance_mean(zeta: f64, alpha: f64, variant: KernelVariant) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    let (s, c) = (alpha - 1.0, variant.c());
    let hi = c / zeta;
    let norm = gamma(s) * gamma_lr(s, hi);
    let integrand = |v: f64| {
        if v <= 0.0 {
            return 1.0;
        }
        let x = v.powf(1.0 / s);
        (-g_mu_closed((c / x).max(zeta), alpha) - x).exp()
    };
    let q = adaptive(integrand, 0.0, hi.powf(s), 0.0, 1e-12);
    Ok((q.value / s / norm).min(1.0))
}

/// `p(ζ) = λ₀/(Σλ + ζ^{−1}) · E e^{−μ(ζ′)}`: complete blocking followed by an accepted g-test.
pub fn p_exact(zeta: f64, alpha: f64, variant: KernelVariant) -> Result<f64> {
    Ok(exact_block_ratio(zeta, alpha)? * g_acceptance_mean(zeta, alpha, variant)?)
}

/// Same as [`p_exact`] with the inner expectation by Monte Carlo.
pub fn p_exact_mc(zeta: f64, alpha: f64, variant: KernelVariant, samples: usize, seed: u64) -> Result<MeanSe> {
    let ratio = exact_block_ratio(zeta, alpha)?;
    let mut rng = stream(seed, 0);
    let xs: Vec<f64> = (0..samples)
        .map(|_| ratio * (-g_mu_closed(zeta * sample_q_ratio(zeta, alpha, variant, &mut rng), alpha)).exp())
        .collect();
    Ok(mean_se(&xs))
}

/// Lower-bound model `e^{−2/ζ}(1 − c₁ζ^{α−2})₊ · E e^{−c₂ W^{1−α}}`, `W ~ Q(ζ, ·)`.
pub fn p_lower(zeta: f64, c1: f64, c2: f64, mc_samples: usize, seed: u64, alpha: f64, variant: KernelVariant) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    if !(c1 > 0.0 && c2 > 0.0) {
        return invalid(format!("constants must be positive, got c1={c1}, c2={c2}"));
    }
    if mc_samples == 0 {
        return invalid("p_lower needs at least one sample");
    }
    let front = (-2.0 / zeta).exp() * (1.0 - c1 * zeta.powf(alpha - 2.0)).max(0.0);
    if front == 0.0 {
        return Ok(0.0);
    }
    let mut rng = stream(seed, 0);
    let sum: f64 = (0..mc_samples)
        .map(|_| {
            let w = zeta * sample_q_ratio(zeta, alpha, variant, &mut rng);
            (-c2 * w.powf(1.0 - alpha)).exp()
        })
        .sum();
    Ok((front * sum / mc_samples as f64).clamp(0.0, 1.0))
}

/// One step of the killed chain on `[1, ∞) × [0, ∞) ∪ {Δ}`.
pub fn transition_sample<P: PModel + ?Sized>(state: ChainState, p: &P, alpha: f64, variant: KernelVariant, rng: &mut SimRng) -> Result<ChainState> {
    let ChainState::Live { zeta, .. } = state else { return Ok(ChainState::Delta) };
    check_zeta(zeta)?;
    if unit_open0(rng) > p.p(zeta) {
        return Ok(ChainState::Delta);
    }
    let next = sample_q(zeta, alpha, variant, rng)?;
    Ok(ChainState::Live { zeta: next, e: exp1(rng) })
}

/// Strengths `W_0 = ζ, W_1, …, W_{n−1}` of an unkilled Q-chain.
pub fn q_chain(zeta: f64, n: usize, alpha: f64, variant: KernelVariant, rng: &mut SimRng) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut z = zeta;
    for _ in 0..n {
        w.push(z);
        if z.is_finite() {
            z *= sample_q_ratio(z, alpha, variant, rng);
        }
    }
    w
}

/// Monte Carlo estimate of `h_n(ζ) = E^ζ ∏_{j<n} p(W_j)`.
pub fn survival_estimate<P: PModel + ?Sized>(zeta: f64, n_trunc: usize, paths: usize, p: &P, seed: u64, alpha: f64, variant: KernelVariant) -> Result<MeanSe> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    if paths == 0 {
        return invalid("survival_estimate needs at least one path");
    }
    let prod = par::map_indices(paths, |i| {
        let mut rng = stream(seed, i as u64);
        q_chain(zeta, n_trunc, alpha, variant, &mut rng).iter().map(|&w| p.p(w)).product::<f64>()
    });
    Ok(mean_se(&prod))
}

#[derive(Clone, Debug, Serialize)]
pub struct DoobComparison {
    pub thresholds: Vec<f64>,
    /// `P(W_1/W_0 ≥ a)` under the importance-weighted Q-chain.
    pub weighted: Vec<MeanSe>,
    /// The same probabilities among surviving killed chains.
    pub conditioned: Vec<MeanSe>,
    pub survivors: usize,
}

/// Compares the first-step ratio law of the Doob-transformed chain (weights
/// `∏_{1≤j<n} p(W_j)`) with that of killed chains surviving `n` steps.
pub fn doob_compare<P: PModel + ?Sized>(zeta: f64, n: usize, paths: usize, p: &P, thresholds: &[f64], seed: u64, alpha: f64, variant: KernelVariant) -> Result<DoobComparison> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    if n < 2 || paths < 2 {
        return invalid("doob_compare needs n >= 2 and at least two paths");
    }
    let weighted_runs = par::map_indices(paths, |i| {
        let mut rng = stream(seed, 2 * i as u64);
        let w = q_chain(zeta, n, alpha, variant, &mut rng);
        (w[1] / w[0], w[1..].iter().map(|&x| p.p(x)).product::<f64>())
    });
    let killed_runs = par::map_indices(paths, |i| {
        let mut rng = stream(seed, 2 * i as u64 + 1);
        let mut state = ChainState::Live { zeta, e: 0.0 };
        let mut first = None;
        for _ in 0..n {
            state = transition_sample(state, p, alpha, variant, &mut rng).ok()?;
            if let ChainState::Live { zeta: z, .. } = state {
                first.get_or_insert(z / zeta);
            }
        }
        matches!(state, ChainState::Live { .. }).then_some(first).flatten()
    });
    let survivors: Vec<f64> = killed_runs.into_iter().flatten().collect();
    let total_w: f64 = weighted_runs.iter().map(|r| r.1).sum();
    let nf = paths as f64;
    let mut weighted = Vec::new();
    let mut conditioned = Vec::new();
    for &a in thresholds {
        let est = weighted_runs.iter().filter(|r| r.0 >= a).map(|r| r.1).sum::<f64>() / total_w;
        // Delta-method standard error of the self-normalized estimator.
        let wbar = total_w / nf;
        let var = weighted_runs.iter().map(|r| (r.1 * (f64::from(u8::from(r.0 >= a)) - est)).powi(2)).sum::<f64>() / (nf - 1.0);
        weighted.push(MeanSe { n: paths, mean: est, se: (var / nf).sqrt() / wbar });
        let hits: Vec<f64> = survivors.iter().map(|&r| f64::from(u8::from(r >= a))).collect();
        conditioned.push(mean_se(&hits));
    }
    Ok(DoobComparison { thresholds: thresholds.to_vec(), weighted, conditioned, survivors: survivors.len() })
}
