//! The strength kernel Q(ζ, ·) and its Pareto coupling.

use super::rates::{check_alpha, check_zeta, weighted_tail};
use crate::error::{invalid, Result};
use crate::quad::exp_coeff;
use crate::rng::{pareto, unit_open0, SimRng};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

/// Exponent in the tail weight `e^{−c/ξ}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelVariant {
    /// `c = 2`, matching the complete-block rate λ₀.
    #[default]
    Block,
    /// `c = 1`.
    Strength,
}

impl KernelVariant {
    pub fn c(self) -> f64 {
        match self {
            KernelVariant::Block => 2.0,
            KernelVariant::Strength => 1.0,
        }
    }
}

fn check_a(a: f64) -> Result<()> {
    if a >= 1.0 && !a.is_nan() {
        Ok(())
    } else {
        invalid(format!("kernel ratio must be >= 1, got {a}"))
    }
}

fn tail(lo: f64, alpha: f64, c: f64) -> f64 {
    weighted_tail(lo, alpha, |x| (-c / x).exp(), |k| exp_coeff(c, k), c)
}

/// `Q(ζ, [aζ, ∞))` as the ratio of two tail integrals.
pub fn q_tail(zeta: f64, a: f64, alpha: f64, variant: KernelVariant) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    check_a(a)?;
    if a == 1.0 {
        return Ok(1.0);
    }
    if a.is_infinite() {
        return Ok(0.0);
    }
    let c = variant.c();
    Ok((tail(a * zeta, alpha, c) / tail(zeta, alpha, c)).min(1.0))
}

/// `Q(ζ, [aζ, ∞)) = P(α−1, c/(aζ)) / P(α−1, c/ζ)` with `P` the regularized lower incomplete gamma.
pub fn q_tail_closed(zeta: f64, a: f64, alpha: f64, variant: KernelVariant) -> f64 {
    let (s, c) = (alpha - 1.0, variant.c());
    if a.is_infinite() {
        return 0.0;
    }
    (gamma_lr(s, c / (a * zeta)) / gamma_lr(s, c / zeta)).min(1.0)
}

/// Solves `P(s, x) = target` on `(0, hi]` by Newton iteration in `ln x`, safeguarded by bisection.
fn invert_lower_gamma(s: f64, target: f64, hi: f64) -> f64 {
    let gs = gamma(s);
    let mut lo = ((target * gamma(s + 1.0)).powf(1.0 / s)).min(hi).ln();
    let mut up = hi.ln();
    let lt = target.ln();
    let mut y = 0.5 * (lo + up);
    for _ in 0..200 {
        let x = y.exp();
        let p = gamma_lr(s, x);
        let f = p.ln() - lt;
        if f > 0.0 {
            up = y;
        } else {
            lo = y;
        }
        if f.abs() < 1e-14 || up - lo < 1e-13 {
            break;
        }
        let slope = (s * y - x).exp() / (gs * p);
        let next = y - f / slope;
        y = if next > lo && next < up && slope.is_finite() { next } else { 0.5 * (lo + up) };
    }
    y.exp()
}

/// Draws the ratio `a = ζ′/ζ` with `ζ′ ~ Q(ζ, ·)` by inversion of the tail.
pub fn sample_q_ratio(zeta: f64, alpha: f64, variant: KernelVariant, rng: &mut SimRng) -> f64 {
    let (s, c) = (alpha - 1.0, variant.c());
    let hi = c / zeta;
    let u = unit_open0(rng);
    if u >= 1.0 {
        return 1.0;
    }
    let x = invert_lower_gamma(s, u * gamma_lr(s, hi), hi);
    (c / (x * zeta)).max(1.0)
}

/// `ζ′ ~ Q(ζ, ·)`.
pub fn sample_q(zeta: f64, alpha: f64, variant: KernelVariant, rng: &mut SimRng) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    Ok(zeta * sample_q_ratio(zeta, alpha, variant, rng))
}

/// Rejection sampler for the same ratio: `Par(α−1)` proposals accepted with probability `e^{−c/(aζ)}`.
pub fn sample_q_rejection(zeta: f64, alpha: f64, variant: KernelVariant, rng: &mut SimRng) -> f64 {
    loop {
        let a = pareto(rng, alpha - 1.0);
        if unit_open0(rng) <= (-variant.c() / (a * zeta)).exp() {
            return a;
        }
    }
}

/// CDF-matching transport of `ζ′/ζ` onto `Par(α−1)`: `χ = Q(ζ, [ζ′, ∞))^{−1/(α−1)}`, never above `ζ′/ζ`.
pub fn couple_pareto(zeta: f64, zeta_next: f64, alpha: f64, variant: KernelVariant) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    if !(zeta_next >= zeta) {
        return invalid(format!("zeta_next {zeta_next} must be >= zeta {zeta}"));
    }
    let s = alpha - 1.0;
    let a = zeta_next / zeta;
    let q = q_tail_closed(zeta, a, alpha, variant);
    let excess = (a.powf(s) * q).max(1.0);
    Ok((a * excess.powf(-1.0 / s)).max(1.0))
}
