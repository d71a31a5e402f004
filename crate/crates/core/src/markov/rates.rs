//! Blocking rates λ₀…λ₃, the normalizer r(ξ), and the g-test mass μ(Λ).

use crate::error::{invalid, Result};
use crate::quad::{adaptive, exp_coeff, power_series_tail};
use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_lr};

const REL_TOL: f64 = 1e-13;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        invalid(format!("alpha must lie in (1, 2), got {alpha}"))
    }
}

pub(crate) fn check_zeta(zeta: f64) -> Result<()> {
    if zeta >= 1.0 && zeta.is_finite() {
        Ok(())
    } else {
        invalid(format!("zeta must be a finite value >= 1, got {zeta}"))
    }
}

/// `∫_lo^∞ w(ξ) α ξ^{−α} dξ` for `w(ξ) = Σ_k c_k ξ^{−k}`: adaptive quadrature up
/// to `T = max(lo, 100·scale)` and the term-wise series beyond.
pub(crate) fn weighted_tail<W, C>(lo: f64, alpha: f64, w: W, coeff: C, scale: f64) -> f64
where
    W: Fn(f64) -> f64,
    C: Fn(usize) -> f64,
{
    let t = lo.max(100.0 * scale);
    let head = if t > lo { adaptive(|x| w(x) * alpha * x.powf(-alpha), lo, t, 0.0, REL_TOL).value } else { 0.0 };
    head + power_series_tail(alpha, t, coeff)
}

/// `∫_lo^hi w(ξ) α ξ^{−α} dξ`, integrated in `ln ξ`.
pub(crate) fn weighted_between<W: Fn(f64) -> f64>(lo: f64, hi: f64, alpha: f64, w: W) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    adaptive(|s| {
        let x = s.exp();
        w(x) * alpha * x.powf(1.0 - alpha)
    }, lo.ln(), hi.ln(), 0.0, REL_TOL)
    .value
}

fn w0(x: f64) -> f64 {
    (-2.0 / x).exp()
}

fn c0(k: usize) -> f64 {
    exp_coeff(2.0, k)
}

fn w1(x: f64) -> f64 {
    (-1.0 / x).exp() - (-2.0 / x).exp()
}

fn c1(k: usize) -> f64 {
    exp_coeff(1.0, k) - exp_coeff(2.0, k)
}

fn w2(x: f64) -> f64 {
    -(-1.0 / x).exp_m1()
}

fn c2(k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        -exp_coeff(1.0, k)
    }
}

/// λ_j(ζ) by quadrature (λ₃ in closed form).
pub fn lambda_j(zeta: f64, j: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    Ok(match j {
        0 => 0.5 * weighted_tail(zeta, alpha, w0, c0, 2.0),
        1 => 0.5 * weighted_tail(zeta, alpha, w1, c1, 2.0),
        2 => 0.5 * weighted_tail(zeta, alpha, w2, c2, 1.0) + 0.5 * zeta.powf(-alpha),
        3 => zeta.powf(-alpha),
        _ => return invalid(format!("rate index must be 0..=3, got {j}")),
    })
}

/// `∫_ζ^∞ e^{−c/ξ} α ξ^{−α} dξ = α c^{1−α} γ(α−1, c/ζ)`.
pub fn exp_weighted_closed(zeta: f64, c: f64, alpha: f64) -> f64 {
    let s = alpha - 1.0;
    alpha * c.powf(-s) * gamma(s) * gamma_lr(s, c / zeta)
}

/// λ₀…λ₃ through the lower incomplete gamma function.
pub fn lambdas_closed(zeta: f64, alpha: f64) -> [f64; 4] {
    let e1 = exp_weighted_closed(zeta, 1.0, alpha);
    let e2 = exp_weighted_closed(zeta, 2.0, alpha);
    let full = alpha / (alpha - 1.0) * zeta.powf(1.0 - alpha);
    [0.5 * e2, 0.5 * (e1 - e2), 0.5 * (full - e1) + 0.5 * zeta.powf(-alpha), zeta.powf(-alpha)]
}

/// `Σ_j λ_j(ζ) = α/(2(α−1)) ζ^{1−α} + 3/2 ζ^{−α}`.
pub fn lambda_sum(zeta: f64, alpha: f64) -> f64 {
    alpha / (2.0 * (alpha - 1.0)) * zeta.powf(1.0 - alpha) + 1.5 * zeta.powf(-alpha)
}

/// `r(ξ) = (Σ_j λ_j(ξ) + ξ^{−1})^{−1}`.
pub fn rate_scale(zeta: f64, alpha: f64) -> f64 {
    1.0 / (lambda_sum(zeta, alpha) + 1.0 / zeta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub alpha: f64,
    pub zeta: f64,
    pub lambda: [f64; 4],
    pub r_norm: f64,
}

impl RateTable {
    pub fn new(zeta: f64, alpha: f64) -> Result<Self> {
        let mut lambda = [0.0; 4];
        for (j, l) in lambda.iter_mut().enumerate() {
            *l = lambda_j(zeta, j, alpha)?;
        }
        let r_norm = 1.0 / (lambda.iter().sum::<f64>() + 1.0 / zeta);
        Ok(RateTable { alpha, zeta, lambda, r_norm })
    }

    pub fn total(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `λ₀/(Σλ_j + ζ^{−1})`.
    pub fn block_ratio(&self) -> f64 {
        self.lambda[0] * self.r_norm
    }
}

/// `(λ₀⁺, λ₀⁻)`: complete blocks stronger / weaker than `aζ`.
pub fn lambda0_split(zeta: f64, a: f64, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    if !(a > 1.0 && a.is_finite()) {
        return invalid(format!("split factor must exceed 1, got {a}"));
    }
    let plus = 0.5 * weighted_tail(a * zeta, alpha, w0, c0, 2.0);
    let minus = 0.5 * weighted_between(zeta, a * zeta, alpha, w0);
    Ok((plus, minus))
}

/// Probability that the channel of strength ζ is next blocked completely.
pub fn exact_block_ratio(zeta: f64, alpha: f64) -> Result<f64> {
    Ok(RateTable::new(zeta, alpha)?.block_ratio())
}

/// Smallest `c₁` with `λ₀/(Σλ + ζ^{−1}) ≥ e^{−2/ζ}(1 − c₁ ζ^{α−2})` on `grid`.
pub fn certify_c1(alpha: f64, grid: &[f64]) -> Result<f64> {
    let mut c = 0.0f64;
    for &z in grid {
        let ratio = exact_block_ratio(z, alpha)?;
        c = c.max((1.0 - ratio * (2.0 / z).exp()) * z.powf(2.0 - alpha));
    }
    Ok(c)
}

/// μ(Λ) for the g-test at strength ζ, by quadrature of the defining double integral.
pub fn g_mu(zeta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_zeta(zeta)?;
    let t = 1e3 * zeta;
    let strength = |f: &dyn Fn(f64) -> f64| {
        adaptive(|s| {
            let xi = s.exp();
            alpha * xi.powf(-alpha) * f(xi)
        }, zeta.ln(), t.ln(), 0.0, REL_TOL)
        .value
    };
    // Horizontal domains with base in (0, 1] × [−3, 0].
    let horizontal = 0.5 * 3.0 * (strength(&|_| 1.0) + t.powf(-alpha));
    // Vertical domains with base in (0, 1] × (−∞, 0] reaching height −2:
    // P(r ≥ (−2 − x²)₊/ξ) integrated over x².
    let reach = |xi: f64| {
        let depth = 40.0 * xi;
        2.0 + adaptive(|x2| ((2.0 + x2) / xi).exp(), -2.0 - depth, -2.0, 0.0, REL_TOL).value + xi * (-40.0f64).exp()
    };
    let vertical = 0.5 * (strength(&reach) + 2.0 * t.powf(-alpha) + alpha / (alpha - 1.0) * t.powf(1.0 - alpha));
    Ok(horizontal + vertical)
}

/// `μ(Λ) = 5/2 ζ^{−α} + α/(2(α−1)) ζ^{1−α}`.
pub fn g_mu_closed(zeta: f64, alpha: f64) -> f64 {
    2.5 * zeta.powf(-alpha) + alpha / (2.0 * (alpha - 1.0)) * zeta.powf(1.0 - alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GMass {
    pub zeta: f64,
    pub direction: u8,
    pub mu: f64,
    /// `e^{−μ(Λ)}`, the probability that the g-test passes.
    pub mass: f64,
}

/// Acceptance probability of the g-test; both directions share the value by symmetry.
pub fn g_mass(zeta: f64, direction: u8, alpha: f64) -> Result<GMass> {
    if direction != 1 && direction != 2 {
        return invalid(format!("direction must be 1 or 2, got {direction}"));
    }
    let mu = g_mu(zeta, alpha)?;
    Ok(GMass { zeta, direction, mu, mass: (-mu).exp() })
}

/// Smallest `c₂` with `μ(Λ) ≤ c₂ ζ^{1−α}` on `grid`.
pub fn certify_c2(alpha: f64, grid: &[f64]) -> Result<f64> {
    let mut c = 0.0f64;
    for &z in grid {
        c = c.max(g_mu(z, alpha)? * z.powf(alpha - 1.0));
    }
    Ok(c)
}

/// `(k₁, k₂)` with `k₁ ξ^{α−1} ≤ r(ξ) ≤ k₂ ξ^{α−1}` on `grid`.
pub fn r_bar_constants(alpha: f64, grid: &[f64]) -> (f64, f64) {
    grid.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &z| {
        let q = rate_scale(z, alpha) / z.powf(alpha - 1.0);
        (lo.min(q), hi.max(q))
    })
}

/// Logarithmic grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// CSV with columns `zeta,lambda0,lambda1,lambda2,lambda3,r,block_ratio,g_mass`.
pub fn rate_table_csv(alpha: f64, zetas: &[f64]) -> Result<String> {
    let mut out = String::from("zeta,lambda0,lambda1,lambda2,lambda3,r,block_ratio,g_mass\n");
    for &z in zetas {
        let t = RateTable::new(z, alpha)?;
        let g = g_mass(z, 1, alpha)?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            z, t.lambda[0], t.lambda[1], t.lambda[2], t.lambda[3], t.r_norm, t.block_ratio(), g.mass
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda3_closed_form() {
        let l3 = lambda_j(2.0, 3, 1.5).unwrap();
        assert!((l3 - 0.353_553_390_593_273_8).abs() < 1e-15);
        // Oracle: ½·2·∫_ζ^∞ α ξ^{−α−1} dξ by quadrature.
        let q = weighted_between(2.0, 2e8, 1.5, |x| 1.0 / x) + 1.5 * (2e8f64).powf(-1.5) / 1.5;
        assert!((q - l3).abs() < 1e-10);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for alpha in [1.1, 1.5, 1.9] {
            for z in [1.0, 1.7, 5.0, 30.0, 250.0] {
                let closed = lambdas_closed(z, alpha);
                for (j, c) in closed.iter().enumerate() {
                    let q = lambda_j(z, j, alpha).unwrap();
                    assert!((q - c).abs() < 1e-10 * c.max(1e-3), "alpha {alpha} z {z} j {j}: {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn rate_sum_identity() {
        for alpha in [1.2, 1.5, 1.8] {
            for z in [1.0, 2.0, 5.0, 10.0, 100.0] {
                let t = RateTable::new(z, alpha).unwrap();
                let s = lambda_sum(z, alpha);
                assert!((t.total() - s).abs() < 1e-10 * s, "alpha {alpha} z {z}");
                assert!((t.r_norm - rate_scale(z, alpha)).abs() < 1e-10 * t.r_norm);
            }
        }
    }

    #[test]
    fn rates_vanish_monotonically() {
        let grid = log_grid(1.0, 1e6, 30);
        for j in 0..4 {
            let v: Vec<f64> = grid.iter().map(|&z| lambda_j(z, j, 1.5).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] < w[0]), "j {j}");
            assert!(*v.last().unwrap() < 1e-2);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(lambda_j(0.5, 0, 1.5).is_err());
        assert!(lambda_j(2.0, 4, 1.5).is_err());
        assert!(lambda_j(2.0, 0, 2.0).is_err());
        assert!(lambda0_split(2.0, 1.0, 1.5).is_err());
        assert!(g_mass(2.0, 3, 1.5).is_err());
    }

    #[test]
    fn split_sums_to_lambda0() {
        for z in [1.0, 3.0, 40.0] {
            let l0 = lambda_j(z, 0, 1.5).unwrap();
            for a in [1.0 + 1e-9, 1.5, 4.0, 1e3, 1e8] {
                let (p, m) = lambda0_split(z, a, 1.5).unwrap();
                assert!((p + m - l0).abs() < 1e-10 * l0, "z {z} a {a}");
            }
            let (_, m) = lambda0_split(z, 1.0 + 1e-9, 1.5).unwrap();
            assert!(m < 1e-8);
            let (p, _) = lambda0_split(z, 1e12, 1.5).unwrap();
            assert!(p < 1e-5 * l0);
        }
    }

    #[test]
    fn block_ratio_bounds_and_limit() {
        for z in log_grid(1.0, 1e8, 25) {
            let r = exact_block_ratio(z, 1.5).unwrap();
            assert!(r > 0.0 && r < 1.0);
        }
        assert!(exact_block_ratio(1e12, 1.5).unwrap() > 0.999);
        let c1 = certify_c1(1.5, &log_grid(1.0, 1e6, 40)).unwrap();
        for z in log_grid(1.0, 1e6, 40) {
            let lhs = exact_block_ratio(z, 1.5).unwrap();
            assert!(lhs >= (-2.0 / z).exp() * (1.0 - c1 * z.powf(-0.5)) - 1e-14);
        }
    }

    #[test]
    fn g_mu_quadrature_matches_closed_form() {
        for alpha in [1.2, 1.5, 1.8] {
            for z in [1.0, 4.0, 100.0, 1e5] {
                let q = g_mu(z, alpha).unwrap();
                let c = g_mu_closed(z, alpha);
                assert!((q - c).abs() < 1e-9 * c, "alpha {alpha} z {z}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn g_mass_limits() {
        let g: Vec<f64> = log_grid(1.0, 1e10, 20).iter().map(|&z| g_mass(z, 1, 1.5).unwrap().mu).collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(g_mass(1e10, 2, 1.5).unwrap().mass > 0.9999);
        let c2 = certify_c2(1.5, &log_grid(1.0, 1e6, 30)).unwrap();
        assert!(c2 >= 1.5 && c2 <= 1.5 + 2.5);
    }

    #[test]
    fn r_bar_constants_bracket() {
        let grid = log_grid(1.0, 1e6, 50);
        let (k1, k2) = r_bar_constants(1.5, &grid);
        assert!(k1 > 0.0 && k2 < f64::INFINITY && k1 <= k2);
        for z in grid {
            let r = rate_scale(z, 1.5);
            assert!(r >= k1 * z.sqrt() * (1.0 - 1e-12) && r <= k2 * z.sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_table_shape() {
        let csv = rate_table_csv(1.5, &[1.0, 2.0]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 8);
    }

    proptest! {
        #[test]
        fn closed_sum_identity(z in 1.0..1e4f64, alpha in 1.05..1.95f64) {
            let l = lambdas_closed(z, alpha);
            let s = lambda_sum(z, alpha);
            prop_assert!((l.iter().sum::<f64>() - s).abs() < 1e-9 * s);
            prop_assert!(l.iter().all(|&x| x >= -1e-15));
        }
    }
}
