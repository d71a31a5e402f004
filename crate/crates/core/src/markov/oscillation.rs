//! The oscillation statistic F_m along a Pareto-coupled chain.

use super::rates::check_alpha;
use crate::error::{invalid, Result};
use crate::rng::{exp1, pareto, stream};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FPath {
    /// `F_1, …, F_{m_max}`.
    pub f: Vec<f64>,
    pub running_min: Vec<f64>,
}

/// `G_k = (G_{k−1} + e_k) χ_k^{1−α}` with `G_0 = 0`, `χ_k ~ Par(α−1)`, `e_k ~ Exp(1)`; `F_m = G_{2m}`.
pub fn simulate_f(m_max: usize, alpha: f64, seed: u64) -> Result<FPath> {
    check_alpha(alpha)?;
    if m_max == 0 {
        return invalid("m_max must be at least 1");
    }
    let mut rng = stream(seed, 0);
    let mut g = 0.0;
    let mut f = Vec::with_capacity(m_max);
    let mut running_min = Vec::with_capacity(m_max);
    let mut low = f64::INFINITY;
    for _ in 0..m_max {
        for _ in 0..2 {
            let e = exp1(&mut rng);
            let chi = pareto(&mut rng, alpha - 1.0);
            g = (g + e) * chi.powf(1.0 - alpha);
        }
        low = low.min(g);
        f.push(g);
        running_min.push(low);
    }
    Ok(FPath { f, running_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;
    use crate::stats::{mean_se, median};

    #[test]
    fn first_term_formula() {
        let p = simulate_f(1, 1.5, 9).unwrap();
        let mut r = stream(9, 0);
        let (e1, c1) = (exp1(&mut r), pareto(&mut r, 0.5));
        let (e2, c2) = (exp1(&mut r), pareto(&mut r, 0.5));
        let expect = (e1 + c1.powf(0.5) * e2) / (c1 * c2).powf(0.5);
        assert!((p.f[0] - expect).abs() < 1e-12 * expect);
        assert!(p.f[0] > 0.0);
    }

    #[test]
    fn mean_is_bounded() {
        let paths: Vec<FPath> = (0..4000).map(|i| simulate_f(20, 1.5, derive_seed(3, i)).unwrap()).collect();
        for m in [1usize, 5, 20] {
            let xs: Vec<f64> = paths.iter().map(|p| p.f[m - 1]).collect();
            let s = mean_se(&xs);
            let exact = 1.0 - 4f64.powi(-(m as i32));
            assert!((s.mean - exact).abs() < 3.5 * s.se, "m {m}: {s:?} vs {exact}");
        }
    }

    #[test]
    fn running_min_decays() {
        let paths: Vec<FPath> = (0..1000).map(|i| simulate_f(200, 1.5, derive_seed(4, i)).unwrap()).collect();
        let at = |m: usize| median(&paths.iter().map(|p| p.running_min[m - 1]).collect::<Vec<_>>());
        assert!(at(200) < 0.2 * at(10), "{} {}", at(200), at(10));
        assert!(simulate_f(0, 1.5, 1).is_err());
    }
}
