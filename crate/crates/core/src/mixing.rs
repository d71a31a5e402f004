//! Mixing of the tessellation: the analytic overlap bound, empirical
//! covariance decay, and a Poisson test after the first blocking stop.

use crate::chains::detect_chain;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect};
use crate::markov::rates::check_alpha;
use crate::par;
use crate::pointfield::{sample_configuration, Configuration, IntensityParams, Sigma};
use crate::quad::{adaptive, exp_coeff, power_series_tail};
use crate::rng::{derive_seed, exp1, pareto, stream};
use crate::stats::{chi_square, correlation_z, mean_se, pearson, ChiSquareResult, MeanSe};
use crate::tessellation::{Phi, TessellationView};
use serde::Serialize;
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};
use statrs::function::gamma::{gamma, gamma_lr};

pub const MIN_ENSEMBLE: usize = 100;

fn check_regime(n: f64, z1: f64) -> Result<()> {
    if !(n > 0.0 && n.is_finite()) {
        return invalid(format!("N must be positive, got {n}"));
    }
    if !(z1 > 4.0 * n && z1 > 2.0 * n + 1.0 && z1.is_finite()) {
        return invalid(format!("lag {z1} outside the regime z1 > max(4N, 2N + 1) for N = {n}"));
    }
    Ok(())
}

/// `(N+1) ∫₁^∞ α ξ^{−α} e^{−(z¹−2N)/ξ} dξ`, an upper bound on the mass of domains
/// meeting both `[−N, N]²` and its shift by `z` when `z¹ ≥ |z²|`.
pub fn overlap_bound(n: f64, z1: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_regime(n, z1)?;
    let c = z1 - 2.0 * n;
    let t = 100.0 * c;
    let head = adaptive(|s| {
        let xi = s.exp();
        alpha * xi.powf(1.0 - alpha) * (-c / xi).exp()
    }, 0.0, t.ln(), 0.0, 1e-12)
    .value;
    Ok((n + 1.0) * (head + power_series_tail(alpha, t, |k| exp_coeff(c, k))))
}

/// Closed form `(N+1) α c^{1−α} γ(α−1, c)` with `c = z¹ − 2N`.
pub fn overlap_bound_closed(n: f64, z1: f64, alpha: f64) -> f64 {
    let (c, s) = (z1 - 2.0 * n, alpha - 1.0);
    (n + 1.0) * alpha * c.powf(-s) * gamma(s) * gamma_lr(s, c)
}

/// Bound for a lag vector, reduced to its dominant coordinate.
pub fn overlap_bound_at(n: f64, z: Point, alpha: f64) -> Result<f64> {
    overlap_bound(n, z[0].abs().max(z[1].abs()), alpha)
}

/// Monte Carlo of the superset mass: `ξ ~ Par(α−1)`, `r ~ Exp(1)`, weighted by
/// the length of the admissible base interval.
pub fn overlap_superset_mc(n: f64, z1: f64, alpha: f64, samples: usize, seed: u64) -> Result<MeanSe> {
    check_alpha(alpha)?;
    check_regime(n, z1)?;
    let c = z1 - 2.0 * n;
    let w = (n + 1.0) * alpha / (alpha - 1.0);
    let mut rng = stream(seed, 0);
    let xs: Vec<f64> = (0..samples)
        .map(|_| {
            let xi = pareto(&mut rng, alpha - 1.0);
            let r = exp1(&mut rng);
            w * (r * xi - c).max(0.0) / xi
        })
        .collect();
    Ok(mean_se(&xs))
}

/// Mean number of sampled domains meeting both `[−N, N]²` and `z + [−N, N]²`.
pub fn overlap_mass_mc(n: f64, z: Point, alpha: f64, epsilon: f64, replicas: usize, seed: u64) -> Result<MeanSe> {
    let params = IntensityParams::new(alpha)?;
    let a = Rect::new(-n, -n, n, n)?;
    let b = Rect::new(z[0] - n, z[1] - n, z[0] + n, z[1] + n)?;
    let window = Rect::new(a.x0.min(b.x0), a.y0.min(b.y0), a.x1.max(b.x1), a.y1.max(b.y1))?;
    let counts = par::map_indices(replicas, |i| {
        let cfg = sample_configuration(&window, epsilon, &params, derive_seed(seed, i as u64))?;
        Ok(cfg.points.iter().filter(|p| p.domain().intersects(&a) && p.domain().intersects(&b)).count() as f64)
    });
    Ok(mean_se(&counts.into_iter().collect::<Result<Vec<_>>>()?))
}

/// `1{σ(φ(x)) = 1}`, zero where no domain covers `x`.
pub fn sigma_indicator(view: &TessellationView, x: Point) -> Result<f64> {
    Ok(match view.phi_at(x)? {
        Phi::Point(k) if view.point(k).sigma == Sigma::Horizontal => 1.0,
        _ => 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub lags: Vec<Point>,
    /// Covariance of the indicator at distance `lag`, averaged over base points.
    pub correlations: Vec<MeanSe>,
    /// Overlap bound with `N = 1/2`, where the regime allows it.
    pub analytic_bounds: Vec<Option<f64>>,
    pub ensemble: usize,
    pub bases: usize,
    pub shuffled: bool,
}

impl MixingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z1,z2,l1,cov,se,bound\n");
        for ((z, c), b) in self.lags.iter().zip(&self.correlations).zip(&self.analytic_bounds) {
            let bound = b.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{},{}\n", z[0], z[1], z[0].abs() + z[1].abs(), c.mean, c.se, bound));
        }
        out
    }

    /// Consecutive lags never increase by more than 3 SE, and the last lag
    /// sits more than 3 SE below the first.
    pub fn decays(&self) -> bool {
        let c = &self.correlations;
        if c.len() < 2 {
            return false;
        }
        let up = |i: usize, j: usize| c[j].mean - c[i].mean;
        let band = |i: usize, j: usize| 3.0 * c[i].se.hypot(c[j].se);
        c.windows(2).enumerate().all(|(i, _)| up(i, i + 1) <= band(i, i + 1)) && -up(0, c.len() - 1) > band(0, c.len() - 1)
    }
}

/// Grid of base points in `window` from which every lag stays inside it.
pub fn base_grid(window: &Rect, lags: &[Point], margin: f64, per_axis: usize) -> Result<Vec<Point>> {
    let (inner_lo, inner_hi) = ([window.x0 + margin, window.y0 + margin], [window.x1 - margin, window.y1 - margin]);
    let (mut lo, mut hi) = (inner_lo, inner_hi);
    for z in lags {
        for d in 0..2 {
            lo[d] = lo[d].max(inner_lo[d] - z[d]);
            hi[d] = hi[d].min(inner_hi[d] - z[d]);
        }
    }
    if lo[0] > hi[0] || lo[1] > hi[1] || per_axis == 0 {
        return invalid("window too small for the requested lags");
    }
    let step = |d: usize, k: usize| if per_axis == 1 { 0.5 * (lo[d] + hi[d]) } else { lo[d] + (hi[d] - lo[d]) * k as f64 / (per_axis - 1) as f64 };
    Ok((0..per_axis).flat_map(|i| (0..per_axis).map(move |j| [step(0, i), step(1, j)])).collect())
}

/// Covariance of the indicator observable across lags. With `shuffled`, the
/// lagged value comes from the next configuration (an independent null).
pub fn empirical_mixing(ensemble: &[Configuration], lags: &[Point], bases: &[Point], shuffled: bool) -> Result<MixingReport> {
    if ensemble.len() < MIN_ENSEMBLE {
        return Err(Error::InsufficientSamples(format!("mixing needs at least {MIN_ENSEMBLE} configurations, got {}", ensemble.len())));
    }
    if bases.is_empty() {
        return invalid("no base points");
    }
    let mut lags = lags.to_vec();
    lags.sort_by(|a, b| (a[0].abs() + a[1].abs()).total_cmp(&(b[0].abs() + b[1].abs())));
    let views: Vec<TessellationView> = par::map_indices(ensemble.len(), |i| TessellationView::new(ensemble[i].clone()));
    let m = views.len();
    let values = par::map_indices(m, |i| {
        let here = bases.iter().map(|&x| sigma_indicator(&views[i], x)).collect::<Result<Vec<_>>>()?;
        let other = &views[if shuffled { (i + 1) % m } else { i }];
        let there = lags
            .iter()
            .map(|z| bases.iter().map(|x| sigma_indicator(other, [x[0] + z[0], x[1] + z[1]])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok((here, there))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k = bases.len() as f64;
    let p = values.iter().map(|(h, _)| h.iter().sum::<f64>()).sum::<f64>() / (k * m as f64);
    let correlations = (0..lags.len())
        .map(|l| {
            let per: Vec<f64> =
                values.iter().map(|(h, t)| h.iter().zip(&t[l]).map(|(a, b)| (a - p) * (b - p)).sum::<f64>() / k).collect();
            mean_se(&per)
        })
        .collect();
    let alpha = ensemble[0].alpha;
    let analytic_bounds = lags.iter().map(|&z| overlap_bound_at(0.5, z, alpha).ok()).collect();
    Ok(MixingReport { lags, correlations, analytic_bounds, ensemble: m, bases: bases.len(), shuffled })
}

/// Boxes relative to the stopping point: `post` boxes lie in H, `pre` in its complement.
#[derive(Clone, Debug, Serialize)]
pub struct BoxSpec {
    pub post: Vec<Rect>,
    pub pre: Rect,
}

impl BoxSpec {
    pub fn new(post: Vec<Rect>, pre: Rect) -> Result<Self> {
        for b in &post {
            if b.x0 < 0.0 && b.y0 < 0.0 {
                return invalid(format!("box {b:?} is not contained in H"));
            }
        }
        if pre.x1 > 0.0 || pre.y1 > 0.0 {
            return invalid(format!("pre box {pre:?} must lie in the complement of H"));
        }
        Ok(BoxSpec { post, pre })
    }
}

impl Default for BoxSpec {
    fn default() -> Self {
        BoxSpec {
            post: vec![Rect { x0: 0.0, y0: 0.0, x1: 2.0, y1: 2.0 }, Rect { x0: 0.0, y0: -2.0, x1: 1.0, y1: 0.0 }, Rect {
                x0: -3.0,
                y0: 0.0,
                x1: 0.0,
                y1: 1.0,
            }],
            pre: Rect { x0: -2.0, y0: -2.0, x1: 0.0, y1: 0.0 },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxResult {
    pub rect: Rect,
    pub mean: f64,
    pub expected: f64,
    /// `None` for boxes of zero area.
    pub chi_square: Option<ChiSquareResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongMarkovReport {
    pub examined: usize,
    pub accepted: usize,
    pub boxes: Vec<BoxResult>,
    pub pre_post_correlation: f64,
    pub correlation_z: f64,
    pub passed: bool,
}

/// Half-open box `(x0, x1] × (y0, y1]` shifted by `t`.
fn count_in(cfg: &Configuration, t: Point, b: &Rect) -> usize {
    cfg.points
        .iter()
        .filter(|p| {
            let (u, v) = (p.x[0] - t[0], p.x[1] - t[1]);
            u > b.x0 && u <= b.x1 && v > b.y0 && v <= b.y1
        })
        .count()
}

fn poisson_gof(counts: &[usize], mean: f64) -> Result<ChiSquareResult> {
    let d = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let top = counts.iter().copied().max().unwrap_or(0).max(d.inverse_cdf(0.999_999) as usize);
    let n = counts.len() as f64;
    let mut observed = vec![0.0; top + 1];
    for &c in counts {
        observed[c] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=top).map(|k| n * d.pmf(k as u64)).collect();
    expected[top] += n * d.sf(top as u64);
    Ok(chi_square(&observed, &expected, 0))
}

/// Counts base points in shifted boxes after the stop `Z̃_1` on the event `A_0 ∩ B_1`
/// and tests them against the unconditional Poisson law.
pub fn strong_markov_test(ensemble: &[Configuration], y: Point, boxes: &BoxSpec, min_accepted: usize) -> Result<StrongMarkovReport> {
    let hits = par::map_indices(ensemble.len(), |i| -> Result<Option<(Vec<usize>, usize)>> {
        let cfg = &ensemble[i];
        let view = TessellationView::new(cfg.clone());
        let rec = detect_chain(y, &view, 1)?;
        let Some(first) = rec.levels.get(1) else { return Ok(None) };
        if !(rec.levels[0].a && first.b) {
            return Ok(None);
        }
        let t = first.z_tilde;
        let shifted = |b: &Rect| Rect { x0: b.x0 + t[0], y0: b.y0 + t[1], x1: b.x1 + t[0], y1: b.y1 + t[1] };
        if !boxes.post.iter().chain(std::iter::once(&boxes.pre)).all(|b| cfg.window.contains_rect(&shifted(b))) {
            return Ok(None);
        }
        Ok(Some((boxes.post.iter().map(|b| count_in(cfg, t, b)).collect(), count_in(cfg, t, &boxes.pre))))
    });
    let hits: Vec<(Vec<usize>, usize)> = hits.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    if hits.len() < min_accepted.max(2) {
        return Err(Error::InsufficientSamples(format!(
            "{} accepted stops out of {} configurations; about {} configurations are needed",
            hits.len(),
            ensemble.len(),
            (min_accepted as f64 * ensemble.len() as f64 / hits.len().max(1) as f64).ceil()
        )));
    }
    let mut results = Vec::new();
    let mut passed = true;
    for (j, b) in boxes.post.iter().enumerate() {
        let counts: Vec<usize> = hits.iter().map(|h| h.0[j]).collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let chi = if b.area() > 0.0 { Some(poisson_gof(&counts, b.area())?) } else { None };
        passed &= chi.as_ref().is_none_or(|c| c.passed);
        results.push(BoxResult { rect: *b, mean, expected: b.area(), chi_square: chi });
    }
    let pre: Vec<f64> = hits.iter().map(|h| h.1 as f64).collect();
    let post: Vec<f64> = hits.iter().map(|h| h.0.iter().sum::<usize>() as f64).collect();
    let rho = pearson(&pre, &post);
    let z = correlation_z(rho, hits.len());
    passed &= z.abs() < crate::stats::Z_1PCT;
    Ok(StrongMarkovReport { examined: ensemble.len(), accepted: hits.len(), boxes: results, pre_post_correlation: rho, correlation_z: z, passed })
}

/// Independent configurations on `window`, drawn in parallel.
pub fn sample_ensemble(window: &Rect, epsilon: f64, alpha: f64, count: usize, seed: u64) -> Result<Vec<Configuration>> {
    let params = IntensityParams::new(alpha)?;
    par::map_indices(count, |i| sample_configuration(window, epsilon, &params, derive_seed(seed, i as u64))).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_matches_closed_form_and_decreases() {
        for n in [0.5, 1.0, 3.0] {
            let v: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|k| overlap_bound(n, k * n, 1.5).unwrap()).collect();
            assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
            for (k, b) in [5.0, 10.0, 20.0].iter().zip(&v) {
                let c = overlap_bound_closed(n, k * n, 1.5);
                assert!((b - c).abs() < 1e-9 * c);
            }
        }
        assert!(overlap_bound(1.0, 1e9, 1.5).unwrap() < 1e-3);
        assert!(overlap_bound(1.0, 3.0, 1.5).is_err());
        assert!(overlap_bound(0.2, 0.9, 1.5).is_err());
    }

    #[test]
    fn superset_mc_cross_check() {
        let b = overlap_bound(1.0, 10.0, 1.5).unwrap();
        let mc = overlap_superset_mc(1.0, 10.0, 1.5, 1_000_000, 7).unwrap();
        assert!((mc.mean - b).abs() < 3.0 * mc.se, "{b} vs {mc:?}");
    }

    #[test]
    fn bound_dominates_sampled_overlap() {
        for l in [5.0, 10.0] {
            let mc = overlap_mass_mc(0.5, [l, 0.0], 1.5, 1e-3, 2000, 3).unwrap();
            let b = overlap_bound_at(0.5, [l, 0.0], 1.5).unwrap();
            assert!(mc.mean <= b + 3.0 * mc.se, "l {l}: {mc:?} vs {b}");
            assert!(mc.mean > 0.0);
        }
    }

    #[test]
    fn lag_zero_variance_and_too_small_ensemble() {
        let w = Rect::new(0.0, 0.0, 12.0, 12.0).unwrap();
        let ens = sample_ensemble(&w, 1e-2, 1.5, 120, 1).unwrap();
        let bases = base_grid(&w, &[[0.0, 0.0], [5.0, 0.0]], 1.0, 3).unwrap();
        let rep = empirical_mixing(&ens, &[[5.0, 0.0], [0.0, 0.0]], &bases, false).unwrap();
        assert_eq!(rep.lags[0], [0.0, 0.0]);
        let v = rep.correlations[0].mean;
        assert!(v > 0.0 && v <= 0.25, "{v}");
        assert!(rep.correlations.iter().all(|c| c.se > 0.0));
        assert!(rep.analytic_bounds[0].is_none() && rep.analytic_bounds[1].is_some());
        assert!(matches!(empirical_mixing(&ens[..50], &[[0.0, 0.0]], &bases, false), Err(Error::InsufficientSamples(_))));
        assert_eq!(rep.to_csv().lines().count(), 3);
    }

    #[test]
    fn shuffled_null_is_flat() {
        let w = Rect::new(0.0, 0.0, 20.0, 8.0).unwrap();
        let ens = sample_ensemble(&w, 1e-2, 1.5, 300, 2).unwrap();
        let lags = [[3.0, 0.0], [10.0, 0.0]];
        let bases = base_grid(&w, &lags, 1.0, 3).unwrap();
        let rep = empirical_mixing(&ens, &lags, &bases, true).unwrap();
        for c in &rep.correlations {
            assert!(c.mean.abs() < 3.5 * c.se, "{c:?}");
        }
    }

    #[test]
    fn box_spec_validation_and_counts() {
        assert!(BoxSpec::new(vec![Rect { x0: -1.0, y0: -1.0, x1: 1.0, y1: 1.0 }], Rect { x0: -1.0, y0: -1.0, x1: 0.0, y1: 0.0 }).is_err());
        assert!(BoxSpec::new(vec![], Rect { x0: -1.0, y0: -1.0, x1: 0.5, y1: 0.0 }).is_err());
        let cfg = Configuration::from_points(Rect::new(0.0, 0.0, 10.0, 10.0).unwrap(), 1.5, vec![
            crate::pointfield::MarkedPoint::new([5.5, 5.5], 1.0, 2.0, Sigma::Horizontal),
            crate::pointfield::MarkedPoint::new([5.0, 5.0], 1.0, 2.0, Sigma::Horizontal),
        ])
        .unwrap();
        assert_eq!(count_in(&cfg, [5.0, 5.0], &Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }), 1);
        assert_eq!(count_in(&cfg, [5.0, 5.0], &Rect { x0: 0.0, y0: 0.0, x1: 0.0, y1: 1.0 }), 0);
    }

    #[test]
    fn post_stop_counts_are_poisson() {
        let w = Rect::new(-6.0, -6.0, 14.0, 10.0).unwrap();
        let ens = sample_ensemble(&w, 1e-2, 1.5, 3000, 5).unwrap();
        let mut spec = BoxSpec::default();
        spec.post.push(Rect { x0: 0.0, y0: 0.0, x1: 0.0, y1: 1.0 });
        let rep = strong_markov_test(&ens, [0.5, 0.5], &spec, 100).unwrap();
        assert!(rep.passed, "{rep:?}");
        let degenerate = rep.boxes.last().unwrap();
        assert!(degenerate.mean == 0.0 && degenerate.chi_square.is_none());
        assert!(matches!(strong_markov_test(&ens[..20], [0.5, 0.5], &spec, 100), Err(Error::InsufficientSamples(_))));
    }
}
