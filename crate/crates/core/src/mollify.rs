//! The bump density ρ on [−1/3, 0]² and the smoothed field v = ρ∗ṽ.
//!
//! ṽ is piecewise constant on the arrangement of domain edges, so the
//! convolution is evaluated cell by cell: every sub-rectangle of the support
//! square gets the product of two one-dimensional bump masses.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect, Region};
use crate::pointfield::Sigma;
use crate::quad::GaussLegendre;
use crate::tessellation::TessellationView;

pub const SUPPORT: f64 = 1.0 / 3.0;
/// ∫₋₁¹ exp(−1/(1−t²)) dt.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_3;
pub const DEFAULT_ORDER: usize = 32;
const PANELS: usize = 4;

pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct MollifierSpec {
    order: usize,
    normalization: f64,
    rule: GaussLegendre,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

impl MollifierSpec {
    pub fn new(order: usize) -> Result<Self> {
        if !(2..=256).contains(&order) {
            return invalid(format!("quadrature order must be in 2..=256, got {order}"));
        }
        let rule = GaussLegendre::new(order);
        let ib = rule.composite(bump, -1.0, 1.0, PANELS);
        Ok(MollifierSpec { order, normalization: 36.0 / (ib * ib), rule })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Unnormalized bump mass of the axis factor over `u ∈ [a, b]`.
    fn axis_mass(&self, a: f64, b: f64) -> f64 {
        let (ta, tb) = ((6.0 * a + 1.0).max(-1.0), (6.0 * b + 1.0).min(1.0));
        if tb <= ta {
            return 0.0;
        }
        self.rule.composite(bump, ta, tb, PANELS)
    }
}

pub fn rho(u: Point, spec: &MollifierSpec) -> f64 {
    spec.normalization * bump(6.0 * u[0] + 1.0) * bump(6.0 * u[1] + 1.0)
}

/// The closed square `x + [−1/3, 0]²` sampled by `v_at(x)`.
pub fn support_square(x: Point) -> Rect {
    Rect { x0: x[0] - SUPPORT, y0: x[1] - SUPPORT, x1: x[0], y1: x[1] }
}

fn e_sigma(s: Sigma) -> [f64; 2] {
    match s {
        Sigma::Horizontal => [1.0, 0.0],
        Sigma::Vertical => [0.0, 1.0],
    }
}

fn breakpoints(lo: f64, hi: f64, edges: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut b: Vec<f64> = std::iter::once(lo).chain(edges.filter(|&e| e > lo && e < hi)).chain(std::iter::once(hi)).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// v(x) = ∫ ρ(u) ṽ(x + u) du, with weights renormalized to sum to one.
pub fn v_at(x: Point, view: &TessellationView, spec: &MollifierSpec) -> Result<[f64; 2]> {
    let s = support_square(x);
    if !view.window().contains_rect(&s) {
        return Err(Error::OutOfWindow(format!("support of ({}, {}) leaves {:?}", x[0], x[1], view.window())));
    }
    let cands = view.meeting(&Region::closed(&s));
    if cands.is_empty() {
        return Ok([0.5, 0.5]);
    }
    let strongest = cands.iter().copied().reduce(|a, b| if view.stronger(b, a) { b } else { a }).unwrap();
    if view.domain(strongest).contains_rect(&s) {
        return Ok(e_sigma(view.point(strongest).sigma));
    }
    let bx = breakpoints(s.x0, s.x1, cands.iter().flat_map(|&i| [view.domain(i).x0, view.domain(i).x1]));
    let by = breakpoints(s.y0, s.y1, cands.iter().flat_map(|&i| [view.domain(i).y0, view.domain(i).y1]));
    let mx: Vec<f64> = bx.windows(2).map(|w| spec.axis_mass(w[0] - x[0], w[1] - x[0])).collect();
    let my: Vec<f64> = by.windows(2).map(|w| spec.axis_mass(w[0] - x[1], w[1] - x[1])).collect();
    let total = mx.iter().sum::<f64>() * my.iter().sum::<f64>();
    let mut v1 = 0.0;
    for (i, wx) in bx.windows(2).enumerate() {
        let cx = 0.5 * (wx[0] + wx[1]);
        for (j, wy) in by.windows(2).enumerate() {
            let c = [cx, 0.5 * (wy[0] + wy[1])];
            let winner = cands
                .iter()
                .copied()
                .filter(|&k| view.domain(k).contains(c))
                .reduce(|a, b| if view.stronger(b, a) { b } else { a });
            let share = match winner {
                None => 0.5,
                Some(k) => e_sigma(view.point(k).sigma)[0],
            };
            v1 += share * mx[i] * my[j];
        }
    }
    let v1 = (v1 / total).clamp(0.0, 1.0);
    Ok([v1, 1.0 - v1])
}

/// Plain tensor-product Gauss–Legendre evaluation, sampling ṽ at the nodes.
/// Coarse reference only: ṽ jumps across domain edges.
pub fn v_at_nodes(x: Point, view: &TessellationView, spec: &MollifierSpec) -> Result<[f64; 2]> {
    let s = support_square(x);
    if !view.window().contains_rect(&s) {
        return Err(Error::OutOfWindow(format!("support of ({}, {}) leaves {:?}", x[0], x[1], view.window())));
    }
    let rule = GaussLegendre::new(spec.order);
    let (mut acc, mut wsum) = (0.0, 0.0);
    for (ta, wa) in rule.nodes.iter().zip(&rule.weights) {
        for (tb, wb) in rule.nodes.iter().zip(&rule.weights) {
            let u = [(ta - 1.0) / 6.0, (tb - 1.0) / 6.0];
            let w = wa * wb * rho(u, spec);
            acc += w * view.v_tilde_at([x[0] + u[0], x[1] + u[1]])?[0];
            wsum += w;
        }
    }
    let v1 = (acc / wsum).clamp(0.0, 1.0);
    Ok([v1, 1.0 - v1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointfield::{sample_configuration, Configuration, IntensityParams, MarkedPoint};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn mp(x: f64, y: f64, r: f64, xi: f64, s: u8) -> MarkedPoint {
        MarkedPoint::new([x, y], r, xi, Sigma::from_index(s).unwrap())
    }

    fn view(points: Vec<MarkedPoint>, w: Rect) -> TessellationView {
        TessellationView::new(Configuration::from_points(w, 1.5, points).unwrap())
    }

    fn sampled(seed: u64) -> TessellationView {
        let params = IntensityParams::new(1.5).unwrap();
        TessellationView::new(sample_configuration(&Rect::new(0.0, 0.0, 10.0, 10.0).unwrap(), 1e-3, &params, seed).unwrap())
    }

    #[test]
    fn bump_integral_constant() {
        let ib = GaussLegendre::new(64).composite(bump, -1.0, 1.0, 16);
        assert!((ib - BUMP_INTEGRAL).abs() < 1e-14);
        let spec = MollifierSpec::default();
        assert!((spec.normalization() - 36.0 / (BUMP_INTEGRAL * BUMP_INTEGRAL)).abs() < 1e-9);
    }

    #[test]
    fn rho_examples() {
        let spec = MollifierSpec::default();
        assert_eq!(rho([0.1, -0.1], &spec), 0.0);
        assert_eq!(rho([-0.34, -0.1], &spec), 0.0);
        let peak = rho([-1.0 / 6.0, -1.0 / 6.0], &spec);
        assert!((peak - spec.normalization() * (-2.0f64).exp()).abs() < 1e-12 * peak);
        let mut r = rng::stream(5, 0);
        for _ in 0..1000 {
            let u = [-SUPPORT * r.random::<f64>(), -SUPPORT * r.random::<f64>()];
            assert!(rho(u, &spec) <= peak && rho(u, &spec) >= 0.0);
        }
    }

    #[test]
    fn rho_integrates_to_one() {
        let spec = MollifierSpec::default();
        let gl = GaussLegendre::new(48);
        let total = gl.composite(|a| gl.composite(|b| rho([a, b], &spec), -SUPPORT, 0.0, 6), -SUPPORT, 0.0, 6);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn constant_regions_are_exact() {
        let w = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let v = view(vec![mp(1.0, 1.0, 2.0, 3.0, 1)], w);
        let spec = MollifierSpec::default();
        assert_eq!(v_at([3.0, 1.5], &v, &spec).unwrap(), [1.0, 0.0]);
        assert_eq!(v_at([1.0 + SUPPORT, 2.0], &v, &spec).unwrap(), [1.0, 0.0]);
        let empty = view(vec![], w);
        assert_eq!(v_at([5.0, 5.0], &empty, &spec).unwrap(), [0.5, 0.5]);
        assert!(matches!(v_at([0.2, 5.0], &v, &spec), Err(Error::OutOfWindow(_))));
    }

    #[test]
    fn half_covered_square() {
        // Left half of the support is horizontal, right half uncovered: v¹ = ½ + ½·½.
        let w = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let v = view(vec![mp(0.0, 4.0, 1.0, 5.0 - 1.0 / 6.0, 1)], w);
        let spec = MollifierSpec::default();
        let x = [5.0, 4.5];
        let got = v_at(x, &v, &spec).unwrap();
        assert!((got[0] - 0.75).abs() < 1e-14, "{got:?}");
    }

    #[test]
    fn unit_sum_and_range_on_sampled_fields() {
        let spec = MollifierSpec::default();
        for seed in 0..4 {
            let v = sampled(seed);
            let mut r = rng::stream(seed, 3);
            for _ in 0..500 {
                let x = [1.0 + 8.0 * r.random::<f64>(), 1.0 + 8.0 * r.random::<f64>()];
                let got = v_at(x, &v, &spec).unwrap();
                assert!(got[0] >= 0.0 && got[1] >= 0.0);
                assert!((got[0] + got[1] - 1.0).abs() <= f64::EPSILON);
            }
        }
    }

    #[test]
    fn order_doubling_converges() {
        let a = MollifierSpec::new(32).unwrap();
        let b = MollifierSpec::new(64).unwrap();
        let v = sampled(11);
        let mut r = rng::stream(11, 4);
        for _ in 0..100 {
            let x = [1.0 + 8.0 * r.random::<f64>(), 1.0 + 8.0 * r.random::<f64>()];
            let d = (v_at(x, &v, &a).unwrap()[0] - v_at(x, &v, &b).unwrap()[0]).abs();
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn continuous_across_edges() {
        let v = sampled(2);
        let spec = MollifierSpec::default();
        let mut checked = 0;
        for i in 0..v.len() {
            let d = v.domain(i);
            for edge in [d.x0, d.x1] {
                // Crossing the edge with the support's right side.
                let y = 0.5 * (d.y0 + d.y1);
                let x = [edge, y + SUPPORT / 2.0];
                if x[0] - SUPPORT < 0.5 || x[0] > 9.5 || x[1] - SUPPORT < 0.5 || x[1] > 9.5 {
                    continue;
                }
                let lo = v_at([x[0] - 1e-9, x[1]], &v, &spec).unwrap()[0];
                let hi = v_at([x[0] + 1e-9, x[1]], &v, &spec).unwrap()[0];
                assert!((lo - hi).abs() < 1e-8, "{lo} {hi}");
                checked += 1;
            }
        }
        assert!(checked > 5);
    }

    #[test]
    fn node_rule_agrees_coarsely() {
        let v = sampled(3);
        let spec = MollifierSpec::default();
        let mut r = rng::stream(3, 9);
        for _ in 0..50 {
            let x = [1.0 + 8.0 * r.random::<f64>(), 1.0 + 8.0 * r.random::<f64>()];
            let d = (v_at(x, &v, &spec).unwrap()[0] - v_at_nodes(x, &v, &spec).unwrap()[0]).abs();
            assert!(d < 0.05, "{d}");
        }
    }

    proptest! {
        #[test]
        fn rho_outside_support_vanishes(a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let spec = MollifierSpec::default();
            let inside = a > -SUPPORT && a < 0.0 && b > -SUPPORT && b < 0.0;
            if !inside {
                prop_assert_eq!(rho([a, b], &spec), 0.0);
            }
        }
    }
}
