//! Marked Poisson field: intensity, domain-hitting masses and windowed sampling.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect};
use crate::rng::{self, SimRng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};
use std::cmp::Ordering;
use std::io::{BufRead, Write};

pub const FORMAT_VERSION: u32 = 1;

/// Channel direction of a marked point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sigma {
    Horizontal,
    Vertical,
}

impl Sigma {
    pub fn from_index(s: u8) -> Result<Self> {
        match s {
            1 => Ok(Sigma::Horizontal),
            2 => Ok(Sigma::Vertical),
            _ => invalid(format!("sigma must be 1 or 2, got {s}")),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Sigma::Horizontal => 1,
            Sigma::Vertical => 2,
        }
    }

    /// Coordinate (0 or 1) along which the channel extends.
    pub fn axis(self) -> usize {
        self.index() as usize - 1
    }

    pub fn hat(self) -> Self {
        match self {
            Sigma::Horizontal => Sigma::Vertical,
            Sigma::Vertical => Sigma::Horizontal,
        }
    }
}

impl Serialize for Sigma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Sigma::from_index(v).map_err(serde::de::Error::custom)
    }
}

/// One atom `(x, r, ξ, σ)` of the field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub x: Point,
    pub r: f64,
    pub xi: f64,
    pub sigma: Sigma,
}

impl MarkedPoint {
    pub fn new(x: Point, r: f64, xi: f64, sigma: Sigma) -> Self {
        MarkedPoint { x, r, xi, sigma }
    }

    pub fn is_valid(&self) -> bool {
        self.x[0].is_finite() && self.x[1].is_finite() && self.r >= 0.0 && self.xi >= 1.0 && self.xi.is_finite()
    }

    /// Channel length `rξ`.
    pub fn length(&self) -> f64 {
        self.r * self.xi
    }

    /// The domain of influence.
    pub fn domain(&self) -> Rect {
        let [x1, x2] = self.x;
        match self.sigma {
            Sigma::Horizontal => Rect { x0: x1, y0: x2, x1: x1 + self.length(), y1: x2 + 1.0 },
            Sigma::Vertical => Rect { x0: x1, y0: x2, x1: x1 + 1.0, y1: x2 + self.length() },
        }
    }

    /// Total order on `(ξ, x¹, x², σ)`; the larger point wins overlaps.
    pub fn strength_cmp(&self, other: &MarkedPoint) -> Ordering {
        self.xi
            .total_cmp(&other.xi)
            .then(self.x[0].total_cmp(&other.x[0]))
            .then(self.x[1].total_cmp(&other.x[1]))
            .then(self.sigma.cmp(&other.sigma))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityParams {
    pub alpha: f64,
}

impl IntensityParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return invalid(format!("alpha must lie in (1, 2), got {alpha}"));
        }
        Ok(IntensityParams { alpha })
    }

    /// `E[rξ] = α/(α-1)`.
    pub fn mean_length(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }
}

pub fn intensity_density(eta: &MarkedPoint, params: &IntensityParams) -> f64 {
    if eta.r < 0.0 || eta.xi < 1.0 {
        return 0.0;
    }
    0.5 * params.alpha * (-eta.r).exp() / eta.xi.powf(params.alpha + 1.0)
}

/// `μ(D⁻¹(R))` for a rectangle `R` of width `w` and height `h`:
/// `½(h+1)(w + α/(α-1)) + ½(w+1)(h + α/(α-1))`.
pub fn mu_dinv_rect(rect: &Rect, params: &IntensityParams) -> Result<f64> {
    if rect.width() <= 0.0 || rect.height() <= 0.0 {
        return invalid("rectangle must be nondegenerate");
    }
    let m = params.mean_length();
    let (w, h) = (rect.width(), rect.height());
    Ok(0.5 * (h + 1.0) * (w + m) + 0.5 * (w + 1.0) * (h + m))
}

/// `∫₁^∞ α ξ^{-α} e^{-P/ξ} dξ = α P^{1-α} γ(α-1, P)`, the mass (per unit
/// transverse length and direction, times two) of channels that start more
/// than `P` before the window and still reach it.
pub fn reach_tail(pad: f64, params: &IntensityParams) -> f64 {
    let a = params.alpha;
    if pad <= 0.0 {
        return params.mean_length();
    }
    if pad < 1e-8 {
        // γ(s, P) ≈ P^s/s − P^{s+1}/(s+1)
        let s = a - 1.0;
        return a * (1.0 / s - pad / (s + 1.0));
    }
    a * pad.powf(1.0 - a) * gamma_lr(a - 1.0, pad) * gamma(a - 1.0)
}

/// μ-mass of domains that meet `window` but whose base point lies more than
/// `pad` to the left of (σ=1) or below (σ=2) the window.
pub fn omitted_mass(window: &Rect, pad: f64, params: &IntensityParams) -> f64 {
    0.5 * (window.width() + window.height() + 2.0) * reach_tail(pad, params)
}

/// Smallest pad (to relative precision 1e-12) with omitted mass ≤ `epsilon`.
pub fn truncation_pad(window: &Rect, epsilon: f64, params: &IntensityParams) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let f = |p: f64| omitted_mass(window, p, params);
    if f(0.0) <= epsilon {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while f(hi) > epsilon {
        hi *= 2.0;
        if hi > 1e300 {
            return invalid("epsilon too small for a finite pad");
        }
    }
    let mut lo = hi / 2.0;
    if f(lo) <= epsilon {
        lo = 0.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// A finite draw of all marked points whose domains meet `window`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub points: Vec<MarkedPoint>,
    pub window: Rect,
    pub alpha: f64,
    pub truncation_epsilon: f64,
    pub pad: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    window: [f64; 4],
    alpha: f64,
    epsilon: f64,
    seed: u64,
    #[serde(default)]
    pad: f64,
}

impl Configuration {
    /// Hand-built configuration; the point set is taken as exact (`epsilon = 0`).
    pub fn from_points(window: Rect, alpha: f64, points: Vec<MarkedPoint>) -> Result<Self> {
        IntensityParams::new(alpha)?;
        if let Some(p) = points.iter().find(|p| !p.is_valid()) {
            return invalid(format!("invalid marked point {p:?}"));
        }
        Ok(Configuration { points, window, alpha, truncation_epsilon: 0.0, pad: f64::INFINITY, seed: 0 })
    }

    pub fn params(&self) -> IntensityParams {
        IntensityParams { alpha: self.alpha }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pairwise distinct locations and strengths.
    pub fn is_distinct(&self) -> bool {
        let mut xi: Vec<f64> = self.points.iter().map(|p| p.xi).collect();
        xi.sort_by(|a, b| a.total_cmp(b));
        if xi.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        let mut xs: Vec<Point> = self.points.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        !xs.windows(2).any(|w| w[0] == w[1])
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            format_version: FORMAT_VERSION,
            window: self.window.to_array(),
            alpha: self.alpha,
            epsilon: self.truncation_epsilon,
            seed: self.seed,
            pad: if self.pad.is_finite() { self.pad } else { 0.0 },
        };
        let io = |e| Error::Io { path: "<jsonl>".into(), source: e };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for p in &self.points {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let io = |e| Error::Io { path: "<jsonl>".into(), source: e };
        let first = lines.next().ok_or_else(|| Error::Format("empty configuration file".into()))?.map_err(io)?;
        let h: Header = serde_json::from_str(&first)?;
        if h.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", h.format_version)));
        }
        let [x0, y0, x1, y1] = h.window;
        let window = Rect::new(x0, y0, x1, y1)?;
        IntensityParams::new(h.alpha)?;
        let mut points = Vec::new();
        for line in lines {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let p: MarkedPoint = serde_json::from_str(&line)?;
            if !p.is_valid() {
                return Err(Error::Format(format!("invalid marked point {line}")));
            }
            points.push(p);
        }
        let pad = if h.epsilon > 0.0 { h.pad } else { f64::INFINITY };
        Ok(Configuration { points, window, alpha: h.alpha, truncation_epsilon: h.epsilon, pad, seed: h.seed })
    }
}

/// Draws every marked point whose domain meets `window`, omitting only
/// channels that start beyond the truncation pad (total mass ≤ `epsilon`).
pub fn sample_configuration(window: &Rect, epsilon: f64, params: &IntensityParams, seed: u64) -> Result<Configuration> {
    if window.width() <= 0.0 || window.height() <= 0.0 {
        return invalid("window must be nondegenerate");
    }
    let pad = truncation_pad(window, epsilon, params)?;
    for attempt in 0..16u64 {
        let mut rng = rng::stream(seed, attempt);
        let mut points = Vec::new();
        for sigma in [Sigma::Horizontal, Sigma::Vertical] {
            sample_direction(&mut rng, window, pad, params, sigma, &mut points);
        }
        let cfg = Configuration {
            points,
            window: *window,
            alpha: params.alpha,
            truncation_epsilon: epsilon,
            pad,
            seed,
        };
        if cfg.is_distinct() {
            return Ok(cfg);
        }
    }
    invalid("could not draw a configuration with distinct points")
}

fn sample_direction(
    rng: &mut SimRng,
    window: &Rect,
    pad: f64,
    params: &IntensityParams,
    sigma: Sigma,
    out: &mut Vec<MarkedPoint>,
) {
    let a = params.alpha;
    // Local frame: first coordinate along the channel, second across it.
    let (a0, a1, b0, b1) = match sigma {
        Sigma::Horizontal => (window.x0, window.x1, window.y0, window.y1),
        Sigma::Vertical => (window.y0, window.y1, window.x0, window.x1),
    };
    let across = b1 - b0 + 1.0;
    let to_global = |along: f64, acr: f64| match sigma {
        Sigma::Horizontal => [along, acr],
        Sigma::Vertical => [acr, along],
    };

    // Base points inside the window's span: every such domain meets the window.
    let n_core = rng::poisson(rng, 0.5 * (a1 - a0) * across);
    for _ in 0..n_core {
        let along = a0 + (a1 - a0) * rng.random::<f64>();
        let acr = (b0 - 1.0) + across * rng.random::<f64>();
        let r = rng::exp1(rng);
        let xi = rng::pareto(rng, a);
        out.push(MarkedPoint::new(to_global(along, acr), r, xi, sigma));
    }

    // Base points a distance d ∈ (0, pad] before the window whose channel reaches it.
    if pad <= 0.0 {
        return;
    }
    let mass = 0.5 * across * (params.mean_length() - reach_tail(pad, params));
    let n_pad = rng::poisson(rng, mass.max(0.0));
    for _ in 0..n_pad {
        // ξ has density ∝ ξ^{-α}(1 - e^{-pad/ξ}): propose Par(α-1), thin.
        let xi = loop {
            let cand = rng::pareto(rng, a - 1.0);
            if rng.random::<f64>() < -(-pad / cand).exp_m1() {
                break cand;
            }
        };
        // d | ξ: exponential with mean ξ truncated to [0, pad].
        let cap = -(-pad / xi).exp_m1();
        let d = (-xi * (-rng.random::<f64>() * cap).ln_1p()).min(pad);
        let r = d / xi + rng::exp1(rng);
        let acr = (b0 - 1.0) + across * rng.random::<f64>();
        out.push(MarkedPoint::new(to_global(a0 - d, acr), r, xi, sigma));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::stats;

    fn p15() -> IntensityParams {
        IntensityParams::new(1.5).unwrap()
    }

    #[test]
    fn density_examples() {
        let eta = MarkedPoint::new([3.0, -7.0], 0.0, 1.0, Sigma::Horizontal);
        assert!((intensity_density(&eta, &p15()) - 0.75).abs() < 1e-15);
        let eta = MarkedPoint::new([0.0, 0.0], -0.1, 2.0, Sigma::Vertical);
        assert_eq!(intensity_density(&eta, &p15()), 0.0);
        let eta = MarkedPoint::new([0.0, 0.0], 1.0, 0.5, Sigma::Horizontal);
        assert_eq!(intensity_density(&eta, &p15()), 0.0);
    }

    #[test]
    fn alpha_range_enforced() {
        assert!(IntensityParams::new(1.0).is_err());
        assert!(IntensityParams::new(2.0).is_err());
        assert!(IntensityParams::new(1.999).is_ok());
    }

    #[test]
    fn unit_square_mass() {
        let m = mu_dinv_rect(&Rect::unit_square(), &p15()).unwrap();
        assert!((m - 8.0).abs() < 1e-14);
        let near2 = mu_dinv_rect(&Rect::unit_square(), &IntensityParams::new(2.0 - 1e-9).unwrap()).unwrap();
        assert!((near2 - 6.0).abs() < 1e-6);
        assert!(mu_dinv_rect(&Rect::new(0.0, 0.0, 0.0, 1.0).unwrap(), &p15()).is_err());
    }

    #[test]
    fn general_rect_mass_matches_quadrature() {
        // σ=1 part: ½(h+1)[w + ∫₀^∞ P(rξ ≥ d) dd] with P(rξ ≥ d) = ∫ αξ^{-α-1} e^{-d/ξ} dξ.
        let params = IntensityParams::new(1.3).unwrap();
        let a = params.alpha;
        // With v = d/ξ: P(rξ ≥ d) = α d^{-α} ∫₀^d v^{α-1} e^{-v} dv.
        let inner = |d: f64| {
            let g = quad::adaptive(|v: f64| v.powf(a - 1.0) * (-v).exp(), 0.0, d.min(80.0), 1e-15, 1e-12).value;
            a * d.powf(-a) * g
        };
        // ∫₀^∞ inner(d) dd with d = e^s.
        let reach = quad::adaptive(|s: f64| inner(s.exp()) * s.exp(), -40.0, 250.0, 1e-11, 1e-10).value;
        let rect = Rect::new(-1.0, 2.0, 2.5, 2.7).unwrap();
        let (w, h) = (rect.width(), rect.height());
        let oracle = 0.5 * (h + 1.0) * (w + reach) + 0.5 * (w + 1.0) * (h + reach);
        let got = mu_dinv_rect(&rect, &params).unwrap();
        assert!((got - oracle).abs() / got < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn reach_tail_matches_quadrature() {
        let params = p15();
        for pad in [0.3, 2.0, 50.0] {
            let q = quad::adaptive(|u: f64| 1.5 * u.powf(-0.5) * (-pad * u).exp(), 0.0, 1.0, 1e-14, 1e-12).value;
            let t = reach_tail(pad, &params);
            assert!((t - q).abs() / q < 1e-8, "pad {pad}: {t} vs {q}");
        }
        assert!((reach_tail(0.0, &params) - 3.0).abs() < 1e-15);
        assert!((reach_tail(1e-10, &params) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn pad_monotone_and_bounded() {
        let w = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let mut last = 0.0;
        for eps in [0.5, 1e-2, 1e-4, 1e-6] {
            let p = truncation_pad(&w, eps, &p15()).unwrap();
            assert!(p >= last);
            assert!(omitted_mass(&w, p, &p15()) <= eps);
            assert!(omitted_mass(&w, p * (1.0 - 1e-9), &p15()) > eps * (1.0 - 1e-6));
            last = p;
        }
        assert!(truncation_pad(&w, 0.0, &p15()).is_err());
        assert!(truncation_pad(&w, 1.0, &p15()).is_err());
        let near_one = truncation_pad(&Rect::unit_square(), 0.999, &p15()).unwrap();
        assert!(near_one < 30.0);
    }

    #[test]
    fn pad_value_for_reference_window() {
        let w = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let p = truncation_pad(&w, 1e-6, &p15()).unwrap();
        // For large P, T(P) ≈ αΓ(α-1)P^{1-α}: P ≈ (11·1.5·√π / 1e-6)².
        let approx = (11.0 * 1.5 * std::f64::consts::PI.sqrt() / 1e-6).powi(2);
        assert!((p / approx - 1.0).abs() < 1e-3, "{p} vs {approx}");
    }

    #[test]
    fn determinism_and_support() {
        let w = Rect::new(0.0, 0.0, 6.0, 4.0).unwrap();
        let a = sample_configuration(&w, 1e-6, &p15(), 11).unwrap();
        let b = sample_configuration(&w, 1e-6, &p15(), 11).unwrap();
        assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
        assert!(a.is_distinct());
        for p in &a.points {
            assert!(p.r >= 0.0 && p.xi >= 1.0);
            assert!(p.domain().intersects(&w));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let w = Rect::new(0.0, 0.0, 3.0, 3.0).unwrap();
        let a = sample_configuration(&w, 1e-3, &p15(), 5).unwrap();
        let s = a.to_jsonl_string();
        assert_eq!(s.lines().count(), a.len() + 1);
        let b = Configuration::read_jsonl(s.as_bytes()).unwrap();
        assert_eq!(a, b);
        let bad = s.replacen("\"sigma\":1", "\"sigma\":3", 1);
        if bad != s {
            assert!(Configuration::read_jsonl(bad.as_bytes()).is_err());
        }
    }

    #[test]
    fn sigma_marks_are_fair() {
        let w = Rect::new(0.0, 0.0, 20.0, 20.0).unwrap();
        let mut n1 = 0u64;
        let mut n = 0u64;
        for s in 0..10 {
            let c = sample_configuration(&w, 1e-3, &p15(), s).unwrap();
            for p in &c.points {
                // Symmetric footprint region for both directions.
                if p.x[0] >= 0.0 && p.x[0] <= 19.0 && p.x[1] >= 0.0 && p.x[1] <= 19.0 {
                    n += 1;
                    if p.sigma == Sigma::Horizontal {
                        n1 += 1;
                    }
                }
            }
        }
        assert!(stats::binomial_two_sided(n1, n, 0.5) > 0.01, "{n1}/{n}");
    }
}
