//! Integral curves of γ̇ = v(γ) and direction statistics along them.

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::mollify::{v_at, MollifierSpec};
use crate::par;
use crate::tessellation::TessellationView;
use serde::Serialize;
use std::io::Write;

pub const DEFAULT_STEP: f64 = 1e-2;

pub trait VectorField: Sync {
    /// Field value at `p`; `Error::OutOfWindow` where it is not defined.
    fn eval(&self, p: Point) -> Result<[f64; 2]>;
}

/// Constant field, mostly for tests.
pub struct ConstantField(pub [f64; 2]);

impl VectorField for ConstantField {
    fn eval(&self, _p: Point) -> Result<[f64; 2]> {
        Ok(self.0)
    }
}

/// The smoothed field v = ρ∗ṽ of a configuration.
pub struct SmoothedField<'a> {
    pub view: &'a TessellationView,
    pub spec: MollifierSpec,
}

impl<'a> SmoothedField<'a> {
    pub fn new(view: &'a TessellationView, spec: MollifierSpec) -> Self {
        SmoothedField { view, spec }
    }
}

impl VectorField for SmoothedField<'_> {
    fn eval(&self, p: Point) -> Result<[f64; 2]> {
        v_at(p, self.view, &self.spec)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub start: Point,
    pub step: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    /// Set when the trajectory left the region where the field is defined.
    pub truncated: bool,
}

impl Curve {
    pub fn end(&self) -> Point {
        *self.positions.last().expect("curves hold their start")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("curves hold their start")
    }

    /// Position at time `t` by linear interpolation; `None` past the end.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        if t < 0.0 || t > self.end_time() {
            return None;
        }
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return Some(self.positions[0]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (p0, p1) = (self.positions[k - 1], self.positions[k]);
        let w = (t - t0) / (t1 - t0);
        Some([p0[0] + w * (p1[0] - p0[0]), p0[1] + w * (p1[1] - p0[1])])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::Io { path: "<curve csv>".into(), source: e };
        writeln!(w, "t,x1,x2").map_err(io)?;
        for (t, p) in self.times.iter().zip(&self.positions) {
            writeln!(w, "{t},{},{}", p[0], p[1]).map_err(io)?;
        }
        Ok(())
    }
}

fn rk4_step<F: VectorField + ?Sized>(p: Point, h: f64, field: &F) -> Result<Point> {
    let at = |k: [f64; 2], s: f64| [p[0] + s * k[0], p[1] + s * k[1]];
    let k1 = field.eval(p)?;
    let k2 = field.eval(at(k1, h / 2.0))?;
    let k3 = field.eval(at(k2, h / 2.0))?;
    let k4 = field.eval(at(k3, h))?;
    Ok([
        p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Classical fixed-step RK4 from `z` up to time `t_end`.
pub fn integrate_curve<F: VectorField + ?Sized>(z: Point, t_end: f64, step: f64, field: &F) -> Result<Curve> {
    if !(t_end > 0.0 && t_end.is_finite()) || !(step > 0.0 && step.is_finite()) {
        return invalid(format!("t_end and step must be positive, got {t_end} and {step}"));
    }
    let n = (t_end / step).ceil() as usize;
    let mut curve = Curve {
        start: z,
        step,
        times: Vec::with_capacity(n + 1),
        positions: Vec::with_capacity(n + 1),
        truncated: false,
    };
    curve.times.push(0.0);
    curve.positions.push(z);
    let mut p = z;
    for k in 1..=n {
        let t = (k as f64 * step).min(t_end);
        let h = t - curve.end_time();
        match rk4_step(p, h, field) {
            Ok(q) => p = q,
            Err(Error::OutOfWindow(_)) => {
                curve.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
        curve.times.push(t);
        curve.positions.push(p);
    }
    Ok(curve)
}

/// Integrates one curve per start, in parallel.
pub fn integrate_many<F: VectorField>(starts: &[Point], t_end: f64, step: f64, field: &F) -> Result<Vec<Curve>> {
    par::map_indices(starts.len(), |i| integrate_curve(starts[i], t_end, step, field)).into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCheckpoint {
    pub t: f64,
    /// `None` when the checkpoint was skipped for a non-positive denominator.
    pub ratio: Option<f64>,
    pub running_min: Option<f64>,
    pub running_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioStats {
    pub checkpoints: Vec<RatioCheckpoint>,
    pub running_min: Option<f64>,
    pub running_max: Option<f64>,
    pub skipped: usize,
}

/// Running extremes of (γ² − o²)/(γ¹ − o¹) at t = 1, 2, 4, 8, …
pub fn ratio_stats(curve: &Curve, origin: Point) -> RatioStats {
    let mut stats = RatioStats { checkpoints: Vec::new(), running_min: None, running_max: None, skipped: 0 };
    let mut t = 1.0;
    while let Some(p) = curve.position_at(t) {
        let den = p[0] - origin[0];
        let ratio = (den > 0.0).then(|| (p[1] - origin[1]) / den);
        match ratio {
            Some(q) => {
                stats.running_min = Some(stats.running_min.map_or(q, |m: f64| m.min(q)));
                stats.running_max = Some(stats.running_max.map_or(q, |m: f64| m.max(q)));
            }
            None => stats.skipped += 1,
        }
        stats.checkpoints.push(RatioCheckpoint { t, ratio, running_min: stats.running_min, running_max: stats.running_max });
        t *= 2.0;
    }
    stats
}

/// Counts sign changes of the relative order of two curves, compared on
/// common anti-diagonals `γ¹ + γ² = s` (`s` advances exactly with `t`), at
/// `samples` levels. Gaps below `tol` count as undecided.
pub fn order_swaps(a: &Curve, b: &Curve, samples: usize, tol: f64) -> usize {
    let (sa, sb) = (a.start[0] + a.start[1], b.start[0] + b.start[1]);
    let lo = sa.max(sb);
    let hi = (sa + a.end_time()).min(sb + b.end_time());
    if hi <= lo || samples < 2 {
        return 0;
    }
    let mut last = 0i8;
    let mut swaps = 0;
    for k in 0..samples {
        let s = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let (Some(pa), Some(pb)) = (a.position_at(s - sa), b.position_at(s - sb)) else { continue };
        let gap = pa[0] - pb[0];
        let sign = if gap > tol {
            1
        } else if gap < -tol {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last != 0 && sign != last {
                swaps += 1;
            }
            last = sign;
        }
    }
    swaps
}
