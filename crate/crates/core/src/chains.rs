//! Successor relation and chain detection: alternating channels, each one
//! completely blocked by a stronger channel of the other direction.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Interval, Point, Rect, Region};
use crate::pointfield::{Configuration, MarkedPoint, Sigma};
use crate::tessellation::{Phi, TessellationView};
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_MAX: usize = 8;

/// Region with `along` on `axis` and `across` on the other coordinate.
fn oriented(axis: usize, along: Interval, across: Interval) -> Region {
    if axis == 0 {
        Region::new(along, across)
    } else {
        Region::new(across, along)
    }
}

fn point_on(axis: usize, along: f64, across: f64) -> Point {
    if axis == 0 {
        [along, across]
    } else {
        [across, along]
    }
}

/// `D_j` is a successor of `D_i` at level `level`.
pub fn is_successor(i: usize, j: usize, level: f64, view: &TessellationView) -> Result<bool> {
    let (pi, pj) = (*view.point(i), *view.point(j));
    let a = pi.sigma.axis();
    let c = 1 - a;
    let di = view.domain(i);
    let (lo, hi) = if a == 0 { (di.x0, di.x1) } else { (di.y0, di.y1) };
    if level < lo || level > hi {
        return invalid(format!("domain {i} does not meet the level line {level}"));
    }
    if !(pi.xi < pj.xi && pj.sigma == pi.sigma.hat()) {
        return Ok(false);
    }
    let strip = Interval::closed(pi.x[c], pi.x[c] + 1.0);
    let delta = oriented(a, Interval::closed(level - 1.0, level), strip);
    let first = oriented(a, Interval::open(level, pj.x[a]), strip);
    let block = oriented(a, Interval::closed(pj.x[a], pj.x[a] + 1.0), Interval::closed(pi.x[c] - 1.0, pi.x[c] + 1.0));
    Ok(view.region_constant(&delta, i)? && view.region_constant(&first, i)? && view.region_constant(&block, j)?)
}

/// One level of a detected chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLevel {
    pub n: usize,
    /// Index of `η_{k_n}` in the configuration.
    pub index: usize,
    pub point: MarkedPoint,
    /// Coordinate where the channel is entered (`U_m` or `V_m`); also the
    /// level at which this channel's successor is taken.
    pub entry: f64,
    /// `Z̃_n`.
    pub z_tilde: Point,
    /// `Z_n`.
    pub z: Point,
    /// Residual length `L_n`.
    pub l: f64,
    /// Gap `R_n` travelled in the previous channel before the block (absent for n = 0).
    pub r_gap: Option<f64>,
    /// `e_n`, the gap normalized by the previous level's `r(ξ)`; zero for n = 0.
    pub e: f64,
    pub b: bool,
    pub a: bool,
    /// Whether `D_{k_n}` is a successor of `D_{k_{n-1}}` at the previous entry level.
    pub successor: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub y: Point,
    pub alpha: f64,
    pub n_max: usize,
    /// Levels on which `B_n` held, in order.
    pub levels: Vec<ChainLevel>,
    /// Last `n` with `A_n`; −1 when `A_0` fails.
    pub terminal_level: i64,
    /// The window ran out before the chain was decided.
    pub truncated: bool,
}

impl ChainRecord {
    pub fn b_flags(&self) -> Vec<bool> {
        self.levels.iter().map(|l| l.b).collect()
    }

    pub fn a_flags(&self) -> Vec<bool> {
        self.levels.iter().map(|l| l.a).collect()
    }

    pub fn accepted(&self) -> usize {
        (self.terminal_level + 1) as usize
    }

    /// `U_0, U_1, …`
    pub fn u(&self) -> Vec<f64> {
        let mut out = vec![self.y[0]];
        out.extend(self.levels.iter().skip(1).filter(|l| l.n % 2 == 1).map(|l| l.z[0]));
        out
    }

    /// `V_0, V_1, …`
    pub fn v(&self) -> Vec<f64> {
        let mut out = vec![self.y[1]];
        out.extend(self.levels.iter().filter(|l| l.n % 2 == 0).map(|l| l.z[1]));
        out
    }

    /// `Ũ_1, Ũ_2, …`
    pub fn u_tilde(&self) -> Vec<f64> {
        self.levels.iter().filter(|l| l.n % 2 == 1).map(|l| l.z_tilde[0]).collect()
    }

    /// `Ṽ_2, Ṽ_3, …`
    pub fn v_tilde(&self) -> Vec<f64> {
        self.levels.iter().skip(1).filter(|l| l.n % 2 == 0).map(|l| l.z_tilde[1]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain records serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}


pub use crate::markov::rate_scale;

fn residual(p: &MarkedPoint, entry: f64) -> f64 {
    (p.x[p.sigma.axis()] - entry) / p.xi + p.r
}

enum Step {
    Decided(bool),
    Truncated,
}

fn lift(r: Result<bool>) -> Result<Step> {
    match r {
        Ok(b) => Ok(Step::Decided(b)),
        Err(Error::OutOfWindow(_)) => Ok(Step::Truncated),
        Err(e) => Err(e),
    }
}

/// Runs the constructive chain sequence from `y` for at most `n_max` successors.
pub fn detect_chain(y: Point, view: &TessellationView, n_max: usize) -> Result<ChainRecord> {
    let alpha = view.config().alpha;
    let mut rec = ChainRecord { y, alpha, n_max, levels: Vec::new(), terminal_level: -1, truncated: false };
    let w = view.window();
    let k0 = match view.phi_at(y) {
        Ok(Phi::Point(k)) => k,
        Ok(Phi::Theta) => return Ok(rec),
        Err(Error::OutOfWindow(_)) => {
            rec.truncated = true;
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    let p0 = *view.point(k0);
    if p0.sigma != Sigma::Horizontal {
        return Ok(rec);
    }
    let below = Region::closed(&Rect { x0: y[0] - 1.0, y0: y[1] - 1.0, x1: y[0], y1: y[1] });
    let b0 = match lift(view.dominated_by(&below, p0.xi))? {
        Step::Decided(b) => b,
        Step::Truncated => {
            rec.truncated = true;
            return Ok(rec);
        }
    };
    if !b0 {
        return Ok(rec);
    }
    let v1 = p0.x[1] + 1.0;
    let above = Region::new(Interval::closed(y[0] - 1.0, y[0]), Interval::open_closed(y[1], v1));
    let a0 = match lift(view.dominated_by(&above, p0.xi))? {
        Step::Decided(b) => b,
        Step::Truncated => {
            rec.truncated = true;
            return Ok(rec);
        }
    };
    rec.levels.push(ChainLevel {
        n: 0,
        index: k0,
        point: p0,
        entry: y[0],
        z_tilde: y,
        z: [y[0], v1],
        l: residual(&p0, y[0]),
        r_gap: None,
        e: 0.0,
        b: true,
        a: a0,
        successor: None,
    });
    if !a0 {
        return Ok(rec);
    }
    rec.terminal_level = 0;

    // Channel state: current point k, entry along its axis, and the far edge
    // of its strip across (the strip is [far − 1, far]).
    let (mut k, mut entry, mut far) = (k0, y[0], v1);
    for n in 0..n_max {
        let pk = *view.point(k);
        let a = pk.sigma.axis();
        let c = 1 - a;
        let (wlo, whi) = if a == 0 { (w.x0, w.x1) } else { (w.y0, w.y1) };
        let (clo, chi) = if a == 0 { (w.y0, w.y1) } else { (w.x0, w.x1) };
        if far - 2.0 < clo || far > chi || entry < wlo {
            rec.truncated = true;
            return Ok(rec);
        }
        let end = pk.x[a] + pk.r * pk.xi;
        let reach = end.min(whi);
        let search = oriented(a, Interval::closed(entry, reach), Interval::closed(far - 1.0, far));
        let mut first: Option<usize> = None;
        view.for_each_meeting(&search, |j| {
            if view.point(j).xi > pk.xi {
                let better = match first {
                    None => true,
                    Some(f) => {
                        let (ej, ef) = (view.point(j).x[a], view.point(f).x[a]);
                        ej < ef || (ej == ef && view.stronger(j, f))
                    }
                };
                if better {
                    first = Some(j);
                }
            }
        });
        let Some(p) = first.filter(|&p| view.point(p).x[a].max(entry) < end) else {
            if end > whi {
                rec.truncated = true;
            }
            return Ok(rec);
        };
        let pp = *view.point(p);
        let block_at = pp.x[a].max(entry);
        let b = pp.sigma == pk.sigma.hat() && pp.x[c] <= far - 2.0 && pp.x[c] + pp.r * pp.xi >= far;
        let z_tilde = point_on(a, block_at, far);
        let gap = block_at - entry;
        let mut level = ChainLevel {
            n: n + 1,
            index: p,
            point: pp,
            entry: far,
            z_tilde,
            z: point_on(a, block_at + 1.0, far),
            l: residual(&pp, far),
            r_gap: Some(gap),
            e: gap / rate_scale(pk.xi, alpha),
            b,
            a: false,
            successor: None,
        };
        if !b {
            rec.levels.push(level);
            return Ok(rec);
        }
        let gbox = oriented(a, Interval::open_closed(block_at, block_at + 1.0), Interval::closed(far - 2.0, far));
        if !gbox.within_rect(&w) {
            rec.truncated = true;
            rec.levels.push(level);
            return Ok(rec);
        }
        let mut g = true;
        view.for_each_meeting(&gbox, |j| {
            let q = view.point(j);
            if q.xi > pp.xi && (q.x[a] > block_at || q.x[c] > far) {
                g = false;
            }
        });
        level.a = g;
        level.successor = match is_successor(k, p, entry, view) {
            Ok(s) => Some(s),
            Err(Error::OutOfWindow(_)) => None,
            Err(e) => return Err(e),
        };
        rec.levels.push(level);
        if !g {
            return Ok(rec);
        }
        rec.terminal_level = (n + 1) as i64;
        (k, entry, far) = (p, far, block_at + 1.0);
    }
    Ok(rec)
}

/// `L_n` of an accepted level.
pub fn residual_length(chain: &ChainRecord, n: usize) -> Result<f64> {
    match chain.levels.get(n) {
        Some(l) if l.a => Ok(l.l),
        _ => invalid(format!("level {n} is not accepted")),
    }
}

/// First-hit distances of the four blocking classes beyond `Z_n`, measured
/// along the channel of level `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingTimes {
    pub n: usize,
    pub zeta: f64,
    /// `ξ_{k_n} L_n`, the distance to the channel's end.
    pub xi_l: f64,
    /// `None` when no point of the class appears within `horizon`.
    pub tau: [Option<f64>; 4],
    /// Distance up to which the window was searched.
    pub horizon: f64,
    /// The strip around the channel leaves the window.
    pub truncated: bool,
}

impl BlockingTimes {
    /// `[τ_0 = min(ξL, τ_0, …, τ_3)]`, or `None` if censoring hides the minimum.
    pub fn tau0_first(&self) -> Option<bool> {
        let observed = self.tau.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let m = observed.min(self.xi_l);
        if self.truncated || m > self.horizon {
            return None;
        }
        Some(self.tau[0] == Some(m) && m < self.xi_l)
    }
}

/// Classifies `q` relative to the stopping point, in channel coordinates.
fn blocking_class(q: &MarkedPoint, along: usize, z: Point, zeta: f64, channel: Sigma) -> Option<(usize, f64)> {
    let c = 1 - along;
    let t = q.x[along] - z[along];
    if !(t > 0.0 && q.xi > zeta) {
        return None;
    }
    let lo = q.x[c] - z[c];
    let hi = lo + q.r * q.xi;
    if q.sigma == channel.hat() {
        if lo <= -2.0 && hi >= 0.0 {
            Some((0, t))
        } else if lo <= -2.0 && hi > -1.0 && hi < 0.0 {
            Some((1, t))
        } else if lo > -2.0 && lo < 0.0 && hi >= -1.0 {
            Some((2, t))
        } else {
            None
        }
    } else if (-2.0..=0.0).contains(&lo) {
        Some((3, t))
    } else {
        None
    }
}

pub fn blocking_times(chain: &ChainRecord, n: usize, view: &TessellationView) -> Result<BlockingTimes> {
    let level = match chain.levels.get(n) {
        Some(l) if l.a => l,
        _ => return invalid(format!("level {n} is not accepted")),
    };
    let p = level.point;
    let a = p.sigma.axis();
    let c = 1 - a;
    let z = level.z;
    let w = view.window();
    let (whi, clo, chi) = if a == 0 { (w.x1, w.y0, w.y1) } else { (w.y1, w.x0, w.x1) };
    let mut out = BlockingTimes {
        n,
        zeta: p.xi,
        xi_l: p.xi * level.l,
        tau: [None; 4],
        horizon: (whi - z[a]).max(0.0),
        truncated: z[c] - 2.0 < clo || z[c] > chi,
    };
    if out.truncated || out.horizon == 0.0 {
        return Ok(out);
    }
    let region = oriented(a, Interval::closed(z[a], whi), Interval::closed(z[c] - 2.0, z[c]));
    view.for_each_meeting(&region, |j| {
        if let Some((cls, t)) = blocking_class(view.point(j), a, z, p.xi, p.sigma) {
            if t <= out.horizon && out.tau[cls].is_none_or(|s| t < s) {
                out.tau[cls] = Some(t);
            }
        }
    });
    Ok(out)
}

/// Reflects a configuration through the diagonal, swapping the two directions.
pub fn reflect(config: &Configuration) -> Result<Configuration> {
    let w = config.window;
    let points = config.points.iter().map(|p| MarkedPoint::new([p.x[1], p.x[0]], p.r, p.xi, p.sigma.hat())).collect();
    let mut out = Configuration::from_points(Rect::new(w.y0, w.x0, w.y1, w.x1)?, config.alpha, points)?;
    out.truncation_epsilon = config.truncation_epsilon;
    out.pad = config.pad;
    out.seed = config.seed;
    Ok(out)
}

/// Chain detection for a start in a vertical channel, via reflection.
pub fn detect_chain_vertical(y: Point, config: &Configuration, n_max: usize) -> Result<ChainRecord> {
    let view = TessellationView::new(reflect(config)?);
    detect_chain([y[1], y[0]], &view, n_max)
}

/// Whether a curve crosses the closed segment from `a` to `b` (axis-aligned).
pub fn crosses_segment(positions: &[Point], a: Point, b: Point) -> bool {
    let vertical = a[0] == b[0];
    let (fixed, k) = if vertical { (a[0], 0) } else { (a[1], 1) };
    let (lo, hi) = if vertical { (a[1].min(b[1]), a[1].max(b[1])) } else { (a[0].min(b[0]), a[0].max(b[0])) };
    positions.windows(2).any(|s| {
        let (p, q) = (s[0], s[1]);
        if !(p[k] <= fixed && q[k] >= fixed) {
            return false;
        }
        let other = if q[k] == p[k] {
            p[1 - k]
        } else {
            p[1 - k] + (fixed - p[k]) / (q[k] - p[k]) * (q[1 - k] - p[1 - k])
        };
        other >= lo && other <= hi
    })
}

/// The segments `S_1 = {x^σ_i = x^σ_j} ∩ D_i` and `S_2 = {x^σ̂_i = x^σ̂_i_i + 1} ∩ D_j`
/// that an integral curve must cross between a channel and its successor.
pub fn successor_segments(pi: &MarkedPoint, pj: &MarkedPoint) -> [(Point, Point); 2] {
    let a = pi.sigma.axis();
    let c = 1 - a;
    let s1 = (point_on(a, pj.x[a], pi.x[c]), point_on(a, pj.x[a], pi.x[c] + 1.0));
    let s2 = (point_on(a, pj.x[a], pi.x[c] + 1.0), point_on(a, pj.x[a] + 1.0, pi.x[c] + 1.0));
    [s1, s2]
}
