//! Domains of influence, the strongest-cover selector φ and region queries,
//! backed by a unit-cell grid over the validity window.

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect, Region};
use crate::pointfield::{Configuration, MarkedPoint, Sigma};
use serde::Serialize;
use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InfluenceDomain {
    pub base: MarkedPoint,
    pub rect: Rect,
}

pub fn domain_of(eta: &MarkedPoint) -> InfluenceDomain {
    InfluenceDomain { base: *eta, rect: eta.domain() }
}

/// Value of the selector: the winning point's index, or Θ when nothing covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phi {
    Theta,
    Point(usize),
}

impl Phi {
    pub fn index(self) -> Option<usize> {
        match self {
            Phi::Theta => None,
            Phi::Point(i) => Some(i),
        }
    }
}

struct Grid {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    fn cell_x(&self, x: f64) -> usize {
        ((x - self.x0).floor().max(0.0) as usize).min(self.nx - 1)
    }

    fn cell_y(&self, y: f64) -> usize {
        ((y - self.y0).floor().max(0.0) as usize).min(self.ny - 1)
    }

    fn cell(&self, ix: usize, iy: usize) -> &[u32] {
        let k = iy * self.nx + ix;
        &self.items[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }
}

/// Immutable query structure over a configuration.
pub struct TessellationView {
    config: Configuration,
    domains: Vec<Rect>,
    grid: Grid,
    ties: AtomicU64,
}

impl TessellationView {
    pub fn new(config: Configuration) -> Self {
        let w = config.window;
        let nx = (w.width().ceil() as usize).max(1);
        let ny = (w.height().ceil() as usize).max(1);
        let domains: Vec<Rect> = config.points.iter().map(|p| p.domain()).collect();
        let mut grid = Grid { x0: w.x0, y0: w.y0, nx, ny, offsets: vec![0; nx * ny + 1], items: Vec::new() };
        let spans: Vec<Option<(usize, usize, usize, usize)>> = domains
            .iter()
            .map(|d| {
                d.intersection(&w).map(|c| (grid.cell_x(c.x0), grid.cell_x(c.x1), grid.cell_y(c.y0), grid.cell_y(c.y1)))
            })
            .collect();
        let mut counts = vec![0u32; nx * ny];
        for (ix0, ix1, iy0, iy1) in spans.iter().flatten() {
            for iy in *iy0..=*iy1 {
                for ix in *ix0..=*ix1 {
                    counts[iy * nx + ix] += 1;
                }
            }
        }
        for k in 0..nx * ny {
            grid.offsets[k + 1] = grid.offsets[k] + counts[k];
        }
        grid.items = vec![0; grid.offsets[nx * ny] as usize];
        let mut fill = grid.offsets.clone();
        for (i, span) in spans.iter().enumerate() {
            if let Some((ix0, ix1, iy0, iy1)) = span {
                for iy in *iy0..=*iy1 {
                    for ix in *ix0..=*ix1 {
                        let k = iy * nx + ix;
                        grid.items[fill[k] as usize] = i as u32;
                        fill[k] += 1;
                    }
                }
            }
        }
        TessellationView { config, domains, grid, ties: AtomicU64::new(0) }
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn window(&self) -> Rect {
        self.config.window
    }

    pub fn point(&self, i: usize) -> &MarkedPoint {
        &self.config.points[i]
    }

    pub fn domain(&self, i: usize) -> Rect {
        self.domains[i]
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Number of times the deterministic tiebreak on equal strengths was used.
    pub fn tie_count(&self) -> u64 {
        self.ties.load(AtomicOrdering::Relaxed)
    }

    /// Whether point `i` beats point `j`.
    pub fn stronger(&self, i: usize, j: usize) -> bool {
        self.compare(i, j) == Ordering::Greater
    }

    fn compare(&self, i: usize, j: usize) -> Ordering {
        let (a, b) = (&self.config.points[i], &self.config.points[j]);
        if i != j && a.xi == b.xi {
            self.ties.fetch_add(1, AtomicOrdering::Relaxed);
        }
        a.strength_cmp(b)
    }

    fn check_point(&self, p: Point) -> Result<()> {
        if self.config.window.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfWindow(format!("point ({}, {}) outside {:?}", p[0], p[1], self.config.window)))
        }
    }

    fn check_region(&self, r: &Region) -> Result<()> {
        if r.within_rect(&self.config.window) {
            Ok(())
        } else {
            Err(Error::OutOfWindow(format!("region {r:?} outside {:?}", self.config.window)))
        }
    }

    fn argmax<I: Iterator<Item = usize>>(&self, it: I) -> Phi {
        let mut best: Option<usize> = None;
        for i in it {
            best = match best {
                None => Some(i),
                Some(b) if self.compare(i, b) == Ordering::Greater => Some(i),
                keep => keep,
            };
        }
        best.map_or(Phi::Theta, Phi::Point)
    }

    pub fn phi_at(&self, p: Point) -> Result<Phi> {
        self.check_point(p)?;
        let cell = self.grid.cell(self.grid.cell_x(p[0]), self.grid.cell_y(p[1]));
        Ok(self.argmax(cell.iter().map(|&i| i as usize).filter(|&i| self.domains[i].contains(p))))
    }

    /// Linear-scan reference implementation of [`phi_at`](Self::phi_at).
    pub fn phi_at_scan(&self, p: Point) -> Result<Phi> {
        self.check_point(p)?;
        Ok(self.argmax((0..self.domains.len()).filter(|&i| self.domains[i].contains(p))))
    }

    /// Strength of φ(p), zero for Θ.
    pub fn strength_at(&self, p: Point) -> Result<f64> {
        Ok(self.phi_at(p)?.index().map_or(0.0, |i| self.point(i).xi))
    }

    /// Calls `f` with every domain meeting `region` (each exactly once).
    pub fn for_each_meeting<F: FnMut(usize)>(&self, region: &Region, mut f: F) {
        let Some(c) = region.closure().and_then(|c| c.intersection(&self.config.window)) else { return };
        let (ix0, ix1) = (self.grid.cell_x(c.x0), self.grid.cell_x(c.x1));
        let (iy0, iy1) = (self.grid.cell_y(c.y0), self.grid.cell_y(c.y1));
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                for &i in self.grid.cell(ix, iy) {
                    let i = i as usize;
                    if !region.meets_rect(&self.domains[i]) {
                        continue;
                    }
                    // Report each domain from the first cell it shares with the query.
                    let d = self.domains[i].intersection(&self.config.window).expect("indexed domains meet the window");
                    if self.grid.cell_x(d.x0).max(ix0) == ix && self.grid.cell_y(d.y0).max(iy0) == iy {
                        f(i);
                    }
                }
            }
        }
    }

    /// Indices of all domains meeting `region`, ascending.
    pub fn meeting(&self, region: &Region) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_meeting(region, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn meeting_scan(&self, region: &Region) -> Vec<usize> {
        (0..self.domains.len()).filter(|&i| region.meets_rect(&self.domains[i])).collect()
    }

    /// Whether φ ≡ η_i on `region`: the region lies in `D(η_i)` and no stronger
    /// domain meets it.
    pub fn region_constant(&self, region: &Region, i: usize) -> Result<bool> {
        self.check_region(region)?;
        if region.is_empty() {
            return Ok(true);
        }
        if !region.within_rect(&self.domains[i]) {
            return Ok(false);
        }
        let mut ok = true;
        self.for_each_meeting(region, |j| {
            if ok && j != i && self.stronger(j, i) {
                ok = false;
            }
        });
        Ok(ok)
    }

    pub fn region_constant_scan(&self, region: &Region, i: usize) -> Result<bool> {
        self.check_region(region)?;
        if region.is_empty() {
            return Ok(true);
        }
        if !region.within_rect(&self.domains[i]) {
            return Ok(false);
        }
        Ok(!self.meeting_scan(region).into_iter().any(|j| j != i && self.stronger(j, i)))
    }

    /// Whether no domain meeting `region` is stronger than `strength`.
    pub fn dominated_by(&self, region: &Region, strength: f64) -> Result<bool> {
        self.check_region(region)?;
        let mut ok = true;
        self.for_each_meeting(region, |j| {
            if self.domains.len() > j && self.config.points[j].xi > strength {
                ok = false;
            }
        });
        Ok(ok)
    }

    pub fn v_tilde_at(&self, p: Point) -> Result<[f64; 2]> {
        Ok(match self.phi_at(p)? {
            Phi::Theta => [0.5, 0.5],
            Phi::Point(i) => match self.point(i).sigma {
                Sigma::Horizontal => [1.0, 0.0],
                Sigma::Vertical => [0.0, 1.0],
            },
        })
    }

    /// Domains (clipped to the window) for visualization tools.
    pub fn dump_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .config
            .points
            .iter()
            .zip(&self.domains)
            .filter_map(|(p, d)| {
                d.intersection(&self.config.window).map(|c| {
                    serde_json::json!({
                        "x": p.x, "r": p.r, "xi": p.xi, "sigma": p.sigma,
                        "rect": d.to_array(), "clipped": c.to_array(),
                    })
                })
            })
            .collect();
        serde_json::json!({ "window": self.config.window.to_array(), "domains": cells })
    }
}
