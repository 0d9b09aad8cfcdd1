//! Portal rendering of the visible set.
//!
//! Each window is a range of frame angles seen from a viewpoint `u` (given in
//! the window's chart coordinates), bounded inside by the portal it was
//! entered through. A window is cut at the directions of vertices and of
//! points where edges leave the disk of radius `R`; on each piece the nearest
//! edge is fixed, so the visible part is a cell between two straight lines or
//! between a line and the arc, and the pieces ending on a portal spawn child
//! windows in the chart behind it.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use super::trace::{ray_edge, EdgeHit};
use super::{check_positive, sheets, total_angle, ExploreError, LocatedPoint, DEFAULT_MAX_DEPTH, EPS_GEO};
use crate::flat_complex::{ChartId, ChartView, Edge, PortalId, SurfaceError, SurfaceProvider};
use crate::geom::normalize_angle;
use crate::Vec2;

/// Cut angles near tangencies carry errors of order the square root of
/// machine epsilon, so the budget check allows this much overshoot.
const BUDGET_SLACK: f64 = 1e-7;

/// Cells narrower than this are dropped and their area bounded separately.
pub const MIN_CELL_WIDTH: f64 = 1e-12;

/// Radial bound of a cell as a function of the frame angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    /// The viewpoint itself.
    Origin,
    /// The line at distance `d` whose foot lies at frame angle `phi`.
    Line { d: f64, phi: f64 },
    Arc { r: f64 },
}

impl Bound {
    pub fn radius(&self, theta: f64) -> f64 {
        match *self {
            Bound::Origin => 0.0,
            Bound::Line { d, phi } => d / (theta - phi).cos(),
            Bound::Arc { r } => r,
        }
    }

    /// `∫ r(θ)²/2 dθ` over `[lo, hi]`.
    pub fn sector_area(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Bound::Origin => 0.0,
            Bound::Line { d, phi } => 0.5 * d * d * ((hi - phi).tan() - (lo - phi).tan()),
            Bound::Arc { r } => 0.5 * r * r * (hi - lo),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub chart: ChartId,
    /// The viewpoint developed into this chart's coordinates.
    pub u: Vec2,
    pub lo: f64,
    pub hi: f64,
    /// Frame angle minus chart angle.
    pub shift: f64,
    pub inner: Bound,
    pub outer: Bound,
    pub area: f64,
    /// Number of portals crossed to reach the cell.
    pub depth: usize,
}

impl Cell {
    pub fn local_dir(&self, theta: f64) -> Vec2 {
        Vec2::polar(theta - self.shift)
    }

    /// Frame angle and distance of `z` (chart coordinates) if it lies in the cell.
    pub fn locate(&self, z: Vec2, tol: f64) -> Option<(f64, f64)> {
        let w = z - self.u;
        let r = w.norm();
        if r < tol {
            return matches!(self.inner, Bound::Origin).then_some((self.lo, 0.0));
        }
        let ang_tol = tol / r;
        let theta = normalize_angle(w.arg() + self.shift, self.lo - ang_tol);
        if theta > self.hi + ang_tol {
            return None;
        }
        let th = theta.clamp(self.lo, self.hi);
        (r >= self.inner.radius(th) - tol && r <= self.outer.radius(th) + tol).then_some((theta, r))
    }

    pub fn contains(&self, z: Vec2) -> bool {
        self.locate(z, 1e-12).is_some()
    }

    /// Chart coordinates of frame direction `theta` at distance `r`.
    pub fn point(&self, theta: f64, r: f64) -> Vec2 {
        self.u + self.local_dir(theta) * r
    }

    /// Axis-aligned bounding box `(min, max)` in chart coordinates.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut pts = vec![];
        for th in [self.lo, self.hi] {
            pts.push(self.point(th, self.inner.radius(th)));
            pts.push(self.point(th, self.outer.radius(th)));
        }
        if let Bound::Arc { r } = self.outer {
            // chart axis directions inside the cell
            for k in 0..4 {
                let th = normalize_angle(k as f64 * FRAC_PI_2 + self.shift, self.lo);
                if th < self.hi {
                    pts.push(self.point(th, r));
                }
            }
        }
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            lo = Vec2::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = Vec2::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        (lo, hi)
    }

    /// Largest `|z|` over the cell, for budget checks. No point of the cell
    /// is farther than `radius` from the viewpoint.
    fn max_norm(&self, radius: f64) -> f64 {
        let mut m: f64 = 0.0;
        for th in [self.lo, self.hi] {
            m = m.max(self.point(th, self.outer.radius(th)).norm());
            m = m.max(self.point(th, self.inner.radius(th)).norm());
        }
        if let Bound::Arc { r } = self.outer {
            // farthest point of the arc from the chart origin
            let th = normalize_angle(self.u.arg() + self.shift, self.lo);
            if th < self.hi && self.u.norm() > 0.0 {
                m = m.max(self.u.norm() + r);
            }
        }
        m.min(self.u.norm() + radius)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VisibleAtlas {
    pub viewpoint: LocatedPoint,
    pub radius: f64,
    /// Total angle around the viewpoint.
    pub total_angle: f64,
    pub cells: Vec<Cell>,
    pub total_area: f64,
    /// Upper bound on the area of dropped slivers.
    pub dropped_area_bound: f64,
    pub windows: usize,
}

impl VisibleAtlas {
    /// `total_angle · R² / 2`, the area the cells should tile.
    pub fn expected_area(&self) -> f64 {
        0.5 * self.total_angle * self.radius * self.radius
    }

    /// Cells of `chart` containing `z`.
    pub fn cells_containing<'a>(&'a self, chart: &'a ChartId, z: Vec2) -> impl Iterator<Item = &'a Cell> + 'a {
        self.cells.iter().filter(move |c| &c.chart == chart && c.contains(z))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AtlasOptions {
    pub max_depth: usize,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        AtlasOptions { max_depth: DEFAULT_MAX_DEPTH }
    }
}

struct Window {
    chart: ChartId,
    u: Vec2,
    lo: f64,
    hi: f64,
    shift: f64,
    entry: Option<(PortalId, Edge)>,
    depth: usize,
}

pub fn visible_atlas<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
) -> Result<VisibleAtlas, ExploreError> {
    visible_atlas_with(surface, p, radius, AtlasOptions::default())
}

pub fn visible_atlas_with<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
    opts: AtlasOptions,
) -> Result<VisibleAtlas, ExploreError> {
    check_positive("radius", radius)?;
    let mut stack: Vec<Window> = sheets(surface, p)?
        .into_iter()
        .map(|s| Window {
            chart: s.chart,
            u: s.pos,
            lo: s.offset,
            hi: s.offset + s.span,
            shift: s.offset - s.start,
            entry: None,
            depth: 0,
        })
        .collect();
    let mut atlas = VisibleAtlas {
        viewpoint: p.clone(),
        radius,
        total_angle: total_angle(surface, p)?,
        cells: Vec::new(),
        total_area: 0.0,
        dropped_area_bound: 0.0,
        windows: 0,
    };
    while let Some(w) = stack.pop() {
        if w.depth > opts.max_depth {
            return Err(ExploreError::DepthExceeded(opts.max_depth));
        }
        atlas.windows += 1;
        let view = surface.chart(&w.chart)?;
        render_window(&view, &w, radius, &mut atlas, &mut stack)?;
    }
    atlas.total_area = atlas.cells.iter().map(|c| c.area).sum();
    Ok(atlas)
}

fn line_bound(u: Vec2, edge: &Edge, shift: f64) -> Bound {
    let q = edge.start();
    let e = edge.direction();
    let w = q - u;
    let foot = w - e * w.dot(e);
    Bound::Line { d: foot.norm(), phi: foot.arg() + shift }
}

fn render_window(
    view: &ChartView,
    w: &Window,
    radius: f64,
    atlas: &mut VisibleAtlas,
    stack: &mut Vec<Window>,
) -> Result<(), ExploreError> {
    let to_frame = |local: f64| normalize_angle(local + w.shift, w.lo);
    let mut cuts = vec![w.lo, w.hi];
    for v in &view.vertices {
        let d = v.pos - w.u;
        if d.norm() > EPS_GEO && d.norm() <= radius + EPS_GEO {
            cuts.push(to_frame(d.arg()));
        }
    }
    for side in &view.sides {
        for z in side.here.circle_crossings(w.u, radius) {
            if z.dist(w.u) > EPS_GEO {
                cuts.push(to_frame((z - w.u).arg()));
            }
        }
    }
    cuts.retain(|&a| a >= w.lo && a <= w.hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let inner = match &w.entry {
        None => Bound::Origin,
        Some((_, edge)) => line_bound(w.u, edge, w.shift),
    };
    // (lo, hi, outer bound, portal side index)
    let mut pieces: Vec<(f64, f64, Bound, Option<usize>)> = Vec::new();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < MIN_CELL_WIDTH {
            atlas.dropped_area_bound += 0.5 * radius * radius * (b - a);
            continue;
        }
        let mid = 0.5 * (a + b);
        let dir = Vec2::polar(mid - w.shift);
        let r_in = inner.radius(mid);
        let mut best: Option<(f64, usize)> = None;
        for (k, side) in view.sides.iter().enumerate() {
            if let Some((pid, e)) = &w.entry {
                if &side.portal == pid && side.here == *e {
                    continue;
                }
            }
            if let EdgeHit::Cross { t } = ray_edge(w.u, dir, &side.here) {
                if t > r_in + 1e-12 && t < radius && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, k));
                }
            }
        }
        let (outer, via) = match best {
            Some((_, k)) => (line_bound(w.u, &view.sides[k].here, w.shift), Some(k)),
            None => (Bound::Arc { r: radius }, None),
        };
        match pieces.last_mut() {
            Some(last) if last.1 == a && last.2 == outer && last.3 == via => last.1 = b,
            _ => pieces.push((a, b, outer, via)),
        }
    }
    for (lo, hi, outer, via) in pieces {
        let cell = Cell {
            chart: w.chart.clone(),
            u: w.u,
            lo,
            hi,
            shift: w.shift,
            inner,
            outer,
            area: outer.sector_area(lo, hi) - inner.sector_area(lo, hi),
            depth: w.depth,
        };
        if let Some(b) = view.budget {
            let m = cell.max_norm(radius);
            if m > b + BUDGET_SLACK * b.max(1.0) {
                log::debug!("cell {cell:?} exceeds budget {b}");
                return Err(SurfaceError::NeedsExpansion { chart: view.id.clone(), have: b, need: m }.into());
            }
        }
        atlas.cells.push(cell);
        if let Some(k) = via {
            let side = &view.sides[k];
            stack.push(Window {
                chart: side.there.clone(),
                u: w.u + side.shift,
                lo,
                hi,
                shift: w.shift,
                entry: Some((side.portal.clone(), side.there_edge)),
                depth: w.depth + 1,
            });
        }
    }
    Ok(())
}
