use std::f64::consts::PI;

use serde::Serialize;

use super::{check_positive, ExploreError, LocatedPoint, EPS_GEO, EPS_HIT};
use crate::flat_complex::{ChartId, ChartView, ConeId, Edge, PortalId, SurfaceError, SurfaceProvider};
use crate::Vec2;

/// Crossings closer than this to the current position are the ones just made.
const T_MIN: f64 = 1e-12;
const MAX_LEGS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leg {
    pub chart: ChartId,
    pub a: Vec2,
    pub b: Vec2,
}

impl Leg {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terminal {
    ReachedLength,
    HitConePoint { id: ConeId, at: f64 },
    /// The path grazed a cone point or ran along a slit.
    Degenerate { at: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub legs: Vec<Leg>,
    pub terminal: Terminal,
    /// Where the path stopped and the direction it was travelling in.
    pub end: LocatedPoint,
    pub end_dir: Vec2,
}

impl Trace {
    pub fn length(&self) -> f64 {
        self.legs.iter().map(Leg::length).sum()
    }

    pub fn hit(&self) -> Option<(&ConeId, f64)> {
        match &self.terminal {
            Terminal::HitConePoint { id, at } => Some((id, *at)),
            _ => None,
        }
    }
}

/// Where a ray `p + t·d` meets an edge.
pub(crate) enum EdgeHit {
    Miss,
    Cross { t: f64 },
    /// Runs along the edge from parameter `t` on.
    Along { t: f64 },
}

pub(crate) fn ray_edge(p: Vec2, d: Vec2, edge: &Edge) -> EdgeHit {
    let q = edge.start();
    let e = edge.direction();
    let len = edge.length();
    let w = q - p;
    let denom = d.cross(e);
    if denom.abs() < 1e-14 {
        if w.cross(d).abs() >= EPS_GEO {
            return EdgeHit::Miss;
        }
        let t0 = w.dot(d);
        let t1 = if len.is_finite() { (q + e * len - p).dot(d) } else if e.dot(d) > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        if t0.max(t1) <= T_MIN {
            return EdgeHit::Miss;
        }
        return EdgeHit::Along { t: t0.min(t1).max(0.0) };
    }
    let t = w.cross(e) / denom;
    let u = w.cross(d) / denom;
    if u < 0.0 || u > len {
        return EdgeHit::Miss;
    }
    EdgeHit::Cross { t }
}

struct Entry {
    portal: PortalId,
    edge: Edge,
}

fn is_entry(entry: &Option<Entry>, portal: &PortalId, edge: &Edge) -> bool {
    entry
        .as_ref()
        .is_some_and(|e| &e.portal == portal && e.edge.start().dist(edge.start()) < 1e-12 && e.edge.direction().dist(edge.direction()) < 1e-12)
}

fn budget_check(view: &ChartView, z: Vec2) -> Result<(), ExploreError> {
    match view.budget {
        Some(b) if z.norm() > b + EPS_GEO => Err(SurfaceError::NeedsExpansion {
            chart: view.id.clone(),
            have: b,
            need: z.norm(),
        }
        .into()),
        _ => Ok(()),
    }
}

/// Unit-speed straight path of the given length leaving `start` in direction
/// `theta` (chart angle for a regular start, frame angle for a cone point).
pub fn trace<S: SurfaceProvider + ?Sized>(
    surface: &S,
    start: &LocatedPoint,
    theta: f64,
    length: f64,
) -> Result<Trace, ExploreError> {
    check_positive("length", length)?;
    let (mut chart, mut p, mut d) = match &start.cone {
        Some(id) => {
            let cone = surface.cone_point(id)?;
            let (inc, local) = cone.locate(theta);
            (inc.chart.clone(), inc.pos, Vec2::polar(local))
        }
        None => {
            let dom = surface.chart_domain(&start.chart)?;
            if !dom.contains(start.pos, EPS_GEO) {
                return Err(ExploreError::BadStart(format!("{:?} lies outside chart {}", start.pos, start.chart)));
            }
            (start.chart.clone(), start.pos, Vec2::polar(theta))
        }
    };
    let mut entry: Option<Entry> = None;
    let mut legs = Vec::new();
    let mut travelled = 0.0;
    loop {
        if legs.len() > MAX_LEGS {
            return Err(ExploreError::InvalidParameter("trace did not terminate".into()));
        }
        let remaining = length - travelled;
        let view = surface.chart(&chart)?;
        budget_check(&view, p)?;

        // nearest vertex on the path
        let mut vertex: Option<(f64, usize, bool)> = None;
        for (k, v) in view.vertices.iter().enumerate() {
            let w = v.pos - p;
            if w.norm() < EPS_GEO {
                continue;
            }
            let t = w.dot(d);
            if t <= 0.0 || t > remaining + EPS_GEO {
                continue;
            }
            let perp = w.cross(d).abs();
            if perp >= EPS_GEO {
                continue;
            }
            let exact = perp < EPS_HIT * w.norm().max(1.0) || v.order == 0;
            if vertex.is_none_or(|(bt, _, _)| t < bt) {
                vertex = Some((t, k, exact));
            }
        }
        // nearest portal crossing, and slits the path would run along
        let mut crossing: Option<(f64, usize)> = None;
        let mut along = f64::INFINITY;
        for (k, side) in view.sides.iter().enumerate() {
            if is_entry(&entry, &side.portal, &side.here) {
                continue;
            }
            match ray_edge(p, d, &side.here) {
                EdgeHit::Cross { t } if t > T_MIN && t <= remaining => {
                    if crossing.is_none_or(|(bt, _)| t < bt) {
                        crossing = Some((t, k));
                    }
                }
                EdgeHit::Along { t } if matches!(side.here, Edge::Ray { .. }) && t <= remaining => {
                    along = along.min(t);
                }
                _ => {}
            }
        }
        let t_cross = crossing.map_or(f64::INFINITY, |c| c.0);

        if let Some((t, k, exact)) = vertex {
            if t <= t_cross + EPS_GEO && t <= along + EPS_GEO {
                let v = &view.vertices[k];
                let b = if exact { v.pos } else { p + d * t };
                budget_check(&view, b)?;
                legs.push(Leg { chart: chart.clone(), a: p, b });
                travelled += t;
                if !exact {
                    log::debug!("trace grazes vertex {} at distance {}", v.id, (v.pos - p).cross(d).abs());
                    return Ok(done(legs, Terminal::Degenerate { at: travelled }, chart, b, d));
                }
                if v.order > 0 {
                    let id = v.id.clone();
                    return Ok(done(legs, Terminal::HitConePoint { id, at: travelled }, chart, v.pos, d));
                }
                // regular vertex: continue straight through it
                let cone = surface.cone_point(&v.id)?;
                let back = (-d).arg();
                let Some(f) = cone.frame_angle(&chart, v.pos, back) else {
                    return Err(SurfaceError::UnknownCone(v.id.clone()).into());
                };
                let (inc, local) = cone.locate(f + PI);
                chart = inc.chart.clone();
                p = inc.pos;
                d = Vec2::polar(local);
                entry = None;
                continue;
            }
        }
        if along <= t_cross && along <= remaining {
            let b = p + d * along;
            if along > 0.0 {
                legs.push(Leg { chart: chart.clone(), a: p, b });
            }
            return Ok(done(legs, Terminal::Degenerate { at: travelled + along }, chart, b, d));
        }
        if let Some((t, k)) = crossing {
            let side = &view.sides[k];
            let c = p + d * t;
            budget_check(&view, c)?;
            legs.push(Leg { chart: chart.clone(), a: p, b: c });
            travelled += t;
            chart = side.there.clone();
            p = c + side.shift;
            entry = Some(Entry { portal: side.portal.clone(), edge: side.there_edge });
            continue;
        }
        let b = p + d * remaining;
        budget_check(&view, b)?;
        legs.push(Leg { chart: chart.clone(), a: p, b });
        return Ok(done(legs, Terminal::ReachedLength, chart, b, d));
    }
}

fn done(legs: Vec<Leg>, terminal: Terminal, chart: ChartId, pos: Vec2, dir: Vec2) -> Trace {
    Trace { legs, terminal, end: LocatedPoint::regular(chart, pos), end_dir: dir }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_plane::{sample_plane, PlaneNode, TruncatedPlane};
    use crate::square_tiled::{build_sts, parse_cycles, Perm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, TAU};

    pub(crate) fn two_level() -> TruncatedPlane {
        TruncatedPlane::from_tree(PlaneNode::complete(
            vec![Vec2::new(1.0, 0.0)],
            vec![PlaneNode::complete(vec![Vec2::new(0.0, 1.0)], vec![])],
        ))
    }

    #[test]
    fn torus_wraps() {
        let t = build_sts(Perm::identity(1), Perm::identity(1)).unwrap();
        let start = LocatedPoint::regular(ChartId::index(0), Vec2::new(0.2, 0.2));
        let tr = trace(&t, &start, 0.0, 2.0).unwrap();
        assert_eq!(tr.terminal, Terminal::ReachedLength);
        assert_eq!(tr.legs.len(), 3);
        assert!(tr.end.pos.dist(Vec2::new(0.2, 0.2)) < 1e-12);
        assert!((tr.length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_plane_is_one_leg() {
        let p = TruncatedPlane::from_tree(PlaneNode::leaf());
        let tr = trace(&p, &LocatedPoint::root(), 1.3, 5.0).unwrap();
        assert_eq!(tr.legs.len(), 1);
        assert_eq!(tr.terminal, Terminal::ReachedLength);
    }

    #[test]
    fn grandchild_is_not_hit_from_the_root() {
        let p = two_level();
        let tr = trace(&p, &LocatedPoint::root(), FRAC_PI_4, 2f64.sqrt()).unwrap();
        assert_eq!(tr.terminal, Terminal::ReachedLength);
        assert_eq!(tr.legs.len(), 1);
        assert_eq!(tr.end.chart, ChartId::root());
        let tr = trace(&p, &LocatedPoint::root(), 0.0, 3.0).unwrap();
        assert_eq!(tr.hit().unwrap().0, &ConeId(vec![0]));
    }

    #[test]
    fn crossing_a_slit_enters_the_child() {
        let p = two_level();
        // from (2, -1) straight up crosses the slit of 1 at (2, 0)
        let start = LocatedPoint::regular(ChartId::root(), Vec2::new(2.0, -1.0));
        let tr = trace(&p, &start, PI / 2.0, 2.0).unwrap();
        assert_eq!(tr.legs.len(), 2);
        assert_eq!(tr.end.chart, ChartId(vec![0]));
        assert!(tr.end.pos.dist(Vec2::new(1.0, 1.0)) < 1e-12);
        // and the child's cut leads back to the root
        let back = trace(&p, &tr.end, -PI / 2.0, 2.0).unwrap();
        assert_eq!(back.end.chart, ChartId::root());
        assert!(back.end.pos.dist(start.pos) < 1e-12);
    }

    #[test]
    fn cone_point_sheets() {
        let p = two_level();
        let c = LocatedPoint::cone(&p, &ConeId(vec![0])).unwrap();
        // frame angle π/2 is the parent sheet: nothing there
        let tr = trace(&p, &c, PI / 2.0, 3.0).unwrap();
        assert_eq!(tr.terminal, Terminal::ReachedLength);
        // frame angle 2π + π/2 is the child sheet, where i sits at distance 1
        let tr = trace(&p, &c, TAU + PI / 2.0, 3.0).unwrap();
        assert_eq!(tr.hit(), Some((&ConeId(vec![0, 0]), 1.0)));
    }

    #[test]
    fn regular_corners_are_passed_through() {
        let t = build_sts(Perm::identity(1), Perm::identity(1)).unwrap();
        let start = LocatedPoint::regular(ChartId::index(0), Vec2::new(0.5, 0.5));
        let tr = trace(&t, &start, FRAC_PI_4, 2f64.sqrt()).unwrap();
        assert_eq!(tr.terminal, Terminal::ReachedLength);
        assert!(tr.end.pos.dist(Vec2::new(0.5, 0.5)) < 1e-12);
    }

    #[test]
    fn singular_corner_stops_the_path() {
        let s = build_sts(parse_cycles("(1 2)", 3).unwrap(), parse_cycles("(1 3)", 3).unwrap()).unwrap();
        let start = LocatedPoint::regular(ChartId::index(0), Vec2::new(0.5, 0.5));
        let tr = trace(&s, &start, FRAC_PI_4, 1.0).unwrap();
        assert_eq!(tr.hit().unwrap().0, &ConeId::index(0));
        let near = trace(&s, &start, FRAC_PI_4 + 1e-10, 1.0).unwrap();
        assert!(matches!(near.terminal, Terminal::Degenerate { .. }));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let p = sample_plane(1, 4.0, 1.0).unwrap();
        let err = trace(&p, &LocatedPoint::root(), 0.3, 1.5).unwrap_err();
        assert!(err.is_needs_expansion());
    }

    #[test]
    fn traces_stay_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let p = sample_plane(seed, 4.0, 1.0).unwrap();
            for _ in 0..1000 {
                let th = rng.random::<f64>() * TAU;
                let tr = trace(&p, &LocatedPoint::root(), th, 1.0).unwrap();
                assert!(tr.length() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn reversal_returns_to_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for seed in 0..20 {
            let p = sample_plane(seed, 4.0, 2.0).unwrap();
            let start = LocatedPoint::regular(ChartId::root(), Vec2::new(0.1, -0.05));
            for _ in 0..50 {
                let th = rng.random::<f64>() * TAU;
                let tr = trace(&p, &start, th, 0.9).unwrap();
                if tr.terminal != Terminal::ReachedLength {
                    continue;
                }
                let back = trace(&p, &tr.end, (-tr.end_dir).arg(), tr.length()).unwrap();
                assert_eq!(back.end.chart, start.chart);
                assert!(back.end.pos.dist(start.pos) < 1e-9);
            }
        }
    }
}
