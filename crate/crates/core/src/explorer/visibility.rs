use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use super::atlas::visible_atlas;
use super::trace::{trace, Terminal};
use super::{check_positive, developed, sheets, ExploreError, LocatedPoint, EPS_GEO};
use crate::flat_complex::{ConeId, SurfaceProvider};
use crate::Vec2;

/// A cone point seen along a straight segment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sighting {
    pub id: ConeId,
    pub holonomy: Vec2,
    pub distance: f64,
}

/// Frame angles at `p` pointing along chart direction `w`, one per sheet.
fn frame_directions<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    w: Vec2,
) -> Result<Vec<f64>, ExploreError> {
    Ok(sheets(surface, p)?.iter().filter_map(|s| s.frame_of(w.arg())).collect())
}

/// Singular cone points reachable from `p` by a straight segment of length at
/// most `radius` with no cone point in its interior, sorted by distance.
pub fn visible_singularities<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
) -> Result<Vec<Sighting>, ExploreError> {
    check_positive("radius", radius)?;
    let mut out = visible_by_atlas(surface, p, radius)?;
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}

/// Candidates are the vertices lying in cells of the visible atlas, each
/// confirmed by a trace.
fn visible_by_atlas<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
) -> Result<Vec<Sighting>, ExploreError> {
    let atlas = visible_atlas(surface, p, radius)?;
    let mut out: Vec<Sighting> = Vec::new();
    let mut views = BTreeMap::new();
    for cell in &atlas.cells {
        if !views.contains_key(&cell.chart) {
            views.insert(cell.chart.clone(), surface.chart(&cell.chart)?);
        }
        for v in &views[&cell.chart].vertices {
            if v.order == 0 {
                continue;
            }
            let Some((theta, dist)) = cell.locate(v.pos, EPS_GEO) else {
                continue;
            };
            if dist < EPS_GEO || dist > radius + EPS_GEO {
                continue;
            }
            let hol = v.pos - cell.u;
            if out.iter().any(|s| s.id == v.id && s.holonomy.dist(hol) < 1e-7) {
                continue;
            }
            let tr = trace(surface, p, theta, dist)?;
            if let Terminal::HitConePoint { id, at } = &tr.terminal {
                if *id == v.id && (at - dist).abs() < 1e-7 {
                    out.push(Sighting { id: id.clone(), holonomy: hol, distance: dist });
                }
            }
        }
    }
    Ok(out)
}

/// Length of the shortest straight segment from `p` to the regular point
/// `q`, if one of length at most `radius` avoids all cone points.
pub fn visible_from<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    q: &LocatedPoint,
    radius: f64,
) -> Result<Option<f64>, ExploreError> {
    if let (Some(a), Some(b)) = (developed(surface, p), developed(surface, q)) {
        let w = b - a;
        let dist = w.norm();
        if dist > radius {
            return Ok(None);
        }
        if dist < EPS_GEO {
            return Ok((p.chart == q.chart).then_some(0.0));
        }
        for theta in frame_directions(surface, p, w)? {
            let tr = trace(surface, p, theta, dist)?;
            if tr.terminal == Terminal::ReachedLength && tr.end.chart == q.chart && tr.end.pos.dist(q.pos) < 1e-7 {
                return Ok(Some(dist));
            }
        }
        return Ok(None);
    }
    let atlas = visible_atlas(surface, p, radius)?;
    Ok(atlas
        .cells_containing(&q.chart, q.pos)
        .map(|c| c.u.dist(q.pos))
        .min_by(f64::total_cmp))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Predecessor {
    Source,
    Cone(ConeId),
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceMap {
    pub source: LocatedPoint,
    pub budget: f64,
    pub entries: BTreeMap<ConeId, (f64, Predecessor)>,
}

impl DistanceMap {
    pub fn get(&self, id: &ConeId) -> Option<f64> {
        self.entries.get(id).map(|e| e.0)
    }
}

#[derive(PartialEq)]
struct Queued(f64, Option<ConeId>, Predecessor);

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest distances from `source` to cone points, over paths that are
/// straight except at cone points, up to `budget`.
pub fn dijkstra<S: SurfaceProvider + ?Sized>(
    surface: &S,
    source: &LocatedPoint,
    budget: f64,
) -> Result<DistanceMap, ExploreError> {
    check_positive("budget", budget)?;
    let mut entries: BTreeMap<ConeId, (f64, Predecessor)> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Queued(0.0, None, Predecessor::Source));
    let mut source_done = false;
    while let Some(Queued(d, node, pred)) = heap.pop() {
        let from = match &node {
            None => {
                if source_done {
                    continue;
                }
                source_done = true;
                source.clone()
            }
            Some(id) => {
                if entries.contains_key(id) || source.cone.as_ref() == Some(id) {
                    continue;
                }
                entries.insert(id.clone(), (d, pred));
                LocatedPoint::cone(surface, id)?
            }
        };
        let reach = budget - d;
        if reach <= 0.0 {
            continue;
        }
        for s in visible_singularities(surface, &from, reach)? {
            if entries.contains_key(&s.id) || source.cone.as_ref() == Some(&s.id) {
                continue;
            }
            let p = match &node {
                None => Predecessor::Source,
                Some(id) => Predecessor::Cone(id.clone()),
            };
            heap.push(Queued(d + s.distance, Some(s.id), p));
        }
    }
    Ok(DistanceMap { source: source.clone(), budget, entries })
}

/// Shortest-path distance from `p` to `q` if it is at most `budget`.
pub fn distance<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    q: &LocatedPoint,
    budget: f64,
) -> Result<Option<f64>, ExploreError> {
    if let Some(id) = &q.cone {
        if p.cone.as_ref() == Some(id) {
            return Ok(Some(0.0));
        }
        return Ok(dijkstra(surface, p, budget)?.get(id));
    }
    let map = dijkstra(surface, p, budget)?;
    let mut best = visible_from(surface, p, q, budget)?;
    for (id, (d, _)) in &map.entries {
        let reach = budget - d;
        if reach <= 0.0 || best.is_some_and(|b| b <= *d) {
            continue;
        }
        let from = LocatedPoint::cone(surface, id)?;
        if let Some(h) = visible_from(surface, &from, q, reach)? {
            let total = d + h;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    Ok(best.filter(|&b| b <= budget))
}

/// Cone points within metric distance `radius` of `p`, nearest first.
pub fn metric_ball_singularities<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
) -> Result<Vec<(ConeId, f64)>, ExploreError> {
    let map = dijkstra(surface, p, radius)?;
    let mut out: Vec<(ConeId, f64)> = map.entries.into_iter().map(|(id, (d, _))| (id, d)).collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
