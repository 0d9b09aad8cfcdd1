//! Charts glued along translation portals, with cone points at the seams.
//!
//! A surface is presented to the explorer through [`SurfaceProvider`]: one
//! [`ChartView`] per chart listing the portal sides and vertices known in that
//! chart. The Poisson plane answers these lazily from its sampled tree; finite
//! surfaces are stored explicitly as a [`FlatComplex`].
//!
//! Crossing convention: a straight path meeting a portal edge `here` in one
//! chart continues in the chart on the other side at `point + shift`, with the
//! same direction. For the Poisson slits this means approaching the parent
//! slit from its left emerges on the right of the child's cut, and vice versa.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{intersect_segment_ray, normalize_angle, GeomError, Intersection};
use crate::{Ray, Segment, Vec2};

/// Tolerance for exact structural identities (portal parametrizations).
pub const STRUCT_EPS: f64 = 1e-12;
/// Tolerance on cone-angle sums.
pub const ANGLE_EPS: f64 = 1e-9;

macro_rules! address_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<u32>);

        impl $name {
            pub fn root() -> Self {
                $name(Vec::new())
            }

            pub fn index(i: usize) -> Self {
                $name(vec![i as u32])
            }

            pub fn child(&self, i: u32) -> Self {
                let mut p = self.0.clone();
                p.push(i);
                $name(p)
            }

            pub fn parent(&self) -> Option<($name, u32)> {
                let (&last, rest) = self.0.split_last()?;
                Some(($name(rest.to_vec()), last))
            }

            pub fn depth(&self) -> usize {
                self.0.len()
            }

            pub fn is_root(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if self.0.is_empty() {
                    return f.write_str("root");
                }
                let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
                f.write_str(&parts.join("."))
            }
        }

        impl std::str::FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                if s.is_empty() || s == "root" {
                    return Ok($name::root());
                }
                s.split('.').map(|p| p.parse::<u32>()).collect::<Result<Vec<_>, _>>().map($name)
            }
        }
    };
}

address_type!(
    /// Tree address of a chart (empty = root), or `[i]` for the `i`-th chart of a finite surface.
    ChartId
);
address_type!(
    /// Identifier of a vertex. In the Poisson plane this is the address of the
    /// chart spawned at the vertex.
    ConeId
);
address_type!(PortalId);

/// One boundary component of a portal inside a chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Edge {
    Segment { a: Vec2, b: Vec2 },
    Ray { apex: Vec2, dir: Vec2 },
}

impl Edge {
    pub fn segment(s: Segment) -> Self {
        Edge::Segment { a: s.a, b: s.b }
    }

    pub fn ray(r: Ray) -> Self {
        Edge::Ray {
            apex: r.apex,
            dir: r.dir,
        }
    }

    pub fn start(&self) -> Vec2 {
        match *self {
            Edge::Segment { a, .. } => a,
            Edge::Ray { apex, .. } => apex,
        }
    }

    pub fn direction(&self) -> Vec2 {
        match *self {
            Edge::Segment { a, b } => (b - a) * (1.0 / a.dist(b)),
            Edge::Ray { dir, .. } => dir,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Edge::Segment { a, b } => a.dist(b),
            Edge::Ray { .. } => f64::INFINITY,
        }
    }

    /// Endpoints that are vertices of the surface (a ray has only its apex).
    pub fn endpoints(&self) -> Vec<Vec2> {
        match *self {
            Edge::Segment { a, b } => vec![a, b],
            Edge::Ray { apex, .. } => vec![apex],
        }
    }

    pub fn translate(&self, by: Vec2) -> Self {
        match *self {
            Edge::Segment { a, b } => Edge::Segment { a: a + by, b: b + by },
            Edge::Ray { apex, dir } => Edge::Ray { apex: apex + by, dir },
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        match *self {
            Edge::Segment { a, b } => Edge::Segment { a: a * s, b: b * s },
            Edge::Ray { apex, dir } => Edge::Ray { apex: apex * s, dir },
        }
    }

    /// Finite piece of the edge long enough to contain every point within
    /// `reach` of `from`.
    fn clipped(&self, from: Vec2, reach: f64) -> Result<Segment, GeomError> {
        match *self {
            Edge::Segment { a, b } => Segment::new(a, b),
            Edge::Ray { apex, dir } => {
                let len = apex.dist(from) + reach + 1.0;
                Segment::new(apex, apex + dir * len)
            }
        }
    }

    /// Intersection with `ray`, considering only ray parameters up to `max_t`.
    pub fn intersect(&self, ray: &Ray, max_t: f64) -> Intersection<f64> {
        match self.clipped(ray.apex, max_t) {
            Ok(seg) => intersect_segment_ray(&seg, ray),
            Err(_) => Intersection::Miss,
        }
    }

    /// Distance from `p` to the edge.
    pub fn dist_to(&self, p: Vec2) -> f64 {
        match *self {
            Edge::Segment { a, b } => Segment { a, b }.dist_to(p),
            Edge::Ray { apex, dir } => {
                let t = (p - apex).dot(dir).max(0.0);
                p.dist(apex + dir * t)
            }
        }
    }

    /// Points where the edge crosses the circle `|z − c| = r`.
    pub fn circle_crossings(&self, c: Vec2, r: f64) -> Vec<Vec2> {
        let (p0, d, tmax) = match *self {
            Edge::Segment { a, b } => {
                let len = a.dist(b);
                (a, (b - a) * (1.0 / len), len)
            }
            Edge::Ray { apex, dir } => (apex, dir, f64::INFINITY),
        };
        let w = p0 - c;
        let bq = w.dot(d);
        let cq = w.norm_sqr() - r * r;
        let disc = bq * bq - cq;
        if disc < 0.0 {
            return Vec::new();
        }
        let s = disc.sqrt();
        [-bq - s, -bq + s]
            .into_iter()
            .filter(|&t| t >= 0.0 && t <= tmax)
            .map(|t| p0 + d * t)
            .collect()
    }

    fn approx_eq(&self, other: &Edge, tol: f64) -> bool {
        match (*self, *other) {
            (Edge::Segment { a, b }, Edge::Segment { a: a2, b: b2 }) => {
                a.dist(a2) <= tol && b.dist(b2) <= tol
            }
            (Edge::Ray { apex, dir }, Edge::Ray { apex: a2, dir: d2 }) => {
                apex.dist(a2) <= tol && dir.dist(d2) <= tol
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortalEnd {
    pub chart: ChartId,
    pub edge: Edge,
}

/// Translation gluing: `side_a.edge + shift = side_b.edge`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Portal {
    pub id: PortalId,
    pub side_a: PortalEnd,
    pub side_b: PortalEnd,
    pub shift: Vec2,
}

impl Portal {
    pub fn from_a(&self) -> PortalSide {
        PortalSide {
            portal: self.id.clone(),
            here: self.side_a.edge,
            there: self.side_b.chart.clone(),
            there_edge: self.side_b.edge,
            shift: self.shift,
        }
    }

    pub fn from_b(&self) -> PortalSide {
        PortalSide {
            portal: self.id.clone(),
            here: self.side_b.edge,
            there: self.side_a.chart.clone(),
            there_edge: self.side_a.edge,
            shift: -self.shift,
        }
    }
}

/// A portal as seen from one of its charts.
#[derive(Clone, Debug, PartialEq)]
pub struct PortalSide {
    pub portal: PortalId,
    pub here: Edge,
    pub there: ChartId,
    pub there_edge: Edge,
    /// Maps coordinates of this chart to coordinates of `there`.
    pub shift: Vec2,
}

/// One angular sector of a cone point, lying in a single chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub chart: ChartId,
    pub pos: Vec2,
    /// Local direction (chart angle) at which the sector starts.
    pub start: f64,
    pub span: f64,
    /// Position of the sector's start in the cone's own angular frame.
    pub offset: f64,
}

/// A vertex with total angle `2π(order + 1)`. Order 0 vertices are regular
/// points that happen to sit on chart corners; they are kept so that paths can
/// be continued through them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub id: ConeId,
    pub order: u32,
    pub incidences: Vec<Incidence>,
}

impl ConePoint {
    pub fn total_angle(&self) -> f64 {
        TAU * f64::from(self.order + 1)
    }

    pub fn is_singular(&self) -> bool {
        self.order > 0
    }

    /// Incidence containing frame angle `theta` (taken modulo the total angle)
    /// and the corresponding chart-local direction angle.
    pub fn locate(&self, theta: f64) -> (&Incidence, f64) {
        let total = self.total_angle();
        let mut t = theta % total;
        if t < 0.0 {
            t += total;
        }
        let inc = self
            .incidences
            .iter()
            .find(|i| t >= i.offset && t < i.offset + i.span)
            .unwrap_or_else(|| self.incidences.last().expect("cone point without incidences"));
        (inc, inc.start + (t - inc.offset))
    }

    /// Frame angle of local direction `local` leaving the incidence at `(chart, pos)`.
    pub fn frame_angle(&self, chart: &ChartId, pos: Vec2, local: f64) -> Option<f64> {
        let tol = 1e-9;
        let mut best: Option<(f64, f64)> = None;
        for inc in &self.incidences {
            if &inc.chart != chart || inc.pos.dist(pos) > 1e-7 {
                continue;
            }
            let a = normalize_angle(local, inc.start - tol);
            let rel = (a - inc.start).max(0.0);
            let excess = (rel - inc.span).max(0.0);
            if best.is_none_or(|(e, _)| excess < e) {
                best = Some((excess, inc.offset + rel.min(inc.span)));
            }
        }
        match best {
            Some((excess, f)) if excess <= tol => Some(f),
            _ => None,
        }
    }
}

/// A vertex as seen from one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexRef {
    pub id: ConeId,
    pub pos: Vec2,
    pub order: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// The whole plane, minus the portal edges.
    Plane,
    /// The closed square `[0, side]²`.
    Square { side: f64 },
}

impl Domain {
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        match *self {
            Domain::Plane => p.is_finite(),
            Domain::Square { side } => {
                p.re >= -tol && p.im >= -tol && p.re <= side + tol && p.im <= side + tol
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChartView {
    pub id: ChartId,
    pub domain: Domain,
    /// Radius about the chart origin within which the contents are complete;
    /// `None` when the chart is fully known.
    pub budget: Option<f64>,
    pub sides: Vec<PortalSide>,
    pub vertices: Vec<VertexRef>,
}

impl ChartView {
    pub fn covers(&self, center: Vec2, radius: f64) -> bool {
        self.budget
            .is_none_or(|b| center.norm() + radius <= b + 1e-9)
    }

    pub fn point_within_budget(&self, p: Vec2) -> bool {
        self.budget.is_none_or(|b| p.norm() <= b + 1e-9)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("chart {chart} is only sampled to radius {have}; a query needs radius {need}")]
    NeedsExpansion { chart: ChartId, have: f64, need: f64 },
    #[error("unknown chart {0}")]
    UnknownChart(ChartId),
    #[error("unknown cone point {0}")]
    UnknownCone(ConeId),
    #[error("no portal path between charts")]
    NoPath,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// What the explorer needs from a surface.
pub trait SurfaceProvider: Sync {
    fn chart(&self, id: &ChartId) -> Result<ChartView, SurfaceError>;

    fn cone_point(&self, id: &ConeId) -> Result<ConePoint, SurfaceError>;

    /// Every vertex the surface currently knows about, singular or not.
    fn vertex_ids(&self) -> Vec<ConeId>;

    /// Charts meeting the metric ball of `radius` about the root chart's origin.
    fn charts_in_ball(&self, radius: f64) -> Result<Vec<ChartId>, SurfaceError>;

    /// `Some(area)` for compact surfaces.
    fn total_area(&self) -> Option<f64>;

    /// Developed position of a chart's origin in root coordinates, when the
    /// charts form a tree (so that the answer is path independent).
    fn tree_offset(&self, _chart: &ChartId) -> Option<Vec2> {
        None
    }

    fn root_chart(&self) -> ChartId {
        ChartId::root()
    }

    fn chart_domain(&self, id: &ChartId) -> Result<Domain, SurfaceError> {
        Ok(self.chart(id)?.domain)
    }

    fn portals_near(
        &self,
        id: &ChartId,
        center: Vec2,
        radius: f64,
    ) -> Result<Vec<PortalSide>, SurfaceError> {
        let view = self.chart(id)?;
        check_cover(&view, center, radius)?;
        Ok(view
            .sides
            .into_iter()
            .filter(|s| s.here.dist_to(center) <= radius)
            .collect())
    }

    fn cone_points_near(
        &self,
        id: &ChartId,
        center: Vec2,
        radius: f64,
    ) -> Result<Vec<VertexRef>, SurfaceError> {
        let view = self.chart(id)?;
        check_cover(&view, center, radius)?;
        Ok(view
            .vertices
            .into_iter()
            .filter(|v| v.order > 0 && v.pos.dist(center) <= radius)
            .collect())
    }

    /// Singular vertices only.
    fn cone_points(&self) -> Vec<ConePoint> {
        self.vertex_ids()
            .iter()
            .filter_map(|id| self.cone_point(id).ok())
            .filter(ConePoint::is_singular)
            .collect()
    }
}

fn check_cover(view: &ChartView, center: Vec2, radius: f64) -> Result<(), SurfaceError> {
    if view.covers(center, radius) {
        Ok(())
    } else {
        Err(SurfaceError::NeedsExpansion {
            chart: view.id.clone(),
            have: view.budget.unwrap_or(f64::INFINITY),
            need: center.norm() + radius,
        })
    }
}

/// Translation taking `to`-chart coordinates into `from`-chart coordinates.
pub fn develop<S: SurfaceProvider + ?Sized>(
    surface: &S,
    from: &ChartId,
    to: &ChartId,
) -> Result<Vec2, SurfaceError> {
    if from == to {
        return Ok(Vec2::zero());
    }
    let a = surface.tree_offset(from).ok_or(SurfaceError::NoPath)?;
    let b = surface.tree_offset(to).ok_or(SurfaceError::NoPath)?;
    Ok(b - a)
}

/// Like [`develop`], for surfaces with cycles: the translation accumulated by
/// crossing `path` (in order) starting from `from`. Returns the chart reached
/// and the translation taking its coordinates into `from` coordinates.
pub fn develop_along<S: SurfaceProvider + ?Sized>(
    surface: &S,
    from: &ChartId,
    path: &[PortalId],
) -> Result<(ChartId, Vec2), SurfaceError> {
    let mut chart = from.clone();
    let mut total = Vec2::zero();
    for pid in path {
        let view = surface.chart(&chart)?;
        let side = view
            .sides
            .iter()
            .find(|s| &s.portal == pid)
            .ok_or(SurfaceError::NoPath)?;
        total += side.shift;
        chart = side.there.clone();
    }
    Ok((chart, -total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingReverse { portal: PortalId },
    NotInvolution { portal: PortalId, error: f64 },
    Parametrization { portal: PortalId, error: f64 },
    LengthMismatch { portal: PortalId },
    ConeAngle { cone: ConeId, total: f64, expected: f64 },
    FrameGap { cone: ConeId },
    IncidenceNotAVertex { cone: ConeId, chart: ChartId },
}

impl Violation {
    pub fn portal(&self) -> Option<&PortalId> {
        match self {
            Violation::MissingReverse { portal }
            | Violation::NotInvolution { portal, .. }
            | Violation::Parametrization { portal, .. }
            | Violation::LengthMismatch { portal } => Some(portal),
            _ => None,
        }
    }
}

/// Checks portal involutions, edge parametrizations and cone-angle sums for
/// everything in the charts meeting the ball of `radius` about the root origin.
pub fn validate<S: SurfaceProvider + ?Sized>(
    surface: &S,
    radius: f64,
) -> Result<Vec<Violation>, SurfaceError> {
    let charts = surface.charts_in_ball(radius)?;
    let mut by_portal: BTreeMap<PortalId, Violation> = BTreeMap::new();
    let mut cones: BTreeSet<ConeId> = BTreeSet::new();
    let mut views: HashMap<ChartId, ChartView> = HashMap::new();
    for c in &charts {
        views.insert(c.clone(), surface.chart(c)?);
    }
    for c in &charts {
        let view = &views[c];
        for v in &view.vertices {
            cones.insert(v.id.clone());
        }
        for side in &view.sides {
            if by_portal.contains_key(&side.portal) {
                continue;
            }
            let other = match views.get(&side.there) {
                Some(v) => v.clone(),
                None => surface.chart(&side.there)?,
            };
            // a portal glued to its own chart lists both sides there; pick the other one
            let reverse = other
                .sides
                .iter()
                .filter(|s| s.portal == side.portal && s.there == *c)
                .min_by(|a, b| (a.shift + side.shift).norm().total_cmp(&(b.shift + side.shift).norm()));
            let Some(reverse) = reverse else {
                by_portal.insert(side.portal.clone(), Violation::MissingReverse { portal: side.portal.clone() });
                continue;
            };
            let inv = (side.shift + reverse.shift).norm();
            if inv > STRUCT_EPS {
                by_portal.insert(
                    side.portal.clone(),
                    Violation::NotInvolution { portal: side.portal.clone(), error: inv },
                );
                continue;
            }
            if (side.here.length() - side.there_edge.length()).abs() > STRUCT_EPS
                && side.here.length().is_finite()
                || side.here.length().is_finite() != side.there_edge.length().is_finite()
            {
                by_portal.insert(side.portal.clone(), Violation::LengthMismatch { portal: side.portal.clone() });
                continue;
            }
            let mapped = side.here.translate(side.shift);
            let err = mapped.start().dist(side.there_edge.start())
                + mapped.direction().dist(side.there_edge.direction());
            if !mapped.approx_eq(&side.there_edge, STRUCT_EPS) || !reverse.here.approx_eq(&side.there_edge, STRUCT_EPS)
            {
                by_portal.insert(
                    side.portal.clone(),
                    Violation::Parametrization { portal: side.portal.clone(), error: err },
                );
            }
        }
    }
    let mut out: Vec<Violation> = by_portal.into_values().collect();
    for id in cones {
        let cone = surface.cone_point(&id)?;
        let total: f64 = cone.incidences.iter().map(|i| i.span).sum();
        if (total - cone.total_angle()).abs() > ANGLE_EPS {
            out.push(Violation::ConeAngle { cone: id.clone(), total, expected: cone.total_angle() });
        }
        let mut expect = 0.0;
        for inc in &cone.incidences {
            if (inc.offset - expect).abs() > ANGLE_EPS {
                out.push(Violation::FrameGap { cone: id.clone() });
                break;
            }
            expect += inc.span;
        }
        for inc in &cone.incidences {
            let view = match views.get(&inc.chart) {
                Some(v) => v.clone(),
                None => surface.chart(&inc.chart)?,
            };
            if !view.vertices.iter().any(|v| v.id == id && v.pos.dist(inc.pos) <= STRUCT_EPS) {
                out.push(Violation::IncidenceNotAVertex { cone: id.clone(), chart: inc.chart.clone() });
            }
        }
    }
    Ok(out)
}

/// An explicitly stored finite surface.
#[derive(Clone, Debug)]
pub struct FlatComplex {
    charts: Vec<(ChartId, Domain)>,
    portals: Vec<Portal>,
    cones: Vec<ConePoint>,
    area: f64,
    index: HashMap<ChartId, (Domain, Vec<PortalSide>, Vec<VertexRef>)>,
    cone_index: HashMap<ConeId, usize>,
}

impl FlatComplex {
    pub fn new(charts: Vec<(ChartId, Domain)>, portals: Vec<Portal>, cones: Vec<ConePoint>, area: f64) -> Self {
        let mut fc = FlatComplex {
            charts,
            portals,
            cones,
            area,
            index: HashMap::new(),
            cone_index: HashMap::new(),
        };
        fc.reindex();
        fc
    }

    fn reindex(&mut self) {
        self.index = self
            .charts
            .iter()
            .map(|(id, d)| (id.clone(), (*d, Vec::new(), Vec::new())))
            .collect();
        for p in &self.portals {
            if let Some(e) = self.index.get_mut(&p.side_a.chart) {
                e.1.push(p.from_a());
            }
            if let Some(e) = self.index.get_mut(&p.side_b.chart) {
                e.1.push(p.from_b());
            }
        }
        self.cone_index.clear();
        for (k, c) in self.cones.iter().enumerate() {
            self.cone_index.insert(c.id.clone(), k);
            for inc in &c.incidences {
                if let Some(e) = self.index.get_mut(&inc.chart) {
                    if !e.2.iter().any(|v: &VertexRef| v.id == c.id && v.pos.dist(inc.pos) <= STRUCT_EPS) {
                        e.2.push(VertexRef { id: c.id.clone(), pos: inc.pos, order: c.order });
                    }
                }
            }
        }
    }

    pub fn charts(&self) -> &[(ChartId, Domain)] {
        &self.charts
    }

    pub fn portals(&self) -> &[Portal] {
        &self.portals
    }

    pub fn vertices(&self) -> &[ConePoint] {
        &self.cones
    }

    /// Copy with one portal's shift replaced (used to exercise `validate`).
    pub fn with_portal_shift(&self, id: &PortalId, shift: Vec2) -> Self {
        let mut out = self.clone();
        for p in &mut out.portals {
            if &p.id == id {
                p.shift = shift;
            }
        }
        out.reindex();
        out
    }
}

impl SurfaceProvider for FlatComplex {
    fn chart(&self, id: &ChartId) -> Result<ChartView, SurfaceError> {
        let (domain, sides, vertices) = self
            .index
            .get(id)
            .ok_or_else(|| SurfaceError::UnknownChart(id.clone()))?;
        Ok(ChartView {
            id: id.clone(),
            domain: *domain,
            budget: None,
            sides: sides.clone(),
            vertices: vertices.clone(),
        })
    }

    fn cone_point(&self, id: &ConeId) -> Result<ConePoint, SurfaceError> {
        self.cone_index
            .get(id)
            .map(|&k| self.cones[k].clone())
            .ok_or_else(|| SurfaceError::UnknownCone(id.clone()))
    }

    fn vertex_ids(&self) -> Vec<ConeId> {
        self.cones.iter().map(|c| c.id.clone()).collect()
    }

    fn charts_in_ball(&self, _radius: f64) -> Result<Vec<ChartId>, SurfaceError> {
        Ok(self.charts.iter().map(|(c, _)| c.clone()).collect())
    }

    fn total_area(&self) -> Option<f64> {
        Some(self.area)
    }

    fn root_chart(&self) -> ChartId {
        self.charts.first().map(|(c, _)| c.clone()).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addresses_print_and_parse() {
        let c = ChartId(vec![0, 3, 1]);
        assert_eq!(c.to_string(), "0.3.1");
        assert_eq!("0.3.1".parse::<ChartId>().unwrap(), c);
        assert_eq!("root".parse::<ChartId>().unwrap(), ChartId::root());
        assert_eq!(c.parent(), Some((ChartId(vec![0, 3]), 1)));
        assert_eq!(ChartId::root().parent(), None);
    }

    #[test]
    fn ray_edge_circle_crossings() {
        let e = Edge::Ray { apex: Vec2::new(1.0, 0.0), dir: Vec2::new(1.0, 0.0) };
        let pts = e.circle_crossings(Vec2::zero(), 2.0);
        assert_eq!(pts.len(), 1);
        assert!((pts[0].re - 2.0).abs() < 1e-15);
        assert!(e.circle_crossings(Vec2::zero(), 0.5).is_empty());
    }

    #[test]
    fn cone_frame_round_trip() {
        let cone = ConePoint {
            id: ConeId(vec![0]),
            order: 1,
            incidences: vec![
                Incidence { chart: ChartId::root(), pos: Vec2::new(1.0, 0.0), start: 0.0, span: TAU, offset: 0.0 },
                Incidence { chart: ChartId(vec![0]), pos: Vec2::zero(), start: 0.0, span: TAU, offset: TAU },
            ],
        };
        let (inc, local) = cone.locate(TAU + 1.0);
        assert_eq!(inc.chart, ChartId(vec![0]));
        assert!((local - 1.0).abs() < 1e-15);
        let f = cone.frame_angle(&ChartId(vec![0]), Vec2::zero(), 1.0).unwrap();
        assert!((f - TAU - 1.0).abs() < 1e-12);
        assert!(cone.frame_angle(&ChartId(vec![7]), Vec2::zero(), 1.0).is_none());
    }
}
