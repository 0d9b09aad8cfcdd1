//! Lazily sampled Poisson translation plane.
//!
//! Every chart is a copy of the complex plane carrying its own Poisson sample.
//! Each sampled point `x` of a chart opens a slit along `[1, ∞)·x` which is
//! glued to the cut `[0, ∞)·x` of a fresh child chart, so the apex `x` becomes
//! a cone point of angle 4π. Child coordinates are parent coordinates minus
//! `x`.
//!
//! Sampling is addressed: a node's points are the union of annular shells of
//! fixed width, each drawn from the stream keyed by `(seed, chart path,
//! shell)`. Raising a budget therefore only appends points, and sampling to a
//! radius directly or by successive expansions gives identical trees.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flat_complex::{
    ChartId, ChartView, ConeId, ConePoint, Domain, Edge, Incidence, Portal, PortalEnd, PortalId,
    PortalSide, SurfaceError, SurfaceProvider, VertexRef,
};
use crate::rng::{stream, Stream};
use crate::{Ray, Vec2};

pub const DEFAULT_NODE_CAP: usize = 1_000_000;
/// Radial width of the sampling shells.
pub const SHELL_WIDTH: f64 = 0.5;
pub const FORMAT_VERSION: u32 = 1;
const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlaneError {
    #[error("sampling would materialize more than {cap} charts")]
    BudgetOverflow { cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot shrink the sampled radius from {have} to {want}")]
    Shrink { have: f64, want: f64 },
    #[error("planes with planted points or hand-built trees cannot be expanded")]
    NotExpandable,
    #[error("planted point {0:?} is degenerate with respect to the sample")]
    DegeneratePlant(Vec2),
    #[error("malformed plane document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One chart of the tree and everything hanging below it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneNode {
    /// Sample points sorted by norm; all have norm ≤ `budget`.
    pub points: Vec<Vec2>,
    /// Radius (in chart coordinates) within which `points` is complete.
    pub budget: f64,
    /// `children[i]` is the chart spawned by `points[i]`.
    pub children: Vec<PlaneNode>,
}

impl PlaneNode {
    /// A hand-built node whose point list is declared complete.
    pub fn complete(points: Vec<Vec2>, children: Vec<PlaneNode>) -> Self {
        let mut children = children;
        while children.len() < points.len() {
            children.push(PlaneNode::leaf());
        }
        children.truncate(points.len());
        PlaneNode {
            points,
            budget: f64::INFINITY,
            children,
        }
    }

    /// A complete chart without sample points.
    pub fn leaf() -> Self {
        PlaneNode {
            points: Vec::new(),
            budget: f64::INFINITY,
            children: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(PlaneNode::count).sum::<usize>()
    }

    fn walk<'a>(&'a self, path: &mut Vec<u32>, out: &mut Vec<(ChartId, &'a PlaneNode)>) {
        out.push((ChartId(path.clone()), self));
        for (i, c) in self.children.iter().enumerate() {
            path.push(i as u32);
            c.walk(path, out);
            path.pop();
        }
    }

    fn scaled(&self, s: f64) -> PlaneNode {
        PlaneNode {
            points: self.points.iter().map(|p| *p * s).collect(),
            budget: self.budget * s,
            children: self.children.iter().map(|c| c.scaled(s)).collect(),
        }
    }

    fn restricted(&self, budget: f64) -> PlaneNode {
        let keep = self.points.iter().take_while(|p| p.norm() <= budget).count();
        PlaneNode {
            points: self.points[..keep].to_vec(),
            budget,
            children: self.children[..keep]
                .iter()
                .zip(&self.points)
                .map(|(c, p)| c.restricted((budget - p.norm()).max(0.0)))
                .collect(),
        }
    }
}

/// Poisson sample of intensity `lambda` in the disk of radius `radius`.
pub fn poisson_disk<R: Rng + ?Sized>(rng: &mut R, lambda: f64, radius: f64) -> Vec<Vec2> {
    poisson_annulus(rng, lambda, 0.0, radius)
}

/// Poisson sample of intensity `lambda` in the annulus `r0 ≤ |z| ≤ r1`.
pub fn poisson_annulus<R: Rng + ?Sized>(rng: &mut R, lambda: f64, r0: f64, r1: f64) -> Vec<Vec2> {
    let mean = lambda * PI * (r1 * r1 - r0 * r0);
    let n = poisson_count(rng, mean);
    (0..n).map(|_| uniform_in_annulus(rng, r0, r1)).collect()
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 || !mean.is_finite() {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

fn uniform_in_annulus<R: Rng + ?Sized>(rng: &mut R, r0: f64, r1: f64) -> Vec2 {
    let u: f64 = rng.random();
    let r = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
    let theta = rng.random::<f64>() * TAU;
    Vec2::from_polar(r, theta)
}

fn dist_to_slit(p: Vec2, apex: Vec2) -> f64 {
    Edge::Ray { apex, dir: unit(apex) }.dist_to(p)
}

fn unit(v: Vec2) -> Vec2 {
    v * (1.0 / v.norm())
}

/// Whether adding `p` to a chart already holding `others` (and cut along
/// `forbidden`, for non-root charts) would create a measure-zero coincidence.
fn is_degenerate(p: Vec2, others: &[Vec2], forbidden: Option<Vec2>) -> bool {
    if p.norm() < DEGENERATE_EPS {
        return true;
    }
    let pu = unit(p);
    if let Some(f) = forbidden {
        if pu.cross(f).abs() < DEGENERATE_EPS || p.dist(Vec2::zero()) < DEGENERATE_EPS {
            return true;
        }
    }
    others.iter().any(|&q| {
        p.dist(q) < DEGENERATE_EPS
            || pu.cross(unit(q)).abs() < DEGENERATE_EPS
            || dist_to_slit(p, q) < DEGENERATE_EPS
            || dist_to_slit(q, p) < DEGENERATE_EPS
    })
}

struct Sampler {
    seed: u64,
    lambda: f64,
    width: f64,
    cap: usize,
    made: usize,
}

impl Sampler {
    fn shell(&self, path: &[u32], k: u32, forbidden: Option<Vec2>, previous: &[Vec2]) -> Vec<Vec2> {
        let mut rng: Stream = stream(self.seed, path, u64::from(k));
        let (r0, r1) = (f64::from(k) * self.width, f64::from(k + 1) * self.width);
        let n = poisson_count(&mut rng, self.lambda * PI * (r1 * r1 - r0 * r0));
        let mut out: Vec<Vec2> = Vec::with_capacity(n);
        let mut all = previous.to_vec();
        for _ in 0..n {
            loop {
                let p = uniform_in_annulus(&mut rng, r0, r1);
                if is_degenerate(p, &all, forbidden) {
                    log::debug!("redrawing degenerate sample {p:?} in chart {path:?} shell {k}");
                    continue;
                }
                all.push(p);
                out.push(p);
                break;
            }
        }
        out
    }

    /// Points of chart `path` within `budget`, sorted by norm.
    fn points(&self, path: &[u32], budget: f64, forbidden: Option<Vec2>) -> Vec<Vec2> {
        let shells = (budget / self.width).ceil().max(0.0) as u32;
        let mut all: Vec<Vec2> = Vec::new();
        for k in 0..shells {
            let s = self.shell(path, k, forbidden, &all);
            all.extend(s);
        }
        all.retain(|p| p.norm() <= budget);
        all.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        all
    }

    fn node(&mut self, path: &mut Vec<u32>, budget: f64, forbidden: Option<Vec2>) -> Result<PlaneNode, PlaneError> {
        self.made += 1;
        if self.made > self.cap {
            return Err(PlaneError::BudgetOverflow { cap: self.cap });
        }
        let points = self.points(path, budget, forbidden);
        let mut children = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            path.push(i as u32);
            let child = self.node(path, (budget - p.norm()).max(0.0), Some(unit(*p)));
            path.pop();
            children.push(child?);
        }
        Ok(PlaneNode { points, budget, children })
    }

    fn grow(
        &mut self,
        node: &PlaneNode,
        path: &mut Vec<u32>,
        budget: f64,
        forbidden: Option<Vec2>,
    ) -> Result<PlaneNode, PlaneError> {
        self.made += 1;
        if self.made > self.cap {
            return Err(PlaneError::BudgetOverflow { cap: self.cap });
        }
        let points = self.points(path, budget, forbidden);
        debug_assert!(points.starts_with(&node.points));
        let mut children = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            path.push(i as u32);
            let child_budget = (budget - p.norm()).max(0.0);
            let child = match node.children.get(i) {
                Some(old) => self.grow(old, path, child_budget, Some(unit(*p))),
                None => self.node(path, child_budget, Some(unit(*p))),
            };
            path.pop();
            children.push(child?);
        }
        Ok(PlaneNode { points, budget, children })
    }
}

/// A Poisson translation plane sampled to a finite radius about the root.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPlane {
    intensity: f64,
    seed: u64,
    scale: f64,
    shell_width: f64,
    node_cap: usize,
    manual: bool,
    planted: Option<u32>,
    root: PlaneNode,
}

fn check_positive(name: &str, v: f64) -> Result<(), PlaneError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PlaneError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Samples the plane of intensity `lambda` completely enough for every query
/// of metric radius `radius` from the root basepoint.
pub fn sample_plane(seed: u64, lambda: f64, radius: f64) -> Result<TruncatedPlane, PlaneError> {
    sample_plane_capped(seed, lambda, radius, DEFAULT_NODE_CAP)
}

pub fn sample_plane_capped(seed: u64, lambda: f64, radius: f64, cap: usize) -> Result<TruncatedPlane, PlaneError> {
    check_positive("intensity", lambda)?;
    check_positive("radius", radius)?;
    let mut s = Sampler { seed, lambda, width: SHELL_WIDTH, cap, made: 0 };
    let root = s.node(&mut Vec::new(), radius, None)?;
    Ok(TruncatedPlane {
        intensity: lambda,
        seed,
        scale: 1.0,
        shell_width: SHELL_WIDTH,
        node_cap: cap,
        manual: false,
        planted: None,
        root,
    })
}

/// Extends a sampled plane to root radius `radius`; existing charts keep
/// their points, indices and children.
pub fn expand(plane: &TruncatedPlane, radius: f64) -> Result<TruncatedPlane, PlaneError> {
    if radius < plane.root.budget {
        return Err(PlaneError::Shrink { have: plane.root.budget, want: radius });
    }
    if radius == plane.root.budget {
        return Ok(plane.clone());
    }
    if plane.manual || plane.planted.is_some() {
        return Err(PlaneError::NotExpandable);
    }
    // sampling happens in the units the plane was drawn in
    let base = plane.unscaled();
    let mut s = Sampler {
        seed: plane.seed,
        lambda: base.intensity,
        width: plane.shell_width,
        cap: plane.node_cap,
        made: 0,
    };
    let root = s.grow(&base.root, &mut Vec::new(), radius / plane.scale, None)?;
    let grown = TruncatedPlane { root, ..base };
    Ok(if plane.scale == 1.0 { grown } else { rescale(&grown, plane.scale) })
}

/// Restriction to a smaller root radius.
pub fn restrict(plane: &TruncatedPlane, radius: f64) -> TruncatedPlane {
    TruncatedPlane {
        root: plane.root.restricted(radius.min(plane.root.budget)),
        ..plane.clone()
    }
}

/// The same plane with every length multiplied by `s` (intensity divided by `s²`).
pub fn rescale(plane: &TruncatedPlane, s: f64) -> TruncatedPlane {
    TruncatedPlane {
        intensity: plane.intensity / (s * s),
        scale: plane.scale * s,
        root: plane.root.scaled(s),
        ..plane.clone()
    }
}

impl TruncatedPlane {
    /// A plane given by an explicit, complete tree of sample points.
    pub fn from_tree(root: PlaneNode) -> Self {
        TruncatedPlane {
            intensity: 1.0,
            seed: 0,
            scale: 1.0,
            shell_width: SHELL_WIDTH,
            node_cap: DEFAULT_NODE_CAP,
            manual: true,
            planted: None,
            root,
        }
    }

    fn unscaled(&self) -> TruncatedPlane {
        if self.scale == 1.0 {
            return self.clone();
        }
        let inv = 1.0 / self.scale;
        TruncatedPlane {
            intensity: self.intensity * self.scale * self.scale,
            scale: 1.0,
            root: self.root.scaled(inv),
            ..self.clone()
        }
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> f64 {
        self.root.budget
    }

    pub fn root(&self) -> &PlaneNode {
        &self.root
    }

    pub fn is_manual(&self) -> bool {
        self.manual
    }

    pub fn planted(&self) -> Option<ConeId> {
        self.planted.map(|i| ConeId(vec![i]))
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    pub fn node(&self, id: &ChartId) -> Option<&PlaneNode> {
        let mut n = &self.root;
        for &i in &id.0 {
            n = n.children.get(i as usize)?;
        }
        Some(n)
    }

    /// All charts in depth-first order.
    pub fn nodes(&self) -> Vec<(ChartId, &PlaneNode)> {
        let mut out = Vec::new();
        self.root.walk(&mut Vec::new(), &mut out);
        out
    }

    /// Adds a sample point `x` to the root chart (with a freshly sampled child
    /// chart) and returns the new cone point. Used to look at the plane from a
    /// singularity whose location is chosen independently of the sample.
    pub fn plant(&self, x: Vec2) -> Result<(TruncatedPlane, ConeId), PlaneError> {
        if self.planted.is_some() || self.manual {
            return Err(PlaneError::NotExpandable);
        }
        if x.norm() > self.root.budget || is_degenerate(x, &self.root.points, None) {
            return Err(PlaneError::DegeneratePlant(x));
        }
        let base = self.unscaled();
        let xb = x * (1.0 / self.scale);
        let idx = base.root.points.len() as u32;
        let mut s = Sampler {
            seed: self.seed,
            lambda: base.intensity,
            width: self.shell_width,
            cap: self.node_cap,
            made: base.node_count(),
        };
        let child = s.node(&mut vec![idx], (base.root.budget - xb.norm()).max(0.0), Some(unit(xb)))?;
        let mut out = base;
        out.root.points.push(xb);
        out.root.children.push(child);
        out.planted = Some(idx);
        if self.scale != 1.0 {
            out = rescale(&out, self.scale);
        }
        Ok((out, ConeId(vec![idx])))
    }

    fn slit_portal(parent: &ChartId, i: usize, x: Vec2) -> Portal {
        let dir = unit(x);
        Portal {
            id: PortalId(parent.child(i as u32).0),
            side_a: PortalEnd { chart: parent.clone(), edge: Edge::ray(Ray { apex: x, dir }) },
            side_b: PortalEnd { chart: parent.child(i as u32), edge: Edge::ray(Ray { apex: Vec2::zero(), dir }) },
            shift: -x,
        }
    }

    /// Every materialized portal, depth-first.
    pub fn portals(&self) -> Vec<Portal> {
        self.nodes()
            .into_iter()
            .flat_map(|(id, n)| {
                n.points
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| Self::slit_portal(&id, i, x))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn to_document(&self) -> PlaneDocument {
        let charts = self
            .nodes()
            .into_iter()
            .map(|(path, n)| ChartRecord {
                path,
                budget: finite(n.budget),
                points: n.points.clone(),
            })
            .collect();
        PlaneDocument {
            format_version: FORMAT_VERSION,
            kind: "poisson_plane".into(),
            intensity: self.intensity,
            seed: self.seed,
            scale: self.scale,
            shell_width: self.shell_width,
            node_cap: self.node_cap,
            manual: self.manual,
            planted: self.planted,
            budget: finite(self.root.budget),
            charts,
            portals: self.portals(),
            cone_points: self.cone_points(),
        }
    }

    pub fn to_json(&self) -> Result<String, PlaneError> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self, PlaneError> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn from_document(doc: PlaneDocument) -> Result<Self, PlaneError> {
        if doc.format_version != FORMAT_VERSION {
            return Err(PlaneError::Format(format!("unsupported format_version {}", doc.format_version)));
        }
        let mut records = doc.charts;
        records.sort_by_key(|r| std::cmp::Reverse(r.path.0.len()));
        let mut built: std::collections::BTreeMap<ChartId, PlaneNode> = Default::default();
        for rec in records {
            let mut children = Vec::with_capacity(rec.points.len());
            for i in 0..rec.points.len() {
                let child = built
                    .remove(&rec.path.child(i as u32))
                    .ok_or_else(|| PlaneError::Format(format!("chart {} lacks child {i}", rec.path)))?;
                children.push(child);
            }
            built.insert(
                rec.path,
                PlaneNode {
                    points: rec.points,
                    budget: rec.budget.unwrap_or(f64::INFINITY),
                    children,
                },
            );
        }
        let root = built
            .remove(&ChartId::root())
            .ok_or_else(|| PlaneError::Format("no root chart".into()))?;
        if !built.is_empty() {
            return Err(PlaneError::Format("orphan charts".into()));
        }
        Ok(TruncatedPlane {
            intensity: doc.intensity,
            seed: doc.seed,
            scale: doc.scale,
            shell_width: doc.shell_width,
            node_cap: doc.node_cap,
            manual: doc.manual,
            planted: doc.planted,
            root,
        })
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// JSON layout of a truncated plane; see `docs/FORMAT.md`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneDocument {
    pub format_version: u32,
    pub kind: String,
    pub intensity: f64,
    pub seed: u64,
    pub scale: f64,
    pub shell_width: f64,
    pub node_cap: usize,
    pub manual: bool,
    pub planted: Option<u32>,
    pub budget: Option<f64>,
    pub charts: Vec<ChartRecord>,
    #[serde(default)]
    pub portals: Vec<Portal>,
    #[serde(default)]
    pub cone_points: Vec<ConePoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartRecord {
    pub path: ChartId,
    pub budget: Option<f64>,
    pub points: Vec<Vec2>,
}

impl SurfaceProvider for TruncatedPlane {
    fn chart(&self, id: &ChartId) -> Result<ChartView, SurfaceError> {
        let node = self.node(id).ok_or_else(|| SurfaceError::UnknownChart(id.clone()))?;
        let mut sides: Vec<PortalSide> = node
            .points
            .iter()
            .enumerate()
            .map(|(i, &x)| Self::slit_portal(id, i, x).from_a())
            .collect();
        let mut vertices: Vec<VertexRef> = node
            .points
            .iter()
            .enumerate()
            .map(|(i, &x)| VertexRef { id: ConeId(id.child(i as u32).0), pos: x, order: 1 })
            .collect();
        if let Some((parent, i)) = id.parent() {
            let x = self.node(&parent).expect("parent of a known chart").points[i as usize];
            sides.push(Self::slit_portal(&parent, i as usize, x).from_b());
            vertices.push(VertexRef { id: ConeId(id.0.clone()), pos: Vec2::zero(), order: 1 });
        }
        Ok(ChartView {
            id: id.clone(),
            domain: Domain::Plane,
            budget: finite(node.budget),
            sides,
            vertices,
        })
    }

    fn cone_point(&self, id: &ConeId) -> Result<ConePoint, SurfaceError> {
        let chart = ChartId(id.0.clone());
        let (parent, i) = chart.parent().ok_or_else(|| SurfaceError::UnknownCone(id.clone()))?;
        let x = *self
            .node(&parent)
            .and_then(|n| n.points.get(i as usize))
            .ok_or_else(|| SurfaceError::UnknownCone(id.clone()))?;
        let start = x.arg();
        Ok(ConePoint {
            id: id.clone(),
            order: 1,
            incidences: vec![
                Incidence { chart: parent, pos: x, start, span: TAU, offset: 0.0 },
                Incidence { chart, pos: Vec2::zero(), start, span: TAU, offset: TAU },
            ],
        })
    }

    fn vertex_ids(&self) -> Vec<ConeId> {
        self.nodes()
            .into_iter()
            .filter(|(id, _)| !id.is_root())
            .map(|(id, _)| ConeId(id.0))
            .collect()
    }

    fn charts_in_ball(&self, radius: f64) -> Result<Vec<ChartId>, SurfaceError> {
        if radius > self.root.budget + 1e-9 {
            return Err(SurfaceError::NeedsExpansion {
                chart: ChartId::root(),
                have: self.root.budget,
                need: radius,
            });
        }
        fn go(n: &PlaneNode, path: &mut Vec<u32>, rho: f64, out: &mut Vec<ChartId>) {
            out.push(ChartId(path.clone()));
            for (i, (p, c)) in n.points.iter().zip(&n.children).enumerate() {
                if p.norm() < rho {
                    path.push(i as u32);
                    go(c, path, rho - p.norm(), out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(&self.root, &mut Vec::new(), radius, &mut out);
        Ok(out)
    }

    fn total_area(&self) -> Option<f64> {
        None
    }

    fn tree_offset(&self, chart: &ChartId) -> Option<Vec2> {
        let mut n = &self.root;
        let mut acc = Vec2::zero();
        for &i in &chart.0 {
            acc += *n.points.get(i as usize)?;
            n = &n.children[i as usize];
        }
        Some(acc)
    }
}

/// Expected number of charts of a plane sampled to radius `radius`:
/// `Σ_d λ^d (2π)^d R^{2d} / (2d)!`, truncated once terms fall below `1e-15`.
pub fn expected_node_count(lambda: f64, radius: f64) -> f64 {
    let x = lambda * TAU * radius * radius;
    let mut term = 1.0;
    let mut total = 1.0;
    let mut d = 0.0;
    while term > 1e-15 * total || d < 3.0 {
        d += 1.0;
        term *= x / ((2.0 * d - 1.0) * (2.0 * d));
        total += term;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_complex::{develop, validate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_intensity_disk_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(poisson_disk(&mut rng, 0.0, 3.0).is_empty());
    }

    #[test]
    fn disk_counts_have_poisson_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let total: usize = (0..draws).map(|_| poisson_disk(&mut rng, 4.0, 1.0).len()).sum();
        let mean = total as f64 / draws as f64;
        let tol = 3.0 * (4.0 * PI / draws as f64).sqrt();
        assert!((mean - 4.0 * PI).abs() < tol, "mean {mean}");
    }

    #[test]
    fn disk_points_are_uniform_in_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let radii: Vec<f64> = (0..400)
            .flat_map(|_| poisson_disk(&mut rng, 4.0, 1.0))
            .map(|p| p.norm())
            .collect();
        let (_, p) = crate::stats::ks_test(&radii, |r| (r * r).clamp(0.0, 1.0));
        assert!(p > 0.01, "KS p = {p}");
        assert!(radii.iter().all(|&r| r <= 1.0));
    }

    #[test]
    fn vanishing_budget_gives_single_chart() {
        let p = sample_plane(9, 4.0, 1e-6).unwrap();
        assert_eq!(p.node_count(), 1);
        assert!(p.root().points.is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_plane(42, 4.0, 1.0).unwrap().to_json().unwrap();
        let b = sample_plane(42, 4.0, 1.0).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = sample_plane(43, 4.0, 1.0).unwrap().to_json().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn budgets_follow_the_spawning_rule() {
        let p = sample_plane(5, 4.0, 1.5).unwrap();
        for (id, n) in p.nodes() {
            assert!(n.points.iter().all(|x| x.norm() <= n.budget));
            assert!(n.points.windows(2).all(|w| w[0].norm() <= w[1].norm()));
            for (x, c) in n.points.iter().zip(&n.children) {
                assert!((c.budget - (n.budget - x.norm())).abs() < 1e-12, "chart {id}");
            }
        }
    }

    #[test]
    fn expand_is_consistent_with_direct_sampling() {
        for seed in 0..5 {
            let small = sample_plane(seed, 4.0, 1.0).unwrap();
            assert_eq!(expand(&small, 1.0).unwrap(), small);
            let grown = expand(&small, 2.0).unwrap();
            assert_eq!(grown.to_json().unwrap(), sample_plane(seed, 4.0, 2.0).unwrap().to_json().unwrap());
            assert_eq!(restrict(&grown, 1.0), small);
        }
        let small = sample_plane(1, 4.0, 1.0).unwrap();
        assert!(matches!(expand(&small, 0.5), Err(PlaneError::Shrink { .. })));
    }

    #[test]
    fn rescaled_planes_still_expand_consistently() {
        let p = rescale(&sample_plane(4, 4.0, 1.0).unwrap(), 2.0);
        assert!((p.intensity() - 1.0).abs() < 1e-15);
        let grown = expand(&p, 3.0).unwrap();
        let direct = rescale(&sample_plane(4, 4.0, 1.5).unwrap(), 2.0);
        assert_eq!(grown, direct);
    }

    #[test]
    fn node_cap_is_enforced() {
        assert!(matches!(
            sample_plane_capped(0, 4.0, 2.0, 3),
            Err(PlaneError::BudgetOverflow { cap: 3 })
        ));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(sample_plane(0, 0.0, 1.0).is_err());
        assert!(sample_plane(0, 4.0, -1.0).is_err());
        assert!(sample_plane(0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn mean_node_count_matches_series() {
        let (lambda, radius, trials) = (4.0, 0.8, 500);
        let total: usize = (0..trials)
            .map(|s| sample_plane(1000 + s, lambda, radius).unwrap().node_count())
            .sum();
        let mean = total as f64 / trials as f64;
        let expected = expected_node_count(lambda, radius);
        assert!((mean / expected - 1.0).abs() < 0.1, "mean {mean} vs {expected}");
    }

    #[test]
    fn series_terms_by_hand() {
        // d = 0, 1, 2 terms: 1 + λπR² + (λπR²)²/6
        let x = 4.0 * PI * 0.25;
        let approx = 1.0 + x + x * x / 6.0 + (2.0 * x).powi(3) / 720.0;
        assert!((expected_node_count(4.0, 0.5) - approx) / approx < 0.01);
    }

    #[test]
    fn sampled_planes_self_validate() {
        for seed in 0..10 {
            let p = sample_plane(seed, 4.0, 2.0).unwrap();
            assert!(validate(&p, 2.0).unwrap().is_empty());
        }
        let p = sample_plane(0, 4.0, 1.0).unwrap();
        assert!(matches!(validate(&p, 2.0), Err(SurfaceError::NeedsExpansion { .. })));
    }

    #[test]
    fn develop_sums_spawning_points() {
        let root = PlaneNode::complete(
            vec![Vec2::new(1.0, 0.0)],
            vec![PlaneNode::complete(vec![Vec2::new(0.0, 1.0)], vec![])],
        );
        let p = TruncatedPlane::from_tree(root);
        let g = ChartId(vec![0, 0]);
        assert_eq!(develop(&p, &ChartId::root(), &ChartId::root()).unwrap(), Vec2::zero());
        assert_eq!(develop(&p, &ChartId::root(), &g).unwrap(), Vec2::new(1.0, 1.0));
    }

    #[test]
    fn develop_composes_along_tree_paths() {
        for seed in 0..100 {
            let p = sample_plane(seed, 4.0, 1.2).unwrap();
            for (id, _) in p.nodes().into_iter().filter(|(id, _)| id.depth() == 2) {
                let child = id.parent().unwrap().0;
                let r = ChartId::root();
                let lhs = develop(&p, &r, &child).unwrap() + develop(&p, &child, &id).unwrap();
                assert!(lhs.dist(develop(&p, &r, &id).unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let p = sample_plane(8, 4.0, 1.3).unwrap();
        let q = TruncatedPlane::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
        let manual = TruncatedPlane::from_tree(PlaneNode::complete(vec![Vec2::new(0.3, 0.1)], vec![]));
        assert_eq!(TruncatedPlane::from_json(&manual.to_json().unwrap()).unwrap(), manual);
    }

    #[test]
    fn planting_adds_an_order_one_cone() {
        let p = sample_plane(3, 4.0, 2.0).unwrap();
        let (q, id) = p.plant(Vec2::new(0.31, -0.27)).unwrap();
        assert_eq!(q.cone_point(&id).unwrap().order, 1);
        assert_eq!(q.node_count(), p.node_count() + q.node(&ChartId(id.0.clone())).unwrap().count());
        assert!(validate(&q, 2.0).unwrap().is_empty());
        assert!(matches!(expand(&q, 3.0), Err(PlaneError::NotExpandable)));
    }

    #[test]
    fn degenerate_samples_are_detected() {
        let x = Vec2::new(1.0, 0.0);
        assert!(is_degenerate(Vec2::new(2.0, 1e-12), &[x], None));
        assert!(is_degenerate(Vec2::new(1e-12, 0.0), &[], None));
        assert!(is_degenerate(Vec2::new(0.5, 0.0), &[], Some(x)));
        assert!(!is_degenerate(Vec2::new(0.5, 0.5), &[x], Some(x)));
    }
}
