use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::atlas::{visible_atlas, VisibleAtlas};
use super::visibility::{dijkstra, visible_singularities};
use super::{check_positive, ExploreError, LocatedPoint, EPS_GEO};
use crate::flat_complex::{ChartId, Domain, SurfaceProvider};
use crate::square_tiled::SquareTiledSurface;
use crate::Vec2;

/// Monte Carlo estimate of the area of a metric ball.
#[derive(Clone, Debug, Serialize)]
pub struct BallArea {
    pub area: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Area of the visible region alone.
    pub visible_area: f64,
}

/// Visible atlases of `p` and of every cone point within `radius`, each cut
/// to the remaining radius. Their union is the closed metric ball.
fn source_atlases<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
) -> Result<Vec<(LocatedPoint, f64, VisibleAtlas)>, ExploreError> {
    let map = dijkstra(surface, p, radius)?;
    let mut out = vec![(p.clone(), 0.0, visible_atlas(surface, p, radius)?)];
    for (id, (d, _)) in &map.entries {
        let s = LocatedPoint::cone(surface, id)?;
        let atlas = visible_atlas(surface, &s, radius - d)?;
        out.push((s, *d, atlas));
    }
    Ok(out)
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Area of the closed ball of radius `radius` about `p`, estimated from a
/// Halton sample of the bounding box of each chart's share of the ball.
pub fn ball_area<S: SurfaceProvider + ?Sized>(
    surface: &S,
    p: &LocatedPoint,
    radius: f64,
    samples_per_chart: usize,
) -> Result<BallArea, ExploreError> {
    check_positive("radius", radius)?;
    if samples_per_chart == 0 {
        return Err(ExploreError::InvalidParameter("samples_per_chart must be positive".into()));
    }
    let sources = source_atlases(surface, p, radius)?;
    let visible_area = sources[0].2.total_area;
    let mut by_chart: BTreeMap<ChartId, Vec<&super::Cell>> = BTreeMap::new();
    for (_, _, atlas) in &sources {
        for c in &atlas.cells {
            by_chart.entry(c.chart.clone()).or_default().push(c);
        }
    }
    let (mut area, mut var, mut samples) = (0.0, 0.0, 0);
    for (chart, cells) in by_chart {
        let (mut lo, mut hi) = cells[0].bbox();
        for c in &cells[1..] {
            let (a, b) = c.bbox();
            lo = Vec2::new(lo.re.min(a.re), lo.im.min(a.im));
            hi = Vec2::new(hi.re.max(b.re), hi.im.max(b.im));
        }
        if let Domain::Square { side } = surface.chart_domain(&chart)? {
            lo = Vec2::new(lo.re.max(0.0), lo.im.max(0.0));
            hi = Vec2::new(hi.re.min(side), hi.im.min(side));
        }
        let (w, h) = (hi.re - lo.re, hi.im - lo.im);
        if w <= 0.0 || h <= 0.0 {
            continue;
        }
        let inside = (1..=samples_per_chart)
            .filter(|&i| {
                let z = Vec2::new(lo.re + w * radical_inverse(i, 2), lo.im + h * radical_inverse(i, 3));
                cells.iter().any(|c| c.contains(z))
            })
            .count();
        let n = samples_per_chart as f64;
        let f = inside as f64 / n;
        area += w * h * f;
        var += (w * h).powi(2) * f * (1.0 - f) / n;
        samples += samples_per_chart;
    }
    Ok(BallArea { area, std_error: var.sqrt(), samples, visible_area })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Triangulated approximation of a closed metric ball on a square-tiled
/// surface, built on an `m × m` grid in every square.
#[derive(Clone, Debug, Serialize)]
pub struct BallComplex {
    pub center: LocatedPoint,
    pub radius: f64,
    pub grid: usize,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub boundary_components: usize,
}

impl BallComplex {
    pub fn build(
        surface: &SquareTiledSurface,
        p: &LocatedPoint,
        radius: f64,
        grid: usize,
    ) -> Result<Self, ExploreError> {
        check_positive("radius", radius)?;
        if grid < 2 {
            return Err(ExploreError::InvalidParameter("grid must be at least 2".into()));
        }
        let (n, m, side) = (surface.n(), grid, surface.side());
        let k = m + 1;
        let idx = |c: usize, i: usize, j: usize| (c * k + i) * k + j;
        let mut uf = UnionFind((0..n * k * k).collect());
        for c in 0..n {
            let (hc, vc) = (surface.h().apply(c), surface.v().apply(c));
            for j in 0..k {
                uf.union(idx(c, m, j), idx(hc, 0, j));
                uf.union(idx(c, j, m), idx(vc, j, 0));
            }
        }

        let step = side / m as f64;
        let mut inside = vec![false; n * k * k];
        for (s, _, atlas) in source_atlases(surface, p, radius)? {
            for (inc_chart, pos) in source_positions(surface, &s)? {
                let (i, j) = ((pos.re / step).round(), (pos.im / step).round());
                if Vec2::new(i * step, j * step).dist(pos) < EPS_GEO {
                    inside[idx(inc_chart, i as usize, j as usize)] = true;
                }
            }
            for cell in &atlas.cells {
                let c = cell.chart.0[0] as usize;
                let (lo, hi) = cell.bbox();
                let range = |a: f64, b: f64| {
                    let i0 = ((a - EPS_GEO) / step).ceil().max(0.0) as usize;
                    let i1 = (((b + EPS_GEO) / step).floor().max(-1.0) as i64).min(m as i64);
                    i0..(i1 + 1).max(0) as usize
                };
                for i in range(lo.re, hi.re) {
                    for j in range(lo.im, hi.im) {
                        let id = idx(c, i, j);
                        if !inside[id] && cell.locate(Vec2::new(i as f64 * step, j as f64 * step), EPS_GEO).is_some() {
                            inside[id] = true;
                        }
                    }
                }
            }
        }
        let mut marked = HashSet::new();
        for (id, &b) in inside.iter().enumerate() {
            if b {
                marked.insert(uf.find(id));
            }
        }

        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: HashSet<[usize; 3]> = HashSet::new();
        for c in 0..n {
            for i in 0..k {
                for j in 0..k {
                    let a = uf.find(idx(c, i, j));
                    if !marked.contains(&a) {
                        continue;
                    }
                    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
                        if i + di < k && j + dj < k {
                            let b = uf.find(idx(c, i + di, j + dj));
                            if marked.contains(&b) {
                                edges.entry((a.min(b), a.max(b))).or_insert(0);
                            }
                        }
                    }
                    if i < m && j < m {
                        let d = uf.find(idx(c, i + 1, j + 1));
                        for third in [idx(c, i + 1, j), idx(c, i, j + 1)] {
                            let t = uf.find(third);
                            if marked.contains(&d) && marked.contains(&t) {
                                let mut f = [a, d, t];
                                f.sort_unstable();
                                faces.insert(f);
                            }
                        }
                    }
                }
            }
        }
        for f in &faces {
            for (x, y) in [(f[0], f[1]), (f[0], f[2]), (f[1], f[2])] {
                *edges.get_mut(&(x, y)).expect("face edge missing") += 1;
            }
        }

        // keep the component containing the most vertices
        let mut comp = UnionFind((0..n * k * k).collect());
        for &(a, b) in edges.keys() {
            comp.union(a, b);
        }
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &v in &marked {
            *sizes.entry(comp.find(v)).or_default() += 1;
        }
        let Some((&main, _)) = sizes.iter().max_by_key(|(r, s)| (**s, std::cmp::Reverse(**r))) else {
            return Ok(BallComplex {
                center: p.clone(),
                radius,
                grid,
                vertices: 0,
                edges: 0,
                faces: 0,
                euler: 0,
                boundary_components: 0,
            });
        };
        let vertices = marked.iter().filter(|&&v| comp.find(v) == main).count();
        let kept: Vec<(&(usize, usize), &usize)> = edges.iter().filter(|(e, _)| comp.find(e.0) == main).collect();
        let nfaces = faces.iter().filter(|f| comp.find(f[0]) == main).count();

        let mut bd = UnionFind((0..n * k * k).collect());
        let mut bd_vertices = HashSet::new();
        for (&(a, b), &count) in &kept {
            if count <= 1 {
                bd.union(a, b);
                bd_vertices.insert(a);
                bd_vertices.insert(b);
            }
        }
        let boundary_components = bd_vertices.iter().map(|&v| bd.find(v)).collect::<HashSet<_>>().len();
        let euler = vertices as i64 - kept.len() as i64 + nfaces as i64;
        Ok(BallComplex {
            center: p.clone(),
            radius,
            grid,
            vertices,
            edges: kept.len(),
            faces: nfaces,
            euler,
            boundary_components,
        })
    }

    pub fn is_disk(&self) -> bool {
        self.euler == 1 && self.boundary_components == 1
    }
}

/// Chart index and position of every sheet of a source point.
fn source_positions(surface: &SquareTiledSurface, s: &LocatedPoint) -> Result<Vec<(usize, Vec2)>, ExploreError> {
    Ok(super::sheets(surface, s)?.into_iter().map(|sh| (sh.chart.0[0] as usize, sh.pos)).collect())
}

/// Largest radius up to `r_max` for which every closed ball about `p` is an
/// embedded disk, found by checking the topology between consecutive
/// critical radii.
pub fn injectivity_radius(surface: &SquareTiledSurface, p: &LocatedPoint, r_max: f64) -> Result<f64, ExploreError> {
    check_positive("r_max", r_max)?;
    let map = dijkstra(surface, p, r_max)?;
    let dist_of = |s: &LocatedPoint| match &s.cone {
        None => Some(0.0),
        Some(id) if p.cone.as_ref() == Some(id) => Some(0.0),
        Some(id) => map.get(id),
    };
    let mut sources = vec![(p.clone(), 0.0)];
    for (id, (d, _)) in &map.entries {
        sources.push((LocatedPoint::cone(surface, id)?, *d));
    }
    let mut events: Vec<f64> = map.entries.values().map(|e| e.0).collect();
    for (s, d1) in &sources {
        let reach = 2.0 * r_max - d1;
        if reach <= 0.0 {
            continue;
        }
        for sight in visible_singularities(surface, s, reach)? {
            let target = LocatedPoint::cone(surface, &sight.id)?;
            if let Some(d2) = dist_of(&target) {
                events.push(0.5 * (d1 + sight.distance + d2));
            }
        }
        if p.cone.is_none() {
            for cell in visible_atlas(surface, s, reach)?.cells_containing(&p.chart, p.pos) {
                let h = cell.u.dist(p.pos);
                if h > EPS_GEO {
                    events.push(0.5 * (d1 + h));
                }
            }
        }
    }
    events.retain(|&e| e > EPS_GEO && e <= r_max);
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() < EPS_GEO);

    let mut prev = 0.0;
    let mut bounds = events.clone();
    if bounds.last().is_none_or(|&e| e < r_max - EPS_GEO) {
        bounds.push(r_max);
    }
    for next in bounds {
        let gap = next - prev;
        let grid = ((8.0 * surface.side() / gap).ceil() as usize).clamp(16, 400);
        let ball = BallComplex::build(surface, p, 0.5 * (prev + next), grid)?;
        if !ball.is_disk() {
            log::debug!("ball of radius {} is not a disk: {ball:?}", 0.5 * (prev + next));
            return Ok(prev);
        }
        prev = next;
    }
    Ok(r_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_complex::ConeId;
    use crate::poisson_plane::{sample_plane, PlaneNode, TruncatedPlane};
    use crate::square_tiled::{build_sts, parse_cycles, rescale};
    use std::f64::consts::PI;

    fn torus() -> SquareTiledSurface {
        build_sts(parse_cycles("()", 1).unwrap(), parse_cycles("()", 1).unwrap()).unwrap()
    }

    fn genus2() -> SquareTiledSurface {
        build_sts(parse_cycles("(1 2)", 3).unwrap(), parse_cycles("(1 3)", 3).unwrap()).unwrap()
    }

    #[test]
    fn empty_plane_ball_is_a_disk() {
        let p = TruncatedPlane::from_tree(PlaneNode::leaf());
        let b = ball_area(&p, &LocatedPoint::root(), 1.0, 20_000).unwrap();
        assert!((b.area - PI).abs() < 0.01, "{b:?}");
        assert!((b.visible_area - PI).abs() < 1e-9);
    }

    #[test]
    fn ball_area_at_least_visible_area() {
        for seed in 0..5 {
            let p = sample_plane(seed, 3.0, 2.5).unwrap();
            let b = ball_area(&p, &LocatedPoint::root(), 1.2, 20_000).unwrap();
            assert!(b.area + 4.0 * b.std_error >= b.visible_area - 1e-9, "{b:?}");
            assert!(b.area >= PI * 1.44 - 0.05, "{b:?}");
        }
    }

    #[test]
    fn small_ball_at_a_cone() {
        let s = genus2();
        let c = LocatedPoint::cone(&s, &ConeId::index(0)).unwrap();
        let b = ball_area(&s, &c, 0.4, 40_000).unwrap();
        assert!((b.area - 3.0 * PI * 0.16).abs() < 0.02, "{b:?}");
    }

    #[test]
    fn torus_injectivity_radius() {
        let t = torus();
        let p = LocatedPoint::regular(ChartId::index(0), Vec2::new(0.5, 0.5));
        assert!(BallComplex::build(&t, &p, 0.3, 32).unwrap().is_disk());
        assert!(!BallComplex::build(&t, &p, 0.6, 32).unwrap().is_disk());
        assert!((injectivity_radius(&t, &p, 2.0).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn genus2_injectivity_radius_at_cone() {
        let s = genus2();
        let c = LocatedPoint::cone(&s, &ConeId::index(0)).unwrap();
        assert!((injectivity_radius(&s, &c, 1.5).unwrap() - 0.5).abs() < 1e-9);
        let big = rescale(&s, 3.0).unwrap();
        let c = LocatedPoint::cone(&big, &ConeId::index(0)).unwrap();
        assert!((injectivity_radius(&big, &c, 4.5).unwrap() - 1.5).abs() < 1e-9);
    }
}
