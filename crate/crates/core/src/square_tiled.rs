//! Square-tiled surfaces (origamis).
//!
//! Square `i` is glued on its right to square `h(i)` and on its top to square
//! `v(i)`. Corners are identified around the cycles of `v∘h∘v⁻¹∘h⁻¹` acting on
//! bottom-left corners; a cycle of length `k + 1` is a cone point of order `k`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flat_complex::{
    ChartId, ChartView, ConeId, ConePoint, Domain, Edge, FlatComplex, Incidence, Portal, PortalEnd,
    PortalId, SurfaceError, SurfaceProvider,
};
use crate::rng::stream;
use crate::Vec2;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StsError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("entry {value} out of range 1..={n}")]
    OutOfRange { value: usize, n: usize },
    #[error("permutations have different sizes ({0} and {1})")]
    SizeMismatch(usize, usize),
    #[error("the squares do not form a connected surface")]
    Disconnected,
    #[error("a surface needs at least one square")]
    Empty,
    #[error("not a permutation")]
    NotBijective,
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
}

/// A permutation of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Perm {
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Perm {
    type Error = StsError;
    fn try_from(images: Vec<usize>) -> Result<Self, StsError> {
        Perm::new(images)
    }
}

impl From<Perm> for Vec<usize> {
    fn from(p: Perm) -> Self {
        p.images
    }
}

impl Perm {
    pub fn new(images: Vec<usize>) -> Result<Self, StsError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(StsError::NotBijective);
            }
            seen[i] = true;
        }
        Ok(Perm { images })
    }

    pub fn identity(n: usize) -> Self {
        Perm { images: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Perm { images: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        Perm { images: other.images.iter().map(|&i| self.images[i]).collect() }
    }

    /// Cycles, each starting at its smallest element, ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            let mut c = Vec::new();
            let mut i = s;
            while !seen[i] {
                seen[i] = true;
                c.push(i);
                i = self.images[i];
            }
            out.push(c);
        }
        out
    }

    /// Uniformly random permutation.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Perm {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Perm { images }
    }
}

/// 1-based cycle notation with fixed points omitted; the identity prints as `()`.
impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<_> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for c in cycles {
            let parts: Vec<String> = c.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

/// Parses 1-based cycle notation such as `"(1 2)(3 4)"` into a permutation of
/// `n` elements. Cycles may share no element; whitespace and commas separate
/// entries.
pub fn parse_cycles(text: &str, n: usize) -> Result<Perm, StsError> {
    let mut images: Vec<usize> = (0..n).collect();
    let mut used = vec![false; n];
    let bytes = text.as_bytes();
    let mut pos = 0;
    let err = |pos: usize, msg: &str| StsError::Parse { pos, msg: msg.into() };
    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && (bytes[*pos].is_ascii_whitespace() || bytes[*pos] == b',') {
            *pos += 1;
        }
    };
    loop {
        skip_ws(&mut pos);
        if pos == bytes.len() {
            break;
        }
        if bytes[pos] != b'(' {
            return Err(err(pos, "expected '('"));
        }
        pos += 1;
        let mut cycle = Vec::new();
        loop {
            skip_ws(&mut pos);
            if pos == bytes.len() {
                return Err(err(pos, "unterminated cycle"));
            }
            if bytes[pos] == b')' {
                pos += 1;
                break;
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(err(pos, "expected a number"));
            }
            let value: usize = text[start..pos].parse().map_err(|_| err(start, "number too large"))?;
            if value == 0 || value > n {
                return Err(StsError::OutOfRange { value, n });
            }
            if used[value - 1] {
                return Err(err(start, "element repeated"));
            }
            used[value - 1] = true;
            cycle.push(value - 1);
        }
        for (k, &i) in cycle.iter().enumerate() {
            images[i] = cycle[(k + 1) % cycle.len()];
        }
    }
    Ok(Perm { images })
}

fn is_transitive(h: &Perm, v: &Perm) -> bool {
    let n = h.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let (hi, vi) = (h.inverse(), v.inverse());
    while let Some(i) = stack.pop() {
        for j in [h.apply(i), v.apply(i), hi.apply(i), vi.apply(i)] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// The surface glued from unit (or scaled) squares.
#[derive(Clone, Debug)]
pub struct SquareTiledSurface {
    h: Perm,
    v: Perm,
    scale: f64,
    /// Bottom-left corners (square indices) of each vertex, in walking order.
    vertex_cycles: Vec<Vec<usize>>,
    complex: FlatComplex,
}

pub fn build_sts(h: Perm, v: Perm) -> Result<SquareTiledSurface, StsError> {
    if h.len() != v.len() {
        return Err(StsError::SizeMismatch(h.len(), v.len()));
    }
    if h.is_empty() {
        return Err(StsError::Empty);
    }
    if !is_transitive(&h, &v) {
        return Err(StsError::Disconnected);
    }
    Ok(assemble(h, v, 1.0))
}

/// Independent uniform permutations, redrawn until they generate a connected surface.
pub fn random_sts(seed: u64, n: usize) -> Result<SquareTiledSurface, StsError> {
    if n == 0 {
        return Err(StsError::Empty);
    }
    let mut rng = stream(seed, &[], 0x0516_a417);
    loop {
        let h = Perm::random(&mut rng, n);
        let v = Perm::random(&mut rng, n);
        if is_transitive(&h, &v) {
            return Ok(assemble(h, v, 1.0));
        }
    }
}

pub fn rescale(surface: &SquareTiledSurface, s: f64) -> Result<SquareTiledSurface, StsError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(StsError::BadScale(s));
    }
    Ok(assemble(surface.h.clone(), surface.v.clone(), surface.scale * s))
}

/// Square index whose bottom-left corner follows `a`'s around their common vertex.
fn corner_walk(h: &Perm, v: &Perm, hinv: &Perm, vinv: &Perm, a: usize) -> [usize; 5] {
    let br = hinv.apply(a);
    let tr = vinv.apply(br);
    let tl = h.apply(tr);
    [a, br, tr, tl, v.apply(tl)]
}

fn assemble(h: Perm, v: Perm, scale: f64) -> SquareTiledSurface {
    let n = h.len();
    let s = scale;
    let (hinv, vinv) = (h.inverse(), v.inverse());
    let charts = (0..n).map(|i| (ChartId::index(i), Domain::Square { side: s })).collect();
    let mut portals = Vec::with_capacity(2 * n);
    for i in 0..n {
        portals.push(Portal {
            id: PortalId(vec![0, i as u32]),
            side_a: PortalEnd {
                chart: ChartId::index(i),
                edge: Edge::Segment { a: Vec2::new(s, 0.0), b: Vec2::new(s, s) },
            },
            side_b: PortalEnd {
                chart: ChartId::index(h.apply(i)),
                edge: Edge::Segment { a: Vec2::new(0.0, 0.0), b: Vec2::new(0.0, s) },
            },
            shift: Vec2::new(-s, 0.0),
        });
    }
    for i in 0..n {
        portals.push(Portal {
            id: PortalId(vec![1, i as u32]),
            side_a: PortalEnd {
                chart: ChartId::index(i),
                edge: Edge::Segment { a: Vec2::new(0.0, s), b: Vec2::new(s, s) },
            },
            side_b: PortalEnd {
                chart: ChartId::index(v.apply(i)),
                edge: Edge::Segment { a: Vec2::new(0.0, 0.0), b: Vec2::new(s, 0.0) },
            },
            shift: Vec2::new(0.0, -s),
        });
    }
    let mut seen = vec![false; n];
    let mut vertex_cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut a = start;
        while !seen[a] {
            seen[a] = true;
            cyc.push(a);
            a = corner_walk(&h, &v, &hinv, &vinv, a)[4];
        }
        vertex_cycles.push(cyc);
    }
    let corners = [
        (Vec2::new(0.0, 0.0), 0.0),
        (Vec2::new(s, 0.0), FRAC_PI_2),
        (Vec2::new(s, s), PI),
        (Vec2::new(0.0, s), 3.0 * FRAC_PI_2),
    ];
    let cones = vertex_cycles
        .iter()
        .enumerate()
        .map(|(k, cyc)| {
            let mut incidences = Vec::with_capacity(4 * cyc.len());
            for (j, &a) in cyc.iter().enumerate() {
                let walk = corner_walk(&h, &v, &hinv, &vinv, a);
                for (q, &(pos, start)) in corners.iter().enumerate() {
                    incidences.push(Incidence {
                        chart: ChartId::index(walk[q]),
                        pos,
                        start,
                        span: FRAC_PI_2,
                        offset: TAU * j as f64 + start,
                    });
                }
            }
            ConePoint { id: ConeId::index(k), order: cyc.len() as u32 - 1, incidences }
        })
        .collect();
    let complex = FlatComplex::new(charts, portals, cones, s * s * n as f64);
    SquareTiledSurface { h, v, scale, vertex_cycles, complex }
}

impl SquareTiledSurface {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &Perm {
        &self.h
    }

    pub fn v(&self) -> &Perm {
        &self.v
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn side(&self) -> f64 {
        self.scale
    }

    pub fn area(&self) -> f64 {
        self.scale * self.scale * self.n() as f64
    }

    /// `h∘v∘h⁻¹∘v⁻¹`, whose cycles on top-right corners match the vertex cycles.
    pub fn commutator(&self) -> Perm {
        self.h.compose(&self.v).compose(&self.h.inverse()).compose(&self.v.inverse())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_cycles.len()
    }

    /// Orders of all vertices, regular ones included as 0.
    pub fn vertex_orders(&self) -> Vec<u32> {
        self.vertex_cycles.iter().map(|c| c.len() as u32 - 1).collect()
    }

    pub fn genus(&self) -> u32 {
        // 2 − 2g = V − E + F = V − 2n + n
        ((self.n() - self.vertex_count()) / 2 + 1) as u32
    }

    pub fn complex(&self) -> &FlatComplex {
        &self.complex
    }

    /// Singular cone points only.
    pub fn singularities(&self) -> Vec<ConePoint> {
        self.complex.vertices().iter().filter(|c| c.is_singular()).cloned().collect()
    }

    pub fn summary(&self) -> StsSummary {
        StsSummary {
            format_version: FORMAT_VERSION,
            kind: "square_tiled".into(),
            n: self.n(),
            hperm: self.h.to_string(),
            vperm: self.v.to_string(),
            h: self.h.clone(),
            v: self.v.clone(),
            scale: self.scale,
            area: self.area(),
            genus: self.genus(),
            cone_points: self
                .singularities()
                .iter()
                .map(|c| ConeSummary { id: c.id.clone(), order: c.order, angle: c.total_angle() })
                .collect(),
            portals: self.complex.portals().to_vec(),
            vertices: self.complex.vertices().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(&self.summary())
    }

    pub fn from_json(s: &str) -> Result<Self, StsError> {
        let doc: StsSummary =
            serde_json::from_str(s).map_err(|e| StsError::Parse { pos: e.column(), msg: e.to_string() })?;
        let sts = build_sts(doc.h, doc.v)?;
        if doc.scale == 1.0 {
            Ok(sts)
        } else {
            rescale(&sts, doc.scale)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeSummary {
    pub id: ConeId,
    pub order: u32,
    pub angle: f64,
}

/// JSON layout of a square-tiled surface; see `docs/FORMAT.md`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StsSummary {
    pub format_version: u32,
    pub kind: String,
    pub n: usize,
    pub hperm: String,
    pub vperm: String,
    pub h: Perm,
    pub v: Perm,
    pub scale: f64,
    pub area: f64,
    pub genus: u32,
    pub cone_points: Vec<ConeSummary>,
    pub portals: Vec<Portal>,
    pub vertices: Vec<ConePoint>,
}

impl SurfaceProvider for SquareTiledSurface {
    fn chart(&self, id: &ChartId) -> Result<ChartView, SurfaceError> {
        self.complex.chart(id)
    }

    fn cone_point(&self, id: &ConeId) -> Result<ConePoint, SurfaceError> {
        self.complex.cone_point(id)
    }

    fn vertex_ids(&self) -> Vec<ConeId> {
        self.complex.vertex_ids()
    }

    fn charts_in_ball(&self, radius: f64) -> Result<Vec<ChartId>, SurfaceError> {
        self.complex.charts_in_ball(radius)
    }

    fn total_area(&self) -> Option<f64> {
        Some(self.area())
    }

    fn root_chart(&self) -> ChartId {
        ChartId::index(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_complex::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn genus2() -> SquareTiledSurface {
        build_sts(parse_cycles("(1 2)", 3).unwrap(), parse_cycles("(1 3)", 3).unwrap()).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_cycles("(1 2)", 3).unwrap().images(), &[1, 0, 2]);
        assert_eq!(parse_cycles("", 2).unwrap(), Perm::identity(2));
        assert_eq!(parse_cycles("(1 3 2)(4 5)", 5).unwrap().images(), &[2, 0, 1, 4, 3]);
        assert!(matches!(parse_cycles("(1 4)", 3), Err(StsError::OutOfRange { value: 4, n: 3 })));
        assert!(matches!(parse_cycles("(1 2", 3), Err(StsError::Parse { .. })));
        assert!(matches!(parse_cycles("1 2", 3), Err(StsError::Parse { pos: 0, .. })));
        assert!(matches!(parse_cycles("(1 2)(2 3)", 3), Err(StsError::Parse { .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..1000 {
            let n = 1 + k % 17;
            let p = Perm::random(&mut rng, n);
            assert_eq!(parse_cycles(&p.to_string(), n).unwrap(), p);
        }
        assert_eq!(Perm::identity(3).to_string(), "()");
        assert_eq!(parse_cycles("()", 3).unwrap(), Perm::identity(3));
    }

    #[test]
    fn torus() {
        let t = build_sts(Perm::identity(1), Perm::identity(1)).unwrap();
        assert_eq!(t.genus(), 1);
        assert!(t.singularities().is_empty());
        assert_eq!(t.area(), 1.0);
        assert!(validate(&t, 1.0).unwrap().is_empty());
    }

    #[test]
    fn three_square_origami() {
        let s = genus2();
        assert_eq!(s.genus(), 2);
        let sing = s.singularities();
        assert_eq!(sing.len(), 1);
        assert_eq!(sing[0].order, 2);
        assert!((sing[0].total_angle() - 6.0 * PI).abs() < 1e-12);
        assert!(validate(&s, 1.0).unwrap().is_empty());
        // brute force: the commutator has a single 3-cycle
        let c = s.commutator();
        let lens: Vec<usize> = c.cycles().iter().map(Vec::len).collect();
        assert_eq!(lens, vec![3]);
    }

    #[test]
    fn disconnected_input_is_rejected() {
        let r = build_sts(Perm::identity(2), Perm::identity(2));
        assert!(matches!(r, Err(StsError::Disconnected)));
        assert!(matches!(build_sts(Perm::identity(2), Perm::identity(3)), Err(StsError::SizeMismatch(2, 3))));
    }

    /// Vertices counted by identifying square corners across shared edges.
    fn euler_by_corners(s: &SquareTiledSurface) -> i64 {
        let n = s.n();
        let mut parent: Vec<usize> = (0..4 * n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut i = i;
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let union = |p: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(p, a), find(p, b));
            p[ra] = rb;
        };
        // corner slots: 0 BL, 1 BR, 2 TR, 3 TL
        for i in 0..n {
            let r = s.h.apply(i);
            union(&mut parent, 4 * i + 1, 4 * r);
            union(&mut parent, 4 * i + 2, 4 * r + 3);
            let t = s.v.apply(i);
            union(&mut parent, 4 * i + 3, 4 * t);
            union(&mut parent, 4 * i + 2, 4 * t + 1);
        }
        let v = (0..4 * n).filter(|&i| find(&mut parent, i) == i).count() as i64;
        v - 2 * n as i64 + n as i64
    }

    #[test]
    fn euler_characteristic_matches_genus() {
        for seed in 0..100 {
            let s = random_sts(seed, 2 + (seed as usize % 9)).unwrap();
            assert_eq!(euler_by_corners(&s), 2 - 2 * i64::from(s.genus()), "seed {seed}");
        }
    }

    #[test]
    fn gauss_bonnet() {
        for seed in 0..500 {
            let s = random_sts(seed, 1 + (seed as usize % 12)).unwrap();
            let total: u32 = s.vertex_orders().iter().sum();
            assert_eq!(total, 2 * s.genus() - 2);
        }
    }

    #[test]
    fn random_surfaces_are_reproducible() {
        let a = random_sts(5, 8).unwrap();
        let b = random_sts(5, 8).unwrap();
        assert_eq!((a.h(), a.v()), (b.h(), b.v()));
        for seed in 0..20 {
            let t = random_sts(seed, 1).unwrap();
            assert_eq!(t.genus(), 1);
        }
    }

    #[test]
    fn mean_euler_matches_commutator_cycle_count() {
        let n = 64;
        let (mut lhs, mut rhs) = (0i64, 0i64);
        for seed in 0..500 {
            let s = random_sts(seed, n).unwrap();
            lhs += 2 * i64::from(s.genus()) - 2;
            rhs += n as i64 - s.commutator().cycles().len() as i64;
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn random_surfaces_validate() {
        for seed in 0..20 {
            let s = random_sts(seed, 6).unwrap();
            assert!(validate(&s, 1.0).unwrap().is_empty());
        }
    }

    #[test]
    fn corrupted_portal_is_reported() {
        let s = genus2();
        let id = PortalId(vec![0, 1]);
        let bad = s.complex().with_portal_shift(&id, Vec2::new(-0.9, 0.0));
        let report = validate(&bad, 1.0).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].portal(), Some(&id));
    }

    #[test]
    fn rescale_scales_area_only() {
        let s = genus2();
        assert!(matches!(rescale(&s, 0.0), Err(StsError::BadScale(_))));
        let t = rescale(&s, 2.0).unwrap();
        assert_eq!(t.area(), 12.0);
        assert_eq!(t.genus(), 2);
        assert!(validate(&t, 1.0).unwrap().is_empty());
        let same = rescale(&s, 1.0).unwrap();
        assert_eq!(same.complex().portals(), s.complex().portals());
    }

    #[test]
    fn json_round_trip() {
        let s = rescale(&genus2(), 1.5).unwrap();
        let t = SquareTiledSurface::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(t.to_json().unwrap(), s.to_json().unwrap());
    }
}
