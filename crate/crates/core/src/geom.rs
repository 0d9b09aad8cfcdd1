//! Planar primitives in the flat metric.
//!
//! Everything here is generic over [`Scalar`] so the predicates can be run in
//! `f32` for quick plotting as well as in `f64`, which the rest of the crate
//! uses. Tolerances are absolute and assume coordinates have been scaled so
//! that queries live in disks of radius at most `1e3`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_traits::{Float, FloatConst};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floating point type usable by the geometric predicates.
pub trait Scalar: Float + FloatConst + Debug + Default + Send + Sync + 'static {
    /// Absolute tolerance used by every predicate.
    fn geo_eps() -> Self;
    /// Tolerance on the norm of a unit direction.
    fn unit_eps() -> Self;

    fn lit(x: f64) -> Self;

    fn tau() -> Self {
        Self::TAU()
    }
}

impl Scalar for f64 {
    fn geo_eps() -> Self {
        1e-9
    }
    fn unit_eps() -> Self {
        1e-12
    }
    fn lit(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    fn geo_eps() -> Self {
        1e-4
    }
    fn unit_eps() -> Self {
        1e-6
    }
    fn lit(x: f64) -> Self {
        x as f32
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("zero-length vector has no direction")]
    ZeroVector,
    #[error("direction is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("invalid angular interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A vector (or point) in a flat chart, stored like a complex number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct Vec2<T> {
    pub re: T,
    pub im: T,
}

impl<T: Copy> From<[T; 2]> for Vec2<T> {
    fn from(a: [T; 2]) -> Self {
        Vec2 { re: a[0], im: a[1] }
    }
}

impl<T> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.re, v.im]
    }
}

impl<T: Scalar> Vec2<T> {
    pub const fn new(re: T, im: T) -> Self {
        Vec2 { re, im }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    /// Unit vector at angle `theta`.
    pub fn polar(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(c, s)
    }

    pub fn from_polar(r: T, theta: T) -> Self {
        Self::polar(theta) * r
    }

    pub fn dot(self, o: Self) -> T {
        self.re * o.re + self.im * o.im
    }

    /// z-component of the 3D cross product; positive when `o` is counterclockwise of `self`.
    pub fn cross(self, o: Self) -> T {
        self.re * o.im - self.im * o.re
    }

    pub fn norm(self) -> T {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(self) -> T {
        self.dot(self)
    }

    pub fn arg(self) -> T {
        self.im.atan2(self.re)
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn normalized(self) -> Result<Self, GeomError> {
        let n = self.norm();
        if n <= T::unit_eps() {
            return Err(GeomError::ZeroVector);
        }
        Ok(self * (T::one() / n))
    }

    pub fn rotate(self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(self.re * c - self.im * s, self.re * s + self.im * c)
    }

    pub fn perp(self) -> Self {
        Vec2::new(-self.im, self.re)
    }

    pub fn scale(self, s: T) -> Self {
        self * s
    }

    pub fn cast<U: Scalar>(self) -> Vec2<U> {
        Vec2::new(
            U::from(self.re).unwrap_or_else(U::nan),
            U::from(self.im).unwrap_or_else(U::nan),
        )
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Vec2::new(self.re * s, self.im * s)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.re, -self.im)
    }
}

/// Half-line `apex + t·dir`, `t ≥ 0`, with `|dir| = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct Ray<T> {
    pub apex: Vec2<T>,
    pub dir: Vec2<T>,
}

impl<T: Scalar> Ray<T> {
    pub fn new(apex: Vec2<T>, dir: Vec2<T>) -> Result<Self, GeomError> {
        if !apex.is_finite() || !dir.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let n = dir.norm();
        if (n - T::one()).abs() > T::unit_eps() {
            return Err(GeomError::NotUnit(n.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Ray { apex, dir })
    }

    /// Ray from `apex` pointing along `v` (any nonzero length).
    pub fn towards(apex: Vec2<T>, v: Vec2<T>) -> Result<Self, GeomError> {
        Ok(Ray {
            apex,
            dir: v.normalized()?,
        })
    }

    pub fn at_angle(apex: Vec2<T>, theta: T) -> Self {
        Ray {
            apex,
            dir: Vec2::polar(theta),
        }
    }

    pub fn point_at(&self, t: T) -> Vec2<T> {
        self.apex + self.dir * t
    }

    pub fn translate(&self, by: Vec2<T>) -> Self {
        Ray {
            apex: self.apex + by,
            dir: self.dir,
        }
    }
}

/// Closed segment between two distinct points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct Segment<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn new(a: Vec2<T>, b: Vec2<T>) -> Result<Self, GeomError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if a.dist(b) <= T::unit_eps() {
            return Err(GeomError::DegenerateSegment);
        }
        Ok(Segment { a, b })
    }

    pub fn len(&self) -> T {
        self.a.dist(self.b)
    }

    pub fn point_at(&self, t: T) -> Vec2<T> {
        self.a + (self.b - self.a) * t
    }

    pub fn translate(&self, by: Vec2<T>) -> Self {
        Segment {
            a: self.a + by,
            b: self.b + by,
        }
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn dist_to(&self, p: Vec2<T>) -> T {
        let e = self.b - self.a;
        let t = ((p - self.a).dot(e) / e.norm_sqr()).max(T::zero()).min(T::one());
        p.dist(self.point_at(t))
    }
}

/// Range of directions `[lo, hi]` measured in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct AngularInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> AngularInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, GeomError> {
        let w = hi - lo;
        if !lo.is_finite() || !hi.is_finite() || w < T::zero() || w > T::lit(4.0 * PI) + T::unit_eps()
        {
            return Err(GeomError::BadInterval {
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(AngularInterval { lo, hi })
    }

    /// The frame `[0, 2π)`.
    pub fn full_turn() -> Self {
        AngularInterval {
            lo: T::zero(),
            hi: T::tau(),
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: T, tol: T) -> bool {
        theta >= self.lo - tol && theta <= self.hi + tol
    }
}

/// Reduce `theta` into `[lo, lo + 2π)`.
pub fn normalize_angle<T: Scalar>(theta: T, lo: T) -> T {
    let tau = T::tau();
    let mut a = (theta - lo) % tau;
    if a < T::zero() {
        a = a + tau;
    }
    if a >= tau {
        a = a - tau;
    }
    lo + a
}

/// Direction of `v` expressed in `frame`, normalized into `[frame.lo, frame.lo + 2π)`.
pub fn angle_of<T: Scalar>(v: Vec2<T>, frame: AngularInterval<T>) -> Result<T, GeomError> {
    if v.norm() <= T::unit_eps() {
        return Err(GeomError::ZeroVector);
    }
    Ok(normalize_angle(v.arg(), frame.lo))
}

/// Why an intersection query refused to answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    /// Segment lies along the ray's supporting line and overlaps it.
    Collinear,
    /// Segment passes within tolerance of the ray's apex.
    NearApex,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing<T> {
    pub point: Vec2<T>,
    pub t_seg: T,
    pub t_ray: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Intersection<T> {
    Miss,
    Hit(Crossing<T>),
    Degenerate(Degeneracy),
}

impl<T> Intersection<T> {
    pub fn hit(self) -> Option<Crossing<T>> {
        match self {
            Intersection::Hit(c) => Some(c),
            _ => None,
        }
    }
}

/// Transversal intersection of a closed segment with a ray.
pub fn intersect_segment_ray<T: Scalar>(s: &Segment<T>, r: &Ray<T>) -> Intersection<T> {
    let eps = T::geo_eps();
    if s.dist_to(r.apex) <= eps {
        return Intersection::Degenerate(Degeneracy::NearApex);
    }
    let e = s.b - s.a;
    let w = s.a - r.apex;
    let elen = e.norm();
    let denom = r.dir.cross(e);
    if denom.abs() <= eps * elen {
        // parallel
        if r.dir.cross(w).abs() > eps {
            return Intersection::Miss;
        }
        let ta = w.dot(r.dir);
        let tb = (s.b - r.apex).dot(r.dir);
        if ta.max(tb) >= -eps {
            return Intersection::Degenerate(Degeneracy::Collinear);
        }
        return Intersection::Miss;
    }
    let t_ray = w.cross(e) / denom;
    let t_seg = w.cross(r.dir) / denom;
    let slack = eps / elen;
    if t_ray < T::zero() || t_seg < -slack || t_seg > T::one() + slack {
        return Intersection::Miss;
    }
    let t_seg = t_seg.max(T::zero()).min(T::one());
    Intersection::Hit(Crossing {
        point: r.point_at(t_ray),
        t_seg,
        t_ray,
    })
}

/// Distance along `r` to the supporting line of `s`, if the ray meets that line going forward.
pub fn ray_line_distance<T: Scalar>(r: &Ray<T>, on_line: Vec2<T>, line_dir: Vec2<T>) -> Option<T> {
    let denom = r.dir.cross(line_dir);
    if denom.abs() <= T::unit_eps() {
        return None;
    }
    let t = (on_line - r.apex).cross(line_dir) / denom;
    (t >= T::zero()).then_some(t)
}
