//! Straight geodesics, visibility and distances on any [`SurfaceProvider`].

mod atlas;
mod ball;
mod render;
mod trace;
mod visibility;

pub use atlas::{visible_atlas, visible_atlas_with, AtlasOptions, Bound, Cell, VisibleAtlas};
pub use ball::{ball_area, injectivity_radius, BallArea, BallComplex};
pub use render::{render_svg, RenderOptions, ARC_STEP};
pub use trace::{trace, Leg, Terminal, Trace};
pub use visibility::{
    dijkstra, distance, metric_ball_singularities, visible_from, visible_singularities, DistanceMap,
    Predecessor, Sighting,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flat_complex::{ChartId, ConeId, SurfaceError, SurfaceProvider};
use crate::geom::normalize_angle;
use crate::Vec2;

/// Global geometric tolerance.
pub const EPS_GEO: f64 = 1e-9;
/// Perpendicular miss below which an aimed path counts as hitting a vertex.
pub const EPS_HIT: f64 = 1e-11;
/// Default cap on portal-window recursion depth.
pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("window recursion exceeded depth {0}")]
    DepthExceeded(usize),
    #[error("invalid start: {0}")]
    BadStart(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl ExploreError {
    pub fn is_needs_expansion(&self) -> bool {
        matches!(self, ExploreError::Surface(SurfaceError::NeedsExpansion { .. }))
    }
}

/// A point of a surface. Cone points carry their id, and directions leaving
/// them are measured in the cone's own frame of total angle `2π(k + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocatedPoint {
    pub chart: ChartId,
    pub pos: Vec2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeId>,
}

impl LocatedPoint {
    pub fn regular(chart: ChartId, pos: Vec2) -> Self {
        LocatedPoint { chart, pos, cone: None }
    }

    /// The origin of the root chart.
    pub fn root() -> Self {
        Self::regular(ChartId::root(), Vec2::zero())
    }

    pub fn cone<S: SurfaceProvider + ?Sized>(surface: &S, id: &ConeId) -> Result<Self, ExploreError> {
        let c = surface.cone_point(id)?;
        let inc = c
            .incidences
            .first()
            .ok_or_else(|| ExploreError::BadStart(format!("cone {id} has no incidences")))?;
        Ok(LocatedPoint { chart: inc.chart.clone(), pos: inc.pos, cone: Some(id.clone()) })
    }

    pub fn is_cone(&self) -> bool {
        self.cone.is_some()
    }
}

/// An angular sector around a point, lying in one chart: frame angles
/// `[offset, offset + span)` correspond to chart directions `[start, start + span)`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Sheet {
    pub chart: ChartId,
    pub pos: Vec2,
    pub start: f64,
    pub span: f64,
    pub offset: f64,
}

impl Sheet {
    /// Frame angle of chart direction `local`, if it lies in this sheet.
    pub fn frame_of(&self, local: f64) -> Option<f64> {
        let a = normalize_angle(local, self.start);
        let rel = a - self.start;
        (rel <= self.span + 1e-12).then_some(self.offset + rel.min(self.span))
    }
}

pub(crate) fn sheets<S: SurfaceProvider + ?Sized>(surface: &S, p: &LocatedPoint) -> Result<Vec<Sheet>, ExploreError> {
    match &p.cone {
        None => Ok(vec![Sheet {
            chart: p.chart.clone(),
            pos: p.pos,
            start: 0.0,
            span: std::f64::consts::TAU,
            offset: 0.0,
        }]),
        Some(id) => Ok(surface
            .cone_point(id)?
            .incidences
            .into_iter()
            .map(|i| Sheet { chart: i.chart, pos: i.pos, start: i.start, span: i.span, offset: i.offset })
            .collect()),
    }
}

/// Total angle around `p`.
pub fn total_angle<S: SurfaceProvider + ?Sized>(surface: &S, p: &LocatedPoint) -> Result<f64, ExploreError> {
    Ok(match &p.cone {
        None => std::f64::consts::TAU,
        Some(id) => surface.cone_point(id)?.total_angle(),
    })
}

/// Position of a point in root coordinates, when the charts form a tree.
pub fn developed<S: SurfaceProvider + ?Sized>(surface: &S, p: &LocatedPoint) -> Option<Vec2> {
    surface.tree_offset(&p.chart).map(|o| o + p.pos)
}

fn check_positive(name: &str, v: f64) -> Result<(), ExploreError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ExploreError::InvalidParameter(format!("{name} must be finite and non-negative, got {v}")))
    }
}
