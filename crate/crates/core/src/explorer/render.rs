use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::atlas::{Bound, VisibleAtlas};
use crate::Vec2;

/// Angular resolution of the polylines standing in for arcs and line bounds.
pub const ARC_STEP: f64 = 0.5 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Stroke width as a fraction of the atlas radius.
    pub stroke_scale: f64,
    pub color_by_depth: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { stroke_scale: 0.004, color_by_depth: true }
    }
}

fn depth_color(depth: usize) -> String {
    // golden-angle hue walk keeps neighbouring depths apart
    let hue = (depth as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},65%,{}%)", if depth == 0 { 80 } else { 60 })
}

/// SVG of the atlas cells developed around `origin`, the viewpoint's position
/// in root coordinates. Display only: the outline is a polyline.
pub fn render_svg(atlas: &VisibleAtlas, origin: Vec2, opts: &RenderOptions) -> String {
    let r = atlas.radius.max(1e-9);
    let pad = 0.05 * r;
    let (x0, y0, w) = (origin.re - r - pad, -(origin.im + r + pad), 2.0 * (r + pad));
    let stroke = opts.stroke_scale * r;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {w:.6} {w:.6}" width="800" height="800">"#
    );
    let _ = writeln!(
        out,
        r#"<title>visible atlas, radius {}, {} cells, area {:.9}</title>"#,
        atlas.radius,
        atlas.cells.len(),
        atlas.total_area
    );
    let _ = writeln!(out, r#"<g transform="scale(1,-1)" stroke="black" stroke-width="{stroke:.6}" stroke-linejoin="round">"#);
    for cell in &atlas.cells {
        let steps = ((cell.hi - cell.lo) / ARC_STEP).ceil().max(1.0) as usize;
        let at = |k: usize| cell.lo + (cell.hi - cell.lo) * k as f64 / steps as f64;
        let mut pts: Vec<Vec2> = Vec::with_capacity(2 * steps + 2);
        for k in 0..=steps {
            let th = at(k);
            pts.push(Vec2::polar(th - cell.shift) * cell.outer.radius(th));
        }
        if matches!(cell.inner, Bound::Origin) {
            pts.push(Vec2::zero());
        } else {
            for k in (0..=steps).rev() {
                let th = at(k);
                pts.push(Vec2::polar(th - cell.shift) * cell.inner.radius(th));
            }
        }
        let fill = if opts.color_by_depth { depth_color(cell.depth) } else { "#cfd8e3".into() };
        let _ = write!(out, r#"<polygon fill="{fill}" fill-opacity="0.7" data-chart="{}" points=""#, cell.chart);
        for (i, p) in pts.iter().enumerate() {
            let q = origin + *p;
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(out, "{sep}{:.6},{:.6}", q.re, q.im);
        }
        let _ = writeln!(out, r#""/>"#);
    }
    let _ = writeln!(out, r#"<circle cx="{:.6}" cy="{:.6}" r="{:.6}" fill="red" stroke="none"/>"#, origin.re, origin.im, 3.0 * stroke);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
