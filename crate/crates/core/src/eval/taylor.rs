//! Taylor-diagram geometry and SVG rendering.
//!
//! Points sit at radius `sd` and azimuth `acos(|r|)` from the positive
//! x-axis; the sign of `r` is carried as a text marker. The reference
//! (observed) series sits at `(sd_ref, 0)`.

use std::fmt::Write;

use super::metrics::{pearson, sample_sd};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPoint {
    pub label: String,
    pub sd: f64,
    pub r: f64,
    /// `sqrt(sd_ref^2 + sd^2 - 2 sd_ref sd r)` with the signed correlation.
    pub centered_rmse: f64,
    pub negative: bool,
}

impl TaylorPoint {
    pub fn from_stats(label: impl Into<String>, sd_ref: f64, sd: f64, r: f64) -> Self {
        Self {
            label: label.into(),
            sd,
            r,
            centered_rmse: law_of_cosines(sd_ref, sd, r),
            negative: r < 0.0,
        }
    }

    /// Cartesian position in data units.
    pub fn position(&self) -> (f64, f64) {
        let theta = self.r.abs().min(1.0).acos();
        (self.sd * theta.cos(), self.sd * theta.sin())
    }

    /// Distance from the reference marker as drawn (uses `|r|`).
    pub fn plotted_distance(&self, sd_ref: f64) -> f64 {
        law_of_cosines(sd_ref, self.sd, self.r.abs())
    }
}

pub fn law_of_cosines(sd_ref: f64, sd: f64, r: f64) -> f64 {
    (sd_ref * sd_ref + sd * sd - 2.0 * sd_ref * sd * r).max(0.0).sqrt()
}

/// Point for predictions `yhat` against observations `y`.
pub fn taylor_point(label: impl Into<String>, y: &[f64], yhat: &[f64]) -> Result<TaylorPoint> {
    let r = pearson(y, yhat)?;
    let sd = sample_sd(yhat)?;
    let sd_ref = sample_sd(y)?;
    Ok(TaylorPoint::from_stats(label, sd_ref, sd, r))
}

const SIZE: f64 = 520.0;
const MARGIN: f64 = 70.0;
const RADIUS: f64 = 380.0;
const CORRELATION_TICKS: [f64; 9] = [0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 1.0];
const PALETTE: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_ceiling(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    for step in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0] {
        if step * mag >= x {
            return step * mag;
        }
    }
    10.0 * mag
}

/// Maps data coordinates to SVG pixels.
pub struct Frame {
    pub max_sd: f64,
}

impl Frame {
    pub fn new(sd_ref: f64, points: &[TaylorPoint]) -> Self {
        let max_point = points.iter().map(|p| p.sd).fold(sd_ref, f64::max);
        Self {
            max_sd: nice_ceiling(1.2 * max_point),
        }
    }

    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let scale = RADIUS / self.max_sd;
        (MARGIN + x * scale, MARGIN + RADIUS - y * scale)
    }
}

/// Quarter-circle Taylor diagram. Output bytes depend only on the inputs.
pub fn render_taylor(points: &[TaylorPoint], sd_ref: f64, title: &str) -> Result<String> {
    if !(sd_ref > 0.0) || !sd_ref.is_finite() {
        return Err(Error::InvalidInput(format!("reference SD must be positive, got {sd_ref}")));
    }
    let frame = Frame::new(sd_ref, points);
    let (ox, oy) = frame.to_px(0.0, 0.0);
    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE:.0}" height="{SIZE:.0}" viewBox="0 0 {SIZE:.0} {SIZE:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, "<title>{}</title>", esc(title));
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.4}" y="24.0000" text-anchor="middle" font-size="14">{}</text>"#,
        SIZE / 2.0,
        esc(title)
    );

    // axes and outer arc
    let (ax, _) = frame.to_px(frame.max_sd, 0.0);
    let (_, ay) = frame.to_px(0.0, frame.max_sd);
    let _ = writeln!(
        w,
        r#"<path d="M {ox:.4} {ay:.4} L {ox:.4} {oy:.4} L {ax:.4} {oy:.4}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        w,
        r#"<path d="M {ax:.4} {oy:.4} A {RADIUS:.4} {RADIUS:.4} 0 0 0 {ox:.4} {ay:.4}" fill="none" stroke="black"/>"#
    );

    // standard-deviation arcs
    for k in 1..=4 {
        let s = frame.max_sd * f64::from(k) / 4.0;
        let (x1, _) = frame.to_px(s, 0.0);
        let (_, y1) = frame.to_px(0.0, s);
        let rad = RADIUS * f64::from(k) / 4.0;
        let _ = writeln!(
            w,
            r##"<path d="M {x1:.4} {oy:.4} A {rad:.4} {rad:.4} 0 0 0 {ox:.4} {y1:.4}" fill="none" stroke="#cccccc" stroke-dasharray="3,3"/>"##
        );
        let _ = writeln!(
            w,
            r#"<text x="{x1:.4}" y="{:.4}" text-anchor="middle">{s:.4}</text>"#,
            oy + 16.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.4}" y="{:.4}" text-anchor="middle">Standard deviation</text>"#,
        ox + RADIUS / 2.0,
        oy + 34.0
    );

    // correlation rays
    for r in CORRELATION_TICKS {
        let theta = f64::acos(r);
        let (x1, y1) = frame.to_px(frame.max_sd * theta.cos(), frame.max_sd * theta.sin());
        let (tx, ty) = frame.to_px(
            1.04 * frame.max_sd * theta.cos(),
            1.04 * frame.max_sd * theta.sin(),
        );
        let _ = writeln!(
            w,
            r##"<line x1="{ox:.4}" y1="{oy:.4}" x2="{x1:.4}" y2="{y1:.4}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(w, r#"<text x="{tx:.4}" y="{ty:.4}">{r:.2}</text>"#);
    }
    let (cx, cy) = frame.to_px(
        1.12 * frame.max_sd * std::f64::consts::FRAC_PI_4.cos(),
        1.12 * frame.max_sd * std::f64::consts::FRAC_PI_4.sin(),
    );
    let _ = writeln!(
        w,
        r#"<text x="{cx:.4}" y="{cy:.4}" text-anchor="middle" transform="rotate(45 {cx:.4} {cy:.4})">Correlation |r|</text>"#
    );

    // reference marker
    let (rx, ry) = frame.to_px(sd_ref, 0.0);
    let _ = writeln!(
        w,
        r#"<circle class="reference" cx="{rx:.4}" cy="{ry:.4}" r="5.0000" fill="black"/>"#
    );
    let _ = writeln!(w, r#"<text x="{rx:.4}" y="{:.4}" text-anchor="middle">ref</text>"#, ry - 9.0);

    for (i, p) in points.iter().enumerate() {
        let (dx, dy) = p.position();
        let (px, py) = frame.to_px(dx, dy);
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            w,
            r#"<circle class="point" cx="{px:.4}" cy="{py:.4}" r="4.0000" fill="{color}"><title>{} sd={:.4} r={:.4} crmse={:.4}</title></circle>"#,
            esc(&p.label),
            p.sd,
            p.r,
            p.centered_rmse
        );
        if p.negative {
            let _ = writeln!(
                w,
                r#"<text class="negative" x="{:.4}" y="{:.4}" font-size="14">&#8722;</text>"#,
                px + 5.0,
                py - 5.0
            );
        }
        let _ = writeln!(
            w,
            r#"<text x="{:.4}" y="{:.4}" font-size="9" fill="{color}">{}</text>"#,
            px + 6.0,
            py + 10.0,
            esc(&p.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}
