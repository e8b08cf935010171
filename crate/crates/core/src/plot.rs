//! SVG box plots of cross-validation R² values.
//!
//! Boxes span the quartiles with a red median line, whiskers end at the
//! most extreme non-outlier values, outliers are red `+` marks and the mean
//! is a black dot. Values from −0.5 down to −8.5 are drawn in a compressed
//! band below the main axis, bounded by gray lines; anything lower is pinned
//! to the bottom of the band.

use std::fmt::Write;

use crate::evaluate::CvReport;

pub const MAIN_AXIS: (f64, f64) = (-0.5, 1.0);
pub const COMPRESSED_FLOOR: f64 = -8.5;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const MAIN_BOTTOM: f64 = 340.0;
const BAND_TOP: f64 = 352.0;
const BAND_BOTTOM: f64 = 400.0;
const BOX_HALF_WIDTH: f64 = 22.0;

/// Vertical pixel position of an R² value.
pub fn y_pixel(v: f64) -> f64 {
    let (lo, hi) = MAIN_AXIS;
    if v >= lo {
        TOP + (hi - v.min(hi)) / (hi - lo) * (MAIN_BOTTOM - TOP)
    } else {
        let depth = ((lo - v) / (lo - COMPRESSED_FLOOR)).min(1.0);
        BAND_TOP + depth * (BAND_BOTTOM - BAND_TOP)
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders one box per report, left to right in the given order.
pub fn render_box_plot(reports: &[CvReport]) -> String {
    let mut s = String::new();
    let n = reports.len().max(1) as f64;
    let slot = (WIDTH - LEFT - RIGHT) / n;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Cross-validation R²</text>"#, WIDTH / 2.0);

    // Axis, ticks and the compressed band.
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BAND_BOTTOM}" stroke="black"/>"#);
    for tick in [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = fmt_px(y_pixel(tick));
        let _ = writeln!(s, r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##, LEFT, WIDTH - RIGHT);
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{tick}</text>"#, LEFT - 6.0);
    }
    for y in [BAND_TOP - 4.0, BAND_BOTTOM + 4.0] {
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-width="1.5"/>"#, WIDTH - RIGHT);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle" fill="gray">{COMPRESSED_FLOOR}</text>"#,
        LEFT - 6.0,
        BAND_BOTTOM
    );

    for (i, report) in reports.iter().enumerate() {
        let b = &report.box_stats;
        let cx = LEFT + slot * (i as f64 + 0.5);
        let (x0, x1) = (fmt_px(cx - BOX_HALF_WIDTH), fmt_px(cx + BOX_HALF_WIDTH));
        let cxs = fmt_px(cx);
        let (yq1, yq3, ymed) = (y_pixel(b.q1), y_pixel(b.q3), fmt_px(y_pixel(b.median)));
        let (ylo, yhi) = (fmt_px(y_pixel(b.whisker_low)), fmt_px(y_pixel(b.whisker_high)));
        let _ = writeln!(s, r#"<g class="group" data-label="{}">"#, report.config.label());
        let _ = writeln!(s, r#"<line x1="{cxs}" y1="{}" x2="{cxs}" y2="{yhi}" stroke="black" stroke-dasharray="4 2"/>"#, fmt_px(yq3));
        let _ = writeln!(s, r#"<line x1="{cxs}" y1="{}" x2="{cxs}" y2="{ylo}" stroke="black" stroke-dasharray="4 2"/>"#, fmt_px(yq1));
        for y in [&ylo, &yhi] {
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
                fmt_px(cx - BOX_HALF_WIDTH / 2.0),
                fmt_px(cx + BOX_HALF_WIDTH / 2.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{}" width="{}" height="{}" fill="none" stroke="blue"/>"#,
            fmt_px(yq3),
            fmt_px(2.0 * BOX_HALF_WIDTH),
            fmt_px((yq1 - yq3).max(0.5))
        );
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{ymed}" x2="{x1}" y2="{ymed}" stroke="red" stroke-width="2"/>"#);
        for &o in &b.outliers {
            let y = y_pixel(o);
            let _ = writeln!(
                s,
                r#"<path class="outlier" d="M{} {}h8M{} {}v8" stroke="red"/>"#,
                fmt_px(cx - 4.0),
                fmt_px(y),
                fmt_px(cx),
                fmt_px(y - 4.0)
            );
        }
        let _ = writeln!(s, r#"<circle class="mean" cx="{cxs}" cy="{}" r="3" fill="black"/>"#, fmt_px(y_pixel(b.mean)));
        let _ = writeln!(s, r#"<text x="{cxs}" y="{}" text-anchor="middle">{}</text>"#, BAND_BOTTOM + 24.0, report.config.scenario);
        let _ = writeln!(s, r#"<text x="{cxs}" y="{}" text-anchor="middle" fill="gray">{}</text>"#, BAND_BOTTOM + 40.0, report.config.subset);
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}
