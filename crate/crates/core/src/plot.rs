//! Static SVG ribbon plots of aggregated metric curves.
//!
//! One bold median polyline per strategy with nested shaded bands around
//! it, widest band drawn first so the stacking darkens toward the median.
//! Output is a pure function of the aggregate, so re-rendering the same
//! result is byte-identical.

use std::io::Write;

use crate::bench::{AggregateResult, BandRow};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 66.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Curves longer than this are thinned for rendering.
const MAX_POINTS: usize = 600;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

struct Frame {
    k_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, k: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + k / self.k_max.max(1.0) * w
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let span = (self.y_max - self.y_min).max(1e-9);
        MARGIN_TOP + (self.y_max - v) / span * h
    }
}

fn thin(rows: &[BandRow]) -> Vec<&BandRow> {
    if rows.len() <= MAX_POINTS {
        return rows.iter().collect();
    }
    let stride = rows.len().div_ceil(MAX_POINTS);
    let mut out: Vec<&BandRow> = rows.iter().step_by(stride).collect();
    if let Some(last) = rows.last() {
        if out.last().map(|r| r.k) != Some(last.k) {
            out.push(last);
        }
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the aggregate as an SVG ribbon plot.
pub fn write_svg(
    result: &AggregateResult,
    title: &str,
    w: &mut impl Write,
) -> std::io::Result<()> {
    let mut k_max = 1.0f64;
    let mut y_min = 0.0f64;
    let mut y_max = 0.0f64;
    for s in &result.strategies {
        for row in &s.rows {
            k_max = k_max.max(row.k as f64);
            let (lo, hi) = row.bands[4];
            y_min = y_min.min(lo.min(row.median));
            y_max = y_max.max(hi.max(row.median));
        }
    }
    let frame = Frame { k_max, y_min: y_min.floor() - 0.25, y_max: y_max.ceil() + 0.25 };

    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif">"#
    )?;
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        fmt((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        xml_escape(title)
    )?;

    // axes and grid
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    for tick in 0..=4 {
        let k = frame.k_max * tick as f64 / 4.0;
        let x = frame.x(k);
        writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#e0e0e0" stroke-width="1"/>"##
        )?;
        writeln!(
            w,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            k.round() as i64
        )?;
    }
    let y_span = frame.y_max - frame.y_min;
    let y_step = (y_span / 6.0).max(0.5).ceil();
    let mut yv = frame.y_max.floor();
    while yv >= frame.y_min {
        let y = frame.y(yv);
        writeln!(
            w,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#e0e0e0" stroke-width="1"/>"##
        )?;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{yv}</text>"#,
            x0 - 8.0,
            y + 4.0
        )?;
        yv -= y_step;
    }
    writeln!(
        w,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black" stroke-width="1"/>"#
    )?;
    writeln!(
        w,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black" stroke-width="1"/>"#
    )?;
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">iteration k</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    )?;
    writeln!(
        w,
        r#"<text x="18" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.2})">log10 max proximity ratio</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )?;

    for (si, s) in result.strategies.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let rows = thin(&s.rows);
        // widest band first, one translucent layer per band
        for bi in (0..5).rev() {
            let mut d = String::from("M");
            for row in &rows {
                d.push_str(&format!(" {},{}", fmt(frame.x(row.k as f64)), fmt(frame.y(row.bands[bi].1))));
            }
            for row in rows.iter().rev() {
                d.push_str(&format!(" {},{}", fmt(frame.x(row.k as f64)), fmt(frame.y(row.bands[bi].0))));
            }
            d.push_str(" Z");
            writeln!(
                w,
                r#"<path d="{d}" fill="{color}" fill-opacity="0.10" stroke="none"/>"#
            )?;
        }
        let pts: Vec<String> = rows
            .iter()
            .map(|row| format!("{},{}", fmt(frame.x(row.k as f64)), fmt(frame.y(row.median))))
            .collect();
        writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2.4" class="median"/>"#,
            pts.join(" ")
        )?;
    }

    // legend
    let lx = x1 + 14.0;
    for (si, s) in result.strategies.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let ly = MARGIN_TOP + 10.0 + 20.0 * si as f64;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2.4"/>"#,
            lx + 22.0
        )?;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(&s.label)
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
