//! SVG rendering of 2-D models.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Model;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;
const MAX_OPACITY: f64 = 0.8;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Draws every box of a 2-D model inside the unit-square frame. Coordinates
/// are mapped through the measure's CDF, so an exponential model is shown in
/// probability space. Fill opacity is proportional to the concept's marginal.
pub fn render_svg(model: &Model) -> Result<String> {
    if model.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: model.dim() });
    }
    let m = model.measure();
    let (_, upper) = m.support();
    let to_unit = |t: f64, d: usize| m.cdf(t.min(upper), d);
    let marg: Vec<f64> = (0..model.len()).map(|i| model.marginal(i)).collect();
    let pmax = marg.iter().copied().fold(0.0, f64::max);
    let full = SIZE + 2.0 * MARGIN;
    let px = |u: f64| MARGIN + u * SIZE;
    let py = |u: f64| MARGIN + (1.0 - u) * SIZE;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#)
        .unwrap();
    for id in 0..model.len() {
        let b = model.box_at(id);
        let x0 = to_unit(b.min()[0], 0)?;
        let x1 = to_unit(b.max_at(0), 0)?;
        let y0 = to_unit(b.min()[1], 1)?;
        let y1 = to_unit(b.max_at(1), 1)?;
        let opacity = if pmax > 0.0 { MAX_OPACITY * marg[id] / pmax } else { 0.0 };
        let color = PALETTE[id % PALETTE.len()];
        let name = escape(model.vocab().name(id));
        writeln!(
            s,
            r#"<g><title>{name}</title><rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{color}" fill-opacity="{opacity:.4}" stroke="{color}"/><text x="{:.3}" y="{:.3}">{name}</text></g>"#,
            px(x0),
            py(y1),
            (x1 - x0) * SIZE,
            (y1 - y0) * SIZE,
            px(x0) + 2.0,
            py(y1) + 12.0,
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}
