//! Markdown threshold tables and an SVG chart of validation CCC against
//! annotation delay, both rendered from sweep rows.

use std::fmt::Write as _;

use crate::selection::{Protocol, SweepRow};

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

/// One markdown table per protocol present in `rows`.
pub fn markdown_tables(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for (protocol, title) in [
        (Protocol::Before, "MI selection before delay compensation"),
        (Protocol::After, "MI selection after delay compensation"),
        (Protocol::During, "MI selection at every delay"),
        (Protocol::None, "No MI selection"),
    ] {
        let picked: Vec<&SweepRow> = rows.iter().filter(|r| r.protocol == protocol).collect();
        if picked.is_empty() {
            continue;
        }
        let _ = writeln!(out, "## {title}\n");
        let _ = writeln!(out, "| MI threshold | D_s (s) | features | val SSE | val CCC |");
        let _ = writeln!(out, "|---|---|---|---|---|");
        for r in picked {
            let _ = writeln!(
                out,
                "| {} | {:.1} | {} | {} | {} |",
                r.threshold.map_or_else(|| "none".into(), |t| t.to_string()),
                r.shift_s,
                r.n_features,
                metric(r.val_sse),
                metric(r.val_ccc)
            );
        }
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// Line chart of validation CCC against D_s for each (protocol, threshold)
/// series with more than one delay. Failed cells break the line.
pub fn ccc_svg(rows: &[SweepRow]) -> String {
    let mut series: Vec<(String, Vec<(f64, Option<f64>)>)> = Vec::new();
    for r in rows {
        let label = match r.threshold {
            Some(t) => format!("{} (MI {t})", r.protocol),
            None => r.protocol.to_string(),
        };
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((r.shift_s, r.val_ccc)),
            None => series.push((label, vec![(r.shift_s, r.val_ccc)])),
        }
    }
    series.retain(|(_, pts)| {
        let first = pts[0].0;
        pts.iter().any(|p| p.0 != first)
    });

    let xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().filter_map(|q| q.1)).collect();
    let (x0, x1) = bounds(&xs, 0.0, 4.4);
    let (y0, y1) = bounds(&ys, 0.0, 1.0);
    let (y0, y1) = (y0.min(0.0), y1.max(y0 + 0.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let x = x0 + (x1 - x0) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.1}</text>"#,
            px(x),
            bottom + 18.0
        );
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#,
            left - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">D_s (s)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">validation CCC</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in pts {
            match y {
                Some(y) => {
                    let _ = write!(d, "{}{:.1} {:.1} ", if pen_down { "L" } else { "M" }, px(x), py(y));
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        if !d.is_empty() {
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                d.trim_end()
            );
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{label}</text>"#,
            right - 150.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    if values.is_empty() {
        return (lo, hi);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        (min, max)
    } else {
        (min - 0.5, max + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(protocol: Protocol, threshold: Option<f64>, shift_s: f64, ccc: Option<f64>) -> SweepRow {
        SweepRow {
            protocol,
            threshold,
            shift_s,
            n_features: 3,
            val_sse: ccc.map(|c| 1.0 - c),
            val_ccc: ccc,
        }
    }

    #[test]
    fn tables_per_protocol() {
        let rows = vec![
            row(Protocol::Before, None, 0.0, Some(0.2)),
            row(Protocol::Before, Some(0.1), 0.0, None),
        ];
        let md = markdown_tables(&rows);
        assert!(md.contains("| none | 0.0 | 3 | 0.800 | 0.200 |"));
        assert!(md.contains("| 0.1 | 0.0 | 3 | n/a | n/a |"));
        assert!(!md.contains("No MI selection"));
    }

    #[test]
    fn chart_breaks_at_failed_cells() {
        let rows = vec![
            row(Protocol::During, Some(0.1), 0.0, Some(0.1)),
            row(Protocol::During, Some(0.1), 0.2, None),
            row(Protocol::During, Some(0.1), 0.4, Some(0.6)),
            row(Protocol::Before, Some(0.1), 0.0, Some(0.3)),
        ];
        let svg = ccc_svg(&rows);
        assert!(svg.starts_with("<svg"));
        let series = svg.lines().find(|l| l.contains("stroke=\"#1f77b4\"")).unwrap();
        assert_eq!(series.matches('M').count(), 2);
        assert!(!series.contains('L'));
        assert!(svg.contains("during (MI 0.1)"));
        assert!(!svg.contains(">before"));
    }
}
