//! Frozen CSV schemas and minimal SVG line charts.

use quenched_core::numerics::linear_fit;
use quenched_core::SeriesReport;
use std::fmt::Write as _;

pub const SERIES_HEADER: &str = "k,term,partial_sum";
pub const ALPHA_HEADER: &str = "k,alpha,loglog_slope_window";

/// `k,term,partial_sum`, with `k` counted from the report's first index.
pub fn series_csv(report: &SeriesReport) -> String {
    let mut out = format!("{SERIES_HEADER}\n");
    for (i, (t, s)) in report.terms.iter().zip(&report.partial_sums).enumerate() {
        let _ = writeln!(out, "{},{t:e},{s:e}", report.first_index + i);
    }
    out
}

/// Slope of `ln α(j)` on `ln j` over `j ∈ [⌈k/2⌉, k]`, for each `k`. Empty
/// when fewer than two positive values are available.
pub fn window_slopes(alphas: &[f64]) -> Vec<Option<f64>> {
    (0..alphas.len())
        .map(|k| {
            let pts: Vec<(f64, f64)> = (k.div_ceil(2).max(1)..=k)
                .filter(|&j| alphas[j] > 0.0)
                .map(|j| ((j as f64).ln(), alphas[j].ln()))
                .collect();
            if pts.len() < 2 {
                None
            } else {
                linear_fit(&pts).map(|f| f.slope)
            }
        })
        .collect()
}

/// `k,alpha,loglog_slope_window` for `α(0), ..., α(kmax)`.
pub fn alpha_csv(alphas: &[f64]) -> String {
    let mut out = format!("{ALPHA_HEADER}\n");
    for (k, (a, s)) in alphas.iter().zip(window_slopes(alphas)).enumerate() {
        let slope = s.map(|v| format!("{v}")).unwrap_or_default();
        let _ = writeln!(out, "{k},{a:e},{slope}");
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A single polyline with axes and range labels. With `loglog` both axes
/// are logarithmic and non-positive points are dropped.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], loglog: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    const MAX_POINTS: usize = 2000;
    let stride = points.len().div_ceil(MAX_POINTS).max(1);
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!loglog || (*x > 0.0 && *y > 0.0)))
        .map(|&(x, y)| if loglog { (x.ln(), y.ln()) } else { (x, y) })
        .enumerate()
        .filter(|(i, _)| i % stride == 0)
        .map(|(_, p)| p)
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{M},{M} V{} H{}" stroke="black" fill="none"/>"#,
        H - M,
        W - M
    );
    let scale = if loglog { " (log)" } else { "" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}{scale}</text>"#,
        W / 2.0,
        H - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">{}{scale}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    if pts.len() >= 2 {
        let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
        let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
        let sx = if x1 > x0 { (W - 2.0 * M) / (x1 - x0) } else { 0.0 };
        let sy = if y1 > y0 { (H - 2.0 * M) / (y1 - y0) } else { 0.0 };
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", M + (x - x0) * sx, H - M - (y - y0) * sy))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#,
            coords.join(" ")
        );
        let unlog = |v: f64| if loglog { v.exp() } else { v };
        for (x, y, anchor, v) in [
            (M, H - M + 16.0, "start", unlog(x0)),
            (W - M, H - M + 16.0, "end", unlog(x1)),
            (M - 4.0, H - M, "end", unlog(y0)),
            (M - 4.0, M + 4.0, "end", unlog(y1)),
        ] {
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{v:.3e}</text>"#
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Partial sums against `k`.
pub fn series_svg(title: &str, report: &SeriesReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .partial_sums
        .iter()
        .enumerate()
        .map(|(i, &s)| ((report.first_index + i) as f64, s))
        .collect();
    svg_line_chart(title, "k", "partial sum", &pts, false)
}

/// `α(k)` against `k` on log-log axes, `k ≥ 1`.
pub fn alpha_svg(title: &str, alphas: &[f64]) -> String {
    let pts: Vec<(f64, f64)> = alphas.iter().enumerate().skip(1).map(|(k, &a)| (k as f64, a)).collect();
    svg_line_chart(title, "k", "alpha", &pts, true)
}
