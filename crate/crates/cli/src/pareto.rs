//! Pareto table (CSV) and a static bar-plus-cumulative-line chart (SVG).

use std::fmt::Write as _;
use std::path::Path;

use dagsobol_core::sobol::{pareto_data, ParetoEntry, SobolReport};

pub fn csv(entries: &[ParetoEntry]) -> String {
    let mut s = String::from("rank,input,first_order,cumulative\n");
    for (i, e) in entries.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, e.name, e.first_order, e.cumulative);
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bars are first-order indices as a share of their sum, the line their running total.
pub fn svg(entries: &[ParetoEntry], title: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 70.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let n = entries.len().max(1) as f64;
    let slot = plot_w / n;
    let sum: f64 = entries.iter().map(|e| e.first_order.max(0.0)).sum();
    let y_of = |share: f64| top + plot_h * (1.0 - share.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    for k in 0..=5 {
        let share = k as f64 / 5.0;
        let y = y_of(share);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}%</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            share * 100.0
        );
    }
    let mut line = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let share = if sum > 0.0 { e.first_order.max(0.0) / sum } else { 0.0 };
        let x = left + slot * i as f64;
        let y = y_of(share);
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#4a78b5"><title>{}: {:.4}</title></rect>"##,
            x + slot * 0.15,
            slot * 0.7,
            top + plot_h - y,
            escape(&e.name),
            e.first_order
        );
        let cx = x + slot / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-45 {cx:.1} {:.1})">{}</text>"#,
            top + plot_h + 14.0,
            top + plot_h + 14.0,
            escape(&e.name)
        );
        line.push(format!("{cx:.1},{:.1}", y_of(e.cumulative)));
    }
    if !line.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#d0542c" stroke-width="2"/>"##,
            line.join(" ")
        );
        for p in &line {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r##"<circle cx="{x}" cy="{y}" r="3" fill="#d0542c"/>"##);
        }
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/><line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    s.push_str("</svg>\n");
    s
}

pub fn write(path: &Path, report: &SobolReport, title: &str) -> std::io::Result<()> {
    let entries = pareto_data(report);
    let is_svg = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let body = if is_svg { svg(&entries, title) } else { csv(&entries) };
    std::fs::write(path, body)
}
