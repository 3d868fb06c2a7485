//! Reliability diagram as a standalone SVG document.
//!
//! Top panel: per-bin accuracy bars against the identity diagonal, with the
//! gap to average confidence outlined. Bottom panel: sample-count histogram.

use std::fmt::Write;

use crate::ReliabilityReport;

const MARGIN: f64 = 50.0;
const PLOT: f64 = 400.0;
const HIST: f64 = 100.0;
const GAP: f64 = 40.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn reliability_svg(report: &ReliabilityReport, ece: f64, title: &str) -> String {
    let width = MARGIN * 2.0 + PLOT;
    let height = MARGIN * 2.0 + PLOT + GAP + HIST;
    let x = |v: f64| MARGIN + v * PLOT;
    let y = |v: f64| MARGIN + (1.0 - v) * PLOT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, esc(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        MARGIN / 2.0,
        esc(title)
    );

    let _ = writeln!(s, r#"<g class="reliability">"#);
    for bin in report.nonempty_bins() {
        let (Some(acc), Some(conf)) = (bin.accuracy, bin.avg_confidence) else {
            continue;
        };
        let (x0, w) = (x(bin.lower), (bin.upper - bin.lower) * PLOT);
        let _ = writeln!(
            s,
            r##"<rect class="acc-bar" x="{x0:.3}" y="{:.3}" width="{w:.3}" height="{:.3}" fill="#1f77b4" stroke="#0b3c5d"/>"##,
            y(acc),
            acc * PLOT
        );
        let (top, bottom) = (acc.max(conf), acc.min(conf));
        let _ = writeln!(
            s,
            r##"<path class="gap" d="M{x0:.3},{:.3} h{w:.3} v{:.3} h{:.3} Z" fill="#d62728" fill-opacity="0.3" stroke="#d62728"/>"##,
            y(top),
            (top - bottom) * PLOT,
            -w
        );
    }
    let _ = writeln!(
        s,
        r##"<line class="diagonal" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#555" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let _ = writeln!(
        s,
        r##"<path class="axes" d="M{:.3},{:.3} V{:.3} H{:.3}" fill="none" stroke="#000"/>"##,
        x(0.0),
        y(1.0),
        y(0.0),
        x(1.0)
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{v:.1}</text>"#, x(v), y(0.0) + 15.0);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{v:.1}</text>"#, x(0.0) - 5.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">Confidence</text>"#, x(0.5), y(0.0) + 32.0);
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" transform="rotate(-90 {:.3} {:.3})">Accuracy</text>"#,
        MARGIN - 35.0,
        y(0.5),
        MARGIN - 35.0,
        y(0.5)
    );
    let _ = writeln!(
        s,
        r#"<text class="ece" x="{:.3}" y="{:.3}">ECE = {:.2}%</text>"#,
        x(0.05),
        y(0.92),
        ece * 100.0
    );
    let _ = writeln!(s, "</g>");

    let top = MARGIN + PLOT + GAP;
    let max_count = report.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let _ = writeln!(s, r#"<g class="histogram">"#);
    for bin in report.nonempty_bins() {
        let h = bin.count as f64 / max_count * HIST;
        let _ = writeln!(
            s,
            r##"<rect class="count-bar" x="{:.3}" y="{:.3}" width="{:.3}" height="{h:.3}" fill="#7f7f7f"><title>{}</title></rect>"##,
            x(bin.lower),
            top + HIST - h,
            (bin.upper - bin.lower) * PLOT,
            bin.count
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#000"/>"##,
        x(0.0),
        top + HIST,
        x(1.0),
        top + HIST
    );
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">n</text>"#, x(0.0) - 5.0, top + HIST / 2.0);
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ece, reliability};

    #[test]
    fn one_bar_per_nonempty_bin() {
        let r = reliability(&[(0.6, true), (0.8, false), (0.9, true), (0.3, false)], 10).unwrap();
        let svg = reliability_svg(&r, ece(&r).unwrap(), "a < b");
        assert_eq!(svg.matches(r#"class="acc-bar""#).count(), 4);
        assert_eq!(svg.matches(r#"class="count-bar""#).count(), 4);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
