//! Minimal grouped bar charts with error bars, written as SVG text.

use std::fmt::Write;

/// Bar height with its 95% interval.
#[derive(Debug, Clone, Copy)]
pub struct Bar {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub bars: Vec<Bar>,
}

pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub groups: Vec<String>,
    pub series: Vec<Series>,
    pub y_max: f64,
}

pub const PALETTE: [&str; 6] = ["#1b6ca8", "#8fc1e3", "#c0392b", "#f1a9a0", "#4d4d4d", "#bdbdbd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl BarChart {
    pub fn render(&self) -> String {
        let (w, h) = (760.0, 420.0);
        let (left, right, top, bottom) = (64.0, 180.0, 40.0, 60.0);
        let plot_w = w - left - right;
        let plot_h = h - top - bottom;
        let y = |v: f64| top + plot_h * (1.0 - (v / self.y_max).clamp(0.0, 1.0));
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            left + plot_w / 2.0,
            escape(&self.title)
        );
        for i in 0..=5 {
            let v = self.y_max * i as f64 / 5.0;
            let yy = y(v);
            let _ = writeln!(
                s,
                "<line x1=\"{left:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#e0e0e0\"/>",
                left + plot_w
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                left - 6.0,
                yy + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            top + plot_h / 2.0,
            escape(&self.y_label)
        );
        let n_groups = self.groups.len().max(1) as f64;
        let group_w = plot_w / n_groups;
        let n_series = self.series.len().max(1) as f64;
        let bar_w = group_w * 0.8 / n_series;
        for (g, label) in self.groups.iter().enumerate() {
            let gx = left + group_w * g as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                gx + group_w / 2.0,
                top + plot_h + 18.0,
                escape(label)
            );
            for (k, series) in self.series.iter().enumerate() {
                let Some(b) = series.bars.get(g) else { continue };
                let x = gx + group_w * 0.1 + bar_w * k as f64;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                    y(b.value),
                    bar_w * 0.9,
                    y(0.0) - y(b.value),
                    series.color
                );
                let cx = x + bar_w * 0.45;
                let _ = writeln!(
                    s,
                    r#"<path d="M{:.1} {:.1}H{:.1}M{cx:.1} {:.1}V{:.1}M{:.1} {:.1}H{:.1}" stroke="black" fill="none"/>"#,
                    cx - 3.0,
                    y(b.high),
                    cx + 3.0,
                    y(b.high),
                    y(b.low),
                    cx - 3.0,
                    y(b.low),
                    cx + 3.0
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            y(0.0),
            left + plot_w,
            y(0.0)
        );
        for (k, series) in self.series.iter().enumerate() {
            let ly = top + 10.0 + 20.0 * k as f64;
            let lx = w - right + 16.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{}"/>"#,
                ly - 10.0,
                series.color
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 18.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }
}
