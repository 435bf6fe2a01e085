//! Minimal static SVG charts: axes, polylines, markers, bars and bands.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#8d6a9f", "#3d405b"];

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || target == 0 {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|k| k * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// One chart with fixed data ranges.
pub struct Chart {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
    legend: Vec<(String, String)>,
    title: String,
    xlabel: String,
    ylabel: String,
}

impl Chart {
    pub fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Chart {
            x: widen(x),
            y: widen(y),
            body: String::new(),
            legend: Vec::new(),
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    pub fn legend(&mut self, label: &str, color: &str) {
        self.legend.push((label.into(), color.into()));
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="5,4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#,
            coords.join(" ")
        );
    }

    pub fn markers(&mut self, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}" fill-opacity="0.8"/>"#,
                self.px(x),
                self.py(y)
            );
        }
    }

    /// Filled rectangle between data coordinates, clipped to the ranges.
    pub fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, color: &str, opacity: f64) {
        let cx = |x: f64| self.px(x.clamp(self.x.0, self.x.1));
        let cy = |y: f64| self.py(y.clamp(self.y.0, self.y.1));
        let (l, r) = (cx(x0), cx(x1));
        let (t, b) = (cy(y1), cy(y0));
        if r - l <= 0.0 || b - t <= 0.0 {
            return;
        }
        let _ = writeln!(
            self.body,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="{opacity}"/>"#,
            r - l,
            b - t
        );
    }

    pub fn hline(&mut self, y: f64, color: &str) {
        let pts = [(self.x.0, y), (self.x.1, y)];
        self.polyline(&pts, color, true);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(&self.title));
        let (x0, x1, y0, y1) = (self.px(self.x.0), self.px(self.x.1), self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(s, r##"<g stroke="#444" stroke-width="1">"##);
        let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
        let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
        let xt = ticks(self.x.0, self.x.1, 8);
        let yt = ticks(self.y.0, self.y.1, 6);
        for &t in &xt {
            let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{y0:.2}" x2="{0:.2}" y2="{1:.2}"/>"#, self.px(t), y0 + 5.0);
        }
        for &t in &yt {
            let _ = writeln!(s, r#"<line x1="{1:.2}" y1="{0:.2}" x2="{x0:.2}" y2="{0:.2}"/>"#, self.py(t), x0 - 5.0);
        }
        let _ = writeln!(s, "</g>");
        for &t in &xt {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, self.px(t), y0 + 19.0, fmt_tick(t));
        }
        for &t in &yt {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, self.py(t) + 4.0, fmt_tick(t));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 14.0, esc(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
            (y0 + y1) / 2.0,
            esc(&self.ylabel)
        );
        s.push_str(&self.body);
        for (k, (label, color)) in self.legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * k as f64;
            let lx = W - RIGHT + 14.0;
            let _ = writeln!(s, r#"<rect x="{lx}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, y - 10.0);
            let _ = writeln!(s, r#"<text x="{}" y="{y:.2}">{}</text>"#, lx + 18.0, esc(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = ticks(0.0, 1.0, 5);
        assert_eq!(t.len(), 6);
        assert!((t[5] - 1.0).abs() < 1e-12);
        let t = ticks(-4.0, 4.0, 8);
        assert_eq!(t.first(), Some(&-4.0));
        assert_eq!(t.last(), Some(&4.0));
    }

    #[test]
    fn escapes_text() {
        let c = Chart::new("a<b & c", "x", "y", (0.0, 1.0), (0.0, 1.0));
        let svg = c.render();
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
