//! Hand-written SVG for gain curves on a logarithmic frequency axis.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

pub struct LogPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series<'a>>,
    /// Horizontal reference lines `(y, label)`.
    pub levels: Vec<(f64, String)>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LogPlot<'_> {
    fn x(&self, v: f64) -> f64 {
        let (a, b) = (self.x_range.0.log10(), self.x_range.1.log10());
        LEFT + (v.log10() - a) / (b - a) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let (a, b) = self.y_range;
        H - BOTTOM - (v - a) / (b - a) * (H - TOP - BOTTOM)
    }

    /// Splits a curve at non-finite or out-of-range points so poles do not
    /// draw vertical spikes.
    fn segments(&self, pts: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
        let mut out = vec![Vec::new()];
        for &(x, y) in pts {
            let visible = x.is_finite() && y.is_finite() && y >= self.y_range.0 && y <= self.y_range.1;
            if visible {
                out.last_mut().unwrap().push((self.x(x), self.y(y)));
            } else if !out.last().unwrap().is_empty() {
                out.push(Vec::new());
            }
        }
        out.retain(|s| s.len() > 1);
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(self.title)
        );

        // decade grid with 1..9 minor lines
        let (d0, d1) = (
            self.x_range.0.log10().floor() as i32,
            self.x_range.1.log10().ceil() as i32,
        );
        for d in d0..=d1 {
            for m in 1..10 {
                let v = m as f64 * 10f64.powi(d);
                if v < self.x_range.0 * (1.0 - 1e-12) || v > self.x_range.1 * (1.0 + 1e-12) {
                    continue;
                }
                let x = self.x(v);
                let major = m == 1;
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-width="1"/>"##,
                    TOP + ph,
                    if major { "#bbbbbb" } else { "#eeeeee" }
                );
                if major || m == 2 || m == 5 {
                    let _ = writeln!(
                        s,
                        r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
                        TOP + ph + 16.0
                    );
                }
            }
        }
        let (y0, y1) = self.y_range;
        let step = nice_step((y1 - y0) / 6.0);
        let mut v = (y0 / step).ceil() * step;
        while v <= y1 + 1e-9 * step {
            let y = self.y(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eeeeee" stroke-width="1"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                trim(v)
            );
            v += step;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 18.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(self.y_label)
        );

        for (level, label) in &self.levels {
            if *level < y0 || *level > y1 {
                continue;
            }
            let y = self.y(*level);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                LEFT + pw + 6.0,
                y + 4.0,
                escape(label)
            );
        }

        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            for seg in self.segments(series.points) {
                let mut path = String::new();
                for (i, (x, y)) in seg.iter().enumerate() {
                    let _ = write!(path, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
                }
                let _ = writeln!(
                    s,
                    r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                );
            }
            let ly = TOP + 16.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 10.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
