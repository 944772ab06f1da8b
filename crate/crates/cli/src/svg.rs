//! Minimal SVG line chart for fidelity traces: unfiltered values as solid
//! lines, smoothed values dashed, one colour per metric.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub unfiltered: Vec<Option<f64>>,
    pub smoothed: Vec<Option<f64>>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let span = if self.x1 > self.x0 {
            self.x1 - self.x0
        } else {
            1.0
        };
        MARGIN_LEFT + (x - self.x0) / span * w
    }

    fn py(&self, y: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (self.y1 - y) / (self.y1 - self.y0) * h
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Consecutive runs of present values, each as a polyline point list.
fn segments(frame: &Frame, xs: &[usize], ys: &[Option<f64>]) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for (x, y) in xs.iter().zip(ys) {
        match y {
            Some(v) => {
                if !current.is_empty() {
                    current.push(' ');
                }
                write!(current, "{:.2},{:.2}", frame.px(*x as f64), frame.py(*v))
                    .expect("string write");
            }
            None if !current.is_empty() => out.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn render_chart(frames: &[usize], series: &[Series]) -> String {
    let values = series
        .iter()
        .flat_map(|s| s.unfiltered.iter().chain(&s.smoothed))
        .flatten()
        .copied();
    let (lo, hi) = values.fold((0.0f64, 1.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let frame = Frame {
        x0: frames.first().copied().unwrap_or(0) as f64,
        x1: frames.last().copied().unwrap_or(0) as f64,
        y0: lo,
        y1: hi,
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .expect("string write");
    writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .expect("string write");

    let (left, right) = (frame.px(frame.x0), frame.px(frame.x1));
    let (top, bottom) = (frame.py(frame.y1), frame.py(frame.y0));
    writeln!(
        s,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    )
    .expect("string write");
    for k in 0..=5 {
        let v = frame.y0 + (frame.y1 - frame.y0) * k as f64 / 5.0;
        let y = frame.py(v);
        writeln!(
            s,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            left - 6.0,
            y + 4.0
        )
        .expect("string write");
    }
    for k in 0..=5 {
        let f = frame.x0 + (frame.x1 - frame.x0) * k as f64 / 5.0;
        let x = frame.px(f);
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            f.round()
        )
        .expect("string write");
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">frame</text>"#,
        (left + right) / 2.0,
        HEIGHT - 10.0
    )
    .expect("string write");
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">fidelity</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    )
    .expect("string write");

    for (i, ser) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        for pts in segments(&frame, frames, &ser.unfiltered) {
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1" stroke-opacity="0.6" points="{pts}"/>"#
            )
            .expect("string write");
        }
        for pts in segments(&frame, frames, &ser.smoothed) {
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="2" stroke-dasharray="6 4" points="{pts}"/>"#
            )
            .expect("string write");
        }
        let ly = MARGIN_TOP + 20.0 + 36.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 16.0;
        writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}"/><line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="2" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            ly + 12.0,
            lx + 24.0,
            ly + 12.0,
            lx + 30.0,
            ly + 10.0,
            escape(&ser.name)
        )
        .expect("string write");
    }
    s.push_str("</svg>\n");
    s
}
