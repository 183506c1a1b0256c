//! Hand-rolled SVG plots: log-log drift sweeps with the fitted line and a
//! slope-1/2 guide, the `Psi(Q)` staircase, and drift-decomposition series.

use microdrift_core::drift::{DriftSeries, SweepResult};
use microdrift_core::fitting::LineFit;

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut f = Frame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for (x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if f.x_min == f.x_max {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        if f.y_min == f.y_max {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        let pad_x = 0.06 * (f.x_max - f.x_min);
        let pad_y = 0.08 * (f.y_max - f.y_min);
        f.x_min -= pad_x;
        f.x_max += pad_x;
        f.y_min -= pad_y;
        f.y_max += pad_y;
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (H - 2.0 * MARGIN)
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Svg {
        let mut body = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        );
        body.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"15\">{title}</text>\n",
            W / 2.0
        ));
        Svg { body }
    }

    fn axes(&mut self, frame: &Frame, x_label: &str, y_label: &str, log_ticks: bool) {
        let x0 = frame.px(frame.x_min);
        let x1 = frame.px(frame.x_max);
        let y0 = frame.py(frame.y_min);
        let y1 = frame.py(frame.y_max);
        self.body.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        ));
        let tick = |v: f64, log: bool| {
            if log {
                format!("1e{}", v.round() as i64)
            } else {
                format!("{v:.3}")
            }
        };
        let x_range = frame.x_max - frame.x_min;
        let mut v = frame.x_min.ceil();
        while v <= frame.x_max {
            let p = frame.px(v);
            self.body.push_str(&format!(
                "<line x1=\"{p}\" y1=\"{y0}\" x2=\"{p}\" y2=\"{}\" stroke=\"black\"/>\n\
                 <text x=\"{p}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
                 font-size=\"11\">{}</text>\n",
                y0 + 5.0,
                y0 + 20.0,
                tick(v, log_ticks)
            ));
            v += (x_range / 8.0).max(1.0).ceil();
        }
        let y_range = frame.y_max - frame.y_min;
        let mut v = frame.y_min.ceil();
        while v <= frame.y_max {
            let p = frame.py(v);
            self.body.push_str(&format!(
                "<line x1=\"{}\" y1=\"{p}\" x2=\"{x0}\" y2=\"{p}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
                 font-size=\"11\">{}</text>\n",
                x0 - 5.0,
                x0 - 8.0,
                p + 4.0,
                tick(v, log_ticks)
            ));
            v += (y_range / 8.0).max(1.0).ceil();
        }
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\">{x_label}</text>\n",
            W / 2.0,
            H - 12.0
        ));
        self.body.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"13\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
            H / 2.0,
            H / 2.0
        ));
    }

    fn circle(&mut self, x: f64, y: f64, color: &str) {
        self.body
            .push_str(&format!("<circle cx=\"{x}\" cy=\"{y}\" r=\"4\" fill=\"{color}\"/>\n"));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            path.join(" ")
        ));
    }

    fn label(&mut self, x: f64, y: f64, text: &str, color: &str) {
        self.body.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{text}</text>\n"
        ));
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Log-log total drift against `eps`, with the least-squares line and a
/// slope-1/2 guide through the first point.
pub fn sweep_plot(sweep: &SweepResult) -> String {
    let pts: Vec<(f64, f64)> = sweep
        .reports
        .iter()
        .filter(|r| r.total > 0.0)
        .map(|r| (r.eps.log10(), r.total.log10()))
        .collect();
    let frame = Frame::fit(pts.iter().copied());
    let mut svg = Svg::new("total action drift at tau vs eps (log-log)");
    svg.axes(&frame, "log10 eps", "log10 |I(tau) - I(0)|", true);
    if let Some(fit) = &sweep.fit_total {
        draw_line(&mut svg, &frame, fit, "#c22", false);
        svg.label(
            frame.px(frame.x_min) + 12.0,
            frame.py(frame.y_max) + 14.0,
            &format!("fit slope {:.3}", fit.slope),
            "#c22",
        );
    }
    if let Some((x0, y0)) = pts.first().copied() {
        let guide = LineFit { slope: 0.5, intercept: y0 - 0.5 * x0, residual_rms: 0.0, points: 0 };
        draw_line(&mut svg, &frame, &guide, "#888", true);
        svg.label(
            frame.px(frame.x_min) + 12.0,
            frame.py(frame.y_max) + 30.0,
            "slope 1/2 guide",
            "#888",
        );
    }
    for (x, y) in &pts {
        svg.circle(frame.px(*x), frame.py(*y), "#1a5fb4");
    }
    svg.finish()
}

fn draw_line(svg: &mut Svg, frame: &Frame, fit: &LineFit, color: &str, dashed: bool) {
    let pts = [
        (frame.px(frame.x_min), frame.py(fit.slope * frame.x_min + fit.intercept)),
        (frame.px(frame.x_max), frame.py(fit.slope * frame.x_max + fit.intercept)),
    ];
    svg.polyline(&pts, color, dashed);
}

/// `Psi(Q)` as a staircase (piecewise-constant extension).
pub fn psi_staircase(table: &[(u32, f64, f64)]) -> String {
    let frame = Frame::fit(table.iter().map(|&(q, _, psi)| (q as f64, psi)));
    let mut svg = Svg::new("small-divisor function Psi(Q)");
    svg.axes(&frame, "Q", "Psi(Q)", false);
    let mut pts = Vec::new();
    for window in table.windows(2) {
        let (q0, _, p0) = window[0];
        let (q1, _, _) = window[1];
        pts.push((frame.px(q0 as f64), frame.py(p0)));
        pts.push((frame.px(q1 as f64), frame.py(p0)));
    }
    if let Some(&(q, _, p)) = table.last() {
        pts.push((frame.px(q as f64), frame.py(p)));
        pts.push((frame.px(q as f64 + 1.0), frame.py(p)));
    }
    svg.polyline(&pts, "#1a5fb4", false);
    svg.finish()
}

/// Drift decomposition over time: resonant and transverse components.
pub fn drift_series_plot(series: &DriftSeries) -> String {
    let mut all: Vec<(f64, f64)> =
        series.t.iter().zip(&series.along).map(|(&t, &v)| (t, v)).collect();
    all.extend(series.t.iter().zip(&series.transverse).map(|(&t, &v)| (t, v)));
    let frame = Frame::fit(all.into_iter());
    let mut svg = Svg::new("drift decomposition along the run");
    svg.axes(&frame, "t", "|I(t) - I(0)| component", false);
    let along: Vec<(f64, f64)> = series
        .t
        .iter()
        .zip(&series.along)
        .map(|(&t, &v)| (frame.px(t), frame.py(v)))
        .collect();
    let transverse: Vec<(f64, f64)> = series
        .t
        .iter()
        .zip(&series.transverse)
        .map(|(&t, &v)| (frame.px(t), frame.py(v)))
        .collect();
    svg.polyline(&along, "#1a5fb4", false);
    svg.polyline(&transverse, "#c22", false);
    svg.label(frame.px(frame.x_min) + 12.0, frame.py(frame.y_max) + 14.0, "along Lambda", "#1a5fb4");
    svg.label(frame.px(frame.x_min) + 12.0, frame.py(frame.y_max) + 30.0, "transverse", "#c22");
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_of_constant_table_is_flat() {
        let table: Vec<(u32, f64, f64)> = (1..=10).map(|q| (q, 1.0, 1.0)).collect();
        let svg = psi_staircase(&table);
        assert!(svg.contains("<polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
