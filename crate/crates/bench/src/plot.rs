//! Minimal SVG line plots.

use std::fmt::Write;

use tslab_core::anomaly::AnomalyScoreSeries;
use tslab_core::{AnomalyLabelSeries, Timestamp};

const W: f64 = 960.0;
const H: f64 = 320.0;
const PAD: f64 = 30.0;

struct Frame {
    t0: f64,
    t1: f64,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new(ts: &[Timestamp], ys: &[&[f64]]) -> Self {
        let t0 = ts.first().copied().unwrap_or(0) as f64;
        let t1 = ts.last().copied().unwrap_or(1) as f64;
        let finite = ys.iter().flat_map(|v| v.iter().copied()).filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self {
            t0,
            t1: if t1 > t0 { t1 } else { t0 + 1.0 },
            lo,
            hi,
        }
    }

    fn x(&self, t: Timestamp) -> f64 {
        PAD + (t as f64 - self.t0) / (self.t1 - self.t0) * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD - (v - self.lo) / (self.hi - self.lo) * (H - 2.0 * PAD)
    }
}

fn polyline(out: &mut String, f: &Frame, ts: &[Timestamp], ys: &[f64], class: &str, color: &str) {
    let pts: Vec<String> = ts
        .iter()
        .zip(ys)
        .filter(|(_, v)| v.is_finite())
        .map(|(&t, &v)| format!("{:.1},{:.1}", f.x(t), f.y(v)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
        pts.join(" ")
    );
}

fn open() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#) + "\n"
}

/// Truth in black, forecast in blue.
pub fn forecast_svg(ts: &[Timestamp], truth: &[f64], forecast: &[f64]) -> String {
    let f = Frame::new(ts, &[truth, forecast]);
    let mut s = open();
    polyline(&mut s, &f, ts, truth, "truth", "black");
    polyline(&mut s, &f, ts, forecast, "forecast", "steelblue");
    s.push_str("</svg>\n");
    s
}

/// Scores with the threshold line, alert markers and shaded truth windows.
pub fn anomaly_svg(scores: &AnomalyScoreSeries, alerts: &AnomalyLabelSeries, truth: &AnomalyLabelSeries, threshold: f64) -> String {
    let ts = &scores.timestamps;
    let f = Frame::new(ts, &[&scores.scores, &[threshold, -threshold.abs().min(0.0)]]);
    let mut s = open();
    for w in truth.windows() {
        let (x0, x1) = (f.x(w.start), f.x(w.end));
        let _ = writeln!(
            s,
            r#"<rect class="window" x="{x0:.1}" y="{PAD}" width="{:.1}" height="{}" fill="orange" fill-opacity="0.3"/>"#,
            (x1 - x0).max(1.0),
            H - 2.0 * PAD
        );
    }
    polyline(&mut s, &f, ts, &scores.scores, "score", "black");
    let y = f.y(threshold);
    let _ = writeln!(
        s,
        r#"<line class="threshold" x1="{PAD}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="gray" stroke-dasharray="4"/>"#,
        W - PAD
    );
    for (&t, _) in alerts.timestamps().iter().zip(alerts.labels()).filter(|(_, &a)| a) {
        let _ = writeln!(s, r#"<circle class="alert" cx="{:.1}" cy="{}" r="3" fill="red"/>"#, f.x(t), PAD / 2.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_does_not_divide_by_zero() {
        let svg = forecast_svg(&[0], &[1.0], &[1.0]);
        assert!(!svg.contains("NaN"));
    }
}
