//! Static SVG line charts.

use std::fmt::Write;

use crate::parity::{service_intensity_electric, ApplianceSpec};
use crate::pipeline::ScenarioRun;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 64.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

const COLORS: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// plotted against the right-hand axis
    pub secondary: bool,
    pub dashed: bool,
}

impl Line {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Line {
            label: label.into(),
            points,
            secondary: false,
            dashed: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub y2_label: Option<String>,
    pub lines: Vec<Line>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let lo = lo.min(0.0);
    let hi = if hi > lo { hi * 1.05 } else { lo + 1.0 };
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let xs = range(self.lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
        let (x0, x1) = {
            let lo = self.lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)).fold(f64::INFINITY, f64::min);
            if lo.is_finite() {
                (lo, xs.1 / 1.05)
            } else {
                xs
            }
        };
        let y = range(self.lines.iter().filter(|l| !l.secondary).flat_map(|l| l.points.iter().map(|p| p.1)));
        let y2 = range(self.lines.iter().filter(|l| l.secondary).flat_map(|l| l.points.iter().map(|p| p.1)));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |v: f64| LEFT + if x1 > x0 { (v - x0) / (x1 - x0) * pw } else { 0.0 };
        let sy = |v: f64, (lo, hi): (f64, f64)| TOP + ph - (v - lo) / (hi - lo) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y.0 + f * (y.1 - y.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(xv),
                H - BOTTOM + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(yv, y) + 4.0,
                tick(yv)
            );
            if self.y2_label.is_some() {
                let v2 = y2.0 + f * (y2.1 - y2.0);
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
                    W - RIGHT + 6.0,
                    sy(v2, y2) + 4.0,
                    tick(v2)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        if let Some(l) = &self.y2_label {
            let x = W - 12.0;
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="middle" transform="rotate(90 {x} {})">{}</text>"#,
                TOP + ph / 2.0,
                TOP + ph / 2.0,
                escape(l)
            );
        }
        for (i, line) in self.lines.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let axis = if line.secondary { y2 } else { y };
            let pts: Vec<String> = line
                .points
                .iter()
                .map(|&(px, py)| format!("{:.1},{:.1}", sx(px), sy(py, axis)))
                .collect();
            let dash = if line.dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
                pts.join(" ")
            );
            let ly = TOP + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
                LEFT + 8.0,
                LEFT + 26.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
                LEFT + 30.0,
                ly + 4.0,
                escape(&line.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Coal generation of each run.
pub fn coal_paths(runs: &[&ScenarioRun]) -> Chart {
    Chart {
        title: "Coal power generation".into(),
        x_label: "year".into(),
        y_label: "TWh/yr".into(),
        y2_label: None,
        lines: runs
            .iter()
            .map(|r| {
                Line::new(
                    r.scenario.name.clone(),
                    r.scenario.coal_generation().points().iter().map(|&(y, v)| (y as f64, v)).collect(),
                )
            })
            .collect(),
    }
}

/// Grid intensity (left) and economy-wide electrification rate (right).
pub fn intensity_and_electrification(runs: &[&ScenarioRun]) -> Chart {
    let mut lines = Vec::new();
    for r in runs {
        lines.push(Line::new(
            format!("{} intensity", r.scenario.name),
            r.ledger.grid_intensity().points().iter().map(|&(y, v)| (y as f64, v)).collect(),
        ));
    }
    for r in runs {
        let pts = r
            .grid()
            .years()
            .filter_map(|y| r.enduse.economy_rate(y).ok().map(|v| (y as f64, v)))
            .collect();
        lines.push(Line {
            secondary: true,
            dashed: true,
            ..Line::new(format!("{} electrification", r.scenario.name), pts)
        });
    }
    Chart {
        title: "Power emission intensity and electrification rate".into(),
        x_label: "year".into(),
        y_label: "gCO2/kWh".into(),
        y2_label: Some("% of final energy".into()),
        lines,
    }
}

/// Electric-route emissions relative to the incumbent as grid intensity
/// varies; parity where a line crosses 1.
pub fn parity_lines(apps: &[ApplianceSpec]) -> Chart {
    let grid: Vec<f64> = (0..=12).map(|i| 100.0 * i as f64).collect();
    let mut lines: Vec<Line> = apps
        .iter()
        .map(|a| {
            let fossil = a.fossil_intensity + a.fossil_embodied;
            Line::new(
                a.name.clone(),
                grid.iter()
                    .map(|&g| (g, if fossil > 0.0 { service_intensity_electric(a, g) / fossil } else { 0.0 }))
                    .collect(),
            )
        })
        .collect();
    lines.push(Line {
        dashed: true,
        ..Line::new("incumbent", vec![(0.0, 1.0), (1200.0, 1.0)])
    });
    Chart {
        title: "Emission intensity relative to fossil incumbent".into(),
        x_label: "grid intensity (gCO2/kWh)".into(),
        y_label: "electric / fossil".into(),
        y2_label: None,
        lines,
    }
}
