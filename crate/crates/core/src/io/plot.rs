//! Self-contained SVG figures: Kaplan-Meier staircases with shaded bands
//! between consecutive tiers, and rejection-rate curves.

use std::fmt::Write as _;

use crate::io::report::CurveExport;
use crate::study::PowerRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        self.x0 + self.w * (t / self.x_max).clamp(0.0, 1.0)
    }

    fn y(&self, s: f64) -> f64 {
        self.y0 + self.h * (1.0 - s.clamp(0.0, 1.0))
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, y0, x1, y1) = (self.x0, self.y0, self.x0 + self.w, self.y0 + self.h);
        let _ = writeln!(
            out,
            r#"<path d="M{x0:.2},{y0:.2} L{x0:.2},{y1:.2} L{x1:.2},{y1:.2}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let v = i as f64 / 5.0;
            let (tx, ty) = (self.x(v * self.x_max), self.y(v));
            let _ = writeln!(
                out,
                r#"<text x="{tx:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                y1 + 16.0,
                tick(v * self.x_max)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.1}</text>"#,
                x0 - 6.0,
                ty + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{x_label}</text>"#,
            x0 + self.w / 2.0,
            y1 + 34.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{y_label}</text>"#,
            y0 + self.h / 2.0,
            y0 + self.h / 2.0
        );
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Staircase through `points` extended flat to `x_max`, as frame coordinates.
fn staircase(points: &[(f64, f64)], x_max: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * points.len() + 1);
    let mut level = 1.0;
    for &(t, s) in points {
        if t > x_max {
            break;
        }
        if let Some(&(_, prev)) = out.last() {
            if prev != s || t > 0.0 {
                out.push((t, prev));
            }
        }
        out.push((t, s));
        level = s;
    }
    out.push((x_max, level));
    out
}

fn polyline(frame: &Frame, pts: &[(f64, f64)]) -> String {
    pts.iter()
        .enumerate()
        .map(|(i, &(t, s))| {
            format!(
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                frame.x(t),
                frame.y(s)
            )
        })
        .collect()
}

/// Kaplan-Meier staircases of one arm up to `x_max`. The region between the
/// curves of tiers `j` and `j + 1` is shaded: its area is the expected time
/// spent with exactly `j` events.
pub fn km_svg(title: &str, curves: &[&CurveExport], x_max: f64) -> String {
    let frame = Frame {
        x0: MARGIN,
        y0: 40.0,
        w: WIDTH - MARGIN - 140.0,
        h: HEIGHT - 40.0 - MARGIN,
        x_max,
    };
    let mut out = String::new();
    header(&mut out, title);
    let stairs: Vec<Vec<(f64, f64)>> = curves.iter().map(|c| staircase(&c.points, x_max)).collect();

    for (k, pair) in stairs.windows(2).enumerate() {
        // tier j is the lower curve, tier j + 1 the upper one
        let mut d = polyline(&frame, &pair[1]);
        for &(t, s) in pair[0].iter().rev() {
            let _ = write!(d, " L{:.2},{:.2}", frame.x(t), frame.y(s));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d} Z" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
            PALETTE[k % PALETTE.len()]
        );
    }
    for (k, (curve, pts)) in curves.iter().zip(&stairs).enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.6"/>"#,
            polyline(&frame, pts)
        );
        let ly = frame.y0 + 16.0 + 18.0 * k as f64;
        let lx = frame.x0 + frame.w + 16.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">tier {}</text>"#,
            lx + 26.0,
            ly + 4.0,
            curve.tier
        );
    }
    frame.axes(&mut out, "time", "survival");
    out.push_str("</svg>\n");
    out
}

/// Rejection rate against `τ`, one line per (test, n).
pub fn power_svg(title: &str, rows: &[PowerRow]) -> String {
    let x_max = rows.iter().map(|r| r.tau).fold(0.0, f64::max);
    let frame = Frame {
        x0: MARGIN,
        y0: 40.0,
        w: WIDTH - MARGIN - 190.0,
        h: HEIGHT - 40.0 - MARGIN,
        x_max: if x_max > 0.0 { x_max } else { 1.0 },
    };
    let mut out = String::new();
    header(&mut out, title);

    let mut series: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let key = (r.test.to_string(), r.n_per_arm);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let tests: Vec<&String> = {
        let mut t: Vec<&String> = Vec::new();
        for (name, _) in &series {
            if !t.contains(&name) {
                t.push(name);
            }
        }
        t
    };
    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = series.iter().map(|x| x.1).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let dashes = ["", "6,3", "2,3", "8,3,2,3"];

    for (k, (name, n)) in series.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| {
                r.test.to_string() == *name && r.n_per_arm == *n && r.rejection_rate.is_finite()
            })
            .map(|r| (r.tau, r.rejection_rate))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ti = tests.iter().position(|t| *t == name).unwrap_or(0);
        let ni = sizes.iter().position(|s| s == n).unwrap_or(0);
        let colour = PALETTE[ti % PALETTE.len()];
        let dash = dashes[ni % dashes.len()];
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.6" stroke-dasharray="{dash}"/>"#,
            polyline(&frame, &pts)
        );
        for &(t, s) in &pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#,
                frame.x(t),
                frame.y(s)
            );
        }
        let ly = frame.y0 + 12.0 + 16.0 * k as f64;
        let lx = frame.x0 + frame.w + 14.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{name}, n={n}</text>"#,
            lx + 28.0,
            ly + 4.0
        );
    }
    frame.axes(&mut out, "tau", "rejection rate");
    out.push_str("</svg>\n");
    out
}
