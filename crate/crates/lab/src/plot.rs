//! Minimal SVG line chart of the parameter distances against epoch.

use std::fmt::Write as _;

use gnnlab_core::Trajectory;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `‖W_t − W*‖` and `‖v_t − v*‖` on shared axes. Runs without a teacher
/// fall back to the loss.
pub fn distance_svg(t: &Trajectory, title: &str) -> String {
    let has_teacher = t.records.iter().any(|r| r.dist_w.is_some());
    let series: Vec<(&str, &str, Vec<(f64, f64)>)> = if has_teacher {
        vec![
            ("‖W−W*‖", "#1f77b4", t.records.iter().filter_map(|r| r.dist_w.map(|y| (r.epoch as f64, y))).collect()),
            ("‖v−v*‖", "#d62728", t.records.iter().filter_map(|r| r.dist_v.map(|y| (r.epoch as f64, y))).collect()),
        ]
    } else {
        vec![("loss", "#2ca02c", t.records.iter().map(|r| (r.epoch as f64, r.loss)).collect())]
    };

    let x_max = t.records.last().map_or(1.0, |r| r.epoch.max(1) as f64);
    let y_max = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
        .filter(|y| y.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.05;
    let sx = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(svg, r#"<text x="{x0}" y="{}" text-anchor="middle">0</text>"#, y0 + 16.0);
    let _ = writeln!(svg, r#"<text x="{x1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, x_max);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y1 + 4.0, y_max);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, x0 - 4.0, y0 + 4.0);

    for (k, (label, colour, pts)) in series.iter().enumerate() {
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, x1 - 90.0, x1 - 70.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, x1 - 65.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use gnnlab_core::EpochRecord;

    fn rec(epoch: usize, d: Option<f64>) -> EpochRecord {
        EpochRecord { epoch, dist_w: d, dist_v: d.map(|x| 2.0 * x), loss: 1.0, confined_w: None, confined_v: None, w_norm: 1.0 }
    }

    #[test]
    fn draws_one_polyline_per_series() {
        let t = Trajectory { records: (0..5).map(|e| rec(e, Some(1.0 / (e + 1) as f64))).collect() };
        let svg = distance_svg(&t, "a < b");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let no_teacher = Trajectory { records: vec![rec(0, None)] };
        assert_eq!(distance_svg(&no_teacher, "x").matches("<polyline").count(), 1);
    }
}
