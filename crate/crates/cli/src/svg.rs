//! Minimal SVG line charts rendered straight from the CSV plot data.

use std::fmt::Write;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#4265b5", "#c44e52", "#55a868", "#8172b2", "#ccb974", "#64b5cd", "#937860", "#da8bc3",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Renders one or more series as polylines with linear or log-x axes.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    log_x: bool,
) -> String {
    let tx = |x: f64| {
        if log_x {
            x.max(f64::MIN_POSITIVE).log10()
        } else {
            x
        }
    };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for (x, y) in s.points {
            let x = tx(*x);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(*y);
            y_max = y_max.max(*y);
        }
    }
    if !x_min.is_finite() || x_max <= x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if !y_min.is_finite() || y_max <= y_min {
        y_min = 0.0;
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (tx(x) - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="18" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();

    // Axes and tick labels.
    writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    )
    .unwrap();
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let xpix = MARGIN_LEFT + f * plot_w;
        let label = if log_x {
            format_tick(10.0_f64.powf(xv))
        } else {
            format_tick(xv)
        };
        writeln!(
            out,
            r##"<line x1="{xpix}" y1="{}" x2="{xpix}" y2="{}" stroke="#999" stroke-dasharray="3,4"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{xpix}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{label}</text>"#,
            MARGIN_TOP + plot_h + 18.0
        )
        .unwrap();

        let yv = y_min + f * (y_max - y_min);
        let ypix = py(yv);
        writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{ypix}" x2="{}" y2="{ypix}" stroke="#999" stroke-dasharray="3,4"/>"##,
            MARGIN_LEFT + plot_w
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            ypix + 4.0,
            format_tick(yv)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="20" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    )
    .unwrap();

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in s.points {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            if path.is_empty() {
                write!(path, "M {:.2} {:.2}", px(*x), py(*y)).unwrap();
            } else {
                write!(path, " L {:.2} {:.2}", px(*x), py(*y)).unwrap();
            }
        }
        writeln!(
            out,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.6"/>"#
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            MARGIN_LEFT + plot_w - 160.0,
            MARGIN_TOP + 16.0 + 16.0 * si as f64,
            escape(s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_looking_svg() {
        let pts_a = [(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)];
        let pts_b = [(0.0, 0.5), (1.0, 0.7), (2.0, 2.5)];
        let svg = line_chart(
            "demo",
            "x",
            "y",
            &[
                Series {
                    label: "a",
                    points: &pts_a,
                },
                Series {
                    label: "b",
                    points: &pts_b,
                },
            ],
            false,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 2);
    }

    #[test]
    fn deterministic_output() {
        let pts = [(1.0, 10.0), (10.0, 20.0), (100.0, 15.0)];
        let a = line_chart(
            "t",
            "x",
            "y",
            &[Series {
                label: "s",
                points: &pts,
            }],
            true,
        );
        let b = line_chart(
            "t",
            "x",
            "y",
            &[Series {
                label: "s",
                points: &pts,
            }],
            true,
        );
        assert_eq!(a, b);
    }
}
