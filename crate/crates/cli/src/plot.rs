//! Static SVG training curves: loss on the left, accuracy on the right.

use std::fmt::Write;

use mgr_core::train::TrainReport;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;

struct Series<'a> {
    label: &'a str,
    colour: &'a str,
    values: Vec<f64>,
}

fn panel(out: &mut String, x0: f64, title: &str, y_max: f64, series: &[Series]) {
    let (left, top) = (x0 + MARGIN, MARGIN);
    let (w, h) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 2.0 * MARGIN);
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let sx = |i: usize| left + if n > 1 { w * i as f64 / (n - 1) as f64 } else { w / 2.0 };
    let sy = |v: f64| top + h - h * (v / y_max).clamp(0.0, 1.0);

    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        left + w / 2.0,
        top - 20.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end" font-size="10">{v:.2}</text>"##,
            left + w,
            left - 4.0,
            y + 3.0
        );
    }
    if n > 0 {
        for (i, label) in [(0, 1), (n - 1, n)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{label}</text>"#,
                sx(i),
                top + h + 14.0
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">epoch</text>"#,
        left + w / 2.0,
        top + h + 30.0
    );
    for (j, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", sx(i), sy(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.colour,
            pts.join(" ")
        );
        let ly = top + 12.0 + 14.0 * j as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-size="10">{}</text>"#,
            left + w - 90.0,
            left + w - 70.0,
            s.colour,
            left + w - 65.0,
            ly + 3.0,
            s.label
        );
    }
}

pub fn training_curves_svg(r: &TrainReport) -> String {
    let col = |f: fn(&mgr_core::train::EpochRecord) -> f64| r.epochs.iter().map(f).collect::<Vec<_>>();
    let loss = [
        Series {
            label: "train",
            colour: "#1f77b4",
            values: col(|e| e.train_loss),
        },
        Series {
            label: "valid",
            colour: "#d62728",
            values: col(|e| e.valid_loss),
        },
    ];
    let acc = [
        Series {
            label: "train",
            colour: "#1f77b4",
            values: col(|e| e.train_accuracy),
        },
        Series {
            label: "valid",
            colour: "#d62728",
            values: col(|e| e.valid_accuracy),
        },
    ];
    let loss_max = loss
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-6);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL_H}" font-family="sans-serif">"#,
        2.0 * PANEL_W
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut out, 0.0, "cross-entropy loss", loss_max * 1.05, &loss);
    panel(&mut out, PANEL_W, "accuracy", 1.0, &acc);
    out.push_str("</svg>\n");
    out
}
