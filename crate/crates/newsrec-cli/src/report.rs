//! Metric tables and static plots derived from run artifacts.

use newsrec::train::EpochRecord;

/// CSV table over the per-epoch training log.
pub fn epochs_csv(rows: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,auc,mrr,ndcg5,ndcg10,improved,wall_seconds\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.dev.auc,
            r.dev.mrr,
            r.dev.ndcg5,
            r.dev.ndcg10,
            r.improved,
            r.wall_seconds
        ));
    }
    s
}

const PLOT_COLORS: [&str; 4] = ["#2a6f97", "#c44536", "#2d6a4f", "#9d4edd"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 42.0;
const BOTTOM: f64 = 352.0;

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bounds padded so flat series still get a visible band.
fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { (hi - lo) * 0.05 } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

/// One polyline chart. Series share the x axis; both axes are scaled
/// to the data with a small margin.
pub fn line_plot_svg(title: &str, x_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (x_lo, x_hi) = padded_bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y_lo, y_hi) = padded_bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let sy = |y: f64| BOTTOM - (y - y_lo) / (y_hi - y_lo) * (BOTTOM - TOP);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        esc(title)
    );

    // axes and four horizontal grid lines with value labels
    for i in 0..=3 {
        let frac = i as f64 / 3.0;
        let y = BOTTOM - frac * (BOTTOM - TOP);
        let v = y_lo + frac * (y_hi - y_lo);
        s.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{RIGHT}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 6.0,
            y + 4.0,
            fmt(v)
        ));
    }
    for i in 0..=3 {
        let frac = i as f64 / 3.0;
        let x = LEFT + frac * (RIGHT - LEFT);
        let v = x_lo + frac * (x_hi - x_lo);
        s.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            BOTTOM + 18.0,
            fmt(v)
        ));
    }
    s.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"#333\"/>\n\
         <line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"#333\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 8.0,
        esc(x_label)
    ));

    for (i, (name, points)) in series.iter().enumerate() {
        let color = PLOT_COLORS[i % PLOT_COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        for &(x, y) in points.iter() {
            s.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        s.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            RIGHT - 130.0,
            ly - 9.0,
            RIGHT - 115.0,
            ly,
            esc(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}
