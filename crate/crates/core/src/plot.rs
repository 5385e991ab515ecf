//! Deterministic SVG figures, each paired with the CSV of what it shows.

use std::fmt::Write as _;
use std::io::Cursor;

use base64::Engine as _;

use crate::classifier::{EvalReport, TrainReport};
use crate::codebook::RadiationPattern;
use crate::sensing::{SampleRecord, N_CONFIG, N_FREQ};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Figure {
    pub svg: String,
    pub csv: String,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ = writeln!(out, "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", x1 - x0, y1 - y0);
        for n in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * f64::from(n) / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * f64::from(n) / 4.0;
            let _ = writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", self.px(fx), y1 + 16.0, tick(fx));
            let _ = writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", x0 - 4.0, self.py(fy) + 4.0, tick(fy));
        }
        let _ = writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
        let _ = writeln!(
            out,
            "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>",
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn polyline(out: &mut String, ax: &Axes, pts: &[(f64, f64)], colour: &str) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y))).collect();
    let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>", coords.join(" "));
}

/// Gain versus rotor angle. Non-finite gains are drawn at the axis floor.
pub fn pattern_figure(p: &RadiationPattern) -> Result<Figure> {
    if p.angles_deg.is_empty() || p.angles_deg.len() != p.gain_db.len() {
        return Err(Error::invalid("pattern needs matching, non-empty angle and gain lists"));
    }
    let floor = p.gain_db.iter().cloned().filter(|g| g.is_finite()).fold(0.0, f64::min).max(-60.0);
    let ax = Axes {
        x: range(p.angles_deg.iter().copied()),
        y: (floor.min(-1.0), 0.0),
    };
    let mut svg = header(W, H, "Radiation pattern");
    ax.frame(&mut svg, "rotor angle (deg)", "normalized gain (dB)");
    let pts: Vec<(f64, f64)> = p
        .angles_deg
        .iter()
        .zip(&p.gain_db)
        .map(|(&a, &g)| (a, if g.is_finite() { g.max(ax.y.0) } else { ax.y.0 }))
        .collect();
    polyline(&mut svg, &ax, &pts, "#1f4e9c");
    svg.push_str("</svg>\n");
    let mut csv = String::from("angle_deg,gain_db\n");
    for (a, g) in p.angles_deg.iter().zip(&p.gain_db) {
        let _ = writeln!(csv, "{a},{g}");
    }
    Ok(Figure { svg, csv })
}

/// Parses the `angle_deg,gain_db` CSV written by [`pattern_figure`].
pub fn parse_pattern_csv(text: &str) -> Result<RadiationPattern> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "angle_deg,gain_db" => {}
        other => return Err(Error::data(format!("not a pattern CSV (header {other:?})"))),
    }
    let mut angles_deg = Vec::new();
    let mut gain_db = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut it = line.split(',');
        let mut num = || -> Result<f64> {
            it.next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::data(format!("pattern CSV line {}: malformed", n + 2)))
        };
        angles_deg.push(num()?);
        gain_db.push(num()?);
    }
    Ok(RadiationPattern { angles_deg, gain_db })
}

// Five-stop dark blue → teal → yellow ramp.
fn colour(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (STOPS.len() - 1) as f64;
    let i = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - i as f64;
    std::array::from_fn(|c| (STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8)
}

fn png_data_uri(width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<String> {
    let mut img = image::RgbImage::new(width as u32, height as u32);
    for (n, &v) in values.iter().enumerate() {
        let (r, c) = (n / width, n % width);
        // Row 0 (lowest frequency) at the bottom.
        img.put_pixel(c as u32, (height - 1 - r) as u32, image::Rgb(colour((v - lo) / (hi - lo))));
    }
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::numerical(format!("png encoding failed: {e}")))?;
    Ok(format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(bytes)))
}

/// Magnitude (dB) and phase panels, one raster cell per (frequency,
/// configuration).
pub fn s21_heatmap_figure(rec: &SampleRecord) -> Result<Figure> {
    rec.validate()?;
    let mag: Vec<f64> = rec.s21.iter().map(|v| 20.0 * v.norm().log10()).collect();
    let phase: Vec<f64> = rec.s21.iter().map(|v| v.arg()).collect();
    let (mlo, mhi) = range(mag.iter().copied());
    let panel_w = N_CONFIG as f64;
    let panel_h = N_FREQ as f64;
    let total_w = 2.0 * panel_w + 3.0 * MARGIN;
    let total_h = panel_h + 2.0 * MARGIN;
    let mut svg = header(total_w, total_h, &format!("S21 {} ({}, {})", rec.run_id, rec.label, rec.provenance));
    let panels = [
        ("magnitude (dB)", png_data_uri(N_CONFIG, N_FREQ, &mag, mlo, mhi)?, MARGIN, mlo, mhi),
        (
            "phase (rad)",
            png_data_uri(N_CONFIG, N_FREQ, &phase, -std::f64::consts::PI, std::f64::consts::PI)?,
            2.0 * MARGIN + panel_w,
            -std::f64::consts::PI,
            std::f64::consts::PI,
        ),
    ];
    for (name, uri, x, lo, hi) in panels {
        let _ = writeln!(
            svg,
            "<g class=\"panel\"><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{name} [{lo:.2}, {hi:.2}]</text>\n\
             <image x=\"{x}\" y=\"{MARGIN}\" width=\"{panel_w}\" height=\"{panel_h}\" preserveAspectRatio=\"none\" style=\"image-rendering:pixelated\" href=\"{uri}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">configuration index</text></g>",
            x + panel_w / 2.0,
            MARGIN - 8.0,
            x + panel_w / 2.0,
            MARGIN + panel_h + 20.0
        );
    }
    svg.push_str("</svg>\n");
    let mut csv = String::from("freq_hz,config,magnitude_db,phase_rad\n");
    for f in 0..N_FREQ {
        let fhz = rec.grid.value(f);
        for c in 0..N_CONFIG {
            let n = f * N_CONFIG + c;
            let _ = writeln!(csv, "{fhz},{c},{},{}", mag[n], phase[n]);
        }
    }
    Ok(Figure { svg, csv })
}

pub fn loss_curves_figure(r: &TrainReport) -> Result<Figure> {
    if r.train_loss.is_empty() {
        return Err(Error::invalid("report has no loss curves"));
    }
    let n = r.train_loss.len();
    let ax = Axes {
        x: (1.0, (n as f64).max(2.0)),
        y: range(r.train_loss.iter().chain(&r.val_loss).copied().chain([0.0])),
    };
    let mut svg = header(W, H, &format!("Loss ({})", r.config.kind));
    ax.frame(&mut svg, "epoch", "cross-entropy");
    let pts = |v: &[f64]| v.iter().enumerate().filter(|(_, y)| y.is_finite()).map(|(e, &y)| ((e + 1) as f64, y)).collect::<Vec<_>>();
    polyline(&mut svg, &ax, &pts(&r.train_loss), "#1f4e9c");
    polyline(&mut svg, &ax, &pts(&r.val_loss), "#c0392b");
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#1f4e9c\">train</text>", W - MARGIN - 80.0, MARGIN + 16.0);
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c0392b\">validation</text>", W - MARGIN - 80.0, MARGIN + 32.0);
    svg.push_str("</svg>\n");
    let mut csv = String::from("epoch,train_loss,val_loss,learning_rate\n");
    for e in 0..n {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            e + 1,
            r.train_loss[e],
            r.val_loss.get(e).copied().unwrap_or(f64::NAN),
            r.learning_rate.get(e).copied().unwrap_or(f64::NAN)
        );
    }
    Ok(Figure { svg, csv })
}

pub fn confusion_figure(r: &EvalReport) -> Result<Figure> {
    let k = r.classes.len();
    if k == 0 || r.confusion.len() != k || r.confusion.iter().any(|row| row.len() != k) {
        return Err(Error::invalid("confusion matrix must be square and match the class list"));
    }
    let cell = 90.0;
    let left = 120.0;
    let top = 70.0;
    let w = left + cell * k as f64 + 30.0;
    let h = top + cell * k as f64 + 50.0;
    let mut svg = header(w, h, &format!("Confusion (accuracy {:.2}%)", 100.0 * r.accuracy));
    for t in 0..k {
        let row_total: usize = r.confusion[t].iter().sum();
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", left - 6.0, top + cell * (t as f64 + 0.5) + 4.0, r.classes[t]);
        for p in 0..k {
            let v = r.confusion[t][p];
            let frac = if row_total == 0 { 0.0 } else { v as f64 / row_total as f64 };
            let [cr, cg, cb] = colour(frac);
            let text = if frac > 0.6 { "black" } else { "white" };
            let (x, y) = (left + cell * p as f64, top + cell * t as f64);
            let _ = writeln!(svg, "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({cr},{cg},{cb})\" stroke=\"white\"/>");
            let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"{text}\">{v}</text>", x + cell / 2.0, y + cell / 2.0 + 4.0);
        }
    }
    for p in 0..k {
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", left + cell * (p as f64 + 0.5), top - 8.0, r.classes[p]);
    }
    let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">predicted</text>", left + cell * k as f64 / 2.0, h - 16.0);
    svg.push_str("</svg>\n");
    let mut csv = String::from("true,predicted,count\n");
    for t in 0..k {
        for p in 0..k {
            let _ = writeln!(csv, "{},{},{}", r.classes[t], r.classes[p], r.confusion[t][p]);
        }
    }
    Ok(Figure { svg, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_polyline_has_one_vertex_per_angle() {
        let p = RadiationPattern {
            angles_deg: (-30..=30).map(|a| f64::from(a) * 2.0).collect(),
            gain_db: (-30..=30).map(|a| -f64::from(a * a) / 30.0).collect(),
        };
        let fig = pattern_figure(&p).unwrap();
        let pts = fig.svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 61);
        assert_eq!(parse_pattern_csv(&fig.csv).unwrap(), p);
        assert_eq!(pattern_figure(&p).unwrap(), fig);
    }

    #[test]
    fn colour_ramp_endpoints() {
        assert_eq!(colour(0.0), [68, 1, 84]);
        assert_eq!(colour(1.0), [253, 231, 37]);
        assert_eq!(colour(f64::NAN), [68, 1, 84]);
    }
}
