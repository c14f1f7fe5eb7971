//! Minimal SVG band plots: a median polyline over a shaded p10–p90 band per
//! series.

use std::fmt::Write;

use drs_inekf::harness::Band;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub bands: &'a [Band],
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const LEGEND_W: f64 = 250.0;

/// "Nice" tick spacing covering `span` in about `target` steps.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn band_plot(title: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.bands.iter());
    let (mut t0, mut t1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0f64);
    for b in all {
        t0 = t0.min(b.t);
        t1 = t1.max(b.t);
        y1 = y1.max(b.p90).max(b.p50);
    }
    if !t0.is_finite() {
        t0 = 0.0;
        t1 = 1.0;
    } else if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if !(y1 > 0.0 && y1.is_finite()) {
        y1 = 1.0;
    }
    let ystep = tick_step(y1, 5.0);
    let y1 = (y1 / ystep).ceil() * ystep;
    let tstep = tick_step(t1 - t0, 8.0);

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - t0) / (t1 - t0) * pw;
    let sy = |y: f64| TOP + ph - (y.clamp(0.0, y1) / y1) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    // grid and ticks
    let mut y = 0.0;
    while y <= y1 + 0.5 * ystep {
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            py + 4.0,
            fmt_tick(y, ystep)
        );
        y += ystep;
    }
    let mut t = (t0 / tstep).ceil() * tstep;
    while t <= t1 + 1e-9 {
        let px = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 18.0,
            fmt_tick(t, tstep)
        );
        t += tstep;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        LEFT + pw / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, ser) in series.iter().enumerate() {
        if ser.bands.is_empty() {
            continue;
        }
        let upper = ser.bands.iter().map(|b| format!("{:.2},{:.2}", sx(b.t), sy(b.p90)));
        let lower = ser.bands.iter().rev().map(|b| format!("{:.2},{:.2}", sx(b.t), sy(b.p10)));
        let pts: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            pts.join(" "),
            ser.color
        );
        let med: Vec<String> = ser.bands.iter().map(|b| format!("{:.2},{:.2}", sx(b.t), sy(b.p50))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            med.join(" "),
            ser.color
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = W - RIGHT - LEGEND_W;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="18" fill="white" fill-opacity="0.8"/>"#,
            lx - 6.0,
            ly - 9.0,
            LEGEND_W
        );
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{} (median, p10–p90)</text>"#,
            lx + 20.0,
            ser.color,
            lx + 26.0,
            ly + 4.0,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
