//! Self-contained SVG figures.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

#[derive(Clone, Copy, Debug)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, log: bool) -> Self {
        let (lo, hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { lo, hi, log }
    }

    fn frac(&self, x: f64) -> f64 {
        let v = if self.log { x.log10() } else { x };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        }
    }
}

fn label(x: f64, log: bool) -> String {
    if log {
        format!("1e{}", x.log10().round() as i32)
    } else {
        let s = format!("{:.3}", x);
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xa: Axis,
    ya: Axis,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.x0 + self.xa.frac(x) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + (1.0 - self.ya.frac(y)) * self.h
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        for t in self.xa.ticks() {
            let x = self.px(t);
            let yb = self.y0 + self.h;
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
                yb + 5.0,
                yb + 18.0,
                label(t, self.xa.log)
            );
        }
        for t in self.ya.ticks() {
            let y = self.py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
                self.x0 - 5.0,
                self.x0,
                self.x0 - 8.0,
                y + 4.0,
                label(t, self.ya.log)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"##,
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 40.0,
            escape(xlabel)
        );
        let (lx, ly) = (self.x0 - 52.0, self.y0 + self.h / 2.0);
        let _ = writeln!(
            out,
            r##"<text x="{lx:.1}" y="{ly:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"##,
            escape(ylabel)
        );
    }

    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], colour: &str, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y))).collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.6"{dash} points="{}"/>"#,
            path.join(" ")
        );
    }
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text>"##,
        width / 2.0,
        escape(title)
    );
    s
}

fn finite_range(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    v.filter(|x| x.is_finite()).fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

/// Fitted line `ln F = intercept + slope ln t` over `window`.
#[derive(Clone, Copy, Debug)]
pub struct FitOverlay {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
}

pub const FIDELITY_FLOOR: f64 = 1e-8;

/// Log-log survival probability with optional Heisenberg-time marker and power-law overlay.
pub fn fidelity_svg(title: &str, times: &[f64], f: &[f64], t_heisenberg: Option<f64>, fit: Option<FitOverlay>) -> String {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(f).filter(|(t, _)| **t > 0.0).map(|(t, y)| (*t, y.max(FIDELITY_FLOOR))).collect();
    let (t_lo, t_hi) = finite_range(pts.iter().map(|p| p.0)).unwrap_or((1e-2, 1e2));
    let (f_lo, _) = finite_range(pts.iter().map(|p| p.1)).unwrap_or((1e-3, 1.0));
    let p = Panel {
        x0: MARGIN_L,
        y0: MARGIN_T,
        w: W - MARGIN_L - MARGIN_R,
        h: H - MARGIN_T - MARGIN_B,
        xa: Axis::new(t_lo, t_hi, true),
        ya: Axis::new(f_lo.min(0.5) / 2.0, 1.5, true),
    };
    let mut s = open(W, H, title);
    p.frame(&mut s, "t (natural units)", "F(t)");
    p.polyline(&mut s, &pts, "#1f4e9c", false);
    if let Some(fit) = fit {
        let (a, b) = (fit.window.0.max(t_lo), fit.window.1.min(t_hi));
        if b > a {
            let line: Vec<(f64, f64)> =
                [a, b].iter().map(|t| (*t, (fit.intercept + fit.slope * t.ln()).exp().max(FIDELITY_FLOOR))).collect();
            p.polyline(&mut s, &line, "#c0392b", true);
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#c0392b">gamma = {:.3}</text>"##,
                p.x0 + p.w - 120.0,
                p.y0 + 18.0,
                (-fit.slope).max(0.0)
            );
        }
    }
    if let Some(th) = t_heisenberg.filter(|t| t.is_finite() && *t >= t_lo && *t <= t_hi) {
        let x = p.px(th);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#27ae60" stroke-dasharray="3 3"/><text x="{:.1}" y="{:.1}" font-size="12" fill="#27ae60">t_H</text>"##,
            p.y0,
            p.y0 + p.h,
            x + 4.0,
            p.y0 + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn colour(frac: f64) -> String {
    let f = frac.clamp(0.0, 1.0);
    let r = (255.0 * (0.15 + 0.85 * f)) as u8;
    let g = (255.0 * (0.25 + 0.55 * (1.0 - (2.0 * f - 1.0).abs()))) as u8;
    let b = (255.0 * (0.9 - 0.75 * f)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Value table over (spacing, disorder); missing cells are grey.
pub fn intensity_svg(title: &str, spacings: &[f64], disorders: &[f64], value: impl Fn(f64, f64) -> Option<f64>) -> String {
    let cell_w = 64.0;
    let cell_h = 36.0;
    let width = MARGIN_L + cell_w * disorders.len() as f64 + 100.0;
    let height = MARGIN_T + cell_h * spacings.len() as f64 + MARGIN_B + 10.0;
    let vals: Vec<Option<f64>> =
        spacings.iter().flat_map(|d| disorders.iter().map(move |w| (*d, *w))).map(|(d, w)| value(d, w)).collect();
    let (lo, hi) = finite_range(vals.iter().flatten().copied()).unwrap_or((0.0, 1.0));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = open(width, height, title);
    for (i, d) in spacings.iter().enumerate() {
        let y = MARGIN_T + i as f64 * cell_h;
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{d} um</text>"##,
            MARGIN_L - 8.0,
            y + cell_h / 2.0 + 4.0
        );
        for (j, _) in disorders.iter().enumerate() {
            let x = MARGIN_L + j as f64 * cell_w;
            let v = vals[i * disorders.len() + j];
            let (fill, text) = match v.filter(|v| v.is_finite()) {
                Some(v) => (colour((v - lo) / span), format!("{v:.3}")),
                None => ("#bbbbbb".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{text}</text>"##,
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 4.0
            );
        }
    }
    let yb = MARGIN_T + spacings.len() as f64 * cell_h;
    for (j, w) in disorders.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{w}</text>"##,
            MARGIN_L + (j as f64 + 0.5) * cell_w,
            yb + 18.0
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">disorder w</text>"##,
        MARGIN_L + cell_w * disorders.len() as f64 / 2.0,
        yb + 40.0
    );
    let lx = MARGIN_L + cell_w * disorders.len() as f64 + 20.0;
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = MARGIN_T + (1.0 - f) * 80.0;
        let _ = writeln!(
            s,
            r##"<rect x="{lx:.1}" y="{y:.1}" width="14" height="20" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="10">{:.3}</text>"##,
            colour(f),
            lx + 18.0,
            y + 14.0,
            lo + f * span
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Entanglement entropy in two panels: linear time up to `early_until`, then the full log-time axis.
pub fn ee_dual_svg(title: &str, times: &[f64], s_vals: &[f64], early_until: f64) -> String {
    let width = 2.0 * W - 40.0;
    let (y_lo, y_hi) = finite_range(s_vals.iter().copied()).unwrap_or((0.0, 1.0));
    let ya = Axis::new(y_lo.min(0.0), y_hi.max(1e-3) * 1.05, false);
    let early: Vec<(f64, f64)> = times.iter().zip(s_vals).filter(|(t, _)| **t <= early_until).map(|(t, y)| (*t, *y)).collect();
    let late: Vec<(f64, f64)> = times.iter().zip(s_vals).filter(|(t, _)| **t > 0.0).map(|(t, y)| (*t, *y)).collect();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let t_min_pos = late.first().map_or(1e-2, |p| p.0);
    let ph = H - MARGIN_T - MARGIN_B;
    let pw = W - MARGIN_L - MARGIN_R - 20.0;
    let left = Panel { x0: MARGIN_L, y0: MARGIN_T, w: pw, h: ph, xa: Axis::new(0.0, early_until.min(t_max).max(1e-9), false), ya };
    let right = Panel { x0: W + MARGIN_L - 20.0, y0: MARGIN_T, w: pw, h: ph, xa: Axis::new(t_min_pos, t_max.max(t_min_pos * 10.0), true), ya };
    let mut s = open(width, H, title);
    left.frame(&mut s, "t (natural units)", "S / ln D_A");
    left.polyline(&mut s, &early, "#1f4e9c", false);
    right.frame(&mut s, "t (natural units, log)", "S / ln D_A");
    right.polyline(&mut s, &late, "#1f4e9c", false);
    s.push_str("</svg>\n");
    s
}
