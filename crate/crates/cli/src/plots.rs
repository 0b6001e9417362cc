//! Static SVG figures, written by hand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use nlcrit_core::concentration::harmonic_mean_radius;
use nlcrit_core::fieldio::write_atomic;
use nlcrit_core::functionals::critical_exponent;
use nlcrit_core::{DomainSpec, Grid};

use crate::checks::State;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Axis-aligned frame mapping data coordinates onto the canvas.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64], log_x: bool) -> Self {
        let tx = |v: f64| if log_x { v.ln() } else { v };
        Frame {
            x: padded(xs.iter().map(|&v| tx(v))),
            y: padded(ys.iter().cloned()),
            log_x,
        }
    }

    fn px(&self, v: f64) -> f64 {
        let v = if self.log_x { v.ln() } else { v };
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn padded(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    )
    .unwrap();
    let xr = if f.log_x {
        (f.x.0.exp(), f.x.1.exp())
    } else {
        f.x
    };
    writeln!(
        s,
        r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#,
        y0 + 16.0,
        short(xr.0)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
        y0 + 16.0,
        short(xr.1)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        short(f.y.0)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        y1 + 4.0,
        short(f.y.1)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 20.0,
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn short(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn placeholder(s: &mut String, msg: &str) {
    writeln!(
        s,
        r#"<text class="placeholder" x="{}" y="{}" text-anchor="middle" fill="gray">{}</text>"#,
        W / 2.0,
        H / 2.0,
        escape(msg)
    )
    .unwrap();
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

/// `I_ε` against `ε` on a log axis, with the dashed level `(s/N) Ŝ^{N/ps}`.
pub fn trend_svg(points: &[(f64, f64)], target: Option<f64>) -> String {
    let mut s = open("ground-state energy against eps");
    if points.is_empty() {
        placeholder(&mut s, "no results");
        return close(s);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ys.extend(target);
    let f = Frame::new(&xs, &ys, true);
    axes(&mut s, &f, "eps (log scale)", "I_eps");
    if let Some(t) = target {
        let y = f.py(t);
        writeln!(
            s,
            r#"<line class="target" x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            W - MARGIN
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" fill="firebrick">target {}</text>"#,
            W - MARGIN,
            y - 6.0,
            short(t)
        )
        .unwrap();
    } else {
        placeholder(&mut s, "target unavailable");
    }
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{},{}", f.px(x), f.py(y)))
        .collect();
    writeln!(
        s,
        r#"<polyline points="{}" stroke="steelblue" fill="none"/>"#,
        path.join(" ")
    )
    .unwrap();
    for &(x, y) in points {
        writeln!(
            s,
            r#"<circle class="point" cx="{}" cy="{}" r="4" fill="steelblue"/>"#,
            f.px(x),
            f.py(y)
        )
        .unwrap();
    }
    close(s)
}

/// `ν = |u|^{p*}` on the grid: colored cells in 2D, a polyline in 1D.
pub fn density_svg(grid: &Grid, nu: &[f64], title: &str) -> String {
    let mut s = open(title);
    let max = nu.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        placeholder(&mut s, "zero density");
        return close(s);
    }
    let (lo, hi) = grid.bbox();
    if grid.dim() == 1 {
        let xs: Vec<f64> = (0..grid.n_nodes()).map(|i| grid.point(i)[0]).collect();
        let f = Frame::new(&xs, &[0.0, max], false);
        axes(&mut s, &f, "x", "nu density");
        let path: Vec<String> = xs
            .iter()
            .zip(nu)
            .map(|(&x, &v)| format!("{},{}", f.px(x), f.py(v)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" stroke="darkorange" fill="none"/>"#,
            path.join(" ")
        )
        .unwrap();
        return close(s);
    }
    let f = Frame {
        x: (lo[0], hi[0]),
        y: (lo[1], hi[1]),
        log_x: false,
    };
    axes(&mut s, &f, "x1", "x2");
    let h = grid.h();
    let (cw, ch) = (f.px(lo[0] + h) - f.px(lo[0]), f.py(lo[1]) - f.py(lo[1] + h));
    for (i, &v) in nu.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let x = grid.point(i);
        let t = (v / max).sqrt();
        let c = (255.0 * (1.0 - t)).round() as u8;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{cw}" height="{ch}" fill="rgb(255,{c},{c})"/>"#,
            f.px(x[0]) - cw / 2.0,
            f.py(x[1]) - ch / 2.0
        )
        .unwrap();
    }
    close(s)
}

/// Radial average of `u` over shells of width `h` around the annulus center,
/// with a vertical marker at `2 r1 r2 / (r1 + r2)`.
pub fn radial_svg(grid: &Grid, u: &[f64], title: &str) -> String {
    let mut s = open(title);
    let DomainSpec::Annulus { center, r1, r2 } = grid.spec() else {
        placeholder(&mut s, "radial profile needs an annulus");
        return close(s);
    };
    let h = grid.h();
    let nb = ((r2 - r1) / h).ceil().max(1.0) as usize;
    let mut sum = vec![0.0; nb];
    let mut cnt = vec![0usize; nb];
    for &i in grid.interior() {
        let x = grid.point(i);
        let r = x
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let b = (((r - r1) / h).floor().max(0.0) as usize).min(nb - 1);
        sum[b] += u[i];
        cnt[b] += 1;
    }
    let pts: Vec<(f64, f64)> = (0..nb)
        .filter(|&b| cnt[b] > 0)
        .map(|b| (r1 + (b as f64 + 0.5) * h, sum[b] / cnt[b] as f64))
        .collect();
    let f = Frame {
        x: (*r1, *r2),
        y: padded(pts.iter().map(|p| p.1).chain([0.0])),
        log_x: false,
    };
    axes(&mut s, &f, "|x - center|", "shell average of u");
    let path: Vec<String> = pts
        .iter()
        .map(|&(r, v)| format!("{},{}", f.px(r), f.py(v)))
        .collect();
    writeln!(
        s,
        r#"<polyline points="{}" stroke="seagreen" fill="none"/>"#,
        path.join(" ")
    )
    .unwrap();
    let hm = harmonic_mean_radius(*r1, *r2);
    let x = f.px(hm);
    writeln!(
        s,
        r#"<line id="harmonic-mean" x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}" stroke="firebrick" stroke-dasharray="4 3"/>"#,
        H - MARGIN
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" fill="firebrick">2 r1 r2/(r1+r2) = {}</text>"#,
        x + 4.0,
        MARGIN + 12.0,
        short(hm)
    )
    .unwrap();
    close(s)
}

/// Writes `trend.svg`, `density_eps_{k}.svg` and, for annuli, `radial_eps_{k}.svg`.
pub fn emit_plots(
    dir: &Path,
    grid: &Grid,
    p: f64,
    s: f64,
    states: &[State],
    energies: &[(f64, f64)],
    target: Option<f64>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = vec![];
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        out.push(path);
        Ok(())
    };
    put("trend.svg".into(), trend_svg(energies, target))?;
    let crit = critical_exponent(grid.dim(), p, s)?;
    let annulus = matches!(grid.spec(), DomainSpec::Annulus { .. });
    for (k, st) in states.iter().enumerate() {
        let nu: Vec<f64> = st.u.values().iter().map(|v| v.abs().powf(crit)).collect();
        put(
            format!("density_eps_{k}.svg"),
            density_svg(grid, &nu, &format!("nu density, eps = {}", st.eps)),
        )?;
        if annulus {
            put(
                format!("radial_eps_{k}.svg"),
                radial_svg(
                    grid,
                    st.u.values(),
                    &format!("radial profile, eps = {}", st.eps),
                ),
            )?;
        }
    }
    Ok(out)
}
