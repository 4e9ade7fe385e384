//! Minimal log-log line plots of mean error against one swept variable.

use std::fmt::Write as _;
use std::path::Path;

use super::{ErrorReport, GridRow};
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

/// Plots `mean_err` against `variable` (`n`, `m`, `d` or `epsilon`), one
/// line per combination of the other grid values. Non-positive points are
/// dropped since both axes are logarithmic.
pub fn write_svg(report: &ErrorReport, variable: &str, path: &Path) -> Result<()> {
    let key: fn(&GridRow) -> f64 = match variable {
        "n" => |r| r.n as f64,
        "m" => |r| r.m as f64,
        "d" => |r| r.d as f64,
        "epsilon" => |r| r.epsilon,
        other => return Err(Error::InvalidParameter(format!("cannot plot against '{other}'"))),
    };
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in report.rows.iter().filter(|r| r.error.is_none()) {
        let (x, y) = (key(r), r.mean_err);
        if x <= 0.0 || y <= 0.0 || !y.is_finite() {
            continue;
        }
        let label = format!("n={} m={} d={} eps={}", r.n, r.m, r.d, r.epsilon).replace(&format!("{variable}={x} "), "");
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((x.log10(), y.log10())),
            None => series.push((label, vec![(x.log10(), y.log10())])),
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        t = PAD,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">log10 {variable}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log10 mean error</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{v:.2}</text>"#,
            sx(v),
            H - PAD + 15.0
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            PAD - 5.0,
            sy(v)
        );
    }
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    for (k, (label, pts)) in series.iter().enumerate() {
        let colour = colours[k % colours.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for (x, y) in pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                sx(*x),
                sy(*y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{label}</text>"#,
            W - PAD - 180.0,
            PAD + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
