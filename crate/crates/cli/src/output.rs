//! Trajectory CSV/SVG and JSON writers. Every file is written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use posidyn::dde::Trajectory;
use serde::Serialize;
use tempfile::NamedTempFile;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Header `t,x1,...,xn`, then one row per mesh point including the
/// history interval.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t");
    for i in 1..=traj.dim() {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (t, x) in traj.iter() {
        let _ = write!(s, "{t:.16e}");
        for v in x {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    s
}

/// Parses [`trajectory_csv`] output into `(times, rows)`.
pub fn read_csv(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let cols = header.split(',').count();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("row {}: {e}", k + 1))?;
        if vals.len() != cols {
            return Err(format!("row {}: {} fields, header has {cols}", k + 1, vals.len()));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((times, rows))
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line plot of every component against `t`.
pub fn trajectory_svg(traj: &Trajectory, title: &str) -> String {
    let times = traj.times();
    let t0 = times.first().copied().unwrap_or(0.0);
    let t1 = times.last().copied().unwrap_or(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, x) in traj.iter() {
        for &v in x.iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| MARGIN + (t - t0) / span_t * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let t = t0 + frac * span_t;
        let v = lo + frac * (hi - lo);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(t), y0 + 18.0, tick(t));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, py(v) + 4.0, tick(v));
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{0:.1}" x2="{x1}" y2="{0:.1}" stroke="#ddd"/>"##, py(v));
    }
    if t0 < 0.0 && t1 > 0.0 {
        let _ = writeln!(s, r##"<line x1="{0:.1}" y1="{y0}" x2="{0:.1}" y2="{y1}" stroke="#999" stroke-dasharray="4 3"/>"##, px(0.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, WIDTH / 2.0, HEIGHT - 16.0);

    for i in 0..traj.dim() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        for (t, x) in traj.iter() {
            if x[i].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", px(t), py(x[i]));
            }
        }
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.trim_end());
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, x1 - 50.0, x1 - 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">x{}</text>"#, x1 - 25.0, ly + 4.0, i + 1);
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use posidyn::dde::{integrate, IntegratorConfig};
    use posidyn::model::{zero_field, DelayMatrix, FnField, HistorySegment, SystemDef};

    fn decay() -> Trajectory {
        let sys = SystemDef::new(
            FnField::shared(2, |x, out| {
                out[0] = -x[0];
                out[1] = -2.0 * x[1];
            }),
            zero_field(2),
            DelayMatrix::constant(2, 1.0).unwrap(),
        )
        .unwrap();
        integrate(&sys, &HistorySegment::constant(vec![1.0, 2.0], 1.0), &IntegratorConfig::new(0.1, 2.0)).unwrap()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let traj = decay();
        let text = trajectory_csv(&traj);
        assert!(text.starts_with("t,x1,x2\n"));
        assert!(!text.contains('\r'));
        let (times, rows) = read_csv(&text).unwrap();
        assert_eq!(times, traj.times());
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row.as_slice(), traj.state(k));
        }
        assert_eq!(times[0], -1.0);
    }

    #[test]
    fn svg_has_one_polyline_per_component() {
        let svg = trajectory_svg(&decay(), "a < b");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains(r#"width="800""#));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
