//! Privileged coverage evaluation, trajectory resampling, revisit-count
//! histograms and comparison reports.
//!
//! Coverage here is deliberately not the sensing model: each trajectory
//! point reveals every traversable cell within range (optionally inside a
//! field-of-view wedge) with no occlusion, an idealized measure usable for
//! any method's trajectory, including externally captured ones. The
//! denominator is the traversable space reachable from the start, so
//! out-of-bounds and sealed-off pockets never dilute percentages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geom::Point;
use crate::grid::GroundTruthMap;

/// Default reveal radius, meters.
pub const DEFAULT_REVEAL_RANGE: f64 = 5.0;
/// Default resample spacing, meters.
pub const DEFAULT_SPACING: f64 = 0.10;
/// Default revisit radius, meters.
pub const DEFAULT_REVISIT_RADIUS: f64 = 0.05;
/// Default arc-length exclusion window for revisit counting, meters.
pub const DEFAULT_EXCLUSION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory point ({0:.3}, {1:.3}) is outside the map")]
    OutOfBoundsPoint(f64, f64),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("line {0}: malformed row: {1}")]
    MalformedRow(usize, String),
    #[error("file has no trajectory rows")]
    EmptyFile,
    #[error("path has zero length")]
    DegeneratePath,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exploration fraction against cumulative distance.
#[derive(Clone, Debug)]
pub struct CoverageSeries {
    /// (cumulative distance m, explored fraction) per trajectory point;
    /// distances strictly increase, fractions never decrease.
    pub samples: Vec<(f64, f64)>,
    pub fov: f64,
    pub reveal_range: f64,
}

impl CoverageSeries {
    pub fn final_fraction(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.1)
    }

    pub fn final_distance(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }
}

/// Where headings for the FOV wedge come from.
#[derive(Clone, Copy, Debug)]
pub enum HeadingSource {
    /// Finite-difference direction of the trajectory itself.
    FiniteDifference,
}

/// Reveal traversable cells around every trajectory point and accumulate
/// the explored fraction. With `fov >= 2*pi` the wedge test is skipped;
/// occlusion is never applied.
pub fn reveal_coverage(
    gt: &GroundTruthMap,
    trajectory: &[Point],
    fov: f64,
    range: f64,
    _heading: HeadingSource,
) -> Result<CoverageSeries, EvalError> {
    if trajectory.is_empty() {
        return Err(EvalError::EmptyTrajectory);
    }
    let res = gt.resolution();
    let (w, h) = (gt.width(), gt.height());
    let reachable = gt.reachable_from_start();
    let denominator = reachable.iter().filter(|&&r| r).count().max(1) as f64;
    let full_circle = fov >= std::f64::consts::TAU - 1e-12;

    let mut revealed = vec![false; w * h];
    let mut revealed_count = 0usize;
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(trajectory.len());
    let mut cum = 0.0;

    for (i, &p) in trajectory.iter().enumerate() {
        if p.x < 0.0 || p.y < 0.0 || p.x >= w as f64 * res || p.y >= h as f64 * res {
            return Err(EvalError::OutOfBoundsPoint(p.x, p.y));
        }
        if i > 0 {
            cum += trajectory[i - 1].distance(p);
        }
        let heading = finite_difference_heading(trajectory, i);

        let reach = (range / res).ceil() as i32;
        let (cx, cy) = ((p.x / res).floor() as i32, (p.y / res).floor() as i32);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (gx, gy) = (cx + dx, cy + dy);
                if gx < 0 || gy < 0 || gx as usize >= w || gy as usize >= h {
                    continue;
                }
                let idx = gy as usize * w + gx as usize;
                if revealed[idx] || !reachable[idx] {
                    continue;
                }
                let center = Point::new((gx as f64 + 0.5) * res, (gy as f64 + 0.5) * res);
                if center.distance(p) > range {
                    continue;
                }
                if !full_circle {
                    let bearing = (center.y - p.y).atan2(center.x - p.x);
                    if crate::geom::angle_diff(bearing, heading) > fov / 2.0 {
                        continue;
                    }
                }
                revealed[idx] = true;
                revealed_count += 1;
            }
        }

        let fraction = revealed_count as f64 / denominator;
        match samples.last_mut() {
            // A stationary point adds no distance; fold it into the
            // previous sample so distances stay strictly increasing.
            Some(last) if cum <= last.0 => last.1 = fraction,
            _ => samples.push((cum, fraction)),
        }
    }
    Ok(CoverageSeries {
        samples,
        fov,
        reveal_range: range,
    })
}

fn finite_difference_heading(trajectory: &[Point], i: usize) -> f64 {
    let (a, b) = if i + 1 < trajectory.len() {
        (trajectory[i], trajectory[i + 1])
    } else if i > 0 {
        (trajectory[i - 1], trajectory[i])
    } else {
        return 0.0;
    };
    if a.distance(b) == 0.0 {
        return 0.0;
    }
    (b.y - a.y).atan2(b.x - a.x)
}

/// A resampled trajectory point with its arc-length position along the
/// original polyline.
#[derive(Clone, Copy, Debug)]
pub struct ResampledPoint {
    pub pos: Point,
    pub arc: f64,
}

/// Arc-length uniform resampling: points at multiples of `spacing` from
/// arc zero, plus the last original point if it sits more than half a
/// spacing past the final sample.
pub fn resample_path(trajectory: &[Point], spacing: f64) -> Result<Vec<ResampledPoint>, EvalError> {
    if trajectory.len() < 2 {
        return Err(EvalError::DegeneratePath);
    }
    let mut cumulative = vec![0.0];
    for pair in trajectory.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + pair[0].distance(pair[1]));
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return Err(EvalError::DegeneratePath);
    }

    let count = ((total + 1e-9) / spacing).floor() as usize;
    let mut out = Vec::with_capacity(count + 2);
    let mut seg = 0usize;
    for k in 0..=count {
        let s = (k as f64 * spacing).min(total);
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < s {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            (s - cumulative[seg]) / seg_len
        } else {
            0.0
        };
        let (a, b) = (trajectory[seg], trajectory[seg + 1]);
        out.push(ResampledPoint {
            pos: Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)),
            arc: s,
        });
    }
    let last_arc = out.last().unwrap().arc;
    if total - last_arc > spacing / 2.0 {
        out.push(ResampledPoint {
            pos: *trajectory.last().unwrap(),
            arc: total,
        });
    }
    Ok(out)
}

/// Revisit counts per resampled point: zero for fresh ground, else one
/// plus the maximum count among earlier points within `radius` whose
/// arc-length separation exceeds `exclusion`. Bucketed spatial lookup; the
/// literal O(n^2) definition lives in the test oracle.
pub fn revisit_counts(points: &[ResampledPoint], radius: f64, exclusion: f64) -> Vec<u32> {
    let mut counts = vec![0u32; points.len()];
    let bucket = |p: Point| -> (i64, i64) {
        (
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
        )
    };
    let mut index: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..points.len() {
        let (bx, by) = bucket(points[i].pos);
        let mut best: Option<u32> = None;
        for nx in bx - 1..=bx + 1 {
            for ny in by - 1..=by + 1 {
                let Some(members) = index.get(&(nx, ny)) else {
                    continue;
                };
                for &j in members {
                    if points[i].pos.distance(points[j].pos) <= radius
                        && points[i].arc - points[j].arc > exclusion
                    {
                        best = Some(best.map_or(counts[j], |b| b.max(counts[j])));
                    }
                }
            }
        }
        counts[i] = best.map_or(0, |b| b + 1);
        index.entry((bx, by)).or_default().push(i);
    }
    counts
}

/// Frequency table of revisit counts with zero-filled bins up to the
/// maximum observed count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisitHistogram {
    pub counts: BTreeMap<u32, usize>,
}

pub fn histogram(counts: &[u32]) -> RevisitHistogram {
    let mut bins = BTreeMap::new();
    if let Some(&max) = counts.iter().max() {
        for k in 0..=max {
            bins.insert(k, 0);
        }
        for &c in counts {
            *bins.get_mut(&c).unwrap() += 1;
        }
    }
    RevisitHistogram { counts: bins }
}

/// Read an external trajectory CSV. Rows may be `(x, y)`, `(t, x, y)` or
/// the exporter's `(step, x, y, cumulative)`; a leading non-numeric header
/// row is skipped. A `.meta` sidecar may supply a rigid transform line
/// `transform: dx dy dtheta`.
pub fn ingest_external_trajectory(path: &Path) -> Result<Vec<Point>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Err(_) if lineno == 0 => continue, // header
            Err(_) => {
                return Err(EvalError::MalformedRow(lineno + 1, line.to_string()));
            }
            Ok(vals) => {
                let (x, y) = match vals.len() {
                    2 => (vals[0], vals[1]),
                    3 => (vals[1], vals[2]),
                    4 => (vals[1], vals[2]),
                    _ => {
                        return Err(EvalError::MalformedRow(lineno + 1, line.to_string()));
                    }
                };
                points.push(Point::new(x, y));
            }
        }
    }
    if points.is_empty() {
        return Err(EvalError::EmptyFile);
    }
    if let Some(tf) = read_transform(&path.with_extension("meta"))? {
        let (dx, dy, dth) = tf;
        for p in &mut points {
            let (x, y) = (p.x, p.y);
            p.x = x * dth.cos() - y * dth.sin() + dx;
            p.y = x * dth.sin() + y * dth.cos() + dy;
        }
    }
    Ok(points)
}

fn read_transform(path: &Path) -> Result<Option<(f64, f64, f64)>, EvalError> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(None);
    };
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("transform:") {
            let vals: Vec<f64> = rest
                .split_whitespace()
                .filter_map(|f| f.parse().ok())
                .collect();
            if vals.len() == 3 {
                return Ok(Some((vals[0], vals[1], vals[2])));
            }
        }
    }
    Ok(None)
}

/// One method's trajectory on one environment, ready for reporting.
pub struct ReportEntry<'a> {
    pub environment: String,
    pub method: String,
    pub gt: &'a GroundTruthMap,
    pub trajectory: Vec<Point>,
}

/// A reference row copied verbatim into the summary table, e.g. published
/// numbers from elsewhere.
#[derive(Clone, Debug)]
pub struct ReferenceRow {
    pub environment: String,
    pub method: String,
    pub distance_m: String,
    pub exploration_pct: String,
}

/// Report parameters.
#[derive(Clone, Copy, Debug)]
pub struct ReportParams {
    pub fov: f64,
    pub range: f64,
    pub spacing: f64,
    pub revisit_radius: f64,
    pub exclusion: f64,
    pub plots: bool,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::TAU,
            range: DEFAULT_REVEAL_RANGE,
            spacing: DEFAULT_SPACING,
            revisit_radius: DEFAULT_REVISIT_RADIUS,
            exclusion: DEFAULT_EXCLUSION,
            plots: false,
        }
    }
}

/// Emit summary.csv, per-entry curve and histogram CSVs and optional plot
/// PNGs into `out_dir`. Returns the written paths.
pub fn compare_report(
    entries: &[ReportEntry],
    references: &[ReferenceRow],
    out_dir: &Path,
    params: &ReportParams,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let fov_deg = (params.fov.to_degrees()).round() as i64;
    let tag = if fov_deg == 360 {
        String::new()
    } else {
        format!("_fov{fov_deg}")
    };

    let mut summary = String::from("environment,method,distance_m,exploration_pct\n");
    for entry in entries {
        let series = reveal_coverage(
            entry.gt,
            &entry.trajectory,
            params.fov,
            params.range,
            HeadingSource::FiniteDifference,
        )?;
        let _ = writeln!(
            summary,
            "{},{},{:.2},{:.2}",
            entry.environment,
            entry.method,
            series.final_distance(),
            series.final_fraction() * 100.0
        );

        let mut curve = String::from("distance_m,exploration_pct\n");
        for (d, f) in &series.samples {
            let _ = writeln!(curve, "{d:.4},{:.4}", f * 100.0);
        }
        let curve_path = out_dir.join(format!(
            "curve_{}_{}{tag}.csv",
            sanitize(&entry.environment),
            sanitize(&entry.method)
        ));
        std::fs::write(&curve_path, curve)?;
        written.push(curve_path);

        let resampled = resample_path(&entry.trajectory, params.spacing);
        let hist = match resampled {
            Ok(points) => {
                let counts = revisit_counts(&points, params.revisit_radius, params.exclusion);
                histogram(&counts)
            }
            Err(EvalError::DegeneratePath) => histogram(&[]),
            Err(e) => return Err(e),
        };
        let mut hist_csv = String::from("revisits,frequency\n");
        for (k, n) in &hist.counts {
            let _ = writeln!(hist_csv, "{k},{n}");
        }
        let hist_path = out_dir.join(format!(
            "hist_{}_{}{tag}.csv",
            sanitize(&entry.environment),
            sanitize(&entry.method)
        ));
        std::fs::write(&hist_path, hist_csv)?;
        written.push(hist_path);

        if params.plots {
            let plot_path = out_dir.join(format!(
                "curve_{}_{}{tag}.png",
                sanitize(&entry.environment),
                sanitize(&entry.method)
            ));
            plot_curve(&series, &plot_path)?;
            written.push(plot_path);
        }
    }
    for r in references {
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            r.environment, r.method, r.distance_m, r.exploration_pct
        );
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary)?;
    written.insert(0, summary_path);
    Ok(written)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Minimal distance/percentage line plot.
fn plot_curve(series: &CoverageSeries, path: &Path) -> Result<(), EvalError> {
    use image::{Rgb, RgbImage};
    let (w, h) = (640u32, 400u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let margin = 40i64;
    let max_d = series.final_distance().max(1e-9);
    for x in margin..w as i64 - margin {
        img.put_pixel(x as u32, (h as i64 - margin) as u32, Rgb([0, 0, 0]));
    }
    for y in margin..h as i64 - margin {
        img.put_pixel(margin as u32, y as u32, Rgb([0, 0, 0]));
    }
    let mut prev: Option<(i64, i64)> = None;
    for &(d, f) in &series.samples {
        let x = margin + ((w as i64 - 2 * margin) as f64 * d / max_d) as i64;
        let y = h as i64 - margin - ((h as i64 - 2 * margin) as f64 * f) as i64;
        if let Some((px, py)) = prev {
            // Dense polyline: step between the two samples.
            let steps = (x - px).abs().max((y - py).abs()).max(1);
            for s in 0..=steps {
                let ix = px + (x - px) * s / steps;
                let iy = py + (y - py) * s / steps;
                if ix >= 0 && iy >= 0 && (ix as u32) < w && (iy as u32) < h {
                    img.put_pixel(ix as u32, iy as u32, Rgb([0, 64, 255]));
                }
            }
        }
        prev = Some((x, y));
    }
    img.save(path)
        .map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}
