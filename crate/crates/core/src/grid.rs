//! Ground-truth environments, the robot's belief map, coordinate
//! transforms and the simulated range sensor.
//!
//! Environments are immutable once loaded. The belief map starts fully
//! unknown and only ever gains knowledge: a cell marked Free or Occupied
//! never reverts. The sensor is exact (no noise) and casts supercover rays
//! against the ground truth, so belief contents are always consistent with
//! the environment.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geom::{normalize_angle, supercover_walk, Cell, Point, Pose};

pub mod maze;

/// Per-cell traversability of the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terrain {
    Traversable,
    Obstacle,
    OutOfBounds,
}

/// Robot knowledge about one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Belief {
    Unknown,
    Free,
    Occupied,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("malformed environment file: {0}")]
    MalformedFile(String),
    #[error("environment has no traversable cells")]
    NoTraversableCells,
    #[error("point ({0:.3}, {1:.3}) is outside the map")]
    OutOfBounds(f64, f64),
    #[error("ray origin cell is not traversable")]
    OriginBlocked,
    #[error("infeasible maze parameters: {0}")]
    InfeasibleParameters(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable traversability grid plus the metadata needed to run on it.
#[derive(Clone, Debug)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Terrain>,
    start: Pose,
}

impl GroundTruthMap {
    /// Build a map from raw cells. The start pose must sit on a traversable
    /// cell; map dimensions and resolution must be positive.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<Terrain>,
        start: Pose,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || resolution <= 0.0 {
            return Err(GridError::MalformedFile(
                "dimensions and resolution must be positive".into(),
            ));
        }
        if cells.len() != width * height {
            return Err(GridError::MalformedFile(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if !cells.iter().any(|&c| c == Terrain::Traversable) {
            return Err(GridError::NoTraversableCells);
        }
        let map = Self {
            width,
            height,
            resolution,
            cells,
            start,
        };
        let start_cell = map.world_to_grid(start.x, start.y)?;
        if map.terrain(start_cell) != Terrain::Traversable {
            return Err(GridError::MalformedFile(
                "start pose is not on a traversable cell".into(),
            ));
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    pub fn terrain(&self, cell: Cell) -> Terrain {
        self.cells[cell.y as usize * self.width + cell.x as usize]
    }

    pub fn is_traversable(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && self.terrain(cell) == Terrain::Traversable
    }

    pub fn traversable_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&c| c == Terrain::Traversable)
            .count()
    }

    /// Cell containing a world point.
    pub fn world_to_grid(&self, x: f64, y: f64) -> Result<Cell, GridError> {
        if x < 0.0 || y < 0.0 {
            return Err(GridError::OutOfBounds(x, y));
        }
        let cell = Cell::new(
            (x / self.resolution).floor() as i32,
            (y / self.resolution).floor() as i32,
        );
        if !self.in_bounds(cell) {
            return Err(GridError::OutOfBounds(x, y));
        }
        Ok(cell)
    }

    /// Center of a cell in world coordinates.
    pub fn grid_to_world(&self, cell: Cell) -> Result<Point, GridError> {
        if !self.in_bounds(cell) {
            return Err(GridError::OutOfBounds(cell.x as f64, cell.y as f64));
        }
        Ok(cell_center(cell, self.resolution))
    }

    /// Traversable cells 4-connected to the start cell. This set is the
    /// denominator for coverage metrics.
    pub fn reachable_from_start(&self) -> Vec<bool> {
        let start = self
            .world_to_grid(self.start.x, self.start.y)
            .expect("start validated at construction");
        let mut seen = vec![false; self.width * self.height];
        let mut stack = vec![start];
        seen[start.y as usize * self.width + start.x as usize] = true;
        while let Some(cell) = stack.pop() {
            for n in cell.neighbors4() {
                if self.is_traversable(n) {
                    let i = n.y as usize * self.width + n.x as usize;
                    if !seen[i] {
                        seen[i] = true;
                        stack.push(n);
                    }
                }
            }
        }
        seen
    }

    /// Serialize as PGM + sidecar metadata next to it.
    pub fn save(&self, pgm_path: &Path) -> Result<(), GridError> {
        let mut body = Vec::with_capacity(self.width * self.height);
        for &t in &self.cells {
            body.push(match t {
                Terrain::Traversable => PGM_TRAVERSABLE,
                Terrain::Obstacle => PGM_OBSTACLE,
                Terrain::OutOfBounds => PGM_OUT_OF_BOUNDS,
            });
        }
        write_pgm(pgm_path, self.width, self.height, &body)?;
        let mut meta = String::new();
        let _ = writeln!(meta, "resolution: {}", self.resolution);
        let _ = writeln!(
            meta,
            "start: {} {} {}",
            self.start.x, self.start.y, self.start.heading
        );
        std::fs::write(meta_path(pgm_path), meta)?;
        Ok(())
    }
}

pub const PGM_TRAVERSABLE: u8 = 255;
pub const PGM_OBSTACLE: u8 = 0;
pub const PGM_OUT_OF_BOUNDS: u8 = 128;

fn cell_center(cell: Cell, resolution: f64) -> Point {
    Point::new(
        (cell.x as f64 + 0.5) * resolution,
        (cell.y as f64 + 0.5) * resolution,
    )
}

fn meta_path(pgm_path: &Path) -> std::path::PathBuf {
    pgm_path.with_extension("meta")
}

/// Load an environment: `<name>.pgm` (P5; 255 traversable, 0 obstacle,
/// 128 out-of-bounds) plus `<name>.meta` with `resolution:` and `start:`
/// lines. Row 0 of the image is row 0 of the grid.
pub fn load_environment(path: &Path) -> Result<GroundTruthMap, GridError> {
    let bytes = std::fs::read(path)?;
    let (width, height, body) = parse_pgm(&bytes)?;
    let mut cells = Vec::with_capacity(body.len());
    for (i, &b) in body.iter().enumerate() {
        cells.push(match b {
            PGM_TRAVERSABLE => Terrain::Traversable,
            PGM_OBSTACLE => Terrain::Obstacle,
            PGM_OUT_OF_BOUNDS => Terrain::OutOfBounds,
            other => {
                return Err(GridError::MalformedFile(format!(
                    "pixel {i} has value {other}; expected 255, 0 or 128"
                )))
            }
        });
    }
    let meta = std::fs::read_to_string(meta_path(path))
        .map_err(|e| GridError::MalformedFile(format!("missing sidecar metadata: {e}")))?;
    let (resolution, start) = parse_meta(&meta)?;
    GroundTruthMap::new(width, height, resolution, cells, start)
}

fn parse_meta(text: &str) -> Result<(f64, Pose), GridError> {
    let mut resolution = None;
    let mut start = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("resolution:") {
            resolution = Some(rest.trim().parse::<f64>().map_err(|_| {
                GridError::MalformedFile(format!("bad resolution line: {line}"))
            })?);
        } else if let Some(rest) = line.strip_prefix("start:") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(GridError::MalformedFile(format!("bad start line: {line}")));
            }
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f
                    .parse::<f64>()
                    .map_err(|_| GridError::MalformedFile(format!("bad start line: {line}")))?;
            }
            start = Some(Pose::new(vals[0], vals[1], vals[2]));
        }
    }
    match (resolution, start) {
        (Some(r), Some(s)) if r > 0.0 => Ok((r, s)),
        (Some(_), Some(_)) => Err(GridError::MalformedFile("resolution must be > 0".into())),
        _ => Err(GridError::MalformedFile(
            "metadata must declare resolution and start".into(),
        )),
    }
}

/// Minimal binary PGM (P5) reader. Accepts `#` comments in the header.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8]), GridError> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, GridError> {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let begin = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if begin == pos {
            return Err(GridError::MalformedFile("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[begin..pos]).into_owned())
    };

    if token(bytes)? != "P5" {
        return Err(GridError::MalformedFile("not a binary PGM (P5)".into()));
    }
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| GridError::MalformedFile("bad width".into()))?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| GridError::MalformedFile("bad height".into()))?;
    let maxval: usize = token(bytes)?
        .parse()
        .map_err(|_| GridError::MalformedFile("bad maxval".into()))?;
    if maxval != 255 {
        return Err(GridError::MalformedFile(format!(
            "unsupported maxval {maxval}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(GridError::MalformedFile("zero dimension".into()));
    }
    // Single whitespace byte separates header from raster.
    pos += 1;
    let body = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| GridError::MalformedFile("raster shorter than dimensions".into()))?;
    Ok((width, height, body))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, body: &[u8]) -> Result<(), GridError> {
    assert_eq!(body.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(body);
    std::fs::write(path, out)?;
    Ok(())
}

/// The robot's evolving tri-state occupancy grid.
#[derive(Clone, Debug)]
pub struct BeliefMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Belief>,
    free_count: usize,
    occupied_count: usize,
}

/// Cells that changed during one scan integration.
#[derive(Clone, Debug, Default)]
pub struct ScanDelta {
    pub newly_free: Vec<Cell>,
    pub newly_occupied: Vec<Cell>,
}

impl BeliefMap {
    /// All-unknown belief matching the ground truth dimensions.
    pub fn new_unknown(gt: &GroundTruthMap) -> Self {
        Self {
            width: gt.width,
            height: gt.height,
            resolution: gt.resolution,
            cells: vec![Belief::Unknown; gt.width * gt.height],
            free_count: 0,
            occupied_count: 0,
        }
    }

    /// Build a belief from explicit cells (snapshots, fixtures).
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<Belief>,
    ) -> Self {
        assert_eq!(cells.len(), width * height);
        assert!(resolution > 0.0);
        let free_count = cells.iter().filter(|&&c| c == Belief::Free).count();
        let occupied_count = cells.iter().filter(|&&c| c == Belief::Occupied).count();
        Self {
            width,
            height,
            resolution,
            cells,
            free_count,
            occupied_count,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    pub fn belief(&self, cell: Cell) -> Belief {
        self.cells[cell.y as usize * self.width + cell.x as usize]
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied_count
    }

    pub fn unknown_count(&self) -> usize {
        self.width * self.height - self.free_count - self.occupied_count
    }

    pub fn grid_to_world(&self, cell: Cell) -> Point {
        cell_center(cell, self.resolution)
    }

    pub fn world_to_grid(&self, x: f64, y: f64) -> Result<Cell, GridError> {
        if x < 0.0 || y < 0.0 {
            return Err(GridError::OutOfBounds(x, y));
        }
        let cell = Cell::new(
            (x / self.resolution).floor() as i32,
            (y / self.resolution).floor() as i32,
        );
        if !self.in_bounds(cell) {
            return Err(GridError::OutOfBounds(x, y));
        }
        Ok(cell)
    }

    fn mark(&mut self, cell: Cell, value: Belief, delta: &mut ScanDelta) {
        let i = cell.y as usize * self.width + cell.x as usize;
        let old = self.cells[i];
        if old == value {
            return;
        }
        // The sensor is exact, so knowledge never flips between Free and
        // Occupied; only Unknown cells transition.
        debug_assert_eq!(old, Belief::Unknown, "belief monotonicity violated");
        self.cells[i] = value;
        match value {
            Belief::Free => {
                self.free_count += 1;
                delta.newly_free.push(cell);
            }
            Belief::Occupied => {
                self.occupied_count += 1;
                delta.newly_occupied.push(cell);
            }
            Belief::Unknown => unreachable!(),
        }
    }

    /// Fold a scan into the belief: every traversed cell becomes Free, the
    /// blocking cell of each hitting ray becomes Occupied.
    pub fn integrate_scan(&mut self, scan: &Scan) -> ScanDelta {
        let mut delta = ScanDelta::default();
        for ray in &scan.rays {
            for &cell in &ray.traversed {
                self.mark(cell, Belief::Free, &mut delta);
            }
            if let RayEnd::Blocked(cell) = ray.end {
                self.mark(cell, Belief::Occupied, &mut delta);
            }
        }
        delta
    }

    /// Snapshot as PGM bytes (255 free, 0 occupied, 128 unknown).
    pub fn save_pgm(&self, path: &Path) -> Result<(), GridError> {
        let body: Vec<u8> = self
            .cells
            .iter()
            .map(|b| match b {
                Belief::Free => PGM_TRAVERSABLE,
                Belief::Occupied => PGM_OBSTACLE,
                Belief::Unknown => PGM_OUT_OF_BOUNDS,
            })
            .collect();
        write_pgm(path, self.width, self.height, &body)
    }

    /// Load a snapshot written by [`BeliefMap::save_pgm`].
    pub fn load_pgm(path: &Path, resolution: f64) -> Result<Self, GridError> {
        let bytes = std::fs::read(path)?;
        let (width, height, body) = parse_pgm(&bytes)?;
        let mut cells = Vec::with_capacity(body.len());
        for (i, &b) in body.iter().enumerate() {
            cells.push(match b {
                PGM_TRAVERSABLE => Belief::Free,
                PGM_OBSTACLE => Belief::Occupied,
                PGM_OUT_OF_BOUNDS => Belief::Unknown,
                other => {
                    return Err(GridError::MalformedFile(format!(
                        "pixel {i} has value {other}; expected 255, 0 or 128"
                    )))
                }
            });
        }
        Ok(Self::from_cells(width, height, resolution, cells))
    }
}

/// How a cast ray terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayEnd {
    /// Reached max range without hitting anything.
    MaxRange,
    /// Stopped at the boundary of a non-traversable cell.
    Blocked(Cell),
    /// Left the map array (only possible on maps without a closed border).
    MapEdge,
}

/// One cast ray: world-frame angle, measured range, termination and the
/// traversable cells the ray passed through, ordered by distance.
#[derive(Clone, Debug)]
pub struct Ray {
    pub angle: f64,
    pub range: f64,
    pub end: RayEnd,
    pub traversed: Vec<Cell>,
}

impl Ray {
    pub fn hit(&self) -> bool {
        !matches!(self.end, RayEnd::MaxRange)
    }
}

/// A full sensor sweep from one pose.
#[derive(Clone, Debug)]
pub struct Scan {
    pub pose: Pose,
    pub rays: Vec<Ray>,
}

impl Scan {
    pub fn angles(&self) -> Vec<f64> {
        self.rays.iter().map(|r| r.angle).collect()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.rays.iter().map(|r| r.range).collect()
    }
}

/// Cast a single ray against the ground truth.
///
/// The range is the distance to the first non-traversable cell boundary, or
/// `max_range` with no hit. Traversal is supercover: when the ray crosses a
/// cell corner exactly, both corner-adjacent cells are checked (x-side
/// first), so a diagonal obstacle gap blocks the ray.
pub fn cast_ray(
    gt: &GroundTruthMap,
    origin: Point,
    angle: f64,
    max_range: f64,
) -> Result<Ray, GridError> {
    let origin_cell = gt.world_to_grid(origin.x, origin.y)?;
    if gt.terrain(origin_cell) != Terrain::Traversable {
        return Err(GridError::OriginBlocked);
    }
    let mut traversed = Vec::new();
    for step in supercover_walk(origin, angle, max_range, gt.resolution) {
        if !gt.in_bounds(step.cell) {
            return Ok(Ray {
                angle,
                range: step.enter,
                end: RayEnd::MapEdge,
                traversed,
            });
        }
        if gt.terrain(step.cell) != Terrain::Traversable {
            return Ok(Ray {
                angle,
                range: step.enter,
                end: RayEnd::Blocked(step.cell),
                traversed,
            });
        }
        traversed.push(step.cell);
    }
    Ok(Ray {
        angle,
        range: max_range,
        end: RayEnd::MaxRange,
        traversed,
    })
}

/// Sensor geometry for the planar ray fan.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SensorConfig {
    /// Field of view in radians.
    pub fov: f64,
    /// Rays per sweep, spread uniformly across the field of view.
    pub ray_count: usize,
    /// Range cap in meters.
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_2,
            ray_count: 181,
            max_range: 5.0,
        }
    }
}

/// Sweep a fan of rays across `[heading - fov/2, heading + fov/2]`.
pub fn sense(gt: &GroundTruthMap, pose: Pose, sensor: &SensorConfig) -> Result<Scan, GridError> {
    assert!(sensor.ray_count >= 2, "a fan needs at least two rays");
    let lo = pose.heading - sensor.fov / 2.0;
    let step = sensor.fov / (sensor.ray_count - 1) as f64;
    let mut rays = Vec::with_capacity(sensor.ray_count);
    for i in 0..sensor.ray_count {
        let angle = lo + i as f64 * step;
        rays.push(cast_ray(
            gt,
            pose.position(),
            normalize_angle(angle),
            sensor.max_range,
        )?);
        // Keep the stored angle un-normalized so the fan stays strictly
        // increasing even when it straddles the 0/2pi seam.
        rays.last_mut().unwrap().angle = angle;
    }
    Ok(Scan { pose, rays })
}
