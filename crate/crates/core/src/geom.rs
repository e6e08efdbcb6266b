//! World/grid geometry primitives shared across the simulator.

use serde::{Deserialize, Serialize};

/// A grid cell index. `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// All 8 neighbors, in deterministic row-major order.
    pub fn neighbors8(self) -> [Cell; 8] {
        let (x, y) = (self.x, self.y);
        [
            Cell::new(x - 1, y - 1),
            Cell::new(x, y - 1),
            Cell::new(x + 1, y - 1),
            Cell::new(x - 1, y),
            Cell::new(x + 1, y),
            Cell::new(x - 1, y + 1),
            Cell::new(x, y + 1),
            Cell::new(x + 1, y + 1),
        ]
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        let (x, y) = (self.x, self.y);
        [
            Cell::new(x, y - 1),
            Cell::new(x - 1, y),
            Cell::new(x + 1, y),
            Cell::new(x, y + 1),
        ]
    }
}

// Tie-breaking rules throughout the crate compare cells by (row, col).
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A point in the world frame, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Robot pose: position in meters plus heading in radians, `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Wrap an angle into `[0, 2pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = a.rem_euclid(two_pi);
    if r >= two_pi {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// One visited cell of a grid walk, tagged with the distance along the
/// segment at which the walk enters (or touches) it.
#[derive(Clone, Copy, Debug)]
pub struct WalkStep {
    pub cell: Cell,
    pub enter: f64,
}

/// Supercover traversal of the ray from `from` at `angle` for `length`
/// meters. See [`walk_segment`].
pub fn supercover_walk(from: Point, angle: f64, length: f64, resolution: f64) -> Vec<WalkStep> {
    let to = Point::new(
        from.x + angle.cos() * length,
        from.y + angle.sin() * length,
    );
    walk_segment(from, to, resolution)
}

/// Supercover traversal of the segment `from -> to`: every cell the
/// segment touches, ordered by entry distance (cells entered exactly at
/// the far endpoint are excluded). An exact corner crossing emits both
/// side cells (x-side first) before the diagonal cell, which is what
/// prevents rays from slipping through diagonal gaps; a crossing that
/// merely grazes a corner still steps through one of the side cells, so
/// nothing ever slips a diagonal obstacle gap.
pub fn walk_segment(from: Point, to: Point, resolution: f64) -> Vec<WalkStep> {
    let length = from.distance(to);
    let (dir_x, dir_y) = if length > 0.0 {
        ((to.x - from.x) / length, (to.y - from.y) / length)
    } else {
        (0.0, 0.0)
    };
    let mut out = Vec::new();

    let mut ix = (from.x / resolution).floor() as i32;
    let mut iy = (from.y / resolution).floor() as i32;
    out.push(WalkStep {
        cell: Cell::new(ix, iy),
        enter: 0.0,
    });

    let step_x: i32 = if dir_x > 0.0 {
        1
    } else if dir_x < 0.0 {
        -1
    } else {
        0
    };
    let step_y: i32 = if dir_y > 0.0 {
        1
    } else if dir_y < 0.0 {
        -1
    } else {
        0
    };

    let next_boundary = |i: i32, step: i32| -> f64 {
        let edge = if step > 0 { i + 1 } else { i };
        edge as f64 * resolution
    };
    let mut t_max_x = if step_x == 0 {
        f64::INFINITY
    } else {
        (next_boundary(ix, step_x) - from.x) / dir_x
    };
    let mut t_max_y = if step_y == 0 {
        f64::INFINITY
    } else {
        (next_boundary(iy, step_y) - from.y) / dir_y
    };
    let t_delta_x = if step_x == 0 {
        f64::INFINITY
    } else {
        resolution / dir_x.abs()
    };
    let t_delta_y = if step_y == 0 {
        f64::INFINITY
    } else {
        resolution / dir_y.abs()
    };

    loop {
        if t_max_x < t_max_y {
            if t_max_x >= length {
                break;
            }
            ix += step_x;
            out.push(WalkStep {
                cell: Cell::new(ix, iy),
                enter: t_max_x,
            });
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x {
            if t_max_y >= length {
                break;
            }
            iy += step_y;
            out.push(WalkStep {
                cell: Cell::new(ix, iy),
                enter: t_max_y,
            });
            t_max_y += t_delta_y;
        } else {
            // Exact corner crossing (or both infinite: done).
            if !t_max_x.is_finite() || t_max_x >= length {
                break;
            }
            let t = t_max_x;
            out.push(WalkStep {
                cell: Cell::new(ix + step_x, iy),
                enter: t,
            });
            out.push(WalkStep {
                cell: Cell::new(ix, iy + step_y),
                enter: t,
            });
            ix += step_x;
            iy += step_y;
            out.push(WalkStep {
                cell: Cell::new(ix, iy),
                enter: t,
            });
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
    }
    out
}
