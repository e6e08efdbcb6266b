//! Frontier detection, contour clustering, candidate filtering and the
//! blacklist.
//!
//! A frontier cell is a Free belief cell with at least one Unknown cell
//! among its 8 neighbors; positions outside the map count as Unknown.
//! Contours are maximal 8-connected components of frontier cells. The
//! exploration loop only ever sees candidates: contours that pass the size
//! filter, are not blacklisted, and lie within the proximity radius,
//! labeled 0..k-1 in order of increasing distance.

use serde::{Deserialize, Serialize};

use crate::geom::{Cell, Point, Pose};
use crate::grid::{Belief, BeliefMap};

/// A clustered frontier contour. The midpoint is always a member cell, so
/// it stays on the frontier even for C-shaped contours.
#[derive(Clone, Debug)]
pub struct FrontierContour {
    pub cells: Vec<Cell>,
    pub midpoint: Cell,
}

impl FrontierContour {
    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

/// A filtered, labeled navigation target.
#[derive(Clone, Debug)]
pub struct FrontierCandidate {
    pub label: usize,
    pub contour: FrontierContour,
    /// Euclidean distance from the robot to the midpoint, meters.
    pub distance: f64,
    pub midpoint_world: Point,
}

/// Permanently ignored regions: frontiers whose midpoint falls within
/// `radius` of any recorded point are dropped from candidate lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Blacklist {
    points: Vec<Point>,
    radius: f64,
}

impl Blacklist {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0);
        Self {
            points: Vec::new(),
            radius,
        }
    }

    pub fn add(&mut self, point: Point) {
        self.points.push(point);
    }

    pub fn covers(&self, point: Point) -> bool {
        self.points.iter().any(|p| p.distance(point) <= self.radius)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Candidate filter parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FilterParams {
    /// Contours with fewer cells than this are dropped.
    pub min_size: usize,
    /// Only contours whose midpoint lies within this radius qualify, meters.
    pub radius: f64,
    /// At most this many candidates are returned.
    pub k: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            min_size: 20,
            radius: 3.0,
            k: 5,
        }
    }
}

/// All frontier cells of the belief, in row-major order.
pub fn detect_frontier_cells(belief: &BeliefMap) -> Vec<Cell> {
    let (w, h) = (belief.width() as i32, belief.height() as i32);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let cell = Cell::new(x, y);
            if belief.belief(cell) != Belief::Free {
                continue;
            }
            let frontier = cell.neighbors8().iter().any(|&n| {
                !belief.in_bounds(n) || belief.belief(n) == Belief::Unknown
            });
            if frontier {
                out.push(cell);
            }
        }
    }
    out
}

/// Partition frontier cells into maximal 8-connected contours, ordered by
/// descending size with ties broken by the smallest (row, col) member.
pub fn cluster_frontiers(cells: &[Cell]) -> Vec<FrontierContour> {
    let member: std::collections::HashSet<Cell> = cells.iter().copied().collect();
    let mut visited: std::collections::HashSet<Cell> = Default::default();
    let mut contours = Vec::new();
    for &seed in cells {
        if visited.contains(&seed) {
            continue;
        }
        let mut component = Vec::new();
        let mut stack = vec![seed];
        visited.insert(seed);
        while let Some(cell) = stack.pop() {
            component.push(cell);
            for n in cell.neighbors8() {
                if member.contains(&n) && !visited.contains(&n) {
                    visited.insert(n);
                    stack.push(n);
                }
            }
        }
        component.sort();
        let midpoint = frontier_midpoint(&component);
        contours.push(FrontierContour {
            cells: component,
            midpoint,
        });
    }
    contours.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then_with(|| a.cells[0].cmp(&b.cells[0]))
    });
    contours
}

/// The member cell closest to the contour's centroid, ties broken by the
/// smallest (row, col).
pub fn frontier_midpoint(cells: &[Cell]) -> Cell {
    assert!(!cells.is_empty(), "midpoint of an empty contour");
    let n = cells.len() as f64;
    let cx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
    let cy = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
    *cells
        .iter()
        .min_by(|a, b| {
            let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
            let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
            da.total_cmp(&db).then_with(|| a.cmp(b))
        })
        .unwrap()
}

/// Apply the size, blacklist and proximity filters, then label the `k`
/// nearest survivors by ascending distance.
pub fn filter_candidates(
    contours: Vec<FrontierContour>,
    robot: &Pose,
    blacklist: &Blacklist,
    resolution: f64,
    params: &FilterParams,
) -> Vec<FrontierCandidate> {
    let robot_pos = robot.position();
    let mut kept: Vec<(f64, FrontierContour, Point)> = contours
        .into_iter()
        .filter(|c| c.size() >= params.min_size)
        .filter_map(|c| {
            let midpoint_world = Point::new(
                (c.midpoint.x as f64 + 0.5) * resolution,
                (c.midpoint.y as f64 + 0.5) * resolution,
            );
            if blacklist.covers(midpoint_world) {
                return None;
            }
            let distance = robot_pos.distance(midpoint_world);
            (distance <= params.radius).then_some((distance, c, midpoint_world))
        })
        .collect();
    kept.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cells[0].cmp(&b.1.cells[0])));
    kept.truncate(params.k);
    kept.into_iter()
        .enumerate()
        .map(|(label, (distance, contour, midpoint_world))| FrontierCandidate {
            label,
            contour,
            distance,
            midpoint_world,
        })
        .collect()
}

/// Detect, cluster and filter in one step.
pub fn current_candidates(
    belief: &BeliefMap,
    robot: &Pose,
    blacklist: &Blacklist,
    params: &FilterParams,
) -> Vec<FrontierCandidate> {
    let cells = detect_frontier_cells(belief);
    let contours = cluster_frontiers(&cells);
    filter_candidates(contours, robot, blacklist, belief.resolution(), params)
}
