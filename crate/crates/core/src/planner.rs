//! Grid path planning and kinematic path following.
//!
//! Planning is A* over Free belief cells that keep more than the inflation
//! radius of clearance from every Occupied cell, with 8-connected moves and
//! a Euclidean heuristic. Following advances the pose in fixed 0.1 m steps
//! along the waypoint polyline, sensing periodically; when a newly sensed
//! obstacle invalidates the remaining path it replans once before giving
//! up, and the failure feeds the explorer's blacklisting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::explorer::ExplorationState;
use crate::geom::{Cell, Point, Pose};
use crate::grid::{sense, Belief, BeliefMap, GroundTruthMap, SensorConfig};

/// Default clearance kept from obstacles, meters (robot radius surrogate).
pub const DEFAULT_INFLATION: f64 = 0.15;
/// Planning succeeds if any plannable cell within this distance of the goal
/// point is reached; frontier midpoints sit at the edge of known space.
pub const DEFAULT_GOAL_TOLERANCE: f64 = 0.3;
/// Pose step along a path, meters.
pub const STEP_LENGTH: f64 = 0.1;
/// Default distance between sensing cycles while following, meters.
pub const DEFAULT_SENSE_EVERY: f64 = 0.25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("start cell is not free in the belief map")]
    StartBlocked,
    #[error("no path to the goal exists over plannable cells")]
    Unreachable,
    #[error("path invalidated and replanning failed")]
    NavigationFailed,
}

/// An 8-connected cell path expressed as world waypoints (cell centers).
#[derive(Clone, Debug)]
pub struct PlannedPath {
    pub waypoints: Vec<Point>,
    pub cells: Vec<Cell>,
    /// Polyline length, meters.
    pub length: f64,
    /// The goal point the plan was asked for (used when replanning).
    pub goal: Point,
}

impl PlannedPath {
    /// Count of (straight, diagonal) moves; together with the resolution
    /// this is an exact representation of the path cost.
    pub fn step_counts(&self) -> (u32, u32) {
        let mut straight = 0;
        let mut diagonal = 0;
        for pair in self.cells.windows(2) {
            if pair[0].x != pair[1].x && pair[0].y != pair[1].y {
                diagonal += 1;
            } else {
                straight += 1;
            }
        }
        (straight, diagonal)
    }
}

/// Cells a path may use: Free and clear of the inflation zone.
pub fn plannable_mask(belief: &BeliefMap, inflation: f64) -> Vec<bool> {
    let (w, h) = (belief.width(), belief.height());
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            mask[y * w + x] = belief.belief(Cell::new(x as i32, y as i32)) == Belief::Free;
        }
    }
    if inflation <= 0.0 {
        return mask;
    }
    let res = belief.resolution();
    let reach = (inflation / res).ceil() as i32;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let d = ((dx as f64 * res).powi(2) + (dy as f64 * res).powi(2)).sqrt();
            if d <= inflation {
                offsets.push((dx, dy));
            }
        }
    }
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            if belief.belief(Cell::new(x, y)) != Belief::Occupied {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    mask[ny as usize * w + nx as usize] = false;
                }
            }
        }
    }
    mask
}

struct OpenNode {
    f: f64,
    index: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for smallest-f pops and break
        // ties on the cell index for determinism.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// A* from `start` to within `tolerance` of `goal`.
pub fn plan_path(
    belief: &BeliefMap,
    start: Point,
    goal: Point,
    inflation: f64,
    tolerance: f64,
) -> Result<PlannedPath, PlanError> {
    let w = belief.width();
    let h = belief.height();
    let res = belief.resolution();
    let start_cell = belief
        .world_to_grid(start.x, start.y)
        .map_err(|_| PlanError::StartBlocked)?;
    if belief.belief(start_cell) != Belief::Free {
        return Err(PlanError::StartBlocked);
    }

    let mut mask = plannable_mask(belief, inflation);
    // The robot is allowed to stand closer to a wall than the inflation
    // radius (it may have just uncovered one); planning must still be able
    // to leave that cell.
    mask[start_cell.y as usize * w + start_cell.x as usize] = true;

    // Goal set: every plannable cell whose center lies within tolerance.
    let mut goal_flags = vec![false; w * h];
    let mut any_goal = false;
    let reach = (tolerance / res).ceil() as i32 + 1;
    let goal_cell_x = (goal.x / res).floor() as i32;
    let goal_cell_y = (goal.y / res).floor() as i32;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (cx, cy) = (goal_cell_x + dx, goal_cell_y + dy);
            if cx < 0 || cy < 0 || cx as usize >= w || cy as usize >= h {
                continue;
            }
            let center = belief.grid_to_world(Cell::new(cx, cy));
            if center.distance(goal) <= tolerance && mask[cy as usize * w + cx as usize] {
                goal_flags[cy as usize * w + cx as usize] = true;
                any_goal = true;
            }
        }
    }
    if !any_goal {
        return Err(PlanError::Unreachable);
    }

    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    let heuristic = |c: Cell| {
        let center = Point::new((c.x as f64 + 0.5) * res, (c.y as f64 + 0.5) * res);
        (center.distance(goal) - tolerance).max(0.0)
    };

    let mut g = vec![f64::INFINITY; w * h];
    let mut parent: Vec<u32> = vec![u32::MAX; w * h];
    let mut open = BinaryHeap::new();
    g[idx(start_cell)] = 0.0;
    open.push(OpenNode {
        f: heuristic(start_cell),
        index: idx(start_cell),
    });

    let diag = res * std::f64::consts::SQRT_2;
    while let Some(node) = open.pop() {
        let here = Cell::new((node.index % w) as i32, (node.index / w) as i32);
        let g_here = g[node.index];
        if node.f > g_here + heuristic(here) + 1e-12 {
            continue; // stale entry
        }
        if goal_flags[node.index] {
            let mut cells = vec![here];
            let mut at = node.index;
            while parent[at] != u32::MAX {
                at = parent[at] as usize;
                cells.push(Cell::new((at % w) as i32, (at / w) as i32));
            }
            cells.reverse();
            let waypoints: Vec<Point> = cells
                .iter()
                .map(|&c| Point::new((c.x as f64 + 0.5) * res, (c.y as f64 + 0.5) * res))
                .collect();
            let length = waypoints
                .windows(2)
                .map(|p| p[0].distance(p[1]))
                .sum::<f64>();
            return Ok(PlannedPath {
                waypoints,
                cells,
                length,
                goal,
            });
        }
        for n in here.neighbors8() {
            if n.x < 0 || n.y < 0 || n.x as usize >= w || n.y as usize >= h {
                continue;
            }
            let ni = idx(n);
            if !mask[ni] {
                continue;
            }
            let step = if n.x != here.x && n.y != here.y { diag } else { res };
            let cand = g_here + step;
            if cand + 1e-12 < g[ni] {
                g[ni] = cand;
                parent[ni] = node.index as u32;
                open.push(OpenNode {
                    f: cand + heuristic(n),
                    index: ni,
                });
            }
        }
    }
    Err(PlanError::Unreachable)
}

/// Follow configuration shared by the explorer and tests.
#[derive(Clone, Copy, Debug)]
pub struct FollowConfig {
    pub sensor: SensorConfig,
    pub sense_every: f64,
    pub step_length: f64,
    pub inflation: f64,
    pub goal_tolerance: f64,
}

impl Default for FollowConfig {
    fn default() -> Self {
        Self {
            sensor: SensorConfig::default(),
            sense_every: DEFAULT_SENSE_EVERY,
            step_length: STEP_LENGTH,
            inflation: DEFAULT_INFLATION,
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FollowOutcome {
    pub sense_events: usize,
    pub replanned: bool,
}

/// Advance along `path`, sensing every `sense_every` meters and once more
/// at arrival if no cycle landed there. Replans once if newly sensed
/// obstacles invalidate the remainder.
pub fn follow_path(
    gt: &GroundTruthMap,
    belief: &mut BeliefMap,
    state: &mut ExplorationState,
    path: PlannedPath,
    cfg: &FollowConfig,
) -> Result<FollowOutcome, PlanError> {
    let mut outcome = FollowOutcome::default();
    let mut current = path;
    let mut replans = 0usize;

    'path: loop {
        let polyline = Polyline::new(&current.waypoints);
        let mut walked = 0.0;
        let mut sense_marks = 0u64;
        let mut step_index = 0u64;

        loop {
            step_index += 1;
            let s = (step_index as f64 * cfg.step_length).min(polyline.length);
            let arrived = s >= polyline.length;
            if s > walked {
                let (pos, heading) = polyline.at(s);
                state.advance_pose(Pose::new(pos.x, pos.y, heading));
                walked = s;
            }

            let marks = if cfg.sense_every > 0.0 {
                (s / cfg.sense_every).floor() as u64
            } else {
                step_index
            };
            let fire = marks > sense_marks || (arrived && outcome.sense_events == 0);
            if fire {
                sense_marks = marks;
                let scan = sense(gt, state.pose, &cfg.sensor).expect("pose stays on free space");
                let delta = belief.integrate_scan(&scan);
                outcome.sense_events += 1;

                if !arrived && path_invalidated(belief, &current, s, &delta.newly_occupied, cfg) {
                    if replans >= 1 {
                        return Err(PlanError::NavigationFailed);
                    }
                    replans += 1;
                    outcome.replanned = true;
                    let mut replanned = plan_path(
                        belief,
                        state.pose.position(),
                        current.goal,
                        cfg.inflation,
                        cfg.goal_tolerance,
                    )
                    .map_err(|_| PlanError::NavigationFailed)?;
                    // Continue from the exact pose, not the cell center.
                    replanned.waypoints[0] = state.pose.position();
                    current = replanned;
                    continue 'path;
                }
            }
            if arrived {
                return Ok(outcome);
            }
        }
    }
}

/// True when any not-yet-reached waypoint is occupied or newly inflated.
fn path_invalidated(
    belief: &BeliefMap,
    path: &PlannedPath,
    walked: f64,
    newly_occupied: &[Cell],
    cfg: &FollowConfig,
) -> bool {
    if newly_occupied.is_empty() {
        return false;
    }
    let res = belief.resolution();
    let mut arc = 0.0;
    for (i, pair) in path.waypoints.windows(2).enumerate() {
        arc += pair[0].distance(pair[1]);
        if arc + 1e-9 < walked {
            continue;
        }
        let cell = path.cells[i + 1];
        if belief.belief(cell) == Belief::Occupied {
            return true;
        }
        for &occ in newly_occupied {
            let d = (((cell.x - occ.x) as f64 * res).powi(2)
                + ((cell.y - occ.y) as f64 * res).powi(2))
            .sqrt();
            if d <= cfg.inflation {
                return true;
            }
        }
    }
    false
}

/// Scan in place: enough evenly spaced headings to sweep the full circle
/// with overlap, leaving the pose (position and heading) unchanged and
/// recording the location in the state's scan list.
pub fn rotate_scan_360(
    gt: &GroundTruthMap,
    belief: &mut BeliefMap,
    state: &mut ExplorationState,
    sensor: &SensorConfig,
) -> usize {
    let cycles = (std::f64::consts::TAU / sensor.fov).ceil() as usize + 1;
    let spacing = std::f64::consts::TAU / cycles as f64;
    for i in 0..cycles {
        let heading = state.pose.heading + i as f64 * spacing;
        let pose = Pose::new(state.pose.x, state.pose.y, heading);
        let scan = sense(gt, pose, sensor).expect("rotation pose stays on free space");
        belief.integrate_scan(&scan);
    }
    state.scan_locations.push(state.pose.position());
    cycles
}

/// Arc-length addressable polyline.
struct Polyline {
    points: Vec<Point>,
    cumulative: Vec<f64>,
    length: f64,
}

impl Polyline {
    fn new(points: &[Point]) -> Self {
        assert!(!points.is_empty());
        let mut cumulative = vec![0.0];
        for pair in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + pair[0].distance(pair[1]));
        }
        Self {
            points: points.to_vec(),
            length: *cumulative.last().unwrap(),
            cumulative,
        }
    }

    /// Position and tangent heading at arc length `s` (clamped).
    fn at(&self, s: f64) -> (Point, f64) {
        if self.points.len() == 1 || s <= 0.0 {
            let heading = if self.points.len() > 1 {
                segment_heading(self.points[0], self.points[1])
            } else {
                0.0
            };
            return (self.points[0], heading);
        }
        let s = s.min(self.length);
        // Find the segment containing s.
        let mut i = match self
            .cumulative
            .binary_search_by(|c| c.total_cmp(&s))
        {
            Ok(i) => i,
            Err(i) => i,
        };
        if i == 0 {
            i = 1;
        }
        if i >= self.points.len() {
            i = self.points.len() - 1;
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        let seg_len = self.cumulative[i] - self.cumulative[i - 1];
        let t = if seg_len > 0.0 {
            (s - self.cumulative[i - 1]) / seg_len
        } else {
            0.0
        };
        let pos = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        (pos, segment_heading(a, b))
    }
}

fn segment_heading(a: Point, b: Point) -> f64 {
    crate::geom::normalize_angle((b.y - a.y).atan2(b.x - a.x))
}
