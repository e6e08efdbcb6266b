//! Procedural indoor environments: a BSP partition of rooms separated by
//! thin walls, connected through doorways along a random spanning tree
//! (plus a few extra doors so loops exist).
//!
//! Feature scale matters more than looks here. Rooms are kept small enough
//! that a robot standing at any doorway has the room's other doorways
//! within its candidate-filter radius, and doors are wider than the
//! frontier size filter so doorway frontiers are never discarded.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Pose;

use super::{GridError, GroundTruthMap, Terrain};

/// Default grid resolution, meters per cell.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Wall thickness between rooms, cells.
const WALL_CELLS: usize = 2;
/// Solid border around the map, cells.
const BORDER_CELLS: usize = 2;
/// Minimum room side, cells. Must fit a door plus setbacks.
const MIN_SIDE: usize = 28;
/// Door width range, cells. The lower bound stays above the frontier size
/// filter (20 cells at default resolution) so doorway frontiers survive it.
const DOOR_MIN: usize = 22;
const DOOR_MAX: usize = 32;
/// Clearance kept between a door and the end of the shared wall segment.
const DOOR_SETBACK: usize = 1;
/// Chance of carving a door on a non-spanning-tree adjacency.
const EXTRA_DOOR_PROB: f64 = 0.35;

#[derive(Clone, Copy, Debug)]
struct Room {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
}

impl Room {
    fn max_side(&self) -> usize {
        self.w.max(self.h)
    }
}

/// Generate a deterministic maze. All traversable cells form one
/// 4-connected component and every doorway is at least `DOOR_MIN` cells
/// wide.
pub fn generate_maze(
    seed: u64,
    width_m: f64,
    height_m: f64,
    room_count: usize,
) -> Result<GroundTruthMap, GridError> {
    if width_m < 4.0 || height_m < 4.0 {
        return Err(GridError::InfeasibleParameters(
            "maps smaller than 4 m per side are not supported".into(),
        ));
    }
    if room_count < 1 {
        return Err(GridError::InfeasibleParameters(
            "room_count must be at least 1".into(),
        ));
    }
    let resolution = DEFAULT_RESOLUTION;
    let width = (width_m / resolution).round() as usize;
    let height = (height_m / resolution).round() as usize;
    let interior = Room {
        x0: BORDER_CELLS,
        y0: BORDER_CELLS,
        w: width - 2 * BORDER_CELLS,
        h: height - 2 * BORDER_CELLS,
    };
    if interior.w < MIN_SIDE || interior.h < MIN_SIDE {
        return Err(GridError::InfeasibleParameters(
            "interior too small for a single room".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rooms = split_rooms(interior, room_count, &mut rng)?;

    let mut cells = vec![Terrain::Obstacle; width * height];
    let carve = |x0: usize, y0: usize, w: usize, h: usize, cells: &mut Vec<Terrain>| {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                cells[y * width + x] = Terrain::Traversable;
            }
        }
    };
    for r in &rooms {
        carve(r.x0, r.y0, r.w, r.h, &mut cells);
    }

    // Adjacency graph: rooms separated by exactly one wall strip with
    // enough overlap for a door.
    let mut edges = Vec::new();
    for i in 0..rooms.len() {
        for j in i + 1..rooms.len() {
            if let Some(edge) = adjacency(&rooms[i], &rooms[j], i, j) {
                edges.push(edge);
            }
        }
    }
    edges.shuffle(&mut rng);

    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut doors = Vec::new();
    for e in &edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra] = rb;
            doors.push(*e);
        } else if rng.random_bool(EXTRA_DOOR_PROB) {
            doors.push(*e);
        }
    }
    let root = find(&mut parent, 0);
    if (0..rooms.len()).any(|i| find(&mut parent, i) != root) {
        return Err(GridError::InfeasibleParameters(
            "room layout cannot be fully connected with the required door width".into(),
        ));
    }

    for door in &doors {
        let span = door.hi - door.lo - 2 * DOOR_SETBACK;
        let width_cells = rng.random_range(DOOR_MIN..=DOOR_MAX.min(span));
        let offset = rng.random_range(0..=span - width_cells);
        let start = door.lo + DOOR_SETBACK + offset;
        match door.orientation {
            Orientation::Vertical => {
                carve(door.wall_at, start, WALL_CELLS, width_cells, &mut cells)
            }
            Orientation::Horizontal => {
                carve(start, door.wall_at, width_cells, WALL_CELLS, &mut cells)
            }
        }
    }

    // Start in the middle of the largest room.
    let largest = rooms
        .iter()
        .max_by_key(|r| (r.w * r.h, std::cmp::Reverse((r.y0, r.x0))))
        .unwrap();
    let start = Pose::new(
        (largest.x0 + largest.w / 2) as f64 * resolution + resolution / 2.0,
        (largest.y0 + largest.h / 2) as f64 * resolution + resolution / 2.0,
        0.0,
    );

    GroundTruthMap::new(width, height, resolution, cells, start)
}

fn split_rooms(
    interior: Room,
    room_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Room>, GridError> {
    let mut rooms = vec![interior];
    while rooms.len() < room_count {
        // Split the room with the longest side; splitting needs space for
        // two minimum rooms plus the wall between them.
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(rooms[i].max_side()));
        let candidate = order
            .into_iter()
            .find(|&i| rooms[i].max_side() >= 2 * MIN_SIDE + WALL_CELLS);
        let Some(i) = candidate else {
            return Err(GridError::InfeasibleParameters(format!(
                "cannot fit {room_count} rooms",
            )));
        };
        let room = rooms[i];
        let horizontal_cut = room.h >= room.w;
        let side = if horizontal_cut { room.h } else { room.w };
        let first = rng.random_range(MIN_SIDE..=side - MIN_SIDE - WALL_CELLS);
        let (a, b) = if horizontal_cut {
            (
                Room { h: first, ..room },
                Room {
                    y0: room.y0 + first + WALL_CELLS,
                    h: room.h - first - WALL_CELLS,
                    ..room
                },
            )
        } else {
            (
                Room { w: first, ..room },
                Room {
                    x0: room.x0 + first + WALL_CELLS,
                    w: room.w - first - WALL_CELLS,
                    ..room
                },
            )
        };
        rooms[i] = a;
        rooms.push(b);
    }
    Ok(rooms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Orientation {
    /// Door in a vertical wall (rooms side by side).
    Vertical,
    /// Door in a horizontal wall (rooms stacked).
    Horizontal,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    b: usize,
    orientation: Orientation,
    /// First wall-strip coordinate along the crossing axis.
    wall_at: usize,
    /// Overlap interval along the wall, exclusive of `hi`.
    lo: usize,
    hi: usize,
}

fn adjacency(a: &Room, b: &Room, ia: usize, ib: usize) -> Option<Edge> {
    let need = DOOR_MIN + 2 * DOOR_SETBACK;
    // Side by side, a left of b or b left of a.
    for (l, r, il, ir) in [(a, b, ia, ib), (b, a, ib, ia)] {
        if l.x0 + l.w + WALL_CELLS == r.x0 {
            let lo = l.y0.max(r.y0);
            let hi = (l.y0 + l.h).min(r.y0 + r.h);
            if hi > lo && hi - lo >= need {
                return Some(Edge {
                    a: il,
                    b: ir,
                    orientation: Orientation::Vertical,
                    wall_at: l.x0 + l.w,
                    lo,
                    hi,
                });
            }
        }
        if l.y0 + l.h + WALL_CELLS == r.y0 {
            let lo = l.x0.max(r.x0);
            let hi = (l.x0 + l.w).min(r.x0 + r.w);
            if hi > lo && hi - lo >= need {
                return Some(Edge {
                    a: il,
                    b: ir,
                    orientation: Orientation::Horizontal,
                    wall_at: l.y0 + l.h,
                    lo,
                    hi,
                });
            }
        }
    }
    None
}
