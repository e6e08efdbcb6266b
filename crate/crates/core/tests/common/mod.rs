//! Shared fixtures for the integration suites.

#![allow(dead_code)]

use frontier_sim::geom::{Cell, Pose};
use frontier_sim::grid::{Belief, BeliefMap, GroundTruthMap, Terrain};

/// Builds ground-truth maps by carving free rectangles out of solid
/// obstacle, in meters.
pub struct MapBuilder {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Terrain>,
}

impl MapBuilder {
    pub fn solid(width_m: f64, height_m: f64, resolution: f64) -> Self {
        let width = (width_m / resolution).round() as usize;
        let height = (height_m / resolution).round() as usize;
        Self {
            width,
            height,
            resolution,
            cells: vec![Terrain::Obstacle; width * height],
        }
    }

    pub fn carve(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let cx0 = (x0 / self.resolution).round() as usize;
        let cy0 = (y0 / self.resolution).round() as usize;
        let cx1 = ((x1 / self.resolution).round() as usize).min(self.width);
        let cy1 = ((y1 / self.resolution).round() as usize).min(self.height);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                self.cells[y * self.width + x] = Terrain::Traversable;
            }
        }
        self
    }

    pub fn wall(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let cx0 = (x0 / self.resolution).round() as usize;
        let cy0 = (y0 / self.resolution).round() as usize;
        let cx1 = ((x1 / self.resolution).round() as usize).min(self.width);
        let cy1 = ((y1 / self.resolution).round() as usize).min(self.height);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                self.cells[y * self.width + x] = Terrain::Obstacle;
            }
        }
        self
    }

    pub fn build(self, start: Pose) -> GroundTruthMap {
        GroundTruthMap::new(self.width, self.height, self.resolution, self.cells, start)
            .expect("fixture map is valid")
    }
}

/// An open square room with solid walls, start in the middle.
pub fn empty_room(side_m: f64, resolution: f64) -> GroundTruthMap {
    MapBuilder::solid(side_m, side_m, resolution)
        .carve(0.1, 0.1, side_m - 0.1, side_m - 0.1)
        .build(Pose::new(side_m / 2.0, side_m / 2.0, 0.0))
}

/// Belief map from ascii art: '.' free, '#' occupied, ' ' or '?' unknown.
pub fn ascii_belief(rows: &[&str], resolution: f64) -> BeliefMap {
    let height = rows.len();
    let width = rows[0].len();
    let mut cells = Vec::with_capacity(width * height);
    for row in rows {
        assert_eq!(row.len(), width, "ragged ascii fixture");
        for ch in row.chars() {
            cells.push(match ch {
                '.' => Belief::Free,
                '#' => Belief::Occupied,
                _ => Belief::Unknown,
            });
        }
    }
    BeliefMap::from_cells(width, height, resolution, cells)
}

/// Belief cells as a row-major byte grid for the oracle crate
/// (0 unknown, 1 free, 2 occupied).
pub fn belief_bytes(belief: &BeliefMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(belief.width() * belief.height());
    for y in 0..belief.height() as i32 {
        for x in 0..belief.width() as i32 {
            out.push(match belief.belief(Cell::new(x, y)) {
                Belief::Unknown => oracles::UNKNOWN,
                Belief::Free => oracles::FREE,
                Belief::Occupied => oracles::OCCUPIED,
            });
        }
    }
    out
}

/// T-junction fixture: a stem in the crossbar's middle, a short dead-end
/// arm that bends out of sight on the left, and a room at the end of the
/// right arm. From the start both arm frontiers are visible as separate
/// contours, with the dead end strictly nearer.
///
/// ```text
///        bend stub
///        ##  |##########
///  dead  ##  v##########      room
///  end ->#            ##############
///        #   S         .............
///        ##############.............
/// ```
pub fn t_junction() -> (GroundTruthMap, Pose) {
    let start = Pose::new(2.8, 3.0, 0.0);
    let gt = MapBuilder::solid(8.0, 6.0, 0.05)
        // Crossbar corridor.
        .carve(1.0, 2.4, 5.2, 3.6)
        // Left arm bend: upward stub hidden from the junction.
        .carve(1.0, 1.0, 2.2, 3.6)
        // Right room.
        .carve(5.2, 1.4, 7.6, 4.6)
        .build(start);
    (gt, start)
}

/// Trap fixture: the start room's only frontier is behind a slit too
/// narrow to plan through (visible to rays, blocked by inflation).
pub fn slit_trap() -> (GroundTruthMap, Pose) {
    let start = Pose::new(1.6, 1.6, 0.0);
    let gt = MapBuilder::solid(6.0, 3.2, 0.05)
        // Start room.
        .carve(0.4, 0.4, 2.8, 2.8)
        // Slit: 2 cells tall, through the wall at x in [2.8, 3.2].
        .carve(2.8, 1.55, 3.2, 1.65)
        // Pocket behind the slit.
        .carve(3.2, 0.4, 5.6, 2.8)
        .build(start);
    (gt, start)
}
