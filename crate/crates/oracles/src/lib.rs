//! Brute-force reference implementations used as independent test oracles.
//!
//! Everything in this crate favors literal definitions over efficiency and
//! works on primitive types only. It deliberately does not depend on the
//! main library: tests compare both sides against each other, so the two
//! code paths must share nothing.

use std::collections::BTreeSet;

/// Cell states for belief-grid oracles.
pub const UNKNOWN: u8 = 0;
pub const FREE: u8 = 1;
pub const OCCUPIED: u8 = 2;

/// Every grid cell touched by the closed segment from `a` to `b`.
///
/// Coordinates are in quarter-cell units: a cell spans 4 units and cell
/// `(cx, cy)` covers `[4cx, 4cx+4] x [4cy, 4cy+4]`. Integer inputs keep the
/// sweep exact, so corner crossings and boundary landings are decided
/// without floating-point error. A point exactly on a boundary touches the
/// cells on both sides.
pub fn supercover_cells(a: (i64, i64), b: (i64, i64)) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    let (ax, ay) = (a.0 as i128, a.1 as i128);
    let (bx, by) = (b.0 as i128, b.1 as i128);

    let x_min = ax.min(bx);
    let x_max = ax.max(bx);
    let col_lo = boundary_lo(x_min);
    let col_hi = x_max.div_euclid(4);

    for col in col_lo..=col_hi {
        let slab_lo = 4 * col;
        let slab_hi = 4 * col + 4;
        // y-extent of the segment while x is inside [slab_lo, slab_hi],
        // expressed as exact rationals num/den with den > 0.
        let (y_lo, y_hi, den) = if ax == bx {
            (ay.min(by), ay.max(by), 1)
        } else {
            let dx = bx - ax;
            let dy = by - ay;
            let xs = slab_lo.max(x_min);
            let xe = slab_hi.min(x_max);
            if xs > xe {
                continue;
            }
            // y(x) = [ay*dx + (x - ax)*dy] / dx; multiply through by
            // sign(dx) so the denominator stays positive.
            let den = dx.abs();
            let s = dx.signum();
            let yn_s = ay * den + s * (xs - ax) * dy;
            let yn_e = ay * den + s * (xe - ax) * dy;
            (yn_s.min(yn_e), yn_e.max(yn_s), den)
        };
        let row_lo = boundary_lo_rat(y_lo, den);
        let row_hi = y_hi.div_euclid(4 * den);
        for row in row_lo..=row_hi {
            out.insert((col as i64, row as i64));
        }
    }
    out
}

/// Lowest cell index whose closed span contains `v` (quarter units).
fn boundary_lo(v: i128) -> i128 {
    if v.rem_euclid(4) == 0 {
        v / 4 - 1
    } else {
        v.div_euclid(4)
    }
}

/// Float column sweep over the same segment definition, for randomized
/// comparisons where endpoints are generic floats (grid boundaries are
/// then almost surely never hit exactly, so open/closed conventions do not
/// matter). Returns every cell whose slab the segment passes through.
pub fn supercover_cells_f64(
    a: (f64, f64),
    b: (f64, f64),
    resolution: f64,
) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    let col = |v: f64| (v / resolution).floor() as i64;
    let (x_min, x_max) = (a.0.min(b.0), a.0.max(b.0));
    for c in col(x_min)..=col(x_max) {
        let slab_lo = c as f64 * resolution;
        let slab_hi = slab_lo + resolution;
        let (y0, y1) = if a.0 == b.0 {
            (a.1.min(b.1), a.1.max(b.1))
        } else {
            let t_at = |x: f64| (x - a.0) / (b.0 - a.0);
            let (mut t0, mut t1) = (t_at(slab_lo.max(x_min)), t_at(slab_hi.min(x_max)));
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            let y_at = |t: f64| a.1 + t * (b.1 - a.1);
            let (ya, yb) = (y_at(t0), y_at(t1));
            (ya.min(yb), ya.max(yb))
        };
        for r in col(y0)..=col(y1) {
            out.insert((c, r));
        }
    }
    out
}

/// Same as `boundary_lo` for a rational value `num/den`, `den > 0`.
fn boundary_lo_rat(num: i128, den: i128) -> i128 {
    if num.rem_euclid(4 * den) == 0 {
        num / (4 * den) - 1
    } else {
        num.div_euclid(4 * den)
    }
}

/// Frontier cells per the literal predicate: a FREE cell with at least one
/// of its 8 neighbors UNKNOWN, where positions outside the array count as
/// UNKNOWN. `cells` is row-major, `cells[y * width + x]`.
pub fn frontier_scan(cells: &[u8], width: usize, height: usize) -> BTreeSet<(i32, i32)> {
    let mut out = BTreeSet::new();
    for y in 0..height as i32 {
        for x in 0..width as i32 {
            if cells[y as usize * width + x as usize] != FREE {
                continue;
            }
            let mut adjacent_unknown = false;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as i32 || ny >= height as i32 {
                        adjacent_unknown = true;
                    } else if cells[ny as usize * width + nx as usize] == UNKNOWN {
                        adjacent_unknown = true;
                    }
                }
            }
            if adjacent_unknown {
                out.insert((x, y));
            }
        }
    }
    out
}

/// Maximal 8-connected components of a cell set, via union-find.
pub fn connected_components_8(cells: &BTreeSet<(i32, i32)>) -> Vec<BTreeSet<(i32, i32)>> {
    let items: Vec<(i32, i32)> = cells.iter().copied().collect();
    let index: std::collections::BTreeMap<(i32, i32), usize> =
        items.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut parent: Vec<usize> = (0..items.len()).collect();

    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }

    for (i, &(x, y)) in items.iter().enumerate() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                if let Some(&j) = index.get(&(x + dx, y + dy)) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, BTreeSet<(i32, i32)>> = Default::default();
    for i in 0..items.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(items[i]);
    }
    groups.into_values().collect()
}

/// Minimum-cost 8-connected path cost from `start` to any cell in `goals`
/// over `passable` (row-major), as exact (straight, diagonal) step counts.
///
/// Straight moves cost 1 and diagonal moves sqrt(2); for the sizes involved
/// the real-valued total identifies the count pair uniquely, so comparing
/// pairs gives an exact optimality check.
pub fn dijkstra_grid(
    passable: &[bool],
    width: usize,
    height: usize,
    start: (i32, i32),
    goals: &BTreeSet<(i32, i32)>,
) -> Option<(u32, u32)> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let idx = |x: i32, y: i32| y as usize * width + x as usize;
    let in_bounds = |x: i32, y: i32| x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height;
    if !in_bounds(start.0, start.1) || !passable[idx(start.0, start.1)] {
        return None;
    }

    const SQRT2: f64 = std::f64::consts::SQRT_2;
    let mut best: Vec<f64> = vec![f64::INFINITY; width * height];
    let mut steps: Vec<(u32, u32)> = vec![(0, 0); width * height];
    let mut heap: BinaryHeap<(Reverse<OrderedF64>, i32, i32)> = BinaryHeap::new();
    best[idx(start.0, start.1)] = 0.0;
    heap.push((Reverse(OrderedF64(0.0)), start.0, start.1));

    while let Some((Reverse(OrderedF64(cost)), x, y)) = heap.pop() {
        if cost > best[idx(x, y)] {
            continue;
        }
        if goals.contains(&(x, y)) {
            return Some(steps[idx(x, y)]);
        }
        for dy in -1..=1i32 {
            for dx in -1..=1i32 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if !in_bounds(nx, ny) || !passable[idx(nx, ny)] {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                let next = cost + if diagonal { SQRT2 } else { 1.0 };
                if next < best[idx(nx, ny)] {
                    best[idx(nx, ny)] = next;
                    let (s, d) = steps[idx(x, y)];
                    steps[idx(nx, ny)] = if diagonal { (s, d + 1) } else { (s + 1, d) };
                    heap.push((Reverse(OrderedF64(next)), nx, ny));
                }
            }
        }
    }
    None
}

#[derive(PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Reachable set of a 4-connected flood fill over `passable` from `start`.
pub fn flood_fill_4(
    passable: &[bool],
    width: usize,
    height: usize,
    start: (i32, i32),
) -> BTreeSet<(i32, i32)> {
    let mut seen = BTreeSet::new();
    let in_bounds = |x: i32, y: i32| x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height;
    if !in_bounds(start.0, start.1) || !passable[start.1 as usize * width + start.0 as usize] {
        return seen;
    }
    let mut stack = vec![start];
    seen.insert(start);
    while let Some((x, y)) = stack.pop() {
        for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if in_bounds(nx, ny)
                && passable[ny as usize * width + nx as usize]
                && seen.insert((nx, ny))
            {
                stack.push((nx, ny));
            }
        }
    }
    seen
}

/// Literal-definition revisit counts.
///
/// For point `i`, the qualifying past set is every `j < i` whose position is
/// within `radius` and whose arc-length separation strictly exceeds
/// `exclusion`; the count is zero when that set is empty, otherwise one plus
/// its maximum count. O(n^2) by design.
pub fn revisit_counts_quadratic(
    points: &[(f64, f64)],
    arcs: &[f64],
    radius: f64,
    exclusion: f64,
) -> Vec<u32> {
    assert_eq!(points.len(), arcs.len());
    let mut counts = vec![0u32; points.len()];
    for i in 0..points.len() {
        let mut best: Option<u32> = None;
        for j in 0..i {
            let d = ((points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2))
                .sqrt();
            if d <= radius && (arcs[i] - arcs[j]) > exclusion {
                best = Some(best.map_or(counts[j], |b: u32| b.max(counts[j])));
            }
        }
        counts[i] = best.map_or(0, |b| b + 1);
    }
    counts
}
