//! Raster rendering of belief maps, annotated run snapshots and the
//! synthetic per-frontier views sent to the decision model.
//!
//! Conventions: white = known free, grey = unknown, black = occupied, blue
//! trajectory polyline, green dots where 360-degree scans ran, red robot
//! dot with an orange heading arrow, and purple "(k)" labels at candidate
//! midpoints. Output is deterministic: identical inputs produce identical
//! PNG bytes.

use image::{Rgb, RgbImage};

use crate::explorer::ExplorationState;
use crate::frontier::FrontierCandidate;
use crate::geom::{Cell, Point, Pose};
use crate::grid::{cast_ray, Belief, BeliefMap, GroundTruthMap};

const FREE: Rgb<u8> = Rgb([255, 255, 255]);
const UNKNOWN: Rgb<u8> = Rgb([128, 128, 128]);
const OCCUPIED: Rgb<u8> = Rgb([0, 0, 0]);
const TRAJECTORY: Rgb<u8> = Rgb([0, 64, 255]);
const SCAN_DOT: Rgb<u8> = Rgb([0, 170, 0]);
const ROBOT: Rgb<u8> = Rgb([220, 0, 0]);
const HEADING: Rgb<u8> = Rgb([255, 140, 0]);
const CANDIDATE: Rgb<u8> = Rgb([235, 220, 40]);
const LABEL: Rgb<u8> = Rgb([150, 40, 220]);

/// Integer upscale so small maps stay legible; a pure function of the map
/// dimensions, keeping renders deterministic.
fn scale_for(width: usize, height: usize) -> u32 {
    (600 / width.max(height).max(1)).clamp(1, 6) as u32
}

/// Render the paper-style annotated snapshot of a run in progress.
pub fn render_annotated(
    belief: &BeliefMap,
    state: &ExplorationState,
    candidates: &[FrontierCandidate],
) -> RgbImage {
    let scale = scale_for(belief.width(), belief.height());
    let mut img = belief_base(belief, scale);
    let res = belief.resolution();
    let to_px = |p: Point| -> (i32, i32) {
        (
            (p.x / res * scale as f64) as i32,
            (p.y / res * scale as f64) as i32,
        )
    };

    for c in candidates {
        for &cell in &c.contour.cells {
            fill_cell(&mut img, cell, scale, CANDIDATE);
        }
    }

    for pair in state.trajectory.windows(2) {
        let (x0, y0) = to_px(pair[0]);
        let (x1, y1) = to_px(pair[1]);
        draw_line(&mut img, x0, y0, x1, y1, TRAJECTORY);
    }

    let dot_r = (scale as i32).max(2);
    for &p in &state.scan_locations {
        let (x, y) = to_px(p);
        draw_disk(&mut img, x, y, dot_r, SCAN_DOT);
    }

    let (rx, ry) = to_px(state.pose.position());
    draw_disk(&mut img, rx, ry, dot_r + 1, ROBOT);
    let arrow_len = (0.4 / res * scale as f64) as i32;
    let (hx, hy) = (
        rx + (arrow_len as f64 * state.pose.heading.cos()) as i32,
        ry + (arrow_len as f64 * state.pose.heading.sin()) as i32,
    );
    draw_line(&mut img, rx, ry, hx, hy, HEADING);
    draw_disk(&mut img, hx, hy, (dot_r / 2).max(1), HEADING);

    for c in candidates {
        let (x, y) = to_px(c.midpoint_world);
        draw_text(
            &mut img,
            x + dot_r + 2,
            y - 3,
            &format!("({})", c.label),
            LABEL,
        );
    }
    img
}

/// Synthetic "what lies that way" panel for one candidate: a distance-
/// shaded range profile toward the midpoint over a 90-degree field of
/// view, above a belief-map crop centered on the midpoint.
pub fn render_frontier_view(
    gt: &GroundTruthMap,
    belief: &BeliefMap,
    robot: &Pose,
    candidate: &FrontierCandidate,
) -> RgbImage {
    const COLUMNS: u32 = 120;
    const PROFILE_H: u32 = 64;
    const CROP: u32 = 64;
    const VIEW_FOV: f64 = std::f64::consts::FRAC_PI_2;
    const VIEW_RANGE: f64 = 5.0;

    let width = COLUMNS;
    let height = PROFILE_H + 2 + CROP;
    let mut img = RgbImage::from_pixel(width, height, Rgb([32, 32, 32]));

    let target = candidate.midpoint_world;
    let dir = (target.y - robot.y).atan2(target.x - robot.x);
    for col in 0..COLUMNS {
        let angle = dir - VIEW_FOV / 2.0 + VIEW_FOV * col as f64 / (COLUMNS - 1) as f64;
        let range = match cast_ray(gt, robot.position(), angle, VIEW_RANGE) {
            Ok(ray) => ray.range,
            Err(_) => 0.0,
        };
        let shade = (range / VIEW_RANGE * 255.0).clamp(0.0, 255.0) as u8;
        for row in 0..PROFILE_H {
            img.put_pixel(col, row, Rgb([shade, shade, shade]));
        }
    }

    let mid = candidate.contour.midpoint;
    let x_off = (width - CROP) / 2;
    for dy in 0..CROP {
        for dx in 0..CROP {
            let cell = Cell::new(
                mid.x - CROP as i32 / 2 + dx as i32,
                mid.y - CROP as i32 / 2 + dy as i32,
            );
            let color = if belief.in_bounds(cell) {
                belief_color(belief.belief(cell))
            } else {
                Rgb([64, 64, 64])
            };
            img.put_pixel(x_off + dx, PROFILE_H + 2 + dy, color);
        }
    }
    img
}

fn belief_color(b: Belief) -> Rgb<u8> {
    match b {
        Belief::Free => FREE,
        Belief::Unknown => UNKNOWN,
        Belief::Occupied => OCCUPIED,
    }
}

fn belief_base(belief: &BeliefMap, scale: u32) -> RgbImage {
    let mut img = RgbImage::new(
        belief.width() as u32 * scale,
        belief.height() as u32 * scale,
    );
    for y in 0..belief.height() {
        for x in 0..belief.width() {
            let color = belief_color(belief.belief(Cell::new(x as i32, y as i32)));
            for sy in 0..scale {
                for sx in 0..scale {
                    img.put_pixel(x as u32 * scale + sx, y as u32 * scale + sy, color);
                }
            }
        }
    }
    img
}

fn fill_cell(img: &mut RgbImage, cell: Cell, scale: u32, color: Rgb<u8>) {
    for sy in 0..scale {
        for sx in 0..scale {
            put(
                img,
                cell.x * scale as i32 + sx as i32,
                cell.y * scale as i32 + sy as i32,
                color,
            );
        }
    }
}

fn put(img: &mut RgbImage, x: i32, y: i32, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_line(img: &mut RgbImage, mut x0: i32, mut y0: i32, x1: i32, y1: i32, color: Rgb<u8>) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_disk(img: &mut RgbImage, cx: i32, cy: i32, r: i32, color: Rgb<u8>) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

/// 5x7 bitmap glyphs for digits and parentheses.
fn glyph(ch: char) -> Option<[u8; 7]> {
    let rows = match ch {
        '0' => [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
        '1' => [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        '2' => [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
        '3' => [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
        '4' => [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
        '5' => [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
        '6' => [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
        '7' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
        '8' => [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
        '9' => [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
        '(' => [0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010],
        ')' => [0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000],
        _ => return None,
    };
    Some(rows)
}

fn draw_text(img: &mut RgbImage, x: i32, y: i32, text: &str, color: Rgb<u8>) {
    let mut cx = x;
    for ch in text.chars() {
        if let Some(rows) = glyph(ch) {
            for (ry, row) in rows.iter().enumerate() {
                for rx in 0..5 {
                    if row & (1 << (4 - rx)) != 0 {
                        put(img, cx + rx, y + ry as i32, color);
                    }
                }
            }
        }
        cx += 6;
    }
}

/// Deterministic PNG bytes for an image.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut bytes = Vec::new();
    img.write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageFormat::Png,
    )
    .expect("in-memory png encode");
    bytes
}

pub fn save_png(img: &RgbImage, path: &std::path::Path) -> Result<(), crate::grid::GridError> {
    std::fs::write(path, encode_png(img))?;
    Ok(())
}
