//! Scratch driver for inspecting exploration runs on fixture maps.

use frontier_sim::explorer::{run_exploration, Event, ExploreConfig};
use frontier_sim::geom::Pose;
use frontier_sim::grid::maze::generate_maze;
use frontier_sim::grid::GroundTruthMap;
use frontier_sim::policy::{GreedyPolicy, ScriptedPolicy, SelectionPolicy};
use frontier_sim::render;

fn t_junction() -> (GroundTruthMap, Pose) {
    use frontier_sim::grid::Terrain;
    let res = 0.05;
    let (w, h) = ((8.0 / res) as usize, (6.0 / res) as usize);
    let mut cells = vec![Terrain::Obstacle; w * h];
    let mut carve = |x0: f64, y0: f64, x1: f64, y1: f64, cells: &mut Vec<Terrain>| {
        for y in (y0 / res).round() as usize..(y1 / res).round() as usize {
            for x in (x0 / res).round() as usize..(x1 / res).round() as usize {
                cells[y * w + x] = Terrain::Traversable;
            }
        }
    };
    carve(1.0, 2.4, 5.2, 3.6, &mut cells);
    carve(1.0, 1.0, 2.2, 3.6, &mut cells);
    carve(5.2, 1.4, 7.6, 4.6, &mut cells);
    let start = Pose::new(2.8, 3.0, 0.0);
    (
        GroundTruthMap::new(w, h, res, cells, start).unwrap(),
        start,
    )
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "tj".into());
    let (gt, start, mut policy): (_, _, Box<dyn SelectionPolicy>) = match which.as_str() {
        "maze" => {
            let seed: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(3);
            let gt = generate_maze(seed, 8.0, 8.0, 12).unwrap();
            let start = gt.start();
            (gt, start, Box::new(GreedyPolicy))
        }
        _ => {
            let (gt, start) = t_junction();
            (gt, start, Box::new(ScriptedPolicy::new(vec![0; 16])))
        }
    };
    let (record, belief) = run_exploration(&gt, start, policy.as_mut(), &ExploreConfig::default());
    for e in &record.events {
        match e {
            Event::Decision { step, label, n_candidates, target, policy, .. } => println!(
                "step {step}: decision {policy} label {label}/{n_candidates} -> ({:.2},{:.2})",
                target.x, target.y
            ),
            Event::Navigate { step, outcome, target, .. } => println!(
                "step {step}: navigate -> ({:.2},{:.2}): {outcome}",
                target.x, target.y
            ),
            Event::Backtrack { step, target, outcome, .. } => println!(
                "step {step}: backtrack -> ({:.2},{:.2}): {outcome}",
                target.x, target.y
            ),
            Event::DecisionPointAdded { step, position, .. } => println!(
                "step {step}: DP added at ({:.2},{:.2})",
                position.x, position.y
            ),
            Event::BlacklistAdd { step, point, cause, .. } => println!(
                "step {step}: blacklist ({:.2},{:.2}) cause {cause}",
                point.x, point.y
            ),
            Event::Terminated { step, reason, .. } => println!("step {step}: TERMINATED {reason}"),
            Event::RotateScan { step, pose, .. } => println!(
                "step {step}: rotate at ({:.2},{:.2})",
                pose.x, pose.y
            ),
        }
    }
    println!(
        "reason={} coverage={:.4} distance={:.2}",
        record.termination_reason, record.final_known_fraction, record.cumulative_distance
    );
    let state = frontier_sim::explorer::ExplorationState {
        pose: Pose::new(
            record.trajectory.last().unwrap().x,
            record.trajectory.last().unwrap().y,
            0.0,
        ),
        trajectory: record.trajectory.clone(),
        scan_locations: record.scan_locations.clone(),
        dp_list: vec![],
        blacklist: frontier_sim::frontier::Blacklist::new(0.5),
        step: 0,
        terminated: None,
        cumulative_distance: 0.0,
    };
    let img = render::render_annotated(&belief, &state, &[]);
    render::save_png(&img, std::path::Path::new("/tmp/debug_run.png")).unwrap();
    eprintln!("wrote /tmp/debug_run.png");
}
