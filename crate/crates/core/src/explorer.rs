//! The top-level exploration loop: scan, detect frontiers, decide or
//! backtrack, navigate, blacklist, terminate.
//!
//! Every run produces a [`RunRecord`]: an event log, the full trajectory,
//! per-step belief coverage and the termination reason. Failures never
//! abort a run; unreachable targets are blacklisted and navigation
//! continues until no candidates remain and the decision-point list is
//! empty, or a budget trips.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::frontier::{current_candidates, Blacklist, FilterParams, FrontierCandidate};
use crate::geom::{Point, Pose};
use crate::grid::{BeliefMap, GroundTruthMap, SensorConfig};
use crate::planner::{follow_path, plan_path, rotate_scan_360, FollowConfig, PlanError};
use crate::policy::{DecisionContext, SelectionPolicy};
use crate::render;

/// A remembered junction: the robot stood here with two or more valid
/// candidates in view.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub position: Point,
    pub created_step: usize,
}

/// Mutable state of one exploration run.
#[derive(Clone, Debug)]
pub struct ExplorationState {
    pub pose: Pose,
    pub trajectory: Vec<Point>,
    pub scan_locations: Vec<Point>,
    pub dp_list: Vec<DecisionPoint>,
    pub blacklist: Blacklist,
    pub step: usize,
    pub terminated: Option<String>,
    pub cumulative_distance: f64,
}

impl ExplorationState {
    pub fn new(start: Pose, blacklist_radius: f64) -> Self {
        Self {
            pose: start,
            trajectory: vec![start.position()],
            scan_locations: Vec::new(),
            dp_list: Vec::new(),
            blacklist: Blacklist::new(blacklist_radius),
            step: 0,
            terminated: None,
            cumulative_distance: 0.0,
        }
    }

    /// Move the pose, extending the trajectory and distance bookkeeping.
    pub fn advance_pose(&mut self, pose: Pose) {
        let last = *self.trajectory.last().unwrap();
        self.cumulative_distance += last.distance(pose.position());
        self.trajectory.push(pose.position());
        self.pose = pose;
    }
}

/// Reasons a run ends.
pub const REASON_COMPLETE: &str = "complete";
pub const REASON_STEP_BUDGET: &str = "step_budget";
pub const REASON_DISTANCE_BUDGET: &str = "distance_budget";
pub const REASON_SCRIPT_EXHAUSTED: &str = "script_exhausted";

/// Full configuration of a run, echoed into every artifact directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub environment: String,
    pub policy: String,
    pub seed: u64,
    pub sensor: SensorConfig,
    pub filter: FilterParams,
    pub blacklist_radius: f64,
    pub dp_dedup_radius: f64,
    pub inflation: f64,
    pub goal_tolerance: f64,
    pub sense_every: f64,
    pub step_length: f64,
    pub max_steps: usize,
    pub max_distance: f64,
    /// Directory for per-decision annotated frames, when requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub snapshot_dir: Option<std::path::PathBuf>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            environment: String::new(),
            policy: String::new(),
            seed: 0,
            sensor: SensorConfig::default(),
            filter: FilterParams::default(),
            blacklist_radius: 0.5,
            dp_dedup_radius: 0.5,
            inflation: crate::planner::DEFAULT_INFLATION,
            goal_tolerance: crate::planner::DEFAULT_GOAL_TOLERANCE,
            sense_every: crate::planner::DEFAULT_SENSE_EVERY,
            step_length: crate::planner::STEP_LENGTH,
            max_steps: 500,
            max_distance: 2000.0,
            snapshot_dir: None,
        }
    }
}

/// One logged event. Timestamps are seconds since the start of the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    RotateScan {
        t: f64,
        step: usize,
        pose: Pose,
    },
    DecisionPointAdded {
        t: f64,
        step: usize,
        position: Point,
    },
    Decision {
        t: f64,
        step: usize,
        policy: String,
        label: usize,
        n_candidates: usize,
        rationale: String,
        latency_s: f64,
        target: Point,
    },
    Navigate {
        t: f64,
        step: usize,
        target: Point,
        outcome: String,
        distance_after: f64,
    },
    BlacklistAdd {
        t: f64,
        step: usize,
        point: Point,
        cause: String,
    },
    Backtrack {
        t: f64,
        step: usize,
        target: Point,
        outcome: String,
    },
    Terminated {
        t: f64,
        step: usize,
        reason: String,
    },
}

/// Per-step coverage sample: belief-known fraction of the reachable
/// traversable space after the step's sensing.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoverageSample {
    pub step: usize,
    pub distance: f64,
    pub known_fraction: f64,
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: ExploreConfig,
    pub events: Vec<Event>,
    pub trajectory: Vec<Point>,
    pub scan_locations: Vec<Point>,
    pub coverage: Vec<CoverageSample>,
    pub cumulative_distance: f64,
    pub termination_reason: String,
    pub final_known_fraction: f64,
}

impl RunRecord {
    pub fn blacklist_failure_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::BlacklistAdd { cause, .. } if cause == "failure"))
            .count()
    }
}

struct Recorder {
    t0: Instant,
    events: Vec<Event>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            t0: Instant::now(),
            events: Vec::new(),
        }
    }

    fn push(&mut self, f: impl FnOnce(f64) -> Event) {
        let t = self.t0.elapsed().as_secs_f64();
        self.events.push(f(t));
    }
}

/// Run the full exploration loop. Consumes nothing; the caller keeps the
/// ground truth and receives the final belief alongside the record.
pub fn run_exploration(
    gt: &GroundTruthMap,
    start: Pose,
    policy: &mut dyn SelectionPolicy,
    config: &ExploreConfig,
) -> (RunRecord, BeliefMap) {
    let mut belief = BeliefMap::new_unknown(gt);
    let mut state = ExplorationState::new(start, config.blacklist_radius);
    let mut rec = Recorder::new();
    let reachable = gt.reachable_from_start();
    let reachable_total = reachable.iter().filter(|&&r| r).count().max(1);
    let follow_cfg = FollowConfig {
        sensor: config.sensor,
        sense_every: config.sense_every,
        step_length: config.step_length,
        inflation: config.inflation,
        goal_tolerance: config.goal_tolerance,
    };

    let known_fraction = |belief: &BeliefMap| {
        let mut known = 0usize;
        for y in 0..belief.height() as i32 {
            for x in 0..belief.width() as i32 {
                let i = y as usize * belief.width() + x as usize;
                if reachable[i]
                    && belief.belief(crate::geom::Cell::new(x, y)) == crate::grid::Belief::Free
                {
                    known += 1;
                }
            }
        }
        known as f64 / reachable_total as f64
    };

    rotate_scan_360(gt, &mut belief, &mut state, &config.sensor);
    rec.push(|t| Event::RotateScan {
        t,
        step: 0,
        pose: state.pose,
    });

    let mut coverage = Vec::new();
    let reason = loop {
        state.step += 1;
        let step = state.step;
        coverage.push(CoverageSample {
            step,
            distance: state.cumulative_distance,
            known_fraction: known_fraction(&belief),
        });
        if step > config.max_steps {
            break REASON_STEP_BUDGET;
        }
        if state.cumulative_distance > config.max_distance {
            break REASON_DISTANCE_BUDGET;
        }

        let candidates = current_candidates(&belief, &state.pose, &state.blacklist, &config.filter);
        if candidates.is_empty() {
            match backtrack_step(gt, &mut belief, &mut state, &follow_cfg, config, &mut rec) {
                BacktrackOutcome::Resumed => continue,
                BacktrackOutcome::Exhausted => break REASON_COMPLETE,
            }
        }

        if candidates.len() >= 2 && record_decision_point(&mut state, &candidates, config.dp_dedup_radius)
        {
            let position = state.dp_list.last().unwrap().position;
            rec.push(|t| Event::DecisionPointAdded { t, step, position });
        }

        let decision = if candidates.len() == 1 {
            crate::policy::single_candidate_decision()
        } else {
            let ctx = build_context(gt, &belief, &state, &candidates, step, &config.environment);
            match policy.decide(&ctx) {
                Ok(d) => d,
                Err(e) if e.is_script_exhausted() => break REASON_SCRIPT_EXHAUSTED,
                Err(e) => {
                    // Policies are contracted not to fail otherwise; treat
                    // anything else like exhaustion so the run ends visibly.
                    debug_assert!(false, "unexpected policy error: {e}");
                    break REASON_SCRIPT_EXHAUSTED;
                }
            }
        };
        let chosen = &candidates[decision.label.min(candidates.len() - 1)];
        let target = chosen.midpoint_world;
        rec.push(|t| Event::Decision {
            t,
            step,
            policy: decision.policy.clone(),
            label: decision.label,
            n_candidates: candidates.len(),
            rationale: decision.rationale.clone(),
            latency_s: decision.latency_s,
            target,
        });

        if let Some(dir) = &config.snapshot_dir {
            let img = render::render_annotated(&belief, &state, &candidates);
            let _ = render::save_png(&img, &dir.join(format!("frame_{step:04}.png")));
        }

        let nav = navigate(gt, &mut belief, &mut state, target, &follow_cfg);
        let outcome = match &nav {
            Ok(_) => "reached".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        rec.push(|t| Event::Navigate {
            t,
            step,
            target,
            outcome: outcome.clone(),
            distance_after: state.cumulative_distance,
        });
        match nav {
            Ok(()) => {
                state.blacklist.add(target);
                rec.push(|t| Event::BlacklistAdd {
                    t,
                    step,
                    point: target,
                    cause: "reached".into(),
                });
                rotate_scan_360(gt, &mut belief, &mut state, &config.sensor);
                rec.push(|t| Event::RotateScan {
                    t,
                    step,
                    pose: state.pose,
                });
            }
            Err(_) => {
                state.blacklist.add(target);
                rec.push(|t| Event::BlacklistAdd {
                    t,
                    step,
                    point: target,
                    cause: "failure".into(),
                });
            }
        }
    };

    state.terminated = Some(reason.to_string());
    let final_fraction = known_fraction(&belief);
    coverage.push(CoverageSample {
        step: state.step,
        distance: state.cumulative_distance,
        known_fraction: final_fraction,
    });
    rec.push(|t| Event::Terminated {
        t,
        step: state.step,
        reason: reason.to_string(),
    });

    let record = RunRecord {
        config: config.clone(),
        events: rec.events,
        trajectory: state.trajectory.clone(),
        scan_locations: state.scan_locations.clone(),
        coverage,
        cumulative_distance: state.cumulative_distance,
        termination_reason: reason.to_string(),
        final_known_fraction: final_fraction,
    };
    (record, belief)
}

fn navigate(
    gt: &GroundTruthMap,
    belief: &mut BeliefMap,
    state: &mut ExplorationState,
    target: Point,
    cfg: &FollowConfig,
) -> Result<(), PlanError> {
    let path = plan_path(
        belief,
        state.pose.position(),
        target,
        cfg.inflation,
        cfg.goal_tolerance,
    )?;
    follow_path(gt, belief, state, path, cfg)?;
    Ok(())
}

/// Append a decision point at the current pose unless one already exists
/// within the dedup radius. Returns whether a point was added.
pub fn record_decision_point(
    state: &mut ExplorationState,
    candidates: &[FrontierCandidate],
    dedup_radius: f64,
) -> bool {
    debug_assert!(candidates.len() >= 2);
    let here = state.pose.position();
    if state
        .dp_list
        .iter()
        .any(|dp| dp.position.distance(here) <= dedup_radius)
    {
        return false;
    }
    state.dp_list.push(DecisionPoint {
        position: here,
        created_step: state.step,
    });
    true
}

enum BacktrackOutcome {
    /// Arrived at a decision point that still has candidates.
    Resumed,
    /// The decision-point list emptied out.
    Exhausted,
}

/// Nearest-first backtracking over the decision-point list. A point that no
/// longer offers candidates on arrival is removed; unreachable points are
/// removed and logged.
fn backtrack_step(
    gt: &GroundTruthMap,
    belief: &mut BeliefMap,
    state: &mut ExplorationState,
    follow_cfg: &FollowConfig,
    config: &ExploreConfig,
    rec: &mut Recorder,
) -> BacktrackOutcome {
    loop {
        if state.dp_list.is_empty() {
            return BacktrackOutcome::Exhausted;
        }
        let here = state.pose.position();
        let nearest = state
            .dp_list
            .iter()
            .enumerate()
            .min_by(|a, b| {
                a.1.position
                    .distance(here)
                    .total_cmp(&b.1.position.distance(here))
            })
            .map(|(i, _)| i)
            .unwrap();
        let target = state.dp_list[nearest].position;
        let step = state.step;

        let nav = match plan_path(
            belief,
            state.pose.position(),
            target,
            follow_cfg.inflation,
            follow_cfg.goal_tolerance,
        ) {
            Ok(path) => follow_path(gt, belief, state, path, follow_cfg).map(|_| ()),
            Err(e) => Err(e),
        };
        match nav {
            Err(e) => {
                state.dp_list.remove(nearest);
                let outcome = format!("unreachable: {e}");
                rec.push(|t| Event::Backtrack {
                    t,
                    step,
                    target,
                    outcome,
                });
            }
            Ok(()) => {
                let candidates =
                    current_candidates(belief, &state.pose, &state.blacklist, &config.filter);
                if candidates.is_empty() {
                    state.dp_list.remove(nearest);
                    rec.push(|t| Event::Backtrack {
                        t,
                        step,
                        target,
                        outcome: "no_candidates".into(),
                    });
                } else {
                    rec.push(|t| Event::Backtrack {
                        t,
                        step,
                        target,
                        outcome: "resumed".into(),
                    });
                    return BacktrackOutcome::Resumed;
                }
            }
        }
    }
}

fn build_context<'a>(
    gt: &GroundTruthMap,
    belief: &'a BeliefMap,
    state: &ExplorationState,
    candidates: &'a [FrontierCandidate],
    step: usize,
    environment: &'a str,
) -> DecisionContext<'a> {
    let map_png = render::encode_png(&render::render_annotated(belief, state, candidates));
    let views = candidates
        .iter()
        .map(|c| render::encode_png(&render::render_frontier_view(gt, belief, &state.pose, c)))
        .collect();
    DecisionContext {
        belief,
        robot: state.pose,
        candidates,
        map_render_png: map_png,
        frontier_views_png: views,
        step,
        environment,
    }
}

// ---------------------------------------------------------------------
// Run directory serialization
// ---------------------------------------------------------------------

/// Write the full artifact set for a run: events.jsonl, trajectory.csv,
/// belief.pgm, final.png, config.json, env.pgm/.meta and summary.json.
pub fn write_run_dir(
    dir: &Path,
    record: &RunRecord,
    gt: &GroundTruthMap,
    belief: &BeliefMap,
    state_for_render: (&[Point], &[Point], Pose),
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut events = String::new();
    for e in &record.events {
        events.push_str(&serde_json::to_string(e).expect("events serialize"));
        events.push('\n');
    }
    std::fs::write(dir.join("events.jsonl"), events)?;

    let mut traj = String::from("step,x_m,y_m,cumulative_dist_m\n");
    let mut cum = 0.0;
    for (i, p) in record.trajectory.iter().enumerate() {
        if i > 0 {
            cum += record.trajectory[i - 1].distance(*p);
        }
        traj.push_str(&format!("{i},{:.6},{:.6},{cum:.6}\n", p.x, p.y));
    }
    std::fs::write(dir.join("trajectory.csv"), traj)?;

    let mut curve = String::from("step,distance_m,known_fraction\n");
    for s in &record.coverage {
        curve.push_str(&format!(
            "{},{:.6},{:.6}\n",
            s.step, s.distance, s.known_fraction
        ));
    }
    std::fs::write(dir.join("coverage.csv"), curve)?;

    belief
        .save_pgm(&dir.join("belief.pgm"))
        .map_err(io_error)?;
    gt.save(&dir.join("env.pgm")).map_err(io_error)?;

    let (trajectory, scans, pose) = state_for_render;
    let shadow = ExplorationState {
        pose,
        trajectory: trajectory.to_vec(),
        scan_locations: scans.to_vec(),
        dp_list: Vec::new(),
        blacklist: Blacklist::new(0.5),
        step: 0,
        terminated: None,
        cumulative_distance: 0.0,
    };
    let img = render::render_annotated(belief, &shadow, &[]);
    render::save_png(&img, &dir.join("final.png")).map_err(io_error)?;

    std::fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&record.config).expect("config serializes"),
    )?;
    let summary = serde_json::json!({
        "environment": record.config.environment,
        "policy": record.config.policy,
        "seed": record.config.seed,
        "termination_reason": record.termination_reason,
        "cumulative_distance_m": record.cumulative_distance,
        "final_known_fraction": record.final_known_fraction,
    });
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(())
}

fn io_error(e: crate::grid::GridError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}
