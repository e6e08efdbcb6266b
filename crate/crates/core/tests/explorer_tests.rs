//! End-to-end exploration runs on fixture environments: completion,
//! backtracking, blacklist liveness, budgets and record bookkeeping.

mod common;

use frontier_sim::explorer::{
    record_decision_point, run_exploration, Event, ExplorationState, ExploreConfig,
    REASON_COMPLETE, REASON_STEP_BUDGET,
};
use frontier_sim::frontier::{frontier_midpoint, FrontierCandidate, FrontierContour};
use frontier_sim::geom::{Cell, Point, Pose};
use frontier_sim::grid::maze::generate_maze;
use frontier_sim::policy::{GreedyPolicy, ScriptedPolicy, VlmPolicy};
use frontier_sim::vlm::{open_session_with_mock, MockBehavior, MockServer, SessionConfig};

use common::{empty_room, slit_trap, t_junction};

fn quick_session(mock: MockServer) -> frontier_sim::vlm::ChatSession {
    open_session_with_mock(
        SessionConfig {
            retry_backoff: std::time::Duration::from_millis(0),
            ..SessionConfig::default()
        },
        mock,
    )
}

#[test]
fn empty_room_completes_with_full_coverage() {
    let gt = empty_room(6.0, 0.05);
    let (record, _belief) = run_exploration(
        &gt,
        gt.start(),
        &mut GreedyPolicy,
        &ExploreConfig {
            environment: "room6".into(),
            policy: "greedy".into(),
            ..ExploreConfig::default()
        },
    );
    assert_eq!(record.termination_reason, REASON_COMPLETE);
    assert!(
        record.final_known_fraction >= 0.99,
        "coverage {}",
        record.final_known_fraction
    );
}

#[test]
fn t_junction_backtracks_through_the_decision_point() {
    let (gt, start) = t_junction();
    // The script forces the dead-end arm (label 0, the nearer frontier)
    // at the first decision; everything after is single-candidate.
    let mut policy = ScriptedPolicy::new(vec![0; 16]);
    let (record, _belief) = run_exploration(
        &gt,
        start,
        &mut policy,
        &ExploreConfig {
            environment: "tjunction".into(),
            policy: "scripted".into(),
            ..ExploreConfig::default()
        },
    );

    assert_eq!(record.termination_reason, REASON_COMPLETE);
    assert!(
        record.final_known_fraction >= 0.99,
        "coverage {}",
        record.final_known_fraction
    );

    // A decision point was recorded at the junction.
    let dp_positions: Vec<Point> = record
        .events
        .iter()
        .filter_map(|e| match e {
            Event::DecisionPointAdded { position, .. } => Some(*position),
            _ => None,
        })
        .collect();
    assert!(!dp_positions.is_empty(), "no decision point recorded");

    // The run backtracked to one of them and resumed.
    let resumed_at: Vec<Point> = record
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Backtrack { target, outcome, .. } if outcome == "resumed" => Some(*target),
            _ => None,
        })
        .collect();
    assert!(!resumed_at.is_empty(), "no backtrack-resume happened");
    assert!(resumed_at
        .iter()
        .any(|t| dp_positions.iter().any(|dp| dp.distance(*t) < 1e-9)));

    // The second branch (the right room) was explored after backtracking.
    assert!(
        record.trajectory.iter().any(|p| p.x > 5.4),
        "never entered the right room"
    );
    // The dead-end arm was visited first.
    assert!(
        record.trajectory.iter().any(|p| p.y < 2.2),
        "never entered the dead-end stub"
    );
}

#[test]
fn unreachable_frontier_is_blacklisted_and_run_terminates() {
    let (gt, start) = slit_trap();
    let (record, _belief) = run_exploration(
        &gt,
        start,
        &mut GreedyPolicy,
        &ExploreConfig {
            environment: "trap".into(),
            policy: "greedy".into(),
            ..ExploreConfig::default()
        },
    );
    assert!(
        record.blacklist_failure_events() >= 1,
        "expected a blacklist-on-failure event"
    );
    assert_eq!(record.termination_reason, REASON_COMPLETE);
    // Far below the budget: the trap must not burn steps.
    let steps = record.coverage.last().unwrap().step;
    assert!(steps < 50, "took {steps} steps");
}

#[test]
fn step_budget_terminates_runs() {
    let (gt, start) = t_junction();
    let mut policy = ScriptedPolicy::new(vec![0; 64]);
    let (record, _belief) = run_exploration(
        &gt,
        start,
        &mut policy,
        &ExploreConfig {
            max_steps: 1,
            ..ExploreConfig::default()
        },
    );
    assert_eq!(record.termination_reason, REASON_STEP_BUDGET);
}

#[test]
fn distance_bookkeeping_matches_trajectory() {
    let (gt, start) = t_junction();
    let mut policy = ScriptedPolicy::new(vec![0; 16]);
    let (record, _belief) = run_exploration(&gt, start, &mut policy, &ExploreConfig::default());
    let polyline: f64 = record
        .trajectory
        .windows(2)
        .map(|p| p[0].distance(p[1]))
        .sum();
    assert!((record.cumulative_distance - polyline).abs() < 1e-6);
    // Coverage samples are monotone in distance and fraction.
    for pair in record.coverage.windows(2) {
        assert!(pair[0].distance <= pair[1].distance + 1e-9);
        assert!(pair[0].known_fraction <= pair[1].known_fraction + 1e-12);
    }
}

#[test]
fn decision_points_deduplicate_within_radius() {
    let mut state = ExplorationState::new(Pose::new(1.0, 1.0, 0.0), 0.5);
    let mk = |label: usize| {
        let cells: Vec<Cell> = (0..25).map(|i| Cell::new(i, label as i32 * 10)).collect();
        FrontierCandidate {
            label,
            contour: FrontierContour {
                midpoint: frontier_midpoint(&cells),
                cells,
            },
            distance: 1.0,
            midpoint_world: Point::new(1.0, 1.0),
        }
    };
    let candidates = vec![mk(0), mk(1)];
    assert!(record_decision_point(&mut state, &candidates, 0.5));
    assert_eq!(state.dp_list.len(), 1);

    // 0.1 m away: suppressed by the dedup radius.
    state.pose = Pose::new(1.1, 1.0, 0.0);
    assert!(!record_decision_point(&mut state, &candidates, 0.5));
    assert_eq!(state.dp_list.len(), 1);

    // 0.6 m away: a new decision point.
    state.pose = Pose::new(1.6, 1.0, 0.0);
    assert!(record_decision_point(&mut state, &candidates, 0.5));
    assert_eq!(state.dp_list.len(), 2);
}

/// A full maze run driven by the mock-backed chat policy, cycling valid,
/// malformed and timeout behaviors; fallbacks must keep the run alive to
/// completion, and the recorded requests must carry the instruction text.
#[test]
fn vlm_mock_run_completes_with_fallbacks() {
    let gt = generate_maze(3, 8.0, 8.0, 12).unwrap();
    let mut script = Vec::new();
    for _ in 0..24 {
        script.push(MockBehavior::Reply("0\nheading for the widest opening".into()));
        script.push(MockBehavior::Malformed);
        script.push(MockBehavior::Timeout);
        script.push(MockBehavior::Timeout);
        script.push(MockBehavior::Reply("1\nsecond looks better".into()));
    }
    let mock = MockServer::new(script);
    let mut policy = VlmPolicy::new(quick_session(mock.clone()));
    let (record, _belief) = run_exploration(
        &gt,
        gt.start(),
        &mut policy,
        &ExploreConfig {
            environment: "maze3".into(),
            policy: "vlm".into(),
            ..ExploreConfig::default()
        },
    );
    assert_eq!(record.termination_reason, REASON_COMPLETE);
    assert!(
        record.final_known_fraction >= 0.99,
        "coverage {}",
        record.final_known_fraction
    );

    let requests = mock.requests();
    if let Some(first) = requests.first() {
        // 1 map image + k frontier views + 1 text part, in that order.
        let images = first.parts.iter().filter(|p| p.is_image()).count();
        let n_candidates = record
            .events
            .iter()
            .find_map(|e| match e {
                Event::Decision { policy, n_candidates, .. } if policy == "vlm" => {
                    Some(*n_candidates)
                }
                _ => None,
            })
            .expect("a vlm decision happened");
        assert_eq!(images, 1 + n_candidates);
        assert_eq!(
            first.parts.last().unwrap().as_text(),
            Some(frontier_sim::policy::FRONTIER_PROMPT)
        );
    }

    // Malformed and timed-out exchanges surfaced as greedy fallbacks.
    let fallbacks = record
        .events
        .iter()
        .filter(|e| matches!(e, Event::Decision { rationale, .. } if rationale.contains("fallback")))
        .count();
    assert!(fallbacks >= 1, "expected at least one fallback decision");
}

/// Credentials never leak into run artifacts.
#[test]
fn run_artifacts_never_contain_credentials() {
    let gt = empty_room(6.0, 0.05);
    let mock = MockServer::new(vec![MockBehavior::Reply("0\nok".into())]);
    let session = open_session_with_mock(
        SessionConfig {
            api_key: Some("TOPSECRET-XYZZY".into()),
            retry_backoff: std::time::Duration::from_millis(0),
            ..SessionConfig::default()
        },
        mock,
    );
    let mut policy = VlmPolicy::new(session);
    let (record, belief) = run_exploration(
        &gt,
        gt.start(),
        &mut policy,
        &ExploreConfig {
            environment: "room".into(),
            policy: "vlm".into(),
            ..ExploreConfig::default()
        },
    );
    let dir = tempfile::tempdir().unwrap();
    frontier_sim::explorer::write_run_dir(
        dir.path(),
        &record,
        &gt,
        &belief,
        (&record.trajectory, &record.scan_locations, gt.start()),
    )
    .unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let bytes = std::fs::read(&path).unwrap();
            let hay = String::from_utf8_lossy(&bytes);
            assert!(
                !hay.contains("TOPSECRET"),
                "credential leaked into {path:?}"
            );
        }
    }
}
