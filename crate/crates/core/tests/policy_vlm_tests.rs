//! Selection-policy and chat-client tests: parsing, fallback behavior,
//! retry handling, request shape and the NBV gain oracle.

mod common;

use std::io::{Read, Write};
use std::time::Duration;

use frontier_sim::frontier::{frontier_midpoint, FrontierCandidate, FrontierContour};
use frontier_sim::geom::{Cell, Point, Pose};
use frontier_sim::grid::{Belief, BeliefMap};
use frontier_sim::policy::{
    nbv_gain, parse_vlm_reply, select_greedy, select_nbv, select_scripted, select_vlm,
    DecisionContext, PolicyError, FRONTIER_PROMPT,
};
use frontier_sim::vlm::{
    open_session, open_session_with_mock, MockBehavior, MockServer, Part, SessionConfig, VlmError,
};
use proptest::prelude::*;

fn candidate(label: usize, midpoint: Cell, distance: f64, res: f64) -> FrontierCandidate {
    let cells: Vec<Cell> = (0..25).map(|i| Cell::new(midpoint.x - 12 + i, midpoint.y)).collect();
    FrontierCandidate {
        label,
        contour: FrontierContour {
            midpoint: frontier_midpoint(&cells),
            cells,
        },
        distance,
        midpoint_world: Point::new(
            (midpoint.x as f64 + 0.5) * res,
            (midpoint.y as f64 + 0.5) * res,
        ),
    }
}

fn ctx_with<'a>(
    belief: &'a BeliefMap,
    candidates: &'a [FrontierCandidate],
) -> DecisionContext<'a> {
    DecisionContext {
        belief,
        robot: Pose::new(1.0, 1.0, 0.0),
        candidates,
        map_render_png: vec![0x89, b'P', b'N', b'G'],
        frontier_views_png: candidates.iter().map(|_| vec![1, 2, 3]).collect(),
        step: 1,
        environment: "test",
    }
}

fn quick_test_config() -> SessionConfig {
    SessionConfig {
        retry_backoff: Duration::from_millis(0),
        ..SessionConfig::default()
    }
}

// -------------------------------------------------------------------
// Greedy / scripted
// -------------------------------------------------------------------

#[test]
fn greedy_takes_label_zero() {
    let belief = common::ascii_belief(&["....", "...."], 0.05);
    let cands = vec![
        candidate(0, Cell::new(20, 0), 0.5, 0.05),
        candidate(1, Cell::new(40, 1), 1.5, 0.05),
    ];
    let d = select_greedy(&ctx_with(&belief, &cands));
    assert_eq!(d.label, 0);
    assert_eq!(d.rationale, "nearest frontier");

    let single = vec![candidate(0, Cell::new(20, 0), 0.5, 0.05)];
    assert_eq!(select_greedy(&ctx_with(&belief, &single)).label, 0);
}

/// The greedy choice is a function of the candidate geometry, not of the
/// order contours arrive in: refiltering a shuffled contour list yields
/// the same chosen midpoint.
#[test]
fn greedy_is_invariant_to_contour_order() {
    use frontier_sim::frontier::{filter_candidates, Blacklist, FilterParams};
    let res = 0.05;
    let robot = Pose::new(2.0, 4.8, 0.0);
    let contours: Vec<FrontierContour> = (0..6)
        .map(|i| {
            let cells: Vec<Cell> = (0..25).map(|j| Cell::new(10 + 25 * i + j, 96 + i)).collect();
            FrontierContour {
                midpoint: frontier_midpoint(&cells),
                cells,
            }
        })
        .collect();
    let pick = |order: Vec<FrontierContour>| {
        let cands = filter_candidates(order, &robot, &Blacklist::new(0.5), res, &FilterParams::default());
        let belief = common::ascii_belief(&["...."], res);
        let ctx = DecisionContext {
            belief: &belief,
            robot,
            candidates: &cands,
            map_render_png: vec![],
            frontier_views_png: cands.iter().map(|_| vec![]).collect(),
            step: 0,
            environment: "e",
        };
        cands[select_greedy(&ctx).label].contour.midpoint
    };
    let forward = pick(contours.clone());
    let mut shuffled = contours.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    assert_eq!(forward, pick(shuffled));
}

#[test]
fn scripted_follows_clamps_and_exhausts() {
    let belief = common::ascii_belief(&["...."], 0.05);
    let cands: Vec<FrontierCandidate> = (0..4)
        .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
        .collect();
    let ctx = ctx_with(&belief, &cands);
    let script = [2usize, 0, 1];
    assert_eq!(select_scripted(&ctx, &script, 0).unwrap().label, 2);

    let three = &cands[..3];
    let ctx3 = ctx_with(&belief, three);
    let clamped = select_scripted(&ctx3, &[9], 0).unwrap();
    assert_eq!(clamped.label, 2);
    assert!(clamped.rationale.contains("clamped"));

    assert!(matches!(
        select_scripted(&ctx, &script, 3),
        Err(PolicyError::ScriptExhausted(3))
    ));
}

// -------------------------------------------------------------------
// Reply parsing
// -------------------------------------------------------------------

#[test]
fn reply_parsing_accepts_number_plus_reasoning() {
    let (label, rationale) =
        parse_vlm_reply("1\nChose 1 because it leads to an unexplored hallway").unwrap();
    assert_eq!(label, 1);
    assert_eq!(rationale, "Chose 1 because it leads to an unexplored hallway");

    assert_eq!(parse_vlm_reply("3").unwrap(), (3, String::new()));
    assert_eq!(parse_vlm_reply("  2  \nok\nmore").unwrap(), (2, "ok\nmore".into()));

    assert!(matches!(
        parse_vlm_reply("Frontier 2 looks best"),
        Err(PolicyError::ParseFailure(_))
    ));
    assert!(matches!(parse_vlm_reply(""), Err(PolicyError::ParseFailure(_))));
    assert!(matches!(parse_vlm_reply("-1\nno"), Err(PolicyError::ParseFailure(_))));
}

// -------------------------------------------------------------------
// select_vlm against the mock
// -------------------------------------------------------------------

#[test]
fn vlm_parses_reply_and_builds_ordered_request() {
    let belief = common::ascii_belief(&["...."], 0.05);
    let cands: Vec<FrontierCandidate> = (0..4)
        .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
        .collect();
    let ctx = ctx_with(&belief, &cands);
    let mock = MockServer::new(vec![MockBehavior::Reply("2\nThe corridor looks open".into())]);
    let mut session = open_session_with_mock(quick_test_config(), mock.clone());

    let d = select_vlm(&ctx, &mut session);
    assert_eq!(d.label, 2);
    assert_eq!(d.rationale, "The corridor looks open");
    assert_eq!(d.policy, "vlm");

    // Request shape: exactly 1 map image + k frontier images + 1 text, in
    // that order, with the instruction text byte-for-byte.
    let requests = mock.requests();
    assert_eq!(requests.len(), 1);
    let parts = &requests[0].parts;
    assert_eq!(parts.len(), 1 + 4 + 1);
    assert!(parts[..5].iter().all(Part::is_image));
    assert_eq!(parts[5].as_text(), Some(FRONTIER_PROMPT));
    assert!(requests[0].body_json.contains("\"model\""));

    // History grew by exactly one user/model pair.
    assert_eq!(session.history().len(), 2);
}

#[test]
fn vlm_falls_back_to_greedy_on_malformed_reply() {
    let belief = common::ascii_belief(&["...."], 0.05);
    let cands: Vec<FrontierCandidate> = (0..3)
        .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
        .collect();
    let ctx = ctx_with(&belief, &cands);
    let mock = MockServer::new(vec![MockBehavior::Reply("best is two".into())]);
    let mut session = open_session_with_mock(quick_test_config(), mock);
    let d = select_vlm(&ctx, &mut session);
    assert_eq!(d.label, 0, "fallback is the greedy choice");
    assert!(d.rationale.contains("fallback"));
}

#[test]
fn vlm_retries_through_timeouts_then_succeeds() {
    let belief = common::ascii_belief(&["...."], 0.05);
    let cands: Vec<FrontierCandidate> = (0..3)
        .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
        .collect();
    let ctx = ctx_with(&belief, &cands);
    let mock = MockServer::new(vec![
        MockBehavior::Timeout,
        MockBehavior::Timeout,
        MockBehavior::Reply("1\nthird time".into()),
    ]);
    let mut session = open_session_with_mock(quick_test_config(), mock);
    let d = select_vlm(&ctx, &mut session);
    assert_eq!(d.label, 1);
    assert_eq!(d.rationale, "third time");
    assert!(d.latency_s >= 0.0);
}

#[test]
fn vlm_out_of_range_label_falls_back() {
    let belief = common::ascii_belief(&["...."], 0.05);
    let cands: Vec<FrontierCandidate> = (0..2)
        .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
        .collect();
    let ctx = ctx_with(&belief, &cands);
    let mock = MockServer::new(vec![MockBehavior::Reply("7\nconfident".into())]);
    let mut session = open_session_with_mock(quick_test_config(), mock);
    let d = select_vlm(&ctx, &mut session);
    assert_eq!(d.label, 0);
    assert!(d.rationale.contains("fallback"));
}

proptest! {
    /// For any reply text the selector returns a valid in-range label.
    #[test]
    fn vlm_never_returns_invalid_labels(reply in ".{0,60}") {
        let belief = common::ascii_belief(&["...."], 0.05);
        let cands: Vec<FrontierCandidate> = (0..3)
            .map(|i| candidate(i, Cell::new(20 + 30 * i as i32, 0), 0.5 + i as f64 * 0.2, 0.05))
            .collect();
        let ctx = ctx_with(&belief, &cands);
        let mock = MockServer::new(vec![MockBehavior::Reply(reply)]);
        let mut session = open_session_with_mock(quick_test_config(), mock);
        let d = select_vlm(&ctx, &mut session);
        prop_assert!(d.label < 3);
    }
}

// -------------------------------------------------------------------
// NBV
// -------------------------------------------------------------------

/// Two candidates at equal distance: one facing a large unknown room, one
/// in a sensed dead-end pocket. The room must win, and both gains must
/// match a brute-force double loop with an independent line-of-sight
/// route.
#[test]
fn nbv_prefers_the_unknown_room_and_matches_oracle() {
    let res = 0.05;
    let (w, h) = (120usize, 80usize);
    let mut cells = vec![Belief::Free; w * h];
    // Left half: a large unknown region beyond x=30.
    for y in 0..h {
        for x in 0..30 {
            cells[y * w + x] = Belief::Unknown;
        }
    }
    // Right side: enclosed pocket with thick walls, mostly sensed, only a
    // few unknown cells inside.
    for y in 30..50 {
        for x in 80..100 {
            cells[y * w + x] = Belief::Occupied;
        }
    }
    for y in 34..46 {
        for x in 84..96 {
            cells[y * w + x] = Belief::Free;
        }
    }
    for y in 38..42 {
        for x in 88..92 {
            cells[y * w + x] = Belief::Unknown;
        }
    }
    let belief = BeliefMap::from_cells(w, h, res, cells);

    let room_mid = Cell::new(31, 40);
    let pocket_mid = Cell::new(86, 40);
    let cands = vec![
        FrontierCandidate {
            label: 0,
            contour: FrontierContour {
                cells: vec![room_mid],
                midpoint: room_mid,
            },
            distance: 2.0,
            midpoint_world: belief.grid_to_world(room_mid),
        },
        FrontierCandidate {
            label: 1,
            contour: FrontierContour {
                cells: vec![pocket_mid],
                midpoint: pocket_mid,
            },
            distance: 2.0,
            midpoint_world: belief.grid_to_world(pocket_mid),
        },
    ];

    // Oracle: double loop over cells in range, line of sight by an
    // independent supercover enumeration.
    let oracle_gain = |mid: Cell| {
        let origin = belief.grid_to_world(mid);
        let mut gain = 0usize;
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let cell = Cell::new(x, y);
                if belief.belief(cell) != Belief::Unknown {
                    continue;
                }
                let center = belief.grid_to_world(cell);
                if origin.distance(center) > 5.0 {
                    continue;
                }
                let visible = oracles::supercover_cells_f64(
                    (origin.x, origin.y),
                    (center.x, center.y),
                    res,
                )
                .into_iter()
                .all(|(cx, cy)| {
                    belief.belief(Cell::new(cx as i32, cy as i32)) != Belief::Occupied
                });
                if visible {
                    gain += 1;
                }
            }
        }
        gain
    };

    let gain_room = nbv_gain(&belief, room_mid, 5.0);
    let gain_pocket = nbv_gain(&belief, pocket_mid, 5.0);
    assert_eq!(gain_room, oracle_gain(room_mid));
    assert_eq!(gain_pocket, oracle_gain(pocket_mid));
    assert!(gain_room > gain_pocket * 5);

    let ctx = ctx_with(&belief, &cands);
    let d = select_nbv(&ctx, 5.0);
    assert_eq!(d.label, 0, "room candidate must win");

    // Argmax invariance: uniformly scaling all gains cannot change the
    // winner of gain/distance scoring.
    let scores: Vec<f64> = [gain_room, gain_pocket]
        .iter()
        .zip(&cands)
        .map(|(&g, c)| g as f64 / c.distance.max(res))
        .collect();
    for scale in [0.5, 3.0, 1e6] {
        let argmax = scores
            .iter()
            .map(|s| s * scale)
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, d.label);
    }
}

#[test]
fn nbv_ties_resolve_to_the_lower_label() {
    // Symmetric layout: identical unknown pockets left and right, equal
    // distances; the tie must go to label 0.
    let res = 0.05;
    let (w, h) = (100usize, 40usize);
    let mut cells = vec![Belief::Free; w * h];
    for y in 10..30 {
        for x in 0..10 {
            cells[y * w + x] = Belief::Unknown;
        }
        for x in 90..100 {
            cells[y * w + x] = Belief::Unknown;
        }
    }
    let belief = BeliefMap::from_cells(w, h, res, cells);
    let left = Cell::new(10, 20);
    let right = Cell::new(89, 20);
    let cands = vec![
        FrontierCandidate {
            label: 0,
            contour: FrontierContour { cells: vec![left], midpoint: left },
            distance: 1.0,
            midpoint_world: belief.grid_to_world(left),
        },
        FrontierCandidate {
            label: 1,
            contour: FrontierContour { cells: vec![right], midpoint: right },
            distance: 1.0,
            midpoint_world: belief.grid_to_world(right),
        },
    ];
    let gain_l = nbv_gain(&belief, left, 5.0);
    let gain_r = nbv_gain(&belief, right, 5.0);
    assert_eq!(gain_l, gain_r, "layout must be symmetric for the tie test");
    let ctx = ctx_with(&belief, &cands);
    assert_eq!(select_nbv(&ctx, 5.0).label, 0);
}

// -------------------------------------------------------------------
// Session / transport
// -------------------------------------------------------------------

#[test]
fn open_session_validates_config() {
    let mock = open_session(SessionConfig::default()).unwrap();
    assert!(mock.history().is_empty());

    let misconfigured = SessionConfig {
        endpoint: "https://example.invalid/v1/chat".into(),
        api_key: None,
        ..SessionConfig::default()
    };
    assert!(matches!(
        open_session(misconfigured),
        Err(VlmError::BadConfig(_))
    ));

    let weird = SessionConfig {
        endpoint: "ftp://nope".into(),
        ..SessionConfig::default()
    };
    assert!(matches!(open_session(weird), Err(VlmError::BadConfig(_))));
}

#[test]
fn send_turn_appends_history_in_order() {
    let mock = MockServer::new(vec![
        MockBehavior::Reply("0\nfirst".into()),
        MockBehavior::Reply("1\nsecond".into()),
    ]);
    let mut session = open_session_with_mock(quick_test_config(), mock.clone());
    let r1 = session.send_turn(vec![Part::text("one")]).unwrap();
    assert_eq!(r1.text, "0\nfirst");
    assert_eq!(session.history().len(), 2);
    let r2 = session.send_turn(vec![Part::text("two")]).unwrap();
    assert_eq!(r2.text, "1\nsecond");
    assert_eq!(session.history().len(), 4);
    assert_eq!(session.history()[0].parts[0].as_text(), Some("one"));
    assert_eq!(session.history()[2].parts[0].as_text(), Some("two"));

    // The transcript has one exchange per line.
    assert_eq!(mock.transcript().lines().count(), 2);
}

#[test]
fn retries_exhaust_into_an_error_and_history_stays_clean() {
    let mock = MockServer::new(vec![
        MockBehavior::Timeout,
        MockBehavior::Timeout,
        MockBehavior::Timeout,
    ]);
    let mut session = open_session_with_mock(quick_test_config(), mock.clone());
    let err = session.send_turn(vec![Part::text("hello")]).unwrap_err();
    assert!(matches!(err, VlmError::Timeout));
    assert!(session.history().is_empty());
    // Retry limit 2 means exactly three attempts were made.
    assert_eq!(mock.requests().len(), 3);
}

/// The http adapter speaks the generic wire shape against a real socket.
#[test]
fn http_adapter_posts_wire_format() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        let mut tmp = [0u8; 4096];
        loop {
            let n = stream.read(&mut tmp).unwrap();
            buf.extend_from_slice(&tmp[..n]);
            if let Some(header_end) = find_header_end(&buf) {
                let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
                let len = content_length(&headers);
                while buf.len() < header_end + 4 + len {
                    let n = stream.read(&mut tmp).unwrap();
                    buf.extend_from_slice(&tmp[..n]);
                }
                let body = String::from_utf8_lossy(&buf[header_end + 4..]).to_string();
                let reply = br#"{"text": "1\nover http"}"#;
                let resp = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n",
                    reply.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
                stream.write_all(reply).unwrap();
                return (headers, body);
            }
        }
    });

    let config = SessionConfig {
        endpoint: format!("http://127.0.0.1:{port}/chat"),
        api_key: Some("k-123".into()),
        model: "wire-model".into(),
        max_retries: 0,
        ..quick_test_config()
    };
    let mut session = open_session(config).unwrap();
    let reply = session
        .send_turn(vec![Part::text("ping"), Part::image_png(vec![9, 9])])
        .unwrap();
    assert_eq!(reply.text, "1\nover http");

    let (headers, body) = server.join().unwrap();
    assert!(headers.to_lowercase().contains("authorization: bearer k-123"));
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["model"], "wire-model");
    let parts = v["messages"][0]["parts"].as_array().unwrap();
    assert_eq!(parts[0]["type"], "text");
    assert_eq!(parts[1]["type"], "image");
    assert_eq!(parts[1]["media_type"], "image/png");
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn content_length(headers: &str) -> usize {
    headers
        .lines()
        .find_map(|l| {
            let (k, v) = l.split_once(':')?;
            k.eq_ignore_ascii_case("content-length")
                .then(|| v.trim().parse().ok())?
        })
        .unwrap_or(0)
}
