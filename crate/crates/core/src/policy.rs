//! Frontier-selection policies.
//!
//! Four interchangeable strategies sit behind [`SelectionPolicy`]:
//! nearest-first greedy, an information-gain baseline ("NBV-lite"), a
//! scripted sequence for deterministic tests, and a chat-model-backed
//! selector that sends the annotated map plus per-candidate views over a
//! persistent session and falls back to greedy whenever the exchange or
//! the reply format fails.

use std::time::Instant;

use thiserror::Error;

use crate::frontier::FrontierCandidate;
use crate::geom::{Cell, Point, Pose};
use crate::grid::{Belief, BeliefMap};
use crate::vlm::{ChatSession, Part};

/// Instruction text sent on every decision turn.
pub const FRONTIER_PROMPT: &str = include_str!("../resources/frontier_prompt.txt");

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("scripted policy ran out of entries at step {0}")]
    ScriptExhausted(usize),
    #[error("reply does not start with a bare candidate number: {0:?}")]
    ParseFailure(String),
}

impl PolicyError {
    /// Discriminant-only view used by the explorer's match.
    pub fn is_script_exhausted(&self) -> bool {
        matches!(self, PolicyError::ScriptExhausted(_))
    }
}

/// Everything a policy may look at when choosing a frontier.
pub struct DecisionContext<'a> {
    pub belief: &'a BeliefMap,
    pub robot: Pose,
    pub candidates: &'a [FrontierCandidate],
    /// Annotated occupancy-map render, PNG bytes.
    pub map_render_png: Vec<u8>,
    /// One synthetic view per candidate, index-aligned with labels.
    pub frontier_views_png: Vec<Vec<u8>>,
    pub step: usize,
    pub environment: &'a str,
}

/// The outcome of one selection.
#[derive(Clone, Debug)]
pub struct Decision {
    pub label: usize,
    pub rationale: String,
    pub policy: String,
    pub latency_s: f64,
}

/// Decision used when exactly one candidate exists and no policy runs.
pub fn single_candidate_decision() -> Decision {
    Decision {
        label: 0,
        rationale: "single candidate".into(),
        policy: "auto".into(),
        latency_s: 0.0,
    }
}

pub trait SelectionPolicy {
    fn name(&self) -> &str;
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, PolicyError>;
}

// ---------------------------------------------------------------------
// Greedy
// ---------------------------------------------------------------------

/// Nearest frontier first. Candidates arrive sorted by distance, so this
/// is always label 0.
pub fn select_greedy(ctx: &DecisionContext) -> Decision {
    debug_assert!(!ctx.candidates.is_empty());
    Decision {
        label: 0,
        rationale: "nearest frontier".into(),
        policy: "greedy".into(),
        latency_s: 0.0,
    }
}

pub struct GreedyPolicy;

impl SelectionPolicy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, PolicyError> {
        Ok(select_greedy(ctx))
    }
}

// ---------------------------------------------------------------------
// NBV-lite
// ---------------------------------------------------------------------

pub const DEFAULT_GAIN_RADIUS: f64 = 5.0;

/// Unknown belief cells within `gain_radius` of the candidate midpoint
/// that have line-of-sight from the midpoint over non-Occupied cells.
pub fn nbv_gain(belief: &BeliefMap, midpoint: Cell, gain_radius: f64) -> usize {
    let res = belief.resolution();
    let origin = belief.grid_to_world(midpoint);
    let reach = (gain_radius / res).ceil() as i32;
    let mut gain = 0;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let cell = Cell::new(midpoint.x + dx, midpoint.y + dy);
            if !belief.in_bounds(cell) || belief.belief(cell) != Belief::Unknown {
                continue;
            }
            let center = belief.grid_to_world(cell);
            if origin.distance(center) > gain_radius {
                continue;
            }
            if line_of_sight(belief, origin, center) {
                gain += 1;
            }
        }
    }
    gain
}

/// True when no Occupied cell lies on the supercover segment between the
/// two points.
fn line_of_sight(belief: &BeliefMap, from: Point, to: Point) -> bool {
    crate::geom::walk_segment(from, to, belief.resolution())
        .iter()
        .all(|step| belief.in_bounds(step.cell) && belief.belief(step.cell) != Belief::Occupied)
}

/// Score each candidate by estimated newly visible space per meter of
/// travel and take the argmax; ties go to the lower label.
pub fn select_nbv(ctx: &DecisionContext, gain_radius: f64) -> Decision {
    debug_assert!(!ctx.candidates.is_empty());
    let res = ctx.belief.resolution();
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut gains = Vec::with_capacity(ctx.candidates.len());
    for c in ctx.candidates {
        let gain = nbv_gain(ctx.belief, c.contour.midpoint, gain_radius) as f64;
        gains.push(gain as usize);
        let score = gain / c.distance.max(res);
        if score > best.1 {
            best = (c.label, score);
        }
    }
    Decision {
        label: best.0,
        rationale: format!("gains {:?}, chose label {}", gains, best.0),
        policy: "nbv".into(),
        latency_s: 0.0,
    }
}

pub struct NbvPolicy {
    pub gain_radius: f64,
}

impl Default for NbvPolicy {
    fn default() -> Self {
        Self {
            gain_radius: DEFAULT_GAIN_RADIUS,
        }
    }
}

impl SelectionPolicy for NbvPolicy {
    fn name(&self) -> &str {
        "nbv"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, PolicyError> {
        Ok(select_nbv(ctx, self.gain_radius))
    }
}

// ---------------------------------------------------------------------
// Scripted
// ---------------------------------------------------------------------

/// Return `script[step]`, clamping out-of-range labels into the valid
/// range (and saying so in the rationale).
pub fn select_scripted(
    ctx: &DecisionContext,
    script: &[usize],
    step: usize,
) -> Result<Decision, PolicyError> {
    let Some(&entry) = script.get(step) else {
        return Err(PolicyError::ScriptExhausted(step));
    };
    let max_label = ctx.candidates.len() - 1;
    let (label, rationale) = if entry > max_label {
        (
            max_label,
            format!("scripted entry {entry} clamped to {max_label}"),
        )
    } else {
        (entry, format!("scripted entry {entry}"))
    };
    Ok(Decision {
        label,
        rationale,
        policy: "scripted".into(),
        latency_s: 0.0,
    })
}

pub struct ScriptedPolicy {
    script: Vec<usize>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(script: Vec<usize>) -> Self {
        Self { script, cursor: 0 }
    }
}

impl SelectionPolicy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, PolicyError> {
        let d = select_scripted(ctx, &self.script, self.cursor)?;
        self.cursor += 1;
        Ok(d)
    }
}

// ---------------------------------------------------------------------
// VLM-backed
// ---------------------------------------------------------------------

/// Parse a model reply: the first non-empty line must be a bare
/// non-negative integer; everything after it is the rationale.
pub fn parse_vlm_reply(text: &str) -> Result<(usize, String), PolicyError> {
    let mut lines = text.lines();
    let label_line = loop {
        match lines.next() {
            None => return Err(PolicyError::ParseFailure(text.to_string())),
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => break l.trim(),
        }
    };
    let label: usize = label_line
        .parse()
        .map_err(|_| PolicyError::ParseFailure(text.to_string()))?;
    let rationale = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    Ok((label, rationale))
}

/// Ask the model to choose. The request is the annotated map, the
/// per-candidate views in label order, then the instruction text; parse or
/// transport failures fall back to the greedy choice instead of erroring.
pub fn select_vlm(ctx: &DecisionContext, session: &mut ChatSession) -> Decision {
    let started = Instant::now();
    let mut parts = Vec::with_capacity(ctx.frontier_views_png.len() + 2);
    parts.push(Part::image_png(ctx.map_render_png.clone()));
    for view in &ctx.frontier_views_png {
        parts.push(Part::image_png(view.clone()));
    }
    parts.push(Part::text(FRONTIER_PROMPT));

    let fallback = |reason: String, latency: f64| {
        let greedy = select_greedy(ctx);
        Decision {
            label: greedy.label,
            rationale: format!("fallback to greedy ({reason}): nearest frontier"),
            policy: "vlm".into(),
            latency_s: latency,
        }
    };

    match session.send_turn(parts) {
        Err(e) => fallback(format!("transport: {e}"), started.elapsed().as_secs_f64()),
        Ok(reply) => match parse_vlm_reply(&reply.text) {
            Err(_) => fallback("unparseable reply".into(), started.elapsed().as_secs_f64()),
            Ok((label, rationale)) if label < ctx.candidates.len() => Decision {
                label,
                rationale,
                policy: "vlm".into(),
                latency_s: started.elapsed().as_secs_f64(),
            },
            Ok((label, _)) => fallback(
                format!("label {label} out of range"),
                started.elapsed().as_secs_f64(),
            ),
        },
    }
}

pub struct VlmPolicy {
    session: ChatSession,
}

impl VlmPolicy {
    pub fn new(session: ChatSession) -> Self {
        Self { session }
    }

    pub fn session(&self) -> &ChatSession {
        &self.session
    }
}

impl SelectionPolicy for VlmPolicy {
    fn name(&self) -> &str {
        "vlm"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, PolicyError> {
        Ok(select_vlm(ctx, &mut self.session))
    }
}
