//! Detectors for inactivity, isolation, repetition and crowding, and the
//! hint shapes that answer them.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::geometry::{self, Circle, Vec2};
use crate::scene::{ColorRGB, HintLine, HintOrigin, ObjectId, PlayerId, SceneObject, SceneState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintShape {
    House,
    Circle,
    Star,
    Wave,
}

impl HintShape {
    pub const ALL: [HintShape; 4] = [HintShape::House, HintShape::Circle, HintShape::Star, HintShape::Wave];

    pub fn is_closed(self) -> bool {
        !matches!(self, HintShape::Wave)
    }
}

impl fmt::Display for HintShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HintShape::House => "house",
            HintShape::Circle => "circle",
            HintShape::Star => "star",
            HintShape::Wave => "wave",
        })
    }
}

impl FromStr for HintShape {
    type Err = HintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HintShape::ALL
            .into_iter()
            .find(|h| h.to_string() == s)
            .ok_or_else(|| HintError::InvalidShape(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintStyle {
    /// The shape itself, drawn dashed at the anchor.
    Dashed,
    /// A wavy guide from the player's hand towards the anchor.
    Wavy,
}

impl fmt::Display for HintStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HintStyle::Dashed => "dashed",
            HintStyle::Wavy => "wavy",
        })
    }
}

impl FromStr for HintStyle {
    type Err = HintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dashed" => Ok(HintStyle::Dashed),
            "wavy" => Ok(HintStyle::Wavy),
            _ => Err(HintError::InvalidStyle(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HintError {
    #[error("unknown hint shape {0:?}")]
    InvalidShape(String),
    #[error("unknown hint style {0:?}")]
    InvalidStyle(String),
    #[error("hint anchor outside the canvas")]
    InvalidAnchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    Repetition,
    Isolation,
    IdleStuck,
    AreaOveruse,
    SensorLost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NotificationPayload {
    Similarity {
        score: f64,
        line: ObjectId,
        matched: ObjectId,
    },
    Area {
        center: Vec2,
        radius: f64,
    },
    Idle {
        seconds: f64,
    },
    Quadrant {
        index: usize,
        fraction: f64,
    },
    Empty,
}

/// Message for the caregiver console.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: u64,
    pub tick: u64,
    pub kind: NotificationKind,
    pub player: Option<PlayerId>,
    pub payload: NotificationPayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdleStage {
    None,
    Vibrate,
    Light,
    /// Past the last threshold; nothing more happens until the player acts.
    LineOrNotify,
}

/// What the engine should do in response to an idleness step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdleCue {
    VibrateOn,
    VibrateOff,
    LightOn,
    LightOff,
    /// Show a starter shape: the player has never drawn a line.
    AutoHint,
    /// Tell the caregiver instead: the player has drawn before.
    NotifyStuck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdleState {
    pub player: PlayerId,
    pub seconds_idle: f64,
    pub stage: IdleStage,
    pub has_drawn_first_line: bool,
}

impl IdleState {
    pub fn new(player: PlayerId) -> Self {
        Self {
            player,
            seconds_idle: 0.0,
            stage: IdleStage::None,
            has_drawn_first_line: false,
        }
    }
}

/// Advances the idle clock by `dt`, or resets it when the player `acted`.
/// Strictly exceeding a threshold yields its cue once; reset undoes vibration
/// and light.
pub fn update_idleness(
    state: &mut IdleState,
    dt: f64,
    acted: bool,
    vibration_enabled: bool,
    cfg: &EngineConfig,
) -> Vec<IdleCue> {
    let mut cues = Vec::new();
    if acted {
        if state.stage >= IdleStage::Vibrate && vibration_enabled {
            cues.push(IdleCue::VibrateOff);
        }
        if state.stage >= IdleStage::Light {
            cues.push(IdleCue::LightOff);
        }
        state.seconds_idle = 0.0;
        state.stage = IdleStage::None;
        return cues;
    }
    state.seconds_idle += dt;
    let t = state.seconds_idle - crate::interaction::TIME_EPS;
    if state.stage == IdleStage::None && t > cfg.idle_vibrate_seconds {
        state.stage = IdleStage::Vibrate;
        if vibration_enabled {
            cues.push(IdleCue::VibrateOn);
        }
    }
    if state.stage == IdleStage::Vibrate && t > cfg.idle_light_seconds {
        state.stage = IdleStage::Light;
        cues.push(IdleCue::LightOn);
    }
    if state.stage == IdleStage::Light && t > cfg.idle_hint_seconds {
        state.stage = IdleStage::LineOrNotify;
        cues.push(if state.has_drawn_first_line {
            IdleCue::NotifyStuck
        } else {
            IdleCue::AutoHint
        });
    }
    cues
}

/// Recent drawing positions of one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTracker {
    pub player: PlayerId,
    window: VecDeque<(u64, Vec2)>,
    /// Set while the current episode has been reported.
    pub flagged: bool,
}

impl IsolationTracker {
    pub fn new(player: PlayerId) -> Self {
        Self {
            player,
            window: VecDeque::new(),
            flagged: false,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

/// Adds a drawing sample and reports when the last `isolation_window_seconds`
/// of continuous drawing fit in a circle of `isolation_radius`. Reported once
/// per episode; the tracker re-arms after the player leaves the circle.
pub fn detect_isolation(tracker: &mut IsolationTracker, tick: u64, point: Vec2, cfg: &EngineConfig) -> Option<Circle> {
    let w = cfg.ticks(cfg.isolation_window_seconds);
    let gap = cfg.ticks(cfg.isolation_gap_seconds);
    if let Some(&(last, _)) = tracker.window.back() {
        if tick.saturating_sub(last) > gap {
            tracker.window.clear();
        }
    }
    tracker.window.push_back((tick, point));
    // keep exactly one sample at or before the window start
    while tracker.window.len() >= 2 && tracker.window[1].0 + w <= tick {
        tracker.window.pop_front();
    }
    let points: Vec<Vec2> = tracker.window.iter().map(|&(_, p)| p).collect();
    if tracker.flagged {
        if geometry::min_enclosing_circle(&points).is_some_and(|c| c.radius > cfg.isolation_radius) {
            tracker.flagged = false;
        }
        return None;
    }
    let start = tracker.window.front().map_or(tick, |&(t, _)| t);
    if tick - start < w {
        return None;
    }
    let circle = geometry::min_enclosing_circle(&points)?;
    if circle.radius <= cfg.isolation_radius {
        tracker.flagged = true;
        return Some(circle);
    }
    None
}

/// Resampling resolution used when comparing lines.
pub const SIMILARITY_SAMPLES: usize = 32;
const SHAPE_WEIGHT: f64 = 0.7;
const LENGTH_WEIGHT: f64 = 0.3;
/// Mean normalized point distance at which the shape term reaches zero.
const SHAPE_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line has zero length")]
pub struct DegenerateLine;

fn normalize(points: &[Vec2]) -> Vec<Vec2> {
    let n = points.len() as f64;
    let c = points
        .iter()
        .fold(Vec2::new(0.0, 0.0), |acc, p| acc.add(*p))
        .scale(1.0 / n);
    let centered: Vec<Vec2> = points.iter().map(|p| p.sub(c)).collect();
    let rms = (centered.iter().map(|p| p.dot(*p)).sum::<f64>() / n).sqrt();
    if rms > 0.0 {
        centered.iter().map(|p| p.scale(1.0 / rms)).collect()
    } else {
        centered
    }
}

/// Similarity in `[0, 1]`; invariant to translation, uniform scale and
/// traversal direction in its shape term, with a length-ratio term.
pub fn line_similarity(a: &[Vec2], b: &[Vec2]) -> Result<f64, DegenerateLine> {
    let (la, lb) = (geometry::arclength(a), geometry::arclength(b));
    if !(la > 0.0 && lb > 0.0) {
        return Err(DegenerateLine);
    }
    let ra = normalize(&geometry::resample(a, SIMILARITY_SAMPLES));
    let rb = normalize(&geometry::resample(b, SIMILARITY_SAMPLES));
    let k = SIMILARITY_SAMPLES as f64;
    let forward: f64 = ra.iter().zip(&rb).map(|(p, q)| p.distance(*q)).sum::<f64>() / k;
    let backward: f64 = ra.iter().zip(rb.iter().rev()).map(|(p, q)| p.distance(*q)).sum::<f64>() / k;
    let shape = (1.0 - forward.min(backward) / SHAPE_SCALE).max(0.0);
    let length = la.min(lb) / la.max(lb);
    Ok((SHAPE_WEIGHT * shape + LENGTH_WEIGHT * length).clamp(0.0, 1.0))
}

/// Best match of `new` among `recent`, when it reaches `threshold`.
pub fn detect_repetition<'a>(
    recent: impl IntoIterator<Item = (ObjectId, &'a [Vec2])>,
    new: &[Vec2],
    threshold: f64,
) -> Option<(ObjectId, f64)> {
    recent
        .into_iter()
        .filter_map(|(id, pts)| line_similarity(pts, new).ok().map(|s| (id, s)))
        .filter(|&(_, s)| s >= threshold)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
}

/// Unit-sized outline centered at the origin, y up.
fn template(shape: HintShape) -> Vec<Vec2> {
    match shape {
        HintShape::House => [
            (-0.5, -0.5),
            (0.5, -0.5),
            (0.5, 0.1),
            (0.0, 0.5),
            (-0.5, 0.1),
            (-0.5, -0.5),
        ]
        .iter()
        .map(|&(x, y)| Vec2::new(x, y))
        .collect(),
        HintShape::Circle => {
            let mut pts: Vec<Vec2> = (0..24)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / 24.0;
                    Vec2::new(0.5 * a.cos(), 0.5 * a.sin())
                })
                .collect();
            pts.push(pts[0]);
            pts
        }
        HintShape::Star => {
            let mut pts: Vec<Vec2> = (0..10)
                .map(|i| {
                    let a = PI / 2.0 + PI * i as f64 / 5.0;
                    let r = if i % 2 == 0 { 0.5 } else { 0.2 };
                    Vec2::new(r * a.cos(), r * a.sin())
                })
                .collect();
            pts.push(pts[0]);
            pts
        }
        HintShape::Wave => (0..=32)
            .map(|i| {
                let t = i as f64 / 32.0;
                Vec2::new(t - 0.5, 0.25 * (4.0 * PI * t).sin())
            })
            .collect(),
    }
}

fn clamp_snap(p: Vec2) -> Vec2 {
    Vec2::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0)).snapped()
}

/// Wavy path from `from` to `to` with exact endpoints.
fn wavy_path(from: Vec2, to: Vec2) -> Vec<Vec2> {
    let d = to.sub(from);
    let len = d.length();
    if len == 0.0 {
        return vec![from, to];
    }
    let normal = Vec2::new(-d.y, d.x).scale(1.0 / len);
    let half_waves = (len / 0.04).round().max(1.0);
    let samples = ((len / 0.01).ceil() as usize).max(8);
    let mut pts: Vec<Vec2> = (0..=samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            clamp_snap(
                from.add(d.scale(t))
                    .add(normal.scale(0.02 * (half_waves * PI * t).sin())),
            )
        })
        .collect();
    pts[0] = from;
    pts[samples] = to;
    pts
}

/// Parameters of a hint request.
#[derive(Clone, Debug, PartialEq)]
pub struct HintRequest {
    pub shape: HintShape,
    pub anchor: Vec2,
    pub target_player: PlayerId,
    pub style: HintStyle,
    pub color: Option<ColorRGB>,
    pub origin: HintOrigin,
}

/// Builds a hint line; it expires `hint_lifetime_seconds` after `tick`.
pub fn spawn_hint(
    id: ObjectId,
    req: &HintRequest,
    hand: Option<Vec2>,
    tick: u64,
    cfg: &EngineConfig,
) -> Result<HintLine, HintError> {
    let anchor = Vec2::ingest(req.anchor.x, req.anchor.y).ok_or(HintError::InvalidAnchor)?;
    if !(0.0..=1.0).contains(&req.anchor.x) || !(0.0..=1.0).contains(&req.anchor.y) {
        return Err(HintError::InvalidAnchor);
    }
    let points = match req.style {
        HintStyle::Dashed => template(req.shape)
            .into_iter()
            .map(|p| clamp_snap(anchor.add(p.scale(cfg.hint_size))))
            .collect(),
        HintStyle::Wavy => wavy_path(hand.unwrap_or(Vec2::new(0.5, 0.5)), anchor),
    };
    Ok(HintLine {
        id,
        shape: req.shape,
        style: req.style,
        points,
        target_player: req.target_player,
        color: req.color,
        origin: req.origin,
        expires_tick: tick + cfg.ticks(cfg.hint_lifetime_seconds),
    })
}

/// Removes hints whose lifetime is over, returning their ids.
pub fn expire_hints(scene: &mut SceneState) -> Vec<ObjectId> {
    let now = scene.tick;
    let expired: Vec<ObjectId> = scene.hints().filter(|h| h.expires_tick <= now).map(|h| h.id).collect();
    for id in &expired {
        scene.objects.remove(id);
    }
    expired
}

/// Quadrant index: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right,
/// with `y` growing upwards.
pub fn quadrant_of(p: Vec2) -> usize {
    let bottom = if p.y >= 0.5 { 0 } else { 2 };
    let right = if p.x >= 0.5 { 1 } else { 0 };
    bottom + right
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaUsage {
    /// Share of object weight per quadrant; sums to 1 for a non-empty scene.
    pub fractions: [f64; 4],
    pub overused: [bool; 4],
    pub objects: usize,
}

/// Every node and permanent line weighs one; a line's weight is split across
/// quadrants by its arclength in each.
pub fn area_usage(scene: &SceneState, cfg: &EngineConfig) -> AreaUsage {
    let mut mass = [0.0f64; 4];
    let mut objects = 0;
    for obj in scene.objects.values() {
        match obj {
            SceneObject::Node(n) => {
                mass[quadrant_of(n.pos)] += 1.0;
                objects += 1;
            }
            SceneObject::Line(l) => {
                let mut per = [0.0f64; 4];
                for w in l.points.windows(2) {
                    split_segment(w[0], w[1], &mut per);
                }
                let total: f64 = per.iter().sum();
                if total > 0.0 {
                    for q in 0..4 {
                        mass[q] += per[q] / total;
                    }
                } else {
                    mass[quadrant_of(l.points[0])] += 1.0;
                }
                objects += 1;
            }
            _ => {}
        }
    }
    let mut fractions = [0.0; 4];
    if objects > 0 {
        for q in 0..4 {
            fractions[q] = mass[q] / objects as f64;
        }
    }
    let overused = fractions.map(|f| f > cfg.area_overuse_fraction);
    AreaUsage {
        fractions,
        overused,
        objects,
    }
}

fn split_segment(a: Vec2, b: Vec2, per: &mut [f64; 4]) {
    let mut cuts = vec![0.0, 1.0];
    let d = b.sub(a);
    for (start, delta) in [(a.x, d.x), (a.y, d.y)] {
        if delta != 0.0 {
            let t = (0.5 - start) / delta;
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        let mid = a.lerp(b, (w[0] + w[1]) / 2.0);
        per[quadrant_of(mid)] += d.length() * (w[1] - w[0]);
    }
}
