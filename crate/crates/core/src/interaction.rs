//! Sensor input, floor mechanics and actuator commands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::engine::{ChordChange, Effects};
use crate::geometry::{Circle, Rect, Vec2};
use crate::markov::ChordModel;
use crate::pitch::melody_pan;
use crate::playback::{self, NoteEvent, NoteSource};
use crate::scene::{ColorRGB, PlayerId, SceneState};

/// Slack when comparing accumulated tick durations against thresholds, so
/// that thirty steps of 1/30 s compare equal to one second.
pub const TIME_EPS: f64 = 1e-9;

/// Timestamped sensor event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEvent {
    pub tick: u64,
    pub kind: InputKind,
}

/// `player` is the sensor's body slot; only slots 1 and 2 are players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputKind {
    HandMove {
        player: u8,
        pos: Vec2,
        /// Meters from the front screen.
        screen_distance: f64,
    },
    BrushButton {
        player: u8,
        pressed: bool,
    },
    EraserHeld {
        player: u8,
        held: bool,
    },
    FloorMove {
        player: u8,
        pos: Vec2,
    },
    Tick,
    /// Emitted by the session host when the sensor connection drops.
    SensorLost,
}

impl InputKind {
    pub fn player_slot(&self) -> Option<u8> {
        match *self {
            InputKind::HandMove { player, .. }
            | InputKind::BrushButton { player, .. }
            | InputKind::EraserHeld { player, .. }
            | InputKind::FloorMove { player, .. } => Some(player),
            InputKind::Tick | InputKind::SensorLost => None,
        }
    }
}

/// Time spent by a pressed brush near one spot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellTracker {
    pub player: PlayerId,
    pub anchor: Vec2,
    pub elapsed: f64,
}

impl DwellTracker {
    pub fn new(player: PlayerId, anchor: Vec2) -> Self {
        Self {
            player,
            anchor,
            elapsed: 0.0,
        }
    }

    /// Accumulates `dt` while `pos` stays within `epsilon` of the anchor.
    /// Returns the spot where a node should appear once the elapsed time
    /// strictly exceeds `threshold`; the tracker then re-anchors.
    pub fn update(&mut self, pos: Vec2, dt: f64, epsilon: f64, threshold: f64) -> Option<Vec2> {
        if pos.distance(self.anchor) > epsilon {
            self.anchor = pos;
            self.elapsed = 0.0;
            return None;
        }
        self.elapsed += dt;
        if self.elapsed > threshold + TIME_EPS {
            let spot = self.anchor;
            self.anchor = pos;
            self.elapsed = 0.0;
            return Some(spot);
        }
        None
    }
}

/// Tracker step using the configured radius and dwell time.
pub fn update_dwell(tracker: &mut DwellTracker, pos: Vec2, dt: f64, cfg: &EngineConfig) -> Option<Vec2> {
    tracker.update(pos, dt, cfg.dwell_epsilon, cfg.dwell_seconds)
}

/// Line thickness from the player's distance to the screen: thickest when
/// close, thinnest when far, linear in between.
pub fn stroke_thickness(screen_distance: f64, cfg: &EngineConfig) -> f64 {
    if !(screen_distance > cfg.near_distance) {
        return cfg.max_thickness;
    }
    if screen_distance >= cfg.far_distance {
        return cfg.min_thickness;
    }
    let t = (screen_distance - cfg.near_distance) / (cfg.far_distance - cfg.near_distance);
    cfg.max_thickness + (cfg.min_thickness - cfg.max_thickness) * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    /// Chord changes when both players stand on the floor circles.
    Interactable,
    /// Chord changes on a fixed period, no circles.
    Automatic,
    Disabled,
}

impl fmt::Display for EvolutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvolutionMode::Interactable => "interactable",
            EvolutionMode::Automatic => "automatic",
            EvolutionMode::Disabled => "disabled",
        })
    }
}

impl FromStr for EvolutionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interactable" => Ok(EvolutionMode::Interactable),
            "automatic" => Ok(EvolutionMode::Automatic),
            "disabled" => Ok(EvolutionMode::Disabled),
            _ => Err(format!("unknown evolution mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionCircle {
    pub area: Circle,
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub pos: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientState {
    /// Every tracked player is inside the interaction space.
    Inside,
    Outside,
}

/// Floor coordinates share the unit square with the canvas but describe
/// the room seen from above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorState {
    pub interaction_space: Rect,
    pub bg_area: Rect,
    pub bg_active: bool,
    pub bg_lockout_until: u64,
    pub bg_inside: [bool; 2],
    pub evolution_circles: [EvolutionCircle; 2],
    /// Latched once each player owns a permanent object.
    pub circles_unlocked: bool,
    pub evolution_mode: EvolutionMode,
    pub evolution_cooldown_until: u64,
    pub evolution_armed: bool,
    pub auto_ticks: u64,
    pub blobs: Vec<Blob>,
    pub blobs_active: bool,
    pub ambient: Option<AmbientState>,
}

impl FloorState {
    pub fn new(cfg: &EngineConfig) -> Self {
        let circle = |x, y| EvolutionCircle {
            area: Circle {
                center: Vec2::new(x, y),
                radius: 0.08,
            },
            visible: false,
        };
        Self {
            interaction_space: Rect::new(Vec2::new(0.1, 0.1), Vec2::new(0.9, 0.9)),
            bg_area: Rect::new(Vec2::new(0.4, 0.1), Vec2::new(0.6, 0.22)),
            bg_active: false,
            bg_lockout_until: 0,
            bg_inside: [false; 2],
            evolution_circles: [circle(0.3, 0.6), circle(0.7, 0.6)],
            circles_unlocked: false,
            evolution_mode: cfg.evolution_mode,
            evolution_cooldown_until: 0,
            evolution_armed: true,
            auto_ticks: 0,
            blobs: Vec::new(),
            blobs_active: false,
            ambient: None,
        }
    }

    pub fn circles_visible(&self) -> bool {
        self.evolution_circles.iter().any(|c| c.visible)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceTarget {
    BrushP1,
    BrushP2,
    AmbientLights,
}

impl DeviceTarget {
    pub fn brush(player: PlayerId) -> Self {
        match player {
            PlayerId::P1 => DeviceTarget::BrushP1,
            PlayerId::P2 => DeviceTarget::BrushP2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviceAction {
    Vibrate { on: bool },
    Led { color: ColorRGB, brightness: f64 },
    Ambient { color: ColorRGB, brightness: f64 },
}

/// Actuator command for the smart objects or room lights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceCommand {
    pub tick: u64,
    pub target: DeviceTarget,
    pub action: DeviceAction,
}

pub const BRUSH_IDLE_BRIGHTNESS: f64 = 0.4;
pub const BRUSH_HINT_BRIGHTNESS: f64 = 1.0;
pub const AMBIENT_BRIGHT: f64 = 1.0;
pub const AMBIENT_DIM: f64 = 0.3;
/// General MIDI hand clap, used for blob contacts.
pub const PERCUSSION_NOTE: u8 = 39;

/// Records a floor position and runs the background-music area, the
/// evolution circles and the room lights.
pub fn update_floor(
    scene: &mut SceneState,
    player: PlayerId,
    pos: Vec2,
    model: &ChordModel,
    cfg: &EngineConfig,
    fx: &mut Effects,
) {
    scene.player_mut(player).floor = Some(pos);
    let inside_bg = scene.floor.bg_area.contains(pos);
    let was_inside = scene.floor.bg_inside[player.index()];
    scene.floor.bg_inside[player.index()] = inside_bg;
    if inside_bg && !was_inside && scene.tick >= scene.floor.bg_lockout_until {
        scene.floor.bg_lockout_until = scene.tick + cfg.ticks(cfg.background_lockout_seconds);
        set_background(scene, !scene.floor.bg_active, fx);
    }
    check_evolution(scene, model, cfg, fx);
    ambient_light_policy(scene, fx);
}

/// Switches the background music and reports it.
pub fn set_background(scene: &mut SceneState, on: bool, fx: &mut Effects) {
    scene.floor.bg_active = on;
    fx.background.push((scene.tick, on));
    if on {
        background_note(scene, fx);
    }
}

fn background_note(scene: &SceneState, fx: &mut Effects) {
    fx.notes.push(NoteEvent {
        tick: scene.tick,
        player: PlayerId::P1,
        instrument: scene.player(PlayerId::P1).instrument,
        pitch: 36 + scene.current_chord.root(),
        velocity: 60,
        pan: 0.0,
        source: NoteSource::Background,
    });
}

/// Updates circle visibility from the mode, unlock milestone and cooldown.
pub fn refresh_circles(scene: &mut SceneState) {
    if !scene.floor.circles_unlocked && PlayerId::BOTH.iter().all(|&p| scene.owns_permanent(p)) {
        scene.floor.circles_unlocked = true;
    }
    let visible = scene.floor.evolution_mode == EvolutionMode::Interactable
        && scene.floor.circles_unlocked
        && scene.tick >= scene.floor.evolution_cooldown_until;
    for c in &mut scene.floor.evolution_circles {
        c.visible = visible;
    }
}

fn dual_occupancy(scene: &SceneState) -> bool {
    let (Some(a), Some(b)) = (scene.players[0].floor, scene.players[1].floor) else {
        return false;
    };
    let [c0, c1] = &scene.floor.evolution_circles;
    (c0.area.contains(a) && c1.area.contains(b)) || (c1.area.contains(a) && c0.area.contains(b))
}

/// Fires a chord change on the rising edge of both players standing in the
/// (visible) circles.
pub fn check_evolution(scene: &mut SceneState, model: &ChordModel, cfg: &EngineConfig, fx: &mut Effects) {
    refresh_circles(scene);
    let occupied = dual_occupancy(scene);
    if !occupied {
        scene.floor.evolution_armed = true;
        return;
    }
    if scene.floor.circles_visible() && scene.floor.evolution_armed {
        scene.floor.evolution_armed = false;
        scene.floor.evolution_cooldown_until = scene.tick + cfg.ticks(cfg.evolution_cooldown_seconds);
        advance_chord(scene, model, cfg, fx);
        refresh_circles(scene);
    }
}

/// Automatic evolution clock, one tick at a time.
pub fn tick_evolution(scene: &mut SceneState, model: &ChordModel, cfg: &EngineConfig, fx: &mut Effects) {
    match scene.floor.evolution_mode {
        EvolutionMode::Automatic => {
            scene.floor.auto_ticks += 1;
            if scene.floor.auto_ticks >= cfg.ticks(cfg.auto_evolution_seconds) {
                scene.floor.auto_ticks = 0;
                advance_chord(scene, model, cfg, fx);
            }
        }
        EvolutionMode::Interactable => check_evolution(scene, model, cfg, fx),
        EvolutionMode::Disabled => {}
    }
}

/// Draws the next chord from the model and re-pitches the scene.
pub fn advance_chord(scene: &mut SceneState, model: &ChordModel, cfg: &EngineConfig, fx: &mut Effects) {
    let from = scene.current_chord;
    let to = model.next_chord(from, &mut scene.rng).unwrap_or(from);
    playback::rechord(scene, to, cfg);
    fx.chord_changes.push(ChordChange {
        tick: scene.tick,
        from,
        to,
        notes_before: fx.notes.len(),
    });
    if scene.floor.bg_active {
        background_note(scene, fx);
    }
}

fn random_velocity(scene: &mut SceneState, speed: f64) -> Vec2 {
    loop {
        let v = Vec2::new(scene.rng.range(-1.0, 1.0), scene.rng.range(-1.0, 1.0));
        let len = v.length();
        if len > 1e-3 && len <= 1.0 {
            return v.scale(speed / len);
        }
    }
}

fn free_position(scene: &mut SceneState, radius: f64) -> Vec2 {
    let clearance = radius * 2.0;
    let mut pos = Vec2::new(0.5, 0.5);
    for _ in 0..16 {
        pos = Vec2::new(
            scene.rng.range(radius, 1.0 - radius),
            scene.rng.range(radius, 1.0 - radius),
        );
        let clear = scene
            .players
            .iter()
            .filter_map(|p| p.floor)
            .all(|f| f.distance(pos) > radius + clearance);
        if clear {
            break;
        }
    }
    pos
}

/// Turns the floor blobs on (spawning them) or off (clearing them).
pub fn set_blobs(scene: &mut SceneState, active: bool, cfg: &EngineConfig) {
    scene.floor.blobs_active = active;
    scene.floor.blobs.clear();
    if active {
        for _ in 0..cfg.blob_count {
            let pos = free_position(scene, cfg.blob_radius);
            let velocity = random_velocity(scene, cfg.blob_speed);
            scene.floor.blobs.push(Blob {
                pos,
                velocity,
                radius: cfg.blob_radius,
            });
        }
    }
}

/// Moves blobs, bouncing off the floor edges, and plays a percussive note
/// when a player touches one; the touched blob then respawns elsewhere.
pub fn update_blobs(scene: &mut SceneState, dt: f64, cfg: &EngineConfig, fx: &mut Effects) {
    if !scene.floor.blobs_active {
        scene.floor.blobs.clear();
        return;
    }
    for blob in &mut scene.floor.blobs {
        let mut p = blob.pos.add(blob.velocity.scale(dt));
        if p.x < 0.0 {
            p.x = -p.x;
            blob.velocity.x = -blob.velocity.x;
        } else if p.x > 1.0 {
            p.x = 2.0 - p.x;
            blob.velocity.x = -blob.velocity.x;
        }
        if p.y < 0.0 {
            p.y = -p.y;
            blob.velocity.y = -blob.velocity.y;
        } else if p.y > 1.0 {
            p.y = 2.0 - p.y;
            blob.velocity.y = -blob.velocity.y;
        }
        blob.pos = Vec2::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0));
    }
    for player in PlayerId::BOTH {
        let Some(foot) = scene.player(player).floor else {
            continue;
        };
        for i in 0..scene.floor.blobs.len() {
            let blob = &scene.floor.blobs[i];
            if blob.pos.distance(foot) > blob.radius {
                continue;
            }
            fx.notes.push(NoteEvent {
                tick: scene.tick,
                player,
                instrument: scene.player(player).instrument,
                pitch: PERCUSSION_NOTE,
                velocity: 90,
                pan: melody_pan(blob.pos.x),
                source: NoteSource::Blob,
            });
            let radius = blob.radius;
            let pos = free_position(scene, radius);
            let velocity = random_velocity(scene, cfg.blob_speed);
            scene.floor.blobs[i] = Blob { pos, velocity, radius };
        }
    }
}

/// Red and bright while any tracked player is outside the interaction space,
/// green and dim once every tracked player is inside. Emits only on change.
pub fn ambient_light_policy(scene: &mut SceneState, fx: &mut Effects) {
    let tracked: Vec<Vec2> = scene.players.iter().filter_map(|p| p.floor).collect();
    if tracked.is_empty() {
        return;
    }
    let state = if tracked.iter().all(|&p| scene.floor.interaction_space.contains(p)) {
        AmbientState::Inside
    } else {
        AmbientState::Outside
    };
    if scene.floor.ambient == Some(state) {
        return;
    }
    scene.floor.ambient = Some(state);
    let (color, brightness) = match state {
        AmbientState::Inside => (ColorRGB::GREEN, AMBIENT_DIM),
        AmbientState::Outside => (ColorRGB::RED, AMBIENT_BRIGHT),
    };
    fx.devices.push(DeviceCommand {
        tick: scene.tick,
        target: DeviceTarget::AmbientLights,
        action: DeviceAction::Ambient { color, brightness },
    });
}
