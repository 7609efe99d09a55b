//! The tick loop. Inputs and commands are applied in arrival order at tick
//! boundaries; everything the outside world should hear about comes back as
//! [`Effects`].

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chord::ChordSymbol;
use crate::config::EngineConfig;
use crate::control::ControlCommand;
use crate::geometry::Vec2;
use crate::hints::{
    self, HintRequest, HintShape, HintStyle, IdleCue, IdleStage, IdleState, IsolationTracker, Notification,
    NotificationKind, NotificationPayload,
};
use crate::interaction::{
    self, DeviceAction, DeviceCommand, DeviceTarget, DwellTracker, InputEvent, InputKind, BRUSH_HINT_BRIGHTNESS,
    BRUSH_IDLE_BRIGHTNESS,
};
use crate::markov::ChordModel;
use crate::pitch::{melody_pan, quantize_pitch};
use crate::playback::{self, NoteEvent, NoteSource};
use crate::scene::{self, ColorRGB, Hand, HintOrigin, ObjectId, PlayerId, SceneObject, SceneState, TemporaryStroke};

/// A harmony change. `notes_before` counts the notes of the same
/// [`Effects`] emitted under the old chord.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChordChange {
    pub tick: u64,
    pub from: ChordSymbol,
    pub to: ChordSymbol,
    pub notes_before: usize,
}

/// Everything produced by one engine call.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Effects {
    pub notes: Vec<NoteEvent>,
    pub devices: Vec<DeviceCommand>,
    pub notifications: Vec<Notification>,
    pub chord_changes: Vec<ChordChange>,
    /// `(tick, on)` for every background music switch.
    pub background: Vec<(u64, bool)>,
}

impl Effects {
    pub fn extend(&mut self, other: Effects) {
        let offset = self.notes.len();
        self.notes.extend(other.notes);
        self.devices.extend(other.devices);
        self.notifications.extend(other.notifications);
        self.chord_changes
            .extend(other.chord_changes.into_iter().map(|c| ChordChange {
                notes_before: c.notes_before + offset,
                ..c
            }));
        self.background.extend(other.background);
    }

    /// Chord in force for each note, given the chord before this call.
    pub fn note_chords(&self, initial: ChordSymbol) -> Vec<ChordSymbol> {
        let mut current = initial;
        let mut changes = self.chord_changes.iter().peekable();
        (0..self.notes.len())
            .map(|i| {
                while let Some(c) = changes.next_if(|c| c.notes_before <= i) {
                    current = c.to;
                }
                current
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
            && self.devices.is_empty()
            && self.notifications.is_empty()
            && self.chord_changes.is_empty()
            && self.background.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("no player in sensor slot {0}")]
    StalePlayer(u8),
    #[error("event for tick {event} arrived after tick {now}")]
    OutOfOrder { event: u64, now: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("initial chord {0} is not in the model vocabulary")]
    UnknownInitialChord(ChordSymbol),
}

/// Per-player gesture state that lives beside the scene.
#[derive(Clone, Debug)]
struct Tracking {
    stroke: Option<ObjectId>,
    distances: Vec<f64>,
    dwell: Option<DwellTracker>,
    dwell_nodes: Vec<ObjectId>,
    explore: f64,
    contacts: BTreeSet<ObjectId>,
    idle: IdleState,
    isolation: IsolationTracker,
    recent: VecDeque<(ObjectId, Vec<Vec2>)>,
}

impl Tracking {
    fn new(player: PlayerId) -> Self {
        Self {
            stroke: None,
            distances: Vec::new(),
            dwell: None,
            dwell_nodes: Vec::new(),
            explore: 0.0,
            contacts: BTreeSet::new(),
            idle: IdleState::new(player),
            isolation: IsolationTracker::new(player),
            recent: VecDeque::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Engine {
    cfg: EngineConfig,
    model: ChordModel,
    scene: SceneState,
    tracking: [Tracking; 2],
}

const EXPLORE_VELOCITY: u8 = 70;
const TOUCH_VELOCITY: u8 = 100;

impl Engine {
    pub fn new(cfg: EngineConfig, model: ChordModel) -> Result<Self, EngineError> {
        if !model.contains(cfg.initial_chord) {
            return Err(EngineError::UnknownInitialChord(cfg.initial_chord));
        }
        let scene = SceneState::new(&cfg, cfg.initial_chord);
        Ok(Self {
            cfg,
            model,
            scene,
            tracking: [Tracking::new(PlayerId::P1), Tracking::new(PlayerId::P2)],
        })
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ChordModel {
        &self.model
    }

    pub fn tick(&self) -> u64 {
        self.scene.tick
    }

    pub fn hash(&self) -> u64 {
        scene::scene_hash(&self.scene)
    }

    pub fn idle_state(&self, player: PlayerId) -> &IdleState {
        &self.tracking[player.index()].idle
    }

    /// Commands sent once when a session starts: both brush LEDs yellow.
    pub fn initial_effects(&self) -> Effects {
        let mut fx = Effects::default();
        for p in PlayerId::BOTH {
            fx.devices.push(DeviceCommand {
                tick: self.scene.tick,
                target: DeviceTarget::brush(p),
                action: DeviceAction::Led {
                    color: ColorRGB::YELLOW,
                    brightness: BRUSH_IDLE_BRIGHTNESS,
                },
            });
        }
        fx
    }

    /// Runs tick steps until the engine reaches `tick`.
    pub fn advance_to(&mut self, tick: u64) -> Effects {
        let mut fx = Effects::default();
        while self.scene.tick < tick {
            fx.extend(self.step_tick());
        }
        fx
    }

    /// One clock tick. While paused only the tick counter moves.
    pub fn step_tick(&mut self) -> Effects {
        let mut fx = Effects::default();
        self.scene.tick += 1;
        if self.scene.paused {
            return fx;
        }
        let dt = self.cfg.dt();
        self.step_cursors(dt, &mut fx);
        self.fade_strokes();
        hints::expire_hints(&mut self.scene);
        interaction::update_blobs(&mut self.scene, dt, &self.cfg, &mut fx);
        interaction::tick_evolution(&mut self.scene, &self.model, &self.cfg, &mut fx);
        for p in PlayerId::BOTH {
            self.step_dwell(p, dt, &mut fx);
        }
        for p in PlayerId::BOTH {
            let vib = self.scene.vibration_enabled;
            let cues = hints::update_idleness(&mut self.tracking[p.index()].idle, dt, false, vib, &self.cfg);
            self.apply_cues(p, &cues, &mut fx);
        }
        self.update_area(&mut fx);
        fx
    }

    /// Applies a sensor event after advancing the clock to its tick.
    /// Events that arrive while paused only advance the clock, except
    /// `SensorLost`, which pauses the session and notifies the caregiver.
    pub fn process_event(&mut self, ev: &InputEvent) -> Result<Effects, EngineError> {
        if ev.tick < self.scene.tick {
            return Err(EngineError::OutOfOrder {
                event: ev.tick,
                now: self.scene.tick,
            });
        }
        let player = match ev.kind.player_slot() {
            Some(slot) => Some(PlayerId::from_slot(slot).ok_or(EngineError::StalePlayer(slot))?),
            None => None,
        };
        let checked = match &ev.kind {
            InputKind::HandMove {
                pos, screen_distance, ..
            } => {
                if !screen_distance.is_finite() {
                    return Err(EngineError::InvalidInput("non-finite screen distance".into()));
                }
                Some(
                    Vec2::ingest(pos.x, pos.y)
                        .ok_or_else(|| EngineError::InvalidInput("non-finite position".into()))?,
                )
            }
            InputKind::FloorMove { pos, .. } => Some(
                Vec2::ingest(pos.x, pos.y)
                    .ok_or_else(|| EngineError::InvalidInput("non-finite floor position".into()))?,
            ),
            _ => None,
        };
        let mut fx = self.advance_to(ev.tick);
        if ev.kind == InputKind::SensorLost {
            self.absorb(b"input", ev);
            self.scene.paused = true;
            self.notify(NotificationKind::SensorLost, None, NotificationPayload::Empty, &mut fx);
            return Ok(fx);
        }
        if self.scene.paused {
            return Ok(fx);
        }
        self.absorb(b"input", ev);
        match (&ev.kind, player) {
            (InputKind::HandMove { screen_distance, .. }, Some(p)) => {
                self.hand_move(p, checked.unwrap(), *screen_distance, &mut fx)
            }
            (InputKind::BrushButton { pressed, .. }, Some(p)) => self.brush_button(p, *pressed, &mut fx),
            (InputKind::EraserHeld { held, .. }, Some(p)) => self.eraser(p, *held, &mut fx),
            (InputKind::FloorMove { .. }, Some(p)) => {
                interaction::update_floor(&mut self.scene, p, checked.unwrap(), &self.model, &self.cfg, &mut fx)
            }
            _ => {}
        }
        Ok(fx)
    }

    /// Applies a caregiver command at the current tick.
    pub fn apply_command(&mut self, cmd: &ControlCommand) -> Result<Effects, EngineError> {
        let mut fx = Effects::default();
        match cmd {
            ControlCommand::SetBrushColor { player, color } => {
                if self.scene.player(player.other()).color == *color {
                    return Err(EngineError::InvalidCommand(format!(
                        "{color} is already {}'s color",
                        player.other()
                    )));
                }
            }
            ControlCommand::TriggerHint { pos, .. }
                if !(pos.is_finite() && (0.0..=1.0).contains(&pos.x) && (0.0..=1.0).contains(&pos.y)) =>
            {
                return Err(EngineError::InvalidCommand("hint position outside the canvas".into()));
            }
            _ => {}
        }
        self.absorb(b"control", cmd);
        if let ControlCommand::TriggerHint {
            shape,
            pos,
            player,
            style,
        } = cmd
        {
            let req = HintRequest {
                shape: *shape,
                anchor: *pos,
                target_player: *player,
                style: *style,
                color: None,
                origin: HintOrigin::Caregiver,
            };
            self.place_hint(&req)?;
            return Ok(fx);
        }
        let cfg = &self.cfg;
        let scene = &mut self.scene;
        match cmd {
            ControlCommand::Pause => scene.paused = true,
            ControlCommand::Resume => scene.paused = false,
            ControlCommand::RemoveLines => {
                let ids: Vec<ObjectId> = scene.lines().map(|l| l.id).collect();
                for id in ids {
                    scene.remove_line(id);
                }
            }
            ControlCommand::RemoveCircles => {
                let ids: Vec<ObjectId> = scene.nodes().map(|n| n.id).collect();
                for id in ids {
                    scene.remove_node(id);
                }
            }
            ControlCommand::ToggleBgMusic => {
                let on = !scene.floor.bg_active;
                interaction::set_background(scene, on, &mut fx);
            }
            ControlCommand::SetEvolutionMode { mode } => {
                scene.floor.evolution_mode = *mode;
                scene.floor.auto_ticks = 0;
                interaction::refresh_circles(scene);
            }
            ControlCommand::PlayAllMelodies => {
                let sonic: Vec<(ObjectId, PlayerId, Vec2)> = scene
                    .lines()
                    .filter(|l| !l.silent)
                    .map(|l| (l.id, l.owner, l.points[0]))
                    .collect();
                for (id, owner, start) in sonic {
                    let _ = playback::start_playback(scene, id, owner, start, cfg);
                }
            }
            ControlCommand::ToggleBlobs => {
                let on = !scene.floor.blobs_active;
                interaction::set_blobs(scene, on, cfg);
            }
            ControlCommand::SwapPlayers => {
                let [a, b] = &mut scene.players;
                std::mem::swap(&mut a.color, &mut b.color);
                std::mem::swap(&mut a.instrument, &mut b.instrument);
            }
            ControlCommand::SwapHands { player } => {
                let p = scene.player_mut(*player);
                p.active_hand = match p.active_hand {
                    Hand::Left => Hand::Right,
                    Hand::Right => Hand::Left,
                };
            }
            ControlCommand::SetBrushColor { player, color } => scene.player_mut(*player).color = *color,
            ControlCommand::SetBackgroundColor { color } => scene.background_color = *color,
            ControlCommand::SetVibrationEnabled { enabled } => {
                if scene.vibration_enabled && !enabled {
                    for p in PlayerId::BOTH {
                        if self.tracking[p.index()].idle.stage >= IdleStage::Vibrate {
                            fx.devices.push(vibrate(scene.tick, p, false));
                        }
                    }
                }
                scene.vibration_enabled = *enabled;
            }
            ControlCommand::TriggerHint { .. } => unreachable!(),
            ControlCommand::TutorialStep { index } => scene.tutorial_step = Some(*index),
        }
        Ok(fx)
    }

    fn absorb(&mut self, tag: &[u8], payload: &impl Serialize) {
        let mut h = Sha256::new();
        h.update(self.scene.input_digest.to_be_bytes());
        h.update(tag);
        h.update(serde_json::to_vec(payload).expect("payload serializes"));
        let digest = h.finalize();
        self.scene.input_digest = u64::from_be_bytes(digest[..8].try_into().unwrap());
    }

    fn place_hint(&mut self, req: &HintRequest) -> Result<ObjectId, EngineError> {
        let hand = self.scene.player(req.target_player).hand;
        let mut hint = hints::spawn_hint(ObjectId(0), req, hand, self.scene.tick, &self.cfg)
            .map_err(|e| EngineError::InvalidCommand(e.to_string()))?;
        hint.id = self.scene.allocate_id();
        let id = hint.id;
        self.scene.insert(SceneObject::Hint(hint));
        Ok(id)
    }

    fn notify(
        &mut self,
        kind: NotificationKind,
        player: Option<PlayerId>,
        payload: NotificationPayload,
        fx: &mut Effects,
    ) {
        let id = self.scene.next_notification;
        self.scene.next_notification += 1;
        fx.notifications.push(Notification {
            id,
            tick: self.scene.tick,
            kind,
            player,
            payload,
        });
    }

    fn acted(&mut self, p: PlayerId, fx: &mut Effects) {
        let vib = self.scene.vibration_enabled;
        let cues = hints::update_idleness(&mut self.tracking[p.index()].idle, 0.0, true, vib, &self.cfg);
        self.apply_cues(p, &cues, fx);
    }

    fn apply_cues(&mut self, p: PlayerId, cues: &[IdleCue], fx: &mut Effects) {
        let tick = self.scene.tick;
        for cue in cues {
            match cue {
                IdleCue::VibrateOn | IdleCue::VibrateOff => {
                    if self.scene.vibration_enabled {
                        fx.devices.push(vibrate(tick, p, *cue == IdleCue::VibrateOn));
                    }
                }
                IdleCue::LightOn => fx
                    .devices
                    .push(led(tick, p, self.scene.player(p).color, BRUSH_HINT_BRIGHTNESS)),
                IdleCue::LightOff => fx.devices.push(led(tick, p, ColorRGB::YELLOW, BRUSH_IDLE_BRIGHTNESS)),
                IdleCue::AutoHint => {
                    let shape = HintShape::ALL[self.scene.rng.index(HintShape::ALL.len())];
                    let req = HintRequest {
                        shape,
                        anchor: self.scene.player(p).hand.unwrap_or(Vec2::new(0.5, 0.5)),
                        target_player: p,
                        style: HintStyle::Dashed,
                        color: Some(self.scene.player(p).color),
                        origin: HintOrigin::Auto,
                    };
                    self.place_hint(&req).expect("hand position lies on the canvas");
                }
                IdleCue::NotifyStuck => {
                    let seconds = self.tracking[p.index()].idle.seconds_idle;
                    self.notify(
                        NotificationKind::IdleStuck,
                        Some(p),
                        NotificationPayload::Idle { seconds },
                        fx,
                    );
                }
            }
        }
    }

    fn step_cursors(&mut self, dt: f64, fx: &mut Effects) {
        let ids: Vec<ObjectId> = self.scene.cursors().map(|c| c.id).collect();
        for id in ids {
            let Some(SceneObject::Cursor(cursor)) = self.scene.objects.get(&id).cloned() else {
                continue;
            };
            let Some(line) = self.scene.line(cursor.line_id) else {
                self.scene.objects.remove(&id);
                continue;
            };
            let step = playback::tick_cursor(&cursor, dt, line, &self.scene, &self.cfg);
            fx.notes.extend(step.notes);
            match step.cursor {
                Some(c) => self.scene.insert(SceneObject::Cursor(c)),
                None => {
                    self.scene.objects.remove(&id);
                }
            }
        }
    }

    fn fade_strokes(&mut self) {
        let now = self.scene.tick;
        let fade = self.cfg.ticks(self.cfg.stroke_fade_seconds).max(1);
        self.scene.objects.retain(|_, o| match o {
            SceneObject::Stroke(s) => match s.released_tick {
                Some(r) if now - r >= fade => false,
                Some(r) => {
                    s.alpha = 1.0 - (now - r) as f64 / fade as f64;
                    true
                }
                None => true,
            },
            _ => true,
        });
    }

    fn step_dwell(&mut self, p: PlayerId, dt: f64, fx: &mut Effects) {
        let (Some(hand), true) = (self.scene.player(p).hand, self.tracking[p.index()].stroke.is_some()) else {
            return;
        };
        let Some(tracker) = self.tracking[p.index()].dwell.as_mut() else {
            return;
        };
        let Some(spot) = interaction::update_dwell(tracker, hand, dt, &self.cfg) else {
            return;
        };
        let id = self.scene.add_node(p, spot, &self.cfg);
        self.tracking[p.index()].dwell_nodes.push(id);
        let node = self.scene.node(id).expect("node just added");
        fx.notes.push(NoteEvent {
            tick: self.scene.tick,
            player: p,
            instrument: self.scene.player(p).instrument,
            pitch: node.pitch,
            velocity: TOUCH_VELOCITY,
            pan: melody_pan(node.pos.x),
            source: NoteSource::NodeTouch,
        });
        self.acted(p, fx);
    }

    fn update_area(&mut self, fx: &mut Effects) {
        let usage = hints::area_usage(&self.scene, &self.cfg);
        let flags = if usage.objects >= self.cfg.area_overuse_min_objects as usize {
            usage.overused
        } else {
            [false; 4]
        };
        for (q, &flag) in flags.iter().enumerate() {
            if flag && !self.scene.area_overuse[q] {
                let payload = NotificationPayload::Quadrant {
                    index: q,
                    fraction: usage.fractions[q],
                };
                self.notify(NotificationKind::AreaOveruse, None, payload, fx);
            }
        }
        self.scene.area_overuse = flags;
    }

    fn begin_stroke(&mut self, p: PlayerId, at: Vec2) {
        let id = self.scene.allocate_id();
        self.scene.insert(SceneObject::Stroke(TemporaryStroke {
            id,
            owner: p,
            points: vec![at],
            created_tick: self.scene.tick,
            released_tick: None,
            alpha: 1.0,
        }));
        let t = &mut self.tracking[p.index()];
        t.stroke = Some(id);
        t.distances = vec![self.scene.players[p.index()].screen_distance];
        t.dwell = Some(DwellTracker::new(p, at));
        t.dwell_nodes.clear();
        t.explore = 0.0;
    }

    fn cancel_stroke(&mut self, p: PlayerId) {
        let t = &mut self.tracking[p.index()];
        t.dwell = None;
        t.dwell_nodes.clear();
        if let Some(id) = t.stroke.take() {
            self.scene.objects.remove(&id);
        }
    }

    fn end_stroke(&mut self, p: PlayerId, fx: &mut Effects) {
        let t = &mut self.tracking[p.index()];
        t.dwell = None;
        let dwell_nodes = std::mem::take(&mut t.dwell_nodes);
        let Some(id) = t.stroke.take() else {
            return;
        };
        let mean_distance = t.distances.iter().sum::<f64>() / t.distances.len().max(1) as f64;
        let Some(SceneObject::Stroke(stroke)) = self.scene.objects.get_mut(&id) else {
            return;
        };
        stroke.released_tick = Some(self.scene.tick);
        let stroke = stroke.clone();
        let thickness = interaction::stroke_thickness(mean_distance, &self.cfg);
        let Ok(line_id) = scene::finalize_stroke(&mut self.scene, p, &stroke, thickness, &dwell_nodes, &self.cfg)
        else {
            return;
        };
        let points = self.scene.line(line_id).expect("line just created").points.clone();
        let t = &mut self.tracking[p.index()];
        t.idle.has_drawn_first_line = true;
        let best = hints::detect_repetition(
            t.recent.iter().map(|(id, pts)| (*id, pts.as_slice())),
            &points,
            self.cfg.repetition_threshold,
        );
        t.recent.push_back((line_id, points));
        while t.recent.len() > self.cfg.repetition_history as usize {
            t.recent.pop_front();
        }
        if let Some((matched, score)) = best {
            let payload = NotificationPayload::Similarity {
                score,
                line: line_id,
                matched,
            };
            self.notify(NotificationKind::Repetition, Some(p), payload, fx);
        }
    }

    fn hand_move(&mut self, p: PlayerId, pos: Vec2, screen_distance: f64, fx: &mut Effects) {
        {
            let player = self.scene.player_mut(p);
            player.hand = Some(pos);
            if screen_distance > 0.0 {
                player.screen_distance = screen_distance;
            }
        }
        let player = self.scene.player(p).clone();
        if player.eraser_held {
            self.tracking[p.index()].contacts.clear();
            if !scene::erase_at(&mut self.scene, pos, self.cfg.erase_radius).is_empty() {
                self.acted(p, fx);
            }
            return;
        }
        if player.brush_pressed {
            let t = &mut self.tracking[p.index()];
            t.contacts.clear();
            // re-anchor at once so stillness counts from the arrival tick
            if let Some(tracker) = t.dwell.as_mut() {
                interaction::update_dwell(tracker, pos, 0.0, &self.cfg);
            }
            self.draw_to(p, pos, fx);
            return;
        }
        let hits = scene::hit_test(&self.scene, pos, self.cfg.hit_radius);
        let fresh: Vec<ObjectId> = hits
            .iter()
            .copied()
            .filter(|id| !self.tracking[p.index()].contacts.contains(id))
            .collect();
        self.tracking[p.index()].contacts = hits.into_iter().collect();
        let mut touched = false;
        for id in fresh {
            if let Some(node) = self.scene.node(id) {
                let owner = self.scene.player(node.owner);
                fx.notes.push(NoteEvent {
                    tick: self.scene.tick,
                    player: node.owner,
                    instrument: owner.instrument,
                    pitch: node.pitch,
                    velocity: TOUCH_VELOCITY,
                    pan: melody_pan(node.pos.x),
                    source: NoteSource::NodeTouch,
                });
                touched = true;
            } else if self.scene.line(id).is_some() {
                touched |= playback::start_playback(&mut self.scene, id, p, pos, &self.cfg).is_ok();
            }
        }
        if touched {
            self.acted(p, fx);
        }
    }

    fn draw_to(&mut self, p: PlayerId, pos: Vec2, fx: &mut Effects) {
        let Some(id) = self.tracking[p.index()].stroke else {
            self.begin_stroke(p, pos);
            self.acted(p, fx);
            return;
        };
        let Some(SceneObject::Stroke(stroke)) = self.scene.objects.get_mut(&id) else {
            return;
        };
        let last = *stroke.points.last().expect("strokes start with a point");
        if last == pos {
            return;
        }
        stroke.points.push(pos);
        let sd = self.scene.player(p).screen_distance;
        let t = &mut self.tracking[p.index()];
        t.distances.push(sd);
        t.explore += last.distance(pos);
        let grid = playback::grid_for(self.scene.current_chord, &self.cfg);
        while t.explore >= self.cfg.explore_step {
            t.explore -= self.cfg.explore_step;
            fx.notes.push(NoteEvent {
                tick: self.scene.tick,
                player: p,
                instrument: self.scene.players[p.index()].instrument,
                pitch: quantize_pitch(pos.y, &grid),
                velocity: EXPLORE_VELOCITY,
                pan: melody_pan(pos.x),
                source: NoteSource::Explore,
            });
        }
        if let Some(area) = hints::detect_isolation(&mut t.isolation, self.scene.tick, pos, &self.cfg) {
            let payload = NotificationPayload::Area {
                center: area.center,
                radius: area.radius,
            };
            self.notify(NotificationKind::Isolation, Some(p), payload, fx);
        }
        self.acted(p, fx);
    }

    fn brush_button(&mut self, p: PlayerId, pressed: bool, fx: &mut Effects) {
        let player = self.scene.player(p);
        if player.brush_pressed == pressed {
            return;
        }
        let (eraser, hand) = (player.eraser_held, player.hand);
        self.scene.player_mut(p).brush_pressed = pressed;
        self.acted(p, fx);
        if pressed {
            if !eraser {
                if let Some(h) = hand {
                    self.begin_stroke(p, h);
                }
            }
        } else {
            self.end_stroke(p, fx);
        }
    }

    fn eraser(&mut self, p: PlayerId, held: bool, fx: &mut Effects) {
        if self.scene.player(p).eraser_held == held {
            return;
        }
        self.scene.player_mut(p).eraser_held = held;
        self.acted(p, fx);
        if held {
            self.cancel_stroke(p);
            if let Some(h) = self.scene.player(p).hand {
                scene::erase_at(&mut self.scene, h, self.cfg.erase_radius);
            }
        }
    }
}

fn vibrate(tick: u64, p: PlayerId, on: bool) -> DeviceCommand {
    DeviceCommand {
        tick,
        target: DeviceTarget::brush(p),
        action: DeviceAction::Vibrate { on },
    }
}

fn led(tick: u64, p: PlayerId, color: ColorRGB, brightness: f64) -> DeviceCommand {
    DeviceCommand {
        tick,
        target: DeviceTarget::brush(p),
        action: DeviceAction::Led { color, brightness },
    }
}
