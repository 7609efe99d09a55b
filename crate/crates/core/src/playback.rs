//! Proximity and harmonization rules plus cursor playback.
//!
//! A cursor always covers whole laps of its line starting from the point
//! where it was hit: one lap for an open line, `closed_loops` laps for a
//! closed one, with the gain shrinking by `1/closed_loops` of its value at
//! every wrap. Each melody node therefore sounds once per lap.

use serde::{Deserialize, Serialize};

use crate::chord::ChordSymbol;
use crate::config::EngineConfig;
use crate::geometry::{self, Vec2};
use crate::pitch::{melody_pan, quantize_pitch, PitchGrid};
use crate::scene::{Cursor, Instrument, Node, ObjectId, PathLine, PlayerId, SceneObject, SceneState};

/// A node attached to a line, at the arclength of its nearest line point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelodyEntry {
    pub node: ObjectId,
    pub at: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteSource {
    NodeTouch,
    CursorPass,
    Explore,
    Blob,
    Background,
}

impl NoteSource {
    /// Sources whose pitch must be a tone of the current chord.
    pub fn is_pitched(self) -> bool {
        matches!(
            self,
            NoteSource::NodeTouch | NoteSource::CursorPass | NoteSource::Explore
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoteSource::NodeTouch => "node_touch",
            NoteSource::CursorPass => "cursor_pass",
            NoteSource::Explore => "explore",
            NoteSource::Blob => "blob",
            NoteSource::Background => "background",
        }
    }
}

/// Outgoing musical event; synthesis happens elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub tick: u64,
    pub player: PlayerId,
    pub instrument: Instrument,
    pub pitch: u8,
    pub velocity: u8,
    pub pan: f64,
    pub source: NoteSource,
}

pub const FULL_VELOCITY: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlaybackError {
    #[error("line {0} carries no melody")]
    SilentLine(ObjectId),
    #[error("no line {0}")]
    NoSuchLine(ObjectId),
}

pub fn grid_for(chord: ChordSymbol, cfg: &EngineConfig) -> PitchGrid {
    PitchGrid::new(chord, cfg.octave_span, cfg.base_midi)
}

/// Nodes within `radius` of the polyline, ordered by the arclength of their
/// nearest point (ties by id).
pub fn attach_nodes<'a>(points: &[Vec2], nodes: impl IntoIterator<Item = &'a Node>, radius: f64) -> Vec<MelodyEntry> {
    let mut melody: Vec<MelodyEntry> = nodes
        .into_iter()
        .filter_map(|n| {
            let pr = geometry::project(points, n.pos)?;
            (pr.distance <= radius).then_some(MelodyEntry {
                node: n.id,
                at: pr.arclength,
            })
        })
        .collect();
    melody.sort_by(|a, b| a.at.total_cmp(&b.at).then(a.node.cmp(&b.node)));
    melody
}

/// A cursor on `line` starting at the line point nearest to `hit`.
pub fn spawn_cursor(
    id: ObjectId,
    line: &PathLine,
    player: PlayerId,
    hit: Vec2,
    cfg: &EngineConfig,
) -> Result<Cursor, PlaybackError> {
    if line.silent {
        return Err(PlaybackError::SilentLine(line.id));
    }
    let start = geometry::project(&line.points, hit).map_or(0.0, |p| p.arclength);
    Ok(Cursor {
        id,
        line_id: line.id,
        player,
        arclength_pos: start,
        start,
        travelled: 0.0,
        speed: cfg.cursor_speed,
        direction: 1,
        loops_remaining: if line.closed { cfg.closed_loops } else { 0 },
        gain: 1.0,
    })
}

/// Outcome of advancing a cursor by one step.
#[derive(Clone, Debug, PartialEq)]
pub struct CursorStep {
    /// `None` once the cursor has finished its laps.
    pub cursor: Option<Cursor>,
    pub notes: Vec<NoteEvent>,
}

/// Advances `cursor` by `speed * dt`, emitting one note for every melody node
/// passed. `scene` supplies node pitches/positions and player bindings.
pub fn tick_cursor(cursor: &Cursor, dt: f64, line: &PathLine, scene: &SceneState, cfg: &EngineConfig) -> CursorStep {
    let mut c = cursor.clone();
    let mut notes = Vec::new();
    let len = line.length;
    let owner = scene.player(line.owner);
    let offsets: Vec<(f64, &Node)> = line
        .melody()
        .iter()
        .filter_map(|m| scene.node(m.node).map(|n| ((m.at - c.start).rem_euclid(len), n)))
        .collect();
    let mut from = c.travelled;
    let mut budget = c.speed * dt;
    loop {
        let to = from + budget;
        let wraps = to >= len;
        let upto = if wraps { len } else { to };
        let velocity = (FULL_VELOCITY * c.gain).round().clamp(1.0, 127.0) as u8;
        let mut passed: Vec<&(f64, &Node)> = offsets.iter().filter(|(d, _)| *d >= from && *d < upto).collect();
        passed.sort_by(|a, b| a.0.total_cmp(&b.0));
        notes.extend(passed.into_iter().map(|(_, n)| NoteEvent {
            tick: scene.tick,
            player: line.owner,
            instrument: owner.instrument,
            pitch: n.pitch,
            velocity,
            pan: melody_pan(n.pos.x),
            source: NoteSource::CursorPass,
        }));
        if !wraps {
            c.travelled = to;
            break;
        }
        budget = to - len;
        from = 0.0;
        if !line.closed || c.loops_remaining <= 1 {
            return CursorStep { cursor: None, notes };
        }
        c.loops_remaining -= 1;
        c.gain *= 1.0 - 1.0 / cfg.closed_loops as f64;
        c.travelled = 0.0;
    }
    c.arclength_pos = (c.start + c.travelled).rem_euclid(len);
    CursorStep { cursor: Some(c), notes }
}

/// Starts (or restarts) `player`'s cursor on a line.
pub fn start_playback(
    scene: &mut SceneState,
    line_id: ObjectId,
    player: PlayerId,
    hit: Vec2,
    cfg: &EngineConfig,
) -> Result<ObjectId, PlaybackError> {
    let line = scene.line(line_id).ok_or(PlaybackError::NoSuchLine(line_id))?;
    let existing = scene
        .cursors()
        .find(|c| c.line_id == line_id && c.player == player)
        .map(|c| c.id);
    let id = match existing {
        Some(id) => id,
        None => {
            if line.silent {
                return Err(PlaybackError::SilentLine(line_id));
            }
            scene.allocate_id()
        }
    };
    let line = scene.line(line_id).ok_or(PlaybackError::NoSuchLine(line_id))?;
    let cursor = spawn_cursor(id, line, player, hit, cfg)?;
    scene.insert(SceneObject::Cursor(cursor));
    Ok(id)
}

/// Switches the harmony and re-pitches every node through the new grid.
pub fn rechord(scene: &mut SceneState, chord: ChordSymbol, cfg: &EngineConfig) {
    scene.current_chord = chord;
    let grid = grid_for(chord, cfg);
    for obj in scene.objects.values_mut() {
        if let SceneObject::Node(n) = obj {
            n.pitch = quantize_pitch(n.pos.y, &grid);
        }
    }
}
