//! Authoritative scene: players, musicographic objects, crossings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chord::ChordSymbol;
use crate::config::EngineConfig;
use crate::geometry::{self, Vec2};
use crate::hints::{HintShape, HintStyle};
use crate::interaction::FloorState;
use crate::playback::{self, MelodyEntry};
use crate::rng::SceneRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

// Accepts a number or, as JSON object keys arrive, a decimal string.
impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct IdVisitor;
        impl serde::de::Visitor<'_> for IdVisitor {
            type Value = ObjectId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object id")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ObjectId, E> {
                Ok(ObjectId(v))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ObjectId, E> {
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(E::invalid_value(serde::de::Unexpected::Str(v), &self));
                }
                v.parse().map(ObjectId).map_err(E::custom)
            }
        }
        d.deserialize_any(IdVisitor)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlayerId {
    P1,
    P2,
}

impl PlayerId {
    pub const BOTH: [PlayerId; 2] = [PlayerId::P1, PlayerId::P2];

    pub fn index(self) -> usize {
        match self {
            PlayerId::P1 => 0,
            PlayerId::P2 => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            PlayerId::P1 => PlayerId::P2,
            PlayerId::P2 => PlayerId::P1,
        }
    }

    /// Sensor body slot (1 or 2) to player.
    pub fn from_slot(slot: u8) -> Option<Self> {
        match slot {
            1 => Some(PlayerId::P1),
            2 => Some(PlayerId::P2),
            _ => None,
        }
    }

    pub fn slot(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlayerId::P1 => "P1",
            PlayerId::P2 => "P2",
        })
    }
}

impl FromStr for PlayerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "P1" | "p1" => Ok(PlayerId::P1),
            "P2" | "p2" => Ok(PlayerId::P2),
            _ => Err(format!("unknown player {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Marimba,
    Handpan,
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instrument::Marimba => "marimba",
            Instrument::Handpan => "handpan",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorRGB {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl ColorRGB {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub const YELLOW: ColorRGB = ColorRGB::new(255, 214, 0);
    pub const RED: ColorRGB = ColorRGB::new(255, 0, 0);
    pub const GREEN: ColorRGB = ColorRGB::new(0, 255, 0);

    /// Channel-wise arithmetic mean, rounding halves up.
    pub fn blend(self, o: Self) -> Self {
        let mean = |a: u8, b: u8| (a as u16 + b as u16).div_ceil(2) as u8;
        Self::new(mean(self.r, o.r), mean(self.g, o.g), mean(self.b, o.b))
    }

    /// `self` composited over `under` at `opacity`, rounding halves up.
    pub fn over(self, under: Self, opacity: f64) -> Self {
        let mix = |a: u8, b: u8| (a as f64 * opacity + b as f64 * (1.0 - opacity) + 0.5).floor() as u8;
        Self::new(mix(self.r, under.r), mix(self.g, under.g), mix(self.b, under.b))
    }
}

impl fmt::Display for ColorRGB {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl FromStr for ColorRGB {
    type Err = String;

    /// Accepts `#rrggbb` or `r,g,b`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid color {s:?}");
        if let Some(hex) = s.strip_prefix('#') {
            if hex.len() != 6 || !hex.is_ascii() {
                return Err(bad());
            }
            let ch = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
            return Ok(Self::new(ch(0)?, ch(2)?, ch(4)?));
        }
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let ch = |p: &str| p.trim().parse::<u8>().map_err(|_| bad());
        Ok(Self::new(ch(parts[0])?, ch(parts[1])?, ch(parts[2])?))
    }
}

/// A player's bindings plus their latest tracked positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub color: ColorRGB,
    pub instrument: Instrument,
    pub active_hand: Hand,
    /// Canvas position of the tracked hand, once seen.
    pub hand: Option<Vec2>,
    /// Last reported distance to the front screen, meters.
    pub screen_distance: f64,
    /// Floor position, once seen.
    pub floor: Option<Vec2>,
    pub brush_pressed: bool,
    pub eraser_held: bool,
}

impl Player {
    fn new(id: PlayerId, color: ColorRGB, instrument: Instrument) -> Self {
        Self {
            id,
            color,
            instrument,
            active_hand: Hand::Right,
            hand: None,
            screen_distance: 1.5,
            floor: None,
            brush_pressed: false,
            eraser_held: false,
        }
    }
}

/// Paint spot carrying one short musical pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: ObjectId,
    pub owner: PlayerId,
    pub pos: Vec2,
    pub color: ColorRGB,
    /// MIDI note, always a tone of the current pitch grid.
    pub pitch: u8,
}

/// Permanent line, a melody when nodes are attached to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLine {
    pub id: ObjectId,
    pub owner: PlayerId,
    /// Closed lines repeat their first vertex at the end.
    pub points: Vec<Vec2>,
    pub closed: bool,
    pub silent: bool,
    pub thickness: f64,
    pub color: ColorRGB,
    pub fill_color: Option<ColorRGB>,
    melody: Vec<MelodyEntry>,
    pub length: f64,
}

impl PathLine {
    pub fn melody(&self) -> &[MelodyEntry] {
        &self.melody
    }

    pub fn melody_ids(&self) -> Vec<ObjectId> {
        self.melody.iter().map(|m| m.node).collect()
    }

    /// Replaces the melody, keeping `silent` in step with it.
    pub fn set_melody(&mut self, mut melody: Vec<MelodyEntry>) {
        melody.sort_by(|a, b| a.at.total_cmp(&b.at).then(a.node.cmp(&b.node)));
        melody.dedup_by_key(|m| m.node);
        self.silent = melody.is_empty();
        self.melody = melody;
    }
}

/// In-progress or fading brush trail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporaryStroke {
    pub id: ObjectId,
    pub owner: PlayerId,
    pub points: Vec<Vec2>,
    pub created_tick: u64,
    /// Set once the brush button is released; fading starts here.
    pub released_tick: Option<u64>,
    pub alpha: f64,
}

/// Who put a hint line on the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintOrigin {
    Auto,
    Caregiver,
}

/// Silent, player-uneraseable guide shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HintLine {
    pub id: ObjectId,
    pub shape: HintShape,
    pub style: HintStyle,
    pub points: Vec<Vec2>,
    pub target_player: PlayerId,
    pub color: Option<ColorRGB>,
    pub origin: HintOrigin,
    pub expires_tick: u64,
}

/// Playback head moving along a sonic line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    pub id: ObjectId,
    pub line_id: ObjectId,
    /// Player whose touch started the cursor.
    pub player: PlayerId,
    /// Current position along the line, in `[0, length]`.
    pub arclength_pos: f64,
    /// Arclength where playback started.
    pub start: f64,
    /// Distance covered since the start.
    pub travelled: f64,
    pub speed: f64,
    pub direction: i8,
    pub loops_remaining: u32,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SceneObject {
    Node(Node),
    Line(PathLine),
    Stroke(TemporaryStroke),
    Hint(HintLine),
    Cursor(Cursor),
}

impl SceneObject {
    pub fn id(&self) -> ObjectId {
        match self {
            SceneObject::Node(o) => o.id,
            SceneObject::Line(o) => o.id,
            SceneObject::Stroke(o) => o.id,
            SceneObject::Hint(o) => o.id,
            SceneObject::Cursor(o) => o.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingPatch {
    pub line_a: ObjectId,
    pub line_b: ObjectId,
    pub at: Vec2,
    pub blended: ColorRGB,
}

/// The complete authoritative state. Serializing it canonically (ordered
/// maps, fixed field order) is what [`scene_hash`] digests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub tick: u64,
    next_id: u64,
    pub next_notification: u64,
    pub objects: BTreeMap<ObjectId, SceneObject>,
    pub crossings: Vec<CrossingPatch>,
    pub current_chord: ChordSymbol,
    pub background_color: ColorRGB,
    pub rng: SceneRng,
    pub paused: bool,
    pub players: [Player; 2],
    pub floor: FloorState,
    pub vibration_enabled: bool,
    pub tutorial_step: Option<u32>,
    /// Quadrants currently flagged as overused, see [`crate::hints::area_usage`].
    pub area_overuse: [bool; 4],
    /// Running digest over every input and command applied so far.
    pub input_digest: u64,
}

impl SceneState {
    pub fn new(cfg: &EngineConfig, chord: ChordSymbol) -> Self {
        Self {
            tick: 0,
            next_id: 1,
            next_notification: 1,
            objects: BTreeMap::new(),
            crossings: Vec::new(),
            current_chord: chord,
            background_color: ColorRGB::new(250, 246, 236),
            rng: SceneRng::new(cfg.seed),
            paused: false,
            players: [
                Player::new(PlayerId::P1, ColorRGB::new(220, 50, 60), Instrument::Marimba),
                Player::new(PlayerId::P2, ColorRGB::new(40, 90, 220), Instrument::Handpan),
            ],
            floor: FloorState::new(cfg),
            vibration_enabled: cfg.vibration_enabled,
            tutorial_step: None,
            area_overuse: [false; 4],
            input_digest: 0,
        }
    }

    /// Fresh object id; ids are never reused within a session.
    pub fn allocate_id(&mut self) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn player(&self, id: PlayerId) -> &Player {
        &self.players[id.index()]
    }

    pub fn player_mut(&mut self, id: PlayerId) -> &mut Player {
        &mut self.players[id.index()]
    }

    pub fn insert(&mut self, obj: SceneObject) {
        self.objects.insert(obj.id(), obj);
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.objects.values().filter_map(|o| match o {
            SceneObject::Node(n) => Some(n),
            _ => None,
        })
    }

    pub fn lines(&self) -> impl Iterator<Item = &PathLine> {
        self.objects.values().filter_map(|o| match o {
            SceneObject::Line(l) => Some(l),
            _ => None,
        })
    }

    pub fn hints(&self) -> impl Iterator<Item = &HintLine> {
        self.objects.values().filter_map(|o| match o {
            SceneObject::Hint(h) => Some(h),
            _ => None,
        })
    }

    pub fn cursors(&self) -> impl Iterator<Item = &Cursor> {
        self.objects.values().filter_map(|o| match o {
            SceneObject::Cursor(c) => Some(c),
            _ => None,
        })
    }

    pub fn node(&self, id: ObjectId) -> Option<&Node> {
        match self.objects.get(&id) {
            Some(SceneObject::Node(n)) => Some(n),
            _ => None,
        }
    }

    pub fn line(&self, id: ObjectId) -> Option<&PathLine> {
        match self.objects.get(&id) {
            Some(SceneObject::Line(l)) => Some(l),
            _ => None,
        }
    }

    pub fn line_mut(&mut self, id: ObjectId) -> Option<&mut PathLine> {
        match self.objects.get_mut(&id) {
            Some(SceneObject::Line(l)) => Some(l),
            _ => None,
        }
    }

    /// Whether `player` owns at least one node or line.
    pub fn owns_permanent(&self, player: PlayerId) -> bool {
        self.objects.values().any(|o| match o {
            SceneObject::Node(n) => n.owner == player,
            SceneObject::Line(l) => l.owner == player,
            _ => false,
        })
    }

    /// Removes a line together with its cursors and crossing patches.
    pub fn remove_line(&mut self, id: ObjectId) -> bool {
        if self.line(id).is_none() {
            return false;
        }
        self.objects.remove(&id);
        self.objects
            .retain(|_, o| !matches!(o, SceneObject::Cursor(c) if c.line_id == id));
        self.crossings.retain(|c| c.line_a != id && c.line_b != id);
        true
    }

    /// Removes a node and detaches it from every melody. Lines left without
    /// nodes turn silent and lose their cursors.
    pub fn remove_node(&mut self, id: ObjectId) -> bool {
        if self.node(id).is_none() {
            return false;
        }
        self.objects.remove(&id);
        let mut silenced = Vec::new();
        for obj in self.objects.values_mut() {
            if let SceneObject::Line(line) = obj {
                if line.melody.iter().any(|m| m.node == id) {
                    let kept = line.melody.iter().filter(|m| m.node != id).cloned().collect();
                    line.set_melody(kept);
                    if line.silent {
                        silenced.push(line.id);
                    }
                }
            }
        }
        self.objects
            .retain(|_, o| !matches!(o, SceneObject::Cursor(c) if silenced.contains(&c.line_id)));
        true
    }

    /// Creates a node at `pos` for `owner`, pitched on `grid`, and attaches
    /// it to every line within `proximity_radius`.
    pub fn add_node(&mut self, owner: PlayerId, pos: Vec2, cfg: &EngineConfig) -> ObjectId {
        let id = self.allocate_id();
        let grid = playback::grid_for(self.current_chord, cfg);
        let node = Node {
            id,
            owner,
            pos,
            color: self.player(owner).color,
            pitch: crate::pitch::quantize_pitch(pos.y, &grid),
        };
        for obj in self.objects.values_mut() {
            if let SceneObject::Line(line) = obj {
                if let Some(pr) = geometry::project(&line.points, pos) {
                    if pr.distance <= cfg.proximity_radius {
                        let mut melody = line.melody.clone();
                        melody.push(MelodyEntry {
                            node: id,
                            at: pr.arclength,
                        });
                        line.set_melody(melody);
                    }
                }
            }
        }
        self.insert(SceneObject::Node(node));
        id
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("stroke too short to keep (length {length})")]
    DegenerateStroke { length: f64 },
}

/// Every node whose center lies within `radius` of `pos` and every line within
/// `radius + thickness / 2`, nearest first (ties by id). Hint lines, strokes
/// and cursors are never hit.
pub fn hit_test(scene: &SceneState, pos: Vec2, radius: f64) -> Vec<ObjectId> {
    let mut hits: Vec<(f64, ObjectId)> = Vec::new();
    for obj in scene.objects.values() {
        match obj {
            SceneObject::Node(n) => {
                let d = n.pos.distance(pos);
                if d <= radius {
                    hits.push((d, n.id));
                }
            }
            SceneObject::Line(l) => {
                let d = geometry::polyline_distance(&l.points, pos);
                if d <= radius + l.thickness / 2.0 {
                    hits.push((d, l.id));
                }
            }
            _ => {}
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    hits.into_iter().map(|(_, id)| id).collect()
}

/// Turns a released stroke into a permanent line.
///
/// The line is closed when its ends are within `close_epsilon`; closed lines
/// get a fill. Nodes near the line form its melody (silent when none); nodes
/// dropped during the stroke are always considered. Crossings with the other
/// player's lines are appended to the scene.
pub fn finalize_stroke(
    scene: &mut SceneState,
    owner: PlayerId,
    stroke: &TemporaryStroke,
    thickness: f64,
    dwell_nodes: &[ObjectId],
    cfg: &EngineConfig,
) -> Result<ObjectId, SceneError> {
    let length = geometry::arclength(&stroke.points);
    if stroke.points.len() < 2 || length < cfg.min_stroke_length {
        return Err(SceneError::DegenerateStroke { length });
    }
    let first = stroke.points[0];
    let last = *stroke.points.last().unwrap();
    let closed = first.distance(last) <= cfg.close_epsilon;
    let mut points = stroke.points.clone();
    if closed && last != first {
        points.push(first);
    }
    let mut melody = playback::attach_nodes(&points, scene.nodes(), cfg.proximity_radius);
    for id in dwell_nodes {
        if let Some(node) = scene.node(*id) {
            if let Some(pr) = geometry::project(&points, node.pos) {
                melody.push(MelodyEntry {
                    node: *id,
                    at: pr.arclength,
                });
            }
        }
    }
    let color = scene.player(owner).color;
    let fill_color = closed.then(|| color.over(scene.background_color, cfg.fill_opacity));
    let id = scene.allocate_id();
    let length = geometry::arclength(&points);
    let mut line = PathLine {
        id,
        owner,
        points,
        closed,
        silent: true,
        thickness: thickness.clamp(cfg.min_thickness, cfg.max_thickness),
        color,
        fill_color,
        melody: Vec::new(),
        length,
    };
    line.set_melody(melody);
    scene.insert(SceneObject::Line(line));
    let patches = blend_crossings(scene, id);
    scene.crossings.extend(patches);
    Ok(id)
}

/// Removes every node and line under the eraser.
pub fn erase_at(scene: &mut SceneState, pos: Vec2, radius: f64) -> Vec<ObjectId> {
    let hits = hit_test(scene, pos, radius);
    let mut removed = Vec::new();
    for id in hits {
        if scene.remove_line(id) || scene.remove_node(id) {
            removed.push(id);
        }
    }
    removed
}

/// One patch per intersection point between `line_id` and each line owned by
/// the other player.
pub fn blend_crossings(scene: &SceneState, line_id: ObjectId) -> Vec<CrossingPatch> {
    let Some(new_line) = scene.line(line_id) else {
        return Vec::new();
    };
    let mut patches = Vec::new();
    for other in scene.lines() {
        if other.owner == new_line.owner {
            continue;
        }
        let mut points: Vec<Vec2> = Vec::new();
        for a in new_line.points.windows(2) {
            for b in other.points.windows(2) {
                if let Some(p) = geometry::segment_intersection(a[0], a[1], b[0], b[1]) {
                    // a crossing through a shared vertex is reported by both segments
                    if !points.iter().any(|q| q.distance(p) < 1e-9) {
                        points.push(p);
                    }
                }
            }
        }
        let blended = new_line.color.blend(other.color);
        patches.extend(points.into_iter().map(|at| CrossingPatch {
            line_a: new_line.id,
            line_b: other.id,
            at,
            blended,
        }));
    }
    patches
}

/// Stable 64-bit digest of the whole scene.
pub fn scene_hash(scene: &SceneState) -> u64 {
    let bytes = serde_json::to_vec(scene).expect("scene serializes");
    let digest = Sha256::digest(&bytes);
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}
