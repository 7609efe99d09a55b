//! Incremental scene updates for mirrors such as the caregiver console.

use musictraces_core::scene::{CrossingPatch, ObjectId, SceneObject, SceneState};
use serde::{Deserialize, Serialize};

/// Everything that changed between two scenes. `header` is the new scene
/// with its object map and crossings emptied; objects travel in `upserts`
/// and `removed`, crossings only when they changed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    pub header: SceneState,
    pub upserts: Vec<SceneObject>,
    pub removed: Vec<ObjectId>,
    pub crossings: Option<Vec<CrossingPatch>>,
}

impl StateDelta {
    pub fn tick(&self) -> u64 {
        self.header.tick
    }

    pub fn paused(&self) -> bool {
        self.header.paused
    }

    pub fn touches_objects(&self) -> bool {
        !self.upserts.is_empty() || !self.removed.is_empty() || self.crossings.is_some()
    }
}

fn header_of(scene: &SceneState) -> SceneState {
    let mut header = scene.clone();
    header.objects.clear();
    header.crossings.clear();
    header
}

/// Delta that turns `prev` into `next`.
pub fn diff(prev: &SceneState, next: &SceneState) -> StateDelta {
    let upserts = next
        .objects
        .iter()
        .filter(|(id, obj)| prev.objects.get(id) != Some(obj))
        .map(|(_, obj)| obj.clone())
        .collect();
    let removed = prev
        .objects
        .keys()
        .filter(|id| !next.objects.contains_key(id))
        .copied()
        .collect();
    let crossings = (prev.crossings != next.crossings).then(|| next.crossings.clone());
    StateDelta {
        header: header_of(next),
        upserts,
        removed,
        crossings,
    }
}

/// Full-state delta, as if the mirror were empty.
pub fn full(scene: &SceneState) -> StateDelta {
    StateDelta {
        header: header_of(scene),
        upserts: scene.objects.values().cloned().collect(),
        removed: Vec::new(),
        crossings: Some(scene.crossings.clone()),
    }
}

/// Applies `delta` to a mirror of the previous scene.
pub fn apply(mirror: &mut SceneState, delta: &StateDelta) {
    let mut objects = std::mem::take(&mut mirror.objects);
    let mut crossings = std::mem::take(&mut mirror.crossings);
    for id in &delta.removed {
        objects.remove(id);
    }
    for obj in &delta.upserts {
        objects.insert(obj.id(), obj.clone());
    }
    if let Some(c) = &delta.crossings {
        crossings = c.clone();
    }
    *mirror = delta.header.clone();
    mirror.objects = objects;
    mirror.crossings = crossings;
}
