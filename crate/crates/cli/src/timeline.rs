//! Note timelines exported as tab-separated text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use musictraces_core::NoteEvent;

pub const TSV_HEADER: &str = "tick\tseconds\tplayer\tinstrument\tpitch\tvelocity\tpan\tsource";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoteTimeline {
    tick_rate: u32,
    events: Vec<NoteEvent>,
}

impl NoteTimeline {
    /// Sorts by tick, then player, then source; the sort is stable, so
    /// emission order decides the rest.
    pub fn new(tick_rate: u32, mut events: Vec<NoteEvent>) -> Self {
        events.sort_by_key(|e| (e.tick, e.player, e.source));
        Self { tick_rate, events }
    }

    pub fn events(&self) -> &[NoteEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        tick as f64 / self.tick_rate as f64
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{}\t{}\t{}\t{}\t{:.4}\t{}",
                e.tick,
                self.seconds(e.tick),
                e.player,
                e.instrument,
                e.pitch,
                e.velocity,
                e.pan,
                e.source.as_str()
            );
        }
        out
    }

    /// Event counts keyed by source name.
    pub fn per_source(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for e in &self.events {
            *m.entry(e.source.as_str()).or_default() += 1;
        }
        m
    }

    /// Event counts keyed by player name.
    pub fn per_player(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for e in &self.events {
            *m.entry(e.player.to_string()).or_default() += 1;
        }
        m
    }

    pub fn summary(&self) -> String {
        let join = |items: Vec<String>| {
            if items.is_empty() {
                "none".to_string()
            } else {
                items.join(", ")
            }
        };
        let sources = join(self.per_source().into_iter().map(|(k, v)| format!("{k}={v}")).collect());
        let players = join(self.per_player().into_iter().map(|(k, v)| format!("{k}={v}")).collect());
        format!(
            "notes: {}\nby source: {sources}\nby player: {players}\n",
            self.events.len()
        )
    }
}
