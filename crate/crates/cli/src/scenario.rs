//! Scenario scripts: a header of `seed` and `set` lines, then one timed
//! step per line.
//!
//! ```text
//! # two strokes
//! seed 7
//! set evolution_mode automatic
//! @0 hand 1 0.2 0.3 1.5
//! @0 brush 1 down
//! @5 control set_brush_color P1 0,200,0
//! @900 end
//! ```
//!
//! Lines whose first non-blank character is `#` are comments.

use std::fmt::Write as _;

use musictraces_core::control::ControlCommand;
use musictraces_core::interaction::InputKind;
use musictraces_core::{PlayerId, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Input(InputKind),
    Control(ControlCommand),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub line: usize,
    pub tick: u64,
    pub action: Action,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub overrides: Vec<(String, String)>,
    pub steps: Vec<Step>,
    pub end: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

pub const DEFAULT_SCREEN_DISTANCE: f64 = 1.5;

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, String> {
        self.iter.next().ok_or_else(|| format!("missing {what}"))
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, String> {
        let t = self.next(what)?;
        t.parse().map_err(|_| format!("invalid {what} {t:?}"))
    }

    fn coord(&mut self, what: &str) -> Result<f64, String> {
        let v: f64 = self.parse(what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{what} must be finite"))
        }
    }

    fn player(&mut self) -> Result<PlayerId, String> {
        let t = self.next("player")?;
        match t {
            "1" => Ok(PlayerId::P1),
            "2" => Ok(PlayerId::P2),
            _ => t.parse(),
        }
    }

    fn switch(&mut self, on: &str, off: &str) -> Result<bool, String> {
        let t = self.next(&format!("{on}|{off}"))?;
        if t == on {
            Ok(true)
        } else if t == off {
            Ok(false)
        } else {
            Err(format!("expected {on} or {off}, found {t:?}"))
        }
    }

    fn done(mut self) -> Result<(), String> {
        match self.iter.next() {
            None => Ok(()),
            Some(t) => Err(format!("unexpected {t:?}")),
        }
    }
}

fn parse_control(t: &mut Tokens) -> Result<ControlCommand, String> {
    use ControlCommand as C;
    let verb = t.next("control verb")?;
    Ok(match verb {
        "pause" => C::Pause,
        "resume" => C::Resume,
        "remove_lines" => C::RemoveLines,
        "remove_circles" => C::RemoveCircles,
        "toggle_bg_music" => C::ToggleBgMusic,
        "set_evolution_mode" => C::SetEvolutionMode { mode: t.parse("mode")? },
        "play_all_melodies" => C::PlayAllMelodies,
        "toggle_blobs" => C::ToggleBlobs,
        "swap_players" => C::SwapPlayers,
        "swap_hands" => C::SwapHands { player: t.player()? },
        "set_brush_color" => C::SetBrushColor {
            player: t.player()?,
            color: t.parse("color")?,
        },
        "set_background_color" => C::SetBackgroundColor {
            color: t.parse("color")?,
        },
        "set_vibration_enabled" => C::SetVibrationEnabled {
            enabled: t.switch("true", "false")?,
        },
        "trigger_hint" => C::TriggerHint {
            shape: t.parse("shape")?,
            pos: Vec2::new(t.coord("x")?, t.coord("y")?),
            player: t.player()?,
            style: t.parse("style")?,
        },
        "tutorial_step" => C::TutorialStep {
            index: t.parse("index")?,
        },
        other => return Err(format!("unknown control {other:?}")),
    })
}

fn format_control(cmd: &ControlCommand) -> String {
    use ControlCommand as C;
    let color = |c: &musictraces_core::scene::ColorRGB| format!("{},{},{}", c.r, c.g, c.b);
    match cmd {
        C::Pause => "pause".into(),
        C::Resume => "resume".into(),
        C::RemoveLines => "remove_lines".into(),
        C::RemoveCircles => "remove_circles".into(),
        C::ToggleBgMusic => "toggle_bg_music".into(),
        C::SetEvolutionMode { mode } => format!("set_evolution_mode {mode}"),
        C::PlayAllMelodies => "play_all_melodies".into(),
        C::ToggleBlobs => "toggle_blobs".into(),
        C::SwapPlayers => "swap_players".into(),
        C::SwapHands { player } => format!("swap_hands {player}"),
        C::SetBrushColor { player, color: c } => format!("set_brush_color {player} {}", color(c)),
        C::SetBackgroundColor { color: c } => format!("set_background_color {}", color(c)),
        C::SetVibrationEnabled { enabled } => format!("set_vibration_enabled {enabled}"),
        C::TriggerHint {
            shape,
            pos,
            player,
            style,
        } => {
            format!("trigger_hint {shape} {} {} {player} {style}", pos.x, pos.y)
        }
        C::TutorialStep { index } => format!("tutorial_step {index}"),
    }
}

fn format_input(kind: &InputKind) -> String {
    match kind {
        InputKind::HandMove {
            player,
            pos,
            screen_distance,
        } => {
            format!("hand {player} {} {} {screen_distance}", pos.x, pos.y)
        }
        InputKind::BrushButton { player, pressed } => {
            format!("brush {player} {}", if *pressed { "down" } else { "up" })
        }
        InputKind::EraserHeld { player, held } => format!("eraser {player} {}", if *held { "on" } else { "off" }),
        InputKind::FloorMove { player, pos } => format!("floor {player} {} {}", pos.x, pos.y),
        InputKind::Tick => "tick".into(),
        InputKind::SensorLost => "sensor_lost".into(),
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut scn = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            scn.parse_line(line, trimmed)
                .map_err(|message| ScenarioError { line, message })?;
        }
        Ok(scn)
    }

    fn parse_line(&mut self, line_no: usize, line: &str) -> Result<(), String> {
        if self.end.is_some() {
            return Err("content after end".into());
        }
        let mut t = Tokens {
            iter: line.split_whitespace(),
        };
        let head = t.next("directive")?;
        let Some(tick) = head.strip_prefix('@') else {
            if !self.steps.is_empty() {
                return Err(format!("header directive {head:?} after the first step"));
            }
            match head {
                "seed" => {
                    if self.seed.is_some() {
                        return Err("duplicate seed".into());
                    }
                    self.seed = Some(t.parse("seed")?);
                    return t.done();
                }
                "set" => {
                    let key = t.next("key")?.to_string();
                    let value: Vec<&str> = t.iter.collect();
                    if value.is_empty() {
                        return Err(format!("missing value for {key}"));
                    }
                    self.overrides.push((key, value.join(" ")));
                    return Ok(());
                }
                other => return Err(format!("unknown directive {other:?}")),
            }
        };
        let tick: u64 = tick.parse().map_err(|_| format!("invalid tick {tick:?}"))?;
        if let Some(prev) = self.steps.last() {
            if tick < prev.tick {
                return Err(format!("tick {tick} is before the previous step at {}", prev.tick));
            }
        }
        let verb = t.next("step")?;
        let action = match verb {
            "hand" => {
                let player = t.parse("player slot")?;
                let pos = Vec2::new(t.coord("x")?, t.coord("y")?);
                let screen_distance = match t.iter.next() {
                    None => DEFAULT_SCREEN_DISTANCE,
                    Some(d) => d
                        .parse::<f64>()
                        .ok()
                        .filter(|d| d.is_finite())
                        .ok_or_else(|| format!("invalid screen distance {d:?}"))?,
                };
                Action::Input(InputKind::HandMove {
                    player,
                    pos,
                    screen_distance,
                })
            }
            "brush" => Action::Input(InputKind::BrushButton {
                player: t.parse("player slot")?,
                pressed: t.switch("down", "up")?,
            }),
            "eraser" => Action::Input(InputKind::EraserHeld {
                player: t.parse("player slot")?,
                held: t.switch("on", "off")?,
            }),
            "floor" => Action::Input(InputKind::FloorMove {
                player: t.parse("player slot")?,
                pos: Vec2::new(t.coord("x")?, t.coord("y")?),
            }),
            "tick" => Action::Input(InputKind::Tick),
            "sensor_lost" => Action::Input(InputKind::SensorLost),
            "control" => Action::Control(parse_control(&mut t)?),
            "end" => {
                t.done()?;
                self.end = Some(tick);
                return Ok(());
            }
            other => return Err(format!("unknown step {other:?}")),
        };
        t.done()?;
        self.steps.push(Step {
            line: line_no,
            tick,
            action,
        });
        Ok(())
    }

    /// Last tick the scenario covers.
    pub fn end_tick(&self) -> u64 {
        let last = self.steps.last().map_or(0, |s| s.tick);
        self.end.map_or(last, |e| e.max(last))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed {seed}");
        }
        for (k, v) in &self.overrides {
            let _ = writeln!(out, "set {k} {v}");
        }
        for s in &self.steps {
            let body = match &s.action {
                Action::Input(k) => format_input(k),
                Action::Control(c) => format!("control {}", format_control(c)),
            };
            let _ = writeln!(out, "@{} {body}", s.tick);
        }
        if let Some(e) = self.end {
            let _ = writeln!(out, "@{e} end");
        }
        out
    }
}
