//! Seeded random scenarios that exercise every input and control kind.

use musictraces_core::control::ControlCommand;
use musictraces_core::hints::{HintShape, HintStyle};
use musictraces_core::interaction::{EvolutionMode, InputKind};
use musictraces_core::rng::SceneRng;
use musictraces_core::scene::ColorRGB;
use musictraces_core::{PlayerId, Vec2};

use crate::scenario::{Action, Scenario, Step, DEFAULT_SCREEN_DISTANCE};

struct Player {
    hand: Vec2,
    brush: bool,
    eraser: bool,
    /// Remaining events of a hand held still.
    hold: u32,
}

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

fn point(rng: &mut SceneRng) -> Vec2 {
    Vec2::new(round4(rng.range(0.02, 0.98)), round4(rng.range(0.02, 0.98)))
}

fn color(rng: &mut SceneRng) -> ColorRGB {
    let v = rng.next_u64();
    ColorRGB {
        r: v as u8,
        g: (v >> 8) as u8,
        b: (v >> 16) as u8,
    }
}

fn pick_player(rng: &mut SceneRng) -> PlayerId {
    if rng.index(2) == 0 {
        PlayerId::P1
    } else {
        PlayerId::P2
    }
}

fn control(rng: &mut SceneRng, colors: &mut [ColorRGB; 2]) -> ControlCommand {
    match rng.index(13) {
        0 => ControlCommand::RemoveLines,
        1 => ControlCommand::RemoveCircles,
        2 => ControlCommand::ToggleBgMusic,
        3 => ControlCommand::SetEvolutionMode {
            mode: [
                EvolutionMode::Interactable,
                EvolutionMode::Automatic,
                EvolutionMode::Disabled,
            ][rng.index(3)],
        },
        4 => ControlCommand::PlayAllMelodies,
        5 => ControlCommand::ToggleBlobs,
        6 => {
            colors.swap(0, 1);
            ControlCommand::SwapPlayers
        }
        7 => ControlCommand::SwapHands {
            player: pick_player(rng),
        },
        8 => {
            let player = pick_player(rng);
            let mut c = color(rng);
            while c == colors[player.other().index()] {
                c = color(rng);
            }
            colors[player.index()] = c;
            ControlCommand::SetBrushColor { player, color: c }
        }
        9 => ControlCommand::SetBackgroundColor { color: color(rng) },
        10 => ControlCommand::SetVibrationEnabled {
            enabled: rng.index(2) == 0,
        },
        11 => ControlCommand::TriggerHint {
            shape: HintShape::ALL[rng.index(HintShape::ALL.len())],
            pos: point(rng),
            player: pick_player(rng),
            style: if rng.index(2) == 0 {
                HintStyle::Dashed
            } else {
                HintStyle::Wavy
            },
        },
        _ => ControlCommand::TutorialStep {
            index: rng.index(8) as u32,
        },
    }
}

/// Builds a valid scenario of `events` steps. Pauses are always resumed a
/// few steps later and brush colors never collide, so every step is
/// accepted by the engine.
pub fn random_scenario(seed: u64, events: usize) -> Scenario {
    let mut rng = SceneRng::new(seed ^ 0x5eed_0f5c_e7a2_1000);
    let mut players: Vec<Player> = (0..2)
        .map(|_| Player {
            hand: point(&mut rng),
            brush: false,
            eraser: false,
            hold: 0,
        })
        .collect();
    let mut colors = [ColorRGB::new(220, 50, 60), ColorRGB::new(40, 90, 220)];
    let mut steps = Vec::with_capacity(events);
    let mut tick = 0u64;
    let mut paused_for: Option<u32> = None;
    let floor_targets = [Vec2::new(0.3, 0.6), Vec2::new(0.7, 0.6), Vec2::new(0.5, 0.15)];

    for n in 0..events {
        tick += match rng.index(100) {
            0 => 100 + rng.index(700) as u64,
            1..=40 => 0,
            41..=90 => 1,
            _ => 2 + rng.index(4) as u64,
        };
        let slot = rng.index(2);
        let p = &mut players[slot];
        let player = slot as u8 + 1;
        let action = if let Some(left) = paused_for.as_mut() {
            if *left == 0 {
                paused_for = None;
                Action::Control(ControlCommand::Resume)
            } else {
                *left -= 1;
                Action::Input(InputKind::HandMove {
                    player,
                    pos: point(&mut rng),
                    screen_distance: DEFAULT_SCREEN_DISTANCE,
                })
            }
        } else {
            match rng.index(100) {
                0..=54 => {
                    if p.hold > 0 {
                        p.hold -= 1;
                    } else if rng.index(40) == 0 {
                        p.hold = 20 + rng.index(30) as u32;
                    } else {
                        let x = (p.hand.x + rng.range(-0.04, 0.04)).clamp(0.0, 1.0);
                        let y = (p.hand.y + rng.range(-0.04, 0.04)).clamp(0.0, 1.0);
                        p.hand = Vec2::new(round4(x), round4(y));
                    }
                    let dist = if rng.index(50) == 0 {
                        0.4
                    } else {
                        DEFAULT_SCREEN_DISTANCE
                    };
                    Action::Input(InputKind::HandMove {
                        player,
                        pos: p.hand,
                        screen_distance: dist,
                    })
                }
                55..=64 => {
                    p.brush = !p.brush;
                    Action::Input(InputKind::BrushButton {
                        player,
                        pressed: p.brush,
                    })
                }
                65..=67 => {
                    p.eraser = !p.eraser;
                    Action::Input(InputKind::EraserHeld { player, held: p.eraser })
                }
                68..=89 => {
                    let pos = if rng.index(3) == 0 {
                        floor_targets[rng.index(floor_targets.len())]
                    } else {
                        point(&mut rng)
                    };
                    Action::Input(InputKind::FloorMove { player, pos })
                }
                90..=94 => Action::Input(InputKind::Tick),
                95 if n + 1 < events => {
                    paused_for = Some(2 + rng.index(10) as u32);
                    Action::Control(ControlCommand::Pause)
                }
                _ => Action::Control(control(&mut rng, &mut colors)),
            }
        };
        steps.push(Step {
            line: n + 2,
            tick,
            action,
        });
    }
    if paused_for.is_some() {
        if let Some(last) = steps.last_mut() {
            last.action = Action::Control(ControlCommand::Resume);
        }
    }
    Scenario {
        seed: Some(seed),
        overrides: Vec::new(),
        steps,
        end: Some(tick + 60),
    }
}
