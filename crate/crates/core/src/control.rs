//! Caregiver steering commands.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::hints::{HintShape, HintStyle};
use crate::interaction::EvolutionMode;
use crate::scene::{ColorRGB, PlayerId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ControlCommand {
    Pause,
    Resume,
    /// Removes every permanent line.
    RemoveLines,
    /// Removes every paint spot.
    RemoveCircles,
    ToggleBgMusic,
    SetEvolutionMode {
        mode: EvolutionMode,
    },
    PlayAllMelodies,
    ToggleBlobs,
    /// Exchanges the two players' colors and instruments.
    SwapPlayers,
    SwapHands {
        player: PlayerId,
    },
    SetBrushColor {
        player: PlayerId,
        color: ColorRGB,
    },
    SetBackgroundColor {
        color: ColorRGB,
    },
    SetVibrationEnabled {
        enabled: bool,
    },
    TriggerHint {
        shape: HintShape,
        pos: Vec2,
        player: PlayerId,
        style: HintStyle,
    },
    TutorialStep {
        index: u32,
    },
}

impl ControlCommand {
    /// One value of every variant, for codec tests and fuzz seeds.
    pub fn examples() -> Vec<ControlCommand> {
        vec![
            ControlCommand::Pause,
            ControlCommand::Resume,
            ControlCommand::RemoveLines,
            ControlCommand::RemoveCircles,
            ControlCommand::ToggleBgMusic,
            ControlCommand::SetEvolutionMode {
                mode: EvolutionMode::Automatic,
            },
            ControlCommand::PlayAllMelodies,
            ControlCommand::ToggleBlobs,
            ControlCommand::SwapPlayers,
            ControlCommand::SwapHands { player: PlayerId::P2 },
            ControlCommand::SetBrushColor {
                player: PlayerId::P1,
                color: ColorRGB::GREEN,
            },
            ControlCommand::SetBackgroundColor {
                color: ColorRGB::new(10, 20, 30),
            },
            ControlCommand::SetVibrationEnabled { enabled: false },
            ControlCommand::TriggerHint {
                shape: HintShape::House,
                pos: Vec2::new(0.25, 0.75),
                player: PlayerId::P1,
                style: HintStyle::Dashed,
            },
            ControlCommand::TutorialStep { index: 2 },
        ]
    }
}
