use std::fmt;

use serde::{Deserialize, Serialize};

/// Recommendation or choice at a site. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    /// Enter the site without the armored robot (`a = 0`).
    NoRobot,
    /// Deploy the armored robot first (`a = 1`).
    UseRobot,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::NoRobot, Action::UseRobot];

    pub fn index(self) -> usize {
        match self {
            Action::NoRobot => 0,
            Action::UseRobot => 1,
        }
    }

    pub fn other(self) -> Action {
        match self {
            Action::NoRobot => Action::UseRobot,
            Action::UseRobot => Action::NoRobot,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0 => Some(Action::NoRobot),
            1 => Some(Action::UseRobot),
            _ => None,
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.index() as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Action::from_index(v as usize).ok_or_else(|| format!("action must be 0 or 1, got {v}"))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}
