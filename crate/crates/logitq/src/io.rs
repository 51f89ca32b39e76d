//! JSON game files.
//!
//! ```json
//! {
//!   "n_agents": 2, "n_states": 1, "action_counts": [2, 2], "discount": 0.5,
//!   "reward": [[1.0, 0.0, 0.0, 0.5]],
//!   "transition": [[[1.0], [1.0], [1.0], [1.0]]]
//! }
//! ```
//!
//! `reward[s][a]` and `transition[s][a][s']` index joint actions with the
//! mixed-radix encoding (agent 0 most significant).

use std::fs;
use std::path::{Path, PathBuf};

use logitq_core::{JointActionSpace, MarkovGame, Violation};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read or write {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {origin}: {source}")]
    Json {
        origin: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("game document: {0}")]
    Shape(String),
    #[error("game document violates {} invariant(s): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub n_agents: usize,
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub discount: f64,
    pub reward: Vec<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
}

impl GameDocument {
    pub fn from_game(game: &MarkovGame) -> Self {
        let n_states = game.n_states();
        let n_joint = game.n_joint();
        Self {
            n_agents: game.n_agents(),
            n_states,
            action_counts: game.action_counts().to_vec(),
            discount: game.discount(),
            reward: game.rewards().chunks(n_joint).map(<[f64]>::to_vec).collect(),
            transition: (0..n_states)
                .map(|s| (0..n_joint).map(|a| game.transition_row(s, a).to_vec()).collect())
                .collect(),
        }
    }

    /// Checks shapes, then every game invariant.
    pub fn into_game(self) -> Result<MarkovGame, IoError> {
        if self.action_counts.len() != self.n_agents {
            return Err(IoError::Shape(format!(
                "action_counts has {} entries but n_agents = {}",
                self.action_counts.len(),
                self.n_agents
            )));
        }
        let space = JointActionSpace::new(&self.action_counts).map_err(|e| IoError::Shape(e.to_string()))?;
        let n_joint = space.size();
        if self.n_states == 0 {
            return Err(IoError::Shape("n_states must be positive".into()));
        }
        if self.reward.len() != self.n_states {
            return Err(IoError::Shape(format!(
                "reward has {} states, expected {}",
                self.reward.len(),
                self.n_states
            )));
        }
        if self.transition.len() != self.n_states {
            return Err(IoError::Shape(format!(
                "transition has {} states, expected {}",
                self.transition.len(),
                self.n_states
            )));
        }
        let mut reward = Vec::with_capacity(self.n_states * n_joint);
        let mut transition = Vec::with_capacity(self.n_states * n_joint * self.n_states);
        for s in 0..self.n_states {
            if self.reward[s].len() != n_joint {
                return Err(IoError::Shape(format!(
                    "reward[{s}] has {} joint actions, expected {n_joint}",
                    self.reward[s].len()
                )));
            }
            reward.extend_from_slice(&self.reward[s]);
            if self.transition[s].len() != n_joint {
                return Err(IoError::Shape(format!(
                    "transition[{s}] has {} joint actions, expected {n_joint}",
                    self.transition[s].len()
                )));
            }
            for (a, row) in self.transition[s].iter().enumerate() {
                if row.len() != self.n_states {
                    return Err(IoError::Shape(format!(
                        "transition[{s}][{a}] has {} entries, expected {}",
                        row.len(),
                        self.n_states
                    )));
                }
                transition.extend_from_slice(row);
            }
        }
        let game = MarkovGame::from_parts(self.n_states, &self.action_counts, reward, transition, self.discount)
            .map_err(|e| IoError::Shape(e.to_string()))?;
        let violations = game.validate();
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(IoError::Invalid(violations))
        }
    }
}

pub fn parse_game(text: &str) -> Result<MarkovGame, IoError> {
    let doc: GameDocument = serde_json::from_str(text).map_err(|source| IoError::Json {
        origin: "game document".into(),
        source,
    })?;
    doc.into_game()
}

pub fn game_to_json(game: &MarkovGame) -> String {
    serde_json::to_string_pretty(&GameDocument::from_game(game)).expect("game documents always serialize")
}

pub fn load_game(path: &Path) -> Result<MarkovGame, IoError> {
    let text = read_text(path)?;
    let doc: GameDocument = serde_json::from_str(&text).map_err(|source| IoError::Json {
        origin: path.display().to_string(),
        source,
    })?;
    doc.into_game()
}

pub fn save_game(game: &MarkovGame, path: &Path) -> Result<(), IoError> {
    write_text(path, &game_to_json(game))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}
