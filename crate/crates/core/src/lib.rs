//! Logit-Q learning dynamics for finite identical-interest Markov games.
//!
//! Agents play the stage game of the visited state with log-linear
//! (soft-max, update-in-turn) responses to a Q-function estimate that is
//! frozen for the length of a round. Between rounds the value estimate is
//! refreshed from the round's play and the Q-function is rebuilt from it,
//! which approximates value iteration on the underlying game.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! experiment harness and the command line live in the `logitq` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod game;
pub mod graph;
pub mod linalg;
pub mod logit;
pub mod model;
pub mod rng;
pub mod rounds;
pub mod solver;

mod dd;

pub use crate::error::{CoreError, Result};
pub use crate::game::{
    generate_random_game, GameGenConfig, JointActionSpace, MarkovGame, QTable, Violation,
};
pub use crate::rng::SimRng;
