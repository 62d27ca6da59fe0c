//! Goal-oriented question generation for a guessing game between an
//! Oracle, a Guesser and a Questioner trained with REINFORCE.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod game;
pub mod guesser;
pub mod oracle;
pub mod persist;
pub mod questioner;
pub mod rewards;
pub mod seed;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
