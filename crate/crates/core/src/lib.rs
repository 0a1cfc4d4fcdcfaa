//! Gaussian measurement uncertainty relations: states, observables, relative
//! entropy and the closed-form bounds built from them.

pub mod entropy;
pub mod error;
pub mod linalg;
pub mod mur;
pub mod observables;
pub mod optimize;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
