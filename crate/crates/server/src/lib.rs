//! HTTP front end for interactive mission sessions, plus the `trustmdp`
//! command-line driver.

pub mod api;
pub mod cli;

pub use api::{router, AppState};
