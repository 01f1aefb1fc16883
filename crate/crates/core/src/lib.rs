//! Pareto-boundary solver for backscatter-device-assisted OFDM integrated
//! sensing and communication.

pub mod bcd;
pub mod bd_mod;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod power_alloc;
pub mod problem;
pub mod re_alloc;
pub mod scene;

pub use config::{load_config, SceneConfig};
pub use error::{Error, Result};
pub use problem::{Mode, Problem};
