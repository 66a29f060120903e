//! Model files, Monte Carlo checks of the heat semigroup, verification
//! sweeps and the command-line interface built on `tanno-core`.

pub mod cli;
pub mod heatsim;
pub mod model_json;
pub mod report;
pub mod verify;

pub use model_json::{load_model, save_model, LoadError};
