//! Command implementations behind the `aoi` binary, exposed as a library
//! so integration tests can drive them directly.

pub mod commands;
pub mod presets;
pub mod table;

pub use commands::{cmd_bounds, cmd_simulate, cmd_solve_probs, CliError, SimulateOutput};
pub use presets::{run_preset, PresetOpts, PRESETS};
pub use table::Table;
