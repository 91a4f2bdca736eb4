//! Spatial and ρ-grids, discrete state, and the velocity history ring.

mod grid;
mod history;
mod state;

pub use grid::{build_grid, RhoGrid, Segment, SpatialGrid};
pub use history::HistoryBuffer;
pub use state::{initialize_state, RhoField, StateSnapshot};
