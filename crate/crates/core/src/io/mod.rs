//! Network tables on disk and synthetic test grids.

pub mod synth;
pub mod tables;

pub use synth::{generate_synthetic, Counts, MeshSpec, PocketSpec, Prediction, SpecError, StringSpec, SyntheticSpec, TreeSpec, VoltageTiers};
pub use tables::{load_dir, load_network, save_dir, save_network, TableError};
