//! Test problems and their file formats.

mod burgers;
mod io;
mod random;

pub use burgers::{burgers_system, mass_matrix, stiffness_matrix, BurgersSpec};
pub use io::{
    coefficient_disparity, coefficient_file_json, load_coefficients, load_system,
    read_coefficients, read_system, save_coefficients, save_system, symmetrize_rows,
    system_file_json, CoefficientFile, Disparity, SystemFile, SystemMetadata,
};
pub use random::{random_system, RandomSpec, GENERATOR as RANDOM_GENERATOR};
