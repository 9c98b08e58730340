//! Extended affine Weyl groups, the intertwiner cocycle of the extended
//! trigonometric Cherednik algebra, integral- and difference-reflection
//! representations, and certified evaluation of generalized Bethe wave
//! functions.

pub mod affine_weyl;
pub mod bethe_series;
pub mod cli_io;
pub mod cocycle;
pub mod difference_reflection;
pub mod error;
pub mod exp_poly;
pub mod hat;
pub mod integral_reflection;
pub mod matrix;
pub mod par;
pub mod quadrature;
pub mod schrodinger_weak;
pub mod root_system;
pub mod sampling;
pub mod scalar;
pub mod wmodules;

pub use error::{Error, Result};
