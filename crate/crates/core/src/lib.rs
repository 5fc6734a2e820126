//! Numerical workbench for thermodynamic formalism on the full shift over a
//! finite alphabet, with potentials and g-functions tabulated on cylinders.
//!
//! Cylinder tables index words lexicographically, first symbol most
//! significant. A table of depth `k` is a function of the first `k` symbols.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dbar;
pub mod error;
pub mod experiment;
pub mod gmeasure;
pub mod io;
pub mod linalg;
pub mod potential;
pub mod pressure;
pub mod rpf;
pub mod shift;
pub mod table;

pub use error::{Error, Result};
pub use gmeasure::{g_measure, CylinderMeasure, GFunction};
pub use potential::{holder_distance, log_distance, Potential, Tail};
pub use shift::{Alphabet, CylinderIndex, Word};
pub use table::{CylinderFunction, CylinderTable};
