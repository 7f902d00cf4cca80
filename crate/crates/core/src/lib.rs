//! Numerical laboratory for threshold dynamics of the focusing intercritical
//! nonlinear Schrödinger equation `i∂ₜu + Δu + |u|^{p−1}u = 0` in the radial
//! sector.

pub mod approx;
pub mod band;
pub mod config;
pub mod error;
pub mod evolution;
pub mod fd;
pub mod fit;
pub mod grid;
pub mod ground;
pub mod io;
pub mod laplace;
pub mod linearized;
pub mod modulation;
pub mod special;
pub mod suite;

pub use error::{LabError, Result};
pub use grid::{make_grid, Field, Grid, Norms, RadialGrid};
pub use config::{load_config, parse_config, RunConfig};
pub use ground::{check_identities, closed_form_1d, closed_form_w, solve_ground, GroundProfile, IdentityReport};
