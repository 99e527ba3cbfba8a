//! Finite element laboratory for electrical impedance tomography under the
//! complete electrode model.
//!
//! The crate covers mesh generation on the unit square and on inscribed
//! polygons of the disk ([`mesh`]), the curved-boundary maps and estimates
//! ([`geometry`]), the P1 forward solver ([`forward`]), Tikhonov
//! reconstruction with H1 or total-variation penalties ([`tikhonov`]) and
//! refinement studies ([`lab`]).

pub mod error;
pub mod forward;
pub mod geometry;
pub mod lab;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod tikhonov;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
