//! Reduced informationally complete projective measurement designs for
//! `d`-level quantum systems, built from isotropic lines of `Z_d²` and from
//! Weyl operators over finite fields.

pub mod cli;
pub mod cmat;
pub mod error;
pub mod gfq;
pub mod mass_cover;
pub mod phase_space;
pub mod tomo;
pub mod verify;
pub mod weyl;
pub mod zmod;

pub use error::{Error, Result};
