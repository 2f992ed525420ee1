//! Few-site Bose-Hubbard toolkit for optical trimerized kagome superlattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds the two-colour superlattice potential and the
//!   trimerized kagome cluster graph (sites, strong/weak bonds, reciprocal
//!   vectors).
//! * [`fockspace`] enumerates and ranks the bosonic occupation basis.
//! * [`bosehubbard`] assembles the sparse Hamiltonian with bond-resolved
//!   tunnelling, on-site interaction and site offsets.
//! * [`spectral`] diagonalizes (dense or Lanczos), projects and evolves states.
//! * [`observables`] turns states into bond coherences and time-of-flight
//!   momentum distributions, diffraction-peak populations and asymmetries.
//! * [`fit`] extracts nearest-neighbour coherences from momentum images.
//! * [`experiments`] wires the above into the phase-imprint quench, the
//!   Mott-coherence sweep and the diffraction-asymmetry scan.
//! * [`cli`] is the configuration/manifest layer behind the `kagome` binary.
//!
//! All energies are E/h in Hz, lengths in nm and wavevectors in 1/nm.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bosehubbard;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod fockspace;
pub mod geometry;
pub mod io;
pub mod observables;
pub mod optimize;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
