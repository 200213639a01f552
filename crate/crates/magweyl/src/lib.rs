//! Numerical laboratory for the variational problem of a quantum particle with
//! spin that generates its own magnetic field.
//!
//! The object of study is the energy functional
//!
//! ```text
//!     E(A) = Tr⁻ H_{A,V} + (κh²)⁻¹ ∫ |∂A|² dx
//! ```
//!
//! where `H_{A,V} = ((hD−A)·σ)² − V` is the Pauli operator on a periodic
//! 3-D box acting on 2-component spinors, `Tr⁻` sums its negative
//! eigenvalues, and the field term penalizes the magnetic energy of the
//! self-generated vector potential `A`. The crate provides, at desk scale:
//!
//! - spectral grids, fields, and Fourier calculus ([`grid`], [`fft`],
//!   [`field`], [`ops`]);
//! - smooth compactly supported cutoffs with audited derivative bounds
//!   ([`cutoff`]) and potential presets ([`potential`]);
//! - assembly and application of the Pauli operator ([`pauli`]);
//! - negative-spectrum solvers (dense oracle and preconditioned block
//!   Rayleigh–Ritz iteration) with trace functionals ([`spectra`]);
//! - closed-form Weyl phase-space expressions and their corrections
//!   ([`weyl`]);
//! - the Euler–Lagrange current of `Tr⁻` with respect to `A`, a damped
//!   self-consistent minimizer in Coulomb gauge, and an a-priori inequality
//!   suite ([`selfgen`]);
//! - partitions of unity, localized traces, and the exact
//!   commutator-decomposition identity ([`localize`]);
//! - the classical Hamiltonian flow of `|ξ|² − V` and Monte-Carlo
//!   estimation of the near-periodic phase-space fraction ([`dynamics`]);
//! - the rescaling calculus `(h,κ) ↦ (h/γ, κγ)` with its exponent
//!   recurrence, threshold formulas, and empirical exponent fitting
//!   ([`scalelab`]);
//! - an experiment harness with JSON configs, resumable sweeps, and report
//!   generation ([`experiment`]), exposed by the `magweyl` binary.
//!
//! Conventions used throughout: the computational box is `[0,L₁)×[0,L₂)×[0,L₃)`
//! with periodic identification; integrals are site sums times the cell
//! volume; all derivatives are Fourier-spectral with a shared wavenumber
//! table whose Nyquist entry is zeroed, so composed operators (e.g. the
//! Laplacian as divergence of gradient) agree with their one-shot
//! multipliers exactly.

pub mod cutoff;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod grid;
pub mod localize;
pub mod ops;
pub mod pauli;
pub mod potential;
pub mod scalelab;
pub mod selfgen;
pub mod spectra;
pub mod weyl;

pub use error::{Error, Result};
pub use field::{ScalarField, SpinorField, VectorField};
pub use grid::Grid;
