//! Simulation toolkit for unsaturated porous media flow coupled to
//! thermomechanical effects.
//!
//! The library is organized around three layers:
//!
//! * **Operators** — scalar play/Preisach hysteresis ([`hysteresis`]) for the
//!   capillary pressure–saturation relation, and a tensor stop operator with a
//!   von Mises yield surface ([`plasticity`]) for the solid skeleton. Both come
//!   with exact discrete energy identities that the solver's ledgers rely on.
//! * **Constitutive laws** ([`constitutive`]) — pressure-dependent mobility,
//!   temperature-dependent conductivity, saturation curve, cut-off functions,
//!   and a validator for the hypotheses the solver needs.
//! * **Solver** — a 1D spectral and a 2D finite-element discretization
//!   ([`discretization`]), a staggered implicit time stepper ([`solver`]), and
//!   an energy/positivity audit ([`diagnostics`]).
//!
//! The `porohyst` binary (see [`cli`]) drives single runs, regularization
//! sweeps, refinement studies, and a self-test suite from a flat key = value
//! configuration file.

#[cfg(doctest)]
mod book;

pub mod cli;
pub mod config;
pub mod constitutive;
pub mod diagnostics;
pub mod discretization;
pub mod plasticity;
pub mod exact;
pub mod hysteresis;
pub mod quadrature;
pub mod selftest;
pub mod snapshot;
pub mod solver;
