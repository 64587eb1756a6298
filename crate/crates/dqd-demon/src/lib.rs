//! Feedback-controlled double quantum dot operated as a Maxwell demon.
//!
//! A continuously monitored double dot with a filtered charge detector and a
//! gate feedback is solved at several levels of description:
//!
//! * [`spectral`] and [`grid`]: stationary state of the joint dot–detector
//!   Fokker–Planck master equation, quantum and classical;
//! * [`reduced`]: fast-detector Markov model, closed forms, classical rate
//!   equations and the eigenbasis cross-check;
//! * [`trajectory`]: quantum-jump unraveling with Gaussian measurement records;
//! * [`energetics`]: power, heat and the remaining energy flows;
//! * [`cli`]: configuration files, sweeps, figure presets and CSV output.
//!
//! Energies and rates are in units of the temperature, `k_B = ħ = 1`.

pub mod cli;
pub mod energetics;
pub mod error;
pub mod grid;
pub mod model;
pub mod reduced;
pub mod solver;
pub mod spectral;
pub mod trajectory;

pub use error::{DemonError, Result};
