//! Zero-dimensional simulator and analysis toolkit for self-sustained
//! generation-recombination (GR) oscillations in a cryogenic forward-biased
//! P-I-N diode with an embedded defect ensemble.
//!
//! The crate is organized around the measurement workflow of a transient
//! spectroscopy experiment:
//!
//! * [`carrier`] — static cryogenic carrier physics: incomplete dopant
//!   ionization, mobilities, field and drift-current estimates.
//! * [`dynamics`] — the nonlinear core: a three-variable GR + circuit
//!   rate-equation model with fixed-point, Jacobian, stability and
//!   oscillation-boundary analysis, plus a stiff adaptive integrator.
//! * [`protocols`] — drive programs (pulsed EL, DC-biased pulsed PL),
//!   defect-emission readout, Poissonian photon-count synthesis, IV sweeps.
//! * [`analysis`] — zero-padded FFT, Lorentzian A/gamma extraction,
//!   damped-cosine and bi-exponential fits, oscillation classification and
//!   (V, T) phase-map assembly.
//! * [`config`], [`io`], [`sweep`] — configuration schema, CSV/JSON data
//!   contracts and the deterministic parallel sweep harness behind the CLI.

pub mod analysis;
pub mod carrier;
pub mod config;
pub mod dynamics;
pub mod io;
pub mod protocols;
pub mod sweep;
pub mod trace;

pub use carrier::{DeviceParams, MaterialParams};
pub use dynamics::{GrParams, GrState};
pub use trace::{TimeTrace, Unit};
