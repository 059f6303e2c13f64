//! The nonlinear core: a three-variable generation-recombination + circuit
//! rate-equation model.
//!
//! State variables are the free-electron density `n`, the occupied-trap
//! fraction `f` and the lumped internal field `E`. Impact ionization of
//! occupied traps provides the autocatalytic generation channel, trap capture
//! and band recombination remove free electrons, and the field obeys a
//! displacement-current closure against a resistive supply:
//!
//! ```text
//! dn/dt = g_th(T) + g_opt + C_i(E,T) n N_t f - T_c n N_t (1 - f) - l n
//! df/dt = -C_i(E,T) n f + T_c n (1 - f) + C_p(E,T) (1 - f)
//! dE/dt = [ (V - E W) / (R_L A) - j_cond ] / eps_eff
//! ```
//!
//! with `g_th = g_th0 N_t f exp(-E_act / k_B T)` and
//! `C_i = X0 exp(-E_c/E) / (1 + exp((T - T_q)/dT))` (zero against or without
//! field). The ionization/capture exchange conserves `n + N_t f` exactly when
//! generation, recombination and promotion are switched off.
//!
//! The promotion term `C_p (1 - f)`, with
//! `C_p = X_p exp(-E_p/E) / (1 + exp((T - T_q)/dT))` and `E_p > E_c`, is the
//! field-assisted refilling of the active trap level from an inert deep
//! reservoir. It closes the delayed feedback loop (field -> occupation ->
//! carriers -> field) that turns the breakdown bistability into a limit
//! cycle: a pure ionization/capture pair balances occupation and carrier
//! gain through the same expression, which pins the carrier self-rate to -l
//! at every conducting equilibrium and leaves only fold instabilities. With
//! `X_p = 0` the promotion channel is disabled and the pair structure is
//! recovered exactly.
//!
//! Internally all solvers work on the nondimensional state
//! `(u, f, e) = (n/N_t, f, E/E_c)` to control stiffness; public interfaces
//! use physical units (cm^-3, V/cm, 1/s).

mod fixed_point;
mod hopf;
mod integrate;
pub(crate) mod linalg;
mod stability;

pub use fixed_point::{fixed_points, FixedPointError, FixedPointSet};
pub use hopf::{hopf_boundary, leading_real_part, BoundaryPoint};
pub use integrate::{integrate, IntegrationOutput, IntegrationStats, IntegratorError, Tolerances};
pub use stability::{classify_stability, jacobian, Classification, StabilityReport};

use crate::carrier::{self, DeviceParams, MaterialParams, BOLTZMANN_EV_PER_K, ELEMENTARY_CHARGE_C};
use serde::{Deserialize, Serialize};

/// Parameters of the GR + circuit rate-equation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrParams {
    /// Trap density N_t (cm^-3).
    pub trap_density: f64,
    /// Impact-ionization prefactor X0 (cm^3/s).
    pub ionization_prefactor: f64,
    /// Critical field E_c of the lucky-electron factor exp(-E_c/E) (V/cm).
    pub critical_field: f64,
    /// Thermal quench midpoint T_q of the ionization sigmoid (K).
    pub quench_temperature: f64,
    /// Thermal quench width dT (K).
    pub quench_width: f64,
    /// Trap capture coefficient T_c (cm^3/s).
    pub capture_coefficient: f64,
    /// Field-assisted trap promotion prefactor X_p (1/s). Zero disables the
    /// promotion channel.
    pub promotion_prefactor: f64,
    /// Promotion field scale E_p of exp(-E_p/E) (V/cm); steeper than the
    /// ionization factor (E_p > E_c) because promotion draws on a deeper
    /// reservoir.
    pub promotion_field: f64,
    /// Thermal generation attempt rate g_th0 per occupied trap (1/s).
    pub thermal_generation_prefactor: f64,
    /// Activation energy of trap-assisted thermal generation (eV). This is
    /// the near-band-edge defect level of the I-region ensemble, distinct
    /// from the dopant levels in `material`.
    pub trap_activation_energy: f64,
    /// Background optical generation rate g_opt (cm^-3 s^-1).
    pub optical_generation: f64,
    /// Band recombination rate l (1/s), inverse characteristic lifetime.
    pub recombination_rate: f64,
    /// Conduction current magnitude under reverse field (A/cm^2).
    pub reverse_leakage: f64,
    pub material: MaterialParams,
    pub device: DeviceParams,
}

impl GrParams {
    /// The shipped "reference" parameter set.
    ///
    /// Calibrated so that the stable-oscillation island of the default pulsed
    /// EL sweep sits near 8-9 V and 6-13 K on a 565 um device with MHz-scale
    /// limit-cycle frequencies. A calibration target, not a first-principles
    /// prediction.
    pub fn reference() -> Self {
        Self {
            trap_density: 1e12,
            ionization_prefactor: 5.591e-2,
            critical_field: 401.0,
            quench_temperature: 11.0,
            quench_width: 0.12,
            capture_coefficient: 9.447e-9,
            promotion_prefactor: 6.007e22,
            promotion_field: 2710.0,
            thermal_generation_prefactor: 1.33e6,
            trap_activation_energy: 5e-5,
            optical_generation: 0.0,
            recombination_rate: 2e6,
            reverse_leakage: 0.0,
            material: MaterialParams::default(),
            device: DeviceParams::default(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("trap_density", self.trap_density),
            ("ionization_prefactor", self.ionization_prefactor),
            ("critical_field", self.critical_field),
            ("quench_width", self.quench_width),
            ("capture_coefficient", self.capture_coefficient),
            ("recombination_rate", self.recombination_rate),
            ("trap_activation_energy", self.trap_activation_energy),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name}: must be > 0, got {v}"));
            }
        }
        if !(self.promotion_field > 0.0) || !self.promotion_field.is_finite() {
            errs.push(format!(
                "promotion_field: must be > 0, got {}",
                self.promotion_field
            ));
        }
        for (name, v) in [
            (
                "thermal_generation_prefactor",
                self.thermal_generation_prefactor,
            ),
            ("optical_generation", self.optical_generation),
            ("reverse_leakage", self.reverse_leakage),
            ("promotion_prefactor", self.promotion_prefactor),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("{name}: must be >= 0, got {v}"));
            }
        }
        if !self.quench_temperature.is_finite() {
            errs.push(format!(
                "quench_temperature: must be finite, got {}",
                self.quench_temperature
            ));
        }
        errs.extend(
            self.material
                .validate()
                .into_iter()
                .map(|e| format!("material.{e}")),
        );
        errs.extend(
            self.device
                .validate()
                .into_iter()
                .map(|e| format!("device.{e}")),
        );
        errs
    }
}

/// Instantaneous dynamical state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrState {
    /// Free-electron density n (cm^-3).
    pub electron_density: f64,
    /// Occupied-trap fraction f, in [0, 1].
    pub occupied_fraction: f64,
    /// Internal field E (V/cm); may be negative under reverse bias.
    pub field: f64,
}

impl GrState {
    pub fn new(n: f64, f: f64, e: f64) -> Self {
        Self {
            electron_density: n,
            occupied_fraction: f,
            field: e,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.electron_density >= 0.0) {
            errs.push(format!(
                "electron_density must be >= 0, got {}",
                self.electron_density
            ));
        }
        if !(0.0..=1.0).contains(&self.occupied_fraction) {
            errs.push(format!(
                "occupied_fraction must lie in [0,1], got {}",
                self.occupied_fraction
            ));
        }
        if !self.field.is_finite() {
            errs.push(format!("field must be finite, got {}", self.field));
        }
        errs
    }
}

/// Impact ionization coefficient C_i(E, T) in cm^3/s.
///
/// Shockley lucky-electron field factor `exp(-E_c/E)` times a sigmoid
/// thermal quench; identically zero for `E <= 0` (no ionization against or
/// without field).
pub fn impact_ionization_coefficient(field_v_per_cm: f64, t_kelvin: f64, p: &GrParams) -> f64 {
    debug_assert!(t_kelvin > 0.0);
    if field_v_per_cm <= 0.0 {
        return 0.0;
    }
    // max() guards the division; exp(-inf) underflows cleanly to 0.
    let field_factor = (-p.critical_field / field_v_per_cm.max(1e-300)).exp();
    let quench = 1.0 / (1.0 + ((t_kelvin - p.quench_temperature) / p.quench_width).exp());
    p.ionization_prefactor * field_factor * quench
}

/// Field-assisted promotion rate C_p(E, T) into the active trap level
/// (1/s per empty trap); zero for `E <= 0`, quenched by the same thermal
/// sigmoid as the ionization coefficient.
pub fn field_promotion_rate(field_v_per_cm: f64, t_kelvin: f64, p: &GrParams) -> f64 {
    if field_v_per_cm <= 0.0 || p.promotion_prefactor == 0.0 {
        return 0.0;
    }
    let field_factor = (-p.promotion_field / field_v_per_cm.max(1e-300)).exp();
    let quench = 1.0 / (1.0 + ((t_kelvin - p.quench_temperature) / p.quench_width).exp());
    p.promotion_prefactor * field_factor * quench
}

/// Control parameter X = C_i(E,T) * n_t_occupied - l (1/s): the per-electron
/// net autocatalytic growth rate. Oscillation onset tracks its sign.
pub fn control_parameter(
    field_v_per_cm: f64,
    t_kelvin: f64,
    occupied_trap_density_cm3: f64,
    p: &GrParams,
) -> f64 {
    impact_ionization_coefficient(field_v_per_cm, t_kelvin, p) * occupied_trap_density_cm3
        - p.recombination_rate
}

/// Thermal generation rate g_th (cm^-3 s^-1) from occupied traps.
pub fn thermal_generation(occupied_fraction: f64, t_kelvin: f64, p: &GrParams) -> f64 {
    p.thermal_generation_prefactor
        * p.trap_density
        * occupied_fraction
        * (-p.trap_activation_energy / (BOLTZMANN_EV_PER_K * t_kelvin)).exp()
}

/// Conduction current density j = q mu_n n E (A/cm^2), clamped to the
/// configured leakage under reverse field.
pub fn conduction_current_density(s: &GrState, t_kelvin: f64, p: &GrParams) -> f64 {
    if s.field >= 0.0 {
        let mu = carrier::mobility(t_kelvin, s.field, &p.material);
        ELEMENTARY_CHARGE_C * mu * s.electron_density * s.field
    } else {
        -p.reverse_leakage
    }
}

/// Time derivative of the state under bias `bias_v` and extra optical
/// generation (from a drive program) on top of the configured background.
///
/// Returns `(dn/dt, df/dt, dE/dt)` in physical units.
pub fn rhs(
    s: &GrState,
    bias_v: f64,
    extra_optical_generation: f64,
    t_kelvin: f64,
    p: &GrParams,
) -> [f64; 3] {
    let n = s.electron_density;
    let f = s.occupied_fraction;
    let e = s.field;
    let nt = p.trap_density;

    let ci = impact_ionization_coefficient(e, t_kelvin, p);
    let g = thermal_generation(f, t_kelvin, p) + p.optical_generation + extra_optical_generation;

    let ionization = ci * n * f;
    let capture = p.capture_coefficient * n * (1.0 - f);
    let promotion = field_promotion_rate(e, t_kelvin, p) * (1.0 - f);

    let dn = g + nt * (ionization - capture) - p.recombination_rate * n;
    let df = -ionization + capture + promotion;

    let supply = (bias_v - e * p.device.i_region_width)
        / (p.device.load_resistance * p.device.junction_area);
    let de =
        (supply - conduction_current_density(s, t_kelvin, p)) / p.device.effective_permittivity;

    [dn, df, de]
}

/// Nondimensional state used by the solvers: `(n/N_t, f, E/E_c)`.
pub(crate) fn to_scaled(s: &GrState, p: &GrParams) -> [f64; 3] {
    [
        s.electron_density / p.trap_density,
        s.occupied_fraction,
        s.field / p.critical_field,
    ]
}

pub(crate) fn from_scaled(y: &[f64; 3], p: &GrParams) -> GrState {
    GrState::new(y[0] * p.trap_density, y[1], y[2] * p.critical_field)
}

/// `rhs` in nondimensional state variables and physical time (1/s).
pub(crate) fn rhs_scaled(
    y: &[f64; 3],
    bias_v: f64,
    extra_optical_generation: f64,
    t_kelvin: f64,
    p: &GrParams,
) -> [f64; 3] {
    let s = from_scaled(y, p);
    let d = rhs(&s, bias_v, extra_optical_generation, t_kelvin, p);
    [d[0] / p.trap_density, d[1], d[2] / p.critical_field]
}
