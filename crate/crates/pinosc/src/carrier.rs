//! Static cryogenic carrier physics.
//!
//! Incomplete dopant ionization, drift current and field estimates for a
//! lateral P-I-N diode at liquid-helium temperatures. At 10 K the dopant
//! levels are almost entirely frozen out, so free-carrier densities are
//! exponentially suppressed and the forward current is carried by a very
//! sparse electron population.
//!
//! Unit conventions are CGS-practical throughout: cm, V/cm, cm^-3, A/cm^2.

use serde::{Deserialize, Serialize};

/// Boltzmann constant in eV/K. Fixed by convention for this crate.
pub const BOLTZMANN_EV_PER_K: f64 = 8.617e-5;
/// Elementary charge in C. Fixed by convention for this crate.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602e-19;

/// Electron mobility model vs temperature.
///
/// The default is the constant 300 K literature value; the power-law mode
/// `mu_ref * (300/T)^alpha` (clamped) is available for exploration but off
/// by default, since the low-temperature estimates in this domain mix 300 K
/// mobilities with cryogenic carrier densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum MobilityModel {
    Constant,
    PowerLaw { alpha: f64, max: f64 },
}

impl Default for MobilityModel {
    fn default() -> Self {
        MobilityModel::Constant
    }
}

/// Temperature-dependent silicon/dopant/defect constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Donor density N_d (cm^-3).
    pub donor_density: f64,
    /// Acceptor density N_a (cm^-3).
    pub acceptor_density: f64,
    /// Donor level E_d below the conduction band edge (eV).
    pub donor_energy: f64,
    /// Acceptor level E_a above the valence band edge (eV).
    pub acceptor_energy: f64,
    /// Electron mobility reference value mu_n (cm^2/V s).
    pub electron_mobility_ref: f64,
    /// Hole mobility reference value mu_p (cm^2/V s).
    pub hole_mobility_ref: f64,
    /// Defect/trap density N_t (cm^-3).
    pub trap_density: f64,
    /// Mobility-vs-temperature model.
    #[serde(default)]
    pub mobility_model: MobilityModel,
}

impl Default for MaterialParams {
    fn default() -> Self {
        // Peak implanted dopant concentrations and the shallow dopant levels
        // (phosphorus donor 44 meV, boron acceptor 45 meV).
        Self {
            donor_density: 1e19,
            acceptor_density: 1e19,
            donor_energy: 0.044,
            acceptor_energy: 0.045,
            electron_mobility_ref: 1350.0,
            hole_mobility_ref: 480.0,
            trap_density: 1e12,
            mobility_model: MobilityModel::Constant,
        }
    }
}

impl MaterialParams {
    /// Check the type invariants, returning every violation.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("donor_density", self.donor_density),
            ("acceptor_density", self.acceptor_density),
            ("trap_density", self.trap_density),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("{name}: density must be >= 0 and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("donor_energy", self.donor_energy),
            ("acceptor_energy", self.acceptor_energy),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name}: energy must be > 0 (eV), got {v}"));
            }
        }
        for (name, v) in [
            ("electron_mobility_ref", self.electron_mobility_ref),
            ("hole_mobility_ref", self.hole_mobility_ref),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name}: mobility must be > 0 (cm^2/V s), got {v}"));
            }
        }
        if let MobilityModel::PowerLaw { alpha, max } = self.mobility_model {
            if !alpha.is_finite() {
                errs.push(format!("mobility_model.alpha: must be finite, got {alpha}"));
            }
            if !(max > 0.0) {
                errs.push(format!("mobility_model.max: must be > 0, got {max}"));
            }
        }
        errs
    }
}

/// Lumped device geometry and external circuit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// I-region width W (cm).
    pub i_region_width: f64,
    /// Junction cross-section area A (cm^2).
    pub junction_area: f64,
    /// Series load resistance R_L (ohm).
    pub load_resistance: f64,
    /// Effective lumped permittivity of the I-region + parasitics (F/cm).
    pub effective_permittivity: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            // 565 um I-region, 500 x 500 um contact aperture.
            i_region_width: 0.0565,
            junction_area: 2.5e-3,
            load_resistance: 1e6,
            effective_permittivity: 9e-12,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.i_region_width > 0.0) {
            errs.push(format!(
                "i_region_width: must be > 0 (cm), got {}",
                self.i_region_width
            ));
        }
        if !(self.junction_area > 0.0) {
            errs.push(format!(
                "junction_area: must be > 0 (cm^2), got {}",
                self.junction_area
            ));
        }
        if !(self.load_resistance >= 0.0) {
            errs.push(format!(
                "load_resistance: must be >= 0 (ohm), got {}",
                self.load_resistance
            ));
        }
        if !(self.effective_permittivity > 0.0) {
            errs.push(format!(
                "effective_permittivity: must be > 0 (F/cm), got {}",
                self.effective_permittivity
            ));
        }
        errs
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CarrierError {
    #[error("temperature must be > 0 K, got {0}")]
    NonPositiveTemperature(f64),
    #[error("energy level must be > 0 eV, got {0}")]
    NonPositiveEnergy(f64),
    #[error("region width must be > 0 cm, got {0}")]
    NonPositiveWidth(f64),
}

/// Fraction of donors ionized at temperature `t_kelvin`.
///
/// `1 / (1 + exp(E_d / (k_B T)))`; multiply by N_d for the ionized donor
/// density N_d+. The donor degeneracy factor is deliberately omitted to
/// match the estimate convention used throughout this crate.
pub fn ionized_donor_fraction(donor_energy_ev: f64, t_kelvin: f64) -> Result<f64, CarrierError> {
    if !(t_kelvin > 0.0) {
        return Err(CarrierError::NonPositiveTemperature(t_kelvin));
    }
    if !(donor_energy_ev > 0.0) {
        return Err(CarrierError::NonPositiveEnergy(donor_energy_ev));
    }
    let x = donor_energy_ev / (BOLTZMANN_EV_PER_K * t_kelvin);
    Ok(1.0 / (1.0 + x.exp()))
}

/// Uniform-field estimate across the I-region: `E = V / W` (V/cm).
pub fn field_from_bias(bias_v: f64, width_cm: f64) -> Result<f64, CarrierError> {
    if !(width_cm > 0.0) {
        return Err(CarrierError::NonPositiveWidth(width_cm));
    }
    Ok(bias_v / width_cm)
}

/// Drift current density for free electrons and holes in a uniform field.
///
/// Returns `(charge_flux, electron_flux)` where
/// `charge_flux = q (mu_n n + mu_p p) E` in A/cm^2 and
/// `electron_flux = mu_n n E` in electrons/cm^2/s (electron channel only).
pub fn drift_current_density(
    n_cm3: f64,
    p_cm3: f64,
    mu_n: f64,
    mu_p: f64,
    field_v_per_cm: f64,
) -> (f64, f64) {
    let charge_flux = ELEMENTARY_CHARGE_C * (mu_n * n_cm3 + mu_p * p_cm3) * field_v_per_cm;
    let electron_flux = mu_n * n_cm3 * field_v_per_cm;
    (charge_flux, electron_flux)
}

/// Electron mobility at temperature `t_kelvin` (cm^2/V s).
///
/// The field argument is accepted for interface stability; none of the
/// shipped models use it.
pub fn mobility(t_kelvin: f64, _field_v_per_cm: f64, params: &MaterialParams) -> f64 {
    debug_assert!(t_kelvin > 0.0);
    match params.mobility_model {
        MobilityModel::Constant => params.electron_mobility_ref,
        MobilityModel::PowerLaw { alpha, max } => {
            (params.electron_mobility_ref * (300.0 / t_kelvin).powf(alpha)).min(max)
        }
    }
}
