//! Equilibrium location by multi-start damped Newton iteration.

use super::linalg::solve3;
use super::stability::jacobian_scaled;
use super::{from_scaled, rhs_scaled, thermal_generation, GrParams, GrState};

/// Result of a fixed-point search.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedPointSet {
    /// With zero generation the carrier equations vanish at n = 0 for every
    /// trap occupation: a one-parameter family with f unconstrained and the
    /// field at its circuit equilibrium.
    FUnconstrained { field: f64 },
    /// Isolated roots, deduplicated, sorted by ascending electron density.
    Isolated(Vec<GrState>),
}

impl FixedPointSet {
    /// The tracked equilibrium: the root with the largest electron density
    /// (the conducting branch). `None` for the unconstrained dark family.
    pub fn tracked(&self) -> Option<GrState> {
        match self {
            FixedPointSet::FUnconstrained { .. } => None,
            FixedPointSet::Isolated(v) => v.last().copied(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixedPointError {
    #[error("no equilibrium found after full seeding (parameter pathology)")]
    NoEquilibrium,
    #[error("invalid parameters: {0:?}")]
    InvalidParams(Vec<String>),
}

/// Scaled-unit residual norm required of every returned root.
const RESIDUAL_TOL: f64 = 1e-8;
/// Roots within this relative distance are merged.
const MERGE_TOL: f64 = 1e-6;

/// Find all equilibria of the model at bias `bias_v` and temperature
/// `t_kelvin`.
///
/// Roots are located by damped Newton iteration from a log-spaced electron
/// density grid crossed with a trap-occupation grid; the field seed comes
/// from the circuit equilibrium at each trial density. Every returned root
/// satisfies `||rhs|| <= 1e-8` in scaled units.
pub fn fixed_points(
    bias_v: f64,
    t_kelvin: f64,
    p: &GrParams,
) -> Result<FixedPointSet, FixedPointError> {
    let param_errors = p.validate();
    if !param_errors.is_empty() {
        return Err(FixedPointError::InvalidParams(param_errors));
    }

    // Dark branch: with no generation and no active promotion channel,
    // n = 0 solves the carrier equations for arbitrary f, with E at its
    // circuit equilibrium.
    let e_dark = circuit_field(bias_v, 0.0, p);
    let no_generation = thermal_generation(1.0, t_kelvin, p) + p.optical_generation == 0.0;
    if no_generation && super::field_promotion_rate(e_dark, t_kelvin, p) == 0.0 {
        return Ok(FixedPointSet::FUnconstrained { field: e_dark });
    }

    let mut roots: Vec<[f64; 3]> = Vec::new();
    for log_u in -12..=2 {
        let u = 10f64.powi(log_u);
        for fi in 0..8 {
            // Include a near-full-trap seed: the promotion channel parks the
            // empty-band equilibrium at f -> 1.
            let f = if fi == 7 {
                0.999
            } else {
                0.05 + 0.15 * fi as f64
            };
            let e_seed = circuit_field(bias_v, u * p.trap_density, p) / p.critical_field;
            if let Some(root) = newton(&[u, f, e_seed], bias_v, t_kelvin, p) {
                if root[0] >= -1e-12 && (-1e-9..=1.0 + 1e-9).contains(&root[1]) {
                    merge_root(&mut roots, root);
                }
            }
        }
    }

    if roots.is_empty() {
        return Err(FixedPointError::NoEquilibrium);
    }
    roots.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    Ok(FixedPointSet::Isolated(
        roots
            .iter()
            .map(|y| {
                let mut s = from_scaled(y, p);
                // Newton can land within rounding of the boundary.
                s.electron_density = s.electron_density.max(0.0);
                s.occupied_fraction = s.occupied_fraction.clamp(0.0, 1.0);
                s
            })
            .collect(),
    ))
}

/// Field solving the circuit equation at a given electron density.
fn circuit_field(bias_v: f64, n: f64, p: &GrParams) -> f64 {
    let w = p.device.i_region_width;
    let rla = p.device.load_resistance * p.device.junction_area;
    let mu = crate::carrier::mobility(300.0, 0.0, &p.material);
    if bias_v >= 0.0 {
        bias_v / (w + rla * crate::carrier::ELEMENTARY_CHARGE_C * mu * n)
    } else {
        (bias_v + rla * p.reverse_leakage) / w
    }
}

fn residual(y: &[f64; 3], bias_v: f64, t_kelvin: f64, p: &GrParams) -> [f64; 3] {
    let d = rhs_scaled(y, bias_v, 0.0, t_kelvin, p);
    d.map(|v| v / p.recombination_rate)
}

fn norm_inf(r: &[f64; 3]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn newton(start: &[f64; 3], bias_v: f64, t_kelvin: f64, p: &GrParams) -> Option<[f64; 3]> {
    let mut y = *start;
    let mut r = residual(&y, bias_v, t_kelvin, p);
    let mut rn = norm_inf(&r);

    for _ in 0..80 {
        if rn <= RESIDUAL_TOL * 1e-3 {
            break;
        }
        let mut j = jacobian_scaled(&y, bias_v, 0.0, t_kelvin, p);
        for row in j.iter_mut() {
            for v in row.iter_mut() {
                *v /= p.recombination_rate;
            }
        }
        let neg_r = [-r[0], -r[1], -r[2]];
        let delta = solve3(&j, &neg_r)?;

        // Backtracking line search on the residual norm.
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial = [
                y[0] + alpha * delta[0],
                y[1] + alpha * delta[1],
                y[2] + alpha * delta[2],
            ];
            let tr = residual(&trial, bias_v, t_kelvin, p);
            let trn = norm_inf(&tr);
            if trn.is_finite() && trn < rn * (1.0 - 0.1 * alpha) {
                y = trial;
                r = tr;
                rn = trn;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            return None;
        }
    }

    (rn <= RESIDUAL_TOL).then_some(y)
}

fn merge_root(roots: &mut Vec<[f64; 3]>, cand: [f64; 3]) {
    for r in roots.iter() {
        let close = (0..3).all(|k| {
            let scale = r[k].abs().max(cand[k].abs());
            // Relative merge with an absolute floor: components smaller than
            // the residual resolution are indistinguishable from zero.
            (r[k] - cand[k]).abs() <= MERGE_TOL * scale + 1e-7
        });
        if close {
            return;
        }
    }
    roots.push(cand);
}
