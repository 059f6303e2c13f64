//! Linear stability analysis at a state point: finite-difference Jacobian,
//! closed-form eigenvalues and sign-pattern classification.

use num_complex::Complex64;
use serde::Serialize;

use super::linalg::{self, Mat3};
use super::{rhs_scaled, to_scaled, GrParams, GrState};

/// Fixed-point character by eigenvalue sign pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    StableNode,
    StableFocus,
    UnstableFocus,
    UnstableNode,
    Saddle,
    /// An eigenvalue sits on the imaginary axis to within tolerance.
    Marginal,
}

/// Stability report for a fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub fixed_point: GrState,
    pub eigenvalues: [Complex64; 3],
    pub classification: Classification,
    /// True when a complex-conjugate pair exists.
    pub oscillatory: bool,
}

impl StabilityReport {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Central finite-difference Jacobian of the model at state `s`.
///
/// Differencing is performed on the nondimensional state `(n/N_t, f, E/E_c)`
/// with per-variable relative step 1e-6 (absolute floor 1e-12), so all
/// entries carry units of 1/s and the matrix is well scaled. Eigenvalues are
/// invariant under this diagonal rescaling of the physical Jacobian.
pub fn jacobian(s: &GrState, bias_v: f64, t_kelvin: f64, p: &GrParams) -> Mat3 {
    let y0 = to_scaled(s, p);
    jacobian_scaled(&y0, bias_v, 0.0, t_kelvin, p)
}

pub(crate) fn jacobian_scaled(
    y0: &[f64; 3],
    bias_v: f64,
    extra_optical: f64,
    t_kelvin: f64,
    p: &GrParams,
) -> Mat3 {
    let mut j = [[0.0; 3]; 3];
    for col in 0..3 {
        let h = (1e-6 * y0[col].abs()).max(1e-12);
        let mut yp = *y0;
        let mut ym = *y0;
        yp[col] += h;
        ym[col] -= h;
        let fp = rhs_scaled(&yp, bias_v, extra_optical, t_kelvin, p);
        let fm = rhs_scaled(&ym, bias_v, extra_optical, t_kelvin, p);
        for row in 0..3 {
            j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    j
}

/// Eigenvalues and sign-pattern classification of a 3x3 Jacobian.
///
/// The caller supplies the fixed point the matrix was evaluated at; this
/// routine fills in the spectral part of the report. Eigenvalues whose real
/// part lies within `1e-10 * ||J||_F` of zero are treated as marginal.
pub fn classify_stability(j: &Mat3, fixed_point: GrState) -> StabilityReport {
    let eigenvalues = linalg::eigenvalues3(j);
    let norm = linalg::frobenius_norm(j).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * norm;

    let oscillatory = eigenvalues.iter().any(|e| e.im.abs() > tol);
    let any_marginal = eigenvalues.iter().any(|e| e.re.abs() < tol);

    let classification = if any_marginal {
        Classification::Marginal
    } else if oscillatory {
        // The conjugate pair owns the focus character; the third (real)
        // direction only adds contraction or a saddle structure.
        let pair_re = eigenvalues
            .iter()
            .filter(|e| e.im.abs() > tol)
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let real_re = eigenvalues
            .iter()
            .filter(|e| e.im.abs() <= tol)
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if pair_re > 0.0 {
            Classification::UnstableFocus
        } else if real_re > 0.0 {
            Classification::Saddle
        } else {
            Classification::StableFocus
        }
    } else {
        let n_pos = eigenvalues.iter().filter(|e| e.re > 0.0).count();
        match n_pos {
            0 => Classification::StableNode,
            3 => Classification::UnstableNode,
            _ => Classification::Saddle,
        }
    };

    StabilityReport {
        fixed_point,
        eigenvalues,
        classification,
        oscillatory,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{impact_ionization_coefficient, GrParams};

    fn dummy_state() -> GrState {
        GrState::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn classify_diagonal_stable_node() {
        let j = [[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]];
        let r = classify_stability(&j, dummy_state());
        assert_eq!(r.classification, Classification::StableNode);
        assert!(!r.oscillatory);
        let mut re: Vec<f64> = r.eigenvalues.iter().map(|e| e.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in re.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_center_is_marginal() {
        // Companion of (x^2+1)(x+1): eigenvalues -1, +/- i. The undamped
        // pair sits on the imaginary axis -> marginal under the tolerance
        // rule, and the conjugate pair is still reported.
        let j = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, -1.0]];
        let r = classify_stability(&j, dummy_state());
        assert_eq!(r.classification, Classification::Marginal);
        assert!(r.oscillatory);
    }

    #[test]
    fn classify_saddle() {
        let j = [[1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]];
        let r = classify_stability(&j, dummy_state());
        assert_eq!(r.classification, Classification::Saddle);
    }

    #[test]
    fn classify_stable_focus() {
        // Block diag: rotation with damping (-0.5 +/- 2i) and -1.
        let j = [[-0.5, 2.0, 0.0], [-2.0, -0.5, 0.0], [0.0, 0.0, -1.0]];
        let r = classify_stability(&j, dummy_state());
        assert_eq!(r.classification, Classification::StableFocus);
        assert!(r.oscillatory);
    }

    #[test]
    fn jacobian_df_df_analytic() {
        // With the promotion channel off, d(df/dt)/df = -C_i n - T_c n at
        // n > 0, independent of f.
        let p = GrParams {
            promotion_prefactor: 0.0,
            ..GrParams::reference()
        };
        let t = 9.0;
        let s = GrState::new(4e10, 0.6, 110.0);
        let j = jacobian(&s, 8.5, t, &p);
        let ci = impact_ionization_coefficient(s.field, t, &p);
        let expected = -(ci + p.capture_coefficient) * s.electron_density;
        let got = j[1][1];
        assert!(
            (got - expected).abs() / expected.abs() < 1e-6,
            "got {got}, expected {expected}"
        );

        // Promotion adds its own -C_p to the diagonal.
        let p = GrParams::reference();
        let j = jacobian(&s, 8.5, t, &p);
        let ci = impact_ionization_coefficient(s.field, t, &p);
        let cp = crate::dynamics::field_promotion_rate(s.field, t, &p);
        let expected = -(ci + p.capture_coefficient) * s.electron_density - cp;
        let got = j[1][1];
        assert!(
            (got - expected).abs() / expected.abs() < 1e-6,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn jacobian_linear_column_step_independent() {
        // dE/dt is linear in n (fixed E sign), so the E-row entry of the
        // n-column must agree between two very different step sizes.
        let p = GrParams::reference();
        let s = GrState::new(5e10, 0.5, 120.0);
        let y0 = to_scaled(&s, &p);

        let entry = |h: f64| {
            let mut yp = y0;
            let mut ym = y0;
            yp[0] += h;
            ym[0] -= h;
            let fp = rhs_scaled(&yp, 8.5, 0.0, 10.0, &p);
            let fm = rhs_scaled(&ym, 8.5, 0.0, 10.0, &p);
            (fp[2] - fm[2]) / (2.0 * h)
        };
        let a = entry(1e-4);
        let b = entry(1e-7);
        assert!((a - b).abs() / a.abs() < 1e-8, "a={a} b={b}");
    }
}
