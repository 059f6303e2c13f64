//! Small dense linear algebra for the 3-variable model: a pivoted 3x3 solve
//! and a closed-form cubic eigenvalue solver.

use num_complex::Complex64;

pub type Mat3 = [[f64; 3]; 3];

/// Solve `A x = b` for a 3x3 system by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
pub fn solve3(a: &Mat3, b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut rhs = *b;
    let mut perm = [0usize, 1, 2];

    for col in 0..3 {
        // Pivot on the largest remaining entry in this column.
        let mut piv = col;
        for row in col + 1..3 {
            if m[perm[row]][col].abs() > m[perm[piv]][col].abs() {
                piv = row;
            }
        }
        perm.swap(col, piv);
        let diag = m[perm[col]][col];
        if diag == 0.0 || !diag.is_finite() {
            return None;
        }
        for row in col + 1..3 {
            let factor = m[perm[row]][col] / diag;
            for k in col..3 {
                m[perm[row]][k] -= factor * m[perm[col]][k];
            }
            rhs[perm[row]] -= factor * rhs[perm[col]];
        }
    }

    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = rhs[perm[col]];
        for k in col + 1..3 {
            s -= m[perm[col]][k] * x[k];
        }
        let diag = m[perm[col]][col];
        if diag == 0.0 {
            return None;
        }
        x[col] = s / diag;
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn frobenius_norm(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn determinant(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Sum of the principal 2x2 minors.
fn second_invariant(a: &Mat3) -> f64 {
    (a[0][0] * a[1][1] - a[0][1] * a[1][0])
        + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
        + (a[1][1] * a[2][2] - a[1][2] * a[2][1])
}

/// Eigenvalues of a 3x3 matrix via its characteristic polynomial
/// `lambda^3 - tr lambda^2 + m2 lambda - det`, solved in closed form with
/// branch handling for the one-real/three-real discriminant cases, then
/// polished by a complex Newton step.
pub fn eigenvalues3(a: &Mat3) -> [Complex64; 3] {
    let b = -trace(a);
    let c = second_invariant(a);
    let d = -determinant(a);
    let mut roots = cubic_roots(b, c, d);

    // One Newton polish pass on the monic cubic sharpens roots that the
    // closed form delivers with cancellation error.
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let p = ((*r + b) * *r + c) * *r + d;
            let dp = (3.0 * *r + 2.0 * b) * *r + c;
            if dp.norm() > 0.0 {
                let step = p / dp;
                if step.norm().is_finite() {
                    *r -= step;
                }
            }
        }
    }
    roots
}

/// Roots of `x^3 + b x^2 + c x + d`.
fn cubic_roots(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    // Depressed cubic t^3 + p t + q with x = t - b/3.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

    let scale = p.abs().sqrt().max(q.abs().cbrt());
    if scale == 0.0 {
        let r = Complex64::new(-shift, 0.0);
        return [r, r, r];
    }

    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);

    if disc > 0.0 {
        // One real root and a complex-conjugate pair (Cardano). Avoid
        // cancellation by computing the dominant branch first.
        let sq = disc.sqrt();
        let u = if q <= 0.0 {
            (-q / 2.0 + sq).cbrt()
        } else {
            -(q / 2.0 + sq).cbrt()
        };
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let real = u + v - shift;
        let re_pair = -(u + v) / 2.0 - shift;
        let im_pair = (3.0f64).sqrt() / 2.0 * (u - v);
        [
            Complex64::new(real, 0.0),
            Complex64::new(re_pair, im_pair),
            Complex64::new(re_pair, -im_pair),
        ]
    } else {
        // Three real roots (trigonometric branch).
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            *slot = Complex64::new(t - shift, 0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sort_by_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        v
    }

    #[test]
    fn solve_identity() {
        let a = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let x = solve3(&a, &[3.0, -2.0, 0.5]).unwrap();
        assert_eq!(x, [3.0, -2.0, 0.5]);
    }

    #[test]
    fn solve_requires_pivoting() {
        let a = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        let x = solve3(&a, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(x, [2.0, 1.0, 2.0]);
    }

    #[test]
    fn solve_singular() {
        let a = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(solve3(&a, &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn eigen_diagonal() {
        let a = [[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, -3.0]];
        let ev = sort_by_re(eigenvalues3(&a).to_vec());
        assert!((ev[0].re + 3.0).abs() < 1e-12 && ev[0].im.abs() < 1e-12);
        assert!((ev[1].re + 2.0).abs() < 1e-12);
        assert!((ev[2].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_companion_with_pair() {
        // Companion matrix of (x^2 + 1)(x + 1) = x^3 + x^2 + x + 1:
        // eigenvalues -1, +/- i.
        let a = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, -1.0]];
        let ev = eigenvalues3(&a);
        let mut found_real = false;
        let mut found_pair = 0;
        for e in ev {
            if (e.re + 1.0).abs() < 1e-10 && e.im.abs() < 1e-10 {
                found_real = true;
            }
            if e.re.abs() < 1e-10 && (e.im.abs() - 1.0).abs() < 1e-10 {
                found_pair += 1;
            }
        }
        assert!(found_real, "{ev:?}");
        assert_eq!(found_pair, 2, "{ev:?}");
    }

    #[test]
    fn eigen_invariants_random() {
        // Trace and determinant identities to 1e-8 relative on random
        // matrices (deterministic LCG so the test is reproducible).
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..500 {
            let mut a = [[0.0; 3]; 3];
            for row in a.iter_mut() {
                for v in row.iter_mut() {
                    *v = next();
                }
            }
            let ev = eigenvalues3(&a);
            let sum: Complex64 = ev.iter().sum();
            let prod: Complex64 = ev.iter().product();
            let tr = trace(&a);
            let det = determinant(&a);
            let scale = frobenius_norm(&a).max(1e-12);
            assert!(
                (sum.re - tr).abs() / scale < 1e-8,
                "trace mismatch {sum} vs {tr}"
            );
            assert!(sum.im.abs() / scale < 1e-8);
            assert!(
                (prod.re - det).abs() / scale.powi(3) < 1e-8,
                "det mismatch {prod} vs {det}"
            );
        }
    }
}
