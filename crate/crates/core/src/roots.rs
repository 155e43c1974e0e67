//! Simultaneous polynomial root finding (Aberth–Ehrlich) with Newton polish.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERS: usize = 800;

/// All roots of `sum_k coeffs[k] z^k`. Trailing (highest-degree) zeros must
/// already be trimmed; leading zero coefficients give roots at the origin.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = coeffs
        .iter()
        .rposition(|c| c.norm() > 0.0)
        .ok_or(Error::EmptyInput("polynomial"))?;
    let coeffs = &coeffs[..=degree];
    let zeros_at_origin = coeffs.iter().position(|c| c.norm() > 0.0).unwrap_or(0);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    let reduced = &coeffs[zeros_at_origin..];
    match reduced.len() - 1 {
        0 => {}
        1 => roots.push(-reduced[0] / reduced[1]),
        _ => roots.extend(aberth(reduced)?),
    }
    Ok(roots)
}

/// Value and derivative by Horner, plus the backward-error bound
/// `sum |a_k| |z|^k`.
fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    let mut bound = 0.0;
    let r = z.norm();
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
        bound = bound * r + c.norm();
    }
    (p, dp, bound)
}

fn aberth(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = coeffs.len() - 1;
    let radius = (coeffs[0].norm() / coeffs[d].norm()).powf(1.0 / d as f64);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / d as f64 + 0.4))
        .collect();
    let mut done = vec![false; d];

    for _ in 0..MAX_ITERS {
        if done.iter().all(|&x| x) {
            break;
        }
        for k in 0..d {
            if done[k] {
                continue;
            }
            let (p, dp, bound) = horner(coeffs, z[k]);
            if p.norm() <= 4.0 * f64::EPSILON * bound {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..d).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                return Err(Error::Numeric("root iteration produced non-finite step".into()));
            }
            z[k] -= step;
            if step.norm() <= f64::EPSILON * z[k].norm() {
                done[k] = true;
            }
        }
    }

    // Roots left unconverged are accepted only when their backward error is
    // at the level seen at clustered (multiple) roots.
    for &root in &z {
        let (p, _, bound) = horner(coeffs, root);
        if p.norm() > 1e-6 * bound {
            return Err(Error::Numeric(format!(
                "root finder did not converge (residual {:.3e})",
                p.norm() / bound
            )));
        }
    }
    for root in z.iter_mut() {
        *root = newton_polish(coeffs, *root);
    }
    Ok(z)
}

fn newton_polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp, _) = horner(coeffs, z);
    for _ in 0..3 {
        if dp.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let (pc, dpc, _) = horner(coeffs, candidate);
        if pc.norm() >= p.norm() {
            break;
        }
        z = candidate;
        p = pc;
        dp = dpc;
    }
    z
}

/// Expands `lead * prod (z - r_k)` into ascending coefficients.
pub fn poly_from_roots(roots: &[Complex64], lead: Complex64) -> Vec<Complex64> {
    let mut coeffs = vec![lead];
    for r in roots {
        coeffs.push(Complex64::new(0.0, 0.0));
        for k in (1..coeffs.len()).rev() {
            coeffs[k] = coeffs[k - 1] - r * coeffs[k];
        }
        coeffs[0] = -r * coeffs[0];
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn matched_error(found: &[Complex64], expected: &[Complex64]) -> f64 {
        let mut used = vec![false; found.len()];
        let mut worst: f64 = 0.0;
        for e in expected {
            let (idx, dist) = found
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, f)| (i, (f - e).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[idx] = true;
            worst = worst.max(dist);
        }
        worst
    }

    #[test]
    fn quadratic_and_linear() {
        // z^2 + 1
        let roots = polynomial_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matched_error(&roots, &[c(0.0, 1.0), c(0.0, -1.0)]) < 1e-14);
        let roots = polynomial_roots(&[c(2.0, 0.0), c(-4.0, 0.0)]).unwrap();
        assert_eq!(roots, vec![c(0.5, 0.0)]);
    }

    #[test]
    fn roots_of_unity() {
        let mut coeffs = vec![c(0.0, 0.0); 13];
        coeffs[0] = c(-1.0, 0.0);
        coeffs[12] = c(1.0, 0.0);
        let roots = polynomial_roots(&coeffs).unwrap();
        let expected: Vec<_> = (0..12)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 12.0))
            .collect();
        assert!(matched_error(&roots, &expected) < 1e-13);
    }

    #[test]
    fn zero_roots_split_off() {
        // z^2 (z - 3)
        let roots = polynomial_roots(&[c(0.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matched_error(&roots, &[c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]) < 1e-14);
    }

    #[test]
    fn double_root_is_resolved_to_sqrt_eps() {
        // (z - 1)^2 (z + 2)
        let coeffs = poly_from_roots(&[c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)], c(1.0, 0.0));
        let roots = polynomial_roots(&coeffs).unwrap();
        assert!(matched_error(&roots, &[c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)]) < 1e-7);
    }

    #[test]
    fn all_zero_polynomial_is_rejected() {
        assert!(polynomial_roots(&[c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_random_simple_roots(
            raw in prop::collection::vec((0.3f64..3.0, 0.0f64..TAU), 1..20),
        ) {
            let roots: Vec<_> = raw.iter().map(|&(r, t)| Complex64::from_polar(r, t)).collect();
            let min_sep = roots.iter().enumerate().flat_map(|(i, a)| {
                roots[i + 1..].iter().map(move |b| (a - b).norm())
            }).fold(f64::INFINITY, f64::min);
            prop_assume!(min_sep > 0.05);
            let coeffs = poly_from_roots(&roots, c(0.7, -0.2));
            let found = polynomial_roots(&coeffs).unwrap();
            prop_assert!(matched_error(&found, &roots) < 1e-7);
        }
    }
}
