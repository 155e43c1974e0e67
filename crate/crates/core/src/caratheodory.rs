//! Hermitian Toeplitz minors, coefficient-body membership and recovery of
//! the unique atomic extension on the boundary.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::roots::polynomial_roots;
use crate::series::{herglotz_coeffs, wrap_angle, Atom, AtomSet, CoeffVec};

/// Relative tolerance on normalized pivots `d_k / (2 h_0)`.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Vandermonde systems above this condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Every minor positive: infinitely many extensions.
    Interior,
    /// Minors `1..m-1` positive, the rest zero: unique extension with `m` atoms.
    Boundary(usize),
    Outside,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Interior => write!(f, "Interior"),
            Classification::Boundary(m) => write!(f, "Boundary({m})"),
            Classification::Outside => write!(f, "Outside"),
        }
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorReport {
    /// `M_1..M_n`.
    pub minors: Vec<f64>,
    /// LDL pivots `d_0..d_k` divided by `2 h_0`, up to the first degenerate one.
    #[serde(skip)]
    pub normalized_pivots: Vec<f64>,
    pub classification: Classification,
    #[serde(rename = "tol")]
    pub tolerance: f64,
}

/// `(n+1) x (n+1)` matrix with first row `(2h_0, h_1, ..., h_n)` and
/// conjugated first column.
pub fn toeplitz_matrix(h: &CoeffVec, size: usize) -> DMatrix<Complex64> {
    let entry = |j: usize| {
        if j == 0 {
            Complex64::new(2.0 * h[0].re, 0.0)
        } else {
            h[j]
        }
    };
    DMatrix::from_fn(
        size,
        size,
        |r, c| {
            if c >= r {
                entry(c - r)
            } else {
                entry(r - c).conj()
            }
        },
    )
}

fn check_domain(h: &CoeffVec, tol: f64) -> Result<()> {
    let h0 = h[0];
    if h.order() == 0 {
        return Err(Error::InvalidOrder(0));
    }
    if !(h0.re > 0.0) {
        return Err(Error::Domain(format!("h_0 must be positive, got {}", h0.re)));
    }
    if h0.im.abs() > tol * h0.re {
        return Err(Error::Domain(format!("h_0 must be real, got imaginary part {}", h0.im)));
    }
    Ok(())
}

/// Computes `M_1..M_n` and classifies the point against the coefficient body.
///
/// Pivots of the LDL factorization of the Toeplitz matrix give every minor as
/// a running product. Once a pivot is degenerate (`|d_k| <= tol * 2h_0`) the
/// remaining minors come from LU with partial pivoting, and the boundary
/// decision is made on the Schur complement of the positive definite leading
/// block: it must vanish for the point to lie on the boundary.
pub fn toeplitz_minors(h: &CoeffVec, tol: f64) -> Result<MinorReport> {
    check_domain(h, tol)?;
    let n = h.order();
    let size = n + 1;
    let scale = 2.0 * h[0].re;
    let t = toeplitz_matrix(h, size);

    let mut l = DMatrix::<Complex64>::identity(size, size);
    let mut d: Vec<f64> = Vec::with_capacity(size);
    let mut degenerate_at = None;

    for k in 0..size {
        let mut pivot = t[(k, k)].re;
        for j in 0..k {
            pivot -= l[(k, j)].norm_sqr() * d[j];
        }
        d.push(pivot);
        if pivot.abs() <= tol * scale {
            degenerate_at = Some(k);
            break;
        }
        for i in k + 1..size {
            let mut s = t[(i, k)];
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)].conj() * d[j];
            }
            l[(i, k)] = s / pivot;
        }
    }

    let mut minors = Vec::with_capacity(n);
    let mut running = d[0];
    for (k, &dk) in d.iter().enumerate().skip(1) {
        running *= dk;
        if Some(k) == degenerate_at {
            break;
        }
        minors.push(running);
    }
    let start = minors.len() + 1;
    for k in start..=n {
        minors.push(lu_minor(&t, k, scale)?);
    }

    let normalized_pivots: Vec<f64> = d.iter().map(|x| x / scale).collect();
    let classification = match degenerate_at {
        None => {
            if d.iter().all(|&x| x > 0.0) {
                Classification::Interior
            } else {
                Classification::Outside
            }
        }
        Some(k) => {
            if d[..k].iter().any(|&x| x <= 0.0) {
                Classification::Outside
            } else if schur_complement_vanishes(&t, &l, &d, k, tol * scale) {
                Classification::Boundary(k)
            } else {
                Classification::Outside
            }
        }
    };

    Ok(MinorReport {
        minors,
        normalized_pivots,
        classification,
        tolerance: tol,
    })
}

/// Determinant of the leading `(k+1) x (k+1)` block via pivoted LU.
fn lu_minor(t: &DMatrix<Complex64>, k: usize, scale: f64) -> Result<f64> {
    let block = t.view((0, 0), (k + 1, k + 1)).clone_owned();
    let det = block.lu().determinant();
    let weight = scale.powi(k as i32 + 1);
    if det.im.abs() > 1e-10 * det.norm() + 1e-12 * weight {
        return Err(Error::Numeric(format!(
            "Hermitian minor M_{k} has imaginary part {:.3e}",
            det.im
        )));
    }
    Ok(det.re)
}

/// With the leading `k x k` block factored as `L D L^H`, checks that the
/// Schur complement `T_22 - T_21 T_11^{-1} T_12` is zero to `abs_tol`.
fn schur_complement_vanishes(
    t: &DMatrix<Complex64>,
    l: &DMatrix<Complex64>,
    d: &[f64],
    k: usize,
    abs_tol: f64,
) -> bool {
    let size = t.nrows();
    // rows k.. of L (columns < k) are already filled by the factorization
    for i in k..size {
        for j in k..size {
            let mut s = t[(i, j)];
            for p in 0..k {
                s -= l[(i, p)] * l[(j, p)].conj() * d[p];
            }
            if s.norm() > abs_tol {
                return false;
            }
        }
    }
    true
}

pub fn membership(h: &CoeffVec, tol: f64) -> Result<Classification> {
    Ok(toeplitz_minors(h, tol)?.classification)
}

/// Recovers the unique atomic measure whose Herglotz coefficients are `h`.
///
/// Angles are the roots of the null vector polynomial of the rank-deficient
/// `(m+1) x (m+1)` Toeplitz block; weights solve the moment system in least
/// squares. A few Gauss-Newton steps on all `n+1` moments polish both.
pub fn recover_atoms(h: &CoeffVec, tol: f64) -> Result<AtomSet> {
    let report = toeplitz_minors(h, tol)?;
    let m = match report.classification {
        Classification::Boundary(m) if m >= 1 => m,
        other => return Err(Error::NotOnBoundary(other)),
    };

    let block = toeplitz_matrix(h, m + 1);
    let eig = SymmetricEigen::new(block);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let null: Vec<Complex64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let roots = polynomial_roots(&null)?;
    if roots.len() != m {
        return Err(Error::Numeric(format!(
            "null-vector polynomial has {} roots, expected {m}",
            roots.len()
        )));
    }
    let mut phis: Vec<f64> = roots.iter().map(|r| wrap_angle(r.arg())).collect();
    phis.sort_by(f64::total_cmp);

    let alphas = solve_weights(h, &phis)?;
    let (alphas, phis) = polish(h, alphas, phis);
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::Numeric(format!("recovered non-positive weight {a}")));
    }
    AtomSet::new(alphas.into_iter().zip(phis).map(|(a, p)| Atom::new(a, p)).collect())
}

/// Real rows of the moment map `alpha -> (sum alpha, 2 sum alpha e^{ij phi})`.
fn moment_matrix(n: usize, phis: &[f64]) -> DMatrix<f64> {
    let m = phis.len();
    let rows = 2 * n + 1;
    DMatrix::from_fn(rows, m, |r, c| {
        if r == 0 {
            1.0
        } else {
            let j = r.div_ceil(2);
            let z = Complex64::from_polar(2.0, j as f64 * phis[c]);
            if r % 2 == 1 {
                z.re
            } else {
                z.im
            }
        }
    })
}

fn moment_rhs(h: &CoeffVec) -> DVector<f64> {
    let n = h.order();
    DVector::from_fn(2 * n + 1, |r, _| {
        if r == 0 {
            h[0].re
        } else {
            let z = h[r.div_ceil(2)];
            if r % 2 == 1 {
                z.re
            } else {
                z.im
            }
        }
    })
}

fn solve_weights(h: &CoeffVec, phis: &[f64]) -> Result<Vec<f64>> {
    let a = moment_matrix(h.order(), phis);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(Error::Conditioning(cond));
    }
    let x = svd
        .solve(&moment_rhs(h), 0.0)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

fn moment_residual(h: &CoeffVec, alphas: &[f64], phis: &[f64]) -> Option<DVector<f64>> {
    let atoms: Vec<Atom> = alphas.iter().zip(phis).map(|(&a, &p)| Atom::new(a, p)).collect();
    let set = AtomSet::with_merge_tol(atoms, 0.0).ok()?;
    let fit = herglotz_coeffs(&set, h.order()).ok()?;
    let diff = CoeffVec::new(fit.coeffs().iter().zip(h.coeffs()).map(|(a, b)| a - b).collect()).ok()?;
    Some(moment_rhs(&diff))
}

fn polish(h: &CoeffVec, mut alphas: Vec<f64>, mut phis: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = h.order();
    let m = phis.len();
    let Some(mut res) = moment_residual(h, &alphas, &phis) else {
        return (alphas, phis);
    };
    for _ in 0..8 {
        // Jacobian columns: d/d alpha_k then d/d phi_k
        let mut jac = DMatrix::<f64>::zeros(2 * n + 1, 2 * m);
        for k in 0..m {
            jac[(0, k)] = 1.0;
            for j in 1..=n {
                let z = Complex64::from_polar(2.0, j as f64 * phis[k]);
                let dz = z * Complex64::new(0.0, j as f64 * alphas[k]);
                jac[(2 * j - 1, k)] = z.re;
                jac[(2 * j, k)] = z.im;
                jac[(2 * j - 1, m + k)] = dz.re;
                jac[(2 * j, m + k)] = dz.im;
            }
        }
        let Ok(step) = jac.svd(true, true).solve(&res, 1e-14) else {
            break;
        };
        let new_alphas: Vec<f64> = (0..m).map(|k| alphas[k] - step[k]).collect();
        let new_phis: Vec<f64> = (0..m).map(|k| phis[k] - step[m + k]).collect();
        match moment_residual(h, &new_alphas, &new_phis) {
            Some(r) if r.norm() < res.norm() => {
                alphas = new_alphas;
                phis = new_phis;
                res = r;
            }
            _ => break,
        }
    }
    (alphas, phis)
}
