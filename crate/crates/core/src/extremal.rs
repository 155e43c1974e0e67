//! Candidate extremal functions `f = exp(-h)` with atomic `h`, the extremal
//! polynomial `H`, and the first-order optimality conditions.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{herglotz_coeffs, kernel_coeffs, Atom, AtomSet, CoeffVec};
use crate::trig_poly::{from_poly_real_part, TrigPoly};

/// Points in the kernel-pairing scan over the circle.
pub const KERNEL_GRID: usize = 4096;

/// Default tolerance for condition checks.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    atoms: AtomSet,
    order: usize,
    f: CoeffVec,
    h_poly: CoeffVec,
}

impl Candidate {
    pub fn atoms(&self) -> &AtomSet {
        &self.atoms
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Taylor coefficients `{f}_0..{f}_n`.
    pub fn f(&self) -> &CoeffVec {
        &self.f
    }

    /// `H` in the `h_0 + 2 sum h_k z^k` convention: `(f_n, f_{n-1}, ..., f_0)`.
    pub fn h_poly(&self) -> &CoeffVec {
        &self.h_poly
    }

    /// `h = -ln f` truncated at the candidate's order.
    pub fn log_coeffs(&self) -> CoeffVec {
        herglotz_coeffs(&self.atoms, self.order).expect("order >= 1")
    }

    pub fn leading(&self) -> Complex64 {
        self.f[self.order]
    }

    /// More atoms than the order: outside the family where extremals live.
    pub fn is_exploratory(&self) -> bool {
        self.atoms.len() > self.order
    }

    /// `Re H(e^{iφ})` as a trigonometric polynomial. Only `Re h_0` enters, so
    /// this is meaningful before rotation as well.
    pub fn real_part_on_circle(&self) -> TrigPoly {
        let mut h = self.h_poly.clone().into_coeffs();
        h[0] = Complex64::new(h[0].re, 0.0);
        from_poly_real_part(&CoeffVec::new(h).expect("finite"), 0.0).expect("real h_0")
    }
}

pub fn build_candidate(atoms: &AtomSet, n: usize) -> Result<Candidate> {
    let h = herglotz_coeffs(atoms, n)?;
    let f = h.exp_neg();
    if atoms.len() > n {
        log::warn!(
            "candidate with {} atoms exceeds order {n}; extremals have at most n atoms",
            atoms.len()
        );
    }
    let h_poly = CoeffVec::new(f.coeffs().iter().rev().copied().collect())?;
    Ok(Candidate {
        atoms: atoms.clone(),
        order: n,
        f,
        h_poly,
    })
}

/// Atoms of `exp(-t (1 - z^n)/(1 + z^n))`: mass `t/n` at each `n`-th root of `-1`.
pub fn reference_atoms(n: usize, t: f64) -> Result<AtomSet> {
    if n == 0 {
        return Err(Error::InvalidOrder(0));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidAtom(format!("mass must be positive, got {t}")));
    }
    AtomSet::new(
        crate::trig_poly::roots_of_minus_one(n)
            .into_iter()
            .map(|phi| Atom::new(t / n as f64, phi))
            .collect(),
    )
}

/// `F(z^n, t)` as a candidate of order `n`.
pub fn reference_extremal(n: usize, t: f64) -> Result<Candidate> {
    build_candidate(&reference_atoms(n, t)?, n)
}

/// Applies `z -> e^{iθ} z` with `θ = -arg(f_n)/n` so that `{f}_n > 0`.
pub fn rotate_to_positive(c: &Candidate) -> Result<Candidate> {
    let lead = c.leading();
    // below rounding level of the series the argument of f_n is noise
    let scale = c.f.coeffs().iter().map(|x| x.norm()).fold(0.0, f64::max);
    if lead.norm() <= 16.0 * f64::EPSILON * scale {
        return Err(Error::CannotNormalize);
    }
    let theta = -lead.arg() / c.order as f64;
    build_candidate(&c.atoms.rotated(theta), c.order)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `min Re H` on the circle is at least `-tol`.
    pub h_in_c: bool,
    /// `min_φ Re H(e^{iφ})`.
    pub h_in_c_margin: f64,
    /// Angle of that minimum.
    pub h_in_c_argmin: f64,
    /// `|Re H(e^{iφ_k})|` for each atom.
    pub boundary_zero_residuals: Vec<f64>,
    /// `Re sum f_{n-k} h_k` with `h = -ln f`.
    pub pairing_value: f64,
    /// Minimum over the circle of the pairing of `f` with a single kernel.
    pub min_pairing_over_kernels: f64,
    pub tol: f64,
}

impl ConditionReport {
    pub fn max_residual(&self) -> f64 {
        self.boundary_zero_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Pairing of `f` with the kernel at angle `phi`.
fn kernel_pairing(f: &CoeffVec, phi: f64) -> f64 {
    f.pairing(&kernel_coeffs(phi, f.order())).expect("same order")
}

/// Evaluates the necessary conditions for a maximum of `Re {f}_n`. The
/// candidate is expected to be rotated so that `{f}_n >= 0`.
pub fn verify_conditions(c: &Candidate, tol: f64) -> ConditionReport {
    let t = c.real_part_on_circle();
    let (argmin, margin) = t.global_min();
    let residuals = c.atoms.atoms().iter().map(|a| t.eval(a.phi).abs()).collect();
    let pairing_value = c.f.pairing(&c.log_coeffs()).expect("same order");

    let step = TAU / KERNEL_GRID as f64;
    let (mut best_phi, mut best) = (0.0, f64::INFINITY);
    for i in 0..KERNEL_GRID {
        let phi = i as f64 * step;
        let v = kernel_pairing(&c.f, phi);
        if v < best {
            best = v;
            best_phi = phi;
        }
    }
    let best = golden_refine(|phi| kernel_pairing(&c.f, phi), best_phi - step, best_phi + step).min(best);

    ConditionReport {
        h_in_c: margin >= -tol,
        h_in_c_margin: margin,
        h_in_c_argmin: argmin,
        boundary_zero_residuals: residuals,
        pairing_value,
        min_pairing_over_kernels: best,
        tol,
    }
}

fn golden_refine(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-12 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if g(a) < g(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    g(0.5 * (lo + hi))
}
