//! Truncated complex power series and Herglotz-kernel atoms.
//!
//! Every series carries an explicit order `n`; operations never extend it.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angles closer than this are merged when an [`AtomSet`] is canonicalized.
pub const DEFAULT_MERGE_TOL: f64 = 1e-12;

/// Taylor coefficients `c_0..c_n` of a function holomorphic in the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVec {
    coeffs: Vec<Complex64>,
}

impl CoeffVec {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput("coefficient vector"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); order + 1],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Coefficients of `f(e^{iθ} z)`: `c_k -> c_k e^{ikθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * theta))
                .collect(),
        }
    }

    /// Evaluates the truncated polynomial at `z` (Horner).
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Cauchy product truncated at the common order.
    pub fn product(&self, other: &CoeffVec) -> Result<CoeffVec> {
        check_orders(self, other)?;
        let n = self.order();
        let a = &self.coeffs;
        let b = &other.coeffs;
        let coeffs = (0..=n).map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()).collect();
        Ok(CoeffVec { coeffs })
    }

    /// `exp(-h)` truncated at the order of `h`, via `f' = -h' f`.
    pub fn exp_neg(&self) -> CoeffVec {
        let h = &self.coeffs;
        let n = self.order();
        let mut f = Vec::with_capacity(n + 1);
        f.push((-h[0]).exp());
        for k in 1..=n {
            let acc: Complex64 = (1..=k).map(|j| h[j] * f[k - j] * j as f64).sum();
            f.push(-acc / k as f64);
        }
        CoeffVec { coeffs: f }
    }

    /// `Re sum_{k=0}^{n} f_{n-k} g_k`, the first-order change of `{f}_n`
    /// under the variation `f e^{-eps g}` (up to sign).
    pub fn pairing(&self, other: &CoeffVec) -> Result<f64> {
        check_orders(self, other)?;
        let n = self.order();
        let s: Complex64 = (0..=n).map(|k| self.coeffs[n - k] * other.coeffs[k]).sum();
        Ok(s.re)
    }
}

impl std::ops::Index<usize> for CoeffVec {
    type Output = Complex64;

    fn index(&self, k: usize) -> &Complex64 {
        &self.coeffs[k]
    }
}

fn check_orders(a: &CoeffVec, b: &CoeffVec) -> Result<()> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch {
            left: a.order(),
            right: b.order(),
        });
    }
    Ok(())
}

/// A point mass `alpha` at angle `phi` of the Herglotz measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub alpha: f64,
    pub phi: f64,
}

impl Atom {
    pub fn new(alpha: f64, phi: f64) -> Self {
        Self { alpha, phi }
    }
}

/// Canonical finite measure on the circle: positive weights, angles in
/// `[0, 2π)` strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSet {
    atoms: Vec<Atom>,
}

impl AtomSet {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        Self::with_merge_tol(atoms, DEFAULT_MERGE_TOL)
    }

    /// Canonicalizes: wraps angles, sorts, merges atoms whose angles differ
    /// by less than `merge_tol` (circularly), summing their weights.
    pub fn with_merge_tol(atoms: Vec<Atom>, merge_tol: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("atom set"));
        }
        let mut wrapped = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !a.alpha.is_finite() || !a.phi.is_finite() {
                return Err(Error::NonFinite("atom"));
            }
            if a.alpha <= 0.0 {
                return Err(Error::InvalidAtom(format!("weight must be positive, got {}", a.alpha)));
            }
            wrapped.push(Atom::new(a.alpha, wrap_angle(a.phi)));
        }
        wrapped.sort_by(|a, b| a.phi.total_cmp(&b.phi));

        let mut merged: Vec<Atom> = Vec::with_capacity(wrapped.len());
        for a in wrapped {
            match merged.last_mut() {
                Some(last) if a.phi - last.phi < merge_tol => last.alpha += a.alpha,
                _ => merged.push(a),
            }
        }
        if merged.len() > 1 {
            let first = merged[0];
            let last = merged[merged.len() - 1];
            if first.phi + TAU - last.phi < merge_tol {
                merged[0].alpha += last.alpha;
                merged.pop();
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass `t = sum alpha_k`.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.alpha).sum()
    }

    /// Adds `theta` to every angle.
    pub fn rotated(&self, theta: f64) -> AtomSet {
        let atoms = self.atoms.iter().map(|a| Atom::new(a.alpha, a.phi + theta)).collect();
        AtomSet::new(atoms).expect("rotation preserves validity")
    }

    /// Flattened `(alpha_1, phi_1, alpha_2, phi_2, ...)`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.atoms.iter().flat_map(|a| [a.alpha, a.phi]).collect()
    }
}

/// Serialized as `[[alpha, phi], ...]`.
impl Serialize for AtomSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.atoms.iter().map(|a| [a.alpha, a.phi]))
    }
}

impl<'de> Deserialize<'de> for AtomSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        AtomSet::new(raw.into_iter().map(|[a, p]| Atom::new(a, p)).collect()).map_err(serde::de::Error::custom)
    }
}

pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Taylor coefficients of `(1 + e^{iφ}z)/(1 - e^{iφ}z)` up to `order`.
pub fn kernel_coeffs(phi: f64, order: usize) -> CoeffVec {
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(Complex64::new(1.0, 0.0));
    for j in 1..=order {
        coeffs.push(Complex64::from_polar(2.0, j as f64 * phi));
    }
    CoeffVec { coeffs }
}

/// Angle derivative of [`kernel_coeffs`]: `(0, 2i e^{iφ}, ..., 2ij e^{ijφ})`.
pub fn kernel_angle_derivative(phi: f64, order: usize) -> CoeffVec {
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(Complex64::new(0.0, 0.0));
    for j in 1..=order {
        coeffs.push(Complex64::i() * Complex64::from_polar(2.0 * j as f64, j as f64 * phi));
    }
    CoeffVec { coeffs }
}

/// Coefficients of `h(z) = sum_k alpha_k (1 + e^{iφ_k}z)/(1 - e^{iφ_k}z)`.
pub fn herglotz_coeffs(atoms: &AtomSet, order: usize) -> Result<CoeffVec> {
    if order == 0 {
        return Err(Error::InvalidOrder(order));
    }
    let mut coeffs = vec![Complex64::new(atoms.mass(), 0.0)];
    for j in 1..=order {
        let s: Complex64 = atoms
            .atoms()
            .iter()
            .map(|a| Complex64::from_polar(2.0 * a.alpha, j as f64 * a.phi))
            .sum();
        coeffs.push(s);
    }
    Ok(CoeffVec { coeffs })
}
