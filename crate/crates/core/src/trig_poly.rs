//! Real trigonometric polynomials, their global minimum on the circle, and
//! Fejér–Riesz spectral factorization.
//!
//! The coefficient convention throughout is the one of polynomials with
//! positive real part: `H(z) = h_0 + 2 sum_{k>=1} h_k z^k` with `h_0` real,
//! whose real part on the circle is
//! `T(φ) = a_0 + sum (a_k cos kφ - b_k sin kφ)`, `a_k + i b_k = 2 h_k`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{poly_from_roots, polynomial_roots};
use crate::series::CoeffVec;

/// Nonnegativity slack, relative to [`TrigPoly::scale`].
pub const NONNEG_TOL: f64 = 1e-9;

/// Roots of the lifted polynomial this close to the unit circle are treated
/// as circle roots.
pub const CIRCLE_TOL: f64 = 1e-7;

const MIN_SAMPLES: usize = 64;
const SAMPLES_PER_DEGREE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    pub a0: f64,
    /// `(a_k, b_k)` for `k = 1..n`.
    pub terms: Vec<(f64, f64)>,
}

impl TrigPoly {
    /// Builds the polynomial, trimming trailing zero terms so that
    /// `a_n^2 + b_n^2 > 0`.
    pub fn new(a0: f64, mut terms: Vec<(f64, f64)>) -> Result<Self> {
        if !a0.is_finite() || terms.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFinite("trigonometric polynomial"));
        }
        while matches!(terms.last(), Some(&(a, b)) if a == 0.0 && b == 0.0) {
            terms.pop();
        }
        Ok(Self { a0, terms })
    }

    pub fn degree(&self) -> usize {
        self.terms.len()
    }

    /// `a_0 + sum (|a_k| + |b_k|)`, the sup-norm bound used for tolerances.
    pub fn scale(&self) -> f64 {
        self.a0.abs() + self.terms.iter().map(|(a, b)| a.abs() + b.abs()).sum::<f64>()
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.a0
            + self
                .terms
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| {
                    let k = (i + 1) as f64;
                    a * (k * phi).cos() - b * (k * phi).sin()
                })
                .sum::<f64>()
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let k = (i + 1) as f64;
                -k * (a * (k * phi).sin() + b * (k * phi).cos())
            })
            .sum()
    }

    pub fn second_derivative(&self, phi: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let k = (i + 1) as f64;
                -k * k * (a * (k * phi).cos() - b * (k * phi).sin())
            })
            .sum()
    }

    /// Back to the `h` convention: `(a_0, (a_1 + i b_1)/2, ...)`.
    pub fn to_h_coeffs(&self) -> CoeffVec {
        let mut v = vec![Complex64::new(self.a0, 0.0)];
        v.extend(self.terms.iter().map(|&(a, b)| Complex64::new(a, b) / 2.0));
        CoeffVec::new(v).expect("finite by construction")
    }

    /// Global minimum over `[0, 2π)`: dense sampling, then bisection on the
    /// derivative inside every sampled local-minimum bracket.
    pub fn global_min(&self) -> (f64, f64) {
        if self.degree() == 0 {
            return (0.0, self.a0);
        }
        let samples = (SAMPLES_PER_DEGREE * self.degree()).max(MIN_SAMPLES);
        let step = TAU / samples as f64;
        let values: Vec<f64> = (0..samples).map(|i| self.eval(i as f64 * step)).collect();

        let mut best = (0.0, f64::INFINITY);
        for i in 0..samples {
            let prev = values[(i + samples - 1) % samples];
            let next = values[(i + 1) % samples];
            if values[i] > prev || values[i] > next {
                continue;
            }
            let center = i as f64 * step;
            let (phi, value) = self.refine_min(center - step, center + step);
            if value < best.1 {
                best = (phi, value);
            }
        }
        best
    }

    fn refine_min(&self, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let d_lo = self.derivative(lo);
        let d_hi = self.derivative(hi);
        if d_lo <= 0.0 && d_hi >= 0.0 {
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if self.derivative(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        } else {
            // flat bracket: golden-section on the values
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            while hi - lo > 1e-13 {
                if self.eval(c) < self.eval(d) {
                    hi = d;
                } else {
                    lo = c;
                }
                c = hi - g * (hi - lo);
                d = lo + g * (hi - lo);
            }
        }
        let phi = crate::series::wrap_angle(0.5 * (lo + hi));
        (phi, self.eval(phi))
    }

    /// Samples `(φ, T(φ))` on a uniform grid of `points` over `[0, 2π)`.
    pub fn profile(&self, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let phi = TAU * i as f64 / points as f64;
                (phi, self.eval(phi))
            })
            .collect()
    }
}

/// Real part of `H(z) = h_0 + 2 sum h_k z^k` restricted to the circle.
pub fn from_poly_real_part(h: &CoeffVec, tol: f64) -> Result<TrigPoly> {
    let h0 = h[0];
    if h0.im.abs() > tol * h0.re.abs().max(1.0) {
        return Err(Error::Domain(format!("h_0 must be real, got imaginary part {}", h0.im)));
    }
    let terms = h.coeffs()[1..].iter().map(|c| (2.0 * c.re, 2.0 * c.im)).collect();
    TrigPoly::new(h0.re, terms)
}

/// Outer spectral factor `P` with `|P(e^{iφ})|^2 = T(φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    p: Vec<Complex64>,
    roots: Vec<Complex64>,
}

impl SpectralFactor {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.p
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn degree(&self) -> usize {
        self.p.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Roots of `P` on the unit circle (within [`CIRCLE_TOL`]).
    pub fn circle_roots(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .copied()
            .filter(|r| (r.norm() - 1.0).abs() < CIRCLE_TOL)
            .collect()
    }

    /// Zeros of `T` on `[0, 2π)` counted with multiplicity: every circle
    /// root of `P` is a double zero of `|P|^2`.
    pub fn trig_zero_count(&self) -> usize {
        2 * self.circle_roots().len()
    }
}

/// Fejér–Riesz factorization.
///
/// The Laurent polynomial `sum_{|k|<=n} t_k z^k` with `t_k = h_k`,
/// `t_{-k} = conj(h_k)` is lifted to the degree-`2n` polynomial
/// `c(z) = z^n sum t_k z^k`. Its roots pair up as `r, 1/conj(r)`; one root of
/// each off-circle pair (the one outside the disk) and one of each double
/// circle root go into `P`. The scale comes from `h_0 = sum |p_k|^2` and the
/// phase from `p_0 > 0`.
pub fn fejer_riesz(t: &TrigPoly) -> Result<SpectralFactor> {
    let n = t.degree();
    if n == 0 {
        if t.a0 > 0.0 {
            return Ok(SpectralFactor {
                p: vec![Complex64::new(t.a0.sqrt(), 0.0)],
                roots: vec![],
            });
        }
        return Err(Error::NotNonnegative { min: t.a0, phi: 0.0 });
    }
    let (phi_min, min) = t.global_min();
    if min < -NONNEG_TOL * t.scale() {
        return Err(Error::NotNonnegative { min, phi: phi_min });
    }

    let h = t.to_h_coeffs();
    let mut lifted = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
    lifted[n] = h[0];
    for k in 1..=n {
        lifted[n + k] = h[k];
        lifted[n - k] = h[k].conj();
    }
    let all = polynomial_roots(&lifted)?;

    let (mut circle, off): (Vec<Complex64>, Vec<Complex64>) =
        all.into_iter().partition(|r| (r.norm() - 1.0).abs() < CIRCLE_TOL);
    if circle.len() % 2 != 0 {
        return Err(Error::NotNonnegative { min, phi: phi_min });
    }
    circle.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut selected: Vec<Complex64> = pair_circle_roots(&circle)
        .into_iter()
        .map(|r| Complex64::from_polar(1.0, polish_circle_zero(t, r.arg())))
        .collect();

    let mut outside = off;
    outside.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let wanted = n - selected.len();
    if outside.len() < wanted {
        return Err(Error::Numeric("too few roots off the unit circle".into()));
    }
    selected.extend_from_slice(&outside[..wanted]);
    for r in &outside[..wanted] {
        if r.norm() < 1.0 {
            return Err(Error::Numeric(format!(
                "root pairing failed: selected root of modulus {}",
                r.norm()
            )));
        }
    }

    let q = poly_from_roots(&selected, Complex64::new(1.0, 0.0));
    let energy: f64 = q.iter().map(|c| c.norm_sqr()).sum();
    let scale = (t.a0 / energy).sqrt();
    let phase = Complex64::from_polar(1.0, -q[0].arg());
    let p: Vec<Complex64> = q.iter().map(|c| c * phase * scale).collect();
    let mut p = p;
    p[0] = Complex64::new(p[0].re, 0.0);
    Ok(SpectralFactor { p, roots: selected })
}

/// Splits circle roots (sorted by angle) into adjacent pairs, replacing each
/// pair with its mean projected onto the circle. The first root may pair
/// with the last across the branch cut at `±π`.
fn pair_circle_roots(sorted: &[Complex64]) -> Vec<Complex64> {
    if sorted.is_empty() {
        return vec![];
    }
    let gap = |a: Complex64, b: Complex64| (a - b).norm();
    let len = sorted.len();
    // choose the alignment (start at 0 or 1) with the smaller worst gap
    let worst = |offset: usize| {
        (0..len / 2)
            .map(|i| gap(sorted[(2 * i + offset) % len], sorted[(2 * i + 1 + offset) % len]))
            .fold(0.0, f64::max)
    };
    let offset = if worst(1) < worst(0) { 1 } else { 0 };
    (0..len / 2)
        .map(|i| {
            let mean = 0.5 * (sorted[(2 * i + offset) % len] + sorted[(2 * i + 1 + offset) % len]);
            mean / mean.norm()
        })
        .collect()
}

/// A circle root of `P` is a double zero of `T`, hence a simple zero of
/// `T'`: Newton on `T'` recovers it to full precision.
fn polish_circle_zero(t: &TrigPoly, mut phi: f64) -> f64 {
    for _ in 0..8 {
        let d2 = t.second_derivative(phi);
        if d2 <= 0.0 {
            break;
        }
        let step = t.derivative(phi) / d2;
        let next = phi - step;
        if t.eval(next) > t.eval(phi) {
            break;
        }
        phi = next;
        if step.abs() < 1e-16 {
            break;
        }
    }
    phi
}

/// `h_k = sum_{j=0}^{n-k} p_{j+k} conj(p_j)`.
pub fn autocorrelate(p: &[Complex64]) -> Result<CoeffVec> {
    if p.is_empty() || p.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::Domain("autocorrelation of an all-zero sequence".into()));
    }
    let n = p.len() - 1;
    let h = (0..=n)
        .map(|k| (0..=n - k).map(|j| p[j + k] * p[j].conj()).sum())
        .collect();
    CoeffVec::new(h)
}

/// `H = h_0 (1 + η z^n)` with `|η| = 1`: interior coefficients vanish and
/// `h_0 = 2 |h_n|`, both to `tol * h_0`.
pub fn is_extremal_form(h: &CoeffVec, tol: f64) -> bool {
    let n = h.order();
    let h0 = h[0].re;
    if !(h0 > 0.0) || n == 0 {
        return false;
    }
    let interior_zero = h.coeffs()[1..n].iter().all(|c| c.norm() <= tol * h0);
    interior_zero && (h0 - 2.0 * h[n].norm()).abs() <= tol * h0
}

/// Angles of the `n`-th roots of `-1`, `(π + 2πk)/n`.
pub fn roots_of_minus_one(n: usize) -> Vec<f64> {
    (0..n).map(|k| (PI + TAU * k as f64) / n as f64).collect()
}
