//! Multi-start search for `max |{f}_n|` over `f = exp(-sum alpha_k K_{φ_k})`.
//!
//! Each restart runs a projected BFGS ascent on `log |f_n|` (same maximizers
//! as `|f_n|`, better scaled when the mass is large) with box bounds on the
//! weights. Restart 0 is always the reference extremal `F(z^n, 1)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremal::{build_candidate, reference_atoms, rotate_to_positive, verify_conditions, ConditionReport};
use crate::series::{Atom, AtomSet, CoeffVec};
use crate::TWO_OVER_E;

/// Tolerance used for the condition report attached to a search result.
pub const REPORT_TOL: f64 = 1e-6;

const MIN_START_GAP: f64 = 0.05;
const ARMIJO: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-11;
const ANGLE_MERGE: f64 = 1e-4;
/// Minimum derivative of `log |f_n|` in a new weight that triggers insertion.
const INSERT_SLOPE: f64 = 1e-7;
/// Insertions closer than this to an existing atom only move that atom.
const INSERT_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub n: usize,
    pub m_max: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub ftol: f64,
    pub alpha_bounds: (f64, f64),
}

impl SearchConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            m_max: n,
            restarts: 200,
            seed: 42,
            max_iters: 500,
            ftol: 1e-12,
            alpha_bounds: (1e-4, 6.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        if self.restarts == 0 || self.m_max == 0 || self.max_iters == 0 {
            return Err(Error::Domain("restarts, m_max and max_iters must be at least 1".into()));
        }
        let (lo, hi) = self.alpha_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Domain(format!("invalid weight bounds [{lo}, {hi}]")));
        }
        if !(self.ftol > 0.0) {
            return Err(Error::Domain("ftol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub start: AtomSet,
    pub start_value: f64,
    pub final_atoms: AtomSet,
    pub final_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub n: usize,
    pub best_value: f64,
    pub best_atoms: AtomSet,
    pub best_restart: usize,
    pub gap_to_conjecture: f64,
    pub condition_report: ConditionReport,
    pub per_restart: Vec<RestartRecord>,
}

/// `|{f}_n|` for `f = exp(-h)`, `h` the Herglotz transform of `atoms`.
pub fn objective(atoms: &AtomSet, n: usize) -> Result<f64> {
    Ok(build_candidate(atoms, n)?.leading().norm())
}

/// Partial derivatives of `|{f}_n|` in atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
}

/// `{f}_n` and its derivatives in `alpha_k`, `phi_k`, for raw (not
/// canonicalized) atom parameters.
///
/// Perturbing `alpha_k` by `eps` multiplies `f` by `exp(-eps K_k)`, so
/// `d{f}_n/d alpha_k = -(f K_k)_n`; the angle derivative uses the kernel's
/// derivative series `2ij e^{ijφ}` scaled by `alpha_k`.
fn leading_with_derivatives(alphas: &[f64], phis: &[f64], n: usize) -> (Complex64, Vec<Complex64>, Vec<Complex64>) {
    let f = taylor(alphas, phis, n);
    let mut d_alpha = Vec::with_capacity(alphas.len());
    let mut d_phi = Vec::with_capacity(alphas.len());
    for (&a, &p) in alphas.iter().zip(phis) {
        let mut kernel_dphi = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            kernel_dphi += f[n - j] * Complex64::from_polar(2.0, j as f64 * p) * Complex64::new(0.0, j as f64);
        }
        d_alpha.push(-kernel_product(&f, n, p));
        d_phi.push(-kernel_dphi * a);
    }
    (f[n], d_alpha, d_phi)
}

/// `{f}_0..{f}_n` for raw atom parameters.
fn taylor(alphas: &[f64], phis: &[f64], n: usize) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(alphas.iter().sum(), 0.0)];
    for j in 1..=n {
        h.push(
            alphas
                .iter()
                .zip(phis)
                .map(|(&a, &p)| Complex64::from_polar(2.0 * a, j as f64 * p))
                .sum(),
        );
    }
    CoeffVec::new(h).expect("finite atoms").exp_neg().into_coeffs()
}

/// `(f K_ψ)_n = f_n + 2 sum_{j>=1} f_{n-j} e^{ijψ}`.
fn kernel_product(f: &[Complex64], n: usize, psi: f64) -> Complex64 {
    (1..=n).fold(f[n], |acc, j| {
        acc + f[n - j] * Complex64::from_polar(2.0, j as f64 * psi)
    })
}

pub fn gradient(atoms: &AtomSet, n: usize) -> Result<Gradient> {
    let alphas: Vec<f64> = atoms.atoms().iter().map(|a| a.alpha).collect();
    let phis: Vec<f64> = atoms.atoms().iter().map(|a| a.phi).collect();
    let (lead, d_alpha, d_phi) = leading_with_derivatives(&alphas, &phis, n);
    let modulus = lead.norm();
    if modulus <= 16.0 * f64::EPSILON * (-atoms.mass()).exp() {
        return Err(Error::Nondifferentiable);
    }
    let unit = lead.conj() / modulus;
    Ok(Gradient {
        alpha: d_alpha.iter().map(|d| (unit * d).re).collect(),
        phi: d_phi.iter().map(|d| (unit * d).re).collect(),
    })
}

/// `(log |f_n|, gradient of log |f_n|)` over `x = (alphas, phis)`.
fn log_objective(x: &[f64], n: usize) -> Option<(f64, Vec<f64>)> {
    let m = x.len() / 2;
    let (lead, d_alpha, d_phi) = leading_with_derivatives(&x[..m], &x[m..], n);
    let modulus = lead.norm();
    if !(modulus > 0.0) || !modulus.is_finite() {
        return None;
    }
    let unit = lead.conj() / (modulus * modulus);
    let grad = d_alpha.iter().chain(&d_phi).map(|d| (unit * d).re).collect();
    Some((modulus.ln(), grad))
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub atoms: Vec<Atom>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Atoms whose angles agree to `ANGLE_MERGE` act as one atom; fold them so the
/// weight bound does not keep a redundant copy alive.
fn merge_coincident(atoms: &[Atom]) -> Vec<Atom> {
    let mut sorted: Vec<Atom> = atoms
        .iter()
        .map(|a| Atom::new(a.alpha, crate::series::wrap_angle(a.phi)))
        .collect();
    sorted.sort_by(|a, b| a.phi.total_cmp(&b.phi));
    let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
    for a in sorted {
        match out.last_mut() {
            Some(last) if a.phi - last.phi < ANGLE_MERGE => {
                let total = last.alpha + a.alpha;
                last.phi = (last.alpha * last.phi + a.alpha * a.phi) / total;
                last.alpha = total;
            }
            _ => out.push(a),
        }
    }
    if out.len() > 1 {
        let (first, last) = (out[0], out[out.len() - 1]);
        if first.phi + TAU - last.phi < ANGLE_MERGE {
            let total = first.alpha + last.alpha;
            out[0] = Atom::new(total, (first.alpha * (first.phi + TAU) + last.alpha * last.phi) / total);
            out.pop();
        }
    }
    out
}

/// Projected BFGS ascent from `start`, alternated with two structural moves
/// until neither applies: coincident atoms are merged and atoms pinned at the
/// lower weight bound dropped; then, if adding mass at some angle `ψ`
/// increases `|f_n|` to first order (the derivative is `-Re H(e^{iψ})` up to a
/// positive factor), a small atom is inserted at the steepest such `ψ`.
pub fn local_search(start: &[Atom], n: usize, cfg: &SearchConfig) -> Result<LocalOutcome> {
    let mut outcome = bfgs_ascent(start, n, cfg)?;
    let (lo, _) = cfg.alpha_bounds;
    for _ in 0..4 * n + 4 {
        let mut next: Vec<Atom> = merge_coincident(&outcome.atoms)
            .into_iter()
            .filter(|a| a.alpha > lo * (1.0 + 1e-9))
            .collect();
        if next.is_empty() {
            next = outcome.atoms.clone();
        }
        let mut changed = next.len() != outcome.atoms.len();
        if let Some(atom) = insertion(&next, n, outcome.value, lo) {
            next.push(atom);
            changed = true;
        }
        if !changed {
            break;
        }
        let before = outcome.iterations;
        let mut trace = std::mem::take(&mut outcome.trace);
        outcome = bfgs_ascent(&next, n, cfg)?;
        trace.append(&mut outcome.trace);
        outcome.trace = trace;
        outcome.iterations += before;
    }
    Ok(outcome)
}

/// Atom whose insertion strictly increases `|f_n|` above `current`, placed
/// where the derivative in a new weight is largest, if that derivative is
/// clearly positive.
fn insertion(atoms: &[Atom], n: usize, current: f64, lo: f64) -> Option<Atom> {
    let alphas: Vec<f64> = atoms.iter().map(|a| a.alpha).collect();
    let phis: Vec<f64> = atoms.iter().map(|a| a.phi).collect();
    let f = taylor(&alphas, &phis, n);
    let lead = f[n];
    if !(lead.norm() > 0.0) {
        return None;
    }
    let unit = lead.conj() / lead.norm_sqr();
    let slope = |psi: f64| -(unit * kernel_product(&f, n, psi)).re;

    let points = (64 * n).max(256);
    let step = TAU / points as f64;
    let (mut best_psi, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..points {
        let psi = i as f64 * step;
        let v = slope(psi);
        if v > best {
            best = v;
            best_psi = psi;
        }
    }
    let (mut a, mut b) = (best_psi - step, best_psi + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-10 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if slope(c) > slope(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let psi = crate::series::wrap_angle(0.5 * (a + b));
    let near_existing = phis.iter().any(|&p| {
        let d = crate::series::wrap_angle(p - psi);
        d.min(TAU - d) < INSERT_GAP
    });
    if near_existing || slope(psi) <= INSERT_SLOPE {
        return None;
    }
    let mut weight = 1e-2;
    while weight >= lo {
        let mut trial_a = alphas.clone();
        let mut trial_p = phis.clone();
        trial_a.push(weight);
        trial_p.push(psi);
        if taylor(&trial_a, &trial_p, n)[n].norm() > current {
            return Some(Atom::new(weight, psi));
        }
        weight *= 0.5;
    }
    None
}

fn bfgs_ascent(start: &[Atom], n: usize, cfg: &SearchConfig) -> Result<LocalOutcome> {
    let m = start.len();
    let dim = 2 * m;
    let (lo, hi) = cfg.alpha_bounds;
    let project = |x: &mut [f64]| {
        for a in &mut x[..m] {
            *a = a.clamp(lo, hi);
        }
    };

    let mut x: Vec<f64> = start
        .iter()
        .map(|a| a.alpha)
        .chain(start.iter().map(|a| a.phi))
        .collect();
    project(&mut x);
    // minimize the negated log objective
    let eval = |x: &[f64]| log_objective(x, n).map(|(v, g)| (-v, g.into_iter().map(|d| -d).collect::<Vec<_>>()));
    let (mut fx, mut g) = eval(&x).ok_or(Error::Nondifferentiable)?;

    let mut inv_hess = identity(dim);
    let mut trace = vec![(-fx).exp()];
    let mut converged = false;
    let mut iterations = 0;
    let mut small_steps = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let active: Vec<bool> = (0..dim)
            .map(|i| i < m && ((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..dim)
            .filter(|&i| !active[i])
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        if pg_norm <= GRAD_TOL {
            converged = true;
            break;
        }

        let mut d = mat_vec(&inv_hess, &g);
        d.iter_mut().for_each(|v| *v = -*v);
        for i in 0..dim {
            if active[i] {
                d[i] = 0.0;
            }
        }
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            inv_hess = identity(dim);
            d = g
                .iter()
                .enumerate()
                .map(|(i, v)| if active[i] { 0.0 } else { -v })
                .collect();
            slope = dot(&d, &g);
        }
        // cap the first trial step so angles move at most ~1 rad
        let max_comp = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut lambda = if max_comp > 1.0 { 1.0 / max_comp } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Some((ft, gt)) = eval(&trial) {
                let decrease = dot(&g, &step).min(lambda * slope * 1e-3);
                if ft <= fx + ARMIJO * decrease {
                    accepted = Some((trial, step, ft, gt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((x_new, s, f_new, g_new)) = accepted else {
            // no descent possible along the projected direction
            converged = pg_norm <= 1e-7;
            break;
        };

        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            bfgs_update(&mut inv_hess, &s, &y, sy);
        }

        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push((-fx).exp());
        if rel_change <= cfg.ftol {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    let atoms = (0..m).map(|k| Atom::new(x[k], x[m + k])).collect();
    Ok(LocalOutcome {
        atoms,
        value: (-fx).exp(),
        iterations,
        converged,
        trace,
    })
}

fn identity(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Inverse-Hessian BFGS update `H+ = (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let dim = s.len();
    for i in 0..dim {
        for j in 0..dim {
            h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

/// Random start: `m` uniform in `[1, m_max]`, log-uniform weights, uniform
/// angles with a minimum separation (rejection, bounded tries).
pub fn random_start(rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Vec<Atom> {
    let m = rng.gen_range(1..=cfg.m_max);
    let (lo, hi) = cfg.alpha_bounds;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut phis: Vec<f64> = Vec::with_capacity(m);
    for _ in 0..100 {
        phis = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
        phis.sort_by(f64::total_cmp);
        if min_circular_gap(&phis) >= MIN_START_GAP {
            break;
        }
    }
    phis.into_iter()
        .map(|phi| Atom::new(rng.gen_range(llo..lhi).exp(), phi))
        .collect()
}

fn min_circular_gap(sorted: &[f64]) -> f64 {
    if sorted.len() < 2 {
        return f64::INFINITY;
    }
    let wrap = sorted[0] + TAU - sorted[sorted.len() - 1];
    sorted.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min)
}

fn run_restart(restart: usize, cfg: &SearchConfig) -> Result<RestartRecord> {
    let seed = cfg.seed ^ restart as u64;
    let start_atoms = if restart == 0 {
        reference_atoms(cfg.n, 1.0)?.atoms().to_vec()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_start(&mut rng, cfg)
    };
    let start = AtomSet::new(start_atoms.clone())?;
    let start_value = objective(&start, cfg.n)?;

    let (final_atoms, iterations, converged, trace) = match local_search(&start_atoms, cfg.n, cfg) {
        Ok(out) => (AtomSet::new(out.atoms)?, out.iterations, out.converged, out.trace),
        Err(Error::Nondifferentiable) => (start.clone(), 0, false, vec![start_value]),
        Err(e) => return Err(e),
    };
    let final_atoms = match rotate_to_positive(&build_candidate(&final_atoms, cfg.n)?) {
        Ok(c) => c.atoms().clone(),
        Err(Error::CannotNormalize) => final_atoms,
        Err(e) => return Err(e),
    };
    let final_value = objective(&final_atoms, cfg.n)?;
    Ok(RestartRecord {
        restart,
        seed,
        start,
        start_value,
        final_atoms,
        final_value,
        iterations,
        converged,
        trace,
    })
}

/// Runs every restart (in parallel on the current rayon pool) and reduces
/// deterministically: best value is the maximum final value; among restarts
/// within `ftol` of it, the lexicographically smallest atom vector wins.
pub fn search(cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let records: Vec<RestartRecord> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(r, cfg))
        .collect::<Result<_>>()?;

    let best_value = records.iter().map(|r| r.final_value).fold(f64::NEG_INFINITY, f64::max);
    let best = records
        .iter()
        .filter(|r| r.final_value >= best_value - cfg.ftol)
        .min_by(|a, b| {
            let (fa, fb) = (a.final_atoms.to_flat(), b.final_atoms.to_flat());
            fa.iter()
                .partial_cmp(fb.iter())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart");

    let candidate = build_candidate(&best.final_atoms, cfg.n)?;
    let condition_report = verify_conditions(&candidate, REPORT_TOL);
    Ok(SearchResult {
        n: cfg.n,
        best_value,
        best_atoms: best.final_atoms.clone(),
        best_restart: best.restart,
        gap_to_conjecture: best_value - TWO_OVER_E,
        condition_report,
        per_restart: records,
    })
}
