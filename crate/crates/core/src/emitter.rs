//! Giant-atom coupling geometry and valley selectivity.
//!
//! A giant atom couples to the A resonators of cells `R_l` with amplitudes
//! `(g / sqrt(N_p)) e^{i phi_l}`, `N_p` being the number of coupling points.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::bloch::{bloch_angles, dirac_point, Valley};
use crate::lattice::primitive_vectors;
use crate::{Error, Result, Vec2, C64};

/// Couplings with `g / J` at or above this raise the weak-coupling advisory.
pub const WEAK_COUPLING_LIMIT: f64 = 0.5;

/// Default bound on `|R_l - R_1|` for the compactness condition, in units of `a`.
pub const DEFAULT_SIZE_BOUND: f64 = 3.0;

/// One coupling point on the A sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingPoint {
    pub n: i64,
    pub m: i64,
    /// Phase in `[0, 2 pi)`.
    pub phase: f64,
}

impl CouplingPoint {
    pub fn new(n: i64, m: i64, phase: f64) -> Self {
        Self { n, m, phase: phase.rem_euclid(TAU) }
    }

    pub fn position(&self, a: f64) -> Vec2 {
        let (e1, e2) = primitive_vectors(a);
        e1 * self.n as f64 + e2 * self.m as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GiantAtomSpec {
    pub omega0: f64,
    /// Overall coupling; each point carries `g / sqrt(N_p)`.
    pub g: f64,
    points: Vec<CouplingPoint>,
}

impl GiantAtomSpec {
    pub fn new(omega0: f64, g: f64, points: Vec<CouplingPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("an atom needs at least one coupling point".into()));
        }
        if !omega0.is_finite() || !g.is_finite() {
            return Err(Error::Config(format!("non-finite atom parameters omega0 = {omega0}, g = {g}")));
        }
        let points = points.into_iter().map(|p| CouplingPoint::new(p.n, p.m, p.phase)).collect();
        Ok(Self { omega0, g, points })
    }

    /// Normal (single-point) atom on `a_{00}`.
    pub fn normal(omega0: f64, g: f64) -> Self {
        Self { omega0, g, points: vec![CouplingPoint::new(0, 0, 0.0)] }
    }

    /// Two points, `a_{00}` with phase 0 and `a_{dn, dm}` with phase `phase`.
    pub fn two_point(omega0: f64, g: f64, offset: (i64, i64), phase: f64) -> Self {
        Self {
            omega0,
            g,
            points: vec![CouplingPoint::new(0, 0, 0.0), CouplingPoint::new(offset.0, offset.1, phase)],
        }
    }

    pub fn points(&self) -> &[CouplingPoint] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Coupling amplitude of point `l`: `(g / sqrt(N_p)) e^{i phi_l}`.
    pub fn point_coupling(&self, l: usize) -> C64 {
        C64::from_polar(self.g / (self.num_points() as f64).sqrt(), self.points[l].phase)
    }

    /// True when `g / J` is outside the weak-coupling regime.
    pub fn weak_coupling_warning(&self, j: f64) -> bool {
        (self.g / j).abs() >= WEAK_COUPLING_LIMIT
    }

    /// Same geometry with every phase negated (time-reversed coupling).
    pub fn conjugate(&self) -> Self {
        let points = self.points.iter().map(|p| CouplingPoint::new(p.n, p.m, -p.phase)).collect();
        Self { points, ..self.clone() }
    }

    /// Adds `shift` to every phase.
    pub fn with_global_phase(&self, shift: f64) -> Self {
        let points = self.points.iter().map(|p| CouplingPoint::new(p.n, p.m, p.phase + shift)).collect();
        Self { points, ..self.clone() }
    }

    /// Translates every coupling point by `(dn, dm)` cells.
    pub fn translated(&self, dn: i64, dm: i64) -> Self {
        let points = self.points.iter().map(|p| CouplingPoint::new(p.n + dn, p.m + dm, p.phase)).collect();
        Self { points, ..self.clone() }
    }

    /// Same atom reduced to its first point with the full coupling `g`.
    pub fn first_point_only(&self) -> Self {
        let p = self.points[0];
        Self { points: vec![p], ..self.clone() }
    }

    /// Largest `|R_l - R_1|`.
    pub fn footprint(&self, a: f64) -> f64 {
        let r1 = self.points[0].position(a);
        self.points.iter().map(|p| (p.position(a) - r1).norm()).fold(0.0, f64::max)
    }
}

/// Couplings `(g+_k, g-_k)` of the emitter to the upper and lower Bloch
/// modes at `k` on a lattice of `n_cells` cells.
pub fn mode_couplings(
    atom: &GiantAtomSpec,
    k: Vec2,
    delta: f64,
    j: f64,
    a: f64,
    n_cells: usize,
) -> Result<(C64, C64)> {
    let sum: C64 = atom
        .points()
        .iter()
        .map(|p| C64::from_polar(1.0, p.phase - k.dot(&p.position(a))))
        .sum();
    let pref = atom.g / ((n_cells * atom.num_points()) as f64).sqrt();
    let ang = bloch_angles(k, delta, j, a);
    let (c, s) = ((ang.theta / 2.0).cos(), (ang.theta / 2.0).sin());
    let plus = sum * (pref * c);
    let minus = if s == 0.0 { C64::new(0.0, 0.0) } else { -sum * ang.phase(k)? * (pref * s) };
    Ok((plus, minus))
}

/// Valley structure factor `F_tau(q) = sum_l exp(i [phi_l - (tau K + q) . R_l])`.
pub fn structure_factor(atom: &GiantAtomSpec, valley: Valley, q: Vec2, a: f64) -> C64 {
    let k = dirac_point(valley, a) + q;
    atom.points().iter().map(|p| C64::from_polar(1.0, p.phase - k.dot(&p.position(a)))).sum()
}

/// Interference factor `(1/N_p) |sum_l exp(i (tau K . R_l - phi_l))|^2` that
/// multiplies the single-point decay rate.
pub fn interference_factor(atom: &GiantAtomSpec, valley: Valley, a: f64) -> f64 {
    structure_factor(atom, valley, Vec2::zeros(), a).norm_sqr() / atom.num_points() as f64
}

/// Outcome of the three valley-selectivity conditions for valley `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SelectivityReport {
    pub couples_to_tau: bool,
    pub decoupled_from_minus_tau: bool,
    pub size_ok: bool,
}

impl SelectivityReport {
    pub fn is_selective(&self) -> bool {
        self.couples_to_tau && self.decoupled_from_minus_tau && self.size_ok
    }
}

/// Sum of the phasors `z_l(tau) = exp(i [phi_l - tau K . (R_l - R_1)])`.
fn phasor_sum(atom: &GiantAtomSpec, valley: Valley, a: f64) -> C64 {
    let k = dirac_point(valley, a);
    let r1 = atom.points()[0].position(a);
    atom.points().iter().map(|p| C64::from_polar(1.0, p.phase - k.dot(&(p.position(a) - r1)))).sum()
}

/// Checks selective coupling to `valley` with the default tolerances
/// (`1e-9 N_p` on the phasor sums, footprint `<= 3a`).
pub fn check_valley_selective(atom: &GiantAtomSpec, valley: Valley, a: f64) -> SelectivityReport {
    let tol = 1e-9 * atom.num_points() as f64;
    check_valley_selective_with(atom, valley, a, tol, DEFAULT_SIZE_BOUND * a)
}

pub fn check_valley_selective_with(
    atom: &GiantAtomSpec,
    valley: Valley,
    a: f64,
    tol: f64,
    size_bound: f64,
) -> SelectivityReport {
    SelectivityReport {
        couples_to_tau: phasor_sum(atom, valley, a).norm() > tol,
        decoupled_from_minus_tau: phasor_sum(atom, valley.opposite(), a).norm() <= tol,
        size_ok: atom.footprint(a) <= size_bound,
    }
}

/// Relative phase `phi_2 - phi_1` that decouples a two-point atom with
/// `R_2 - R_1 = dn e1 + dm e2` from valley `-tau`, in `[0, 2 pi)`.
pub fn solve_phase_two_points(dn: i64, dm: i64, valley: Valley) -> Result<f64> {
    let d = dn - dm;
    if d.rem_euclid(3) == 0 {
        return Err(Error::NoSolution);
    }
    let phi = (1.0 - 2.0 * valley.sign() * d as f64 / 3.0) * PI;
    Ok(phi.rem_euclid(TAU))
}
