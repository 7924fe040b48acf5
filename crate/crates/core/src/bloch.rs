//! Momentum-space analysis of the uniformly detuned lattice.
//!
//! The Bloch Hamiltonian is `h(k) = [[D, J f(k)], [J f*(k), -D]]` with
//! `f(k) = exp(i kx a) + 2 exp(-i kx a / 2) cos(sqrt(3) a ky / 2)`.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::lattice::{reciprocal_vectors, SQRT3};
use crate::{Error, Result, Vec2, C64};

use std::f64::consts::PI;

/// Below this modulus `arg f(k)` is treated as undefined.
pub const DIRAC_EPS: f64 = 1e-12;

/// One of the two inequivalent Dirac valleys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Valley {
    /// `tau = +1`.
    K,
    /// `tau = -1`.
    KPrime,
}

impl Valley {
    pub const BOTH: [Valley; 2] = [Valley::K, Valley::KPrime];

    pub fn tau(self) -> i32 {
        match self {
            Valley::K => 1,
            Valley::KPrime => -1,
        }
    }

    pub fn sign(self) -> f64 {
        self.tau() as f64
    }

    pub fn from_tau(tau: i32) -> Result<Self> {
        match tau {
            1 => Ok(Valley::K),
            -1 => Ok(Valley::KPrime),
            other => Err(Error::Config(format!("valley index must be +1 or -1, got {other}"))),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Valley::K => Valley::KPrime,
            Valley::KPrime => Valley::K,
        }
    }
}

/// Dirac point `K_tau = tau (2 pi / 3a, -2 pi / (3 sqrt(3) a))`.
pub fn dirac_point(valley: Valley, a: f64) -> Vec2 {
    Vec2::new(2.0 * PI / (3.0 * a), -2.0 * PI / (3.0 * SQRT3 * a)) * valley.sign()
}

/// Dirac velocity `v = 3 a J / 2`.
pub fn dirac_velocity(j: f64, a: f64) -> f64 {
    1.5 * a * j
}

/// Valley-local frame: Dirac point and velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValleyFrame {
    pub valley: Valley,
    pub k_point: Vec2,
    pub v: f64,
}

impl ValleyFrame {
    pub fn new(valley: Valley, j: f64, a: f64) -> Self {
        Self { valley, k_point: dirac_point(valley, a), v: dirac_velocity(j, a) }
    }
}

/// Distance from `k` to the nearest reciprocal-lattice image of `K_tau`.
pub fn valley_distance(k: Vec2, valley: Valley, a: f64) -> f64 {
    let (b1, b2) = reciprocal_vectors(a);
    let d = k - dirac_point(valley, a);
    // Reduce to fractional coordinates, then search neighbouring images.
    let s1 = d.dot(&b1_dual(a));
    let s2 = d.dot(&b2_dual(a));
    let (r1, r2) = (s1.round(), s2.round());
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let img = d - b1 * (r1 + i as f64) - b2 * (r2 + j as f64);
            best = best.min(img.norm());
        }
    }
    best
}

/// Dual basis of `(b1, b2)`: `e_i / 2 pi`.
fn b1_dual(a: f64) -> Vec2 {
    Vec2::new(1.5 * a, 0.5 * SQRT3 * a) / (2.0 * PI)
}

fn b2_dual(a: f64) -> Vec2 {
    Vec2::new(0.0, SQRT3 * a) / (2.0 * PI)
}

/// Valley whose Dirac point (modulo reciprocal vectors) is closest to `k`,
/// with that distance.
pub fn nearest_valley(k: Vec2, a: f64) -> (Valley, f64) {
    let dk = valley_distance(k, Valley::K, a);
    let dkp = valley_distance(k, Valley::KPrime, a);
    if dk <= dkp {
        (Valley::K, dk)
    } else {
        (Valley::KPrime, dkp)
    }
}

/// Folds `k` into the hexagonal first Brillouin zone (image of smallest norm).
pub fn fold_to_first_zone(k: Vec2, a: f64) -> Vec2 {
    let (b1, b2) = reciprocal_vectors(a);
    let (r1, r2) = (k.dot(&b1_dual(a)).round(), k.dot(&b2_dual(a)).round());
    let mut best = k;
    let mut best_norm = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let img = k - b1 * (r1 + i as f64) - b2 * (r2 + j as f64);
            if img.norm() < best_norm - 1e-12 {
                best_norm = img.norm();
                best = img;
            }
        }
    }
    best
}

/// Structure function `f(k)` of the nearest-neighbour bonds.
pub fn f_k(k: Vec2, a: f64) -> C64 {
    C64::from_polar(1.0, k.x * a) + C64::from_polar(2.0, -0.5 * k.x * a) * (0.5 * SQRT3 * a * k.y).cos()
}

/// Upper-band energy `sqrt(D^2 + J^2 |f|^2)`.
pub fn band_energy(k: Vec2, delta: f64, j: f64, a: f64) -> f64 {
    (delta * delta + j * j * f_k(k, a).norm_sqr()).sqrt()
}

/// Bloch Hamiltonian `h(k)`.
pub fn bloch_hamiltonian(k: Vec2, delta: f64, j: f64, a: f64) -> Matrix2<C64> {
    let f = f_k(k, a) * j;
    Matrix2::new(C64::new(delta, 0.0), f, f.conj(), C64::new(-delta, 0.0))
}

/// Rotation angles of the upper Bloch eigenvector `(cos(t/2), e^{-i phi} sin(t/2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochAngles {
    pub theta: f64,
    /// `arg f(k)`; `None` at a Dirac point where it is a gauge singularity.
    pub varphi: Option<f64>,
}

impl BlochAngles {
    /// `e^{i varphi}`, or an error at a Dirac point.
    pub fn phase(&self, k: Vec2) -> Result<C64> {
        self.varphi
            .map(|p| C64::from_polar(1.0, p))
            .ok_or(Error::GaugeSingularity { kx: k.x, ky: k.y })
    }
}

pub fn bloch_angles(k: Vec2, delta: f64, j: f64, a: f64) -> BlochAngles {
    let f = f_k(k, a);
    let omega = (delta * delta + j * j * f.norm_sqr()).sqrt();
    let theta = if omega == 0.0 { 0.5 * PI } else { (delta / omega).clamp(-1.0, 1.0).acos() };
    let varphi = (f.norm() > DIRAC_EPS).then(|| f.arg());
    BlochAngles { theta, varphi }
}

/// Everything known about one k-point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochPoint {
    pub k: Vec2,
    pub f: C64,
    pub omega: f64,
    pub theta: f64,
    pub varphi: Option<f64>,
}

impl BlochPoint {
    pub fn new(k: Vec2, delta: f64, j: f64, a: f64) -> Self {
        let f = f_k(k, a);
        let angles = bloch_angles(k, delta, j, a);
        Self {
            k,
            f,
            omega: band_energy(k, delta, j, a),
            theta: angles.theta,
            varphi: angles.varphi,
        }
    }
}

/// Massive Dirac Hamiltonian `v (tau qx sx + qy sy) + D sz`.
pub fn dirac_expansion(valley: Valley, q: Vec2, delta: f64, v: f64) -> Matrix2<C64> {
    let off = C64::new(v * valley.sign() * q.x, -v * q.y);
    Matrix2::new(C64::new(delta, 0.0), off, off.conj(), C64::new(-delta, 0.0))
}

/// Valley Berry curvature `tau v^2 D / (2 (D^2 + v^2 q^2)^{3/2})`.
pub fn berry_curvature_analytic(valley: Valley, q: Vec2, delta: f64, v: f64) -> Result<f64> {
    let e2 = delta * delta + v * v * q.norm_squared();
    if e2 == 0.0 {
        return Err(Error::Singular);
    }
    Ok(valley.sign() * v * v * delta / (2.0 * e2.powf(1.5)))
}

/// Normalized lower-band eigenvector of `h(k)`, in whichever of two gauges
/// is better conditioned.
fn lower_band_vector(k: Vec2, delta: f64, j: f64, a: f64) -> [C64; 2] {
    let f = f_k(k, a) * j;
    let omega = (delta * delta + f.norm_sqr()).sqrt();
    let u = [f, C64::new(-(omega + delta), 0.0)];
    let w = [C64::new(omega - delta, 0.0), -f.conj()];
    let nu = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
    let nw = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    if nu >= nw {
        [u[0] / nu, u[1] / nu]
    } else {
        [w[0] / nw, w[1] / nw]
    }
}

/// Plaquette of the discretized Brillouin zone with its Berry flux.
#[derive(Clone, Copy, Debug)]
pub struct Plaquette {
    pub center: Vec2,
    /// Berry phase around the plaquette, in `(-pi, pi]`.
    pub flux: f64,
    pub area: f64,
}

/// Link-variable Berry fluxes of the lower band on a `grid x grid`
/// discretization of the reciprocal unit cell.
pub fn lower_band_plaquettes(delta: f64, j: f64, a: f64, grid: usize) -> Vec<Plaquette> {
    let (b1, b2) = reciprocal_vectors(a);
    let g = grid as f64;
    let kpt = |i: usize, l: usize| b1 * (i as f64 / g) + b2 * (l as f64 / g);
    let states: Vec<[C64; 2]> = (0..grid)
        .flat_map(|i| (0..grid).map(move |l| (i, l)))
        .map(|(i, l)| lower_band_vector(kpt(i, l), delta, j, a))
        .collect();
    let at = |i: usize, l: usize| &states[(i % grid) * grid + (l % grid)];
    let link = |p: &[C64; 2], q: &[C64; 2]| {
        let z = p[0].conj() * q[0] + p[1].conj() * q[1];
        z / z.norm()
    };
    let area = (b1.x * b2.y - b1.y * b2.x).abs() / (g * g);
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for l in 0..grid {
            let (u0, u1, u2, u3) = (at(i, l), at(i + 1, l), at(i + 1, l + 1), at(i, l + 1));
            let loop_product = link(u0, u1) * link(u1, u2) * link(u2, u3) * link(u3, u0);
            out.push(Plaquette {
                center: kpt(i, l) + (b1 + b2) * (0.5 / g),
                flux: loop_product.arg(),
                area,
            });
        }
    }
    out
}

/// Berry-curvature integral (in units of `2 pi`) of the lower band over
/// the half of the Brillouin zone closer to `K_tau` than to `K_-tau`.
pub fn valley_chern_numeric(delta: f64, j: f64, a: f64, valley: Valley, grid: usize) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Gapless("valley Chern number needs a nonzero detuning".into()));
    }
    if grid < 48 {
        return Err(Error::Config(format!("plaquette grid {grid} is below the minimum of 48")));
    }
    let total: f64 = lower_band_plaquettes(delta, j, a, grid)
        .iter()
        .filter(|p| nearest_valley(p.center, a).0 == valley)
        .map(|p| p.flux)
        .sum();
    Ok(total / (2.0 * PI))
}

/// Berry-curvature integral over the full zone, in units of `2 pi`.
pub fn full_zone_chern(delta: f64, j: f64, a: f64, grid: usize) -> f64 {
    lower_band_plaquettes(delta, j, a, grid).iter().map(|p| p.flux).sum::<f64>() / (2.0 * PI)
}

/// Row of the band map written for the bands scenario.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BandSample {
    pub kx: f64,
    pub ky: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Lower-band Berry curvature (flux per plaquette area).
    pub berry_lower: f64,
}

/// Bands and lower-band curvature on the plaquette centres of a
/// `grid x grid` mesh, folded into the first Brillouin zone.
pub fn band_map(delta: f64, j: f64, a: f64, grid: usize) -> Vec<BandSample> {
    lower_band_plaquettes(delta, j, a, grid)
        .into_iter()
        .map(|p| {
            let k = fold_to_first_zone(p.center, a);
            let w = band_energy(k, delta, j, a);
            BandSample { kx: k.x, ky: k.y, omega_plus: w, omega_minus: -w, berry_lower: p.flux / p.area }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn f_at_special_points() {
        assert_abs_diff_eq!((f_k(Vec2::zeros(), 1.0) - C64::new(3.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        for v in Valley::BOTH {
            assert!(f_k(dirac_point(v, 1.0), 1.0).norm() < 1e-14);
        }
        let f = f_k(Vec2::new(PI, 0.0), 1.0);
        assert_abs_diff_eq!(f.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.im, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn band_energy_values() {
        let k = dirac_point(Valley::K, 1.0);
        assert_abs_diff_eq!(band_energy(k, 0.3, 1.0, 1.0), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(band_energy(Vec2::zeros(), 0.3, 1.0, 1.0), 9.09f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(9.09f64.sqrt(), 3.014_962_686, epsilon = 1e-9);
    }

    #[test]
    fn linear_dispersion_near_dirac_point() {
        let v = dirac_velocity(1.0, 1.0);
        for &qn in &[1e-2, 1e-3] {
            for ang in [0.0f64, 1.0, 2.5] {
                let q = Vec2::new(ang.cos(), ang.sin()) * qn;
                let w = band_energy(dirac_point(Valley::K, 1.0) + q, 0.0, 1.0, 1.0);
                let rel = (w - v * qn).abs() / (v * qn);
                assert!(rel < 2.0 * qn, "q = {qn}: rel {rel}");
            }
        }
    }

    #[test]
    fn angles() {
        let k = dirac_point(Valley::K, 1.0);
        let ang = bloch_angles(k, 0.3, 1.0, 1.0);
        assert_eq!(ang.theta, 0.0);
        assert!(ang.varphi.is_none());
        assert!(ang.phase(k).is_err());
        let ang = bloch_angles(Vec2::new(0.4, 0.1), 0.0, 1.0, 1.0);
        assert_abs_diff_eq!(ang.theta, 0.5 * PI, epsilon = 1e-15);
        let ang = bloch_angles(Vec2::zeros(), 0.3, 1.0, 1.0);
        assert_abs_diff_eq!(ang.theta, (0.3 / 9.09f64.sqrt()).acos(), epsilon = 1e-15);
        assert_abs_diff_eq!(ang.theta, 1.471_127_674, epsilon = 1e-9);
    }

    #[test]
    fn upper_eigenvector_from_angles() {
        for &(kx, ky, d) in &[(0.3, -0.2, 0.3), (1.9, 0.7, -0.4), (-2.2, 1.1, 0.0)] {
            let k = Vec2::new(kx, ky);
            let p = BlochPoint::new(k, d, 1.0, 1.0);
            let e = C64::from_polar(1.0, -p.varphi.unwrap());
            let vec = nalgebra::Vector2::new(C64::new((p.theta / 2.0).cos(), 0.0), e * (p.theta / 2.0).sin());
            let r = bloch_hamiltonian(k, d, 1.0, 1.0) * vec - vec * C64::new(p.omega, 0.0);
            assert!(r.norm() < 1e-12);
            assert_abs_diff_eq!(p.omega.powi(2), d * d + p.f.norm_sqr(), epsilon = 1e-12);
        }
    }

    #[test]
    fn dirac_hamiltonian() {
        let h = dirac_expansion(Valley::K, Vec2::zeros(), 0.3, 1.5);
        assert_eq!(h, Matrix2::new(C64::new(0.3, 0.0), C64::default(), C64::default(), C64::new(-0.3, 0.0)));
        let a = dirac_expansion(Valley::K, Vec2::new(0.2, 0.1), 0.3, 1.5);
        let b = dirac_expansion(Valley::KPrime, Vec2::new(-0.2, 0.1), 0.3, 1.5);
        assert_eq!(a, b);
        let h = dirac_expansion(Valley::K, Vec2::new(0.1, 0.0), 0.3, 1.5);
        let ev = h.symmetric_eigen().eigenvalues;
        let mut ev = [ev[0], ev[1]];
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(ev[1], 0.1125f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(ev[0], -0.335_410_196_6, epsilon = 1e-9);
    }

    #[test]
    fn analytic_curvature() {
        let c = berry_curvature_analytic(Valley::K, Vec2::zeros(), 0.3, 1.5).unwrap();
        assert_abs_diff_eq!(c, 12.5, epsilon = 1e-12);
        let q = Vec2::new(0.05, -0.02);
        let p = berry_curvature_analytic(Valley::K, q, 0.3, 1.5).unwrap();
        let m = berry_curvature_analytic(Valley::KPrime, q, 0.3, 1.5).unwrap();
        assert_eq!(p, -m);
        assert_eq!(berry_curvature_analytic(Valley::K, q, -0.3, 1.5).unwrap(), -p);
        assert!(matches!(berry_curvature_analytic(Valley::K, Vec2::zeros(), 0.0, 1.5), Err(Error::Singular)));
    }

    #[test]
    fn folding_and_valleys() {
        let (b1, b2) = reciprocal_vectors(1.0);
        let k = dirac_point(Valley::K, 1.0);
        assert!(valley_distance(k + b1 - b2 * 2.0, Valley::K, 1.0) < 1e-12);
        assert_eq!(nearest_valley(k + b2 + Vec2::new(0.01, 0.0), 1.0).0, Valley::K);
        assert_eq!(nearest_valley(-k + b1, 1.0).0, Valley::KPrime);
        let folded = fold_to_first_zone(Vec2::new(0.1, 0.2) + b1 * 3.0 - b2, 1.0);
        assert_abs_diff_eq!((folded - Vec2::new(0.1, 0.2)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn chern_rejects_gapless_and_coarse() {
        assert!(matches!(valley_chern_numeric(0.0, 1.0, 1.0, Valley::K, 48), Err(Error::Gapless(_))));
        assert!(valley_chern_numeric(0.3, 1.0, 1.0, Valley::K, 12).is_err());
    }

    #[test]
    fn valley_chern_signs_and_total() {
        let ck = valley_chern_numeric(0.3, 1.0, 1.0, Valley::K, 48).unwrap();
        let ckp = valley_chern_numeric(0.3, 1.0, 1.0, Valley::KPrime, 48).unwrap();
        let flipped = valley_chern_numeric(-0.3, 1.0, 1.0, Valley::K, 48).unwrap();
        assert!(ck > 0.3);
        assert_abs_diff_eq!(ck + ckp, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(flipped, -ck, epsilon = 1e-10);
        assert!(full_zone_chern(0.3, 1.0, 1.0, 48).abs() < 1e-10);
    }

    #[test]
    fn valley_chern_approaches_half_for_small_gap() {
        let c = valley_chern_numeric(0.05, 1.0, 1.0, Valley::K, 192).unwrap();
        assert!((c - 0.5).abs() < 0.03, "C_K = {c}");
    }
}
