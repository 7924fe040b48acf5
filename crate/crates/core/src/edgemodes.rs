//! Valley-polarized modes bound to a domain wall `D(x) = D0 tanh(x / lambda)`.
//!
//! Numerical side: the ribbon Hamiltonian `H(ky)` of a lattice that is
//! periodic along `e2` and finite along `x`. Analytic side: the zero-mode
//! envelope `cosh^{-beta}(x / lambda)` with `beta = lambda D0 / v`, its
//! normalizations, the edge local density of states and the golden-rule
//! decay rates of normal and giant atoms placed on the wall.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::bloch::{dirac_point, dirac_velocity, Valley};
use crate::emitter::{interference_factor, GiantAtomSpec};
use crate::lattice::{DetuningProfile, HoneycombSpec, SQRT3};
use crate::{Error, Result, Vec2, C64};

/// Bond vectors from an A site to its three B neighbours, with the column
/// offset of the neighbour cell.
fn bonds(a: f64) -> [(i64, Vec2); 3] {
    [
        (0, Vec2::new(a, 0.0)),
        (-1, Vec2::new(-0.5 * a, -0.5 * SQRT3 * a)),
        (-1, Vec2::new(-0.5 * a, 0.5 * SQRT3 * a)),
    ]
}

fn wall_params(spec: &HoneycombSpec) -> Result<(f64, f64)> {
    match spec.detuning {
        DetuningProfile::DomainWall { delta0, lambda, direction } => {
            if (direction[0] - 1.0).abs() > 1e-12 || direction[1].abs() > 1e-12 {
                return Err(Error::UnsupportedGeometry(format!(
                    "ribbons need a wall normal along x, got ({}, {})",
                    direction[0], direction[1]
                )));
            }
            Ok((delta0, lambda))
        }
        DetuningProfile::Uniform { delta } => Ok((delta, f64::INFINITY)),
    }
}

/// Ribbon Hamiltonian on the `2 n1` sites of one column strip, ordered like
/// the lattice (column `n`, A before B). Hoppings carry `exp(i ky dy)` for
/// the `y` displacement `dy` of each bond.
pub fn ribbon_hamiltonian(spec: &HoneycombSpec, ky: f64) -> Result<DMatrix<C64>> {
    spec.validate()?;
    wall_params(spec)?;
    let nx = spec.n1;
    let mut h = DMatrix::zeros(2 * nx, 2 * nx);
    for (c, n) in spec.n_range().enumerate() {
        let delta = spec.detuning.at(spec.cell_vector(n, 0));
        h[(2 * c, 2 * c)] = C64::new(delta, 0.0);
        h[(2 * c + 1, 2 * c + 1)] = C64::new(-delta, 0.0);
        for (dn, d) in bonds(spec.a) {
            let Some(cb) = (c as i64 + dn).try_into().ok().filter(|&cb: &usize| cb < nx) else {
                continue;
            };
            let t = C64::from_polar(spec.j, ky * d.y);
            h[(2 * c, 2 * cb + 1)] += t;
            h[(2 * cb + 1, 2 * c)] += t.conj();
        }
    }
    Ok(h)
}

/// Eigenpairs of the ribbon on the grid `ky = 2 pi nu / (sqrt(3) a Ny)`.
#[derive(Clone, Debug)]
pub struct RibbonSpectrum {
    pub ky: Vec<f64>,
    /// Ascending eigenvalues per `ky`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: Vec<DMatrix<C64>>,
    pub in_gap: Vec<Vec<bool>>,
    pub delta0: f64,
    /// Column positions `x_n = 3a n / 2`.
    pub x: Vec<f64>,
    pub a: f64,
}

/// Period of the ribbon spectrum in `ky`.
pub fn ky_period(a: f64) -> f64 {
    TAU / (SQRT3 * a)
}

/// Diagonalizes `H(ky)` for `nu = -Ny/2 .. Ny - Ny/2`.
pub fn ribbon_spectrum(spec: &HoneycombSpec) -> Result<RibbonSpectrum> {
    let (delta0, _) = wall_params(spec)?;
    let ny = spec.ny as i64;
    let ky: Vec<f64> = (-(ny / 2)..ny - ny / 2).map(|nu| ky_period(spec.a) * nu as f64 / ny as f64).collect();
    let solved: Vec<(Vec<f64>, DMatrix<C64>)> = ky
        .par_iter()
        .map(|&k| {
            let h = ribbon_hamiltonian(spec, k)?;
            let eig = h.symmetric_eigen();
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vecs = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
            Ok((vals, vecs))
        })
        .collect::<Result<_>>()?;
    let (eigenvalues, eigenvectors): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let in_gap = eigenvalues
        .iter()
        .map(|v: &Vec<f64>| v.iter().map(|w| w.abs() < delta0.abs()).collect())
        .collect();
    let x = spec.n_range().map(|n| spec.cell_vector(n, 0).x).collect();
    Ok(RibbonSpectrum { ky, eigenvalues, eigenvectors, in_gap, delta0, x, a: spec.a })
}

impl RibbonSpectrum {
    /// Number of `omega = 0` crossings around the `ky` loop, counted from
    /// changes of the number of negative eigenvalues.
    pub fn zero_crossings(&self) -> usize {
        let neg: Vec<i64> = self.eigenvalues.iter().map(|v| v.iter().filter(|&&w| w < 0.0).count() as i64).collect();
        (0..neg.len()).map(|i| (neg[(i + 1) % neg.len()] - neg[i]).unsigned_abs() as usize).sum()
    }

    /// Valley whose Dirac-point projection is nearest to `ky`, modulo the
    /// `ky` period, with the signed offset from it.
    pub fn valley_of(&self, ky: f64) -> (Valley, f64) {
        let offset = |v: Valley| {
            let p = ky_period(self.a);
            let d = ky - dirac_point(v, self.a).y;
            d - p * (d / p).round()
        };
        let (dk, dkp) = (offset(Valley::K), offset(Valley::KPrime));
        if dk.abs() <= dkp.abs() {
            (Valley::K, dk)
        } else {
            (Valley::KPrime, dkp)
        }
    }

    /// Transverse density `|A_n|^2 + |B_n|^2` per column of one eigenvector.
    pub fn column_density(&self, ky_index: usize, band: usize) -> Vec<f64> {
        let v = self.eigenvectors[ky_index].column(band);
        (0..self.x.len()).map(|c| v[2 * c].norm_sqr() + v[2 * c + 1].norm_sqr()).collect()
    }

    /// `(ky index, band)` of the eigenvalue closest to `omega` belonging to
    /// valley `valley`, or over both valleys when `None`.
    pub fn nearest_state(&self, omega: f64, valley: Option<Valley>) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, vals) in self.eigenvalues.iter().enumerate() {
            if valley.is_some_and(|v| self.valley_of(self.ky[i]).0 != v) {
                continue;
            }
            for (b, w) in vals.iter().enumerate() {
                let d = (w - omega).abs();
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, b, d));
                }
            }
        }
        best.map(|(i, b, _)| (i, b))
    }

    /// Fraction of a state's weight at `|x| <= width`.
    pub fn weight_within(&self, ky_index: usize, band: usize, width: f64) -> f64 {
        self.column_density(ky_index, band)
            .iter()
            .zip(&self.x)
            .filter(|(_, x)| x.abs() <= width)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Least-squares slope `d omega / d ky` of the in-gap branch of `valley`
/// over `|omega| <= 0.5 D0`.
pub fn edge_dispersion_fit(spectrum: &RibbonSpectrum, valley: Valley) -> Result<f64> {
    let window = 0.5 * spectrum.delta0.abs();
    let mut pts = Vec::new();
    for (i, &ky) in spectrum.ky.iter().enumerate() {
        let (v, q) = spectrum.valley_of(ky);
        if v != valley {
            continue;
        }
        for &w in &spectrum.eigenvalues[i] {
            if w.abs() <= window {
                pts.push((q, w));
            }
        }
    }
    if pts.len() < 2 {
        return Err(Error::Gapless(format!(
            "no in-gap branch for valley {valley:?} within |omega| <= {window}"
        )));
    }
    let n = pts.len() as f64;
    let qm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let wm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(q, w)| (q - qm) * (w - wm)).sum();
    let sxx: f64 = pts.iter().map(|(q, _)| (q - qm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Gapless(format!("in-gap states of valley {valley:?} sit at a single ky")));
    }
    Ok(sxy / sxx)
}

/// Length and energy scales of the wall-bound mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeParams {
    pub delta0: f64,
    pub lambda: f64,
    pub v: f64,
    /// `v / D0`.
    pub xi: f64,
    /// Profile exponent `lambda D0 / v`.
    pub beta: f64,
    /// Discrete normalization of `cosh^{-beta}` over the ribbon columns.
    pub amplitude: f64,
    pub nx: usize,
    pub a: f64,
}

impl EnvelopeParams {
    /// Parameters for `nx` columns at `x_n = 3a n / 2`, `n` centred as in
    /// [`HoneycombSpec`].
    pub fn new(delta0: f64, lambda: f64, j: f64, a: f64, nx: usize) -> Result<Self> {
        if !(delta0 > 0.0) || !(lambda > 0.0) || nx == 0 {
            return Err(Error::Config(format!(
                "envelope needs D0 > 0, lambda > 0 and columns, got {delta0}, {lambda}, {nx}"
            )));
        }
        let v = dirac_velocity(j, a);
        let beta = lambda * delta0 / v;
        let nmin = -((nx / 2) as i64);
        let sum: f64 = (nmin..nmin + nx as i64).map(|n| cosh_pow(1.5 * a * n as f64 / lambda, -2.0 * beta)).sum();
        Ok(Self { delta0, lambda, v, xi: v / delta0, beta, amplitude: sum.powf(-0.5), nx, a })
    }

    pub fn from_spec(spec: &HoneycombSpec) -> Result<Self> {
        match spec.detuning {
            DetuningProfile::DomainWall { delta0, lambda, .. } => Self::new(delta0, lambda, spec.j, spec.a, spec.n1),
            DetuningProfile::Uniform { .. } => {
                Err(Error::Config("edge-mode envelope needs a domain-wall detuning".into()))
            }
        }
    }

    /// Exponent of the normalization integral of `|psi|^2`, `2 beta`.
    pub fn beta_norm(&self) -> f64 {
        2.0 * self.beta
    }

    /// Column positions `x_n`.
    pub fn columns(&self) -> Vec<f64> {
        let nmin = -((self.nx / 2) as i64);
        (nmin..nmin + self.nx as i64).map(|n| 1.5 * self.a * n as f64).collect()
    }

    /// Dimensionless profile `A cosh^{-beta}(x / lambda)`, unit norm over the
    /// columns.
    pub fn discrete(&self, x: f64) -> f64 {
        self.amplitude * cosh_pow(x / self.lambda, -self.beta)
    }

    /// Continuum profile normalized as `int |psi|^2 dx = 1`.
    pub fn continuum(&self, x: f64) -> f64 {
        self.continuum_norm() * cosh_pow(x / self.lambda, -self.beta)
    }

    /// `[Gamma(beta + 1/2) / (lambda sqrt(pi) Gamma(beta))]^{1/2}`.
    pub fn continuum_norm(&self) -> f64 {
        (gamma(self.beta + 0.5) / (self.lambda * PI.sqrt() * gamma(self.beta))).sqrt()
    }
}

/// `cosh(u)^p`, evaluated in log form so large `|u|` does not overflow.
fn cosh_pow(u: f64, p: f64) -> f64 {
    let u = u.abs();
    // ln cosh u = u + ln(1 + e^{-2u}) - ln 2
    (p * (u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2)).exp()
}

/// Zero mode integrated from the first-order system.
#[derive(Clone, Debug)]
pub struct ZeroModeProfile {
    pub x: Vec<f64>,
    pub psi_a: Vec<C64>,
    pub psi_b: Vec<C64>,
}

/// Integrates `psi_a' = i tau D psi_b / v`, `psi_b' = -i tau D psi_a / v`
/// outward from `psi_a(0) = 1`, `psi_b(0) = i tau` with RK4 on a grid of
/// spacing `step` over `|x| <= x_max`, then normalizes `int |psi_a|^2 = 1`.
///
/// The normalization integral runs over a window wide enough that the
/// discarded tail is below `1e-14`. Step-doubling guards the accuracy: if
/// halving the step moves any sample by more than `1e-4` relative to the
/// peak the call fails.
pub fn zero_mode_ode_oracle<F>(delta: F, v: f64, tau: i32, x_max: f64, step: f64) -> Result<ZeroModeProfile>
where
    F: Fn(f64) -> f64,
{
    if !(step > 0.0) || !(x_max > 0.0) || !(v > 0.0) {
        return Err(Error::Config(format!("need positive step, x_max and v, got {step}, {x_max}, {v}")));
    }
    let tau = tau.signum() as f64;
    let coarse = integrate_half(&delta, v, tau, x_max, step, 1.0);
    let fine = integrate_half(&delta, v, tau, x_max, 0.5 * step, 1.0);
    let peak = coarse.iter().map(|s| s[0].norm()).fold(0.0, f64::max);
    let drift = coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .map(|(c, f)| (c[0] - f[0]).norm() / peak)
        .fold(0.0, f64::max);
    if drift > 1e-4 {
        return Err(Error::Accuracy(format!("step {step} gives relative step-doubling drift {drift:.2e}")));
    }

    // The tail beyond x_max decays at least as fast as exp(-D_min x / v),
    // where D_min is the detuning at the window edge.
    let d_edge = delta(x_max).abs().min(delta(-x_max).abs()).max(1e-12);
    let reach = x_max + (v / d_edge) * 16.0 * std::f64::consts::LN_10;
    let mass = |dir: f64| {
        let wide = integrate_half(&delta, v, tau, reach, 0.5 * step, dir);
        simpson(&wide.iter().map(|s| s[0].norm_sqr()).collect::<Vec<_>>(), 0.5 * step)
    };
    let scale = (mass(1.0) + mass(-1.0)).sqrt();

    let left = integrate_half(&delta, v, tau, x_max, step, -1.0);
    let mut out = ZeroModeProfile { x: Vec::new(), psi_a: Vec::new(), psi_b: Vec::new() };
    let samples = left.iter().enumerate().skip(1).rev().map(|(i, s)| (-(i as f64), s));
    for (i, s) in samples.chain(coarse.iter().enumerate().map(|(i, s)| (i as f64, s))) {
        out.x.push(i * step);
        out.psi_a.push(s[0] / scale);
        out.psi_b.push(s[1] / scale);
    }
    Ok(out)
}

/// RK4 from `x = 0` to `dir * x_max` on `x_i = dir * i h`; returns
/// `[psi_a, psi_b]`.
fn integrate_half<F>(delta: &F, v: f64, tau: f64, x_max: f64, h: f64, dir: f64) -> Vec<[C64; 2]>
where
    F: Fn(f64) -> f64,
{
    let i_tau = C64::new(0.0, tau);
    let rhs = |x: f64, s: [C64; 2]| -> [C64; 2] {
        let d = delta(x) / v;
        [i_tau * s[1] * d, -i_tau * s[0] * d]
    };
    let steps = (x_max / h).round() as usize;
    let h = dir * h;
    let mut s = [C64::new(1.0, 0.0), i_tau];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s);
    for i in 0..steps {
        let x = i as f64 * h;
        let add = |s: [C64; 2], k: [C64; 2], f: f64| [s[0] + k[0] * f, s[1] + k[1] * f];
        let k1 = rhs(x, s);
        let k2 = rhs(x + 0.5 * h, add(s, k1, 0.5 * h));
        let k3 = rhs(x + 0.5 * h, add(s, k2, 0.5 * h));
        let k4 = rhs(x + h, add(s, k3, h));
        s = [
            s[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0),
            s[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0),
        ];
        out.push(s);
    }
    out
}

/// Composite Simpson rule on equally spaced samples (trapezoid on a
/// trailing odd interval).
fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let even = if (n - 1).is_multiple_of(2) { n } else { n - 1 };
    let mut s = y[0] + y[even - 1];
    for (i, v) in y.iter().enumerate().take(even - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * h / 3.0;
    if even < n {
        total += 0.5 * h * (y[n - 2] + y[n - 1]);
    }
    total
}

/// `int_0^inf cosh^{-b}(s) ds` by quadrature. With `u = e^{-s}` and
/// `u = t^2` the integrand becomes `2^{b+1} t^{2b-1} (1 + t^4)^{-b}` on
/// `[0, 1]`, which is smooth for `b >= 1/2`.
pub fn cosh_power_integral_numeric(b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = 1.0 / n as f64;
    let f = |t: f64| -> f64 {
        if t == 0.0 {
            return if b == 0.5 { 2f64.powf(b + 1.0) } else { 0.0 };
        }
        2f64.powf(b + 1.0) * t.powf(2.0 * b - 1.0) * (1.0 + t.powi(4)).powf(-b)
    };
    let y: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
    simpson(&y, h)
}

/// `(sqrt(pi)/2) Gamma(b/2) / Gamma((b+1)/2)`.
pub fn cosh_power_integral_analytic(b: f64) -> f64 {
    0.5 * PI.sqrt() * gamma(0.5 * b) / gamma(0.5 * (b + 1.0))
}

/// Edge LDOS per lattice site `sqrt(3) a / (4 pi v) |psi_d(x)|^2`, the same
/// for both valleys and all in-gap frequencies.
pub fn local_dos_edge(x: f64, params: &EnvelopeParams) -> f64 {
    SQRT3 * params.a / (4.0 * PI * params.v) * params.discrete(x).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalRates {
    pub per_valley: f64,
    pub total: f64,
}

/// Golden-rule rate of a single-point atom at `x_r`:
/// `Gamma_tau = g^2 / (sqrt(3) J) |psi_d(x_r)|^2` per valley.
pub fn decay_rate_normal(x_r: f64, omega0: f64, g: f64, j: f64, params: &EnvelopeParams) -> Result<NormalRates> {
    if omega0.abs() >= params.delta0 {
        return Err(Error::FormulaDomain(format!(
            "omega0 = {omega0} lies outside the gap |omega| < {}",
            params.delta0
        )));
    }
    let per_valley = g * g / (SQRT3 * j) * params.discrete(x_r).powi(2);
    Ok(NormalRates { per_valley, total: 2.0 * per_valley })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GiantRates {
    /// Rate into valley K.
    pub plus: f64,
    /// Rate into valley K'.
    pub minus: f64,
    /// Set when the coupling points spread over more than `xi / 2` across the wall.
    pub footprint_warning: bool,
}

impl GiantRates {
    pub fn get(&self, valley: Valley) -> f64 {
        match valley {
            Valley::K => self.plus,
            Valley::KPrime => self.minus,
        }
    }

    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }
}

/// Giant-atom rates `(1/N_p) |sum_l e^{i(tau K.R_l - phi_l)}|^2 Gamma_tau(R_1)`.
pub fn decay_rate_giant(atom: &GiantAtomSpec, j: f64, params: &EnvelopeParams) -> Result<GiantRates> {
    let a = params.a;
    let x1 = atom.points()[0].position(a).x;
    let normal = decay_rate_normal(x1, atom.omega0, atom.g, j, params)?;
    let spread = atom.points().iter().map(|p| (p.position(a).x - x1).abs()).fold(0.0, f64::max);
    Ok(GiantRates {
        plus: interference_factor(atom, Valley::K, a) * normal.per_valley,
        minus: interference_factor(atom, Valley::KPrime, a) * normal.per_valley,
        footprint_warning: spread > 0.5 * params.xi,
    })
}

/// `(sum_n sqrt(p_n) psi_d(x_n))^2` between a ribbon column density `p_n`
/// and the discrete envelope. The relative phase of the two sublattices is
/// gauge dependent, so amplitudes are compared per column.
pub fn profile_overlap(column_density: &[f64], params: &EnvelopeParams) -> f64 {
    let cols = params.columns();
    let s: f64 = column_density.iter().zip(&cols).map(|(p, &x)| p.sqrt() * params.discrete(x)).sum();
    s * s
}

/// Rows `(x, psi_numeric, psi_analytic)` for a ribbon state, both as
/// per-column amplitudes.
pub fn profile_table(column_density: &[f64], params: &EnvelopeParams) -> Vec<(f64, f64, f64)> {
    params.columns().into_iter().zip(column_density).map(|(x, p)| (x, p.sqrt(), params.discrete(x))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wall(nx: usize, ny: usize, delta0: f64, lambda: f64) -> HoneycombSpec {
        HoneycombSpec::new(nx, ny, DetuningProfile::wall_along_y(delta0, lambda))
    }

    #[test]
    fn ribbon_is_hermitian_and_rejects_tilted_walls() {
        let spec = wall(12, 10, 0.2, 4.0);
        let h = ribbon_hamiltonian(&spec, 0.37).unwrap();
        assert!((h.adjoint() - &h).norm() < 1e-15);
        let mut bad = spec.clone();
        bad.detuning = DetuningProfile::DomainWall { delta0: 0.2, lambda: 4.0, direction: [0.0, 1.0] };
        assert!(matches!(ribbon_hamiltonian(&bad, 0.0), Err(Error::UnsupportedGeometry(_))));
    }

    #[test]
    fn gapless_ribbon_is_chiral_symmetric() {
        let spec = wall(10, 8, 0.0, 4.0);
        let sp = ribbon_spectrum(&spec).unwrap();
        for vals in &sp.eigenvalues {
            let n = vals.len();
            for i in 0..n {
                assert_abs_diff_eq!(vals[i], -vals[n - 1 - i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_residuals_are_small() {
        let spec = wall(20, 12, 0.2, 4.0);
        let sp = ribbon_spectrum(&spec).unwrap();
        for (i, &ky) in sp.ky.iter().enumerate() {
            let h = ribbon_hamiltonian(&spec, ky).unwrap();
            for (b, &w) in sp.eigenvalues[i].iter().enumerate() {
                let v = sp.eigenvectors[i].column(b);
                assert!((&h * v - v * C64::new(w, 0.0)).norm() < 1e-10);
            }
            assert!(sp.eigenvalues[i].windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn uniform_ribbon_matches_bloch_bands() {
        let spec = HoneycombSpec::new(24, 6, DetuningProfile::uniform(0.3));
        let sp = ribbon_spectrum(&spec).unwrap();
        let w = sp.eigenvalues[0][0];
        assert!(w < -0.3 && w >= -(0.09f64 + 9.0).sqrt() - 1e-12);
    }

    #[test]
    fn valley_projection_assignment() {
        let spec = wall(10, 60, 0.2, 4.0);
        let sp = ribbon_spectrum(&spec).unwrap();
        let (v, q) = sp.valley_of(dirac_point(Valley::K, 1.0).y + 0.01);
        assert_eq!(v, Valley::K);
        assert_abs_diff_eq!(q, 0.01, epsilon = 1e-12);
        let shifted = dirac_point(Valley::KPrime, 1.0).y - ky_period(1.0) - 0.02;
        let (v, q) = sp.valley_of(shifted);
        assert_eq!(v, Valley::KPrime);
        assert_abs_diff_eq!(q, -0.02, epsilon = 1e-12);
    }

    #[test]
    fn envelope_scales_and_normalization() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        assert_abs_diff_eq!(p.xi, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.beta, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p.beta_norm(), 2.0 * p.beta);
        let s: f64 = p.columns().iter().map(|&x| p.discrete(x).powi(2)).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        // Gamma(7/6) / (2 sqrt(pi) Gamma(2/3)) from tabulated Gamma values
        let expect = 0.927_719_333_630_039_2 / (2.0 * PI.sqrt() * 1.354_117_939_426_400_5);
        assert_abs_diff_eq!(p.continuum(0.0).powi(2), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(p.continuum(0.0).powi(2), 0.1933, epsilon = 1e-4);
        assert!(p.discrete(0.0) > p.discrete(0.75) && p.discrete(0.0) > p.discrete(-0.75));
    }

    #[test]
    fn envelope_tail_follows_xi() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        let x = 10.0 * p.xi;
        let ratio = p.continuum(x) / p.continuum(0.0);
        let asym = 2f64.powf(p.beta) * (-x / p.xi).exp();
        assert!((ratio / asym - 1.0).abs() < 0.05);
    }

    #[test]
    fn cosh_pow_survives_large_arguments() {
        assert_abs_diff_eq!(cosh_pow(2.0, -1.5), 2f64.cosh().powf(-1.5), epsilon = 1e-15);
        assert!(cosh_pow(1e4, -2.0) == 0.0);
        assert!(cosh_pow(800.0, 0.5).is_finite());
    }

    #[test]
    fn ode_oracle_matches_closed_form() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        let d = |x: f64| 0.5 * (x / 2.0).tanh();
        for tau in [1, -1] {
            let prof = zero_mode_ode_oracle(d, p.v, tau, 10.0 * p.lambda, 0.01).unwrap();
            let mut worst: f64 = 0.0;
            for ((x, a), b) in prof.x.iter().zip(&prof.psi_a).zip(&prof.psi_b) {
                worst = worst.max((a.norm() - p.continuum(*x)).abs());
                assert!((b - C64::new(0.0, tau as f64) * a).norm() < 1e-12);
            }
            assert!(worst < 1e-6, "max deviation {worst}");
        }
    }

    #[test]
    fn ode_oracle_flags_coarse_steps() {
        let d = |x: f64| 5.0 * (x / 0.2).tanh();
        assert!(matches!(zero_mode_ode_oracle(d, 1.5, 1, 4.0, 0.5), Err(Error::Accuracy(_))));
    }

    #[test]
    fn normalization_integral_identity() {
        for b in [0.5, 1.0, 2.0, 4.0] {
            let num = cosh_power_integral_numeric(b, 20_000);
            let ana = cosh_power_integral_analytic(b);
            assert_abs_diff_eq!(num, ana, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(cosh_power_integral_analytic(2.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cosh_power_integral_numeric(2.0, 20_000), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ldos_is_complete_over_both_sublattices() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        let s: f64 = p.columns().iter().map(|&x| 2.0 * local_dos_edge(x, &p)).sum();
        assert_abs_diff_eq!(s * 2.0 * PI * p.v / (SQRT3 * p.a), 1.0, epsilon = 1e-12);
        let cont: f64 = p.columns().iter().map(|&x| 1.5 * p.continuum(x).powi(2)).sum();
        assert!((cont - 1.0).abs() < 0.02);
    }

    #[test]
    fn normal_rate_at_wall_centre() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        let r = decay_rate_normal(0.0, 0.0, 0.3, 1.0, &p).unwrap();
        assert!((r.per_valley - 0.015).abs() < 0.0015);
        assert_abs_diff_eq!(r.total, 2.0 * r.per_valley, epsilon = 1e-18);
        let r2 = decay_rate_normal(0.0, 0.0, 0.6, 1.0, &p).unwrap();
        assert_abs_diff_eq!(r2.total, 4.0 * r.total, epsilon = 1e-15);
        let far = decay_rate_normal(10.0 * p.xi, 0.0, 0.3, 1.0, &p).unwrap();
        assert!((far.total / r.total / (-20.0f64).exp() / 2f64.powf(2.0 * p.beta) - 1.0).abs() < 0.05);
        assert!(matches!(decay_rate_normal(0.0, 0.6, 0.3, 1.0, &p), Err(Error::FormulaDomain(_))));
    }

    #[test]
    fn giant_rates_follow_interference() {
        let p = EnvelopeParams::new(0.5, 2.0, 1.0, 1.0, 301).unwrap();
        let phase = crate::emitter::solve_phase_two_points(0, 1, Valley::K).unwrap();
        let atom = GiantAtomSpec::two_point(0.0, 0.3, (0, 1), phase);
        let g = decay_rate_giant(&atom, 1.0, &p).unwrap();
        let n = decay_rate_normal(0.0, 0.0, 0.3, 1.0, &p).unwrap();
        assert!(g.minus.abs() < 1e-28);
        assert_abs_diff_eq!(g.plus, 1.5 * n.per_valley, epsilon = 1e-15);
        assert!(!g.footprint_warning);
        let single = decay_rate_giant(&GiantAtomSpec::normal(0.0, 0.3), 1.0, &p).unwrap();
        assert_abs_diff_eq!(single.plus, n.per_valley, epsilon = 1e-15);
        let wide = GiantAtomSpec::two_point(0.0, 0.3, (4, 0), 0.0);
        assert!(decay_rate_giant(&wide, 1.0, &p).unwrap().footprint_warning);
    }
}
