//! Chebyshev expansion of the time-evolution operator.
//!
//! With the spectrum of `H` enclosed in `[c - r, c + r]` and `X = (H - c)/r`,
//!
//! ```text
//! exp(-i H t) = exp(-i c t) sum_k (2 - delta_k0) (-i)^k J_k(r t) T_k(X)
//! ```
//!
//! The Bessel coefficients decay super-exponentially once `k > r t`, so the
//! series is truncated at the first order past `r t` where two consecutive
//! coefficients drop below the tolerance.

use crate::sparse::SparseHermitian;
use crate::{Error, Result, C64};

/// Bessel functions `J_0(x) ..= J_nmax(x)` by Miller's downward recurrence,
/// normalized with `J_0 + 2 sum_k J_2k = 1`.
pub fn bessel_j_sequence(x: f64, nmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = {
        let base = nmax.max(ax as usize);
        let m = base + 20 + (40.0 * base as f64).sqrt() as usize;
        m + (m % 2)
    };
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = j_cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * j_cur;
        }
        let j_prev = 2.0 * k as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    out[0] = j_cur;
    norm += j_cur;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        // J_k(-x) = (-1)^k J_k(x)
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Work buffers reused across steps.
#[derive(Clone, Debug, Default)]
pub struct ChebyshevWorkspace {
    prev: Vec<C64>,
    cur: Vec<C64>,
    acc: Vec<C64>,
}

/// Diagnostics of one propagation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub terms: usize,
    /// Magnitude of the first discarded coefficient.
    pub tail: f64,
}

/// Applies `exp(-i H dt)` to state vectors.
#[derive(Clone, Debug)]
pub struct ChebyshevPropagator<'a> {
    h: &'a SparseHermitian,
    center: f64,
    half_width: f64,
    tol: f64,
    max_terms: usize,
}

impl<'a> ChebyshevPropagator<'a> {
    pub const DEFAULT_TOL: f64 = 1e-10;

    /// Spectral enclosure from Gershgorin discs, padded by 1%.
    pub fn new(h: &'a SparseHermitian) -> Self {
        let (lo, hi) = h.gershgorin_bounds();
        let center = 0.5 * (lo + hi);
        let half_width = (0.5 * (hi - lo) * 1.01).max(1e-12);
        Self { h, center, half_width, tol: Self::DEFAULT_TOL, max_terms: 100_000 }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    /// `(center, half_width)` of the spectral enclosure.
    pub fn spectral_window(&self) -> (f64, f64) {
        (self.center, self.half_width)
    }

    /// Series coefficients `J_k(r dt)` for one step, truncated.
    fn coefficients(&self, dt: f64) -> Result<(Vec<f64>, f64)> {
        let x = self.half_width * dt;
        let mut nmax = (x.abs() * 1.5) as usize + 40;
        loop {
            let j = bessel_j_sequence(x, nmax);
            let cutoff = (1..nmax).find(|&k| {
                k as f64 > x.abs() && 2.0 * j[k].abs() < self.tol && 2.0 * j[k + 1].abs() < self.tol
            });
            if let Some(k) = cutoff {
                if k > self.max_terms {
                    break;
                }
                let tail = 2.0 * j[k].abs();
                return Ok((j[..k].to_vec(), tail));
            }
            if nmax > self.max_terms {
                break;
            }
            nmax *= 2;
        }
        Err(Error::Numerical(format!(
            "Chebyshev series for r dt = {x:.3e} needs more than {} terms (tol {:.1e}, window c = {:.4}, r = {:.4})",
            self.max_terms, self.tol, self.center, self.half_width
        )))
    }

    /// Replaces `psi` by `exp(-i H dt) psi`.
    pub fn step(&self, psi: &mut [C64], dt: f64, ws: &mut ChebyshevWorkspace) -> Result<StepStats> {
        let n = self.h.dim();
        assert_eq!(psi.len(), n);
        if dt == 0.0 {
            return Ok(StepStats { terms: 0, tail: 0.0 });
        }
        let (bessel, tail) = self.coefficients(dt)?;
        let coeff = |k: usize| -> C64 {
            let w = if k == 0 { 1.0 } else { 2.0 } * bessel[k];
            // (-i)^k
            match k % 4 {
                0 => C64::new(w, 0.0),
                1 => C64::new(0.0, -w),
                2 => C64::new(-w, 0.0),
                _ => C64::new(0.0, w),
            }
        };
        ws.prev.clear();
        ws.prev.extend_from_slice(psi);
        ws.cur.resize(n, C64::default());
        ws.acc.clear();
        ws.acc.extend(psi.iter().map(|&p| coeff(0) * p));

        if bessel.len() > 1 {
            // T_1(X) psi
            self.h.apply(psi, &mut ws.cur);
            let c1 = coeff(1);
            for ((c, p), s) in ws.cur.iter_mut().zip(psi.iter()).zip(ws.acc.iter_mut()) {
                *c = (*c - *p * self.center) / self.half_width;
                *s += c1 * *c;
            }
            for k in 2..bessel.len() {
                self.h.chebyshev_step(&ws.cur, &mut ws.prev, &mut ws.acc, coeff(k), self.center, self.half_width);
                std::mem::swap(&mut ws.prev, &mut ws.cur);
            }
        }
        let phase = C64::from_polar(1.0, -self.center * dt);
        for (p, s) in psi.iter_mut().zip(ws.acc.iter()) {
            *p = phase * *s;
        }
        Ok(StepStats { terms: bessel.len(), tail })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::HermitianBuilder;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 5);
        assert_abs_diff_eq!(j[0], 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_abs_diff_eq!(j[1], 0.440_050_585_744_933_5, epsilon = 1e-15);
        let j = bessel_j_sequence(10.0, 12);
        assert_abs_diff_eq!(j[0], -0.245_935_764_451_348_3, epsilon = 1e-14);
        assert_abs_diff_eq!(j[5], -0.234_061_528_186_793_6, epsilon = 1e-14);
        assert_abs_diff_eq!(j[12], 0.063_370_254_970_156_01, epsilon = 1e-14);
        let j = bessel_j_sequence(-2.0, 3);
        assert_abs_diff_eq!(j[1], -0.576_724_807_756_873_4, epsilon = 1e-15);
        let j = bessel_j_sequence(0.0, 3);
        assert_eq!(j, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bessel_large_argument_sum_rule() {
        let j = bessel_j_sequence(150.0, 400);
        let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_level_rabi_oscillation() {
        let mut b = HermitianBuilder::new(2);
        b.add_hop(0, 1, C64::new(0.5, 0.0));
        let h = b.build();
        let prop = ChebyshevPropagator::new(&h);
        let mut ws = ChebyshevWorkspace::default();
        let mut psi = vec![C64::new(1.0, 0.0), C64::default()];
        let t = 2.3;
        prop.step(&mut psi, t, &mut ws).unwrap();
        assert_abs_diff_eq!(psi[0].re, (0.5 * t).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(psi[1].im, -(0.5 * t).sin(), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_phase_and_offset_spectrum() {
        let mut b = HermitianBuilder::new(2);
        b.add_diagonal(0, 5.0);
        b.add_diagonal(1, 5.5);
        let h = b.build();
        let prop = ChebyshevPropagator::new(&h).with_tolerance(1e-15);
        let mut ws = ChebyshevWorkspace::default();
        let mut psi = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        prop.step(&mut psi, 3.0, &mut ws).unwrap();
        let e0 = C64::from_polar(0.6, -15.0);
        let e1 = C64::new(0.0, 0.8) * C64::from_polar(1.0, -16.5);
        assert!((psi[0] - e0).norm() < 1e-12);
        assert!((psi[1] - e1).norm() < 1e-12);
    }

    #[test]
    fn term_budget_is_reported() {
        let mut b = HermitianBuilder::new(2);
        b.add_hop(0, 1, C64::new(1.0, 0.0));
        let h = b.build();
        let prop = ChebyshevPropagator::new(&h).with_max_terms(10);
        let mut psi = vec![C64::new(1.0, 0.0), C64::default()];
        let err = prop.step(&mut psi, 50.0, &mut ChebyshevWorkspace::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
