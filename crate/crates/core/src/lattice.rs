//! Honeycomb geometry and the real-space photonic Hamiltonian.
//!
//! Unit cells sit at `R = n e1 + m e2` with `e1 = (3a/2, sqrt(3)a/2)` and
//! `e2 = (0, sqrt(3)a)`. The A resonator of a cell sits at `R`, the B
//! resonator at `R + (a, 0)`, so the three A->B bonds point along
//! `(a, 0)` and `(-a/2, +-sqrt(3)a/2)`.

use serde::{Deserialize, Serialize};

use crate::sparse::{HermitianBuilder, SparseHermitian};
use crate::{Error, Result, Vec2, C64};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Primitive vectors `(e1, e2)`.
pub fn primitive_vectors(a: f64) -> (Vec2, Vec2) {
    (Vec2::new(1.5 * a, 0.5 * SQRT3 * a), Vec2::new(0.0, SQRT3 * a))
}

/// Reciprocal vectors `(b1, b2)` with `bi . ej = 2 pi delta_ij`.
pub fn reciprocal_vectors(a: f64) -> (Vec2, Vec2) {
    use std::f64::consts::PI;
    (
        Vec2::new(4.0 * PI / (3.0 * a), 0.0),
        Vec2::new(-2.0 * PI / (3.0 * a), 2.0 * PI / (SQRT3 * a)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Sublattice detuning as a function of the cell vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetuningProfile {
    Uniform { delta: f64 },
    /// `delta0 * tanh((R . direction) / lambda)`.
    DomainWall { delta0: f64, lambda: f64, direction: [f64; 2] },
}

impl DetuningProfile {
    pub fn uniform(delta: f64) -> Self {
        Self::Uniform { delta }
    }

    /// Wall along y: the detuning changes sign across `x = 0`.
    pub fn wall_along_y(delta0: f64, lambda: f64) -> Self {
        Self::DomainWall { delta0, lambda, direction: [1.0, 0.0] }
    }

    pub fn at(&self, r: Vec2) -> f64 {
        match *self {
            Self::Uniform { delta } => delta,
            Self::DomainWall { delta0, lambda, direction } => {
                delta0 * ((r.x * direction[0] + r.y * direction[1]) / lambda).tanh()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { delta } if !delta.is_finite() => {
                Err(Error::InvalidSpec(format!("detuning {delta} is not finite")))
            }
            Self::DomainWall { lambda, .. } if !(lambda > 0.0) => {
                Err(Error::InvalidSpec(format!("wall width lambda = {lambda} must be > 0")))
            }
            Self::DomainWall { direction, .. }
                if ((direction[0].powi(2) + direction[1].powi(2)).sqrt() - 1.0).abs() > 1e-12 =>
            {
                Err(Error::InvalidSpec(format!("wall direction {direction:?} is not a unit vector")))
            }
            _ => Ok(()),
        }
    }
}

/// Label of one resonator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub n: i64,
    pub m: i64,
    pub sublattice: Sublattice,
}

impl SiteIndex {
    pub fn a(n: i64, m: i64) -> Self {
        Self { n, m, sublattice: Sublattice::A }
    }

    pub fn b(n: i64, m: i64) -> Self {
        Self { n, m, sublattice: Sublattice::B }
    }
}

/// Finite honeycomb lattice of `n1 x ny` unit cells.
///
/// Cell indices run over `n in [-n1/2, n1 - n1/2)` and likewise for `m`
/// (integer halves), so even sizes give `-N/2 ..= N/2 - 1` and odd sizes are
/// centred on the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoneycombSpec {
    pub n1: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub j: f64,
    pub detuning: DetuningProfile,
    /// Boundary along `e1` and along `e2`.
    pub boundary: [Boundary; 2],
}

fn one() -> f64 {
    1.0
}

impl HoneycombSpec {
    /// Periodic lattice with `a = J = 1`.
    pub fn new(n1: usize, ny: usize, detuning: DetuningProfile) -> Self {
        Self { n1, ny, a: 1.0, j: 1.0, detuning, boundary: [Boundary::Periodic; 2] }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = [boundary; 2];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.ny < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2x2 cells, got {}x{}",
                self.n1, self.ny
            )));
        }
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidSpec(format!("lattice constant a = {} must be > 0", self.a)));
        }
        if !self.j.is_finite() {
            return Err(Error::InvalidSpec(format!("hopping J = {} is not finite", self.j)));
        }
        self.detuning.validate()
    }

    pub fn num_cells(&self) -> usize {
        self.n1 * self.ny
    }

    /// Number of resonators, `2 N`.
    pub fn num_sites(&self) -> usize {
        2 * self.num_cells()
    }

    pub fn n_min(&self) -> i64 {
        -((self.n1 / 2) as i64)
    }

    pub fn m_min(&self) -> i64 {
        -((self.ny / 2) as i64)
    }

    pub fn n_range(&self) -> std::ops::Range<i64> {
        self.n_min()..self.n_min() + self.n1 as i64
    }

    pub fn m_range(&self) -> std::ops::Range<i64> {
        self.m_min()..self.m_min() + self.ny as i64
    }

    pub fn contains_cell(&self, n: i64, m: i64) -> bool {
        self.n_range().contains(&n) && self.m_range().contains(&m)
    }

    /// Cells in flattening order.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let mr = self.m_range();
        self.n_range().flat_map(move |n| mr.clone().map(move |m| (n, m)))
    }

    pub fn cell_vector(&self, n: i64, m: i64) -> Vec2 {
        let (e1, e2) = primitive_vectors(self.a);
        e1 * n as f64 + e2 * m as f64
    }

    /// Linear index of a site: cells in `(n, m)` row-major order, A before B.
    pub fn index_of(&self, s: SiteIndex) -> Result<usize> {
        if !self.contains_cell(s.n, s.m) {
            return Err(Error::Index(format!(
                "cell ({}, {}) outside n in {:?}, m in {:?}",
                s.n,
                s.m,
                self.n_range(),
                self.m_range()
            )));
        }
        let cell = (s.n - self.n_min()) as usize * self.ny + (s.m - self.m_min()) as usize;
        Ok(2 * cell + (s.sublattice == Sublattice::B) as usize)
    }

    pub fn site_of(&self, index: usize) -> Result<SiteIndex> {
        if index >= self.num_sites() {
            return Err(Error::Index(format!("linear index {index} >= {}", self.num_sites())));
        }
        let cell = index / 2;
        let n = (cell / self.ny) as i64 + self.n_min();
        let m = (cell % self.ny) as i64 + self.m_min();
        let sublattice = if index.is_multiple_of(2) { Sublattice::A } else { Sublattice::B };
        Ok(SiteIndex { n, m, sublattice })
    }

    pub fn site_position(&self, s: SiteIndex) -> Result<Vec2> {
        self.index_of(s)?;
        Ok(self.position_unchecked(s))
    }

    fn position_unchecked(&self, s: SiteIndex) -> Vec2 {
        let r = self.cell_vector(s.n, s.m);
        match s.sublattice {
            Sublattice::A => r,
            Sublattice::B => r + Vec2::new(self.a, 0.0),
        }
    }

    /// Positions of all sites in linear-index order.
    pub fn positions(&self) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.num_sites());
        for (n, m) in self.cells() {
            out.push(self.position_unchecked(SiteIndex::a(n, m)));
            out.push(self.position_unchecked(SiteIndex::b(n, m)));
        }
        out
    }

    /// Maps a cell shifted off the lattice back onto it according to the
    /// boundary conditions, or `None` if it falls off an open edge.
    pub fn resolve_cell(&self, n: i64, m: i64) -> Option<(i64, i64)> {
        let wrap = |v: i64, min: i64, len: usize, b: Boundary| -> Option<i64> {
            let len = len as i64;
            if (min..min + len).contains(&v) {
                Some(v)
            } else if b == Boundary::Periodic {
                Some((v - min).rem_euclid(len) + min)
            } else {
                None
            }
        };
        Some((
            wrap(n, self.n_min(), self.n1, self.boundary[0])?,
            wrap(m, self.m_min(), self.ny, self.boundary[1])?,
        ))
    }

    /// B neighbours of the A site in cell `(n, m)`: cells `R`, `R - e1`,
    /// `R - e1 + e2`.
    pub fn a_neighbours(&self, n: i64, m: i64) -> impl Iterator<Item = SiteIndex> + '_ {
        [(0, 0), (-1, 0), (-1, 1)]
            .into_iter()
            .filter_map(move |(dn, dm)| self.resolve_cell(n + dn, m + dm))
            .map(|(n, m)| SiteIndex::b(n, m))
    }
}

/// Real-space Hamiltonian of the bare lattice in the single-photon sector.
///
/// Diagonal: `+Delta(R)` on A sites, `-Delta(R)` on B sites, with the
/// detuning evaluated at the cell vector. Off-diagonal: `J` on every
/// nearest-neighbour bond.
pub fn build_lattice_hamiltonian(spec: &HoneycombSpec) -> Result<SparseHermitian> {
    spec.validate()?;
    let mut b = HermitianBuilder::new(spec.num_sites());
    let hop = C64::new(spec.j, 0.0);
    for (n, m) in spec.cells() {
        let delta = spec.detuning.at(spec.cell_vector(n, m));
        let ia = spec.index_of(SiteIndex::a(n, m))?;
        b.add_diagonal(ia, delta);
        b.add_diagonal(ia + 1, -delta);
        for nb in spec.a_neighbours(n, m) {
            b.add_hop(ia, spec.index_of(nb)?, hop);
        }
    }
    Ok(b.build())
}
