//! Single-excitation dynamics of the emitter and the lattice field, and the
//! emission observables built on top of it.
//!
//! The state vector stores the lattice amplitudes in [`HoneycombSpec`] site
//! order followed by the emitter amplitude in the last slot.

use rustfft::FftPlanner;
use serde::Serialize;

use crate::bloch::{dirac_point, valley_distance, Valley};
use crate::lattice::{reciprocal_vectors, HoneycombSpec, SiteIndex, Sublattice};
use crate::emitter::GiantAtomSpec;
use crate::propagator::{ChebyshevPropagator, ChebyshevWorkspace};
use crate::sparse::{HermitianBuilder, SparseHermitian};
use crate::{Error, Result, Vec2, C64};

/// Single-excitation state at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationState {
    pub eps: C64,
    pub field: Vec<C64>,
    pub time: f64,
}

impl ExcitationState {
    /// Emitter excited, field empty, `t = 0`.
    pub fn excited(num_sites: usize) -> Self {
        Self { eps: C64::new(1.0, 0.0), field: vec![C64::default(); num_sites], time: 0.0 }
    }

    /// Splits a full state vector (field then emitter).
    pub fn from_vector(v: &[C64], time: f64) -> Self {
        let (field, eps) = v.split_at(v.len() - 1);
        Self { eps: eps[0], field: field.to_vec(), time }
    }

    pub fn to_vector(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.field.len() + 1);
        v.extend_from_slice(&self.field);
        v.push(self.eps);
        v
    }

    pub fn population(&self) -> f64 {
        self.eps.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.population() + self.field.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Lattice block plus the emitter in the last row and column.
///
/// The emitter diagonal is `omega0` and each coupling point links the emitter
/// to the A site of its cell with `(g / sqrt(N_p)) e^{i phi_l}`.
pub fn assemble_total_hamiltonian(
    lat: &SparseHermitian,
    spec: &HoneycombSpec,
    atom: &GiantAtomSpec,
) -> Result<SparseHermitian> {
    if lat.dim() != spec.num_sites() {
        return Err(Error::Config(format!(
            "lattice operator has dimension {} but the lattice has {} sites",
            lat.dim(),
            spec.num_sites()
        )));
    }
    let emitter = lat.dim();
    let mut b = HermitianBuilder::new(emitter + 1);
    for (i, j, v) in lat.triplets() {
        if i == j {
            b.add_diagonal(i, v.re);
        } else if i < j {
            b.add_hop(i, j, v);
        }
    }
    b.add_diagonal(emitter, atom.omega0);
    for (l, p) in atom.points().iter().enumerate() {
        let site = spec.index_of(SiteIndex::a(p.n, p.m)).map_err(|_| {
            Error::Config(format!("coupling point {l} at cell ({}, {}) lies outside the lattice", p.n, p.m))
        })?;
        b.add_hop(site, emitter, atom.point_coupling(l));
    }
    Ok(b.build())
}

/// Condition under which [`evolve`] stores a snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    /// First reported time with `|eps|^2 <= threshold`.
    PopulationBelow { threshold: f64 },
    /// Exact time `t`.
    AtTime { t: f64 },
}

/// When to end the run before `t_final`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StopRule {
    #[default]
    Final,
    FirstTrigger,
    AllTriggers,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt_report: f64,
    pub triggers: Vec<Trigger>,
    pub stop: StopRule,
    /// Truncation tolerance of the Chebyshev series.
    pub tol: f64,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt_report: f64) -> Self {
        Self { t_final, dt_report, triggers: Vec::new(), stop: StopRule::Final, tol: 1e-13 }
    }

    pub fn with_trigger(mut self, trigger: Trigger) -> Self {
        self.triggers.push(trigger);
        self
    }

    pub fn stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0) || !(self.dt_report > 0.0) {
            return Err(Error::Config(format!(
                "need t_final >= 0 and dt_report > 0, got {} and {}",
                self.t_final, self.dt_report
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub trigger: Trigger,
    pub state: ExcitationState,
}

#[derive(Clone, Debug)]
pub struct EmissionTrajectory {
    pub times: Vec<f64>,
    pub populations: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Largest `| ||psi(t)||^2 - ||psi(0)||^2 |` over reported times.
    pub max_norm_drift: f64,
    /// Largest `|<H>(t) - <H>(0)|` over reported times.
    pub max_energy_drift: f64,
    pub final_state: ExcitationState,
}

impl EmissionTrajectory {
    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Evolves `psi0` with `exp(-i H t)`, reporting every `dt_report` and at
/// every `AtTime` trigger.
pub fn evolve(h: &SparseHermitian, psi0: &ExcitationState, opts: &EvolveOptions) -> Result<EmissionTrajectory> {
    opts.validate()?;
    if psi0.field.len() + 1 != h.dim() {
        return Err(Error::Config(format!(
            "state has {} amplitudes, operator dimension is {}",
            psi0.field.len() + 1,
            h.dim()
        )));
    }
    let norm0 = psi0.norm_sqr();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(Error::Config(format!("initial state has norm^2 {norm0}, expected 1")));
    }

    let mut stops: Vec<f64> = Vec::new();
    let n_reports = (opts.t_final / opts.dt_report + 1e-9).floor() as usize;
    stops.extend((1..=n_reports).map(|i| psi0.time + i as f64 * opts.dt_report));
    if psi0.time + n_reports as f64 * opts.dt_report < psi0.time + opts.t_final - 1e-9 {
        stops.push(psi0.time + opts.t_final);
    }
    for trig in &opts.triggers {
        if let Trigger::AtTime { t } = *trig {
            if t > psi0.time && t <= psi0.time + opts.t_final {
                stops.push(t);
            }
        }
    }
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let prop = ChebyshevPropagator::new(h).with_tolerance(opts.tol);
    let mut ws = ChebyshevWorkspace::default();
    let mut psi = psi0.to_vector();
    let energy0 = h.expectation(&psi);

    let mut fired = vec![false; opts.triggers.len()];
    let mut traj = EmissionTrajectory {
        times: Vec::new(),
        populations: Vec::new(),
        snapshots: Vec::new(),
        max_norm_drift: 0.0,
        max_energy_drift: 0.0,
        final_state: psi0.clone(),
    };

    let mut t = psi0.time;
    let mut record = |t: f64, psi: &[C64], traj: &mut EmissionTrajectory| -> bool {
        let pop = psi[psi.len() - 1].norm_sqr();
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        traj.times.push(t);
        traj.populations.push(pop);
        traj.max_norm_drift = traj.max_norm_drift.max((norm - norm0).abs());
        traj.max_energy_drift = traj.max_energy_drift.max((h.expectation(psi) - energy0).abs());
        for (k, trig) in opts.triggers.iter().enumerate() {
            if fired[k] {
                continue;
            }
            let hit = match *trig {
                Trigger::PopulationBelow { threshold } => pop <= threshold,
                Trigger::AtTime { t: tt } => (t - tt).abs() < 1e-9 || (tt <= psi0.time && t == psi0.time),
            };
            if hit {
                fired[k] = true;
                traj.snapshots.push(Snapshot { trigger: *trig, state: ExcitationState::from_vector(psi, t) });
            }
        }
        match opts.stop {
            StopRule::Final => false,
            StopRule::FirstTrigger => fired.iter().any(|&f| f),
            StopRule::AllTriggers => !fired.is_empty() && fired.iter().all(|&f| f),
        }
    };

    let mut done = record(t, &psi, &mut traj);
    for &next in &stops {
        if done {
            break;
        }
        prop.step(&mut psi, next - t, &mut ws)?;
        t = next;
        done = record(t, &psi, &mut traj);
    }
    traj.final_state = ExcitationState::from_vector(&psi, t);
    Ok(traj)
}

/// First stored snapshot with `|eps|^2 <= threshold`.
///
/// Fails with a trigger miss when the population never reaches the
/// threshold, and with a config error when it does but no matching trigger
/// was requested.
pub fn snapshot_at_population(traj: &EmissionTrajectory, threshold: f64) -> Result<&ExcitationState> {
    let Some(first) = traj.populations.iter().position(|&p| p <= threshold) else {
        return Err(Error::TriggerMiss { threshold, t_final: traj.t_final() });
    };
    let t_cross = traj.times[first];
    traj.snapshots
        .iter()
        .map(|s| &s.state)
        .filter(|s| s.population() <= threshold && s.time <= t_cross + 1e-9)
        .min_by(|a, b| a.time.total_cmp(&b.time))
        .ok_or_else(|| {
            Error::Config(format!(
                "population crossed {threshold} at t = {t_cross} but no snapshot was stored there"
            ))
        })
}

/// Photon density on the discrete momentum grid of a periodic lattice.
#[derive(Clone, Debug)]
pub struct MomentumDensity {
    /// Momenta folded into the first Brillouin zone.
    pub k: Vec<Vec2>,
    /// `|a_k|^2 + |b_k|^2`.
    pub rho: Vec<f64>,
}

impl MomentumDensity {
    /// Density rescaled to maximum 1.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.rho.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return self.rho.clone();
        }
        self.rho.iter().map(|r| r / max).collect()
    }

    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }
}

/// Per-sublattice discrete Fourier transform of the field over the cells,
/// `k = (j1 / N1) b1 + (j2 / Ny) b2`.
pub fn momentum_density(state: &ExcitationState, spec: &HoneycombSpec) -> Result<MomentumDensity> {
    let (n1, ny) = (spec.n1, spec.ny);
    if state.field.len() != spec.num_sites() {
        return Err(Error::Config(format!(
            "state has {} field amplitudes, lattice has {} sites",
            state.field.len(),
            spec.num_sites()
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft_m = planner.plan_fft_forward(ny);
    let fft_n = planner.plan_fft_forward(n1);
    let transform = |sub: usize| -> Vec<C64> {
        // grid[(n, m)] at n * ny + m, matching the site order
        let mut grid: Vec<C64> = state.field.iter().skip(sub).step_by(2).copied().collect();
        for row in grid.chunks_mut(ny) {
            fft_m.process(row);
        }
        let mut col = vec![C64::default(); n1];
        for m in 0..ny {
            for n in 0..n1 {
                col[n] = grid[n * ny + m];
            }
            fft_n.process(&mut col);
            for n in 0..n1 {
                grid[n * ny + m] = col[n];
            }
        }
        grid
    };
    let fa = transform(0);
    let fb = transform(1);
    let (b1, b2) = reciprocal_vectors(spec.a);
    let norm = spec.num_cells() as f64;
    let mut k = Vec::with_capacity(fa.len());
    let mut rho = Vec::with_capacity(fa.len());
    for j1 in 0..n1 {
        for j2 in 0..ny {
            let idx = j1 * ny + j2;
            let kv = b1 * (j1 as f64 / n1 as f64) + b2 * (j2 as f64 / ny as f64);
            k.push(crate::bloch::fold_to_first_zone(kv, spec.a));
            rho.push((fa[idx].norm_sqr() + fb[idx].norm_sqr()) / norm);
        }
    }
    Ok(MomentumDensity { k, rho })
}

/// Integrated intensity near the K and K' corners of the zone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValleyIntensities {
    pub k: f64,
    pub k_prime: f64,
}

impl ValleyIntensities {
    pub fn get(&self, valley: Valley) -> f64 {
        match valley {
            Valley::K => self.k,
            Valley::KPrime => self.k_prime,
        }
    }

    /// `(I_sel - I_sup) / (I_sel + I_sup)` for `selected`.
    pub fn polarization(&self, selected: Valley) -> f64 {
        let (s, u) = (self.get(selected), self.get(selected.opposite()));
        if s + u == 0.0 {
            0.0
        } else {
            (s - u) / (s + u)
        }
    }

    /// Valley with the larger intensity.
    pub fn dominant(&self) -> Valley {
        if self.k >= self.k_prime {
            Valley::K
        } else {
            Valley::KPrime
        }
    }
}

/// Default disk radius `|K| / 4`.
pub fn default_q_cut(a: f64) -> f64 {
    0.25 * dirac_point(Valley::K, a).norm()
}

/// Sums `rho` over disks of radius `q_cut` around all zone corners, grouped
/// by valley.
pub fn valley_intensities(density: &MomentumDensity, a: f64, q_cut: f64) -> Result<ValleyIntensities> {
    let k_len = dirac_point(Valley::K, a).norm();
    if !(q_cut > 0.0) || q_cut >= 0.5 * k_len {
        return Err(Error::Config(format!(
            "valley disk radius {q_cut} must lie in (0, |K|/2 = {})",
            0.5 * k_len
        )));
    }
    let mut out = ValleyIntensities { k: 0.0, k_prime: 0.0 };
    for (k, r) in density.k.iter().zip(&density.rho) {
        if valley_distance(*k, Valley::K, a) < q_cut {
            out.k += r;
        } else if valley_distance(*k, Valley::KPrime, a) < q_cut {
            out.k_prime += r;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Exponential fit `|eps|^2 ~ exp(-Gamma t)` over `0.9 >= |eps|^2 >= 0.1`.
pub fn fit_decay_rate(traj: &EmissionTrajectory) -> Result<DecayFit> {
    fit_decay_window(&traj.times, &traj.populations, 0.9, 0.1)
}

/// Least squares on `ln p` over the contiguous window from the first sample
/// `<= upper` to the last sample before the population drops below `lower`.
pub fn fit_decay_window(times: &[f64], pops: &[f64], upper: f64, lower: f64) -> Result<DecayFit> {
    let start = pops
        .iter()
        .position(|&p| p <= upper)
        .ok_or_else(|| Error::FitWindow(format!("population never fell to {upper}")))?;
    let end = pops[start..]
        .iter()
        .position(|&p| p < lower)
        .map(|i| start + i)
        .ok_or_else(|| Error::FitWindow(format!("population never fell below {lower}")))?;
    let (t, y): (Vec<f64>, Vec<f64>) =
        times[start..end].iter().zip(&pops[start..end]).map(|(&t, &p)| (t, p.ln())).unzip();
    if t.len() < 3 {
        return Err(Error::FitWindow(format!(
            "only {} samples between population {upper} and {lower}; reduce dt_report",
            t.len()
        )));
    }
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let ss_res: f64 = t.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { gamma: -slope, r_squared, points: t.len() })
}

/// Fraction of the photon weight at `y < -y_exclusion` among all weight at
/// `|y| > y_exclusion`.
pub fn chirality(state: &ExcitationState, spec: &HoneycombSpec, y_exclusion: f64) -> Result<f64> {
    let (mut down, mut total) = (0.0, 0.0);
    for (c, r) in state.field.iter().zip(spec.positions()) {
        if r.y.abs() > y_exclusion {
            total += c.norm_sqr();
            if r.y < 0.0 {
                down += c.norm_sqr();
            }
        }
    }
    if total == 0.0 {
        return Err(Error::UndefinedChirality(y_exclusion));
    }
    Ok(down / total)
}

/// One row of a real-space density dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SiteDensity {
    pub x: f64,
    pub y: f64,
    pub sublattice: Sublattice,
    pub density: f64,
}

pub fn real_space_density(state: &ExcitationState, spec: &HoneycombSpec) -> Vec<SiteDensity> {
    spec.positions()
        .into_iter()
        .zip(&state.field)
        .enumerate()
        .map(|(i, (r, c))| SiteDensity {
            x: r.x,
            y: r.y,
            sublattice: if i % 2 == 0 { Sublattice::A } else { Sublattice::B },
            density: c.norm_sqr(),
        })
        .collect()
}
