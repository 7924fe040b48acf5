//! End-to-end drivers: band maps, bulk emission with valley analysis,
//! ribbon edge modes, and chiral emission along a domain wall.
//!
//! Each driver returns a report with the raw data needed for output files,
//! a serializable metrics summary and a list of named checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bloch::{band_map, dirac_velocity, full_zone_chern, valley_chern_numeric, BandSample, Valley};
use crate::dynamics::{
    assemble_total_hamiltonian, chirality, default_q_cut, evolve, fit_decay_rate, momentum_density,
    valley_intensities, DecayFit, EmissionTrajectory, EvolveOptions, ExcitationState, MomentumDensity, StopRule,
    Trigger, ValleyIntensities,
};
use crate::edgemodes::{
    decay_rate_giant, decay_rate_normal, edge_dispersion_fit, profile_overlap, ribbon_spectrum, EnvelopeParams,
    GiantRates, NormalRates, RibbonSpectrum,
};
use crate::emitter::{interference_factor, solve_phase_two_points, GiantAtomSpec};
use crate::lattice::{build_lattice_hamiltonian, Boundary, DetuningProfile, HoneycombSpec, SQRT3};
use crate::{Error, Result};

/// Largest norm drift tolerated by the consistency checks.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

/// Minimum decay-fit quality tolerated by the consistency checks.
pub const FIT_R2_LIMIT: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Time stepping and snapshot settings shared by the emission scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub t_final: f64,
    pub dt_report: f64,
    pub snapshot_threshold: f64,
    /// Chebyshev truncation tolerance.
    pub tol: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { t_final: 600.0, dt_report: 0.5, snapshot_threshold: 0.01, tol: 1e-13 }
    }
}

/// Everything measured on one emission run.
#[derive(Clone, Debug)]
pub struct EmissionRun {
    pub label: String,
    pub spec: HoneycombSpec,
    pub atom: GiantAtomSpec,
    pub trajectory: EmissionTrajectory,
    pub fit: DecayFit,
    pub snapshot: ExcitationState,
    pub momentum: Option<MomentumDensity>,
    pub valleys: Option<ValleyIntensities>,
    pub chirality: Option<f64>,
}

/// Scalar summary of an [`EmissionRun`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub label: String,
    pub points: usize,
    pub phase: Option<f64>,
    pub gamma: f64,
    pub r_squared: f64,
    pub snapshot_time: f64,
    pub snapshot_population: f64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub intensity_k: Option<f64>,
    pub intensity_k_prime: Option<f64>,
    pub dominant_valley: Option<Valley>,
    pub chirality_down: Option<f64>,
}

impl EmissionRun {
    pub fn metrics(&self) -> RunMetrics {
        RunMetrics {
            label: self.label.clone(),
            points: self.atom.num_points(),
            phase: (self.atom.num_points() > 1).then(|| self.atom.points()[1].phase),
            gamma: self.fit.gamma,
            r_squared: self.fit.r_squared,
            snapshot_time: self.snapshot.time,
            snapshot_population: self.snapshot.population(),
            max_norm_drift: self.trajectory.max_norm_drift,
            max_energy_drift: self.trajectory.max_energy_drift,
            intensity_k: self.valleys.map(|v| v.k),
            intensity_k_prime: self.valleys.map(|v| v.k_prime),
            dominant_valley: self.valleys.map(|v| v.dominant()),
            chirality_down: self.chirality,
        }
    }

    /// Norm drift and fit quality.
    pub fn consistency_checks(&self) -> Vec<Check> {
        vec![
            Check::new(
                format!("{}: norm drift", self.label),
                self.trajectory.max_norm_drift < NORM_DRIFT_LIMIT,
                format!("{:.2e} (limit {NORM_DRIFT_LIMIT:.0e})", self.trajectory.max_norm_drift),
            ),
            Check::new(
                format!("{}: decay fit R^2", self.label),
                self.fit.r_squared > FIT_R2_LIMIT,
                format!("{:.5} (limit {FIT_R2_LIMIT})", self.fit.r_squared),
            ),
        ]
    }
}

/// What to measure on the snapshot of an emission run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Analysis {
    pub momentum: bool,
    /// Chirality with this exclusion half-width.
    pub chirality: Option<f64>,
    /// Take the snapshot at this time if the population threshold has not
    /// been reached by then.
    pub snapshot_cap: Option<f64>,
}

/// Evolves the excited emitter until its snapshot condition, fits the decay
/// and evaluates the requested observables.
pub fn run_emission(
    label: &str,
    spec: &HoneycombSpec,
    atom: &GiantAtomSpec,
    run: &RunSettings,
    analysis: Analysis,
) -> Result<EmissionRun> {
    let lat = build_lattice_hamiltonian(spec)?;
    let h = assemble_total_hamiltonian(&lat, spec, atom)?;
    let mut opts = EvolveOptions::new(run.t_final, run.dt_report)
        .with_trigger(Trigger::PopulationBelow { threshold: run.snapshot_threshold })
        .stop(StopRule::FirstTrigger);
    opts.tol = run.tol;
    if let Some(t) = analysis.snapshot_cap {
        opts = opts.with_trigger(Trigger::AtTime { t });
    }
    let trajectory = evolve(&h, &ExcitationState::excited(spec.num_sites()), &opts)?;
    let snapshot = trajectory
        .snapshots
        .iter()
        .min_by(|a, b| a.state.time.total_cmp(&b.state.time))
        .map(|s| s.state.clone())
        .ok_or(Error::TriggerMiss { threshold: run.snapshot_threshold, t_final: trajectory.t_final() })?;
    let fit = fit_decay_rate(&trajectory)?;
    let (momentum, valleys) = if analysis.momentum {
        let md = momentum_density(&snapshot, spec)?;
        let vi = valley_intensities(&md, spec.a, default_q_cut(spec.a))?;
        (Some(md), Some(vi))
    } else {
        (None, None)
    };
    let chirality = analysis.chirality.map(|y| chirality(&snapshot, spec, y)).transpose()?;
    Ok(EmissionRun {
        label: label.to_string(),
        spec: spec.clone(),
        atom: atom.clone(),
        trajectory,
        fit,
        snapshot,
        momentum,
        valleys,
        chirality,
    })
}

/// Valley that a giant atom couples to most strongly.
pub fn selected_valley(atom: &GiantAtomSpec, a: f64) -> Valley {
    if interference_factor(atom, Valley::K, a) >= interference_factor(atom, Valley::KPrime, a) {
        Valley::K
    } else {
        Valley::KPrime
    }
}

/// The giant-atom phase pair: the given phase and its negative, or the
/// valley-selective solutions for K and K' when none is given.
pub fn phase_pair(offset: (i64, i64), phase: Option<f64>) -> Result<[f64; 2]> {
    match phase {
        Some(p) => Ok([p, -p]),
        None => Ok([
            solve_phase_two_points(offset.0, offset.1, Valley::K)?,
            solve_phase_two_points(offset.0, offset.1, Valley::KPrime)?,
        ]),
    }
}

// ---------------------------------------------------------------- bands

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    pub delta: f64,
    pub j: f64,
    pub a: f64,
    pub grid: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { delta: 0.3, j: 1.0, a: 1.0, grid: 96 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandsMetrics {
    pub delta: f64,
    pub grid: usize,
    pub min_gap: f64,
    /// Gap expected from the grid resolution alone.
    pub gap_resolution_bound: f64,
    pub valley_chern_k: f64,
    pub valley_chern_k_prime: f64,
    pub full_zone_chern: f64,
}

#[derive(Clone, Debug)]
pub struct BandsReport {
    pub samples: Vec<BandSample>,
    pub metrics: BandsMetrics,
}

pub fn run_bands(cfg: &BandsConfig) -> Result<BandsReport> {
    if cfg.grid < 3 {
        return Err(Error::Config(format!("band grid {} is too small", cfg.grid)));
    }
    let samples = band_map(cfg.delta, cfg.j, cfg.a, cfg.grid);
    let min_gap = samples.iter().map(|s| s.omega_plus - s.omega_minus).fold(f64::INFINITY, f64::min);
    // Plaquette centres sit at most one mesh spacing from K.
    let h = 4.0 * PI / (3.0 * cfg.a) / cfg.grid as f64;
    let v = dirac_velocity(cfg.j, cfg.a);
    let gap_resolution_bound = 2.0 * (cfg.delta * cfg.delta + (v * h).powi(2)).sqrt();
    let (ck, ckp) = if cfg.delta != 0.0 && cfg.grid >= 48 {
        (
            valley_chern_numeric(cfg.delta, cfg.j, cfg.a, Valley::K, cfg.grid)?,
            valley_chern_numeric(cfg.delta, cfg.j, cfg.a, Valley::KPrime, cfg.grid)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(BandsReport {
        samples,
        metrics: BandsMetrics {
            delta: cfg.delta,
            grid: cfg.grid,
            min_gap,
            gap_resolution_bound,
            valley_chern_k: ck,
            valley_chern_k_prime: ckp,
            full_zone_chern: full_zone_chern(cfg.delta, cfg.j, cfg.a, cfg.grid),
        },
    })
}

impl BandsReport {
    pub fn consistency_checks(&self) -> Vec<Check> {
        let m = &self.metrics;
        vec![Check::new(
            "band gap",
            m.min_gap >= 2.0 * m.delta.abs() - 1e-12 && m.min_gap <= m.gap_resolution_bound + 1e-12,
            format!("min gap {:.6} in [{:.6}, {:.6}]", m.min_gap, 2.0 * m.delta.abs(), m.gap_resolution_bound),
        )]
    }

    pub fn acceptance_checks(&self) -> Vec<Check> {
        let m = &self.metrics;
        let s = m.delta.signum();
        vec![
            Check::new(
                "valley Chern K",
                (m.valley_chern_k - 0.5 * s).abs() <= 0.02,
                format!("{:.4} vs {:+.1}", m.valley_chern_k, 0.5 * s),
            ),
            Check::new(
                "valley Chern K'",
                (m.valley_chern_k_prime + 0.5 * s).abs() <= 0.02,
                format!("{:.4} vs {:+.1}", m.valley_chern_k_prime, -0.5 * s),
            ),
            Check::new(
                "full-zone Chern",
                m.full_zone_chern.abs() <= 0.04,
                format!("{:.2e}", m.full_zone_chern),
            ),
        ]
    }
}

// ------------------------------------------------------- bulk emission

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BulkEmissionConfig {
    pub size: usize,
    pub delta: f64,
    pub omega0: f64,
    pub g: f64,
    pub j: f64,
    pub a: f64,
    /// `R_2 - R_1` of the giant atom in cells.
    pub offset: (i64, i64),
    /// Giant-atom phase; the valley-selective pair is used when absent.
    pub phase: Option<f64>,
    pub run: RunSettings,
}

impl Default for BulkEmissionConfig {
    fn default() -> Self {
        Self {
            size: 151,
            delta: 0.5,
            omega0: 0.7,
            g: 0.18,
            j: 1.0,
            a: 1.0,
            offset: (0, 1),
            phase: None,
            run: RunSettings::default(),
        }
    }
}

impl BulkEmissionConfig {
    pub const FULL_SIZE: usize = 331;

    pub fn spec(&self) -> HoneycombSpec {
        let mut s = HoneycombSpec::new(self.size, self.size, DetuningProfile::uniform(self.delta));
        s.a = self.a;
        s.j = self.j;
        s
    }
}

#[derive(Clone, Debug)]
pub struct BulkEmissionReport {
    pub normal: EmissionRun,
    /// Giant atom with the first and second phase of the pair.
    pub giant: [EmissionRun; 2],
    /// Valley each giant run is designed to select.
    pub expected: [Valley; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BulkEmissionMetrics {
    pub normal: RunMetrics,
    pub giant: [RunMetrics; 2],
    pub expected_valley: [Valley; 2],
    /// `|I_K - I_K'| / max(I_K, I_K')` of the normal atom.
    pub normal_valley_imbalance: f64,
    /// Suppressed over selected intensity per giant run.
    pub suppression_ratio: [f64; 2],
    pub polarization: [f64; 2],
}

pub fn run_bulk_emission(cfg: &BulkEmissionConfig) -> Result<BulkEmissionReport> {
    let spec = cfg.spec();
    let analysis = Analysis { momentum: true, ..Default::default() };
    let normal = run_emission("normal", &spec, &GiantAtomSpec::normal(cfg.omega0, cfg.g), &cfg.run, analysis)?;
    let phases = phase_pair(cfg.offset, cfg.phase)?;
    let mut runs = Vec::with_capacity(2);
    let mut expected = [Valley::K; 2];
    for (i, &p) in phases.iter().enumerate() {
        let atom = GiantAtomSpec::two_point(cfg.omega0, cfg.g, cfg.offset, p);
        expected[i] = selected_valley(&atom, spec.a);
        runs.push(run_emission(&format!("giant_{}", i + 1), &spec, &atom, &cfg.run, analysis)?);
    }
    let giant: [EmissionRun; 2] = runs.try_into().expect("two runs");
    Ok(BulkEmissionReport { normal, giant, expected })
}

impl BulkEmissionReport {
    pub fn metrics(&self) -> BulkEmissionMetrics {
        let vn = self.normal.valleys.expect("momentum analysis");
        let ratio = |r: &EmissionRun, v: Valley| {
            let vi = r.valleys.expect("momentum analysis");
            vi.get(v.opposite()) / vi.get(v)
        };
        let pol = |r: &EmissionRun, v: Valley| r.valleys.expect("momentum analysis").polarization(v);
        BulkEmissionMetrics {
            normal: self.normal.metrics(),
            giant: [self.giant[0].metrics(), self.giant[1].metrics()],
            expected_valley: self.expected,
            normal_valley_imbalance: (vn.k - vn.k_prime).abs() / vn.k.max(vn.k_prime),
            suppression_ratio: [ratio(&self.giant[0], self.expected[0]), ratio(&self.giant[1], self.expected[1])],
            polarization: [pol(&self.giant[0], self.expected[0]), pol(&self.giant[1], self.expected[1])],
        }
    }

    pub fn runs(&self) -> [&EmissionRun; 3] {
        [&self.normal, &self.giant[0], &self.giant[1]]
    }

    pub fn consistency_checks(&self) -> Vec<Check> {
        self.runs().iter().flat_map(|r| r.consistency_checks()).collect()
    }

    pub fn acceptance_checks(&self) -> Vec<Check> {
        let m = self.metrics();
        let mut out = vec![
            Check::new("normal decay R^2 > 0.99", m.normal.r_squared > 0.99, format!("{:.5}", m.normal.r_squared)),
            Check::new(
                "normal valley intensities equal within 5%",
                m.normal_valley_imbalance < 0.05,
                format!("imbalance {:.4}", m.normal_valley_imbalance),
            ),
        ];
        for i in 0..2 {
            out.push(Check::new(
                format!("giant {} suppressed valley < 2%", i + 1),
                m.suppression_ratio[i] < 0.02,
                format!("ratio {:.4}, polarization {:.4}", m.suppression_ratio[i], m.polarization[i]),
            ));
        }
        let dom = [m.giant[0].dominant_valley, m.giant[1].dominant_valley];
        out.push(Check::new(
            "opposite phases select opposite valleys",
            dom[0] == Some(self.expected[0]) && dom[1] == Some(self.expected[1]) && dom[0] != dom[1],
            format!("dominant {dom:?}, expected {:?}", self.expected),
        ));
        out
    }
}

// --------------------------------------------------------------- ribbon

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RibbonConfig {
    pub nx: usize,
    pub ny: usize,
    pub delta0: f64,
    pub lambda: f64,
    pub j: f64,
    pub a: f64,
    /// Energy of the state whose localization is reported.
    pub probe_omega: f64,
}

impl Default for RibbonConfig {
    fn default() -> Self {
        Self { nx: 100, ny: 300, delta0: 0.2, lambda: 4.0, j: 1.0, a: 1.0, probe_omega: -0.16 }
    }
}

impl RibbonConfig {
    pub fn spec(&self) -> HoneycombSpec {
        let mut s = HoneycombSpec::new(self.nx, self.ny, DetuningProfile::wall_along_y(self.delta0, self.lambda));
        s.a = self.a;
        s.j = self.j;
        s.boundary = [Boundary::Open, Boundary::Periodic];
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RibbonMetrics {
    pub zero_crossings: usize,
    pub slope_k: f64,
    pub slope_k_prime: f64,
    pub dirac_velocity: f64,
    /// Overlap of the state nearest `omega = 0` with the analytic envelope.
    pub profile_overlap: f64,
    pub near_zero_ky: f64,
    pub near_zero_omega: f64,
    /// Weight within `|x| <= 4 xi` of the state nearest `probe_omega`.
    pub probe_localization: f64,
    pub probe_ky: f64,
    pub probe_omega: f64,
    pub envelope: EnvelopeParams,
}

#[derive(Clone, Debug)]
pub struct RibbonReport {
    pub spectrum: RibbonSpectrum,
    pub params: EnvelopeParams,
    /// `(ky index, band)` of the near-zero state.
    pub near_zero: (usize, usize),
    pub metrics: RibbonMetrics,
}

pub fn run_ribbon(cfg: &RibbonConfig) -> Result<RibbonReport> {
    let spec = cfg.spec();
    let spectrum = ribbon_spectrum(&spec)?;
    let params = EnvelopeParams::from_spec(&spec)?;
    let near_zero = spectrum.nearest_state(0.0, None).ok_or(Error::Gapless("empty ribbon".into()))?;
    let probe = spectrum.nearest_state(cfg.probe_omega, None).ok_or(Error::Gapless("empty ribbon".into()))?;
    let metrics = RibbonMetrics {
        zero_crossings: spectrum.zero_crossings(),
        slope_k: edge_dispersion_fit(&spectrum, Valley::K)?,
        slope_k_prime: edge_dispersion_fit(&spectrum, Valley::KPrime)?,
        dirac_velocity: params.v,
        profile_overlap: profile_overlap(&spectrum.column_density(near_zero.0, near_zero.1), &params),
        near_zero_ky: spectrum.ky[near_zero.0],
        near_zero_omega: spectrum.eigenvalues[near_zero.0][near_zero.1],
        probe_localization: spectrum.weight_within(probe.0, probe.1, 4.0 * params.xi),
        probe_ky: spectrum.ky[probe.0],
        probe_omega: spectrum.eigenvalues[probe.0][probe.1],
        envelope: params,
    };
    Ok(RibbonReport { spectrum, params, near_zero, metrics })
}

impl RibbonReport {
    pub fn consistency_checks(&self) -> Vec<Check> {
        vec![Check::new(
            "in-gap branches",
            self.metrics.zero_crossings == 2,
            format!("{} zero crossings", self.metrics.zero_crossings),
        )]
    }

    pub fn acceptance_checks(&self) -> Vec<Check> {
        let m = &self.metrics;
        let v = m.dirac_velocity;
        vec![
            Check::new("exactly two in-gap branches", m.zero_crossings == 2, format!("{}", m.zero_crossings)),
            Check::new(
                "branch slopes +-1.5aJ within 5%",
                (m.slope_k.abs() - v).abs() <= 0.05 * v
                    && (m.slope_k_prime.abs() - v).abs() <= 0.05 * v
                    && m.slope_k * m.slope_k_prime < 0.0,
                format!("K {:+.4}, K' {:+.4}", m.slope_k, m.slope_k_prime),
            ),
            Check::new(
                "profile overlap > 0.99",
                m.profile_overlap > 0.99,
                format!("{:.6} at omega {:+.4}", m.profile_overlap, m.near_zero_omega),
            ),
            Check::new(
                "probe state localized (>= 90% within 4 xi)",
                m.probe_localization >= 0.9,
                format!("{:.4} at omega {:+.4}", m.probe_localization, m.probe_omega),
            ),
        ]
    }
}

// ----------------------------------------------------- chiral emission

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiralEmissionConfig {
    pub size: usize,
    pub delta0: f64,
    pub lambda: f64,
    pub omega0: f64,
    pub g: f64,
    pub j: f64,
    pub a: f64,
    pub offset: (i64, i64),
    pub phase: Option<f64>,
    pub y_exclusion: f64,
    /// Distance kept between the edge-mode wavefront and the lattice edge
    /// when capping the snapshot time.
    pub containment_margin: f64,
    /// Fixed snapshot cap; derived from the containment margin when absent.
    pub snapshot_cap: Option<f64>,
    pub run: RunSettings,
}

impl Default for ChiralEmissionConfig {
    fn default() -> Self {
        Self {
            size: 301,
            delta0: 0.5,
            lambda: 2.0,
            omega0: 0.0,
            g: 0.3,
            j: 1.0,
            a: 1.0,
            offset: (0, 1),
            phase: None,
            y_exclusion: 5.0,
            containment_margin: 20.0,
            snapshot_cap: None,
            run: RunSettings::default(),
        }
    }
}

impl ChiralEmissionConfig {
    pub const FULL_SIZE: usize = 551;

    pub fn spec(&self) -> HoneycombSpec {
        let mut s = HoneycombSpec::new(self.size, self.size, DetuningProfile::wall_along_y(self.delta0, self.lambda))
            .with_boundary(Boundary::Open);
        s.a = self.a;
        s.j = self.j;
        s
    }

    /// Time for an edge mode leaving `y = 0` at speed `v` to come within
    /// `containment_margin` of the lattice edge on the wall.
    pub fn containment_time(&self) -> f64 {
        let half = SQRT3 * self.a * (self.size / 2) as f64;
        (half - self.containment_margin).max(0.0) / dirac_velocity(self.j, self.a)
    }

    pub fn snapshot_time_cap(&self) -> f64 {
        self.snapshot_cap.unwrap_or_else(|| self.containment_time())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiralPredictions {
    pub normal: NormalRates,
    pub giant: [GiantRates; 2],
}

#[derive(Clone, Debug)]
pub struct ChiralEmissionReport {
    pub normal: EmissionRun,
    pub giant: [EmissionRun; 2],
    pub expected: [Valley; 2],
    pub predictions: ChiralPredictions,
    pub snapshot_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiralEmissionMetrics {
    pub normal: RunMetrics,
    pub giant: [RunMetrics; 2],
    pub expected_valley: [Valley; 2],
    pub predictions: ChiralPredictions,
    /// Predicted rate of each giant run into its selected valley.
    pub giant_predicted: [f64; 2],
    pub snapshot_cap: f64,
}

pub fn run_chiral_emission(cfg: &ChiralEmissionConfig) -> Result<ChiralEmissionReport> {
    let spec = cfg.spec();
    let params = EnvelopeParams::from_spec(&spec)?;
    let cap = cfg.snapshot_time_cap();
    let analysis = Analysis { momentum: false, chirality: Some(cfg.y_exclusion), snapshot_cap: Some(cap) };
    let normal_atom = GiantAtomSpec::normal(cfg.omega0, cfg.g);
    let normal = run_emission("normal", &spec, &normal_atom, &cfg.run, analysis)?;
    let phases = phase_pair(cfg.offset, cfg.phase)?;
    let mut runs = Vec::with_capacity(2);
    let mut expected = [Valley::K; 2];
    let mut giant_rates = Vec::with_capacity(2);
    for (i, &p) in phases.iter().enumerate() {
        let atom = GiantAtomSpec::two_point(cfg.omega0, cfg.g, cfg.offset, p);
        expected[i] = selected_valley(&atom, spec.a);
        giant_rates.push(decay_rate_giant(&atom, cfg.j, &params)?);
        runs.push(run_emission(&format!("giant_{}", i + 1), &spec, &atom, &cfg.run, analysis)?);
    }
    let x_r = normal_atom.points()[0].position(spec.a).x;
    let predictions = ChiralPredictions {
        normal: decay_rate_normal(x_r, cfg.omega0, cfg.g, cfg.j, &params)?,
        giant: [giant_rates[0], giant_rates[1]],
    };
    Ok(ChiralEmissionReport {
        normal,
        giant: runs.try_into().expect("two runs"),
        expected,
        predictions,
        snapshot_cap: cap,
    })
}

impl ChiralEmissionReport {
    pub fn metrics(&self) -> ChiralEmissionMetrics {
        ChiralEmissionMetrics {
            normal: self.normal.metrics(),
            giant: [self.giant[0].metrics(), self.giant[1].metrics()],
            expected_valley: self.expected,
            predictions: self.predictions,
            giant_predicted: [
                self.predictions.giant[0].get(self.expected[0]),
                self.predictions.giant[1].get(self.expected[1]),
            ],
            snapshot_cap: self.snapshot_cap,
        }
    }

    pub fn runs(&self) -> [&EmissionRun; 3] {
        [&self.normal, &self.giant[0], &self.giant[1]]
    }

    pub fn consistency_checks(&self) -> Vec<Check> {
        self.runs().iter().flat_map(|r| r.consistency_checks()).collect()
    }

    pub fn acceptance_checks(&self) -> Vec<Check> {
        let m = self.metrics();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        let mut out = vec![
            Check::new(
                "normal Gamma = 0.03J +- 10%",
                rel(m.normal.gamma, 0.03) <= 0.10,
                format!("{:.5}", m.normal.gamma),
            ),
            Check::new(
                "normal analytic total within 5% of fit",
                rel(self.predictions.normal.total, m.normal.gamma) <= 0.05,
                format!("analytic {:.5} vs fit {:.5}", self.predictions.normal.total, m.normal.gamma),
            ),
        ];
        for i in 0..2 {
            out.push(Check::new(
                format!("giant {} Gamma = 0.021J +- 15%", i + 1),
                rel(m.giant[i].gamma, 0.021) <= 0.15,
                format!("{:.5}", m.giant[i].gamma),
            ));
            out.push(Check::new(
                format!("giant {} prediction within 10% of fit", i + 1),
                rel(m.giant_predicted[i], m.giant[i].gamma) <= 0.10,
                format!("predicted {:.5} vs fit {:.5}", m.giant_predicted[i], m.giant[i].gamma),
            ));
        }
        let c = [m.giant[0].chirality_down.unwrap_or(f64::NAN), m.giant[1].chirality_down.unwrap_or(f64::NAN)];
        let one_way = |x: f64| x >= 0.95 || x <= 0.05;
        out.push(Check::new(
            "giant phases emit one way each, in opposite directions",
            one_way(c[0]) && one_way(c[1]) && (c[0] - 0.5) * (c[1] - 0.5) < 0.0,
            format!("downward fractions {:.4}, {:.4}", c[0], c[1]),
        ));
        let cn = m.normal.chirality_down.unwrap_or(f64::NAN);
        out.push(Check::new("normal atom emits symmetrically", (cn - 0.5).abs() <= 0.05, format!("{cn:.4}")));
        out
    }
}
