//! Scenario execution, manifests and sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use valley_qed::edgemodes::{decay_rate_giant, EnvelopeParams};
use valley_qed::emitter::GiantAtomSpec;
use valley_qed::lattice::{Boundary, DetuningProfile};
use valley_qed::scenario::{
    all_passed, run_bands, run_bulk_emission, run_chiral_emission, run_emission, run_ribbon, Analysis, Check,
};

use crate::config::{Param, ScenarioConfig, ScenarioKind, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{self, OutputDir, RateReport};

/// Scalar metrics collected by sweeps, per scenario.
pub fn scalar_names(kind: ScenarioKind) -> &'static [&'static str] {
    match kind {
        ScenarioKind::Bands => &["min_gap", "valley_chern_k", "valley_chern_k_prime", "full_zone_chern"],
        ScenarioKind::Bulk => &[
            "gamma_normal",
            "gamma_giant_1",
            "gamma_giant_2",
            "polarization_1",
            "polarization_2",
            "suppression_1",
            "suppression_2",
        ],
        ScenarioKind::Ribbon => &["zero_crossings", "slope_k", "slope_k_prime", "profile_overlap"],
        ScenarioKind::Chiral => &[
            "gamma_normal",
            "gamma_giant_1",
            "gamma_giant_2",
            "predicted_normal",
            "predicted_giant_1",
            "predicted_giant_2",
            "chirality_normal",
            "chirality_1",
            "chirality_2",
        ],
        ScenarioKind::Custom => &["gamma", "r_squared", "intensity_k", "intensity_k_prime", "chirality"],
    }
}

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub scenario: ScenarioKind,
    pub metrics: serde_json::Value,
    pub scalars: BTreeMap<String, f64>,
    pub consistency: Vec<Check>,
    pub acceptance: Vec<Check>,
    pub files: Vec<String>,
}

impl Outcome {
    pub fn consistent(&self) -> bool {
        all_passed(&self.consistency)
    }

    pub fn accepted(&self) -> bool {
        all_passed(&self.acceptance)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool_version: &'static str,
    config: &'a ScenarioConfig,
    metrics: &'a serde_json::Value,
    consistency_checks: &'a [Check],
    acceptance_checks: &'a [Check],
    files: &'a [String],
}

/// Runs the (resolved) scenario, writes its artifacts and a manifest into
/// `dir`.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut out = OutputDir::create(dir)?;
    let mut outcome = execute(cfg, &mut out)?;
    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    out.json(
        "manifest.json",
        &Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            metrics: &outcome.metrics,
            consistency_checks: &outcome.consistency,
            acceptance_checks: &outcome.acceptance,
            files: &files,
        },
    )?;
    outcome.files = files;
    Ok(outcome)
}

fn execute(cfg: &ScenarioConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mut s = BTreeMap::new();
    let (metrics, consistency, acceptance) = match cfg.scenario {
        ScenarioKind::Bands => {
            let r = run_bands(&cfg.bands)?;
            output::write_bands(out, &r.samples)?;
            let m = &r.metrics;
            s.insert("min_gap", m.min_gap);
            s.insert("valley_chern_k", m.valley_chern_k);
            s.insert("valley_chern_k_prime", m.valley_chern_k_prime);
            s.insert("full_zone_chern", m.full_zone_chern);
            (serde_json::to_value(m)?, r.consistency_checks(), r.acceptance_checks())
        }
        ScenarioKind::Bulk => {
            let r = run_bulk_emission(&cfg.bulk)?;
            for run in r.runs() {
                output::write_emission_run(out, run)?;
            }
            let m = r.metrics();
            s.insert("gamma_normal", m.normal.gamma);
            for i in 0..2 {
                s.insert(["gamma_giant_1", "gamma_giant_2"][i], m.giant[i].gamma);
                s.insert(["polarization_1", "polarization_2"][i], m.polarization[i]);
                s.insert(["suppression_1", "suppression_2"][i], m.suppression_ratio[i]);
            }
            (serde_json::to_value(&m)?, r.consistency_checks(), r.acceptance_checks())
        }
        ScenarioKind::Ribbon => {
            let r = run_ribbon(&cfg.ribbon)?;
            output::write_ribbon(out, &r.spectrum)?;
            output::write_profile(out, &r.spectrum.column_density(r.near_zero.0, r.near_zero.1), &r.params)?;
            let m = &r.metrics;
            s.insert("zero_crossings", m.zero_crossings as f64);
            s.insert("slope_k", m.slope_k);
            s.insert("slope_k_prime", m.slope_k_prime);
            s.insert("profile_overlap", m.profile_overlap);
            (serde_json::to_value(m)?, r.consistency_checks(), r.acceptance_checks())
        }
        ScenarioKind::Chiral => {
            let r = run_chiral_emission(&cfg.chiral)?;
            for run in r.runs() {
                output::write_emission_run(out, run)?;
            }
            let params = EnvelopeParams::from_spec(&cfg.chiral.spec())?;
            out.json("rates.json", &RateReport::new(&r.predictions.normal, &r.predictions.giant, &params))?;
            let m = r.metrics();
            s.insert("gamma_normal", m.normal.gamma);
            s.insert("predicted_normal", m.predictions.normal.total);
            s.insert("chirality_normal", m.normal.chirality_down.unwrap_or(f64::NAN));
            for i in 0..2 {
                s.insert(["gamma_giant_1", "gamma_giant_2"][i], m.giant[i].gamma);
                s.insert(["predicted_giant_1", "predicted_giant_2"][i], m.giant_predicted[i]);
                s.insert(["chirality_1", "chirality_2"][i], m.giant[i].chirality_down.unwrap_or(f64::NAN));
            }
            (serde_json::to_value(&m)?, r.consistency_checks(), r.acceptance_checks())
        }
        ScenarioKind::Custom => {
            let c = cfg.custom_config()?;
            let spec = &c.lattice;
            let wall = matches!(spec.detuning, DetuningProfile::DomainWall { .. });
            let periodic = spec.boundary == [Boundary::Periodic; 2];
            let analysis = Analysis {
                momentum: c.momentum.unwrap_or(periodic && !wall),
                chirality: c.y_exclusion.or(wall.then_some(5.0 * spec.a)),
                snapshot_cap: c.snapshot_cap,
            };
            let atom = GiantAtomSpec::new(c.atom.omega0, c.atom.g, c.atom.points().to_vec())?;
            let run = run_emission("custom", spec, &atom, &c.run, analysis)?;
            output::write_emission_run(out, &run)?;
            let mut metrics = serde_json::to_value(run.metrics())?;
            // Analytic rates exist only for x-directed walls with omega0 in the gap.
            if let Ok(params) = EnvelopeParams::from_spec(spec) {
                if let Ok(rates) = decay_rate_giant(&atom, spec.j, &params) {
                    metrics["predicted"] = serde_json::to_value(rates)?;
                }
            }
            let m = run.metrics();
            s.insert("gamma", m.gamma);
            s.insert("r_squared", m.r_squared);
            s.insert("intensity_k", m.intensity_k.unwrap_or(f64::NAN));
            s.insert("intensity_k_prime", m.intensity_k_prime.unwrap_or(f64::NAN));
            s.insert("chirality", m.chirality_down.unwrap_or(f64::NAN));
            (metrics, run.consistency_checks(), Vec::new())
        }
    };
    Ok(Outcome {
        scenario: cfg.scenario,
        metrics,
        scalars: s.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        consistency,
        acceptance,
        files: Vec::new(),
    })
}

/// One row of a sweep table.
#[derive(Debug)]
pub struct SweepRow {
    pub value: f64,
    pub result: Result<Outcome, String>,
}

impl SweepRow {
    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(o) if o.consistent() => "ok",
            Ok(_) => "inconsistent",
            Err(_) => "error",
        }
    }
}

/// Runs the scenario once per value, in parallel, each into its own
/// subdirectory, and writes `sweep_<param>.csv` into `dir`.
pub fn sweep(cfg: &ScenarioConfig, param: Param, values: &[f64], dir: &Path) -> Result<Vec<SweepRow>, CliError> {
    let mut out = OutputDir::create(dir)?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let sub = dir.join(format!("{param}_{i:03}"));
            let result = (|| {
                let mut c = cfg.clone();
                c.set_param(param, value)?;
                run_scenario(&c, &sub)
            })()
            .map_err(|e| e.to_string());
            SweepRow { value, result }
        })
        .collect();

    let names = scalar_names(cfg.scenario);
    let mut header: Vec<String> = vec![param.to_string(), "status".into()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.push("error".into());
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut rec = vec![format!("{}", r.value), r.status().to_string()];
            match &r.result {
                Ok(o) => {
                    rec.extend(names.iter().map(|n| o.scalars.get(*n).map_or(String::new(), |v| format!("{v}"))));
                    rec.push(String::new());
                }
                Err(e) => {
                    rec.extend(names.iter().map(|_| String::new()));
                    rec.push(e.clone());
                }
            }
            rec
        })
        .collect();
    out.csv_records(&format!("sweep_{param}.csv"), &header, &records)?;
    Ok(rows)
}
