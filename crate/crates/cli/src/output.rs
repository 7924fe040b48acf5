//! CSV and JSON writers for scenario artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use valley_qed::bloch::BandSample;
use valley_qed::dynamics::{real_space_density, MomentumDensity};
use valley_qed::edgemodes::{profile_table, EnvelopeParams, GiantRates, NormalRates, RibbonSpectrum};
use valley_qed::scenario::EmissionRun;

use crate::error::CliError;

/// Output directory that records the files written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    /// CSV with an explicit header, for tables that may have no rows.
    pub fn csv_records(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    time: f64,
    population: f64,
}

#[derive(Serialize)]
struct MomentumRow {
    kx: f64,
    ky: f64,
    rho: f64,
    rho_normalized: f64,
}

#[derive(Serialize)]
struct RibbonRow {
    ky: f64,
    band_index: usize,
    omega: f64,
    in_gap: bool,
}

#[derive(Serialize)]
struct ProfileRow {
    x: f64,
    psi_numeric: f64,
    psi_analytic: f64,
}

/// Analytic edge-mode rates and envelope parameters.
#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
pub struct RateReport {
    pub Gamma_normal_per_valley: f64,
    pub Gamma_total: f64,
    pub Gamma_giant_plus: f64,
    pub Gamma_giant_minus: f64,
    pub beta: f64,
    pub xi: f64,
    pub A: f64,
    /// Rates for every giant-atom phase that was run, in run order.
    pub giant: Vec<GiantRates>,
}

impl RateReport {
    pub fn new(normal: &NormalRates, giant: &[GiantRates], params: &EnvelopeParams) -> Self {
        let first = giant.first();
        Self {
            Gamma_normal_per_valley: normal.per_valley,
            Gamma_total: normal.total,
            Gamma_giant_plus: first.map_or(f64::NAN, |g| g.plus),
            Gamma_giant_minus: first.map_or(f64::NAN, |g| g.minus),
            beta: params.beta,
            xi: params.xi,
            A: params.amplitude,
            giant: giant.to_vec(),
        }
    }
}

pub fn write_bands(out: &mut OutputDir, samples: &[BandSample]) -> Result<(), CliError> {
    out.csv("bands.csv", samples)
}

/// Trajectory, real-space snapshot and (if computed) momentum snapshot.
pub fn write_emission_run(out: &mut OutputDir, run: &EmissionRun) -> Result<(), CliError> {
    let t = &run.trajectory;
    out.csv(
        &format!("trajectory_{}.csv", run.label),
        t.times.iter().zip(&t.populations).map(|(&time, &population)| TrajectoryRow { time, population }),
    )?;
    out.csv(&format!("realspace_{}.csv", run.label), real_space_density(&run.snapshot, &run.spec))?;
    if let Some(md) = &run.momentum {
        write_momentum(out, &format!("momentum_{}.csv", run.label), md)?;
    }
    Ok(())
}

fn write_momentum(out: &mut OutputDir, name: &str, md: &MomentumDensity) -> Result<(), CliError> {
    let norm = md.normalized();
    out.csv(
        name,
        md.k.iter().zip(&md.rho).zip(norm).map(|((k, &rho), rho_normalized)| MomentumRow {
            kx: k.x,
            ky: k.y,
            rho,
            rho_normalized,
        }),
    )
}

pub fn write_ribbon(out: &mut OutputDir, spectrum: &RibbonSpectrum) -> Result<(), CliError> {
    let rows = spectrum.ky.iter().enumerate().flat_map(|(i, &ky)| {
        spectrum.eigenvalues[i].iter().zip(&spectrum.in_gap[i]).enumerate().map(move |(b, (&omega, &in_gap))| {
            RibbonRow { ky, band_index: b, omega, in_gap }
        })
    });
    out.csv("ribbon.csv", rows)
}

pub fn write_profile(out: &mut OutputDir, column_density: &[f64], params: &EnvelopeParams) -> Result<(), CliError> {
    out.csv(
        "profile.csv",
        profile_table(column_density, params).into_iter().map(|(x, psi_numeric, psi_analytic)| ProfileRow {
            x,
            psi_numeric,
            psi_analytic,
        }),
    )
}
