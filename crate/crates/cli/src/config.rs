//! Scenario configuration files, angle literals and parameter overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use valley_qed::emitter::{CouplingPoint, GiantAtomSpec};
use valley_qed::lattice::{DetuningProfile, HoneycombSpec};
use valley_qed::scenario::{
    BandsConfig, BulkEmissionConfig, ChiralEmissionConfig, RibbonConfig, RunSettings,
};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Bloch bands, Berry curvature and valley Chern numbers.
    Bands,
    /// Normal and giant atom in the uniform lattice, with momentum-space valley analysis.
    #[serde(alias = "bulk-emission", alias = "bulk_emission")]
    #[value(alias = "bulk-emission")]
    Bulk,
    /// Domain-wall ribbon spectrum and edge-mode profile.
    Ribbon,
    /// Normal and giant atom on a domain wall, with chirality and analytic rates.
    #[serde(alias = "chiral-emission", alias = "chiral_emission")]
    #[value(alias = "chiral-emission")]
    Chiral,
    /// User-defined lattice and atom.
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] =
        [ScenarioKind::Bands, ScenarioKind::Bulk, ScenarioKind::Ribbon, ScenarioKind::Chiral, ScenarioKind::Custom];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Bands => "bands",
            ScenarioKind::Bulk => "bulk",
            ScenarioKind::Ribbon => "ribbon",
            ScenarioKind::Chiral => "chiral",
            ScenarioKind::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::Bands => "band energies and lower-band Berry curvature over the Brillouin zone, valley Chern numbers",
            ScenarioKind::Bulk => "emission into the uniform gapped lattice: decay fit, real- and momentum-space snapshots, valley intensities",
            ScenarioKind::Ribbon => "domain-wall ribbon spectrum, in-gap branch slopes and transverse profile against the analytic envelope",
            ScenarioKind::Chiral => "emission into the domain-wall channel: decay fits, chirality, analytic edge-mode rates",
            ScenarioKind::Custom => "any lattice and coupling geometry from the [custom] table",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Top-level `[run]` table; set fields override the scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_report: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub full_scale: bool,
}

impl RunSection {
    fn apply(&self, run: &mut RunSettings) {
        if let Some(v) = self.t_final {
            run.t_final = v;
        }
        if let Some(v) = self.dt_report {
            run.dt_report = v;
        }
        if let Some(v) = self.snapshot_threshold {
            run.snapshot_threshold = v;
        }
        if let Some(v) = self.tol {
            run.tol = v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub lattice: HoneycombSpec,
    pub atom: GiantAtomSpec,
    #[serde(default)]
    pub run: RunSettings,
    /// Momentum-space analysis; defaults to on for uniform detuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<bool>,
    /// Chirality exclusion half-width; defaults to `5a` for domain walls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_exclusion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub bulk: BulkEmissionConfig,
    #[serde(default)]
    pub ribbon: RibbonConfig,
    #[serde(default)]
    pub chiral: ChiralEmissionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomConfig>,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            run: RunSection::default(),
            bands: BandsConfig::default(),
            bulk: BulkEmissionConfig::default(),
            ribbon: RibbonConfig::default(),
            chiral: ChiralEmissionConfig::default(),
            custom: None,
        }
    }

    /// Reads a TOML config, or a JSON config or run manifest (by extension).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if let Some(cfg) = value.get_mut("config") {
                value = cfg.take();
            }
            return serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let text = substitute_phase_literals(text)?;
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Folds the `[run]` table and the full-scale switch into the scenario
    /// settings.
    pub fn resolve(&mut self) {
        if self.run.full_scale {
            self.bulk.size = BulkEmissionConfig::FULL_SIZE;
            self.chiral.size = ChiralEmissionConfig::FULL_SIZE;
        }
        self.run.apply(&mut self.bulk.run);
        self.run.apply(&mut self.chiral.run);
        if let Some(c) = self.custom.as_mut() {
            self.run.apply(&mut c.run);
        }
    }

    /// Structural checks that do not need a run.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match self.scenario {
            ScenarioKind::Bands => {
                if self.bands.grid < 3 {
                    return Err(CliError::Config(format!("bands.grid = {} is below 3", self.bands.grid)));
                }
            }
            ScenarioKind::Bulk => {
                self.bulk.spec().validate()?;
                check_run(&self.bulk.run)?;
            }
            ScenarioKind::Ribbon => {
                self.ribbon.spec().validate()?;
                positive("ribbon.delta0", self.ribbon.delta0)?;
            }
            ScenarioKind::Chiral => {
                self.chiral.spec().validate()?;
                positive("chiral.delta0", self.chiral.delta0)?;
                check_run(&self.chiral.run)?;
            }
            ScenarioKind::Custom => {
                let c = self.custom_config()?;
                c.lattice.validate()?;
                GiantAtomSpec::new(c.atom.omega0, c.atom.g, c.atom.points().to_vec())?;
                for p in c.atom.points() {
                    if !c.lattice.contains_cell(p.n, p.m) {
                        return Err(CliError::Config(format!(
                            "custom.atom point ({}, {}) lies outside the lattice",
                            p.n, p.m
                        )));
                    }
                }
                check_run(&c.run)?;
            }
        }
        Ok(())
    }

    pub fn custom_config(&self) -> Result<&CustomConfig, CliError> {
        self.custom
            .as_ref()
            .ok_or_else(|| CliError::Config("scenario 'custom' needs a [custom] table".into()))
    }

    /// Coupling strength and hopping of the active scenario's atom, if any.
    pub fn coupling_ratio(&self) -> Option<f64> {
        match self.scenario {
            ScenarioKind::Bulk => Some(self.bulk.g / self.bulk.j),
            ScenarioKind::Chiral => Some(self.chiral.g / self.chiral.j),
            ScenarioKind::Custom => self.custom.as_ref().map(|c| c.atom.g / c.lattice.j),
            _ => None,
        }
    }

    /// Sets one physical parameter of the active scenario.
    pub fn set_param(&mut self, param: Param, value: f64) -> Result<(), CliError> {
        let unused = || CliError::Config(format!("parameter {param} does not apply to scenario {}", self.scenario));
        match (self.scenario, param) {
            (ScenarioKind::Bands, Param::Delta) => self.bands.delta = value,
            (ScenarioKind::Bulk, Param::Delta) => self.bulk.delta = value,
            (ScenarioKind::Bulk, Param::G) => self.bulk.g = value,
            (ScenarioKind::Bulk, Param::Omega0) => self.bulk.omega0 = value,
            (ScenarioKind::Bulk, Param::Phase) => self.bulk.phase = Some(value),
            (ScenarioKind::Ribbon, Param::Delta0) => self.ribbon.delta0 = value,
            (ScenarioKind::Ribbon, Param::Lambda) => self.ribbon.lambda = value,
            (ScenarioKind::Chiral, Param::Delta0) => self.chiral.delta0 = value,
            (ScenarioKind::Chiral, Param::Lambda) => self.chiral.lambda = value,
            (ScenarioKind::Chiral, Param::G) => self.chiral.g = value,
            (ScenarioKind::Chiral, Param::Omega0) => self.chiral.omega0 = value,
            (ScenarioKind::Chiral, Param::Phase) => self.chiral.phase = Some(value),
            (ScenarioKind::Custom, p) => {
                let c = self.custom.as_mut().ok_or_else(unused)?;
                set_custom(c, p, value).ok_or_else(unused)?;
            }
            _ => return Err(unused()),
        }
        Ok(())
    }

    pub fn set_size(&mut self, size: usize) -> Result<(), CliError> {
        match self.scenario {
            ScenarioKind::Bulk => self.bulk.size = size,
            ScenarioKind::Chiral => self.chiral.size = size,
            ScenarioKind::Ribbon => self.ribbon.nx = size,
            ScenarioKind::Bands => self.bands.grid = size,
            ScenarioKind::Custom => {
                return Err(CliError::Config("set the custom lattice size in [custom.lattice]".into()))
            }
        }
        Ok(())
    }
}

fn set_custom(c: &mut CustomConfig, p: Param, value: f64) -> Option<()> {
    match (p, &mut c.lattice.detuning) {
        (Param::Delta, DetuningProfile::Uniform { delta }) => *delta = value,
        (Param::Delta0, DetuningProfile::DomainWall { delta0, .. }) => *delta0 = value,
        (Param::Lambda, DetuningProfile::DomainWall { lambda, .. }) => *lambda = value,
        (Param::G, _) => c.atom.g = value,
        (Param::Omega0, _) => c.atom.omega0 = value,
        (Param::Phase, _) if c.atom.num_points() > 1 => {
            let mut pts = c.atom.points().to_vec();
            pts[1] = CouplingPoint::new(pts[1].n, pts[1].m, value);
            c.atom = GiantAtomSpec::new(c.atom.omega0, c.atom.g, pts).ok()?;
        }
        _ => return None,
    }
    Some(())
}

fn check_run(run: &RunSettings) -> Result<(), CliError> {
    if !(run.t_final > 0.0) || !(run.dt_report > 0.0) || !(run.snapshot_threshold > 0.0) || !(run.tol > 0.0) {
        return Err(CliError::Config(format!(
            "run settings need positive t_final, dt_report, snapshot_threshold and tol, got {run:?}"
        )));
    }
    Ok(())
}

/// Physical parameters that flags and sweeps can set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Param {
    Delta,
    Delta0,
    Lambda,
    G,
    Omega0,
    Phase,
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Delta => "delta",
            Param::Delta0 => "delta0",
            Param::Lambda => "lambda",
            Param::G => "g",
            Param::Omega0 => "omega0",
            Param::Phase => "phase",
        })
    }
}

/// Number or multiple of pi: `1.2`, `pi`, `-pi/3`, `2pi/3`, `2*pi/3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_angle(s).map(Angle)
    }
}

pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t: String = s.trim().to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot read '{s}' as a number or a multiple of pi (e.g. pi/3, -2pi/3)");
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coeff = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let den = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(coeff * PI / den)
}

/// Rewrites `phase = "<angle>"` entries as numbers, keeping line numbers
/// intact for parser diagnostics.
fn substitute_phase_literals(text: &str) -> Result<String, CliError> {
    let mut out = String::with_capacity(text.len());
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        if line.trim_start().starts_with('#') {
            out.push_str(line);
            continue;
        }
        let mut rest = line;
        while let Some(pos) = rest.find("phase") {
            let key_start = pos == 0 || !rest[..pos].ends_with(|c: char| c.is_alphanumeric() || c == '_');
            let after = &rest[pos + 5..];
            let value = after.trim_start().strip_prefix('=').map(str::trim_start);
            match value.and_then(|v| v.strip_prefix('"')).filter(|_| key_start) {
                Some(lit) => {
                    let Some(close) = lit.find('"') else {
                        break;
                    };
                    let x = parse_angle(&lit[..close])
                        .map_err(|e| CliError::Config(format!("line {}: phase: {e}", lineno + 1)))?;
                    let consumed = rest.len() - lit.len() - 1;
                    out.push_str(&rest[..consumed]);
                    out.push_str(&format!("{x:?}"));
                    rest = &lit[close + 1..];
                }
                None => {
                    out.push_str(&rest[..pos + 5]);
                    rest = after;
                }
            }
        }
        out.push_str(rest);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_literals() {
        let close = |s: &str, v: f64| assert!((parse_angle(s).unwrap() - v).abs() < 1e-15, "{s}");
        close("pi/3", PI / 3.0);
        close("-pi/3", -PI / 3.0);
        close("2pi/3", 2.0 * PI / 3.0);
        close(" 2 * PI / 3 ", 2.0 * PI / 3.0);
        close("pi", PI);
        close("0.25", 0.25);
        close("-1e-1", -0.1);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("tau").is_err());
        assert!(parse_angle("pi3").is_err());
        assert!(parse_angle("nan").is_err());
        assert!(parse_angle("inf").is_err());
    }

    #[test]
    fn toml_roundtrip_with_phase_strings() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            scenario = "chiral"
            [run]
            t_final = 50.0
            [chiral]
            size = 101
            phase = "-pi/3"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::Chiral);
        assert_eq!(cfg.chiral.size, 101);
        assert!((cfg.chiral.phase.unwrap() + PI / 3.0).abs() < 1e-15);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn phase_literals_are_rewritten_in_place() {
        let text = "# phase = \"x\"\nphase = \"pi\"\npts = [{ n = 0, phase = \"-pi/3\" }]\nemphase = \"pi\"\n";
        let out = substitute_phase_literals(text).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "# phase = \"x\"");
        assert_eq!(lines[1], format!("phase = {:?}", PI));
        assert_eq!(lines[2], format!("pts = [{{ n = 0, phase = {:?} }}]", -PI / 3.0));
        assert_eq!(lines[3], "emphase = \"pi\"");
    }

    #[test]
    fn resolve_applies_run_table_and_full_scale() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Bulk);
        cfg.run.t_final = Some(42.0);
        cfg.run.full_scale = true;
        cfg.resolve();
        assert_eq!(cfg.bulk.size, 331);
        assert_eq!(cfg.chiral.size, 551);
        assert_eq!(cfg.bulk.run.t_final, 42.0);
        let once = cfg.clone();
        cfg.resolve();
        assert_eq!(cfg, once);
    }

    #[test]
    fn unknown_fields_and_bad_phases_are_reported() {
        let err = ScenarioConfig::from_toml("scenario = \"bands\"\n[bands]\ndelt = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("delt"), "{err}");
        let err = ScenarioConfig::from_toml("scenario = \"bulk\"\n[bulk]\nphase = \"pie\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3") && err.to_string().contains("pie"), "{err}");
        assert!(ScenarioConfig::from_toml("scenario = \"warp\"").is_err());
    }

    #[test]
    fn parameters_map_to_the_active_scenario() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Chiral);
        cfg.set_param(Param::G, 0.2).unwrap();
        cfg.set_param(Param::Phase, 1.0).unwrap();
        assert_eq!(cfg.chiral.g, 0.2);
        assert_eq!(cfg.chiral.phase, Some(1.0));
        assert!(cfg.set_param(Param::Delta, 0.1).is_err());
        let mut bands = ScenarioConfig::new(ScenarioKind::Bands);
        assert!(bands.set_param(Param::G, 0.1).is_err());
    }

    #[test]
    fn custom_section_is_required_and_checked() {
        let cfg = ScenarioConfig::new(ScenarioKind::Custom);
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig::from_toml(
            r#"
            scenario = "custom"
            [custom.lattice]
            n1 = 8
            ny = 8
            boundary = ["periodic", "periodic"]
            detuning = { kind = "uniform", delta = 0.5 }
            [custom.atom]
            omega0 = 0.7
            g = 0.2
            points = [{ n = 0, m = 0, phase = 0.0 }, { n = 0, m = 9, phase = "pi/3" }]
            "#,
        )
        .unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("outside"));
    }
}
