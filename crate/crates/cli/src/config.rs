//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use potlab::constructions::CantorFamily;
use potlab::diagnostics::{CounterexampleKind, DiffMode};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Capacity,
    Equilibrium,
    Cantor,
    Diagnose,
    PvSweep,
    OpnormSweep,
    Lemma8,
    Counterexample,
    SecondOrder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Capacity => "capacity",
            Command::Equilibrium => "equilibrium",
            Command::Cantor => "cantor",
            Command::Diagnose => "diagnose",
            Command::PvSweep => "pv-sweep",
            Command::OpnormSweep => "opnorm-sweep",
            Command::Lemma8 => "lemma8",
            Command::Counterexample => "counterexample",
            Command::SecondOrder => "second-order",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Seeds every random choice of the run.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub measure: Option<MeasureSource>,
    pub ladder: Option<LadderConfig>,
    pub points: Option<PointsConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub capacity: Option<CapacitySection>,
    pub cantor: Option<CantorSection>,
    pub diagnose: Option<DiagnoseSection>,
    pub opnorm: Option<OpnormSection>,
    pub lemma8: Option<Lemma8Section>,
    pub counterexample: Option<CounterexampleSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    /// JSON measure file, relative to the config file.
    File { path: PathBuf },
    Atoms {
        coords: Vec<Vec<f64>>,
        weights: Vec<f64>,
        #[serde(default)]
        resolution: f64,
    },
    Sphere {
        centre: Vec<f64>,
        radius: f64,
        mass: f64,
        count: usize,
    },
    SolidBall {
        centre: Vec<f64>,
        radius: f64,
        h: f64,
        mass: f64,
    },
    /// Unit-mass cells along a planar segment.
    Segment {
        start: [f64; 2],
        end: [f64; 2],
        cells: usize,
    },
    /// Unit-mass cells filling an axis-aligned square.
    Square {
        centre: [f64; 2],
        side: f64,
        cells_per_side: usize,
    },
    Cantor {
        family: CantorFamily,
        generation: usize,
        /// Places the planar set in the `z = 0` plane of space.
        #[serde(default)]
        lift_to_3d: bool,
    },
    Block {
        centre: [f64; 2],
        radius: f64,
        circle_points: usize,
    },
    Counterexample {
        construction: CounterexampleKind,
        family: CantorFamily,
        levels: Vec<(usize, usize)>,
        #[serde(default = "default_circle_points")]
        circle_points: usize,
    },
    Calderon {
        levels: Vec<usize>,
        #[serde(default = "default_circle_points")]
        circle_points: usize,
    },
}

fn default_circle_points() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LadderConfig {
    Geometric { start: f64, ratio: f64, rungs: usize },
    Dyadic { start: f64 },
    Explicit { scales: Vec<f64> },
    /// One truncation per generation of a Cantor measure source.
    Generations { from: usize, to: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointsConfig {
    Explicit { coords: Vec<Vec<f64>> },
    /// Atoms of the measure drawn uniformly with the run seed.
    SampleAtoms { count: usize },
    /// Uniform random points on a sphere (a circle in the plane).
    OnSphere {
        centre: Vec<f64>,
        radius: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative duality gap of the equilibrium solver.
    pub solver: f64,
    pub pv_rel: f64,
    pub pv_floor: f64,
    pub pv_window: usize,
    pub pv_divergence: f64,
    /// Relative Rayleigh-quotient change stopping the power iteration.
    pub opnorm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let pv = potlab::potentials::PvTolerance::default();
        Self {
            solver: potlab::capacity::SolverOptions::default().tol,
            pv_rel: pv.rel,
            pv_floor: pv.floor,
            pv_window: pv.window,
            pv_divergence: pv.divergence_factor,
            opnorm: potlab::capacity::OpNormOptions::default().tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub centre: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_cells_per_radius")]
    pub cells_per_radius: f64,
}

fn default_cells_per_radius() -> f64 {
    32.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSection {
    pub family: CantorFamily,
    pub generation: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub mode: DiffMode,
    pub cells_per_radius: Option<f64>,
    pub eps_min: Option<f64>,
    /// Adds the density and principal-value signals (`d >= 3`, capacity mode).
    #[serde(default)]
    pub characterize: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpnormSection {
    pub family: CantorFamily,
    pub generations: Vec<usize>,
    /// Truncation as a multiple of the side `σ_n` of the last generation.
    #[serde(default = "default_eps_factor")]
    pub eps_factor: f64,
    #[serde(default = "default_opnorm_iterations")]
    pub max_iter: usize,
}

fn default_eps_factor() -> f64 {
    0.5
}

fn default_opnorm_iterations() -> usize {
    potlab::capacity::OpNormOptions::default().max_iter
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma8Section {
    pub discs: Vec<DiscConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    pub centre: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    pub construction: CounterexampleKind,
    pub family: CantorFamily,
    pub levels: Vec<(usize, usize)>,
    pub ks: Vec<usize>,
    /// Address of the evaluation point; drawn with the run seed when absent.
    pub digits: Option<Vec<u8>>,
    #[serde(default = "default_cells_per_radius")]
    pub cells_per_radius: f64,
    #[serde(default = "default_zoom_doublings")]
    pub zoom_doublings: usize,
}

fn default_zoom_doublings() -> usize {
    potlab::diagnostics::ProbeOptions::default().zoom_doublings
}

/// A parsed config with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| CliError::config("config is not UTF-8"))?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, base_dir, hash };
    check(&loaded)?;
    Ok(loaded)
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn require<'a, T>(section: &'a Option<T>, name: &str, command: Command) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::config(format!("command {} needs a [{name}] section", command.name())))
}

/// Static checks: required sections, positive tolerances, existing paths.
fn check(loaded: &LoadedConfig) -> Result<(), CliError> {
    let c = &loaded.config;
    let t = &c.tolerances;
    for (name, v) in [
        ("tolerances.solver", t.solver),
        ("tolerances.pv_rel", t.pv_rel),
        ("tolerances.pv_floor", t.pv_floor),
        ("tolerances.pv_divergence", t.pv_divergence),
        ("tolerances.opnorm", t.opnorm),
    ] {
        positive(name, v)?;
    }
    if t.pv_window < 2 {
        return Err(CliError::config("tolerances.pv_window must be at least 2"));
    }
    if let Some(MeasureSource::File { path }) = &c.measure {
        let full = loaded.resolve(path);
        if !full.is_file() {
            return Err(CliError::config(format!("measure file {} does not exist", full.display())));
        }
    }
    match c.command {
        Command::Capacity => {
            let s = require(&c.capacity, "capacity", c.command)?;
            positive("capacity.radius", s.radius)?;
            positive("capacity.cells_per_radius", s.cells_per_radius)?;
        }
        Command::Equilibrium => {
            require(&c.measure, "measure", c.command)?;
        }
        Command::Cantor => {
            require(&c.cantor, "cantor", c.command)?;
        }
        Command::Diagnose | Command::SecondOrder | Command::PvSweep => {
            require(&c.measure, "measure", c.command)?;
            require(&c.ladder, "ladder", c.command)?;
            require(&c.points, "points", c.command)?;
            if c.command != Command::PvSweep {
                let d = require(&c.diagnose, "diagnose", c.command)?;
                let second = matches!(d.mode, DiffMode::SecondOrder | DiffMode::SecondOrderWeak);
                if second != (c.command == Command::SecondOrder) {
                    return Err(CliError::config(format!(
                        "diagnose.mode {:?} does not belong to command {}",
                        d.mode,
                        c.command.name()
                    )));
                }
                if let Some(v) = d.cells_per_radius {
                    positive("diagnose.cells_per_radius", v)?;
                }
                if let Some(v) = d.eps_min {
                    positive("diagnose.eps_min", v)?;
                }
            }
        }
        Command::OpnormSweep => {
            let s = require(&c.opnorm, "opnorm", c.command)?;
            if s.generations.is_empty() {
                return Err(CliError::config("opnorm.generations is empty"));
            }
            positive("opnorm.eps_factor", s.eps_factor)?;
        }
        Command::Lemma8 => {
            let s = require(&c.lemma8, "lemma8", c.command)?;
            if s.discs.is_empty() {
                return Err(CliError::config("lemma8.discs is empty"));
            }
        }
        Command::Counterexample => {
            let s = require(&c.counterexample, "counterexample", c.command)?;
            if s.ks.is_empty() || s.levels.is_empty() {
                return Err(CliError::config("counterexample needs levels and ks"));
            }
            positive("counterexample.cells_per_radius", s.cells_per_radius)?;
            if let Some(d) = &s.digits {
                if d.iter().any(|&x| x > 3) {
                    return Err(CliError::config("counterexample.digits must lie in 0..=3"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, toml::de::Error> {
        toml::from_str(text)
    }

    #[test]
    fn seed_is_required() {
        assert!(parse("command = \"lemma8\"\n").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("command = \"lemma8\"\nseed = 1\ncolour = 3\n").is_err());
    }

    #[test]
    fn tagged_sections_parse() {
        let c = parse(
            r#"
command = "pv-sweep"
seed = 3
[measure]
kind = "cantor"
family = { family = "gauge", gauge = { kind = "log_power", beta = 0.5 } }
generation = 4
[ladder]
kind = "generations"
from = 1
to = 4
[points]
kind = "sample_atoms"
count = 5
"#,
        )
        .unwrap();
        assert_eq!(c.command, Command::PvSweep);
        assert!(matches!(c.ladder, Some(LadderConfig::Generations { from: 1, to: 4 })));
        assert!(matches!(c.measure, Some(MeasureSource::Cantor { generation: 4, lift_to_3d: false, .. })));
    }
}
