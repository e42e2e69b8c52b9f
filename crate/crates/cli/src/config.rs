use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use obslab::{
    check_thick, gauge_shift, gen_periodic_thickset, gen_random_thickset, make_grid, random_potential_samples, Grid,
    LabError, Potential, Result, ThickSet,
};

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub thickset: ThicksetConfig,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Constant,
    Sine,
    Random,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    pub value: Option<f64>,
    pub offset: Option<f64>,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
    pub phase: Option<f64>,
    pub modes: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default)]
    pub params: PotentialParams,
    /// Explicit gauge shift; the smallest shift giving `V >= 1` when absent.
    pub gauge_theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThicksetKind {
    Periodic,
    Random,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThicksetConfig {
    pub kind: ThicksetKind,
    #[serde(rename = "L")]
    pub l: f64,
    pub zeta: f64,
    pub seed: Option<u64>,
    pub intervals: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Thickcheck,
    ObsSweep,
    SpectralSweep,
    HeatSweep,
    Highfreq,
    Hum,
    Fbi,
    Lemmas,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Spectrum,
        ExperimentKind::Thickcheck,
        ExperimentKind::ObsSweep,
        ExperimentKind::SpectralSweep,
        ExperimentKind::HeatSweep,
        ExperimentKind::Highfreq,
        ExperimentKind::Hum,
        ExperimentKind::Fbi,
        ExperimentKind::Lemmas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Thickcheck => "thickcheck",
            ExperimentKind::ObsSweep => "obs-sweep",
            ExperimentKind::SpectralSweep => "spectral-sweep",
            ExperimentKind::HeatSweep => "heat-sweep",
            ExperimentKind::Highfreq => "highfreq",
            ExperimentKind::Hum => "hum",
            ExperimentKind::Fbi => "fbi",
            ExperimentKind::Lemmas => "lemmas",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "eigenvalues and modes of H = -d^2/dx^2 + V on the Dirichlet box",
            ExperimentKind::Thickcheck => "exact (L, zeta)-thickness certificate of the control set",
            ExperimentKind::ObsSweep => "Schrodinger observability constant over T, fit log C = a + b/T^2",
            ExperimentKind::SpectralSweep => "spectral inequality constant over mu, fit log C = a + b mu",
            ExperimentKind::HeatSweep => "heat observability constant over T, fit log C = a + b/T, telescoped bound",
            ExperimentKind::Highfreq => "high-frequency observability (C/T) over T above a cutoff mu",
            ExperimentKind::Hum => "HUM exact control between random states, with cost sweep and time-stepping check",
            ExperimentKind::Fbi => "FBI intertwining residual and Gaussian reproduction error",
            ExperimentKind::Lemmas => "barrier, cos^2, representation and polynomial checks over seeds",
        }
    }

    pub fn anchor(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "operator",
            ExperimentKind::Thickcheck => "thick sets",
            ExperimentKind::ObsSweep => "cost law C e^{C/T^2}",
            ExperimentKind::SpectralSweep => "spectral inequality C e^{3 mu}",
            ExperimentKind::HeatSweep => "heat observability C e^{C/T}",
            ExperimentKind::Highfreq => "high-frequency observability",
            ExperimentKind::Hum => "exact controllability",
            ExperimentKind::Fbi => "heat/Schrodinger intertwining",
            ExperimentKind::Lemmas => "auxiliary inequalities",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    #[serde(rename = "T")]
    pub t: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_cg")]
    pub cg: f64,
    #[serde(default = "default_residual")]
    pub residual: f64,
}

fn default_cg() -> f64 {
    1e-8
}

fn default_residual() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cg: default_cg(),
            residual: default_residual(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    #[serde(default)]
    pub sweeps: Sweeps,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Control horizon for `hum` and `fbi`.
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Frequency cutoff for `highfreq`.
    pub mu: Option<f64>,
    /// Telescoping depth for `heat-sweep`.
    pub depth: Option<usize>,
    /// Time steps of the independent simulation in `hum`.
    pub steps: Option<usize>,
    /// CG iteration cap for `hum`.
    pub max_iter: Option<usize>,
    /// Randomized trials per seed for `lemmas`.
    pub trials: Option<usize>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("obslab-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Parameter(msg.into()))
}

fn positive_list(name: &str, xs: &Option<Vec<f64>>) -> Result<()> {
    if let Some(xs) = xs {
        if xs.is_empty() || xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return invalid(format!("sweep `{name}` must be a non-empty list of positive numbers"));
        }
    }
    Ok(())
}

/// Grid, potential and control set built from a validated config.
pub struct Setup {
    pub grid: Grid,
    pub potential: Potential,
    pub thickset: ThickSet,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)?;
        Ok((cfg, bytes))
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let tol = &self.experiment.tolerances;
        if !(tol.cg > 0.0 && tol.residual > 0.0) {
            return invalid("all tolerances must be positive");
        }
        let sw = &self.experiment.sweeps;
        positive_list("T", &sw.t)?;
        positive_list("mu", &sw.mu)?;
        positive_list("h", &sw.h)?;
        if let Some(taus) = &sw.tau {
            if taus.is_empty() || taus.iter().any(|x| !x.is_finite()) {
                return invalid("sweep `tau` must be a non-empty list of finite numbers");
            }
        }
        for (name, v) in [("T", self.experiment.t), ("mu", self.experiment.mu)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("`{name}` must be positive"));
                }
            }
        }
        if self.experiment.seeds.is_empty() {
            return invalid("at least one seed is required");
        }
        if self.output.formats.is_empty() {
            return invalid("at least one output format is required");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Setup> {
        self.validate()?;
        let grid = make_grid(self.grid.x_min, self.grid.x_max, self.grid.n)?;
        let potential = self.build_potential(&grid)?;
        let thickset = self.build_thickset(&grid)?;
        Ok(Setup {
            grid,
            potential,
            thickset,
        })
    }

    fn build_potential(&self, grid: &Grid) -> Result<Potential> {
        let p = &self.potential.params;
        let raw: Vec<f64> = match self.potential.kind {
            PotentialKind::Constant => {
                let value = p
                    .value
                    .ok_or_else(|| LabError::Parameter("constant potential needs params.value".into()))?;
                vec![value; grid.n()]
            }
            PotentialKind::Sine => {
                let (off, amp) = (p.offset.unwrap_or(0.0), p.amplitude.unwrap_or(1.0));
                let (freq, phase) = (p.frequency.unwrap_or(1.0), p.phase.unwrap_or(0.0));
                grid.nodes()
                    .into_iter()
                    .map(|x| off + amp * (freq * x + phase).sin())
                    .collect()
            }
            PotentialKind::Random => {
                let seed = p.seed.unwrap_or(self.experiment.seeds[0]);
                let mut raw = random_potential_samples(grid, p.amplitude.unwrap_or(1.0), p.modes.unwrap_or(6), seed)?;
                let off = p.offset.unwrap_or(0.0);
                raw.iter_mut().for_each(|v| *v += off);
                raw
            }
        };
        let theta = match self.potential.gauge_theta {
            Some(theta) => theta,
            None => (1.0 - raw.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0),
        };
        gauge_shift(&raw, theta)
    }

    fn build_thickset(&self, grid: &Grid) -> Result<ThickSet> {
        let t = &self.thickset;
        match t.kind {
            ThicksetKind::Periodic => gen_periodic_thickset(t.l, t.zeta * t.l, grid),
            ThicksetKind::Random => gen_random_thickset(t.l, t.zeta, t.seed.unwrap_or(self.experiment.seeds[0]), grid),
            ThicksetKind::Explicit => {
                let intervals = t
                    .intervals
                    .as_ref()
                    .ok_or_else(|| LabError::Parameter("explicit thick set needs `intervals`".into()))?;
                check_thick(intervals, t.l, t.zeta, grid)
            }
        }
    }
}
