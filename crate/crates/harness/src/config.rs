//! Experiment configuration: a sectioned key-value file (TOML).
//!
//! ```toml
//! [medium]
//! lambda = 2.0
//! mu = 1.0
//!
//! [source]
//! m = 2.25
//! phi = { kind = "bump", center = [0.0, 0.0], radii = [0.17, 0.17], amplitude = 1.0 }
//!
//! [perturbation]
//! kind = "bump"
//! center = [0.05, -0.03]
//! radii = [0.06, 0.06]
//! entries = [20.0, 6.0, 16.0]
//!
//! [grid]
//! side = 1.0
//!
//! [frequency]
//! q = 64.0
//! nodes = 128
//!
//! [measurement]
//! center = [0.0, 0.0]
//! radius = 1.0
//! count = 16
//!
//! [run]
//! seed = 1
//! mode = "full"
//! output = "out"
//! ```
//!
//! Floating-point keys need a decimal point (`2.0`, not `2`).

use std::path::{Path, PathBuf};

use navier_core::estimator::{Experiment, FieldMode, FrequencyGrid};
use navier_core::lseq::{required_grid_size, DensityPerturbation, MeasurementSet};
use navier_core::randfield::{check_order, SourceModel};
use navier_core::{Bump, ElasticMedium, SourceGrid};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::gridio::read_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub lambda: f64,
    pub mu: f64,
}

/// `φ` as a built-in bump or a one-channel grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiSpec {
    Bump {
        center: [f64; 2],
        radii: [f64; 2],
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub m: f64,
    pub phi: PhiSpec,
}

/// `M` as zero, a bump times fixed entries `(M11, M12, M22)`, or a three-channel grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PerturbationSpec {
    Zero,
    Bump {
        center: [f64; 2],
        radii: [f64; 2],
        entries: [f64; 3],
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub side: f64,
    /// Cells per side; derived from `Q` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySection {
    pub q: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    FrequencyGrid::DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub center: [f64; 2],
    pub radius: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    BornOnly,
    U0Only,
}

impl From<Mode> for FieldMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => FieldMode::Full,
            Mode::BornOnly => FieldMode::BornOnly,
            Mode::U0Only => FieldMode::U0Only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub mode: Mode,
    pub output: PathBuf,
    /// Seeds in the ensemble runs (0 skips them).
    #[serde(default)]
    pub ensemble: usize,
    /// Cells per side of the recovery grid.
    #[serde(default = "default_recovery_n")]
    pub recovery_n: usize,
    /// Fixed regularisation parameter; L-curve choice when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<f64>,
}

fn default_recovery_n() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub medium: MediumSection,
    pub source: SourceSection,
    pub perturbation: PerturbationSpec,
    pub grid: GridSection,
    pub frequency: FrequencySection,
    pub measurement: MeasurementSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    /// The standard desk-scale configuration.
    pub fn standard() -> Self {
        Self {
            medium: MediumSection {
                lambda: 2.0,
                mu: 1.0,
            },
            source: SourceSection {
                m: 2.25,
                phi: PhiSpec::Bump {
                    center: [0.0, 0.0],
                    radii: [0.17, 0.17],
                    amplitude: 1.0,
                },
            },
            perturbation: PerturbationSpec::Bump {
                center: [0.05, -0.03],
                radii: [0.06, 0.06],
                entries: [20.0, 6.0, 16.0],
            },
            grid: GridSection { side: 1.0, n: None },
            frequency: FrequencySection {
                q: 64.0,
                nodes: 128,
            },
            measurement: MeasurementSection {
                center: [0.0, 0.0],
                radius: 1.0,
                count: 16,
            },
            run: RunSection {
                seed: 1,
                mode: Mode::Full,
                output: PathBuf::from("out"),
                ensemble: 20,
                recovery_n: 16,
                reg: None,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.check_scalars()?;
        Ok(cfg)
    }

    /// Reads and checks a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let PhiSpec::File { path } = &mut self.source.phi {
            fix(path);
        }
        if let PerturbationSpec::File { path } = &mut self.perturbation {
            fix(path);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_scalars(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if let Err(e) = check_order(self.source.m) {
            return bad(format!("[source] m: {e}"));
        }
        if let Err(e) = ElasticMedium::new(self.medium.lambda, self.medium.mu) {
            return bad(format!("[medium]: {e}"));
        }
        if !(self.grid.side > 0.0 && self.grid.side.is_finite()) {
            return bad(format!(
                "[grid] side must be positive, got {}",
                self.grid.side
            ));
        }
        if let Err(e) = FrequencyGrid::new(self.frequency.q, self.frequency.nodes) {
            return bad(format!("[frequency]: {e}"));
        }
        if self.measurement.count < 3 {
            return bad(format!(
                "[measurement] count must be at least 3, got {}",
                self.measurement.count
            ));
        }
        if self.run.recovery_n < 2 {
            return bad(format!(
                "[run] recovery_n must be at least 2, got {}",
                self.run.recovery_n
            ));
        }
        if let Some(r) = self.run.reg {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("[run] reg must be nonnegative, got {r}"));
            }
        }
        Ok(())
    }

    pub fn medium(&self) -> ElasticMedium {
        ElasticMedium::new(self.medium.lambda, self.medium.mu).expect("checked at load")
    }

    /// The source grid: the configured `n`, or the smallest admissible size for `Q`.
    pub fn source_grid(&self) -> Result<SourceGrid, HarnessError> {
        let n = match self.grid.n {
            Some(n) => n,
            None => required_grid_size(self.grid.side, &self.medium(), self.frequency.q)
                .map_err(HarnessError::config)?,
        };
        SourceGrid::centered(n, self.grid.side).map_err(HarnessError::config)
    }

    pub fn phi(&self, grid: &SourceGrid) -> Result<Vec<f64>, HarnessError> {
        match &self.source.phi {
            PhiSpec::Bump {
                center,
                radii,
                amplitude,
            } => {
                let b = Bump::new(*center, *radii, *amplitude).map_err(HarnessError::config)?;
                Ok(grid.sample(|p| b.eval(p)))
            }
            PhiSpec::File { path } => {
                let g = read_grid(path)?;
                g.expect_shape(grid, 1, path)?;
                Ok(g.channels.into_iter().next().expect("one channel"))
            }
        }
    }

    /// `M`; in u0-only mode no perturbation is loaded.
    pub fn perturbation(&self, grid: &SourceGrid) -> Result<DensityPerturbation, HarnessError> {
        if self.run.mode == Mode::U0Only {
            return Ok(DensityPerturbation::zeros(grid));
        }
        match &self.perturbation {
            PerturbationSpec::Zero => Ok(DensityPerturbation::zeros(grid)),
            PerturbationSpec::Bump {
                center,
                radii,
                entries,
            } => {
                let b = Bump::new(*center, *radii, 1.0).map_err(HarnessError::config)?;
                DensityPerturbation::from_bump(grid, &b, *entries).map_err(HarnessError::config)
            }
            PerturbationSpec::File { path } => {
                let g = read_grid(path)?;
                g.expect_shape(grid, 3, path)?;
                let mut ch = g.channels.into_iter();
                let (a, b, c) = (ch.next().unwrap(), ch.next().unwrap(), ch.next().unwrap());
                DensityPerturbation::new(a, b, c, grid).map_err(HarnessError::config)
            }
        }
    }

    pub fn points(&self, grid: &SourceGrid) -> Result<MeasurementSet, HarnessError> {
        let s = &self.measurement;
        MeasurementSet::ring(s.center, s.radius, s.count, grid).map_err(HarnessError::config)
    }

    /// Validates everything and assembles the experiment for source seed `seed`.
    pub fn experiment(&self, seed: u64) -> Result<Experiment, HarnessError> {
        let grid = self.source_grid()?;
        let model = SourceModel::new(self.source.m, self.phi(&grid)?, &grid, seed)
            .map_err(HarnessError::config)?;
        let freq = FrequencyGrid::new(self.frequency.q, self.frequency.nodes)
            .map_err(HarnessError::config)?;
        Experiment::new(
            self.medium(),
            grid,
            model,
            self.perturbation(&grid)?,
            self.points(&grid)?,
            freq,
        )
        .map_err(HarnessError::config)
    }
}
