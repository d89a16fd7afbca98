use std::path::Path;

use serde::{Deserialize, Serialize};

use qdt_core::bounds::{bell_observable, second_ion_bright_observable};
use qdt_core::estimator::SolverOptions;
use qdt_core::iontrap::{build_two_ion_model, ExperimentConfig};
use qdt_core::qcore::{LabelledMatrix, Observable};
use qdt_core::uncertainty::BootstrapOptions;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Target number of bins `G`.
    pub bins: usize,
    pub training_fraction: f64,
    pub bootstrap: BootstrapOptions,
    /// Built-in names (`bell`, `second-ion-bright`) or paths to JSON
    /// `{label, matrix}` files.
    pub observables: Vec<String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bins: 8,
            training_fraction: 0.1,
            bootstrap: BootstrapOptions::default(),
            observables: vec!["bell".into(), "second-ion-bright".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

impl StudyConfig {
    /// The two-ion study with every default filled in.
    pub fn two_ion() -> Self {
        Self { experiment: build_two_ion_model(), solver: SolverOptions::default(), analysis: AnalysisOptions::default() }
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let a = &self.analysis;
        if a.bins == 0 || a.bins > self.experiment.max_count {
            return Err(CliError::Config(format!("analysis.bins = {} must be in 1..={}", a.bins, self.experiment.max_count)));
        }
        if !(a.training_fraction > 0.0 && a.training_fraction < 1.0) {
            return Err(CliError::Config(format!("analysis.training_fraction = {} must be in (0, 1)", a.training_fraction)));
        }
        if !(a.bootstrap.level > 0.0 && a.bootstrap.level < 1.0) {
            return Err(CliError::Config(format!("analysis.bootstrap.level = {} must be in (0, 1)", a.bootstrap.level)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: StudyConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok((Self::from_json(&text)?, text))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Resolves a built-in observable name, or reads a `{label, matrix}` file.
pub fn resolve_observable(spec: &str, base: Option<&Path>) -> Result<Observable> {
    match spec {
        "bell" => Ok(bell_observable()),
        "second-ion-bright" => Ok(second_ion_bright_observable()),
        path => {
            let p = Path::new(path);
            let p = match base {
                Some(b) if p.is_relative() && !p.exists() => b.join(p),
                _ => p.to_path_buf(),
            };
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let m: LabelledMatrix = serde_path_to_error::deserialize(de)
                .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", p.display(), e.path(), e.inner())))?;
            Observable::try_from(m).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}
