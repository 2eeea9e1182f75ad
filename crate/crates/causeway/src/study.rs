//! Study descriptors: which files make up a study, how the data was
//! collected, how raw columns are coded and which level of the outcome
//! counts as the event.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use causeway_core::synth::{sample_study, ScmSpec, SynthError};
use causeway_core::DataTable;
use serde::{Deserialize, Serialize};

use crate::table::Binning;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// What one data row stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    /// One row per participant and scenario; scenario factors are set by
    /// design.
    #[default]
    ParticipantScenario,
    /// One row per participant, everything observed.
    Participant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCoding {
    pub variable: String,
    /// Level counted as the event when estimating effects.
    pub event: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study {
    pub name: String,
    /// Paths are relative to the descriptor file.
    pub graph: PathBuf,
    #[serde(default)]
    pub pilot_graph: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub unit: Unit,
    pub participants: usize,
    pub outcome: OutcomeCoding,
    #[serde(default)]
    pub treatments: Vec<String>,
    #[serde(default)]
    pub binning: Vec<Binning>,
    /// Design factor levels, one table per scenario.
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<BTreeMap<String, String>>,
}

impl Study {
    pub fn parse(text: &str, origin: &Path) -> Result<Study, StudyError> {
        toml::from_str(text).map_err(|source| StudyError::Toml {
            path: origin.to_path_buf(),
            source,
        })
    }

    /// Loads a descriptor and makes its file references absolute.
    pub fn load(path: &Path) -> Result<Study, StudyError> {
        let text = std::fs::read_to_string(path).map_err(|source| StudyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut study = Study::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        study.graph = base.join(&study.graph);
        study.pilot_graph = study.pilot_graph.map(|p| base.join(p));
        study.model = study.model.map(|p| base.join(p));
        Ok(study)
    }

    /// Samples data with this study's layout from `m`.
    pub fn simulate(&self, m: &ScmSpec, seed: u64) -> Result<DataTable, StudyError> {
        Ok(match self.unit {
            Unit::Participant => m.sample(self.participants, seed)?,
            Unit::ParticipantScenario => {
                let design: Vec<Vec<(&str, &str)>> = self
                    .scenarios
                    .iter()
                    .map(|s| s.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect())
                    .collect();
                sample_study(m, self.participants, &design, seed)?
            }
        })
    }
}
