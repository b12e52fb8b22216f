//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tslab_core::anomaly::{DetectorSpec, ForecastResidualConfig};
use tslab_core::automl::{AutoEtsConfig, AutoSarimaConfig};
use tslab_core::eval::{InferenceMode, RetrainSchedule, ThresholdMode};
use tslab_core::forecast::ets::EtsSpec;
use tslab_core::forecast::tree::TreeConfig;
use tslab_core::forecast::{ForecasterConfig, ForecasterSpec};
use tslab_core::post::ThresholdRule;

use crate::dataset::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Forecast,
    Anomaly,
}

impl Task {
    /// Metric reported first and used for headline numbers.
    pub fn primary_metric(&self) -> &'static str {
        match self {
            Task::Forecast => "smape",
            Task::Anomaly => "rpa_f1",
        }
    }
}

/// A detector with an optional display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorEntry {
    #[serde(flatten)]
    pub spec: DetectorSpec,
    #[serde(default)]
    pub name: Option<String>,
}

impl DetectorEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.label())
    }
}

/// Manifest given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Inline(DatasetManifest),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: DatasetRef,
    /// Model specs for the task; the default registry when empty.
    #[serde(default)]
    pub models: Vec<serde_json::Value>,
    #[serde(default)]
    pub schedule: RetrainSchedule,
    #[serde(default)]
    pub inference: InferenceMode,
    #[serde(default)]
    pub threshold: ThresholdRule,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Skip SVG output.
    #[serde(default)]
    pub no_plots: bool,
}

/// A config with paths resolved and models parsed for its task.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub manifest: DatasetManifest,
    /// Directory that relative dataset roots are resolved against.
    pub base: PathBuf,
    pub models: Models,
}

#[derive(Debug, Clone)]
pub enum Models {
    Forecast(Vec<ForecasterConfig>),
    Anomaly(Vec<DetectorEntry>),
}

impl Models {
    pub fn labels(&self) -> Vec<String> {
        match self {
            Models::Forecast(v) => v.iter().map(|m| m.label()).collect(),
            Models::Anomaly(v) => v.iter().map(|m| m.label()).collect(),
        }
    }
}

pub fn default_forecasters() -> Vec<ForecasterConfig> {
    let tree = TreeConfig::default();
    let specs = vec![
        ForecasterSpec::Arima {
            order: [1, 0, 0],
            seasonal_order: None,
            intercept: true,
        },
        ForecasterSpec::AutoSarima(AutoSarimaConfig::default()),
        ForecasterSpec::Ets(EtsSpec::default()),
        ForecasterSpec::AutoEts(AutoEtsConfig::default()),
        ForecasterSpec::Var { max_order: 5 },
        ForecasterSpec::Gb(tree),
        ForecasterSpec::Rf(tree),
        ForecasterSpec::Ensemble {
            members: vec![
                ForecasterConfig::new(ForecasterSpec::AutoEts(AutoEtsConfig::default())),
                ForecasterConfig::new(ForecasterSpec::AutoSarima(AutoSarimaConfig::default())),
            ],
            combiner: Default::default(),
        },
    ];
    specs.into_iter().map(ForecasterConfig::new).collect()
}

pub fn default_detectors() -> Vec<DetectorEntry> {
    let residual = || DetectorSpec::ForecastResidual(ForecastResidualConfig::default());
    let specs = vec![
        DetectorSpec::Windstats(Default::default()),
        DetectorSpec::Zms(Default::default()),
        DetectorSpec::Sr(Default::default()),
        DetectorSpec::Iforest(Default::default()),
        residual(),
        DetectorSpec::Ensemble {
            members: vec![residual(), DetectorSpec::Iforest(Default::default()), DetectorSpec::Zms(Default::default())],
        },
    ];
    specs.into_iter().map(|spec| DetectorEntry { spec, name: None }).collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Resolved> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.resolve(&base)
    }

    /// Parses models, loads a referenced manifest and checks task consistency.
    pub fn resolve(self, base: &Path) -> anyhow::Result<Resolved> {
        let (manifest, base) = match &self.dataset {
            DatasetRef::Inline(m) => (m.clone(), base.to_path_buf()),
            DatasetRef::File(p) => {
                let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading manifest {}", p.display()))?;
                let m: DatasetManifest =
                    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", p.display()))?;
                (m, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
        };
        if !(manifest.train_fraction > 0.0 && manifest.train_fraction < 1.0) {
            bail!("train_fraction must lie in (0, 1), got {}", manifest.train_fraction);
        }
        self.schedule.validate()?;
        let models = match self.task {
            Task::Forecast => {
                let parsed = self
                    .models
                    .iter()
                    .map(|v| serde_json::from_value::<ForecasterConfig>(v.clone()))
                    .collect::<Result<Vec<_>, _>>()
                    .context("model is not a forecaster")?;
                Models::Forecast(if parsed.is_empty() { default_forecasters() } else { parsed })
            }
            Task::Anomaly => {
                self.threshold.validate()?;
                if manifest.label_column.is_none() {
                    bail!("anomaly task needs a label column in the manifest");
                }
                let parsed = self
                    .models
                    .iter()
                    .map(|v| serde_json::from_value::<DetectorEntry>(v.clone()))
                    .collect::<Result<Vec<_>, _>>()
                    .context("model is not an anomaly detector")?;
                Models::Anomaly(if parsed.is_empty() { default_detectors() } else { parsed })
            }
        };
        let mut labels = models.labels();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            bail!("two models share the name '{}'; set \"name\" to tell them apart", w[0]);
        }
        Ok(Resolved {
            config: self,
            manifest,
            base,
            models,
        })
    }
}
