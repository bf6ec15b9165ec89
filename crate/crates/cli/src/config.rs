use std::fs;
use std::path::{Path, PathBuf};

use hfts::depth::{DepthKind, LocalityParams};
use hfts::predict::{MovingMeanConfig, MovingMedianConfig, Predictor, TrimmedSmoothingConfig};
use hfts::sim::OutlierShape;
use hfts::{ErrorMetric, Reconciler};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every parameter of a run. Loaded from a TOML file, a JSON file or a run
/// manifest, then overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub input: Vec<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub grid: GridConfig,
    pub predictor: PredictorParams,
    /// Rows of a backtest report.
    pub predictors: Vec<PredictorChoice>,
    pub reconcile: Reconciler,
    pub metric: ErrorMetric,
    pub origins: Option<OriginRange>,
    pub simulate: SimulateConfig,
    pub ingest: IngestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: None,
            input: Vec::new(),
            hierarchy: None,
            grid: GridConfig::default(),
            predictor: PredictorParams::default(),
            predictors: vec![
                PredictorChoice::MovingMedian,
                PredictorChoice::TrimmedSmoothing,
                PredictorChoice::MovingMean,
            ],
            reconcile: Reconciler::None,
            metric: ErrorMetric::Aiae,
            origins: None,
            simulate: SimulateConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorParams {
    pub window: usize,
    pub beta: f64,
    pub depth: DepthKind,
    pub alpha: f64,
    pub z: f64,
    /// Older-window length; defaults to `window`.
    pub older_window: Option<usize>,
    /// Distance between the two windows' ends; defaults to `window`.
    pub lag: Option<usize>,
}

impl Default for PredictorParams {
    fn default() -> Self {
        Self {
            window: 15,
            beta: 0.45,
            depth: DepthKind::Mbd,
            alpha: 0.2,
            z: 0.5,
            older_window: None,
            lag: None,
        }
    }
}

impl PredictorParams {
    /// Checks every predictor parameter, whether or not the command uses it.
    pub fn validate(&self) -> Result<(), CliError> {
        for choice in [
            PredictorChoice::MovingMedian,
            PredictorChoice::TrimmedSmoothing,
            PredictorChoice::MovingMean,
        ] {
            self.build(choice)?;
        }
        Ok(())
    }

    pub fn locality(&self) -> Result<LocalityParams, CliError> {
        LocalityParams::new(self.beta, self.depth).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build(&self, choice: PredictorChoice) -> Result<Predictor, CliError> {
        let locality = self.locality()?;
        let p = match choice {
            PredictorChoice::MovingMedian => Predictor::MovingMedian(MovingMedianConfig {
                k: self.window,
                locality,
            }),
            PredictorChoice::TrimmedSmoothing => {
                let mut c = TrimmedSmoothingConfig::new(self.z, self.alpha, locality, self.window);
                c.k2 = self.older_window.unwrap_or(self.window);
                c.lag = self.lag.unwrap_or(self.window);
                Predictor::TrimmedSmoothing(c)
            }
            PredictorChoice::MovingMean => Predictor::MovingMean(MovingMeanConfig { k: self.window }),
        };
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PredictorChoice {
    MovingMedian,
    TrimmedSmoothing,
    MovingMean,
}

impl PredictorChoice {
    pub fn label(self) -> &'static str {
        match self {
            Self::MovingMedian => "moving_median",
            Self::TrimmedSmoothing => "trimmed_smoothing",
            Self::MovingMean => "moving_mean",
        }
    }
}

/// Inclusive range of forecast origins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginRange {
    pub first: usize,
    pub last: usize,
}

impl std::str::FromStr for OriginRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or("expected FIRST:LAST")?;
        let first = a.trim().parse().map_err(|_| format!("bad origin {a:?}"))?;
        let last = b.trim().parse().map_err(|_| format!("bad origin {b:?}"))?;
        if first > last {
            return Err(format!("empty origin range {s}"));
        }
        Ok(Self { first, last })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Process {
    /// `a * SV + b` curves per leaf.
    Sv,
    /// Two-regime SV mixtures per leaf.
    SvMixture,
    Far1,
    Wiener,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub process: Process,
    pub curves: usize,
    /// Leaves under the root when no hierarchy file is given.
    pub leaves: usize,
    /// Share of each leaf's curves replaced by size outliers; 0 for none.
    pub outliers: f64,
    pub magnitude: f64,
    pub outlier_shape: OutlierShape,
    /// FAR(1) kernel operator norm.
    pub rho: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            process: Process::Sv,
            curves: 120,
            leaves: 3,
            outliers: 0.0,
            magnitude: 2.0,
            outlier_shape: OutlierShape::Envelope,
            rho: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub regions: Vec<String>,
    pub root: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        let d = hfts::io::DemandOptions::default();
        Self {
            regions: d.regions,
            root: d.root_id,
        }
    }
}

/// Reads a TOML or JSON config, or the `config` member of a run manifest.
pub fn load(path: &Path) -> Result<(RunConfig, Option<String>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if let Some(cfg) = value.get("config") {
            let command = value.get("command").and_then(|c| c.as_str()).map(str::to_owned);
            let cfg = serde_json::from_value(cfg.clone()).map_err(|e| bad(e.to_string()))?;
            return Ok((cfg, command));
        }
        let cfg = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        return Ok((cfg, None));
    }
    let cfg = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    Ok((cfg, None))
}
