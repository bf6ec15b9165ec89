//! One-step-ahead window predictors for a functional time series.
//!
//! Origins follow a count convention: forecasting at origin `n` means the
//! first `n` curves are observed and the forecast targets curve `n + 1`
//! (index `n` in zero-based storage). A window of length `k` ending at `n`
//! holds curves `n - k + 1 ..= n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, FunctionalSample, Grid};
use crate::depth::{self, LocalityParams};
use crate::error::{Error, Result};

/// Time-ordered curves of one hierarchy node.
#[derive(Debug, Clone, PartialEq)]
pub struct FtsSeries {
    id: String,
    grid: Grid,
    curves: Vec<Curve>,
}

impl FtsSeries {
    pub fn new(id: impl Into<String>, curves: Vec<Curve>) -> Result<Self> {
        let sample = FunctionalSample::new(curves)?;
        Ok(Self::from_sample(id, sample))
    }

    pub fn from_sample(id: impl Into<String>, sample: FunctionalSample) -> Self {
        Self {
            id: id.into(),
            grid: *sample.grid(),
            curves: sample.into_curves(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    /// The curve observed at time `n` (1-based).
    pub fn at(&self, n: usize) -> Option<&Curve> {
        n.checked_sub(1).and_then(|i| self.curves.get(i))
    }

    /// The `k` curves ending at time `n`.
    pub fn window(&self, n: usize, k: usize) -> Result<FunctionalSample> {
        if k == 0 || k > n || n > self.len() {
            return Err(Error::WindowExceedsHistory {
                origin: n,
                reason: format!(
                    "window of length {k} ending at {n} needs curves {}..={n} of {}",
                    (n + 1).saturating_sub(k),
                    self.len()
                ),
            });
        }
        FunctionalSample::new(self.curves[n - k..n].to_vec())
    }

    pub fn with_curves(&self, curves: Vec<Curve>) -> Result<Self> {
        Self::new(self.id.clone(), curves)
    }

    pub fn to_sample(&self) -> FunctionalSample {
        FunctionalSample::new(self.curves.clone()).expect("series holds at least one curve")
    }
}

/// Moving local depth median over the last `k` curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingMedianConfig {
    pub k: usize,
    pub locality: LocalityParams,
}

/// Trim level and locality for one window of the trimmed smoothing predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowTrim {
    pub alpha: f64,
    pub locality: LocalityParams,
}

/// Convex blend of trimmed local means over a recent and an older window.
///
/// The forecast is `z * mean(recent) + (1 - z) * mean(older)`, where the
/// recent window has length `k1` and ends at the origin, and the older window
/// has length `k2` and ends `lag` steps earlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimmedSmoothingConfig {
    pub z: f64,
    pub alpha: f64,
    pub locality: LocalityParams,
    pub k1: usize,
    pub k2: usize,
    pub lag: usize,
    /// Separate trim for the older window; shares `alpha` and `locality` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub older: Option<WindowTrim>,
}

impl TrimmedSmoothingConfig {
    /// Adjacent windows of equal length: `k2 = k1`, `lag = k1`.
    pub fn new(z: f64, alpha: f64, locality: LocalityParams, k: usize) -> Self {
        Self {
            z,
            alpha,
            locality,
            k1: k,
            k2: k,
            lag: k,
            older: None,
        }
    }

    fn recent_trim(&self) -> WindowTrim {
        WindowTrim {
            alpha: self.alpha,
            locality: self.locality,
        }
    }

    fn older_trim(&self) -> WindowTrim {
        self.older.unwrap_or_else(|| self.recent_trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingMeanConfig {
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    MovingMedian(MovingMedianConfig),
    TrimmedSmoothing(TrimmedSmoothingConfig),
    MovingMean(MovingMeanConfig),
}

impl Predictor {
    pub fn label(&self) -> &'static str {
        match self {
            Predictor::MovingMedian(_) => "moving_median",
            Predictor::TrimmedSmoothing(_) => "trimmed_smoothing",
            Predictor::MovingMean(_) => "moving_mean",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Predictor::MovingMedian(c) if c.k < 2 => bad(format!("window k must be >= 2, got {}", c.k)),
            Predictor::MovingMean(c) if c.k < 1 => bad("window k must be >= 1".into()),
            Predictor::TrimmedSmoothing(c) => {
                if !(0.0..=1.0).contains(&c.z) {
                    return bad(format!("forgetting parameter z must lie in [0, 1], got {}", c.z));
                }
                if c.k1 < 2 || c.k2 < 2 {
                    return bad(format!("window lengths must be >= 2, got k1 = {}, k2 = {}", c.k1, c.k2));
                }
                if c.lag < 1 {
                    return bad("lag must be >= 1 so the older window ends first".into());
                }
                for trim in [c.recent_trim(), c.older_trim()] {
                    if !(trim.alpha.is_finite() && trim.alpha >= 0.0) {
                        return bad(format!("trim level alpha must be non-negative, got {}", trim.alpha));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Smallest origin at which the predictor has enough history.
    pub fn min_origin(&self) -> usize {
        match self {
            Predictor::MovingMedian(c) => c.k,
            Predictor::MovingMean(c) => c.k,
            Predictor::TrimmedSmoothing(c) => c.k1.max(c.lag + c.k2),
        }
    }

    /// Forecast of the curve following time `n`.
    pub fn forecast(&self, series: &FtsSeries, n: usize) -> Result<Curve> {
        match self {
            Predictor::MovingMedian(c) => forecast_moving_median(series, c, n),
            Predictor::TrimmedSmoothing(c) => forecast_trimmed_smoothing(series, c, n),
            Predictor::MovingMean(c) => forecast_moving_mean(series, c.k, n),
        }
    }
}

/// Local depth median of the window of length `cfg.k` ending at `n`.
pub fn forecast_moving_median(series: &FtsSeries, cfg: &MovingMedianConfig, n: usize) -> Result<Curve> {
    Predictor::MovingMedian(*cfg).validate()?;
    let window = series.window(n, cfg.k)?;
    let (_, median) = depth::depth_median(&window, cfg.locality)?;
    Ok(median)
}

pub fn forecast_trimmed_smoothing(
    series: &FtsSeries,
    cfg: &TrimmedSmoothingConfig,
    n1: usize,
) -> Result<Curve> {
    Predictor::TrimmedSmoothing(*cfg).validate()?;
    let n2 = n1.checked_sub(cfg.lag).filter(|&n2| n2 >= cfg.k2).ok_or_else(|| {
        Error::WindowExceedsHistory {
            origin: n1,
            reason: format!(
                "older window of length {} must end at {} - {} and fit in the history",
                cfg.k2, n1, cfg.lag
            ),
        }
    })?;

    let trimmed = |n: usize, k: usize, trim: WindowTrim| -> Result<Curve> {
        let window = series.window(n, k)?;
        depth::trimmed_local_mean(&window, trim.alpha, trim.locality)
    };

    let z = cfg.z;
    // Skip the window that carries no weight so degenerate blends are exact.
    if z == 1.0 {
        series.window(n2, cfg.k2)?;
        return trimmed(n1, cfg.k1, cfg.recent_trim());
    }
    if z == 0.0 {
        series.window(n1, cfg.k1)?;
        return trimmed(n2, cfg.k2, cfg.older_trim());
    }
    let recent = trimmed(n1, cfg.k1, cfg.recent_trim())?;
    let older = trimmed(n2, cfg.k2, cfg.older_trim())?;
    recent.zip_map(&older, |a, b| z * a + (1.0 - z) * b)
}

/// Pointwise mean of the window of length `k` ending at `n`.
pub fn forecast_moving_mean(series: &FtsSeries, k: usize, n: usize) -> Result<Curve> {
    Ok(series.window(n, k)?.mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingForecast {
    pub origin: usize,
    pub forecast: Curve,
    pub realized: Curve,
}

/// One-step forecasts at each origin, paired with the realized next curve.
pub fn rolling_forecast(
    series: &FtsSeries,
    predictor: &Predictor,
    origins: impl IntoIterator<Item = usize>,
) -> Result<Vec<RollingForecast>> {
    predictor.validate()?;
    let origins: Vec<usize> = origins.into_iter().collect();
    for &n in &origins {
        check_origin(series, predictor, n)?;
    }
    origins
        .par_iter()
        .map(|&n| {
            Ok(RollingForecast {
                origin: n,
                forecast: predictor.forecast(series, n)?,
                realized: series.curves()[n].clone(),
            })
        })
        .collect()
}

pub(crate) fn check_origin(series: &FtsSeries, predictor: &Predictor, n: usize) -> Result<()> {
    if n < predictor.min_origin() {
        return Err(Error::WindowExceedsHistory {
            origin: n,
            reason: format!(
                "{} needs at least {} observed curves",
                predictor.label(),
                predictor.min_origin()
            ),
        });
    }
    if n + 1 > series.len() {
        return Err(Error::WindowExceedsHistory {
            origin: n,
            reason: format!("no realized curve {} in a series of {}", n + 1, series.len()),
        });
    }
    Ok(())
}

/// The predictor applied to every admissible window, the last one included.
///
/// For a window predictor of length `k` on `N` curves this yields `N - k + 1`
/// curves, the last of which forecasts the unobserved curve `N + 1`.
pub fn rolling_apply(series: &FtsSeries, predictor: &Predictor) -> Result<Vec<Curve>> {
    predictor.validate()?;
    let first = predictor.min_origin();
    if first > series.len() {
        return Err(Error::WindowExceedsHistory {
            origin: series.len(),
            reason: format!("{} needs at least {first} curves", predictor.label()),
        });
    }
    (first..=series.len())
        .into_par_iter()
        .map(|n| predictor.forecast(series, n))
        .collect()
}
