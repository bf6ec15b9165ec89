//! Rolling backtests over a hierarchy and their error summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, Grid};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::predict::{self, FtsSeries, Predictor, RollingForecast};
use crate::reconcile::{self, BaseForecasts, DispersionMatrix, GlsReconciler};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Average integrated absolute error, `(1/T) ∫ |x - xhat|`.
    #[default]
    Aiae,
    /// Average integrated squared error, `(1/T) ∫ (x - xhat)^2`.
    Aise,
}

impl FromStr for ErrorMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aiae" => Ok(Self::Aiae),
            "aise" => Ok(Self::Aise),
            _ => Err(Error::InvalidParameter(format!("unknown error metric {s:?}"))),
        }
    }
}

impl fmt::Display for ErrorMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Aiae => "aiae",
            Self::Aise => "aise",
        })
    }
}

pub fn integrated_error(x: &Curve, xhat: &Curve, metric: ErrorMetric) -> Result<f64> {
    let diff = match metric {
        ErrorMetric::Aiae => x.zip_map(xhat, |a, b| (a - b).abs())?,
        ErrorMetric::Aise => x.zip_map(xhat, |a, b| (a - b) * (a - b))?,
    };
    Ok(diff.integrate() / x.grid().t_end())
}

/// Time-aligned series for every node of a hierarchy, in summing-matrix row order.
#[derive(Debug, Clone, PartialEq)]
pub struct HftsDataset {
    hierarchy: Hierarchy,
    series: Vec<FtsSeries>,
}

impl HftsDataset {
    /// Builds every internal node as the sum of its leaves.
    pub fn from_leaves(hierarchy: Hierarchy, leaves: Vec<FtsSeries>) -> Result<Self> {
        let by_id = index_by_id(leaves)?;
        let first = hierarchy.first_leaf();
        let mut leaf_series = Vec::with_capacity(hierarchy.n_leaves());
        for id in &hierarchy.ids()[first..] {
            let s = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Hierarchy(format!("no series for leaf {id:?}")))?;
            leaf_series.push((*s).clone());
        }
        if by_id.len() != leaf_series.len() {
            let extra: Vec<&str> = by_id
                .keys()
                .filter(|k| hierarchy.position(k).is_none_or(|r| r < first))
                .map(String::as_str)
                .collect();
            return Err(Error::Hierarchy(format!("series for non-leaf nodes: {}", extra.join(", "))));
        }
        let (grid, len) = aligned(&leaf_series)?;
        let s = hierarchy.summing_matrix();
        let mut series = Vec::with_capacity(hierarchy.len());
        for (row, id) in hierarchy.ids()[..first].iter().enumerate() {
            let members: Vec<&FtsSeries> = (0..s.n_cols())
                .filter(|&j| s.get(row, j) == 1)
                .map(|j| &leaf_series[j])
                .collect();
            let curves = (0..len)
                .map(|i| {
                    let mut v = vec![0.0; grid.n_points()];
                    for m in &members {
                        for (acc, x) in v.iter_mut().zip(m.curves()[i].values()) {
                            *acc += x;
                        }
                    }
                    Curve::new(grid, v)
                })
                .collect::<Result<Vec<_>>>()?;
            series.push(FtsSeries::new(id.clone(), curves)?);
        }
        series.extend(leaf_series);
        Ok(Self { hierarchy, series })
    }

    /// Uses the given series for every node after checking that each parent
    /// equals the sum of its children to 1e-6 relative.
    pub fn new(hierarchy: Hierarchy, series: Vec<FtsSeries>) -> Result<Self> {
        let by_id = index_by_id(series)?;
        let mut ordered = Vec::with_capacity(hierarchy.len());
        for id in hierarchy.ids() {
            let s = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Hierarchy(format!("no series for node {id:?}")))?;
            ordered.push((*s).clone());
        }
        if by_id.len() != ordered.len() {
            return Err(Error::Hierarchy("series for nodes outside the hierarchy".into()));
        }
        let (grid, len) = aligned(&ordered)?;
        for row in 0..hierarchy.first_leaf() {
            let children = hierarchy.children(row);
            for i in 0..len {
                for t in 0..grid.n_points() {
                    let parent = ordered[row].curves()[i].values()[t];
                    let parts = children.iter().map(|&c| ordered[c].curves()[i].values()[t]);
                    let (sum, scale) = parts.fold((0.0, parent.abs()), |(s, a), x| (s + x, a + x.abs()));
                    if (parent - sum).abs() > 1e-6 * scale {
                        return Err(Error::Hierarchy(format!(
                            "node {:?} is not the sum of its children at curve {} point {t}: {parent} vs {sum}",
                            hierarchy.ids()[row],
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(Self {
            hierarchy,
            series: ordered,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Series in summing-matrix row order.
    pub fn series(&self) -> &[FtsSeries] {
        &self.series
    }

    pub fn node(&self, id: &str) -> Option<&FtsSeries> {
        self.hierarchy.position(id).map(|r| &self.series[r])
    }

    pub fn grid(&self) -> &Grid {
        self.series[0].grid()
    }

    /// Number of curves per node.
    pub fn n_curves(&self) -> usize {
        self.series[0].len()
    }
}

fn index_by_id(series: Vec<FtsSeries>) -> Result<BTreeMap<String, FtsSeries>> {
    let mut map = BTreeMap::new();
    for s in series {
        let id = s.id().to_owned();
        if map.insert(id.clone(), s).is_some() {
            return Err(Error::Hierarchy(format!("two series for node {id:?}")));
        }
    }
    Ok(map)
}

fn aligned(series: &[FtsSeries]) -> Result<(Grid, usize)> {
    let first = series.first().ok_or(Error::EmptySample)?;
    let (grid, len) = (*first.grid(), first.len());
    for s in series {
        grid.ensure_same(s.grid())?;
        if s.len() != len {
            return Err(Error::Hierarchy(format!(
                "series {:?} has {} curves, {:?} has {len}",
                s.id(),
                s.len(),
                first.id()
            )));
        }
    }
    Ok((grid, len))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconciler {
    #[default]
    None,
    /// GLS with `W = diag(c * MAD^2)` of past base-forecast errors.
    GlsRobust,
}

impl FromStr for Reconciler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "gls" | "gls_robust" => Ok(Self::GlsRobust),
            _ => Err(Error::InvalidParameter(format!("unknown reconciler {s:?}"))),
        }
    }
}

impl fmt::Display for Reconciler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::GlsRobust => "gls_robust",
        })
    }
}

/// Everything a backtest depends on; echoed in its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub predictor: Predictor,
    /// Per-node predictors replacing `predictor`, keyed by node id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Predictor>,
    pub reconciler: Reconciler,
    pub metric: ErrorMetric,
    /// Strictly increasing forecast origins (number of observed curves).
    pub origins: Vec<usize>,
    /// Consistency constant in `W = c * MAD^2`.
    pub dispersion_c: f64,
    /// Seed of the data, when simulated; recorded only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl BacktestConfig {
    pub fn new(predictor: Predictor, reconciler: Reconciler, origins: Vec<usize>) -> Self {
        Self {
            predictor,
            overrides: BTreeMap::new(),
            reconciler,
            metric: ErrorMetric::default(),
            origins,
            dispersion_c: stats::GAUSSIAN_MAD_SCALE,
            seed: None,
        }
    }

    pub fn predictor_for(&self, node: &str) -> &Predictor {
        self.overrides.get(node).unwrap_or(&self.predictor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeErrors {
    pub node: String,
    /// One error per origin.
    pub errors: Vec<f64>,
    /// MAD of `errors` with c = 1.
    pub mad: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub nodes: Vec<NodeErrors>,
    /// Non-fatal conditions met during the run, such as identity-W fallbacks.
    pub warnings: Vec<String>,
}

impl BacktestReport {
    pub fn node(&self, id: &str) -> Option<&NodeErrors> {
        self.nodes.iter().find(|n| n.node == id)
    }
}

/// Rolling one-step backtest of every node.
///
/// At each origin the base forecasts are optionally reconciled with a
/// dispersion estimated from base-forecast squared errors at strictly
/// earlier origins. Until two earlier errors exist the identity is used, and
/// the affected origins are listed in the report's warnings.
pub fn backtest(data: &HftsDataset, cfg: &BacktestConfig) -> Result<BacktestReport> {
    if cfg.origins.is_empty() {
        return Err(Error::InvalidParameter("no forecast origins".into()));
    }
    if cfg.origins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("origins must be strictly increasing".into()));
    }
    for id in cfg.overrides.keys() {
        if data.hierarchy().position(id).is_none() {
            return Err(Error::InvalidParameter(format!("predictor override for unknown node {id:?}")));
        }
    }
    let rolled: Vec<Vec<RollingForecast>> = data
        .series()
        .par_iter()
        .map(|s| predict::rolling_forecast(s, cfg.predictor_for(s.id()), cfg.origins.iter().copied()))
        .collect::<Result<_>>()?;

    let n_nodes = data.series().len();
    let mut warnings = Vec::new();
    let evaluated: Vec<Vec<Curve>> = match cfg.reconciler {
        Reconciler::None => rolled
            .iter()
            .map(|r| r.iter().map(|f| f.forecast.clone()).collect())
            .collect(),
        Reconciler::GlsRobust => {
            let past: Vec<Vec<f64>> = rolled
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|f| integrated_error(&f.realized, &f.forecast, ErrorMetric::Aise))
                        .collect::<Result<_>>()
                })
                .collect::<Result<_>>()?;
            let summing = data.hierarchy().summing_matrix();
            let mut out = vec![Vec::with_capacity(cfg.origins.len()); n_nodes];
            let mut identity_at = Vec::new();
            for (o, &origin) in cfg.origins.iter().enumerate() {
                let w = if o < 2 {
                    identity_at.push(origin);
                    DispersionMatrix::identity(n_nodes)
                } else {
                    let history: Vec<Vec<f64>> = past.iter().map(|e| e[..o].to_vec()).collect();
                    let (w, floored) =
                        reconcile::robust_dispersion_floored(&history, cfg.dispersion_c, reconcile::DEFAULT_FLOOR)?;
                    if !floored.is_empty() {
                        let ids: Vec<&str> = floored.iter().map(|&i| data.hierarchy().ids()[i].as_str()).collect();
                        warnings.push(format!("origin {origin}: zero dispersion floored for {}", ids.join(", ")));
                    }
                    w
                };
                let base = BaseForecasts::new(rolled.iter().map(|r| r[o].forecast.clone()).collect())?;
                let rec = GlsReconciler::new(summing, &w)?.reconcile(&base)?;
                for (node, c) in rec.full.into_iter().enumerate() {
                    out[node].push(c);
                }
            }
            let list: Vec<String> = identity_at.iter().map(usize::to_string).collect();
            let msg = format!(
                "identity dispersion used at origins {} (fewer than 2 earlier errors)",
                list.join(", ")
            );
            log::warn!("{msg}");
            warnings.push(msg);
            out
        }
    };

    let nodes = rolled
        .iter()
        .zip(&evaluated)
        .zip(data.series())
        .map(|((r, ev), s)| {
            let errors = r
                .iter()
                .zip(ev)
                .map(|(f, xhat)| integrated_error(&f.realized, xhat, cfg.metric))
                .collect::<Result<Vec<_>>>()?;
            Ok(NodeErrors {
                node: s.id().to_owned(),
                mad: stats::mad(&errors, 1.0)?,
                median: stats::median(&errors)?,
                errors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BacktestReport {
        config: cfg.clone(),
        nodes,
        warnings,
    })
}

/// One row of a predictor comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    pub predictor: Predictor,
    pub reconciler: Reconciler,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub node_ids: Vec<String>,
    pub rows: Vec<(String, BacktestReport)>,
}

impl ComparisonTable {
    /// MAD per node for the row with this label.
    pub fn mad_row(&self, label: &str) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, r)| r.nodes.iter().map(|n| n.mad).collect())
    }
}

/// Backtests each entry on shared origins; `template` supplies everything but
/// the predictor and reconciler.
pub fn compare_predictors(
    data: &HftsDataset,
    entries: &[ComparisonEntry],
    template: &BacktestConfig,
) -> Result<ComparisonTable> {
    let rows = entries
        .iter()
        .map(|e| {
            let cfg = BacktestConfig {
                predictor: e.predictor,
                reconciler: e.reconciler,
                ..template.clone()
            };
            Ok((e.label.clone(), backtest(data, &cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        node_ids: data.hierarchy().ids().to_vec(),
        rows,
    })
}
