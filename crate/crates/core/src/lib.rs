//! Robust forecasting for hierarchical functional time series.
//!
//! Curves live on a shared uniform grid ([`curve`]). Band depths and their
//! local versions ([`depth`]) drive two robust window predictors, a moving
//! local depth median and a two-window trimmed local mean with forgetting
//! ([`predict`]). Per-node forecasts are made aggregation consistent by
//! generalized least squares with a MAD-based diagonal dispersion matrix
//! ([`hierarchy`], [`reconcile`]). [`sim`] generates seeded test processes and
//! size outliers, and [`eval`] runs rolling backtests over a hierarchy.

pub mod curve;
pub mod depth;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod io;
pub mod predict;
pub mod reconcile;
pub mod sim;
pub mod stats;

pub use curve::{fraction_where, integrate, Curve, FunctionalSample, Grid};
pub use depth::{DepthKind, LocalityParams, Neighborhood};
pub use error::{Error, Result};
pub use eval::{BacktestConfig, BacktestReport, ErrorMetric, HftsDataset, Reconciler};
pub use hierarchy::{Hierarchy, HierarchySpec, SummingMatrix};
pub use predict::{FtsSeries, Predictor};
pub use reconcile::{DispersionMatrix, GlsReconciler};
pub use sim::RngSeed;
