//! Generalized least squares reconciliation with a robust diagonal dispersion matrix.
//!
//! With summing matrix `S` and dispersion `W`, the reconciled bottom level is
//! `b = (S' W^-1 S)^-1 S' W^-1 r` for the vector `r` of base forecasts of all
//! nodes, and the reconciled hierarchy is `S b`. Because `S` and `W` do not
//! depend on the grid point, curves are reconciled one grid point at a time
//! against a single factorization.

use crate::curve::{Curve, Grid};
use crate::error::{Error, Result};
use crate::hierarchy::SummingMatrix;
use crate::stats;

/// Relative floor applied to zero dispersions, as a multiple of the largest entry.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Positive diagonal dispersion matrix, one entry per hierarchy node.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionMatrix {
    diag: Vec<f64>,
}

impl DispersionMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((i, v)) = diag
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "dispersion entry {i} must be finite and positive, got {v}"
            )));
        }
        Ok(Self { diag })
    }

    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.diag.iter().map(|d| d * k).collect())
    }
}

/// `c * MAD^2` of each node's integrated squared errors.
pub fn robust_dispersion(errors: &[Vec<f64>], c: f64) -> Result<DispersionMatrix> {
    Ok(robust_dispersion_floored(errors, c, DEFAULT_FLOOR)?.0)
}

/// As [`robust_dispersion`], also returning the nodes whose zero dispersion was floored.
///
/// Zero entries are raised to `rel_floor` times the largest entry. When every
/// entry is zero the identity matrix is returned.
pub fn robust_dispersion_floored(
    errors: &[Vec<f64>],
    c: f64,
    rel_floor: f64,
) -> Result<(DispersionMatrix, Vec<usize>)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dispersion scale c must be positive, got {c}"
        )));
    }
    if !(rel_floor.is_finite() && rel_floor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative floor must be positive, got {rel_floor}"
        )));
    }
    let mut diag = Vec::with_capacity(errors.len());
    for (node, history) in errors.iter().enumerate() {
        if history.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "node {node} has {} past errors; at least 2 are needed",
                history.len()
            )));
        }
        let m = stats::mad(history, 1.0)?;
        diag.push(c * m * m);
    }
    let max = diag.iter().copied().fold(0.0, f64::max);
    let floored: Vec<usize> = (0..diag.len()).filter(|&i| diag[i] <= 0.0).collect();
    if !floored.is_empty() {
        log::warn!("zero robust dispersion for nodes {floored:?}; flooring");
        let floor = if max > 0.0 { rel_floor * max } else { 1.0 };
        for &i in &floored {
            diag[i] = floor;
        }
    }
    Ok((DispersionMatrix::new(diag)?, floored))
}

/// Per-node base forecasts, ordered like the summing-matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseForecasts {
    grid: Grid,
    curves: Vec<Curve>,
}

impl BaseForecasts {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        let grid = *curves.first().ok_or(Error::EmptySample)?.grid();
        for c in &curves {
            grid.ensure_same(c.grid())?;
        }
        Ok(Self { grid, curves })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    /// Reconciled bottom-level curves, one per leaf.
    pub bottom: Vec<Curve>,
    /// Reconciled curves for every node, `S * bottom`.
    pub full: Vec<Curve>,
}

/// A factorized GLS projection for one summing matrix and dispersion.
///
/// The projection is evaluated in its constrained form: with `S = [A; I]`,
/// `C = [I, -A]` and `W = diag(W_a, W_b)`, the reconciled bottom level is
/// `r_b + W_b A' (W_a + A W_b A')^-1 (r_a - A r_b)`. This equals the
/// normal-equations solution, returns aggregation-consistent input untouched
/// and cancels any common scale of `W` up to rounding.
#[derive(Debug, Clone)]
pub struct GlsReconciler {
    summing: SummingMatrix,
    /// Rows of aggregate nodes, the leading block of `S`.
    n_agg: usize,
    w: Vec<f64>,
    /// Lower Cholesky factor of `W_a + A W_b A'`, row-major `n_agg x n_agg`.
    chol: Vec<f64>,
}

impl GlsReconciler {
    pub fn new(summing: &SummingMatrix, w: &DispersionMatrix) -> Result<Self> {
        let (rows, m) = (summing.n_rows(), summing.n_cols());
        if w.len() != rows {
            return Err(Error::InvalidParameter(format!(
                "dispersion has {} entries for {rows} nodes",
                w.len()
            )));
        }
        let n_agg = rows - m;
        let leaves_are_identity = (0..m).all(|j| {
            summing
                .row(n_agg + j)
                .iter()
                .enumerate()
                .all(|(k, &v)| v == u8::from(k == j))
        });
        if !leaves_are_identity {
            return Err(Error::InvalidParameter(
                "summing matrix must end with the identity block of the leaves".into(),
            ));
        }
        let w = w.diagonal().to_vec();
        let mut a = vec![0.0; n_agg * n_agg];
        for i in 0..n_agg {
            a[i * n_agg + i] = w[i];
            for j in 0..n_agg {
                let (ri, rj) = (summing.row(i), summing.row(j));
                a[i * n_agg + j] += (0..m).filter(|&k| ri[k] == 1 && rj[k] == 1).map(|k| w[n_agg + k]).sum::<f64>();
            }
        }
        let chol = cholesky(&a, n_agg)?;
        Ok(Self {
            summing: summing.clone(),
            n_agg,
            w,
            chol,
        })
    }

    /// Reconciled bottom-level values for one vector of base values.
    pub fn bottom(&self, base: &[f64]) -> Vec<f64> {
        let (rows, n_agg) = (self.summing.n_rows(), self.n_agg);
        assert_eq!(base.len(), rows);
        let leaves = &base[n_agg..];
        let implied = self.summing.aggregate(leaves);
        let mut lambda: Vec<f64> = (0..n_agg).map(|i| base[i] - implied[i]).collect();
        cholesky_solve(&self.chol, n_agg, &mut lambda);
        leaves
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let pull: f64 = (0..n_agg)
                    .filter(|&i| self.summing.get(i, k) == 1)
                    .map(|i| lambda[i])
                    .sum();
                r + self.w[n_agg + k] * pull
            })
            .collect()
    }

    /// Reconciled values for every node.
    pub fn reconcile_point(&self, base: &[f64]) -> Vec<f64> {
        self.summing.aggregate(&self.bottom(base))
    }

    pub fn reconcile(&self, base: &BaseForecasts) -> Result<Reconciled> {
        let (rows, m) = (self.summing.n_rows(), self.summing.n_cols());
        if base.curves.len() != rows {
            return Err(Error::InvalidParameter(format!(
                "{} base forecasts for {rows} nodes",
                base.curves.len()
            )));
        }
        let g = base.grid.n_points();
        let mut bottom = vec![vec![0.0; g]; m];
        let mut full = vec![vec![0.0; g]; rows];
        let mut point = vec![0.0; rows];
        for t in 0..g {
            for (p, c) in point.iter_mut().zip(&base.curves) {
                *p = c.values()[t];
            }
            let b = self.bottom(&point);
            for (j, v) in b.iter().enumerate() {
                bottom[j][t] = *v;
            }
            for (i, v) in self.summing.aggregate(&b).into_iter().enumerate() {
                full[i][t] = v;
            }
        }
        let to_curves = |rows: Vec<Vec<f64>>| {
            rows.into_iter()
                .map(|v| Curve::new(base.grid, v))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Reconciled {
            bottom: to_curves(bottom)?,
            full: to_curves(full)?,
        })
    }
}

/// Gridpoint-wise GLS reconciliation of base forecasts.
pub fn gls_reconcile(
    base: &BaseForecasts,
    summing: &SummingMatrix,
    w: &DispersionMatrix,
) -> Result<Reconciled> {
    GlsReconciler::new(summing, w)?.reconcile(base)
}

fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Singular(format!(
                "reconciliation system is not positive definite (pivot {j} = {d})"
            )));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
