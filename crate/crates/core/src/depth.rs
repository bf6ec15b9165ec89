//! Band depths for functional data and their local versions.
//!
//! Two base depths are provided. The modified band depth (MBD) averages, over
//! all pairs of sample curves, the share of the domain where a curve lies
//! inside the pointwise envelope of the pair. The corrected generalized band
//! depth (cGBD) gives each pair a single orientation, the one that holds on at
//! least half of the domain, and only counts the part of the domain where the
//! curve lies between the pair in that orientation.
//!
//! Local depth at level `beta` reflects the sample through the query curve and
//! finds the smallest depth region of the symmetrized sample that holds at
//! least a share `beta` of it. The base depth of the query is then evaluated
//! against the original observations lying in that region
//! ([`Neighborhood::Observations`], the default, so `beta = 1` gives the
//! global depth), or against every symmetrized curve in it
//! ([`Neighborhood::Symmetrized`]).
//!
//! The symmetrized neighborhood is centred on the query by construction. Under
//! MBD this gives every curve with no ties the same local depth, so it is not
//! suitable for ranking sample members; it is kept for comparison.
//!
//! All measures are exact ratios of grid-point counts, so depth values are
//! reproducible bit for bit regardless of how queries are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{pointwise_mean, Curve, FunctionalSample, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthKind {
    Cgbd,
    Mbd,
}

impl std::str::FromStr for DepthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cgbd" => Ok(Self::Cgbd),
            "mbd" => Ok(Self::Mbd),
            other => Err(Error::InvalidParameter(format!(
                "unknown depth kind {other:?} (expected cgbd or mbd)"
            ))),
        }
    }
}

impl std::fmt::Display for DepthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cgbd => "cgbd",
            Self::Mbd => "mbd",
        })
    }
}

/// Which curves of the local depth region the query is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Neighborhood {
    /// Original sample members inside the region.
    #[default]
    Observations,
    /// All symmetrized curves inside the region, reflections included.
    Symmetrized,
}

/// Locality level and base depth for local depth computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalityParams {
    beta: f64,
    kind: DepthKind,
    #[serde(default)]
    neighborhood: Neighborhood,
}

impl LocalityParams {
    pub fn new(beta: f64, kind: DepthKind) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "locality beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self {
            beta,
            kind,
            neighborhood: Neighborhood::default(),
        })
    }

    /// `beta = 1`: the region is the whole symmetrized sample.
    pub fn global(kind: DepthKind) -> Self {
        Self {
            beta: 1.0,
            kind,
            neighborhood: Neighborhood::default(),
        }
    }

    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn neighborhood(&self) -> Neighborhood {
        self.neighborhood
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    /// Size of the retained neighborhood in a symmetrized sample of `total` curves.
    pub fn neighborhood_size(&self, total: usize) -> usize {
        // The small offset keeps products such as 0.1 * 30 from rounding up past an integer.
        ((self.beta * total as f64 - 1e-9).ceil().max(0.0) as usize).min(total)
    }
}

/// Depth values aligned with the order of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVector(Vec<f64>);

impl DepthVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest depth; the lowest index wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in self.0.iter().enumerate() {
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Indices sorted from deepest to most peripheral; ties keep sample order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]));
        idx
    }
}

/// A reference sample prepared for repeated band-depth queries.
struct Bands<'a> {
    kind: DepthKind,
    rows: Vec<&'a [f64]>,
    /// For cGBD: (lower, upper) curve index of every pair in its dominant orientation.
    oriented: Vec<(usize, usize)>,
    n_points: usize,
}

impl<'a> Bands<'a> {
    fn new(kind: DepthKind, rows: Vec<&'a [f64]>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewCurves);
        }
        let n_points = rows[0].len();
        let oriented = match kind {
            DepthKind::Mbd => Vec::new(),
            DepthKind::Cgbd => {
                let n = rows.len();
                let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
                for i1 in 0..n {
                    for i2 in (i1 + 1)..n {
                        let up = rows[i1]
                            .iter()
                            .zip(rows[i2])
                            .filter(|(a, b)| *b - *a >= 0.0)
                            .count();
                        // L_{i1,i2} >= 1/2 takes priority at the boundary.
                        if 2 * up >= n_points {
                            pairs.push((i1, i2));
                        } else {
                            pairs.push((i2, i1));
                        }
                    }
                }
                pairs
            }
        };
        Ok(Self {
            kind,
            rows,
            oriented,
            n_points,
        })
    }

    fn n_pairs(&self) -> u64 {
        let n = self.rows.len() as u64;
        n * (n - 1) / 2
    }

    /// Number of (pair, grid point) incidences where `x` lies in the band.
    fn hits(&self, x: &[f64]) -> u64 {
        match self.kind {
            DepthKind::Mbd => {
                // A pair misses x at t only if both curves lie strictly on the same side.
                let total = self.n_pairs();
                let mut hits = 0u64;
                for (t, &xt) in x.iter().enumerate() {
                    let mut below = 0u64;
                    let mut above = 0u64;
                    for row in &self.rows {
                        let v = row[t];
                        if v < xt {
                            below += 1;
                        } else if v > xt {
                            above += 1;
                        }
                    }
                    hits += total - below * below.saturating_sub(1) / 2
                        - above * above.saturating_sub(1) / 2;
                }
                hits
            }
            DepthKind::Cgbd => {
                let mut hits = 0u64;
                for &(lo, hi) in &self.oriented {
                    let (lo, hi) = (self.rows[lo], self.rows[hi]);
                    hits += x
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .filter(|(xt, (l, h))| *l <= *xt && *xt <= *h)
                        .count() as u64;
                }
                hits
            }
        }
    }

    fn depth(&self, x: &[f64]) -> f64 {
        self.hits(x) as f64 / (self.n_pairs() * self.n_points as u64) as f64
    }

    fn depth_of_members(&self) -> Vec<f64> {
        if self.kind == DepthKind::Cgbd {
            return self.rows.par_iter().map(|r| self.depth(r)).collect();
        }
        // Same counts as `hits`, from one sorted column per grid point.
        let n = self.rows.len();
        let total = self.n_pairs();
        let mut hits = vec![0u64; n];
        let mut column = vec![0.0; n];
        for t in 0..self.n_points {
            for (c, row) in column.iter_mut().zip(&self.rows) {
                *c = row[t];
            }
            column.sort_unstable_by(f64::total_cmp);
            for (h, row) in hits.iter_mut().zip(&self.rows) {
                let v = row[t];
                let below = column.partition_point(|&c| c < v) as u64;
                let above = (n - column.partition_point(|&c| c <= v)) as u64;
                *h += total - below * below.saturating_sub(1) / 2 - above * above.saturating_sub(1) / 2;
            }
        }
        let denom = (total * self.n_points as u64) as f64;
        hits.into_iter().map(|h| h as f64 / denom).collect()
    }
}

fn check_query(x: &Curve, sample: &FunctionalSample) -> Result<()> {
    sample.grid().ensure_same(x.grid())?;
    if sample.len() < 2 {
        return Err(Error::TooFewCurves);
    }
    Ok(())
}

/// Global band depth of `x` with respect to `sample`.
pub fn band_depth(x: &Curve, sample: &FunctionalSample, kind: DepthKind) -> Result<f64> {
    check_query(x, sample)?;
    Ok(Bands::new(kind, sample.rows())?.depth(x.values()))
}

/// Corrected generalized band depth.
pub fn cgbd(x: &Curve, sample: &FunctionalSample) -> Result<f64> {
    band_depth(x, sample, DepthKind::Cgbd)
}

/// Modified band depth.
pub fn mbd(x: &Curve, sample: &FunctionalSample) -> Result<f64> {
    band_depth(x, sample, DepthKind::Mbd)
}

/// Global depth of every sample member with respect to the sample.
pub fn sample_depths(sample: &FunctionalSample, kind: DepthKind) -> Result<DepthVector> {
    let bands = Bands::new(kind, sample.rows())?;
    Ok(DepthVector(bands.depth_of_members()))
}

/// Everything computed on the way to a local depth value.
#[derive(Debug, Clone)]
pub struct LocalDepthDetail {
    pub depth: f64,
    /// Base depth of each of the `2N` symmetrized curves: originals first, then reflections.
    pub symmetrized_depths: Vec<f64>,
    /// Indices into the symmetrized sample of the depth region, in sample order.
    /// Indices below `N` are original observations.
    pub region: Vec<usize>,
    /// Indices into the symmetrized sample the query was compared against.
    pub neighborhood: Vec<usize>,
}

/// Local depth of `x` at locality `p.beta()`.
pub fn local_depth(x: &Curve, sample: &FunctionalSample, p: LocalityParams) -> Result<f64> {
    Ok(local_depth_detail(x, sample, p)?.depth)
}

pub fn local_depth_detail(
    x: &Curve,
    sample: &FunctionalSample,
    p: LocalityParams,
) -> Result<LocalDepthDetail> {
    check_query(x, sample)?;
    local_depth_rows(x.values(), &sample.rows(), p)
}

fn local_depth_rows(x: &[f64], rows: &[&[f64]], p: LocalityParams) -> Result<LocalDepthDetail> {
    let total = 2 * rows.len();
    let keep = p.neighborhood_size(total);
    if keep < 2 {
        return Err(Error::NeighborhoodTooSmall {
            beta: p.beta,
            kept: keep,
            total,
        });
    }

    let reflected: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| x.iter().zip(*r).map(|(xt, rt)| 2.0 * xt - rt).collect())
        .collect();
    let symmetrized: Vec<&[f64]> = rows
        .iter()
        .copied()
        .chain(reflected.iter().map(Vec::as_slice))
        .collect();

    let depths = Bands::new(p.kind, symmetrized.clone())?.depth_of_members();

    let mut sorted = depths.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[keep - 1];
    let region: Vec<usize> = (0..total).filter(|&i| depths[i] >= threshold).collect();
    let neighborhood: Vec<usize> = match p.neighborhood {
        Neighborhood::Symmetrized => region.clone(),
        Neighborhood::Observations => region.iter().copied().filter(|&i| i < rows.len()).collect(),
    };
    if neighborhood.len() < 2 {
        return Err(Error::NeighborhoodTooSmall {
            beta: p.beta,
            kept: neighborhood.len(),
            total,
        });
    }

    let members: Vec<&[f64]> = neighborhood.iter().map(|&i| symmetrized[i]).collect();
    let depth = Bands::new(p.kind, members)?.depth(x);
    Ok(LocalDepthDetail {
        depth,
        symmetrized_depths: depths,
        region,
        neighborhood,
    })
}

/// Local depth of every sample member with respect to the sample.
pub fn sample_local_depths(sample: &FunctionalSample, p: LocalityParams) -> Result<DepthVector> {
    if sample.len() < 2 {
        return Err(Error::TooFewCurves);
    }
    let rows = sample.rows();
    let depths = rows
        .par_iter()
        .map(|x| local_depth_rows(x, &rows, p).map(|d| d.depth))
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthVector(depths))
}

/// The sample member of greatest local depth, lowest index on ties.
pub fn depth_median(sample: &FunctionalSample, p: LocalityParams) -> Result<(usize, Curve)> {
    let depths = sample_local_depths(sample, p)?;
    let i = depths.argmax().ok_or(Error::EmptySample)?;
    Ok((i, sample.curves()[i].clone()))
}

/// Pointwise mean of the members whose local depth strictly exceeds `alpha`.
pub fn trimmed_local_mean(
    sample: &FunctionalSample,
    alpha: f64,
    p: LocalityParams,
) -> Result<Curve> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "trim level alpha must be finite and non-negative, got {alpha}"
        )));
    }
    let depths = sample_local_depths(sample, p)?;
    trimmed_mean_with_depths(sample, &depths, alpha)
}

pub(crate) fn trimmed_mean_with_depths(
    sample: &FunctionalSample,
    depths: &DepthVector,
    alpha: f64,
) -> Result<Curve> {
    let kept: Vec<&[f64]> = sample
        .curves()
        .iter()
        .zip(depths.values())
        .filter(|(_, &d)| d > alpha)
        .map(|(c, _)| c.values())
        .collect();
    if kept.is_empty() {
        let max_depth = depths.values().iter().copied().fold(0.0, f64::max);
        return Err(Error::TrimRemovesAll { alpha, max_depth });
    }
    pointwise_mean(*sample.grid(), kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotParams {
    /// Share of deepest curves whose envelope forms the central band.
    pub central_prop: f64,
    /// Whiskers extend this many central-band heights beyond the band.
    pub whisker_factor: f64,
}

impl Default for BoxplotParams {
    fn default() -> Self {
        Self {
            central_prop: 0.5,
            whisker_factor: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FunctionalBoxplot {
    pub depths: DepthVector,
    /// Indices of the curves forming the central region.
    pub central: Vec<usize>,
    pub central_lower: Curve,
    pub central_upper: Curve,
    pub whisker_lower: Curve,
    pub whisker_upper: Curve,
    pub outliers: Vec<bool>,
}

impl FunctionalBoxplot {
    pub fn outlier_indices(&self) -> Vec<usize> {
        (0..self.outliers.len())
            .filter(|&i| self.outliers[i])
            .collect()
    }

    /// Whether `c` leaves the whisker band at some grid point.
    pub fn exits_whiskers(&self, c: &Curve) -> bool {
        exits(
            c.values(),
            self.whisker_lower.values(),
            self.whisker_upper.values(),
        )
    }

    /// Largest pointwise height of the whisker band.
    pub fn whisker_height(&self) -> f64 {
        self.whisker_upper
            .values()
            .iter()
            .zip(self.whisker_lower.values())
            .map(|(u, l)| u - l)
            .fold(0.0, f64::max)
    }
}

fn exits(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter()
        .zip(lo.iter().zip(hi))
        .any(|(v, (l, h))| v < l || v > h)
}

/// Functional boxplot with global depth ordering.
pub fn functional_boxplot(
    sample: &FunctionalSample,
    kind: DepthKind,
    params: BoxplotParams,
) -> Result<FunctionalBoxplot> {
    if sample.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "functional boxplot needs at least 4 curves, got {}",
            sample.len()
        )));
    }
    if !(params.central_prop > 0.0 && params.central_prop <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "central proportion must lie in (0, 1], got {}",
            params.central_prop
        )));
    }
    if !(params.whisker_factor.is_finite() && params.whisker_factor >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "whisker factor must be non-negative, got {}",
            params.whisker_factor
        )));
    }

    let depths = sample_depths(sample, kind)?;
    let n = sample.len();
    let n_central = ((params.central_prop * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut central = depths.ranking();
    central.truncate(n_central);
    central.sort_unstable();

    let grid: Grid = *sample.grid();
    let g = grid.n_points();
    let mut lower = vec![f64::INFINITY; g];
    let mut upper = vec![f64::NEG_INFINITY; g];
    for &i in &central {
        for (t, &v) in sample.curves()[i].values().iter().enumerate() {
            lower[t] = lower[t].min(v);
            upper[t] = upper[t].max(v);
        }
    }
    let (w_lo, w_hi): (Vec<f64>, Vec<f64>) = lower
        .iter()
        .zip(&upper)
        .map(|(&l, &u)| {
            let reach = params.whisker_factor * (u - l);
            (l - reach, u + reach)
        })
        .unzip();

    let outliers = sample
        .curves()
        .iter()
        .map(|c| exits(c.values(), &w_lo, &w_hi))
        .collect();

    Ok(FunctionalBoxplot {
        depths,
        central,
        central_lower: Curve::new(grid, lower)?,
        central_upper: Curve::new(grid, upper)?,
        whisker_lower: Curve::new(grid, w_lo)?,
        whisker_upper: Curve::new(grid, w_hi)?,
        outliers,
    })
}
