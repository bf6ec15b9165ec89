//! Seeded generators for functional test processes.
//!
//! Every generator takes an [`RngSeed`] rather than a live generator. Curve
//! `i` of a sample draws from its own ChaCha8 stream, so the output does not
//! depend on how generation is scheduled and a subset of a large pool can be
//! produced without generating the rest.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, FunctionalSample, Grid};
use crate::depth::{functional_boxplot, BoxplotParams, DepthKind};
use crate::error::{Error, Result};
use crate::predict::FtsSeries;

/// Root of a family of reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// An independent seed for a named sub-task.
    pub fn child(self, label: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    /// Stream `i` of this seed.
    pub fn stream(self, i: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(i);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Log-volatility recursion `h[t] = exp(gamma + fi (h[t-1] - gamma) + sigma eta[t])`
/// with `eta ~ N(0, delta^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub gamma: f64,
    pub fi: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl SvParams {
    /// Inner process of the two-regime curve generator.
    pub const CURVE: SvParams = SvParams {
        gamma: 0.0,
        fi: 0.3,
        sigma: 0.5,
        delta: 0.1,
    };

    fn validate(&self) -> Result<()> {
        let finite = [self.gamma, self.fi, self.sigma, self.delta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.sigma < 0.0 || self.delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "SV parameters must be finite with sigma, delta >= 0: {self:?}"
            )));
        }
        if self.fi.abs() >= 1.0 {
            log::warn!("SV persistence |fi| = {} >= 1", self.fi.abs());
        }
        Ok(())
    }
}

/// Stochastic volatility path of length `n`.
///
/// Simulates `2n` steps of `h`, keeps the last `n` as burn-in, and returns
/// `sqrt(h) * epsilon` with standard normal `epsilon`. Draws are taken in the
/// order `epsilon` (n), `eta` (2n), `h[1]`.
pub fn sv_path<R: Rng + ?Sized>(n: usize, p: &SvParams, rng: &mut R) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidParameter("SV path length must be >= 1".into()));
    }
    p.validate()?;
    let epsilon: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eta: Vec<f64> = (0..2 * n)
        .map(|_| p.delta * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut h = vec![0.0; 2 * n];
    h[0] = rng.sample(StandardNormal);
    for t in 1..2 * n {
        h[t] = (p.gamma + p.fi * (h[t - 1] - p.gamma) + p.sigma * eta[t]).exp();
    }
    Ok(h[n..]
        .iter()
        .zip(&epsilon)
        .map(|(h, e)| h.sqrt() * e)
        .collect())
}

/// `n_curves` curves `a * SV + b` on `grid`, using [`SvParams::CURVE`].
pub fn sv_curves(n_curves: usize, grid: Grid, a: f64, b: f64, seed: RngSeed) -> Result<FunctionalSample> {
    if n_curves < 1 {
        return Err(Error::InvalidParameter("need at least one curve".into()));
    }
    let curves = (0..n_curves)
        .into_par_iter()
        .map(|i| sv_curve(grid, a, b, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    FunctionalSample::new(curves)
}

fn sv_curve(grid: Grid, a: f64, b: f64, seed: RngSeed, i: u64) -> Result<Curve> {
    let mut rng = seed.stream(i);
    let path = sv_path(grid.n_points(), &SvParams::CURVE, &mut rng)?;
    Curve::new(grid, path.into_iter().map(|z| a * z + b).collect())
}

/// Scale and level of the two regimes: `a * SV + b` and `c * SV + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePair {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct TwoRegimeSample {
    pub sample: FunctionalSample,
    /// 0 for the first regime, 1 for the second, per curve.
    pub regimes: Vec<u8>,
    /// Position of each curve in the pooled `m + n` curves.
    pub pool_index: Vec<usize>,
}

/// `eps` curves drawn without replacement, in random order, from a pool of
/// `m` first-regime and `n` second-regime curves.
///
/// The pool is the concatenation of `sv_curves(m, .., a, b, seed.child(0))`
/// and `sv_curves(n, .., c, d, seed.child(1))`; only the chosen curves are
/// generated.
pub fn two_regime_sample(
    eps: usize,
    m: usize,
    n: usize,
    regimes: RegimePair,
    grid: Grid,
    seed: RngSeed,
) -> Result<TwoRegimeSample> {
    let pool = m + n;
    if eps > pool {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {eps} curves from a pool of {pool}"
        )));
    }
    if eps == 0 {
        return Err(Error::InvalidParameter("need at least one curve".into()));
    }
    let mut rng = seed.child(2).stream(0);
    let mut chosen = index::sample(&mut rng, pool, eps).into_vec();
    chosen.shuffle(&mut rng);

    let curves = chosen
        .par_iter()
        .map(|&j| {
            if j < m {
                sv_curve(grid, regimes.a, regimes.b, seed.child(0), j as u64)
            } else {
                sv_curve(grid, regimes.c, regimes.d, seed.child(1), (j - m) as u64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoRegimeSample {
        sample: FunctionalSample::new(curves)?,
        regimes: chosen.iter().map(|&j| u8::from(j >= m)).collect(),
        pool_index: chosen,
    })
}

/// FAR(1) with a Gaussian kernel and sine/cosine innovations.
///
/// `X_{i+1}(t) = ∫ psi(t, s) X_i(s) ds + e_{i+1}(t)` with
/// `psi(t, s) = C exp(-(t'^2 + s'^2) / 2)` in rescaled time `t' = t / T`, and
/// `e(t) = A sin(2 pi u t') + B cos(2 pi v t')`, `A, B ~ N(0, 1)`.
/// `C` is chosen so the discretized operator norm of the kernel equals `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Far1Params {
    pub grid: Grid,
    pub rho: f64,
    pub sin_freq: u32,
    pub cos_freq: u32,
}

impl Far1Params {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            rho: 0.5,
            sin_freq: 1,
            cos_freq: 1,
        }
    }

    fn shape(&self) -> Vec<f64> {
        let t_end = self.grid.t_end();
        self.grid
            .points()
            .map(|t| (-(t / t_end).powi(2) / 2.0).exp())
            .collect()
    }

    /// The constant `C` in front of the kernel.
    pub fn kernel_scale(&self) -> f64 {
        // The kernel is rank one, so its operator norm is C * ∫ g(s)^2 ds.
        let g = self.shape();
        let norm: f64 = self
            .grid
            .trapezoid_weights()
            .iter()
            .zip(&g)
            .map(|(w, v)| w * v * v)
            .sum();
        self.rho / norm
    }
}

pub fn far1_series(n_curves: usize, p: &Far1Params, seed: RngSeed) -> Result<FtsSeries> {
    if n_curves < 2 {
        return Err(Error::InvalidParameter("FAR(1) series needs at least 2 curves".into()));
    }
    if !(p.rho.is_finite() && p.rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel norm rho must be non-negative, got {}",
            p.rho
        )));
    }
    if p.rho >= 1.0 {
        log::warn!("FAR(1) kernel norm {} >= 1: the process is not stationary", p.rho);
    }
    let grid = p.grid;
    let g = p.shape();
    let weights = grid.trapezoid_weights();
    let scale = p.kernel_scale();
    let tau = std::f64::consts::TAU;
    let t_end = grid.t_end();
    let sin: Vec<f64> = grid
        .points()
        .map(|t| (tau * p.sin_freq as f64 * t / t_end).sin())
        .collect();
    let cos: Vec<f64> = grid
        .points()
        .map(|t| (tau * p.cos_freq as f64 * t / t_end).cos())
        .collect();

    let mut rng = seed.stream(0);
    let innovation = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        sin.iter().zip(&cos).map(|(s, c)| a * s + b * c).collect()
    };

    let mut curves = Vec::with_capacity(n_curves);
    let mut x = innovation(&mut rng);
    curves.push(Curve::new(grid, x.clone())?);
    for _ in 1..n_curves {
        let projection: f64 = weights
            .iter()
            .zip(&g)
            .zip(&x)
            .map(|((w, gs), xs)| w * gs * xs)
            .sum();
        let e = innovation(&mut rng);
        x = g
            .iter()
            .zip(&e)
            .map(|(gt, et)| scale * gt * projection + et)
            .collect();
        curves.push(Curve::new(grid, x.clone())?);
    }
    FtsSeries::new("far1", curves)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Wiener,
    BrownianBridge,
}

/// Wiener paths from 0 with `N(0, h)` increments, or Brownian bridges pinned at both ends.
pub fn classical_paths(kind: PathKind, n_curves: usize, grid: Grid, seed: RngSeed) -> Result<FunctionalSample> {
    if n_curves < 1 {
        return Err(Error::InvalidParameter("need at least one curve".into()));
    }
    let sd = grid.step().sqrt();
    let g = grid.n_points();
    let curves = (0..n_curves)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let mut w = vec![0.0; g];
            for t in 1..g {
                w[t] = w[t - 1] + sd * rng.sample::<f64, _>(StandardNormal);
            }
            if kind == PathKind::BrownianBridge {
                let end = w[g - 1];
                for (t, v) in w.iter_mut().enumerate() {
                    *v -= (t as f64 / (g - 1) as f64) * end;
                }
            }
            Curve::new(grid, w)
        })
        .collect::<Result<Vec<_>>>()?;
    FunctionalSample::new(curves)
}

/// Shape of an injected size outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierShape {
    /// The whisker itself, moved outward by the offset; every replacement on
    /// one side is the same curve.
    #[default]
    Envelope,
    /// The replaced curve, moved outward until it clears the whisker by the
    /// offset everywhere.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierParams {
    /// Share of curves to replace, in (0, 1).
    pub proportion: f64,
    /// Offset beyond the whisker, in whisker-band heights.
    pub magnitude: f64,
    pub kind: DepthKind,
    #[serde(default)]
    pub shape: OutlierShape,
    #[serde(default)]
    pub boxplot: BoxplotParams,
}

impl OutlierParams {
    pub fn new(proportion: f64, kind: DepthKind) -> Self {
        Self {
            proportion,
            magnitude: 2.0,
            kind,
            shape: OutlierShape::default(),
            boxplot: BoxplotParams::default(),
        }
    }
}

/// Replaces `ceil(proportion * N)` random curves by size outliers.
///
/// Each replacement lies `magnitude` times the largest whisker-band height
/// beyond one whisker of the functional boxplot of the clean series, above or
/// below at random, with the shape chosen by `p.shape`. Returns the contaminated series and the
/// sorted replaced indices; every replacement is checked to be flagged by the
/// boxplot of the contaminated series.
pub fn inject_outliers(series: &FtsSeries, p: &OutlierParams, seed: RngSeed) -> Result<(FtsSeries, Vec<usize>)> {
    if !(p.proportion > 0.0 && p.proportion < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "outlier proportion must lie in (0, 1), got {}",
            p.proportion
        )));
    }
    if !(p.magnitude.is_finite() && p.magnitude > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "outlier magnitude must be positive, got {}",
            p.magnitude
        )));
    }
    let sample = series.to_sample();
    let n = sample.len();
    let bp = functional_boxplot(&sample, p.kind, p.boxplot)?;
    let height = bp.whisker_height();
    if height <= 0.0 {
        return Err(Error::CannotConstructOutlier("zero-height boxplot band".into()));
    }
    let count = ((p.proportion * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut rng = seed.stream(0);
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();

    let offset = p.magnitude * height;
    let mut curves = series.curves().to_vec();
    for &i in &chosen {
        let up = rng.random_bool(0.5);
        curves[i] = match (p.shape, up) {
            (OutlierShape::Envelope, true) => bp.whisker_upper.map(|v| v + offset)?,
            (OutlierShape::Envelope, false) => bp.whisker_lower.map(|v| v - offset)?,
            (OutlierShape::Shifted, true) => {
                let gap = max_gap(bp.whisker_upper.values(), curves[i].values());
                curves[i].map(|v| v + gap + offset)?
            }
            (OutlierShape::Shifted, false) => {
                let gap = max_gap(curves[i].values(), bp.whisker_lower.values());
                curves[i].map(|v| v - gap - offset)?
            }
        };
    }
    let contaminated = series.with_curves(curves)?;
    let check = functional_boxplot(&contaminated.to_sample(), p.kind, p.boxplot)?;
    if let Some(&missed) = chosen.iter().find(|&&i| !check.outliers[i]) {
        return Err(Error::CannotConstructOutlier(format!(
            "replacement {missed} is not flagged by the contaminated boxplot; increase the magnitude"
        )));
    }
    Ok((contaminated, chosen))
}

/// `max_t (a(t) - b(t))`.
fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sv_demo_length_and_determinism() {
        let p = SvParams {
            gamma: 0.0,
            fi: 0.2,
            sigma: 0.5,
            delta: 0.1,
        };
        let a = sv_path(100, &p, &mut RngSeed(7).stream(0)).unwrap();
        let b = sv_path(100, &p, &mut RngSeed(7).stream(0)).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        let c = sv_path(100, &p, &mut RngSeed(8).stream(0)).unwrap();
        assert_ne!(a, c);
        assert!(sv_path(0, &p, &mut RngSeed(7).stream(0)).is_err());
    }

    #[test]
    fn sv_curves_shape_and_constant_case() {
        let grid = Grid::new(119.0, 120).unwrap();
        let s = sv_curves(5, grid, 5.0, 0.0, RngSeed(1)).unwrap();
        assert_eq!((s.len(), s.grid().n_points()), (5, 120));
        let flat = sv_curves(3, grid, 0.0, 4.0, RngSeed(1)).unwrap();
        assert!(flat.curves().iter().all(|c| c.values().iter().all(|&v| v == 4.0)));
    }

    #[test]
    fn two_regime_matches_full_pool() {
        let grid = Grid::unit(10).unwrap();
        let r = RegimePair { a: 5.0, b: 0.0, c: 1.0, d: 25.0 };
        let seed = RngSeed(42);
        let out = two_regime_sample(6, 4, 5, r, grid, seed).unwrap();
        let first = sv_curves(4, grid, 5.0, 0.0, seed.child(0)).unwrap();
        let second = sv_curves(5, grid, 1.0, 25.0, seed.child(1)).unwrap();
        for (c, &j) in out.sample.curves().iter().zip(&out.pool_index) {
            let want = if j < 4 { &first.curves()[j] } else { &second.curves()[j - 4] };
            assert_eq!(c, want);
        }
        let mut sorted = out.pool_index.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 6);
    }

    #[test]
    fn two_regime_edge_cases() {
        let grid = Grid::unit(5).unwrap();
        let r = RegimePair { a: 1.0, b: 0.0, c: 1.0, d: 10.0 };
        let out = two_regime_sample(7, 0, 7, r, grid, RngSeed(3)).unwrap();
        assert!(out.regimes.iter().all(|&g| g == 1));
        let mut full = out.pool_index.clone();
        full.sort_unstable();
        assert_eq!(full, (0..7).collect::<Vec<_>>());
        assert!(two_regime_sample(8, 3, 4, r, grid, RngSeed(3)).is_err());
    }

    #[test]
    fn far1_zero_kernel_is_iid_innovations() {
        let grid = Grid::unit(21).unwrap();
        let mut p = Far1Params::new(grid);
        p.rho = 0.0;
        let s = far1_series(5, &p, RngSeed(9)).unwrap();
        // Each curve is A sin + B cos; at t = 0 it equals B, at t = 1/4 it equals A.
        for c in s.curves() {
            let v = c.values();
            let (a, b) = (v[5], v[0]);
            for (t, x) in grid.points().zip(v) {
                let want = a * (std::f64::consts::TAU * t).sin() + b * (std::f64::consts::TAU * t).cos();
                assert!((x - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn far1_kernel_norm() {
        let p = Far1Params::new(Grid::new(2.0, 31).unwrap());
        let g = p.shape();
        let w = p.grid.trapezoid_weights();
        // Hilbert-Schmidt norm of the discretized kernel equals rho for a rank-one kernel.
        let c = p.kernel_scale();
        let hs: f64 = (0..31)
            .flat_map(|i| (0..31).map(move |j| (i, j)))
            .map(|(i, j)| w[i] * w[j] * (c * g[i] * g[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((hs - 0.5).abs() < 1e-12);
        let a = far1_series(10, &p, RngSeed(2)).unwrap();
        let b = far1_series(10, &p, RngSeed(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bridge_endpoints_are_pinned() {
        let grid = Grid::new(3.0, 50).unwrap();
        let s = classical_paths(PathKind::BrownianBridge, 20, grid, RngSeed(5)).unwrap();
        for c in s.curves() {
            assert_eq!(c.values()[0], 0.0);
            assert_eq!(c.values()[49], 0.0);
        }
        let w = classical_paths(PathKind::Wiener, 20, grid, RngSeed(5)).unwrap();
        assert!(w.curves().iter().all(|c| c.values()[0] == 0.0));
        assert_eq!(w, classical_paths(PathKind::Wiener, 20, grid, RngSeed(5)).unwrap());
    }

    #[test]
    fn inject_ten_percent() {
        let grid = Grid::new(119.0, 120).unwrap();
        let s = FtsSeries::from_sample("x", sv_curves(100, grid, 1.0, 25.0, RngSeed(11)).unwrap());
        let before = s.clone();
        for shape in [OutlierShape::Envelope, OutlierShape::Shifted] {
            let p = OutlierParams {
                shape,
                ..OutlierParams::new(0.10, DepthKind::Mbd)
            };
            let (c, idx) = inject_outliers(&s, &p, RngSeed(12)).unwrap();
            assert_eq!(idx.len(), 10);
            assert_eq!(s, before);
            let bp = functional_boxplot(&c.to_sample(), DepthKind::Mbd, BoxplotParams::default()).unwrap();
            assert!(idx.iter().all(|&i| bp.outliers[i]));
            for i in 0..100 {
                assert_eq!(c.curves()[i] == s.curves()[i], !idx.contains(&i));
            }
        }
    }

    #[test]
    fn shifted_outliers_keep_their_shape() {
        let grid = Grid::unit(30).unwrap();
        let s = FtsSeries::from_sample("x", sv_curves(40, grid, 1.0, 0.0, RngSeed(4)).unwrap());
        let p = OutlierParams {
            shape: OutlierShape::Shifted,
            ..OutlierParams::new(0.10, DepthKind::Mbd)
        };
        let (c, idx) = inject_outliers(&s, &p, RngSeed(5)).unwrap();
        let clean = functional_boxplot(&s.to_sample(), DepthKind::Mbd, BoxplotParams::default()).unwrap();
        let offset = 2.0 * clean.whisker_height();
        for &i in &idx {
            let (old, new) = (s.curves()[i].values(), c.curves()[i].values());
            let shift = new[0] - old[0];
            assert!(old.iter().zip(new).all(|(a, b)| ((b - a) - shift).abs() < 1e-9));
            let above = new.iter().zip(clean.whisker_upper.values()).all(|(y, w)| *y >= w + offset - 1e-9);
            let below = new.iter().zip(clean.whisker_lower.values()).all(|(y, w)| *y <= w - offset + 1e-9);
            assert!(above || below);
        }
    }

    #[test]
    fn inject_into_flat_series_fails() {
        let grid = Grid::unit(5).unwrap();
        let s = FtsSeries::from_sample("x", sv_curves(10, grid, 0.0, 1.0, RngSeed(1)).unwrap());
        let err = inject_outliers(&s, &OutlierParams::new(0.1, DepthKind::Cgbd), RngSeed(1)).unwrap_err();
        assert!(err.to_string().contains("cannot construct size outlier"));
    }
}
