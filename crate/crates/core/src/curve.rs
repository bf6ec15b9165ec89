//! Curves sampled on a shared uniform grid, plus the two discretized measures
//! everything else is built on: trapezoidal integration and the point-count
//! fraction used in place of Lebesgue measure ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `n_points` over `[0, t_end]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    t_end: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(t_end: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 grid points, got {n_points}"
            )));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "interval end must be finite and positive, got {t_end}"
            )));
        }
        Ok(Self { t_end, n_points })
    }

    /// Unit interval with `n_points` points.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(1.0, n_points)
    }

    pub fn t_start(&self) -> f64 {
        0.0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Spacing `h = T / (G - 1)`.
    pub fn step(&self) -> f64 {
        self.t_end / (self.n_points - 1) as f64
    }

    /// Location of grid point `i`. The last point is exactly `t_end`.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.t_end
        } else {
            self.t_end * i as f64 / (self.n_points - 1) as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Trapezoid weights: `h/2` at the ends, `h` inside.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.n_points];
        w[0] = h / 2.0;
        w[self.n_points - 1] = h / 2.0;
        w
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[0, {}] with {} points", self.t_end, self.n_points)
    }
}

/// One functional observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_points()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise `f(self, other)`.
    pub fn zip_map(&self, other: &Curve, f: impl Fn(f64, f64) -> f64) -> Result<Curve> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Curve::new(self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Curve> {
        Curve::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }
}

/// Trapezoid-rule approximation of the integral of `c` over `[0, T]`.
pub fn integrate(c: &Curve) -> f64 {
    trapezoid(c.values(), c.grid().step())
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Share of grid points at which the predicate holds.
///
/// This is the discretization of `λ(A) / λ([0, T])` used throughout the crate.
pub fn fraction_where<I>(flags: I) -> f64
where
    I: IntoIterator<Item = bool>,
{
    let (hits, total) = flags
        .into_iter()
        .fold((0usize, 0usize), |(h, t), f| (h + usize::from(f), t + 1));
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// An ordered collection of curves on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    curves: Vec<Curve>,
}

impl FunctionalSample {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        let grid = *curves.first().ok_or(Error::EmptySample)?.grid();
        for c in &curves[1..] {
            grid.ensure_same(c.grid())?;
        }
        Ok(Self { grid, curves })
    }

    /// Build from raw rows, one row per curve.
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(grid, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
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

    pub fn into_curves(self) -> Vec<Curve> {
        self.curves
    }

    pub fn get(&self, i: usize) -> Option<&Curve> {
        self.curves.get(i)
    }

    pub(crate) fn rows(&self) -> Vec<&[f64]> {
        self.curves.iter().map(Curve::values).collect()
    }

    /// Pointwise arithmetic mean of all curves.
    pub fn mean(&self) -> Curve {
        pointwise_mean(self.grid, self.curves.iter().map(Curve::values))
            .expect("sample is non-empty and finite")
    }
}

pub(crate) fn pointwise_mean<'a>(
    grid: Grid,
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<Curve> {
    let mut acc = vec![0.0; grid.n_points()];
    let mut n = 0usize;
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let n = n as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Curve::new(grid, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integrate_constant() {
        let g = Grid::new(10.0, 48).unwrap();
        let c = Curve::constant(g, 1.0).unwrap();
        assert!((integrate(&c) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_linear_is_exact() {
        let g = Grid::unit(101).unwrap();
        let c = Curve::from_fn(g, |t| t).unwrap();
        assert!((integrate(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_square_matches_trapezoid_error() {
        // Composite trapezoid on t^2 overestimates by h^2 (b - a) f''/12 = h^2 / 6.
        let g = Grid::unit(101).unwrap();
        let h = g.step();
        let expected = 1.0 / 3.0 + h * h / 6.0;
        assert!((expected - 0.333350).abs() < 1e-6);
        let c = Curve::from_fn(g, |t| t * t).unwrap();
        assert!((integrate(&c) - expected).abs() < 1e-12);
    }

    #[test]
    fn fraction_where_basics() {
        assert_eq!(fraction_where([true; 8]), 1.0);
        assert_eq!(fraction_where([false; 8]), 0.0);
        assert_eq!(fraction_where((0..10).map(|i| i % 2 == 0)), 0.5);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 1).is_err());
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(f64::NAN, 10).is_err());
        let g = Grid::new(24.0, 7).unwrap();
        assert_eq!(g.point(6), 24.0);
        assert_eq!(g.point(0), 0.0);
    }

    #[test]
    fn curve_rejects_bad_values() {
        let g = Grid::unit(3).unwrap();
        assert!(matches!(
            Curve::new(g, vec![1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            Curve::new(g, vec![1.0, f64::INFINITY, 2.0]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn sample_rejects_mixed_grids() {
        let a = Curve::constant(Grid::unit(3).unwrap(), 0.0).unwrap();
        let b = Curve::constant(Grid::unit(4).unwrap(), 0.0).unwrap();
        assert!(matches!(
            FunctionalSample::new(vec![a, b]),
            Err(Error::GridMismatch { .. })
        ));
        assert!(matches!(
            FunctionalSample::new(vec![]),
            Err(Error::EmptySample)
        ));
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            f in prop::collection::vec(-1e3f64..1e3, 12),
            g in prop::collection::vec(-1e3f64..1e3, 12),
            a in -10f64..10.0,
            b in -10f64..10.0,
        ) {
            let grid = Grid::new(3.5, 12).unwrap();
            let cf = Curve::new(grid, f).unwrap();
            let cg = Curve::new(grid, g).unwrap();
            let combo = cf.zip_map(&cg, |x, y| a * x + b * y).unwrap();
            let lhs = integrate(&combo);
            let rhs = a * integrate(&cf) + b * integrate(&cg);
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn fraction_of_complement(flags in prop::collection::vec(any::<bool>(), 2..64)) {
            let p = fraction_where(flags.iter().copied());
            let q = fraction_where(flags.iter().map(|f| !f));
            prop_assert!((p + q - 1.0).abs() < 1e-15);
        }
    }
}
