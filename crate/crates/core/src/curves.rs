//! Discretized curves on a shared grid.
//!
//! All arithmetic is piecewise linear: evaluation between nodes, composition
//! and inversion of monotone functions use linear interpolation on the grid.

use std::sync::Arc;

use crate::error::{LdmError, Result};

/// Relative size of monotonicity violations treated as rounding noise when
/// building a [`WarpingCurve`].
const ROUNDING_TOL: f64 = 1e-12;

/// Blend weight toward the identity used to turn a non-decreasing warp into a
/// strictly increasing one.
const STRICTIFY_WEIGHT: f64 = 1e-9;

/// Ordered discretization `t_0 < t_1 < ... < t_K` of an interval `[T1, T2]`.
#[derive(Debug, Clone)]
pub struct Grid {
    t: Arc<[f64]>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.t, &other.t) || self.t[..] == other.t[..]
    }
}

impl Grid {
    /// Builds a grid from explicit nodes. Requires at least three strictly
    /// increasing finite points.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 3 {
            return Err(LdmError::arg(format!(
                "grid needs at least 3 points, got {}",
                t.len()
            )));
        }
        if let Some(index) = t.iter().position(|v| !v.is_finite()) {
            return Err(LdmError::NonFinite { index });
        }
        if let Some(k) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(LdmError::arg(format!(
                "grid not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Grid { t: t.into() })
    }

    /// Equispaced grid with `k` intervals (`k + 1` nodes) on `[t1, t2]`.
    pub fn uniform(t1: f64, t2: f64, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(LdmError::arg(format!("grid needs K >= 2, got {k}")));
        }
        if !(t1.is_finite() && t2.is_finite() && t1 < t2) {
            return Err(LdmError::arg(format!("invalid interval [{t1}, {t2}]")));
        }
        let width = t2 - t1;
        let mut t: Vec<f64> = (0..=k)
            .map(|i| t1 + width * (i as f64) / (k as f64))
            .collect();
        t[k] = t2;
        Grid::new(t)
    }

    /// Equispaced grid on `[0, 1]`.
    pub fn unit(k: usize) -> Result<Self> {
        Grid::uniform(0.0, 1.0, k)
    }

    pub fn points(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of intervals.
    pub fn k(&self) -> usize {
        self.t.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Segment index `i` with `t_i <= t < t_{i+1}` (the last segment for the
    /// right endpoint) and the fractional position inside it.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.start(), self.end());
        if !(lo..=hi).contains(&t) {
            return Err(LdmError::Domain { t, lo, hi });
        }
        let last = self.t.len() - 1;
        if t == hi {
            return Ok((last - 1, 1.0));
        }
        let i = self.t.partition_point(|&node| node <= t) - 1;
        let frac = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        Ok((i, frac))
    }

    /// Trapezoid-rule integral of values sampled on this grid.
    pub fn integrate(&self, y: &[f64]) -> f64 {
        self.t
            .windows(2)
            .zip(y.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// Anything sampled on a [`Grid`].
pub trait Sampled {
    fn grid(&self) -> &Grid;
    fn values(&self) -> &[f64];
}

/// Piecewise-linear interpolation of `(xs, ys)` at `x`, exact at nodes.
fn interpolate(grid: &Grid, ys: &[f64], x: f64) -> Result<f64> {
    let (i, frac) = grid.locate(x)?;
    if frac == 0.0 {
        return Ok(ys[i]);
    }
    if frac == 1.0 {
        return Ok(ys[i + 1]);
    }
    Ok(ys[i] + frac * (ys[i + 1] - ys[i]))
}

/// Inverse of the piecewise-linear interpolant of an increasing sequence
/// `ys` over nodes `xs`, evaluated at `v`. Targets outside `[ys_0, ys_K]` are
/// clamped to the end nodes.
pub fn inverse_at(xs: &[f64], ys: &[f64], v: f64) -> f64 {
    let last = ys.len() - 1;
    if v <= ys[0] {
        return xs[0];
    }
    if v >= ys[last] {
        return xs[last];
    }
    // ys[m] <= v < ys[m + 1]
    let m = ys.partition_point(|&y| y <= v) - 1;
    let dy = ys[m + 1] - ys[m];
    if dy <= 0.0 {
        return xs[m];
    }
    let x = xs[m] + (v - ys[m]) / dy * (xs[m + 1] - xs[m]);
    x.clamp(xs[m], xs[m + 1])
}

/// A real function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    y: Vec<f64>,
}

impl Sampled for Curve {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.y
    }
}

impl Curve {
    pub fn new(grid: Grid, y: Vec<f64>) -> Result<Self> {
        if y.len() != grid.len() {
            return Err(LdmError::arg(format!(
                "curve has {} values for a grid of {} points",
                y.len(),
                grid.len()
            )));
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(LdmError::NonFinite { index });
        }
        Ok(Curve { grid, y })
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let y = grid.points().iter().map(|&t| f(t)).collect();
        Curve::new(grid.clone(), y)
    }

    /// The curve `y = t`.
    pub fn identity(grid: &Grid) -> Self {
        Curve {
            grid: grid.clone(),
            y: grid.points().to_vec(),
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Curve::new(grid.clone(), vec![value; grid.len()])
    }

    pub fn into_values(self) -> Vec<f64> {
        self.y
    }

    /// Linear interpolation at `t`; exact at grid nodes.
    pub fn eval(&self, t: f64) -> Result<f64> {
        interpolate(&self.grid, &self.y, t)
    }

    /// Pointwise transform of the values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Curve> {
        Curve::new(self.grid.clone(), self.y.iter().map(|&v| f(v)).collect())
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            y: self.y.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self ∘ g`, evaluated at the grid nodes.
    pub fn compose(&self, g: &WarpingCurve) -> Result<Curve> {
        if self.grid != g.grid {
            return Err(LdmError::GridMismatch);
        }
        let y = g
            .y
            .iter()
            .map(|&s| interpolate(&self.grid, &self.y, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Curve {
            grid: self.grid.clone(),
            y,
        })
    }

    /// Divides by the sup norm so that `max |y| = 1`.
    pub fn sup_normalize(&self) -> Result<Curve> {
        let norm = self.sup_norm();
        if norm == 0.0 {
            return Err(LdmError::degenerate("cannot normalize an all-zero curve"));
        }
        Ok(Curve {
            grid: self.grid.clone(),
            y: self.y.iter().map(|v| v / norm).collect(),
        })
    }

    /// Cumulative total variation `T(c)(t) = TV(c; [T1, t])`.
    ///
    /// Commutes with warping, `T(c ∘ h) = T(c) ∘ h`, and is non-decreasing by
    /// construction. For non-decreasing input this is exactly `c - c(T1)`.
    pub fn monotonize(&self) -> Curve {
        let y0 = self.y[0];
        let y = if self.y.windows(2).all(|w| w[1] >= w[0]) {
            self.y.iter().map(|v| v - y0).collect()
        } else {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(self.y.len());
            out.push(0.0);
            for w in self.y.windows(2) {
                acc += (w[1] - w[0]).abs();
                out.push(acc);
            }
            out
        };
        Curve {
            grid: self.grid.clone(),
            y,
        }
    }

    /// Centered moving mean over `window` nodes; windows are truncated at the
    /// ends of the grid.
    pub fn moving_average(&self, window: usize) -> Result<Curve> {
        if window == 0 || window.is_multiple_of(2) {
            return Err(LdmError::arg(format!(
                "moving-average window must be odd and positive, got {window}"
            )));
        }
        if window > self.y.len() {
            return Err(LdmError::arg(format!(
                "window {window} exceeds the {} grid points",
                self.y.len()
            )));
        }
        if window == 1 {
            return Ok(self.clone());
        }
        let half = window / 2;
        let last = self.y.len() - 1;
        let y = (0..=last)
            .map(|k| {
                let lo = k.saturating_sub(half);
                let hi = (k + half).min(last);
                // offsets from the centre keep constant stretches exact
                let centre = self.y[k];
                let dev: f64 = self.y[lo..=hi].iter().map(|v| v - centre).sum();
                centre + dev / (hi - lo + 1) as f64
            })
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            y,
        })
    }

    /// `Some(true)` if strictly increasing, `Some(false)` if strictly
    /// decreasing, `None` otherwise.
    pub fn strict_direction(&self) -> Option<bool> {
        if self.y.windows(2).all(|w| w[1] > w[0]) {
            Some(true)
        } else if self.y.windows(2).all(|w| w[1] < w[0]) {
            Some(false)
        } else {
            None
        }
    }

    /// Sup-norm distance to another curve on the same grid.
    pub fn sup_distance(&self, other: &impl Sampled) -> f64 {
        self.y
            .iter()
            .zip(other.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A strictly increasing map of `[T1, T2]` onto itself fixing both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpingCurve {
    grid: Grid,
    y: Vec<f64>,
}

impl Sampled for WarpingCurve {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.y
    }
}

impl WarpingCurve {
    /// Validates `y` as a warping function. Values are clamped into the
    /// interval; endpoint offsets and monotonicity violations below rounding
    /// level are repaired, anything larger is rejected.
    pub fn new(grid: Grid, mut y: Vec<f64>) -> Result<Self> {
        if y.len() != grid.len() {
            return Err(LdmError::arg(format!(
                "warp has {} values for a grid of {} points",
                y.len(),
                grid.len()
            )));
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(LdmError::NonFinite { index });
        }
        let (lo, hi) = (grid.start(), grid.end());
        let tol = ROUNDING_TOL * (hi - lo).max(lo.abs().max(hi.abs()));
        let last = y.len() - 1;
        if (y[0] - lo).abs() > tol || (y[last] - hi).abs() > tol {
            return Err(LdmError::arg(format!(
                "warp endpoints ({}, {}) differ from the interval [{lo}, {hi}]",
                y[0], y[last]
            )));
        }
        for v in y.iter_mut() {
            *v = v.clamp(lo, hi);
        }
        y[0] = lo;
        y[last] = hi;

        let worst = y
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::NEG_INFINITY, f64::max);
        if worst >= 0.0 {
            if worst > tol {
                let index = y.windows(2).position(|w| w[1] <= w[0]).unwrap_or(0) + 1;
                return Err(LdmError::NotMonotone { index });
            }
            y = strictify(grid.points(), isotonic_increasing(&y), STRICTIFY_WEIGHT);
            if let Some(k) = y.windows(2).position(|w| w[1] <= w[0]) {
                return Err(LdmError::NotMonotone { index: k + 1 });
            }
        }
        Ok(WarpingCurve { grid, y })
    }

    /// Projects arbitrary values onto the set of warping functions: clamps to
    /// the interval, takes the isotonic (pool-adjacent-violators) fit, pins
    /// both endpoints and removes flat stretches.
    pub fn project(grid: &Grid, y: &[f64]) -> Result<Self> {
        if y.len() != grid.len() {
            return Err(LdmError::arg("projected values do not match grid length"));
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(LdmError::NonFinite { index });
        }
        let (lo, hi) = (grid.start(), grid.end());
        let mut v: Vec<f64> = y.iter().map(|x| x.clamp(lo, hi)).collect();
        let last = v.len() - 1;
        v[0] = lo;
        v[last] = hi;
        let mut v = isotonic_increasing(&v);
        v[0] = lo;
        v[last] = hi;
        if v.windows(2).any(|w| w[1] <= w[0]) {
            v = strictify(grid.points(), v, STRICTIFY_WEIGHT);
        }
        WarpingCurve::new(grid.clone(), v)
    }

    pub fn identity(grid: &Grid) -> Self {
        WarpingCurve {
            grid: grid.clone(),
            y: grid.points().to_vec(),
        }
    }

    /// Samples a warping function given in closed form.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let y = grid.points().iter().map(|&t| f(t)).collect();
        WarpingCurve::new(grid.clone(), y)
    }

    /// Builds `h` on `grid` from its inverse `h^{-1}` sampled on a (typically
    /// finer) grid over the same interval.
    pub fn from_inverse_values(grid: &Grid, inv_grid: &Grid, inv: &[f64]) -> Result<Self> {
        if inv_grid.start() != grid.start() || inv_grid.end() != grid.end() {
            return Err(LdmError::arg("inverse sampled on a different interval"));
        }
        let y: Vec<f64> = grid
            .points()
            .iter()
            .map(|&t| inverse_at(inv_grid.points(), inv, t))
            .collect();
        WarpingCurve::project(grid, &y)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.y
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        interpolate(&self.grid, &self.y, t)
    }

    /// Piecewise-linear inverse, evaluated back on the grid nodes.
    pub fn invert(&self) -> WarpingCurve {
        let xs = self.grid.points();
        let mut y: Vec<f64> = xs.iter().map(|&t| inverse_at(xs, &self.y, t)).collect();
        let last = y.len() - 1;
        y[0] = xs[0];
        y[last] = xs[last];
        if y.windows(2).all(|w| w[1] > w[0]) {
            WarpingCurve {
                grid: self.grid.clone(),
                y,
            }
        } else {
            // inverse of a very steep stretch can collapse onto one node
            WarpingCurve {
                grid: self.grid.clone(),
                y: strictify(xs, isotonic_increasing(&y), STRICTIFY_WEIGHT),
            }
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &WarpingCurve) -> Result<WarpingCurve> {
        if self.grid != inner.grid {
            return Err(LdmError::GridMismatch);
        }
        let y = inner
            .y
            .iter()
            .map(|&s| interpolate(&self.grid, &self.y, s))
            .collect::<Result<Vec<_>>>()?;
        WarpingCurve::project(&self.grid, &y)
    }

    pub fn as_curve(&self) -> Curve {
        Curve {
            grid: self.grid.clone(),
            y: self.y.clone(),
        }
    }

    pub fn sup_distance(&self, other: &impl Sampled) -> f64 {
        self.as_curve().sup_distance(other)
    }
}

/// Least-squares non-decreasing fit (pool adjacent violators, unit weights).
pub fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        let mut mean = v;
        let mut size = 1;
        while let Some(&(prev_mean, prev_size)) = blocks.last() {
            if prev_mean <= mean {
                break;
            }
            blocks.pop();
            let total = prev_size + size;
            mean = (prev_mean * prev_size as f64 + mean * size as f64) / total as f64;
            size = total;
        }
        blocks.push((mean, size));
    }
    blocks
        .into_iter()
        .flat_map(|(mean, size)| std::iter::repeat_n(mean, size))
        .collect()
}

/// Blends a non-decreasing sequence with the identity on `t` so that every
/// flat stretch becomes strictly increasing; endpoints are preserved when
/// they already match `t`.
fn strictify(t: &[f64], y: Vec<f64>, weight: f64) -> Vec<f64> {
    let last = y.len() - 1;
    let mut out: Vec<f64> = y
        .iter()
        .zip(t)
        .map(|(v, s)| (1.0 - weight) * v + weight * s)
        .collect();
    out[0] = y[0];
    out[last] = y[last];
    out
}

/// Fills gaps in a series sampled at times `t` by linear interpolation
/// between the nearest present neighbours.
pub fn impute_linear_at(t: &[f64], y: &[Option<f64>]) -> Result<Vec<f64>> {
    if t.len() != y.len() {
        return Err(LdmError::arg("time and value vectors differ in length"));
    }
    if y.is_empty() {
        return Ok(Vec::new());
    }
    let last = y.len() - 1;
    if y[0].is_none() || y[last].is_none() {
        return Err(LdmError::arg(
            "leading or trailing gap cannot be imputed by interpolation",
        ));
    }
    let mut out = Vec::with_capacity(y.len());
    let mut left = 0;
    for k in 0..y.len() {
        match y[k] {
            Some(v) => {
                out.push(v);
                left = k;
            }
            None => {
                let right = (k + 1..y.len())
                    .find(|&m| y[m].is_some())
                    .expect("trailing entry is present");
                let (yl, yr) = (y[left].unwrap(), y[right].unwrap());
                let w = (t[k] - t[left]) / (t[right] - t[left]);
                out.push(yl + w * (yr - yl));
            }
        }
    }
    Ok(out)
}

/// [`impute_linear_at`] for equally spaced observations.
pub fn impute_linear(y: &[Option<f64>]) -> Result<Vec<f64>> {
    let t: Vec<f64> = (0..y.len()).map(|k| k as f64).collect();
    impute_linear_at(&t, y)
}

/// An `n × p` panel of curves on one grid: individual `i`, component `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSample {
    n: usize,
    p: usize,
    grid: Grid,
    curves: Vec<Curve>,
}

impl MultiSample {
    /// Builds a panel from rows of curves (`rows[i][j]`).
    pub fn new(rows: Vec<Vec<Curve>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(LdmError::arg("sample has no individuals"));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(LdmError::arg("sample has no components"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(LdmError::arg(format!(
                "individual {i} has {} components, expected {p}",
                rows[i].len()
            )));
        }
        let grid = rows[0][0].grid.clone();
        let curves: Vec<Curve> = rows.into_iter().flatten().collect();
        if curves.iter().any(|c| c.grid != grid) {
            return Err(LdmError::GridMismatch);
        }
        Ok(MultiSample {
            n,
            p,
            grid,
            curves,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> &Curve {
        &self.curves[i * self.p + j]
    }

    /// All curves of component `j`, ordered by individual.
    pub fn component(&self, j: usize) -> Vec<&Curve> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Row-major iterator over `(i, j, curve)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Curve)> {
        self.curves
            .iter()
            .enumerate()
            .map(move |(k, c)| (k / self.p, k % self.p, c))
    }

    /// Applies `f` to every curve, keeping the panel layout.
    pub fn try_map(&self, f: impl Fn(&Curve) -> Result<Curve>) -> Result<MultiSample> {
        let curves = self.curves.iter().map(f).collect::<Result<Vec<_>>>()?;
        if curves.iter().any(|c| c.grid != self.grid) {
            return Err(LdmError::GridMismatch);
        }
        Ok(MultiSample {
            n: self.n,
            p: self.p,
            grid: self.grid.clone(),
            curves,
        })
    }
}
