//! Uniform sampling grids and the sampled containers built on them.
//!
//! Every integral in the crate uses the trapezoidal rule on these grids, and
//! running integrals ([`cumulative_trapezoid`]) use the same rule so that the
//! last entry of a cumulation equals [`integrate`] of the same samples.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced coordinates `start + i * spacing` for `0 <= i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAxis")]
pub struct Axis {
    start: f64,
    stop: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawAxis {
    start: f64,
    stop: f64,
    count: usize,
}

impl TryFrom<RawAxis> for Axis {
    type Error = Error;

    fn try_from(raw: RawAxis) -> Result<Self> {
        Axis::new(raw.start, raw.stop, raw.count)
    }
}

impl Axis {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidAxis("non-finite bounds".into()));
        }
        if stop <= start {
            return Err(Error::InvalidAxis(format!("stop {stop} <= start {start}")));
        }
        if count < 2 {
            return Err(Error::InvalidAxis(format!("count {count} < 2")));
        }
        Ok(Self { start, stop, count })
    }

    /// Axis on `[start, start + (count - 1) * spacing]`.
    pub fn with_spacing(start: f64, spacing: f64, count: usize) -> Result<Self> {
        Self::new(start, start + spacing * (count.max(1) - 1) as f64, count)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn width(&self) -> f64 {
        self.stop - self.start
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.stop
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    /// Nearest sample index, or `None` outside the axis.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.start) / self.spacing()).round();
        if pos < 0.0 || pos > (self.count - 1) as f64 || !pos.is_finite() {
            None
        } else {
            Some(pos as usize)
        }
    }

    /// Fractional index of `x` (unclamped).
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.start) / self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }

    /// Per-node trapezoid quadrature weights (half spacing at both ends).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.count];
        w[0] = 0.5 * h;
        w[self.count - 1] = 0.5 * h;
        w
    }
}

/// Real function sampled on an [`Axis`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1D {
    axis: Axis,
    values: Vec<f64>,
}

impl Signal1D {
    pub fn new(axis: Axis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for an axis of {} samples",
                values.len(),
                axis.count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { axis, values })
    }

    pub fn from_fn(axis: Axis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..axis.count()).map(|i| f(axis.coord(i))).collect();
        Self::new(axis, values)
    }

    pub fn zeros(axis: Axis) -> Self {
        Self {
            axis,
            values: vec![0.0; axis.count()],
        }
    }

    /// Uniform probability density on the axis interval.
    pub fn uniform(axis: Axis) -> Self {
        let v = 1.0 / axis.width();
        Self {
            axis,
            values: vec![v; axis.count()],
        }
    }

    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            axis: self.axis,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.axis, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self - other`; both must share an axis.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.axis != other.axis {
            return Err(Error::GridMismatch("signals on different axes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.axis, values)
    }

    /// Linear interpolation of the samples at `x`, zero outside the axis.
    pub fn sample(&self, x: f64) -> f64 {
        let pos = self.axis.fractional_index(x);
        let last = (self.axis.count() - 1) as f64;
        if !(0.0..=last).contains(&pos) {
            return 0.0;
        }
        let i = (pos.floor() as usize).min(self.axis.count() - 2);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Trapezoid L1 norm.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(self.axis.spacing(), self.values.iter().map(|v| v.abs()))
    }
}

/// Real function sampled on a rectangle; rows follow `y_axis`, columns `x_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    x_axis: Axis,
    y_axis: Axis,
    values: Array2<f64>,
}

impl Image2D {
    pub fn new(x_axis: Axis, y_axis: Axis, values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != y_axis.count() || cols != x_axis.count() {
            return Err(Error::ShapeMismatch(format!(
                "image is {rows}x{cols}, axes are {}x{}",
                y_axis.count(),
                x_axis.count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            x_axis,
            y_axis,
            values,
        })
    }

    /// Image on the default `[-1, 1]^2` domain.
    pub fn square(values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        let x_axis = Axis::new(-1.0, 1.0, cols)?;
        let y_axis = Axis::new(-1.0, 1.0, rows)?;
        Self::new(x_axis, y_axis, values)
    }

    /// Samples `f(x, y)` at every pixel centre.
    pub fn from_fn(x_axis: Axis, y_axis: Axis, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn((y_axis.count(), x_axis.count()), |(r, c)| {
            f(x_axis.coord(c), y_axis.coord(r))
        });
        Self::new(x_axis, y_axis, values)
    }

    pub fn zeros(x_axis: Axis, y_axis: Axis) -> Self {
        Self {
            x_axis,
            y_axis,
            values: Array2::zeros((y_axis.count(), x_axis.count())),
        }
    }

    pub fn x_axis(&self) -> &Axis {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &Axis {
        &self.y_axis
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.x_axis, self.y_axis, self.values.mapv(f))
    }

    pub fn abs(&self) -> Self {
        Self {
            x_axis: self.x_axis,
            y_axis: self.y_axis,
            values: self.values.mapv(f64::abs),
        }
    }

    /// Trapezoid double integral.
    pub fn integrate(&self) -> f64 {
        let wx = self.x_axis.trapezoid_weights();
        let wy = self.y_axis.trapezoid_weights();
        self.values
            .indexed_iter()
            .map(|((r, c), v)| v * wx[c] * wy[r])
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.abs().integrate()
    }

    /// Bilinear interpolation at `(x, y)`, zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = self.x_axis.fractional_index(x);
        let fy = self.y_axis.fractional_index(y);
        let (rows, cols) = self.values.dim();
        if fx < 0.0 || fy < 0.0 || fx > (cols - 1) as f64 || fy > (rows - 1) as f64 {
            return 0.0;
        }
        let c = (fx.floor() as usize).min(cols - 2);
        let r = (fy.floor() as usize).min(rows - 2);
        let ax = fx - c as f64;
        let ay = fy - r as f64;
        let v = &self.values;
        (1.0 - ay) * ((1.0 - ax) * v[[r, c]] + ax * v[[r, c + 1]])
            + ay * ((1.0 - ax) * v[[r + 1, c]] + ax * v[[r + 1, c + 1]])
    }
}

fn trapezoid(h: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for (i, v) in values.enumerate() {
        sum += if i == 0 || i + 1 == n { 0.5 * v } else { v };
    }
    sum * h
}

/// Trapezoidal approximation of the integral of `s` over its axis.
pub fn integrate(s: &Signal1D) -> f64 {
    trapezoid(s.axis.spacing(), s.values.iter().copied())
}

/// Running trapezoidal integral; `out[0] = 0` and `out[n-1]` equals [`integrate`].
pub fn cumulative_trapezoid(values: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * spacing;
        out.push(acc);
    }
    out
}

/// Piecewise-linear interpolation of `(xs, ys)` at `q`, clamped outside `[xs[0], xs[last]]`.
pub fn interp_monotone(xs: &[f64], ys: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} abscissae, {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NotStrictlyIncreasing(i + 1));
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(q.iter().map(|&x| interp_sorted(xs, ys, x)).collect())
}

/// Unchecked clamped linear interpolation on strictly increasing `xs`.
pub(crate) fn interp_sorted(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}
