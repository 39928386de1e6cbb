//! One-dimensional transport transforms: the CDT, its signed extension
//! (SCDT), generalized inverses and the signed Wasserstein metric.

mod cdt;
mod metric;
mod scdt;
mod warp;

pub use cdt::{cdt, cdt_inverse, cumulation, generalized_inverse, Cdf, QuantileFn};
pub use metric::{quantile_distance_sq, signed_wasserstein, transform_distance_sq, wasserstein2_sq};
pub use scdt::{jordan_decompose, part_masses, scdt, scdt_inverse, ScdtTuple};
pub use warp::{warp_signal, AffineWarp};

pub(crate) use cdt::Reference;
pub(crate) use scdt::{scdt_inverse_with, scdt_with};

use crate::grid::Axis;

/// `inf { x : F(x) > y }` for a non-decreasing `F` sampled on `axis`.
///
/// Locates the first node where `F` strictly exceeds `y` and interpolates
/// linearly inside the preceding cell, so flat runs resolve to their right
/// edge. Levels outside `[F[0], F[last])` clamp to the axis ends.
pub(crate) fn pseudo_inverse(axis: &Axis, f: &[f64], y: f64) -> f64 {
    let i = f.partition_point(|&v| v <= y);
    if i == 0 {
        return axis.start();
    }
    if i == f.len() {
        return axis.stop();
    }
    let (f0, f1) = (f[i - 1], f[i]);
    let t = ((y - f0) / (f1 - f0)).clamp(0.0, 1.0);
    axis.coord(i - 1) + t * axis.spacing()
}

/// `inf { x : F(x) >= y }`, the left limit of [`pseudo_inverse`] at `y`.
pub(crate) fn pseudo_inverse_left(axis: &Axis, f: &[f64], y: f64) -> f64 {
    let i = f.partition_point(|&v| v < y);
    if i == 0 {
        return axis.start();
    }
    if i == f.len() {
        return axis.stop();
    }
    let (f0, f1) = (f[i - 1], f[i]);
    let t = ((y - f0) / (f1 - f0)).clamp(0.0, 1.0);
    axis.coord(i - 1) + t * axis.spacing()
}

/// Quadrature weights for integrals of transport maps over the reference axis.
///
/// The end nodes hold `F†(0)` and `F†(1)`, the infimum and supremum of the
/// support, which negligible tails can push to the domain edges. They get
/// weight zero and their neighbours `3h/2` (the end cells take the
/// neighbour's value); interior nodes get `h`. The rule is exact for linear
/// functions. Axes with fewer than four nodes use the trapezoid rule.
pub fn transport_weights(axis: &Axis) -> Vec<f64> {
    let n = axis.count();
    if n < 4 {
        return axis.trapezoid_weights();
    }
    let h = axis.spacing();
    let mut w = vec![h; n];
    w[0] = 0.0;
    w[n - 1] = 0.0;
    w[1] = 1.5 * h;
    w[n - 2] = 1.5 * h;
    w
}

pub(crate) fn first_decrease(values: &[f64]) -> Option<usize> {
    values.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
}
