use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::Axis;
use crate::transforms1d::transport_weights;

use super::RscdtFeature;

/// Weighted, flattened transform features; Euclidean distances between
/// them discretize the transform-domain norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatFeature(Vec<f64>);

impl FlatFeature {
    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn distance_sq(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).powi(2)).sum()
    }
}

/// `sqrt(r · w_i · Δθ)` per offset node: uniform reference density `r`,
/// [`transport_weights`] `w_i` in `t`, rectangle rule over the periodic angle grid.
pub(crate) fn star_weights(t_axis: &Axis, n_angles: usize) -> Vec<f64> {
    let density = 1.0 / t_axis.width();
    let d_theta = PI / n_angles as f64;
    transport_weights(t_axis)
        .iter()
        .map(|w| (density * w * d_theta).sqrt())
        .collect()
}

fn mass_weight(n_angles: usize) -> f64 {
    (PI / n_angles as f64).sqrt()
}

/// Weighted star entries, skipping nodes of zero weight.
pub(crate) fn push_weighted(out: &mut Vec<f64>, star: &[f64], weights: &[f64]) {
    out.extend(star.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(v, w)| v * w));
}

/// Flattens an RSCDT feature angle by angle as
/// `[w·pos_star | √Δθ·pos_mass | w·neg_star | √Δθ·neg_mass]`, where star
/// nodes of zero quadrature weight are left out.
pub fn flatten(f: &RscdtFeature) -> FlatFeature {
    let weights = star_weights(f.t_axis(), f.n_angles());
    let kept = weights.iter().filter(|w| **w > 0.0).count();
    let wm = mass_weight(f.n_angles());
    let mut out = Vec::with_capacity(f.n_angles() * (2 * kept + 2));
    for t in f.tuples() {
        push_weighted(&mut out, t.pos_star.values(), &weights);
        out.push(wm * t.pos_mass);
        push_weighted(&mut out, t.neg_star.values(), &weights);
        out.push(wm * t.neg_mass);
    }
    FlatFeature(out)
}
