//! Radon-domain transport transforms.
//!
//! [`rcdt`] applies the CDT to every normalized projection of a non-negative
//! image; [`rscdt`] applies the signed CDT to every projection of an
//! arbitrary image. Both use the uniform density on the offset axis as the
//! per-angle reference, so transport maps live on the offset grid itself.

mod flat;
mod group;

pub use flat::{flatten, FlatFeature};
pub use group::{warp_sinogram, RadonWarp};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Image2D, Signal1D};
use crate::radon::{default_t_axis, radon_forward, radon_inverse, t_axis_with_count, RampWindow, Sinogram};
use crate::transforms1d::{signed_wasserstein, QuantileFn, ScdtTuple};
use crate::transforms1d::{scdt_inverse_with, scdt_with, Reference};

/// Projection geometry shared by every transform of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_angles: usize,
    /// Offset samples; `None` picks the pixel pitch over the image diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_offsets: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_angles: 180,
            n_offsets: None,
        }
    }
}

impl FeatureConfig {
    pub fn new(n_angles: usize) -> Self {
        Self {
            n_angles,
            n_offsets: None,
        }
    }

    pub fn t_axis(&self, img: &Image2D) -> Result<Axis> {
        match self.n_offsets {
            Some(n) => t_axis_with_count(img.x_axis(), img.y_axis(), n),
            None => Ok(default_t_axis(img.x_axis(), img.y_axis())),
        }
    }

    pub fn sinogram(&self, img: &Image2D) -> Result<Sinogram> {
        radon_forward(img, self.n_angles, &self.t_axis(img)?)
    }
}

fn reference_for(t_axis: &Axis) -> Reference {
    Reference::new(&Signal1D::uniform(*t_axis)).expect("uniform density is a valid reference")
}

/// Per-angle CDT of a non-negative image.
#[derive(Debug, Clone, PartialEq)]
pub struct RcdtFeature {
    t_axis: Axis,
    angles: Vec<f64>,
    /// `ŝ(t, θ)`, rows by offset, columns by angle.
    values: Array2<f64>,
    /// Total intensity removed by normalization.
    mass: f64,
}

impl RcdtFeature {
    pub fn new(t_axis: Axis, angles: Vec<f64>, values: Array2<f64>, mass: f64) -> Result<Self> {
        if values.dim() != (t_axis.count(), angles.len()) {
            return Err(Error::ShapeMismatch(format!("feature is {:?}", values.dim())));
        }
        for (k, col) in values.columns().into_iter().enumerate() {
            if col.iter().zip(col.iter().skip(1)).any(|(a, b)| b < a) {
                return Err(Error::NonMonotone(k));
            }
        }
        Ok(Self {
            t_axis,
            angles,
            values,
            mass,
        })
    }

    pub fn t_axis(&self) -> &Axis {
        &self.t_axis
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Weighted vector whose Euclidean distances discretize the sliced
    /// 2-Wasserstein distance between normalized images.
    pub fn flatten(&self) -> FlatFeature {
        let weights = flat::star_weights(&self.t_axis, self.angles.len());
        let mut out = Vec::with_capacity(self.values.len());
        for col in self.values.columns() {
            flat::push_weighted(&mut out, &col.to_vec(), &weights);
        }
        FlatFeature::from_vec(out)
    }
}

/// R-CDT of a non-negative image with positive mass.
pub fn rcdt(img: &Image2D, cfg: &FeatureConfig) -> Result<RcdtFeature> {
    if let Some((index, &value)) = img.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeValue { index, value });
    }
    let mass = img.integrate();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let sino = cfg.sinogram(img)?;
    let mut feature = rcdt_from_sinogram(&sino)?;
    feature.mass = mass;
    Ok(feature)
}

/// R-CDT from a sinogram of non-negative projections; each column is normalized.
pub fn rcdt_from_sinogram(sino: &Sinogram) -> Result<RcdtFeature> {
    let t_axis = *sino.t_axis();
    let reference = reference_for(&t_axis);
    let columns = sino.columns();
    let maps: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|col| {
            let f = crate::transforms1d::cumulation(col)?;
            if !(f.total() > 0.0) {
                return Err(Error::ZeroMass);
            }
            Ok(reference.transport(&t_axis, f.values()))
        })
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_fn((t_axis.count(), maps.len()), |(i, k)| maps[k][i]);
    let masses = sino.masses();
    let mass = masses.iter().sum::<f64>() / masses.len() as f64;
    RcdtFeature::new(t_axis, sino.angles().to_vec(), values, mass)
}

/// Inverse R-CDT: per-angle inverse CDT scaled by the stored mass, then
/// filtered back-projection.
pub fn rcdt_inverse(f: &RcdtFeature, x_axis: &Axis, y_axis: &Axis, window: RampWindow) -> Result<Image2D> {
    let reference = reference_for(&f.t_axis);
    let columns: Vec<Vec<f64>> = f
        .values
        .columns()
        .into_iter()
        .map(|col| {
            let star = col.to_vec();
            if star.first() == star.last() {
                return Err(Error::SingularTransport);
            }
            Ok(reference.push_back(&star, &f.t_axis).into_iter().map(|v| v * f.mass).collect())
        })
        .collect::<Result<_>>()?;
    let sino = Sinogram::from_columns(f.t_axis, f.angles.clone(), &columns)?;
    radon_inverse(&sino, x_axis, y_axis, window)
}

/// Per-angle signed CDT of a signed image.
#[derive(Debug, Clone, PartialEq)]
pub struct RscdtFeature {
    t_axis: Axis,
    angles: Vec<f64>,
    tuples: Vec<ScdtTuple>,
}

impl RscdtFeature {
    pub fn new(t_axis: Axis, angles: Vec<f64>, tuples: Vec<ScdtTuple>) -> Result<Self> {
        if tuples.len() != angles.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tuples for {} angles",
                tuples.len(),
                angles.len()
            )));
        }
        if tuples.iter().any(|t| *t.axis() != t_axis) {
            return Err(Error::GridMismatch("tuple axis differs from feature axis".into()));
        }
        Ok(Self {
            t_axis,
            angles,
            tuples,
        })
    }

    pub fn zero(t_axis: Axis, angles: Vec<f64>) -> Self {
        let tuples = angles.iter().map(|_| ScdtTuple::zero(t_axis)).collect();
        Self {
            t_axis,
            angles,
            tuples,
        }
    }

    pub fn t_axis(&self) -> &Axis {
        &self.t_axis
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn tuples(&self) -> &[ScdtTuple] {
        &self.tuples
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Feature predicted for the image warped by `g` in the Radon domain:
    /// every non-trivial star component becomes `(g^θ)⁻¹ ∘ star`.
    pub fn composed_with_inverse(&self, g: &RadonWarp) -> Result<Self> {
        if g.len() != self.n_angles() {
            return Err(Error::ShapeMismatch("warp and feature angle counts differ".into()));
        }
        let tuples = self
            .tuples
            .iter()
            .zip(g.per_angle())
            .map(|(t, w)| {
                let inv = w.inverse();
                let map = |q: &QuantileFn, mass: f64| {
                    if mass == 0.0 {
                        q.clone()
                    } else {
                        QuantileFn::new(*q.axis(), q.values().iter().map(|&v| inv.apply(v)).collect())
                            .expect("increasing map keeps order")
                    }
                };
                ScdtTuple {
                    pos_star: map(&t.pos_star, t.pos_mass),
                    pos_mass: t.pos_mass,
                    neg_star: map(&t.neg_star, t.neg_mass),
                    neg_mass: t.neg_mass,
                }
            })
            .collect();
        Self::new(self.t_axis, self.angles.clone(), tuples)
    }
}

/// RSCDT of a signed image.
pub fn rscdt(img: &Image2D, cfg: &FeatureConfig) -> Result<RscdtFeature> {
    rscdt_from_sinogram(&cfg.sinogram(img)?)
}

/// Per-angle signed CDT of a sinogram.
pub fn rscdt_from_sinogram(sino: &Sinogram) -> Result<RscdtFeature> {
    let t_axis = *sino.t_axis();
    let reference = reference_for(&t_axis);
    let tuples = sino
        .columns()
        .par_iter()
        .map(|col| scdt_with(col, &reference))
        .collect();
    RscdtFeature::new(t_axis, sino.angles().to_vec(), tuples)
}

/// Per-angle inverse signed CDT, as a sinogram.
pub fn rscdt_inverse_sinogram(f: &RscdtFeature) -> Result<Sinogram> {
    let reference = reference_for(&f.t_axis);
    let columns: Vec<Vec<f64>> = f
        .tuples
        .par_iter()
        .map(|t| scdt_inverse_with(t, &reference, &f.t_axis))
        .collect::<Result<_>>()?;
    Sinogram::from_columns(f.t_axis, f.angles.clone(), &columns)
}

/// Inverse RSCDT onto `x_axis × y_axis`.
pub fn rscdt_inverse(f: &RscdtFeature, x_axis: &Axis, y_axis: &Axis, window: RampWindow) -> Result<Image2D> {
    radon_inverse(&rscdt_inverse_sinogram(f)?, x_axis, y_axis, window)
}

/// Signed sliced-Wasserstein distance: the angle-integrated squared signed
/// Wasserstein distance between corresponding projections, square-rooted.
pub fn signed_sliced_wasserstein(s1: &Image2D, s2: &Image2D, cfg: &FeatureConfig) -> Result<f64> {
    if s1.x_axis() != s2.x_axis() || s1.y_axis() != s2.y_axis() {
        return Err(Error::GridMismatch("images are sampled on different grids".into()));
    }
    let a = cfg.sinogram(s1)?;
    let b = cfg.sinogram(s2)?;
    Ok(sliced_distance_of_sinograms(&a, &b))
}

/// Signed sliced-Wasserstein distance between two sinograms on one geometry.
pub fn sliced_distance_of_sinograms(a: &Sinogram, b: &Sinogram) -> f64 {
    let d_theta = std::f64::consts::PI / a.n_angles() as f64;
    let total: f64 = (0..a.n_angles())
        .into_par_iter()
        .map(|k| signed_wasserstein(&a.column(k), &b.column(k)).powi(2))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    (total * d_theta).sqrt()
}
