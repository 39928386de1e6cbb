use crate::error::{Error, Result};
use crate::radon::Sinogram;
use crate::transforms1d::{warp_signal, AffineWarp};

/// One increasing affine warp of the offset variable per projection angle.
///
/// Composition is angle-wise, so these form a group with the identity warp
/// as unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonWarp(Vec<AffineWarp>);

impl RadonWarp {
    pub fn new(per_angle: Vec<AffineWarp>) -> Self {
        Self(per_angle)
    }

    pub fn identity(n_angles: usize) -> Self {
        Self(vec![AffineWarp::IDENTITY; n_angles])
    }

    /// Warp induced by translating the image by `(x0, y0)`:
    /// `g^θ(t) = t - x0 cos θ - y0 sin θ`.
    pub fn translation(x0: f64, y0: f64, angles: &[f64]) -> Self {
        Self(
            angles
                .iter()
                .map(|a| AffineWarp::shift(x0 * a.cos() + y0 * a.sin()))
                .collect(),
        )
    }

    pub fn per_angle(&self) -> &[AffineWarp] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Angle-wise `self ∘ inner`.
    pub fn compose(&self, inner: &RadonWarp) -> Result<Self> {
        if self.len() != inner.len() {
            return Err(Error::ShapeMismatch("warps over different angle grids".into()));
        }
        Ok(Self(self.0.iter().zip(&inner.0).map(|(a, b)| a.compose(b)).collect()))
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().map(AffineWarp::inverse).collect())
    }
}

/// `(g^θ)' s̃(g^θ(t), θ)` for every angle.
pub fn warp_sinogram(sino: &Sinogram, g: &RadonWarp) -> Result<Sinogram> {
    if g.len() != sino.n_angles() {
        return Err(Error::ShapeMismatch("warp and sinogram angle counts differ".into()));
    }
    let columns: Vec<Vec<f64>> = sino
        .columns()
        .iter()
        .zip(g.per_angle())
        .map(|(c, w)| warp_signal(c, w).into_values())
        .collect();
    Sinogram::from_columns(*sino.t_axis(), sino.angles().to_vec(), &columns)
}
