use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Signal1D;

/// Increasing affine map `g(t) = scale * t - offset`, `scale > 0`.
///
/// Under composition these form a group; a plain shift by `μ` is
/// `scale = 1, offset = μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineWarp {
    scale: f64,
    offset: f64,
}

impl AffineWarp {
    pub const IDENTITY: AffineWarp = AffineWarp {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn new(scale: f64, offset: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "warp must be strictly increasing, got scale {scale}"
            )));
        }
        Ok(Self { scale, offset })
    }

    /// `g(t) = t - mu`.
    pub fn shift(mu: f64) -> Self {
        Self {
            scale: 1.0,
            offset: mu,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn apply(&self, t: f64) -> f64 {
        self.scale * t - self.offset
    }

    pub fn derivative(&self) -> f64 {
        self.scale
    }

    pub fn inverse(&self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            offset: -self.offset / self.scale,
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineWarp) -> Self {
        Self {
            scale: self.scale * inner.scale,
            offset: self.scale * inner.offset + self.offset,
        }
    }
}

/// `s_g(t) = g'(t) s(g(t))` on the grid of `s`; zero where `g(t)` leaves the axis.
pub fn warp_signal(s: &Signal1D, g: &AffineWarp) -> Signal1D {
    let axis = *s.axis();
    let values = (0..axis.count())
        .map(|i| g.derivative() * s.sample(g.apply(axis.coord(i))))
        .collect();
    Signal1D::new(axis, values).expect("interpolated values are finite")
}
