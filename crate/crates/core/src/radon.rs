//! Parallel-beam Radon transform and filtered back-projection.
//!
//! Projections follow `s̃(t, θ) = ∫ s(x) δ(t - x·ξ_θ) dx` with
//! `ξ_θ = (cos θ, sin θ)` and angles `θ_k = kπ/K`, so translating the image
//! by `(x0, y0)` shifts every projection by `x0 cos θ + y0 sin θ`.

use std::f64::consts::PI;

use ndarray::{Array2, Axis as NdAxis};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Axis, Image2D, Signal1D};

/// Radon-domain samples, rows indexed by offset `t`, columns by angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    t_axis: Axis,
    angles: Vec<f64>,
    values: Array2<f64>,
}

impl Sinogram {
    pub fn new(t_axis: Axis, angles: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (t_axis.count(), angles.len()) {
            return Err(Error::ShapeMismatch(format!(
                "sinogram is {:?}, expected ({}, {})",
                values.dim(),
                t_axis.count(),
                angles.len()
            )));
        }
        if angles.is_empty() {
            return Err(Error::InvalidParameter("sinogram needs at least one angle".into()));
        }
        if let Some(i) = angles.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NotStrictlyIncreasing(i + 1));
        }
        if angles[0] < 0.0 || *angles.last().unwrap() >= PI {
            return Err(Error::InvalidParameter("angles must lie in [0, pi)".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            t_axis,
            angles,
            values,
        })
    }

    /// Assembles a sinogram from per-angle projections on a shared axis.
    pub fn from_columns(t_axis: Axis, angles: Vec<f64>, columns: &[Vec<f64>]) -> Result<Self> {
        let mut values = Array2::zeros((t_axis.count(), columns.len()));
        for (k, col) in columns.iter().enumerate() {
            if col.len() != t_axis.count() {
                return Err(Error::ShapeMismatch(format!("column {k} has {} samples", col.len())));
            }
            values.column_mut(k).iter_mut().zip(col).for_each(|(d, s)| *d = *s);
        }
        Self::new(t_axis, angles, values)
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

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    /// Projection at angle index `k`.
    pub fn column(&self, k: usize) -> Signal1D {
        Signal1D::new(self.t_axis, self.values.column(k).to_vec()).expect("validated on construction")
    }

    pub fn columns(&self) -> Vec<Signal1D> {
        (0..self.n_angles()).map(|k| self.column(k)).collect()
    }

    /// Trapezoid integral of every projection.
    pub fn masses(&self) -> Vec<f64> {
        let w = self.t_axis.trapezoid_weights();
        self.values
            .axis_iter(NdAxis(1))
            .map(|c| c.iter().zip(&w).map(|(v, w)| v * w).sum())
            .collect()
    }
}

/// `θ_k = kπ/n` for `k < n`; π itself is excluded.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / n as f64).collect()
}

/// Largest distance from the origin to a corner of the image domain.
fn corner_radius(img_x: &Axis, img_y: &Axis) -> f64 {
    let xm = img_x.start().abs().max(img_x.stop().abs());
    let ym = img_y.start().abs().max(img_y.stop().abs());
    xm.hypot(ym)
}

/// Offset axis covering `[-R, R]` (R = corner radius) at exactly the pixel
/// pitch, symmetric about a sample at `t = 0`.
pub fn default_t_axis(img_x: &Axis, img_y: &Axis) -> Axis {
    let radius = corner_radius(img_x, img_y);
    let pitch = img_x.spacing().min(img_y.spacing());
    let half = (radius / pitch - 1e-9).ceil() as usize;
    Axis::with_spacing(-(half as f64) * pitch, pitch, 2 * half + 1).expect("radius is positive")
}

/// Offset axis `[-R, R]` with an explicit sample count.
pub fn t_axis_with_count(img_x: &Axis, img_y: &Axis, n_offsets: usize) -> Result<Axis> {
    let radius = corner_radius(img_x, img_y);
    Axis::new(-radius, radius, n_offsets)
}

/// Line integrals of `img` at `n_angles` equally spaced angles.
///
/// Each projection samples the bilinear interpolant of the image along the
/// line `x·ξ_θ = t` at the pixel pitch and sums.
pub fn radon_forward(img: &Image2D, n_angles: usize, t_axis: &Axis) -> Result<Sinogram> {
    if n_angles < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 angles, got {n_angles}")));
    }
    let angles = uniform_angles(n_angles);
    let radius = corner_radius(img.x_axis(), img.y_axis());
    let du = img.x_axis().spacing().min(img.y_axis().spacing());
    let half = (radius / du).ceil() as i64;
    let us: Vec<f64> = (-half..=half).map(|k| k as f64 * du).collect();
    let ts = t_axis.coords();

    let columns: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&theta| {
            let (sin, cos) = theta.sin_cos();
            ts.iter()
                .map(|&t| {
                    let (bx, by) = (t * cos, t * sin);
                    us.iter().map(|&u| img.sample(bx - u * sin, by + u * cos)).sum::<f64>() * du
                })
                .collect()
        })
        .collect();
    Sinogram::from_columns(*t_axis, angles, &columns)
}

/// Frequency weighting applied on top of the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RampWindow {
    /// Pure `|ξ|`.
    #[default]
    None,
    /// `|ξ| cos(πξ / 2ξ_max)` apodization.
    Cosine,
}

/// Frequency response of the band-limited ramp (spatial Ram-Lak kernel) on a
/// zero-padded grid of `n` samples with spacing `tau`.
fn ramp_response(n: usize, tau: f64, window: RampWindow) -> Vec<Complex<f64>> {
    let mut kernel = vec![Complex::new(0.0, 0.0); n];
    for (i, k) in kernel.iter_mut().enumerate() {
        let m = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
        let v = if m == 0 {
            1.0 / (4.0 * tau * tau)
        } else if m % 2 == 0 {
            0.0
        } else {
            -1.0 / ((m * m) as f64 * PI * PI * tau * tau)
        };
        *k = Complex::new(v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut kernel);
    if window == RampWindow::Cosine {
        for (i, k) in kernel.iter_mut().enumerate() {
            let m = if i <= n / 2 { i as f64 } else { (n - i) as f64 };
            *k *= (PI * m / n as f64).cos();
        }
    }
    kernel
}

/// Filtered back-projection onto the grid `x_axis × y_axis`.
pub fn radon_inverse(sino: &Sinogram, x_axis: &Axis, y_axis: &Axis, window: RampWindow) -> Result<Image2D> {
    let k_angles = sino.n_angles();
    if k_angles < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 angles, got {k_angles}")));
    }
    let t_axis = *sino.t_axis();
    let nt = t_axis.count();
    let tau = t_axis.spacing();
    let padded = (2 * nt).next_power_of_two().max(64);
    let response = ramp_response(padded, tau, window);
    let fft = FftPlanner::new().plan_fft_forward(padded);
    let ifft = FftPlanner::new().plan_fft_inverse(padded);

    let filtered: Vec<Vec<f64>> = (0..k_angles)
        .into_par_iter()
        .map(|k| {
            let mut buf: Vec<Complex<f64>> = sino
                .values
                .column(k)
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                .take(padded)
                .collect();
            fft.process(&mut buf);
            buf.iter_mut().zip(&response).for_each(|(b, r)| *b *= r);
            ifft.process(&mut buf);
            let scale = tau / padded as f64;
            buf[..nt].iter().map(|c| c.re * scale).collect()
        })
        .collect();

    let trig: Vec<(f64, f64)> = sino.angles.iter().map(|a| a.sin_cos()).collect();
    let weight = PI / k_angles as f64;
    let xs = x_axis.coords();
    let rows: Vec<Vec<f64>> = (0..y_axis.count())
        .into_par_iter()
        .map(|r| {
            let y = y_axis.coord(r);
            xs.iter()
                .map(|&x| {
                    let mut acc = 0.0;
                    for (q, &(sin, cos)) in filtered.iter().zip(&trig) {
                        let pos = t_axis.fractional_index(x * cos + y * sin);
                        if pos < 0.0 || pos > (nt - 1) as f64 {
                            continue;
                        }
                        let i = (pos.floor() as usize).min(nt - 2);
                        let frac = pos - i as f64;
                        acc += q[i] * (1.0 - frac) + q[i + 1] * frac;
                    }
                    acc * weight
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn((y_axis.count(), x_axis.count()), |(r, c)| rows[r][c]);
    Image2D::new(*x_axis, *y_axis, values)
}

/// Mask of pixels inside the disk inscribed in the image domain.
pub fn inscribed_disk(x_axis: &Axis, y_axis: &Axis) -> Array2<bool> {
    let cx = 0.5 * (x_axis.start() + x_axis.stop());
    let cy = 0.5 * (y_axis.start() + y_axis.stop());
    let radius = 0.5 * x_axis.width().min(y_axis.width());
    Array2::from_shape_fn((y_axis.count(), x_axis.count()), |(r, c)| {
        (x_axis.coord(c) - cx).hypot(y_axis.coord(r) - cy) <= radius
    })
}

/// `‖a - b‖₂ / ‖b‖₂` restricted to the inscribed disk.
pub fn relative_l2_in_disk(a: &Image2D, b: &Image2D) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let mask = inscribed_disk(b.x_axis(), b.y_axis());
    let (mut num, mut den) = (0.0, 0.0);
    for ((m, x), y) in mask.iter().zip(a.values()).zip(b.values()) {
        if *m {
            num += (x - y).powi(2);
            den += y * y;
        }
    }
    Ok((num / den).sqrt())
}
