use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, interp_sorted, Axis, Signal1D};

use super::{first_decrease, pseudo_inverse, pseudo_inverse_left};

/// Tolerated relative deviation from unit mass before a density is rejected.
const UNIT_MASS_TOL: f64 = 1e-6;

/// Running integral of a non-negative signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    axis: Axis,
    values: Vec<f64>,
}

impl Cdf {
    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        *self.values.last().expect("axis has at least two samples")
    }
}

/// Non-decreasing transport map sampled on the reference axis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFn {
    axis: Axis,
    values: Vec<f64>,
}

impl QuantileFn {
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
        if let Some(i) = first_decrease(&values) {
            return Err(Error::NonMonotone(i));
        }
        Ok(Self { axis, values })
    }

    /// Identity map of the axis onto itself.
    pub fn identity(axis: Axis) -> Self {
        Self {
            axis,
            values: axis.coords(),
        }
    }

    /// The all-zero map used for trivial signed components.
    pub fn zero(axis: Axis) -> Self {
        Self {
            axis,
            values: vec![0.0; axis.count()],
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

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn from_raw(axis: Axis, values: Vec<f64>) -> Self {
        Self { axis, values }
    }
}

/// Cumulative distribution of a non-negative signal.
pub fn cumulation(s: &Signal1D) -> Result<Cdf> {
    if let Some((index, &value)) = s.values().iter().enumerate().find(|(_, &v)| v < -1e-12) {
        return Err(Error::NegativeValue { index, value });
    }
    let clipped: Vec<f64> = s.values().iter().map(|v| v.max(0.0)).collect();
    Ok(Cdf {
        axis: *s.axis(),
        values: cumulative_trapezoid(&clipped, s.axis().spacing()),
    })
}

/// Generalized inverse `F†(y) = inf { x : F(x) > y }` evaluated at each level.
pub fn generalized_inverse(f: &Cdf, y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| pseudo_inverse(&f.axis, &f.values, v)).collect()
}

pub(crate) struct Reference {
    pub axis: Axis,
    pub cdf: Vec<f64>,
    pub coords: Vec<f64>,
}

impl Reference {
    pub fn new(r: &Signal1D) -> Result<Self> {
        if let Some((index, &value)) = r.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::NegativeValue { index, value });
        }
        let mut cdf = cumulative_trapezoid(r.values(), r.axis().spacing());
        let total = *cdf.last().unwrap();
        if (total - 1.0).abs() > UNIT_MASS_TOL {
            return Err(Error::NotNormalized(total));
        }
        // pin the endpoint so the top quantile level is hit exactly
        cdf.iter_mut().for_each(|v| *v /= total);
        Ok(Self {
            axis: *r.axis(),
            cdf,
            coords: r.axis().coords(),
        })
    }

    /// Quantile transport of a non-negative density with CDF `fs` onto this reference.
    pub fn transport(&self, s_axis: &Axis, fs: &[f64]) -> Vec<f64> {
        let total = *fs.last().unwrap();
        let n = self.cdf.len();
        let mut out = Vec::with_capacity(n);
        for &level in &self.cdf[..n - 1] {
            out.push(pseudo_inverse(s_axis, fs, level * total));
        }
        // F†(total) is unbounded; use the left limit (right edge of the support)
        out.push(pseudo_inverse_left(s_axis, fs, total));
        // guard against rounding in the last cell
        for i in 1..n {
            if out[i] < out[i - 1] {
                out[i] = out[i - 1];
            }
        }
        out
    }

    /// Density on `target` whose transport onto this reference is `shat`.
    pub fn push_back(&self, shat: &[f64], target: &Axis) -> Vec<f64> {
        let n = target.count();
        let h = target.spacing();
        let g: Vec<f64> = (0..n)
            .map(|i| {
                let u = pseudo_inverse(&self.axis, shat, target.coord(i));
                interp_sorted(&self.coords, &self.cdf, u)
            })
            .collect();
        (0..n)
            .map(|i| {
                if i == 0 {
                    (g[1] - g[0]) / h
                } else if i == n - 1 {
                    (g[n - 1] - g[n - 2]) / h
                } else {
                    (g[i + 1] - g[i - 1]) / (2.0 * h)
                }
            })
            .collect()
    }
}

/// Cumulative distribution transform of the density `s` against the reference `r`.
///
/// Returns `ŝ = F_s† ∘ F_r` sampled on the axis of `r`. Unless `normalize`
/// is set, `s` must already have unit mass.
pub fn cdt(s: &Signal1D, r: &Signal1D, normalize: bool) -> Result<QuantileFn> {
    let reference = Reference::new(r)?;
    let f = cumulation(s)?;
    let total = f.total();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    if !normalize && (total - 1.0).abs() > UNIT_MASS_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(QuantileFn::from_raw(
        *r.axis(),
        reference.transport(s.axis(), &f.values),
    ))
}

/// Inverse CDT: the density on `target` with transport map `shat` onto `r`.
pub fn cdt_inverse(shat: &QuantileFn, r: &Signal1D, target: &Axis) -> Result<Signal1D> {
    if let Some(i) = first_decrease(&shat.values) {
        return Err(Error::NonMonotone(i));
    }
    if shat.values.first() == shat.values.last() {
        return Err(Error::SingularTransport);
    }
    let reference = Reference::new(r)?;
    if reference.axis != shat.axis {
        return Err(Error::GridMismatch("transport map and reference differ".into()));
    }
    Signal1D::new(*target, reference.push_back(&shat.values, target))
}
