use crate::error::{Error, Result};
use crate::grid::{Axis, Signal1D};

use super::cdt::{QuantileFn, Reference};
use super::first_decrease;

/// Components lighter than this fraction of the total variation are treated
/// as trivial (floating-point residue of cancellation, not signal).
pub(crate) const TRIVIAL_FRACTION: f64 = 1e-14;

/// Signed CDT: normalized transport maps and masses of the positive and
/// negative parts of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScdtTuple {
    pub pos_star: QuantileFn,
    pub pos_mass: f64,
    pub neg_star: QuantileFn,
    pub neg_mass: f64,
}

impl ScdtTuple {
    pub fn zero(axis: Axis) -> Self {
        Self {
            pos_star: QuantileFn::zero(axis),
            pos_mass: 0.0,
            neg_star: QuantileFn::zero(axis),
            neg_mass: 0.0,
        }
    }

    pub fn new(pos_star: QuantileFn, pos_mass: f64, neg_star: QuantileFn, neg_mass: f64) -> Result<Self> {
        if pos_star.axis() != neg_star.axis() {
            return Err(Error::GridMismatch("star components on different axes".into()));
        }
        for m in [pos_mass, neg_mass] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidParameter(format!("mass {m} must be finite and >= 0")));
            }
        }
        Ok(Self {
            pos_star,
            pos_mass,
            neg_star,
            neg_mass,
        })
    }

    pub fn axis(&self) -> &Axis {
        self.pos_star.axis()
    }
}

/// Jordan decomposition `s = s⁺ - s⁻` with both parts non-negative.
pub fn jordan_decompose(s: &Signal1D) -> (Signal1D, Signal1D) {
    let pos = s.values().iter().map(|&v| v.max(0.0)).collect();
    let neg = s.values().iter().map(|&v| (-v).max(0.0)).collect();
    (
        Signal1D::new(*s.axis(), pos).expect("same axis, finite values"),
        Signal1D::new(*s.axis(), neg).expect("same axis, finite values"),
    )
}

/// Running integrals of the positive and negative parts of the piecewise
/// linear interpolant of `values`. Cells with a sign change are split at the
/// zero crossing, so `pos - neg` is exactly the trapezoid cumulation of `values`.
pub(crate) fn part_cumulations(values: &[f64], spacing: f64) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut pos = Vec::with_capacity(n);
    let mut neg = Vec::with_capacity(n);
    let (mut p, mut q) = (0.0, 0.0);
    pos.push(0.0);
    neg.push(0.0);
    for w in values.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a >= 0.0 && b >= 0.0 {
            p += 0.5 * (a + b) * spacing;
        } else if a <= 0.0 && b <= 0.0 {
            q -= 0.5 * (a + b) * spacing;
        } else {
            let hi = a.max(b);
            let lo = -a.min(b);
            let cut = spacing / (hi + lo);
            p += 0.5 * hi * hi * cut;
            q += 0.5 * lo * lo * cut;
        }
        pos.push(p);
        neg.push(q);
    }
    (pos, neg)
}

fn component(f: Vec<f64>, axis: &Axis, reference: &Reference, trivial_below: f64) -> (QuantileFn, f64) {
    let mass = *f.last().unwrap();
    if mass <= trivial_below || mass == 0.0 {
        return (QuantileFn::zero(reference.axis), 0.0);
    }
    (
        QuantileFn::from_raw(reference.axis, reference.transport(axis, &f)),
        mass,
    )
}

pub(crate) fn scdt_with(s: &Signal1D, reference: &Reference) -> ScdtTuple {
    let (fp, fn_) = part_cumulations(s.values(), s.axis().spacing());
    let trivial_below = TRIVIAL_FRACTION * (fp.last().unwrap() + fn_.last().unwrap());
    let (pos_star, pos_mass) = component(fp, s.axis(), reference, trivial_below);
    let (neg_star, neg_mass) = component(fn_, s.axis(), reference, trivial_below);
    ScdtTuple {
        pos_star,
        pos_mass,
        neg_star,
        neg_mass,
    }
}

/// Signed cumulative distribution transform of `s` against the reference density `r`.
///
/// A part with zero mass is represented by the all-zero map and zero mass.
pub fn scdt(s: &Signal1D, r: &Signal1D) -> Result<ScdtTuple> {
    let reference = Reference::new(r)?;
    Ok(scdt_with(s, &reference))
}

pub(crate) fn scdt_inverse_with(t: &ScdtTuple, reference: &Reference, target: &Axis) -> Result<Vec<f64>> {
    if reference.axis != *t.axis() {
        return Err(Error::GridMismatch("tuple and reference axes differ".into()));
    }
    let mut out = vec![0.0; target.count()];
    for (star, mass, sign) in [(&t.pos_star, t.pos_mass, 1.0), (&t.neg_star, t.neg_mass, -1.0)] {
        if let Some(i) = first_decrease(star.values()) {
            return Err(Error::NonMonotone(i));
        }
        if mass == 0.0 {
            continue;
        }
        let density = if star.values().first() == star.values().last() {
            // all mass at one point: a one-cell spike carrying the mass
            spike(star.values()[0], target)
        } else {
            reference.push_back(star.values(), target)
        };
        for (o, d) in out.iter_mut().zip(density) {
            *o += sign * mass * d;
        }
    }
    Ok(out)
}

fn spike(at: f64, target: &Axis) -> Vec<f64> {
    let mut v = vec![0.0; target.count()];
    let pos = target.fractional_index(at).clamp(0.0, (target.count() - 1) as f64);
    let i = pos.round() as usize;
    let w = target.trapezoid_weights()[i];
    v[i] = 1.0 / w;
    v
}

/// Inverse SCDT onto `target`.
pub fn scdt_inverse(t: &ScdtTuple, r: &Signal1D, target: &Axis) -> Result<Signal1D> {
    let reference = Reference::new(r)?;
    Signal1D::new(*target, scdt_inverse_with(t, &reference, target)?)
}

/// Mass of the positive and negative parts, same rule as the transform.
pub fn part_masses(s: &Signal1D) -> (f64, f64) {
    let (pos, neg) = part_cumulations(s.values(), s.axis().spacing());
    (*pos.last().unwrap(), *neg.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use crate::transforms1d::cdt;

    fn ax() -> Axis {
        Axis::new(-1.0, 1.0, 512).unwrap()
    }

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        (-(x - c).powi(2) / (2.0 * w * w)).exp()
    }

    #[test]
    fn jordan_examples() {
        let a = Axis::new(0.0, 1.0, 3).unwrap();
        let s = Signal1D::new(a, vec![1.0, -2.0, 3.0]).unwrap();
        let (p, n) = jordan_decompose(&s);
        assert_eq!(p.values(), &[1.0, 0.0, 3.0]);
        assert_eq!(n.values(), &[0.0, 2.0, 0.0]);
        let (p2, n2) = jordan_decompose(&s.scaled(-1.0));
        assert_eq!(p2, n);
        assert_eq!(n2, p);
        let (pp, nn) = jordan_decompose(&p);
        assert_eq!(pp, p);
        assert!(nn.values().iter().all(|&v| v == 0.0));
        let back: Vec<f64> = p.values().iter().zip(n.values()).map(|(a, b)| a - b).collect();
        assert_eq!(back, s.values());
    }

    #[test]
    fn part_cumulations_split_crossings() {
        // linear from -1 to 1 over one cell: half a triangle on each side
        let (p, n) = part_cumulations(&[-1.0, 1.0], 2.0);
        assert_eq!(p, vec![0.0, 0.5]);
        assert_eq!(n, vec![0.0, 0.5]);
        let vals = [0.3, -0.2, 0.7, 0.7, -1.1, 0.0, 0.4];
        let (p, n) = part_cumulations(&vals, 0.1);
        let trap = crate::grid::cumulative_trapezoid(&vals, 0.1);
        for i in 0..vals.len() {
            assert!((p[i] - n[i] - trap[i]).abs() < 1e-15);
        }
        // non-negative input: plain trapezoid
        let (p, n) = part_cumulations(&[0.0, 1.0, 3.0], 0.5);
        assert_eq!(p, vec![0.0, 0.25, 1.25]);
        assert_eq!(n, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_mass_positive_reduces_to_cdt() {
        let r = Signal1D::uniform(ax());
        let raw = Signal1D::from_fn(ax(), |x| bump(x, 0.1, 0.2)).unwrap();
        let s = raw.scaled(1.0 / integrate(&raw));
        let t = scdt(&s, &r).unwrap();
        assert!((t.pos_mass - 1.0).abs() < 1e-12);
        assert_eq!(t.neg_mass, 0.0);
        assert!(t.neg_star.is_zero());
        assert_eq!(t.pos_star, cdt(&s, &r, false).unwrap());
    }

    #[test]
    fn zero_signal_is_zero_tuple() {
        let r = Signal1D::uniform(ax());
        let t = scdt(&Signal1D::zeros(ax()), &r).unwrap();
        assert_eq!(t, ScdtTuple::zero(ax()));
        let rec = scdt_inverse(&t, &r, &ax()).unwrap();
        assert!(rec.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn signed_round_trip() {
        let r = Signal1D::uniform(ax());
        let s = Signal1D::from_fn(ax(), |x| bump(x, -0.3, 0.1) - 0.7 * bump(x, 0.35, 0.15)).unwrap();
        let t = scdt(&s, &r).unwrap();
        let rec = scdt_inverse(&t, &r, &ax()).unwrap();
        let err = rec.sub(&s).unwrap().l1_norm() / s.l1_norm();
        assert!(err < 0.02, "relative L1 {err}");
        let (p, n) = part_masses(&rec);
        assert!((p - t.pos_mass).abs() / t.pos_mass < 1e-2);
        assert!((n - t.neg_mass).abs() / t.neg_mass < 1e-2);
    }

    #[test]
    fn pure_negative_reconstructs_negative_density() {
        let r = Signal1D::uniform(ax());
        let s = Signal1D::from_fn(ax(), |x| -2.0 * bump(x, 0.2, 0.1)).unwrap();
        let t = scdt(&s, &r).unwrap();
        assert_eq!(t.pos_mass, 0.0);
        let rec = scdt_inverse(&t, &r, &ax()).unwrap();
        assert!(rec.values().iter().all(|&v| v <= 1e-12));
        let err = rec.sub(&s).unwrap().l1_norm() / s.l1_norm();
        assert!(err < 0.02);
    }

    #[test]
    fn inverse_rejects_non_monotone() {
        let r = Signal1D::uniform(ax());
        let mut vals = ax().coords();
        vals.swap(10, 11);
        let t = ScdtTuple {
            pos_star: QuantileFn::from_raw(ax(), vals),
            pos_mass: 1.0,
            neg_star: QuantileFn::zero(ax()),
            neg_mass: 0.0,
        };
        assert!(matches!(scdt_inverse(&t, &r, &ax()), Err(Error::NonMonotone(11))));
    }
}
