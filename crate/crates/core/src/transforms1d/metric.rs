//! Signed Wasserstein metric computed directly from the signals, and the
//! weighted transform-domain norm it is isometric to.

use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, Signal1D};

use super::cdt::QuantileFn;
use super::transport_weights;
use super::scdt::{part_cumulations, ScdtTuple, TRIVIAL_FRACTION};

/// One linear piece of a quantile function: levels `[y0, y1]` map onto `[x0, x1]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    y0: f64,
    y1: f64,
    x0: f64,
    x1: f64,
}

impl Piece {
    fn at(&self, y: f64) -> f64 {
        self.x0 + (y - self.y0) / (self.y1 - self.y0) * (self.x1 - self.x0)
    }
}

/// Quantile function of a normalized piecewise-linear CDF given by its
/// node values `f`. Zero-mass cells become jumps.
fn quantile_pieces(f: &[f64], s: &Signal1D) -> Vec<Piece> {
    let axis = s.axis();
    let total = *f.last().unwrap();
    let mut pieces = Vec::with_capacity(f.len());
    for i in 1..f.len() {
        let (y0, y1) = (f[i - 1] / total, f[i] / total);
        if y1 > y0 {
            pieces.push(Piece {
                y0,
                y1,
                x0: axis.coord(i - 1),
                x1: axis.coord(i),
            });
        }
    }
    if let Some(last) = pieces.last_mut() {
        last.y1 = 1.0;
    }
    pieces
}

// ∫ d(y)^2 dy for d linear between da and db on an interval of length len
fn linear_sq_integral(len: f64, da: f64, db: f64) -> f64 {
    len * (da * da + da * db + db * db) / 3.0
}

fn merged_sq_distance(p: &[Piece], q: &[Piece]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    let mut acc = 0.0;
    while i < p.len() && j < q.len() {
        let hi = p[i].y1.min(q[j].y1);
        if hi > lo {
            let da = p[i].at(lo) - q[j].at(lo);
            let db = p[i].at(hi) - q[j].at(hi);
            acc += linear_sq_integral(hi - lo, da, db);
            lo = hi;
        }
        if p[i].y1 <= hi {
            i += 1;
        }
        if q[j].y1 <= hi {
            j += 1;
        }
    }
    acc
}

fn second_moment(p: &[Piece]) -> f64 {
    p.iter()
        .map(|c| linear_sq_integral(c.y1 - c.y0, c.x0, c.x1))
        .sum()
}

/// Squared 2-Wasserstein distance between the normalized versions of two
/// non-negative densities, by exact quantile matching of their
/// piecewise-linear CDFs.
pub fn wasserstein2_sq(p: &Signal1D, q: &Signal1D) -> Result<f64> {
    for s in [p, q] {
        if let Some((index, &value)) = s.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeValue { index, value });
        }
        if s.l1_norm() <= 0.0 {
            return Err(Error::ZeroMass);
        }
    }
    let fp = cumulative_trapezoid(p.values(), p.axis().spacing());
    let fq = cumulative_trapezoid(q.values(), q.axis().spacing());
    Ok(merged_sq_distance(&quantile_pieces(&fp, p), &quantile_pieces(&fq, q)))
}

struct Part {
    mass: f64,
    pieces: Option<Vec<Piece>>,
}

fn parts(s: &Signal1D) -> [Part; 2] {
    let (fp, fn_) = part_cumulations(s.values(), s.axis().spacing());
    let trivial_below = TRIVIAL_FRACTION * (fp.last().unwrap() + fn_.last().unwrap());
    [fp, fn_].map(|f| {
        let mass = *f.last().unwrap();
        if mass <= trivial_below || mass == 0.0 {
            Part { mass: 0.0, pieces: None }
        } else {
            Part {
                mass,
                pieces: Some(quantile_pieces(&f, s)),
            }
        }
    })
}

/// Signed Wasserstein distance between two signed signals.
///
/// Each sign contributes the squared 2-Wasserstein distance between its
/// normalized parts plus the squared mass difference. A trivial (zero)
/// part is identified with a unit point mass at the origin, matching the
/// all-zero transport map of the transform.
pub fn signed_wasserstein(s1: &Signal1D, s2: &Signal1D) -> f64 {
    let a = parts(s1);
    let b = parts(s2);
    let mut total = 0.0;
    for (p, q) in a.iter().zip(&b) {
        let normalized = match (&p.pieces, &q.pieces) {
            (None, None) => 0.0,
            (Some(x), None) | (None, Some(x)) => second_moment(x),
            (Some(x), Some(y)) => merged_sq_distance(x, y),
        };
        total += normalized + (p.mass - q.mass).powi(2);
    }
    total.sqrt()
}

/// `∫ (q1 - q2)^2 r` over the reference axis, weighted by [`transport_weights`].
pub fn quantile_distance_sq(q1: &QuantileFn, q2: &QuantileFn, r: &Signal1D) -> Result<f64> {
    if q1.axis() != r.axis() || q2.axis() != r.axis() {
        return Err(Error::GridMismatch("transport maps and reference differ".into()));
    }
    let w = transport_weights(r.axis());
    Ok(q1
        .values()
        .iter()
        .zip(q2.values())
        .zip(r.values())
        .zip(&w)
        .map(|(((a, b), rv), wv)| (a - b).powi(2) * rv * wv)
        .sum())
}

/// Squared transform-domain distance `‖t1 - t2‖²` in `(L²(r) × ℝ)²`.
pub fn transform_distance_sq(t1: &ScdtTuple, t2: &ScdtTuple, r: &Signal1D) -> Result<f64> {
    Ok(quantile_distance_sq(&t1.pos_star, &t2.pos_star, r)?
        + (t1.pos_mass - t2.pos_mass).powi(2)
        + quantile_distance_sq(&t1.neg_star, &t2.neg_star, r)?
        + (t1.neg_mass - t2.neg_mass).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Axis};
    use crate::transforms1d::scdt;

    fn ax() -> Axis {
        Axis::new(-1.0, 1.0, 1024).unwrap()
    }

    // compactly supported smooth bump of unit mass
    fn unit_bump(center: f64) -> Signal1D {
        let raw = Signal1D::from_fn(ax(), |x| {
            let u = (x - center) / 0.2;
            if u.abs() < 1.0 {
                (1.0 - u * u).powi(3)
            } else {
                0.0
            }
        })
        .unwrap();
        raw.scaled(1.0 / integrate(&raw))
    }

    #[test]
    fn identity_of_indiscernibles() {
        let s = Signal1D::from_fn(ax(), |x| (4.0 * x).sin()).unwrap();
        assert_eq!(signed_wasserstein(&s, &s), 0.0);
    }

    #[test]
    fn translate_distance_is_shift() {
        let a = unit_bump(-0.15);
        for mu in [0.05, 0.2, 0.4] {
            let b = unit_bump(-0.15 + mu);
            let d = signed_wasserstein(&a, &b);
            assert!((d - mu).abs() < 1e-3 * mu.max(0.01), "mu {mu}: {d}");
            let w = wasserstein2_sq(&a, &b).unwrap().sqrt();
            assert!((w - d).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_part_is_point_mass_at_origin() {
        let r = Signal1D::uniform(ax());
        let pos = unit_bump(0.3);
        let neg = unit_bump(-0.4).scaled(-0.5);
        let signed = Signal1D::new(
            ax(),
            pos.values().iter().zip(neg.values()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let d = signed_wasserstein(&signed, &pos);
        let t1 = scdt(&signed, &r).unwrap();
        let t2 = scdt(&pos, &r).unwrap();
        let emb = transform_distance_sq(&t1, &t2, &r).unwrap();
        assert!(((d * d) - emb).abs() / (d * d) < 1e-2, "{} vs {emb}", d * d);
    }

    #[test]
    fn scaling_changes_only_mass_term() {
        let a = unit_bump(0.0);
        let b = a.scaled(3.0);
        assert!((signed_wasserstein(&a, &b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_in_w2() {
        let a = unit_bump(0.0);
        assert!(wasserstein2_sq(&a.scaled(-1.0), &a).is_err());
        assert!(matches!(wasserstein2_sq(&Signal1D::zeros(ax()), &a), Err(Error::ZeroMass)));
    }
}
