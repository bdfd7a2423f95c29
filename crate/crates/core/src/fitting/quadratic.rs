use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noticing probability along one axis: `p(x) = a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rmse: f64,
}

impl AxisQuadratic {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::invalid("quadratic coefficients must be finite"));
        }
        if a < 0.0 {
            return Err(Error::invalid(format!(
                "quadratic curvature must be >= 0, got {a}"
            )));
        }
        Ok(AxisQuadratic { a, b, c, rmse: 0.0 })
    }

    /// Unclamped polynomial value.
    pub fn raw(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// Probability at offset `x`, clamped to `[0, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.raw(x).clamp(0.0, 1.0)
    }

    /// Zero-offset probability.
    pub fn baseline(&self) -> f64 {
        self.c
    }

    /// Magnitudes `(|x-|, |x+|)` of the level-`p` crossings, used as quadrant
    /// semi-axes. Zero when `p` does not exceed the baseline, infinite for a
    /// flat curve.
    pub fn semi_axes(&self, p: f64) -> (f64, f64) {
        if p <= self.c {
            return (0.0, 0.0);
        }
        match invert_quadratic(self, p) {
            Ok(l) => (-l.neg, l.pos),
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    }
}

/// Signed crossings of one axis curve at probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleAxisLevels {
    pub p: f64,
    pub neg: f64,
    pub pos: f64,
    /// Set when the curve does not straddle zero and `(neg, pos)` were
    /// replaced by the symmetric magnitude of the closer crossing.
    pub asymmetric: bool,
}

impl SingleAxisLevels {
    pub fn new(p: f64, neg: f64, pos: f64) -> Result<Self> {
        if !(neg.is_finite() && pos.is_finite()) || neg > 0.0 || pos < 0.0 {
            return Err(Error::invalid(format!(
                "levels need neg <= 0 <= pos, got ({neg}, {pos})"
            )));
        }
        Ok(SingleAxisLevels {
            p,
            neg,
            pos,
            asymmetric: false,
        })
    }
}

/// Least-squares quadratic through `(x, p_hat)` points. A negative curvature
/// is replaced by the best linear fit.
pub fn fit_axis_quadratic(points: &[(f64, f64)]) -> Result<AxisQuadratic> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("fit points must be finite"));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::InsufficientData {
            what: "distinct offsets",
            needed: 3,
            got: xs.len(),
        });
    }

    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let full = DMatrix::from_fn(points.len(), 3, |i, j| points[i].0.powi(2 - j as i32));
    let coef = least_squares(&full, &y)?;
    let (a, b, c) = if coef[0] >= 0.0 {
        (coef[0], coef[1], coef[2])
    } else {
        let lin = DMatrix::from_fn(points.len(), 2, |i, j| points[i].0.powi(1 - j as i32));
        let coef = least_squares(&lin, &y)?;
        (0.0, coef[0], coef[1])
    };
    let mut q = AxisQuadratic { a, b, c, rmse: 0.0 };
    let sse: f64 = points.iter().map(|&(x, p)| (q.raw(x) - p).powi(2)).sum();
    q.rmse = (sse / points.len() as f64).sqrt();
    Ok(q)
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    x.clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .map_err(|e| Error::DegenerateFit(e.to_string()))
}

/// Offsets at which the curve crosses probability `p`.
pub fn invert_quadratic(q: &AxisQuadratic, p: f64) -> Result<SingleAxisLevels> {
    if !p.is_finite() || p <= q.c {
        return Err(Error::NoCrossing { p, baseline: q.c });
    }
    let k = q.c - p;
    if q.a == 0.0 {
        if q.b == 0.0 {
            return Err(Error::NoSolution { p });
        }
        let x = -k / q.b;
        return Ok(SingleAxisLevels {
            p,
            neg: -x.abs(),
            pos: x.abs(),
            asymmetric: true,
        });
    }
    let disc = q.b * q.b - 4.0 * q.a * k;
    if disc < 0.0 {
        return Err(Error::NoSolution { p });
    }
    // numerically stable pair of roots
    let t = -0.5 * (q.b + q.b.signum() * disc.sqrt());
    let (r1, r2) = if t == 0.0 {
        let r = (-k / q.a).sqrt();
        (-r, r)
    } else {
        (t / q.a, k / t)
    };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo <= 0.0 && hi >= 0.0 {
        return Ok(SingleAxisLevels {
            p,
            neg: lo,
            pos: hi,
            asymmetric: false,
        });
    }
    let m = if lo.abs() < hi.abs() {
        lo.abs()
    } else {
        hi.abs()
    };
    Ok(SingleAxisLevels {
        p,
        neg: -m,
        pos: m,
        asymmetric: true,
    })
}
