//! Piecewise-polynomial densities (degree <= 3), the exact carrier for the
//! symbolic tent-map engine.
//!
//! Coefficients are stored in global coordinates, so composition with affine
//! maps and integration are closed-form coefficient operations.

use crate::error::{Error, Result};

/// `c[0] + c[1] x + c[2] x^2 + c[3] x^3`.
pub type Coeffs = [f64; 4];

fn eval_coeffs(c: &Coeffs, x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn eval_deriv(c: &Coeffs, x: f64) -> f64 {
    (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1]
}

fn antiderivative(c: &Coeffs, x: f64) -> f64 {
    (((c[3] / 4.0 * x + c[2] / 3.0) * x + c[1] / 2.0) * x + c[0]) * x
}

/// `p(a x + b)` as new coefficients.
fn compose_affine(c: &Coeffs, a: f64, b: f64) -> Coeffs {
    [
        c[0] + c[1] * b + c[2] * b * b + c[3] * b * b * b,
        c[1] * a + 2.0 * c[2] * a * b + 3.0 * c[3] * a * b * b,
        c[2] * a * a + 3.0 * c[3] * a * a * b,
        c[3] * a * a * a,
    ]
}

/// Piecewise polynomial on `[breakpoints[0], breakpoints[last]]`.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Coeffs>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Coeffs>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::ShapeMismatch {
                expected: "breakpoints = pieces + 1, at least 2".into(),
                got: format!("{} breakpoints, {} pieces", breakpoints.len(), pieces.len()),
            });
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn constant(value: f64, lo: f64, hi: f64) -> Self {
        Self {
            breakpoints: vec![lo, hi],
            pieces: vec![[value, 0.0, 0.0, 0.0]],
        }
    }

    /// Single global polynomial on `[lo, hi]`.
    pub fn polynomial(c: Coeffs, lo: f64, hi: f64) -> Self {
        Self {
            breakpoints: vec![lo, hi],
            pieces: vec![c],
        }
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Coeffs] {
        &self.pieces
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let i = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.pieces.len() - 1),
        };
        eval_coeffs(&self.pieces[i], x)
    }

    /// Exact integral over the whole support.
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.pieces)
            .map(|(w, c)| antiderivative(c, w[1]) - antiderivative(c, w[0]))
            .sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|c| [c[0] * factor, c[1] * factor, c[2] * factor, c[3] * factor])
                .collect(),
        }
    }

    pub fn add_constant(&self, value: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|c| [c[0] + value, c[1], c[2], c[3]])
                .collect(),
        }
    }

    /// Pulls this function back through the affine map `x -> a x + b`: the
    /// result is `x -> f(a x + b)` restricted to `[lo, hi]`.
    pub fn precompose_affine(&self, a: f64, b: f64, lo: f64, hi: f64) -> Result<Self> {
        if a == 0.0 {
            return Err(Error::Domain("affine precompose needs a != 0".into()));
        }
        // Breakpoints of x -> f(ax+b) sit at x = (bp - b)/a.
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .map(|&p| (p - b) / a)
            .filter(|&x| x > lo && x < hi)
            .collect();
        bps.push(lo);
        bps.push(hi);
        bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        bps.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (x.abs() + y.abs() + 1.0));

        let mut pieces = Vec::with_capacity(bps.len() - 1);
        for w in bps.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let u = a * mid + b;
            let src = self.piece_index(u);
            pieces.push(compose_affine(&self.pieces[src], a, b));
        }
        PiecewisePoly::new(bps, pieces)
    }

    fn piece_index(&self, x: f64) -> usize {
        let n = self.pieces.len();
        for (i, w) in self.breakpoints.windows(2).enumerate() {
            if x <= w[1] || i == n - 1 {
                return i;
            }
        }
        n - 1
    }

    /// Pointwise sum; both operands must share the same support interval.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let same = (self.lo() - other.lo()).abs() < 1e-12 && (self.hi() - other.hi()).abs() < 1e-12;
        if !same {
            return Err(Error::ShapeMismatch {
                expected: format!("support [{}, {}]", self.lo(), self.hi()),
                got: format!("support [{}, {}]", other.lo(), other.hi()),
            });
        }
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .collect();
        bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        bps.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (x.abs() + y.abs() + 1.0));
        let mut pieces = Vec::with_capacity(bps.len() - 1);
        for w in bps.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let a = self.pieces[self.piece_index(mid)];
            let b = other.pieces[other.piece_index(mid)];
            pieces.push([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
        }
        PiecewisePoly::new(bps, pieces)
    }

    /// Exact L¹ norm: each piece is split at its real roots before integrating.
    pub fn l1_norm(&self) -> f64 {
        let mut total = 0.0;
        for (w, c) in self.breakpoints.windows(2).zip(&self.pieces) {
            total += piece_abs_integral(c, w[0], w[1]);
        }
        total
    }

    /// L¹ distance to another piecewise polynomial on the same support.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.add(&other.scale(-1.0))?.l1_norm())
    }

    /// Attained Lipschitz constant: `sup |f'|` over the support (jumps at
    /// breakpoints are not counted; the tent engine produces continuous
    /// iterates from continuous input).
    pub fn lipschitz_constant(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for (w, c) in self.breakpoints.windows(2).zip(&self.pieces) {
            sup = sup.max(eval_deriv(c, w[0]).abs());
            sup = sup.max(eval_deriv(c, w[1]).abs());
            if c[3] != 0.0 {
                let x_star = -c[2] / (3.0 * c[3]);
                if x_star > w[0] && x_star < w[1] {
                    sup = sup.max(eval_deriv(c, x_star).abs());
                }
            }
        }
        sup
    }
}

/// Integral of `|p|` on `[a, b]` by splitting at the real roots of `p`.
fn piece_abs_integral(c: &Coeffs, a: f64, b: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(roots_in_interval(c, a, b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let seg = antiderivative(c, w[1]) - antiderivative(c, w[0]);
        total += seg.abs();
    }
    total
}

/// Real roots of a cubic (or lower degree) polynomial inside `(a, b)`,
/// located by splitting into monotone segments at the derivative's roots and
/// bisecting each sign change.
fn roots_in_interval(c: &Coeffs, a: f64, b: f64) -> Vec<f64> {
    let mut nodes = vec![a, b];
    // Critical points: roots of the quadratic derivative.
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if qa.abs() > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for r in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
                if r > a && r < b {
                    nodes.push(r);
                }
            }
        }
    } else if qb.abs() > 0.0 {
        let r = -qc / qb;
        if r > a && r < b {
            nodes.push(r);
        }
    }
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut roots = Vec::new();
    for w in nodes.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, fhi) = (eval_coeffs(c, lo), eval_coeffs(c, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo * fhi > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = eval_coeffs(c, mid);
            if flo * fm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}
