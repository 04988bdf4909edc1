//! Matrix-semigroup asymptotics: dominant-eigenvalue rank-one limits,
//! Jordan-driven polynomial growth, and the finite-dimensional spectral
//! splitting `T(t) = T_1(t) + ... + T_m(t) + R(t)` with an exponentially
//! decaying remainder.
//!
//! Spectral projections are computed by trapezoidal contour integration of
//! the resolvent around each eigenvalue cluster, which handles defective
//! eigenvalues with the same code path as simple ones.

use crate::error::{Error, Result};
use crate::graph;
use crate::linalg::{expm, inf_norm};
use nalgebra::DMatrix;
use num_complex::Complex;

type CMatrix = DMatrix<Complex<f64>>;

/// Arbitrary real square matrix viewed as the generator of `t -> e^{tQ}`
/// acting on row vectors.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    q: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("generator entries must be finite".into()));
        }
        Ok(Self { q })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} columns"),
                    got: format!("{} in row {i}", r.len()),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn scale(&self) -> f64 {
        inf_norm(&self.q).max(1.0)
    }

    pub fn complex_eigenvalues(&self) -> Vec<Complex<f64>> {
        self.q
            .clone()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    }
}

/// Positivity (P) and irreducibility (I) of the off-diagonal sign pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionsPI {
    pub positive_off_diagonal: bool,
    pub irreducible: bool,
}

pub fn check_conditions_p_i(q: &GeneratorMatrix) -> ConditionsPI {
    let n = q.n();
    let m = q.q();
    let positive_off_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0));
    let irreducible = graph::is_strongly_connected(n, |i, j| m[(i, j)] > 0.0);
    ConditionsPI {
        positive_off_diagonal,
        irreducible,
    }
}

/// Dominant eigenvalue with its strictly positive left/right eigenvectors,
/// normalized so `<y*, x*> = 1`: the data of the rank-one limit
/// `e^{-rt} x e^{tQ} -> x* <y*, x>`.
#[derive(Debug, Clone)]
pub struct RankOneLimit {
    pub r: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

impl RankOneLimit {
    /// `x* <y*, x>` for a given start vector.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let a: f64 = self.y_star.iter().zip(x).map(|(y, v)| y * v).sum();
        self.x_star.iter().map(|s| s * a).collect()
    }
}

/// Positive left/right eigenvector pair of a matrix satisfying (P) and (I),
/// by power iteration on the nonnegative shift `Q + cI`.
pub fn perron_limit(q: &GeneratorMatrix) -> Result<RankOneLimit> {
    let cond = check_conditions_p_i(q);
    if !cond.positive_off_diagonal || !cond.irreducible {
        return Err(Error::Domain(format!(
            "conditions not met: positivity={}, irreducibility={}",
            cond.positive_off_diagonal, cond.irreducible
        )));
    }
    let n = q.n();
    let min_diag = (0..n).map(|i| q.q()[(i, i)]).fold(f64::INFINITY, f64::min);
    let c = 1.0 + (-min_diag).max(0.0);
    let b = q.q() + DMatrix::identity(n, n) * c;

    let max_iter = 2_000_000usize;
    let tol = 1e-15;

    // Left vector: x B = lambda x.
    let mut x = nalgebra::RowDVector::from_element(n, 1.0 / n as f64);
    let mut lambda_b = 0.0;
    let mut converged = false;
    for _ in 0..max_iter {
        let y = &x * &b;
        let norm: f64 = y.iter().sum(); // entries positive
        let next = y / norm;
        let delta: f64 = next.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        lambda_b = norm;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: max_iter,
            residual: tol,
            last: x.iter().copied().collect(),
        });
    }

    // Right vector: B y = lambda y.
    let mut y = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    converged = false;
    for _ in 0..max_iter {
        let z = &b * &y;
        let norm: f64 = z.iter().sum();
        let next = z / norm;
        let delta: f64 = next.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
        y = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: max_iter,
            residual: tol,
            last: y.iter().copied().collect(),
        });
    }

    // Normalize <y*, x*> = 1 with x* kept mass-one.
    let inner: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let y_star: Vec<f64> = y.iter().map(|v| v / inner).collect();
    Ok(RankOneLimit {
        r: lambda_b - c,
        x_star: x.iter().copied().collect(),
        y_star,
    })
}

/// `|| e^{-rt} x e^{tQ} - x* <y*, x> ||_1`, evaluated in shifted form
/// `x e^{t(Q - rI)}` so large `rt` cannot overflow.
pub fn rank_one_residual(q: &GeneratorMatrix, limit: &RankOneLimit, t: f64, x: &[f64]) -> f64 {
    let n = q.n();
    let shifted = q.q() - DMatrix::identity(n, n) * limit.r;
    let evolved = crate::linalg::evolve_row(&shifted, t, x);
    let target = limit.project(x);
    evolved
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Result of the polynomial-growth analysis at the dominant eigenvalue.
#[derive(Debug, Clone)]
pub struct JordanGrowth {
    /// Dominant (real) eigenvalue.
    pub r: f64,
    /// Size of the largest Jordan block attached to it.
    pub k: usize,
    /// `lim e^{-rt} t^{1-k} x e^{tQ}`.
    pub limit: Vec<f64>,
}

/// Ranks of `(Q - rI)^j` until they stabilize; the first stabilization index
/// is the largest Jordan block order for `r`.
fn largest_jordan_block(q: &GeneratorMatrix, r: f64) -> usize {
    let n = q.n();
    let a = q.q() - DMatrix::identity(n, n) * r;
    let tol = 1e-8 * q.scale();
    let mut power = DMatrix::identity(n, n);
    let mut prev_rank = n;
    for j in 1..=n {
        power = &power * &a;
        let rank = power.clone().svd(false, false).rank(tol);
        if rank == prev_rank {
            return j - 1;
        }
        prev_rank = rank;
        if rank == 0 {
            return j;
        }
    }
    n
}

/// Quality of a small-denominator rational approximation to `x` (0 when `x`
/// is exactly rational with denominator <= 64).
fn rational_approximation_quality(x: f64) -> f64 {
    let mut best = f64::INFINITY;
    for den in 1..=64u64 {
        let num = (x * den as f64).round();
        best = best.min((x - num / den as f64).abs());
    }
    best
}

/// Dominant-eigenvalue growth data: `e^{-rt} t^{1-k} x e^{tQ}` stabilized on
/// a doubling time ladder with Richardson extrapolation in `1/t`.
///
/// A complex dominant pair has no limit; the error carries the oscillation
/// period and how nearly commensurable the imaginary parts are.
pub fn jordan_growth(q: &GeneratorMatrix, x: &[f64]) -> Result<JordanGrowth> {
    if x.len() != q.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} entries", q.n()),
            got: format!("{}", x.len()),
        });
    }
    let eigs = q.complex_eigenvalues();
    let scale = q.scale();
    let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-8 * scale;
    let dominant: Vec<Complex<f64>> = eigs
        .iter()
        .copied()
        .filter(|l| l.re > max_re - tol)
        .collect();
    let imags: Vec<f64> = dominant
        .iter()
        .map(|l| l.im)
        .filter(|im| im.abs() > tol)
        .collect();
    if !imags.is_empty() {
        let im = imags.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut quality = 0.0f64;
        for a in &imags {
            for b in &imags {
                if b.abs() > tol && a.abs() > tol && a != b {
                    quality = quality.max(rational_approximation_quality(a / b));
                }
            }
        }
        return Err(Error::ComplexDominant {
            real: max_re,
            imag: im,
            period: std::f64::consts::TAU / im,
            rational_quality: quality,
        });
    }

    let r = max_re;
    let k = largest_jordan_block(q, r);

    // Ladder e^{T0 A}, e^{2 T0 A}, ... by repeated squaring of one factor.
    let n = q.n();
    let a = q.q() - DMatrix::identity(n, n) * r;
    let t0 = 64.0;
    let levels = 6;
    let mut factor = expm(&(&a * t0));
    let row = nalgebra::RowDVector::from_row_slice(x);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(levels);
    let mut t = t0;
    for _ in 0..levels {
        let v = &row * &factor;
        let scale_t = t.powi(1 - k as i32);
        values.push(v.iter().map(|c| c * scale_t).collect());
        factor = &factor * &factor;
        t *= 2.0;
    }
    // Richardson in 1/t: each pass cancels the leading 1/t power.
    let mut table = values;
    let mut weight = 2.0;
    while table.len() > 1 {
        let mut next = Vec::with_capacity(table.len() - 1);
        for w in table.windows(2) {
            let refined: Vec<f64> = w[1]
                .iter()
                .zip(&w[0])
                .map(|(fine, coarse)| (weight * fine - coarse) / (weight - 1.0))
                .collect();
            next.push(refined);
        }
        table = next;
        weight *= 2.0;
    }
    Ok(JordanGrowth {
        r,
        k,
        limit: table.pop().unwrap(),
    })
}

/// One pole of the resolvent: eigenvalue cluster, its order, algebraic
/// multiplicity, and the matrices `(Q - lambda I)^j P / j!` needed for the
/// semigroup term `T_n(t) = e^{lambda t} sum_j t^j [(Q-lambda I)^j P / j!]`.
pub struct Pole {
    pub lambda: Complex<f64>,
    pub order: usize,
    pub multiplicity: usize,
    residue: CMatrix,
    nilpotent_scaled: Vec<CMatrix>,
}

impl Pole {
    pub fn residue(&self) -> &CMatrix {
        &self.residue
    }

    /// `T_n(t)` as a complex matrix.
    pub fn term(&self, t: f64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.residue.nrows(), self.residue.ncols());
        let mut t_pow = 1.0;
        for nil in &self.nilpotent_scaled {
            acc += nil * Complex::new(t_pow, 0.0);
            t_pow *= t;
        }
        acc * (self.lambda * t).exp()
    }
}

/// Spectral splitting of `e^{tQ}` at a vertical cutoff line.
pub struct SpectralSplit {
    q: DMatrix<f64>,
    pub cutoff: f64,
    pub poles: Vec<Pole>,
    /// `(M, eps)`: fitted witness pair with `||R(t)|| <= M e^{-eps t}` for
    /// the remainder after removing the pole terms. One witness, not
    /// canonical.
    pub remainder_bound: (f64, f64),
}

impl SpectralSplit {
    /// Sum of the pole terms at time `t` (real part; the imaginary residue
    /// of conjugate pairs cancels).
    pub fn reconstruct(&self, t: f64) -> DMatrix<f64> {
        let n = self.q.nrows();
        let mut acc = CMatrix::zeros(n, n);
        for p in &self.poles {
            acc += p.term(t);
        }
        DMatrix::from_fn(n, n, |i, j| acc[(i, j)].re)
    }

    /// Largest imaginary leakage in the reconstruction, a conditioning
    /// diagnostic.
    pub fn imaginary_residual(&self, t: f64) -> f64 {
        let n = self.q.nrows();
        let mut acc = CMatrix::zeros(n, n);
        for p in &self.poles {
            acc += p.term(t);
        }
        acc.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn semigroup(&self, t: f64) -> DMatrix<f64> {
        expm(&(&self.q * t))
    }

    /// `R(t) = e^{tQ} - sum T_n(t)`.
    pub fn remainder(&self, t: f64) -> DMatrix<f64> {
        self.semigroup(t) - self.reconstruct(t)
    }

    /// Total algebraic multiplicity of the listed poles.
    pub fn pole_multiplicity(&self) -> usize {
        self.poles.iter().map(|p| p.multiplicity).sum()
    }

    /// Dimension left to the remainder part.
    pub fn remainder_dimension(&self) -> usize {
        self.q.nrows() - self.pole_multiplicity()
    }
}

/// Clusters eigenvalues that agree within `tol` into (representative, count).
fn cluster_eigenvalues(eigs: &[Complex<f64>], tol: f64) -> Vec<(Complex<f64>, usize)> {
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for &l in eigs {
        match clusters.iter_mut().find(|(c, _)| (*c - l).norm() < tol) {
            Some((c, count)) => {
                // running mean keeps the representative centred
                *c = (*c * *count as f64 + l) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((l, 1)),
        }
    }
    clusters
}

/// Spectral projection onto the generalized eigenspace at `lambda` by
/// trapezoidal contour integration of the resolvent on a circle of radius
/// `rho` (spectrally accurate for analytic integrands).
fn contour_projection(q: &DMatrix<f64>, lambda: Complex<f64>, rho: f64) -> Result<CMatrix> {
    let n = q.nrows();
    let qc = CMatrix::from_fn(n, n, |i, j| Complex::new(q[(i, j)], 0.0));
    let nodes = 64;
    let mut acc = CMatrix::zeros(n, n);
    for m in 0..nodes {
        let theta = std::f64::consts::TAU * m as f64 / nodes as f64;
        let phase = Complex::from_polar(1.0, theta);
        let z = lambda + phase * rho;
        let shifted = CMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { z } else { Complex::ZERO };
            d - qc[(i, j)]
        });
        let inv = shifted
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::IllConditioned("resolvent is singular on the contour".into()))?;
        acc += inv * phase;
    }
    Ok(acc * Complex::new(rho / nodes as f64, 0.0))
}

/// Splits `e^{tQ}` at the vertical line `Re = cutoff`: poles (eigenvalue
/// clusters with real part >= cutoff) get explicit polynomial-exponential
/// terms; everything below is bounded by the fitted `(M, eps)` pair.
pub fn quasicompact_split(q: &GeneratorMatrix, cutoff: f64) -> Result<SpectralSplit> {
    let n = q.n();
    let scale = q.scale();
    let eigs = q.complex_eigenvalues();
    let boundary_tol = 1e-9 * scale;
    if eigs.iter().any(|l| (l.re - cutoff).abs() < boundary_tol) {
        return Err(Error::Domain(format!(
            "an eigenvalue sits on the cutoff line Re = {cutoff}; perturb the cutoff"
        )));
    }
    let cluster_tol = 1e-6 * scale;
    let clusters = cluster_eigenvalues(&eigs, cluster_tol);

    let mut poles = Vec::new();
    for (idx, &(lambda, count)) in clusters.iter().enumerate() {
        if lambda.re < cutoff {
            continue;
        }
        // Contour radius: half the gap to the nearest other cluster.
        let mut gap = f64::INFINITY;
        for (jdx, &(other, _)) in clusters.iter().enumerate() {
            if idx != jdx {
                gap = gap.min((lambda - other).norm());
            }
        }
        let rho = if gap.is_finite() {
            (0.45 * gap).max(10.0 * cluster_tol)
        } else {
            scale.max(1.0)
        };
        let p = contour_projection(q.q(), lambda, rho)?;

        // Conditioning checks: idempotency and near-integer trace.
        let idem = (&p * &p - &p).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let trace_re: f64 = (0..n).map(|i| p[(i, i)].re).sum();
        let trace_im: f64 = (0..n).map(|i| p[(i, i)].im).sum();
        if idem > 1e-6 || (trace_re - trace_re.round()).abs() > 1e-6 || trace_im.abs() > 1e-6 {
            return Err(Error::IllConditioned(format!(
                "projection at {lambda}: idempotency defect {idem}, trace {trace_re}+{trace_im}i"
            )));
        }
        let multiplicity = trace_re.round() as usize;
        if multiplicity != count {
            return Err(Error::IllConditioned(format!(
                "projection rank {multiplicity} disagrees with cluster size {count}"
            )));
        }

        // Nilpotent ladder (Q - lambda I)^j P / j!, stopping once it vanishes.
        let qc = CMatrix::from_fn(n, n, |i, j| Complex::new(q.q()[(i, j)], 0.0));
        let a_shift =
            &qc - &CMatrix::from_fn(n, n, |i, j| if i == j { lambda } else { Complex::ZERO });
        let mut nilpotent_scaled = vec![p.clone()];
        let mut current = p.clone();
        let mut factorial = 1.0;
        for j in 1..=multiplicity {
            current = &a_shift * &current;
            factorial *= j as f64;
            let norm = current.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if norm <= 1e-8 * scale.powi(j as i32) {
                break;
            }
            nilpotent_scaled.push(&current / Complex::new(factorial, 0.0));
        }
        let order = nilpotent_scaled.len();
        poles.push(Pole {
            lambda,
            order,
            multiplicity,
            residue: p,
            nilpotent_scaled,
        });
    }

    let max_re_below = clusters
        .iter()
        .filter(|(l, _)| l.re < cutoff)
        .map(|(l, _)| l.re)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut split = SpectralSplit {
        q: q.q().clone(),
        cutoff,
        poles,
        remainder_bound: (0.0, 1.0),
    };

    if max_re_below.is_finite() {
        // Rate with a 10% margin: a finite-time fit must not claim the
        // asymptotic rate exactly.
        let eps = 0.9 * (cutoff - max_re_below);
        let mut m_fit = 0.0f64;
        let t_max = 12.0;
        for i in 0..=300 {
            let t = t_max * i as f64 / 300.0;
            let r = inf_norm(&split.remainder(t));
            m_fit = m_fit.max(r * (eps * t).exp());
        }
        split.remainder_bound = (m_fit * (1.0 + 1e-9) + 1e-300, eps);
    }
    Ok(split)
}
