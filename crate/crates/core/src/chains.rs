//! Continuous-time Markov chain semigroups on finite (or truncated) state
//! spaces.
//!
//! The row-vector convention is used throughout, matching the rest of the
//! crate: a distribution is a row vector `x`, the generator acts on the right
//! (`x ↦ xQ`) and the semigroup is `x e^{tQ}`. Most linear-algebra libraries
//! are column-based, so this is worth stating once: `evolve` computes
//! `x e^{tQ}`, never `e^{tQ} x`.

use crate::error::{Error, Result};
use crate::graph;
use nalgebra::DMatrix;

/// Finite intensity matrix: nonnegative off-diagonal entries, zero row sums.
#[derive(Debug, Clone)]
pub struct IntensityMatrix {
    q: DMatrix<f64>,
}

impl IntensityMatrix {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        validate_intensity_matrix(&q)?;
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
        let q = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(q)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `max_i |q_ii|`, the uniformization rate.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n())
            .map(|i| self.q[(i, i)].abs())
            .fold(0.0, f64::max)
    }

    /// Condition (I): strong connectivity of the support graph.
    pub fn is_irreducible(&self) -> bool {
        graph::is_strongly_connected(self.n(), |i, j| self.q[(i, j)] > 0.0)
    }

    /// Substitution-model generator with uniform replacement rate `lambda`:
    /// off-diagonal `lambda`, diagonal `-3 lambda`.
    pub fn jukes_cantor(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("rate must be > 0, got {lambda}")));
        }
        let q = DMatrix::from_fn(4, 4, |i, j| if i == j { -3.0 * lambda } else { lambda });
        Self::new(q)
    }

    /// Truncated birth-death generator with constant birth rate `b` and
    /// per-individual death rate `d` on states `0..=n_max`; the top state has
    /// its birth removed, which is the truncation.
    pub fn birth_death(b: f64, d: f64, n_max: usize) -> Result<Self> {
        let spec = BirthDeathSpec::new(move |_| b, move |i| d * i as f64, n_max)?;
        spec.intensity_matrix()
    }
}

/// Constructs an [`IntensityMatrix`], reporting the first violated invariant
/// with its indices.
pub fn validate_intensity(rows: &[Vec<f64>]) -> Result<IntensityMatrix> {
    IntensityMatrix::from_rows(rows)
}

fn validate_intensity_matrix(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", q.nrows(), q.ncols()),
        });
    }
    let n = q.nrows();
    let scale = q.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] < 0.0 {
                return Err(Error::Validation {
                    row: i,
                    col: Some(j),
                    message: format!("negative off-diagonal entry {}", q[(i, j)]),
                });
            }
            if !q[(i, j)].is_finite() {
                return Err(Error::Validation {
                    row: i,
                    col: Some(j),
                    message: "non-finite entry".into(),
                });
            }
        }
        let row_sum: f64 = (0..n).map(|j| q[(i, j)]).sum();
        if row_sum.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Validation {
                row: i,
                col: None,
                message: format!("row sums to {row_sum}"),
            });
        }
    }
    Ok(())
}

/// Uniformized form of a generator: `Q = lambda (P - I)` with `P` row
/// stochastic.
#[derive(Debug, Clone)]
pub struct UniformizedChain {
    lambda: f64,
    jump_matrix: DMatrix<f64>,
}

impl UniformizedChain {
    /// Uses `lambda = max_i |q_ii|`; a zero generator gets `lambda = 0` and
    /// the identity jump matrix.
    pub fn from_intensity(q: &IntensityMatrix) -> Self {
        let lambda = q.max_exit_rate();
        let n = q.n();
        let jump_matrix = if lambda > 0.0 {
            DMatrix::identity(n, n) + q.q() / lambda
        } else {
            DMatrix::identity(n, n)
        };
        Self {
            lambda,
            jump_matrix,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn jump_matrix(&self) -> &DMatrix<f64> {
        &self.jump_matrix
    }
}

/// `x e^{tQ}` by uniformization. The jump-count series is truncated when the
/// Poisson(lambda t) tail drops below `tol` and the output is renormalized by
/// its own mass, which the tail bound keeps within `tol` of one.
pub fn evolve(q: &IntensityMatrix, t: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if x.len() != q.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} states", q.n()),
            got: format!("{}", x.len()),
        });
    }
    let uni = UniformizedChain::from_intensity(q);
    let rate = uni.lambda() * t;
    if rate == 0.0 {
        return Ok(x.to_vec());
    }

    let p = uni.jump_matrix();
    let mut y = nalgebra::RowDVector::from_row_slice(x);
    let mut result = nalgebra::RowDVector::zeros(x.len());

    // Poisson weights by the stable recurrence w_{k+1} = w_k * rate/(k+1),
    // accumulated until the tail bound is spent (see k_cap for the guard).
    let k_cap = (rate + 12.0 * rate.sqrt() + 60.0 + 8.0 * (1.0 / tol).ln()) as usize;
    let mut log_w = -rate; // ln w_0
    let mut cumulative = 0.0;
    for k in 0..=k_cap {
        if k > 0 {
            log_w += rate.ln() - (k as f64).ln();
            y = &y * p;
        }
        let w = log_w.exp();
        if w > 0.0 {
            result += &y * w;
            cumulative += w;
        }
        if cumulative >= 1.0 - tol && k as f64 >= rate {
            break;
        }
    }

    let mass: f64 = result.iter().sum();
    let input_mass: f64 = x.iter().sum();
    let defect = (mass - cumulative * input_mass).abs();
    if defect > 1e-9 * input_mass.abs().max(1.0) {
        return Err(Error::NonConvergence {
            iterations: k_cap,
            residual: defect,
            last: result.iter().copied().collect(),
        });
    }
    // Renormalize the truncated series back to the input mass.
    if cumulative > 0.0 {
        result /= cumulative;
    }
    Ok(result.iter().copied().collect())
}

/// Upper bound on the truncation error of the perturbation series after
/// `n_terms` terms: `e^{-lambda t} sum_{n > N} (lambda t)^n / n!`.
pub fn dyson_phillips_tail_bound(lambda: f64, t: f64, n_terms: usize) -> f64 {
    let rate = lambda * t;
    let mut log_w = -rate;
    let mut cumulative = log_w.exp();
    for k in 1..=n_terms {
        log_w += rate.ln() - (k as f64).ln();
        cumulative += log_w.exp();
    }
    (1.0 - cumulative).max(0.0)
}

/// Composite quadrature weights on `j` panels of width `h` (Simpson where the
/// panel count allows, with a 3/8 block or trapezoid correction otherwise).
fn convolution_weights(j: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; j + 1];
    match j {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        2 => {
            w[0] = h / 3.0;
            w[1] = 4.0 * h / 3.0;
            w[2] = h / 3.0;
        }
        3 => {
            for (i, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                w[i] = 3.0 * h / 8.0 * c;
            }
        }
        _ if j % 2 == 0 => {
            w[0] = h / 3.0;
            w[j] = h / 3.0;
            for (i, wi) in w.iter_mut().enumerate().take(j).skip(1) {
                *wi = if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
        }
        _ => {
            // Simpson on the first j-3 panels, 3/8 on the last three.
            let m = j - 3;
            w[0] = h / 3.0;
            w[m] = h / 3.0;
            for (i, wi) in w.iter_mut().enumerate().take(m).skip(1) {
                *wi = if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
            }
            for (off, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                w[m + off] += 3.0 * h / 8.0 * c;
            }
        }
    }
    w
}

/// Partial perturbation series for the semigroup generated by
/// `A0 + lambda K - lambda I`, evaluated on the row vector `f`:
///
/// `P(t) f = e^{-lambda t} sum_{n <= N} lambda^n S_n(t) f`, with
/// `S_0(t) = S(t)` the semigroup of `A0` and
/// `S_{n+1}(t) f = ∫_0^t S_n(t-s) K S(s) f ds`.
///
/// The convolutions are evaluated on a fixed time grid (`panels` composite
/// Simpson panels per level); the series truncation error is bounded by
/// [`dyson_phillips_tail_bound`] since each `||S_n(t)|| <= t^n / n!`.
pub fn dyson_phillips(
    a0: &IntensityMatrix,
    k: &DMatrix<f64>,
    lambda: f64,
    t: f64,
    f: &[f64],
    n_terms: usize,
) -> Result<Vec<f64>> {
    dyson_phillips_with_panels(a0, k, lambda, t, f, n_terms, 64)
}

pub fn dyson_phillips_with_panels(
    a0: &IntensityMatrix,
    k: &DMatrix<f64>,
    lambda: f64,
    t: f64,
    f: &[f64],
    n_terms: usize,
    panels: usize,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if n_terms == 0 {
        return Err(Error::Domain("need at least one series term".into()));
    }
    if panels < 2 || panels % 2 != 0 {
        return Err(Error::Domain("panel count must be even and >= 2".into()));
    }
    let n = a0.n();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n} jump operator"),
            got: format!("{}x{}", k.nrows(), k.ncols()),
        });
    }
    for i in 0..n {
        let row_sum: f64 = (0..n).map(|j| k[(i, j)]).sum();
        if (row_sum - 1.0).abs() > 1e-10 || (0..n).any(|j| k[(i, j)] < -1e-14) {
            return Err(Error::Validation {
                row: i,
                col: None,
                message: format!("perturbation operator is not stochastic (row sum {row_sum})"),
            });
        }
    }

    let m = panels;
    let h = t / m as f64;
    // S(tau_j) as matrices, built from one step matrix (semigroup property).
    let step = crate::linalg::expm(&(a0.q() * h));
    let mut s0 = Vec::with_capacity(m + 1);
    s0.push(DMatrix::<f64>::identity(n, n));
    for j in 1..=m {
        let next = &s0[j - 1] * &step;
        s0.push(next);
    }
    // Precompute S(tau_i) K, the left factor of every integrand
    // (row convention: apply S(s) first, then K, then S_n(t-s)).
    let left: Vec<DMatrix<f64>> = s0.iter().map(|s| s * k).collect();

    let mut current = s0.clone(); // S_n on the grid, n = 0
    let mut total = s0[m].clone(); // n = 0 contribution, lambda^0
    let mut lambda_pow = 1.0;
    for _ in 1..=n_terms {
        let mut next: Vec<DMatrix<f64>> = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let w = convolution_weights(j, h);
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    acc += &left[i] * &current[j - i] * wi;
                }
            }
            next.push(acc);
        }
        lambda_pow *= lambda;
        total += &next[m] * lambda_pow;
        current = next;
    }
    total *= (-lambda * t).exp();

    let row = nalgebra::RowDVector::from_row_slice(f);
    let out = row * total;
    Ok(out.iter().copied().collect())
}

/// Transition matrix of the four-state uniform substitution model:
/// diagonal `1/4 + 3/4 e^{-4 lambda t}`, off-diagonal `1/4 - 1/4 e^{-4 lambda t}`.
pub fn jc_transition(lambda: f64, t: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) || t < 0.0 {
        return Err(Error::Domain(format!(
            "need lambda > 0 and t >= 0, got lambda={lambda}, t={t}"
        )));
    }
    let e = (-4.0 * lambda * t).exp();
    Ok(DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            0.25 + 0.75 * e
        } else {
            0.25 - 0.25 * e
        }
    }))
}

/// Evolutionary distance `-(3/4) ln(1 - 4 p / 3)` (in units of the mean
/// per-site substitution time) from an observed difference fraction.
///
/// For two contemporary sequences the caller halves the result; the chain is
/// reversible, so the common ancestor sits halfway.
pub fn jc_distance(p_hat: f64) -> Result<f64> {
    if !(0.0..0.75).contains(&p_hat) {
        return Err(Error::Saturation(format!(
            "p out of domain [0, 0.75): {p_hat}"
        )));
    }
    Ok(-0.75 * (1.0 - 4.0 * p_hat / 3.0).ln())
}

/// Unique probability solution of `xQ = 0` for an irreducible generator,
/// via the augmented linear system. A reducible generator returns one
/// stationary vector per closed class inside the error.
pub fn stationary(q: &IntensityMatrix) -> Result<Vec<f64>> {
    let n = q.n();
    if !q.is_irreducible() {
        let classes = graph::closed_classes(n, |i, j| q.q()[(i, j)] > 0.0);
        let mut solutions = Vec::new();
        for class in &classes {
            let m = class.len();
            let sub = DMatrix::from_fn(m, m, |i, j| q.q()[(class[i], class[j])]);
            // Row sums inside a closed class are zero, so this is a generator.
            let sub_q = IntensityMatrix { q: sub };
            if let Ok(pi) = stationary_irreducible(&sub_q) {
                let mut full = vec![0.0; n];
                for (local, &global) in class.iter().enumerate() {
                    full[global] = pi[local];
                }
                solutions.push(full);
            }
        }
        return Err(Error::Reducible {
            class_solutions: solutions,
        });
    }
    stationary_irreducible(q)
}

fn stationary_irreducible(q: &IntensityMatrix) -> Result<Vec<f64>> {
    let n = q.n();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // x Q = 0 with sum(x) = 1: transpose and replace the last equation.
    let mut a = q.q().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::IllConditioned("singular stationary system".into()))?;
    let mut pi: Vec<f64> = x.iter().copied().collect();
    for v in &mut pi {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::IllConditioned(format!(
                    "stationary solution has negative entry {v}"
                )));
            }
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    Ok(pi)
}

/// Birth-death rates on `0..=truncation`.
pub struct BirthDeathSpec {
    birth: Box<dyn Fn(usize) -> f64 + Send + Sync>,
    death: Box<dyn Fn(usize) -> f64 + Send + Sync>,
    truncation: usize,
}

impl BirthDeathSpec {
    pub fn new(
        birth: impl Fn(usize) -> f64 + Send + Sync + 'static,
        death: impl Fn(usize) -> f64 + Send + Sync + 'static,
        truncation: usize,
    ) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::Domain("truncation must be positive".into()));
        }
        for i in 0..=truncation {
            let b = birth(i);
            let d = death(i);
            if !b.is_finite() || !d.is_finite() || b < 0.0 || d < 0.0 {
                return Err(Error::Domain(format!(
                    "rates must be finite and nonnegative, got b({i})={b}, d({i})={d}"
                )));
            }
        }
        if death(0) != 0.0 {
            return Err(Error::Domain("death rate at 0 must vanish".into()));
        }
        Ok(Self {
            birth: Box::new(birth),
            death: Box::new(death),
            truncation,
        })
    }

    pub fn birth_rate(&self, i: usize) -> f64 {
        (self.birth)(i)
    }

    pub fn death_rate(&self, i: usize) -> f64 {
        (self.death)(i)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Truncated tridiagonal generator (no birth out of the top state).
    pub fn intensity_matrix(&self) -> Result<IntensityMatrix> {
        let n = self.truncation + 1;
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            let b = if i + 1 < n { self.birth_rate(i) } else { 0.0 };
            let d = self.death_rate(i);
            if i + 1 < n {
                q[(i, i + 1)] = b;
            }
            if i > 0 {
                q[(i, i - 1)] = d;
            }
            q[(i, i)] = -(b + d);
        }
        IntensityMatrix::new(q)
    }
}

/// Detailed-balance stationary law `pi_{i+1} = pi_i b_i / d_{i+1}` on
/// `0..=truncation`, normalized; rescaled on the fly to dodge overflow.
pub fn birth_death_stationary(spec: &BirthDeathSpec) -> Result<Vec<f64>> {
    let n = spec.truncation() + 1;
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut scale = 1.0;
    for i in 1..n {
        let b = spec.birth_rate(i - 1);
        let d = spec.death_rate(i);
        if !(b > 0.0) || !(d > 0.0) {
            return Err(Error::Domain(format!(
                "detailed balance needs b_{} > 0 and d_{} > 0",
                i - 1,
                i
            )));
        }
        pi[i] = pi[i - 1] * b / d;
        if pi[i] > 1e250 {
            let m = pi[i];
            for v in pi.iter_mut().take(i + 1) {
                *v /= m;
            }
            scale *= m;
        }
    }
    let _ = scale;
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || !(total > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "stationary weights sum to {total}"
        )));
    }
    for v in &mut pi {
        *v /= total;
    }
    Ok(pi)
}

/// Outcome of the minimal-semigroup mass test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplosivityVerdict {
    /// The bounded-solution recursion diverges: the minimal semigroup
    /// conserves mass.
    NonExplosive,
    /// The recursion converges to a bounded limit: mass escapes in finite
    /// time.
    Explosive,
    Inconclusive,
}

/// Semi-decision procedure for explosivity of an unbounded birth-death
/// generator: builds the minimal nonnegative solution of `Qx = lambda x`
/// from `x_0 = 1` and watches whether it diverges (threshold 1e12) or its
/// increments become Cauchy (threshold 1e-14) before `horizon`.
pub fn explosivity_check(
    birth: impl Fn(usize) -> f64,
    death: impl Fn(usize) -> f64,
    lambda: f64,
    horizon: usize,
) -> Result<ExplosivityVerdict> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    const DIVERGENCE: f64 = 1e12;
    const CAUCHY: f64 = 1e-14;

    let mut prev = 0.0_f64; // x_{-1}
    let mut cur = 1.0_f64; // x_0
    for i in 0..horizon {
        let b = birth(i);
        let d = death(i);
        if b <= 0.0 {
            return Err(Error::AbsorbingBoundary { index: i });
        }
        let next = cur + (lambda * cur + d * (cur - prev)) / b;
        if !next.is_finite() || next > DIVERGENCE {
            return Ok(ExplosivityVerdict::NonExplosive);
        }
        if (next - cur).abs() < CAUCHY && next < DIVERGENCE {
            return Ok(ExplosivityVerdict::Explosive);
        }
        prev = cur;
        cur = next;
    }
    Ok(ExplosivityVerdict::Inconclusive)
}

/// Mass of the evolved distribution inside an index window, per requested
/// time; illustrates the stable-vs-vanishing dichotomy on truncated chains.
pub fn foguel_profile(
    q: &IntensityMatrix,
    x0: &[f64],
    times: &[f64],
    window: &[usize],
) -> Result<Vec<f64>> {
    let mut profile = Vec::with_capacity(times.len());
    for &t in times {
        let x = evolve(q, t, x0, 1e-12)?;
        profile.push(window.iter().map(|&i| x[i]).sum());
    }
    Ok(profile)
}
