//! Transfer operators of piecewise-smooth interval maps.
//!
//! Three independent routes to the same objects live here, because the
//! cross-checks between them are the point of the module:
//!
//! - a symbolic engine for the tent map acting exactly on piecewise
//!   polynomials (`fp_tent_exact`, [`TentEngine`]),
//! - the Ulam discretization with entries from exact monotone-branch
//!   interval intersection, no sampling ([`ulam_matrix`]),
//! - conjugacy transport of densities through a diffeomorphism
//!   ([`conjugate_transport`]), which carries tent-map results to the
//!   quadratic map `4x(1-x)`.

use crate::density::{l1_distance, normalize, Grid1D, GridDensity, PiecewisePoly};
use crate::error::{Error, Result};

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// One monotone branch of an interval map: the map restricted to `domain`
/// is a diffeomorphism onto `image` with inverse `inverse`.
pub struct Branch {
    pub domain: (f64, f64),
    pub image: (f64, f64),
    inverse: RealFn,
    inverse_derivative: RealFn,
}

impl Branch {
    pub fn new(
        domain: (f64, f64),
        image: (f64, f64),
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse_derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            image,
            inverse: Box::new(inverse),
            inverse_derivative: Box::new(inverse_derivative),
        }
    }

    pub fn inverse_at(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }

    pub fn inverse_derivative_at(&self, y: f64) -> f64 {
        (self.inverse_derivative)(y)
    }
}

/// Branch decomposition of a piecewise-expanding interval map on `[lo, hi]`.
pub struct PiecewiseExpandingMap {
    lo: f64,
    hi: f64,
    branches: Vec<Branch>,
    forward: Option<RealFn>,
}

impl PiecewiseExpandingMap {
    /// Validates the decomposition: branch domains must be disjoint and cover
    /// `[lo, hi]` up to measure zero, inverses must invert the forward map
    /// (checked by sampling when `forward` is given) and the inverse
    /// derivative must not vanish inside the image.
    pub fn new(lo: f64, hi: f64, branches: Vec<Branch>, forward: Option<RealFn>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Domain("map needs at least one branch".into()));
        }
        let mut doms: Vec<(f64, f64)> = branches.iter().map(|b| b.domain).collect();
        doms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let covered: f64 = doms.iter().map(|d| d.1 - d.0).sum();
        if (covered - (hi - lo)).abs() > 1e-10 {
            return Err(Error::Geometry(format!(
                "branch domains cover {covered}, interval has length {}",
                hi - lo
            )));
        }
        for w in doms.windows(2) {
            if w[0].1 > w[1].0 + 1e-12 {
                return Err(Error::Geometry("branch domains overlap".into()));
            }
        }
        for (bi, b) in branches.iter().enumerate() {
            let (ilo, ihi) = b.image;
            for k in 1..32 {
                let y = ilo + (ihi - ilo) * k as f64 / 32.0;
                let x = b.inverse_at(y);
                if x < b.domain.0 - 1e-9 || x > b.domain.1 + 1e-9 {
                    return Err(Error::Geometry(format!(
                        "branch {bi}: inverse leaves its domain at y={y}"
                    )));
                }
                if b.inverse_derivative_at(y).abs() == 0.0 {
                    return Err(Error::Geometry(format!(
                        "branch {bi}: inverse derivative vanishes at y={y}"
                    )));
                }
                if let Some(f) = &forward {
                    if (f(x) - y).abs() > 1e-10 {
                        return Err(Error::Geometry(format!(
                            "branch {bi}: forward(inverse({y})) = {} != {y}",
                            f(x)
                        )));
                    }
                }
            }
        }
        Ok(Self {
            lo,
            hi,
            branches,
            forward,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn forward_at(&self, x: f64) -> Option<f64> {
        self.forward.as_ref().map(|f| f(x))
    }

    /// Tent map `x -> 2x` on `[0, 1/2]`, `2 - 2x` on `(1/2, 1]`.
    pub fn tent() -> Self {
        let branches = vec![
            Branch::new((0.0, 0.5), (0.0, 1.0), |y| 0.5 * y, |_| 0.5),
            Branch::new((0.5, 1.0), (0.0, 1.0), |y| 1.0 - 0.5 * y, |_| -0.5),
        ];
        Self::new(
            0.0,
            1.0,
            branches,
            Some(Box::new(
                |x: f64| {
                    if x <= 0.5 {
                        2.0 * x
                    } else {
                        2.0 - 2.0 * x
                    }
                },
            )),
        )
        .expect("tent map is well-formed")
    }

    /// Quadratic map `x -> 4x(1-x)` on `[0, 1]`.
    pub fn logistic() -> Self {
        let branches = vec![
            Branch::new(
                (0.0, 0.5),
                (0.0, 1.0),
                |y: f64| 0.5 * (1.0 - (1.0 - y).sqrt()),
                |y: f64| 0.25 / (1.0 - y).sqrt(),
            ),
            Branch::new(
                (0.5, 1.0),
                (0.0, 1.0),
                |y: f64| 0.5 * (1.0 + (1.0 - y).sqrt()),
                |y: f64| -0.25 / (1.0 - y).sqrt(),
            ),
        ];
        Self::new(
            0.0,
            1.0,
            branches,
            Some(Box::new(|x: f64| 4.0 * x * (1.0 - x))),
        )
        .expect("logistic map is well-formed")
    }

    /// Identity map on `[0, 1]`.
    pub fn identity() -> Self {
        Self::new(
            0.0,
            1.0,
            vec![Branch::new((0.0, 1.0), (0.0, 1.0), |y| y, |_| 1.0)],
            Some(Box::new(|x: f64| x)),
        )
        .expect("identity map is well-formed")
    }
}

/// Pointwise transfer-operator action: `sum_i f(inv_i(x)) |inv_i'(x)|` over
/// the branches whose image contains `x`.
///
/// Image intervals are treated as closed; the error case is an `x` that
/// coincides with an image endpoint strictly inside the range, where branch
/// membership changes discontinuously.
pub fn fp_apply_pointwise(
    map: &PiecewiseExpandingMap,
    f: impl Fn(f64) -> f64,
    x: f64,
) -> Result<f64> {
    if x < map.lo || x > map.hi {
        return Err(Error::Domain(format!(
            "x={x} outside the map range [{}, {}]",
            map.lo, map.hi
        )));
    }
    for b in &map.branches {
        for end in [b.image.0, b.image.1] {
            if x == end && end > map.lo && end < map.hi {
                return Err(Error::BoundaryPoint { x });
            }
        }
    }
    let mut total = 0.0;
    for b in &map.branches {
        if x >= b.image.0 && x <= b.image.1 {
            total += f(b.inverse_at(x)) * b.inverse_derivative_at(x).abs();
        }
    }
    Ok(total)
}

/// Exact transfer-operator step for the tent map on a piecewise polynomial:
/// `(Pf)(x) = f(x/2)/2 + f(1 - x/2)/2`, with coefficients computed
/// symbolically. Degree and integral are preserved exactly.
pub fn fp_tent_exact(f: &PiecewisePoly) -> Result<PiecewisePoly> {
    if f.lo() < -1e-12 || f.hi() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "support [{}, {}] must lie inside [0, 1]",
            f.lo(),
            f.hi()
        )));
    }
    let left = f.precompose_affine(0.5, 0.0, 0.0, 1.0)?.scale(0.5);
    let right = f.precompose_affine(-0.5, 1.0, 0.0, 1.0)?.scale(0.5);
    left.add(&right)
}

/// Iterates the exact tent-map operator while tracking a certified Lipschitz
/// bound.
///
/// The bound starts at the attained Lipschitz constant of the initial
/// function and is halved on every application; this is the contraction
/// inequality `|Pf(x) - Pf(y)| <= (L/2)|x - y|`, so the bound is always an
/// upper bound for the attained constant (for smooth inputs it is usually
/// not tight).
pub struct TentEngine {
    f: PiecewisePoly,
    lipschitz_bound: f64,
    steps: usize,
}

impl TentEngine {
    pub fn new(f0: PiecewisePoly) -> Result<Self> {
        if f0.lo() < -1e-12 || f0.hi() > 1.0 + 1e-12 {
            return Err(Error::Domain(
                "tent engine input must live on [0, 1]".into(),
            ));
        }
        Ok(Self {
            lipschitz_bound: f0.lipschitz_constant(),
            f: f0,
            steps: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        self.f = fp_tent_exact(&self.f)?;
        self.lipschitz_bound *= 0.5;
        self.steps += 1;
        Ok(())
    }

    pub fn current(&self) -> &PiecewisePoly {
        &self.f
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Certified `L0 / 2^n` bound.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Attained `sup |f'|` of the current iterate.
    pub fn lipschitz_attained(&self) -> f64 {
        self.f.lipschitz_constant()
    }

    /// Exact L¹ distance to the flat density on `[0, 1]`.
    pub fn l1_distance_to_uniform(&self) -> f64 {
        self.f.add_constant(-1.0).l1_norm()
    }
}

/// Row-stochastic Ulam discretization of a transfer operator; rows are stored
/// sparsely (a two-branch map fills only a handful of columns per row).
pub struct UlamOperator {
    grid: Grid1D,
    rows: Vec<Vec<(usize, f64)>>,
}

impl UlamOperator {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(col, _)| *col == j)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|(_, w)| w).sum()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .filter(|(col, _)| *col == j)
            .map(|(_, w)| w)
            .sum()
    }

    /// One operator application to a mass vector (row-vector convention:
    /// mass in cell `i` spreads to cells `j` with weight `M[i][j]`).
    pub fn apply(&self, masses: &[f64]) -> Result<Vec<f64>> {
        if masses.len() != self.n() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} cells", self.n()),
                got: format!("{}", masses.len()),
            });
        }
        let mut out = vec![0.0; masses.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let m = masses[i];
            if m != 0.0 {
                for &(j, w) in row {
                    out[j] += m * w;
                }
            }
        }
        Ok(out)
    }
}

/// Builds the Ulam matrix `M[i][j] = |C_i ∩ phi^{-1}(C_j)| / |C_i|` by exact
/// interval intersection along each monotone branch.
pub fn ulam_matrix(map: &PiecewiseExpandingMap, n: usize) -> Result<UlamOperator> {
    if n < 2 {
        return Err(Error::Domain(format!("ulam needs n >= 2, got {n}")));
    }
    let grid = Grid1D::new(map.lo, map.hi, n)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let width = grid.cell_width();

    for b in &map.branches {
        for j in 0..n {
            // Clip the target cell to this branch's image.
            let c_lo = grid.edge(j).max(b.image.0);
            let c_hi = grid.edge(j + 1).min(b.image.1);
            if c_lo >= c_hi {
                continue;
            }
            let p = b.inverse_at(c_lo);
            let q = b.inverse_at(c_hi);
            let (pre_lo, pre_hi) = if p <= q { (p, q) } else { (q, p) };
            if pre_lo < b.domain.0 - 1e-9 || pre_hi > b.domain.1 + 1e-9 {
                return Err(Error::Geometry(format!(
                    "branch inverse escaped its domain: [{pre_lo}, {pre_hi}] vs {:?}",
                    b.domain
                )));
            }
            // Spread the preimage interval over the source cells it meets.
            let first = grid.cell_of(pre_lo.max(map.lo)).unwrap_or(0);
            let last = grid.cell_of(pre_hi.min(map.hi)).unwrap_or(n - 1);
            for i in first..=last {
                let lo = pre_lo.max(grid.edge(i));
                let hi = pre_hi.min(grid.edge(i + 1));
                if hi > lo {
                    let w = (hi - lo) / width;
                    match rows[i].iter_mut().find(|(col, _)| *col == j) {
                        Some(entry) => entry.1 += w,
                        None => rows[i].push((j, w)),
                    }
                }
            }
        }
    }
    for row in &mut rows {
        row.sort_by_key(|(j, _)| *j);
    }
    let op = UlamOperator { grid, rows };
    for i in 0..n {
        let s = op.row_sum(i);
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Validation {
                row: i,
                col: None,
                message: format!("ulam row sums to {s}"),
            });
        }
    }
    Ok(op)
}

/// Power iteration from the uniform density until the L¹ change of successive
/// iterates drops below `tol`.
pub fn invariant_density(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<GridDensity> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    let mut x = vec![1.0 / op.n() as f64; op.n()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut y = op.apply(&x)?;
        let total: f64 = y.iter().sum();
        for v in &mut y {
            *v /= total;
        }
        residual = crate::density::l1_between(&x, &y);
        x = y;
        if residual < tol {
            return normalize(op.grid().clone(), &x);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        last: x,
    })
}

/// Strictly monotone diffeomorphism with explicit inverse and derivative.
pub struct Diffeo {
    forward: RealFn,
    inverse: RealFn,
    derivative: RealFn,
}

impl Diffeo {
    /// Checks monotonicity and inverse consistency by sampling on `[lo, hi]`.
    pub fn new(
        lo: f64,
        hi: f64,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut prev = forward(lo);
        let mut direction = 0.0_f64;
        for k in 1..=64 {
            let x = lo + (hi - lo) * k as f64 / 64.0;
            let y = forward(x);
            let step = y - prev;
            if step != 0.0 {
                if direction == 0.0 {
                    direction = step.signum();
                } else if step.signum() != direction {
                    return Err(Error::Domain("conjugacy map is not monotone".into()));
                }
            }
            prev = y;
            let back = inverse(y);
            if (back - x).abs() > 1e-8 * (1.0 + x.abs()) {
                return Err(Error::Domain(format!(
                    "inverse({y}) = {back}, expected {x}"
                )));
            }
        }
        Ok(Self {
            forward: Box::new(forward),
            inverse: Box::new(inverse),
            derivative: Box::new(derivative),
        })
    }

    /// `x -> (1 - cos(pi x)) / 2`, the conjugacy between the tent and the
    /// quadratic map.
    pub fn cosine() -> Self {
        Self::new(
            0.0,
            1.0,
            |x: f64| 0.5 - 0.5 * (std::f64::consts::PI * x).cos(),
            |y: f64| (1.0 - 2.0 * y).clamp(-1.0, 1.0).acos() / std::f64::consts::PI,
            |x: f64| 0.5 * std::f64::consts::PI * (std::f64::consts::PI * x).sin(),
        )
        .expect("cosine conjugacy is monotone")
    }

    pub fn identity(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, |x| x, |y| y, |_| 1.0).expect("identity is monotone")
    }

    pub fn forward_at(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn inverse_at(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
}

/// Density of `alpha(X)` for `X ~ f`: the single-branch transfer transport,
/// computed by mass-exact rebinning onto a grid over `alpha`'s image with the
/// same number of cells.
pub fn conjugate_transport(alpha: &Diffeo, f: &GridDensity) -> Result<GridDensity> {
    let n = f.grid().n_cells();
    let (a, b) = (
        alpha.forward_at(f.grid().lo()),
        alpha.forward_at(f.grid().hi()),
    );
    let (tlo, thi) = if a < b { (a, b) } else { (b, a) };
    let target = Grid1D::new(tlo, thi, n)?;

    let mut masses = vec![0.0; n];
    for (k, m) in masses.iter_mut().enumerate() {
        let mut s0 = alpha.inverse_at(target.edge(k));
        let mut s1 = alpha.inverse_at(target.edge(k + 1));
        if s0 > s1 {
            std::mem::swap(&mut s0, &mut s1);
        }
        *m = mass_on_interval(f, s0, s1);
    }
    normalize(target, &masses)
}

/// Mass of a piecewise-constant grid density on an arbitrary interval.
fn mass_on_interval(f: &GridDensity, lo: f64, hi: f64) -> f64 {
    let g = f.grid();
    let lo = lo.max(g.lo());
    let hi = hi.min(g.hi());
    if hi <= lo {
        return 0.0;
    }
    let first = g.cell_of(lo).unwrap_or(0);
    let last = g.cell_of(hi).unwrap_or(g.n_cells() - 1);
    let w = g.cell_width();
    let mut mass = 0.0;
    for i in first..=last {
        let a = lo.max(g.edge(i));
        let b = hi.min(g.edge(i + 1));
        if b > a {
            mass += f.masses()[i] * (b - a) / w;
        }
    }
    mass
}

/// L¹ distances `d_t = ||U^t f0 - fstar||` for `t = 0..=steps`.
pub fn exactness_profile(
    op: &UlamOperator,
    f0: &GridDensity,
    fstar: &GridDensity,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut profile = Vec::with_capacity(steps + 1);
    let mut current = f0.clone();
    profile.push(l1_distance(&current, fstar)?);
    for _ in 0..steps {
        let next = current.with_masses(op.apply(current.masses())?)?;
        profile.push(l1_distance(&next, fstar)?);
        current = next;
    }
    Ok(profile)
}

/// Exact cell masses of the quadratic map's invariant density
/// `1 / (pi sqrt(x(1-x)))`: the cell integral is
/// `(2/pi)(asin(sqrt(b)) - asin(sqrt(a)))`.
pub fn arcsine_cell_masses(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n_cells();
    (0..n)
        .map(|i| {
            let a = grid.edge(i).clamp(0.0, 1.0);
            let b = grid.edge(i + 1).clamp(0.0, 1.0);
            2.0 / std::f64::consts::PI * (b.sqrt().asin() - a.sqrt().asin())
        })
        .collect()
}
