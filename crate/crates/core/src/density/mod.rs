//! L¹ densities on uniform grids, plus the norm/positivity diagnostics every
//! asymptotic test is phrased in.
//!
//! Masses are per-cell probability masses, not pointwise values; all operator
//! applications downstream are expected to carry densities to densities, and
//! [`GridDensity::is_density`] is the check for that.

mod poly;

pub use poly::PiecewisePoly;

use crate::error::{Error, Result};
use std::io::Write;

/// Tolerance for density construction (masses must sum to 1 this tightly).
pub const DENSITY_CONSTRUCT_TOL: f64 = 1e-12;
/// Looser tolerance used when checking densities after operator applications.
pub const DENSITY_POST_OP_TOL: f64 = 1e-10;

/// Uniform partition of `[lo, hi]` into `n_cells` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n_cells: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "grid needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n_cells == 0 {
            return Err(Error::Domain("grid needs at least one cell".into()));
        }
        Ok(Self { lo, hi, n_cells })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_cells as f64
    }

    /// Left edge of cell `i` (edge `n_cells` is `hi`).
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / self.n_cells as f64
        }
    }

    pub fn cell_mid(&self, i: usize) -> f64 {
        0.5 * (self.edge(i) + self.edge(i + 1))
    }

    /// Cell containing `x`, or `None` when `x` is outside `[lo, hi]`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x > self.hi || !x.is_finite() {
            return None;
        }
        let raw = ((x - self.lo) / self.cell_width()) as usize;
        Some(raw.min(self.n_cells - 1))
    }

    fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: format!("grid [{}, {}] x {}", self.lo, self.hi, self.n_cells),
                got: format!("grid [{}, {}] x {}", other.lo, other.hi, other.n_cells),
            });
        }
        Ok(())
    }
}

/// Nonnegative mass vector on a [`Grid1D`] summing to one.
#[derive(Debug, Clone)]
pub struct GridDensity {
    grid: Grid1D,
    masses: Vec<f64>,
}

impl GridDensity {
    /// Validating constructor; use [`normalize`] for raw mass vectors.
    pub fn new(grid: Grid1D, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.n_cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} masses", grid.n_cells()),
                got: format!("{}", masses.len()),
            });
        }
        let d = Self { grid, masses };
        if !d.is_density(DENSITY_CONSTRUCT_TOL) {
            return Err(Error::DegenerateInput(format!(
                "masses are not a density (sum {}, min {})",
                d.total_mass(),
                d.masses.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(d)
    }

    pub fn uniform(grid: Grid1D) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            masses: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass in the cell containing `x`.
    pub fn point_mass(grid: Grid1D, x: f64) -> Result<Self> {
        let cell = grid
            .cell_of(x)
            .ok_or_else(|| Error::Domain(format!("{x} outside grid")))?;
        let mut masses = vec![0.0; grid.n_cells()];
        masses[cell] = 1.0;
        Ok(Self { grid, masses })
    }

    /// Cell masses of a pointwise density `f`, each cell integrated by
    /// Simpson's rule, then normalized.
    pub fn project(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut masses = vec![0.0; grid.n_cells()];
        for (i, m) in masses.iter_mut().enumerate() {
            let (a, b) = (grid.edge(i), grid.edge(i + 1));
            let mid = 0.5 * (a + b);
            *m = (b - a) / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
        }
        normalize(grid, &masses)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.masses.iter().map(|m| m.abs()).sum()
    }

    pub fn is_density(&self, tol: f64) -> bool {
        self.masses.iter().all(|&m| m >= 0.0) && (self.total_mass() - 1.0).abs() <= tol
    }

    /// Mass of the window `[a, b]`, endpoints snapped outward to cell edges
    /// so the result is exact rather than interpolated.
    pub fn mass_in_window(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(Error::Domain(format!("empty window [{a}, {b}]")));
        }
        if a < self.grid.lo() - 1e-12 || b > self.grid.hi() + 1e-12 {
            return Err(Error::Domain(format!(
                "window [{a}, {b}] outside grid [{}, {}]",
                self.grid.lo(),
                self.grid.hi()
            )));
        }
        let w = self.grid.cell_width();
        let first = (((a - self.grid.lo()) / w).floor().max(0.0)) as usize;
        let last = ((((b - self.grid.lo()) / w).ceil()) as usize).min(self.grid.n_cells());
        Ok(self.masses[first..last].iter().sum())
    }

    /// Replaces the mass vector; callers are responsible for re-checking
    /// density-ness where it matters.
    pub fn with_masses(&self, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != self.grid.n_cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} masses", self.grid.n_cells()),
                got: format!("{}", masses.len()),
            });
        }
        Ok(Self {
            grid: self.grid.clone(),
            masses,
        })
    }

    /// CSV rows `cell_lo,cell_hi,mass`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cell_lo,cell_hi,mass")?;
        for (i, m) in self.masses.iter().enumerate() {
            writeln!(w, "{},{},{}", self.grid.edge(i), self.grid.edge(i + 1), m)?;
        }
        Ok(())
    }
}

/// Clips tiny negatives (>= -1e-14) and rescales to total mass one.
pub fn normalize(grid: Grid1D, masses: &[f64]) -> Result<GridDensity> {
    if masses.len() != grid.n_cells() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} masses", grid.n_cells()),
            got: format!("{}", masses.len()),
        });
    }
    let mut clipped = Vec::with_capacity(masses.len());
    for &m in masses {
        if m < -1e-14 {
            return Err(Error::DegenerateInput(format!(
                "negative mass {m} beyond clipping tolerance"
            )));
        }
        clipped.push(m.max(0.0));
    }
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateInput(format!("total mass {total}")));
    }
    for m in &mut clipped {
        *m /= total;
    }
    Ok(GridDensity {
        grid,
        masses: clipped,
    })
}

/// L¹ distance between two mass vectors on the same grid.
pub fn l1_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    Ok(l1_between(&f.masses, &g.masses))
}

pub(crate) fn l1_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L¹ norm of the negative part of `f - h`: `sum_i max(0, h_i - f_i)`.
///
/// A lower function `h` with `negative_part_norm -> 0` along a semigroup
/// certifies asymptotic stability; `h = 0` gives 0 for any nonnegative `f`.
pub fn negative_part_norm(f: &GridDensity, h: &GridDensity) -> Result<f64> {
    f.grid.check_same(&h.grid)?;
    Ok(f.masses
        .iter()
        .zip(&h.masses)
        .map(|(&fi, &hi)| (hi - fi).max(0.0))
        .sum())
}

/// Histogram of samples on `grid`, normalized to a density; the fraction of
/// out-of-range samples is reported alongside.
pub fn histogram_from_samples(samples: &[f64], grid: &Grid1D) -> Result<(GridDensity, f64)> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput("no samples".into()));
    }
    let mut counts = vec![0.0; grid.n_cells()];
    let mut out_of_range = 0usize;
    for &s in samples {
        match grid.cell_of(s) {
            Some(c) => counts[c] += 1.0,
            None => out_of_range += 1,
        }
    }
    if out_of_range == samples.len() {
        return Err(Error::DegenerateInput("all samples out of range".into()));
    }
    let d = normalize(grid.clone(), &counts)?;
    Ok((d, out_of_range as f64 / samples.len() as f64))
}

/// Weighted histogram (e.g. occupation times), normalized to a density.
pub fn weighted_histogram(samples: &[(f64, f64)], grid: &Grid1D) -> Result<(GridDensity, f64)> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput("no samples".into()));
    }
    let mut mass = vec![0.0; grid.n_cells()];
    let mut lost = 0.0;
    let mut total = 0.0;
    for &(x, w) in samples {
        total += w;
        match grid.cell_of(x) {
            Some(c) => mass[c] += w,
            None => lost += w,
        }
    }
    if lost >= total {
        return Err(Error::DegenerateInput("all weight out of range".into()));
    }
    let d = normalize(grid.clone(), &mass)?;
    Ok((d, if total > 0.0 { lost / total } else { 0.0 }))
}

/// Density on a product space `grid x {0, .., n_states-1}`; `masses[s][c]` is
/// the mass of (cell `c`, state `s`).
#[derive(Debug, Clone)]
pub struct ProductDensity {
    grid: Grid1D,
    masses: Vec<Vec<f64>>,
}

impl ProductDensity {
    pub fn new(grid: Grid1D, masses: Vec<Vec<f64>>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::DegenerateInput("no states".into()));
        }
        for row in &masses {
            if row.len() != grid.n_cells() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} cells", grid.n_cells()),
                    got: format!("{}", row.len()),
                });
            }
        }
        Ok(Self { grid, masses })
    }

    pub fn zero(grid: Grid1D, n_states: usize) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            masses: vec![vec![0.0; n]; n_states],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_states(&self) -> usize {
        self.masses.len()
    }

    pub fn state(&self, s: usize) -> &[f64] {
        &self.masses[s]
    }

    pub fn state_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.masses[s]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().map(|r| r.iter().sum::<f64>()).sum()
    }

    pub fn is_density(&self, tol: f64) -> bool {
        self.masses.iter().flatten().all(|&m| m >= 0.0) && (self.total_mass() - 1.0).abs() <= tol
    }

    /// Marginal over states as a plain mass vector on the grid.
    pub fn space_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_cells()];
        for row in &self.masses {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    pub fn l1_distance(&self, other: &ProductDensity) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        if self.n_states() != other.n_states() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} states", self.n_states()),
                got: format!("{}", other.n_states()),
            });
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| l1_between(a, b))
            .sum())
    }

    /// CSV rows `cell_lo,cell_hi,state,mass`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "cell_lo,cell_hi,state,mass")?;
        for (s, row) in self.masses.iter().enumerate() {
            for (i, m) in row.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    self.grid.edge(i),
                    self.grid.edge(i + 1),
                    s,
                    m
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn l1_distance_basics() {
        let g = unit_grid(2);
        let f = GridDensity::uniform(g.clone());
        assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);

        let p0 = GridDensity::point_mass(g.clone(), 0.1).unwrap();
        let p1 = GridDensity::point_mass(g.clone(), 0.9).unwrap();
        assert_eq!(l1_distance(&p0, &p1).unwrap(), 2.0);

        let h = GridDensity::new(g, vec![0.75, 0.25]).unwrap();
        assert!((l1_distance(&f, &h).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_distance_grid_mismatch() {
        let f = GridDensity::uniform(unit_grid(2));
        let g = GridDensity::uniform(unit_grid(3));
        assert!(l1_distance(&f, &g).is_err());
    }

    #[test]
    fn negative_part() {
        let g = unit_grid(2);
        let f = GridDensity::uniform(g.clone());
        let h = f.with_masses(vec![0.75, 0.0]).unwrap();
        assert!((negative_part_norm(&f, &h).unwrap() - 0.25).abs() < 1e-15);
        // f >= h cellwise
        let low = f.with_masses(vec![0.2, 0.2]).unwrap();
        assert_eq!(negative_part_norm(&f, &low).unwrap(), 0.0);
        // h = 0
        let zero = f.with_masses(vec![0.0, 0.0]).unwrap();
        assert_eq!(negative_part_norm(&f, &zero).unwrap(), 0.0);
    }

    #[test]
    fn window_mass() {
        let f = GridDensity::uniform(unit_grid(10));
        assert!((f.mass_in_window(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.mass_in_window(0.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(f.mass_in_window(0.5, 0.5).is_err());
    }

    #[test]
    fn window_snaps_outward() {
        let f = GridDensity::uniform(unit_grid(10));
        // [0.05, 0.15] snaps to [0.0, 0.2]
        assert!((f.mass_in_window(0.05, 0.15).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn normalize_cases() {
        let g = unit_grid(2);
        let d = normalize(g.clone(), &[2.0, 2.0]).unwrap();
        assert_eq!(d.masses(), &[0.5, 0.5]);
        let d = normalize(g.clone(), &[1.0, 3.0]).unwrap();
        assert_eq!(d.masses(), &[0.25, 0.75]);
        assert!(normalize(g.clone(), &[0.0, 0.0]).is_err());
        assert!(normalize(g, &[-1.0, 2.0]).is_err());
    }

    #[test]
    fn histogram_uniform_samples() {
        let mut s = crate::numerics::RandomStream::new(11, 0);
        let samples: Vec<f64> = (0..100_000).map(|_| s.uniform()).collect();
        let (d, oor) = histogram_from_samples(&samples, &unit_grid(10)).unwrap();
        assert_eq!(oor, 0.0);
        for &m in d.masses() {
            assert!((m - 0.1).abs() < 0.004, "cell mass {m}");
        }
    }

    #[test]
    fn histogram_degenerate() {
        assert!(histogram_from_samples(&[], &unit_grid(4)).is_err());
        assert!(histogram_from_samples(&[5.0, 6.0], &unit_grid(4)).is_err());
        let (d, _) = histogram_from_samples(&[0.31, 0.32], &unit_grid(4)).unwrap();
        assert_eq!(d.masses()[1], 1.0);
    }

    #[test]
    fn product_density_marginal_and_csv() {
        let g = unit_grid(2);
        let p = ProductDensity::new(g, vec![vec![0.25, 0.25], vec![0.5, 0.0]]).unwrap();
        assert!(p.is_density(1e-12));
        assert_eq!(p.space_marginal(), vec![0.75, 0.25]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cell_lo,cell_hi,state,mass\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn csv_schema() {
        let f = GridDensity::uniform(unit_grid(2));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cell_lo,cell_hi,mass\n0,0.5,0.5\n0.5,1,0.5\n");
    }
}
