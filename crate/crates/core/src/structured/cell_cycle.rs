//! Cell-cycle model structured by initial size and age: cells of initial
//! size `x_b` age with unit speed, divide at a random cycle length with
//! density `q(x_b, .)`, and each division injects two newborns of initial
//! size `S_a(x_b) = pi_a(x_b) / 2` at age zero.
//!
//! The step is: exact age shift (the time step equals the age cell), exact
//! survival-ratio removal (the exponential of the integrated hazard is the
//! survival-function ratio), and a mass-exact monotone rebin of the doubled
//! removed mass through the division map. Removal and injection balance to
//! rounding, which is what makes the growth-rate diagnostics trustworthy.

use super::{malthus_estimate, rebin_monotone};
use crate::error::{Error, Result};
use crate::numerics::{rk4_flow, scalar_field};
use std::sync::Arc;

/// Uniform grid over initial size x age.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub xb_lo: f64,
    pub xb_hi: f64,
    pub n_xb: usize,
    pub a_max: f64,
    pub n_a: usize,
}

impl CellGrid {
    pub fn dxb(&self) -> f64 {
        (self.xb_hi - self.xb_lo) / self.n_xb as f64
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    pub fn xb_edge(&self, i: usize) -> f64 {
        self.xb_lo + (self.xb_hi - self.xb_lo) * i as f64 / self.n_xb as f64
    }

    pub fn xb_mid(&self, i: usize) -> f64 {
        self.xb_lo + (self.xb_hi - self.xb_lo) * (i as f64 + 0.5) / self.n_xb as f64
    }

    pub fn a_edge(&self, j: usize) -> f64 {
        self.a_max * j as f64 / self.n_a as f64
    }

    pub fn len(&self) -> usize {
        self.n_xb * self.n_a
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_a + j
    }
}

/// Growth field, cycle-length law and grid of the cell-cycle model.
#[derive(Clone)]
pub struct CellCycleModel {
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    q: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    a_lo: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    a_hi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub grid: CellGrid,
    /// RK4 substeps per age cell when flowing the growth field.
    pub flow_substeps: usize,
}

/// Which model assumptions hold on the grid, with details for the ones that
/// fail.
#[derive(Debug, Clone, Default)]
pub struct AssumptionReport {
    pub growth_positive: bool,
    pub q_is_density: bool,
    pub support_positive_and_bounded: bool,
    pub support_bounds_continuous: bool,
    pub daughters_inside_range: bool,
    pub daughter_interval_straddles_mother: bool,
    pub not_self_similar: bool,
    pub details: Vec<String>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.growth_positive
            && self.q_is_density
            && self.support_positive_and_bounded
            && self.support_bounds_continuous
            && self.daughters_inside_range
            && self.daughter_interval_straddles_mother
            && self.not_self_similar
    }
}

impl CellCycleModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        a_lo: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_hi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        grid: CellGrid,
    ) -> Result<Self> {
        if grid.n_xb == 0 || grid.n_a == 0 || !(grid.xb_lo < grid.xb_hi) || !(grid.a_max > 0.0) {
            return Err(Error::Domain("degenerate cell-cycle grid".into()));
        }
        Ok(Self {
            g: Arc::new(g),
            q: Arc::new(q),
            a_lo: Arc::new(a_lo),
            a_hi: Arc::new(a_hi),
            grid,
            flow_substeps: 1,
        })
    }

    /// Benchmark instance: unit growth, cycle length uniform on [1, 1.2],
    /// newborn sizes in [1, 1.2]. These constants satisfy every grid
    /// assumption (`S_1(x) = (x+1)/2 < x < (x+1.2)/2 = S_1.2(x)` exactly on
    /// the open interval, and `g(2x) = 1 != 2 = 2 g(x)`).
    pub fn benchmark() -> Self {
        let grid = CellGrid {
            xb_lo: 1.0,
            xb_hi: 1.2,
            n_xb: 40,
            a_max: 1.25,
            n_a: 250,
        };
        Self::new(
            |_| 1.0,
            |_, a| if (1.0..=1.2).contains(&a) { 5.0 } else { 0.0 },
            |_| 1.0,
            |_| 1.2,
            grid,
        )
        .expect("benchmark grid is valid")
    }

    pub fn g_at(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn q_at(&self, xb: f64, a: f64) -> f64 {
        (self.q)(xb, a)
    }

    pub fn cycle_min(&self, xb: f64) -> f64 {
        (self.a_lo)(xb)
    }

    pub fn cycle_max(&self, xb: f64) -> f64 {
        (self.a_hi)(xb)
    }

    /// Size reached from `xb` after age `a` under the growth field.
    pub fn grown_size(&self, xb: f64, a: f64) -> Result<f64> {
        if a <= 0.0 {
            return Ok(xb);
        }
        let g = self.g.clone();
        let field = scalar_field(move |x| g(x));
        let dt = self.grid.da() / self.flow_substeps.max(1) as f64;
        Ok(rk4_flow(&field, &[xb], a, dt)?[0])
    }

    /// Daughter initial size `pi_a(xb) / 2`.
    pub fn daughter_size(&self, xb: f64, a: f64) -> Result<f64> {
        Ok(0.5 * self.grown_size(xb, a)?)
    }

    /// Survival function `Phi(xb, a) = int_a^inf q(xb, .)` tabulated on the
    /// age edges by per-cell Simpson cumulation.
    fn survival_table(&self) -> Vec<Vec<f64>> {
        let g = &self.grid;
        let da = g.da();
        (0..g.n_xb)
            .map(|i| {
                let xb = g.xb_mid(i);
                let mut cdf = vec![0.0; g.n_a + 1];
                for j in 0..g.n_a {
                    let (a0, a1) = (g.a_edge(j), g.a_edge(j + 1));
                    let mid = 0.5 * (a0 + a1);
                    let inc = da / 6.0
                        * (self.q_at(xb, a0) + 4.0 * self.q_at(xb, mid) + self.q_at(xb, a1));
                    cdf[j + 1] = cdf[j] + inc;
                }
                cdf.iter().map(|&f| (1.0 - f).max(0.0)).collect()
            })
            .collect()
    }

    /// Checks the grid assumptions; callers decide which failures are fatal.
    pub fn check_assumptions(&self) -> Result<AssumptionReport> {
        let g = &self.grid;
        let mut report = AssumptionReport::default();

        report.growth_positive = true;
        for k in 0..=32 {
            let x = g.xb_lo + (2.0 * g.xb_hi - g.xb_lo) * k as f64 / 32.0;
            if !(self.g_at(x) > 0.0) {
                report.growth_positive = false;
                report.details.push(format!("growth vanishes at x={x}"));
                break;
            }
        }

        report.q_is_density = true;
        report.support_positive_and_bounded = true;
        let surv = self.survival_table();
        for i in (0..g.n_xb).step_by((g.n_xb / 8).max(1)) {
            let xb = g.xb_mid(i);
            let total = 1.0 - surv[i][g.n_a];
            if (total - 1.0).abs() > 1e-8 {
                report.q_is_density = false;
                report.details.push(format!("int q(x_b={xb}, .) = {total}"));
            }
            let (lo, hi) = (self.cycle_min(xb), self.cycle_max(xb));
            if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() || hi > g.a_max {
                report.support_positive_and_bounded = false;
                report
                    .details
                    .push(format!("cycle support [{lo}, {hi}] bad at x_b={xb}"));
            }
        }

        report.support_bounds_continuous = true;
        for i in 1..g.n_xb {
            let (x0, x1) = (g.xb_mid(i - 1), g.xb_mid(i));
            if (self.cycle_min(x0) - self.cycle_min(x1)).abs() > 0.5
                || (self.cycle_max(x0) - self.cycle_max(x1)).abs() > 0.5
            {
                report.support_bounds_continuous = false;
                report
                    .details
                    .push(format!("support bounds jump between x_b={x0} and x_b={x1}"));
                break;
            }
        }

        report.daughters_inside_range = true;
        report.daughter_interval_straddles_mother = true;
        for i in 0..g.n_xb {
            let xb = g.xb_mid(i);
            let s_lo = self.daughter_size(xb, self.cycle_min(xb))?;
            let s_hi = self.daughter_size(xb, self.cycle_max(xb))?;
            if s_lo < g.xb_lo - 1e-9 || s_hi > g.xb_hi + 1e-9 {
                report.daughters_inside_range = false;
                report.details.push(format!(
                    "daughters of x_b={xb} span [{s_lo}, {s_hi}] outside the range"
                ));
            }
            let interior = xb > g.xb_lo + 0.75 * g.dxb() && xb < g.xb_hi - 0.75 * g.dxb();
            if interior && !(s_lo < xb && xb < s_hi) {
                report.daughter_interval_straddles_mother = false;
                report.details.push(format!(
                    "daughter interval [{s_lo}, {s_hi}] misses the mother size {xb}"
                ));
            }
        }

        report.not_self_similar = false;
        for k in 0..=32 {
            let x = g.xb_lo + (g.xb_hi - g.xb_lo) * k as f64 / 32.0;
            if (self.g_at(2.0 * x) - 2.0 * self.g_at(x)).abs() > 1e-9 {
                report.not_self_similar = true;
                break;
            }
        }
        if !report.not_self_similar {
            report
                .details
                .push("g(2x) = 2 g(x) everywhere: self-similar growth".into());
        }
        Ok(report)
    }
}

/// Output of a cell-cycle run.
#[derive(Debug, Clone)]
pub struct CellCycleTrajectory {
    pub grid: CellGrid,
    pub times: Vec<f64>,
    pub total_mass: Vec<f64>,
    /// Mass injected at age zero per step.
    pub births: Vec<f64>,
    /// Snapshots `(t, flat masses)` every `snapshot_every` time units.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_masses: Vec<f64>,
    /// Largest |injected - 2 removed| observed in any step.
    pub renewal_defect_max: f64,
}

/// Evolves the cell-cycle density. The time step is locked to the age cell
/// (`dt = da`); `u0` is a flat `(x_b, age)` mass array in `grid.idx` layout.
pub fn cellcycle_evolve(
    model: &CellCycleModel,
    u0: &[f64],
    horizon: f64,
    snapshot_every: f64,
) -> Result<CellCycleTrajectory> {
    let g = &model.grid;
    if u0.len() != g.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} cells", g.len()),
            got: format!("{}", u0.len()),
        });
    }
    let report = model.check_assumptions()?;
    if !report.all_hold() {
        return Err(Error::AssumptionViolated {
            which: "cell-cycle grid assumptions".into(),
            detail: report.details.join("; "),
        });
    }
    let da = g.da();
    let dt = da;
    let n_a = g.n_a;
    let n_xb = g.n_xb;
    let dxb = g.dxb();

    let survival = model.survival_table();
    // survival ratio across one step for a cell entering age slot j+1
    let ratio: Vec<Vec<f64>> = survival
        .iter()
        .map(|phi| {
            (0..n_a)
                .map(|j| {
                    if phi[j] > 0.0 {
                        (phi[j + 1] / phi[j]).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    // division map S at the age reached mid-transition: cells moving out of
    // slot j divide at ages near the edge a_{j+1}; the map is tabulated on
    // the x_b edges by incremental flow, one age cell at a time.
    let mut s_edges: Vec<Vec<f64>> = Vec::with_capacity(n_a);
    {
        let mut grown: Vec<f64> = (0..=n_xb).map(|e| g.xb_edge(e)).collect();
        let gfun = model.g.clone();
        let field = scalar_field(move |x| gfun(x));
        let flow_dt = da / model.flow_substeps.max(1) as f64;
        for _ in 0..n_a {
            for v in grown.iter_mut() {
                *v = rk4_flow(&field, &[*v], da, flow_dt)?[0];
            }
            s_edges.push(grown.iter().map(|x| 0.5 * x).collect());
        }
    }

    let steps = (horizon / dt).round().max(1.0) as usize;
    let mut masses = u0.to_vec();
    let mut times = vec![0.0];
    let mut totals = vec![masses.iter().sum::<f64>()];
    let mut births = vec![0.0];
    let mut snapshots = vec![(0.0, masses.clone())];
    let mut next_snapshot = snapshot_every;
    let mut renewal_defect_max: f64 = 0.0;

    let mut removed_by_age: Vec<Vec<f64>> = vec![vec![0.0; n_xb]; n_a];
    let mut newborn = vec![0.0; n_xb];

    for step in 1..=steps {
        for row in removed_by_age.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut removed_total = 0.0;
        // age shift with survival, oldest first
        for i in 0..n_xb {
            let base = g.idx(i, 0);
            // the top slot force-divides
            let top = masses[base + n_a - 1];
            if top > 0.0 {
                removed_by_age[n_a - 1][i] += top;
                removed_total += top;
            }
            for j in (0..n_a - 1).rev() {
                let m = masses[base + j];
                let keep = m * ratio[i][j];
                removed_by_age[j][i] += m - keep;
                removed_total += m - keep;
                masses[base + j + 1] = keep;
            }
            masses[base] = 0.0;
        }
        // rebin the doubled removed mass through the division map, age slice
        // by age slice
        newborn.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n_a {
            let slice = &removed_by_age[j];
            if slice.iter().all(|&v| v == 0.0) {
                continue;
            }
            let edges = &s_edges[j];
            if edges[0] < g.xb_lo - 1e-6 || edges[n_xb] > g.xb_hi + 1e-6 {
                return Err(Error::AssumptionViolated {
                    which: "daughter range".into(),
                    detail: format!(
                        "division image [{}, {}] leaves [{}, {}] at age slice {j}",
                        edges[0], edges[n_xb], g.xb_lo, g.xb_hi
                    ),
                });
            }
            let lost = rebin_monotone(edges, slice, g.xb_lo, dxb, &mut newborn, 2.0);
            if lost > 1e-10 * removed_total.max(1.0) {
                return Err(Error::AssumptionViolated {
                    which: "daughter range".into(),
                    detail: format!("rebin lost mass {lost} at age slice {j}"),
                });
            }
        }
        let injected: f64 = newborn.iter().sum();
        renewal_defect_max = renewal_defect_max
            .max((injected - 2.0 * removed_total).abs() / removed_total.max(1e-300));
        for i in 0..n_xb {
            masses[g.idx(i, 0)] = newborn[i];
        }

        let t = step as f64 * dt;
        times.push(t);
        totals.push(masses.iter().sum());
        births.push(injected);
        if t + 1e-12 >= next_snapshot {
            snapshots.push((t, masses.clone()));
            next_snapshot += snapshot_every;
        }
    }
    if snapshots.last().map(|(t, _)| *t) != times.last().copied() {
        snapshots.push((*times.last().unwrap(), masses.clone()));
    }
    Ok(CellCycleTrajectory {
        grid: g.clone(),
        times,
        total_mass: totals,
        births,
        snapshots,
        final_masses: masses,
        renewal_defect_max,
    })
}

impl CellCycleTrajectory {
    /// Growth-rate estimate over `window`, from the total-mass trajectory.
    pub fn malthus(&self, window: (f64, f64)) -> Result<(f64, f64)> {
        malthus_estimate(&self.times, &self.total_mass, window)
    }
}

/// Residual profile of the normalized snapshots against the final one:
/// `r_t = || normalize(e^{-lambda t} u_t) - normalize(e^{-lambda T} u_T) ||_1`.
pub fn aeg_residual(trajectory: &CellCycleTrajectory, lambda_hat: f64) -> Vec<(f64, f64)> {
    let normalize = |(t, m): &(f64, Vec<f64>)| -> Vec<f64> {
        let scale = (-lambda_hat * t).exp();
        let scaled: Vec<f64> = m.iter().map(|v| v * scale).collect();
        let total: f64 = scaled.iter().sum();
        if total > 0.0 {
            scaled.iter().map(|v| v / total).collect()
        } else {
            scaled
        }
    };
    let last = normalize(trajectory.snapshots.last().unwrap());
    trajectory
        .snapshots
        .iter()
        .map(|snap| {
            let d = normalize(snap);
            let r: f64 = d.iter().zip(&last).map(|(a, b)| (a - b).abs()).sum();
            (snap.0, r)
        })
        .collect()
}

/// Pushes the `(x_b, age)` density to the current-size axis: per age slice
/// the size is `pi_a(x_b)`, a monotone map rebinned mass-exactly, then the
/// slices are summed. Returns the size grid edges with the masses.
pub fn size_age_pushforward(
    model: &CellCycleModel,
    masses: &[f64],
    n_size_cells: usize,
) -> Result<(f64, f64, Vec<f64>)> {
    let g = &model.grid;
    if masses.len() != g.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} cells", g.len()),
            got: format!("{}", masses.len()),
        });
    }
    let da = g.da();
    let gfun = model.g.clone();
    let field = scalar_field(move |x| gfun(x));
    let flow_dt = da / model.flow_substeps.max(1) as f64;

    // sizes reached at the top of the age grid bound the output range
    let size_lo = g.xb_lo;
    let size_hi = rk4_flow(&field, &[g.xb_hi], g.a_max, flow_dt)?[0];
    let width = (size_hi - size_lo) / n_size_cells as f64;
    let mut out = vec![0.0; n_size_cells];

    // grown edges at the age-cell midpoints, advanced incrementally
    let mut grown: Vec<f64> = (0..=g.n_xb).map(|e| g.xb_edge(e)).collect();
    for v in grown.iter_mut() {
        *v = rk4_flow(&field, &[*v], 0.5 * da, flow_dt)?[0];
    }
    let mut slice = vec![0.0; g.n_xb];
    for j in 0..g.n_a {
        for i in 0..g.n_xb {
            slice[i] = masses[g.idx(i, j)];
        }
        if slice.iter().any(|&v| v != 0.0) {
            let lost = rebin_monotone(&grown, &slice, size_lo, width, &mut out, 1.0);
            if lost > 1e-9 {
                return Err(Error::Geometry(format!(
                    "size pushforward lost mass {lost} at age slice {j}"
                )));
            }
        }
        if j + 1 < g.n_a {
            for v in grown.iter_mut() {
                *v = rk4_flow(&field, &[*v], da, flow_dt)?[0];
            }
        }
    }
    Ok((size_lo, size_hi, out))
}
