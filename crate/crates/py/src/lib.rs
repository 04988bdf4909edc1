//! Python bindings: the main types and operations of the toolkit, thin
//! wrappers over the `stosem` crate. Build as `stosem_py`; see
//! `python/smoke_test.py` for building and importing without packaging.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use stosem::chains;
use stosem::density::Grid1D;
use stosem::numerics;
use stosem::sde;
use stosem::spectral;
use stosem::structured;
use stosem::transfer;

fn to_py_err(e: stosem::Error) -> PyErr {
    use stosem::Error::*;
    match e {
        ShapeMismatch { .. }
        | Domain(_)
        | DegenerateInput(_)
        | Validation { .. }
        | Saturation(_)
        | Reducible { .. }
        | AssumptionViolated { .. }
        | CriticalCase(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Splittable counter-based random stream; replay-exact for a given
/// (seed, stream_id).
#[pyclass]
struct RandomStream {
    inner: numerics::RandomStream,
}

#[pymethods]
impl RandomStream {
    #[new]
    fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            inner: numerics::RandomStream::new(seed, stream_id),
        }
    }

    fn child(&self, index: u64) -> Self {
        Self {
            inner: self.inner.child(index),
        }
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }

    fn normal(&mut self) -> f64 {
        self.inner.normal()
    }

    fn exponential(&mut self, rate: f64) -> PyResult<f64> {
        numerics::sample_exponential(&mut self.inner, rate).map_err(to_py_err)
    }

    fn poisson(&mut self, mean: f64) -> PyResult<u64> {
        numerics::sample_poisson_count(&mut self.inner, mean).map_err(to_py_err)
    }
}

/// Finite intensity matrix with the semigroup operations on row vectors.
#[pyclass]
struct IntensityMatrix {
    inner: chains::IntensityMatrix,
}

#[pymethods]
impl IntensityMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: chains::IntensityMatrix::from_rows(&rows).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn jukes_cantor(rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: chains::IntensityMatrix::jukes_cantor(rate).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn birth_death(b: f64, d: f64, truncation: usize) -> PyResult<Self> {
        Ok(Self {
            inner: chains::IntensityMatrix::birth_death(b, d, truncation).map_err(to_py_err)?,
        })
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn is_irreducible(&self) -> bool {
        self.inner.is_irreducible()
    }

    fn max_exit_rate(&self) -> f64 {
        self.inner.max_exit_rate()
    }

    /// `x e^{tQ}` by uniformization.
    #[pyo3(signature = (t, x0, tol = 1e-12))]
    fn evolve(&self, t: f64, x0: Vec<f64>, tol: f64) -> PyResult<Vec<f64>> {
        chains::evolve(&self.inner, t, &x0, tol).map_err(to_py_err)
    }

    /// Unique probability solution of `xQ = 0`.
    fn stationary(&self) -> PyResult<Vec<f64>> {
        chains::stationary(&self.inner).map_err(to_py_err)
    }
}

/// Substitution-model evolutionary distance `-(3/4) ln(1 - 4p/3)`.
#[pyfunction]
#[pyo3(signature = (p, pairwise = false))]
fn jc_distance(p: f64, pairwise: bool) -> PyResult<f64> {
    let d = chains::jc_distance(p).map_err(to_py_err)?;
    Ok(if pairwise { 0.5 * d } else { d })
}

/// Four-state substitution transition matrix at time `t`.
#[pyfunction]
fn jc_transition(rate: f64, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = chains::jc_transition(rate, t).map_err(to_py_err)?;
    Ok((0..4)
        .map(|i| (0..4).map(|j| m[(i, j)]).collect())
        .collect())
}

fn build_map(name: &str) -> PyResult<transfer::PiecewiseExpandingMap> {
    match name {
        "tent" => Ok(transfer::PiecewiseExpandingMap::tent()),
        "logistic" => Ok(transfer::PiecewiseExpandingMap::logistic()),
        "identity" => Ok(transfer::PiecewiseExpandingMap::identity()),
        other => Err(PyValueError::new_err(format!(
            "unknown map '{other}' (tent|logistic|identity)"
        ))),
    }
}

/// Fixed density of the Ulam discretization: returns (lo, hi, masses).
#[pyfunction]
#[pyo3(signature = (map_name, n, tol = 1e-13))]
fn ulam_invariant_density(map_name: &str, n: usize, tol: f64) -> PyResult<(f64, f64, Vec<f64>)> {
    let map = build_map(map_name)?;
    let op = transfer::ulam_matrix(&map, n).map_err(to_py_err)?;
    let d = transfer::invariant_density(&op, tol, 500_000).map_err(to_py_err)?;
    Ok((op.grid().lo(), op.grid().hi(), d.masses().to_vec()))
}

/// One application of the Ulam operator to a mass vector.
#[pyfunction]
fn ulam_apply(map_name: &str, n: usize, masses: Vec<f64>) -> PyResult<Vec<f64>> {
    let map = build_map(map_name)?;
    let op = transfer::ulam_matrix(&map, n).map_err(to_py_err)?;
    op.apply(&masses).map_err(to_py_err)
}

/// Dominant-eigenvalue data of a matrix with nonnegative off-diagonal
/// entries: dict with r, x_star, y_star.
#[pyfunction]
fn perron<'py>(py: Python<'py>, rows: Vec<Vec<f64>>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let q = spectral::GeneratorMatrix::from_rows(&rows).map_err(to_py_err)?;
    let lim = spectral::perron_limit(&q).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("r", lim.r)?;
    dict.set_item("x_star", lim.x_star)?;
    dict.set_item("y_star", lim.y_star)?;
    Ok(dict)
}

fn growth_model(name: &str, sigma2: f64) -> PyResult<sde::GrowthModel> {
    match name {
        "logistic" => sde::GrowthModel::logistic(sigma2).map_err(to_py_err),
        "malthus" => sde::GrowthModel::malthus(sigma2).map_err(to_py_err),
        other => Err(PyValueError::new_err(format!(
            "unknown model '{other}' (logistic|malthus)"
        ))),
    }
}

/// Long-run classification of a growth diffusion:
/// grows | extinct | bistable | stationary.
#[pyfunction]
fn classify_growth(model: &str, sigma2: f64) -> PyResult<String> {
    let m = growth_model(model, sigma2)?;
    let report = sde::classify(&m).map_err(to_py_err)?;
    Ok(match report.class {
        sde::Classification::Grows => "grows",
        sde::Classification::Extinct => "extinct",
        sde::Classification::Bistable => "bistable",
        sde::Classification::Stationary => "stationary",
    }
    .to_string())
}

/// Stationary density values at the requested points.
#[pyfunction]
fn stationary_pdf(model: &str, sigma2: f64, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let m = growth_model(model, sigma2)?;
    let law = sde::stationary_density(&m, 1e-8).map_err(to_py_err)?;
    if !law.exists {
        return Err(PyValueError::new_err("no stationary law in this regime"));
    }
    xs.iter()
        .map(|&x| law.evaluate(x).map_err(to_py_err))
        .collect()
}

/// Endpoint of one Euler-Maruyama path.
#[pyfunction]
fn em_endpoint(
    model: &str,
    sigma2: f64,
    x0: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> PyResult<f64> {
    let m = growth_model(model, sigma2)?;
    let mut stream = numerics::RandomStream::new(seed, 0);
    sde::em_endpoint(&m, x0, dt, horizon, &mut stream).map_err(to_py_err)
}

/// Velocity-flip endpoints: list of (x, v) pairs.
#[pyfunction]
fn telegraph_endpoints(
    rate: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    let parent = numerics::RandomStream::new(seed, 0);
    stosem::pdmp::telegraph::telegraph_ensemble(rate, 0.0, 1.0, horizon, n_paths, &parent)
        .map_err(to_py_err)
}

/// Space marginal of the velocity-flip forward PDE: (lo, hi, masses).
#[pyfunction]
fn kac_marginal(
    rate: f64,
    dx: f64,
    horizon: f64,
    half_width: f64,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let n = (2.0 * half_width / dx).round() as usize;
    let grid = Grid1D::new(-half_width, half_width, n).map_err(to_py_err)?;
    let mut u0 = stosem::density::ProductDensity::zero(grid.clone(), 2);
    let mid = grid
        .cell_of(0.0)
        .ok_or_else(|| PyValueError::new_err("empty grid"))?;
    u0.state_mut(0)[mid] = 1.0;
    let sol = stosem::pdmp::telegraph::kac_pde_solve(rate, &u0, dx, horizon).map_err(to_py_err)?;
    Ok((-half_width, half_width, sol.density.space_marginal()))
}

/// Growth rate of the age model vs its characteristic-equation root:
/// dict with lambda_hat, lotka, r_squared.
#[pyfunction]
fn mckendrick_growth<'py>(
    py: Python<'py>,
    mu: f64,
    psi_center: f64,
    psi_width: f64,
    psi_amp: f64,
    a_max: f64,
    cells: usize,
    horizon: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let model = structured::McKendrickModel::new(
        move |_| mu,
        move |a| {
            if (a - psi_center).abs() > 3.0 * psi_width {
                0.0
            } else {
                psi_amp * (-((a - psi_center) / psi_width).powi(2)).exp()
            }
        },
        a_max,
        cells,
    )
    .map_err(to_py_err)?;
    let lotka = structured::lotka_rate(&model).map_err(to_py_err)?;
    let da = model.da();
    let mut u0 = vec![0.0; cells];
    for (j, v) in u0.iter_mut().enumerate() {
        if (j as f64 + 0.5) * da < 2.0 {
            *v = da;
        }
    }
    let traj = structured::mckendrick_evolve(&model, &u0, da, horizon).map_err(to_py_err)?;
    let (lambda_hat, r_squared) =
        structured::malthus_estimate(&traj.times, &traj.total_mass, (horizon * 0.6, horizon))
            .map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("lambda_hat", lambda_hat)?;
    dict.set_item("lotka", lotka)?;
    dict.set_item("r_squared", r_squared)?;
    Ok(dict)
}

/// Cell-cycle benchmark run: dict with lambda_hat, renewal_defect_max,
/// r_squared.
#[pyfunction]
fn cellcycle_benchmark<'py>(
    py: Python<'py>,
    horizon: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let model = structured::CellCycleModel::benchmark();
    let grid = model.grid.clone();
    let mut u0 = vec![0.0; grid.len()];
    for i in 0..grid.n_xb {
        for j in 0..grid.n_a / 5 {
            u0[grid.idx(i, j)] = 1.0;
        }
    }
    let total: f64 = u0.iter().sum();
    u0.iter_mut().for_each(|v| *v /= total);
    let traj = structured::cellcycle_evolve(&model, &u0, horizon, horizon).map_err(to_py_err)?;
    let (lambda_hat, r_squared) = traj.malthus((horizon * 0.5, horizon)).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("lambda_hat", lambda_hat)?;
    dict.set_item("r_squared", r_squared)?;
    dict.set_item("renewal_defect_max", traj.renewal_defect_max)?;
    Ok(dict)
}

#[pymodule]
fn stosem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RandomStream>()?;
    m.add_class::<IntensityMatrix>()?;
    m.add_function(wrap_pyfunction!(jc_distance, m)?)?;
    m.add_function(wrap_pyfunction!(jc_transition, m)?)?;
    m.add_function(wrap_pyfunction!(ulam_invariant_density, m)?)?;
    m.add_function(wrap_pyfunction!(ulam_apply, m)?)?;
    m.add_function(wrap_pyfunction!(perron, m)?)?;
    m.add_function(wrap_pyfunction!(classify_growth, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(em_endpoint, m)?)?;
    m.add_function(wrap_pyfunction!(telegraph_endpoints, m)?)?;
    m.add_function(wrap_pyfunction!(kac_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(mckendrick_growth, m)?)?;
    m.add_function(wrap_pyfunction!(cellcycle_benchmark, m)?)?;
    Ok(())
}
