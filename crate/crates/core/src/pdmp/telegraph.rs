//! Symmetric velocity-flip motion on the line and its forward PDE.
//!
//! The sampler is exact: flip times are a Poisson stream, positions integrate
//! the piecewise-constant velocity in closed form. The PDE solver is a
//! two-state upwind transport with exact exponential regime exchange per step
//! (Lie splitting); with `dt = dx` the transport is an exact cell shift.

use crate::density::ProductDensity;
use crate::error::{Error, Result};
use crate::numerics::{sample_exponential, RandomStream};
use rayon::prelude::*;

/// Exact sample of the flip process: returns `(x_T, v_T)` with `v_T` in
/// `{-1, +1}`.
pub fn telegraph_simulate(
    lambda: f64,
    x0: f64,
    v0: f64,
    horizon: f64,
    stream: &mut RandomStream,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("rate must be > 0, got {lambda}")));
    }
    if v0 != 1.0 && v0 != -1.0 {
        return Err(Error::Domain(format!("v0 must be +-1, got {v0}")));
    }
    let mut t = 0.0;
    let mut x = x0;
    let mut v = v0;
    loop {
        let dt = sample_exponential(stream, lambda)?;
        if t + dt >= horizon {
            x += v * (horizon - t);
            return Ok((x, v));
        }
        x += v * dt;
        v = -v;
        t += dt;
    }
}

/// Ensemble of endpoints, one child stream per path, reduced in path order
/// so the output is independent of the worker count.
pub fn telegraph_ensemble(
    lambda: f64,
    x0: f64,
    v0: f64,
    horizon: f64,
    n_paths: usize,
    parent: &RandomStream,
) -> Result<Vec<(f64, f64)>> {
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut s = parent.child(p as u64);
            telegraph_simulate(lambda, x0, v0, horizon, &mut s)
        })
        .collect()
}

/// Result of the forward-PDE evolution.
pub struct KacSolution {
    pub density: ProductDensity,
    pub steps: usize,
    /// Largest per-step change of total mass observed (conservation check).
    pub max_mass_drift: f64,
}

/// Upwind transport (state 0 moves right at speed 1, state 1 moves left)
/// with exact exponential exchange between the states, per step.
///
/// Needs `dt <= dx`; with equality the transport is an exact shift. Mass
/// reaching a boundary piles into the edge cell (size the grid so the light
/// cone stays inside). Note that at `dt = dx` every displacement is an even
/// number of cells, so the solution lives on one parity class of the
/// lattice: downstream comparisons should aggregate an even number of cells
/// per bin.
pub fn kac_pde_solve(
    lambda: f64,
    u0: &ProductDensity,
    dt: f64,
    horizon: f64,
) -> Result<KacSolution> {
    if u0.n_states() != 2 {
        return Err(Error::ShapeMismatch {
            expected: "2 velocity states".into(),
            got: format!("{}", u0.n_states()),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("rate must be >= 0, got {lambda}")));
    }
    let dx = u0.grid().cell_width();
    if dt > dx * (1.0 + 1e-12) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the stability bound dx = {dx}"
        )));
    }
    let n = u0.grid().n_cells();
    let mut right = u0.state(0).to_vec();
    let mut left = u0.state(1).to_vec();
    let mut max_drift: f64 = 0.0;
    let mut steps = 0usize;
    let mut t = 0.0;

    // integer stepping keeps dt = dx shifts exact; one partial step lands on
    // the horizon when dt does not divide it
    let whole_steps = (horizon / dt + 1e-9).floor() as usize;
    let tail = horizon - whole_steps as f64 * dt;
    let mut scratch = vec![0.0; n];
    for k in 0..=whole_steps {
        let h = if k < whole_steps {
            dt
        } else if tail > 1e-12 {
            tail
        } else {
            break;
        };
        let c = h / dx;
        let before: f64 = right.iter().sum::<f64>() + left.iter().sum::<f64>();

        // transport: rightward for state 0
        scratch[0] = right[0] * (1.0 - c) + right[0] * 0.0;
        for j in 1..n {
            scratch[j] = right[j] * (1.0 - c) + right[j - 1] * c;
        }
        // outflow at the right edge stays in the last cell
        scratch[n - 1] += right[n - 1] * c;
        right.copy_from_slice(&scratch);

        // leftward for state 1
        for j in 0..n - 1 {
            scratch[j] = left[j] * (1.0 - c) + left[j + 1] * c;
        }
        scratch[n - 1] = left[n - 1] * (1.0 - c);
        scratch[0] += left[0] * c;
        left.copy_from_slice(&scratch);

        // exact exchange: relaxes toward the per-cell average at rate 2 lambda
        let decay = (-2.0 * lambda * h).exp();
        for j in 0..n {
            let avg = 0.5 * (right[j] + left[j]);
            let dev = 0.5 * (right[j] - left[j]) * decay;
            right[j] = avg + dev;
            left[j] = avg - dev;
        }

        let after: f64 = right.iter().sum::<f64>() + left.iter().sum::<f64>();
        max_drift = max_drift.max((after - before).abs());
        t += h;
        steps += 1;
    }
    let _ = t;

    let density = ProductDensity::new(u0.grid().clone(), vec![right, left])?;
    Ok(KacSolution {
        density,
        steps,
        max_mass_drift: max_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Grid1D;

    #[test]
    fn no_flips_is_straight_motion() {
        // With a tiny rate and short horizon most paths never flip.
        let mut s = RandomStream::new(30, 0);
        let mut straight = 0;
        for _ in 0..1000 {
            let (x, v) = telegraph_simulate(1e-6, 0.0, 1.0, 2.0, &mut s).unwrap();
            if v == 1.0 {
                assert!((x - 2.0).abs() < 1e-12);
                straight += 1;
            }
        }
        assert!(straight > 990);
    }

    #[test]
    fn speed_is_always_unit() {
        let mut s = RandomStream::new(31, 0);
        for _ in 0..10_000 {
            let (x, v) = telegraph_simulate(1.0, 0.0, 1.0, 2.0, &mut s).unwrap();
            assert!(v == 1.0 || v == -1.0);
            assert!(x.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn pde_pure_transport_shifts() {
        let grid = Grid1D::new(-3.0, 3.0, 600).unwrap();
        let mut u0 = ProductDensity::zero(grid.clone(), 2);
        let mid = grid.cell_of(0.0).unwrap();
        u0.state_mut(0)[mid] = 1.0;
        let sol = kac_pde_solve(0.0, &u0, grid.cell_width(), 2.0).unwrap();
        // the cell [0, dx) lands on [2, 2 + dx) after 200 exact shifts
        let shifted = grid.cell_of(2.0 + 1e-9).unwrap();
        assert!((sol.density.state(0)[shifted] - 1.0).abs() < 1e-12);
        assert!(sol.max_mass_drift < 1e-12);
    }

    #[test]
    fn pde_conserves_mass_and_symmetry() {
        let grid = Grid1D::new(-3.0, 3.0, 600).unwrap();
        let mut u0 = ProductDensity::zero(grid.clone(), 2);
        // mirror-symmetric start: cell j matches cell n-1-j in the other
        // state, so the + mass sits in [0, dx) and the - mass in [-dx, 0)
        let mid = grid.cell_of(0.0).unwrap();
        u0.state_mut(0)[mid] = 0.5;
        u0.state_mut(1)[mid - 1] = 0.5;
        let sol = kac_pde_solve(1.0, &u0, grid.cell_width(), 2.0).unwrap();
        assert!(sol.max_mass_drift < 1e-12, "drift {}", sol.max_mass_drift);
        assert!((sol.density.total_mass() - 1.0).abs() < 1e-10);
        // (x, v) -> (-x, -v) symmetry
        let n = grid.n_cells();
        for j in 0..n {
            let a = sol.density.state(0)[j];
            let b = sol.density.state(1)[n - 1 - j];
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pde_rejects_large_steps() {
        let grid = Grid1D::new(-1.0, 1.0, 10).unwrap();
        let u0 = ProductDensity::zero(grid.clone(), 2);
        assert!(matches!(
            kac_pde_solve(1.0, &u0, 1.0, 1.0),
            Err(Error::StepSize(_))
        ));
    }

    #[test]
    fn ensemble_is_replayable_and_order_independent() {
        let parent = RandomStream::new(55, 9);
        let a = telegraph_ensemble(1.0, 0.0, 1.0, 2.0, 500, &parent).unwrap();
        let b = telegraph_ensemble(1.0, 0.0, 1.0, 2.0, 500, &parent).unwrap();
        assert_eq!(a, b);
    }
}
