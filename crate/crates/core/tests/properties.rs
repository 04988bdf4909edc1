//! Property tests over randomized inputs for the structural invariants:
//! semigroup laws, mass and positivity preservation, metric axioms.

use proptest::prelude::*;
use stosem::chains::{evolve, IntensityMatrix};
use stosem::density::{l1_distance, negative_part_norm, normalize, Grid1D};
use stosem::numerics::{adaptive_quad, rk4_flow, scalar_field};
use stosem::transfer::{ulam_matrix, PiecewiseExpandingMap};

fn intensity_strategy(n: usize) -> impl Strategy<Value = IntensityMatrix> {
    proptest::collection::vec(0.0f64..2.0, n * n).prop_map(move |raw| {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut total = 0.0;
            for j in 0..n {
                if i != j {
                    rows[i][j] = raw[i * n + j];
                    total += rows[i][j];
                }
            }
            rows[i][i] = -total;
        }
        IntensityMatrix::from_rows(&rows).unwrap()
    })
}

fn distribution_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-3f64..1.0, n).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evolve_semigroup_law(
        q in intensity_strategy(4),
        x in distribution_strategy(4),
        s in 0.05f64..1.5,
        t in 0.05f64..1.5,
    ) {
        let tol = 1e-11;
        let whole = evolve(&q, s + t, &x, tol).unwrap();
        let stepped = evolve(&q, t, &evolve(&q, s, &x, tol).unwrap(), tol).unwrap();
        let gap: f64 = whole.iter().zip(&stepped).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(gap < 2e-10);
    }

    #[test]
    fn evolve_preserves_mass_and_positivity(
        q in intensity_strategy(5),
        x in distribution_strategy(5),
        t in 0.0f64..4.0,
    ) {
        let y = evolve(&q, t, &x, 1e-11).unwrap();
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(y.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn l1_is_a_metric_bounded_by_two(
        a in proptest::collection::vec(0.0f64..1.0, 16),
        b in proptest::collection::vec(0.0f64..1.0, 16),
        c in proptest::collection::vec(0.0f64..1.0, 16),
    ) {
        let grid = Grid1D::new(0.0, 1.0, 16).unwrap();
        prop_assume!(a.iter().sum::<f64>() > 0.0);
        prop_assume!(b.iter().sum::<f64>() > 0.0);
        prop_assume!(c.iter().sum::<f64>() > 0.0);
        let fa = normalize(grid.clone(), &a).unwrap();
        let fb = normalize(grid.clone(), &b).unwrap();
        let fc = normalize(grid, &c).unwrap();
        let dab = l1_distance(&fa, &fb).unwrap();
        let dba = l1_distance(&fb, &fa).unwrap();
        let dac = l1_distance(&fa, &fc).unwrap();
        let dcb = l1_distance(&fc, &fb).unwrap();
        prop_assert!((dab - dba).abs() < 1e-14);
        prop_assert!(dab <= 2.0 + 1e-12);
        prop_assert!(dab <= dac + dcb + 1e-12);
    }

    #[test]
    fn full_mass_lower_function_pins_the_density(
        raw in proptest::collection::vec(0.01f64..1.0, 8),
    ) {
        // if h is a density and f >= h cellwise with both densities, f = h
        let grid = Grid1D::new(0.0, 1.0, 8).unwrap();
        let h = normalize(grid.clone(), &raw).unwrap();
        let f = h.clone();
        prop_assert_eq!(negative_part_norm(&f, &h).unwrap(), 0.0);
        let d = l1_distance(&f, &h).unwrap();
        prop_assert!(d < 1e-15);
    }

    #[test]
    fn ulam_application_preserves_densities(
        raw in proptest::collection::vec(0.0f64..1.0, 64),
        logistic in proptest::bool::ANY,
    ) {
        prop_assume!(raw.iter().sum::<f64>() > 0.0);
        let map = if logistic {
            PiecewiseExpandingMap::logistic()
        } else {
            PiecewiseExpandingMap::tent()
        };
        let op = ulam_matrix(&map, 64).unwrap();
        let d = normalize(op.grid().clone(), &raw).unwrap();
        let mut masses = d.masses().to_vec();
        for _ in 0..16 {
            masses = op.apply(&masses).unwrap();
        }
        prop_assert!(masses.iter().all(|&m| m >= 0.0));
        prop_assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_is_linear(
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        freq in 0.5f64..4.0,
    ) {
        let tol = 1e-10;
        let f = move |x: f64| (freq * x).sin();
        let g = move |x: f64| 1.0 / (1.0 + x * x);
        let combined = adaptive_quad(move |x| alpha * f(x) + beta * g(x), 0.0, 2.0, tol)
            .unwrap()
            .value;
        let parts = alpha * adaptive_quad(f, 0.0, 2.0, tol).unwrap().value
            + beta * adaptive_quad(g, 0.0, 2.0, tol).unwrap().value;
        prop_assert!((combined - parts).abs() <= 2.0 * tol * (1.0 + alpha.abs() + beta.abs()));
    }

    #[test]
    fn flow_composition(
        x0 in 0.05f64..0.95,
        s in 0.1f64..1.0,
        t in 0.1f64..1.0,
    ) {
        let field = scalar_field(|x| x * (1.0 - x));
        let whole = rk4_flow(&field, &[x0], s + t, 1e-3).unwrap();
        let stepped = rk4_flow(&field, &rk4_flow(&field, &[x0], s, 1e-3).unwrap(), t, 1e-3).unwrap();
        prop_assert!((whole[0] - stepped[0]).abs() < 1e-9);
    }
}
