//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers once its assertions hold. Criterion 16 (command-line
//! replay determinism) lives in the CLI crate's own acceptance test.

use nalgebra::DMatrix;
use stosem::chains::{
    dyson_phillips, dyson_phillips_tail_bound, evolve, explosivity_check, jc_distance,
    jc_transition, stationary, ExplosivityVerdict, IntensityMatrix,
};
use stosem::density::{
    histogram_from_samples, l1_distance, Grid1D, GridDensity, PiecewisePoly, ProductDensity,
};
use stosem::linalg::{evolve_row, inf_norm};
use stosem::numerics::{adaptive_quad, RandomStream};
use stosem::pdmp::gene::{
    simulate_threshold_gene_1d, simulate_threshold_gene_cascade, CascadeThresholdGene,
    ThresholdGene1D,
};
use stosem::pdmp::kangaroo::{semi_markov_simulate, SemiMarkovKangaroo};
use stosem::pdmp::telegraph::{kac_pde_solve, telegraph_ensemble};
use stosem::sde::{
    classify, empirical_vs_stationary, stationary_density, Classification, GrowthModel,
};
use stosem::spectral::{
    jordan_growth, perron_limit, quasicompact_split, rank_one_residual, GeneratorMatrix,
};
use stosem::structured::{
    aeg_residual, cellcycle_evolve, lotka_rate, malthus_estimate, mckendrick_evolve,
    CellCycleModel, McKendrickModel,
};
use stosem::transfer::{
    arcsine_cell_masses, conjugate_transport, invariant_density, ulam_matrix, Diffeo,
    PiecewiseExpandingMap, TentEngine,
};

fn pass(number: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {number:02} PASS - {name}: {detail}");
}

fn status(number: u32, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number:02} {tag} - {name}: {detail}");
}

#[test]
fn criterion_01_tent_exactness_bound() {
    let f0 = PiecewisePoly::polynomial([0.0, 0.0, 3.0, 0.0], 0.0, 1.0);
    let mut engine = TentEngine::new(f0).unwrap();
    assert_eq!(engine.lipschitz_bound(), 6.0);
    let mut worst_margin = f64::INFINITY;
    for n in 1..=20 {
        engine.step().unwrap();
        let bound = 6.0 / 2f64.powi(n);
        // certified bound halves exactly per application
        assert_eq!(engine.lipschitz_bound(), bound, "certified bound at n={n}");
        // and really bounds the attained constant
        assert!(
            engine.lipschitz_attained() <= bound * (1.0 + 1e-12),
            "attained {} above bound {bound} at n={n}",
            engine.lipschitz_attained()
        );
        let dist = engine.l1_distance_to_uniform();
        assert!(dist <= bound, "distance {dist} above {bound} at n={n}");
        worst_margin = worst_margin.min(bound - dist);
    }
    pass(
        1,
        "tent-map exactness bound",
        format!("20 steps, smallest bound margin {worst_margin:.3e}"),
    );
}

#[test]
fn criterion_02_tent_ulam_uniform() {
    let op = ulam_matrix(&PiecewiseExpandingMap::tent(), 1024).unwrap();
    for i in 0..1024 {
        assert_eq!(op.row_sum(i), 1.0, "row {i}");
        assert_eq!(op.column_sum(i), 1.0, "column {i}");
    }
    let d = invariant_density(&op, 1e-13, 100_000).unwrap();
    let uniform = GridDensity::uniform(op.grid().clone());
    let dist = l1_distance(&d, &uniform).unwrap();
    assert!(dist < 1e-12, "distance {dist}");
    pass(
        2,
        "tent Ulam invariant density",
        format!("n=1024 exactly doubly stochastic, L1 gap {dist:.3e}"),
    );
}

#[test]
fn criterion_03_logistic_invariant_density() {
    let n = 4096;
    let op = ulam_matrix(&PiecewiseExpandingMap::logistic(), n).unwrap();
    let d = invariant_density(&op, 1e-13, 200_000).unwrap();
    let exact = arcsine_cell_masses(op.grid());
    let dist: f64 = d
        .masses()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .sum();

    let uniform = GridDensity::uniform(Grid1D::new(0.0, 1.0, n).unwrap());
    let transported = conjugate_transport(&Diffeo::cosine(), &uniform).unwrap();
    let conj_dist: f64 = transported
        .masses()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .sum();

    // The fixed density of the exact-interval Ulam matrix at n = 4096 sits
    // 0.0216 from the invariant law: the square-root endpoint singularity
    // limits the rate to ~1.4 n^{-1/2} (measured 0.053/0.040/0.029/0.022/
    // 0.016 over n = 512..8192, entries verified against a Monte Carlo
    // oracle). The 0.02 gate is therefore not attainable at this n; the
    // assertion is kept as stated and reports honestly.
    status(
        3,
        "quadratic-map invariant density",
        dist <= 0.02 && conj_dist <= 1e-3,
        format!("Ulam L1 {dist:.4} (gate 0.02), conjugacy L1 {conj_dist:.2e} (gate 1e-3)"),
    );
    assert!(conj_dist <= 1e-3, "conjugacy route distance {conj_dist}");
    assert!(dist <= 0.02, "Ulam route distance {dist}");
}

#[test]
fn criterion_04_substitution_closed_forms() {
    let lambda = 0.7;
    let q = IntensityMatrix::jukes_cantor(lambda).unwrap();
    let mut worst: f64 = 0.0;
    for &t in &[0.1, 1.0, 10.0] {
        let p = jc_transition(lambda, t).unwrap();
        for start in 0..4 {
            let mut x0 = [0.0; 4];
            x0[start] = 1.0;
            let x = evolve(&q, t, &x0, 1e-13).unwrap();
            for j in 0..4 {
                worst = worst.max((x[j] - p[(start, j)]).abs());
            }
        }
    }
    assert!(worst <= 1e-10, "worst transition gap {worst}");

    let d = jc_distance(0.3).unwrap();
    assert!((d - 0.383119).abs() <= 1e-6, "distance {d}");
    assert!(jc_distance(0.75).is_err());
    assert!(jc_distance(0.9).is_err());
    pass(
        4,
        "substitution-model closed forms",
        format!("transition gap {worst:.2e}, distance(0.3) = {d:.6}"),
    );
}

#[test]
fn criterion_05_erythrocyte_chain() {
    let (b, d, n_max) = (5.0, 1.0, 100usize);
    let q = IntensityMatrix::birth_death(b, d, n_max).unwrap();
    let pi = stationary(&q).unwrap();

    // truncated Poisson(5) in stable form
    let mut expect = vec![0.0f64; n_max + 1];
    expect[0] = 1.0;
    for i in 1..=n_max {
        expect[i] = expect[i - 1] * (b / d) / i as f64;
    }
    let total: f64 = expect.iter().sum();
    expect.iter_mut().for_each(|v| *v /= total);
    let gap: f64 = pi.iter().zip(&expect).map(|(a, b)| (a - b).abs()).sum();
    assert!(gap < 1e-8, "stationary gap {gap}");

    let mut delta = vec![0.0; n_max + 1];
    delta[0] = 1.0;
    let evolved = evolve(&q, 20.0, &delta, 1e-12).unwrap();
    let evolve_gap: f64 = evolved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
    assert!(evolve_gap < 1e-4, "evolved gap {evolve_gap}");

    let v = explosivity_check(move |_| b, move |i| d * i as f64, 1.0, 100_000).unwrap();
    assert_eq!(v, ExplosivityVerdict::NonExplosive);
    let v2 = explosivity_check(|i| 2f64.powi(i as i32), |_| 0.0, 1.0, 100_000).unwrap();
    assert_eq!(v2, ExplosivityVerdict::Explosive);
    pass(
        5,
        "erythrocyte chain",
        format!(
            "stationary gap {gap:.2e}, t=20 gap {evolve_gap:.2e}, explosivity verdicts correct"
        ),
    );
}

#[test]
fn criterion_06_perturbation_series() {
    let mut s = RandomStream::new(606, 0);
    // random 4-state generator and random stochastic perturbation
    let n = 4;
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut total = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = s.uniform();
                total += *v;
            }
        }
        row[i] = -total;
    }
    let a0 = IntensityMatrix::from_rows(&rows).unwrap();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        for j in 0..n {
            k[(i, j)] = row[j];
        }
    }
    let f = [0.4, 0.3, 0.2, 0.1];
    let (lambda, t, terms) = (1.0, 1.0, 60);
    let dp = dyson_phillips(&a0, &k, lambda, t, &f, terms).unwrap();
    let full = IntensityMatrix::new(a0.q() + &k - DMatrix::identity(n, n)).unwrap();
    let direct = evolve(&full, t, &f, 1e-13).unwrap();
    let dist: f64 = dp.iter().zip(&direct).map(|(a, b)| (a - b).abs()).sum();
    let tail = dyson_phillips_tail_bound(lambda, t, terms);
    assert!(tail < 1e-15, "series tail {tail}");
    assert!(dist <= 1e-8, "series vs direct {dist}");
    pass(
        6,
        "perturbation series",
        format!("60 terms, deviation {dist:.2e}, tail bound {tail:.2e}"),
    );
}

#[test]
fn criterion_07_rank_one_convergence_rate() {
    let mut s = RandomStream::new(707, 0);
    let n = 5;
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut total = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = 0.2 + s.uniform();
                total += *v;
            }
        }
        row[i] = -total;
    }
    // scale so the decay over t <= 30 stays far above the f64 cancellation
    // floor of the residual computation
    let raw = GeneratorMatrix::from_rows(&rows).unwrap();
    let eigs = raw.complex_eigenvalues();
    let gap_raw = -eigs
        .iter()
        .filter(|l| l.re < -1e-9)
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = 0.7 / gap_raw;
    let q = GeneratorMatrix::new(raw.q() * scale).unwrap();

    let gap = {
        let eigs = q.complex_eigenvalues();
        -eigs
            .iter()
            .filter(|l| l.re < -1e-9)
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let limit = perron_limit(&q).unwrap();
    assert!(limit.r.abs() < 1e-10);

    let x = [1.0, 0.0, 0.0, 0.0, 0.0];
    let times: Vec<f64> = (1..=30).map(|k| k as f64).collect();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| (t, rank_one_residual(&q, &limit, t, &x).ln()))
        .collect();
    let nn = pts.len() as f64;
    let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (stt, sty): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 * p.0, a.1 + p.0 * p.1));
    let slope = (nn * sty - st * sy) / (nn * stt - st * st);
    let rel = (slope + gap).abs() / gap;
    assert!(rel <= 0.10, "slope {slope} vs -gap {}: {rel}", -gap);
    pass(
        7,
        "rank-one convergence rate",
        format!(
            "log-residual slope {slope:.4} vs spectral gap {gap:.4} ({:.1}%)",
            rel * 100.0
        ),
    );
}

#[test]
fn criterion_08_polynomial_growth_example() {
    let q = GeneratorMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let g = jordan_growth(&q, &[1.0, 1.0]).unwrap();
    assert_eq!(g.k, 2);
    assert!((g.r - 1.0).abs() < 1e-9);
    // direct evaluation at t = 1000 in shifted form
    let t = 1000.0;
    let shifted = q.q() - DMatrix::identity(2, 2) * g.r;
    let v = evolve_row(&shifted, t, &[1.0, 1.0]);
    let scaled: Vec<f64> = v.iter().map(|c| c / t).collect();
    let dist = (scaled[0] - 0.0).abs() + (scaled[1] - 1.0).abs();
    assert!(dist < 3e-3, "deviation {dist}");
    assert!((dist - 2.0 / t).abs() < 1e-6, "exact value is 2/t");
    pass(
        8,
        "polynomial-growth example",
        format!("t=1000 deviation {dist:.3e} (= 2/t), block size {}", g.k),
    );
}

#[test]
fn criterion_09_spectral_split_reconstruction() {
    let mut s = RandomStream::new(909, 0);
    let mut worst_rec: f64 = 0.0;
    for trial in 0..3 {
        let n = 6;
        let raw = DMatrix::from_fn(n, n, |_, _| s.normal());
        let g0 = GeneratorMatrix::new(raw).unwrap();
        let max_re = g0
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let q = GeneratorMatrix::new(g0.q() - DMatrix::identity(n, n) * max_re).unwrap();

        // full reconstruction: cutoff below the whole spectrum
        let min_re = q
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::INFINITY, f64::min);
        let split_all = quasicompact_split(&q, min_re - 1.0).unwrap();
        for &t in &[0.0, 1.0, 5.0, 10.0] {
            let err = inf_norm(&(split_all.reconstruct(t) - split_all.semigroup(t)));
            assert!(err <= 1e-8, "trial {trial}, t={t}: reconstruction {err}");
            worst_rec = worst_rec.max(err);
        }

        // remainder bound at a cutoff just below the dominant eigenvalue
        let split = quasicompact_split(&q, -1e-3).unwrap();
        let (m, eps) = split.remainder_bound;
        for k in 0..20 {
            let t = 0.01 * (10.0f64 / 0.01).powf(k as f64 / 19.0);
            let r = inf_norm(&split.remainder(t));
            assert!(
                r <= m * (-eps * t).exp() + 1e-12,
                "trial {trial}: bound fails at t={t}: {r} vs {}",
                m * (-eps * t).exp()
            );
        }
    }
    pass(
        9,
        "spectral split reconstruction",
        format!("3 random 6x6 generators, worst reconstruction error {worst_rec:.2e}"),
    );
}

#[test]
fn criterion_10_stationary_diffusion_law() {
    let model = GrowthModel::logistic(1.0).unwrap();
    let law = stationary_density(&model, 1e-8).unwrap();
    assert!(law.exists);
    let mut worst: f64 = 0.0;
    for k in 0..=40 {
        let x = 0.05 + 6.0 * k as f64 / 40.0;
        let v = law.evaluate(x).unwrap();
        worst = worst.max((v - 2.0 * (-2.0 * x).exp()).abs());
    }
    assert!(worst <= 1e-6, "closed-form gap {worst}");

    // stationarity of the flux (1/2)(sigma^2 x^2 f)' = b f
    let mut worst_flux: f64 = 0.0;
    for k in 0..=20 {
        let x = 10f64.powf(-2.0 + 3.0 * k as f64 / 20.0);
        let h = 1e-5 * x;
        let flux = |y: f64| 0.5 * y * y * law.evaluate(y).unwrap();
        let d_flux = (flux(x + h) - flux(x - h)) / (2.0 * h);
        let rhs = model.drift_at(x) * law.evaluate(x).unwrap();
        worst_flux = worst_flux.max((d_flux - rhs).abs() / rhs.abs().max(1.0));
    }
    assert!(worst_flux <= 1e-8, "flux identity {worst_flux}");

    // long-run time average vs the law
    let grid = Grid1D::new(0.0, 4.5, 10).unwrap();
    let mut stream = RandomStream::new(1010, 0);
    let dist =
        empirical_vs_stationary(&model, 0.5, 1e-3, 2050.0, 50.0, 0.1, &grid, &mut stream).unwrap();
    assert!(dist <= 0.05, "empirical distance {dist}");

    assert_eq!(
        classify(&GrowthModel::logistic(1.0).unwrap())
            .unwrap()
            .class,
        Classification::Stationary
    );
    assert_eq!(
        classify(&GrowthModel::logistic(3.0).unwrap())
            .unwrap()
            .class,
        Classification::Extinct
    );
    assert_eq!(
        classify(&GrowthModel::malthus(1.0).unwrap()).unwrap().class,
        Classification::Grows
    );
    pass(
        10,
        "stationary diffusion law",
        format!(
            "closed-form gap {worst:.2e}, flux identity {worst_flux:.2e}, empirical L1 {dist:.3}"
        ),
    );
}

#[test]
fn criterion_11_velocity_flip_law_consistency() {
    let lambda = 1.0;
    let horizon = 2.0;
    let n_paths = 100_000;
    let parent = RandomStream::new(1111, 0);
    let endpoints = telegraph_ensemble(lambda, 0.0, 1.0, horizon, n_paths, &parent).unwrap();
    assert!(endpoints.iter().all(|(_, v)| *v == 1.0 || *v == -1.0));

    let grid = Grid1D::new(-3.0, 3.0, 600).unwrap();
    let mut u0 = ProductDensity::zero(grid.clone(), 2);
    let start = grid.cell_of(0.0).unwrap();
    u0.state_mut(0)[start] = 1.0;
    let sol = kac_pde_solve(lambda, &u0, grid.cell_width(), horizon).unwrap();
    assert!(
        sol.max_mass_drift <= 1e-12,
        "mass drift {}",
        sol.max_mass_drift
    );

    // Compare marginals on 0.1-wide bins (10 PDE cells per bin). The bin
    // width must hold an even number of cells: with dt = dx every path
    // displacement is an even number of cells, so the lattice measure lives
    // on one parity class and odd-cell bins alias it.
    let pde_marginal = sol.density.space_marginal();
    let bins = 60;
    let mut pde_binned = vec![0.0; bins];
    for (j, m) in pde_marginal.iter().enumerate() {
        pde_binned[j / 10] += m;
    }
    let coarse = Grid1D::new(-3.0, 3.0, bins).unwrap();
    let xs: Vec<f64> = endpoints.iter().map(|(x, _)| *x).collect();
    let (mc, out) = histogram_from_samples(&xs, &coarse).unwrap();
    assert_eq!(out, 0.0);
    let dist: f64 = mc
        .masses()
        .iter()
        .zip(&pde_binned)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(dist <= 0.05, "marginal distance {dist}");
    pass(
        11,
        "velocity-flip law consistency",
        format!(
            "MC vs PDE marginal L1 {dist:.3}, PDE drift {:.1e}",
            sol.max_mass_drift
        ),
    );
}

#[test]
fn criterion_12_gene_thresholds() {
    // 1-D normalized threshold model
    let theta = 0.5;
    let gene = ThresholdGene1D::new(theta, |x| x, 1.0, 1e3).unwrap();
    let mut s = RandomStream::new(1212, 0);
    let n_cycles = 100_000;
    let cycles = simulate_threshold_gene_1d(&gene, n_cycles, &mut s).unwrap();
    let mut worst_inactive: f64 = 0.0;
    for c in &cycles {
        worst_inactive = worst_inactive.max((c.inactive_duration - (c.x_off / theta).ln()).abs());
    }
    assert!(
        worst_inactive <= 1e-8,
        "inactive duration gap {worst_inactive}"
    );

    let mut durations: Vec<f64> = cycles.iter().map(|c| c.active_duration).collect();
    durations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ks: f64 = 0.0;
    let mut cum = 0.0;
    let mut prev_t = 0.0;
    for (i, &t) in durations.iter().enumerate() {
        if t > prev_t {
            cum += adaptive_quad(|s| ThresholdGene1D::active_flow(theta, s), prev_t, t, 1e-11)
                .unwrap()
                .value;
            prev_t = t;
        }
        let f = 1.0 - (-cum).exp();
        ks = ks.max((f - i as f64 / n_cycles as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / n_cycles as f64).abs());
    }
    assert!(ks <= 0.01, "active-duration KS {ks}");

    // 2-D threshold model: invariant box (checked stepwise at 1e-9 inside
    // the simulator) and occupancy stationarity over two late windows
    let gene2 = CascadeThresholdGene::two_stage(
        1.0,
        1.0,
        1.0,
        1.0,
        0.4,
        |x| if x[1] > 0.4 { 1.0 } else { 0.0 },
        1.0,
    );
    let mut s2 = RandomStream::new(1212, 1);
    let horizon = 1e5;
    let traj =
        simulate_threshold_gene_cascade(&gene2, vec![0.2, 0.45], true, horizon, 0.5, &mut s2)
            .unwrap();
    let caps = gene2.upper_bounds();
    for smp in &traj.samples {
        for (k, &v) in smp.x.iter().enumerate() {
            assert!(
                v >= -1e-9 && v <= caps[k] + 1e-9,
                "left the box at t={}",
                smp.t
            );
        }
    }
    let grid = Grid1D::new(0.0, caps[1], 10).unwrap();
    let window = |lo: f64, hi: f64| -> GridDensity {
        let xs: Vec<f64> = traj
            .samples
            .iter()
            .filter(|p| p.t >= lo && p.t < hi)
            .map(|p| p.x[1])
            .collect();
        histogram_from_samples(&xs, &grid).unwrap().0
    };
    let h1 = window(horizon / 2.0, horizon * 0.75);
    let h2 = window(horizon * 0.75, horizon);
    let occ_dist = l1_distance(&h1, &h2).unwrap();
    assert!(occ_dist <= 0.05, "occupancy windows differ by {occ_dist}");
    pass(
        12,
        "gene thresholds",
        format!("inactive gap {worst_inactive:.1e}, KS {ks:.4}, occupancy window L1 {occ_dist:.3}"),
    );
}

#[test]
fn criterion_13_semi_markov_reduction() {
    // exponential holding: must match the exact exponential law
    let exp_model = SemiMarkovKangaroo::new(|_, a| (-a).exp(), |_| 60.0, |x, _| x);
    let mut s = RandomStream::new(1313, 0);
    let path = semi_markov_simulate(&exp_model, 0.0, 30_000.0, &mut s).unwrap();
    let mut holdings: Vec<f64> = path.holds.windows(2).map(|w| w[1].0 - w[0].0).collect();
    holdings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = holdings.len();
    assert!(n > 20_000);
    let mut ks: f64 = 0.0;
    for (i, &t) in holdings.iter().enumerate() {
        let f = 1.0 - (-t).exp();
        ks = ks.max((f - i as f64 / n as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(ks <= 0.01, "exponential reduction KS {ks}");

    // uniform [1, 2] holding law: hazard 1/(2-a) pointwise
    let uni = SemiMarkovKangaroo::new(
        |_, a| if (1.0..=2.0).contains(&a) { 1.0 } else { 0.0 },
        |_| 2.0,
        |x, _| x,
    );
    uni.validate(&[0.0]).unwrap();
    let mut worst_hazard: f64 = 0.0;
    for k in 0..=40 {
        let a = 1.02 + 0.93 * k as f64 / 40.0;
        let p = uni.hazard(0.0, a).unwrap();
        worst_hazard = worst_hazard.max((p - 1.0 / (2.0 - a)).abs());
    }
    assert!(worst_hazard <= 1e-8, "hazard gap {worst_hazard}");

    // length-biased age marginal: density proportional to the survival
    let mut s = RandomStream::new(1313, 1);
    let horizon = 60_000.0;
    let path = semi_markov_simulate(&uni, 0.0, horizon, &mut s).unwrap();
    let ages: Vec<f64> = (0..((horizon - 100.0) / 0.1) as usize)
        .map(|k| 100.0 + k as f64 * 0.1)
        .map(|t| path.age_at(t))
        .collect();
    let grid = Grid1D::new(0.0, 2.0, 20).unwrap();
    let (hist, _) = histogram_from_samples(&ages, &grid).unwrap();
    let survival_cdf = |x: f64| -> f64 {
        if x <= 1.0 {
            x / 1.5
        } else {
            (1.0 + (x - 1.0) * (3.0 - x) / 2.0) / 1.5
        }
    };
    let exact: Vec<f64> = (0..20)
        .map(|i| survival_cdf(grid.edge(i + 1)) - survival_cdf(grid.edge(i)))
        .collect();
    let age_dist: f64 = hist
        .masses()
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(age_dist <= 0.05, "age marginal distance {age_dist}");
    pass(
        13,
        "semi-Markov reduction",
        format!("exp KS {ks:.4}, hazard gap {worst_hazard:.1e}, age marginal L1 {age_dist:.3}"),
    );
}

#[test]
fn criterion_14_age_model_growth_rate() {
    // reproduction burst around age 1, constant mortality; the age ceiling
    // for reproduction is 1.5, so the criterion's grid is da = 1.5/400
    let mu = 0.2;
    let reproductive_ceiling = 1.5;
    let model = McKendrickModel::new(
        move |_| mu,
        |a| {
            if (0.55..=1.45).contains(&a) {
                2.0 * (-((a - 1.0) / 0.15) * ((a - 1.0) / 0.15)).exp()
            } else {
                0.0
            }
        },
        12.0,
        (12.0 / (reproductive_ceiling / 400.0)) as usize,
    )
    .unwrap();
    let lotka = lotka_rate(&model).unwrap();
    let da = model.da();
    let n = model.n_cells;
    let mut u0 = vec![0.0; n];
    for (j, v) in u0.iter_mut().enumerate() {
        let a = (j as f64 + 0.5) * da;
        *v = if a < 2.0 { da } else { 0.0 };
    }
    let traj = mckendrick_evolve(&model, &u0, da, 25.0).unwrap();
    let (slope, r2) = malthus_estimate(&traj.times, &traj.total_mass, (15.0, 25.0)).unwrap();
    assert!(
        (slope - lotka).abs() <= 1e-3,
        "slope {slope} vs characteristic root {lotka}"
    );
    assert!(r2 > 0.999);

    // conservation with births and deaths off
    let quiet = McKendrickModel::new(|_| 0.0, |_| 0.0, 4.0, 1000).unwrap();
    let mut v0 = vec![0.0; 1000];
    for v in v0.iter_mut().take(300) {
        *v = 1e-3;
    }
    let t2 = mckendrick_evolve(&quiet, &v0, quiet.da(), 2.0).unwrap();
    let start = t2.total_mass[0];
    let worst_drift = t2
        .total_mass
        .iter()
        .map(|m| (m - start).abs())
        .fold(0.0, f64::max);
    assert!(worst_drift <= 1e-10, "mass drift {worst_drift}");
    pass(
        14,
        "age-model growth rate",
        format!(
            "estimate {slope:.6} vs characteristic root {lotka:.6} (gap {:.1e}), drift {worst_drift:.1e}",
            (slope - lotka).abs()
        ),
    );
}

#[test]
fn criterion_15_cell_cycle_asynchronous_growth() {
    let model = CellCycleModel::benchmark();
    let grid = model.grid.clone();

    let mut u0 = vec![0.0; grid.len()];
    for i in 0..grid.n_xb {
        for j in 0..grid.n_a / 5 {
            u0[grid.idx(i, j)] = 1.0;
        }
    }
    let s0: f64 = u0.iter().sum();
    u0.iter_mut().for_each(|v| *v /= s0);

    // snapshots every five mean generations, in phase with the cycle clock
    let horizon = 240.0;
    let traj = cellcycle_evolve(&model, &u0, horizon, 5.5).unwrap();

    // (a) renewal bookkeeping
    assert!(
        traj.renewal_defect_max <= 1e-10,
        "renewal defect {}",
        traj.renewal_defect_max
    );

    // (b) growth-rate stability across windows
    let (l1, _) = traj.malthus((80.0, 160.0)).unwrap();
    let (l2, r2) = traj.malthus((160.0, 240.0)).unwrap();
    assert!((l1 - l2).abs() <= 1e-3, "windows disagree: {l1} vs {l2}");
    assert!(r2 > 0.999);

    // (c) start-profile independence
    let mut u1 = vec![0.0; grid.len()];
    for i in (grid.n_xb * 3 / 4)..grid.n_xb {
        for j in 0..grid.n_a / 2 {
            u1[grid.idx(i, j)] = (j + 1) as f64;
        }
    }
    let s1: f64 = u1.iter().sum();
    u1.iter_mut().for_each(|v| *v /= s1);
    let other = cellcycle_evolve(&model, &u1, horizon, horizon).unwrap();
    let norm = |m: &[f64]| -> Vec<f64> {
        let t: f64 = m.iter().sum();
        m.iter().map(|v| v / t).collect()
    };
    let fa = norm(&traj.final_masses);
    let fb = norm(&other.final_masses);
    let profile_gap: f64 = fa.iter().zip(&fb).map(|(a, b)| (a - b).abs()).sum();
    assert!(profile_gap <= 0.02, "profiles differ by {profile_gap}");

    // (d) decreasing rank-one residual after burn-in
    let residuals = aeg_residual(&traj, l2);
    let monitored: Vec<&(f64, f64)> = residuals
        .iter()
        .filter(|(t, r)| *t >= 60.0 && *t <= 180.0 && *r > 1e-6)
        .collect();
    assert!(monitored.len() > 10);
    for w in monitored.windows(2) {
        assert!(
            w[1].1 <= w[0].1 + 1e-9,
            "residual rose at t={}: {} -> {}",
            w[1].0,
            w[0].1,
            w[1].1
        );
    }

    // (e) growth rate near the doubling-per-mean-cycle value
    let sanity = std::f64::consts::LN_2 / 1.1;
    let rel = (l2 - sanity).abs() / sanity;
    assert!(rel <= 0.10, "rate {l2} vs sanity {sanity}");
    pass(
        15,
        "cell-cycle asynchronous growth",
        format!(
            "defect {:.1e}, window gap {:.1e}, profile gap {profile_gap:.4}, rate {l2:.4} ({:.1}% off ln2/1.1)",
            traj.renewal_defect_max,
            (l1 - l2).abs(),
            rel * 100.0
        ),
    );
}
