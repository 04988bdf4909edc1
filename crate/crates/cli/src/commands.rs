//! Subcommand definitions and handlers. Every parameter struct is both a
//! clap argument group and a serde record, so the serialized configuration
//! is the literal resolved parameter set.

use crate::run::{csv_table, Outputs, Resolved};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use stosem::chains::{
    self, evolve, jc_distance, stationary, BirthDeathSpec, ExplosivityVerdict, IntensityMatrix,
};
use stosem::density::{histogram_from_samples, Grid1D, GridDensity};
use stosem::error::{Error, Result};
use stosem::numerics::RandomStream;
use stosem::pdmp::gene::{simulate_threshold_gene_1d, simulate_threshold_gene_cascade};
use stosem::pdmp::telegraph::{kac_pde_solve, telegraph_ensemble};
use stosem::pdmp::vesicle::{vesicle_preset, VesicleConfig};
use stosem::sde::GrowthModel;
use stosem::spectral::GeneratorMatrix;
use stosem::structured::{
    aeg_residual, cellcycle_evolve, lotka_rate, malthus_estimate, mckendrick_evolve,
    size_division_evolve, CellCycleModel, McKendrickModel, SizeDivisionModel,
};
use stosem::transfer::{invariant_density, ulam_matrix, PiecewiseExpandingMap};

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "module", content = "command", rename_all = "kebab-case")]
pub enum Module {
    /// Transfer operators of interval maps.
    #[command(subcommand)]
    Transfer(TransferCmd),
    /// Continuous-time Markov chain semigroups.
    #[command(subcommand)]
    Chains(ChainsCmd),
    /// Matrix-semigroup asymptotics.
    #[command(subcommand)]
    Spectral(SpectralCmd),
    /// Growth diffusions with environmental noise.
    #[command(subcommand)]
    Sde(SdeCmd),
    /// Piecewise-deterministic processes.
    #[command(subcommand)]
    Pdmp(PdmpCmd),
    /// Structured-population solvers.
    #[command(subcommand)]
    Structured(StructuredCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Tent,
    Logistic,
    Identity,
}

impl MapKind {
    fn build(self) -> PiecewiseExpandingMap {
        match self {
            MapKind::Tent => PiecewiseExpandingMap::tent(),
            MapKind::Logistic => PiecewiseExpandingMap::logistic(),
            MapKind::Identity => PiecewiseExpandingMap::identity(),
        }
    }
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum TransferCmd {
    /// Build the Ulam matrix and its fixed density.
    Ulam(UlamArgs),
    /// L1 distances of iterated densities to the fixed density.
    Exactness(ExactnessArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct UlamArgs {
    #[arg(long, value_enum)]
    pub map: MapKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExactnessArgs {
    #[arg(long, value_enum)]
    pub map: MapKind,
    #[arg(long)]
    pub n: usize,
    /// Starting density: uniform, quadratic (3x^2 projected) or point:<x>.
    #[arg(long, default_value = "uniform")]
    pub f0: String,
    #[arg(long)]
    pub steps: usize,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum ChainsCmd {
    /// x e^{tQ} by uniformization.
    Evolve(EvolveArgs),
    /// Substitution-model evolutionary distance.
    JcDistance(JcDistanceArgs),
    /// Truncated birth-death chain with constant birth and linear death.
    Erythrocyte(ErythrocyteArgs),
    /// Explosivity verdict for an unbounded birth-death generator.
    Explosive(ExplosiveArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvolveArgs {
    /// Dense Q-matrix CSV (optional header row).
    #[arg(long)]
    pub q: std::path::PathBuf,
    /// Comma-separated start distribution, or delta:<i>.
    #[arg(long)]
    pub x0: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct JcDistanceArgs {
    #[arg(long)]
    pub p: f64,
    /// Halve the distance for two contemporary sequences.
    #[arg(long, default_value_t = false)]
    pub pairwise: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ErythrocyteArgs {
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub d: f64,
    #[arg(long = "N")]
    pub n: usize,
    /// Also evolve a point mass at 0 to this time and report the gap.
    #[arg(long, default_value_t = 20.0)]
    pub t: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplosiveModel {
    PureBirth,
    BirthDeath,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthKind {
    Constant,
    Geometric,
    Linear,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExplosiveArgs {
    #[arg(long, value_enum)]
    pub model: ExplosiveModel,
    #[arg(long, value_enum, default_value_t = GrowthKind::Constant)]
    pub growth: GrowthKind,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100_000)]
    pub horizon: usize,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum SpectralCmd {
    /// Dominant eigenvalue with positive left/right eigenvectors.
    Perron(MatrixArgs),
    /// Polynomial-growth data at the dominant eigenvalue.
    Jordan(JordanArgs),
    /// Spectral splitting at a vertical cutoff.
    Split(SplitArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MatrixArgs {
    #[arg(long)]
    pub q: std::path::PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct JordanArgs {
    #[arg(long)]
    pub q: std::path::PathBuf,
    /// Comma-separated start row vector.
    #[arg(long)]
    pub x: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub q: std::path::PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub cutoff: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeModelKind {
    Logistic,
    Malthus,
}

impl SdeModelKind {
    fn build(self, sigma2: f64) -> Result<GrowthModel> {
        match self {
            SdeModelKind::Logistic => GrowthModel::logistic(sigma2),
            SdeModelKind::Malthus => GrowthModel::malthus(sigma2),
        }
    }
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum SdeCmd {
    /// Long-run classification from the boundary growth rates.
    Classify(SdeModelArgs),
    /// Stationary law on a grid.
    Stationary(SdeStationaryArgs),
    /// One Euler-Maruyama path, histogrammed after burn-in.
    Em(SdeEmArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SdeModelArgs {
    #[arg(long, value_enum)]
    pub model: SdeModelKind,
    #[arg(long)]
    pub sigma2: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SdeStationaryArgs {
    #[arg(long, value_enum)]
    pub model: SdeModelKind,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 6.0)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 120)]
    pub cells: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub quad_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SdeEmArgs {
    #[arg(long, value_enum)]
    pub model: SdeModelKind,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x0: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 50.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sample_every: f64,
    #[arg(long, default_value_t = 0.0)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 4.5)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 10)]
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneVariant {
    OneD,
    TwoD,
    ThreeStage,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum PdmpCmd {
    /// Threshold gene-expression presets.
    Gene(GeneArgs),
    /// Velocity-flip endpoints, histogrammed.
    Telegraph(TelegraphArgs),
    /// Forward PDE of the velocity-flip process.
    Kac(KacArgs),
    /// Three-velocity transport toward a capture window.
    Vesicle(VesicleArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GeneArgs {
    #[arg(long, value_enum)]
    pub variant: GeneVariant,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Cycles to simulate (1-D variant).
    #[arg(long, default_value_t = 10_000)]
    pub cycles: usize,
    /// Horizon (2-D / three-stage variants).
    #[arg(long = "T", default_value_t = 1000.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sample_every: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TelegraphArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 60)]
    pub cells: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct KacArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub dx: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    /// Half-width of the spatial domain.
    #[arg(long, default_value_t = 3.0)]
    pub half_width: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VesicleArgs {
    #[arg(long = "L")]
    pub length: f64,
    #[arg(long)]
    pub target: f64,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.1)]
    pub window_halfwidth: f64,
    #[arg(long, default_value_t = 20_000)]
    pub runs: usize,
    /// Uniform switching rate of the three-velocity chain.
    #[arg(long, default_value_t = 1.0)]
    pub switch_rate: f64,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum StructuredCmd {
    /// Age model with a renewal boundary.
    Mckendrick(MckendrickArgs),
    /// Size-structured binary fission.
    SizeDivision(SizeDivisionArgs),
    /// Age-initial-size cell-cycle model.
    Cellcycle(CellcycleArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MckendrickArgs {
    /// Constant death rate.
    #[arg(long)]
    pub mu: f64,
    /// Birth rate: `gauss:<center>,<width>,<amplitude>` or `const:<v>`.
    #[arg(long)]
    pub psi: String,
    #[arg(long, default_value_t = 12.0)]
    pub a_max: f64,
    #[arg(long, default_value_t = 3200)]
    pub cells: usize,
    #[arg(long = "T")]
    pub horizon: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SizeDivisionArgs {
    /// Constant growth rate.
    #[arg(long, default_value_t = 1.0)]
    pub growth: f64,
    /// Constant division rate.
    #[arg(long, default_value_t = 0.5)]
    pub division: f64,
    #[arg(long, default_value_t = 4.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 400)]
    pub cells: usize,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellcyclePreset {
    Benchmark,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CellcycleArgs {
    #[arg(long, value_enum, default_value_t = CellcyclePreset::Benchmark)]
    pub preset: CellcyclePreset,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 5.5)]
    pub snapshot_every: f64,
}

pub fn execute(module: &Module, resolved: &Resolved) -> Result<Outputs> {
    match module {
        Module::Transfer(cmd) => transfer(cmd),
        Module::Chains(cmd) => chains_cmd(cmd),
        Module::Spectral(cmd) => spectral_cmd(cmd),
        Module::Sde(cmd) => sde_cmd(cmd, resolved),
        Module::Pdmp(cmd) => pdmp_cmd(cmd, resolved),
        Module::Structured(cmd) => structured_cmd(cmd),
    }
}

fn density_csv(d: &GridDensity) -> Vec<u8> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf).expect("in-memory write");
    buf
}

fn transfer(cmd: &TransferCmd) -> Result<Outputs> {
    match cmd {
        TransferCmd::Ulam(args) => {
            let op = ulam_matrix(&args.map.build(), args.n)?;
            let d = invariant_density(&op, args.tol, 500_000)?;
            Ok(Outputs {
                report: json!({
                    "map": format!("{:?}", args.map).to_lowercase(),
                    "n": args.n,
                    "mass": d.total_mass(),
                }),
                files: vec![("density.csv".into(), density_csv(&d))],
            })
        }
        TransferCmd::Exactness(args) => {
            let map = args.map.build();
            let op = ulam_matrix(&map, args.n)?;
            let fstar = invariant_density(&op, 1e-13, 500_000)?;
            let f0 = match args.f0.as_str() {
                "uniform" => GridDensity::uniform(op.grid().clone()),
                "quadratic" => GridDensity::project(op.grid().clone(), |x| 3.0 * x * x)?,
                other => {
                    let x = other
                        .strip_prefix("point:")
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| {
                            Error::Domain(format!(
                                "unknown start density '{other}' (uniform|quadratic|point:<x>)"
                            ))
                        })?;
                    GridDensity::point_mass(op.grid().clone(), x)?
                }
            };
            let profile = stosem::transfer::exactness_profile(&op, &f0, &fstar, args.steps)?;
            let rows = profile.iter().enumerate().map(|(t, d)| format!("{t},{d}"));
            Ok(Outputs {
                report: json!({
                    "final_distance": profile.last().copied().unwrap_or(0.0),
                    "steps": args.steps,
                }),
                files: vec![
                    ("profile.csv".into(), csv_table("t,distance", rows)),
                    ("density.csv".into(), density_csv(&fstar)),
                ],
            })
        }
    }
}

fn parse_vector(text: &str, n: usize) -> Result<Vec<f64>> {
    if let Some(idx) = text.strip_prefix("delta:") {
        let i: usize = idx
            .parse()
            .map_err(|_| Error::Domain(format!("bad delta index '{idx}'")))?;
        if i >= n {
            return Err(Error::Domain(format!(
                "delta index {i} out of range 0..{n}"
            )));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        return Ok(v);
    }
    let v: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| Error::Domain(format!("bad vector '{text}': {e}")))?;
    if v.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} entries"),
            got: format!("{}", v.len()),
        });
    }
    Ok(v)
}

fn read_matrix_csv(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if lineno == 0 => continue, // optional header row
            Err(e) => {
                return Err(Error::Domain(format!(
                    "bad matrix row {} in {}: {e}",
                    lineno + 1,
                    path.display()
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "{} holds no rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn chains_cmd(cmd: &ChainsCmd) -> Result<Outputs> {
    match cmd {
        ChainsCmd::Evolve(args) => {
            let q = IntensityMatrix::from_rows(&read_matrix_csv(&args.q)?)?;
            let x0 = parse_vector(&args.x0, q.n())?;
            let x = evolve(&q, args.t, &x0, args.tol)?;
            let rows = x.iter().enumerate().map(|(i, m)| format!("{i},{m}"));
            Ok(Outputs {
                report: json!({"t": args.t, "distribution": x}),
                files: vec![("distribution.csv".into(), csv_table("state,mass", rows))],
            })
        }
        ChainsCmd::JcDistance(args) => {
            let mut d = jc_distance(args.p)?;
            if args.pairwise {
                d *= 0.5;
            }
            Ok(Outputs::report_only(json!({"distance": d})))
        }
        ChainsCmd::Erythrocyte(args) => {
            let q = IntensityMatrix::birth_death(args.b, args.d, args.n)?;
            let pi = stationary(&q)?;
            let spec = BirthDeathSpec::new(
                {
                    let b = args.b;
                    move |_| b
                },
                {
                    let d = args.d;
                    move |i| d * i as f64
                },
                args.n,
            )?;
            let recursion = chains::birth_death_stationary(&spec)?;
            let recursion_gap: f64 = pi.iter().zip(&recursion).map(|(a, b)| (a - b).abs()).sum();
            let mut delta = vec![0.0; args.n + 1];
            delta[0] = 1.0;
            let evolved = evolve(&q, args.t, &delta, 1e-12)?;
            let evolve_gap: f64 = evolved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            let rows = pi.iter().enumerate().map(|(i, m)| format!("{i},{m}"));
            Ok(Outputs {
                report: json!({
                    "b": args.b,
                    "d": args.d,
                    "truncation": args.n,
                    "stationary_vs_recursion_l1": recursion_gap,
                    "evolved_gap_at_t": evolve_gap,
                    "t": args.t,
                }),
                files: vec![("stationary.csv".into(), csv_table("state,mass", rows))],
            })
        }
        ChainsCmd::Explosive(args) => {
            let b = args.b;
            let d = args.d;
            let birth = move |i: usize| match args.growth {
                GrowthKind::Constant => b,
                GrowthKind::Geometric => b * 2f64.powi(i as i32),
                GrowthKind::Linear => b * (i as f64 + 1.0),
            };
            let death = move |i: usize| match args.model {
                ExplosiveModel::PureBirth => 0.0,
                ExplosiveModel::BirthDeath => d * i as f64,
            };
            let verdict = chains::explosivity_check(birth, death, args.lambda, args.horizon)?;
            let text = match verdict {
                ExplosivityVerdict::NonExplosive => "non_explosive",
                ExplosivityVerdict::Explosive => "explosive",
                ExplosivityVerdict::Inconclusive => "inconclusive",
            };
            Ok(Outputs::report_only(json!({"verdict": text})))
        }
    }
}

fn spectral_cmd(cmd: &SpectralCmd) -> Result<Outputs> {
    match cmd {
        SpectralCmd::Perron(args) => {
            let q = GeneratorMatrix::from_rows(&read_matrix_csv(&args.q)?)?;
            let lim = stosem::spectral::perron_limit(&q)?;
            let eigs = q.complex_eigenvalues();
            let gap = lim.r
                - eigs
                    .iter()
                    .map(|l| l.re)
                    .filter(|re| *re < lim.r - 1e-9)
                    .fold(f64::NEG_INFINITY, f64::max);
            Ok(Outputs::report_only(json!({
                "r": lim.r,
                "x_star": lim.x_star,
                "y_star": lim.y_star,
                "gap": gap,
            })))
        }
        SpectralCmd::Jordan(args) => {
            let q = GeneratorMatrix::from_rows(&read_matrix_csv(&args.q)?)?;
            let n = q.n();
            let x = parse_vector(&args.x, n)?;
            match stosem::spectral::jordan_growth(&q, &x) {
                Ok(g) => Ok(Outputs::report_only(json!({
                    "r": g.r,
                    "k": g.k,
                    "limit": g.limit,
                }))),
                // a complex dominant pair has no limit; report the
                // oscillation data instead
                Err(Error::ComplexDominant {
                    real,
                    imag,
                    period,
                    rational_quality,
                }) => Ok(Outputs::report_only(json!({
                    "regime": "oscillatory",
                    "re": real,
                    "im": imag,
                    "period": period,
                    "rational_quality": rational_quality,
                }))),
                Err(e) => Err(e),
            }
        }
        SpectralCmd::Split(args) => {
            let q = GeneratorMatrix::from_rows(&read_matrix_csv(&args.q)?)?;
            let split = stosem::spectral::quasicompact_split(&q, args.cutoff)?;
            let poles: Vec<serde_json::Value> = split
                .poles
                .iter()
                .map(|p| {
                    json!({
                        "re": p.lambda.re,
                        "im": p.lambda.im,
                        "order": p.order,
                        "multiplicity": p.multiplicity,
                    })
                })
                .collect();
            Ok(Outputs::report_only(json!({
                "cutoff": split.cutoff,
                "poles": poles,
                "remainder_bound": {"m": split.remainder_bound.0, "eps": split.remainder_bound.1},
                "remainder_dimension": split.remainder_dimension(),
            })))
        }
    }
}

fn sde_cmd(cmd: &SdeCmd, resolved: &Resolved) -> Result<Outputs> {
    match cmd {
        SdeCmd::Classify(args) => {
            let model = args.model.build(args.sigma2)?;
            let report = stosem::sde::classify(&model)?;
            let class = match report.class {
                stosem::sde::Classification::Grows => "grows",
                stosem::sde::Classification::Extinct => "extinct",
                stosem::sde::Classification::Bistable => "bistable",
                stosem::sde::Classification::Stationary => "stationary",
            };
            Ok(Outputs::report_only(json!({
                "class": class,
                "rate_at_zero": report.rate_at_zero,
                "rate_at_inf": report.rate_at_inf,
            })))
        }
        SdeCmd::Stationary(args) => {
            let model = args.model.build(args.sigma2)?;
            let law = stosem::sde::stationary_density(&model, args.quad_tol)?;
            if !law.exists {
                return Err(Error::Domain(
                    "no stationary law in this parameter regime".into(),
                ));
            }
            let grid = Grid1D::new(args.grid_lo.max(0.0), args.grid_hi, args.cells)?;
            let masses = law.cell_masses(&grid)?;
            let window_mass: f64 = masses.iter().sum();
            let d = stosem::density::normalize(grid, &masses)?;
            Ok(Outputs {
                report: json!({
                    "normalizer": law.normalizer,
                    "window_mass": window_mass,
                }),
                files: vec![("density.csv".into(), density_csv(&d))],
            })
        }
        SdeCmd::Em(args) => {
            let model = args.model.build(args.sigma2)?;
            let mut stream = RandomStream::new(resolved.seed, 0);
            let samples = stosem::sde::em_sampled(
                &model,
                args.x0,
                args.dt,
                args.horizon,
                args.sample_every,
                &mut stream,
            )?;
            let skip = (args.burn_in / args.sample_every).ceil() as usize;
            if skip >= samples.len() {
                return Err(Error::Domain("burn-in swallowed every sample".into()));
            }
            let grid = Grid1D::new(args.grid_lo, args.grid_hi, args.cells)?;
            let (hist, out_fraction) = histogram_from_samples(&samples[skip..], &grid)?;
            let mut report = json!({
                "samples": samples.len() - skip,
                "out_of_range_fraction": out_fraction,
            });
            if let Ok(law) = stosem::sde::stationary_density(&model, 1e-8) {
                if law.exists {
                    let exact = law.cell_masses(&grid)?;
                    let d: f64 = hist
                        .masses()
                        .iter()
                        .zip(&exact)
                        .map(|(a, b)| (a * (1.0 - out_fraction) - b).abs())
                        .sum();
                    report["l1_vs_stationary"] = json!(d);
                }
            }
            Ok(Outputs {
                report,
                files: vec![("histogram.csv".into(), density_csv(&hist))],
            })
        }
    }
}

fn pdmp_cmd(cmd: &PdmpCmd, resolved: &Resolved) -> Result<Outputs> {
    match cmd {
        PdmpCmd::Gene(args) => match args.variant {
            GeneVariant::OneD => {
                let gene = stosem::pdmp::gene::ThresholdGene1D::new(args.theta, |x| x, 1.0, 1e4)?;
                let mut stream = RandomStream::new(resolved.seed, 0);
                let cycles = simulate_threshold_gene_1d(&gene, args.cycles, &mut stream)?;
                let mean_active: f64 =
                    cycles.iter().map(|c| c.active_duration).sum::<f64>() / cycles.len() as f64;
                let mean_inactive: f64 =
                    cycles.iter().map(|c| c.inactive_duration).sum::<f64>() / cycles.len() as f64;
                let rows = cycles
                    .iter()
                    .map(|c| format!("{},{},{}", c.x_off, c.active_duration, c.inactive_duration));
                Ok(Outputs {
                    report: json!({
                        "cycles": cycles.len(),
                        "mean_active": mean_active,
                        "mean_inactive": mean_inactive,
                    }),
                    files: vec![(
                        "cycles.csv".into(),
                        csv_table("x_off,active,inactive", rows),
                    )],
                })
            }
            GeneVariant::TwoD | GeneVariant::ThreeStage => {
                let theta = args.theta;
                let (gene, x0) = match args.variant {
                    GeneVariant::TwoD => (
                        stosem::pdmp::gene::CascadeThresholdGene::two_stage(
                            1.0,
                            1.0,
                            1.0,
                            1.0,
                            theta,
                            move |x: &[f64]| if x[1] > theta { 1.0 } else { 0.0 },
                            1.0,
                        ),
                        vec![0.2, theta.max(0.05) + 0.05],
                    ),
                    _ => (
                        stosem::pdmp::gene::CascadeThresholdGene::three_stage(
                            1.0,
                            1.0,
                            0.1,
                            1.0,
                            1.0,
                            1.0,
                            1.0,
                            theta,
                            move |x: &[f64]| if x[2] > theta { 0.5 } else { 0.0 },
                            1.0,
                        ),
                        vec![0.0, 0.0, theta.max(0.05) + 0.05],
                    ),
                };
                let mut stream = RandomStream::new(resolved.seed, 0);
                let traj = simulate_threshold_gene_cascade(
                    &gene,
                    x0,
                    true,
                    args.horizon,
                    args.sample_every,
                    &mut stream,
                )?;
                let rows = traj.samples.iter().map(|s| {
                    let coords: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
                    format!("{},{},{}", s.t, coords.join(","), u8::from(s.active))
                });
                let header = match args.variant {
                    GeneVariant::TwoD => "t,x1,x2,regime",
                    _ => "t,x1,x2,x3,regime",
                };
                Ok(Outputs {
                    report: json!({
                        "activations": traj.activations,
                        "deactivations": traj.deactivations,
                        "samples": traj.samples.len(),
                    }),
                    files: vec![("trajectory.csv".into(), csv_table(header, rows))],
                })
            }
        },
        PdmpCmd::Telegraph(args) => {
            let parent = RandomStream::new(resolved.seed, 0);
            let endpoints =
                telegraph_ensemble(args.lambda, 0.0, 1.0, args.horizon, args.paths, &parent)?;
            let xs: Vec<f64> = endpoints.iter().map(|(x, _)| *x).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
            let half = args.horizon + 0.5;
            let grid = Grid1D::new(-half, half, args.cells)?;
            let (hist, _) = histogram_from_samples(&xs, &grid)?;
            Ok(Outputs {
                report: json!({"paths": args.paths, "mean": mean, "variance": var}),
                files: vec![("histogram.csv".into(), density_csv(&hist))],
            })
        }
        PdmpCmd::Kac(args) => {
            let n = (2.0 * args.half_width / args.dx).round() as usize;
            let grid = Grid1D::new(-args.half_width, args.half_width, n)?;
            let mut u0 = stosem::density::ProductDensity::zero(grid.clone(), 2);
            let mid = grid
                .cell_of(0.0)
                .ok_or_else(|| Error::Domain("empty grid".into()))?;
            u0.state_mut(0)[mid] = 1.0;
            let sol = kac_pde_solve(args.lambda, &u0, args.dx, args.horizon)?;
            let mut buf = Vec::new();
            sol.density
                .write_csv(&mut buf)
                .map_err(|e| Error::Domain(e.to_string()))?;
            Ok(Outputs {
                report: json!({
                    "steps": sol.steps,
                    "max_mass_drift": sol.max_mass_drift,
                    "mass": sol.density.total_mass(),
                }),
                files: vec![("kac.csv".into(), buf)],
            })
        }
        PdmpCmd::Vesicle(args) => {
            let rate = args.switch_rate;
            let q = IntensityMatrix::from_rows(&[
                vec![-rate, 0.5 * rate, 0.5 * rate],
                vec![0.5 * rate, -rate, 0.5 * rate],
                vec![0.5 * rate, 0.5 * rate, -rate],
            ])?;
            let cfg = VesicleConfig::new(
                args.length,
                (
                    (args.target - args.window_halfwidth).max(0.0),
                    (args.target + args.window_halfwidth).min(args.length),
                ),
                args.kappa,
                q,
            )?;
            let parent = RandomStream::new(resolved.seed, 0);
            let stats = vesicle_preset(&cfg, args.runs, &parent)?;
            Ok(Outputs::report_only(json!({
                "runs": stats.n_runs,
                "captures": stats.captures,
                "escapes": stats.escapes,
                "capture_frequency": stats.capture_frequency,
                "mean_cycle_time": stats.mean_cycle_time,
                "window_rest_frequency": stats.window_rest_frequency,
            })))
        }
    }
}

fn structured_cmd(cmd: &StructuredCmd) -> Result<Outputs> {
    match cmd {
        StructuredCmd::Mckendrick(args) => {
            let mu = args.mu;
            let psi = parse_birth_rate(&args.psi)?;
            let model = McKendrickModel::new(
                move |_| mu,
                move |a| psi.evaluate(a),
                args.a_max,
                args.cells,
            )?;
            let lotka = lotka_rate(&model)?;
            let da = model.da();
            let n = model.n_cells;
            let mut u0 = vec![0.0; n];
            for (j, v) in u0.iter_mut().enumerate() {
                let a = (j as f64 + 0.5) * da;
                *v = if a < 2.0 { da } else { 0.0 };
            }
            let traj = mckendrick_evolve(&model, &u0, da, args.horizon)?;
            let window = (args.horizon * 0.6, args.horizon);
            let (lambda_hat, r_squared) = malthus_estimate(&traj.times, &traj.total_mass, window)?;
            let rows = traj
                .times
                .iter()
                .zip(&traj.total_mass)
                .map(|(t, m)| format!("{t},{m}"));
            Ok(Outputs {
                report: json!({
                    "lambda_hat": lambda_hat,
                    "r_squared": r_squared,
                    "lotka": lotka,
                    "aged_out": traj.aged_out,
                }),
                files: vec![("totals.csv".into(), csv_table("t,value", rows))],
            })
        }
        StructuredCmd::SizeDivision(args) => {
            let g = args.growth;
            let lam = args.division;
            let model = SizeDivisionModel::new(move |_| g, move |_| lam, args.x_max, args.cells)?;
            let n = model.n_cells;
            let mut u0 = vec![0.0; n];
            for v in u0.iter_mut().skip(n / 4).take(n / 4) {
                *v = 1.0 / (n / 4) as f64;
            }
            let traj = size_division_evolve(&model, &u0, args.dt, args.horizon)?;
            let (lambda_hat, r_squared) = malthus_estimate(
                &traj.times,
                &traj.total_mass,
                (args.horizon * 0.25, args.horizon),
            )?;
            let rows = traj
                .times
                .iter()
                .zip(&traj.total_mass)
                .map(|(t, m)| format!("{t},{m}"));
            Ok(Outputs {
                report: json!({
                    "lambda_hat": lambda_hat,
                    "r_squared": r_squared,
                    "outflow": traj.outflow,
                }),
                files: vec![("totals.csv".into(), csv_table("t,value", rows))],
            })
        }
        StructuredCmd::Cellcycle(args) => {
            let model = match args.preset {
                CellcyclePreset::Benchmark => CellCycleModel::benchmark(),
            };
            let grid = model.grid.clone();
            let mut u0 = vec![0.0; grid.len()];
            for i in 0..grid.n_xb {
                for j in 0..grid.n_a / 5 {
                    u0[grid.idx(i, j)] = 1.0;
                }
            }
            let total: f64 = u0.iter().sum();
            u0.iter_mut().for_each(|v| *v /= total);
            let traj = cellcycle_evolve(&model, &u0, args.horizon, args.snapshot_every)?;
            let window = (args.horizon * 0.5, args.horizon);
            let (lambda_hat, r_squared) = traj.malthus(window)?;
            let residuals = aeg_residual(&traj, lambda_hat);
            let residual_final = residuals
                .iter()
                .rev()
                .nth(1)
                .map(|(_, r)| *r)
                .unwrap_or(0.0);
            // final 2-D state in the documented CSV schema
            let mut rows = Vec::new();
            for i in 0..grid.n_xb {
                for j in 0..grid.n_a {
                    let m = traj.final_masses[grid.idx(i, j)];
                    if m != 0.0 {
                        rows.push(format!(
                            "{},{},{},{},{}",
                            grid.xb_edge(i),
                            grid.xb_edge(i + 1),
                            grid.a_edge(j),
                            grid.a_edge(j + 1),
                            m
                        ));
                    }
                }
            }
            Ok(Outputs {
                report: json!({
                    "lambda_hat": lambda_hat,
                    "r_squared": r_squared,
                    "renewal_defect_max": traj.renewal_defect_max,
                    "residual_final": residual_final,
                }),
                files: vec![(
                    "u.csv".into(),
                    csv_table("xb_lo,xb_hi,a_lo,a_hi,mass", rows.into_iter()),
                )],
            })
        }
    }
}

/// Birth-rate mini-spec: `gauss:<center>,<width>,<amplitude>` (truncated at
/// three widths) or `const:<v>`.
enum BirthRate {
    Gauss { center: f64, width: f64, amp: f64 },
    Const(f64),
}

impl BirthRate {
    fn evaluate(&self, a: f64) -> f64 {
        match self {
            BirthRate::Gauss { center, width, amp } => {
                if (a - center).abs() > 3.0 * width {
                    0.0
                } else {
                    amp * (-((a - center) / width).powi(2)).exp()
                }
            }
            BirthRate::Const(v) => *v,
        }
    }
}

fn parse_birth_rate(text: &str) -> Result<BirthRate> {
    if let Some(rest) = text.strip_prefix("gauss:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Domain(format!(
                "expected gauss:<center>,<width>,<amplitude>, got '{text}'"
            )));
        }
        let nums: std::result::Result<Vec<f64>, _> =
            parts.iter().map(|p| p.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| Error::Domain(format!("bad birth rate '{text}': {e}")))?;
        return Ok(BirthRate::Gauss {
            center: nums[0],
            width: nums[1],
            amp: nums[2],
        });
    }
    if let Some(v) = text.strip_prefix("const:") {
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Domain(format!("bad birth rate '{text}': {e}")))?;
        return Ok(BirthRate::Const(v));
    }
    Err(Error::Domain(format!(
        "unknown birth rate '{text}' (gauss:...|const:...)"
    )))
}
