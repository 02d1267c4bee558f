//! Command-line front end.
//!
//! Every subcommand reads one JSON document whose `command` field names the
//! subcommand, writes CSV tables and JSON reports into `--out`, and exits
//! with 0 on success, 2 on a violated precondition, 3 on numerical
//! non-convergence and 4 on a divergence verdict. Relative paths inside a
//! config are resolved against the config's directory.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    analyze, fit_gamma, laurent_spectrum, parseval_energy, verify_decomposition, write_profile_csv, LaurentSpectrum,
    ParsevalEnergy,
};
use crate::diffops::{check_transformation_rules, pullback, RuleResiduals};
use crate::error::{Error, Result};
use crate::geometry::{sample_metric, CurvatureSpec, Field, MetricDescriptor, PolarGrid};
use crate::potentials::{brezis_merle_probe, green_potential_with, newton_potential_with, Density, Method};
use crate::solver::{solve_logged, BoundaryData, IterationRecord, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "conical", version, about = "Conformal metrics with conical singularities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conical order, energy, limits and decomposition of a metric.
    Analyze(RunArgs),
    /// Solve the curvature equation on an annulus.
    Solve(RunArgs),
    /// Pull a metric back under z ↦ z^m.
    Pullback(RunArgs),
    /// Newton and Green potentials of a density.
    Potential(RunArgs),
    /// Laurent coefficients and Parseval energy of circle samples.
    Spectrum(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Number of grid levels in a refinement study written to
    /// `refinement.csv`.
    #[arg(long)]
    pub refine: Option<usize>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Self::Analyze(a) | Self::Solve(a) | Self::Pullback(a) | Self::Potential(a) | Self::Spectrum(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Analyze(_) => "analyze",
            Self::Solve(_) => "solve",
            Self::Pullback(_) => "pullback",
            Self::Potential(_) => "potential",
            Self::Spectrum(_) => "spectrum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub inner_radius: f64,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl GridConfig {
    fn build(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.inner_radius, self.n_radial, self.n_angular)
    }

    /// The next level of a refinement study; old nodes stay nodes.
    fn refined(&self, level: usize) -> Self {
        let f = 1usize << level;
        Self {
            inner_radius: self.inner_radius,
            n_radial: (self.n_radial - 1) * f + 1,
            n_angular: self.n_angular * f,
        }
    }

    fn of(grid: &PolarGrid) -> Self {
        Self {
            inner_radius: grid.inner_radius(),
            n_radial: grid.n_radial(),
            n_angular: grid.n_angular(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Spherical {
        beta: f64,
    },
    Essential {
        order: u32,
    },
    Flat {
        gamma: f64,
        #[serde(default)]
        coefficients: Vec<f64>,
    },
    Sampled {
        path: PathBuf,
        #[serde(default)]
        gamma_hint: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureConfig {
    Constant { value: f64 },
    Sampled { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// Boundary values of a metric's log-density.
    Metric { metric: MetricConfig },
    /// CSV with header `rho,theta,u`.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Constant {
        value: f64,
    },
    /// Field CSV with header `rho,theta,re,im`.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    Modal,
    CellMidpoint,
}

impl From<MethodConfig> for Method {
    fn from(m: MethodConfig) -> Self {
        match m {
            MethodConfig::Modal => Method::Modal,
            MethodConfig::CellMidpoint => Method::CellMidpoint,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplesConfig {
    /// CSV with header `re,im`, one equispaced sample per row starting at
    /// θ = 0.
    File { path: PathBuf },
    /// `e^z`.
    Exp,
    /// `e^{1/z}`.
    ExpInverse,
    /// `Σ c_n z^n` from `[n, re, im]` triples.
    Laurent { terms: Vec<(i64, f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Required for closed-form metrics; defaults to the sampled grid.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub metric: MetricConfig,
    /// Curvature for the decomposition check; closed forms supply their own.
    #[serde(default)]
    pub curvature: Option<CurvatureConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: GridConfig,
    pub curvature: CurvatureConfig,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackConfig {
    #[serde(default)]
    pub grid: Option<GridConfig>,
    pub metric: MetricConfig,
    pub cover_order: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub density: DensityConfig,
    /// Density grid; required for constant densities.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Evaluation grid; defaults to the density grid.
    #[serde(default)]
    pub eval_grid: Option<GridConfig>,
    #[serde(default)]
    pub method: MethodConfig,
    /// Exponent `p` of the probe `∬ e^{p|v|}`.
    #[serde(default)]
    pub probe_exponent: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub samples: SamplesConfig,
    pub radius: f64,
    /// Number of samples generated for function inputs.
    #[serde(default = "default_sample_count")]
    pub count: usize,
    pub max_index: usize,
    /// Weight exponent `γ` in the Parseval energy.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sample_count() -> usize {
    64
}

/// A configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Analyze(AnalyzeConfig),
    Solve(SolveConfig),
    Pullback(PullbackConfig),
    Potential(PotentialConfig),
    Spectrum(SpectrumConfig),
}

impl RunConfig {
    fn name(&self) -> &'static str {
        match self {
            Self::Analyze(_) => "analyze",
            Self::Solve(_) => "solve",
            Self::Pullback(_) => "pullback",
            Self::Potential(_) => "potential",
            Self::Spectrum(_) => "spectrum",
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::LinearSolve(_) => 3,
        Error::Divergent(_) | Error::Overflow(_) => 4,
        _ => 2,
    }
}

/// Result of a successful run: the exit status and the files written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

struct Context {
    base: PathBuf,
    out: PathBuf,
    files: Vec<PathBuf>,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn open(&self, p: &Path) -> Result<BufReader<File>> {
        let path = self.resolve(p);
        File::open(&path)
            .map(BufReader::new)
            .map_err(|e| Error::Precondition(format!("cannot open {}: {e}", path.display())))
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn write_field(&mut self, name: &str, f: &Field) -> Result<()> {
        self.write(name, |w| f.write_csv(w))
    }
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| Error::Precondition(format!("invalid config: {e}")))
}

/// Runs one subcommand. Errors are returned before any exit status is
/// chosen; map them with [`exit_code`].
pub fn run(cli: &Cli) -> Result<Outcome> {
    let args = cli.command.args();
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Precondition(format!("cannot read config {}: {e}", args.config.display())))?;
    let config = parse_config(&text)?;
    if config.name() != cli.command.name() {
        return Err(Error::Precondition(format!(
            "config is for `{}`, not `{}`",
            config.name(),
            cli.command.name()
        )));
    }
    if args.refine == Some(0) {
        return Err(Error::Precondition("--refine needs at least 1 level".into()));
    }
    fs::create_dir_all(&args.out)?;
    let mut ctx = Context {
        base: args.config.parent().map(Path::to_path_buf).unwrap_or_default(),
        out: args.out.clone(),
        files: Vec::new(),
    };
    let exit_code = match &config {
        RunConfig::Analyze(c) => cmd_analyze(c, &mut ctx, args.refine)?,
        RunConfig::Solve(c) => cmd_solve(c, &mut ctx, args.refine)?,
        RunConfig::Pullback(c) => cmd_pullback(c, &mut ctx, args.refine)?,
        RunConfig::Potential(c) => cmd_potential(c, &mut ctx, args.refine)?,
        RunConfig::Spectrum(c) => cmd_spectrum(c, &mut ctx, args.refine)?,
    };
    Ok(Outcome {
        exit_code,
        files: ctx.files,
    })
}

fn load_metric(m: &MetricConfig, ctx: &Context) -> Result<MetricDescriptor> {
    match m {
        MetricConfig::Spherical { beta } => MetricDescriptor::spherical(*beta),
        MetricConfig::Essential { order } => MetricDescriptor::essential(*order),
        MetricConfig::Flat { gamma, coefficients } => MetricDescriptor::flat(*gamma, coefficients.clone()),
        MetricConfig::Sampled { path, gamma_hint } => {
            let u = Field::read_csv(ctx.open(path)?)?;
            MetricDescriptor::grid_sampled(u, *gamma_hint)
        }
    }
}

fn metric_grid(m: &MetricDescriptor, grid: Option<&GridConfig>) -> Result<GridConfig> {
    match (grid, m) {
        (Some(g), _) => Ok(*g),
        (None, MetricDescriptor::GridSampled { u, .. }) => Ok(GridConfig::of(u.grid())),
        (None, _) => Err(Error::Precondition("closed-form metrics need a `grid`".into())),
    }
}

fn load_curvature(k: &CurvatureConfig, ctx: &Context) -> Result<CurvatureSpec> {
    match k {
        CurvatureConfig::Constant { value } => CurvatureSpec::constant(*value),
        CurvatureConfig::Sampled { path } => CurvatureSpec::sampled(Field::read_csv(ctx.open(path)?)?),
    }
}

/// One row of `refinement.csv`.
#[derive(Clone, Debug, PartialEq)]
struct RefinementRow {
    level: usize,
    grid: GridConfig,
    quantity: &'static str,
    value: f64,
    error: Option<f64>,
    order: Option<f64>,
}

/// A quantity measured on one level, with its exact value when known.
struct Measurement {
    quantity: &'static str,
    value: f64,
    exact: Option<f64>,
}

fn measure(quantity: &'static str, value: f64, exact: Option<f64>) -> Measurement {
    Measurement { quantity, value, exact }
}

/// Runs `level_fn` on successively refined grids. Errors are the distance
/// to the exact value when known, otherwise to the previous level; orders
/// are `log2` of consecutive error ratios.
fn refinement_study(
    base: GridConfig,
    levels: usize,
    mut level_fn: impl FnMut(&PolarGrid) -> Result<Vec<Measurement>>,
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::new();
    for level in 0..levels {
        let gc = base.refined(level);
        let grid = gc.build()?;
        for m in level_fn(&grid)? {
            let prev = rows
                .iter()
                .rev()
                .find(|r| r.quantity == m.quantity && r.level + 1 == level);
            let error = match (m.exact, prev) {
                (Some(x), _) => Some((m.value - x).abs()),
                (None, Some(p)) => Some((m.value - p.value).abs()),
                (None, None) => None,
            };
            let order = match (error, prev.and_then(|p| p.error)) {
                (Some(e), Some(pe)) if e > 0.0 && pe > 0.0 => Some((pe / e).log2()),
                _ => None,
            };
            rows.push(RefinementRow {
                level,
                grid: gc,
                quantity: m.quantity,
                value: m.value,
                error,
                order,
            });
        }
    }
    Ok(rows)
}

fn write_refinement(ctx: &mut Context, rows: &[RefinementRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    ctx.write("refinement.csv", |w| {
        writeln!(w, "level,n_radial,n_angular,quantity,value,error,order")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.level,
                r.grid.n_radial,
                r.grid.n_angular,
                r.quantity,
                r.value,
                opt(r.error),
                opt(r.order)
            )?;
        }
        Ok(())
    })
}

/// Closed-form energy `∬ e^{2u}` where one is available.
fn exact_energy(m: &MetricDescriptor) -> Option<f64> {
    match m {
        MetricDescriptor::SphericalLiouville { beta } => Some(PI * beta / 2.0),
        MetricDescriptor::PowerLawFlat { gamma, coefficients } if coefficients.iter().skip(1).all(|c| *c == 0.0) => {
            let a0 = coefficients.first().copied().unwrap_or(0.0);
            Some(PI * (2.0 * a0).exp() / (gamma + 1.0))
        }
        _ => None,
    }
}

fn cmd_analyze(c: &AnalyzeConfig, ctx: &mut Context, refine: Option<usize>) -> Result<i32> {
    let m = load_metric(&c.metric, ctx)?;
    let k = c.curvature.as_ref().map(|k| load_curvature(k, ctx)).transpose()?;
    let gc = metric_grid(&m, c.grid.as_ref())?;
    let grid = gc.build()?;
    let (report, rows) = analyze(&m, &grid, k.as_ref())?;
    ctx.write_json("report.json", &report)?;
    ctx.write("profile.csv", |w| write_profile_csv(&rows, w))?;
    if let Some(levels) = refine {
        let own_k = m.curvature_constant().map(CurvatureSpec::Constant);
        let rows = refinement_study(gc, levels, |g| {
            let u = sample_metric(&m, g)?;
            let mut out = vec![measure("gamma_hat", fit_gamma(&u)?.gamma, m.conical_order()), {
                let e = crate::asymptotics::energy(&u)?;
                measure("energy", e.value, exact_energy(&m))
            }];
            if let Some(k) = k.as_ref().or(own_k.as_ref()) {
                let k = match k {
                    CurvatureSpec::Sampled(f) if f.grid() != g => {
                        return Err(Error::Precondition("a sampled curvature cannot be refined".into()))
                    }
                    other => other,
                };
                if let Ok(d) = verify_decomposition(&u, k) {
                    out.push(measure("decomposition_defect", d.defect(), Some(0.0)));
                }
            }
            Ok(out)
        })?;
        write_refinement(ctx, &rows)?;
    }
    Ok(if report.energy_divergent {
        4
    } else if !report.pass.all() {
        3
    } else {
        0
    })
}

#[derive(Serialize)]
struct SolveMetadata<'a> {
    kind: &'static str,
    grid: GridConfig,
    curvature: &'a CurvatureConfig,
    boundary: &'a BoundaryConfig,
    solver: &'a SolverConfig,
    seed: u64,
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    residual: f64,
    newton_steps: usize,
    gamma_hat: f64,
    /// Max nodal distance to the boundary metric, for closed-form data.
    closed_form_error: Option<f64>,
}

fn load_boundary(
    b: &BoundaryConfig,
    grid: &PolarGrid,
    ctx: &Context,
) -> Result<(BoundaryData, Option<MetricDescriptor>)> {
    match b {
        BoundaryConfig::Metric { metric } => {
            let m = load_metric(metric, ctx)?;
            let bc = BoundaryData::from_metric(&m, grid)?;
            Ok((bc, m.is_closed_form().then_some(m)))
        }
        BoundaryConfig::File { path } => Ok((BoundaryData::read_csv(ctx.open(path)?, grid)?, None)),
    }
}

fn cmd_solve(c: &SolveConfig, ctx: &mut Context, refine: Option<usize>) -> Result<i32> {
    let grid = c.grid.build()?;
    let k = load_curvature(&c.curvature, ctx)?;
    let (bc, closed) = load_boundary(&c.boundary, &grid, ctx)?;
    let mut log: Vec<IterationRecord> = Vec::new();
    let result = solve_logged(&k, &bc, &grid, &c.solver, &mut log);
    let meta = SolveMetadata {
        kind: "metadata",
        grid: c.grid,
        curvature: &c.curvature,
        boundary: &c.boundary,
        solver: &c.solver,
        seed: c.seed,
    };
    ctx.write("iterations.jsonl", |w| {
        serde_json::to_writer(&mut *w, &meta)?;
        writeln!(w)?;
        for rec in &log {
            serde_json::to_writer(&mut *w, rec)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    let sol = result?;
    ctx.write_field("solution.csv", &sol.u)?;
    let closed_form_error = closed
        .as_ref()
        .map(|m| sample_metric(m, &grid).map(|e| sol.u.max_abs_diff(&e)))
        .transpose()?;
    ctx.write_json(
        "solve.json",
        &SolveSummary {
            converged: true,
            residual: sol.residual,
            newton_steps: sol.iterations.len() - 1,
            gamma_hat: fit_gamma(&sol.u)?.gamma,
            closed_form_error,
        },
    )?;
    if let Some(levels) = refine {
        let rows = refinement_study(c.grid, levels, |g| {
            let k = match &k {
                CurvatureSpec::Sampled(_) => {
                    return Err(Error::Precondition("a sampled curvature cannot be refined".into()))
                }
                other => other.clone(),
            };
            let (bc, closed) = load_boundary(&c.boundary, g, ctx)?;
            let sol = crate::solver::solve(&k, &bc, g, &c.solver)?;
            let mut out = vec![measure("newton_steps", (sol.iterations.len() - 1) as f64, None)];
            match closed {
                Some(m) => {
                    let err = sol.u.max_abs_diff(&sample_metric(&m, g)?);
                    out.push(measure("solution_error", err, Some(0.0)));
                }
                None => {
                    let mid = g.nearest_level(g.inner_radius().sqrt());
                    out.push(measure("midring_mean", sol.u.ring_mean(mid), None));
                }
            }
            Ok(out)
        })?;
        write_refinement(ctx, &rows)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct PullbackSummary {
    cover_order: u32,
    gamma: Option<f64>,
    /// `γ m + m − 1`.
    gamma_star: Option<f64>,
    gamma_star_fit: f64,
    connection_residual: Option<f64>,
    schwarzian_residual: Option<f64>,
}

fn cmd_pullback(c: &PullbackConfig, ctx: &mut Context, refine: Option<usize>) -> Result<i32> {
    let m = load_metric(&c.metric, ctx)?;
    let gc = metric_grid(&m, c.grid.as_ref())?;
    let grid = gc.build()?;
    let pulled = pullback(&m, c.cover_order, &grid)?;
    let MetricDescriptor::GridSampled { u, gamma_hint } = &pulled else {
        unreachable!("pullback samples on the grid")
    };
    ctx.write_field("pullback.csv", u)?;
    let rules: Option<RuleResiduals> = m
        .is_closed_form()
        .then(|| check_transformation_rules(&m, c.cover_order, &grid))
        .transpose()?;
    ctx.write_json(
        "pullback.json",
        &PullbackSummary {
            cover_order: c.cover_order,
            gamma: m.conical_order(),
            gamma_star: *gamma_hint,
            gamma_star_fit: fit_gamma(u)?.gamma,
            connection_residual: rules.map(|r| r.connection),
            schwarzian_residual: rules.map(|r| r.schwarzian),
        },
    )?;
    if let Some(levels) = refine {
        let rows = refinement_study(gc, levels, |g| {
            let p = pullback(&m, c.cover_order, g)?;
            let MetricDescriptor::GridSampled { u, gamma_hint } = &p else {
                unreachable!("pullback samples on the grid")
            };
            let mut out = vec![measure("gamma_star_fit", fit_gamma(u)?.gamma, *gamma_hint)];
            if m.is_closed_form() {
                let r = check_transformation_rules(&m, c.cover_order, g)?;
                out.push(measure("rule_residual", r.max(), Some(0.0)));
            }
            Ok(out)
        })?;
        write_refinement(ctx, &rows)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct ProbeSummary {
    exponent: f64,
    integral: Option<f64>,
    divergent: bool,
}

#[derive(Serialize)]
struct PotentialSummary {
    method: MethodConfig,
    newton_at_origin: f64,
    green_at_origin: f64,
    omitted_mass: f64,
    mass_divergent: bool,
    /// Max nodal error of the Newton potential for constant densities.
    newton_error: Option<f64>,
    probe: Option<ProbeSummary>,
}

fn load_density(c: &PotentialConfig, grid: Option<&PolarGrid>, ctx: &Context) -> Result<Density> {
    match (&c.density, grid) {
        (DensityConfig::Constant { value }, Some(g)) => Density::radial_fn(g, |_| *value),
        (DensityConfig::Constant { .. }, None) => Err(Error::Precondition("constant densities need a `grid`".into())),
        (DensityConfig::File { path }, _) => {
            let f = Density::from_field(&Field::read_csv(ctx.open(path)?)?)?;
            if let Some(g) = grid {
                if f.grid() != g {
                    return Err(Error::Precondition("density file does not match `grid`".into()));
                }
            }
            Ok(f)
        }
    }
}

/// `∬ e^{p|v|}` for `v = c(|z|² − 1)/4`.
fn constant_probe(c: f64, p: f64) -> f64 {
    let a = p * c.abs() / 4.0;
    if a == 0.0 {
        PI
    } else {
        PI * a.exp_m1() / a
    }
}

fn cmd_potential(c: &PotentialConfig, ctx: &mut Context, refine: Option<usize>) -> Result<i32> {
    let grid = c.grid.map(|g| g.build()).transpose()?;
    let f = load_density(c, grid.as_ref(), ctx)?;
    let eval = match &c.eval_grid {
        Some(g) => g.build()?,
        None => f.grid().clone(),
    };
    let method = Method::from(c.method);
    let v = newton_potential_with(&f, &eval, method)?;
    let q = green_potential_with(&f, &eval, method)?;
    ctx.write_field("newton.csv", &v.field)?;
    ctx.write_field("green.csv", &q.field)?;
    let constant = match c.density {
        DensityConfig::Constant { value } => Some(value),
        DensityConfig::File { .. } => None,
    };
    let oracle_error = |field: &Field, value: f64| {
        let g = field.grid();
        g.nodes()
            .map(|(i, j, z)| (field.get(i, j).re - value * (z.norm_sqr() - 1.0) / 4.0).abs())
            .fold(0.0, f64::max)
    };
    let probe = c
        .probe_exponent
        .map(|p| {
            brezis_merle_probe(&f, p).map(|r| ProbeSummary {
                exponent: p,
                integral: r.integral.is_finite().then_some(r.integral),
                divergent: r.divergent,
            })
        })
        .transpose()?;
    let divergent = v.mass_divergent || probe.as_ref().is_some_and(|p| p.divergent);
    ctx.write_json(
        "potential.json",
        &PotentialSummary {
            method: c.method,
            newton_at_origin: v.at_origin,
            green_at_origin: q.at_origin,
            omitted_mass: v.omitted_mass,
            mass_divergent: v.mass_divergent,
            newton_error: constant.map(|value| oracle_error(&v.field, value)),
            probe,
        },
    )?;
    if let Some(levels) = refine {
        let (Some(value), Some(gc)) = (constant, c.grid) else {
            return Err(Error::Precondition(
                "refinement needs a constant density on a configured grid".into(),
            ));
        };
        let rows = refinement_study(gc, levels, |g| {
            let f = Density::radial_fn(g, |_| value)?;
            let v = newton_potential_with(&f, g, method)?;
            let mut out = vec![measure("newton_error", oracle_error(&v.field, value), Some(0.0))];
            if let Some(p) = c.probe_exponent {
                let r = brezis_merle_probe(&f, p)?;
                out.push(measure("probe", r.integral, Some(constant_probe(value, p))));
            }
            Ok(out)
        })?;
        write_refinement(ctx, &rows)?;
    }
    Ok(if divergent { 4 } else { 0 })
}

fn read_samples(input: impl BufRead) -> Result<Vec<Complex64>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))??;
    if header.trim() != "re,im" {
        return Err(Error::Parse(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: bad number `{t}`", n + 2)))
        });
        match (cols.next(), cols.next(), cols.next()) {
            (Some(re), Some(im), None) => out.push(Complex64::new(re?, im?)),
            _ => return Err(Error::Parse(format!("row {}: expected two columns", n + 2))),
        }
    }
    Ok(out)
}

fn generate_samples(s: &SamplesConfig, radius: f64, count: usize, ctx: &Context) -> Result<Vec<Complex64>> {
    let f: Box<dyn Fn(Complex64) -> Complex64> = match s {
        SamplesConfig::File { path } => return read_samples(ctx.open(path)?),
        SamplesConfig::Exp => Box::new(|z| z.exp()),
        SamplesConfig::ExpInverse => Box::new(|z| z.inv().exp()),
        SamplesConfig::Laurent { terms } => {
            let terms = terms.clone();
            Box::new(move |z| {
                terms
                    .iter()
                    .map(|&(n, re, im)| Complex64::new(re, im) * z.powi(n as i32))
                    .sum()
            })
        }
    };
    Ok((0..count)
        .map(|j| f(Complex64::from_polar(radius, 2.0 * PI * j as f64 / count as f64)))
        .collect())
}

#[derive(Serialize)]
struct SpectrumSummary {
    radius: f64,
    max_index: usize,
    samples: usize,
    aliasing_warning: bool,
    /// Most negative index with a nonzero coefficient.
    lowest_nonzero_index: Option<i64>,
    gamma: f64,
    parseval: ParsevalEnergy,
}

fn cmd_spectrum(c: &SpectrumConfig, ctx: &mut Context, refine: Option<usize>) -> Result<i32> {
    let samples = generate_samples(&c.samples, c.radius, c.count, ctx)?;
    let spec: LaurentSpectrum = laurent_spectrum(&samples, c.radius, c.max_index)?;
    ctx.write("spectrum.csv", |w| spec.write_csv(w))?;
    let parseval = parseval_energy(&spec, c.gamma);
    ctx.write_json(
        "spectrum.json",
        &SpectrumSummary {
            radius: c.radius,
            max_index: c.max_index,
            samples: samples.len(),
            aliasing_warning: spec.aliasing_warning,
            lowest_nonzero_index: spec.indices().find(|n| spec.is_nonzero(*n)),
            gamma: c.gamma,
            parseval,
        },
    )?;
    if let Some(levels) = refine {
        if matches!(c.samples, SamplesConfig::File { .. }) {
            return Err(Error::Precondition("file samples cannot be refined".into()));
        }
        let mut rows: Vec<RefinementRow> = Vec::new();
        let mut prev: Option<(f64, Option<f64>)> = None;
        for level in 0..levels {
            let count = c.count << level;
            let s = generate_samples(&c.samples, c.radius, count, ctx)?;
            let value = match parseval_energy(&laurent_spectrum(&s, c.radius, c.max_index)?, c.gamma) {
                ParsevalEnergy::Finite { value } => value,
                ParsevalEnergy::Divergent { .. } => f64::INFINITY,
            };
            let error = prev.map(|(p, _)| (value - p).abs());
            let order = match (error, prev.and_then(|p| p.1)) {
                (Some(e), Some(pe)) if e > 0.0 && pe > 0.0 => Some((pe / e).log2()),
                _ => None,
            };
            rows.push(RefinementRow {
                level,
                grid: GridConfig {
                    inner_radius: c.radius,
                    n_radial: 1,
                    n_angular: count,
                },
                quantity: "parseval",
                value,
                error,
                order,
            });
            prev = Some((value, error));
        }
        write_refinement(ctx, &rows)?;
    }
    Ok(match parseval {
        ParsevalEnergy::Finite { .. } => 0,
        ParsevalEnergy::Divergent { .. } => 4,
    })
}
