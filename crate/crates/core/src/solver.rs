//! Newton solver for `Δu = k e^{2u}` on the annulus `ε < |z| < 1` with
//! Dirichlet data on both circles.
//!
//! The unknowns are nodal values of `u` on the log-polar grid. Interior
//! equations are written in the scaled form
//!
//! ```text
//! R(u) = (∂_tt + ∂_θθ) u − k e^{2t + 2u} = |z|² (Δu − k e^{2u}),
//! ```
//!
//! which keeps the residual well conditioned near the inner circle. Each
//! Newton correction solves `(L + diag c) δ = −R` with `c = −2k e^{2t+2u}`
//! by restarted GMRES, right-preconditioned with the exact inverse of the
//! operator whose `c` is replaced by its ring mean. That preconditioner
//! diagonalizes in the angular Fourier modes and reduces to one tridiagonal
//! solve per mode.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_metric, CurvatureSpec, Field, MetricDescriptor, PolarGrid};
use crate::spectral::RingFft;

/// Dirichlet values of `u` on the inner (`|z| = ε`) and outer (`|z| = 1`)
/// circle nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    inner: Vec<f64>,
    outer: Vec<f64>,
}

impl BoundaryData {
    pub fn new(inner: Vec<f64>, outer: Vec<f64>) -> Result<Self> {
        if inner.len() != outer.len() {
            return Err(Error::Precondition(format!(
                "inner and outer boundary lengths differ ({} vs {})",
                inner.len(),
                outer.len()
            )));
        }
        if inner.iter().chain(&outer).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("boundary data must be finite".into()));
        }
        Ok(Self { inner, outer })
    }

    /// Boundary values of `u = f(z)`.
    pub fn from_fn(grid: &PolarGrid, f: impl Fn(Complex64) -> f64) -> Result<Self> {
        let last = grid.n_radial() - 1;
        let inner = (0..grid.n_angular()).map(|j| f(grid.node(0, j))).collect();
        let outer = (0..grid.n_angular()).map(|j| f(grid.node(last, j))).collect();
        Self::new(inner, outer)
    }

    /// Boundary values taken from a metric's log-density.
    pub fn from_metric(m: &MetricDescriptor, grid: &PolarGrid) -> Result<Self> {
        let u = sample_metric(m, grid)?;
        let last = grid.n_radial() - 1;
        Self::new(
            u.ring(0).iter().map(|v| v.re).collect(),
            u.ring(last).iter().map(|v| v.re).collect(),
        )
    }

    pub fn inner(&self) -> &[f64] {
        &self.inner
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    fn check_grid(&self, grid: &PolarGrid) -> Result<()> {
        if self.inner.len() != grid.n_angular() {
            return Err(Error::Precondition(format!(
                "boundary data has {} nodes per circle, grid has {}",
                self.inner.len(),
                grid.n_angular()
            )));
        }
        Ok(())
    }

    /// CSV with header `rho,theta,u`, inner circle first.
    pub fn write_csv<W: Write>(&self, grid: &PolarGrid, mut out: W) -> Result<()> {
        self.check_grid(grid)?;
        writeln!(out, "rho,theta,u")?;
        let last = grid.n_radial() - 1;
        for (i, ring) in [(0, &self.inner), (last, &self.outer)] {
            for (j, v) in ring.iter().enumerate() {
                writeln!(out, "{},{},{}", grid.radius(i), grid.angle(j), v)?;
            }
        }
        Ok(())
    }

    /// Reads boundary values for `grid`. Every node of both circles must
    /// appear exactly once.
    pub fn read_csv<R: BufRead>(input: R, grid: &PolarGrid) -> Result<Self> {
        let na = grid.n_angular();
        let mut inner = vec![None; na];
        let mut outer = vec![None; na];
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "rho,theta,u" {
            return Err(Error::Parse(format!("unexpected boundary header {header:?}")));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let [rho, theta, u] = cols[..] else {
                return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 2)));
            };
            let target = if (rho - grid.inner_radius()).abs() <= 1e-12 * grid.inner_radius() {
                &mut inner
            } else if (rho - 1.0).abs() <= 1e-12 {
                &mut outer
            } else {
                return Err(Error::Parse(format!(
                    "line {}: radius {rho} is not a boundary circle",
                    lineno + 2
                )));
            };
            let j = (theta / grid.angular_step()).round();
            if !(0.0..na as f64).contains(&j) || (theta - j * grid.angular_step()).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "line {}: angle {theta} is not a node",
                    lineno + 2
                )));
            }
            if target[j as usize].replace(u).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate node", lineno + 2)));
            }
        }
        let collect = |v: Vec<Option<f64>>| -> Result<Vec<f64>> {
            v.into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Parse("boundary data is missing nodes".into()))
        };
        Self::new(collect(inner)?, collect(outer)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialGuess {
    /// Zero in the interior.
    Zero,
    /// `γ log|z|` plus the boundary data with `γ log|z|` removed,
    /// interpolated linearly in `log|z|`.
    Interpolated { gamma_hint: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Max-norm tolerance on the scaled residual.
    pub tolerance: f64,
    pub max_steps: usize,
    /// Initial step length of each Newton step, halved while the residual
    /// would increase. Steps are also shortened so that no nodal value moves
    /// by more than 2.
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_steps: 50,
            damping: 1.0,
            initial_guess: InitialGuess::Interpolated { gamma_hint: 0.0 },
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Precondition(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Precondition(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Precondition("max_steps must be at least 1".into()));
        }
        if let InitialGuess::Interpolated { gamma_hint } = self.initial_guess {
            if !gamma_hint.is_finite() {
                return Err(Error::Precondition("gamma_hint must be finite".into()));
            }
        }
        Ok(())
    }
}

/// One line of the iteration log. Step 0 describes the initial guess.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    pub residual: f64,
    pub damping: f64,
    pub correction: f64,
    pub linear_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Field,
    pub residual: f64,
    pub iterations: Vec<IterationRecord>,
}

const LINEAR_TOLERANCE: f64 = 1e-12;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERATIONS: usize = 3000;
/// Relative linear residual accepted once GMRES restarts stop making
/// progress.
const STAGNATION_ACCEPT: f64 = 1e-8;
const MIN_DAMPING: f64 = 1.0 / 1024.0;
/// Largest nodal change of `u` allowed in one Newton step.
const MAX_UPDATE: f64 = 2.0;

/// Discretized problem on one grid.
struct System {
    grid: PolarGrid,
    k: Vec<f64>,
    e2t: Vec<f64>,
    fft: RingFft,
}

impl System {
    fn new(k: &CurvatureSpec, grid: &PolarGrid) -> Result<Self> {
        if grid.n_radial() < 3 {
            return Err(Error::TooCoarse(format!(
                "the solver needs at least 3 radial levels, got {}",
                grid.n_radial()
            )));
        }
        let k = k.values_on(grid)?;
        if let Some(pos) = k.iter().position(|v| v.is_nan() || *v > 0.0) {
            return Err(Error::Precondition(format!(
                "curvature must be nonpositive, got {} at node {pos}",
                k[pos]
            )));
        }
        Ok(Self {
            e2t: (0..grid.n_radial()).map(|i| (2.0 * grid.log_radius(i)).exp()).collect(),
            fft: RingFft::new(grid.n_angular()),
            grid: grid.clone(),
            k,
        })
    }

    fn is_interior(&self, i: usize) -> bool {
        i > 0 && i + 1 < self.grid.n_radial()
    }

    /// `(∂_tt + ∂_θθ) x` on interior rows, zero on boundary rows.
    fn laplacian(&self, x: &[f64]) -> Vec<f64> {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let inv_h2 = 1.0 / self.grid.log_step().powi(2);
        let mut y = vec![0.0; x.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); na];
        for i in 1..nr - 1 {
            for (b, v) in buf.iter_mut().zip(&x[i * na..(i + 1) * na]) {
                *b = Complex64::new(*v, 0.0);
            }
            self.fft.d_theta2(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                let c = i * na + j;
                y[c] = (x[c + na] - 2.0 * x[c] + x[c - na]) * inv_h2 + b.re;
            }
        }
        y
    }

    /// Scaled residual, or `None` if `e^{2u}` overflows.
    fn residual(&self, u: &[f64]) -> Option<Vec<f64>> {
        let na = self.grid.n_angular();
        let mut r = self.laplacian(u);
        for (c, rc) in r.iter_mut().enumerate() {
            let i = c / na;
            if self.is_interior(i) {
                let e = (2.0 * u[c]).exp();
                *rc -= self.k[c] * self.e2t[i] * e;
            }
        }
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn reaction(&self, u: &[f64]) -> Vec<f64> {
        let na = self.grid.n_angular();
        u.iter()
            .enumerate()
            .map(|(c, v)| -2.0 * self.k[c] * self.e2t[c / na] * (2.0 * v).exp())
            .collect()
    }

    /// Solves `(L + diag c) δ = rhs` with `δ = 0` on boundary rows.
    fn solve_linear(&self, c: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let precond = ModePreconditioner::new(self, c)?;
        let apply = |x: &[f64]| {
            let mut y = self.laplacian(x);
            for (idx, yv) in y.iter_mut().enumerate() {
                if self.is_interior(idx / na) {
                    *yv += c[idx] * x[idx];
                }
            }
            y
        };
        let mut b = rhs.to_vec();
        b[..na].iter_mut().for_each(|v| *v = 0.0);
        b[(nr - 1) * na..].iter_mut().for_each(|v| *v = 0.0);
        gmres(apply, |r| precond.apply(self, r), &b, LINEAR_TOLERANCE)
    }
}

/// Per-Fourier-mode tridiagonal factorizations of `∂_tt − m² + c̄(t)`.
struct ModePreconditioner {
    factors: Vec<TridiagonalLu>,
}

impl ModePreconditioner {
    fn new(sys: &System, c: &[f64]) -> Result<Self> {
        let (nr, na) = (sys.grid.n_radial(), sys.grid.n_angular());
        let inv_h2 = 1.0 / sys.grid.log_step().powi(2);
        let n = nr - 2;
        let cbar: Vec<f64> = (1..nr - 1)
            .map(|i| c[i * na..(i + 1) * na].iter().sum::<f64>() / na as f64)
            .collect();
        let factors = (0..=na / 2)
            .map(|m| {
                let m2 = (m * m) as f64;
                let diag: Vec<f64> = cbar.iter().map(|cb| -2.0 * inv_h2 - m2 + cb).collect();
                TridiagonalLu::factor(vec![inv_h2; n - 1], diag, vec![inv_h2; n - 1])
            })
            .collect::<Result<_>>()?;
        Ok(Self { factors })
    }

    fn apply(&self, sys: &System, r: &[f64]) -> Vec<f64> {
        let (nr, na) = (sys.grid.n_radial(), sys.grid.n_angular());
        let mut spec: Vec<Complex64> = r[na..(nr - 1) * na].iter().map(|v| Complex64::new(*v, 0.0)).collect();
        for ring in spec.chunks_mut(na) {
            sys.fft.forward(ring);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); nr - 2];
        for j in 0..na {
            let m = sys.fft.wavenumber(j).abs() as usize;
            for (i, v) in column.iter_mut().enumerate() {
                *v = spec[i * na + j];
            }
            self.factors[m].solve(&mut column);
            for (i, v) in column.iter().enumerate() {
                spec[i * na + j] = *v;
            }
        }
        let mut out = vec![0.0; r.len()];
        for (i, ring) in spec.chunks_mut(na).enumerate() {
            sys.fft.inverse(ring);
            for (o, v) in out[(i + 1) * na..(i + 2) * na].iter_mut().zip(ring.iter()) {
                *o = v.re;
            }
        }
        out
    }
}

/// LU factorization of a tridiagonal matrix with partial pivoting.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(mut dl: Vec<f64>, mut d: Vec<f64>, mut du: Vec<f64>) -> Result<Self> {
        let n = d.len();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::LinearSolve(format!("singular preconditioner block at row {i}")));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    fn solve(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - b[i] * self.dl[i];
            } else {
                b[i + 1] -= b[i] * self.dl[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - b[n - 1] * self.du[n - 2]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - b[i + 1] * self.du[i] - b[i + 2] * self.du2[i]) / self.d[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted right-preconditioned GMRES from a zero initial guess. Returns
/// the solution and the number of Krylov iterations.
fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let target = rel_tol * bnorm;
    let mut total = 0;
    let mut previous = f64::INFINITY;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta <= target {
            return Ok((x, total));
        }
        // A restart that gains nothing has hit the rounding floor; the
        // Newton step only needs to be accurate to far less.
        if beta > 0.5 * previous && beta <= STAGNATION_ACCEPT * bnorm {
            return Ok((x, total));
        }
        previous = beta;
        if total >= GMRES_MAX_ITERATIONS {
            return Err(Error::LinearSolve(format!(
                "GMRES stalled at relative residual {:.3e} after {total} iterations",
                beta / bnorm
            )));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        for j in 0..GMRES_RESTART {
            total += 1;
            let mut w = apply(&precond(&basis[j]));
            let mut col = vec![0.0; j + 2];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    col[i] += hij;
                    w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
                }
            }
            let wnorm = norm(&w);
            col[j + 1] = wnorm;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rr = col[j].hypot(col[j + 1]);
            let (c, s) = if rr == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / rr, col[j + 1] / rr)
            };
            col[j] = rr;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            let done = g[j + 1].abs() <= target || wnorm == 0.0 || total >= GMRES_MAX_ITERATIONS;
            if !done {
                basis.push(w.iter().map(|v| v / wnorm).collect());
            }
            if done || j + 1 == GMRES_RESTART {
                break;
            }
        }
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|l| h[l][i] * y[l]).sum();
            if h[i][i] == 0.0 {
                return Err(Error::LinearSolve("GMRES breakdown".into()));
            }
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(uk, vk)| *uk += yi * vk);
        }
        let dx = precond(&update);
        x.iter_mut().zip(&dx).for_each(|(xk, dk)| *xk += dk);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial_guess(grid: &PolarGrid, bc: &BoundaryData, guess: InitialGuess) -> Vec<f64> {
    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let t0 = grid.log_radius(0);
    let mut u = vec![0.0; grid.len()];
    for i in 0..nr {
        let t = grid.log_radius(i);
        let s = (t - t0) / -t0;
        for j in 0..na {
            u[i * na + j] = match guess {
                InitialGuess::Zero => 0.0,
                InitialGuess::Interpolated { gamma_hint } => {
                    let a = bc.inner[j] - gamma_hint * t0;
                    gamma_hint * t + a + (bc.outer[j] - a) * s
                }
            };
        }
    }
    u[..na].copy_from_slice(&bc.inner);
    u[(nr - 1) * na..].copy_from_slice(&bc.outer);
    u
}

/// Scaled residual `|z|² (Δu − k e^{2u})` at interior nodes, zero on the
/// boundary circles.
pub fn residual(u: &Field, k: &CurvatureSpec) -> Result<Field> {
    if !u.is_real() {
        return Err(Error::Precondition("u must be a real field".into()));
    }
    let sys = System::new(k, u.grid())?;
    let r = sys
        .residual(&u.real_values())
        .ok_or_else(|| Error::Overflow("e^{2u} overflows".into()))?;
    Field::real(u.grid().clone(), r)
}

/// One Newton correction: solves `Δδ − 2k e^{2u} δ = −(Δu − k e^{2u})` with
/// `δ = 0` on both circles. `bc` fixes the boundary rows of `u` first.
pub fn linearized_step(u: &Field, k: &CurvatureSpec, bc: &BoundaryData) -> Result<Field> {
    if !u.is_real() {
        return Err(Error::Precondition("u must be a real field".into()));
    }
    let grid = u.grid();
    bc.check_grid(grid)?;
    let sys = System::new(k, grid)?;
    let mut uv = u.real_values();
    let na = grid.n_angular();
    uv[..na].copy_from_slice(&bc.inner);
    uv[(grid.n_radial() - 1) * na..].copy_from_slice(&bc.outer);
    let r = sys
        .residual(&uv)
        .ok_or_else(|| Error::Overflow("e^{2u} overflows".into()))?;
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let (delta, _) = sys.solve_linear(&sys.reaction(&uv), &rhs)?;
    Field::real(grid.clone(), delta)
}

/// Damped Newton iteration from the configured initial guess.
pub fn solve(k: &CurvatureSpec, bc: &BoundaryData, grid: &PolarGrid, cfg: &SolverConfig) -> Result<Solution> {
    let mut log = Vec::new();
    solve_logged(k, bc, grid, cfg, &mut log)
}

/// [`solve`], appending each iteration to `log` as it happens so the
/// history survives a failure.
pub fn solve_logged(
    k: &CurvatureSpec,
    bc: &BoundaryData,
    grid: &PolarGrid,
    cfg: &SolverConfig,
    log: &mut Vec<IterationRecord>,
) -> Result<Solution> {
    cfg.validate()?;
    bc.check_grid(grid)?;
    let sys = System::new(k, grid)?;
    let mut u = initial_guess(grid, bc, cfg.initial_guess);
    let mut r = sys
        .residual(&u)
        .ok_or_else(|| Error::Overflow("e^{2u} overflows at the initial guess".into()))?;
    let mut res = max_abs(&r);
    log.push(IterationRecord {
        step: 0,
        residual: res,
        damping: 0.0,
        correction: 0.0,
        linear_iterations: 0,
    });
    for step in 1..=cfg.max_steps {
        if res <= cfg.tolerance {
            break;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, linear_iterations) = sys.solve_linear(&sys.reaction(&u), &rhs)?;
        let mut alpha = cfg.damping.min(MAX_UPDATE / max_abs(&delta));
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            if let Some(rt) = sys.residual(&trial) {
                let rn = max_abs(&rt);
                if rn <= res {
                    break Some((trial, rt, rn));
                }
            }
            alpha *= 0.5;
            if alpha < MIN_DAMPING {
                break None;
            }
        };
        let Some((trial, rt, rn)) = accepted else {
            return Err(Error::NonConvergence {
                steps: step,
                residual: res,
            });
        };
        u = trial;
        r = rt;
        res = rn;
        log.push(IterationRecord {
            step,
            residual: res,
            damping: alpha,
            correction: alpha * max_abs(&delta),
            linear_iterations,
        });
    }
    if res > cfg.tolerance {
        return Err(Error::NonConvergence {
            steps: cfg.max_steps,
            residual: res,
        });
    }
    Ok(Solution {
        u: Field::real(grid.clone(), u)?,
        residual: res,
        iterations: log.clone(),
    })
}
