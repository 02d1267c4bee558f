//! Extraction of the conical order, energy and limit checks near the
//! origin, and Laurent analysis on circles.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffops::{connection, log_polar_laplacian, schwarzian};
use crate::error::{Error, Result};
use crate::geometry::{sample_metric, CurvatureSpec, Field, FieldInterpolator, MetricDescriptor, PolarGrid};
use crate::potentials::{newton_potential, Density};
use crate::quadrature::exp_weighted_weights;
use crate::spectral::RingFft;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub stderr: f64,
    /// Number of inner levels used in the regression.
    pub levels: usize,
    /// Regression intercept, the mean of the remainder near the origin.
    pub intercept: f64,
}

fn require_real(u: &Field) -> Result<()> {
    if u.is_real() {
        Ok(())
    } else {
        Err(Error::Precondition("expected a real field".into()))
    }
}

/// Least-squares slope of the circle means of `u` against `log|z|` over the
/// inner half of the radial levels.
pub fn fit_gamma(u: &Field) -> Result<GammaFit> {
    require_real(u)?;
    let g = u.grid();
    let nr = g.n_radial();
    if nr < 4 {
        return Err(Error::TooCoarse(format!(
            "fit_gamma needs at least 4 radial levels, got {nr}"
        )));
    }
    let levels = nr.div_ceil(2).max(3);
    let t: Vec<f64> = (0..levels).map(|i| g.log_radius(i)).collect();
    let y: Vec<f64> = (0..levels).map(|i| u.ring_mean(i)).collect();
    let n = levels as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(&y).map(|(ti, yi)| (ti - tm) * (yi - ym)).sum();
    let gamma = sxy / sxx;
    let intercept = ym - gamma * tm;
    let ssr: f64 = t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| (yi - intercept - gamma * ti).powi(2))
        .sum();
    let stderr = if levels > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(GammaFit {
        gamma,
        stderr,
        levels,
        intercept,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStep {
    pub inner_radius: f64,
    /// Quadrature over `inner_radius < |z| < 1`.
    pub annulus: f64,
    /// `annulus` plus the power-law tail below `inner_radius`; infinite
    /// when `γ̂ <= −1`.
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyEstimate {
    /// Best estimate of `∬ e^{2u}`, `+∞` when divergent.
    pub value: f64,
    pub divergent: bool,
    pub gamma_hat: f64,
    /// Ratio of the last two increments of `annulus` along the schedule.
    pub cauchy_ratio: Option<f64>,
    pub steps: Vec<EnergyStep>,
}

/// Orders at or below this value are treated as `γ = −1`, where the energy
/// diverges logarithmically.
const LOG_DIVERGENCE: f64 = -1.0 + 1e-9;

/// Energy with the default schedule `ε^{1/4}, ε^{1/2}, ε^{3/4}, ε`.
pub fn energy(u: &Field) -> Result<EnergyEstimate> {
    let eps = u.grid().inner_radius();
    let schedule: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|p| eps.powf(*p)).collect();
    energy_with_schedule(u, &schedule)
}

/// Quadrature of `e^{2u}` on `ρ_s < |z| < 1` for each radius of the
/// schedule, extended below `ρ_s` by `|z|^{2γ̂}` matched to the ring mean
/// at `ρ_s`.
pub fn energy_with_schedule(u: &Field, schedule: &[f64]) -> Result<EnergyEstimate> {
    require_real(u)?;
    let g = u.grid();
    let fit = fit_gamma(u)?;
    let gamma = fit.gamma;
    let nr = g.n_radial();
    let mut starts: Vec<usize> = Vec::new();
    for &r in schedule {
        if !(r > 0.0 && r < 1.0) || !g.contains_radius(r) {
            return Err(Error::Precondition(format!("schedule radius {r} is outside the grid")));
        }
        let s = g.nearest_level(r).min(nr - 3);
        if starts.last().is_some_and(|last| s >= *last) {
            continue;
        }
        starts.push(s);
    }
    if starts.is_empty() {
        return Err(Error::Precondition("empty energy schedule".into()));
    }
    // The power law |z|^{2γ̂} is moved into the product weights.
    let a = 2.0 + 2.0 * gamma.clamp(-1.0, 2.0);
    let shift = a - 2.0;
    let ring: Vec<f64> = (0..nr)
        .map(|i| {
            let t = g.log_radius(i);
            let mean = u.ring(i).iter().map(|v| (2.0 * v.re - shift * t).exp()).sum::<f64>() / g.n_angular() as f64;
            2.0 * PI * mean
        })
        .collect();
    let mut steps = Vec::with_capacity(starts.len());
    for &s in &starts {
        let w = exp_weighted_weights(nr - s, g.log_radius(s), g.log_step(), a);
        let annulus: f64 = w.iter().zip(&ring[s..]).map(|(wi, ri)| wi * ri).sum();
        let tail = if gamma > LOG_DIVERGENCE {
            ring[s] * (a * g.log_radius(s)).exp() / (2.0 + 2.0 * gamma)
        } else {
            f64::INFINITY
        };
        steps.push(EnergyStep {
            inner_radius: g.radius(s),
            annulus,
            total: annulus + tail,
        });
    }
    let annuli: Vec<f64> = steps.iter().map(|s| s.annulus).collect();
    let n = annuli.len();
    let cauchy_ratio = (n >= 3).then(|| {
        let d1 = (annuli[n - 1] - annuli[n - 2]).abs();
        let d0 = (annuli[n - 2] - annuli[n - 3]).abs();
        if d0 == 0.0 {
            if d1 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d1 / d0
        }
    });
    let last = steps[n - 1].total;
    let unsettled = cauchy_ratio
        .is_some_and(|q| q >= 1.0 - 1e-6 && (annuli[n - 1] - annuli[n - 2]).abs() > 1e-9 * annuli[n - 1].abs());
    let divergent =
        gamma <= LOG_DIVERGENCE || !last.is_finite() || steps.iter().any(|s| !s.annulus.is_finite()) || unsettled;
    Ok(EnergyEstimate {
        value: if divergent { f64::INFINITY } else { last },
        divergent,
        gamma_hat: gamma,
        cauchy_ratio,
        steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub gamma_hat: f64,
    /// Max over interior nodes of `|z|²|Δh|`.
    pub laplacian_defect: f64,
    /// Spread of the circle means of `h` over all levels.
    pub mean_value_defect: f64,
    /// Harmonic part `h = u − γ̂ log|z| − v`.
    pub harmonic_part: Field,
}

impl Decomposition {
    pub fn defect(&self) -> f64 {
        self.laplacian_defect + self.mean_value_defect
    }
}

/// Splits `u = γ̂ log|z| + h + v` with `v` the Newton potential of
/// `k e^{2u}` and measures how far `h` is from harmonic.
pub fn verify_decomposition(u: &Field, k: &CurvatureSpec) -> Result<Decomposition> {
    require_real(u)?;
    let g = u.grid();
    let fit = fit_gamma(u)?;
    let kv = k.values_on(g)?;
    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(&kv)
        .map(|(ui, ki)| ki * (2.0 * ui.re).exp())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("k e^{2u} overflows".into()));
    }
    let na = g.n_angular();
    let radial = values.chunks(na).all(|ring| ring.iter().all(|v| *v == ring[0]));
    let density = if radial {
        Density::radial(g.clone(), values)?
    } else {
        Density::new(g.clone(), values)?
    };
    let v = newton_potential(&density, g)?;
    if v.mass_divergent {
        return Err(Error::Divergent("k e^{2u} is not integrable near the origin".into()));
    }
    let h: Vec<f64> = g
        .nodes()
        .map(|(i, j, _)| u.get(i, j).re - fit.gamma * g.log_radius(i) - v.field.get(i, j).re)
        .collect();
    let h = Field::real(g.clone(), h)?;
    let lap = log_polar_laplacian(&h)?;
    let nr = g.n_radial();
    let laplacian_defect = g
        .nodes()
        .filter(|(i, _, _)| *i > 0 && *i + 1 < nr)
        .map(|(i, j, _)| lap.get(i, j).re.abs())
        .fold(0.0, f64::max);
    let means: Vec<f64> = (0..nr).map(|i| h.ring_mean(i)).collect();
    let mean_value_defect =
        means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Decomposition {
        gamma_hat: fit.gamma,
        laplacian_defect,
        mean_value_defect,
        harmonic_part: h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: Complex64,
    pub converged: bool,
    /// `|q|` for the last three samples, with `q` the ratio of consecutive
    /// differences; the observed rate is `ρ^{-log2 |q|}`.
    pub contraction: f64,
    pub samples: Vec<(f64, Complex64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeLimits {
    pub connection: LimitEstimate,
    pub schwarzian: LimitEstimate,
}

/// Aitken extrapolation of a sequence sampled at geometrically shrinking
/// radii.
fn extrapolate(samples: Vec<(f64, Complex64)>) -> LimitEstimate {
    let n = samples.len();
    let x: Vec<Complex64> = samples.iter().map(|s| s.1).collect();
    if n < 3 || x.iter().any(|v| !v.is_finite()) {
        return LimitEstimate {
            value: x.last().copied().unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            converged: false,
            contraction: f64::INFINITY,
            samples,
        };
    }
    let (x0, x1, x2) = (x[n - 3], x[n - 2], x[n - 1]);
    let d0 = x1 - x0;
    let d1 = x2 - x1;
    let scale = x2.norm().max(1.0);
    let (value, contraction) = if d1.norm() <= 1e-14 * scale {
        (
            x2,
            if d0.norm() <= 1e-14 * scale {
                0.0
            } else {
                (d1 / d0).norm()
            },
        )
    } else {
        let q = d1 / d0;
        (x2 + d1 * q / (Complex64::new(1.0, 0.0) - q), q.norm())
    };
    LimitEstimate {
        value,
        converged: contraction < 1.0 && value.is_finite(),
        contraction,
        samples,
    }
}

/// Limits of `z Γ_λ` and `z² S_λ` at the origin along `θ = 0`, from radii
/// `2^{-j}`. Closed forms use `j = 10..=40`; grid samples use every dyadic
/// radius inside the grid.
pub fn cone_limits(m: &MetricDescriptor) -> Result<ConeLimits> {
    match m {
        MetricDescriptor::GridSampled { u, .. } => {
            let g = u.grid();
            let j1 = (-g.inner_radius().log2()).floor() as i32;
            cone_limits_on(m, 1, j1)
        }
        _ => cone_limits_on(m, 10, 40),
    }
}

pub fn cone_limits_on(m: &MetricDescriptor, j0: i32, j1: i32) -> Result<ConeLimits> {
    if j1 < j0 + 2 {
        return Err(Error::Precondition(format!(
            "need at least 3 dyadic radii, got j = {j0}..={j1}"
        )));
    }
    let radii: Vec<f64> = (j0..=j1).map(|j| 2f64.powi(-j)).collect();
    let (conn, schw): (Vec<_>, Vec<_>) = match m {
        MetricDescriptor::GridSampled { u, .. } => {
            let g = u.grid();
            let gamma = connection(m, g)?;
            let s = schwarzian(m, g)?;
            let gi = FieldInterpolator::new(&gamma);
            let si = FieldInterpolator::new(&s);
            let mut conn = Vec::new();
            let mut schw = Vec::new();
            for &r in &radii {
                let z = Complex64::new(r, 0.0);
                conn.push((r, z * gi.eval(z)?));
                schw.push((r, z * z * si.eval(z)?));
            }
            (conn, schw)
        }
        _ => radii
            .iter()
            .map(|&r| {
                let z = Complex64::new(r, 0.0);
                (
                    (r, z * m.closed_connection(z).expect("closed form")),
                    (r, z * z * m.closed_schwarzian(z).expect("closed form")),
                )
            })
            .unzip(),
    };
    Ok(ConeLimits {
        connection: extrapolate(conn),
        schwarzian: extrapolate(schw),
    })
}

/// Empirical Hölder exponent of the remainder `r = u − γ̂ log|z|`: slope of
/// `log osc(r; ε ≤ |z| ≤ ρ)` against `log ρ` over the inner half of the
/// levels. `None` when the oscillation vanishes identically.
pub fn remainder_smoothness(u: &Field, gamma_hat: f64) -> Result<Option<f64>> {
    require_real(u)?;
    let g = u.grid();
    let nr = g.n_radial();
    if nr < 4 {
        return Err(Error::TooCoarse("remainder diagnostic needs at least 4 levels".into()));
    }
    let levels = nr.div_ceil(2).max(3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pts = Vec::new();
    for i in 0..levels {
        let t = g.log_radius(i);
        for v in u.ring(i) {
            let r = v.re - gamma_hat * t;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let osc = hi - lo;
        if osc > 1e-13 * hi.abs().max(lo.abs()).max(1.0) {
            pts.push((t, osc.ln()));
        }
    }
    if pts.len() < 3 {
        return Ok(None);
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    Ok(Some(sxy / sxx))
}

/// Laurent coefficients `b_n`, `|n| <= max_index`, of a function sampled on
/// the circle `|z| = radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaurentSpectrum {
    pub radius: f64,
    pub max_index: usize,
    /// `b_{-N}, …, b_N`.
    pub coefficients: Vec<Complex64>,
    /// Trailing coefficients exceed `1e-8` of the largest one.
    pub aliasing_warning: bool,
}

impl LaurentSpectrum {
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let idx = n + self.max_index as i64;
        assert!(
            idx >= 0 && (idx as usize) < self.coefficients.len(),
            "index {n} out of range"
        );
        self.coefficients[idx as usize]
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let n = self.max_index as i64;
        -n..=n
    }

    /// `|b_n| ρ^n`, the size of the sampled Fourier mode.
    fn mode_size(&self, n: i64) -> f64 {
        self.coefficient(n).norm() * self.radius.powi(n as i32)
    }

    /// Whether `b_n` stands out from roundoff in the sampled data.
    pub fn is_nonzero(&self, n: i64) -> bool {
        let largest = self.indices().map(|m| self.mode_size(m)).fold(0.0, f64::max);
        self.mode_size(n) > 1e-12 * largest
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,re,im,abs")?;
        for n in self.indices() {
            let b = self.coefficient(n);
            writeln!(out, "{n},{},{},{}", b.re, b.im, b.norm())?;
        }
        Ok(())
    }
}

pub fn laurent_spectrum(samples: &[Complex64], radius: f64, max_index: usize) -> Result<LaurentSpectrum> {
    let na = samples.len();
    if na < 2 * max_index + 2 {
        return Err(Error::Precondition(format!(
            "{na} samples cannot resolve |n| <= {max_index}; need at least {}",
            2 * max_index + 2
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Precondition("non-finite circle sample".into()));
    }
    let mut c = samples.to_vec();
    RingFft::new(na).forward(&mut c);
    let n = max_index as i64;
    let coefficients: Vec<Complex64> = (-n..=n)
        .map(|k| {
            let bin = k.rem_euclid(na as i64) as usize;
            c[bin] / na as f64 * radius.powi(-(k as i32))
        })
        .collect();
    let largest = coefficients.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let trailing = coefficients[0].norm().max(coefficients[2 * max_index].norm());
    Ok(LaurentSpectrum {
        radius,
        max_index,
        aliasing_warning: trailing > 1e-8 * largest,
        coefficients,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ParsevalEnergy {
    Finite {
        value: f64,
    },
    /// `b_n ≠ 0` for an index with `n <= -1 - γ`.
    Divergent {
        index: i64,
    },
}

/// `2π Σ |b_n|² / (2n + 2γ + 2)`, the area integral of `|z|^{2γ}|f|²` over
/// the unit disk for `f = Σ b_n z^n`.
pub fn parseval_energy(spec: &LaurentSpectrum, gamma: f64) -> ParsevalEnergy {
    let mut value = 0.0;
    for n in spec.indices() {
        if !spec.is_nonzero(n) {
            continue;
        }
        let denom = 2.0 * n as f64 + 2.0 * gamma + 2.0;
        if denom <= 0.0 {
            return ParsevalEnergy::Divergent { index: n };
        }
        value += spec.coefficient(n).norm_sqr() / denom;
    }
    ParsevalEnergy::Finite {
        value: 2.0 * PI * value,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    /// `γ̂ > -1` with finite energy.
    pub expansion: bool,
    /// `lim z Γ = γ`.
    pub connection_limit: bool,
    /// `lim z² S = -γ(2+γ)/2`.
    pub schwarzian_limit: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.expansion && self.connection_limit && self.schwarzian_limit
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub input_digest: String,
    pub gamma_hat: f64,
    pub gamma_stderr: f64,
    /// `γ` the limits are compared with: the known order, or `γ̂`.
    pub gamma_reference: f64,
    pub connection_limit: [f64; 2],
    pub connection_converged: bool,
    pub schwarzian_limit: [f64; 2],
    pub schwarzian_converged: bool,
    /// `None` when the energy diverges.
    pub energy: Option<f64>,
    pub energy_divergent: bool,
    pub remainder_holder_exponent: Option<f64>,
    pub decomposition_defect: Option<f64>,
    pub pass: PassFlags,
}

/// One row of the radius profile: circle means of `u`, `z Γ` and `z² S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub rho: f64,
    pub u_mean: f64,
    pub z_connection: Complex64,
    pub z2_schwarzian: Complex64,
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], mut out: W) -> Result<()> {
    writeln!(out, "rho,u_mean,zgamma_re,zgamma_im,z2s_re,z2s_im")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.rho, r.u_mean, r.z_connection.re, r.z_connection.im, r.z2_schwarzian.re, r.z2_schwarzian.im
        )?;
    }
    Ok(())
}

/// SHA-256 of a canonical text form of the metric and grid.
pub fn input_digest(m: &MetricDescriptor, grid: &PolarGrid) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(format!(
        "grid {} {} {}\n",
        grid.inner_radius(),
        grid.n_radial(),
        grid.n_angular()
    ));
    match m {
        MetricDescriptor::SphericalLiouville { beta } => hasher.update(format!("spherical {beta}\n")),
        MetricDescriptor::EssentialLiouville { order } => hasher.update(format!("essential {order}\n")),
        MetricDescriptor::PowerLawFlat { gamma, coefficients } => {
            hasher.update(format!("flat {gamma}"));
            for c in coefficients {
                hasher.update(format!(" {c}"));
            }
            hasher.update("\n");
        }
        MetricDescriptor::GridSampled { u, gamma_hint } => {
            hasher.update(format!("sampled {gamma_hint:?}\n"));
            let mut buf = Vec::new();
            u.write_csv(&mut buf)?;
            hasher.update(&buf);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Tolerance on the connection and Schwarzian limits: tight for closed forms, looser when
/// the limits come from grid differentiation.
fn limit_tolerance(m: &MetricDescriptor) -> f64 {
    if m.is_closed_form() {
        1e-3
    } else {
        1e-2
    }
}

/// Runs every check on `m` sampled on `grid`. The decomposition check needs
/// the curvature; closed forms supply their own.
pub fn analyze(
    m: &MetricDescriptor,
    grid: &PolarGrid,
    k: Option<&CurvatureSpec>,
) -> Result<(SingularityReport, Vec<ProfileRow>)> {
    let u = sample_metric(m, grid)?;
    let fit = fit_gamma(&u)?;
    let energy = energy(&u)?;
    let limits = cone_limits(m)?;
    let own_k = m.curvature_constant().map(CurvatureSpec::Constant);
    let decomposition_defect = match k.or(own_k.as_ref()) {
        Some(k) => match verify_decomposition(&u, k) {
            Ok(d) => Some(d.defect()),
            Err(Error::Divergent(_) | Error::Overflow(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let gamma_reference = m.conical_order().unwrap_or(fit.gamma);
    let smoothness = remainder_smoothness(&u, gamma_reference)?;
    let tol = limit_tolerance(m);
    let c = limits.connection.value;
    let s = limits.schwarzian.value;
    let s_expected = -gamma_reference * (2.0 + gamma_reference) / 2.0;
    let pass = PassFlags {
        expansion: fit.gamma > -1.0 && !energy.divergent,
        connection_limit: limits.connection.converged && (c.re - gamma_reference).abs() <= tol && c.im.abs() <= tol,
        schwarzian_limit: limits.schwarzian.converged && (s.re - s_expected).abs() <= tol && s.im.abs() <= tol,
    };
    let finite = |v: f64| if v.is_finite() { v } else { f64::NAN };
    let report = SingularityReport {
        input_digest: input_digest(m, grid)?,
        gamma_hat: fit.gamma,
        gamma_stderr: fit.stderr,
        gamma_reference,
        connection_limit: [finite(c.re), finite(c.im)],
        connection_converged: limits.connection.converged,
        schwarzian_limit: [finite(s.re), finite(s.im)],
        schwarzian_converged: limits.schwarzian.converged,
        energy: (!energy.divergent).then_some(energy.value),
        energy_divergent: energy.divergent,
        remainder_holder_exponent: smoothness,
        decomposition_defect,
        pass,
    };
    let gamma_field = connection(m, grid)?;
    let s_field = schwarzian(m, grid)?;
    let ring_mean = |f: &Field, i: usize, power: i32| {
        (0..grid.n_angular())
            .map(|j| grid.node(i, j).powi(power) * f.get(i, j))
            .sum::<Complex64>()
            / grid.n_angular() as f64
    };
    let rows = (0..grid.n_radial())
        .map(|i| ProfileRow {
            rho: grid.radius(i),
            u_mean: u.ring_mean(i),
            z_connection: ring_mean(&gamma_field, i, 1),
            z2_schwarzian: ring_mean(&s_field, i, 2),
        })
        .collect();
    Ok((report, rows))
}
