//! Logarithmic potentials on the unit disk.
//!
//! The Newton potential `v(z) = (1/2π) ∬ log|z−ζ| f(ζ) dσ` and the Green
//! potential `q(z) = (1/2π) ∬ g_D(z,ζ) f(ζ) dσ` are computed over the
//! annulus covered by the density grid; see [`Method`] for the two
//! quadratures.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Field, FieldInterpolator, PolarGrid};
use crate::quadrature::{exp_weighted_weights, inner_block_ratio};
use crate::spectral::RingFft;

/// Green's function of the unit disk,
/// `g_D(z, ζ) = −log |(z − ζ) / (1 − ζ̄ z)|`.
pub fn green_function(z: Complex64, zeta: Complex64) -> Result<f64> {
    if z.norm() >= 1.0 || zeta.norm() >= 1.0 {
        return Err(Error::OutOfDomain(format!("{z}, {zeta}")));
    }
    let num = (z - zeta).norm();
    if num == 0.0 {
        return Err(Error::Precondition(format!(
            "Green's function has a pole at coincident points {z}"
        )));
    }
    let den = (Complex64::new(1.0, 0.0) - zeta.conj() * z).norm();
    Ok(-(num / den).ln())
}

/// Real density samples `f(ζ)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: PolarGrid,
    values: Vec<f64>,
    radial: bool,
}

impl Density {
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "density has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("density has non-finite values".into()));
        }
        Ok(Self {
            grid,
            values,
            radial: false,
        })
    }

    /// A density depending on `|ζ|` only; each ring must be constant.
    pub fn radial(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(grid, values)?;
        let na = d.grid.n_angular();
        for (i, ring) in d.values.chunks(na).enumerate() {
            if ring.iter().any(|v| *v != ring[0]) {
                return Err(Error::Precondition(format!("radial density varies along level {i}")));
            }
        }
        d.radial = true;
        Ok(d)
    }

    pub fn from_fn(grid: &PolarGrid, f: impl Fn(Complex64) -> f64) -> Result<Self> {
        Self::new(grid.clone(), grid.nodes().map(|(_, _, z)| f(z)).collect())
    }

    pub fn radial_fn(grid: &PolarGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|(i, _, _)| f(grid.radius(i))).collect();
        Self::radial(grid.clone(), values)
    }

    pub fn from_field(field: &Field) -> Result<Self> {
        if !field.is_real() {
            return Err(Error::Precondition("density must be real".into()));
        }
        Self::new(field.grid().clone(), field.real_values())
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    fn ring(&self, i: usize) -> &[f64] {
        let na = self.grid.n_angular();
        &self.values[i * na..(i + 1) * na]
    }

    /// `∬ f dσ` over the annulus by the cell rule.
    pub fn mass(&self) -> f64 {
        (0..self.grid.n_radial())
            .map(|i| self.grid.cell_area(i) * self.ring(i).iter().sum::<f64>())
            .sum()
    }

    /// Mass on the disk `|ζ| < ε` not covered by the grid, estimated from
    /// the inner ring mean.
    pub fn omitted_mass(&self) -> f64 {
        let ring = self.ring(0);
        let mean = ring.iter().sum::<f64>() / ring.len() as f64;
        PI * self.grid.inner_radius().powi(2) * mean
    }

    /// True when the mass of `|f|` does not settle as levels approach the
    /// inner circle.
    pub fn mass_diverges(&self) -> bool {
        let h = self.grid.log_step();
        let dth = self.grid.angular_step();
        let per_level: Vec<f64> = (0..self.grid.n_radial())
            .map(|i| {
                let t = self.grid.log_radius(i);
                (2.0 * t).exp() * h * dth * self.ring(i).iter().map(|v| v.abs()).sum::<f64>()
            })
            .collect();
        inner_block_ratio(&per_level) >= 1.0
    }
}

/// Quadrature used for the potentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    /// Angular Fourier modes of the density, each integrated against the
    /// mode's radial kernel with local cubic product integration
    /// in `t = log ρ`.
    #[default]
    Modal,
    /// Cell-midpoint rule. The cell containing the evaluation node
    /// contributes `f(z)` times `∫ log|z − ζ|` over the disk of equal area
    /// centred at the node, `A (log R − 1/2)` with `π R² = A`.
    CellMidpoint,
}

/// A potential sampled on an evaluation grid, plus its value at `z = 0`.
#[derive(Clone, Debug)]
pub struct Potential {
    pub field: Field,
    pub at_origin: f64,
    /// Estimated mass on `|ζ| < ε`, which the quadrature treats as zero.
    pub omitted_mass: f64,
    /// Set when the density mass fails the inner-refinement Cauchy test.
    pub mass_divergent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kernel {
    Newton,
    Green,
}

fn inscribed_disk_weight(area: f64) -> f64 {
    let r = (area / PI).sqrt();
    area * (r.ln() - 0.5)
}

/// Newton potential with the default method.
pub fn newton_potential(f: &Density, eval: &PolarGrid) -> Result<Potential> {
    newton_potential_with(f, eval, Method::default())
}

pub fn newton_potential_with(f: &Density, eval: &PolarGrid, method: Method) -> Result<Potential> {
    potential(f, eval, method, Kernel::Newton)
}

/// Green potential with the default method.
pub fn green_potential(f: &Density, eval: &PolarGrid) -> Result<Potential> {
    green_potential_with(f, eval, Method::default())
}

pub fn green_potential_with(f: &Density, eval: &PolarGrid, method: Method) -> Result<Potential> {
    potential(f, eval, method, Kernel::Green)
}

fn potential(f: &Density, eval: &PolarGrid, method: Method, kernel: Kernel) -> Result<Potential> {
    let g = f.grid();
    if g.n_radial() < 3 {
        return Err(Error::TooCoarse("potentials need at least 3 radial levels".into()));
    }
    let modal = modal_potential(f, kernel);
    let values = match method {
        Method::Modal if eval == g => modal.values,
        Method::Modal => {
            let on_source = Field::real(g.clone(), modal.values)?;
            let interp = FieldInterpolator::new(&on_source);
            eval.nodes()
                .map(|(_, _, z)| interp.eval(z).map(|v| v.re))
                .collect::<Result<_>>()?
        }
        Method::CellMidpoint if eval == g => convolve_same_grid(f, kernel),
        Method::CellMidpoint => direct_sum(f, eval, kernel),
    };
    Ok(Potential {
        field: Field::real(eval.clone(), values)?,
        at_origin: modal.at_origin,
        omitted_mass: f.omitted_mass(),
        mass_divergent: f.mass_diverges(),
    })
}

/// `J_p(c) = ∫_0^1 w^p e^{−c w} dw` for `p = 0..4` and `c >= 0`.
fn decay_moments(c: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    if c < 3.0 {
        for (p, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for n in 0..80 {
                let add = term / (p + n + 1) as f64;
                sum += add;
                if add.abs() < 1e-18 {
                    break;
                }
                term *= -c / (n + 1) as f64;
            }
            *slot = sum;
        }
    } else {
        let e = (-c).exp();
        out[0] = (1.0 - e) / c;
        for p in 1..4 {
            out[p] = (p as f64 * out[p - 1] - e) / c;
        }
    }
    out
}

/// Node weights for `∫_0^1 p(σ) w(σ) dσ` over `[s0, s0 + 1]`, with `p` the
/// interpolant on nodes `s = 0..len` and `moments[q] = ∫ σ^q w`.
fn stencil_weights(len: usize, s0: usize, moments: &[f64; 4]) -> [f64; 4] {
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate().take(len) {
        // coefficients of L_a(s0 + σ) in powers of σ
        let mut poly = [0.0; 4];
        poly[0] = 1.0;
        for (deg, b) in (0..len).filter(|&b| b != a).enumerate() {
            let shift = s0 as f64 - b as f64;
            let scale = 1.0 / (a as f64 - b as f64);
            for q in (0..=deg + 1).rev() {
                let lower = if q > 0 { poly[q - 1] } else { 0.0 };
                poly[q] = (lower + shift * poly[q]) * scale;
            }
        }
        *wa = poly.iter().zip(moments).map(|(c, m)| c * m).sum();
    }
    w
}

/// Local rules for every interval: weights against `e^{−cσ}`
/// (`toward_end == false`) or `e^{−c(1−σ)}`.
struct IntervalRule {
    len: usize,
    weights: Vec<[f64; 4]>,
}

impl IntervalRule {
    fn new(nr: usize, c: f64, toward_end: bool) -> Self {
        let j = decay_moments(c);
        let m = if toward_end {
            [
                j[0],
                j[0] - j[1],
                j[0] - 2.0 * j[1] + j[2],
                j[0] - 3.0 * j[1] + 3.0 * j[2] - j[3],
            ]
        } else {
            j
        };
        let len = nr.min(4);
        let weights = (0..len - 1).map(|s0| stencil_weights(len, s0, &m)).collect();
        Self { len, weights }
    }

    /// First stencil node for `[t_k, t_{k+1}]`; interior intervals are
    /// centred.
    fn base(&self, k: usize, nr: usize) -> usize {
        let back = if self.len == 4 { 1 } else { 0 };
        k.saturating_sub(back).min(nr - self.len)
    }

    fn apply(&self, col: &[Complex64], k: usize) -> Complex64 {
        let b = self.base(k, col.len());
        let w = &self.weights[k - b];
        (0..self.len).map(|a| col[b + a] * w[a]).sum()
    }
}

struct ModalResult {
    values: Vec<f64>,
    at_origin: f64,
}

/// Expands `log|z − ζ| = log max(ρ, s) − Σ_{m≥1} (1/m)(min/max)^m cos m(θ−φ)`,
/// so each angular mode `f_m(s)` of the density gives
///
/// ```text
/// v_0(ρ) = log ρ ∫_0^ρ f_0 s ds + ∫_ρ^1 f_0 s log s ds,
/// v_m(ρ) = −(1/2m) [ρ^{−m} ∫_0^ρ f_m s^{m+1} ds + ρ^m ∫_ρ^1 f_m s^{1−m} ds].
/// ```
///
/// The Green potential adds `−(ρ^m / 2m) ∫_0^1 f_m s^{m+1} ds` to `−v_m`.
/// Radial integrals run over `ε < s < 1` only.
fn modal_potential(f: &Density, kernel: Kernel) -> ModalResult {
    let g = f.grid();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let h = g.log_step();
    let fft = RingFft::new(na);
    let mut spec: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for ring in spec.chunks_mut(na) {
        fft.forward(ring);
    }
    let t: Vec<f64> = (0..nr).map(|i| g.log_radius(i)).collect();
    let e2t: Vec<f64> = t.iter().map(|ti| (2.0 * ti).exp()).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); nr * na];
    let mut col = vec![Complex64::new(0.0, 0.0); nr];
    let mut p = vec![Complex64::new(0.0, 0.0); nr];
    let mut q = vec![Complex64::new(0.0, 0.0); nr];
    let mut at_origin = 0.0;
    for j in 0..na {
        let mu = fft.wavenumber(j).abs();
        for (i, c) in col.iter_mut().enumerate() {
            *c = spec[i * na + j];
        }
        // P_i = ∫_{t_0}^{t_i} F e^{(μ+2)(τ − t_i)} dτ
        let lam = mu + 2.0;
        let wp = IntervalRule::new(nr, lam * h, true);
        let decay = (-lam * h).exp();
        p[0] = Complex64::new(0.0, 0.0);
        for k in 0..nr - 1 {
            p[k + 1] = p[k] * decay + wp.apply(&col, k) * h;
        }
        if mu == 0.0 {
            // G_i = ∫_{t_i}^0 F τ e^{2τ} dτ
            let ft: Vec<Complex64> = col.iter().zip(&t).map(|(c, ti)| c * *ti).collect();
            let wg = IntervalRule::new(nr, 2.0 * h, true);
            q[nr - 1] = Complex64::new(0.0, 0.0);
            for k in (0..nr - 1).rev() {
                q[k] = q[k + 1] + wg.apply(&ft, k) * (h * e2t[k + 1]);
            }
            for i in 0..nr {
                out[i * na + j] = p[i] * (e2t[i] * t[i]) + q[i];
            }
            at_origin = q[0].re / na as f64;
        } else {
            // Q_i = ∫_{t_i}^0 F e^{(2−μ)(τ − t_i)} dτ
            let lam = 2.0 - mu;
            let grow = (lam * h).exp();
            let (wq, scale) = if lam >= 0.0 {
                (IntervalRule::new(nr, lam * h, true), grow)
            } else {
                (IntervalRule::new(nr, -lam * h, false), 1.0)
            };
            q[nr - 1] = Complex64::new(0.0, 0.0);
            for k in (0..nr - 1).rev() {
                q[k] = q[k + 1] * grow + wq.apply(&col, k) * (h * scale);
            }
            for i in 0..nr {
                out[i * na + j] = (p[i] + q[i]) * (-e2t[i] / (2.0 * mu));
            }
        }
        if kernel == Kernel::Green {
            for i in 0..nr {
                let reflected = if mu == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    p[nr - 1] * ((mu * t[i]).exp() / (2.0 * mu))
                };
                out[i * na + j] = -out[i * na + j] - reflected;
            }
        }
    }
    for ring in out.chunks_mut(na) {
        fft.inverse(ring);
    }
    if kernel == Kernel::Green {
        at_origin = -at_origin;
    }
    let mut values: Vec<f64> = out.iter().map(|c| c.re).collect();
    if kernel == Kernel::Green {
        // g_D vanishes on the unit circle
        values[(nr - 1) * na..].iter_mut().for_each(|v| *v = 0.0);
    }
    ModalResult { values, at_origin }
}

fn kernel_value(kernel: Kernel, z: Complex64, zeta: Complex64) -> f64 {
    let newton = (z - zeta).norm().ln();
    match kernel {
        Kernel::Newton => newton,
        Kernel::Green => -newton + (Complex64::new(1.0, 0.0) - zeta.conj() * z).norm().ln(),
    }
}

fn diagonal_weight(kernel: Kernel, area: f64, rho: f64) -> f64 {
    match kernel {
        Kernel::Newton => inscribed_disk_weight(area),
        Kernel::Green => (-inscribed_disk_weight(area) + area * (1.0 - rho * rho).ln()).max(0.0),
    }
}

/// Cell-midpoint rule when density and evaluation grids coincide: each
/// pair of radial levels is a circular convolution in θ.
fn convolve_same_grid(f: &Density, kernel: Kernel) -> Vec<f64> {
    let g = f.grid();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let fft = RingFft::new(na);
    let dth = g.angular_step();
    let weights: Vec<f64> = (0..nr).map(|k| g.cell_area(k)).collect();
    let spectra: Vec<Vec<Complex64>> = (0..nr)
        .map(|k| {
            let mut c: Vec<Complex64> = f.ring(k).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut c);
            c
        })
        .collect();
    let mut out = vec![0.0; g.len()];
    let mut row = vec![Complex64::new(0.0, 0.0); na];
    let mut acc = vec![Complex64::new(0.0, 0.0); na];
    for i in 0..nr {
        if kernel == Kernel::Green && i == nr - 1 {
            continue;
        }
        let rho_i = g.radius(i);
        acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for k in 0..nr {
            let rho_k = g.radius(k);
            for (d, slot) in row.iter_mut().enumerate() {
                let val = if k == i && d == 0 {
                    diagonal_weight(kernel, weights[i], rho_i)
                } else {
                    let z = Complex64::new(rho_i, 0.0);
                    let zeta = Complex64::from_polar(rho_k, d as f64 * dth);
                    weights[k] * kernel_value(kernel, z, zeta)
                };
                *slot = Complex64::new(val, 0.0);
            }
            fft.forward(&mut row);
            for (a, (kk, ff)) in acc.iter_mut().zip(row.iter().zip(&spectra[k])) {
                *a += kk.re * ff;
            }
        }
        fft.inverse(&mut acc);
        for j in 0..na {
            out[i * na + j] = acc[j].re / (2.0 * PI);
        }
    }
    out
}

fn direct_sum(f: &Density, eval: &PolarGrid, kernel: Kernel) -> Vec<f64> {
    let g = f.grid();
    let weights: Vec<f64> = (0..g.n_radial()).map(|k| g.cell_area(k)).collect();
    let nodes: Vec<(usize, Complex64)> = g.nodes().map(|(k, _, z)| (k, z)).collect();
    let mut out = Vec::with_capacity(eval.len());
    for (_, _, z) in eval.nodes() {
        if kernel == Kernel::Green && (z.norm() - 1.0).abs() < 1e-14 {
            out.push(0.0);
            continue;
        }
        let mut acc = 0.0;
        for (&(k, zeta), fv) in nodes.iter().zip(&f.values) {
            let w = if (z - zeta).norm() < 1e-12 * (1.0 + z.norm()) {
                diagonal_weight(kernel, weights[k], zeta.norm())
            } else {
                weights[k] * kernel_value(kernel, z, zeta)
            };
            acc += fv * w;
        }
        out.push(acc / (2.0 * PI));
    }
    out
}

/// Value of `∬_D e^{p|v|} dxdy` on one grid, `v` the Newton potential of
/// `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeValue {
    pub integral: f64,
    /// `p|v|` overflowed somewhere; evidence against integrability.
    pub divergent: bool,
}

/// One level of a refinement study of the probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeStep {
    pub value: ProbeValue,
    /// Ratio to the previous (coarser) level's integral.
    pub ratio: Option<f64>,
}

/// Quadrature of `e^{p|v|}` over the disk: product quadrature in `t` over the annulus,
/// plus the inner disk `|z| < ε` filled with the inner-ring mean.
pub fn brezis_merle_probe(f: &Density, p: f64) -> Result<ProbeValue> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("exponent p must be positive, got {p}")));
    }
    let g = f.grid();
    let v = newton_potential(f, g)?.field;
    let w = exp_weighted_weights(g.n_radial(), g.log_radius(0), g.log_step(), 2.0);
    let na = g.n_angular();
    let mut integral = 0.0;
    let mut inner_mean = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let mut ring_sum = 0.0;
        for j in 0..na {
            let e = p * v.get(i, j).re.abs();
            if e > 700.0 {
                return Ok(ProbeValue {
                    integral: f64::INFINITY,
                    divergent: true,
                });
            }
            ring_sum += e.exp();
        }
        if i == 0 {
            inner_mean = ring_sum / na as f64;
        }
        integral += wi * ring_sum * g.angular_step();
    }
    integral += PI * g.inner_radius().powi(2) * inner_mean;
    Ok(ProbeValue {
        integral,
        divergent: false,
    })
}

/// Runs the probe on successively refined densities and reports the ratio
/// between consecutive levels.
pub fn brezis_merle_refinement(levels: &[Density], p: f64) -> Result<Vec<ProbeStep>> {
    let mut out: Vec<ProbeStep> = Vec::with_capacity(levels.len());
    for f in levels {
        let value = brezis_merle_probe(f, p)?;
        let ratio = out.last().map(|prev| value.integral / prev.value.integral);
        out.push(ProbeStep { value, ratio });
    }
    Ok(out)
}
