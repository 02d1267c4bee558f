use num_complex::Complex64;

use super::field::{Field, FieldInterpolator};
use super::grid::PolarGrid;
use crate::error::{Error, Result};

/// Description of the log-density `u = log λ` of a conformal metric
/// `λ(z)|dz|` on the punctured disk.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricDescriptor {
    /// Curvature `+4` metric with developing map `g(z) = z^β`:
    /// `u = log(β|z|^{β-1} / (1 + |z|^{2β}))`, conical order `β - 1`.
    SphericalLiouville { beta: f64 },
    /// Curvature `+4` metric with developing map `g(z) = exp(z^{-order})`.
    /// Its energy is infinite: the developing map has an essential
    /// singularity at the origin.
    EssentialLiouville { order: u32 },
    /// Flat metric `u = γ log|z| + Re Σ a_n z^n`.
    PowerLawFlat { gamma: f64, coefficients: Vec<f64> },
    /// Log-density given by samples on a grid.
    GridSampled { u: Field, gamma_hint: Option<f64> },
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MetricDescriptor {
    pub fn spherical(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Precondition(format!("β must be positive, got {beta}")));
        }
        Ok(Self::SphericalLiouville { beta })
    }

    pub fn essential(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Precondition("essential order must be >= 1".into()));
        }
        Ok(Self::EssentialLiouville { order })
    }

    pub fn flat(gamma: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !(gamma > -1.0 && gamma.is_finite()) {
            return Err(Error::Precondition(format!("γ must exceed -1, got {gamma}")));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("non-finite harmonic coefficient".into()));
        }
        Ok(Self::PowerLawFlat { gamma, coefficients })
    }

    pub fn grid_sampled(u: Field, gamma_hint: Option<f64>) -> Result<Self> {
        if !u.is_real() {
            return Err(Error::Precondition("log-density must be a real field".into()));
        }
        Ok(Self::GridSampled { u, gamma_hint })
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, Self::GridSampled { .. })
    }

    /// Order γ of the conical singularity at the origin, when known.
    pub fn conical_order(&self) -> Option<f64> {
        match self {
            Self::SphericalLiouville { beta } => Some(beta - 1.0),
            Self::PowerLawFlat { gamma, .. } => Some(*gamma),
            Self::GridSampled { gamma_hint, .. } => *gamma_hint,
            Self::EssentialLiouville { .. } => None,
        }
    }

    /// The constant `k` in `Δu = k e^{2u}` for closed-form families.
    pub fn curvature_constant(&self) -> Option<f64> {
        match self {
            Self::SphericalLiouville { .. } | Self::EssentialLiouville { .. } => Some(-4.0),
            Self::PowerLawFlat { .. } => Some(0.0),
            Self::GridSampled { .. } => None,
        }
    }

    /// `u(z)` for the closed-form families.
    pub fn closed_log_density(&self, z: Complex64) -> Option<f64> {
        self.closed_log_density_polar(z.norm().ln(), z)
    }

    /// Same as [`Self::closed_log_density`] with `t = log|z|` supplied, so
    /// grid sampling can use the exact level value.
    pub(crate) fn closed_log_density_polar(&self, t: f64, z: Complex64) -> Option<f64> {
        match self {
            Self::SphericalLiouville { beta } => Some(beta.ln() + (beta - 1.0) * t - (2.0 * beta * t).exp().ln_1p()),
            Self::EssentialLiouville { order } => {
                let p = *order as f64;
                let a = z.powi(-(*order as i32)).re;
                Some(p.ln() - (p + 1.0) * t + a - softplus(2.0 * a))
            }
            Self::PowerLawFlat { gamma, coefficients } => {
                let mut zn = Complex64::new(1.0, 0.0);
                let mut h = 0.0;
                for a in coefficients {
                    h += a * zn.re;
                    zn *= z;
                }
                Some(gamma * t + h)
            }
            Self::GridSampled { .. } => None,
        }
    }

    /// Connection `Γ_λ = 2 ∂u/∂z` for the closed-form families.
    pub fn closed_connection(&self, z: Complex64) -> Option<Complex64> {
        match self {
            Self::SphericalLiouville { beta } => {
                let s = z.norm().powf(2.0 * beta);
                Some(((beta - 1.0) - 2.0 * beta * s / (1.0 + s)) / z)
            }
            Self::EssentialLiouville { order } => {
                let p = *order as f64;
                let w1 = z.powi(-(*order as i32) - 1);
                let a = z.powi(-(*order as i32)).re;
                let log_deriv = -(p + 1.0) / z - p * w1;
                Some(log_deriv + 2.0 * p * w1 * logistic(2.0 * a))
            }
            Self::PowerLawFlat { gamma, coefficients } => Some(gamma / z + holomorphic_derivative(coefficients, z, 1)),
            Self::GridSampled { .. } => None,
        }
    }

    /// Schwarzian `S_λ = ∂Γ_λ/∂z - Γ_λ²/2` for the closed-form families.
    pub fn closed_schwarzian(&self, z: Complex64) -> Option<Complex64> {
        match self {
            // Constant curvature: S_λ is the Schwarzian derivative of the
            // developing map.
            Self::SphericalLiouville { beta } => Some((1.0 - beta * beta) / (2.0 * z * z)),
            Self::EssentialLiouville { order } => {
                let p = *order as f64;
                let n = *order as i32;
                let log_deriv = -(p + 1.0) / z - p * z.powi(-n - 1);
                let d_log_deriv = (p + 1.0) / (z * z) + p * (p + 1.0) * z.powi(-n - 2);
                Some(d_log_deriv - 0.5 * log_deriv * log_deriv)
            }
            Self::PowerLawFlat { gamma, coefficients } => {
                let gamma_conn = gamma / z + holomorphic_derivative(coefficients, z, 1);
                let d_gamma = -gamma / (z * z) + holomorphic_derivative(coefficients, z, 2);
                Some(d_gamma - 0.5 * gamma_conn * gamma_conn)
            }
            Self::GridSampled { .. } => None,
        }
    }

    /// `u(z)` anywhere in the punctured disk covered by the descriptor.
    pub fn log_density(&self, z: Complex64) -> Result<f64> {
        match self {
            Self::GridSampled { u, .. } => Ok(FieldInterpolator::new(u).eval(z)?.re),
            _ => Ok(self.closed_log_density(z).expect("closed form")),
        }
    }
}

/// `d^order/dz^order Σ a_n z^n`.
fn holomorphic_derivative(coefficients: &[f64], z: Complex64, order: u32) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, a) in coefficients.iter().enumerate() {
        let n = n as u32;
        if n < order {
            continue;
        }
        let falling: f64 = (0..order).map(|q| (n - q) as f64).product();
        acc += a * falling * z.powu(n - order);
    }
    acc
}

/// Samples the log-density of `m` on every node of `grid`.
pub fn sample_metric(m: &MetricDescriptor, grid: &PolarGrid) -> Result<Field> {
    match m {
        MetricDescriptor::GridSampled { u, .. } => {
            if u.grid() == grid {
                return Ok(u.clone());
            }
            let interp = FieldInterpolator::new(u);
            let mut values = Vec::with_capacity(grid.len());
            for (_, _, z) in grid.nodes() {
                values.push(interp.eval(z)?.re);
            }
            Field::real(grid.clone(), values)
        }
        _ => {
            let values = grid
                .nodes()
                .map(|(i, _, z)| m.closed_log_density_polar(grid.log_radius(i), z).expect("closed form"))
                .collect();
            Field::real(grid.clone(), values)
        }
    }
}

/// Curvature function `k ≤ 0` of the equation `Δu = k e^{2u}`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurvatureSpec {
    Constant(f64),
    Sampled(Field),
}

impl CurvatureSpec {
    pub fn constant(k: f64) -> Result<Self> {
        if !(k <= 0.0 && k.is_finite()) {
            return Err(Error::Precondition(format!(
                "curvature function must be nonpositive and finite, got {k}"
            )));
        }
        Ok(Self::Constant(k))
    }

    pub fn sampled(k: Field) -> Result<Self> {
        if !k.is_real() {
            return Err(Error::Precondition("curvature field must be real".into()));
        }
        if let Some(pos) = k.values().iter().position(|v| v.re > 0.0) {
            return Err(Error::Precondition(format!(
                "curvature function has a positive entry {} at node {pos}",
                k.values()[pos].re
            )));
        }
        Ok(Self::Sampled(k))
    }

    /// `sup |k|`.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Constant(k) => k.abs(),
            Self::Sampled(f) => f.values().iter().map(|v| v.re.abs()).fold(0.0, f64::max),
        }
    }

    /// `k` at every node of `grid`.
    pub fn values_on(&self, grid: &PolarGrid) -> Result<Vec<f64>> {
        match self {
            Self::Constant(k) => Ok(vec![*k; grid.len()]),
            Self::Sampled(f) => {
                if f.grid() != grid {
                    return Err(Error::Precondition("curvature field lives on a different grid".into()));
                }
                Ok(f.real_values())
            }
        }
    }
}
