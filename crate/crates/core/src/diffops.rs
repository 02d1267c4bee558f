//! Discrete calculus on log-polar grids.
//!
//! Angular derivatives are spectral (per-ring FFT). Radial derivatives are
//! second-order finite differences in `t = log ρ`, centered in the interior
//! and one-sided at the two boundary levels. In these coordinates
//!
//! ```text
//! ∂/∂z = (1/2z) (∂_t − i ∂_θ),        Δ = e^{−2t} (∂_tt + ∂_θθ).
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{sample_metric, Field, FieldInterpolator, MetricDescriptor, PolarGrid};
use crate::spectral::RingFft;

fn require_resolution(grid: &PolarGrid) -> Result<()> {
    if grid.n_radial() < 3 {
        return Err(Error::TooCoarse(format!(
            "radial derivatives need >= 3 levels, got {}",
            grid.n_radial()
        )));
    }
    if grid.n_angular() < 4 {
        return Err(Error::TooCoarse(format!(
            "angular derivatives need >= 4 angles, got {}",
            grid.n_angular()
        )));
    }
    Ok(())
}

/// `∂_t` with second-order stencils.
pub(crate) fn d_t(grid: &PolarGrid, v: &[Complex64]) -> Vec<Complex64> {
    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let inv = 0.5 / grid.log_step();
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    let at = |i: usize, j: usize| v[i * na + j];
    for j in 0..na {
        out[j] = (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j)) * inv;
        for i in 1..nr - 1 {
            out[i * na + j] = (at(i + 1, j) - at(i - 1, j)) * inv;
        }
        let l = nr - 1;
        out[l * na + j] = (3.0 * at(l, j) - 4.0 * at(l - 1, j) + at(l - 2, j)) * inv;
    }
    out
}

/// `∂_tt`: centered in the interior; five-point one-sided (second order)
/// at the boundary levels, falling back to shorter stencils on very coarse
/// grids.
pub(crate) fn d_tt(grid: &PolarGrid, v: &[Complex64]) -> Vec<Complex64> {
    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let h = grid.log_step();
    let inv = 1.0 / (h * h);
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    let at = |i: usize, j: usize| v[i * na + j];
    let stencil: &[f64] = match nr {
        3 => &[1.0, -2.0, 1.0],
        4 => &[2.0, -5.0, 4.0, -1.0],
        _ => &[35.0 / 12.0, -104.0 / 12.0, 114.0 / 12.0, -56.0 / 12.0, 11.0 / 12.0],
    };
    let l = nr - 1;
    for j in 0..na {
        for i in 1..l {
            out[i * na + j] = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) * inv;
        }
        let mut lo = Complex64::new(0.0, 0.0);
        let mut hi = Complex64::new(0.0, 0.0);
        for (a, c) in stencil.iter().enumerate() {
            lo += at(a, j) * *c;
            hi += at(l - a, j) * *c;
        }
        out[j] = lo * inv;
        out[l * na + j] = hi * inv;
    }
    out
}

fn ring_apply(grid: &PolarGrid, v: &[Complex64], op: impl Fn(&RingFft, &mut [Complex64])) -> Vec<Complex64> {
    let na = grid.n_angular();
    let fft = RingFft::new(na);
    let mut out = v.to_vec();
    for ring in out.chunks_mut(na) {
        op(&fft, ring);
    }
    out
}

pub(crate) fn d_theta(grid: &PolarGrid, v: &[Complex64]) -> Vec<Complex64> {
    ring_apply(grid, v, |fft, r| fft.d_theta(r))
}

pub(crate) fn d_theta2(grid: &PolarGrid, v: &[Complex64]) -> Vec<Complex64> {
    ring_apply(grid, v, |fft, r| fft.d_theta2(r))
}

/// Wirtinger derivative `∂f/∂z = (1/2z)(∂_t − i∂_θ) f`.
pub fn wirtinger_dz(f: &Field) -> Result<Field> {
    let grid = f.grid();
    require_resolution(grid)?;
    let dt = d_t(grid, f.values());
    let dth = d_theta(grid, f.values());
    let values = grid
        .nodes()
        .map(|(i, j, z)| {
            let k = grid.index(i, j);
            (dt[k] - Complex64::i() * dth[k]) / (2.0 * z)
        })
        .collect();
    Field::complex(grid.clone(), values)
}

/// `(∂_tt + ∂_θθ) f = |z|² Δf`, the Laplacian in log-polar coordinates.
pub fn log_polar_laplacian(f: &Field) -> Result<Field> {
    let grid = f.grid();
    require_resolution(grid)?;
    let tt = d_tt(grid, f.values());
    let thth = d_theta2(grid, f.values());
    let values = tt.iter().zip(&thth).map(|(a, b)| a + b).collect();
    Field::from_parts(grid.clone(), f.kind(), values)
}

/// `Δf = e^{−2t}(∂_tt + ∂_θθ) f`.
pub fn laplacian(f: &Field) -> Result<Field> {
    let grid = f.grid();
    let scaled = log_polar_laplacian(f)?;
    let values = grid
        .nodes()
        .map(|(i, j, _)| scaled.get(i, j) * (-2.0 * grid.log_radius(i)).exp())
        .collect();
    Field::from_parts(grid.clone(), f.kind(), values)
}

fn closed_field(grid: &PolarGrid, eval: impl Fn(Complex64) -> Option<Complex64>) -> Result<Field> {
    let values = grid
        .nodes()
        .map(|(_, _, z)| eval(z).expect("closed-form descriptor"))
        .collect();
    Field::complex(grid.clone(), values)
}

/// Connection `Γ_λ = 2 ∂u/∂z`.
pub fn connection(m: &MetricDescriptor, grid: &PolarGrid) -> Result<Field> {
    if m.is_closed_form() {
        return closed_field(grid, |z| m.closed_connection(z));
    }
    let u = sample_metric(m, grid)?;
    wirtinger_dz(&u)?.map(|v| 2.0 * v)
}

/// Schwarzian `S_λ = ∂Γ_λ/∂z − Γ_λ²/2`.
pub fn schwarzian(m: &MetricDescriptor, grid: &PolarGrid) -> Result<Field> {
    if m.is_closed_form() {
        return closed_field(grid, |z| m.closed_schwarzian(z));
    }
    let gamma = connection(m, grid)?;
    let d_gamma = wirtinger_dz(&gamma)?;
    let values = d_gamma
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(dg, g)| dg - 0.5 * g * g)
        .collect();
    Field::complex(grid.clone(), values)
}

/// Gaussian curvature `−Δu e^{−2u}` of `e^u|dz|` from the sampled
/// log-density.
pub fn curvature(m: &MetricDescriptor, grid: &PolarGrid) -> Result<Field> {
    let u = sample_metric(m, grid)?;
    let lap = laplacian(&u)?;
    let mut values = Vec::with_capacity(grid.len());
    for (a, b) in lap.values().iter().zip(u.values()) {
        let scale = (-2.0 * b.re).exp();
        let kappa = -a.re * scale;
        if !scale.is_finite() || !kappa.is_finite() {
            return Err(Error::Overflow(format!("e^(-2u) overflows at u = {}", b.re)));
        }
        values.push(kappa);
    }
    Field::real(grid.clone(), values)
}

fn check_cover_order(m_cov: u32, grid: &PolarGrid) -> Result<()> {
    if m_cov == 0 {
        return Err(Error::Precondition("cover order must be >= 1".into()));
    }
    let log_image = grid.inner_radius().ln() * m_cov as f64;
    if log_image < f64::MIN_POSITIVE.ln() {
        return Err(Error::Precondition(format!("image radius ε^{m_cov} underflows")));
    }
    Ok(())
}

/// The pullback `m|z|^{m−1} λ(z^m)|dz|` of a metric under `z ↦ z^m`,
/// sampled on `grid`. The conical order becomes `γ m + m − 1`.
pub fn pullback(m: &MetricDescriptor, m_cov: u32, grid: &PolarGrid) -> Result<MetricDescriptor> {
    check_cover_order(m_cov, grid)?;
    let mf = m_cov as f64;
    let u_star = match m {
        MetricDescriptor::GridSampled { u, .. } => {
            let src = u.grid();
            if grid.inner_radius().powf(mf) < src.inner_radius() * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "image annulus radius {} is below the sampled radius {}",
                    grid.inner_radius().powf(mf),
                    src.inner_radius()
                )));
            }
            let interp = FieldInterpolator::new(u);
            let mut values = Vec::with_capacity(grid.len());
            for (i, _, z) in grid.nodes() {
                let t = grid.log_radius(i);
                values.push(mf.ln() + (mf - 1.0) * t + interp.eval(z.powu(m_cov))?.re);
            }
            Field::real(grid.clone(), values)?
        }
        _ => {
            let values = grid
                .nodes()
                .map(|(i, _, z)| {
                    let t = grid.log_radius(i);
                    let image = m.closed_log_density_polar(mf * t, z.powu(m_cov)).expect("closed form");
                    mf.ln() + (mf - 1.0) * t + image
                })
                .collect();
            Field::real(grid.clone(), values)?
        }
    };
    let gamma_hint = m.conical_order().map(|g| g * mf + (mf - 1.0));
    MetricDescriptor::grid_sampled(u_star, gamma_hint)
}

/// The pullback of a closed-form metric as another closed-form metric:
/// `z^β ↦ z^{mβ}`, `exp(z^{−p}) ↦ exp(z^{−mp})`, and for flat metrics
/// `γ ↦ γm + m − 1` with the harmonic part composed with `z^m`.
pub fn pullback_closed_form(m: &MetricDescriptor, m_cov: u32) -> Option<MetricDescriptor> {
    let mf = m_cov as f64;
    match m {
        MetricDescriptor::SphericalLiouville { beta } => Some(MetricDescriptor::SphericalLiouville { beta: beta * mf }),
        MetricDescriptor::EssentialLiouville { order } => {
            Some(MetricDescriptor::EssentialLiouville { order: order * m_cov })
        }
        MetricDescriptor::PowerLawFlat { gamma, coefficients } => {
            let len = if coefficients.is_empty() {
                1
            } else {
                (coefficients.len() - 1) * m_cov as usize + 1
            };
            let mut spread = vec![0.0; len];
            for (n, a) in coefficients.iter().enumerate() {
                spread[n * m_cov as usize] = *a;
            }
            spread[0] += mf.ln();
            Some(MetricDescriptor::PowerLawFlat {
                gamma: gamma * mf + (mf - 1.0),
                coefficients: spread,
            })
        }
        MetricDescriptor::GridSampled { .. } => None,
    }
}

/// Maximum residuals of the connection and Schwarzian transformation rules
/// under `z ↦ z^m`, each `|lhs − rhs| / max(1, |rhs|)` so that rules stay
/// comparable where the metric blows up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleResiduals {
    pub connection: f64,
    pub schwarzian: f64,
}

impl RuleResiduals {
    pub fn max(&self) -> f64 {
        self.connection.max(self.schwarzian)
    }
}

/// Compares the closed-form connection and Schwarzian of the pulled-back
/// metric against
///
/// ```text
/// Γ*(z) = m Γ(z^m) z^{m−1} + (m−1)/z
/// S*(z) = S(z^m) m² z^{2(m−1)} − (m²−1)/(2z²)
/// ```
///
/// at every node of `grid`.
pub fn check_transformation_rules(m: &MetricDescriptor, m_cov: u32, grid: &PolarGrid) -> Result<RuleResiduals> {
    check_cover_order(m_cov, grid)?;
    let pulled = pullback_closed_form(m, m_cov)
        .ok_or_else(|| Error::Precondition("transformation rules need a closed-form metric".into()))?;
    let mf = m_cov as f64;
    let mut res = RuleResiduals {
        connection: 0.0,
        schwarzian: 0.0,
    };
    for (_, _, z) in grid.nodes() {
        let w = z.powu(m_cov);
        let zm1 = z.powu(m_cov - 1);
        let lhs_g = pulled.closed_connection(z).expect("closed form");
        let rhs_g = mf * m.closed_connection(w).expect("closed form") * zm1 + (mf - 1.0) / z;
        let lhs_s = pulled.closed_schwarzian(z).expect("closed form");
        let rhs_s =
            m.closed_schwarzian(w).expect("closed form") * (mf * mf) * zm1 * zm1 - (mf * mf - 1.0) / (2.0 * z * z);
        res.connection = res.connection.max((lhs_g - rhs_g).norm() / rhs_g.norm().max(1.0));
        res.schwarzian = res.schwarzian.max((lhs_s - rhs_s).norm() / rhs_s.norm().max(1.0));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_grid;
    use proptest::prelude::*;

    fn max_err(f: &Field, exact: impl Fn(Complex64) -> Complex64, interior: bool) -> f64 {
        let g = f.grid();
        g.nodes()
            .filter(|(i, _, _)| !interior || (*i > 0 && *i + 1 < g.n_radial()))
            .map(|(i, j, z)| (f.get(i, j) - exact(z)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn wirtinger_of_re_z_is_one_half() {
        let g = make_grid(0.1, 129, 16).unwrap();
        let f = Field::from_fn_real(&g, |z| z.re).unwrap();
        let d = wirtinger_dz(&f).unwrap();
        assert!(max_err(&d, |_| Complex64::new(0.5, 0.0), false) < 1e-3);
    }

    #[test]
    fn wirtinger_of_log_modulus_is_exact() {
        let g = make_grid(1e-3, 33, 8).unwrap();
        let f = Field::from_fn_real(&g, |z| z.norm().ln()).unwrap();
        let d = wirtinger_dz(&f).unwrap();
        // relative to |1/(2z)| <= 500
        assert!(max_err(&d, |z| 0.5 / z, false) < 1e-10);
    }

    #[test]
    fn wirtinger_of_modulus_squared_is_conjugate() {
        let g = make_grid(0.1, 129, 16).unwrap();
        let f = Field::from_fn_real(&g, |z| z.norm_sqr()).unwrap();
        let d = wirtinger_dz(&f).unwrap();
        assert!(max_err(&d, |z| z.conj(), false) < 1e-3);
    }

    #[test]
    fn laplacian_annihilates_log_modulus() {
        let g = make_grid(0.05, 65, 16).unwrap();
        let f = Field::from_fn_real(&g, |z| 0.7 * z.norm().ln()).unwrap();
        let lap = laplacian(&f).unwrap();
        assert!(max_err(&lap, |_| Complex64::new(0.0, 0.0), false) < 1e-8);
    }

    #[test]
    fn laplacian_of_modulus_squared_is_four() {
        let g = make_grid(0.1, 129, 16).unwrap();
        let f = Field::from_fn_real(&g, |z| z.norm_sqr()).unwrap();
        let lap = laplacian(&f).unwrap();
        assert!(max_err(&lap, |_| Complex64::new(4.0, 0.0), false) < 2e-3);
        assert!(lap.is_real());
    }

    #[test]
    fn laplacian_of_harmonic_polynomial_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [17usize, 33, 65, 129] {
            let g = make_grid(0.1, n, 16).unwrap();
            let f = Field::from_fn_real(&g, |z| z.powu(3).re).unwrap();
            let lap = laplacian(&f).unwrap();
            errs.push(max_err(&lap, |_| Complex64::new(0.0, 0.0), false));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order} from {errs:?}");
        }
        assert!(errs[3] < 1e-2);
    }

    #[test]
    fn derivatives_exact_on_quadratic_in_t_trig_polynomials() {
        let g = make_grid(0.2, 7, 16).unwrap();
        let f = Field::from_fn_real(&g, |z| {
            let t = z.norm().ln();
            let th = z.arg();
            t * t * (2.0 * th).cos() + 3.0 * t * th.sin() - t
        })
        .unwrap();
        let lap = log_polar_laplacian(&f).unwrap();
        let err = max_err(
            &lap,
            |z| {
                let t = z.norm().ln();
                let th = z.arg();
                let v = 2.0 * (2.0 * th).cos() - 4.0 * t * t * (2.0 * th).cos() - 3.0 * t * th.sin();
                Complex64::new(v, 0.0)
            },
            false,
        );
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let g = make_grid(0.5, 2, 4).unwrap();
        let f = Field::real(g.clone(), vec![0.0; g.len()]).unwrap();
        assert!(matches!(wirtinger_dz(&f), Err(Error::TooCoarse(_))));
        assert!(matches!(laplacian(&f), Err(Error::TooCoarse(_))));
    }

    #[test]
    fn spherical_connection_at_one_half() {
        let m = MetricDescriptor::spherical(1.0).unwrap();
        let v = m.closed_connection(Complex64::new(0.5, 0.0)).unwrap();
        assert!((v - Complex64::new(-0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flat_connection_is_gamma_over_z() {
        let g = make_grid(0.01, 9, 8).unwrap();
        let m = MetricDescriptor::flat(0.35, vec![]).unwrap();
        let c = connection(&m, &g).unwrap();
        assert!(max_err(&c, |z| 0.35 / z, false) < 1e-13);
    }

    #[test]
    fn spherical_connection_limit_vanishes_for_beta_one() {
        let m = MetricDescriptor::spherical(1.0).unwrap();
        let z = Complex64::from_polar(1e-8, 0.4);
        assert!((z * m.closed_connection(z).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn schwarzian_examples() {
        let g = make_grid(0.05, 9, 8).unwrap();
        let s1 = schwarzian(&MetricDescriptor::spherical(1.0).unwrap(), &g).unwrap();
        assert!(s1.values().iter().all(|v| v.norm() == 0.0));
        let half = schwarzian(&MetricDescriptor::spherical(0.5).unwrap(), &g).unwrap();
        assert!(max_err(&half, |z| Complex64::new(0.375, 0.0) / (z * z), false) < 1e-9);
        let flat = MetricDescriptor::flat(1.0, vec![]).unwrap();
        for (_, _, z) in g.nodes() {
            let v = z * z * flat.closed_schwarzian(z).unwrap();
            assert!((v - Complex64::new(-1.5, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn curvature_of_spherical_metrics_is_four() {
        for &beta in &[0.5, 1.0, 2.0] {
            let g = make_grid(0.05, 129, 32).unwrap();
            let m = MetricDescriptor::spherical(beta).unwrap();
            let k = curvature(&m, &g).unwrap();
            let err = max_err(&k, |_| Complex64::new(4.0, 0.0), true);
            assert!(err < 5e-3, "β = {beta}: {err}");
        }
    }

    #[test]
    fn curvature_of_flat_metric_vanishes() {
        let m = MetricDescriptor::flat(0.5, vec![0.1, 0.2, -0.1]).unwrap();
        let errs: Vec<f64> = [65usize, 129]
            .iter()
            .map(|&n| {
                let g = make_grid(0.05, n, 16).unwrap();
                let k = curvature(&m, &g).unwrap();
                max_err(&k, |_| Complex64::new(0.0, 0.0), true)
            })
            .collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[1] < 5e-3, "{errs:?}");
    }

    #[test]
    fn curvature_guards_overflow() {
        let g = make_grid(0.5, 5, 4).unwrap();
        let u = Field::from_fn_real(&g, |z| -400.0 + z.re).unwrap();
        let m = MetricDescriptor::grid_sampled(u, None).unwrap();
        assert!(matches!(curvature(&m, &g), Err(Error::Overflow(_))));
    }

    #[test]
    fn grid_connection_and_schwarzian_match_closed_forms() {
        let m = MetricDescriptor::spherical(1.5).unwrap();
        let mut errs = Vec::new();
        for n in [33usize, 65, 129] {
            let g = make_grid(0.1, n, 32).unwrap();
            let sampled = MetricDescriptor::grid_sampled(sample_metric(&m, &g).unwrap(), None).unwrap();
            let cg = connection(&sampled, &g).unwrap();
            let cc = connection(&m, &g).unwrap();
            let sg = schwarzian(&sampled, &g).unwrap();
            let sc = schwarzian(&m, &g).unwrap();
            let mut e_conn: f64 = 0.0;
            let mut e_schw: f64 = 0.0;
            for (i, j, z) in g.nodes() {
                e_conn = e_conn.max((z * (cg.get(i, j) - cc.get(i, j))).norm());
                e_schw = e_schw.max((z * z * (sg.get(i, j) - sc.get(i, j))).norm());
            }
            errs.push((e_conn, e_schw));
        }
        for w in errs.windows(2) {
            assert!((w[0].0 / w[1].0).log2() > 1.8, "{errs:?}");
            assert!((w[0].1 / w[1].1).log2() > 1.5, "{errs:?}");
        }
        assert!(errs[2].0 < 1e-3 && errs[2].1 < 1e-2, "{errs:?}");
    }

    #[test]
    fn pullback_with_identity_cover_is_identity() {
        let g = make_grid(0.05, 9, 8).unwrap();
        let m = MetricDescriptor::spherical(0.7).unwrap();
        let p = pullback(&m, 1, &g).unwrap();
        assert_eq!(sample_metric(&p, &g).unwrap(), sample_metric(&m, &g).unwrap());
    }

    #[test]
    fn pullback_raises_conical_order() {
        let g = make_grid(0.05, 9, 8).unwrap();
        let p = pullback(&MetricDescriptor::spherical(0.5).unwrap(), 2, &g).unwrap();
        assert_eq!(p.conical_order(), Some(0.0));
        let p = pullback(&MetricDescriptor::flat(0.0, vec![]).unwrap(), 3, &g).unwrap();
        assert_eq!(p.conical_order(), Some(2.0));
    }

    #[test]
    fn pullback_of_spherical_is_spherical_with_scaled_exponent() {
        let g = make_grid(0.05, 9, 8).unwrap();
        let p = pullback(&MetricDescriptor::spherical(0.5).unwrap(), 3, &g).unwrap();
        let direct = sample_metric(&MetricDescriptor::spherical(1.5).unwrap(), &g).unwrap();
        assert!(sample_metric(&p, &g).unwrap().max_abs_diff(&direct) < 1e-13);
    }

    #[test]
    fn pullback_of_grid_sampled_metric() {
        let src = make_grid(1e-4, 257, 32).unwrap();
        let m = MetricDescriptor::flat(-0.5, vec![0.2, 0.3]).unwrap();
        let sampled = MetricDescriptor::grid_sampled(sample_metric(&m, &src).unwrap(), Some(-0.5)).unwrap();
        let g = make_grid(0.05, 17, 16).unwrap();
        let p = pullback(&sampled, 2, &g).unwrap();
        assert_eq!(p.conical_order(), Some(0.0));
        let exact = sample_metric(&pullback(&m, 2, &g).unwrap(), &g).unwrap();
        assert!(sample_metric(&p, &g).unwrap().max_abs_diff(&exact) < 1e-6);
        // image annulus must be covered by the samples
        let too_small = make_grid(1e-3, 17, 16).unwrap();
        assert!(pullback(&sampled, 2, &too_small).is_err());
    }

    #[test]
    fn pullback_rejects_underflowing_image() {
        let g = make_grid(1e-200, 9, 8).unwrap();
        let m = MetricDescriptor::spherical(1.0).unwrap();
        assert!(pullback(&m, 2, &g).is_err());
        assert!(pullback(&m, 0, &g).is_err());
    }

    #[test]
    fn transformation_rule_examples() {
        let g = make_grid(0.1, 17, 16).unwrap();
        let r = check_transformation_rules(&MetricDescriptor::spherical(1.0).unwrap(), 2, &g).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        let r = check_transformation_rules(&MetricDescriptor::flat(0.0, vec![]).unwrap(), 2, &g).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        let r = check_transformation_rules(&MetricDescriptor::flat(0.4, vec![0.5, -1.0, 2.0]).unwrap(), 1, &g).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn transformation_rules_hold_for_essential_family() {
        // S* grows like |z|^{-2m-2}; compare relative to that scale.
        let g = make_grid(0.2, 9, 16).unwrap();
        let m = MetricDescriptor::essential(1).unwrap();
        for m_cov in 1..=3u32 {
            let r = check_transformation_rules(&m, m_cov, &g).unwrap();
            let scale = 0.2f64.powi(-2 * m_cov as i32 - 2);
            assert!(r.connection < 1e-10 && r.schwarzian / scale < 1e-14, "{m_cov}: {r:?}");
        }
    }

    #[test]
    fn transformation_rules_need_closed_form() {
        let g = make_grid(0.1, 5, 8).unwrap();
        let u = Field::real(g.clone(), vec![0.0; g.len()]).unwrap();
        let m = MetricDescriptor::grid_sampled(u, None).unwrap();
        assert!(check_transformation_rules(&m, 2, &g).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn transformation_rules_hold_for_closed_forms(
            beta in 0.05f64..3.0,
            gamma in -0.95f64..3.0,
            coeffs in proptest::collection::vec(-1.0f64..1.0, 0..4),
            m_cov in 1u32..=3,
        ) {
            let g = make_grid(0.2, 9, 16).unwrap();
            for m in [
                MetricDescriptor::spherical(beta).unwrap(),
                MetricDescriptor::flat(gamma, coeffs.clone()).unwrap(),
            ] {
                let r = check_transformation_rules(&m, m_cov, &g).unwrap();
                prop_assert!(r.max() <= 1e-10, "{:?} m={} {:?}", m, m_cov, r);
            }
        }

        #[test]
        fn spherical_schwarzian_is_constant_times_z_minus_two(beta in 0.05f64..4.0) {
            let g = make_grid(0.01, 9, 8).unwrap();
            let m = MetricDescriptor::spherical(beta).unwrap();
            let s = schwarzian(&m, &g).unwrap();
            let target = (1.0 - beta * beta) / 2.0;
            let gamma = beta - 1.0;
            prop_assert!((target + gamma * (2.0 + gamma) / 2.0).abs() < 1e-12);
            for (i, j, z) in g.nodes() {
                prop_assert!((z * z * s.get(i, j) - target).norm() < 1e-12);
            }
        }
    }
}
