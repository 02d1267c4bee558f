use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Log-radial by angular discretization of the annulus `ε ≤ |z| ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarGrid {
    inner_radius: f64,
    n_radial: usize,
    n_angular: usize,
}

/// Builds a grid with `n_radial` log-uniform levels and `n_angular` angles.
pub fn make_grid(inner_radius: f64, n_radial: usize, n_angular: usize) -> Result<PolarGrid> {
    PolarGrid::new(inner_radius, n_radial, n_angular)
}

impl PolarGrid {
    pub fn new(inner_radius: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        if !(inner_radius > 0.0 && inner_radius < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "inner radius must lie in (0, 1), got {inner_radius}"
            )));
        }
        if n_radial < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 radial levels, got {n_radial}"
            )));
        }
        if n_angular < 4 || !n_angular.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "angular count must be a power of two >= 4, got {n_angular}"
            )));
        }
        Ok(Self {
            inner_radius,
            n_radial,
            n_angular,
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing `h` of the levels in `t = log ρ`.
    pub fn log_step(&self) -> f64 {
        -self.inner_radius.ln() / (self.n_radial - 1) as f64
    }

    pub fn angular_step(&self) -> f64 {
        2.0 * PI / self.n_angular as f64
    }

    /// `t_i = log ρ_i`; the last level is exactly 0.
    pub fn log_radius(&self, i: usize) -> f64 {
        let last = self.n_radial - 1;
        self.inner_radius.ln() * (last - i) as f64 / last as f64
    }

    /// `ρ_i`; the first and last levels are exactly `ε` and `1`.
    pub fn radius(&self, i: usize) -> f64 {
        if i == 0 {
            self.inner_radius
        } else if i == self.n_radial - 1 {
            1.0
        } else {
            self.log_radius(i).exp()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_radial).map(|i| self.radius(i)).collect()
    }

    pub fn angle(&self, j: usize) -> f64 {
        self.angular_step() * j as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_angular + j
    }

    /// Complex coordinate of node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.radius(i), self.angle(j))
    }

    /// Iterates `(i, j, z)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n_radial).flat_map(move |i| (0..self.n_angular).map(move |j| (i, j, self.node(i, j))))
    }

    /// Exact area of the polar cell around level `i` (half cells on the two
    /// boundary levels), for one angular sector.
    pub fn cell_area(&self, i: usize) -> f64 {
        let h = self.log_step();
        let t = self.log_radius(i);
        let lo = if i == 0 { t } else { t - 0.5 * h };
        let hi = if i == self.n_radial - 1 { t } else { t + 0.5 * h };
        0.5 * self.angular_step() * ((2.0 * hi).exp() - (2.0 * lo).exp())
    }

    /// Index of the level whose `t` is closest to `log rho`.
    pub fn nearest_level(&self, rho: f64) -> usize {
        let t0 = self.inner_radius.ln();
        let s = (rho.ln() - t0) / self.log_step();
        s.round().clamp(0.0, (self.n_radial - 1) as f64) as usize
    }

    /// True when `rho` lies in `[ε, 1]` up to rounding.
    pub fn contains_radius(&self, rho: f64) -> bool {
        let tol = 1e-12;
        rho >= self.inner_radius * (1.0 - tol) && rho <= 1.0 + tol
    }
}
