use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::grid::PolarGrid;
use crate::error::{Error, Result};
use crate::quadrature::lagrange4;
use crate::spectral::RingFft;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

/// One scalar per grid node, stored radial-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: PolarGrid,
    kind: FieldKind,
    values: Vec<Complex64>,
}

impl Field {
    pub fn real(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        Self::build(
            grid,
            FieldKind::Real,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn complex(grid: PolarGrid, values: Vec<Complex64>) -> Result<Self> {
        Self::build(grid, FieldKind::Complex, values)
    }

    fn build(grid: PolarGrid, kind: FieldKind, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Precondition(format!("non-finite field value at node {pos}")));
        }
        Ok(Self { grid, kind, values })
    }

    /// Samples a real function of `z` at every node.
    pub fn from_fn_real(grid: &PolarGrid, f: impl Fn(Complex64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|(_, _, z)| f(z)).collect();
        Self::real(grid.clone(), values)
    }

    /// Samples a complex function of `z` at every node.
    pub fn from_fn(grid: &PolarGrid, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = grid.nodes().map(|(_, _, z)| f(z)).collect();
        Self::complex(grid.clone(), values)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_real(&self) -> bool {
        self.kind == FieldKind::Real
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.index(i, j)]
    }

    /// Values on radial level `i`.
    pub fn ring(&self, i: usize) -> &[Complex64] {
        let n = self.grid.n_angular();
        &self.values[i * n..(i + 1) * n]
    }

    /// Mean of the real part over radial level `i`.
    pub fn ring_mean(&self, i: usize) -> f64 {
        let ring = self.ring(i);
        ring.iter().map(|v| v.re).sum::<f64>() / ring.len() as f64
    }

    /// Applies `f` node by node, keeping the kind.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::build(self.grid.clone(), self.kind, values)
    }

    pub(crate) fn from_parts(grid: PolarGrid, kind: FieldKind, values: Vec<Complex64>) -> Result<Self> {
        let values = if kind == FieldKind::Real {
            values.into_iter().map(|v| Complex64::new(v.re, 0.0)).collect()
        } else {
            values
        };
        Self::build(grid, kind, values)
    }

    /// Maximum of `|self - other|` over all nodes.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Writes `rho,theta,re,im` rows in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rho,theta,re,im")?;
        for (i, j, _) in self.grid.nodes() {
            let v = self.get(i, j);
            writeln!(out, "{},{},{},{}", self.grid.radius(i), self.grid.angle(j), v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the CSV layout produced by [`Field::write_csv`]. The grid is
    /// reconstructed from the radii and checked for log-uniform spacing; the
    /// field is tagged real when every `im` entry is zero.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        if header.trim() != "rho,theta,re,im" {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = [0.0; 4];
            let mut cols = line.split(',');
            for slot in row.iter_mut() {
                let tok = cols
                    .next()
                    .ok_or_else(|| Error::Parse(format!("row {}: too few columns", n + 2)))?;
                *slot = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number `{tok}`", n + 2)))?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("field file has no rows".into()));
        }
        let rho0 = rows[0][0];
        let n_angular = rows.iter().take_while(|r| r[0] == rho0).count();
        if !rows.len().is_multiple_of(n_angular) {
            return Err(Error::Parse("row count is not a multiple of the ring size".into()));
        }
        let n_radial = rows.len() / n_angular;
        let grid = PolarGrid::new(rho0, n_radial, n_angular)?;
        for (i, j, _) in grid.nodes() {
            let r = &rows[grid.index(i, j)];
            let rel = (r[0] - grid.radius(i)).abs() / grid.radius(i);
            if rel > 1e-9 || (r[1] - grid.angle(j)).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "node ({i}, {j}) does not match a log-uniform grid"
                )));
            }
        }
        let values: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        let kind = if values.iter().all(|v| v.im == 0.0) {
            FieldKind::Real
        } else {
            FieldKind::Complex
        };
        Self::build(grid, kind, values)
    }
}

/// Evaluates a field between nodes: trigonometric interpolation in θ on each
/// ring, four-point Lagrange interpolation in `t = log ρ` across rings.
pub(crate) struct FieldInterpolator<'a> {
    field: &'a Field,
    spectra: Vec<Vec<Complex64>>,
}

impl<'a> FieldInterpolator<'a> {
    pub(crate) fn new(field: &'a Field) -> Self {
        let grid = field.grid();
        let fft = RingFft::new(grid.n_angular());
        let scale = 1.0 / grid.n_angular() as f64;
        let spectra = (0..grid.n_radial())
            .map(|i| {
                let mut c = field.ring(i).to_vec();
                fft.forward(&mut c);
                c.iter_mut().for_each(|x| *x *= scale);
                c
            })
            .collect();
        Self { field, spectra }
    }

    fn ring_value(&self, i: usize, theta: f64) -> Complex64 {
        let n = self.field.grid().n_angular();
        let c = &self.spectra[i];
        let mut acc = c[0];
        for k in 1..n / 2 {
            let e = Complex64::from_polar(1.0, k as f64 * theta);
            acc += c[k] * e + c[n - k] * e.conj();
        }
        // Nyquist coefficient split evenly between ±n/2.
        acc += c[n / 2] * (0.5 * n as f64 * theta).cos();
        acc
    }

    pub(crate) fn eval(&self, z: Complex64) -> Result<Complex64> {
        let grid = self.field.grid();
        let rho = z.norm();
        if !grid.contains_radius(rho) {
            return Err(Error::OutOfDomain(format!("{z}")));
        }
        let theta = z.arg();
        let nr = grid.n_radial();
        let s = ((rho.ln() - grid.log_radius(0)) / grid.log_step()).clamp(0.0, (nr - 1) as f64);
        let v = if nr < 4 {
            let i = (s.floor() as usize).min(nr - 2);
            let frac = s - i as f64;
            self.ring_value(i, theta) * (1.0 - frac) + self.ring_value(i + 1, theta) * frac
        } else {
            let base = (s.floor() as isize - 1).clamp(0, nr as isize - 4) as usize;
            let w = lagrange4(s - base as f64);
            (0..4).map(|a| self.ring_value(base + a, theta) * w[a]).sum()
        };
        Ok(if self.field.is_real() {
            Complex64::new(v.re, 0.0)
        } else {
            v
        })
    }
}
