//! Per-ring FFT helpers shared by the differentiation, potential and
//! solver code. Transforms are unnormalized in the forward direction; the
//! inverse divides by `n`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct RingFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RingFft {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    /// Signed wavenumber of FFT bin `j`. The Nyquist bin maps to `+n/2`.
    pub(crate) fn wavenumber(&self, j: usize) -> f64 {
        if j <= self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        }
    }

    /// In-place spectral `∂_θ`. The Nyquist mode is dropped.
    pub(crate) fn d_theta(&self, data: &mut [Complex64]) {
        self.forward(data);
        for (j, c) in data.iter_mut().enumerate() {
            if 2 * j == self.n {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.wavenumber(j));
            }
        }
        self.inverse(data);
    }

    /// In-place spectral `∂_θθ`.
    pub(crate) fn d_theta2(&self, data: &mut [Complex64]) {
        self.forward(data);
        for (j, c) in data.iter_mut().enumerate() {
            let k = self.wavenumber(j);
            *c *= -k * k;
        }
        self.inverse(data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivatives_of_trig_polynomial() {
        let n = 16;
        let fft = RingFft::new(n);
        let th: Vec<f64> = (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
            .collect();
        let mut d: Vec<Complex64> = th.iter().map(|t| Complex64::new((3.0 * t).sin(), 0.0)).collect();
        let mut d2 = d.clone();
        fft.d_theta(&mut d);
        fft.d_theta2(&mut d2);
        for (j, t) in th.iter().enumerate() {
            assert!((d[j].re - 3.0 * (3.0 * t).cos()).abs() < 1e-13);
            assert!((d2[j].re + 9.0 * (3.0 * t).sin()).abs() < 1e-12);
        }
    }
}
