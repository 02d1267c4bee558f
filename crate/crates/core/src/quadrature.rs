//! Small quadrature and interpolation rules on uniform lattices.

/// Four-point Lagrange weights for evaluating at fractional position `s`
/// relative to nodes `base..base+4` on a unit-spaced lattice.
pub(crate) fn lagrange4(s: f64) -> [f64; 4] {
    let x = [0.0, 1.0, 2.0, 3.0];
    let mut w = [1.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            if a != b {
                w[a] *= (s - x[b]) / (x[a] - x[b]);
            }
        }
    }
    w
}

/// Ratio of the innermost block sum to the next block sum of per-level
/// contributions `c` (ordered from the inner boundary outward). A ratio
/// `>= 1` means the integral does not settle as the inner radius shrinks.
pub(crate) fn inner_block_ratio(c: &[f64]) -> f64 {
    let block = ((c.len().saturating_sub(1)) / 8).max(1);
    if c.len() < 2 * block {
        return 0.0;
    }
    let b0: f64 = c[..block].iter().sum();
    let b1: f64 = c[block..2 * block].iter().sum();
    if b1 == 0.0 {
        if b0 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        b0 / b1
    }
}

/// `∫_lo^hi s^k e^{cs} ds` for `c >= 0` by its power series, which has only
/// positive terms.
fn exp_moment(k: u32, c: f64, lo: f64, hi: f64) -> f64 {
    let mut sum = 0.0;
    let mut coef = 1.0;
    for m in 0..2000u32 {
        let p = (k + m + 1) as i32;
        let term = coef * (hi.powi(p) - lo.powi(p)) / p as f64;
        sum += term;
        if m > c as u32 + 2 && term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        coef *= c / (m + 1) as f64;
    }
    sum
}

/// Product-integration weights for `∫ e^{a t} g(t) dt` over `n` nodes
/// `t0 + i h`, with `g` replaced by its piecewise quadratic interpolant.
/// Exact for quadratic `g`; requires `a >= 0`.
pub(crate) fn exp_weighted_weights(n: usize, t0: f64, h: f64, a: f64) -> Vec<f64> {
    assert!(a >= 0.0);
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let c = a * h;
    let add_panel = |base: usize, lo: f64, hi: f64, w: &mut Vec<f64>| {
        let scale = h * (a * (t0 + base as f64 * h)).exp();
        let m0 = exp_moment(0, c, lo, hi);
        let m1 = exp_moment(1, c, lo, hi);
        let m2 = exp_moment(2, c, lo, hi);
        w[base] += scale * 0.5 * (m2 - 3.0 * m1 + 2.0 * m0);
        w[base + 1] += scale * (2.0 * m1 - m2);
        w[base + 2] += scale * 0.5 * (m2 - m1);
    };
    if n == 2 {
        let scale = h * (a * t0).exp();
        let m0 = exp_moment(0, c, 0.0, 1.0);
        let m1 = exp_moment(1, c, 0.0, 1.0);
        w[0] = scale * (m0 - m1);
        w[1] = scale * m1;
        return w;
    }
    let mut b = 0;
    while b + 2 < n {
        add_panel(b, 0.0, 2.0, &mut w);
        b += 2;
    }
    if b + 1 == n - 1 {
        add_panel(n - 3, 1.0, 2.0, &mut w);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_cubic() {
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let w = lagrange4(1.3);
        let v: f64 = (0..4).map(|a| w[a] * f(a as f64)).sum();
        assert!((v - f(1.3)).abs() < 1e-13);
    }

    #[test]
    fn block_ratio_detects_flat_profiles() {
        let decaying: Vec<f64> = (0..33).map(|i| (0.1 * i as f64).exp()).collect();
        assert!(inner_block_ratio(&decaying) < 0.9);
        assert!(inner_block_ratio(&[1.0; 33]) >= 1.0);
        assert_eq!(inner_block_ratio(&[0.0; 9]), 0.0);
    }

    #[test]
    fn exp_weights_integrate_quadratics_exactly() {
        for n in [2usize, 3, 4, 9, 10] {
            let (t0, h) = (-3.0, 3.0 / (n - 1) as f64);
            let w = exp_weighted_weights(n, t0, h, 2.0);
            let total: f64 = w.iter().sum();
            assert!((total - (1.0 - (-6.0f64).exp()) / 2.0).abs() < 1e-14);
            if n >= 3 {
                // ∫ t e^{2t} dt = e^{2t}(2t − 1)/4
                let f = |t: f64| (2.0 * t).exp() * (2.0 * t - 1.0) / 4.0;
                let s: f64 = w.iter().enumerate().map(|(i, wi)| wi * (t0 + i as f64 * h)).sum();
                assert!((s - (f(0.0) - f(t0))).abs() < 1e-13, "{n}");
            }
        }
        let w = exp_weighted_weights(3, -20.0, 10.0, 2.0);
        assert!((w.iter().sum::<f64>() - 0.5).abs() < 1e-14);
    }
}
