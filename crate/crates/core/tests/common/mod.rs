//! Helpers shared by the integration tests.

#![allow(dead_code)]

use lcris_core::agent::Mlp;

/// Central finite-difference gradient of `f` with respect to every parameter.
pub fn numeric_grad(net: &Mlp, h: f64, mut f: impl FnMut(&Mlp) -> f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let up = f(&probe);
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let down = f(&probe);
        p[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest relative error between two gradients. Components far below the
/// gradient's overall scale are compared against that scale instead of
/// their own magnitude, where finite differences only resolve rounding.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-3 * scale;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Pearson χ² statistic of observed counts against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}
