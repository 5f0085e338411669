//! Filon-type trapezoid rule for integrands of the form `g(x) e^{iκx}` where
//! `g` is slowly varying and `κ` may be large.
//!
//! `g` is interpolated linearly on each cell and the product with the
//! exponential is integrated exactly. For `κ → 0` the rule reduces to the
//! ordinary composite trapezoid rule. The error depends on the curvature of
//! `g` only, not on `κ`.

use num_complex::Complex64;

/// Below this |θ| the closed forms lose digits to cancellation.
const SERIES_THRESHOLD: f64 = 1.0;
const SERIES_TERMS: usize = 22;

/// Re-anchor the phase recurrence with an exact exponential this often.
const ANCHOR_INTERVAL: usize = 32;

/// Weights `(w0, w1)` such that
/// `∫₀¹ [(1-τ) g0 + τ g1] e^{iθτ} dτ = w0 g0 + w1 g1`.
pub fn linear_phase_weights(theta: f64) -> (Complex64, Complex64) {
    if theta.abs() < SERIES_THRESHOLD {
        // w0 = Σ (iθ)^n / (n! (n+1)(n+2)), w1 = Σ (iθ)^n / (n! (n+2))
        let it = Complex64::new(0.0, theta);
        let mut power = Complex64::new(1.0, 0.0);
        let mut w0 = Complex64::new(0.0, 0.0);
        let mut w1 = Complex64::new(0.0, 0.0);
        for n in 0..SERIES_TERMS {
            let nf = n as f64;
            w0 += power / ((nf + 1.0) * (nf + 2.0));
            w1 += power / (nf + 2.0);
            power = power * it / (nf + 1.0);
        }
        (w0, w1)
    } else {
        let e = Complex64::cis(theta);
        let it = Complex64::new(0.0, theta);
        let full = (e - 1.0) / it;
        let ramp = e / it + (e - 1.0) / (theta * theta);
        (full - ramp, ramp)
    }
}

/// One cell `[p, q]` with end values `gp`, `gq`.
#[inline]
pub fn cell(p: f64, q: f64, gp: Complex64, gq: Complex64, kappa: f64) -> Complex64 {
    let h = q - p;
    let (w0, w1) = linear_phase_weights(kappa * h);
    Complex64::cis(kappa * p) * (w0 * gp + w1 * gq) * h
}

/// Rule over arbitrary increasing nodes.
pub fn integrate(nodes: &[f64], slow: &[Complex64], kappa: f64) -> Complex64 {
    debug_assert_eq!(nodes.len(), slow.len());
    nodes
        .windows(2)
        .zip(slow.windows(2))
        .map(|(x, g)| cell(x[0], x[1], g[0], g[1], kappa))
        .sum()
}

/// Rule over uniformly spaced nodes with spacing `step`.
///
/// All cells share one pair of weights, so the sum collapses to a single
/// pass `F = Σ e^{iκx_k} g_k` plus end corrections. Exponentials advance
/// by recurrence and are recomputed exactly every few nodes.
pub fn integrate_uniform(nodes: &[f64], slow: &[Complex64], step: f64, kappa: f64) -> Complex64 {
    let m = nodes.len();
    debug_assert_eq!(m, slow.len());
    if m < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let theta = kappa * step;
    let (w0, w1) = linear_phase_weights(theta);
    let advance = Complex64::cis(theta);

    let mut total = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    for (k, (&x, &g)) in nodes.iter().zip(slow).enumerate() {
        if k % ANCHOR_INTERVAL == 0 {
            phase = Complex64::cis(kappa * x);
        }
        total += phase * g;
        phase *= advance;
    }
    let first = Complex64::cis(kappa * nodes[0]) * slow[0];
    let last = Complex64::cis(kappa * nodes[m - 1]) * slow[m - 1];
    (w0 * (total - last) + w1 * advance.conj() * (total - first)) * step
}
