//! Gaussian quadrature rules and one-dimensional line-integral helpers.
//!
//! The angular direction needs Gauss–Jacobi rules because the weighted norms
//! carry endpoint factors like `(sin 2β)^{-σ}` that a uniform grid cannot
//! resolve.  Nodes and weights come from the Golub–Welsch eigenvalue method
//! applied to the Jacobi three-term recurrence.  The radial and Cartesian
//! line integrals use composite Gauss–Legendre panels in log space so that
//! power-law integrands spanning hundreds of octaves stay cheap.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Apply the rule to a function of the node coordinate.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Jacobi rule on `[-1, 1]` for the weight `(1-x)^a (1+x)^b`.
///
/// Requires `a, b > -1` (integrability of the weight).  The rule is exact for
/// polynomials of degree `2n - 1` against that weight.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<QuadRule> {
    if n == 0 {
        return Err(Error::Parameter("quadrature order must be positive".into()));
    }
    if a <= -1.0 || b <= -1.0 {
        return Err(Error::Parameter(format!(
            "Jacobi exponents must exceed -1, got ({a}, {b})"
        )));
    }

    // Zeroth moment of the weight: 2^{a+b+1} B(a+1, b+1).
    let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp();

    // Three-term recurrence coefficients of the monic Jacobi polynomials.
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0);
        diag[k] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / denom
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let den = (2.0 * k1 + a + b).powi(2) * (2.0 * k1 + a + b + 1.0)
                * (2.0 * k1 + a + b - 1.0);
            off[k] = (num / den).sqrt();
        }
    }

    // Symmetric tridiagonal eigenproblem (Golub–Welsch).
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = diag[k];
        if k + 1 < n {
            m[(k, k + 1)] = off[k];
            m[(k + 1, k)] = off[k];
        }
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let x = eig.eigenvalues[j];
            let v0 = eig.eigenvectors[(0, j)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    Ok(QuadRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<QuadRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Gauss–Jacobi rule mapped to `[lo, hi]` with the weight
/// `(hi - t)^{exp_hi} (t - lo)^{exp_lo}` folded into the weights.
///
/// `rule.integrate(g)` then approximates `∫ (hi-t)^{exp_hi} (t-lo)^{exp_lo} g(t) dt`.
pub fn gauss_jacobi_on(n: usize, lo: f64, hi: f64, exp_hi: f64, exp_lo: f64) -> Result<QuadRule> {
    if !(hi > lo) {
        return Err(Error::Parameter(format!(
            "empty quadrature interval [{lo}, {hi}]"
        )));
    }
    let base = gauss_jacobi(n, exp_hi, exp_lo)?;
    let half = 0.5 * (hi - lo);
    let scale = half.powf(exp_hi + exp_lo + 1.0);
    Ok(QuadRule {
        nodes: base.nodes.iter().map(|&x| lo + half * (x + 1.0)).collect(),
        weights: base.weights.iter().map(|&w| w * scale).collect(),
    })
}

/// Gauss–Legendre rule mapped to `[lo, hi]` (plain `dt` measure).
pub fn gauss_legendre_on(n: usize, lo: f64, hi: f64) -> Result<QuadRule> {
    gauss_jacobi_on(n, lo, hi, 0.0, 0.0)
}

/// Natural-log width of one composite panel used by the line integrators.
/// Gauss–Legendre with [`PANEL_ORDER`] nodes resolves `e^{ct}` on a panel of
/// width `w` to near machine precision for `|c| w ≲ 12`; the integrands here
/// are products of powers with exponents of order one.
const PANEL_WIDTH: f64 = 6.0;
const PANEL_ORDER: usize = 16;
/// Order of the Gauss–Jacobi rule absorbing the `z^{sing}` endpoint factor.
const ENDPOINT_ORDER: usize = 48;

fn panel_rule() -> &'static QuadRule {
    use std::sync::OnceLock;
    static RULE: OnceLock<QuadRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER).expect("static rule"))
}

/// Composite integral of `f` over `[lo, hi]` with panels uniform in `log t`.
///
/// Requires `0 < lo < hi`.  `breaks` lists interior scale breaks (points where
/// the integrand changes power-law behaviour); panel boundaries are snapped to
/// them so each panel sees a single analytic regime.
pub fn integrate_log_panels<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    if !(hi > lo) || lo <= 0.0 {
        return 0.0;
    }
    let rule = panel_rule();
    let mut cuts: Vec<f64> = vec![lo.ln(), hi.ln()];
    for &b in breaks {
        if b > lo && b < hi {
            cuts.push(b.ln());
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        if t1 - t0 < 1e-300 {
            continue;
        }
        let n_panels = ((t1 - t0) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / n_panels as f64;
        for p in 0..n_panels {
            let a = t0 + p as f64 * dt;
            let half = 0.5 * dt;
            let mid = a + half;
            // Substitution t = ln z: ∫ f(z) dz = ∫ f(e^t) e^t dt.
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let t = mid + half * x;
                let z = t.exp();
                total += w * half * f(z) * z;
            }
        }
    }
    total
}

/// `∫_0^x f(z) dz` for an integrand behaving like `z^{sing}` near `z = 0`
/// (with `sing > -1`) and smooth power-law behaviour away from the listed
/// scale breaks.
///
/// The leading segment up to the first break uses a Gauss–Jacobi rule with
/// the endpoint exponent `sing`; the remainder uses log-spaced panels.
pub fn integrate_zero_to<F: Fn(f64) -> f64>(
    f: &F,
    x: f64,
    sing: f64,
    breaks: &[f64],
) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if sing <= -1.0 {
        return Err(Error::DivergentIntegral(format!(
            "endpoint exponent {sing} is not integrable at 0"
        )));
    }
    let mut first = x;
    for &b in breaks {
        if b > 0.0 && b < first {
            first = b;
        }
    }
    // Endpoint segment: fold out the z^{sing} factor with a Gauss–Jacobi
    // rule.  The rule is applied on [0, first·2^{-24}] rather than all of
    // [0, first]: integrands in play may carry a full branch series in
    // fractional powers of z (not just the leading z^{sing}), which the
    // Jacobi rule resolves only algebraically; shrinking its segment makes
    // that residual error negligible while the log panels cover the rest.
    let s0 = first * 2f64.powi(-24);
    let rule = gauss_jacobi_on(ENDPOINT_ORDER, 0.0, s0, 0.0, sing)?;
    let mut total = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        total += w * f(z) * z.powf(-sing);
    }
    total += integrate_log_panels(f, s0, x, breaks);
    Ok(total)
}

/// `∫_0^∞ f(z) dz` for an integrand with `z^{sing}` behaviour at 0 and
/// power-law decay at infinity.  The tail is accumulated panel by panel in
/// log space until three consecutive panels are negligible relative to the
/// running total; failure to settle by `z = e^600` reports divergence.
pub fn integrate_zero_to_inf<F: Fn(f64) -> f64>(
    f: &F,
    sing: f64,
    breaks: &[f64],
) -> Result<f64> {
    let start = breaks
        .iter()
        .copied()
        .filter(|&b| b > 0.0)
        .fold(f64::INFINITY, f64::min);
    let start = if start.is_finite() { start.max(1e-300) } else { 1.0 };
    let mut total = integrate_zero_to(f, start, sing, breaks)?;

    let rule = panel_rule();
    let mut t0 = start.ln();
    let mut quiet = 0;
    let mut steps = 0usize;
    while quiet < 3 {
        let half = 0.5 * PANEL_WIDTH;
        let mid = t0 + half;
        let mut panel = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z = (mid + half * x).exp();
            panel += w * half * f(z) * z;
        }
        total += panel;
        if panel.abs() <= 1e-16 * total.abs().max(1e-300) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        t0 += PANEL_WIDTH;
        steps += 1;
        if t0 > 600.0 {
            return Err(Error::DivergentIntegral(format!(
                "half-line integral failed to settle after {steps} panels; last panel {panel:e}"
            )));
        }
    }
    Ok(total)
}

/// Interpolatory weights on the ordered nodes `xs` for `∫_a^b · dt`.
///
/// Each sub-cell clipped to `[a, b]` is integrated with the quintic through
/// the six nearest nodes, so the composite rule is exact on quintics.  Nodes
/// outside `[a, b]` get zero (or partial-cell) weight, which is how the
/// `L`-functionals realize their variable lower limit on a fixed grid.
pub fn interp_weights(xs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    if n < 2 || !(b > a) {
        return w;
    }
    let width = 6.min(n);
    let gl = panel_rule();
    for c in 0..n - 1 {
        let lo = xs[c].max(a);
        let hi = xs[c + 1].min(b);
        if !(hi > lo) {
            continue;
        }
        // Stencil of `width` nodes around the cell.
        let s0 = c.saturating_sub(width / 2 - 1).min(n - width);
        let s1 = s0 + width;
        let stencil = &xs[s0..s1];
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&x, &gw) in gl.nodes.iter().zip(&gl.weights) {
            let t = mid + half * x;
            for (j, &xj) in stencil.iter().enumerate() {
                let mut lj = 1.0;
                for (m, &xm) in stencil.iter().enumerate() {
                    if m != j {
                        lj *= (t - xm) / (xj - xm);
                    }
                }
                w[s0 + j] += gw * half * lj;
            }
        }
    }
    w
}

/// Finite-difference weights on arbitrary nodes (Fornberg's algorithm).
///
/// Returns weights `w` with `f^{(m)}(x0) ≈ Σ w_j f(xs[j])`.
pub fn fd_weights(xs: &[f64], x0: f64, m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(m < n, "derivative order must be below stencil size");
    // d[k][j] holds the weight of node j for the k-th derivative.
    let mut d = vec![vec![0.0; n]; m + 1];
    d[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=m.min(i)).rev() {
                    d[k][i] = c1 * (k as f64 * d[k - 1][i - 1] - c5 * d[k][i - 1]) / c2;
                }
                d[0][i] = -c1 * c5 * d[0][i - 1] / c2;
            }
            for k in (1..=m.min(i)).rev() {
                d[k][j] = (c4 * d[k][j] - k as f64 * d[k - 1][j]) / c3;
            }
            d[0][j] = c4 * d[0][j] / c3;
        }
        c1 = c2;
    }
    d.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8).unwrap();
        // Degree 15 is the highest exact degree for 8 nodes.
        let exact = 2.0 / 15.0; // ∫_{-1}^{1} x^14 dx
        assert_relative_eq!(rule.integrate(|x| x.powi(14)), exact, max_relative = 1e-13);
        assert_relative_eq!(rule.integrate(|x| x.powi(7)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn legendre_weights_sum_to_interval_length() {
        for n in [2, 5, 16, 64] {
            let rule = gauss_legendre(n).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert_relative_eq!(sum, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn jacobi_moments_match_beta_function() {
        // ∫_{-1}^1 (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1); with
        // (a, b) = (-0.99, 0.3): 2^{0.31} Γ(0.01)Γ(1.3)/Γ(1.31).
        let a = -0.99;
        let b = 0.3;
        let rule = gauss_jacobi(20, a, b).unwrap();
        let expect = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0)
            + ln_gamma(b + 1.0)
            - ln_gamma(a + b + 2.0))
        .exp();
        let sum: f64 = rule.weights.iter().sum();
        assert_relative_eq!(sum, expect, max_relative = 1e-12);
        // First moment: ∫ x w(x) dx = mu0 * (b-a)/(a+b+2).
        let m1 = rule.integrate(|x| x);
        assert_relative_eq!(m1, expect * (b - a) / (a + b + 2.0), max_relative = 1e-11);
    }

    #[test]
    fn jacobi_rule_handles_strong_endpoint_singularity() {
        // ∫_0^1 t^{-0.99} (1 - t) dt = 1/0.01 - 1/1.01 = 100 - 1/1.01.
        let rule = gauss_jacobi_on(16, 0.0, 1.0, 0.0, -0.99).unwrap();
        let mut total = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            total += w * (1.0 - t);
        }
        assert_relative_eq!(total, 100.0 - 1.0 / 1.01, max_relative = 1e-12);
    }

    #[test]
    fn log_panels_integrate_wide_power_laws() {
        // ∫_{1e-30}^{1e30} z^{-1/2} (1+z)^{-1} dz → π as the limits widen.
        let f = |z: f64| z.powf(-0.5) / (1.0 + z);
        let got = integrate_log_panels(&f, 1e-30, 1e30, &[1.0]);
        assert_relative_eq!(got, std::f64::consts::PI, max_relative = 1e-10);
    }

    #[test]
    fn zero_to_matches_closed_forms() {
        // ∫_0^x z^{0.1} dz = x^{1.1}/1.1 across very different x scales.
        for &x in &[1e-8, 0.3, 7.0, 1e6] {
            let got = integrate_zero_to(&|z: f64| z.powf(0.1), x, 0.1, &[1.0]).unwrap();
            assert_relative_eq!(got, x.powf(1.1) / 1.1, max_relative = 1e-11);
        }
    }

    #[test]
    fn zero_to_inf_matches_beta_integral() {
        // ∫_0^∞ z^{a-1} (1+z)^{-a-b} dz = B(a, b) with a = 0.2, b = 1.4.
        let a = 0.2;
        let b = 1.4;
        let f = move |z: f64| z.powf(a - 1.0) * (1.0 + z).powf(-a - b);
        let got = integrate_zero_to_inf(&f, a - 1.0, &[1.0]).unwrap();
        let expect = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
        assert_relative_eq!(got, expect, max_relative = 1e-10);
    }

    #[test]
    fn zero_to_inf_reports_divergence() {
        let err = integrate_zero_to_inf(&|z: f64| 1.0 / (1.0 + z), 0.0, &[1.0]);
        assert!(matches!(err, Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn interp_weights_exact_on_quintics() {
        // Non-uniform nodes, full interval.
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 / 19.0).powi(2) * 3.0).collect();
        let w = interp_weights(&xs, 0.0, 3.0);
        for p in 0..=5 {
            let got: f64 = xs.iter().zip(&w).map(|(&x, &wi)| wi * x.powi(p)).sum();
            let expect = 3.0f64.powi(p + 1) / (p + 1) as f64;
            assert_relative_eq!(got, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn interp_weights_respect_partial_interval() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        // ∫_{1.1}^{7.3} x² dx with limits off the nodes.
        let w = interp_weights(&xs, 1.1, 7.3);
        let got: f64 = xs.iter().zip(&w).map(|(&x, &wi)| wi * x * x).sum();
        assert_relative_eq!(got, (7.3f64.powi(3) - 1.1f64.powi(3)) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn fornberg_weights_recover_derivatives() {
        let xs: Vec<f64> = (0..9).map(|i| -0.4 + 0.1 * i as f64).collect();
        let w = fd_weights(&xs, 0.0, 1);
        let got: f64 = xs.iter().zip(&w).map(|(&x, &wi)| wi * x.sin()).sum();
        assert_relative_eq!(got, 1.0, max_relative = 1e-10);
        let w2 = fd_weights(&xs, 0.0, 2);
        let got2: f64 = xs.iter().zip(&w2).map(|(&x, &wi)| wi * x.exp()).sum();
        assert_relative_eq!(got2, 1.0, max_relative = 1e-8);
    }
}
