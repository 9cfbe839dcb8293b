//! Initial-data constructions: the smooth cutoff `χ`, the dyadic partition of
//! unity `{Φ_i}`, the scale schedule `λ_i = 2^{-12 i/α}`, the 3D perturbation
//! `F̃₀ = F̃₁ + μF̃₂` with its rank-one correction, and the 2D Boussinesq data
//! `(Ω₀, η₀, ξ₀, θ₀)` built from the modified profile `η̂` and the boundary
//! corrector `f(y)`.
//!
//! The angular cutoffs live on scales `λ_i ε` that collapse double-exponentially
//! in `i`; for `i ≥ 1` they fall below the spacing of any f64 sample lattice
//! and contribute exactly zero there, so sums over `i` short-circuit to the
//! two dyadic indices active at a given `R`.

use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::coords::check_alpha;
use crate::error::{Error, Result};
use crate::grid::{CoordTag, Field, Grid, Parity};
use crate::norms::{energy_e, h3_norm, h3_psi_norm, x_sigma_sup_field, NormEntry, NormReport};
use crate::operators::{l_functional, LKind};
use crate::profiles::{profile_field, Profile2D, Profile3D, ProfileKind};
use crate::quad::{gauss_legendre_on, integrate_zero_to, integrate_zero_to_inf};
use crate::symfn::SymFn;

// ---------------------------------------------------------------------------
// Smooth cutoff
// ---------------------------------------------------------------------------

/// The unnormalized bump `b(t) = exp(-1/(t(1-t)))` on `(0, 1)`.
fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

struct StepTable {
    /// Cumulative integral of `bump` at `k/N`, normalized to end at 1.
    s: Vec<f64>,
    /// `∫_0^1 b`.
    norm: f64,
}

const STEP_PANELS: usize = 4096;

fn step_table() -> &'static StepTable {
    static TABLE: OnceLock<StepTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = STEP_PANELS;
        let mut s = Vec::with_capacity(n + 1);
        s.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let (lo, hi) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let rule = gauss_legendre_on(8, lo, hi).expect("static rule");
            acc += rule.integrate(bump);
            s.push(acc);
        }
        let norm = acc;
        for v in &mut s {
            *v /= norm;
        }
        StepTable { s, norm }
    })
}

/// Normalized integrated bump `S(t) = ∫_0^t b / ∫_0^1 b`, evaluated by
/// quintic Lagrange interpolation of the precomputed cumulative table.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tab = step_table();
    let n = STEP_PANELS;
    let pos = t * n as f64;
    let base = (pos.floor() as usize).saturating_sub(2).min(n - 5);
    let mut out = 0.0;
    for j in 0..6 {
        let xj = (base + j) as f64;
        let mut l = 1.0;
        for k in 0..6 {
            if k != j {
                l *= (pos - (base + k) as f64) / (xj - (base + k) as f64);
            }
        }
        out += l * tab.s[base + j];
    }
    out.clamp(0.0, 1.0)
}

/// Smooth even cutoff: `χ(s) = 1` for `|s| ≤ 1`, `0` for `|s| ≥ 2`, with a
/// `C^∞` integrated-bump transition in between.
pub fn chi(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        1.0 - smooth_step(a - 1.0)
    }
}

/// `χ'(s)`, exact on the transition band (`−b(|s|−1)/‖b‖₁` up to sign).
pub fn chi_prime(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 || a >= 2.0 {
        0.0
    } else {
        -s.signum() * bump(a - 1.0) / step_table().norm
    }
}

/// `χ^{(j)}(s)` for `j ≤ 7` via Taylor-series (jet) differentiation of the
/// bump on the transition band; exactly zero on the plateaus.
pub fn chi_deriv(j: usize, s: f64) -> f64 {
    assert!(j <= 7, "jet order limited to 7");
    if j == 0 {
        return chi(s);
    }
    let a = s.abs();
    if a <= 1.0 || a >= 2.0 {
        return 0.0;
    }
    // b = exp(w), w = -1/t - 1/(1-t); Taylor coefficients at t = a-1.
    let t = a - 1.0;
    let mut w = [0.0f64; 8];
    for k in 0..8 {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        w[k] = sign / t.powi(k as i32 + 1) - 1.0 / (1.0 - t).powi(k as i32 + 1);
    }
    let mut e = [0.0f64; 8];
    e[0] = w[0].exp();
    for n in 1..8 {
        let mut acc = 0.0;
        for k in 1..=n {
            acc += k as f64 * w[k] * e[n - k];
        }
        e[n] = acc / n as f64;
    }
    // χ(s) = 1 - S(|s|-1) on the band; χ^{(j)} = -b^{(j-1)}(|s|-1)/norm
    // with an extra (-1)^j on the mirrored side.
    let mut fact = 1.0;
    for k in 1..j {
        fact *= k as f64;
    }
    let d = -fact * e[j - 1] / step_table().norm;
    if s < 0.0 && j % 2 == 1 {
        -d
    } else {
        d
    }
}

// ---------------------------------------------------------------------------
// Partition of unity
// ---------------------------------------------------------------------------

/// `Φ₀ = 1 − χ`, `Φ_i(s) = χ(2^{i−1}s) − χ(2^i s)` for `i ≥ 1`.
pub fn phi(i: usize, s: f64) -> f64 {
    if i == 0 {
        1.0 - chi(s)
    } else {
        chi((i as f64 - 1.0).exp2() * s) - chi((i as f64).exp2() * s)
    }
}

/// `Φ_i'(s)`.
pub fn phi_prime(i: usize, s: f64) -> f64 {
    if i == 0 {
        -chi_prime(s)
    } else {
        let (c1, c2) = ((i as f64 - 1.0).exp2(), (i as f64).exp2());
        c1 * chi_prime(c1 * s) - c2 * chi_prime(c2 * s)
    }
}

/// Truncation index: `Φ_i` vanishes on `{R ≥ R_min}` for all `i > i_max`.
pub fn i_max_for(r_min: f64) -> usize {
    ((1.0 / r_min).log2().ceil() as usize) + 2
}

/// `Σ_{i ≤ i_max} Φ_i(s)`, summed in fixed increasing-`i` order.
pub fn partition_sum(s: f64, i_max: usize) -> f64 {
    (0..=i_max).map(|i| phi(i, s)).sum()
}

/// The at-most-three indices `i ≥ 1` whose `Φ_i` can be nonzero at `s`,
/// plus the caller handles `i = 0` (active iff `s > 1`).
fn active_dyadic(s: f64, i_max: usize) -> std::ops::RangeInclusive<usize> {
    if s <= 0.0 {
        return 1..=0; // empty
    }
    let base = (-s.log2()).floor();
    let lo = (base.max(0.0) as usize).max(1);
    let hi = ((base + 2.0).max(0.0) as usize).min(i_max);
    lo..=hi
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Parameters of the perturbation constructions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbParams {
    pub alpha: f64,
    /// Angular-sliver width multiplier `ε ∈ (0, 1]`.
    pub epsilon: f64,
    /// Outer truncation scale `M ≥ 1` in `χ(R/M)`.
    pub m_outer: f64,
    /// Boundary-corrector cutoff scale `δ ∈ (0, 1/2)` (2D only).
    pub delta: f64,
    /// `λ_i = 2^{−lambda_exponent · i/α}`; default 12.
    pub lambda_exponent: f64,
    /// Profile normalization constant for the 3D `F_*`.
    pub c_norm: f64,
}

impl PerturbParams {
    pub fn new(alpha: f64, epsilon: f64, m_outer: f64) -> PerturbParams {
        PerturbParams {
            alpha,
            epsilon,
            m_outer,
            delta: 0.1,
            lambda_exponent: 12.0,
            c_norm: 1.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> PerturbParams {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Parameter(format!("epsilon = {} not in (0, 1]", self.epsilon)));
        }
        if !(self.m_outer >= 1.0) {
            return Err(Error::Parameter(format!("M = {} must be ≥ 1", self.m_outer)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Parameter(format!("delta = {} not in (0, 1/2)", self.delta)));
        }
        if !(self.lambda_exponent > 0.0) {
            return Err(Error::Parameter("lambda_exponent must be positive".into()));
        }
        if !(0.1..=10.0).contains(&self.c_norm) {
            return Err(Error::Parameter(format!("c_norm = {} not in [0.1, 10]", self.c_norm)));
        }
        Ok(())
    }

    /// `λ_i = 2^{−12 i/α}` (with the configurable exponent). Underflows to
    /// zero for large `i`; downstream cutoffs then see `∞` and return 0.
    pub fn lambda(&self, i: usize) -> f64 {
        (-self.lambda_exponent * i as f64 / self.alpha).exp2()
    }
}

// ---------------------------------------------------------------------------
// 3D perturbation
// ---------------------------------------------------------------------------

/// Output of the 3D build: the corrected field and its diagnostics.
#[derive(Debug)]
pub struct Build3D {
    pub f_tilde0: Field,
    pub f_tilde1: Field,
    pub mu: f64,
    pub l_f1: f64,
    pub l_f2: f64,
    pub l_f0: f64,
}

/// The two-sided angular factor `1 − χ(β/(λ_iε)) − χ((π/2−β)/(λ_iε))`.
fn angular_3d(beta: f64, lam_eps: f64) -> f64 {
    1.0 - chi(beta / lam_eps) - chi((FRAC_PI_2 - beta) / lam_eps)
}

/// Builds `F̃₀ = F̃₁ + μF̃₂` with `μ` chosen so `L_{3D,12}(F̃₀)(0) = 0`.
///
/// `force_zero_f1` is a diagnostic mode that replaces `F̃₁` by zero; it
/// must produce `μ = 0` and a vanishing perturbation.
pub fn build_f_tilde_3d(
    params: &PerturbParams,
    grid: &Arc<Grid>,
    force_zero_f1: bool,
) -> Result<Build3D> {
    params.validate()?;
    if grid.spec.r_min > 1.0 || grid.spec.r_max < 5.0 {
        return Err(Error::Parameter(format!(
            "grid box [{}, {}] must cover the correction support R ∈ [1, 5]",
            grid.spec.r_min, grid.spec.r_max
        )));
    }
    let p = *params;
    let prof = Profile3D::new(p.alpha, p.c_norm)?;
    let f_star = prof.f_star();
    let i_max = i_max_for(grid.spec.r_min);

    let f1 = if force_zero_f1 {
        Field::zeros(grid.clone(), p.alpha, Parity::OddZ, CoordTag::ModPolar3D)
    } else {
        Field::from_fn(grid.clone(), p.alpha, Parity::OddZ, CoordTag::ModPolar3D, |r, b| {
            let fs = f_star.eval(r, b);
            if fs == 0.0 {
                return 0.0;
            }
            let mut s = 0.0;
            if r > 1.0 {
                s += phi(0, r) * angular_3d(b, p.lambda(0) * p.epsilon);
            }
            for i in active_dyadic(r, i_max) {
                let ph = phi(i, r);
                if ph != 0.0 {
                    s += ph * angular_3d(b, p.lambda(i) * p.epsilon);
                }
            }
            fs * (chi(r / p.m_outer) * s - 1.0)
        })
    };

    let f2 = Field::from_fn(grid.clone(), p.alpha, Parity::OddZ, CoordTag::ModPolar3D, |r, b| {
        (2.0 * b).sin() * chi((r - 3.0).powi(3))
    });

    let l_f1 = l_functional(&f1, LKind::L3D12, 0.0)?.value;
    let l_f2 = l_functional(&f2, LKind::L3D12, 0.0)?.value;
    if l_f2.abs() < 1e-8 {
        return Err(Error::DegenerateCorrection(format!(
            "L_3D,12 of the correction field is {l_f2:e}; cannot solve for μ"
        )));
    }
    let mu = if force_zero_f1 { 0.0 } else { -l_f1 / l_f2 };
    let f0 = f1.zip_with(&f2, |a, b| a + mu * b);
    let l_f0 = l_functional(&f0, LKind::L3D12, 0.0)?.value;
    Ok(Build3D {
        f_tilde0: f0,
        f_tilde1: f1,
        mu,
        l_f1,
        l_f2,
        l_f0,
    })
}

// ---------------------------------------------------------------------------
// 2D modified profile η̂ and the boundary corrector f(y)
// ---------------------------------------------------------------------------

/// The modified profile `η̂ = Σ_i Φ_i(R)(1 − χ((π/2−β)/(λ_iε))) η̄` together
/// with its exact `y`-derivative, evaluable at arbitrary points.
pub struct EtaHat {
    alpha: f64,
    epsilon: f64,
    lambda_exponent: f64,
    i_max: usize,
    eta: SymFn,
    eta_y: SymFn,
}

impl EtaHat {
    pub fn new(params: &PerturbParams, r_min: f64) -> Result<EtaHat> {
        params.validate()?;
        let prof = Profile2D::new(params.alpha)?;
        Ok(EtaHat {
            alpha: params.alpha,
            epsilon: params.epsilon,
            lambda_exponent: params.lambda_exponent,
            // Cover both the grid's radial box and the smallest R reached by
            // the line integrals (ρ ≥ y ≥ 1e-6 along their paths).
            i_max: i_max_for(r_min.min(1e-6f64.powf(params.alpha))),
            eta: prof.eta_bar(),
            eta_y: prof.eta_bar_y(),
        })
    }

    fn lambda(&self, i: usize) -> f64 {
        (-self.lambda_exponent * i as f64 / self.alpha).exp2()
    }

    /// The angular attenuation `A(R,β) = 1 − Σ_i Φ_i(R) χ((π/2−β)/(λ_iε))`.
    pub fn attenuation(&self, r: f64, beta: f64) -> f64 {
        let gap = FRAC_PI_2 - beta;
        let mut s = 0.0;
        if r > 1.0 {
            s += phi(0, r) * chi(gap / (self.lambda(0) * self.epsilon));
        }
        for i in active_dyadic(r, self.i_max) {
            let ph = phi(i, r);
            if ph != 0.0 {
                s += ph * chi(gap / (self.lambda(i) * self.epsilon));
            }
        }
        1.0 - s
    }

    pub fn eval_polar(&self, r: f64, beta: f64) -> f64 {
        let e = self.eta.eval(r, beta);
        if e == 0.0 {
            0.0
        } else {
            e * self.attenuation(r, beta)
        }
    }

    fn polar_of(&self, z: f64, y: f64) -> (f64, f64, f64) {
        let rho = z.hypot(y);
        (rho, (self.alpha * rho.ln()).exp(), y.atan2(z))
    }

    pub fn eval_cart(&self, z: f64, y: f64) -> f64 {
        let (_, r, beta) = self.polar_of(z, y);
        self.eval_polar(r, beta)
    }

    /// `η̂ − η̄ = (A − 1) η̄`, evaluated without cancellation between two
    /// separately computed large values.
    pub fn diff_polar(&self, r: f64, beta: f64) -> f64 {
        let e = self.eta.eval(r, beta);
        if e == 0.0 {
            0.0
        } else {
            e * (self.attenuation(r, beta) - 1.0)
        }
    }

    /// `η̂ − η̄` in Cartesian variables.
    pub fn diff_cart(&self, z: f64, y: f64) -> f64 {
        let (_, r, beta) = self.polar_of(z, y);
        self.diff_polar(r, beta)
    }

    /// Exact `∂_y η̂` in Cartesian variables:
    /// `η̂_y = η̄_y·A + η̄·∂_y A` with
    /// `∂_y A = −Σ_i [Φ_i'(R)(αR sinβ/ρ)χ(u_i) − Φ_i(R)χ'(u_i) cosβ/(ρλ_iε)]`,
    /// `u_i = (π/2−β)/(λ_iε)`.
    pub fn y_deriv_cart(&self, z: f64, y: f64) -> f64 {
        let (a, da, e, ey) = self.a_and_da(z, y);
        ey * a + e * da
    }

    /// `∂_y(η̂ − η̄) = (A − 1) η̄_y + η̄ ∂_y A`, again cancellation-free: the
    /// result vanishes identically outside the cutoff transition bands.
    pub fn y_deriv_diff_cart(&self, z: f64, y: f64) -> f64 {
        let (a, da, e, ey) = self.a_and_da(z, y);
        ey * (a - 1.0) + e * da
    }

    /// `(A, ∂_y A, η̄, η̄_y)` at the Cartesian point `(z, y)`.
    fn a_and_da(&self, z: f64, y: f64) -> (f64, f64, f64, f64) {
        let (rho, r, beta) = self.polar_of(z, y);
        let e = self.eta.eval(r, beta);
        let ey = self.eta_y.eval(r, beta);
        let a = self.attenuation(r, beta);
        let mut da = 0.0;
        if e != 0.0 {
            let gap = FRAC_PI_2 - beta;
            let (sb, cb) = (beta.sin(), beta.cos());
            let mut visit = |i: usize| {
                let le = self.lambda(i) * self.epsilon;
                let u = gap / le;
                // Skip outside the transition band *before* forming 1/(λ_iε):
                // for i ≥ 1 that factor overflows and 0·∞ would poison the sum.
                let c = chi(u);
                if c != 0.0 {
                    let dp = phi_prime(i, r);
                    if dp != 0.0 {
                        da -= dp * (self.alpha * r * sb / rho) * c;
                    }
                }
                if u > 1.0 && u < 2.0 {
                    let ph = phi(i, r);
                    if ph != 0.0 {
                        da += ph * chi_prime(u) * cb / (rho * le);
                    }
                }
            };
            if r > 0.5 {
                visit(0);
            }
            for i in active_dyadic(r, self.i_max) {
                visit(i);
            }
        }
        (a, da, e, ey)
    }

    /// Scale breaks for line integrals in `z` at height `y`: the Cartesian
    /// height and unit scale, plus the angular sliver of the `i = 0` cutoff,
    /// which lives at `z ≈ (ε..2ε)·y` and is much narrower than a log panel.
    pub fn line_breaks(&self, y: f64) -> [f64; 4] {
        let a = y.abs();
        [a, 1.0, 0.9 * self.epsilon * a, 2.2 * self.epsilon * a]
    }

    /// `∫_0^∞ η̂_y(z, y) dz`, signed or absolute.
    fn line_integral_y(&self, y: f64, absolute: bool) -> Result<f64> {
        let f = |z: f64| {
            let v = self.y_deriv_cart(z, y);
            if absolute {
                v.abs()
            } else {
                v
            }
        };
        integrate_zero_to_inf(&f, self.alpha, &self.line_breaks(y))
    }
}

/// Empirical constant in `∫_0^∞ |∂_y η̂(z,y)| dz ≤ C₁(α²+ε) y^{2α}`,
/// the supremum of the ratio over a logarithmic sample of `y ∈ (0, 1]`.
pub fn c1_estimate(eta_hat: &EtaHat, params: &PerturbParams) -> Result<f64> {
    let mut sup: f64 = 0.0;
    let n = 40;
    for k in 0..n {
        // y from 1e-4 to 1, log-spaced.
        let y = 10f64.powf(-4.0 + 4.0 * k as f64 / (n - 1) as f64);
        let integral = eta_hat.line_integral_y(y, true)?;
        let bound = (params.alpha.powi(2) + params.epsilon) * y.powf(2.0 * params.alpha);
        sup = sup.max(integral / bound);
    }
    Ok(sup)
}

/// Tabulated boundary corrector `f(y) = 1 − ∫_y^∞ f_y`,
/// `f_y(y) = −χ(y/δ) ∫_0^∞ η̂_y(z, y) dz`.
#[derive(Debug, Clone)]
pub struct FTable {
    ln_ys: Vec<f64>,
    f: Vec<f64>,
    fy: Vec<f64>,
    delta: f64,
    alpha: f64,
}

const F_TABLE_Y_LO: f64 = 1e-6;
const F_TABLE_N: usize = 257;

pub fn build_f_table(eta_hat: &EtaHat, params: &PerturbParams) -> Result<FTable> {
    let d = params.delta;
    let (lo, hi) = (F_TABLE_Y_LO.ln(), (2.0 * d).ln());
    let n = F_TABLE_N;
    let ln_ys: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let mut fy = Vec::with_capacity(n);
    for &ly in &ln_ys {
        let y = ly.exp();
        let c = chi(y / d);
        fy.push(if c == 0.0 {
            0.0
        } else {
            -c * eta_hat.line_integral_y(y, false)?
        });
    }
    // f(y) = 1 − ∫_y^{2δ} f_y: trapezoid in ln y (dy = y d ln y), from the top.
    let mut f = vec![0.0; n];
    f[n - 1] = 1.0;
    for k in (0..n - 1).rev() {
        let h = ln_ys[k + 1] - ln_ys[k];
        let seg = 0.5 * h * (fy[k] * ln_ys[k].exp() + fy[k + 1] * ln_ys[k + 1].exp());
        f[k] = f[k + 1] - seg;
    }
    Ok(FTable {
        ln_ys,
        f,
        fy,
        delta: d,
        alpha: params.alpha,
    })
}

impl FTable {
    /// Quintic sliding-window Lagrange interpolation in `ln y`.  The table
    /// feeds grid stencils downstream, so the evaluator must be smooth:
    /// low-order kinks would be differentiated into visible noise.
    fn interp(&self, xs: &[f64], y: f64) -> f64 {
        let ly = y.ln();
        let n = self.ln_ys.len();
        let h = (self.ln_ys[n - 1] - self.ln_ys[0]) / (n - 1) as f64;
        let pos = (ly - self.ln_ys[0]) / h;
        let base = (pos.floor() as usize).saturating_sub(2).min(n - 6);
        let mut out = 0.0;
        for j in 0..6 {
            let xj = (base + j) as f64;
            let mut l = 1.0;
            for k in 0..6 {
                if k != j {
                    l *= (pos - (base + k) as f64) / (xj - (base + k) as f64);
                }
            }
            out += l * xs[base + j];
        }
        out
    }

    /// `f(y)`; equals 1 exactly for `y ≥ 2δ`.
    pub fn eval(&self, y: f64) -> f64 {
        let y = y.abs();
        if y >= 2.0 * self.delta {
            return 1.0;
        }
        if y <= F_TABLE_Y_LO {
            // Below the table: f_y ~ y^{2α}, so the remaining mass is
            // f_y(y_lo)·y_lo/(1+2α) scaled by the incomplete power.
            let frac = 1.0 - (y / F_TABLE_Y_LO).powf(1.0 + 2.0 * self.alpha);
            return self.f[0] - self.fy[0] * F_TABLE_Y_LO * frac / (1.0 + 2.0 * self.alpha);
        }
        self.interp(&self.f, y)
    }

    /// `f_y(y)`; zero for `y ≥ 2δ`.
    pub fn eval_fy(&self, y: f64) -> f64 {
        let y = y.abs();
        if y >= 2.0 * self.delta {
            return 0.0;
        }
        if y <= F_TABLE_Y_LO {
            return self.fy[0] * (y / F_TABLE_Y_LO).powf(2.0 * self.alpha);
        }
        self.interp(&self.fy, y)
    }
}

// ---------------------------------------------------------------------------
// 2D Boussinesq data
// ---------------------------------------------------------------------------

/// The constructed Boussinesq initial data (totals: profile + perturbation).
#[derive(Debug)]
pub struct BoussinesqData {
    pub params: PerturbParams,
    /// `Ω̄ + Ω̃₀`, odd in `x`.
    pub omega0: Field,
    /// `χ(R/M) θ̂`, even in `x`.
    pub theta0: Field,
    /// `∂_x(χ(R/M) θ̂) = η̄ + η̃₀`, odd in `x`.
    pub eta0: Field,
    /// `∂_y(χ(R/M) θ̂) = ξ̄ + ξ̃₀`, even in `x`.
    pub xi0: Field,
    /// `min θ̂` over the grid points where `χ(R/M) > 0`.
    pub theta_hat_min: f64,
    pub c1_estimate: f64,
    pub f_table: FTable,
}

/// Builds the full 2D data tuple.  The `δ` constraint
/// `δ < min(1/4, 1/(4C₁))` is checked against the empirical `C₁` with a 2×
/// safety factor; violations surface as parameter errors carrying `C₁`.
pub fn build_boussinesq_data(params: &PerturbParams, grid: &Arc<Grid>) -> Result<BoussinesqData> {
    params.validate()?;
    let p = *params;
    let prof = Profile2D::new(p.alpha)?;
    let omega_bar = prof.omega_bar();
    let eta_hat = EtaHat::new(&p, grid.spec.r_min)?;

    let c1 = c1_estimate(&eta_hat, &p)?;
    let delta_cap = (0.25f64).min(1.0 / (4.0 * 2.0 * c1));
    if p.delta >= delta_cap {
        return Err(Error::Parameter(format!(
            "delta = {} violates delta < min(1/4, 1/(8 C1)) = {:.4} with estimated C1 = {:.3}",
            p.delta, delta_cap, c1
        )));
    }
    let f_table = build_f_table(&eta_hat, &p)?;

    // Ω₀ = χ(R/M)·A(R,β)·Ω̄ — the same angular attenuation as η̂.
    let omega0 = Field::from_fn(grid.clone(), p.alpha, Parity::OddX, CoordTag::ModPolar2D, |r, b| {
        let w = omega_bar.eval(r, b);
        if w == 0.0 {
            0.0
        } else {
            chi(r / p.m_outer) * eta_hat.attenuation(r, b) * w
        }
    });

    // θ̂, η₀, ξ₀ require line integrals per node; everything vanishes for
    // R ≥ 2M, which covers most radial rows of a wide box.
    let inv_alpha = 1.0 / p.alpha;
    let node_geometry = |r: f64, b: f64| {
        let ln_rho = r.ln() * inv_alpha;
        let rho = ln_rho.min(700.0).exp();
        (rho, rho * b.cos(), rho * b.sin())
    };
    let theta_hat_at = |x: f64, y: f64| -> f64 {
        let line =
            integrate_zero_to(&|z| eta_hat.eval_cart(z, y), x, p.alpha, &eta_hat.line_breaks(y))
                .unwrap_or(f64::NAN);
        f_table.eval(y) + line
    };
    let xi_hat_at = |x: f64, y: f64| -> f64 {
        let line =
            integrate_zero_to(&|z| eta_hat.y_deriv_cart(z, y), x, p.alpha, &eta_hat.line_breaks(y))
                .unwrap_or(f64::NAN);
        f_table.eval_fy(y) + line
    };

    let theta0 = Field::from_fn(grid.clone(), p.alpha, Parity::EvenX, CoordTag::ModPolar2D, |r, b| {
        let cut = chi(r / p.m_outer);
        if cut == 0.0 {
            return 0.0;
        }
        let (_, x, y) = node_geometry(r, b);
        cut * theta_hat_at(x, y)
    });

    let eta0 = Field::from_fn(grid.clone(), p.alpha, Parity::OddX, CoordTag::ModPolar2D, |r, b| {
        let cut = chi(r / p.m_outer);
        if cut == 0.0 {
            return 0.0;
        }
        let mut v = cut * eta_hat.eval_polar(r, b);
        let dcut = chi_prime(r / p.m_outer) / p.m_outer;
        if dcut != 0.0 {
            let (rho, x, y) = node_geometry(r, b);
            v += dcut * (p.alpha * r * b.cos() / rho) * theta_hat_at(x, y);
        }
        v
    });

    let xi0 = Field::from_fn(grid.clone(), p.alpha, Parity::EvenX, CoordTag::ModPolar2D, |r, b| {
        let cut = chi(r / p.m_outer);
        if cut == 0.0 {
            return 0.0;
        }
        let (rho, x, y) = node_geometry(r, b);
        let mut v = cut * xi_hat_at(x, y);
        let dcut = chi_prime(r / p.m_outer) / p.m_outer;
        if dcut != 0.0 {
            v += dcut * (p.alpha * r * b.sin() / rho) * theta_hat_at(x, y);
        }
        v
    });

    for (name, f) in [("theta0", &theta0), ("eta0", &eta0), ("xi0", &xi0)] {
        if !f.sup_abs().is_finite() {
            return Err(Error::Divergence(format!(
                "{name} contains non-finite samples after construction"
            )));
        }
    }

    // θ̂ ≥ 1/2 on the support of the truncation.
    let mut theta_hat_min = f64::INFINITY;
    for (i, &r) in grid.r_nodes.iter().enumerate() {
        let cut = chi(r / p.m_outer);
        if cut == 0.0 {
            continue;
        }
        for j in 0..grid.spec.n_beta {
            theta_hat_min = theta_hat_min.min(theta0.values[(i, j)] / cut);
        }
    }
    if !(theta_hat_min >= 0.5) {
        return Err(Error::Domain(format!(
            "theta-hat minimum {theta_hat_min} fell below 1/2 on the grid"
        )));
    }

    Ok(BoussinesqData {
        params: p,
        omega0,
        theta0,
        eta0,
        xi0,
        theta_hat_min,
        c1_estimate: c1,
        f_table,
    })
}

impl BoussinesqData {
    fn tilde_of(&self, total: &Field, kind: ProfileKind) -> Result<Field> {
        let bar = profile_field(kind, self.params.alpha, 1.0, total.grid.clone())?;
        Ok(total.zip_with(&bar, |a, b| a - b))
    }

    /// `Ω̃₀ = Ω₀ − Ω̄`.
    pub fn tilde_omega0(&self) -> Result<Field> {
        self.tilde_of(&self.omega0, ProfileKind::OmegaBar)
    }

    /// `η̃₀ = η₀ − η̄`.
    pub fn tilde_eta0(&self) -> Result<Field> {
        self.tilde_of(&self.eta0, ProfileKind::EtaBar)
    }

    /// `ξ̃₀ = ξ₀ − ξ̄`.
    pub fn tilde_xi0(&self) -> Result<Field> {
        self.tilde_of(&self.xi0, ProfileKind::XiBar)
    }

    /// `θ̃₀ = θ₀ − θ̄`.
    pub fn tilde_theta0(&self) -> Result<Field> {
        self.tilde_of(&self.theta0, ProfileKind::ThetaBar)
    }
}

// ---------------------------------------------------------------------------
// Smallness reports and weighted-gradient growth checks
// ---------------------------------------------------------------------------

fn entry(value: f64, strategy: &str) -> NormEntry {
    NormEntry {
        value,
        error_estimate: None,
        strategy: strategy.to_string(),
    }
}

fn entry_with_err(value: f64, err: f64, strategy: &str) -> NormEntry {
    NormEntry {
        value,
        error_estimate: Some(err),
        strategy: strategy.to_string(),
    }
}

/// Parametric smallness envelope for the 3D build:
/// `M^{-1} + α^{-1} ε^{α/6} + α²`.
pub fn envelope_3d(p: &PerturbParams) -> f64 {
    1.0 / p.m_outer + p.epsilon.powf(p.alpha / 6.0) / p.alpha + p.alpha * p.alpha
}

/// Parametric envelope for the 2D energy:
/// `α^{-3} δ^{α/4} + ε^{α/6} + α^{-1} ε^{α/6} + α^{5/2}`.
pub fn envelope_2d(p: &PerturbParams) -> f64 {
    let ea6 = p.epsilon.powf(p.alpha / 6.0);
    p.delta.powf(p.alpha / 4.0) / p.alpha.powi(3) + ea6 + ea6 / p.alpha + p.alpha.powf(2.5)
}

/// Builds `F̃₀` at `params` and reports `‖F̃₁‖_{ℋ³}`, `|μ|`, `‖F̃₀‖_{ℋ³}`, the
/// parametric envelope at `params`, and the fitted constant
/// `C = max ‖F̃₀‖_{ℋ³} / (M^{-1} + α^{-1}ε^{α/6} + α²)` over `params` together
/// with the extra `sweep` points (the smallest `C` making the envelope an
/// upper bound on the sampled family).
pub fn smallness_report_3d(
    params: &PerturbParams,
    grid: &Arc<Grid>,
    sweep: &[PerturbParams],
) -> Result<NormReport> {
    let build = build_f_tilde_3d(params, grid, false)?;
    let h1 = h3_norm(&build.f_tilde1)?;
    let h0 = h3_norm(&build.f_tilde0)?;
    let env = envelope_3d(params);
    let mut fitted = h0.value / env;
    for q in sweep {
        let bq = build_f_tilde_3d(q, grid, false)?;
        fitted = fitted.max(h3_norm(&bq.f_tilde0)?.value / envelope_3d(q));
    }
    let mut rep = NormReport::new();
    rep.insert(
        "h3_f_tilde1".into(),
        entry_with_err(h1.value, h1.error_estimate, "weighted-quadrature"),
    );
    rep.insert(
        "h3_f_tilde0".into(),
        entry_with_err(h0.value, h0.error_estimate, "weighted-quadrature"),
    );
    rep.insert("mu_abs".into(), entry(build.mu.abs(), "rank-one-correction"));
    rep.insert("envelope".into(), entry(env, "parametric"));
    rep.insert("envelope_ratio".into(), entry(h0.value / env, "ratio"));
    rep.insert("fitted_c".into(), entry(fitted, "max-ratio-fit"));
    rep.insert(
        "sweep_points".into(),
        entry(1.0 + sweep.len() as f64, "count"),
    );
    Ok(rep)
}

/// Builds the 2D data at `params` and reports the energy `E(Ω̃₀, η̃₀, ξ̃₀)`
/// with its component breakdown (all components squared, so they sum to `E²`),
/// the norms of the outer-cutoff decomposition
/// `η̃₂ = I₁ + I₂`, `ξ̃₂ = I₃ + I₄` with
/// `I₁ = χ(R/M)(η̂ − η̄)`, `I₃ = χ(R/M)(ξ̂ − ξ̄)` and `I₂, I₄` the
/// `χ'(R/M)`-shell terms carrying `θ̂ − θ̄`, and the parametric envelope.
/// `force_zero` is a diagnostic mode replacing the perturbation by zero.
pub fn smallness_report_2d(
    params: &PerturbParams,
    grid: &Arc<Grid>,
    force_zero: bool,
) -> Result<NormReport> {
    params.validate()?;
    let p = *params;
    let zero_odd = Field::zeros(grid.clone(), p.alpha, Parity::OddX, CoordTag::ModPolar2D);
    let zero_even = Field::zeros(grid.clone(), p.alpha, Parity::EvenX, CoordTag::ModPolar2D);

    let (om_t, eta_t, xi_t, i1, i2, i3, i4);
    if force_zero {
        om_t = zero_odd.clone();
        eta_t = zero_odd.clone();
        xi_t = zero_even.clone();
        i1 = zero_odd.clone();
        i2 = zero_odd.clone();
        i3 = zero_even.clone();
        i4 = zero_even.clone();
    } else {
        let data = build_boussinesq_data(&p, grid)?;
        om_t = data.tilde_omega0()?;
        eta_t = data.tilde_eta0()?;
        xi_t = data.tilde_xi0()?;
        let eta_hat = EtaHat::new(&p, grid.spec.r_min)?;
        let ft = &data.f_table;
        let inv_alpha = 1.0 / p.alpha;
        let geometry = |r: f64, b: f64| {
            let rho = (r.ln() * inv_alpha).min(700.0).exp();
            (rho, rho * b.cos(), rho * b.sin())
        };

        i1 = Field::from_fn(grid.clone(), p.alpha, Parity::OddX, CoordTag::ModPolar2D, |r, b| {
            let cut = chi(r / p.m_outer);
            if cut == 0.0 {
                0.0
            } else {
                cut * eta_hat.diff_polar(r, b)
            }
        });

        // ξ̂ − ξ̄ = f_y(y) + ∫_0^x ∂_y(η̂ − η̄); the integrand vanishes outside
        // the cutoff transition bands, so no cancellation of large profiles.
        i3 = Field::from_fn(grid.clone(), p.alpha, Parity::EvenX, CoordTag::ModPolar2D, |r, b| {
            let cut = chi(r / p.m_outer);
            if cut == 0.0 {
                return 0.0;
            }
            let (_, x, y) = geometry(r, b);
            let line = integrate_zero_to(
                &|z| eta_hat.y_deriv_diff_cart(z, y),
                x,
                p.alpha,
                &eta_hat.line_breaks(y),
            )
            .unwrap_or(f64::NAN);
            cut * (ft.eval_fy(y) + line)
        });

        // θ̂ − θ̄ = f(y) − 1 + ∫_0^x (η̂ − η̄), needed only on the
        // χ'(R/M)-shell R ∈ [M, 2M].
        let d_theta = |x: f64, y: f64| -> f64 {
            let line = integrate_zero_to(
                &|z| eta_hat.diff_cart(z, y),
                x,
                p.alpha,
                &eta_hat.line_breaks(y),
            )
            .unwrap_or(f64::NAN);
            ft.eval(y) - 1.0 + line
        };
        let shell = |r: f64, b: f64, along_x: bool| -> f64 {
            let dcut = chi_prime(r / p.m_outer) / p.m_outer;
            if dcut == 0.0 {
                return 0.0;
            }
            let (rho, x, y) = geometry(r, b);
            let trig = if along_x { b.cos() } else { b.sin() };
            dcut * (p.alpha * r * trig / rho) * d_theta(x, y)
        };
        i2 = Field::from_fn(grid.clone(), p.alpha, Parity::OddX, CoordTag::ModPolar2D, |r, b| {
            shell(r, b, true)
        });
        i4 = Field::from_fn(grid.clone(), p.alpha, Parity::EvenX, CoordTag::ModPolar2D, |r, b| {
            shell(r, b, false)
        });
    }

    let total = energy_e(&om_t, &eta_t, &xi_t, true)?;
    let e_i1 = energy_e(&zero_odd, &i1, &zero_even, true)?;
    let e_i24 = energy_e(&zero_odd, &i2, &i4, true)?;
    let h3psi_i3 = h3_psi_norm(&i3)?;
    let env = envelope_2d(&p);

    let mut rep = NormReport::new();
    rep.insert("E".into(), entry(total.e, "weighted-quadrature"));
    rep.insert("E_squared".into(), entry(total.e_squared, "weighted-quadrature"));
    for (name, value) in total.components() {
        rep.insert(format!("component/{name}"), entry(value, "weighted-quadrature"));
    }
    rep.insert("E_I1".into(), entry(e_i1.e, "weighted-quadrature"));
    rep.insert("E_I2_I4".into(), entry(e_i24.e, "weighted-quadrature"));
    rep.insert(
        "h3psi_I3".into(),
        entry_with_err(h3psi_i3.value, h3psi_i3.error_estimate, "weighted-quadrature"),
    );
    rep.insert("envelope".into(), entry(env, "parametric"));
    rep.insert("envelope_ratio".into(), entry(total.e / env, "ratio"));
    Ok(rep)
}

/// Checks the weighted-gradient growth of an `ε`-labelled family of fields:
/// for each derivative order `k ≤ k_max`, the sup over the grid of
/// `⟨x⟩_σ^k |∇^k f|` must be finite, and the spread of `ε^k · sup` across the
/// family (max/min) measures how sharply the `ε^{-k}` envelope is attained.
pub fn x_sigma_growth_check(
    family: &[(f64, Field)],
    k_max: usize,
    sigma: f64,
) -> Result<NormReport> {
    if family.is_empty() {
        return Err(Error::Parameter("empty field family".into()));
    }
    if k_max > 4 {
        return Err(Error::UnsupportedPrimitive(format!(
            "growth check order k = {k_max}: stencil derivatives beyond k = 4 \
             are noise-dominated and refused"
        )));
    }
    let mut rep = NormReport::new();
    for k in 0..=k_max {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (eps, f) in family {
            let sup = x_sigma_sup_field(f, sigma, k)?;
            rep.insert(format!("k{k}/eps{eps:.3e}"), entry(sup, "stencil-sup"));
            let scaled = eps.powi(k as i32) * sup;
            lo = lo.min(scaled);
            hi = hi.max(scaled);
        }
        let spread = if lo > 0.0 { hi / lo } else { 1.0 };
        rep.insert(format!("k{k}/scaled_spread"), entry(spread, "sweep-ratio"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn chi_plateaus_and_range() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(-1.0), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(17.0), 0.0);
        assert_eq!(chi(-2.5), 0.0);
        assert_eq!(chi(1.5), chi(-1.5));
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = chi(1.0 + k as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-15, "not monotone at {k}");
            prev = v;
        }
        assert!(chi(1.5) > 0.0 && chi(1.5) < 1.0);
    }

    #[test]
    fn chi_prime_matches_finite_differences() {
        for &s in &[1.2, 1.5, 1.8, -1.35] {
            let h = 1e-6;
            let fd = (chi(s + h) - chi(s - h)) / (2.0 * h);
            assert_relative_eq!(chi_prime(s), fd, max_relative = 1e-8, epsilon = 1e-12);
        }
        assert_eq!(chi_prime(0.5), 0.0);
        assert_eq!(chi_prime(2.5), 0.0);
    }

    #[test]
    fn chi_derivatives_vanish_at_plateau_edges() {
        // All derivatives are exactly zero on the plateaus; approaching the
        // transition edges they collapse like exp(-1/u)·poly(1/u).
        for j in 1..=6 {
            assert_eq!(chi_deriv(j, 0.9), 0.0);
            assert_eq!(chi_deriv(j, 2.1), 0.0);
            assert!(chi_deriv(j, 1.01).abs() <= 1e-10, "j={j} at 1.01");
            assert!(chi_deriv(j, 1.99).abs() <= 1e-10, "j={j} at 1.99");
        }
        // Mid-band sanity: the jet second derivative matches FD of χ'.
        let h = 1e-5;
        let fd = (chi_prime(1.5 + h) - chi_prime(1.5 - h)) / (2.0 * h);
        assert_relative_eq!(chi_deriv(2, 1.5), fd, max_relative = 1e-7);
    }

    #[test]
    fn partition_sums_to_one() {
        let i_max = i_max_for(1e-7);
        for k in 0..1000 {
            let r = 10f64.powf(-6.0 + 12.0 * k as f64 / 999.0);
            let s = partition_sum(r, i_max);
            assert!((s - 1.0).abs() <= 1e-12, "sum at R = {r:e} is {s}");
        }
    }

    #[test]
    fn partition_dyadic_support() {
        for i in 1..20usize {
            let scale = (-(i as f64)).exp2();
            assert_eq!(phi(i, scale * 8.0), 0.0);
            assert_eq!(phi(i, scale / 4.0), 0.0);
            assert!(phi(i, scale * 1.5) > 0.0);
        }
        // Φ₀ covers the outside.
        assert_eq!(phi(0, 0.7), 0.0);
        assert_eq!(phi(0, 3.0), 1.0);
    }

    #[test]
    fn active_dyadic_finds_all_support() {
        let i_max = 60;
        for k in 0..200 {
            let r = 10f64.powf(-8.0 + 9.0 * k as f64 / 199.0);
            let brute: f64 = (1..=i_max).map(|i| phi(i, r)).sum();
            let fast: f64 = active_dyadic(r, i_max).map(|i| phi(i, r)).sum();
            assert_eq!(brute, fast, "mismatch at R = {r:e}");
        }
    }

    #[test]
    fn lambda_schedule_reference() {
        let p = PerturbParams::new(0.5, 0.05, 32.0);
        assert_relative_eq!(p.lambda(1), 2f64.powi(-24), max_relative = 1e-14);
        // λ_i^{α/6} = 2^{-2i} = min(R², 1) at R = 2^{-i}: check in logs to
        // dodge underflow of λ_i itself.
        for alpha in [0.05, 0.1, 0.3] {
            let p = PerturbParams::new(alpha, 0.1, 16.0);
            for i in 1..50u32 {
                let log2_lam = -p.lambda_exponent * i as f64 / alpha;
                let lhs = (alpha / 6.0) * log2_lam;
                assert_relative_eq!(lhs, -2.0 * i as f64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(PerturbParams::new(0.1, 0.05, 32.0).validate().is_ok());
        assert!(PerturbParams::new(0.1, 0.0, 32.0).validate().is_err());
        assert!(PerturbParams::new(0.1, 0.05, 0.5).validate().is_err());
        assert!(PerturbParams::new(0.1, 0.05, 32.0).with_delta(0.6).validate().is_err());
        assert!(PerturbParams::new(1.5, 0.05, 32.0).validate().is_err());
    }

    fn grid_3d() -> Arc<Grid> {
        Grid::new(GridSpec::new(2f64.powi(-30), 2f64.powi(30), 192, 64)).unwrap()
    }

    #[test]
    fn f_tilde_3d_diagnostic_zero() {
        let p = PerturbParams::new(0.1, 0.05, 32.0);
        let b = build_f_tilde_3d(&p, &grid_3d(), true).unwrap();
        assert_eq!(b.mu, 0.0);
        assert_eq!(b.f_tilde0.sup_abs(), 0.0);
    }

    #[test]
    fn f_tilde_3d_mu_zeroes_functional() {
        let p = PerturbParams::new(0.1, 0.05, 32.0);
        let b = build_f_tilde_3d(&p, &grid_3d(), false).unwrap();
        assert!(b.l_f1.abs() > 0.0);
        assert!(b.l_f2.abs() > 1e-3);
        assert!(
            b.l_f0.abs() <= 1e-6 * b.l_f1.abs().max(1.0),
            "residual functional {:e} vs L(F1) = {:e}",
            b.l_f0,
            b.l_f1
        );
    }

    #[test]
    fn f_tilde_3d_support() {
        let p = PerturbParams::new(0.1, 0.05, 32.0);
        let b = build_f_tilde_3d(&p, &grid_3d(), false).unwrap();
        let g = &b.f_tilde0.grid;
        let prof = Profile3D::new(p.alpha, p.c_norm).unwrap();
        let fs = prof.f_star();
        for (i, &r) in g.r_nodes.iter().enumerate() {
            if r > 2.0 * p.m_outer && !(1.0..=5.0).contains(&r) {
                for j in 0..g.spec.n_beta {
                    // F̃₀ + F_* vanishes out there.
                    let total = b.f_tilde0.values[(i, j)] + fs.eval(r, g.beta_nodes[j]);
                    assert_eq!(total, 0.0, "support leak at R = {r:e}");
                }
            }
        }
    }

    #[test]
    fn eta_hat_matches_eta_bar_away_from_the_wall() {
        let p = PerturbParams::new(0.15, 0.05, 32.0);
        let eh = EtaHat::new(&p, 2f64.powi(-40)).unwrap();
        let prof = Profile2D::new(p.alpha).unwrap();
        let eta = prof.eta_bar();
        for &(r, b) in &[(0.5f64, 0.3f64), (2.0, std::f64::consts::FRAC_PI_4), (1e-6, 1.0)] {
            // β is more than 2ε away from π/2: every cutoff is zero.
            assert_eq!(eh.eval_polar(r, b), eta.eval(r, b));
        }
        // Positivity everywhere.
        for k in 1..40 {
            let b = FRAC_PI_2 * k as f64 / 40.0;
            assert!(eh.eval_polar(1.0, b) >= 0.0);
        }
    }

    #[test]
    fn eta_hat_y_matches_finite_differences() {
        let p = PerturbParams::new(0.15, 0.05, 32.0);
        let eh = EtaHat::new(&p, 2f64.powi(-40)).unwrap();
        for &(z, y) in &[(0.5f64, 0.8f64), (1.5, 0.2), (0.05, 1.1), (0.002, 0.04)] {
            let h = 1e-6 * y;
            let fd = (eh.eval_cart(z, y + h) - eh.eval_cart(z, y - h)) / (2.0 * h);
            let an = eh.y_deriv_cart(z, y);
            assert_relative_eq!(an, fd, max_relative = 1e-5, epsilon = 1e-10);
        }
    }

    #[test]
    fn eta_bar_y_line_integral_bound() {
        // ∫₀^∞ |η̄_y| dz ≤ C α² y^{2α} with a modest C.
        let alpha = 0.1;
        let prof = Profile2D::new(alpha).unwrap();
        let eta_y = prof.eta_bar_y();
        for &y in &[1e-3, 0.03, 0.3, 1.0] {
            let integral = integrate_zero_to_inf(
                &|z| crate::profiles::eval_cart(&eta_y, z, y).abs(),
                alpha,
                &[y, 1.0],
            )
            .unwrap();
            let ratio = integral / (alpha.powi(2) * y.powf(2.0 * alpha));
            assert!(ratio.is_finite() && ratio < 50.0, "ratio {ratio} at y = {y}");
        }
    }

    #[test]
    fn c1_estimate_is_finite_and_moderate() {
        let p = PerturbParams::new(0.1, 0.05, 32.0);
        let eh = EtaHat::new(&p, 2f64.powi(-40)).unwrap();
        let c1 = c1_estimate(&eh, &p).unwrap();
        assert!(c1.is_finite() && c1 > 0.0, "C1 = {c1}");
        println!("estimated C1 = {c1:.4}");
    }

    #[test]
    fn f_is_one_beyond_the_cutoff_and_close_below() {
        let p = PerturbParams::new(0.1, 0.05, 32.0).with_delta(0.1);
        let eh = EtaHat::new(&p, 2f64.powi(-40)).unwrap();
        let tab = build_f_table(&eh, &p).unwrap();
        assert_eq!(tab.eval(0.25), 1.0);
        assert_eq!(tab.eval(3.0), 1.0);
        assert_eq!(tab.eval_fy(0.21), 0.0);
        let budget = p.alpha.powi(2) + p.epsilon;
        for k in 1..=200 {
            let y = 0.2 * k as f64 / 200.0;
            let dev = (tab.eval(y) - 1.0).abs();
            assert!(dev <= budget, "|f({y}) - 1| = {dev:e} > {budget}");
        }
    }

    fn small_2d_grid() -> Arc<Grid> {
        Grid::new(GridSpec::new(2f64.powi(-20), 2f64.powi(20), 96, 48)).unwrap()
    }

    #[test]
    fn boussinesq_build_basics() {
        // The empirical C1 ≈ 3.7 at these parameters caps delta near 0.034.
        let p = PerturbParams::new(0.15, 0.1, 8.0).with_delta(0.03);
        let data = build_boussinesq_data(&p, &small_2d_grid()).unwrap();
        assert!(data.theta_hat_min >= 0.5);
        assert_eq!(data.omega0.parity, Parity::OddX);
        assert_eq!(data.theta0.parity, Parity::EvenX);
        assert_eq!(data.eta0.parity, Parity::OddX);
        assert_eq!(data.xi0.parity, Parity::EvenX);
        assert!(data.omega0.sup_abs().is_finite());

        // Ω₀ − Ω̄ vanishes on compact interior sets: R ≤ M and β away from
        // the wall by more than 2ε.
        let g = &data.omega0.grid;
        let tilde = data.tilde_omega0().unwrap();
        for (i, &r) in g.r_nodes.iter().enumerate() {
            if r > p.m_outer {
                continue;
            }
            for (j, &b) in g.beta_nodes.iter().enumerate() {
                if FRAC_PI_2 - b > 2.0 * p.epsilon {
                    assert!(
                        tilde.values[(i, j)].abs() <= 1e-14,
                        "interior perturbation at R={r:e}, beta={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn boussinesq_gradient_consistency() {
        // η₀ claims to be ∂_x(χ(R/M)θ̂): cross-check against stencil
        // derivatives of the θ₀ field.  θ̂ varies on the Cartesian scale
        // ρ = R^{1/α}, which stretches ln R derivatives by 1/α; stencils in
        // ln R only resolve that when the node spacing is well below α, so
        // this check runs on a narrow radially-fine box.
        let p = PerturbParams::new(0.15, 0.1, 8.0).with_delta(0.03);
        let fine = Grid::new(GridSpec::new(0.125, 8.0, 256, 96)).unwrap();
        let data = build_boussinesq_data(&p, &fine).unwrap();
        let dx = data
            .theta0
            .deriv(crate::coords::DerivOp {
                kind: crate::coords::DerivKind::PartialX,
                order: 1,
            })
            .unwrap();
        let g = &data.theta0.grid;
        let sup = data.eta0.sup_abs();
        let mut worst = 0.0f64;
        for (i, &r) in g.r_nodes.iter().enumerate() {
            if !(0.5..=2.0).contains(&r) {
                continue;
            }
            for j in 8..g.spec.n_beta - 8 {
                // The angular cutoff gives θ genuine ε-scale variation in the
                // sliver π/2−β ≲ 2ε, below what this β-resolution can
                // differentiate; skip any node whose 9-point stencil touches
                // that band (it is checked separately against Cartesian
                // finite differences of the closure).
                let stencil_hits_sliver = (j.saturating_sub(4)..=(j + 4).min(g.spec.n_beta - 1))
                    .any(|jj| FRAC_PI_2 - g.beta_nodes[jj] <= 2.2 * p.epsilon);
                if stencil_hits_sliver {
                    continue;
                }
                worst = worst.max((dx.values[(i, j)] - data.eta0.values[(i, j)]).abs());
            }
        }
        // The residual is dominated by discretization of the width-δ
        // transition band of f at y ∈ (δ, 2δ); it halves with each angular
        // refinement (6.0e-4 at 48 β-nodes, 2.3e-4 at 96).
        assert!(worst <= 1.5e-3 * sup, "gradient mismatch {worst:e} vs sup {sup:e}");

        // Sliver-region consistency at closure level: ∂_x of the line
        // integral reproduces η̂ pointwise, including across the cutoff band.
        let eh = EtaHat::new(&p, 0.125).unwrap();
        let (y, x0) = (50.0, 9.0);
        let th = |xx: f64| {
            integrate_zero_to(&|z| eh.eval_cart(z, y), xx, p.alpha, &eh.line_breaks(y)).unwrap()
        };
        let h = 1e-4 * x0;
        let fd = (th(x0 + h) - th(x0 - h)) / (2.0 * h);
        assert_relative_eq!(fd, eh.eval_cart(x0, y), max_relative = 1e-6);
    }

    #[test]
    fn boussinesq_delta_constraint_enforced() {
        let p = PerturbParams::new(0.15, 0.1, 8.0).with_delta(0.49);
        match build_boussinesq_data(&p, &small_2d_grid()) {
            Err(Error::Parameter(msg)) => assert!(msg.contains("C1")),
            other => panic!("expected parameter error, got {other:?}"),
        }
    }

    fn report_grid_3d() -> Arc<Grid> {
        Grid::new(GridSpec::new(2f64.powi(-20), 2f64.powi(20), 128, 96)).unwrap()
    }

    #[test]
    fn smallness_3d_monotone_in_epsilon_and_m() {
        let g = report_grid_3d();
        let at = |eps: f64, m: f64| {
            let rep = smallness_report_3d(&PerturbParams::new(0.1, eps, m), &g, &[]).unwrap();
            rep["h3_f_tilde0"].value
        };
        let (lo, hi) = (at(1e-3, 64.0), (at(1e-1, 64.0)));
        assert!(lo.is_finite() && lo > 0.0);
        assert!(lo < hi, "ε-monotonicity failed: {lo} vs {hi}");

        // The M-truncation tail is isolated by pushing the angular band below
        // the lattice spacing; there the norm is sharply decreasing in M.
        let (m_big, m_small) = (at(1e-8, 256.0), at(1e-8, 16.0));
        assert!(
            2.0 * m_big < m_small,
            "M-monotonicity of the truncation tail failed: {m_big} vs {m_small}"
        );
        // At resolvable ε the band term dominates (it carries the cutoff's
        // third derivatives) and its own χ(R/M)-truncated radial mass grows
        // like −1/M, slightly inverting the ordering: the two values agree to
        // a few percent instead of decreasing in M.
        let (b_big, b_small) = (at(0.05, 256.0), at(0.05, 16.0));
        assert!(
            (b_big - b_small).abs() <= 0.05 * b_small,
            "band-dominated values drifted apart: {b_big} vs {b_small}"
        );
    }

    #[test]
    fn smallness_3d_fitted_constant() {
        let g = report_grid_3d();
        let mut sweep = Vec::new();
        for alpha in [0.08, 0.1, 0.15] {
            for eps in [0.025, 0.05, 0.1] {
                for m in [16.0, 64.0, 256.0] {
                    sweep.push(PerturbParams::new(alpha, eps, m));
                }
            }
        }
        let base = sweep.remove(0);
        let rep = smallness_report_3d(&base, &g, &sweep).unwrap();
        let c = rep["fitted_c"].value;
        assert!(c.is_finite() && c > 0.0);
        assert!(c <= 100.0, "fitted envelope constant {c} exceeds 100");
        assert_eq!(rep["sweep_points"].value, 27.0);
    }

    fn report_grid_2d() -> Arc<Grid> {
        Grid::new(GridSpec::new(2f64.powi(-40), 2f64.powi(40), 128, 64)).unwrap()
    }

    #[test]
    fn smallness_2d_zero_perturbation_vanishes() {
        let p = PerturbParams::new(0.1, 0.05, 64.0).with_delta(0.03);
        let rep = smallness_report_2d(&p, &report_grid_2d(), true).unwrap();
        assert_eq!(rep["E"].value, 0.0);
        assert_eq!(rep["E_I1"].value, 0.0);
        assert_eq!(rep["E_I2_I4"].value, 0.0);
        assert_eq!(rep["h3psi_I3"].value, 0.0);
    }

    #[test]
    fn smallness_2d_full_report() {
        let g = report_grid_2d();
        let p = PerturbParams::new(0.1, 0.05, 64.0).with_delta(0.03);
        let rep = smallness_report_2d(&p, &g, false).unwrap();
        let e = rep["E"].value;
        assert!(e.is_finite() && e > 0.0, "E = {e}");

        // The component entries are all squares and sum to E² exactly.
        let sum: f64 = rep
            .iter()
            .filter(|(k, _)| k.starts_with("component/"))
            .map(|(_, v)| v.value)
            .sum();
        assert_relative_eq!(sum, rep["E_squared"].value, max_relative = 1e-10);
        assert_relative_eq!(e * e, rep["E_squared"].value, max_relative = 1e-10);

        for key in ["E_I1", "E_I2_I4", "h3psi_I3", "envelope_ratio"] {
            let v = rep[key].value;
            assert!(v.is_finite() && v >= 0.0, "{key} = {v}");
        }

        // Jointly reducing (ε, δ) reduces the energy of the perturbation.
        let q = PerturbParams::new(0.1, 0.025, 64.0).with_delta(0.015);
        let rep_small = smallness_report_2d(&q, &g, false).unwrap();
        assert!(
            rep_small["E"].value < e,
            "(ε, δ)-monotonicity failed: {} vs {e}",
            rep_small["E"].value
        );
    }

    #[test]
    fn x_sigma_growth_3d_envelope() {
        let g = report_grid_3d();
        let mut family = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let p = PerturbParams::new(0.1, eps, 16.0);
            let b = build_f_tilde_3d(&p, &g, false).unwrap();
            let f_star = profile_field(ProfileKind::FStar, p.alpha, p.c_norm, g.clone()).unwrap();
            family.push((eps, f_star.zip_with(&b.f_tilde0, |a, b| a + b)));
        }
        let rep = x_sigma_growth_check(&family, 2, 14.0).unwrap();
        for (key, v) in &rep {
            assert!(v.value.is_finite(), "{key} not finite");
        }
        // k = 0 is just the sup of profile + perturbation: ε-independent.
        assert!(rep["k0/scaled_spread"].value <= 1.5);
        // For k ≥ 1 the sup is attained at the first angular columns, where
        // the raw profile is only C^{α/3} across the axis: the value is
        // lattice-limited and ε-independent, so the ε^k-scaled spread is
        // exactly (ε_max/ε_min)^k rather than O(1).
        for (k, expect) in [(1, 4.0), (2, 16.0)] {
            let s = rep[&format!("k{k}/scaled_spread")].value;
            assert!(
                (s / expect - 1.0).abs() <= 0.2,
                "k={k} spread {s} not the profile-dominated {expect}"
            );
        }
        assert!(x_sigma_growth_check(&family, 5, 14.0).is_err());
        assert!(x_sigma_growth_check(&[], 2, 14.0).is_err());
    }

    #[test]
    fn x_sigma_growth_smooth_band_attains_envelope() {
        // On an angular-cutoff stack times a smooth radial bump — data with
        // no axis singularity — the ε^{-k} envelope is sharp: ε^k · sup stays
        // within a small factor across the sweep.
        let g = report_grid_3d();
        let mut family = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let f = Field::from_fn(g.clone(), 0.1, Parity::None, CoordTag::ModPolar3D, |r, b| {
                let lr = r.ln();
                (-lr * lr).exp() * (1.0 - chi(b / eps))
            });
            family.push((eps, f));
        }
        let rep = x_sigma_growth_check(&family, 2, 14.0).unwrap();
        assert!(
            rep["k1/scaled_spread"].value <= 3.0,
            "ε·sup spread {}",
            rep["k1/scaled_spread"].value
        );
        assert!(
            rep["k2/scaled_spread"].value <= 5.0,
            "ε²·sup spread {}",
            rep["k2/scaled_spread"].value
        );
    }
}
