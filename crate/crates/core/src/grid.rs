//! Tensor-product grids on `(R, β)`, field storage, singular-weight
//! quadrature, discrete derivatives, and field persistence.
//!
//! The radial nodes are log-uniform so that `D_R = ∂_{log R}` holds exactly
//! on the discrete level.  The angular nodes are Gauss–Jacobi abscissae for a
//! configurable endpoint weight `β^{jb} (π/2−β)^{ja}`: the weighted norms
//! carry endpoint factors like `(sin 2β)^{-σ}` that only a rule built around
//! the singularity can integrate accurately.  Weighted integrals divide the
//! grid's Jacobi weight back out, so accuracy is best when the grid exponents
//! are chosen near the exponents of the integrand actually being evaluated;
//! the weight specs suggest matching exponents for this purpose.

use std::io::{Read as _, Write as _};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::{check_alpha, DerivKind, DerivOp};
use crate::error::{Error, Result};
use crate::quad::{fd_weights, gauss_jacobi_on, interp_weights};

/// Width of the sliding stencils used for discrete derivatives.
const STENCIL: usize = 9;

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_beta: usize,
    /// Jacobi exponent of the `(π/2 − β)` factor (the `β = π/2` end).
    pub jacobi_top: f64,
    /// Jacobi exponent of the `β` factor (the `β = 0` end).
    pub jacobi_bottom: f64,
}

impl GridSpec {
    /// Log-uniform radial box with plain (Legendre) angular nodes.
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_beta: usize) -> Self {
        GridSpec {
            r_min,
            r_max,
            n_r,
            n_beta,
            jacobi_top: 0.0,
            jacobi_bottom: 0.0,
        }
    }

    pub fn with_jacobi(mut self, bottom: f64, top: f64) -> Self {
        self.jacobi_bottom = bottom;
        self.jacobi_top = top;
        self
    }

    /// Default working box: `R ∈ [2^{-40}, 2^{40}]`, 256 × 128.
    pub fn default_box() -> Self {
        GridSpec::new(2f64.powi(-40), 2f64.powi(40), 256, 128)
    }
}

/// A realized grid: nodes, quadrature weights, and derivative stencils.
#[derive(Debug)]
pub struct Grid {
    pub spec: GridSpec,
    pub r_nodes: Vec<f64>,
    pub ln_r_nodes: Vec<f64>,
    pub beta_nodes: Vec<f64>,
    /// Interpolatory weights for `∫ · dR` over the box.
    pub w_r: Vec<f64>,
    /// Raw Gauss–Jacobi weights (they integrate `β^{jb}(π/2−β)^{ja} ·` poly).
    pub w_beta_jacobi: Vec<f64>,
    /// `ln` of the Jacobi weight function at each angular node.
    ln_wf_beta: Vec<f64>,
    /// First-derivative stencils: per node, (window start, weights).
    d_lnr: Vec<(usize, Vec<f64>)>,
    d_beta: Vec<(usize, Vec<f64>)>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        if !(spec.r_min > 0.0 && spec.r_max > spec.r_min) {
            return Err(Error::Parameter(format!(
                "invalid radial box [{}, {}]",
                spec.r_min, spec.r_max
            )));
        }
        if spec.n_r < STENCIL || spec.n_beta < STENCIL {
            return Err(Error::Parameter(format!(
                "grid must have at least {STENCIL} nodes per direction"
            )));
        }
        if spec.jacobi_top <= -1.0 || spec.jacobi_bottom <= -1.0 {
            return Err(Error::Parameter(
                "Jacobi exponents must exceed -1".into(),
            ));
        }

        let ln_min = spec.r_min.ln();
        let ln_max = spec.r_max.ln();
        let h = (ln_max - ln_min) / (spec.n_r - 1) as f64;
        let ln_r_nodes: Vec<f64> = (0..spec.n_r).map(|i| ln_min + h * i as f64).collect();
        let r_nodes: Vec<f64> = ln_r_nodes.iter().map(|&t| t.exp()).collect();
        let w_r = interp_weights(&r_nodes, spec.r_min, spec.r_max);

        let half_pi = std::f64::consts::FRAC_PI_2;
        let rule = gauss_jacobi_on(spec.n_beta, 0.0, half_pi, spec.jacobi_top, spec.jacobi_bottom)?;
        let beta_nodes = rule.nodes;
        let w_beta_jacobi = rule.weights;
        let ln_wf_beta: Vec<f64> = beta_nodes
            .iter()
            .map(|&b| spec.jacobi_bottom * b.ln() + spec.jacobi_top * (half_pi - b).ln())
            .collect();

        let d_lnr = Self::build_stencils(&ln_r_nodes);
        let d_beta = Self::build_stencils(&beta_nodes);

        Ok(Arc::new(Grid {
            spec,
            r_nodes,
            ln_r_nodes,
            beta_nodes,
            w_r,
            w_beta_jacobi,
            ln_wf_beta,
            d_lnr,
            d_beta,
        }))
    }

    fn build_stencils(xs: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let n = xs.len();
        (0..n)
            .map(|i| {
                let start = i
                    .saturating_sub(STENCIL / 2)
                    .min(n - STENCIL);
                (start, fd_weights(&xs[start..start + STENCIL], xs[i], 1))
            })
            .collect()
    }

    /// `ln` of the angular Jacobi weight function at node `j`; integrands
    /// built per-node must divide this factor back out of `w_beta_jacobi`.
    pub fn ln_wf(&self, j: usize) -> f64 {
        self.ln_wf_beta[j]
    }

    /// Grid with half the resolution in each direction, same box and exponents.
    pub fn half_resolution(&self) -> Result<Arc<Grid>> {
        let mut spec = self.spec;
        spec.n_r = (spec.n_r / 2).max(STENCIL);
        spec.n_beta = (spec.n_beta / 2).max(STENCIL);
        Grid::new(spec)
    }
}

/// Parity metadata carried by a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    OddX,
    EvenX,
    OddZ,
    EvenZ,
    None,
}

/// Which coordinate chart a field's samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordTag {
    ModPolar2D,
    ModPolar3D,
    CartesianHalfPlane,
}

/// Scalar samples on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    /// `n_r × n_beta`, R-major.
    pub values: Array2<f64>,
    pub grid: Arc<Grid>,
    pub parity: Parity,
    pub coord_tag: CoordTag,
    pub alpha: f64,
}

/// A quadrature value with an a-posteriori error estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Integrated {
    pub value: f64,
    pub error_estimate: f64,
}

/// Named weight functions for the weighted integrals and norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `(1+R)^4/R^4 · (sin 2β)^{-σ}`
    Phi1,
    /// `(1+R)^4/R^4 · (sin 2β)^{-γ}`
    Phi2,
    /// `(1+R)^4/R^4 · (sin β cos β)^{-σ}`
    Psi1,
    /// `(1+R)^4/R^4 · (sin β)^{-σ}(cos β)^{-γ}`
    Psi2,
    /// `(R^{-3}+1) sin 2β`
    L2Omega,
    /// `(R^{-4}+R) cos(β)^{-α}`
    L2Eta,
    Plain,
}

/// A weight with its parameters; `σ = 99/100` and `γ = 1 + α/10` by default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl WeightSpec {
    pub fn new(kind: WeightKind, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(WeightSpec {
            kind,
            alpha,
            sigma: 0.99,
            gamma: 1.0 + alpha / 10.0,
        })
    }

    /// `ln` of the radial factor at radius `r`.
    pub fn ln_radial(&self, r: f64) -> f64 {
        match self.kind {
            WeightKind::Phi1 | WeightKind::Phi2 | WeightKind::Psi1 | WeightKind::Psi2 => {
                4.0 * (r.ln_1p() - r.ln())
            }
            WeightKind::L2Omega => (r.powi(-3) + 1.0).ln(),
            WeightKind::L2Eta => (r.powi(-4) + r).ln(),
            WeightKind::Plain => 0.0,
        }
    }

    /// `ln` of the angular factor at angle `β ∈ (0, π/2)`.
    pub fn ln_angular(&self, beta: f64) -> f64 {
        let (s, c) = (beta.sin(), beta.cos());
        match self.kind {
            WeightKind::Phi1 => -self.sigma * (2.0 * s * c).ln(),
            WeightKind::Phi2 => -self.gamma * (2.0 * s * c).ln(),
            WeightKind::Psi1 => -self.sigma * (s * c).ln(),
            WeightKind::Psi2 => -self.sigma * s.ln() - self.gamma * c.ln(),
            WeightKind::L2Omega => (2.0 * s * c).ln(),
            WeightKind::L2Eta => -self.alpha * c.ln(),
            WeightKind::Plain => 0.0,
        }
    }

    /// Power-law exponents of the radial factor as `R → 0` and `R → ∞`.
    /// Used by the norm-level divergence detectors, which treat the box as a
    /// proxy for the half-line `R ∈ (0, ∞)`.
    pub fn radial_exponents(&self) -> (f64, f64) {
        match self.kind {
            WeightKind::Phi1 | WeightKind::Phi2 | WeightKind::Psi1 | WeightKind::Psi2 => {
                (-4.0, 0.0)
            }
            WeightKind::L2Omega => (-3.0, 0.0),
            WeightKind::L2Eta => (-4.0, 1.0),
            WeightKind::Plain => (0.0, 0.0),
        }
    }

    /// Power-law exponents of the angular factor at `β = 0` and `β = π/2`.
    /// Used by the divergence detector and to choose grid Jacobi exponents.
    pub fn angular_exponents(&self) -> (f64, f64) {
        match self.kind {
            WeightKind::Phi1 => (-self.sigma, -self.sigma),
            WeightKind::Phi2 => (-self.gamma, -self.gamma),
            WeightKind::Psi1 => (-self.sigma, -self.sigma),
            WeightKind::Psi2 => (-self.sigma, -self.gamma),
            WeightKind::L2Omega => (1.0, 1.0),
            WeightKind::L2Eta => (0.0, -self.alpha),
            WeightKind::Plain => (0.0, 0.0),
        }
    }
}

impl Field {
    /// Build a field by evaluating `f(R, β)` at the nodes (parallel over rows).
    pub fn from_fn<F>(
        grid: Arc<Grid>,
        alpha: f64,
        parity: Parity,
        coord_tag: CoordTag,
        f: F,
    ) -> Field
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let n_r = grid.spec.n_r;
        let n_beta = grid.spec.n_beta;
        let mut values = Array2::zeros((n_r, n_beta));
        values
            .outer_iter_mut()
            .into_iter()
            .enumerate()
            .collect::<Vec<_>>()
            .into_par_iter()
            .for_each(|(i, mut row)| {
                let r = grid.r_nodes[i];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(r, grid.beta_nodes[j]);
                }
            });
        Field {
            values,
            grid,
            parity,
            coord_tag,
            alpha,
        }
    }

    pub fn zeros(grid: Arc<Grid>, alpha: f64, parity: Parity, coord_tag: CoordTag) -> Field {
        let n_r = grid.spec.n_r;
        let n_beta = grid.spec.n_beta;
        Field {
            values: Array2::zeros((n_r, n_beta)),
            grid,
            parity,
            coord_tag,
            alpha,
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        let mut out = self.clone();
        out.values.mapv_inplace(f);
        out
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Field {
        assert!(
            Arc::ptr_eq(&self.grid, &other.grid),
            "fields live on different grids"
        );
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values)
            .and(&other.values)
            .for_each(|a, &b| *a = f(*a, b));
        out
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Bicubic Lagrange interpolation at `(ln R, β)`.
    ///
    /// Outside the radial box the field is taken to vanish (fields in play
    /// are compactly truncated in `R`); in `β` the edge stencil extrapolates
    /// over the short gap to the interval endpoints.
    pub fn interp(&self, ln_r: f64, beta: f64) -> f64 {
        let g = &self.grid;
        let n_r = g.spec.n_r;
        let n_b = g.spec.n_beta;
        let h = g.ln_r_nodes[1] - g.ln_r_nodes[0];
        if ln_r < g.ln_r_nodes[0] - 0.5 * h || ln_r > g.ln_r_nodes[n_r - 1] + 0.5 * h {
            return 0.0;
        }
        let pos = (ln_r - g.ln_r_nodes[0]) / h;
        let i0 = (pos.floor() as isize - 1).clamp(0, n_r as isize - 4) as usize;

        let j_hi = g.beta_nodes.partition_point(|&b| b < beta);
        let j0 = (j_hi as isize - 2).clamp(0, n_b as isize - 4) as usize;

        // Lagrange basis in each direction.
        let mut lr = [0.0; 4];
        for a in 0..4 {
            let xa = g.ln_r_nodes[i0 + a];
            let mut l = 1.0;
            for b in 0..4 {
                if b != a {
                    let xb = g.ln_r_nodes[i0 + b];
                    l *= (ln_r - xb) / (xa - xb);
                }
            }
            lr[a] = l;
        }
        let mut lb = [0.0; 4];
        for a in 0..4 {
            let xa = g.beta_nodes[j0 + a];
            let mut l = 1.0;
            for b in 0..4 {
                if b != a {
                    let xb = g.beta_nodes[j0 + b];
                    l *= (beta - xb) / (xa - xb);
                }
            }
            lb[a] = l;
        }
        let mut v = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                v += lr[a] * lb[b] * self.values[(i0 + a, j0 + b)];
            }
        }
        v
    }

    /// Resample onto another grid by interpolation.
    pub fn resample(&self, grid: Arc<Grid>) -> Field {
        let alpha = self.alpha;
        let parity = self.parity;
        let tag = self.coord_tag;
        let src = self.clone();
        Field::from_fn(grid, alpha, parity, tag, move |r, beta| {
            src.interp(r.ln(), beta)
        })
    }

    /// Discrete derivative `op.kind` applied `op.order` times.
    pub fn deriv(&self, op: DerivOp) -> Result<Field> {
        let mut f = self.clone();
        for _ in 0..op.order {
            f = f.deriv_once(op.kind)?;
        }
        Ok(f)
    }

    fn deriv_once(&self, kind: DerivKind) -> Result<Field> {
        let g = &self.grid;
        let n_r = g.spec.n_r;
        let n_b = g.spec.n_beta;
        let apply_r = |src: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::zeros((n_r, n_b));
            for i in 0..n_r {
                let (start, w) = &g.d_lnr[i];
                for j in 0..n_b {
                    let mut s = 0.0;
                    for (k, &wk) in w.iter().enumerate() {
                        s += wk * src[(start + k, j)];
                    }
                    out[(i, j)] = s;
                }
            }
            out
        };
        let apply_b = |src: &Array2<f64>| -> Array2<f64> {
            let mut out = Array2::zeros((n_r, n_b));
            for i in 0..n_r {
                for j in 0..n_b {
                    let (start, w) = &g.d_beta[j];
                    let mut s = 0.0;
                    for (k, &wk) in w.iter().enumerate() {
                        s += wk * src[(i, start + k)];
                    }
                    out[(i, j)] = s;
                }
            }
            out
        };

        let mut out = self.clone();
        match kind {
            DerivKind::DR => {
                // Log-uniform radial nodes: D_R = ∂_{ln R} exactly.
                out.values = apply_r(&self.values);
            }
            DerivKind::PartialBeta => {
                out.values = apply_b(&self.values);
            }
            DerivKind::DBeta => {
                let mut d = apply_b(&self.values);
                for (j, &b) in g.beta_nodes.iter().enumerate() {
                    let s2 = (2.0 * b).sin();
                    for i in 0..n_r {
                        d[(i, j)] *= s2;
                    }
                }
                out.values = d;
            }
            DerivKind::PartialX | DerivKind::PartialY => {
                // ∂_x = ρ^{-1}(α cos β D_R − sin β ∂_β), and the y-analogue.
                let dr = apply_r(&self.values);
                let db = apply_b(&self.values);
                let alpha = self.alpha;
                let mut v = Array2::zeros((n_r, n_b));
                for i in 0..n_r {
                    let ln_rho = g.ln_r_nodes[i] / alpha;
                    for j in 0..n_b {
                        let (s, c) = (g.beta_nodes[j].sin(), g.beta_nodes[j].cos());
                        let t = match kind {
                            DerivKind::PartialX => alpha * c * dr[(i, j)] - s * db[(i, j)],
                            _ => alpha * s * dr[(i, j)] + c * db[(i, j)],
                        };
                        // ρ^{-1} applied in logs: ρ itself may overflow f64.
                        v[(i, j)] = if t == 0.0 {
                            0.0
                        } else {
                            t.signum() * (t.abs().ln() - ln_rho).exp()
                        };
                    }
                }
                out.values = v;
            }
        }
        Ok(out)
    }

    /// Weighted integral `∫∫ f · w dR dβ` over the grid box.
    ///
    /// The error estimate compares against an embedded half-resolution rule;
    /// non-integrable combinations (weight singularity not cancelled by the
    /// field's endpoint vanishing) are detected from the empirical endpoint
    /// power of the field and reported as divergent.
    pub fn integrate(&self, w: &WeightSpec) -> Result<Integrated> {
        self.check_integrable(w)?;
        let value = self.integrate_raw(w);
        // Embedded half-resolution estimate via interpolation.
        let half = self.grid.half_resolution()?;
        let coarse = self.resample(half).integrate_raw(w);
        // Radial truncation: charge the outermost-row contributions as a
        // proxy for the analytic tail beyond the box.
        let tail = self.edge_row_contribution(w);
        Ok(Integrated {
            value,
            error_estimate: (value - coarse).abs() + tail,
        })
    }

    fn integrate_raw(&self, w: &WeightSpec) -> f64 {
        let g = &self.grid;
        let rad: Vec<f64> = g
            .r_nodes
            .iter()
            .zip(&g.w_r)
            .map(|(&r, &wr)| w.ln_radial(r).exp() * wr)
            .collect();
        let ang: Vec<f64> = g
            .beta_nodes
            .iter()
            .zip(g.w_beta_jacobi.iter().zip(&g.ln_wf_beta))
            .map(|(&b, (&wj, &ln_wf))| (w.ln_angular(b) - ln_wf).exp() * wj)
            .collect();
        let mut total = 0.0;
        for i in 0..g.spec.n_r {
            let mut row = 0.0;
            for j in 0..g.spec.n_beta {
                row += self.values[(i, j)] * ang[j];
            }
            total += row * rad[i];
        }
        total
    }

    fn edge_row_contribution(&self, w: &WeightSpec) -> f64 {
        let g = &self.grid;
        let mut edge = 0.0;
        for &i in &[0usize, g.spec.n_r - 1] {
            let rad = w.ln_radial(g.r_nodes[i]).exp() * g.w_r[i];
            let mut row = 0.0;
            for j in 0..g.spec.n_beta {
                let ang = (w.ln_angular(g.beta_nodes[j]) - g.ln_wf_beta[j]).exp()
                    * g.w_beta_jacobi[j];
                row += self.values[(i, j)] * ang;
            }
            edge += (row * rad).abs();
        }
        edge
    }

    /// Estimate the endpoint power of the field from the outermost node pair
    /// and reject exponent sums at or below −1.
    fn check_integrable(&self, w: &WeightSpec) -> Result<()> {
        let g = &self.grid;
        let n_b = g.spec.n_beta;
        let (e0, e1) = w.angular_exponents();
        let col_sup = |j: usize| -> f64 {
            (0..g.spec.n_r)
                .map(|i| self.values[(i, j)].abs())
                .fold(0.0f64, f64::max)
        };
        let half_pi = std::f64::consts::FRAC_PI_2;
        // Fit |f| ~ c β^p (resp. (π/2−β)^p) per end.  The decay exponent is
        // taken as the *maximum* over several column pairs near the end: a
        // narrow cutoff band parked a few columns in (or one-sided-stencil
        // junk at the outermost column) distorts any single pair, but a field
        // that genuinely fails to vanish at the endpoint fits p ≈ 0 on every
        // pair.
        let offsets: &[usize] = if n_b >= 40 { &[0, 4, 8, 12, 16] } else { &[0, 1] };
        for (end_exp, at_zero) in [(e0, true), (e1, false)] {
            if end_exp >= -1.0 + 1e-9 {
                continue; // weight alone is integrable
            }
            let col = |k: usize| if at_zero { k } else { n_b - 1 - k };
            let dist = |k: usize| {
                if at_zero {
                    g.beta_nodes[k]
                } else {
                    half_pi - g.beta_nodes[n_b - 1 - k]
                }
            };
            let sups: Vec<f64> = offsets.iter().map(|&k| col_sup(col(k))).collect();
            // Exact/subnormal zeros count as vanished, not as data points.
            if sups.iter().all(|&s| s <= 1e-290) {
                continue;
            }
            let mut p = f64::NEG_INFINITY;
            for a in 0..offsets.len() {
                for b in (a + 1)..offsets.len() {
                    let (fa, fb) = (sups[a], sups[b]);
                    if fa <= 1e-290 || fb <= 1e-290 {
                        continue;
                    }
                    let (da, db) = (dist(offsets[a]), dist(offsets[b]));
                    p = p.max((fa / fb).ln() / (da / db).ln());
                }
            }
            if !p.is_finite() {
                continue;
            }
            if p + end_exp <= -1.0 + 1e-9 {
                return Err(Error::DivergentIntegral(format!(
                    "angular weight exponent {end_exp:.3} with field endpoint power {p:.3}: \
                     combined exponent {:.3} ≤ -1 (endpoint column sups {:.3e} .. {:.3e})",
                    p + end_exp,
                    sups[0],
                    sups[sups.len() - 1]
                )));
            }
        }
        Ok(())
    }

    /// Write the field: one JSON header line, a newline, then the row-major
    /// little-endian f64 payload.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let header = FieldHeader {
            format: FORMAT_TAG.into(),
            grid: self.grid.spec,
            parity: self.parity,
            coord_tag: self.coord_tag,
            alpha: self.alpha,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            payload_bytes: (self.values.len() * 8) as u64,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for &v in self.values.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Field> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        let nl = raw
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format {
                offset: raw.len() as u64,
                msg: "missing header terminator".into(),
            })?;
        let header: FieldHeader =
            serde_json::from_slice(&raw[..nl]).map_err(|e| Error::Format {
                offset: 0,
                msg: format!("bad header: {e}"),
            })?;
        if header.format != FORMAT_TAG {
            return Err(Error::Format {
                offset: 0,
                msg: format!("unknown format tag `{}`", header.format),
            });
        }
        let payload = &raw[nl + 1..];
        let expect = header.grid.n_r * header.grid.n_beta * 8;
        if payload.len() != expect || header.payload_bytes as usize != expect {
            return Err(Error::Format {
                offset: (nl + 1) as u64,
                msg: format!(
                    "payload length {} does not match header ({} expected)",
                    payload.len(),
                    expect
                ),
            });
        }
        let grid = Grid::new(header.grid)?;
        let mut values = Array2::zeros((header.grid.n_r, header.grid.n_beta));
        for (k, v) in values.iter_mut().enumerate() {
            let b: [u8; 8] = payload[8 * k..8 * k + 8].try_into().unwrap();
            *v = f64::from_le_bytes(b);
        }
        Ok(Field {
            values,
            grid,
            parity: header.parity,
            coord_tag: header.coord_tag,
            alpha: header.alpha,
        })
    }
}

const FORMAT_TAG: &str = "selfsim-field-v1";

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    format: String,
    grid: GridSpec,
    parity: Parity,
    coord_tag: CoordTag,
    alpha: f64,
    created_unix: u64,
    payload_bytes: u64,
}
