//! Modified polar coordinates `(R, β)` with `R = ρ^α`, `β = arctan(y/x)`.
//!
//! The compressed radius turns `C^α` radial behaviour at the origin into
//! Lipschitz behaviour in `R`, which is why all fields live in these
//! coordinates.  This module provides the exact transforms and the
//! first-order derivative identities connecting Cartesian and `(R, β)`
//! derivatives; everything is a pure function on immutable values.

use crate::error::{Error, Result};
use crate::symfn::SymFn;

/// A point in modified polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModPolar {
    /// Compressed radius `R = ρ^α`.
    pub r_mod: f64,
    /// Angle in `[0, π/2]`.
    pub beta: f64,
    /// Scaling exponent in `(0, 1)`.
    pub alpha: f64,
}

impl ModPolar {
    pub fn new(r_mod: f64, beta: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if r_mod < 0.0 {
            return Err(Error::Parameter(format!("negative radius R = {r_mod}")));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&beta) {
            return Err(Error::Parameter(format!("angle β = {beta} outside [0, π/2]")));
        }
        Ok(ModPolar { r_mod, beta, alpha })
    }

    /// `ln ρ = (ln R)/α`; safe even where `ρ` itself over/underflows f64.
    pub fn ln_rho(&self) -> f64 {
        self.r_mod.ln() / self.alpha
    }
}

/// Kind of discrete derivative understood by the grid stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DerivKind {
    /// `D_R = R ∂_R`.
    DR,
    /// `D_β = sin(2β) ∂_β`.
    DBeta,
    /// Plain `∂_β`.
    PartialBeta,
    /// Cartesian `∂_x` via the chain rule.
    PartialX,
    /// Cartesian `∂_y` via the chain rule.
    PartialY,
}

/// A derivative request: `kind` applied `order` times.
#[derive(Debug, Clone, Copy)]
pub struct DerivOp {
    pub kind: DerivKind,
    pub order: usize,
}

/// Maximum repeated application supported by the stencil machinery.
pub const MAX_DERIV_ORDER: usize = 6;

impl DerivOp {
    pub fn new(kind: DerivKind, order: usize) -> Result<Self> {
        if order > MAX_DERIV_ORDER {
            return Err(Error::Parameter(format!(
                "derivative order {order} exceeds supported maximum {MAX_DERIV_ORDER}"
            )));
        }
        Ok(DerivOp { kind, order })
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Cartesian point in the closed right half-plane to modified polar.
pub fn to_mod_polar(x: f64, y: f64, alpha: f64) -> Result<ModPolar> {
    check_alpha(alpha)?;
    if x == 0.0 && y == 0.0 {
        return Err(Error::CoordinateSingularity(
            "modified polar coordinates are undefined at the origin".into(),
        ));
    }
    if x < 0.0 || y < 0.0 {
        return Err(Error::Parameter(format!(
            "point ({x}, {y}) outside the closed first quadrant"
        )));
    }
    // hypot avoids under/overflow in x² + y²; powf(α) then contracts the range.
    let rho = x.hypot(y);
    let r_mod = (alpha * rho.ln()).exp();
    let beta = y.atan2(x);
    ModPolar::new(r_mod, beta, alpha)
}

/// Inverse map to Cartesian coordinates.
pub fn from_mod_polar(p: &ModPolar) -> (f64, f64) {
    let rho = p.ln_rho().exp();
    (rho * p.beta.cos(), rho * p.beta.sin())
}

/// Cartesian first derivatives from `(D_R f, ∂_β f)` at a point.
///
/// Implements `∂_x = ρ^{-1}(α cos β D_R − sin β ∂_β)` and
/// `∂_y = ρ^{-1}(α sin β D_R + cos β ∂_β)`.  The `∂_β` form (rather than
/// `D_β / sin 2β`) keeps the formulas finite at the axis endpoints.
pub fn cartesian_from_polar_derivs(d_r: f64, d_beta: f64, at: &ModPolar) -> Result<(f64, f64)> {
    if at.r_mod <= 0.0 {
        return Err(Error::CoordinateSingularity(
            "Cartesian derivatives undefined at R = 0".into(),
        ));
    }
    let (s, c) = (at.beta.sin(), at.beta.cos());
    let ln_rho = at.ln_rho();
    let combine = |v: f64| {
        if v == 0.0 {
            0.0
        } else {
            v.signum() * (v.abs().ln() - ln_rho).exp()
        }
    };
    let fx = combine(at.alpha * c * d_r - s * d_beta);
    let fy = combine(at.alpha * s * d_r + c * d_beta);
    Ok((fx, fy))
}

/// `(y∂_y)^k f` for a closed-form radial-angular function, via
/// `y∂_y = α sin²β · D_R + ½ D_β`.
pub fn y_dy_operator(f: &SymFn, k: usize) -> SymFn {
    let mut g = f.clone();
    for _ in 0..k {
        g = g.y_dy();
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfn::SymTerm;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_point_on_axis() {
        let p = to_mod_polar(1.0, 0.0, 0.5).unwrap();
        assert_eq!(p.r_mod, 1.0);
        assert_eq!(p.beta, 0.0);
    }

    #[test]
    fn diagonal_point() {
        let p = to_mod_polar(1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(p.r_mod, 2f64.powf(0.25), max_relative = 1e-15);
        assert_relative_eq!(p.beta, std::f64::consts::FRAC_PI_4, max_relative = 1e-15);
    }

    #[test]
    fn vertical_axis_point() {
        let p = to_mod_polar(0.0, 2.0, 0.1).unwrap();
        assert_relative_eq!(p.r_mod, 2f64.powf(0.1), max_relative = 1e-15);
        assert_relative_eq!(p.beta, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
    }

    #[test]
    fn origin_is_rejected() {
        assert!(matches!(
            to_mod_polar(0.0, 0.0, 0.3),
            Err(Error::CoordinateSingularity(_))
        ));
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        assert!(to_mod_polar(1.0, 1.0, 1.5).is_err());
        assert!(to_mod_polar(1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(
            ln_rho in -6.9f64..6.9,
            frac in 0.0f64..1.0,
            alpha in 0.02f64..0.98,
        ) {
            let rho = ln_rho.exp();
            let beta = frac * std::f64::consts::FRAC_PI_2;
            let (x, y) = (rho * beta.cos(), rho * beta.sin());
            let p = to_mod_polar(x, y, alpha).unwrap();
            let (x2, y2) = from_mod_polar(&p);
            prop_assert!((x2 - x).abs() <= 1e-12 * rho);
            prop_assert!((y2 - y).abs() <= 1e-12 * rho);
        }
    }

    #[test]
    fn radial_monomial_on_axis() {
        // f = R: D_R f = R, ∂_β f = 0; at ρ = 1, β = 0, α = 0.5 the
        // x-derivative is α R/ρ = 0.5.
        let at = ModPolar::new(1.0, 0.0, 0.5).unwrap();
        let (fx, fy) = cartesian_from_polar_derivs(1.0, 0.0, &at).unwrap();
        assert_relative_eq!(fx, 0.5, max_relative = 1e-15);
        assert_eq!(fy, 0.0);
    }

    #[test]
    fn angular_coordinate_gradient() {
        // f = β at ρ = 2, β = π/4: ∇f = (-sin β, cos β)/ρ.
        let alpha = 0.5;
        let at = ModPolar::new(2f64.powf(alpha), std::f64::consts::FRAC_PI_4, alpha).unwrap();
        let (fx, fy) = cartesian_from_polar_derivs(0.0, 1.0, &at).unwrap();
        let s = std::f64::consts::FRAC_PI_4.sin();
        assert_relative_eq!(fx, -s / 2.0, max_relative = 1e-13);
        assert_relative_eq!(fy, s / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn reconstructs_gradient_of_x() {
        // f = x = ρ cos β: D_R f = ρ cos β / α, ∂_β f = -ρ sin β.
        let alpha = 0.2;
        for &(x, y) in &[(0.5, 0.25), (2.0, 1.0), (0.01, 3.0)] {
            let at = to_mod_polar(x, y, alpha).unwrap();
            let rho = x.hypot(y);
            let d_r = rho * at.beta.cos() / alpha;
            let d_beta = -rho * at.beta.sin();
            let (fx, fy) = cartesian_from_polar_derivs(d_r, d_beta, &at).unwrap();
            assert_relative_eq!(fx, 1.0, max_relative = 1e-10);
            assert!(fy.abs() <= 1e-10);
        }
    }

    #[test]
    fn chain_rule_matches_symbolic_cartesian_derivatives() {
        // Random members of the primitive family: compare the pointwise
        // chain rule against the symbolic ∂_x, ∂_y.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alpha = 0.3;
        for _ in 0..20 {
            let t = SymTerm {
                coeff: rng.gen_range(-2.0..2.0),
                r_pow: rng.gen_range(0..4) as f64,
                opr_pow: -(rng.gen_range(0..3) as f64),
                sin_pow: rng.gen_range(0..3) as f64,
                cos_pow: rng.gen_range(0..3) as f64,
                rho_pow: rng.gen_range(0..3) as f64,
            };
            let f = SymFn::from_term(alpha, t);
            let (r, beta) = (rng.gen_range(0.2..3.0), rng.gen_range(0.1..1.4));
            let at = ModPolar::new(r, beta, alpha).unwrap();
            let (fx, fy) = cartesian_from_polar_derivs(
                f.d_r().eval(r, beta),
                f.partial_beta().eval(r, beta),
                &at,
            )
            .unwrap();
            let scale = 1.0 + fx.abs() + fy.abs();
            assert!((fx - f.dx().eval(r, beta)).abs() <= 1e-9 * scale);
            assert!((fy - f.dy().eval(r, beta)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn d_beta_degenerates_at_endpoints() {
        // D_β(sin 2β) = 2 sin 2β cos 2β vanishes at both endpoints exactly.
        let f = SymFn::from_term(
            0.5,
            SymTerm {
                coeff: 2.0,
                r_pow: 0.0,
                opr_pow: 0.0,
                sin_pow: 1.0,
                cos_pow: 1.0,
                rho_pow: 0.0,
            },
        );
        let d = f.d_beta();
        assert_eq!(d.eval(1.0, 0.0), 0.0);
        assert_relative_eq!(d.eval(1.0, std::f64::consts::FRAC_PI_2), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn y_dy_on_homogeneous_function() {
        // f = y² → y∂_y f = 2y², twice → 4y².
        let f = SymFn::from_term(
            0.5,
            SymTerm {
                coeff: 1.0,
                r_pow: 0.0,
                opr_pow: 0.0,
                sin_pow: 2.0,
                cos_pow: 0.0,
                rho_pow: 2.0,
            },
        );
        let g = y_dy_operator(&f, 2);
        assert_relative_eq!(g.eval(1.3, 0.8), 4.0 * f.eval(1.3, 0.8), max_relative = 1e-12);
    }

    #[test]
    fn y_dy_on_r_along_vertical_axis() {
        // On β = π/2, R = y^α so y∂_y R = αR.
        let f = SymFn::from_term(0.37, SymTerm { coeff: 1.0, r_pow: 1.0, opr_pow: 0.0, sin_pow: 0.0, cos_pow: 0.0, rho_pow: 0.0 });
        let g = y_dy_operator(&f, 1);
        let beta = std::f64::consts::FRAC_PI_2;
        for &r in &[0.3, 1.0, 5.0] {
            assert_relative_eq!(g.eval(r, beta), 0.37 * r, max_relative = 1e-12);
        }
    }
}
