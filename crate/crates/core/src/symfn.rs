//! Closed-form primitive family for the profile calculus.
//!
//! Every profile in play is a finite sum of monomials
//! `c · R^p · (1+R)^q · sin(β)^a · cos(β)^b · ρ^m` with `ρ = R^{1/α}`.
//! The family is closed under `D_R`, `D_β`, `∂_β`, `y∂_y`, `∂_x`, `∂_y` and
//! multiplication by further monomials, so profile derivatives of any order
//! are exact.  The ρ-power is kept as a separate exponent and evaluation is
//! done in log space: `ρ = R^{1/α}` spans hundreds of orders of magnitude on
//! the working box and would otherwise overflow long before the combined
//! term does.

use crate::error::{Error, Result};

/// One monomial `coeff · R^r_pow (1+R)^opr_pow sin^sin_pow cos^cos_pow ρ^rho_pow`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTerm {
    pub coeff: f64,
    pub r_pow: f64,
    pub opr_pow: f64,
    pub sin_pow: f64,
    pub cos_pow: f64,
    pub rho_pow: f64,
}

impl SymTerm {
    pub fn constant(c: f64) -> Self {
        SymTerm {
            coeff: c,
            r_pow: 0.0,
            opr_pow: 0.0,
            sin_pow: 0.0,
            cos_pow: 0.0,
            rho_pow: 0.0,
        }
    }

    /// Log-magnitude of the term at `(R, β)`, excluding the coefficient.
    fn ln_mag(&self, ln_r: f64, ln_opr: f64, ln_sin: f64, ln_cos: f64, inv_alpha: f64) -> f64 {
        let mut l = (self.r_pow + self.rho_pow * inv_alpha) * ln_r + self.opr_pow * ln_opr;
        if self.sin_pow != 0.0 {
            l += self.sin_pow * ln_sin;
        }
        if self.cos_pow != 0.0 {
            l += self.cos_pow * ln_cos;
        }
        l
    }
}

/// A finite sum of [`SymTerm`]s with a fixed scaling exponent α.
#[derive(Debug, Clone, PartialEq)]
pub struct SymFn {
    pub terms: Vec<SymTerm>,
    pub alpha: f64,
}

impl SymFn {
    pub fn zero(alpha: f64) -> Self {
        SymFn { terms: vec![], alpha }
    }

    pub fn from_term(alpha: f64, t: SymTerm) -> Self {
        SymFn { terms: vec![t], alpha }
    }

    /// Evaluate at `(R, β)`; R must be positive, β in `[0, π/2]`.
    pub fn eval(&self, r: f64, beta: f64) -> f64 {
        self.eval_ln_weighted(r, beta, 0.0)
    }

    /// Evaluate `f(R,β) · e^{ln_weight}` without forming the factors
    /// separately.  Used by the weighted-sup norms, where the weight alone
    /// would underflow.
    pub fn eval_ln_weighted(&self, r: f64, beta: f64, ln_weight: f64) -> f64 {
        let ln_r = r.ln();
        let ln_opr = r.ln_1p(); // ln(1+R), accurate for small R
        let (s, c) = (beta.sin(), beta.cos());
        let ln_sin = s.ln();
        let ln_cos = c.ln();
        let inv_alpha = 1.0 / self.alpha;
        let mut total = 0.0;
        for t in &self.terms {
            if t.coeff == 0.0 {
                continue;
            }
            // sin^p at β = 0: the whole term vanishes for p > 0.
            if (s == 0.0 && t.sin_pow > 0.0) || (c == 0.0 && t.cos_pow > 0.0) {
                continue;
            }
            let l = t.ln_mag(ln_r, ln_opr, ln_sin, ln_cos, inv_alpha) + ln_weight;
            total += t.coeff.signum() * (l + t.coeff.abs().ln()).exp();
        }
        total
    }

    /// `D_R f = R ∂_R f`.
    pub fn d_r(&self) -> SymFn {
        let mut out = SymFn::zero(self.alpha);
        for t in &self.terms {
            // D_R R^p = p R^p,  D_R ρ^m = (m/α) ρ^m.
            let mut a = *t;
            a.coeff *= t.r_pow + t.rho_pow / self.alpha;
            out.terms.push(a);
            // D_R (1+R)^q = q R (1+R)^{q-1}.
            let mut b = *t;
            b.coeff *= t.opr_pow;
            b.r_pow += 1.0;
            b.opr_pow -= 1.0;
            out.terms.push(b);
        }
        out.collect()
    }

    /// `∂_β f`.
    pub fn partial_beta(&self) -> SymFn {
        let mut out = SymFn::zero(self.alpha);
        for t in &self.terms {
            let mut a = *t;
            a.coeff *= t.sin_pow;
            a.sin_pow -= 1.0;
            a.cos_pow += 1.0;
            out.terms.push(a);
            let mut b = *t;
            b.coeff *= -t.cos_pow;
            b.sin_pow += 1.0;
            b.cos_pow -= 1.0;
            out.terms.push(b);
        }
        out.collect()
    }

    /// `D_β f = sin(2β) ∂_β f`.
    pub fn d_beta(&self) -> SymFn {
        self.partial_beta().mul_monomial(2.0, 0.0, 0.0, 1.0, 1.0, 0.0)
    }

    /// `y ∂_y f = α sin²β · D_R f + ½ D_β f`.
    pub fn y_dy(&self) -> SymFn {
        let radial = self
            .d_r()
            .mul_monomial(self.alpha, 0.0, 0.0, 2.0, 0.0, 0.0);
        radial.add(&self.d_beta().scale(0.5))
    }

    /// `∂_x f = ρ^{-1}(α cos β D_R f − sin β ∂_β f)`.
    pub fn dx(&self) -> SymFn {
        let a = self
            .d_r()
            .mul_monomial(self.alpha, 0.0, 0.0, 0.0, 1.0, -1.0);
        let b = self
            .partial_beta()
            .mul_monomial(-1.0, 0.0, 0.0, 1.0, 0.0, -1.0);
        a.add(&b)
    }

    /// `∂_y f = ρ^{-1}(α sin β D_R f + cos β ∂_β f)`.
    pub fn dy(&self) -> SymFn {
        let a = self
            .d_r()
            .mul_monomial(self.alpha, 0.0, 0.0, 1.0, 0.0, -1.0);
        let b = self
            .partial_beta()
            .mul_monomial(1.0, 0.0, 0.0, 0.0, 1.0, -1.0);
        a.add(&b)
    }

    /// Multiply every term by `c · R^p (1+R)^q sin^a cos^b ρ^m`.
    pub fn mul_monomial(&self, c: f64, p: f64, q: f64, a: f64, b: f64, m: f64) -> SymFn {
        let terms = self
            .terms
            .iter()
            .map(|t| SymTerm {
                coeff: t.coeff * c,
                r_pow: t.r_pow + p,
                opr_pow: t.opr_pow + q,
                sin_pow: t.sin_pow + a,
                cos_pow: t.cos_pow + b,
                rho_pow: t.rho_pow + m,
            })
            .collect();
        SymFn { terms, alpha: self.alpha }
    }

    pub fn scale(&self, c: f64) -> SymFn {
        self.mul_monomial(c, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn add(&self, other: &SymFn) -> SymFn {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        SymFn { terms, alpha: self.alpha }.collect()
    }

    /// Merge terms with matching exponents and drop exact zeros.
    pub fn collect(mut self) -> SymFn {
        let mut merged: Vec<SymTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if t.coeff == 0.0 {
                continue;
            }
            let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
            if let Some(m) = merged.iter_mut().find(|m| {
                same(m.r_pow, t.r_pow)
                    && same(m.opr_pow, t.opr_pow)
                    && same(m.sin_pow, t.sin_pow)
                    && same(m.cos_pow, t.cos_pow)
                    && same(m.rho_pow, t.rho_pow)
            }) {
                m.coeff += t.coeff;
            } else {
                merged.push(t);
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        SymFn { terms: merged, alpha: self.alpha }
    }

    /// Parse a product-of-primitives expression, e.g.
    /// `"3 * R * (1+R)^-2 * cos^0.1"` with `+`/`-` separating terms.
    ///
    /// Recognized factors: numeric literals, `R`, `(1+R)`, `sin`, `cos`,
    /// `rho`, each optionally raised with `^`.  Anything else reports the
    /// offending factor.
    pub fn parse(alpha: f64, expr: &str) -> Result<SymFn> {
        let mut out = SymFn::zero(alpha);
        // Split into signed terms on top-level +/-.
        let mut terms: Vec<(f64, String)> = Vec::new();
        let mut cur = String::new();
        let mut sign = 1.0;
        let mut depth = 0i32;
        let mut seen_factor = false;
        for ch in expr.chars() {
            match ch {
                '(' => {
                    depth += 1;
                    cur.push(ch);
                }
                ')' => {
                    depth -= 1;
                    cur.push(ch);
                }
                '+' | '-' if depth == 0 && seen_factor && !cur.trim_end().ends_with(['^', '*', 'e', 'E']) => {
                    terms.push((sign, std::mem::take(&mut cur)));
                    sign = if ch == '-' { -1.0 } else { 1.0 };
                    seen_factor = false;
                }
                '-' if depth == 0 && !seen_factor => {
                    sign = -sign;
                }
                _ => {
                    if !ch.is_whitespace() {
                        seen_factor = true;
                    }
                    cur.push(ch);
                }
            }
        }
        if !cur.trim().is_empty() {
            terms.push((sign, cur));
        }

        for (sgn, term_src) in terms {
            let mut t = SymTerm::constant(sgn);
            for factor in term_src.split('*') {
                let factor = factor.trim();
                if factor.is_empty() {
                    continue;
                }
                let (base, pow) = match factor.split_once('^') {
                    Some((b, p)) => {
                        let pow: f64 = p.trim().parse().map_err(|_| {
                            Error::UnsupportedPrimitive(format!("exponent in `{factor}`"))
                        })?;
                        (b.trim(), pow)
                    }
                    None => (factor, 1.0),
                };
                match base {
                    "R" => t.r_pow += pow,
                    "(1+R)" => t.opr_pow += pow,
                    "sin" => t.sin_pow += pow,
                    "cos" => t.cos_pow += pow,
                    "rho" => t.rho_pow += pow,
                    other => match other.parse::<f64>() {
                        Ok(v) => t.coeff *= v.powf(pow),
                        Err(_) => {
                            return Err(Error::UnsupportedPrimitive(format!("`{other}`")))
                        }
                    },
                }
            }
            out.terms.push(t);
        }
        Ok(out.collect())
    }
}
