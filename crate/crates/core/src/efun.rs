//! Elliptic Pochhammer symbols and the elliptic gamma function.
//!
//! Definitions:
//!
//! ```text
//! (x; b)        = prod_{k>=0} (1 - b^k x)
//! (x; p, q)     = prod_{r,s>=0} (1 - p^r q^s x)
//! Gamma_{p,q}(x) = (pq/x; p, q) / (x; p, q)
//! ```
//!
//! The double product is evaluated diagonal-major (increasing `r+s`) and
//! truncated once the largest term on a diagonal falls below the policy
//! cutoff, which bounds the rounding independently of whether `|p|` or
//! `|q|` dominates.
//!
//! Three base variants are used throughout the identity catalog:
//! `Gamma_{p,q}`, `Gamma_{p,q^2}` and `Gamma_{sqrt p, sqrt q}`. The last
//! one takes principal square roots and is restricted to real bases by
//! default, since complex square roots would introduce a branch choice
//! the catalog never needs.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// The pair `(p, q)` with `0 < |p| < 1` and `0 < |q| < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Base {
    pub p: Complex64,
    pub q: Complex64,
}

impl Base {
    pub fn new(p: Complex64, q: Complex64) -> Result<Base> {
        let b = Base { p, q };
        b.validate()?;
        Ok(b)
    }

    pub fn real(p: f64, q: f64) -> Result<Base> {
        Base::new(Complex64::new(p, 0.0), Complex64::new(q, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let (np, nq) = (self.p.norm(), self.q.norm());
        if !(np > 0.0 && np < 1.0 && nq > 0.0 && nq < 1.0) {
            return Err(CoreError::BaseInvalid { p: np, q: nq });
        }
        Ok(())
    }

    pub fn pq(&self) -> Complex64 {
        self.p * self.q
    }

    pub fn is_real(&self) -> bool {
        self.p.im == 0.0 && self.q.im == 0.0 && self.p.re > 0.0 && self.q.re > 0.0
    }

    /// Largest base modulus; controls truncation depth and pole spacing.
    pub fn max_modulus(&self) -> f64 {
        self.p.norm().max(self.q.norm())
    }
}

/// Which of the three gamma bases a factor lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GammaVariant {
    /// `Gamma_{p,q}`
    #[serde(rename = "pq")]
    Pq,
    /// `Gamma_{p,q^2}`
    #[serde(rename = "pq2")]
    Pq2,
    /// `Gamma_{sqrt p, sqrt q}`
    #[serde(rename = "half")]
    Half,
}

impl GammaVariant {
    /// The base the variant actually evaluates in. `Half` requires a real
    /// base unless `allow_complex_half` is set, in which case principal
    /// square roots are taken.
    pub fn resolve(&self, base: &Base, allow_complex_half: bool) -> Result<Base> {
        base.validate()?;
        match self {
            GammaVariant::Pq => Ok(*base),
            GammaVariant::Pq2 => Base::new(base.p, base.q * base.q),
            GammaVariant::Half => {
                if !base.is_real() && !allow_complex_half {
                    return Err(CoreError::HalfVariantComplexBase);
                }
                Base::new(base.p.sqrt(), base.q.sqrt())
            }
        }
    }
}

/// Truncation control for the infinite products.
#[derive(Clone, Copy, Debug)]
pub struct TruncationPolicy {
    /// Terms with modulus below this are dropped. Must stay below 1e-10.
    pub eps: f64,
    /// Hard cap on the number of product terms.
    pub max_terms: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            eps: 1e-17,
            max_terms: 4_000_000,
        }
    }
}

impl TruncationPolicy {
    pub fn with_eps(eps: f64) -> Self {
        assert!(eps < 1e-10, "truncation cutoff must stay below 1e-10");
        TruncationPolicy {
            eps,
            ..Default::default()
        }
    }
}

/// Term counts reported alongside a truncated product.
#[derive(Clone, Copy, Debug, Default)]
pub struct TruncationInfo {
    pub terms: usize,
    pub diagonals: usize,
}

/// `(x; b)_inf`, truncated once `|b^k x| < eps`.
pub fn qpoch1(x: Complex64, b: Complex64, pol: &TruncationPolicy) -> Result<Complex64> {
    if b.norm() >= 1.0 {
        return Err(CoreError::BaseInvalid {
            p: b.norm(),
            q: 0.0,
        });
    }
    let one = Complex64::new(1.0, 0.0);
    let mut acc = one;
    let mut bk = one;
    for k in 0.. {
        if k >= pol.max_terms {
            return Err(CoreError::TruncationCap(pol.max_terms));
        }
        let term = bk * x;
        if term.norm() < pol.eps {
            break;
        }
        acc *= one - term;
        bk *= b;
    }
    Ok(acc)
}

/// `(x; p, q)` with diagnostics.
pub fn poch2_detailed(
    x: Complex64,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<(Complex64, TruncationInfo)> {
    base.validate()?;
    if x.norm() == 0.0 {
        return Ok((Complex64::new(1.0, 0.0), TruncationInfo::default()));
    }
    let one = Complex64::new(1.0, 0.0);
    let top = base.max_modulus();
    let mut acc = one;
    let mut info = TruncationInfo::default();
    // Powers of p are extended lazily so a diagonal costs one fresh
    // multiplication per entry.
    let mut p_pows: Vec<Complex64> = vec![one];
    let mut q_pows: Vec<Complex64> = vec![one];
    let mut corner = x.norm();
    for d in 0.. {
        if info.terms + d + 1 > pol.max_terms {
            return Err(CoreError::TruncationCap(pol.max_terms));
        }
        p_pows.push(p_pows[d] * base.p);
        q_pows.push(q_pows[d] * base.q);
        for r in 0..=d {
            acc *= one - p_pows[r] * q_pows[d - r] * x;
        }
        info.terms += d + 1;
        info.diagonals = d + 1;
        // Largest modulus on the next diagonal is at a corner.
        corner *= top;
        if corner < pol.eps {
            break;
        }
    }
    Ok((acc, info))
}

/// `(x; p, q) = prod_{r,s>=0} (1 - p^r q^s x)`.
pub fn poch2(x: Complex64, base: &Base, pol: &TruncationPolicy) -> Result<Complex64> {
    poch2_detailed(x, base, pol).map(|(v, _)| v)
}

/// Checks whether `x` lies within `radius` of a point `p^-a q^-b`
/// (`a, b >= 0`); these are the poles of `Gamma_{p,q}`.
pub fn nearest_inverse_power(x: Complex64, base: &Base, radius: f64) -> Option<(Complex64, u32, u32)> {
    let nx = x.norm();
    let (np, nq) = (base.p.norm(), base.q.norm());
    if nx + radius < 1.0 {
        return None; // all candidates have modulus >= 1
    }
    let bound_a = ((nx + radius).ln() / (1.0 / np).ln()).ceil() as i64;
    let bound_b = ((nx + radius).ln() / (1.0 / nq).ln()).ceil() as i64;
    let mut best: Option<(Complex64, u32, u32)> = None;
    let mut best_d = radius;
    for a in 0..=bound_a.max(0) {
        for b in 0..=bound_b.max(0) {
            let cand = (base.p.powi(a as i32) * base.q.powi(b as i32)).inv();
            let d = (x - cand).norm();
            if d <= best_d {
                best_d = d;
                best = Some((cand, a as u32, b as u32));
            }
        }
    }
    best
}

/// Pole-detection radius: arguments this close to a pole are an error
/// rather than a huge number.
pub const POLE_RADIUS: f64 = 1e-12;

/// `Gamma_{p,q}(x) = (pq/x; p, q) / (x; p, q)`, with pole detection.
pub fn egamma(x: Complex64, base: &Base, pol: &TruncationPolicy) -> Result<Complex64> {
    if let Some((pole, a, b)) = nearest_inverse_power(x, base, POLE_RADIUS) {
        return Err(CoreError::PoleAtArgument {
            x,
            pole,
            a,
            b,
            radius: POLE_RADIUS,
        });
    }
    let num = poch2(base.pq() / x, base, pol)?;
    let den = poch2(x, base, pol)?;
    Ok(num / den)
}

/// `1 / Gamma_{p,q}(x)`, which is zero (not an error) at the poles of
/// `Gamma`; errors near the zeros of `Gamma` instead, i.e. when `pq/x`
/// approaches `p^-a q^-b`.
pub fn egamma_recip(x: Complex64, base: &Base, pol: &TruncationPolicy) -> Result<Complex64> {
    if let Some((pole, a, b)) = nearest_inverse_power(base.pq() / x, base, POLE_RADIUS) {
        return Err(CoreError::PoleAtArgument {
            x: base.pq() / x,
            pole,
            a,
            b,
            radius: POLE_RADIUS,
        });
    }
    let num = poch2(x, base, pol)?;
    let den = poch2(base.pq() / x, base, pol)?;
    Ok(num / den)
}

/// Gamma in one of the three variant bases.
pub fn egamma_variant(
    x: Complex64,
    base: &Base,
    variant: GammaVariant,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    let b = variant.resolve(base, false)?;
    egamma(x, &b, pol)
}

/// Values of `Gamma_B(coef * w^k)` for `w = e^{2 pi i / n}`, `k = 0..n`.
///
/// Densities on the torus only ever evaluate gammas at such points, so one
/// table per (coefficient, grid) pair makes every density evaluation a
/// pair of table lookups. Tables are built once up front and then shared
/// read-only across quadrature threads.
pub fn gamma_table(
    coef: Complex64,
    base: &Base,
    n: usize,
    pol: &TruncationPolicy,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let z = Complex64::from_polar(1.0, theta);
        out.push(egamma(coef * z, base, pol)?);
    }
    Ok(out)
}

/// Values of `1 / Gamma_B(w^k)`; the `k = 0` entry is the kernel zero at
/// `z = 1` and evaluates to 0.
pub fn gamma_recip_unit_table(
    base: &Base,
    n: usize,
    pol: &TruncationPolicy,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let z = Complex64::from_polar(1.0, theta);
        out.push(egamma_recip(z, base, pol)?);
    }
    Ok(out)
}
