//! Parameter-independent densities of type-I and type-II integrands.
//!
//! Densities are taken against `prod_j d theta_j / 2 pi`, so on
//! `z = e^{i theta}` the measure factor `dz/(2 pi i z)` is already
//! absorbed and quadrature is a plain average. The combinatorial
//! constants `(p;p)^n (q;q)^n / (2^n n!)` stay inside the density so
//! identities transcribe literally.

use num_complex::Complex64;

use crate::efun::{egamma, egamma_recip, Base, GammaVariant, TruncationPolicy};
use crate::error::Result;
use crate::symalg::{Assignment, Monomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
}

/// Which density a variable group carries.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Number of integration variables; 0 is the empty group (density 1).
    pub dim: usize,
    /// Cross-term parameter; type II only.
    pub t: Option<Monomial>,
    pub variant: GammaVariant,
}

impl KernelSpec {
    pub fn type_i(dim: usize, variant: GammaVariant) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::TypeI,
            dim,
            t: None,
            variant,
        }
    }

    pub fn type_ii(dim: usize, t: Monomial, variant: GammaVariant) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::TypeII,
            dim,
            t: Some(t),
            variant,
        }
    }
}

/// `Gamma_B(c x^{+-1} y^{+-1})`: the product over all four sign choices.
pub fn gamma_orbit4(
    c: Complex64,
    x: Complex64,
    y: Complex64,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    Ok(egamma(c * x * y, base, pol)?
        * egamma(c * x / y, base, pol)?
        * egamma(c * y / x, base, pol)?
        * egamma(c / (x * y), base, pol)?)
}

/// `1 / Gamma_B(x^{+-1} y^{+-1})`.
pub fn gamma_orbit4_recip(
    x: Complex64,
    y: Complex64,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    Ok(egamma_recip(x * y, base, pol)?
        * egamma_recip(x / y, base, pol)?
        * egamma_recip(y / x, base, pol)?
        * egamma_recip((x * y).inv(), base, pol)?)
}

/// `1 / Gamma_B(z^{+-2})`.
pub fn gamma_square_recip(z: Complex64, base: &Base, pol: &TruncationPolicy) -> Result<Complex64> {
    let z2 = z * z;
    Ok(egamma_recip(z2, base, pol)? * egamma_recip(z2.inv(), base, pol)?)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `(P;P)^n (Q;Q)^n Gamma_B(t)^n / (2^n n!)` in the resolved base.
pub fn kernel_constant(
    n: usize,
    t: Option<Complex64>,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let pp = poch2_single(base.p, pol)?;
    let qq = poch2_single(base.q, pol)?;
    let mut c = (pp * qq).powi(n as i32) / (factorial(n) * 2f64.powi(n as i32));
    if let Some(t) = t {
        c *= egamma(t, base, pol)?.powi(n as i32);
    }
    Ok(c)
}

/// `(b; b)_inf`.
fn poch2_single(b: Complex64, pol: &TruncationPolicy) -> Result<Complex64> {
    crate::efun::qpoch1(b, b, pol)
}

/// The density of an empty group: the integral of an empty variable
/// group is 1.
pub fn n_zero_kernel() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Evaluates the kernel density at a point of the torus. `params`
/// supplies values for the generators of the cross-term monomial.
pub fn delta_density(
    spec: &KernelSpec,
    z: &[Complex64],
    params: &Assignment,
    base: &Base,
    pol: &TruncationPolicy,
) -> Result<Complex64> {
    assert_eq!(z.len(), spec.dim, "dimension mismatch");
    let b = spec.variant.resolve(base, false)?;
    if spec.dim == 0 {
        return Ok(n_zero_kernel());
    }
    let t_val = match (&spec.family, &spec.t) {
        (KernelFamily::TypeII, Some(t)) => Some(t.eval(params)?),
        (KernelFamily::TypeII, None) => {
            panic!("type-II kernel without cross parameter")
        }
        (KernelFamily::TypeI, _) => None,
    };
    let mut acc = kernel_constant(spec.dim, t_val, &b, pol)?;
    for j in 0..spec.dim {
        acc *= gamma_square_recip(z[j], &b, pol)?;
        for k in (j + 1)..spec.dim {
            acc *= gamma_orbit4_recip(z[j], z[k], &b, pol)?;
            if let Some(t) = t_val {
                acc *= gamma_orbit4(t, z[j], z[k], &b, pol)?;
            }
        }
    }
    Ok(acc)
}
