//! Shared error type.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    // symalg
    #[error("exponent or phase denominator would exceed 8: {0}")]
    DenominatorOverflow(String),
    #[error("generator `{0}` has no assigned value")]
    MissingAssignment(String),
    #[error("generator `{0}` is assigned zero; monomials require nonzero values")]
    ZeroAssignment(String),
    #[error("relation cannot be solved for `{gen}`: {reason}")]
    RelationUnsolvable { gen: String, reason: String },
    #[error("cannot parse monomial `{input}`: {reason}")]
    MonomialParse { input: String, reason: String },

    // efun
    #[error("base invalid: need 0 < |p| < 1 and 0 < |q| < 1, got |p|={p}, |q|={q}")]
    BaseInvalid { p: f64, q: f64 },
    #[error("half-base variant needs real p, q in (0,1); pass allow_complex_half to override")]
    HalfVariantComplexBase,
    #[error("argument {x} lies within {radius:e} of the pole at {pole} (p^-{a} q^-{b})")]
    PoleAtArgument {
        x: Complex64,
        pole: Complex64,
        a: u32,
        b: u32,
        radius: f64,
    },
    #[error("truncated product exceeded the {0}-term cap before reaching the cutoff")]
    TruncationCap(usize),

    // quad
    #[error("grid size {0} invalid: sizes must be powers of two and at least 8")]
    GridInvalid(usize),
    #[error("pole registry invalid: {0}")]
    RegistryInvalid(String),
    #[error("residue estimates at radii {r} and {r_half} disagree: |delta|={delta:e}")]
    ResidueUnstable { r: f64, r_half: f64, delta: f64 },
    #[error("quadrature did not converge: delta {delta:e} > rtol {rtol:e} at N={n}")]
    NonConvergence { delta: f64, rtol: f64, n: usize },

    // ispec
    #[error("balancing violated: {relation} has residual {residual:e}")]
    BalancingViolation { relation: String, residual: f64 },
    #[error("contour violated: {0}")]
    ContourViolation(String),
    #[error("unsupported factor degree pattern: {0}")]
    UnsupportedDegree(String),
    #[error("unknown group `{0}` in factor slot")]
    UnknownGroup(String),

    // fubini
    #[error("path enumeration exceeded the cap of {0} states")]
    PathCapExceeded(usize),

    // catalog / sampler
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error("identity `{name}` does not support n={n}, m={m}")]
    UnsupportedOrder { name: String, n: i64, m: i64 },
    #[error("sampling window infeasible: {0}")]
    WindowInfeasible(String),
    #[error("sampling failed after {attempts} attempts: {reason}")]
    SamplingFailed { attempts: usize, reason: String },
    #[error("catalog data error in `{file}`: {reason}")]
    CatalogData { file: String, reason: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
